//! Reading input directories and files, writing outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use srdm_core::{load_image, GrayImage, ImageTriple};

use crate::error::{CliError, CliResult};

const IMAGE_EXTENSIONS: &[&str] = &["png", "pgm", "ppm", "pnm", "pbm", "pam"];

/// Image files of `dir` keyed by file stem.
pub fn list_images(dir: &Path) -> CliResult<BTreeMap<String, PathBuf>> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| CliError::input(format!("cannot read directory {}: {e}", dir.display())))?;
    let mut found = BTreeMap::new();
    for entry in entries {
        let path = entry
            .map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?
            .path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !path.is_file() || !ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            continue;
        }
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if let Some(prev) = found.insert(stem.clone(), path.clone()) {
            return Err(CliError::input(format!(
                "{} and {} share the stem `{stem}`",
                prev.display(),
                path.display()
            )));
        }
    }
    Ok(found)
}

/// Pairs up files with the same stem across `dirs` (label, path). Every stem
/// must be present everywhere; the error lists what is missing where.
pub fn match_stems(dirs: &[(&str, &Path)]) -> CliResult<Vec<(String, Vec<PathBuf>)>> {
    let listings: Vec<BTreeMap<String, PathBuf>> =
        dirs.iter().map(|(_, d)| list_images(d)).collect::<CliResult<_>>()?;
    let all: BTreeSet<&String> = listings.iter().flat_map(|l| l.keys()).collect();
    if all.is_empty() {
        return Err(CliError::input("no image files found in the input directories"));
    }
    let mut problems = Vec::new();
    for ((label, dir), listing) in dirs.iter().zip(&listings) {
        let missing: Vec<&str> = all
            .iter()
            .filter(|s| !listing.contains_key(**s))
            .map(|s| s.as_str())
            .collect();
        if !missing.is_empty() {
            problems.push(format!(
                "{label} ({}) is missing: {}",
                dir.display(),
                missing.join(", ")
            ));
        }
    }
    if !problems.is_empty() {
        return Err(CliError::input(format!(
            "unmatched file names; {}",
            problems.join("; ")
        )));
    }
    Ok(all
        .into_iter()
        .map(|stem| (stem.clone(), listings.iter().map(|l| l[stem].clone()).collect()))
        .collect())
}

/// Decodes every matched group of files, in stem order.
pub fn load_matched(matched: &[(String, Vec<PathBuf>)]) -> CliResult<Vec<Vec<GrayImage>>> {
    matched
        .par_iter()
        .map(|(_, paths)| paths.iter().map(|p| load_image(p).map_err(CliError::from)).collect())
        .collect()
}

/// Stems and triples from LR, ground-truth HR and generated HR directories.
pub fn load_triples(lr: &Path, hr: &Path, sr: &Path) -> CliResult<(Vec<String>, Vec<ImageTriple>)> {
    let matched = match_stems(&[("lr_dir", lr), ("hr_dir", hr), ("sr_dir", sr)])?;
    let images = load_matched(&matched)?;
    let stems = matched.into_iter().map(|(s, _)| s).collect();
    let triples = images
        .into_iter()
        .map(|mut v| {
            let hr_gen = v.pop().expect("three images");
            let hr_gt = v.pop().expect("three images");
            let lr = v.pop().expect("three images");
            ImageTriple { lr, hr_gt, hr_gen }
        })
        .collect();
    Ok((stems, triples))
}

/// All numbers of a CSV file in reading order. A leading header row is
/// skipped when none of its cells is a number.
pub fn read_numbers(path: &Path) -> CliResult<Vec<f64>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let cells: Vec<&str> = rec.iter().filter(|c| !c.is_empty()).collect();
        if i == 0 && !cells.is_empty() && cells.iter().all(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        for c in cells {
            let v: f64 = c
                .parse()
                .map_err(|_| CliError::input(format!("{}: `{c}` on line {} is not a number", path.display(), i + 1)))?;
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(CliError::input(format!("{} contains no values", path.display())));
    }
    Ok(values)
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, content: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::internal(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, content).map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))
}
