//! Report emission: JSON documents plus flat CSVs, written into a
//! temporary sibling directory and renamed into place.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::{ReplicationStudy, ScatterPoint, StudyConfig, SweepReport, SweepRow};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n").map_err(|e| Error::file(path, e))?;
    Ok(())
}

/// Populates `dir` via `fill`, staging in a temporary directory next to
/// it. An existing `dir` is replaced only after `fill` succeeds.
pub fn write_atomically(dir: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => ".".into(),
    };
    fs::create_dir_all(&parent).map_err(|e| Error::file(&parent, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".replisel-staging-")
        .tempdir_in(&parent)
        .map_err(|e| Error::file(&parent, e))?;
    fill(staging.path())?;
    if dir.exists() {
        let old = tempfile::Builder::new()
            .prefix(".replisel-old-")
            .tempdir_in(&parent)
            .map_err(|e| Error::file(&parent, e))?;
        let trash = old.path().join("previous");
        fs::rename(dir, &trash).map_err(|e| Error::file(dir, e))?;
        fs::rename(staging.keep(), dir).map_err(|e| Error::file(dir, e))?;
    } else {
        fs::rename(staging.keep(), dir).map_err(|e| Error::file(dir, e))?;
    }
    Ok(())
}

/// `study.json`, `runs.csv`, `pairs.csv` and `dynamics.csv` into `dir`.
pub fn write_study_files(dir: &Path, study: &ReplicationStudy) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    write_json(&dir.join("study.json"), study)?;
    write_csv(
        &dir.join("runs.csv"),
        &["seed", "accuracy", "source_accuracy", "target_risk"],
        study.runs.iter().map(|r| {
            vec![
                r.seed.to_string(),
                r.target_accuracy.to_string(),
                opt(r.source_accuracy),
                opt(r.target_risk),
            ]
        }),
    )?;
    write_csv(
        &dir.join("pairs.csv"),
        &["i", "j", "diff"],
        study
            .pairs
            .iter()
            .map(|p| vec![p.i.to_string(), p.j.to_string(), p.diff.to_string()]),
    )?;
    write_csv(
        &dir.join("dynamics.csv"),
        &["epoch", "run", "min", "max", "std"],
        study.dynamics.iter().flat_map(|d| {
            d.runs.iter().enumerate().map(move |(run, w)| {
                vec![
                    d.epoch.to_string(),
                    run.to_string(),
                    w.min.to_string(),
                    w.max.to_string(),
                    w.std.to_string(),
                ]
            })
        }),
    )?;
    Ok(())
}

pub fn write_study(dir: &Path, study: &ReplicationStudy) -> Result<()> {
    write_atomically(dir, |tmp| write_study_files(tmp, study))
}

const SUMMARY_HEADER: [&str; 13] = [
    "name",
    "strategy",
    "protocol",
    "n_target",
    "seeds",
    "mean_accuracy",
    "std_accuracy",
    "failure_rate",
    "delta_closed_form",
    "delta_hat",
    "c",
    "bound_theorem",
    "bound_strategy",
];

fn summary_record(r: &SweepRow) -> Vec<String> {
    vec![
        r.name.clone(),
        r.strategy.clone(),
        r.protocol.to_string(),
        r.n_target.to_string(),
        r.seeds.to_string(),
        r.mean_accuracy.to_string(),
        r.std_accuracy.to_string(),
        r.failure_rate.to_string(),
        r.delta_closed_form.to_string(),
        opt(r.delta_hat),
        r.c.to_string(),
        r.bound_theorem.to_string(),
        r.bound_strategy.to_string(),
    ]
}

#[derive(Serialize)]
struct SweepDoc<'a> {
    schema_version: u32,
    rows: &'a [SweepRow],
    scatter: &'a [ScatterPoint],
    rank_correlation: Option<f64>,
    configs: Vec<&'a StudyConfig>,
}

/// Directory name for the `index`-th study of a sweep.
pub fn study_dir_name(index: usize, name: &str) -> String {
    let safe: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{index:02}-{safe}")
}

/// `sweep.json`, `summary.csv`, `scatter.csv` and one sub-directory per
/// study.
pub fn write_sweep(dir: &Path, report: &SweepReport) -> Result<()> {
    write_atomically(dir, |tmp| {
        write_json(
            &tmp.join("sweep.json"),
            &SweepDoc {
                schema_version: report.schema_version,
                rows: &report.rows,
                scatter: &report.scatter,
                rank_correlation: report.rank_correlation,
                configs: report.studies.iter().map(|s| &s.config).collect(),
            },
        )?;
        write_csv(&tmp.join("summary.csv"), &SUMMARY_HEADER, report.rows.iter().map(summary_record))?;
        write_csv(
            &tmp.join("scatter.csv"),
            &["name", "delta", "failure_rate"],
            report
                .scatter
                .iter()
                .map(|p| vec![p.name.clone(), p.delta.to_string(), p.failure_rate.to_string()]),
        )?;
        for (i, study) in report.studies.iter().enumerate() {
            write_study_files(&tmp.join(study_dir_name(i, &study.name)), study)?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_only_on_success() {
        let root = tempfile::tempdir().unwrap();
        let out = root.path().join("out");
        write_atomically(&out, |d| Ok(fs::write(d.join("a.txt"), "1")?)).unwrap();
        assert_eq!(fs::read_to_string(out.join("a.txt")).unwrap(), "1");
        let err = write_atomically(&out, |d| {
            fs::write(d.join("a.txt"), "2")?;
            Err(Error::InvalidConfig("boom".into()))
        });
        assert!(err.is_err());
        assert_eq!(fs::read_to_string(out.join("a.txt")).unwrap(), "1");
        write_atomically(&out, |d| Ok(fs::write(d.join("b.txt"), "3")?)).unwrap();
        assert!(!out.join("a.txt").exists());
        let leftovers: Vec<_> = fs::read_dir(root.path()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn dir_names_are_sanitized() {
        assert_eq!(study_dir_name(3, "cbs two/stage"), "03-cbs_two_stage");
    }
}
