//! Study and sweep configuration files.
//!
//! A study config is resolved in three layers: the built-in defaults
//! (`StudyConfig::default()`), then the file, then `key.path=value`
//! overrides. Tables that carry a `kind` tag are replaced rather than
//! merged when the tag changes, so switching strategy never leaks the
//! previous strategy's parameters.
//!
//! Sweep files hold a `[base]` study table, optional `[[variant]]` tables
//! merged over it, and an optional `[grid]` whose `strategies`,
//! `protocols` and `n_target` lists expand every variant into their
//! cartesian product.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::harness::StudyConfig;
use crate::strategies::StrategyConfig;

/// The fully populated default study as a TOML table.
pub fn defaults_table() -> Table {
    Table::try_from(StudyConfig::default()).expect("default config serializes")
}

/// Deep merge of `over` into `base`.
pub fn merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) if b.get("kind") == o.get("kind") || !o.contains_key("kind") => {
                merge(b, o)
            }
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

/// Splits `a.b.c=value`. The value is read as a TOML literal, falling back
/// to a bare string.
pub fn parse_override(item: &str) -> Result<(Vec<String>, Value)> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override `{item}` is not of the form key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        return Err(Error::InvalidConfig(format!("override `{item}` has an empty key segment")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((path, value))
}

pub fn apply_override(table: &mut Table, path: &[String], value: Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("override path is non-empty");
    let mut cur = table;
    for (depth, seg) in parents.iter().enumerate() {
        let slot = cur.entry(seg.clone()).or_insert_with(|| Value::Table(Table::new()));
        cur = slot.as_table_mut().ok_or_else(|| {
            Error::InvalidConfig(format!("`{}` is not a table", path[..=depth].join(".")))
        })?;
    }
    match (cur.get_mut(last), value) {
        (Some(Value::Table(b)), Value::Table(o)) if !o.contains_key("kind") => merge(b, o),
        (_, value) => {
            cur.insert(last.clone(), value);
        }
    }
    Ok(())
}

fn apply_overrides(table: &mut Table, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (path, value) = parse_override(item)?;
        apply_override(table, &path, value)?;
    }
    Ok(())
}

/// Reads a TOML file, or a JSON file (such as an emitted report) converted
/// to the same tree.
pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        let json: serde_json::Value = serde_json::from_str(&text)?;
        Table::try_from(json).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    } else {
        Ok(toml::from_str(&text)?)
    }
}

fn finish(table: Table) -> Result<StudyConfig> {
    let cfg: StudyConfig = Value::Table(table).try_into()?;
    cfg.validate()?;
    Ok(cfg)
}

/// Defaults, then `file`, then `overrides`. A report's `config` table is
/// used when `file` is an emitted study report.
pub fn resolve_study(file: Option<Table>, overrides: &[String]) -> Result<StudyConfig> {
    let mut table = defaults_table();
    if let Some(mut f) = file {
        let f = match f.remove("config") {
            Some(Value::Table(embedded)) => embedded,
            Some(other) => {
                f.insert("config".into(), other);
                f
            }
            None => f,
        };
        merge(&mut table, f);
    }
    apply_overrides(&mut table, overrides)?;
    finish(table)
}

pub fn load_study(path: Option<&Path>, overrides: &[String]) -> Result<StudyConfig> {
    resolve_study(path.map(read_table).transpose()?, overrides)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub strategies: Vec<String>,
    pub protocols: Vec<String>,
    pub n_target: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SweepFile {
    base: Table,
    variant: Vec<Table>,
    grid: Grid,
}

fn grid_tables(grid: &Grid) -> Result<Vec<(String, Table)>> {
    let mut out = vec![(String::new(), Table::new())];
    if !grid.strategies.is_empty() {
        let mut next = Vec::new();
        for (name, t) in &out {
            for s in &grid.strategies {
                let cfg = StrategyConfig::default_for(s)?;
                let mut t = t.clone();
                t.insert("strategy".into(), Value::try_from(cfg).expect("strategy serializes"));
                next.push((format!("{name}-{s}"), t));
            }
        }
        out = next;
    }
    if !grid.protocols.is_empty() {
        let mut next = Vec::new();
        for (name, t) in &out {
            for p in &grid.protocols {
                let mut t = t.clone();
                t.insert("protocol".into(), Value::String(p.clone()));
                next.push((format!("{name}-{p}"), t));
            }
        }
        out = next;
    }
    if !grid.n_target.is_empty() {
        let mut next = Vec::new();
        for (name, t) in &out {
            for &n in &grid.n_target {
                let mut t = t.clone();
                let mut data = Table::new();
                data.insert("n_target".into(), Value::Integer(n as i64));
                t.insert("data".into(), Value::Table(data));
                next.push((format!("{name}-n{n}"), t));
            }
        }
        out = next;
    }
    Ok(out)
}

/// Expands a sweep file into resolved study configs. Overrides apply to
/// every study after the variant and grid layers. An emitted sweep report
/// (with a `configs` list) is accepted as-is.
pub fn resolve_sweep(file: Table, overrides: &[String]) -> Result<Vec<StudyConfig>> {
    if let Some(Value::Array(configs)) = file.get("configs") {
        return configs
            .iter()
            .map(|c| match c {
                Value::Table(t) => resolve_study(Some(t.clone()), overrides),
                _ => Err(Error::InvalidConfig("configs entries must be tables".into())),
            })
            .collect();
    }
    let sweep_file: SweepFile = Value::Table(file).try_into()?;
    let variants = if sweep_file.variant.is_empty() {
        vec![Table::new()]
    } else {
        sweep_file.variant
    };
    let cells = grid_tables(&sweep_file.grid)?;
    let mut out = Vec::new();
    for variant in &variants {
        for (suffix, cell) in &cells {
            let mut table = defaults_table();
            merge(&mut table, sweep_file.base.clone());
            merge(&mut table, variant.clone());
            merge(&mut table, cell.clone());
            apply_overrides(&mut table, overrides)?;
            let name = table.get("name").and_then(Value::as_str).unwrap_or_default().to_string();
            if !suffix.is_empty() {
                let stem = if name.is_empty() { "study" } else { name.as_str() };
                let named = if name.is_empty() { suffix.trim_start_matches('-').to_string() } else { format!("{stem}{suffix}") };
                table.insert("name".into(), Value::String(named));
            }
            out.push(finish(table)?);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig("sweep defines no studies".into()));
    }
    Ok(out)
}

pub fn load_sweep(path: &Path, overrides: &[String]) -> Result<Vec<StudyConfig>> {
    resolve_sweep(read_table(path)?, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{DataSource, Protocol};

    fn table(s: &str) -> Table {
        toml::from_str(s).unwrap()
    }

    #[test]
    fn defaults_resolve_to_default_config() {
        assert_eq!(resolve_study(None, &[]).unwrap(), StudyConfig::default());
    }

    #[test]
    fn precedence_cli_over_file_over_default() {
        let file = table("epsilon = 0.02\n[hyper_target]\nlr = 0.1\n");
        let cfg = resolve_study(Some(file.clone()), &[]).unwrap();
        assert_eq!(cfg.epsilon, 0.02);
        assert_eq!(cfg.hyper_target.lr, 0.1);
        assert_eq!(cfg.hyper_target.epochs, StudyConfig::default().hyper_target.epochs);
        let cfg = resolve_study(Some(file), &["epsilon=0.03".into(), "hyper_target.epochs=4".into()]).unwrap();
        assert_eq!(cfg.epsilon, 0.03);
        assert_eq!(cfg.hyper_target.lr, 0.1);
        assert_eq!(cfg.hyper_target.epochs, 4);
    }

    #[test]
    fn strategy_switch_replaces_table() {
        let file = table("[strategy]\nkind = \"confidence_sampling\"\ntau = 0.5\n");
        let cfg = resolve_study(Some(file.clone()), &["strategy={kind=\"uniform\"}".into()]).unwrap();
        assert_eq!(cfg.strategy, StrategyConfig::Uniform);
        let cfg = resolve_study(Some(file), &["strategy.w_max=2.0".into()]).unwrap();
        assert_eq!(
            cfg.strategy,
            StrategyConfig::ConfidenceSampling {
                tau: 0.5,
                w_min: 0.01,
                w_max: 2.0
            }
        );
    }

    #[test]
    fn override_values() {
        let (p, v) = parse_override("protocol=direct").unwrap();
        assert_eq!(p, vec!["protocol"]);
        assert_eq!(v, Value::String("direct".into()));
        let (_, v) = parse_override("seeds=[1, 2]").unwrap();
        assert_eq!(v, Value::Array(vec![Value::Integer(1), Value::Integer(2)]));
        assert!(parse_override("noequals").is_err());
        assert!(parse_override("a..b=1").is_err());
        assert!(resolve_study(None, &["epsilon.x=1".into()]).is_err());
    }

    #[test]
    fn validation_lists_every_violation() {
        let err = resolve_study(None, &["epsilon=-1".into(), "seeds=[1]".into(), "hyper_target.lr=-2".into()]).unwrap_err();
        match err {
            Error::Validation(v) => assert_eq!(v.len(), 3, "{v:?}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(resolve_study(Some(table("epsilom = 0.1")), &[]).is_err());
    }

    #[test]
    fn embedded_report_config_round_trips() {
        let cfg = resolve_study(None, &["protocol=direct".into(), "seeds=[3,4]".into()]).unwrap();
        let report = serde_json::json!({ "schema_version": 1, "config": cfg });
        let t = Table::try_from(report).unwrap();
        assert_eq!(resolve_study(Some(t), &[]).unwrap(), cfg);
    }

    #[test]
    fn sweep_grid_expands() {
        let file = table(
            "[base]\nseeds = [1, 2]\n[grid]\nstrategies = [\"uniform\", \"curriculum\"]\nprotocols = [\"direct\", \"two_stage\"]\nn_target = [100, 200]\n",
        );
        let cfgs = resolve_sweep(file, &[]).unwrap();
        assert_eq!(cfgs.len(), 8);
        assert_eq!(cfgs[0].name, "uniform-direct-n100");
        assert_eq!(cfgs[0].protocol, Protocol::Direct);
        match &cfgs[7].data {
            DataSource::Synthetic(s) => assert_eq!(s.n_target, 200),
            _ => unreachable!(),
        }
        assert!(cfgs.iter().all(|c| c.seeds == vec![1, 2]));
    }

    #[test]
    fn sweep_variants_merge_over_base() {
        let file = table(
            "[base]\nepsilon = 0.05\n[[variant]]\nname = \"a\"\n[[variant]]\nname = \"b\"\nepsilon = 0.02\n",
        );
        let cfgs = resolve_sweep(file, &[]).unwrap();
        assert_eq!(cfgs.iter().map(|c| c.epsilon).collect::<Vec<_>>(), vec![0.05, 0.02]);
        assert!(resolve_sweep(table("[grid]\nstrategies = [\"nope\"]\n"), &[]).is_err());
    }
}
