use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::Result;
use crate::format::{to_json, write_atomic, CsvTable};

/// A row type with a fixed CSV layout.
pub trait Tabular {
    const HEADER: &'static [&'static str];

    fn cells(&self) -> Vec<String>;
}

pub fn to_table<R: Tabular>(rows: &[R]) -> CsvTable {
    let mut t = CsvTable::new(R::HEADER);
    for r in rows {
        t.push(r.cells());
    }
    t
}

/// Path of the provenance sidecar written next to `output`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Serialize)]
struct Sidecar<'a, E: Serialize> {
    version: &'static str,
    kind: &'a str,
    seed: u64,
    columns: &'a [&'static str],
    rows: usize,
    config: ConfigEcho,
    extra: E,
}

/// The configuration as it affects results: worker count and output path
/// are left out so reruns with other values produce identical sidecars.
#[derive(Serialize)]
struct ConfigEcho(serde_json::Value);

impl ConfigEcho {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let mut v = serde_json::to_value(cfg)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("workers");
            obj.remove("output_path");
        }
        Ok(ConfigEcho(v))
    }
}

/// Writes `table` as CSV to `output` and a JSON provenance sidecar next to
/// it, both atomically.
pub fn write_outputs<E: Serialize>(
    output: &Path,
    kind: &str,
    cfg: &ExperimentConfig,
    table: &CsvTable,
    extra: E,
) -> Result<()> {
    let sidecar = Sidecar {
        version: crate::VERSION,
        kind,
        seed: cfg.seed,
        columns: table.header(),
        rows: table.rows().len(),
        config: ConfigEcho::new(cfg)?,
        extra,
    };
    write_atomic(output, table.render().as_bytes())?;
    write_atomic(&sidecar_path(output), to_json(&sidecar)?.as_bytes())
}
