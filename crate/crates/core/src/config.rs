//! Run configuration: a TOML file with unit-suffixed keys, dotted-path
//! overrides and an output-directory environment override.
//!
//! Every field is optional; anything left out takes its default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DeviceSpec, GridSpec};
use crate::modesolver::SolverSettings;
use crate::sweep::Range;

/// Overrides `output_dir` when set.
pub const OUT_DIR_ENV: &str = "BSA_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub device: DeviceSpec,
    pub solver: SolverSettings,
    /// Grid used for coupled-pair solves.
    pub grid: GridSpec,
    pub modes: ModesConfig,
    pub fiber: FiberConfig,
    pub sweeps: SweepConfig,
    pub acceptance: AcceptanceBands,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeGeometry {
    #[default]
    Rib,
    Pair,
    /// Cladding only, no film.
    Cladding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModesConfig {
    pub geometry: ModeGeometry,
    pub count: usize,
    pub write_fields: bool,
}

impl Default for ModesConfig {
    fn default() -> Self {
        ModesConfig { geometry: ModeGeometry::Rib, count: 2, write_fields: true }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: PathBuf::from("out"),
            device: DeviceSpec::default(),
            solver: SolverSettings::default(),
            grid: GridSpec::default(),
            modes: ModesConfig::default(),
            fiber: FiberConfig::default(),
            sweeps: SweepConfig::default(),
            acceptance: AcceptanceBands::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberConfig {
    /// Grid for the single-rib solve; fields are zero-padded as needed.
    pub grid: GridSpec,
    pub na: Range,
}

impl Default for FiberConfig {
    fn default() -> Self {
        FiberConfig { grid: GridSpec::default(), na: Range::new(0.1, 0.6, 11) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub xi_map: XiMapConfig,
    /// Gaps for the ξ(g) and Δn(g) curves.
    pub gap_scan_nm: Range,
    /// Gaps tabulated for the Δn interpolation used by bends and δ(g).
    pub table_gaps_nm: Vec<f64>,
    pub delta: DeltaConfig,
    pub split: SplitConfig,
    pub error: ErrorConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            xi_map: XiMapConfig::default(),
            gap_scan_nm: Range::new(40.0, 120.0, 5),
            table_gaps_nm: vec![
                20.0, 30.0, 40.0, 50.0, 60.0, 65.0, 80.0, 100.0, 120.0, 150.0, 200.0, 275.0, 375.0, 500.0,
            ],
            delta: DeltaConfig::default(),
            split: SplitConfig::default(),
            error: ErrorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XiMapConfig {
    pub widths_nm: Range,
    pub etch_depths_nm: Range,
    pub gap_nm: f64,
}

impl Default for XiMapConfig {
    fn default() -> Self {
        XiMapConfig {
            widths_nm: Range::new(400.0, 550.0, 4),
            etch_depths_nm: Range::new(80.0, 140.0, 4),
            gap_nm: 65.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeltaConfig {
    pub gap_range_nm: (f64, f64),
    pub tolerance_nm: f64,
    /// Points on the exported δ(g) curve.
    pub plot_samples: usize,
    pub lc_range_um: (f64, f64),
    pub lc_samples: usize,
}

impl Default for DeltaConfig {
    fn default() -> Self {
        DeltaConfig {
            gap_range_nm: (30.0, 80.0),
            tolerance_nm: 0.1,
            plot_samples: 26,
            lc_range_um: (1.0, 25.0),
            lc_samples: 241,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub lc_range_um: (f64, f64),
    pub samples: usize,
    /// Untuned gap shown for comparison with the optimized one.
    pub reference_gap_nm: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { lc_range_um: (1.0, 25.0), samples: 241, reference_gap_nm: 65.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorConfig {
    pub lc_range_um: (f64, f64),
    pub tolerance_um: f64,
    pub plot_samples: usize,
}

impl Default for ErrorConfig {
    fn default() -> Self {
        ErrorConfig { lc_range_um: (12.5, 15.0), tolerance_um: 1e-4, plot_samples: 101 }
    }
}

/// Pass/fail bands for the `reproduce` summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcceptanceBands {
    /// Width and etch depth where ξ is checked.
    pub xi_point_nm: (f64, f64),
    pub xi_range: (f64, f64),
    pub gap_argmin_nm: (f64, f64),
    pub lc_argmin_um: (f64, f64),
    pub max_error: f64,
    pub na_check: f64,
    pub eta_range: (f64, f64),
    pub max_eta_difference: f64,
}

impl Default for AcceptanceBands {
    fn default() -> Self {
        AcceptanceBands {
            xi_point_nm: (475.0, 110.0),
            xi_range: (0.9, 1.1),
            gap_argmin_nm: (25.0, 55.0),
            lc_argmin_um: (12.5, 15.0),
            max_error: 1e-3,
            na_check: 0.6,
            eta_range: (0.5, 0.8),
            max_eta_difference: 0.03,
        }
    }
}

impl RunConfig {
    /// Reads `path` (or starts from defaults), applies `key.path=value`
    /// overrides, then the output-directory environment variable.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut cfg = Self::from_toml_with_overrides(&text, overrides)?;
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()) {
            cfg.output_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let parse_err = |e: toml::de::Error| Error::Config(e.to_string());
        // the file alone first, so errors carry line numbers
        let base = toml::from_str::<RunConfig>(text).map_err(parse_err)?;
        // overrides land on the fully defaulted tree, so a single nested field can change alone
        let mut table = toml::Table::try_from(&base).expect("configuration serializes");
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = table.try_into().map_err(parse_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.grid.validate()?;
        self.fiber.grid.validate()?;
        let s = &self.sweeps;
        s.xi_map.widths_nm.validate("sweeps.xi_map.widths_nm")?;
        s.xi_map.etch_depths_nm.validate("sweeps.xi_map.etch_depths_nm")?;
        s.gap_scan_nm.validate("sweeps.gap_scan_nm")?;
        self.fiber.na.validate("fiber.na")?;
        if self.modes.count == 0 {
            return Err(Error::invalid("modes.count", "request at least one mode"));
        }
        if s.table_gaps_nm.len() < 2 || s.table_gaps_nm.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("sweeps.table_gaps_nm", "need at least two strictly increasing gaps"));
        }
        for (name, (a, b)) in [
            ("sweeps.delta.gap_range_nm", s.delta.gap_range_nm),
            ("sweeps.delta.lc_range_um", s.delta.lc_range_um),
            ("sweeps.split.lc_range_um", s.split.lc_range_um),
            ("sweeps.error.lc_range_um", s.error.lc_range_um),
        ] {
            if !(a < b) {
                return Err(Error::invalid(name, format!("need min < max, got [{a}, {b}]")));
            }
        }
        if s.delta.gap_range_nm.0 < s.table_gaps_nm[0] {
            return Err(Error::invalid("sweeps.delta.gap_range_nm", "starts below the smallest tabulated gap"));
        }
        if s.delta.lc_samples < 2 || s.split.samples < 2 || s.error.plot_samples < 2 || s.delta.plot_samples < 2 {
            return Err(Error::invalid("sweeps", "every sampled curve needs at least 2 samples"));
        }
        Ok(())
    }
}

/// Sets `a.b.c = value` in `table`, creating intermediate tables. The value
/// is parsed as a TOML value and falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key.path=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override `{assignment}` has an empty key segment")));
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().unwrap();
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
