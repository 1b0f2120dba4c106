//! Design-space sweeps and 1-D minimization: ξ maps and their unit
//! contour, δ(g) and E(L_c) optimization, and a process-wide memo of
//! coupling strengths.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::bellstate::fidelity_closed_form;
use crate::coupler::{delta_for_model, linspace, DeltaNEntry, DeltaNTable, TransferModel};
use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::fiber::FiberCoupling;
use crate::geometry::{CoupledPair, DeviceSpec, GridSpec, MaterialStack};
use crate::modesolver::{coupling_strength, Boundary, CouplingStrength, SolverSettings};

/// Points in the bracketing scan that precedes every golden-section search.
pub const COARSE_POINTS: usize = 11;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    WidthNm,
    EtchDepthNm,
    GapNm,
    CouplingLengthUm,
    Na,
}

impl Parameter {
    pub fn label(self) -> &'static str {
        match self {
            Parameter::WidthNm => "width_nm",
            Parameter::EtchDepthNm => "etch_depth_nm",
            Parameter::GapNm => "gap_nm",
            Parameter::CouplingLengthUm => "coupling_length_um",
            Parameter::Na => "na",
        }
    }
}

/// Inclusive, uniformly sampled range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

impl Range {
    pub fn new(min: f64, max: f64, samples: usize) -> Self {
        Range { min, max, samples }
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.min, self.max, self.samples)
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        if self.samples == 0 || !(self.min <= self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::invalid(name, format!("bad range [{}, {}] × {}", self.min, self.max, self.samples)));
        }
        if self.samples > 1 && self.min == self.max {
            return Err(Error::invalid(name, "several samples over an empty range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: Parameter,
    #[serde(flatten)]
    pub range: Range,
}

/// One- or two-axis sweep over a device template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
    #[serde(default)]
    pub device: DeviceSpec,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::invalid("axes", format!("need one or two axes, got {}", self.axes.len())));
        }
        for a in &self.axes {
            a.range.validate("axes")?;
            if a.range.samples < 2 {
                return Err(Error::invalid("axes", format!("{} needs at least 2 samples", a.parameter.label())));
            }
        }
        if self.axes.len() == 2 && self.axes[0].parameter == self.axes[1].parameter {
            return Err(Error::invalid("axes", "the two axes must differ"));
        }
        Ok(())
    }

    /// Every sample point, first axis varying slowest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = vec![Vec::new()];
        for a in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    a.range.values().into_iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        out
    }
}

/// Applies one swept value to a device.
pub fn apply(device: &DeviceSpec, parameter: Parameter, value: f64) -> DeviceSpec {
    let mut d = *device;
    match parameter {
        Parameter::WidthNm => d.pair.rib.width_nm = value,
        Parameter::EtchDepthNm => d.pair.rib.etch_depth_nm = value,
        Parameter::GapNm => d = d.with_gap(value),
        Parameter::CouplingLengthUm => d.coupling_length_um = value,
        Parameter::Na => {}
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizationReport {
    pub argmin: f64,
    pub min_value: f64,
    pub samples_evaluated: usize,
    pub bracket: (f64, f64),
    /// Set when the bracketing scan found its best point on the range edge.
    pub boundary: bool,
}

/// Golden-section reduction of `[a, b]` until the bracket is below `tol`.
pub fn golden_section<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<OptimizationReport>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a < b) {
        return Err(Error::invalid("bracket", format!("need a < b, got [{a}, {b}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let mut eval = |x: f64| -> Result<f64> {
        let v = f(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { x })
        }
    };
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
    let mut n = 2;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = eval(x2)?;
        }
        n += 1;
    }
    let (argmin, min_value) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    Ok(OptimizationReport { argmin, min_value, samples_evaluated: n, bracket: (lo, hi), boundary: false })
}

/// Coarse scan of `COARSE_POINTS` points (evaluated in parallel) followed
/// by golden-section refinement around the best scan point.
pub fn minimize<F>(f: F, a: f64, b: f64, tol: f64) -> Result<OptimizationReport>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if !(a < b) {
        return Err(Error::invalid("bracket", format!("need a < b, got [{a}, {b}]")));
    }
    let xs = linspace(a, b, COARSE_POINTS);
    let ys: Vec<f64> = par_map(&xs, |&x| match f(x) {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(Error::NonFinite { x }),
        Err(e) => Err(e),
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let k = (0..ys.len()).fold(0, |best, i| if ys[i] < ys[best] { i } else { best });
    let lo = xs[k.saturating_sub(1)];
    let hi = xs[(k + 1).min(xs.len() - 1)];
    let mut r = golden_section(&f, lo, hi, tol)?;
    r.samples_evaluated += COARSE_POINTS;
    if ys[k] < r.min_value {
        r.argmin = xs[k];
        r.min_value = ys[k];
    }
    r.boundary = k == 0 || k == xs.len() - 1;
    Ok(r)
}

type CacheKey = Vec<u64>;

fn cache() -> &'static RwLock<HashMap<CacheKey, CouplingStrength>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, CouplingStrength>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn cache_key(pair: &CoupledPair, stack: &MaterialStack, grid: &GridSpec, s: &SolverSettings) -> CacheKey {
    let boundary = |b: Boundary| b as u64;
    let mut k: Vec<u64> = [
        pair.rib.width_nm,
        pair.rib.etch_depth_nm,
        pair.rib.sidewall_angle_deg,
        pair.gap_nm,
        stack.n_core,
        stack.n_clad,
        stack.film_thickness_nm,
        stack.box_thickness_um,
        stack.clad_thickness_um,
        stack.wavelength_nm,
        grid.dx_nm,
        grid.dy_nm,
        grid.width_um,
        grid.height_um,
        s.n_guess.unwrap_or(f64::NAN),
        s.tolerance,
    ]
    .iter()
    .map(|v| v.to_bits())
    .collect();
    k.extend([
        pair.rib.width_reference as u64,
        s.max_restarts as u64,
        s.krylov_dim.map_or(u64::MAX, |d| d as u64),
        boundary(s.boundary_x),
        boundary(s.boundary_y),
        s.pair_modes as u64,
    ]);
    k
}

/// [`coupling_strength`] memoized on geometry, grid and solver settings.
pub fn cached_coupling_strength(
    pair: &CoupledPair,
    stack: &MaterialStack,
    grid: &GridSpec,
    settings: &SolverSettings,
) -> Result<CouplingStrength> {
    let key = cache_key(pair, stack, grid, settings);
    if let Some(c) = cache().read().unwrap_or_else(|e| e.into_inner()).get(&key) {
        return Ok(*c);
    }
    let c = coupling_strength(pair, stack, grid, settings)?;
    cache().write().unwrap_or_else(|e| e.into_inner()).insert(key, c);
    Ok(c)
}

pub fn cached_entries() -> usize {
    cache().read().unwrap_or_else(|e| e.into_inner()).len()
}

/// Δn table over `gaps_nm` for the pair geometry of `device`.
pub fn build_delta_n_table(
    device: &DeviceSpec,
    grid: &GridSpec,
    settings: &SolverSettings,
    gaps_nm: &[f64],
) -> Result<DeltaNTable> {
    let rows: Vec<CouplingStrength> = par_map(gaps_nm, |&g| {
        cached_coupling_strength(&device.pair.with_gap(g), &device.stack, grid, settings)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    DeltaNTable::new(rows.iter().map(DeltaNEntry::from).collect())
}

/// ξ over a width × etch-depth grid at a fixed gap. Failed cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct XiMap {
    pub widths_nm: Vec<f64>,
    pub etch_depths_nm: Vec<f64>,
    pub gap_nm: f64,
    /// Row-major over etch depth: `values[j * widths.len() + i]`.
    pub values: Vec<Option<f64>>,
}

impl XiMap {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[j * self.widths_nm.len() + i]
    }
}

pub fn xi_map(
    widths: &Range,
    etch_depths: &Range,
    gap_nm: f64,
    device: &DeviceSpec,
    grid: &GridSpec,
    settings: &SolverSettings,
) -> Result<XiMap> {
    widths.validate("widths")?;
    etch_depths.validate("etch_depths")?;
    let (ws, hs) = (widths.values(), etch_depths.values());
    let cells: Vec<(f64, f64)> = hs.iter().flat_map(|&h| ws.iter().map(move |&w| (w, h))).collect();
    let values = par_map(&cells, |&(w, h)| {
        let mut pair = device.pair.with_gap(gap_nm);
        pair.rib.width_nm = w;
        pair.rib.etch_depth_nm = h;
        match cached_coupling_strength(&pair, &device.stack, grid, settings) {
            Ok(c) => Some(c.xi),
            Err(e) => {
                log::warn!("ξ map cell (w = {w} nm, h_e = {h} nm) failed: {e}");
                None
            }
        }
    });
    Ok(XiMap { widths_nm: ws, etch_depths_nm: hs, gap_nm, values })
}

pub type Polyline = Vec<(f64, f64)>;

/// Level-`level` contour of a ξ map by marching squares with linear
/// interpolation along cell edges, chained into polylines. Squares with a
/// missing corner are skipped.
pub fn contour(map: &XiMap, level: f64) -> Vec<Polyline> {
    let (nw, nh) = (map.widths_nm.len(), map.etch_depths_nm.len());
    if nw < 2 || nh < 2 {
        return Vec::new();
    }
    let pt = |i: usize, j: usize| (map.widths_nm[i], map.etch_depths_nm[j]);
    let mut segments: Vec<((f64, f64), (f64, f64))> = Vec::new();
    for j in 0..nh - 1 {
        for i in 0..nw - 1 {
            // corners counter-clockwise from lower-left
            let idx = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let Some(v): Option<Vec<f64>> = idx.iter().map(|&(a, b)| map.get(a, b)).collect() else {
                continue;
            };
            let above: Vec<bool> = v.iter().map(|&x| x >= level).collect();
            let mut cross = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                if above[a] != above[b] {
                    let t = (level - v[a]) / (v[b] - v[a]);
                    let (pa, pb) = (pt(idx[a].0, idx[a].1), pt(idx[b].0, idx[b].1));
                    cross.push((e, (pa.0 + t * (pb.0 - pa.0), pa.1 + t * (pb.1 - pa.1))));
                }
            }
            match cross.len() {
                2 => segments.push((cross[0].1, cross[1].1)),
                4 => {
                    // saddle: the center value decides which corners connect
                    let center = 0.25 * v.iter().sum::<f64>();
                    if (center >= level) == above[0] {
                        segments.push((cross[0].1, cross[1].1));
                        segments.push((cross[2].1, cross[3].1));
                    } else {
                        segments.push((cross[3].1, cross[0].1));
                        segments.push((cross[1].1, cross[2].1));
                    }
                }
                _ => {}
            }
        }
    }
    chain(segments)
}

pub fn xi_unity_contour(map: &XiMap) -> Vec<Polyline> {
    contour(map, 1.0)
}

fn close(a: (f64, f64), b: (f64, f64)) -> bool {
    (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9
}

fn chain(mut segments: Vec<((f64, f64), (f64, f64))>) -> Vec<Polyline> {
    let mut lines = Vec::new();
    while let Some((a, b)) = segments.pop() {
        let mut line = std::collections::VecDeque::from([a, b]);
        loop {
            let back = *line.back().unwrap();
            let front = *line.front().unwrap();
            if let Some(k) = segments.iter().position(|s| close(s.0, back) || close(s.1, back)) {
                let s = segments.swap_remove(k);
                line.push_back(if close(s.0, back) { s.1 } else { s.0 });
            } else if let Some(k) = segments.iter().position(|s| close(s.0, front) || close(s.1, front)) {
                let s = segments.swap_remove(k);
                line.push_front(if close(s.0, front) { s.1 } else { s.0 });
            } else {
                break;
            }
        }
        lines.push(line.into_iter().collect());
    }
    lines
}

/// Minimizes δ over the coupling-region gap, with the S-bend ending at
/// each trial gap.
pub fn minimize_delta_over_gap(
    g_range_nm: (f64, f64),
    device: &DeviceSpec,
    table: &DeltaNTable,
    lc_range_um: (f64, f64),
    lc_samples: usize,
    tol_nm: f64,
) -> Result<OptimizationReport> {
    let f = |g: f64| delta_at_gap(g, device, table, lc_range_um, lc_samples);
    minimize(f, g_range_nm.0, g_range_nm.1, tol_nm)
}

pub fn delta_at_gap(
    gap_nm: f64,
    device: &DeviceSpec,
    table: &DeltaNTable,
    lc_range_um: (f64, f64),
    lc_samples: usize,
) -> Result<f64> {
    let model = TransferModel::new(&device.with_gap(gap_nm), table)?;
    delta_for_model(&model, lc_range_um, lc_samples)
}

/// Entanglement error of the device as a function of coupling length.
pub fn error_at_length(model: &TransferModel, coupling_length_um: f64) -> Result<f64> {
    Ok(fidelity_closed_form(&model.transfer_at(coupling_length_um))?.error)
}

pub fn minimize_error_over_lc(
    lc_range_um: (f64, f64),
    device: &DeviceSpec,
    table: &DeltaNTable,
    tol_um: f64,
) -> Result<OptimizationReport> {
    let model = TransferModel::new(device, table)?;
    minimize(|l| error_at_length(&model, l), lc_range_um.0, lc_range_um.1, tol_um)
}

/// Tabular result of a generic sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Evaluates a sweep. The swept parameters pick the quantity:
/// a numerical-aperture axis gives fiber efficiencies, a coupling-length
/// axis gives port powers, ζ and entanglement error, and geometry-only
/// sweeps give coupling strengths. Failed points leave empty cells.
pub fn run_sweep(
    spec: &SweepSpec,
    grid: &GridSpec,
    fiber_grid: &GridSpec,
    settings: &SolverSettings,
    table_gaps_nm: &[f64],
) -> Result<SweepTable> {
    use crate::output::{num, opt};
    spec.validate()?;
    let params: Vec<Parameter> = spec.axes.iter().map(|a| a.parameter).collect();
    let has = |p: Parameter| params.contains(&p);
    let device_at = |point: &[f64]| {
        params.iter().zip(point).fold(spec.device, |d, (&p, &v)| apply(&d, p, v))
    };
    let value_of = |point: &[f64], p: Parameter| params.iter().position(|&q| q == p).map(|k| point[k]);
    let points = spec.points();
    let mut header: Vec<String> = params.iter().map(|p| p.label().to_string()).collect();

    let body: Vec<Vec<String>> = if has(Parameter::Na) {
        if has(Parameter::GapNm) || has(Parameter::CouplingLengthUm) {
            return Err(Error::invalid("axes", "a numerical-aperture sweep may only pair with width or etch depth"));
        }
        header.extend(["eta_TE", "eta_TM"].map(String::from));
        par_map(&points, |pt| {
            let d = device_at(pt);
            let na = value_of(pt, Parameter::Na).expect("NA axis present");
            let r = FiberCoupling::solve(&d.pair.rib, &d.stack, fiber_grid, settings).and_then(|fc| fc.efficiency(na));
            match r {
                Ok(r) => vec![num(r.eta_te), num(r.eta_tm)],
                Err(e) => {
                    log::warn!("sweep point {pt:?} failed: {e}");
                    vec![String::new(); 2]
                }
            }
        })
    } else if has(Parameter::CouplingLengthUm) {
        header.extend(["P3_TE", "P4_TE", "P3_TM", "P4_TM", "zeta", "error"].map(String::from));
        par_map(&points, |pt| {
            let d = device_at(pt);
            let r = build_delta_n_table(&d, grid, settings, table_gaps_nm)
                .and_then(|t| TransferModel::new(&d, &t))
                .and_then(|m| {
                    let t = m.transfer_at(d.coupling_length_um);
                    let s = t.split();
                    Ok((s, fidelity_closed_form(&t)?.error))
                });
            match r {
                Ok((s, e)) => [s.p3_te, s.p4_te, s.p3_tm, s.p4_tm, s.p3_te - s.p3_tm, e].map(num).to_vec(),
                Err(e) => {
                    log::warn!("sweep point {pt:?} failed: {e}");
                    vec![String::new(); 6]
                }
            }
        })
    } else {
        header.extend(["delta_n_TE", "delta_n_TM", "xi"].map(String::from));
        par_map(&points, |pt| {
            let d = device_at(pt);
            let r = cached_coupling_strength(&d.pair, &d.stack, grid, settings);
            if let Err(e) = &r {
                log::warn!("sweep point {pt:?} failed: {e}");
            }
            let c = r.ok();
            vec![opt(c.map(|c| c.delta_n_te)), opt(c.map(|c| c.delta_n_tm)), opt(c.map(|c| c.xi))]
        })
    };
    let rows = points
        .iter()
        .zip(body)
        .map(|(pt, mut vals)| {
            let mut row: Vec<String> = pt.iter().map(|&v| num(v)).collect();
            row.append(&mut vals);
            row
        })
        .collect();
    Ok(SweepTable { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn golden_section_on_a_parabola() {
        let r = golden_section(|x| Ok((x - 1.0).powi(2)), 0.0, 3.0, 1e-6).unwrap();
        assert!((r.argmin - 1.0).abs() < 1e-6);
        assert!(r.bracket.1 - r.bracket.0 <= 1e-6);
        assert!(r.bracket.0 <= r.argmin && r.argmin <= r.bracket.1);
        // deterministic evaluation count
        let again = golden_section(|x| Ok((x - 1.0).powi(2)), 0.0, 3.0, 1e-6).unwrap();
        assert_eq!(r.samples_evaluated, again.samples_evaluated);
    }

    #[test]
    fn golden_section_degenerate_and_nonsmooth() {
        let r = golden_section(|_| Ok(2.5), 0.0, 1.0, 1e-4).unwrap();
        assert_eq!(r.min_value, 2.5);
        assert!((0.0..=1.0).contains(&r.argmin));
        let r = golden_section(|x| Ok((x - 0.3f64).abs()), 0.0, 1.0, 1e-8).unwrap();
        // dense-scan oracle
        let best = (0..=100_000).map(|k| k as f64 * 1e-5).min_by(|a, b| (a - 0.3).abs().total_cmp(&(b - 0.3).abs()));
        assert!((r.argmin - best.unwrap()).abs() < 1e-5 + 1e-8);
    }

    #[test]
    fn golden_section_rejects_bad_input() {
        assert!(matches!(golden_section(|x| Ok(1.0 / (x - x)), 0.0, 1.0, 1e-3), Err(Error::NonFinite { .. })));
        assert!(golden_section(|x| Ok(x), 1.0, 0.0, 1e-3).is_err());
        assert!(golden_section(|x| Ok(x), 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn bracket_shrinks_by_the_golden_ratio() {
        let mut widths = Vec::new();
        for tol in [1e-1, 1e-2, 1e-3] {
            let r = golden_section(|x| Ok((x - 0.2).powi(2)), 0.0, 1.0, tol).unwrap();
            widths.push((r.bracket.1 - r.bracket.0, r.samples_evaluated));
        }
        for w in widths.windows(2) {
            let steps = (w[1].1 - w[0].1) as i32;
            let ratio = w[0].0 / w[1].0;
            assert!((ratio - INV_PHI.powi(-steps)).abs() < 1e-9 * ratio);
        }
    }

    #[test]
    fn coarse_scan_flags_boundary_minima() {
        let r = minimize(|g| Ok((g - 50.0).powi(2)), 20.0, 80.0, 1e-3).unwrap();
        assert!((r.argmin - 50.0).abs() < 1e-3 && !r.boundary);
        let r = minimize(|g| Ok(g), 20.0, 80.0, 1e-3).unwrap();
        assert!(r.boundary);
        assert!((r.argmin - 20.0).abs() < 1e-3);
        // two minima: the scan keeps the global one
        let r = minimize(|x| Ok((x * 1.5).sin() + 0.1 * x), 0.0, 10.0, 1e-6).unwrap();
        let dense = (0..=100_000)
            .map(|k| k as f64 * 1e-4)
            .map(|x| (x * 1.5).sin() + 0.1 * x)
            .fold(f64::INFINITY, f64::min);
        assert!(r.min_value <= dense + 1e-8);
    }

    fn linear_map(nw: usize, nh: usize, w_star: f64) -> XiMap {
        let widths_nm = linspace(400.0, 550.0, nw);
        let etch_depths_nm = linspace(80.0, 140.0, nh);
        let values = etch_depths_nm
            .iter()
            .flat_map(|_| widths_nm.iter().map(move |&w| Some(1.0 + (w - w_star) / 100.0)))
            .collect();
        XiMap { widths_nm, etch_depths_nm, gap_nm: 65.0, values }
    }

    #[test]
    fn contour_of_a_linear_field() {
        let map = linear_map(7, 5, 471.0);
        let lines = xi_unity_contour(&map);
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].len(), 5);
        let cell = 150.0 / 6.0;
        for &(w, _) in &lines[0] {
            assert!((w - 471.0).abs() <= cell);
        }
        let mut hs: Vec<f64> = lines[0].iter().map(|p| p.1).collect();
        hs.sort_by(f64::total_cmp);
        assert_eq!(hs, map.etch_depths_nm);
    }

    #[test]
    fn contour_edge_cases() {
        let mut map = linear_map(4, 3, 471.0);
        map.values.iter_mut().for_each(|v| *v = Some(1.2));
        assert!(xi_unity_contour(&map).is_empty());
        let single = XiMap { widths_nm: vec![475.0], etch_depths_nm: vec![110.0], gap_nm: 65.0, values: vec![Some(1.0)] };
        assert!(xi_unity_contour(&single).is_empty());
        // a missing cell drops the squares around it but keeps the rest
        let mut map = linear_map(7, 5, 471.0);
        map.values[0] = None;
        let n: usize = xi_unity_contour(&map).iter().map(|l| l.len()).sum();
        assert!(n >= 4);
    }

    #[test]
    fn saddle_is_resolved_consistently() {
        let map = XiMap {
            widths_nm: vec![0.0, 1.0],
            etch_depths_nm: vec![0.0, 1.0],
            gap_nm: 0.0,
            values: vec![Some(2.0), Some(0.0), Some(0.0), Some(2.0)],
        };
        let lines = contour(&map, 1.0);
        assert_eq!(lines.len(), 2);
        assert!(lines.iter().all(|l| l.len() == 2));
    }

    #[test]
    fn sweep_spec_validation_and_points() {
        let axis = |p, n| SweepAxis { parameter: p, range: Range::new(1.0, 2.0, n) };
        let spec = SweepSpec { axes: vec![axis(Parameter::GapNm, 3), axis(Parameter::WidthNm, 2)], device: DeviceSpec::default() };
        spec.validate().unwrap();
        let pts = spec.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1], vec![1.0, 2.0]);
        let bad = SweepSpec { axes: vec![axis(Parameter::GapNm, 1)], device: DeviceSpec::default() };
        assert!(bad.validate().is_err());
        let three = SweepSpec { axes: vec![axis(Parameter::GapNm, 2); 3], device: DeviceSpec::default() };
        assert!(three.validate().is_err());
    }

    #[test]
    fn apply_keeps_the_device_consistent() {
        let d = apply(&DeviceSpec::default(), Parameter::GapNm, 55.0);
        d.validate().unwrap();
        assert_eq!(d.sbend.end_gap_nm, 55.0);
        assert_eq!(apply(&d, Parameter::WidthNm, 500.0).pair.rib.width_nm, 500.0);
    }

    #[test]
    fn matched_transfer_has_zero_error_at_the_exact_half_split() {
        let e = DeltaNEntry { gap_nm: 10.0, delta_n_te: 0.01, delta_n_tm: 0.01 };
        let table = DeltaNTable::new(vec![e, DeltaNEntry { gap_nm: 5000.0, ..e }]).unwrap();
        let device = DeviceSpec { sbend: crate::geometry::SBendProfile { bend_length_um: 1e-9, ..Default::default() }, ..Default::default() };
        // constant Δn: bends add 2·π·Δn·L_s/λ, negligible here
        let quarter = 493.55e-3 / (4.0 * 0.01);
        let r = minimize_error_over_lc((quarter - 2.0, quarter + 2.0), &device, &table, 1e-7).unwrap();
        assert!(r.min_value < 1e-12);
        assert!((r.argmin - quarter).abs() < 1e-6);
    }

    #[test]
    fn transfer_sweep_rejects_inconsistent_axes() {
        let axis = |p| SweepAxis { parameter: p, range: Range::new(0.3, 0.6, 2) };
        let spec = SweepSpec { axes: vec![axis(Parameter::Na), axis(Parameter::GapNm)], device: DeviceSpec::default() };
        let g = GridSpec::default();
        assert!(run_sweep(&spec, &g, &g, &SolverSettings::default(), &[20.0, 40.0]).is_err());
    }

    proptest! {
        #[test]
        fn optimizer_never_loses_to_the_scan(c in 0.0f64..1.0, s in 0.5f64..5.0) {
            let f = |x: f64| Ok((s * (x - c)).powi(2) + 0.05 * (7.0 * x).cos());
            let r = minimize(f, 0.0, 1.0, 1e-6).unwrap();
            let scan: Vec<f64> = linspace(0.0, 1.0, 201).iter().map(|&x| f(x).unwrap()).collect();
            let best = scan.iter().copied().fold(f64::INFINITY, f64::min);
            let spread = scan.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
            prop_assert!(r.min_value <= best + spread);
        }
    }
}
