//! Regeneration of the design figures as CSV + SVG pairs, with a summary
//! of headline values checked against configured bands.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::coupler::{linspace, split_sweep, DeltaNTable, SplitRow, TransferModel};
use crate::error::{Error, Result};
use crate::exec::{par_map, seq_map};
use crate::fiber::{na_sweep, FiberCoupling, OverlapResult};
use crate::output::{self, headers, num, opt, Axes, GridData, Series};
use crate::sweep::{
    build_delta_n_table, cached_coupling_strength, delta_at_gap, error_at_length, minimize, minimize_error_over_lc,
    xi_map, xi_unity_contour, OptimizationReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Figure {
    Fig3a,
    Fig3b,
    Fig4a,
    Fig4b,
    Fig4c,
    Fig5a,
    Fig6c,
}

impl Figure {
    pub const ALL: [Figure; 7] =
        [Figure::Fig3a, Figure::Fig3b, Figure::Fig4a, Figure::Fig4b, Figure::Fig4c, Figure::Fig5a, Figure::Fig6c];

    pub fn label(self) -> &'static str {
        match self {
            Figure::Fig3a => "fig3a",
            Figure::Fig3b => "fig3b",
            Figure::Fig4a => "fig4a",
            Figure::Fig4b => "fig4b",
            Figure::Fig4c => "fig4c",
            Figure::Fig5a => "fig5a",
            Figure::Fig6c => "fig6c",
        }
    }

    /// A single label or `all`.
    pub fn parse_selection(s: &str) -> Result<Vec<Figure>> {
        if s == "all" {
            return Ok(Figure::ALL.to_vec());
        }
        Figure::ALL
            .iter()
            .copied()
            .find(|f| f.label() == s)
            .map(|f| vec![f])
            .ok_or_else(|| Error::Config(format!("unknown figure `{s}` (expected one of fig3a, fig3b, fig4a, fig4b, fig4c, fig5a, fig6c, all)")))
    }

    fn needs_table(self) -> bool {
        matches!(self, Figure::Fig4a | Figure::Fig4b | Figure::Fig4c | Figure::Fig5a)
    }

    fn needs_tuned_gap(self) -> bool {
        matches!(self, Figure::Fig4c | Figure::Fig5a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryItem {
    pub figure: &'static str,
    pub quantity: &'static str,
    pub value: f64,
    pub band: (f64, f64),
    pub pass: bool,
}

impl SummaryItem {
    fn new(figure: Figure, quantity: &'static str, value: f64, band: (f64, f64)) -> Self {
        let pass = value.is_finite() && value >= band.0 && value <= band.1;
        SummaryItem { figure: figure.label(), quantity, value, band, pass }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureArtifact {
    pub figure: Figure,
    pub csv_path: PathBuf,
    pub svg_path: PathBuf,
    pub summary: Vec<SummaryItem>,
}

#[derive(Debug)]
pub struct FigureOutcome {
    pub figure: Figure,
    pub result: Result<FigureArtifact>,
}

/// Shared inputs computed once before the figures run.
struct Prepared {
    table: Option<std::result::Result<DeltaNTable, String>>,
    tuned: Option<std::result::Result<OptimizationReport, String>>,
}

pub struct Reproducer<'a> {
    cfg: &'a RunConfig,
    out_dir: PathBuf,
}

impl<'a> Reproducer<'a> {
    pub fn new(cfg: &'a RunConfig, out_dir: impl AsRef<Path>) -> Self {
        Reproducer { cfg, out_dir: out_dir.as_ref().to_path_buf() }
    }

    /// Runs the selected figures; a failing figure does not stop the others.
    pub fn run(&self, figures: &[Figure], parallel: bool) -> Vec<FigureOutcome> {
        let prepared = self.prepare(figures);
        let one = |f: &Figure| FigureOutcome { figure: *f, result: self.figure(*f, &prepared) };
        if parallel {
            par_map(figures, one)
        } else {
            seq_map(figures, one)
        }
    }

    fn prepare(&self, figures: &[Figure]) -> Prepared {
        let table = figures.iter().any(|f| f.needs_table()).then(|| self.table().map_err(|e| e.to_string()));
        let tuned = match (&table, figures.iter().any(|f| f.needs_tuned_gap())) {
            (Some(Ok(t)), true) => Some(self.optimize_gap(t).map_err(|e| e.to_string())),
            (Some(Err(e)), true) => Some(Err(e.clone())),
            _ => None,
        };
        Prepared { table, tuned }
    }

    fn table(&self) -> Result<DeltaNTable> {
        let c = self.cfg;
        build_delta_n_table(&c.device, &c.grid, &c.solver, &c.sweeps.table_gaps_nm)
    }

    fn optimize_gap(&self, table: &DeltaNTable) -> Result<OptimizationReport> {
        let d = &self.cfg.sweeps.delta;
        minimize(
            |g| delta_at_gap(g, &self.cfg.device, table, d.lc_range_um, d.lc_samples),
            d.gap_range_nm.0,
            d.gap_range_nm.1,
            d.tolerance_nm,
        )
    }

    fn figure(&self, f: Figure, p: &Prepared) -> Result<FigureArtifact> {
        let table = || -> Result<&DeltaNTable> {
            match &p.table {
                Some(Ok(t)) => Ok(t),
                Some(Err(e)) => Err(Error::Config(format!("Δn table unavailable: {e}"))),
                None => unreachable!("table prepared for every figure that needs it"),
            }
        };
        let tuned = || -> Result<&OptimizationReport> {
            match &p.tuned {
                Some(Ok(t)) => Ok(t),
                Some(Err(e)) => Err(Error::Config(format!("gap optimization unavailable: {e}"))),
                None => unreachable!("gap optimized for every figure that needs it"),
            }
        };
        match f {
            Figure::Fig3a => self.fig3a(),
            Figure::Fig3b => self.fig3b(),
            Figure::Fig4a => self.split_figure(f, self.cfg.sweeps.split.reference_gap_nm, table()?, None),
            Figure::Fig4b => self.fig4b(table()?),
            Figure::Fig4c => {
                let g = tuned()?.argmin;
                self.split_figure(f, g, table()?, Some(self.cfg.sweeps.split.reference_gap_nm))
            }
            Figure::Fig5a => self.fig5a(table()?, tuned()?.argmin),
            Figure::Fig6c => self.fig6c(),
        }
    }

    fn paths(&self, f: Figure) -> (PathBuf, PathBuf) {
        (self.out_dir.join(format!("{}.csv", f.label())), self.out_dir.join(format!("{}.svg", f.label())))
    }

    fn emit(&self, f: Figure, header: &[&str], rows: &[Vec<String>], svg: &str, summary: Vec<SummaryItem>) -> Result<FigureArtifact> {
        let (csv_path, svg_path) = self.paths(f);
        output::write_csv(&csv_path, header, rows)?;
        output::write_file(&svg_path, svg)?;
        Ok(FigureArtifact { figure: f, csv_path, svg_path, summary })
    }

    fn fig3a(&self) -> Result<FigureArtifact> {
        let c = self.cfg;
        let m = &c.sweeps.xi_map;
        let map = xi_map(&m.widths_nm, &m.etch_depths_nm, m.gap_nm, &c.device, &c.grid, &c.solver)?;
        let contours = xi_unity_contour(&map);
        let mut rows = Vec::new();
        for (j, h) in map.etch_depths_nm.iter().enumerate() {
            for (i, w) in map.widths_nm.iter().enumerate() {
                rows.push(vec![num(*w), num(*h), opt(map.get(i, j))]);
            }
        }
        let contour_rows: Vec<Vec<String>> = contours
            .iter()
            .enumerate()
            .flat_map(|(k, l)| l.iter().map(move |&(w, h)| vec![k.to_string(), num(w), num(h)]))
            .collect();
        output::write_csv(&self.out_dir.join("fig3a_contour.csv"), headers::XI_CONTOUR, &contour_rows)?;

        let (pw, ph) = c.acceptance.xi_point_nm;
        let mut pair = c.device.pair.with_gap(m.gap_nm);
        pair.rib.width_nm = pw;
        pair.rib.etch_depth_nm = ph;
        let xi = cached_coupling_strength(&pair, &c.device.stack, &c.grid, &c.solver)?.xi;
        let grid = GridData {
            xs: map.widths_nm.clone(),
            ys: map.etch_depths_nm.clone(),
            values: map.values.clone(),
            contours: contours.clone(),
            markers: vec![(pw, ph)],
        };
        let title = format!("ξ = Δn_TE/Δn_TM at g = {} nm", m.gap_nm);
        let svg = output::grid_plot(&Axes::new(&title, "width (nm)", "etch depth (nm)"), &grid)?;
        let summary = vec![
            SummaryItem::new(Figure::Fig3a, "xi_at_selected_point", xi, c.acceptance.xi_range),
            SummaryItem::new(Figure::Fig3a, "unity_contour_points", contour_rows.len() as f64, (1.0, f64::INFINITY)),
        ];
        self.emit(Figure::Fig3a, headers::XI_MAP, &rows, &svg, summary)
    }

    fn fig3b(&self) -> Result<FigureArtifact> {
        let c = self.cfg;
        let gaps = c.sweeps.gap_scan_nm.values();
        let rows: Vec<_> = par_map(&gaps, |&g| cached_coupling_strength(&c.device.pair.with_gap(g), &c.device.stack, &c.grid, &c.solver))
            .into_iter()
            .collect::<Result<_>>()?;
        let csv: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                [r.gap_nm, r.delta_n_te, r.delta_n_tm, r.xi, r.n_sym_te, r.n_anti_te, r.n_sym_tm, r.n_anti_tm]
                    .map(num)
                    .to_vec()
            })
            .collect();
        let monotone = rows.windows(2).all(|w| w[1].xi > w[0].xi);
        let svg = output::line_plot(
            &Axes::new("ξ versus gap", "gap (nm)", "ξ"),
            &[Series::new("ξ", rows.iter().map(|r| (r.gap_nm, r.xi)).collect())],
        )?;
        let summary = vec![SummaryItem::new(Figure::Fig3b, "xi_increasing_in_gap", f64::from(u8::from(monotone)), (1.0, 1.0))];
        self.emit(Figure::Fig3b, headers::COUPLING, &csv, &svg, summary)
    }

    fn split_rows(&self, gap_nm: f64, table: &DeltaNTable) -> Result<Vec<SplitRow>> {
        let s = &self.cfg.sweeps.split;
        let model = TransferModel::new(&self.cfg.device.with_gap(gap_nm), table)?;
        Ok(split_sweep(&model, s.lc_range_um, s.samples))
    }

    fn split_figure(&self, f: Figure, gap_nm: f64, table: &DeltaNTable, compare_gap: Option<f64>) -> Result<FigureArtifact> {
        let rows = self.split_rows(gap_nm, table)?;
        let csv: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                [r.coupling_length_um, r.split.p3_te, r.split.p4_te, r.split.p3_tm, r.split.p4_tm, r.zeta]
                    .map(num)
                    .to_vec()
            })
            .collect();
        let col = |pick: fn(&SplitRow) -> f64| rows.iter().map(|r| (r.coupling_length_um, pick(r))).collect();
        let svg = output::line_plot(
            &Axes::new(&format!("Port powers at g = {gap_nm:.2} nm"), "coupling length (µm)", "normalized power"),
            &[
                Series::new("P3 TE", col(|r| r.split.p3_te)),
                Series::new("P4 TE", col(|r| r.split.p4_te)),
                Series::new("P3 TM", col(|r| r.split.p3_tm)),
                Series::new("P4 TM", col(|r| r.split.p4_tm)),
            ],
        )?;
        let max_zeta = rows.iter().map(|r| r.zeta.abs()).fold(0.0, f64::max);
        let mut summary = vec![SummaryItem::new(f, "max_abs_zeta", max_zeta, (0.0, 1.0))];
        if let Some(g) = compare_gap {
            let reference = self.split_rows(g, table)?.iter().map(|r| r.zeta.abs()).fold(0.0, f64::max);
            summary.push(SummaryItem::new(f, "tuned_gap_nm", gap_nm, self.cfg.acceptance.gap_argmin_nm));
            summary.push(SummaryItem::new(f, "zeta_reduction_vs_reference", reference / max_zeta, (5.0, f64::INFINITY)));
        }
        self.emit(f, headers::SPLIT, &csv, &svg, summary)
    }

    fn fig4b(&self, table: &DeltaNTable) -> Result<FigureArtifact> {
        let c = self.cfg;
        let d = &c.sweeps.delta;
        let gaps = linspace(d.gap_range_nm.0, d.gap_range_nm.1, d.plot_samples);
        let deltas: Vec<f64> = par_map(&gaps, |&g| delta_at_gap(g, &c.device, table, d.lc_range_um, d.lc_samples))
            .into_iter()
            .collect::<Result<_>>()?;
        let best = self.optimize_gap(table)?;
        let rows: Vec<Vec<String>> = gaps.iter().zip(&deltas).map(|(g, v)| vec![num(*g), num(*v)]).collect();
        let svg = output::line_plot(
            &Axes::new("RMS polarization dependence δ", "gap (nm)", "δ"),
            &[
                Series::new("δ(g)", gaps.iter().copied().zip(deltas.iter().copied()).collect()),
                Series::new("argmin", vec![(best.argmin, best.min_value)]),
            ],
        )?;
        let summary = vec![
            SummaryItem::new(Figure::Fig4b, "argmin_gap_nm", best.argmin, c.acceptance.gap_argmin_nm),
            SummaryItem::new(Figure::Fig4b, "interior_minimum", f64::from(u8::from(!best.boundary)), (1.0, 1.0)),
            SummaryItem::new(Figure::Fig4b, "min_delta", best.min_value, (0.0, 1.0)),
        ];
        self.emit(Figure::Fig4b, headers::DELTA, &rows, &svg, summary)
    }

    fn fig5a(&self, table: &DeltaNTable, gap_nm: f64) -> Result<FigureArtifact> {
        let c = self.cfg;
        let e = &c.sweeps.error;
        let device = c.device.with_gap(gap_nm);
        let model = TransferModel::new(&device, table)?;
        let ls = linspace(e.lc_range_um.0, e.lc_range_um.1, e.plot_samples);
        let errs: Vec<f64> = ls.iter().map(|&l| error_at_length(&model, l)).collect::<Result<_>>()?;
        let best = minimize_error_over_lc(e.lc_range_um, &device, table, e.tolerance_um)?;
        let rows: Vec<Vec<String>> = ls.iter().zip(&errs).map(|(l, v)| vec![num(*l), num(*v)]).collect();
        let svg = output::line_plot(
            &Axes::new(&format!("Entanglement error at g = {gap_nm:.2} nm"), "coupling length (µm)", "error").log_y(),
            &[
                Series::new("E(L_c)", ls.iter().copied().zip(errs.iter().copied()).collect()),
                Series::new("minimum", vec![(best.argmin, best.min_value.max(f64::MIN_POSITIVE))]),
            ],
        )?;
        let summary = vec![
            SummaryItem::new(Figure::Fig5a, "argmin_lc_um", best.argmin, c.acceptance.lc_argmin_um),
            SummaryItem::new(Figure::Fig5a, "interior_minimum", f64::from(u8::from(!best.boundary)), (1.0, 1.0)),
            SummaryItem::new(Figure::Fig5a, "min_error", best.min_value, (0.0, c.acceptance.max_error)),
        ];
        self.emit(Figure::Fig5a, headers::ERROR, &rows, &svg, summary)
    }

    fn fig6c(&self) -> Result<FigureArtifact> {
        let c = self.cfg;
        let fc = FiberCoupling::solve(&c.device.pair.rib, &c.device.stack, &c.fiber.grid, &c.solver)?;
        let mut nas = c.fiber.na.values();
        let check = c.acceptance.na_check;
        let has_check = nas.iter().any(|&n| (n - check).abs() < 1e-12);
        if !has_check {
            nas.push(check);
        }
        let all = na_sweep(&fc, &nas)?;
        let at = *all.iter().find(|r| (r.na - check).abs() < 1e-12).expect("check aperture swept");
        let curve: Vec<OverlapResult> = if has_check { all } else { all[..all.len() - 1].to_vec() };
        let rows: Vec<Vec<String>> = curve.iter().map(|r| vec![num(r.na), num(r.eta_te), num(r.eta_tm)]).collect();
        let monotone = curve.windows(2).all(|w| w[1].eta_te > w[0].eta_te && w[1].eta_tm > w[0].eta_tm);
        let svg = output::line_plot(
            &Axes::new("Fiber coupling efficiency", "numerical aperture", "η"),
            &[
                Series::new("TE", curve.iter().map(|r| (r.na, r.eta_te)).collect()),
                Series::new("TM", curve.iter().map(|r| (r.na, r.eta_tm)).collect()),
            ],
        )?;
        let a = &c.acceptance;
        let summary = vec![
            SummaryItem::new(Figure::Fig6c, "eta_te_at_check_na", at.eta_te, a.eta_range),
            SummaryItem::new(Figure::Fig6c, "eta_tm_at_check_na", at.eta_tm, a.eta_range),
            SummaryItem::new(Figure::Fig6c, "eta_difference", (at.eta_te - at.eta_tm).abs(), (0.0, a.max_eta_difference)),
            SummaryItem::new(Figure::Fig6c, "eta_increasing_in_na", f64::from(u8::from(monotone)), (1.0, 1.0)),
        ];
        self.emit(Figure::Fig6c, headers::NA, &rows, &svg, summary)
    }
}

/// Summary rows for every figure; failed figures get a single `failed` row.
pub fn summary_rows(outcomes: &[FigureOutcome]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for o in outcomes {
        match &o.result {
            Ok(a) => rows.extend(a.summary.iter().map(|s| {
                vec![
                    s.figure.to_string(),
                    s.quantity.to_string(),
                    num(s.value),
                    num(s.band.0),
                    num(s.band.1),
                    if s.pass { "pass" } else { "fail" }.to_string(),
                ]
            })),
            Err(e) => rows.push(vec![
                o.figure.label().to_string(),
                "error".to_string(),
                String::new(),
                String::new(),
                String::new(),
                format!("failed: {e}"),
            ]),
        }
    }
    rows
}
