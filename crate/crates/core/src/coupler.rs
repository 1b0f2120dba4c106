//! Coupled-mode power splitting: straight-section beating, S-bend
//! accumulated coupling and per-polarization transfer of the whole device.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::geometry::{sbend_gap, DeviceSpec, SBendProfile};
use crate::modesolver::CouplingStrength;
use crate::Polarization;

/// Separation beyond which coupling is taken as exactly zero.
pub const DECOUPLED_GAP_NM: f64 = 3000.0;

/// Entries used for the exponential tail fit above the table.
const TAIL_FIT_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaNEntry {
    pub gap_nm: f64,
    pub delta_n_te: f64,
    pub delta_n_tm: f64,
}

impl From<&CouplingStrength> for DeltaNEntry {
    fn from(c: &CouplingStrength) -> Self {
        DeltaNEntry { gap_nm: c.gap_nm, delta_n_te: c.delta_n_te, delta_n_tm: c.delta_n_tm }
    }
}

/// Tabulated Δn(gap) per polarization, interpolated linearly in `ln Δn`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaNTable {
    entries: Vec<DeltaNEntry>,
    // (intercept, slope) of ln Δn = a + b·gap over the last entries
    tail: [(f64, f64); 2],
}

impl DeltaNTable {
    pub fn new(entries: Vec<DeltaNEntry>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::invalid("table", "need at least two gaps"));
        }
        for w in entries.windows(2) {
            if w[1].gap_nm <= w[0].gap_nm {
                return Err(Error::invalid("table", "gaps must be strictly increasing"));
            }
        }
        if entries.iter().any(|e| !(e.delta_n_te > 0.0 && e.delta_n_tm > 0.0)) {
            return Err(Error::invalid("table", "all Δn must be positive"));
        }
        let tail = [Polarization::Te, Polarization::Tm].map(|pol| {
            let pts: Vec<(f64, f64)> = entries[entries.len().saturating_sub(TAIL_FIT_POINTS)..]
                .iter()
                .map(|e| (e.gap_nm, pick(e, pol).ln()))
                .collect();
            linear_fit(&pts)
        });
        Ok(DeltaNTable { entries, tail })
    }

    pub fn entries(&self) -> &[DeltaNEntry] {
        &self.entries
    }

    pub fn min_gap_nm(&self) -> f64 {
        self.entries[0].gap_nm
    }

    pub fn max_gap_nm(&self) -> f64 {
        self.entries[self.entries.len() - 1].gap_nm
    }

    pub fn delta_n(&self, gap_nm: f64, pol: Polarization) -> Result<f64> {
        let first = self.min_gap_nm();
        if gap_nm < first - 1e-9 {
            return Err(Error::TableCoverage { gap_nm, table_min_nm: first });
        }
        if gap_nm >= DECOUPLED_GAP_NM {
            return Ok(0.0);
        }
        let e = &self.entries;
        if gap_nm > self.max_gap_nm() {
            let (a, b) = self.tail[pol as usize];
            // non-decaying fit: treat as decoupled beyond the table
            return Ok(if b < 0.0 { (a + b * gap_nm).exp().max(0.0) } else { 0.0 });
        }
        let k = e.partition_point(|x| x.gap_nm <= gap_nm);
        if k > 0 && e[k - 1].gap_nm == gap_nm {
            return Ok(pick(&e[k - 1], pol));
        }
        if k == 0 {
            // within the 1e-9 slack below the first entry
            return Ok(pick(&e[0], pol));
        }
        let (lo, hi) = (&e[k - 1], &e[k]);
        let t = (gap_nm - lo.gap_nm) / (hi.gap_nm - lo.gap_nm);
        let (a, b) = (pick(lo, pol).ln(), pick(hi, pol).ln());
        Ok((a + t * (b - a)).exp())
    }
}

fn pick(e: &DeltaNEntry, pol: Polarization) -> f64 {
    match pol {
        Polarization::Te => e.delta_n_te,
        Polarization::Tm => e.delta_n_tm,
    }
}

fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}

/// Normalized bar/cross powers `(P3, P4)` after a straight section.
pub fn straight_split(delta_n: f64, coupling_length_um: f64, wavelength_nm: f64) -> Result<(f64, f64)> {
    if !(delta_n > 0.0) {
        return Err(Error::invalid("delta_n", format!("must be positive, got {delta_n}")));
    }
    if coupling_length_um < 0.0 {
        return Err(Error::invalid("coupling_length_um", "must be non-negative"));
    }
    let phase = straight_phase(delta_n, coupling_length_um, wavelength_nm);
    let (s, c) = phase.sin_cos();
    Ok((c * c, s * s))
}

/// Coupling angle `πΔn·L/λ` of a straight section.
pub fn straight_phase(delta_n: f64, length_um: f64, wavelength_nm: f64) -> f64 {
    PI * delta_n * length_um / (wavelength_nm * 1e-3)
}

/// Coupling angle accumulated along one S-bend,
/// `∫ π·Δn(gap(z))/λ dz` by composite Simpson.
pub fn bend_accumulated_angle(
    table: &DeltaNTable,
    profile: &SBendProfile,
    wavelength_nm: f64,
    pol: Polarization,
) -> Result<f64> {
    profile.validate()?;
    if profile.end_gap_nm < table.min_gap_nm() - 1e-9 {
        return Err(Error::TableCoverage { gap_nm: profile.end_gap_nm, table_min_nm: table.min_gap_nm() });
    }
    let n = profile.samples + profile.samples % 2;
    let ls = profile.bend_length_um;
    let h = ls / n as f64;
    let lam_um = wavelength_nm * 1e-3;
    let f = |k: usize| -> Result<f64> {
        let z = if k == n { ls } else { k as f64 * h };
        Ok(PI * table.delta_n(sbend_gap(z, profile)?, pol)? / lam_um)
    };
    let mut sum = f(0)? + f(n)?;
    for k in 1..n {
        sum += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k)?;
    }
    Ok(sum * h / 3.0)
}

/// Real amplitude transfer of the whole device per polarization
/// (h ↔ TE, v ↔ TM), plus the bend amplitude factors carried alongside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferCoefficients {
    pub t_h: f64,
    pub r_h: f64,
    pub t_v: f64,
    pub r_v: f64,
    pub transmission_factor_te: f64,
    pub transmission_factor_tm: f64,
}

impl TransferCoefficients {
    /// Lossless coefficients from per-polarization coupling angles.
    pub fn from_angles(theta_te: f64, theta_tm: f64) -> Self {
        TransferCoefficients {
            t_h: theta_te.cos().abs(),
            r_h: theta_te.sin().abs(),
            t_v: theta_tm.cos().abs(),
            r_v: theta_tm.sin().abs(),
            transmission_factor_te: 1.0,
            transmission_factor_tm: 1.0,
        }
    }

    /// Coefficients from bar-port power fractions `t²` per polarization.
    pub fn from_bar_powers(p3_te: f64, p3_tm: f64) -> Result<Self> {
        for (name, p) in [("p3_te", p3_te), ("p3_tm", p3_tm)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(name, format!("power fraction {p} outside [0, 1]")));
            }
        }
        Ok(TransferCoefficients {
            t_h: p3_te.sqrt(),
            r_h: (1.0 - p3_te).sqrt(),
            t_v: p3_tm.sqrt(),
            r_v: (1.0 - p3_tm).sqrt(),
            transmission_factor_te: 1.0,
            transmission_factor_tm: 1.0,
        })
    }

    /// Coefficients from measured port powers, normalized per polarization
    /// so that `t² + r² = 1`.
    pub fn from_port_powers(p3_te: f64, p4_te: f64, p3_tm: f64, p4_tm: f64) -> Result<Self> {
        let norm = |p3: f64, p4: f64, name: &'static str| -> Result<f64> {
            if !(p3 >= 0.0 && p4 >= 0.0 && p3 + p4 > 0.0) {
                return Err(Error::invalid(name, format!("port powers {p3}, {p4} must be non-negative and not both zero")));
            }
            Ok(p3 / (p3 + p4))
        };
        Self::from_bar_powers(norm(p3_te, p4_te, "te_powers")?, norm(p3_tm, p4_tm, "tm_powers")?)
    }

    pub fn split(&self) -> SplitResult {
        SplitResult {
            p3_te: self.t_h * self.t_h,
            p4_te: self.r_h * self.r_h,
            p3_tm: self.t_v * self.t_v,
            p4_tm: self.r_v * self.r_v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub p3_te: f64,
    pub p4_te: f64,
    pub p3_tm: f64,
    pub p4_tm: f64,
}

/// Signed port-3 power difference between TE and TM.
pub fn zeta(split: &SplitResult) -> f64 {
    split.p3_te - split.p3_tm
}

/// Device transfer with the bend angles and the straight-section Δn
/// evaluated once, for sweeps over the coupling length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferModel {
    pub device: DeviceSpec,
    pub bend_angle_te: f64,
    pub bend_angle_tm: f64,
    pub delta_n_te: f64,
    pub delta_n_tm: f64,
}

impl TransferModel {
    pub fn new(device: &DeviceSpec, table: &DeltaNTable) -> Result<Self> {
        device.validate()?;
        let lam = device.stack.wavelength_nm;
        let g = device.pair.gap_nm;
        Ok(TransferModel {
            device: *device,
            bend_angle_te: bend_accumulated_angle(table, &device.sbend, lam, Polarization::Te)?,
            bend_angle_tm: bend_accumulated_angle(table, &device.sbend, lam, Polarization::Tm)?,
            delta_n_te: table.delta_n(g, Polarization::Te)?,
            delta_n_tm: table.delta_n(g, Polarization::Tm)?,
        })
    }

    pub fn delta_n(&self, pol: Polarization) -> f64 {
        match pol {
            Polarization::Te => self.delta_n_te,
            Polarization::Tm => self.delta_n_tm,
        }
    }

    /// Total coupling angle: both bends plus the straight section.
    pub fn total_angle(&self, pol: Polarization, coupling_length_um: f64) -> f64 {
        let lam = self.device.stack.wavelength_nm;
        let (bend, dn) = match pol {
            Polarization::Te => (self.bend_angle_te, self.delta_n_te),
            Polarization::Tm => (self.bend_angle_tm, self.delta_n_tm),
        };
        2.0 * bend + straight_phase(dn, coupling_length_um, lam)
    }

    pub fn transfer_at(&self, coupling_length_um: f64) -> TransferCoefficients {
        let mut t = TransferCoefficients::from_angles(
            self.total_angle(Polarization::Te, coupling_length_um),
            self.total_angle(Polarization::Tm, coupling_length_um),
        );
        t.transmission_factor_te = self.device.bend_transmission_te;
        t.transmission_factor_tm = self.device.bend_transmission_tm;
        t
    }

    pub fn split_at(&self, coupling_length_um: f64) -> SplitResult {
        self.transfer_at(coupling_length_um).split()
    }
}

/// Transfer coefficients of `device` at its own coupling length.
pub fn device_transfer(device: &DeviceSpec, table: &DeltaNTable) -> Result<TransferCoefficients> {
    Ok(TransferModel::new(device, table)?.transfer_at(device.coupling_length_um))
}

/// Uniformly spaced samples over `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    match samples {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// RMS of ζ over coupling lengths sampled uniformly in `lc_range_um`.
pub fn delta(device: &DeviceSpec, table: &DeltaNTable, lc_range_um: (f64, f64), samples: usize) -> Result<f64> {
    let model = TransferModel::new(device, table)?;
    delta_for_model(&model, lc_range_um, samples)
}

pub fn delta_for_model(model: &TransferModel, lc_range_um: (f64, f64), samples: usize) -> Result<f64> {
    if samples < 2 {
        return Err(Error::invalid("samples", "need at least two coupling lengths"));
    }
    let lcs = linspace(lc_range_um.0, lc_range_um.1, samples);
    let sq: f64 = lcs.iter().map(|&l| zeta(&model.split_at(l)).powi(2)).sum();
    Ok((sq / samples as f64).sqrt())
}

/// One row of a coupling-length sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitRow {
    pub coupling_length_um: f64,
    pub split: SplitResult,
    pub zeta: f64,
}

pub fn split_sweep(model: &TransferModel, lc_range_um: (f64, f64), samples: usize) -> Vec<SplitRow> {
    let lcs = linspace(lc_range_um.0, lc_range_um.1, samples);
    par_map(&lcs, |&l| {
        let split = model.split_at(l);
        SplitRow { coupling_length_um: l, split, zeta: zeta(&split) }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LAM: f64 = 493.55;

    fn flat_table(dn: f64) -> DeltaNTable {
        DeltaNTable::new(vec![
            DeltaNEntry { gap_nm: 10.0, delta_n_te: dn, delta_n_tm: dn },
            DeltaNEntry { gap_nm: 5000.0, delta_n_te: dn, delta_n_tm: dn },
        ])
        .unwrap()
    }

    fn exp_table() -> DeltaNTable {
        let entries = [20.0, 40.0, 60.0, 80.0, 120.0, 200.0, 300.0, 500.0]
            .iter()
            .map(|&g| DeltaNEntry {
                gap_nm: g,
                delta_n_te: 0.03 * (-(g - 20.0) / 90.0).exp(),
                delta_n_tm: 0.035 * (-(g - 20.0) / 75.0).exp(),
            })
            .collect();
        DeltaNTable::new(entries).unwrap()
    }

    #[test]
    fn straight_split_special_lengths() {
        let dn = 0.0123;
        assert_eq!(straight_split(dn, 0.0, LAM).unwrap(), (1.0, 0.0));
        let half = LAM * 1e-3 / (2.0 * dn);
        let (p3, p4) = straight_split(dn, half, LAM).unwrap();
        assert!(p3.abs() < 1e-12 && (p4 - 1.0).abs() < 1e-12);
        let (p3, p4) = straight_split(dn, half / 2.0, LAM).unwrap();
        assert!((p3 - 0.5).abs() < 1e-12 && (p4 - 0.5).abs() < 1e-12);
        assert!(straight_split(0.0, 1.0, LAM).is_err());
        assert!(straight_split(0.01, -1.0, LAM).is_err());
    }

    #[test]
    fn table_is_exact_at_nodes_and_loglinear_between() {
        let t = exp_table();
        for e in t.entries() {
            assert_eq!(t.delta_n(e.gap_nm, Polarization::Te).unwrap(), e.delta_n_te);
            assert_eq!(t.delta_n(e.gap_nm, Polarization::Tm).unwrap(), e.delta_n_tm);
        }
        // the table samples an exact exponential, so interpolation reproduces it
        let v = t.delta_n(150.0, Polarization::Te).unwrap();
        assert!((v / (0.03 * (-(130.0) / 90.0f64).exp()) - 1.0).abs() < 1e-12);
        // tail extrapolation continues the exponential, zero past 3 µm
        let v = t.delta_n(1000.0, Polarization::Tm).unwrap();
        assert!((v / (0.035 * (-(980.0) / 75.0f64).exp()) - 1.0).abs() < 1e-9);
        assert_eq!(t.delta_n(3000.0, Polarization::Te).unwrap(), 0.0);
        assert!(matches!(t.delta_n(10.0, Polarization::Te), Err(Error::TableCoverage { .. })));
    }

    #[test]
    fn table_validation() {
        let e = |g: f64, d: f64| DeltaNEntry { gap_nm: g, delta_n_te: d, delta_n_tm: d };
        assert!(DeltaNTable::new(vec![e(10.0, 0.1)]).is_err());
        assert!(DeltaNTable::new(vec![e(10.0, 0.1), e(10.0, 0.1)]).is_err());
        assert!(DeltaNTable::new(vec![e(10.0, 0.1), e(20.0, 0.0)]).is_err());
    }

    #[test]
    fn constant_coupling_bend_is_a_straight_section() {
        let dn = 0.01;
        let profile = SBendProfile { start_separation_um: 2.0, end_gap_nm: 40.0, bend_length_um: 30.0, samples: 200 };
        let theta = bend_accumulated_angle(&flat_table(dn), &profile, LAM, Polarization::Te).unwrap();
        assert!((theta - straight_phase(dn, 30.0, LAM)).abs() < 1e-12);
        // untapered profile
        let flat = SBendProfile { start_separation_um: 0.04, ..profile };
        let theta2 = bend_accumulated_angle(&exp_table(), &flat, LAM, Polarization::Tm).unwrap();
        let dn40 = exp_table().delta_n(40.0, Polarization::Tm).unwrap();
        assert!((theta2 - straight_phase(dn40, 30.0, LAM)).abs() < 1e-12);
    }

    #[test]
    fn bend_requires_coverage_of_end_gap() {
        let profile = SBendProfile { end_gap_nm: 15.0, ..Default::default() };
        assert!(matches!(
            bend_accumulated_angle(&exp_table(), &profile, LAM, Polarization::Te),
            Err(Error::TableCoverage { .. })
        ));
    }

    #[test]
    fn simpson_agrees_with_fine_trapezoid() {
        let t = exp_table();
        let profile = SBendProfile::default();
        let simpson = bend_accumulated_angle(&t, &profile, LAM, Polarization::Te).unwrap();
        // independent trapezoid rule at 10x the sample count
        let n = profile.samples * 10;
        let h = profile.bend_length_um / n as f64;
        let f = |z: f64| PI * t.delta_n(sbend_gap(z, &profile).unwrap(), Polarization::Te).unwrap() / (LAM * 1e-3);
        let mut trap = 0.5 * (f(0.0) + f(profile.bend_length_um));
        for k in 1..n {
            trap += f(k as f64 * h);
        }
        trap *= h;
        assert!(simpson > 0.0);
        assert!((simpson - trap).abs() < 1e-6, "{simpson} vs {trap}");
    }

    #[test]
    fn device_transfer_special_angles() {
        let t = TransferCoefficients::from_angles(PI / 4.0, PI / 4.0);
        for v in [t.t_h, t.r_h, t.t_v, t.r_v] {
            assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        }
        let t = TransferCoefficients::from_angles(0.0, 0.0);
        assert_eq!((t.t_h, t.r_h, t.t_v, t.r_v), (1.0, 0.0, 1.0, 0.0));
    }

    #[test]
    fn port_powers_are_normalized() {
        let t = TransferCoefficients::from_port_powers(49.7, 48.9, 50.7, 48.3).unwrap();
        assert!((t.t_h * t.t_h + t.r_h * t.r_h - 1.0).abs() < 1e-15);
        assert!((t.t_h * t.t_h - 49.7 / 98.6).abs() < 1e-15);
        assert!((t.r_v * t.r_v - 48.3 / 99.0).abs() < 1e-15);
        assert!(TransferCoefficients::from_port_powers(0.0, 0.0, 1.0, 1.0).is_err());
        assert!(TransferCoefficients::from_port_powers(-1.0, 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn loss_factors_do_not_change_the_split() {
        let device = DeviceSpec::default();
        let table = exp_table();
        let lossy = device_transfer(&device, &table).unwrap();
        let lossless = device_transfer(
            &DeviceSpec { bend_transmission_te: 1.0, bend_transmission_tm: 1.0, ..device },
            &table,
        )
        .unwrap();
        assert_eq!(lossy.split(), lossless.split());
        assert_eq!(lossy.transmission_factor_te, 0.993);
    }

    #[test]
    fn zeta_and_delta_trivial_cases() {
        let s = SplitResult { p3_te: 0.6, p4_te: 0.4, p3_tm: 0.4, p4_tm: 0.6 };
        assert!((zeta(&s) - 0.2).abs() < 1e-15);
        let same = SplitResult { p3_te: 0.3, p4_te: 0.7, p3_tm: 0.3, p4_tm: 0.7 };
        assert_eq!(zeta(&same), 0.0);
        let table = flat_table(0.01);
        assert_eq!(delta(&DeviceSpec::default(), &table, (1.0, 25.0), 50).unwrap(), 0.0);
        assert!(delta(&DeviceSpec::default(), &table, (1.0, 25.0), 1).is_err());
        // constant ζ: Δn_TE = Δn_TM and a bend offset that differs by a fixed angle
        let model = TransferModel {
            device: DeviceSpec::default(),
            bend_angle_te: 0.0,
            bend_angle_tm: 0.0,
            delta_n_te: 1e-12,
            delta_n_tm: 1e-12,
        };
        assert!(delta_for_model(&model, (1.0, 25.0), 10).unwrap() < 1e-12);
    }

    #[test]
    fn constant_zeta_gives_its_magnitude() {
        // TE stays in the bar state, TM stays split at a fixed ratio
        let model = TransferModel {
            device: DeviceSpec::default(),
            bend_angle_te: 0.0,
            bend_angle_tm: 0.3,
            delta_n_te: 1e-300,
            delta_n_tm: 1e-300,
        };
        let c = 1.0 - (0.6f64).cos().powi(2);
        assert!((delta_for_model(&model, (1.0, 25.0), 7).unwrap() - c).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn straight_split_conserves_and_is_periodic(dn in 1e-4f64..0.1, lc in 0.0f64..200.0) {
            let (p3, p4) = straight_split(dn, lc, LAM).unwrap();
            prop_assert!((p3 + p4 - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&p3) && (0.0..=1.0).contains(&p4));
            let period = LAM * 1e-3 / dn;
            let (q3, _) = straight_split(dn, lc + period, LAM).unwrap();
            prop_assert!((p3 - q3).abs() < 1e-12);
        }

        #[test]
        fn coupling_angle_is_additive(a in 0.0f64..20.0, b in 0.0f64..20.0) {
            let table = exp_table();
            let model = TransferModel::new(&DeviceSpec::default(), &table).unwrap();
            for pol in Polarization::BOTH {
                let whole = model.total_angle(pol, a + b);
                let parts = model.total_angle(pol, a) + straight_phase(model.delta_n(pol), b, LAM);
                prop_assert!((whole - parts).abs() < 1e-12);
            }
        }
    }
}
