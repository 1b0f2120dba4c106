//! Full-vectorial finite-difference mode solver for rasterized
//! cross-sections, supermode classification and coupling strengths.

mod eigen;
mod operator;
pub mod slab;

pub use eigen::{EigenOptions, EigenPair, ShiftInvert};
pub use operator::{assemble, Boundary, CsrMatrix};
pub use slab::{analytic_slab_neff, analytic_slab_pair_neff, Parity};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rasterize, CoupledPair, CrossSection, GridSpec, IndexMap, MaterialStack};
use crate::Polarization;

/// Modes whose effective indices differ by less than this are treated as
/// degenerate and split by mirror parity before classification.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Minimum |mirror correlation| for a definite symmetry label.
pub const SYMMETRY_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Shift effective index; `None` uses `n_core − 0.05`.
    pub n_guess: Option<f64>,
    pub tolerance: f64,
    pub max_restarts: usize,
    pub krylov_dim: Option<usize>,
    pub boundary_x: Boundary,
    pub boundary_y: Boundary,
    /// Modes requested when pairing supermodes.
    pub pair_modes: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            n_guess: None,
            tolerance: 1e-9,
            max_restarts: 25,
            krylov_dim: None,
            boundary_x: Boundary::ZeroField,
            boundary_y: Boundary::ZeroField,
            pair_modes: 6,
        }
    }
}

impl SolverSettings {
    pub fn n_guess_for(&self, n_core: f64) -> f64 {
        self.n_guess.unwrap_or(n_core - 0.05)
    }

    fn eigen_options(&self) -> EigenOptions {
        EigenOptions { tolerance: self.tolerance, max_restarts: self.max_restarts, krylov_dim: self.krylov_dim }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    Symmetric,
    Antisymmetric,
    None,
}

impl Symmetry {
    pub fn label(self) -> &'static str {
        match self {
            Symmetry::Symmetric => "symmetric",
            Symmetry::Antisymmetric => "antisymmetric",
            Symmetry::None => "none",
        }
    }
}

/// One guided eigenmode. Fields are stored row-major (`j * nx + i`) on the
/// map's grid and normalized so that `Σ(Ex² + Ey²)·dx·dy = 1` with dx, dy
/// in µm.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSolution {
    pub n_eff: f64,
    pub ex: Vec<f64>,
    pub ey: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
    pub dx_nm: f64,
    pub dy_nm: f64,
    pub x0_nm: f64,
    pub y0_nm: f64,
    /// Fraction of transverse power in the dominant component.
    pub polarization_fraction: f64,
    pub polarization: Polarization,
    pub symmetry: Symmetry,
    pub residual: f64,
}

impl ModeSolution {
    pub fn dominant(&self) -> &[f64] {
        match self.polarization {
            Polarization::Te => &self.ex,
            Polarization::Tm => &self.ey,
        }
    }

    pub fn power(&self) -> f64 {
        let da = self.dx_nm * self.dy_nm * 1e-6;
        self.ex.iter().chain(&self.ey).map(|v| v * v).sum::<f64>() * da
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeClass {
    pub polarization: Polarization,
    pub symmetry: Symmetry,
    /// Mirror correlation of the dominant component (0 when not requested).
    pub correlation: f64,
    pub polarization_fraction: f64,
}

/// Polarization by majority transverse power; symmetry (only on
/// mirror-symmetric maps) by the normalized correlation of the dominant
/// component with its mirror image about `x = 0`.
pub fn classify_mode(mode: &ModeSolution, map: &IndexMap) -> ModeClass {
    classify_fields(&mode.ex, &mode.ey, map)
}

fn classify_fields(ex: &[f64], ey: &[f64], map: &IndexMap) -> ModeClass {
    let px: f64 = ex.iter().map(|v| v * v).sum();
    let py: f64 = ey.iter().map(|v| v * v).sum();
    let total = px + py;
    let (polarization, dom, frac) = if px >= py {
        (Polarization::Te, ex, px / total)
    } else {
        (Polarization::Tm, ey, py / total)
    };
    if !map.mirror_symmetric {
        return ModeClass { polarization, symmetry: Symmetry::None, correlation: 0.0, polarization_fraction: frac };
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..map.ny {
        for i in 0..map.nx {
            let a = dom[map.idx(i, j)];
            num += a * dom[map.idx(map.nx - 1 - i, j)];
            den += a * a;
        }
    }
    let corr = if den > 0.0 { num / den } else { 0.0 };
    let symmetry = if corr >= SYMMETRY_THRESHOLD {
        Symmetry::Symmetric
    } else if corr <= -SYMMETRY_THRESHOLD {
        Symmetry::Antisymmetric
    } else {
        log::warn!("mode with mirror correlation {corr:.3} left unclassified (hybridized or degenerate)");
        Symmetry::None
    };
    ModeClass { polarization, symmetry, correlation: corr, polarization_fraction: frac }
}

/// Guided modes of `map` nearest below `n_guess`, sorted by descending
/// effective index. An empty list means nothing is guided.
pub fn solve_modes(
    map: &IndexMap,
    wavelength_nm: f64,
    count: usize,
    n_guess: f64,
    settings: &SolverSettings,
) -> Result<Vec<ModeSolution>> {
    if count == 0 {
        return Err(Error::invalid("count", "request at least one mode"));
    }
    if !(n_guess > map.n_clad && n_guess < map.n_core) {
        return Err(Error::invalid(
            "n_guess",
            format!("{n_guess} must lie strictly between {} and {}", map.n_clad, map.n_core),
        ));
    }
    let k0 = 2.0 * std::f64::consts::PI / (wavelength_nm * 1e-3);
    let a = assemble(map, k0, settings.boundary_x, settings.boundary_y);
    let sigma = (n_guess * k0).powi(2);
    let lo = (map.n_clad * k0).powi(2);
    let hi = (map.n_core * k0).powi(2);
    let si = ShiftInvert::new(&a, sigma)?;
    let mut pairs = si.solve(count, |l| l > lo && l < hi, &settings.eigen_options())?;
    pairs.sort_by(|p, q| q.value.total_cmp(&p.value));
    if map.mirror_symmetric {
        split_degenerate(&mut pairs, map, k0);
    }

    let da = map.dx_nm * map.dy_nm * 1e-6;
    let mut modes = Vec::with_capacity(pairs.len());
    for p in pairs {
        let n_eff = p.value.sqrt() / k0;
        let mut ex: Vec<f64> = p.vector.iter().step_by(2).copied().collect();
        let mut ey: Vec<f64> = p.vector.iter().skip(1).step_by(2).copied().collect();
        let cls = classify_fields(&ex, &ey, map);
        let power: f64 = ex.iter().chain(&ey).map(|v| v * v).sum::<f64>() * da;
        let dom = if cls.polarization == Polarization::Te { &ex } else { &ey };
        let peak = dom.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let scale = peak.signum() / power.sqrt();
        ex.iter_mut().chain(ey.iter_mut()).for_each(|v| *v *= scale);
        modes.push(ModeSolution {
            n_eff,
            ex,
            ey,
            nx: map.nx,
            ny: map.ny,
            dx_nm: map.dx_nm,
            dy_nm: map.dy_nm,
            x0_nm: map.x0_nm,
            y0_nm: map.y0_nm,
            polarization_fraction: cls.polarization_fraction,
            polarization: cls.polarization,
            symmetry: cls.symmetry,
            residual: p.residual,
        });
    }
    Ok(modes)
}

/// Replaces near-degenerate neighbors by their mirror-parity projections.
fn split_degenerate(pairs: &mut [EigenPair], map: &IndexMap, k0: f64) {
    let neff = |v: f64| v.sqrt() / k0;
    let mut k = 0;
    while k + 1 < pairs.len() {
        if (neff(pairs[k].value) - neff(pairs[k + 1].value)).abs() >= DEGENERACY_TOL {
            k += 1;
            continue;
        }
        let project = |v: &[f64], sign: f64| -> Vec<f64> {
            let mut out = vec![0.0; v.len()];
            for j in 0..map.ny {
                for i in 0..map.nx {
                    let a = 2 * map.idx(i, j);
                    let b = 2 * map.idx(map.nx - 1 - i, j);
                    // reflection x → −x flips Ex and keeps Ey
                    out[a] = 0.5 * (v[a] - sign * v[b]);
                    out[a + 1] = 0.5 * (v[a + 1] + sign * v[b + 1]);
                }
            }
            out
        };
        let (u, w) = (&pairs[k].vector, &pairs[k + 1].vector);
        let (up, wp) = (project(u, 1.0), project(w, 1.0));
        let (um, wm) = (project(u, -1.0), project(w, -1.0));
        let mut even = if eigen::norm(&up) >= eigen::norm(&wp) { up } else { wp };
        let mut odd = if eigen::norm(&um) >= eigen::norm(&wm) { um } else { wm };
        for v in [&mut even, &mut odd] {
            let n = eigen::norm(v);
            v.iter_mut().for_each(|x| *x /= n);
        }
        pairs[k].vector = even;
        pairs[k + 1].vector = odd;
        k += 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingStrength {
    pub gap_nm: f64,
    pub delta_n_te: f64,
    pub delta_n_tm: f64,
    pub xi: f64,
    pub n_sym_te: f64,
    pub n_anti_te: f64,
    pub n_sym_tm: f64,
    pub n_anti_tm: f64,
}

impl CouplingStrength {
    pub fn delta_n(&self, pol: Polarization) -> f64 {
        match pol {
            Polarization::Te => self.delta_n_te,
            Polarization::Tm => self.delta_n_tm,
        }
    }
}

/// Pairs the symmetric and antisymmetric supermodes of each polarization
/// from an already solved mode list.
pub fn pair_supermodes(modes: &[ModeSolution], gap_nm: f64) -> Result<CouplingStrength> {
    if modes.len() < 4 {
        return Err(Error::TooFewModes { expected: 4, found: modes.len() });
    }
    let find = |pol: Polarization, sym: Symmetry| {
        modes
            .iter()
            .find(|m| m.polarization == pol && m.symmetry == sym)
            .map(|m| m.n_eff)
            .ok_or_else(|| Error::Pairing(format!("no {} {pol} supermode among {} modes", sym.label(), modes.len())))
    };
    let (s_te, a_te) = (find(Polarization::Te, Symmetry::Symmetric)?, find(Polarization::Te, Symmetry::Antisymmetric)?);
    let (s_tm, a_tm) = (find(Polarization::Tm, Symmetry::Symmetric)?, find(Polarization::Tm, Symmetry::Antisymmetric)?);
    let (dte, dtm) = (s_te - a_te, s_tm - a_tm);
    if dte <= 0.0 || dtm <= 0.0 {
        return Err(Error::Pairing(format!("non-positive splitting: Δn_TE = {dte:.3e}, Δn_TM = {dtm:.3e}")));
    }
    Ok(CouplingStrength {
        gap_nm,
        delta_n_te: dte,
        delta_n_tm: dtm,
        xi: dte / dtm,
        n_sym_te: s_te,
        n_anti_te: a_te,
        n_sym_tm: s_tm,
        n_anti_tm: a_tm,
    })
}

/// Supermode splittings Δn_TE, Δn_TM and their ratio ξ for a coupled pair.
pub fn coupling_strength(
    pair: &CoupledPair,
    stack: &MaterialStack,
    grid: &GridSpec,
    settings: &SolverSettings,
) -> Result<CouplingStrength> {
    let map = rasterize(&CrossSection::Pair(*pair), stack, grid)?;
    let count = settings.pair_modes.max(4);
    let guess = settings.n_guess_for(stack.n_core);
    let modes = solve_modes(&map, stack.wavelength_nm, count, guess, settings)?;
    match pair_supermodes(&modes, pair.gap_nm) {
        // shallow etches put slab-like modes between the supermodes; look deeper once
        Err(Error::Pairing(msg)) if modes.len() == count => {
            log::info!("gap {} nm: {msg}; retrying with {} modes", pair.gap_nm, 2 * count);
            let modes = solve_modes(&map, stack.wavelength_nm, 2 * count, guess, settings)?;
            pair_supermodes(&modes, pair.gap_nm)
        }
        r => r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Axis, RibWaveguide};

    fn stack() -> MaterialStack {
        MaterialStack::default()
    }

    #[test]
    fn cladding_only_map_has_no_guided_modes() {
        let map = IndexMap::uniform(&GridSpec::new(50.0, 50.0, 3.0, 3.0), &stack()).unwrap();
        let modes = solve_modes(&map, 493.55, 2, 2.29, &SolverSettings::default()).unwrap();
        assert!(modes.is_empty());
    }

    #[test]
    fn rejects_bad_requests() {
        let map = IndexMap::uniform(&GridSpec::new(50.0, 50.0, 1.0, 1.0), &stack()).unwrap();
        assert!(solve_modes(&map, 493.55, 0, 2.0, &SolverSettings::default()).is_err());
        assert!(solve_modes(&map, 493.55, 1, 2.5, &SolverSettings::default()).is_err());
    }

    #[test]
    fn coarse_slab_matches_oracle_and_is_normalized() {
        let grid = GridSpec::new(20.0, 10.0, 0.04, 3.6);
        let map = IndexMap::layered(Axis::Y, &grid, 2.34, 1.462, &[(-150.0, 150.0)]).unwrap();
        let settings = SolverSettings { boundary_x: Boundary::ZeroSlope, ..Default::default() };
        let modes = solve_modes(&map, 493.55, 2, 2.29, &settings).unwrap();
        assert_eq!(modes.len(), 2);
        assert_eq!(modes[0].polarization, Polarization::Te);
        assert_eq!(modes[1].polarization, Polarization::Tm);
        let te = analytic_slab_neff(2.34, 1.462, 300.0, 493.55, Polarization::Te, 0).unwrap();
        assert!((modes[0].n_eff - te).abs() < 1e-3, "{} vs {te}", modes[0].n_eff);
        for m in &modes {
            assert!((m.power() - 1.0).abs() < 1e-10);
            assert!(m.residual < 1e-9);
            assert!(m.n_eff > 1.462 && m.n_eff < 2.34);
        }
    }

    #[test]
    fn single_rib_has_te_and_tm_fundamentals() {
        let map = rasterize(&CrossSection::Rib(RibWaveguide::default()), &stack(), &GridSpec::new(20.0, 20.0, 4.0, 3.4))
            .unwrap();
        let modes = solve_modes(&map, 493.55, 2, 2.29, &SolverSettings::default()).unwrap();
        assert_eq!(modes.len(), 2);
        assert_eq!(modes[0].polarization, Polarization::Te);
        assert_eq!(modes[1].polarization, Polarization::Tm);
        assert!(modes[0].polarization_fraction > 0.6 && modes[1].polarization_fraction > 0.6);
        assert!(modes[0].n_eff > modes[1].n_eff);
    }

    #[test]
    fn symmetry_from_mirror_correlation() {
        let map = IndexMap::uniform(&GridSpec::new(100.0, 100.0, 1.0, 0.4), &stack()).unwrap();
        let n = map.len();
        let mut even = vec![0.0; n];
        let mut odd = vec![0.0; n];
        for j in 0..map.ny {
            for i in 0..map.nx {
                let (x, _) = map.cell_center_nm(i, j);
                even[map.idx(i, j)] = (-(x / 200.0).powi(2)).exp();
                odd[map.idx(i, j)] = x * (-(x / 200.0).powi(2)).exp();
            }
        }
        let zeros = vec![0.0; n];
        assert_eq!(classify_fields(&even, &zeros, &map).symmetry, Symmetry::Symmetric);
        assert_eq!(classify_fields(&odd, &zeros, &map).symmetry, Symmetry::Antisymmetric);
        let c = classify_fields(&zeros, &odd, &map);
        assert_eq!((c.polarization, c.symmetry), (Polarization::Tm, Symmetry::Antisymmetric));
        let mixed: Vec<f64> = even.iter().zip(&odd).map(|(a, b)| a + b / 200.0).collect();
        assert_eq!(classify_fields(&mixed, &zeros, &map).symmetry, Symmetry::None);
    }

    #[test]
    fn majority_rule_for_polarization() {
        let map = IndexMap::uniform(&GridSpec::new(100.0, 100.0, 0.2, 0.2), &stack()).unwrap();
        let ex = vec![0.85f64.sqrt(); map.len()];
        let ey = vec![0.15f64.sqrt(); map.len()];
        let mut m = map.clone();
        m.mirror_symmetric = false;
        let c = classify_fields(&ex, &ey, &m);
        assert_eq!(c.polarization, Polarization::Te);
        assert_eq!(c.symmetry, Symmetry::None);
        assert!((c.polarization_fraction - 0.85).abs() < 1e-12);
    }

    #[test]
    fn pairing_needs_four_modes() {
        assert!(matches!(pair_supermodes(&[], 50.0), Err(Error::TooFewModes { .. })));
    }
}
