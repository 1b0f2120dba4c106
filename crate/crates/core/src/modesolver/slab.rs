//! Closed-form planar waveguide dispersion, used as independent references
//! for the finite-difference solver.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::Polarization;

fn k0(wavelength_nm: f64) -> f64 {
    2.0 * PI / wavelength_nm
}

/// Effective index of mode `order` of a symmetric slab, by bisection on
/// `κt − 2·atan(r·γ/κ) − mπ = 0` (r = 1 for TE, (n_core/n_clad)² for TM).
pub fn analytic_slab_neff(
    n_core: f64,
    n_clad: f64,
    thickness_nm: f64,
    wavelength_nm: f64,
    polarization: Polarization,
    order: usize,
) -> Result<f64> {
    if !(n_core > n_clad && n_clad > 0.0 && thickness_nm > 0.0 && wavelength_nm > 0.0) {
        return Err(Error::invalid("slab", "need n_core > n_clad > 0 and positive lengths"));
    }
    let k0 = k0(wavelength_nm);
    let r = match polarization {
        Polarization::Te => 1.0,
        Polarization::Tm => (n_core / n_clad).powi(2),
    };
    let m = order as f64;
    let f = |n: f64| {
        let kappa = k0 * (n_core * n_core - n * n).max(0.0).sqrt();
        let gamma = k0 * (n * n - n_clad * n_clad).max(0.0).sqrt();
        kappa * thickness_nm - 2.0 * (r * gamma).atan2(kappa) - m * PI
    };
    if f(n_clad) <= 0.0 {
        return Err(Error::Cutoff { order });
    }
    Ok(bisect(f, n_clad, n_core, 1e-12))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Effective index of the fundamental even or odd supermode of two
/// identical slabs (thickness `thickness_nm`) separated by `gap_nm`, found
/// by transfer across the layers and bisection on the outer matching
/// condition. Polarization is relative to the slab planes.
pub fn analytic_slab_pair_neff(
    n_core: f64,
    n_clad: f64,
    thickness_nm: f64,
    gap_nm: f64,
    wavelength_nm: f64,
    polarization: Polarization,
    parity: Parity,
) -> Result<f64> {
    if !(n_core > n_clad && gap_nm >= 0.0 && thickness_nm > 0.0) {
        return Err(Error::invalid("slab pair", "need n_core > n_clad and non-negative gap"));
    }
    let k0 = k0(wavelength_nm);
    // continuity of F and p·F', p = 1 (TE, E field) or 1/ε (TM, H field)
    let (pc, pl) = match polarization {
        Polarization::Te => (1.0, 1.0),
        Polarization::Tm => (1.0 / (n_core * n_core), 1.0 / (n_clad * n_clad)),
    };
    let a = 0.5 * gap_nm;
    let g = |n: f64| {
        let kappa = k0 * (n_core * n_core - n * n).max(1e-300).sqrt();
        let gamma = k0 * (n * n - n_clad * n_clad).max(0.0).sqrt();
        let th = (gamma * a).tanh();
        let (fa, ga) = match parity {
            Parity::Even => (1.0, pl * gamma * th),
            Parity::Odd => (th, pl * gamma),
        };
        let (s, c) = (kappa * thickness_nm).sin_cos();
        let f_t = fa * c + ga / (pc * kappa) * s;
        let g_t = -pc * kappa * fa * s + ga * c;
        g_t + pl * gamma * f_t
    };
    // highest sign change of the continuous matching function
    let steps = 20_000;
    let lo = n_clad + 1e-12;
    let hi = n_core - 1e-12;
    let mut prev_n = hi;
    let mut prev_v = g(hi);
    for s in 1..=steps {
        let n = hi - (hi - lo) * s as f64 / steps as f64;
        let v = g(n);
        if v == 0.0 {
            return Ok(n);
        }
        if v.signum() != prev_v.signum() {
            return Ok(bisect(g, n, prev_n, 1e-13));
        }
        prev_n = n;
        prev_v = v;
    }
    Err(Error::Cutoff { order: 0 })
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let flo = f(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Polarization::*;

    const LAM: f64 = 493.55;

    #[test]
    fn thick_slab_approaches_bulk() {
        let n = analytic_slab_neff(2.34, 1.462, 50_000.0, LAM, Te, 0).unwrap();
        assert!((2.34 - n) < 1e-4);
    }

    #[test]
    fn just_above_cutoff_is_near_cladding() {
        // order-1 cutoff thickness: k0 t NA = π
        let na = (2.34f64.powi(2) - 1.462f64.powi(2)).sqrt();
        let t_c = PI / (k0(LAM) * na);
        let n = analytic_slab_neff(2.34, 1.462, t_c * 1.0005, LAM, Te, 1).unwrap();
        assert!(n - 1.462 < 1e-3 && n > 1.462);
        assert!(matches!(analytic_slab_neff(2.34, 1.462, t_c * 0.999, LAM, Te, 1), Err(Error::Cutoff { order: 1 })));
    }

    #[test]
    fn default_film_values_are_ordered() {
        let te = analytic_slab_neff(2.34, 1.462, 300.0, LAM, Te, 0).unwrap();
        let tm = analytic_slab_neff(2.34, 1.462, 300.0, LAM, Tm, 0).unwrap();
        assert!(te > tm && tm > 1.462);
        // dispersion residual of the root itself
        let kappa = k0(LAM) * (2.34f64.powi(2) - te * te).sqrt();
        let gamma = k0(LAM) * (te * te - 1.462f64.powi(2)).sqrt();
        assert!((kappa * 300.0 - 2.0 * (gamma / kappa).atan()).abs() < 1e-9);
    }

    #[test]
    fn slab_pair_brackets_single_slab_and_decouples() {
        for pol in [Te, Tm] {
            let single = analytic_slab_neff(2.34, 1.462, 200.0, LAM, pol, 0).unwrap();
            let even = analytic_slab_pair_neff(2.34, 1.462, 200.0, 150.0, LAM, pol, Parity::Even).unwrap();
            let odd = analytic_slab_pair_neff(2.34, 1.462, 200.0, 150.0, LAM, pol, Parity::Odd).unwrap();
            assert!(even > single && single > odd, "{pol}: {even} {single} {odd}");
            let e_far = analytic_slab_pair_neff(2.34, 1.462, 200.0, 3000.0, LAM, pol, Parity::Even).unwrap();
            let o_far = analytic_slab_pair_neff(2.34, 1.462, 200.0, 3000.0, LAM, pol, Parity::Odd).unwrap();
            assert!((e_far - single).abs() < 1e-9 && (o_far - single).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_gap_even_mode_is_double_thickness_slab() {
        let even = analytic_slab_pair_neff(2.34, 1.462, 150.0, 0.0, LAM, Te, Parity::Even).unwrap();
        let thick = analytic_slab_neff(2.34, 1.462, 300.0, LAM, Te, 0).unwrap();
        assert!((even - thick).abs() < 1e-10);
    }
}
