//! Lensed-fiber Gaussian spot, butt-coupling overlap with the rib
//! fundamentals, and efficiency versus numerical aperture.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::geometry::{rasterize, CrossSection, GridSpec, MaterialStack, RibWaveguide};
use crate::modesolver::{solve_modes, ModeSolution, SolverSettings};
use crate::Polarization;

/// Upper end of the usual lensed-fiber range; larger values only warn.
pub const NA_WARN_ABOVE: f64 = 0.6;

/// The Gaussian must fit this many waists across the window.
pub const WINDOW_WAISTS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBeam {
    pub na: f64,
    pub wavelength_nm: f64,
}

impl GaussianBeam {
    pub fn new(na: f64, wavelength_nm: f64) -> Result<Self> {
        if !(na > 0.0 && na < 1.0) {
            return Err(Error::invalid("na", format!("must lie in (0, 1), got {na}")));
        }
        if !(wavelength_nm > 0.0) {
            return Err(Error::invalid("wavelength_nm", "must be positive"));
        }
        if na > NA_WARN_ABOVE {
            log::warn!("NA {na} beyond the usual lensed-fiber range (≤ {NA_WARN_ABOVE})");
        }
        Ok(GaussianBeam { na, wavelength_nm })
    }

    /// Field 1/e radius `λ0/(π·NA)` in nm.
    pub fn waist_nm(&self) -> f64 {
        self.wavelength_nm / (PI * self.na)
    }
}

/// Transverse (Ex, Ey) field sampled at cell centers, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransverseField {
    pub nx: usize,
    pub ny: usize,
    pub dx_nm: f64,
    pub dy_nm: f64,
    pub x0_nm: f64,
    pub y0_nm: f64,
    pub ex: Vec<f64>,
    pub ey: Vec<f64>,
}

impl TransverseField {
    pub fn zeros(nx: usize, ny: usize, dx_nm: f64, dy_nm: f64, x0_nm: f64, y0_nm: f64) -> Self {
        TransverseField { nx, ny, dx_nm, dy_nm, x0_nm, y0_nm, ex: vec![0.0; nx * ny], ey: vec![0.0; nx * ny] }
    }

    pub fn from_mode(mode: &ModeSolution) -> Self {
        TransverseField {
            nx: mode.nx,
            ny: mode.ny,
            dx_nm: mode.dx_nm,
            dy_nm: mode.dy_nm,
            x0_nm: mode.x0_nm,
            y0_nm: mode.y0_nm,
            ex: mode.ex.clone(),
            ey: mode.ey.clone(),
        }
    }

    pub fn cell_center_nm(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x0_nm + (i as f64 + 0.5) * self.dx_nm, self.y0_nm + (j as f64 + 0.5) * self.dy_nm)
    }

    /// Cell area in µm².
    pub fn cell_area_um2(&self) -> f64 {
        self.dx_nm * self.dy_nm * 1e-6
    }

    pub fn power(&self) -> f64 {
        self.ex.iter().chain(&self.ey).map(|v| v * v).sum::<f64>() * self.cell_area_um2()
    }

    pub fn width_nm(&self) -> f64 {
        self.nx as f64 * self.dx_nm
    }

    pub fn height_nm(&self) -> f64 {
        self.ny as f64 * self.dy_nm
    }

    pub fn same_grid(&self, other: &TransverseField) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && (self.dx_nm - other.dx_nm).abs() < 1e-9
            && (self.dy_nm - other.dy_nm).abs() < 1e-9
            && (self.x0_nm - other.x0_nm).abs() < 1e-6
            && (self.y0_nm - other.y0_nm).abs() < 1e-6
    }

    /// Embeds the field in a window grown by `px` cells left and right and
    /// `py` cells top and bottom, zero outside.
    pub fn padded(&self, px: usize, py: usize) -> Self {
        let (nx, ny) = (self.nx + 2 * px, self.ny + 2 * py);
        let mut out = TransverseField::zeros(
            nx,
            ny,
            self.dx_nm,
            self.dy_nm,
            self.x0_nm - px as f64 * self.dx_nm,
            self.y0_nm - py as f64 * self.dy_nm,
        );
        for j in 0..self.ny {
            let src = j * self.nx;
            let dst = (j + py) * nx + px;
            out.ex[dst..dst + self.nx].copy_from_slice(&self.ex[src..src + self.nx]);
            out.ey[dst..dst + self.nx].copy_from_slice(&self.ey[src..src + self.nx]);
        }
        out
    }
}

/// Unit-power circular Gaussian `exp(−r²/w0²)` on the dominant component
/// of `pol` (Ex for TE, Ey for TM), centered at `center_nm`.
pub fn gaussian_field(
    beam: &GaussianBeam,
    template: &TransverseField,
    center_nm: (f64, f64),
    pol: Polarization,
) -> Result<TransverseField> {
    let w0 = beam.waist_nm();
    let half = 0.5 * WINDOW_WAISTS * w0;
    let (cx, cy) = center_nm;
    let room = [
        cx - template.x0_nm,
        template.x0_nm + template.width_nm() - cx,
        cy - template.y0_nm,
        template.y0_nm + template.height_nm() - cy,
    ];
    if room.iter().any(|&r| r < half) {
        return Err(Error::WindowTooSmall(format!(
            "Gaussian with waist {w0:.1} nm needs {half:.1} nm on each side of its center; window leaves {:.1} nm",
            room.iter().copied().fold(f64::INFINITY, f64::min)
        )));
    }
    let mut f = TransverseField::zeros(
        template.nx,
        template.ny,
        template.dx_nm,
        template.dy_nm,
        template.x0_nm,
        template.y0_nm,
    );
    let comp = match pol {
        Polarization::Te => &mut f.ex,
        Polarization::Tm => &mut f.ey,
    };
    for j in 0..template.ny {
        for i in 0..template.nx {
            let (x, y) = template.cell_center_nm(i, j);
            comp[j * template.nx + i] = (-((x - cx).powi(2) + (y - cy).powi(2)) / (w0 * w0)).exp();
        }
    }
    let scale = 1.0 / f.power().sqrt();
    f.ex.iter_mut().chain(f.ey.iter_mut()).for_each(|v| *v *= scale);
    Ok(f)
}

/// Normalized power overlap `|⟨a, b⟩|² / (⟨a, a⟩⟨b, b⟩)` of two real
/// transverse fields.
pub fn overlap(a: &TransverseField, b: &TransverseField) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch(format!(
            "{}×{} at ({}, {}) vs {}×{} at ({}, {})",
            a.nx, a.ny, a.x0_nm, a.y0_nm, b.nx, b.ny, b.x0_nm, b.y0_nm
        )));
    }
    let dot = |u: &TransverseField, v: &TransverseField| -> f64 {
        u.ex.iter().zip(&v.ex).map(|(p, q)| p * q).sum::<f64>()
            + u.ey.iter().zip(&v.ey).map(|(p, q)| p * q).sum::<f64>()
    };
    let (ab, aa, bb) = (dot(a, b), dot(a, a), dot(b, b));
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::EmptyData("overlap with an all-zero field".into()));
    }
    Ok((ab * ab / (aa * bb)).clamp(0.0, 1.0))
}

/// Area centroid of the guiding core: the rib plus the slab directly
/// beneath its base, with the film bottom at `y = 0`.
pub fn core_centroid_nm(rib: &RibWaveguide, stack: &MaterialStack) -> (f64, f64) {
    let hs = rib.slab_thickness_nm(stack);
    let he = rib.etch_depth_nm;
    let (wb, wt) = (rib.bottom_width_nm(), rib.top_width_nm());
    let slab_area = wb * hs;
    let rib_area = 0.5 * (wb + wt) * he;
    // trapezoid centroid above its base
    let rib_y = hs + he * (wb + 2.0 * wt) / (3.0 * (wb + wt));
    (0.0, (slab_area * 0.5 * hs + rib_area * rib_y) / (slab_area + rib_area))
}

/// Coupling efficiencies at one numerical aperture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapResult {
    pub na: f64,
    pub eta_te: f64,
    pub eta_tm: f64,
}

/// Single-rib TE and TM fundamentals prepared for repeated overlaps.
#[derive(Debug, Clone)]
pub struct FiberCoupling {
    pub te: TransverseField,
    pub tm: TransverseField,
    pub n_eff_te: f64,
    pub n_eff_tm: f64,
    pub center_nm: (f64, f64),
    pub wavelength_nm: f64,
}

impl FiberCoupling {
    pub fn solve(rib: &RibWaveguide, stack: &MaterialStack, grid: &GridSpec, settings: &SolverSettings) -> Result<Self> {
        let map = rasterize(&CrossSection::Rib(*rib), stack, grid)?;
        let modes = solve_modes(&map, stack.wavelength_nm, 4, settings.n_guess_for(stack.n_core), settings)?;
        let pick = |pol: Polarization| {
            modes
                .iter()
                .find(|m| m.polarization == pol)
                .ok_or(Error::TooFewModes { expected: 2, found: modes.len() })
        };
        let (te, tm) = (pick(Polarization::Te)?, pick(Polarization::Tm)?);
        Ok(FiberCoupling {
            te: TransverseField::from_mode(te),
            tm: TransverseField::from_mode(tm),
            n_eff_te: te.n_eff,
            n_eff_tm: tm.n_eff,
            center_nm: core_centroid_nm(rib, stack),
            wavelength_nm: stack.wavelength_nm,
        })
    }

    /// Mode fields zero-padded so a beam of numerical aperture `na_min`
    /// fits the window.
    pub fn padded_for(&self, na_min: f64) -> Result<(TransverseField, TransverseField)> {
        let w0 = GaussianBeam::new(na_min, self.wavelength_nm)?.waist_nm();
        let half = 0.5 * WINDOW_WAISTS * w0;
        let f = &self.te;
        let (cx, cy) = self.center_nm;
        let need = |room: f64, d: f64| ((half - room).max(0.0) / d).ceil() as usize + 1;
        let px = need((cx - f.x0_nm).min(f.x0_nm + f.width_nm() - cx), f.dx_nm);
        let py = need((cy - f.y0_nm).min(f.y0_nm + f.height_nm() - cy), f.dy_nm);
        Ok((self.te.padded(px, py), self.tm.padded(px, py)))
    }

    pub fn efficiency(&self, na: f64) -> Result<OverlapResult> {
        let (te, tm) = self.padded_for(na)?;
        efficiency_on(&te, &tm, self.center_nm, na, self.wavelength_nm)
    }
}

fn efficiency_on(
    te: &TransverseField,
    tm: &TransverseField,
    center_nm: (f64, f64),
    na: f64,
    wavelength_nm: f64,
) -> Result<OverlapResult> {
    let beam = GaussianBeam::new(na, wavelength_nm)?;
    let eta_te = overlap(&gaussian_field(&beam, te, center_nm, Polarization::Te)?, te)?;
    let eta_tm = overlap(&gaussian_field(&beam, tm, center_nm, Polarization::Tm)?, tm)?;
    Ok(OverlapResult { na, eta_te, eta_tm })
}

/// Efficiencies at each numerical aperture, evaluated in parallel on one
/// window sized for the smallest aperture.
pub fn na_sweep(coupling: &FiberCoupling, na_values: &[f64]) -> Result<Vec<OverlapResult>> {
    if na_values.is_empty() {
        return Err(Error::EmptyData("no numerical apertures to sweep".into()));
    }
    let na_min = na_values.iter().copied().fold(f64::INFINITY, f64::min);
    let (te, tm) = coupling.padded_for(na_min)?;
    par_map(na_values, |&na| efficiency_on(&te, &tm, coupling.center_nm, na, coupling.wavelength_nm))
        .into_iter()
        .collect()
}
