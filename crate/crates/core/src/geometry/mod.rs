//! Device geometry: material stack, rib cross-sections, the coupled pair and
//! the S-bend separation profile.
//!
//! Lengths carry their unit in the field name. Cross-section coordinates are
//! in nm with `x = 0` on the device mid-plane and `y = 0` at the bottom of
//! the film (top of the buried oxide).

mod raster;

pub use raster::{rasterize, Axis, CrossSection, GridSpec, IndexMap};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A 2-D point in nm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialStack {
    pub n_core: f64,
    pub n_clad: f64,
    pub film_thickness_nm: f64,
    pub box_thickness_um: f64,
    pub clad_thickness_um: f64,
    pub wavelength_nm: f64,
}

impl Default for MaterialStack {
    fn default() -> Self {
        MaterialStack {
            n_core: 2.34,
            n_clad: 1.462,
            film_thickness_nm: 300.0,
            box_thickness_um: 2.0,
            clad_thickness_um: 2.0,
            wavelength_nm: 493.55,
        }
    }
}

impl MaterialStack {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_clad > 1.0 && self.n_core > self.n_clad) {
            return Err(Error::invalid(
                "n_core/n_clad",
                format!("guidance requires n_core > n_clad > 1, got {} and {}", self.n_core, self.n_clad),
            ));
        }
        positive("film_thickness_nm", self.film_thickness_nm)?;
        positive("box_thickness_um", self.box_thickness_um)?;
        positive("clad_thickness_um", self.clad_thickness_um)?;
        positive("wavelength_nm", self.wavelength_nm)?;
        Ok(())
    }

    /// Free-space wavenumber in µm⁻¹.
    pub fn k0_per_um(&self) -> f64 {
        2.0 * PI / (self.wavelength_nm * 1e-3)
    }
}

/// Which edge of the trapezoid `width_nm` (and a pair's `gap_nm`) refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthReference {
    Top,
    /// Rib base, at the slab surface.
    #[default]
    Bottom,
}

/// Partially etched rib with trapezoidal sidewalls, widening downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RibWaveguide {
    pub width_nm: f64,
    pub etch_depth_nm: f64,
    pub sidewall_angle_deg: f64,
    pub width_reference: WidthReference,
}

impl Default for RibWaveguide {
    fn default() -> Self {
        RibWaveguide {
            width_nm: 475.0,
            etch_depth_nm: 110.0,
            sidewall_angle_deg: 75.0,
            width_reference: WidthReference::Bottom,
        }
    }
}

impl RibWaveguide {
    pub fn validate(&self, stack: &MaterialStack) -> Result<()> {
        positive("width_nm", self.width_nm)?;
        positive("etch_depth_nm", self.etch_depth_nm)?;
        if self.etch_depth_nm > stack.film_thickness_nm {
            return Err(Error::invalid(
                "etch_depth_nm",
                format!(
                    "etch depth {} nm exceeds film thickness {} nm",
                    self.etch_depth_nm, stack.film_thickness_nm
                ),
            ));
        }
        if !(self.sidewall_angle_deg > 0.0 && self.sidewall_angle_deg <= 90.0) {
            return Err(Error::invalid(
                "sidewall_angle_deg",
                format!("must lie in (0, 90], got {}", self.sidewall_angle_deg),
            ));
        }
        if self.top_width_nm() <= 0.0 {
            return Err(Error::invalid("width_nm", "sidewalls meet below the rib top"));
        }
        Ok(())
    }

    pub fn slab_thickness_nm(&self, stack: &MaterialStack) -> f64 {
        stack.film_thickness_nm - self.etch_depth_nm
    }

    /// Horizontal run of one sidewall.
    pub fn sidewall_run_nm(&self) -> f64 {
        if self.sidewall_angle_deg >= 90.0 {
            0.0
        } else {
            self.etch_depth_nm / self.sidewall_angle_deg.to_radians().tan()
        }
    }

    pub fn top_width_nm(&self) -> f64 {
        match self.width_reference {
            WidthReference::Top => self.width_nm,
            WidthReference::Bottom => self.width_nm - 2.0 * self.sidewall_run_nm(),
        }
    }

    pub fn bottom_width_nm(&self) -> f64 {
        match self.width_reference {
            WidthReference::Top => self.width_nm + 2.0 * self.sidewall_run_nm(),
            WidthReference::Bottom => self.width_nm,
        }
    }
}

/// Closed trapezoid of the rib above the slab, centered on `x = 0`,
/// counter-clockwise starting at the bottom-left corner.
pub fn rib_polygon(rib: &RibWaveguide, stack: &MaterialStack) -> Result<Vec<Point>> {
    stack.validate()?;
    rib.validate(stack)?;
    let y_bot = rib.slab_thickness_nm(stack);
    let y_top = stack.film_thickness_nm;
    let hb = rib.bottom_width_nm() / 2.0;
    let ht = rib.top_width_nm() / 2.0;
    Ok(vec![
        Point::new(-hb, y_bot),
        Point::new(hb, y_bot),
        Point::new(ht, y_top),
        Point::new(-ht, y_top),
    ])
}

/// Two identical ribs separated by an edge-to-edge gap, measured at the
/// same trapezoid edge as the rib width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoupledPair {
    pub rib: RibWaveguide,
    pub gap_nm: f64,
}

impl Default for CoupledPair {
    fn default() -> Self {
        CoupledPair { rib: RibWaveguide::default(), gap_nm: 40.0 }
    }
}

impl CoupledPair {
    pub fn validate(&self, stack: &MaterialStack) -> Result<()> {
        self.rib.validate(stack)?;
        positive("gap_nm", self.gap_nm)
    }

    /// Center of the right-hand rib; the left one sits at the mirror image.
    pub fn rib_center_nm(&self) -> f64 {
        0.5 * (self.gap_nm + self.rib.width_nm)
    }

    pub fn with_gap(mut self, gap_nm: f64) -> Self {
        self.gap_nm = gap_nm;
        self
    }
}

/// Raised-cosine S-bend bringing the guides from `start_separation_um`
/// down to `end_gap_nm` over `bend_length_um`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SBendProfile {
    pub start_separation_um: f64,
    pub end_gap_nm: f64,
    pub bend_length_um: f64,
    /// Quadrature intervals used when integrating along the bend.
    pub samples: usize,
}

impl Default for SBendProfile {
    fn default() -> Self {
        SBendProfile { start_separation_um: 2.0, end_gap_nm: 40.0, bend_length_um: 30.0, samples: 2000 }
    }
}

impl SBendProfile {
    pub fn validate(&self) -> Result<()> {
        positive("bend_length_um", self.bend_length_um)?;
        positive("end_gap_nm", self.end_gap_nm)?;
        if self.start_separation_um * 1e3 < self.end_gap_nm {
            return Err(Error::invalid(
                "start_separation_um",
                "start separation must not be smaller than the end gap",
            ));
        }
        if self.samples < 2 {
            return Err(Error::invalid("samples", "need at least 2 quadrature intervals"));
        }
        Ok(())
    }
}

/// Edge-to-edge gap in nm at distance `z_um` along the bend.
pub fn sbend_gap(z_um: f64, profile: &SBendProfile) -> Result<f64> {
    let ls = profile.bend_length_um;
    if !(0.0..=ls).contains(&z_um) {
        return Err(Error::invalid("z_um", format!("{z_um} outside [0, {ls}]")));
    }
    let y = profile.start_separation_um * 1e3;
    let g = profile.end_gap_nm;
    Ok(g + (y - g) * 0.5 * (1.0 + (PI * z_um / ls).cos()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceSpec {
    pub stack: MaterialStack,
    pub pair: CoupledPair,
    pub sbend: SBendProfile,
    pub coupling_length_um: f64,
    pub bend_transmission_te: f64,
    pub bend_transmission_tm: f64,
}

impl Default for DeviceSpec {
    fn default() -> Self {
        DeviceSpec {
            stack: MaterialStack::default(),
            pair: CoupledPair::default(),
            sbend: SBendProfile::default(),
            coupling_length_um: 13.95,
            bend_transmission_te: 0.993,
            bend_transmission_tm: 0.994,
        }
    }
}

impl DeviceSpec {
    pub fn validate(&self) -> Result<()> {
        self.stack.validate()?;
        self.pair.validate(&self.stack)?;
        self.sbend.validate()?;
        if self.coupling_length_um < 0.0 {
            return Err(Error::invalid("coupling_length_um", "must be non-negative"));
        }
        for (name, t) in [
            ("bend_transmission_te", self.bend_transmission_te),
            ("bend_transmission_tm", self.bend_transmission_tm),
        ] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::invalid(name, format!("must lie in (0, 1], got {t}")));
            }
        }
        if (self.sbend.end_gap_nm - self.pair.gap_nm).abs() > 1e-9 {
            return Err(Error::invalid("sbend.end_gap_nm", "must equal the coupling-region gap"));
        }
        Ok(())
    }

    /// Same device with the coupling-region gap (and bend end gap) replaced.
    pub fn with_gap(mut self, gap_nm: f64) -> Self {
        self.pair.gap_nm = gap_nm;
        self.sbend.end_gap_nm = gap_nm;
        self
    }

    pub fn with_coupling_length(mut self, coupling_length_um: f64) -> Self {
        self.coupling_length_um = coupling_length_um;
        self
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bottom_width_of_default_rib() {
        let rib = RibWaveguide { width_reference: WidthReference::Top, ..Default::default() };
        // 475 + 2 * 110 / tan(75°) by hand: tan 75° = 3.7320508, 220 / 3.7320508 = 58.9488
        assert_abs_diff_eq!(rib.bottom_width_nm(), 533.9488, epsilon = 1e-3);
        let poly = rib_polygon(&rib, &MaterialStack::default()).unwrap();
        assert_abs_diff_eq!(poly[1].x - poly[0].x, rib.bottom_width_nm(), epsilon = 1e-12);
        assert_abs_diff_eq!(poly[2].x - poly[3].x, 475.0, epsilon = 1e-12);
        assert_eq!(poly[0].y, 190.0);
        assert_eq!(poly[2].y, 300.0);
    }

    #[test]
    fn vertical_sidewalls_give_a_rectangle() {
        for width_reference in [WidthReference::Top, WidthReference::Bottom] {
            let rib = RibWaveguide { sidewall_angle_deg: 90.0, width_reference, ..Default::default() };
            assert_eq!(rib.bottom_width_nm(), 475.0);
            assert_eq!(rib.top_width_nm(), 475.0);
        }
    }

    #[test]
    fn base_reference_narrows_the_top() {
        let rib = RibWaveguide::default();
        assert_eq!(rib.bottom_width_nm(), 475.0);
        assert_abs_diff_eq!(rib.top_width_nm(), 475.0 - 58.9488, epsilon = 1e-3);
        let poly = rib_polygon(&rib, &MaterialStack::default()).unwrap();
        assert_abs_diff_eq!(poly[1].x - poly[0].x, 475.0, epsilon = 1e-12);
    }

    #[test]
    fn full_etch_leaves_no_slab() {
        let stack = MaterialStack::default();
        let rib = RibWaveguide { etch_depth_nm: 300.0, ..Default::default() };
        assert_eq!(rib.slab_thickness_nm(&stack), 0.0);
        assert!(rib_polygon(&rib, &stack).is_ok());
    }

    #[test]
    fn over_etch_is_rejected() {
        let rib = RibWaveguide { etch_depth_nm: 301.0, ..Default::default() };
        assert!(rib_polygon(&rib, &MaterialStack::default()).is_err());
    }

    #[test]
    fn sbend_endpoints_and_midpoint() {
        let p = SBendProfile::default();
        assert_abs_diff_eq!(sbend_gap(0.0, &p).unwrap(), 2000.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sbend_gap(30.0, &p).unwrap(), 40.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sbend_gap(15.0, &p).unwrap(), 1020.0, epsilon = 1e-9);
        assert!(sbend_gap(-0.1, &p).is_err());
        assert!(sbend_gap(30.1, &p).is_err());
    }

    #[test]
    fn sbend_is_flat_at_both_ends() {
        let p = SBendProfile::default();
        let mut prev = f64::INFINITY;
        for h in [1e-1, 1e-2, 1e-3] {
            let s0 = (sbend_gap(h, &p).unwrap() - sbend_gap(0.0, &p).unwrap()).abs() / h;
            let s1 = (sbend_gap(30.0, &p).unwrap() - sbend_gap(30.0 - h, &p).unwrap()).abs() / h;
            assert!(s0.max(s1) < prev);
            prev = s0.max(s1);
        }
        assert!(prev < 0.1);
    }

    #[test]
    fn stack_guidance_condition() {
        let bad = MaterialStack { n_core: 1.4, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(MaterialStack::default().validate().is_ok());
    }

    #[test]
    fn device_gap_consistency() {
        let d = DeviceSpec::default();
        assert!(d.validate().is_ok());
        let mut d2 = d;
        d2.pair.gap_nm = 65.0;
        assert!(d2.validate().is_err());
        assert!(d.with_gap(65.0).validate().is_ok());
    }

    proptest::proptest! {
        #[test]
        fn sbend_monotone(z1 in 0.0f64..30.0, z2 in 0.0f64..30.0) {
            let p = SBendProfile::default();
            let (a, b) = if z1 <= z2 { (z1, z2) } else { (z2, z1) };
            proptest::prop_assert!(sbend_gap(a, &p).unwrap() >= sbend_gap(b, &p).unwrap());
        }
    }
}
