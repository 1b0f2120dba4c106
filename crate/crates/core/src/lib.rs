//! Design toolkit for a polarization-independent directional-coupler
//! Bell-state analyzer in thin-film lithium niobate.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: rib cross-sections, the coupled pair, the S-bend gap
//!   profile and rasterization into anisotropic permittivity maps.
//! - [`modesolver`]: full-vectorial finite-difference eigenmodes of a
//!   cross-section, TE/TM and supermode classification, coupling strengths.
//! - [`coupler`]: coupled-mode power splitting, S-bend accumulated coupling
//!   and device transfer coefficients.
//! - [`bellstate`]: heralded two-ion state, fidelity and error, with an
//!   exhaustive two-photon Fock-space oracle.
//! - [`fiber`]: lensed-fiber Gaussian overlap and numerical-aperture sweeps.
//! - [`sweep`]: design-space maps, contouring and 1-D minimization.
//! - [`config`], [`output`], [`reproduce`]: configuration files, CSV/SVG
//!   emission and figure regeneration used by the `bsa` binary.

pub mod bellstate;
pub mod config;
pub mod coupler;
pub mod error;
pub mod exec;
pub mod fiber;
pub mod geometry;
pub mod modesolver;
pub mod output;
pub mod reproduce;
pub mod sweep;

pub use error::{Error, Result};

/// Polarization of a guided mode (on chip) or photon (H ↔ TE, V ↔ TM).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Polarization {
    #[serde(rename = "TE")]
    Te,
    #[serde(rename = "TM")]
    Tm,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::Te, Polarization::Tm];

    pub fn label(self) -> &'static str {
        match self {
            Polarization::Te => "TE",
            Polarization::Tm => "TM",
        }
    }
}

impl std::fmt::Display for Polarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}
