//! Two-ion heralded entanglement through the on-chip beam splitter:
//! closed-form fidelity and an exhaustive two-photon Fock-space oracle.
//!
//! Two-ion basis order is `|↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩` (ion a first). Ion spin
//! `↑` pairs with a V (TM) photon and `↓` with an H (TE) photon.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coupler::TransferCoefficients;
use crate::error::{Error, Result};

pub type DensityMatrix = [[Complex64; 4]; 4];

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const H: usize = 0;
pub const V: usize = 1;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Index of `|s_a s_b⟩` in the two-ion basis.
pub fn two_ion_index(s_a: usize, s_b: usize) -> usize {
    2 * s_a + s_b
}

/// The singlet `(|↓↑⟩ − |↑↓⟩)/√2`.
pub fn singlet() -> [Complex64; 4] {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let mut s = [ZERO; 4];
    s[two_ion_index(DOWN, UP)] = Complex64::new(a, 0.0);
    s[two_ion_index(UP, DOWN)] = Complex64::new(-a, 0.0);
    s
}

/// Joint spin-polarization state of one ion and its emitted photon,
/// indexed `[spin][polarization]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonPhotonState {
    amps: [[Complex64; 2]; 2],
}

impl Default for IonPhotonState {
    /// `(|↑⟩|V⟩ + |↓⟩|H⟩)/√2`.
    fn default() -> Self {
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut amps = [[ZERO; 2]; 2];
        amps[UP][V] = a;
        amps[DOWN][H] = a;
        IonPhotonState { amps }
    }
}

impl IonPhotonState {
    pub fn new(amps: [[Complex64; 2]; 2]) -> Result<Self> {
        let norm: f64 = amps.iter().flatten().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("ion_photon_state", format!("norm² = {norm}, expected 1")));
        }
        Ok(IonPhotonState { amps })
    }

    pub fn amplitude(&self, spin: usize, pol: usize) -> Complex64 {
        self.amps[spin][pol]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionModel {
    /// Heralds only on one photon per output port with orthogonal
    /// polarizations (`c_H d_V` or `c_V d_H`).
    #[default]
    OppositePolarizationResolving,
    /// Heralds on any one-photon-per-port event, regardless of polarization.
    BucketCoincidence,
}

impl DetectionModel {
    pub fn label(self) -> &'static str {
        match self {
            DetectionModel::OppositePolarizationResolving => "opposite_polarization_resolving",
            DetectionModel::BucketCoincidence => "bucket_coincidence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityReport {
    pub fidelity: f64,
    pub error: f64,
    pub coincidence_probability: f64,
    pub heralded_state: DensityMatrix,
}

impl FidelityReport {
    fn from_state(rho: DensityMatrix, coincidence_probability: f64) -> Self {
        let fidelity = expectation(&rho, &singlet()).clamp(0.0, 1.0);
        FidelityReport { fidelity, error: 1.0 - fidelity, coincidence_probability, heralded_state: rho }
    }
}

/// Amplitude scalings applied to each ion's photon before the splitter,
/// indexed `[polarization]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputWeights {
    pub ion_a: [f64; 2],
    pub ion_b: [f64; 2],
}

impl Default for InputWeights {
    fn default() -> Self {
        InputWeights { ion_a: [1.0; 2], ion_b: [1.0; 2] }
    }
}

impl InputWeights {
    pub fn uniform(h: f64, v: f64) -> Self {
        InputWeights { ion_a: [h, v], ion_b: [h, v] }
    }

    fn validate(&self) -> Result<()> {
        for w in self.ion_a.iter().chain(&self.ion_b) {
            if !(0.0..=1.0).contains(w) {
                return Err(Error::invalid("input_weights", format!("weight {w} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

fn check_coefficients(t: &TransferCoefficients) -> Result<()> {
    for (name, v) in [("t_h", t.t_h), ("r_h", t.r_h), ("t_v", t.t_v), ("r_v", t.r_v)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(name, format!("coefficient {v} outside [0, 1]")));
        }
    }
    for (name, v) in [
        ("transmission_factor_te", t.transmission_factor_te),
        ("transmission_factor_tm", t.transmission_factor_tm),
    ] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::invalid(name, format!("factor {v} outside (0, 1]")));
        }
    }
    Ok(())
}

/// Normalized heralded two-ion state `∝ r_h r_v|↓↑⟩ − t_h t_v|↑↓⟩`.
pub fn heralded_state_closed_form(t: &TransferCoefficients) -> Result<[Complex64; 4]> {
    check_coefficients(t)?;
    let (rr, tt) = (t.r_h * t.r_v, t.t_h * t.t_v);
    let norm = (rr * rr + tt * tt).sqrt();
    if norm == 0.0 {
        return Err(Error::NoCoincidence("r_h·r_v and t_h·t_v both vanish".into()));
    }
    let mut s = [ZERO; 4];
    s[two_ion_index(DOWN, UP)] = Complex64::new(rr / norm, 0.0);
    s[two_ion_index(UP, DOWN)] = Complex64::new(-tt / norm, 0.0);
    Ok(s)
}

/// `F = ½(r_h r_v + t_h t_v)² / (r_h² r_v² + t_h² t_v²)`, with the
/// coincidence probability of lossless resolving detection.
pub fn fidelity_closed_form(t: &TransferCoefficients) -> Result<FidelityReport> {
    let psi = heralded_state_closed_form(t)?;
    let (rr, tt) = (t.r_h * t.r_v, t.t_h * t.t_v);
    let fidelity = 0.5 * (rr + tt).powi(2) / (rr * rr + tt * tt);
    Ok(FidelityReport {
        fidelity,
        error: 1.0 - fidelity,
        coincidence_probability: 0.5 * (rr * rr + tt * tt),
        heralded_state: projector(&psi),
    })
}

// output modes of the splitter
const C_H: usize = 0;
const C_V: usize = 1;
const D_H: usize = 2;
const D_V: usize = 3;

/// Creation operator of an input photon expanded over the output modes
/// `(c_H, c_V, d_H, d_V)`: port 1 `a† = t c† + r d†`, port 2 `b† = r c† − t d†`.
fn output_modes(t: &TransferCoefficients, port: usize, pol: usize) -> [f64; 4] {
    let (tc, rc) = if pol == H { (t.t_h, t.r_h) } else { (t.t_v, t.r_v) };
    let (c, d) = if port == 1 { (tc, rc) } else { (rc, -tc) };
    let mut u = [0.0; 4];
    if pol == H {
        u[C_H] = c;
        u[D_H] = d;
    } else {
        u[C_V] = c;
        u[D_V] = d;
    }
    u
}

/// Two-photon Fock basis `|1_i 1_j⟩` (i < j) and `|2_i⟩`, as sorted pairs.
fn fock_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // row-major upper triangle of a 4×4 table
    i * 4 - i * (i + 1) / 2 + j
}

const FOCK_DIM: usize = 10;

/// Heralded two-ion state by exhaustive enumeration of the two-photon
/// output Fock space.
pub fn oracle_coincidence(
    t: &TransferCoefficients,
    weights: &InputWeights,
    detection: DetectionModel,
) -> Result<FidelityReport> {
    let e = IonPhotonState::default();
    oracle_coincidence_with_states(t, &e, &e, weights, detection)
}

pub fn oracle_coincidence_with_states(
    t: &TransferCoefficients,
    ion_a: &IonPhotonState,
    ion_b: &IonPhotonState,
    weights: &InputWeights,
    detection: DetectionModel,
) -> Result<FidelityReport> {
    check_coefficients(t)?;
    weights.validate()?;
    let loss = [t.transmission_factor_te, t.transmission_factor_tm];

    // amplitude of (Fock state, two-ion state)
    let mut amp = [[ZERO; 4]; FOCK_DIM];
    for s_a in [UP, DOWN] {
        for p_a in [H, V] {
            let wa = ion_a.amplitude(s_a, p_a) * weights.ion_a[p_a] * loss[p_a];
            if wa == ZERO {
                continue;
            }
            let u = output_modes(t, 1, p_a);
            for s_b in [UP, DOWN] {
                for p_b in [H, V] {
                    let wb = ion_b.amplitude(s_b, p_b) * weights.ion_b[p_b] * loss[p_b];
                    if wb == ZERO {
                        continue;
                    }
                    let v = output_modes(t, 2, p_b);
                    let ion = two_ion_index(s_a, s_b);
                    for i in 0..4 {
                        for j in i..4 {
                            let c = if i == j {
                                std::f64::consts::SQRT_2 * u[i] * v[i]
                            } else {
                                u[i] * v[j] + u[j] * v[i]
                            };
                            amp[fock_index(i, j)][ion] += wa * wb * c;
                        }
                    }
                }
            }
        }
    }

    let heralds: &[(usize, usize)] = match detection {
        DetectionModel::OppositePolarizationResolving => &[(C_H, D_V), (C_V, D_H)],
        DetectionModel::BucketCoincidence => &[(C_H, D_V), (C_V, D_H), (C_H, D_H), (C_V, D_V)],
    };
    let mut rho = [[ZERO; 4]; 4];
    let mut prob = 0.0;
    for &(i, j) in heralds {
        let phi = &amp[fock_index(i, j)];
        prob += phi.iter().map(|a| a.norm_sqr()).sum::<f64>();
        for (k, row) in rho.iter_mut().enumerate() {
            for (l, r) in row.iter_mut().enumerate() {
                *r += phi[k] * phi[l].conj();
            }
        }
    }
    if !(prob > 0.0) {
        return Err(Error::NoCoincidence(format!("heralding probability {prob}")));
    }
    rho.iter_mut().flatten().for_each(|r| *r /= prob);
    Ok(FidelityReport::from_state(rho, prob))
}

/// Oracle fidelity with fiber coupling efficiencies as amplitude weights
/// `√η` on H (TE) and V (TM) photons of both ions.
pub fn error_with_coupling(t: &TransferCoefficients, eta_te: f64, eta_tm: f64) -> Result<FidelityReport> {
    for (name, eta) in [("eta_te", eta_te), ("eta_tm", eta_tm)] {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::invalid(name, format!("efficiency {eta} outside (0, 1]")));
        }
    }
    oracle_coincidence(
        t,
        &InputWeights::uniform(eta_te.sqrt(), eta_tm.sqrt()),
        DetectionModel::OppositePolarizationResolving,
    )
}

pub fn projector(psi: &[Complex64; 4]) -> DensityMatrix {
    let mut rho = [[ZERO; 4]; 4];
    for (k, row) in rho.iter_mut().enumerate() {
        for (l, r) in row.iter_mut().enumerate() {
            *r = psi[k] * psi[l].conj();
        }
    }
    rho
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn expectation(rho: &DensityMatrix, psi: &[Complex64; 4]) -> f64 {
    let mut acc = ZERO;
    for k in 0..4 {
        for l in 0..4 {
            acc += psi[k].conj() * rho[k][l] * psi[l];
        }
    }
    acc.re
}

pub fn trace(rho: &DensityMatrix) -> f64 {
    (0..4).map(|k| rho[k][k].re).sum()
}
