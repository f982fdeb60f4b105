use std::f64::consts::FRAC_1_SQRT_2;
use std::io::{Read, Write};

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Basis order used by every 4×4 two-photon matrix.
pub const BASIS: [&str; 4] = ["HH", "HV", "VH", "VV"];

const PSD_TOLERANCE: f64 = 1e-12;

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Polarization density matrix of a photon pair over `{HH, HV, VH, VV}`.
/// The trace deficit is the probability that at least one photon was lost.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonPolState {
    rho: Matrix4<Complex64>,
}

impl TwoPhotonPolState {
    /// Checks Hermiticity, positivity and trace before accepting `rho`.
    pub fn new(rho: Matrix4<Complex64>) -> Result<Self> {
        let state = Self { rho };
        state.validate()?;
        Ok(state)
    }

    pub(crate) fn new_unchecked(rho: Matrix4<Complex64>) -> Self {
        Self { rho }
    }

    pub fn pure(amplitudes: Vector4<Complex64>) -> Result<Self> {
        Self::new(amplitudes * amplitudes.adjoint())
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn eigenvalues(&self) -> Vector4<f64> {
        let hermitian = (self.rho + self.rho.adjoint()) * c(0.5, 0.0);
        SymmetricEigen::new(hermitian).eigenvalues
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("density matrix has non-finite entries".into()));
        }
        let scale = self.rho.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let asym = (self.rho - self.rho.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if asym > 1e-10 * scale {
            return Err(Error::Contract(format!(
                "density matrix not Hermitian (deviation {asym:e})"
            )));
        }
        let trace = self.trace();
        if !(0.0..=1.0 + PSD_TOLERANCE).contains(&trace) {
            return Err(Error::Contract(format!("density matrix trace {trace} outside [0, 1]")));
        }
        let lowest = self.eigenvalues().min();
        if lowest < -PSD_TOLERANCE {
            return Err(Error::Contract(format!("density matrix has eigenvalue {lowest:e} < 0")));
        }
        Ok(())
    }

    /// Same state scaled to unit trace.
    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if !(t > 0.0) {
            return Err(Error::Domain {
                quantity: "density matrix trace",
                value: t,
                reason: "cannot normalize a zero-trace state".into(),
            });
        }
        Ok(Self::new_unchecked(self.rho / c(t, 0.0)))
    }

    /// Convex mixture `(1-w)·self + w·other`.
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Domain {
                quantity: "mixing weight",
                value: w,
                reason: "must lie in [0, 1]".into(),
            });
        }
        Self::new(self.rho * c(1.0 - w, 0.0) + other.rho * c(w, 0.0))
    }

    pub fn maximally_mixed() -> Self {
        Self::new_unchecked(Matrix4::identity() * c(0.25, 0.0))
    }

    pub fn product(first: Basis2, second: Basis2) -> Self {
        let mut v = Vector4::zeros();
        v[2 * first as usize + second as usize] = c(1.0, 0.0);
        Self::new_unchecked(v * v.adjoint())
    }

    /// Matrix in the circular basis `{LL, LR, RL, RR}` with `L = (H + iV)/√2`.
    pub fn to_circular(&self) -> Matrix4<Complex64> {
        let u = circular_change().kronecker(&circular_change());
        u * self.rho * u.adjoint()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        let file = DensityMatrixFile {
            basis: BASIS.iter().map(|s| s.to_string()).collect(),
            rows: (0..4)
                .map(|i| (0..4).map(|j| [self.rho[(i, j)].re, self.rho[(i, j)].im]).collect())
                .collect(),
        };
        serde_json::to_writer_pretty(out, &file).map_err(|e| Error::Numeric(format!("writing density matrix: {e}")))
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        let file: DensityMatrixFile =
            serde_json::from_reader(input).map_err(|e| Error::config("density_matrix", e.to_string()))?;
        if file.basis != BASIS {
            return Err(Error::config("density_matrix.basis", format!("expected {BASIS:?}")));
        }
        if file.rows.len() != 4 || file.rows.iter().any(|r| r.len() != 4) {
            return Err(Error::config(
                "density_matrix.rows",
                "expected 4 rows of 4 [re, im] pairs",
            ));
        }
        Self::new(Matrix4::from_fn(|i, j| c(file.rows[i][j][0], file.rows[i][j][1])))
    }
}

/// Single-photon linear polarization labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis2 {
    H = 0,
    V = 1,
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixFile {
    basis: Vec<String>,
    rows: Vec<Vec<[f64; 2]>>,
}

/// Rows are `⟨L|`, `⟨R|` in H/V components.
fn circular_change() -> nalgebra::Matrix2<Complex64> {
    let s = FRAC_1_SQRT_2;
    nalgebra::Matrix2::new(c(s, 0.0), c(0.0, -s), c(s, 0.0), c(0.0, s))
}

/// Symmetrized one-H-one-V pair, `(|HV⟩ + |VH⟩)/√2`.
pub fn make_noon_from_pair() -> TwoPhotonPolState {
    let s = c(FRAC_1_SQRT_2, 0.0);
    let zero = c(0.0, 0.0);
    TwoPhotonPolState::new_unchecked({
        let v = Vector4::new(zero, s, s, zero);
        v * v.adjoint()
    })
}

/// `(|HH⟩ + e^{iχ}|VV⟩)/√2` with `χ = coherence_phase_rad`.
pub fn ideal_noon(coherence_phase_rad: f64) -> TwoPhotonPolState {
    TwoPhotonPolState::new_unchecked({
        let v = noon_vector(coherence_phase_rad);
        v * v.adjoint()
    })
}

fn noon_vector(chi: f64) -> Vector4<Complex64> {
    let s = FRAC_1_SQRT_2;
    Vector4::new(c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), Complex64::from_polar(s, chi))
}

/// Coherence phase of the surrogate tomography state.
pub const SURROGATE_COHERENCE_PHASE: f64 = 0.20;

/// Stand-in for the measured H/V NooN state (the full measured matrix is not
/// published): `0.98·|N(χ)⟩⟨N(χ)| + 0.01·(|HH⟩⟨HH| + |VV⟩⟨VV|)`, fidelity 0.99.
pub fn surrogate_noon_state() -> TwoPhotonPolState {
    let noon = ideal_noon(SURROGATE_COHERENCE_PHASE);
    let mut rho = noon.rho * c(0.98, 0.0);
    rho[(0, 0)] += c(0.01, 0.0);
    rho[(3, 3)] += c(0.01, 0.0);
    TwoPhotonPolState::new_unchecked(rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoonFidelity {
    pub fidelity: f64,
    /// Maximizing coherence phase `2φ`, in `(-π, π]`.
    pub coherence_phase_rad: f64,
}

/// Overlap with `(|HH⟩ + e^{2iφ}|VV⟩)/√2` at the given `φ`, after renormalizing.
pub fn noon_fidelity_at(rho: &TwoPhotonPolState, half_phase_rad: f64) -> Result<f64> {
    let r = rho.normalized()?;
    let v = noon_vector(2.0 * half_phase_rad);
    Ok((v.adjoint() * r.rho * v)[(0, 0)].re)
}

/// Fidelity maximized over `φ`; the optimum is `2φ = -arg ρ[HH,VV]`.
pub fn noon_fidelity(rho: &TwoPhotonPolState) -> Result<NoonFidelity> {
    let r = rho.normalized()?;
    let coherence = r.rho[(0, 3)];
    Ok(NoonFidelity {
        fidelity: 0.5 * (r.rho[(0, 0)].re + r.rho[(3, 3)].re) + coherence.norm(),
        coherence_phase_rad: -coherence.arg(),
    })
}
