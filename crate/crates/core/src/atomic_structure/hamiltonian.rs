//! Hyperfine plus Zeeman Hamiltonians and their per-`m_F` diagonalization.

use nalgebra::{DMatrix, SymmetricEigen};

use super::angular::{projections, spin_operators};
use super::data::IsotopeData;
use crate::constants::BOHR_MAGNETON_HZ_PER_T;
use crate::error::{Error, Result};

/// A product-basis state `|m_J, m_I>`, both projections doubled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisState {
    pub two_mj: i32,
    pub two_mi: i32,
}

impl BasisState {
    pub fn two_mf(&self) -> i32 {
        self.two_mj + self.two_mi
    }
}

/// Hamiltonian of one manifold in the `|m_J, m_I>` basis, in Hz.
///
/// All matrix elements are real in this basis, so Hermitian means symmetric.
#[derive(Debug, Clone)]
pub struct ManifoldHamiltonian {
    pub isotope: String,
    pub manifold: String,
    pub two_j: u32,
    pub two_i: u32,
    pub field_t: f64,
    pub basis: Vec<BasisState>,
    pub matrix: DMatrix<f64>,
    /// The same Hamiltonian at zero field; used to attach `(F, m_F)` labels.
    pub zero_field: DMatrix<f64>,
}

impl ManifoldHamiltonian {
    /// Wraps an arbitrary matrix over the product basis of spins `two_j/2`, `two_i/2`.
    pub fn from_matrix(two_j: u32, two_i: u32, matrix: DMatrix<f64>) -> Result<Self> {
        let basis = product_basis(two_j, two_i);
        if matrix.nrows() != basis.len() || matrix.ncols() != basis.len() {
            return Err(Error::Contract(format!(
                "matrix is {}x{}, basis has {} states",
                matrix.nrows(),
                matrix.ncols(),
                basis.len()
            )));
        }
        Ok(Self {
            isotope: String::new(),
            manifold: String::new(),
            two_j,
            two_i,
            field_t: 0.0,
            basis,
            zero_field: matrix.clone(),
            matrix,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

pub fn product_basis(two_j: u32, two_i: u32) -> Vec<BasisState> {
    let mut basis = Vec::new();
    for two_mj in projections(two_j) {
        for two_mi in projections(two_i) {
            basis.push(BasisState { two_mj, two_mi });
        }
    }
    basis
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

struct CoupledOperators {
    j_dot_i: DMatrix<f64>,
    jz: DMatrix<f64>,
    iz: DMatrix<f64>,
}

fn coupled_operators(two_j: u32, two_i: u32) -> CoupledOperators {
    let (jz, jp, jm) = spin_operators(two_j);
    let (iz, ip, im) = spin_operators(two_i);
    let id_j = DMatrix::identity(jz.nrows(), jz.nrows());
    let id_i = DMatrix::identity(iz.nrows(), iz.nrows());
    let jz_full = kron(&jz, &id_i);
    let iz_full = kron(&id_j, &iz);
    let j_dot_i = &jz_full * &iz_full + (kron(&jp, &im) + kron(&jm, &ip)) * 0.5;
    CoupledOperators {
        j_dot_i,
        jz: jz_full,
        iz: iz_full,
    }
}

/// Builds `H = E0 + A J·I + B_hfs Q + μ_B b (g_J J_z + g_I I_z)` for a manifold.
pub fn build_hamiltonian(iso: &IsotopeData, manifold: &str, field_t: f64) -> Result<ManifoldHamiltonian> {
    if !(field_t >= 0.0) || !field_t.is_finite() {
        return Err(Error::Domain {
            quantity: "field_t",
            value: field_t,
            reason: "field strength must be finite and non-negative".into(),
        });
    }
    let m = iso.manifold(manifold)?;
    let ops = coupled_operators(m.two_j, iso.two_i);
    let dim = ops.jz.nrows();
    let identity = DMatrix::<f64>::identity(dim, dim);

    let mut zero_field = &identity * m.energy_offset_hz + &ops.j_dot_i * m.a_hfs_hz;
    if m.two_j > 1 && iso.two_i > 1 && m.b_hfs_hz != 0.0 {
        let j = m.two_j as f64 / 2.0;
        let i = iso.nuclear_spin();
        let jd = &ops.j_dot_i;
        let q = (jd * jd) * 3.0 + jd * 1.5 - &identity * (i * (i + 1.0) * j * (j + 1.0));
        zero_field += q * (m.b_hfs_hz / (2.0 * i * (2.0 * i - 1.0) * j * (2.0 * j - 1.0)));
    }
    let zeeman = (&ops.jz * m.g_j + &ops.iz * iso.g_i) * (BOHR_MAGNETON_HZ_PER_T * field_t);
    let matrix = &zero_field + zeeman;

    Ok(ManifoldHamiltonian {
        isotope: iso.name.clone(),
        manifold: manifold.to_string(),
        two_j: m.two_j,
        two_i: iso.two_i,
        field_t,
        basis: product_basis(m.two_j, iso.two_i),
        matrix,
        zero_field,
    })
}

/// Zero-field quantum numbers a level connects to adiabatically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelLabel {
    pub two_f: i32,
    pub two_mf: i32,
}

#[derive(Debug, Clone)]
pub struct ZeemanSpectrum {
    pub isotope: String,
    pub manifold: String,
    pub two_j: u32,
    pub two_i: u32,
    pub field_t: f64,
    pub basis: Vec<BasisState>,
    /// Ascending (ties broken by `m_F`).
    pub energies_hz: Vec<f64>,
    /// Columns are eigenvectors in the product basis.
    pub eigenvectors: DMatrix<f64>,
    pub labels: Vec<LevelLabel>,
}

impl ZeemanSpectrum {
    pub fn dim(&self) -> usize {
        self.energies_hz.len()
    }
}

const HERMITIAN_TOL: f64 = 1e-12;

struct BlockSolution {
    two_mf: i32,
    energy: f64,
    vector: Vec<f64>,
    rank_in_block: usize,
}

fn solve_blocks(matrix: &DMatrix<f64>, basis: &[BasisState]) -> Vec<BlockSolution> {
    let mut mfs: Vec<i32> = basis.iter().map(BasisState::two_mf).collect();
    mfs.sort_unstable();
    mfs.dedup();
    let dim = basis.len();
    let mut out = Vec::with_capacity(dim);
    for two_mf in mfs {
        let idx: Vec<usize> = (0..dim).filter(|&k| basis[k].two_mf() == two_mf).collect();
        let n = idx.len();
        let block = DMatrix::from_fn(n, n, |r, c| matrix[(idx[r], idx[c])]);
        let eig = SymmetricEigen::new(block);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        for (rank, &col) in order.iter().enumerate() {
            let mut vector = vec![0.0; dim];
            for (r, &k) in idx.iter().enumerate() {
                vector[k] = eig.eigenvectors[(r, col)];
            }
            // deterministic sign: largest component positive
            let pivot = vector
                .iter()
                .copied()
                .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            if pivot < 0.0 {
                vector.iter_mut().for_each(|v| *v = -*v);
            }
            out.push(BlockSolution {
                two_mf,
                energy: eig.eigenvalues[col],
                vector,
                rank_in_block: rank,
            });
        }
    }
    out
}

/// `F` of a zero-field eigenvector from `<F^2> = F(F+1)`.
fn two_f_of(vector: &[f64], f_squared: &DMatrix<f64>) -> i32 {
    let v = nalgebra::DVector::from_column_slice(vector);
    let f2 = v.dot(&(f_squared * &v));
    let f = -0.5 + (0.25 + f2.max(0.0)).sqrt();
    (2.0 * f).round() as i32
}

/// Diagonalizes block by block in `m_F`, which the Hamiltonian conserves.
pub fn diagonalize(h: &ManifoldHamiltonian) -> Result<ZeemanSpectrum> {
    let dim = h.dim();
    let scale = h.matrix.amax().max(f64::MIN_POSITIVE);
    let asym = (&h.matrix - h.matrix.transpose()).amax();
    if asym > HERMITIAN_TOL * scale {
        return Err(Error::Numeric(format!(
            "Hamiltonian not Hermitian: max |H - H^T| = {asym:e} (scale {scale:e})"
        )));
    }
    for r in 0..dim {
        for c in 0..dim {
            if h.basis[r].two_mf() != h.basis[c].two_mf() && h.matrix[(r, c)].abs() > HERMITIAN_TOL * scale {
                return Err(Error::Contract(format!(
                    "element ({r},{c}) couples different m_F; block structure broken"
                )));
            }
        }
    }

    // remove the fine-structure offset before solving to keep precision
    let shift = h.matrix.trace() / dim as f64;
    let eye = DMatrix::<f64>::identity(dim, dim);
    let solved = solve_blocks(&(&h.matrix - &eye * shift), &h.basis);
    let zero = solve_blocks(&(&h.zero_field - &eye * shift), &h.basis);

    let ops = coupled_operators(h.two_j, h.two_i);
    let j = h.two_j as f64 / 2.0;
    let i = h.two_i as f64 / 2.0;
    let f_squared = DMatrix::<f64>::identity(dim, dim) * (j * (j + 1.0) + i * (i + 1.0)) + &ops.j_dot_i * 2.0;

    let mut levels: Vec<(f64, i32, Vec<f64>, LevelLabel)> = solved
        .into_iter()
        .map(|s| {
            let reference = zero
                .iter()
                .find(|z| z.two_mf == s.two_mf && z.rank_in_block == s.rank_in_block)
                .expect("zero-field block has matching rank");
            let label = LevelLabel {
                two_f: two_f_of(&reference.vector, &f_squared),
                two_mf: s.two_mf,
            };
            (s.energy + shift, s.two_mf, s.vector, label)
        })
        .collect();
    levels.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut eigenvectors = DMatrix::zeros(dim, dim);
    let mut energies_hz = Vec::with_capacity(dim);
    let mut labels = Vec::with_capacity(dim);
    for (col, (e, _, v, label)) in levels.into_iter().enumerate() {
        energies_hz.push(e);
        labels.push(label);
        for (row, x) in v.into_iter().enumerate() {
            eigenvectors[(row, col)] = x;
        }
    }
    Ok(ZeemanSpectrum {
        isotope: h.isotope.clone(),
        manifold: h.manifold.clone(),
        two_j: h.two_j,
        two_i: h.two_i,
        field_t: h.field_t,
        basis: h.basis.clone(),
        energies_hz,
        eigenvectors,
        labels,
    })
}

/// Convenience: build and diagonalize in one step.
pub fn zeeman_spectrum(iso: &IsotopeData, manifold: &str, field_t: f64) -> Result<ZeemanSpectrum> {
    diagonalize(&build_hamiltonian(iso, manifold, field_t)?)
}
