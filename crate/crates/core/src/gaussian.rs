//! Gaussian-state engine for multimode field sidebands.
//!
//! A state of N modes is its quadrature mean vector and covariance matrix in
//! the ordering (X₁, Y₁, X₂, Y₂, ..., X_N, Y_N), vacuum-normalized so the
//! vacuum covariance is the identity. Every operation here is either a
//! symplectic map (beamsplitter, phase rotation), a Gaussian channel (loss),
//! or a displacement, so states stay Gaussian and exact throughout; Monte
//! Carlo enters only when measurement outcomes are drawn.
//!
//! Sign conventions, fixed once for the whole crate:
//! * `phase_rotate(θ)` maps X → X cosθ + Y sinθ and Y → −X sinθ + Y cosθ,
//!   so θ = π/2 sends X → Y, Y → −X. Measuring X after `phase_rotate(θ)`
//!   is the same as measuring the rotated quadrature X_θ = X cosθ + Y sinθ.
//! * The EPR pair built by [`make_epr`] is correlated in X (Cov(X_A,X_B) > 0)
//!   and anticorrelated in Y, so X_A − X_B and Y_A + Y_B are the two
//!   simultaneously quiet combinations.
//!
//! Sampling uses a counter-based stream cipher generator seeded from a u64,
//! so batches are reproducible bit-for-bit across runs and platforms.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Index of the X quadrature of `mode` in the (X₁,Y₁,X₂,Y₂,...) ordering.
pub fn x_index(mode: usize) -> usize {
    2 * mode
}

/// Index of the Y quadrature of `mode`.
pub fn y_index(mode: usize) -> usize {
    2 * mode + 1
}

/// Multimode Gaussian state: quadrature means plus symmetric covariance.
#[derive(Debug, Clone)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Standard symplectic form J for n modes in the interleaved ordering:
/// block-diagonal copies of [[0, 1], [−1, 0]].
fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let dim = 2 * n_modes;
    let mut j = DMatrix::zeros(dim, dim);
    for m in 0..n_modes {
        j[(x_index(m), y_index(m))] = 1.0;
        j[(y_index(m), x_index(m))] = -1.0;
    }
    j
}

/// 2×2 quadrature rotation with the crate-wide sign convention
/// (θ = π/2: X → Y, Y → −X).
fn rotation(theta: f64) -> nalgebra::Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    nalgebra::Matrix2::new(c, s, -s, c)
}

/// Vacuum state of `n_modes` modes: zero mean, identity covariance.
pub fn make_vacuum(n_modes: usize) -> Result<GaussianState> {
    if n_modes == 0 {
        return Err(Error::InvalidArgument(
            "make_vacuum needs at least one mode".into(),
        ));
    }
    Ok(GaussianState {
        mean: DVector::zeros(2 * n_modes),
        cov: DMatrix::identity(2 * n_modes, 2 * n_modes),
    })
}

/// Two-mode EPR-correlated state parameterized by its squeezed and
/// antisqueezed spectral variances.
///
/// Every single-beam quadrature has variance (s₊ + s₋)/2; the X quadratures
/// are correlated and the Y quadratures anticorrelated with magnitude
/// (s₊ − s₋)/2, which puts Var(X_A − X_B) = Var(Y_A + Y_B) = 2·s₋ and
/// Var(X_A + X_B) = Var(Y_A − Y_B) = 2·s₊. The symplectic eigenvalues are
/// both √(s₋·s₊), so s₋·s₊ ≥ 1 is required for a physical state and
/// equality holds exactly for a pure (lossless) pair.
pub fn make_epr(s_minus: f64, s_plus: f64) -> Result<GaussianState> {
    if !(s_minus > 0.0 && s_minus <= 1.0 && s_plus >= 1.0 && s_plus.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "make_epr wants 0 < s_minus <= 1 <= s_plus, got ({s_minus}, {s_plus})"
        )));
    }
    if s_minus * s_plus < 1.0 - 1e-12 {
        return Err(Error::Unphysical(format!(
            "s_minus*s_plus = {} < 1 violates the uncertainty bound",
            s_minus * s_plus
        )));
    }
    let a = 0.5 * (s_plus + s_minus);
    let c = 0.5 * (s_plus - s_minus);
    let mut cov = DMatrix::identity(4, 4) * a;
    cov[(x_index(0), x_index(1))] = c;
    cov[(x_index(1), x_index(0))] = c;
    cov[(y_index(0), y_index(1))] = -c;
    cov[(y_index(1), y_index(0))] = -c;
    Ok(GaussianState {
        mean: DVector::zeros(4),
        cov,
    })
}

impl GaussianState {
    /// Build a state from explicit mean and covariance, verifying shape,
    /// symmetry, and physicality.
    pub fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || dim % 2 != 0 || cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::InvalidArgument(format!(
                "mean length {} and cov {}x{} do not describe whole modes",
                dim,
                cov.nrows(),
                cov.ncols()
            )));
        }
        let state = GaussianState { mean, cov };
        state.check_physical()?;
        Ok(state)
    }

    pub fn n_modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Symplectic eigenvalues of the covariance: the positive imaginary
    /// parts of eig(J·cov). A physical state has all of them ≥ 1.
    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        let m = symplectic_form(self.n_modes()) * &self.cov;
        let mut mags: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.im.abs()).collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
        // eigenvalues come in ±iν pairs; keep one of each
        mags.into_iter().step_by(2).collect()
    }

    /// Uncertainty-principle and shape check: symmetric covariance, positive
    /// definite, and every symplectic eigenvalue ≥ 1 − 1e-9 (the slack
    /// absorbs floating-point drift over composed channels).
    pub fn check_physical(&self) -> Result<()> {
        let scale = self.cov.amax().max(1.0);
        for i in 0..self.cov.nrows() {
            for j in (i + 1)..self.cov.ncols() {
                if (self.cov[(i, j)] - self.cov[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::Unphysical(format!(
                        "covariance asymmetric at ({i},{j})"
                    )));
                }
            }
        }
        let min_nu = self
            .symplectic_eigenvalues()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if !(min_nu >= 1.0 - 1e-9) {
            return Err(Error::Unphysical(format!(
                "minimum symplectic eigenvalue {min_nu} < 1"
            )));
        }
        // ν ≥ 1 already forces positive definiteness for a symmetric cov,
        // but a cheap factorization catches NaN/Inf entries too.
        if nalgebra::Cholesky::new(self.cov.clone()).is_none() {
            return Err(Error::Unphysical(
                "covariance is not positive definite".into(),
            ));
        }
        Ok(())
    }

    /// Add a displacement to the means; the covariance is untouched.
    pub fn displace(&self, d: &DVector<f64>) -> Result<Self> {
        if d.len() != self.mean.len() {
            return Err(Error::InvalidArgument(format!(
                "displacement length {} != 2*n_modes = {}",
                d.len(),
                self.mean.len()
            )));
        }
        Ok(GaussianState {
            mean: &self.mean + d,
            cov: self.cov.clone(),
        })
    }

    /// Mix modes `i` and `j` on a passive beamsplitter with power
    /// transmissivity τ and phase `phi` imprinted on the cross coupling.
    /// Mode `i` keeps amplitude √τ of itself; τ = 0 swaps the modes up to
    /// phase. The map is orthogonal and symplectic, so mean energy and
    /// symplectic eigenvalues are conserved.
    pub fn beamsplitter(&self, i: usize, j: usize, tau: f64, phi: f64) -> Result<Self> {
        let n = self.n_modes();
        if i >= n || j >= n || i == j {
            return Err(Error::InvalidArgument(format!(
                "beamsplitter modes ({i},{j}) invalid for {n}-mode state"
            )));
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidArgument(format!(
                "transmissivity {tau} outside [0,1]"
            )));
        }
        let t = tau.sqrt();
        let r = (1.0 - tau).sqrt();
        let rot = rotation(phi);
        let mut s = DMatrix::identity(2 * n, 2 * n);
        for (a, b) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
            let eye = if a == b { 1.0 } else { 0.0 };
            s[(x_index(i) + a, x_index(i) + b)] = t * eye;
            s[(x_index(j) + a, x_index(j) + b)] = t * eye;
            s[(x_index(i) + a, x_index(j) + b)] = r * rot[(a, b)];
            s[(x_index(j) + a, x_index(i) + b)] = -r * rot[(b, a)];
        }
        Ok(GaussianState {
            mean: &s * &self.mean,
            cov: &s * &self.cov * s.transpose(),
        })
    }

    /// Pure loss on one mode with intensity transmission ξ ∈ (0,1]: means
    /// scale by √ξ, the mode's variances relax toward vacuum as
    /// ξ·V + (1 − ξ), and cross covariances scale by √ξ.
    pub fn loss_channel(&self, mode: usize, xi: f64) -> Result<Self> {
        let n = self.n_modes();
        if mode >= n {
            return Err(Error::InvalidArgument(format!(
                "mode {mode} out of range for {n}-mode state"
            )));
        }
        if !(xi > 0.0 && xi <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "loss transmission {xi} outside (0,1]; replace the mode with vacuum instead"
            )));
        }
        let root = xi.sqrt();
        let mut mean = self.mean.clone();
        let mut cov = self.cov.clone();
        for q in [x_index(mode), y_index(mode)] {
            mean[q] *= root;
            for k in 0..cov.ncols() {
                cov[(q, k)] *= root;
                cov[(k, q)] *= root;
            }
        }
        // the diagonal block got ξ·V from the two row/col scalings; add the
        // vacuum admixture
        for a in [x_index(mode), y_index(mode)] {
            cov[(a, a)] += 1.0 - xi;
        }
        Ok(GaussianState { mean, cov })
    }

    /// Rotate one mode's quadratures by θ (see module docs for the sign).
    pub fn phase_rotate(&self, mode: usize, theta: f64) -> Result<Self> {
        let n = self.n_modes();
        if mode >= n {
            return Err(Error::InvalidArgument(format!(
                "mode {mode} out of range for {n}-mode state"
            )));
        }
        let rot = rotation(theta);
        let mut s = DMatrix::identity(2 * n, 2 * n);
        for a in 0..2 {
            for b in 0..2 {
                s[(x_index(mode) + a, x_index(mode) + b)] = rot[(a, b)];
            }
        }
        Ok(GaussianState {
            mean: &s * &self.mean,
            cov: &s * &self.cov * s.transpose(),
        })
    }

    /// Tensor product: `self`'s modes first, then `other`'s.
    pub fn tensor(&self, other: &GaussianState) -> Self {
        let (da, db) = (self.mean.len(), other.mean.len());
        let mut mean = DVector::zeros(da + db);
        mean.rows_mut(0, da).copy_from(&self.mean);
        mean.rows_mut(da, db).copy_from(&other.mean);
        let mut cov = DMatrix::zeros(da + db, da + db);
        cov.view_mut((0, 0), (da, da)).copy_from(&self.cov);
        cov.view_mut((da, da), (db, db)).copy_from(&other.cov);
        GaussianState { mean, cov }
    }

    /// Reduced state of the listed modes (partial trace over the rest).
    /// For Gaussian states this is just the sub-blocks of mean and
    /// covariance; correlations with discarded modes are dropped.
    pub fn marginal(&self, modes: &[usize]) -> Result<GaussianState> {
        let n = self.n_modes();
        if modes.is_empty() {
            return Err(Error::InvalidArgument("marginal of no modes".into()));
        }
        for &m in modes {
            if m >= n {
                return Err(Error::InvalidArgument(format!(
                    "mode {m} out of range for {n}-mode state"
                )));
            }
        }
        let idx: Vec<usize> = modes
            .iter()
            .flat_map(|&m| [x_index(m), y_index(m)])
            .collect();
        let k = idx.len();
        let mean = DVector::from_fn(k, |r, _| self.mean[idx[r]]);
        let cov = DMatrix::from_fn(k, k, |r, c| self.cov[(idx[r], idx[c])]);
        Ok(GaussianState { mean, cov })
    }

    /// Analytic heterodyne covariance of one mode: the 2×2 quadrature block
    /// with one unit of vacuum added to each record, Var(record) = Var + 1.
    pub fn heterodyne_cov(&self, mode: usize) -> Result<DMatrix<f64>> {
        let n = self.n_modes();
        if mode >= n {
            return Err(Error::InvalidArgument(format!(
                "mode {mode} out of range for {n}-mode state"
            )));
        }
        let mut block = self.cov.view((x_index(mode), x_index(mode)), (2, 2)).into_owned();
        block[(0, 0)] += 1.0;
        block[(1, 1)] += 1.0;
        Ok(block)
    }
}

/// Measurement outcomes: one row per repetition, one column per recorded
/// quadrature, plus the angles and seed that produced them.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub outcomes: DMatrix<f64>,
    pub phases: Vec<f64>,
    pub seed: u64,
}

impl SampleBatch {
    pub fn n_samples(&self) -> usize {
        self.outcomes.nrows()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.outcomes.column(j).iter().copied().collect()
    }

    pub fn col_mean(&self, j: usize) -> f64 {
        self.outcomes.column(j).mean()
    }

    /// Unbiased sample variance of column `j`.
    pub fn col_var(&self, j: usize) -> f64 {
        let col = self.outcomes.column(j);
        let m = col.mean();
        col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (col.len() as f64 - 1.0)
    }
}

/// Lower-triangular-ish factor F with F·Fᵀ = m for a symmetric PSD matrix.
/// Cholesky when it works; eigenvalue square root with tiny negatives
/// clamped when the matrix is numerically singular (heavily squeezed states).
fn psd_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = nalgebra::Cholesky::new(m.clone()) {
        return Ok(chol.l());
    }
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < -1e-9 * scale {
            return Err(Error::Unphysical(format!(
                "covariance has negative eigenvalue {v}"
            )));
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// Draw `n_samples` joint outcomes of one rotated quadrature per mode:
/// column m records X_θ = X cosθ + Y sinθ of mode m at θ = `phases[m]`.
/// Outcomes follow the exact multivariate normal of the selected
/// quadratures; fixed seeds give bit-identical batches.
pub fn sample_quadratures(
    state: &GaussianState,
    phases: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<SampleBatch> {
    let n = state.n_modes();
    if phases.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} phases for {n}-mode state",
            phases.len()
        )));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be positive".into()));
    }
    let mut rotated = state.clone();
    for (m, &theta) in phases.iter().enumerate() {
        if theta != 0.0 {
            rotated = rotated.phase_rotate(m, theta)?;
        }
    }
    let idx: Vec<usize> = (0..n).map(x_index).collect();
    let sub_mean = DVector::from_fn(n, |r, _| rotated.mean[idx[r]]);
    let sub_cov = DMatrix::from_fn(n, n, |r, c| rotated.cov[(idx[r], idx[c])]);
    Ok(SampleBatch {
        outcomes: draw_normal(&sub_mean, &sub_cov, n_samples, seed)?,
        phases: phases.to_vec(),
        seed,
    })
}

/// Simultaneous X and Y records of one mode, each carrying one added unit
/// of vacuum noise: Var(record) = Var(quadrature) + 1, means unchanged.
/// Columns are (X record, Y record).
pub fn heterodyne_sample(
    state: &GaussianState,
    mode: usize,
    n_samples: usize,
    seed: u64,
) -> Result<SampleBatch> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be positive".into()));
    }
    let cov = state.heterodyne_cov(mode)?;
    let mean = DVector::from_column_slice(&[
        state.mean[x_index(mode)],
        state.mean[y_index(mode)],
    ]);
    Ok(SampleBatch {
        outcomes: draw_normal(&mean, &cov, n_samples, seed)?,
        phases: vec![0.0, std::f64::consts::FRAC_PI_2],
        seed,
    })
}

/// Draw rows from the plain multivariate normal N(mean, cov). Crate
/// helpers use this for classical records (measurement outcomes) whose
/// covariance need not satisfy any uncertainty bound.
pub(crate) fn draw_normal(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    n_samples: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let k = mean.len();
    let factor = psd_factor(cov)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(n_samples, k);
    let mut z = DVector::zeros(k);
    for row in 0..n_samples {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let x = mean + &factor * &z;
        for col in 0..k {
            out[(row, col)] = x[col];
        }
    }
    Ok(out)
}
