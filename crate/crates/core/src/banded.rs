//! Symmetric banded precision matrices and joint Gaussian state draws.
//!
//! The block updates for the latent trend and for the log-volatilities both
//! reduce to a draw from N(Q⁻¹ℓ, Q⁻¹) with a banded precision Q. A banded
//! Cholesky factor gives the draw in O(T·p²) without a filtering loop.

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Symmetric banded matrix; only the main diagonal and `bandwidth`
/// sub-diagonals are stored, one contiguous vector per diagonal.
///
/// `bands[k][i]` holds the entry at row `i + k`, column `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBandedMatrix {
    dim: usize,
    bandwidth: usize,
    bands: Vec<Vec<f64>>,
}

impl SymBandedMatrix {
    pub fn zeros(dim: usize, bandwidth: usize) -> Self {
        let bandwidth = bandwidth.min(dim.saturating_sub(1));
        let bands = (0..=bandwidth).map(|k| vec![0.0; dim - k]).collect();
        Self {
            dim,
            bandwidth,
            bands,
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, 0);
        m.bands[0].iter_mut().for_each(|v| *v = 1.0);
        m
    }

    /// Builds a matrix from its stored diagonals (main first).
    pub fn from_bands(bands: Vec<Vec<f64>>) -> Result<Self> {
        let dim = bands.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::InvalidArgument("empty banded matrix".into()));
        }
        for (k, band) in bands.iter().enumerate() {
            if band.len() + k != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim - k.min(dim),
                    got: band.len(),
                });
            }
        }
        Ok(Self {
            dim,
            bandwidth: bands.len() - 1,
            bands,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn bands(&self) -> &[Vec<f64>] {
        &self.bands
    }

    /// Entry (i, j); zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        if k > self.bandwidth {
            0.0
        } else {
            self.bands[k][lo]
        }
    }

    /// Adds `value` to entry (i, j) and, implicitly, (j, i).
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        assert!(k <= self.bandwidth, "entry ({i}, {j}) outside the band");
        self.bands[k][lo] += value;
    }

    pub fn add_diagonal(&mut self, values: &[f64]) {
        for (d, v) in self.bands[0].iter_mut().zip(values) {
            *d += v;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    fn check_finite(&self) -> Result<()> {
        if self.bands.iter().flatten().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("banded matrix"))
        }
    }
}

/// Lower-triangular banded Cholesky factor, same storage as [`SymBandedMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct BandedCholesky {
    factor: SymBandedMatrix,
}

impl BandedCholesky {
    pub fn dim(&self) -> usize {
        self.factor.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.factor.bandwidth
    }

    /// Stored diagonals of L (main first).
    pub fn bands(&self) -> &[Vec<f64>] {
        &self.factor.bands
    }

    /// L(i, j) for i >= j.
    pub fn lower(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.factor.get(i, j)
        }
    }

    /// Solves L x = b in place.
    pub fn solve_lower_in_place(&self, x: &mut [f64]) {
        let p = self.factor.bandwidth;
        let b = &self.factor.bands;
        for i in 0..x.len() {
            let mut acc = x[i];
            for k in 1..=p.min(i) {
                acc -= b[k][i - k] * x[i - k];
            }
            x[i] = acc / b[0][i];
        }
    }

    /// Solves Lᵀ x = b in place.
    pub fn solve_upper_in_place(&self, x: &mut [f64]) {
        let p = self.factor.bandwidth;
        let b = &self.factor.bands;
        let n = x.len();
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in 1..=p.min(n - 1 - i) {
                acc -= b[k][i] * x[i + k];
            }
            x[i] = acc / b[0][i];
        }
    }

    /// Q⁻¹ b.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }
}

/// Banded Cholesky factorization Q = L Lᵀ.
pub fn cholesky_banded(q: &SymBandedMatrix) -> Result<BandedCholesky> {
    q.check_finite()?;
    let n = q.dim;
    let p = q.bandwidth;
    let mut l = q.clone();
    for j in 0..n {
        // diagonal: Q_jj - sum_k L_jk^2
        let mut d = l.bands[0][j];
        for k in 1..=p.min(j) {
            let v = l.bands[k][j - k];
            d -= v * v;
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let djj = d.sqrt();
        l.bands[0][j] = djj;
        // column j below the diagonal
        for k in 1..=p.min(n - 1 - j) {
            let i = j + k;
            let mut v = l.bands[k][j];
            // sum over m < j of L_im L_jm, with both inside the band of i
            for m in i.saturating_sub(p)..j {
                v -= l.bands[i - m][m] * l.bands[j - m][m];
            }
            l.bands[k][j] = v / djj;
        }
    }
    Ok(BandedCholesky { factor: l })
}

/// Draws from N(Q⁻¹ℓ, Q⁻¹) using a banded Cholesky factor of Q.
pub fn sample_mvn_canonical(
    q: &SymBandedMatrix,
    ell: &[f64],
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let chol = cholesky_banded(q)?;
    sample_with_factor(&chol, ell, rng)
}

/// Same draw as [`sample_mvn_canonical`] for an already factorized Q.
pub fn sample_with_factor(
    chol: &BandedCholesky,
    ell: &[f64],
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if ell.len() != chol.dim() {
        return Err(Error::DimensionMismatch {
            expected: chol.dim(),
            got: ell.len(),
        });
    }
    // L w = ℓ; Lᵀ x = w + z gives x = Q⁻¹ℓ + L⁻ᵀz
    let mut x = ell.to_vec();
    chol.solve_lower_in_place(&mut x);
    for v in x.iter_mut() {
        *v += rng.std_normal();
    }
    chol.solve_upper_in_place(&mut x);
    Ok(x)
}

/// D-th order differencing operator of a length-T series, mapping θ to
/// (θ₁, …, θ_D, Δᴰθ_{D+1}, …, Δᴰθ_T).
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceOperator {
    len: usize,
    degree: usize,
    coefs: Vec<f64>,
}

impl DifferenceOperator {
    pub fn new(len: usize, degree: usize) -> Result<Self> {
        if degree == 0 || degree > 3 {
            return Err(Error::InvalidArgument(format!(
                "differencing degree must be 1, 2 or 3 (got {degree})"
            )));
        }
        if len <= degree {
            return Err(Error::InvalidArgument(format!(
                "series length {len} must exceed the differencing degree {degree}"
            )));
        }
        // coefs[j] multiplies θ_{t-j}: (-1)^j C(D, j)
        let mut coefs = vec![1.0];
        for j in 1..=degree {
            let prev = coefs[j - 1];
            coefs.push(-prev * (degree - j + 1) as f64 / j as f64);
        }
        Ok(Self { len, degree, coefs })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of increments, T - D.
    pub fn n_increments(&self) -> usize {
        self.len - self.degree
    }

    /// Nonzero entries of row `r` as (column, coefficient) pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let width = if r < self.degree { 1 } else { self.degree + 1 };
        (0..width).map(move |j| (r - j, self.coefs[j]))
    }

    pub fn apply(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_len(theta.len())?;
        Ok((0..self.len)
            .map(|r| self.row(r).map(|(c, a)| a * theta[c]).sum())
            .collect())
    }

    /// Only the increments ω = Δᴰθ (length T - D).
    pub fn increments(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_len(theta.len())?;
        Ok((self.degree..self.len)
            .map(|r| self.row(r).map(|(c, a)| a * theta[c]).sum())
            .collect())
    }

    /// Recovers θ from (θ₁, …, θ_D, ω) by forward substitution.
    pub fn invert(&self, stacked: &[f64]) -> Result<Vec<f64>> {
        self.check_len(stacked.len())?;
        let mut theta = vec![0.0; self.len];
        for r in 0..self.len {
            if r < self.degree {
                theta[r] = stacked[r];
            } else {
                let lagged: f64 = (1..=self.degree)
                    .map(|j| self.coefs[j] * theta[r - j])
                    .sum();
                theta[r] = stacked[r] - lagged;
            }
        }
        Ok(theta)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.len]; self.len];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, a) in self.row(r) {
                row[c] = a;
            }
        }
        m
    }

    /// Banded Gram form Dᵀ diag(weights) D, bandwidth D.
    pub fn weighted_gram(&self, weights: &[f64]) -> Result<SymBandedMatrix> {
        self.check_len(weights.len())?;
        let mut g = SymBandedMatrix::zeros(self.len, self.degree);
        for (r, &w) in weights.iter().enumerate() {
            let entries: Vec<(usize, f64)> = self.row(r).collect();
            for &(ci, ai) in &entries {
                for &(cj, aj) in &entries {
                    if ci >= cj {
                        g.add(ci, cj, w * ai * aj);
                    }
                }
            }
        }
        Ok(g)
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got == self.len {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.len,
                got,
            })
        }
    }
}

/// Convenience constructor mirroring the operator's contract.
pub fn build_difference_operator(len: usize, degree: usize) -> Result<DifferenceOperator> {
    DifferenceOperator::new(len, degree)
}
