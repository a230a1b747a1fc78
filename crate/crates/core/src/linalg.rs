//! Hermitian eigensolvers and the Krylov exponential action.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::state::{inner, norm};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Eigenvalues (ascending) and matching eigenvectors (as columns) of a dense
/// Hermitian matrix.
pub fn dense_eigh(m: DMatrix<Complex64>) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = order.iter().map(|&k| eig.eigenvectors.column(k).iter().copied().collect()).collect();
    (values, vectors)
}

/// Settings for [`lanczos_lowest`].
#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub max_subspace: usize,
    pub max_restarts: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { max_subspace: 80, max_restarts: 60, tol: 1e-10, seed: 0x5eed }
    }
}

/// Lowest eigenpair of `H` restricted to the orthogonal complement of
/// `deflate` (orthonormal vectors). Explicitly restarted Lanczos with full
/// reorthogonalization. Returns `(eigenvalue, eigenvector, residual norm)`.
pub fn lanczos_lowest<F>(
    dim: usize,
    mut apply: F,
    deflate: &[Vec<Complex64>],
    opts: LanczosOptions,
) -> Result<(f64, Vec<Complex64>, f64)>
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    if deflate.len() >= dim {
        return Err(Error::Domain("deflation space covers the whole Hilbert space".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ deflate.len() as u64);
    let mut start: Vec<Complex64> =
        (0..dim).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    project_out(&mut start, deflate);
    let mut last_residual = f64::INFINITY;
    let max_m = opts.max_subspace.min(dim - deflate.len()).max(1);

    for _ in 0..opts.max_restarts {
        let n0 = norm(&start);
        if n0 == 0.0 {
            return Err(Error::Eigensolver { residuals: vec![last_residual] });
        }
        start.iter_mut().for_each(|a| *a /= n0);

        let mut basis: Vec<Vec<Complex64>> = vec![start.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut w = vec![ZERO; dim];
        let mut ritz = vec![1.0];
        for j in 0..max_m {
            apply(&basis[j], &mut w);
            project_out(&mut w, deflate);
            let a = inner(&basis[j], &w).re;
            alphas.push(a);
            // full reorthogonalization, twice for stability
            for _ in 0..2 {
                for v in &basis {
                    let c = inner(v, &w);
                    w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
                }
                project_out(&mut w, deflate);
            }
            let b = norm(&w);
            let (vals, vecs) = tridiagonal_eig(&alphas, &betas);
            let theta = vals[0];
            ritz = vecs.column(0).iter().copied().collect();
            let residual = (b * ritz[j]).abs();
            last_residual = residual;
            if residual <= opts.tol * theta.abs().max(1.0) || b < 1e-14 {
                let v = combine(&basis, &ritz);
                return Ok((theta, v, residual));
            }
            if j + 1 < max_m {
                betas.push(b);
                basis.push(w.iter().map(|x| x / b).collect());
            }
        }
        start = combine(&basis, &ritz);
        project_out(&mut start, deflate);
    }
    Err(Error::Eigensolver { residuals: vec![last_residual] })
}

fn combine(basis: &[Vec<Complex64>], coeffs: &[f64]) -> Vec<Complex64> {
    let mut out = vec![ZERO; basis[0].len()];
    for (v, &c) in basis.iter().zip(coeffs) {
        out.iter_mut().zip(v).for_each(|(o, x)| *o += x * c);
    }
    let n = norm(&out);
    out.iter_mut().for_each(|o| *o /= n);
    out
}

fn project_out(w: &mut [Complex64], deflate: &[Vec<Complex64>]) {
    for v in deflate {
        let c = inner(v, w);
        w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
    }
}

fn tridiagonal_eig(alphas: &[f64], betas: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Reusable buffers for [`KrylovPropagator`].
#[derive(Debug, Clone)]
pub struct KrylovPropagator {
    basis: Vec<Vec<Complex64>>,
    w: Vec<Complex64>,
    max_dim: usize,
    tol: f64,
}

impl KrylovPropagator {
    pub fn new(dim: usize, max_dim: usize, tol: f64) -> Self {
        let max_dim = max_dim.clamp(2, dim.max(2));
        Self { basis: vec![vec![ZERO; dim]; max_dim + 1], w: vec![ZERO; dim], max_dim, tol }
    }

    /// `psi <- exp(-i tau H) psi` by Lanczos projection. Splits `tau` when the
    /// subspace budget is exhausted. Returns the total number of matvecs.
    pub fn step<F>(&mut self, apply: &mut F, psi: &mut [Complex64], tau: f64) -> usize
    where
        F: FnMut(&[Complex64], &mut [Complex64]),
    {
        match self.try_step(apply, psi, tau) {
            Some(n) => n,
            None => {
                let a = self.step(apply, psi, 0.5 * tau);
                a + self.step(apply, psi, 0.5 * tau)
            }
        }
    }

    fn try_step<F>(&mut self, apply: &mut F, psi: &mut [Complex64], tau: f64) -> Option<usize>
    where
        F: FnMut(&[Complex64], &mut [Complex64]),
    {
        let scale = norm(psi);
        if scale == 0.0 {
            return Some(0);
        }
        let dim = psi.len();
        self.basis[0].iter_mut().zip(psi.iter()).for_each(|(b, p)| *b = p / scale);
        let mut alphas = Vec::with_capacity(self.max_dim);
        let mut betas = Vec::with_capacity(self.max_dim);
        // leading error term of the degree-(m-1) Krylov polynomial: tau^m prod(beta) / m!
        let mut err_bound = 1.0;
        let mut m = 0;
        let mut converged = false;
        while m < self.max_dim {
            let (head, tail) = self.basis.split_at_mut(m + 1);
            let v = &head[m];
            apply(v, &mut self.w);
            let a = inner(v, &self.w).re;
            self.w.iter_mut().zip(v.iter()).for_each(|(x, y)| *x -= y * a);
            if m > 0 {
                let prev = &head[m - 1];
                let bp = betas[m - 1];
                self.w.iter_mut().zip(prev.iter()).for_each(|(x, y)| *x -= y * bp);
            }
            alphas.push(a);
            m += 1;
            let b = norm(&self.w);
            err_bound *= tau.abs() * b / m as f64;
            if b < 1e-14 || err_bound < self.tol {
                converged = true;
                break;
            }
            if m == self.max_dim {
                break;
            }
            betas.push(b);
            let next = &mut tail[0];
            next.iter_mut().zip(self.w.iter()).for_each(|(n, x)| *n = x / b);
        }
        if !converged {
            return None;
        }
        betas.truncate(m.saturating_sub(1));
        let (vals, vecs) = tridiagonal_eig(&alphas, &betas);
        let mut coeffs = vec![ZERO; m];
        for k in 0..m {
            let phase = Complex64::from_polar(vecs[(0, k)], -tau * vals[k]);
            for (r, c) in coeffs.iter_mut().enumerate() {
                *c += phase * vecs[(r, k)];
            }
        }
        psi[..dim].fill(ZERO);
        for (v, c) in self.basis.iter().zip(&coeffs) {
            let c = c * scale;
            psi.iter_mut().zip(v).for_each(|(p, x)| *p += c * x);
        }
        Some(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{CompiledOperator, PauliSum};

    fn op() -> PauliSum {
        PauliSum::from_labels(&[
            (0.7, "XII"),
            (0.3, "IYI"),
            (-0.4, "ZZI"),
            (0.9, "IZZ"),
            (0.2, "XYZ"),
            (0.5, "IIX"),
        ])
        .unwrap()
    }

    #[test]
    fn krylov_matches_dense_exponential() {
        let h = op();
        let compiled = CompiledOperator::new(&h);
        let (vals, vecs) = dense_eigh(h.to_dense());
        let mut psi: Vec<Complex64> = (0..8).map(|k| Complex64::new(k as f64 + 1.0, 0.5 - k as f64)).collect();
        let n = norm(&psi);
        psi.iter_mut().for_each(|p| *p /= n);
        let orig = psi.clone();
        for tau in [0.01, 0.3, 2.0] {
            let mut got = orig.clone();
            let mut prop = KrylovPropagator::new(8, 30, 1e-14);
            prop.step(&mut |x: &[Complex64], y: &mut [Complex64]| compiled.apply_into(x, y), &mut got, tau);
            let mut want = vec![ZERO; 8];
            for (lam, v) in vals.iter().zip(&vecs) {
                let c = inner(v, &orig) * Complex64::from_polar(1.0, -tau * lam);
                want.iter_mut().zip(v).for_each(|(w, x)| *w += c * x);
            }
            let diff: f64 = got.iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            assert!(diff < 1e-11, "tau {tau}: diff {diff}");
        }
    }

    #[test]
    fn lanczos_finds_lowest_and_deflates() {
        let h = op();
        let compiled = CompiledOperator::new(&h);
        let (vals, _) = dense_eigh(h.to_dense());
        let mut apply = |x: &[Complex64], y: &mut [Complex64]| compiled.apply_into(x, y);
        let (e0, v0, _) = lanczos_lowest(8, &mut apply, &[], LanczosOptions::default()).unwrap();
        assert!((e0 - vals[0]).abs() < 1e-10);
        let (e1, _, _) = lanczos_lowest(8, &mut apply, &[v0], LanczosOptions::default()).unwrap();
        assert!((e1 - vals[1]).abs() < 1e-10);
    }
}
