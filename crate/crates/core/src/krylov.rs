//! Restarted GMRES for matrix-free complex linear operators.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{czero, norm2, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    /// Target relative residual `‖Ax − b‖ / ‖b‖`.
    pub tol: f64,
    /// Krylov dimension before restarting.
    pub restart: usize,
    /// Total operator applications allowed.
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { tol: 1e-6, restart: 30, max_iter: 500 }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome<T> {
    pub solution: Vec<Complex<T>>,
    /// Operator applications spent inside the Arnoldi process.
    pub iterations: usize,
    /// Relative residual recomputed from the returned solution.
    pub residual: f64,
    /// Relative residual estimate after every iteration.
    pub history: Vec<f64>,
}

/// Inner product `aᴴb`, summed in fixed chunks so the result does not depend
/// on how rayon schedules the work.
fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    const CHUNK: usize = 1 << 14;
    let partial: Vec<Complex<T>> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).fold(czero(), |acc, (p, q)| acc + p.conj() * q))
        .collect();
    partial.into_iter().fold(czero(), |p, q| p + q)
}

fn axpy<T: Real>(alpha: Complex<T>, x: &[Complex<T>], y: &mut [Complex<T>]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi = *yi + alpha * xi);
}

fn residual<T: Real, F>(apply: &mut F, b: &[Complex<T>], x: &[Complex<T>]) -> Result<Vec<Complex<T>>>
where
    F: FnMut(&[Complex<T>]) -> Result<Vec<Complex<T>>>,
{
    let ax = apply(x)?;
    if ax.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: b.len(), found: ax.len() });
    }
    Ok(b.par_iter().zip(ax.par_iter()).map(|(bi, ai)| bi - ai).collect())
}

/// Solves `A x = b` where `apply` computes `A v`.
///
/// Starts from `x0` when given, else from zero. Fails with
/// [`Error::NotConverged`] if `max_iter` applications do not reach `tol`.
pub fn gmres<T: Real, F>(
    mut apply: F,
    b: &[Complex<T>],
    x0: Option<&[Complex<T>]>,
    opts: GmresOptions,
) -> Result<GmresOutcome<T>>
where
    F: FnMut(&[Complex<T>]) -> Result<Vec<Complex<T>>>,
{
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("GMRES tolerance must be positive, got {}", opts.tol)));
    }
    if opts.restart == 0 {
        return Err(Error::InvalidParameter("GMRES restart length must be positive".into()));
    }
    let n = b.len();
    let mut x = match x0 {
        Some(v) if v.len() != n => return Err(Error::DimensionMismatch { expected: n, found: v.len() }),
        Some(v) => v.to_vec(),
        None => vec![czero(); n],
    };
    let bnorm = norm2(b).as_f64();
    if bnorm == 0.0 {
        return Ok(GmresOutcome { solution: vec![czero(); n], iterations: 0, residual: 0.0, history: vec![0.0] });
    }

    let mut history = Vec::new();
    let mut iterations = 0;
    let m = opts.restart;
    loop {
        let r = residual(&mut apply, b, &x)?;
        let beta = norm2(&r);
        let rel = beta.as_f64() / bnorm;
        if history.is_empty() {
            history.push(rel);
        }
        if rel <= opts.tol {
            return Ok(GmresOutcome { solution: x, iterations, residual: rel, history });
        }
        if iterations >= opts.max_iter {
            return Err(Error::NotConverged { iterations, residual: rel, history });
        }

        let inv = T::one() / beta;
        let mut basis: Vec<Vec<Complex<T>>> = vec![r.iter().map(|v| v * inv).collect()];
        // Hessenberg columns after Givens rotation, i.e. upper triangular.
        let mut h: Vec<Vec<Complex<T>>> = Vec::with_capacity(m);
        let mut cs: Vec<T> = Vec::with_capacity(m);
        let mut sn: Vec<Complex<T>> = Vec::with_capacity(m);
        let mut g = vec![Complex::new(beta, T::zero())];

        for j in 0..m {
            if iterations >= opts.max_iter {
                break;
            }
            let mut w = apply(&basis[j])?;
            iterations += 1;
            let mut col = Vec::with_capacity(j + 2);
            for v in &basis {
                let hij = dot(v, &w);
                axpy(-hij, v, &mut w);
                col.push(hij);
            }
            let hnext = norm2(&w);
            col.push(Complex::new(hnext, T::zero()));

            for i in 0..j {
                let t = col[i] * cs[i] + sn[i] * col[i + 1];
                col[i + 1] = col[i + 1] * cs[i] - sn[i].conj() * col[i];
                col[i] = t;
            }
            let (a, bb) = (col[j], col[j + 1]);
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if denom == T::zero() {
                (T::one(), czero())
            } else if a.norm() == T::zero() {
                (T::zero(), bb.conj() / bb.norm())
            } else {
                let phase = a / a.norm();
                (a.norm() / denom, phase * bb.conj() / denom)
            };
            col[j] = Complex::new(c, T::zero()) * a + s * bb;
            col[j + 1] = czero();
            let gj = g[j];
            g.push(-s.conj() * gj);
            g[j] = gj * c;
            cs.push(c);
            sn.push(s);
            col.truncate(j + 1);
            h.push(col);

            let est = g[j + 1].norm().as_f64() / bnorm;
            history.push(est);
            if est <= opts.tol || hnext == T::zero() {
                break;
            }
            let inv = T::one() / hnext;
            basis.push(w.iter().map(|v| v * inv).collect());
        }

        // Back substitution on the rotated Hessenberg system.
        let k = h.len();
        let mut y = vec![czero::<T>(); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for (jj, yj) in y.iter().enumerate().skip(i + 1) {
                s = s - h[jj][i] * yj;
            }
            y[i] = s / h[i][i];
        }
        for (v, yi) in basis.iter().zip(&y) {
            axpy(*yi, v, &mut x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense(n: usize, seed: u64, shift: f64) -> Vec<Vec<Complex<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let d = if i == j { shift } else { 0.0 };
                        let z = Complex::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
                        z / (n as f64).sqrt() + d
                    })
                    .collect()
            })
            .collect()
    }

    fn matvec(a: &[Vec<Complex<f64>>], x: &[Complex<f64>]) -> Vec<Complex<f64>> {
        a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    #[test]
    fn solves_well_conditioned_system() {
        let a = dense(60, 1, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<Complex<f64>> = (0..60).map(|_| Complex::new(rng.random(), rng.random())).collect();
        let b = matvec(&a, &xs);
        let out = gmres(|v| Ok(matvec(&a, v)), &b, None, GmresOptions { tol: 1e-12, ..Default::default() }).unwrap();
        assert!(out.residual <= 1e-12);
        let err: f64 = out.solution.iter().zip(&xs).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        assert!(out.history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn restarts_reach_tolerance() {
        let a = dense(80, 3, 1.0);
        let b: Vec<Complex<f64>> = (0..80).map(|i| Complex::new((i as f64).sin(), 1.0)).collect();
        let opts = GmresOptions { tol: 1e-9, restart: 5, max_iter: 2000 };
        let out = gmres(|v| Ok(matvec(&a, v)), &b, None, opts).unwrap();
        assert!(out.residual <= 1e-9);
        assert!(out.iterations > 5);
    }

    #[test]
    fn identity_converges_in_one_step() {
        let b: Vec<Complex<f64>> = (0..10).map(|i| Complex::new(i as f64, -1.0)).collect();
        let out = gmres(|v| Ok(v.to_vec()), &b, None, GmresOptions::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.residual < 1e-15);
    }

    #[test]
    fn zero_rhs_and_bad_options() {
        let z = vec![Complex::new(0.0, 0.0); 4];
        let out = gmres(|v| Ok(v.to_vec()), &z, None, GmresOptions::default()).unwrap();
        assert_eq!(out.iterations, 0);
        let bad = GmresOptions { tol: 0.0, ..Default::default() };
        assert!(gmres(|v| Ok(v.to_vec()), &z, None, bad).is_err());
    }

    #[test]
    fn reports_non_convergence_with_history() {
        let a = dense(50, 4, 0.0);
        let b = vec![Complex::new(1.0, 0.0); 50];
        let opts = GmresOptions { tol: 1e-14, restart: 3, max_iter: 6 };
        match gmres(|v| Ok(matvec(&a, v)), &b, None, opts) {
            Err(Error::NotConverged { iterations, history, .. }) => {
                assert_eq!(iterations, 6);
                assert!(history.len() >= 6);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
