//! Small dense helpers for symmetric positive (semi-)definite systems.

/// Relative pivot threshold below which a matrix is declared singular.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Cholesky factorization with diagonal pivoting, `P A Pᵀ = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    dim: usize,
    lower: Vec<f64>,
    perm: Vec<usize>,
}

impl PivotedCholesky {
    /// Factors the symmetric `dim x dim` row-major matrix `a`. Returns `None`
    /// when a pivot falls below `PIVOT_TOLERANCE` times the largest diagonal
    /// entry of `a`.
    pub fn factor(a: &[f64], dim: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), dim * dim);
        let mut w = a.to_vec();
        let mut perm: Vec<usize> = (0..dim).collect();
        let max_diag = (0..dim).map(|i| a[i * dim + i]).fold(0.0_f64, f64::max);
        if !(max_diag > 0.0) || !max_diag.is_finite() {
            return None;
        }
        let threshold = PIVOT_TOLERANCE * max_diag;
        for k in 0..dim {
            let (piv, piv_val) = (k..dim)
                .map(|j| (j, w[j * dim + j]))
                .fold((k, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(piv_val > threshold) {
                return None;
            }
            if piv != k {
                swap_sym(&mut w, dim, k, piv);
                perm.swap(k, piv);
            }
            let d = w[k * dim + k].sqrt();
            w[k * dim + k] = d;
            for i in k + 1..dim {
                w[i * dim + k] /= d;
            }
            for i in k + 1..dim {
                let lik = w[i * dim + k];
                for j in k + 1..=i {
                    w[i * dim + j] -= lik * w[j * dim + k];
                }
                // keep the trailing block symmetric for later pivot swaps
                for j in k + 1..i {
                    w[j * dim + i] = w[i * dim + j];
                }
            }
        }
        for i in 0..dim {
            for j in i + 1..dim {
                w[i * dim + j] = 0.0;
            }
        }
        Some(PivotedCholesky { dim, lower: w, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let l = &self.lower;
        let mut u: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = u[i];
            for k in 0..i {
                s -= l[i * n + k] * u[k];
            }
            u[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = u[i];
            for k in i + 1..n {
                s -= l[k * n + i] * u[k];
            }
            u[i] = s / l[i * n + i];
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = u[k];
        }
        x
    }
}

fn swap_sym(w: &mut [f64], dim: usize, a: usize, b: usize) {
    for j in 0..dim {
        w.swap(a * dim + j, b * dim + j);
    }
    for i in 0..dim {
        w.swap(i * dim + a, i * dim + b);
    }
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn spd_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    PivotedCholesky::factor(a, b.len()).map(|f| f.solve(b))
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable logistic function.
#[inline]
pub fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        // A = M Mᵀ + I with a poorly ordered diagonal to force pivoting
        let a = [1.0, 0.5, 0.2, 0.5, 9.0, 1.0, 0.2, 1.0, 4.0];
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[i * 3 + j] * x_true[j]).sum()).collect();
        let x = spd_solve(&a, &b).unwrap();
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_rank_deficiency() {
        // rows 0 and 1 identical
        let a = [2.0, 2.0, 1.0, 2.0, 2.0, 1.0, 1.0, 1.0, 3.0];
        assert!(PivotedCholesky::factor(&a, 3).is_none());
    }

    #[test]
    fn expit_is_symmetric_and_stable() {
        assert_eq!(expit(0.0), 0.5);
        assert!((expit(3.0_f64.ln()) - 0.75).abs() < 1e-15);
        assert!((expit(2.3) + expit(-2.3) - 1.0).abs() < 1e-15);
        assert!(expit(-800.0) >= 0.0 && expit(800.0) <= 1.0);
    }
}
