//! Small dense linear-algebra kernels shared by every solver: pivot-checked LU,
//! a fixed-order Padé matrix exponential, spectra and a few norms.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

/// Relative pivot tolerance for every LU factorisation in the crate.
pub const PIVOT_TOL: f64 = 1e-12;

/// Row-sum (infinity) norm.
pub fn norm_inf<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.clone().modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    m.iter().map(|x| x.clone().modulus()).fold(0.0, f64::max)
}

/// LU factorisation with partial pivoting. Pivots smaller than
/// `PIVOT_TOL * ||A||_inf` are rejected.
pub struct Lu<T: ComplexField<RealField = f64>> {
    lu: DMatrix<T>,
    perm: Vec<usize>,
}

impl<T: ComplexField<RealField = f64>> Lu<T> {
    pub fn new(a: &DMatrix<T>, context: &str) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::InvalidArgument(format!("{context}: matrix is not square")));
        }
        let scale = norm_inf(a);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        if n > 0 && !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::SingularPivot {
                context: context.to_string(),
            });
        }
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].clone().modulus();
            for i in (k + 1)..n {
                let v = lu[(i, k)].clone().modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= PIVOT_TOL * scale {
                return Err(Error::SingularPivot {
                    context: context.to_string(),
                });
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let pivot = lu[(k, k)].clone();
            for i in (k + 1)..n {
                let f = lu[(i, k)].clone() / pivot.clone();
                lu[(i, k)] = f.clone();
                for j in (k + 1)..n {
                    let t = lu[(k, j)].clone() * f.clone();
                    lu[(i, j)] -= t;
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    /// Solves `A X = B`.
    pub fn solve(&self, b: &DMatrix<T>) -> DMatrix<T> {
        let n = self.lu.nrows();
        let mut x = DMatrix::<T>::zeros(n, b.ncols());
        for (i, &p) in self.perm.iter().enumerate() {
            x.set_row(i, &b.row(p));
        }
        for c in 0..b.ncols() {
            for i in 0..n {
                let mut s = x[(i, c)].clone();
                for k in 0..i {
                    s -= self.lu[(i, k)].clone() * x[(k, c)].clone();
                }
                x[(i, c)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, c)].clone();
                for k in (i + 1)..n {
                    s -= self.lu[(i, k)].clone() * x[(k, c)].clone();
                }
                x[(i, c)] = s / self.lu[(i, i)].clone();
            }
        }
        x
    }

    pub fn inverse(&self) -> DMatrix<T> {
        let n = self.lu.nrows();
        self.solve(&DMatrix::identity(n, n))
    }
}

/// `A^{-1} B`.
pub fn solve_left<T: ComplexField<RealField = f64>>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    context: &str,
) -> Result<DMatrix<T>> {
    Ok(Lu::new(a, context)?.solve(b))
}

/// `B A^{-1}`.
pub fn solve_right<T: ComplexField<RealField = f64>>(
    b: &DMatrix<T>,
    a: &DMatrix<T>,
    context: &str,
) -> Result<DMatrix<T>> {
    let at = a.transpose();
    let bt = b.transpose();
    Ok(Lu::new(&at, context)?.solve(&bt).transpose())
}

pub fn inverse<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, context: &str) -> Result<DMatrix<T>> {
    Ok(Lu::new(a, context)?.inverse())
}

pub fn is_invertible(a: &Mat) -> bool {
    Lu::new(a, "probe").is_ok()
}

pub fn mat_pow(a: &Mat, k: usize) -> Mat {
    let n = a.nrows();
    let mut result = Mat::identity(n, n);
    let mut base = a.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

pub fn to_complex(a: &Mat) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

pub fn diag(v: &DVector<f64>) -> Mat {
    Mat::from_diagonal(v)
}

/// Eigenvalues of a real square matrix via the real Schur form.
pub fn eigenvalues(a: &Mat) -> Vec<Complex64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    if a.nrows() == 1 {
        return vec![Complex64::new(a[(0, 0)], 0.0)];
    }
    match a.clone().try_schur(1e-15, 100_000) {
        Some(s) => s.complex_eigenvalues().iter().copied().collect(),
        None => a
            .clone()
            .complex_eigenvalues()
            .iter()
            .copied()
            .collect(),
    }
}

pub fn spectral_radius(a: &Mat) -> f64 {
    eigenvalues(a).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn spectral_abscissa(a: &Mat) -> f64 {
    eigenvalues(a)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

// Padé [13/13] numerator coefficients.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn norm_one(a: &Mat) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring around a fixed degree-13
/// diagonal Padé approximant.
pub fn expm(a: &Mat) -> Mat {
    let n = a.nrows();
    let id = Mat::identity(n, n);
    if n == 0 {
        return id;
    }
    let norm = norm_one(a);
    if norm == 0.0 {
        return id;
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a / 2f64.powi(s);
    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = Lu::new(&q, "expm denominator")
        .map(|lu| lu.solve(&p))
        .unwrap_or_else(|_| p.clone());
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Stationary row vector of an irreducible conservative generator.
pub fn stationary(q: &Mat) -> Result<DVector<f64>> {
    let n = q.nrows();
    // Solve pi Q = 0, pi 1 = 1 by replacing the last column of Q with ones.
    let mut m = q.transpose();
    for j in 0..n {
        m[(n - 1, j)] = 1.0;
    }
    let mut rhs = Mat::zeros(n, 1);
    rhs[(n - 1, 0)] = 1.0;
    let pi = Lu::new(&m, "stationary distribution")
        .map_err(|_| Error::SingularSolve("stationary distribution".into()))?
        .solve(&rhs);
    Ok(DVector::from_iterator(n, pi.iter().copied()))
}

/// Strong connectivity of a directed graph given by adjacency lists.
pub fn strongly_connected(adj: &[Vec<usize>]) -> bool {
    let n = adj.len();
    if n <= 1 {
        return true;
    }
    let reach = |forward: bool| -> bool {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut rev: Vec<Vec<usize>> = Vec::new();
        if !forward {
            rev = vec![Vec::new(); n];
            for (u, vs) in adj.iter().enumerate() {
                for &v in vs {
                    rev[v].push(u);
                }
            }
        }
        while let Some(u) = stack.pop() {
            let next = if forward { &adj[u] } else { &rev[u] };
            for &v in next {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}
