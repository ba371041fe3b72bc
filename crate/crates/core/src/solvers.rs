//! Fundamental matrices `G`, `R`, `H` for lattice models, and `G`, `Lambda`,
//! `R`, `H` for Markov-modulated Brownian motion.
//!
//! Every solver reports residual certificates alongside its result. `R` is
//! always obtained from the `G` of the time-reversed model and then checked
//! against its own left equation.

use std::collections::BTreeMap;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::model::{conjugate_transpose_by, LatticeModel, MmbmModel, Regime, RegimeTag};
use crate::taboo;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: Method,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-12,
            max_iter: 1_000_000,
            method: Method::FixedPoint,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument(
                "tolerance must be positive and max_iter at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// `sum_m A_m X^{m+1}` for blocks `[A_{-1}, A_0, ..., A_M]`.
pub fn right_polynomial(blocks: &[Mat], x: &Mat) -> Mat {
    let mut acc = blocks[blocks.len() - 1].clone();
    for b in blocks[..blocks.len() - 1].iter().rev() {
        acc = b + acc * x;
    }
    acc
}

/// `sum_m X^{m+1} A_m`.
pub fn left_polynomial(blocks: &[Mat], x: &Mat) -> Mat {
    let mut acc = blocks[blocks.len() - 1].clone();
    for b in blocks[..blocks.len() - 1].iter().rev() {
        acc = b + x * acc;
    }
    acc
}

pub fn residual_g(model: &LatticeModel, g: &Mat) -> f64 {
    linalg::norm_inf(&right_polynomial(model.blocks(), g))
}

pub fn residual_r(model: &LatticeModel, r: &Mat) -> f64 {
    linalg::norm_inf(&left_polynomial(model.blocks(), r))
}

/// Fixed point `G <- Delta^{-1}(A_{-1} + (A_0 + Delta) G + sum_{k>=1} A_k G^{k+1})`.
///
/// Started from `0` the iterates increase monotonically to the minimal
/// non-negative solution. Started from `I` (only used when the solution is
/// known to be stochastic) every iterate stays stochastic. Returns the iterate
/// whose residual was certified below `tol`, the residual, and the iteration
/// count.
fn fixed_point_g(blocks: &[Mat], start_stochastic: bool, opts: &SolveOptions) -> Result<(Mat, f64, usize)> {
    let n = blocks[0].nrows();
    let delta: DVector<f64> = -blocks[1].diagonal();
    let inv_delta = delta.map(|d| 1.0 / d);
    let mut shifted = blocks.to_vec();
    for i in 0..n {
        shifted[1][(i, i)] += delta[i];
    }
    let mut g = if start_stochastic {
        Mat::identity(n, n)
    } else {
        Mat::zeros(n, n)
    };
    let mut best = (g.clone(), f64::INFINITY);
    // once certified, keep polishing while the residual still improves
    let mut certified_at: Option<usize> = None;
    let mut stalled = 0;
    for it in 0..opts.max_iter {
        // shifted polynomial evaluated at g equals Delta * next
        let image = right_polynomial(&shifted, &g);
        let next = Mat::from_fn(n, n, |i, j| image[(i, j)] * inv_delta[i]);
        let residual = linalg::norm_inf(&Mat::from_fn(n, n, |i, j| delta[i] * (next[(i, j)] - g[(i, j)])));
        if !residual.is_finite() {
            break;
        }
        if residual < best.1 {
            best = (g.clone(), residual);
            stalled = 0;
        } else {
            stalled += 1;
        }
        if residual < opts.tol && certified_at.is_none() {
            certified_at = Some(it);
        }
        if let Some(start) = certified_at {
            if best.1 < opts.tol * 1e-4 || stalled >= 20 || it >= 2 * start + 50 {
                return Ok((best.0, best.1, it));
            }
        }
        g = next;
    }
    if best.1 < opts.tol {
        return Ok((best.0, best.1, opts.max_iter));
    }
    Err(Error::MaxIterExceeded {
        iterations: opts.max_iter,
        residual: best.1,
        best: best.0,
    })
}

/// Minimal non-negative solution of `sum_m A_m G^{m+1} = 0`.
pub fn solve_g_lattice(model: &LatticeModel, opts: &SolveOptions) -> Result<Mat> {
    let regime = model.drift_and_pi()?;
    solve_g_lattice_in(model, &regime, opts).map(|(g, _)| g)
}

fn solve_g_lattice_in(model: &LatticeModel, regime: &Regime, opts: &SolveOptions) -> Result<(Mat, f64)> {
    opts.validate()?;
    let (g, residual, _) = fixed_point_g(model.blocks(), regime.is_c1(), opts)?;
    Ok((g, residual))
}

/// `R = Delta_pi^{-1} G_hat^T Delta_pi` from the `G` of the reversed model,
/// certified against `A_{-1} + R A_0 + sum_k R^{k+1} A_k = 0`.
pub fn solve_r_lattice(model: &LatticeModel, g_reversed: &Mat, opts: &SolveOptions) -> Result<Mat> {
    let pi = linalg::stationary(&model.conservative_generator())?;
    let r = conjugate_transpose_by(g_reversed, &pi);
    let residual = residual_r(model, &r);
    let limit = 10.0 * opts.tol;
    if residual >= limit {
        return Err(Error::ResidualTooLarge {
            what: "left equation for R".into(),
            residual,
            limit,
        });
    }
    Ok(r)
}

/// `H = (I - U)^{-1} Delta_A^{-1}` with `U = sum_i A_i^up G^i`.
pub fn solve_h_lattice(model: &LatticeModel, regime: &Regime, g: &Mat, overshoot: &[Mat]) -> Result<Mat> {
    if !regime.is_transient() {
        return Err(Error::NullRecurrent);
    }
    let n = model.n_phases();
    let mut u = Mat::zeros(n, n);
    let mut gp = Mat::identity(n, n);
    for a_up in overshoot {
        u += a_up * &gp;
        gp = &gp * g;
    }
    if linalg::spectral_radius(&u) >= 1.0 {
        return Err(Error::SingularSolve("return matrix U has spectral radius >= 1".into()));
    }
    let inv_delta = Mat::from_diagonal(&model.event_rates().map(|d| 1.0 / d));
    linalg::solve_left(&(Mat::identity(n, n) - u), &inv_delta, "I - U")
        .map_err(|_| Error::SingularSolve("I - U".into()))
}

/// Fundamental matrices of a lattice model together with the overshoot
/// matrices `A_i^up` that `H` and the occupation recursions are built from.
#[derive(Debug, Clone)]
pub struct LatticeFundamentals {
    pub g: Mat,
    pub r: Mat,
    pub r_tilde: Mat,
    pub h: Option<Mat>,
    pub overshoot: Vec<Mat>,
    pub regime: Regime,
    pub residuals: BTreeMap<String, f64>,
}

impl LatticeFundamentals {
    pub fn solve(model: &LatticeModel, opts: &SolveOptions) -> Result<Self> {
        let regime = model.drift_and_pi()?;
        let (g, res_g) = solve_g_lattice_in(model, &regime, opts)?;
        let reversed = model.reverse()?;
        let regime_rev = reversed.drift_and_pi()?;
        let (g_rev, _) = solve_g_lattice_in(&reversed, &regime_rev, opts)?;
        let r = solve_r_lattice(model, &g_rev, opts)?;
        let r_tilde = taboo::r_tilde(model, &r);
        let overshoot = taboo::overshoot_matrices(model, &r_tilde);
        let h = match solve_h_lattice(model, &regime, &g, &overshoot) {
            Ok(h) => Some(h),
            Err(Error::NullRecurrent) => None,
            Err(e) => return Err(e),
        };
        let mut residuals = BTreeMap::new();
        residuals.insert("G_equation".to_string(), res_g);
        residuals.insert("R_equation".to_string(), residual_r(model, &r));
        residuals.insert("R_tilde_equation".to_string(), taboo::residual_r_tilde(model, &r_tilde));
        if let Some(h) = &h {
            residuals.insert("GH_minus_HR".to_string(), linalg::max_abs(&(&g * h - h * &r)));
        }
        Ok(LatticeFundamentals {
            g,
            r,
            r_tilde,
            h,
            overshoot,
            regime,
            residuals,
        })
    }

    pub fn h(&self) -> Result<&Mat> {
        self.h.as_ref().ok_or(Error::NullRecurrent)
    }

    /// `H(k)` for `k = 0..=k_max` through the recursion obtained by
    /// conditioning on the first visit to a non-negative level.
    pub fn occupation_levels(&self, k_max: usize) -> Result<Vec<Mat>> {
        let h = self.h()?;
        let n = h.nrows();
        let m_max = self.overshoot.len() - 1;
        let id = Mat::identity(n, n);
        let lu = linalg::Lu::new(&(&id - &self.overshoot[0]), "I - A0_up")?;
        let mut g_powers = vec![id.clone()];
        for i in 1..=m_max {
            g_powers.push(&g_powers[i - 1] * &self.g);
        }
        let mut out = vec![h.clone()];
        for m in 1..=k_max {
            let mut acc = Mat::zeros(n, n);
            for nu in 1..=m.min(m_max) {
                acc += &self.overshoot[nu] * &out[m - nu];
            }
            for nu in (m + 1)..=m_max {
                acc += &self.overshoot[nu] * &g_powers[nu - m] * h;
            }
            out.push(lu.solve(&acc));
        }
        Ok(out)
    }

    /// Expected total time at level `k`, `H(k)`.
    pub fn occupation_at_level(&self, k: i64) -> Result<Mat> {
        let h = self.h()?;
        if k <= 0 {
            Ok(linalg::mat_pow(&self.g, k.unsigned_abs() as usize) * h)
        } else {
            Ok(self.occupation_levels(k as usize)?.pop().unwrap())
        }
    }

    /// `P[J_{tau_k}]`: `G^{|k|}` below zero, `H(k) H^{-1}` above.
    pub fn hitting_matrix(&self, k: i64) -> Result<Mat> {
        if k <= 0 {
            return Ok(linalg::mat_pow(&self.g, k.unsigned_abs() as usize));
        }
        let h = self.h()?;
        let hk = self.occupation_at_level(k)?;
        linalg::solve_right(&hk, h, "H")
    }

    /// `P[J_{tau_k}]` for `k = 0..=k_max`.
    pub fn hitting_matrices_up(&self, k_max: usize) -> Result<Vec<Mat>> {
        let h = self.h()?;
        let lu = linalg::Lu::new(&h.transpose(), "H")?;
        Ok(self
            .occupation_levels(k_max)?
            .iter()
            .map(|hk| lu.solve(&hk.transpose()).transpose())
            .collect())
    }
}

// ---------------------------------------------------------------------------
// Markov-modulated Brownian motion
// ---------------------------------------------------------------------------

/// Maps the quadratic `1/2 S X^2 + D X + Q_d = 0` onto a skip-free lattice
/// equation by `alpha = gamma (z - 1) / (z + 1)`. Brownian rows are multiplied
/// by `(z + 1)^2`, zero-variance rows by `(z + 1)`. The resulting blocks have
/// the sign pattern of a level-independent QBD, and its minimal solution `Z`
/// is related to `G` by `G = gamma (Z - I)(Z + I)^{-1}`.
fn cayley_blocks(model: &MmbmModel) -> (f64, Vec<Mat>) {
    let n = model.n_phases();
    let qd = model.defective_generator();
    let a = model.drift();
    let s = model.sigma2();
    let mut gamma: f64 = 0.0;
    for i in 0..n {
        let c = qd[(i, i)].abs();
        let need = if s[i] > 0.0 {
            (a[i].abs() + (a[i] * a[i] + 2.0 * s[i] * c).sqrt()) / s[i]
        } else {
            c / a[i].abs()
        };
        gamma = gamma.max(need);
    }
    if gamma <= 0.0 {
        gamma = 1.0;
    }
    let mut b0 = Mat::zeros(n, n);
    let mut b1 = Mat::zeros(n, n);
    let mut b2 = Mat::zeros(n, n);
    for i in 0..n {
        if s[i] > 0.0 {
            for j in 0..n {
                b0[(i, j)] = qd[(i, j)];
                b1[(i, j)] = 2.0 * qd[(i, j)];
                b2[(i, j)] = qd[(i, j)];
            }
            let quad = 0.5 * s[i] * gamma * gamma;
            b0[(i, i)] += quad - a[i] * gamma;
            b1[(i, i)] -= 2.0 * quad;
            b2[(i, i)] += quad + a[i] * gamma;
        } else {
            for j in 0..n {
                b0[(i, j)] = qd[(i, j)];
                b1[(i, j)] = qd[(i, j)];
            }
            b0[(i, i)] -= a[i] * gamma;
            b1[(i, i)] += a[i] * gamma;
        }
        // clamp rounding noise on structurally non-negative diagonals
        if b0[(i, i)] < 0.0 {
            b0[(i, i)] = 0.0;
        }
        if b2[(i, i)] < 0.0 {
            b2[(i, i)] = 0.0;
        }
    }
    (gamma, vec![b0, b1, b2])
}

pub fn residual_g_mmbm(model: &MmbmModel, g: &Mat) -> f64 {
    let s = Mat::from_diagonal(&(model.sigma2() * 0.5));
    let d = Mat::from_diagonal(model.drift());
    linalg::norm_inf(&(&s * g * g + &d * g + model.defective_generator()))
}

pub fn residual_r_mmbm(model: &MmbmModel, r: &Mat) -> f64 {
    let s = Mat::from_diagonal(&(model.sigma2() * 0.5));
    let d = Mat::from_diagonal(model.drift());
    linalg::norm_inf(&(r * r * &s + r * &d + model.defective_generator()))
}

/// Generator `G` of the downward first-passage phase process,
/// `P[J_{tau_{-x}}] = e^{G x}`.
pub fn solve_g_mmbm(model: &MmbmModel, opts: &SolveOptions) -> Result<Mat> {
    opts.validate()?;
    let regime = model.drift_and_pi()?;
    let n = model.n_phases();
    let (gamma, blocks) = cayley_blocks(model);
    let inner = SolveOptions {
        tol: opts.tol * 1e-2,
        ..*opts
    };
    let z = match fixed_point_g(&blocks, regime.is_c1(), &inner) {
        Ok((z, _, _)) => z,
        // the transformed blocks carry larger entries; accept the best iterate
        // if the residual on the original equation is already below tol
        Err(Error::MaxIterExceeded { best, .. }) => best,
        Err(e) => return Err(e),
    };
    let id = Mat::identity(n, n);
    let g = linalg::solve_right(&((&z - &id) * gamma), &(&z + &id), "Z + I")?;
    let residual = residual_g_mmbm(model, &g);
    let scale = linalg::norm_inf(&model.defective_generator()).max(1.0);
    if residual >= opts.tol * scale {
        return Err(Error::MaxIterExceeded {
            iterations: opts.max_iter,
            residual,
            best: g,
        });
    }
    Ok(g)
}

/// Generator `Lambda` of the upward first-passage phase process,
/// `P[J_{tau_x}] = e^{Lambda x}`, i.e. `G` of the level-negated model.
pub fn solve_lambda_mmbm(model: &MmbmModel, opts: &SolveOptions) -> Result<Mat> {
    if let Some(i) = (0..model.n_phases()).find(|&i| model.sigma2()[i] == 0.0) {
        return Err(Error::SubordinatorPhase {
            phase: i,
            drift: -model.drift()[i],
        });
    }
    solve_g_mmbm(&model.negated()?, opts)
}

/// Log-spaced scan grid of admissible transform arguments.
pub fn alpha_grid() -> Vec<f64> {
    let mut v = Vec::with_capacity(64);
    for k in 0..32 {
        let x = 10f64.powf(-3.0 + 6.0 * k as f64 / 31.0);
        v.push(x);
        v.push(-x);
    }
    v
}

/// `H` from `[(alpha I - G)^{-1} - (alpha I + Lambda)^{-1}] H = -F(alpha)^{-1}`,
/// evaluated at the two best-conditioned admissible grid points. Returns `H`
/// and the discrepancy between the two evaluations.
pub fn solve_h_mmbm(model: &MmbmModel, regime: &Regime, g: &Mat, lambda: &Mat) -> Result<(Mat, f64)> {
    if !regime.is_transient() {
        return Err(Error::NullRecurrent);
    }
    let n = model.n_phases();
    let id = Mat::identity(n, n);
    let mut excluded: Vec<Complex64> = linalg::eigenvalues(g);
    excluded.extend(linalg::eigenvalues(lambda).iter().map(|z| -z));
    let mut candidates: Vec<(f64, Mat)> = Vec::new();
    for alpha in alpha_grid() {
        if excluded.iter().any(|z| (z - alpha).norm() < 1e-6) {
            continue;
        }
        let attempt = (|| -> Result<(f64, Mat)> {
            let left = linalg::inverse(&(&id * alpha - g), "alpha I - G")?;
            let right = linalg::inverse(&(&id * alpha + lambda), "alpha I + Lambda")?;
            let f = model.f_real(alpha);
            let f_inv = linalg::inverse(&f, "F(alpha)")?;
            let m = left - right;
            let m_inv = linalg::inverse(&m, "resolvent difference")?;
            let cond = linalg::norm_inf(&m) * linalg::norm_inf(&m_inv) * linalg::norm_inf(&f) * linalg::norm_inf(&f_inv);
            Ok((cond, -(m_inv * f_inv)))
        })();
        if let Ok((cond, h)) = attempt {
            if cond.is_finite() && h.iter().all(|x| x.is_finite()) {
                candidates.push((cond, h));
            }
        }
    }
    if candidates.len() < 2 {
        return Err(Error::NoValidAlpha);
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let h = candidates[0].1.clone();
    let spread = linalg::max_abs(&(&candidates[0].1 - &candidates[1].1)) / linalg::max_abs(&h).max(1.0);
    Ok((h, spread))
}

/// Fundamental matrices of an MMBM. `Lambda` and `H` require every phase to
/// have positive variance.
#[derive(Debug, Clone)]
pub struct MmbmFundamentals {
    pub g: Mat,
    pub lambda: Option<Mat>,
    pub r: Mat,
    pub h: Option<Mat>,
    pub regime: Regime,
    pub residuals: BTreeMap<String, f64>,
}

impl MmbmFundamentals {
    pub fn solve(model: &MmbmModel, opts: &SolveOptions) -> Result<Self> {
        let regime = model.drift_and_pi()?;
        let g = solve_g_mmbm(model, opts)?;
        let reversed = model.reverse()?;
        let g_rev = solve_g_mmbm(&reversed, opts)?;
        let r = conjugate_transpose_by(&g_rev, &regime.pi);
        let mut residuals = BTreeMap::new();
        residuals.insert("G_equation".to_string(), residual_g_mmbm(model, &g));
        residuals.insert("R_equation".to_string(), residual_r_mmbm(model, &r));
        let (lambda, h) = if model.all_brownian() {
            let lambda = solve_lambda_mmbm(model, opts)?;
            let h = match solve_h_mmbm(model, &regime, &g, &lambda) {
                Ok((h, spread)) => {
                    residuals.insert("alpha_independence".to_string(), spread);
                    residuals.insert("GH_minus_HR".to_string(), linalg::max_abs(&(&g * &h - &h * &r)));
                    Some(h)
                }
                Err(Error::NullRecurrent) => None,
                Err(e) => return Err(e),
            };
            (Some(lambda), h)
        } else {
            (None, None)
        };
        Ok(MmbmFundamentals {
            g,
            lambda,
            r,
            h,
            regime,
            residuals,
        })
    }

    pub fn regime_tag(&self) -> RegimeTag {
        self.regime.tag
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::birth_death;

    #[test]
    fn birth_death_g() {
        let opts = SolveOptions::default();
        let g = solve_g_lattice(&birth_death(1.0, 2.0).unwrap(), &opts).unwrap();
        assert!((g[(0, 0)] - 1.0).abs() < 1e-12);
        let g = solve_g_lattice(&birth_death(2.0, 1.0).unwrap(), &opts).unwrap();
        assert!((g[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn birth_death_fundamentals() {
        let f = LatticeFundamentals::solve(&birth_death(1.0, 2.0).unwrap(), &SolveOptions::default()).unwrap();
        assert!((f.r[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((f.h.as_ref().unwrap()[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((f.occupation_at_level(-3).unwrap()[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((f.hitting_matrix(5).unwrap()[(0, 0)] - 2f64.powi(-5)).abs() < 1e-14);
        assert!((f.hitting_matrix(-5).unwrap()[(0, 0)] - 1.0).abs() < 1e-12);
        assert_eq!(f.hitting_matrix(0).unwrap()[(0, 0)], 1.0);
        let f = LatticeFundamentals::solve(&birth_death(2.0, 1.0).unwrap(), &SolveOptions::default()).unwrap();
        assert!((f.r[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((f.h.as_ref().unwrap()[(0, 0)] - 1.0).abs() < 1e-12, "{:?} {:?} {:?}", f.h, f.overshoot, f.g);
        assert!((f.occupation_at_level(-3).unwrap()[(0, 0)] - 0.125).abs() < 1e-12);
    }

    #[test]
    fn null_recurrent_has_no_h() {
        let m = birth_death(1.0, 1.0).unwrap();
        let f = LatticeFundamentals::solve(&m, &SolveOptions::default()).unwrap();
        assert!((f.g[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(matches!(f.h(), Err(Error::NullRecurrent)));
        assert!(matches!(f.hitting_matrix(2), Err(Error::NullRecurrent)));
        assert!(f.hitting_matrix(-2).is_ok());
    }

    #[test]
    fn mmbm_scalar_g_and_lambda() {
        let opts = SolveOptions::default();
        let m = MmbmModel::new(vec![-1.0], vec![2.0], Mat::zeros(1, 1), Some(vec![1.0])).unwrap();
        let g = solve_g_mmbm(&m, &opts).unwrap();
        assert!((g[(0, 0)] - (1.0 - 5f64.sqrt()) / 2.0).abs() < 1e-12);
        let m0 = MmbmModel::new(vec![-1.0], vec![2.0], Mat::zeros(1, 1), None).unwrap();
        assert!(solve_g_mmbm(&m0, &opts).unwrap()[(0, 0)].abs() < 1e-12);
        assert!((solve_lambda_mmbm(&m0, &opts).unwrap()[(0, 0)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn mmbm_fluid_phase_rows_are_explicit() {
        // fluid row i satisfies a_i G_i. + (Q - Delta_q)_i. = 0
        let m = MmbmModel::new(
            vec![-1.0, 0.5],
            vec![0.0, 1.0],
            Mat::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -2.0]),
            None,
        )
        .unwrap();
        let g = solve_g_mmbm(&m, &SolveOptions::default()).unwrap();
        assert!((g[(0, 0)] + 1.0).abs() < 1e-12 && (g[(0, 1)] - 1.0).abs() < 1e-12);
        assert!(residual_g_mmbm(&m, &g) < 1e-11);
        assert!(matches!(solve_lambda_mmbm(&m, &SolveOptions::default()), Err(Error::SubordinatorPhase { .. })));
    }

    #[test]
    fn mmbm_scalar_h() {
        let m = MmbmModel::new(vec![-1.0], vec![2.0], Mat::zeros(1, 1), Some(vec![1.0])).unwrap();
        let f = MmbmFundamentals::solve(&m, &SolveOptions::default()).unwrap();
        let h = f.h.unwrap();
        assert!((h[(0, 0)] - 1.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!(f.residuals["alpha_independence"] < 1e-9);
    }
}
