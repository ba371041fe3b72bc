//! Overshoot matrices and taboo occupation tables for lattice models.
//!
//! Index conventions: `phi[m]` is `Phi(m)` for `m = 0..=K`; `xi[m]` and the
//! theta tables are indexed from 1 and hold a zero matrix at index 0.

use crate::error::{Error, Result};
use crate::linalg::{self, Lu, Mat};
use crate::model::LatticeModel;
use crate::solvers::{left_polynomial, LatticeFundamentals};

/// `R_tilde = Delta_A^{-1} R Delta_A`, the jump-chain version of `R`.
pub fn r_tilde(model: &LatticeModel, r: &Mat) -> Mat {
    let d = model.event_rates();
    Mat::from_fn(r.nrows(), r.ncols(), |i, j| r[(i, j)] * d[j] / d[i])
}

/// Jump-chain blocks `A~_m = Delta^{-1} A_m + [m = 0] I`.
pub fn jump_chain_blocks(model: &LatticeModel) -> Vec<Mat> {
    let d = model.event_rates();
    let n = model.n_phases();
    model
        .blocks()
        .iter()
        .enumerate()
        .map(|(idx, a)| {
            let mut t = Mat::from_fn(n, n, |i, j| a[(i, j)] / d[i]);
            if idx == 1 {
                t += Mat::identity(n, n);
            }
            t
        })
        .collect()
}

pub fn residual_r_tilde(model: &LatticeModel, rt: &Mat) -> f64 {
    let blocks = jump_chain_blocks(model);
    linalg::norm_inf(&(left_polynomial(&blocks, rt) - rt))
}

/// `A_i^up`, `i = 0..=M`: probability that the first non-negative level
/// visited after leaving 0 is `i`, with phase. Backward recursion
/// `A_i^up = A~_i + R~ A_{i+1}^up` from `A_M^up = A~_M`.
pub fn overshoot_matrices(model: &LatticeModel, r_tilde: &Mat) -> Vec<Mat> {
    let blocks = jump_chain_blocks(model);
    let m = model.max_jump();
    let mut out = vec![Mat::zeros(0, 0); m + 1];
    out[m] = blocks[m + 1].clone();
    for i in (0..m).rev() {
        out[i] = &blocks[i + 1] + r_tilde * &out[i + 1];
    }
    out
}

/// Geometric extrapolation of the remainder of a series whose last terms have
/// the given norms. Returns infinity when no decay is visible.
pub fn geometric_tail(norms: &[f64]) -> f64 {
    let k = norms.len();
    if k < 2 {
        return f64::INFINITY;
    }
    let last = norms[k - 1];
    if last == 0.0 {
        return 0.0;
    }
    let j = (k - 1).min(10);
    let first = norms[k - 1 - j];
    if first <= 0.0 {
        return f64::INFINITY;
    }
    let ratio = (last / first).powf(1.0 / j as f64);
    if ratio >= 1.0 || !ratio.is_finite() {
        f64::INFINITY
    } else {
        last * ratio / (1.0 - ratio)
    }
}

#[derive(Debug, Clone)]
pub struct TabooTables {
    pub horizon: usize,
    pub overshoot: Vec<Mat>,
    pub r_tilde: Mat,
    pub phi: Vec<Mat>,
    pub xi: Vec<Mat>,
    /// `Theta(k) = H - G^k P[J_{tau_k}] H`, present when transient.
    pub theta_h: Option<Vec<Mat>>,
    /// `Theta(k) = G^k Xi(k) R^{-k}`, present when `R` is nonsingular.
    pub theta_xi: Option<Vec<Mat>>,
    /// Estimated norm of `sum_{m > K} Phi(m)`.
    pub phi_tail: f64,
}

impl TabooTables {
    pub fn build(model: &LatticeModel, fund: &LatticeFundamentals, horizon: usize) -> Result<Self> {
        let n = model.n_phases();
        let id = Mat::identity(n, n);
        let overshoot = fund.overshoot.clone();
        let m_max = overshoot.len() - 1;
        let lu = Lu::new(&(&id - &overshoot[0]), "I - A0_up")?;
        let inv_delta = Mat::from_diagonal(&model.event_rates().map(|d| 1.0 / d));

        let mut phi = vec![lu.solve(&inv_delta)];
        for k in 1..=horizon {
            let mut acc = Mat::zeros(n, n);
            for nu in 1..=k.min(m_max) {
                acc += &overshoot[nu] * &phi[k - nu];
            }
            phi.push(lu.solve(&acc));
        }

        let mut r_pow = vec![id.clone()];
        let mut g_pow = vec![id.clone()];
        for k in 1..=horizon {
            r_pow.push(&r_pow[k - 1] * &fund.r);
            g_pow.push(&g_pow[k - 1] * &fund.g);
        }
        let mut xi = vec![Mat::zeros(n, n)];
        for m in 1..=horizon {
            let next = &xi[m - 1] + &phi[m - 1] * &r_pow[m - 1];
            xi.push(next);
        }

        let theta_h = match &fund.h {
            Some(h) => {
                let hits = fund.hitting_matrices_up(horizon)?;
                Some(
                    (0..=horizon)
                        .map(|k| if k == 0 { Mat::zeros(n, n) } else { h - &g_pow[k] * &hits[k] * h })
                        .collect(),
                )
            }
            None => None,
        };
        let theta_xi = match Lu::new(&fund.r, "R") {
            Ok(r_lu) => {
                let r_inv = r_lu.inverse();
                let mut r_inv_pow = id.clone();
                let mut out = vec![Mat::zeros(n, n)];
                for k in 1..=horizon {
                    r_inv_pow = &r_inv_pow * &r_inv;
                    out.push(&g_pow[k] * &xi[k] * &r_inv_pow);
                }
                Some(out)
            }
            Err(_) => None,
        };

        let norms: Vec<f64> = phi.iter().map(linalg::norm_inf).collect();
        let phi_tail = geometric_tail(&norms);
        Ok(TabooTables {
            horizon,
            overshoot,
            r_tilde: fund.r_tilde.clone(),
            phi,
            xi,
            theta_h,
            theta_xi,
            phi_tail,
        })
    }

    fn check_horizon(&self, need: usize) -> Result<()> {
        if need > self.horizon {
            return Err(Error::HorizonTooSmall {
                have: self.horizon,
                need,
            });
        }
        Ok(())
    }

    /// `Phi(m)`: expected time at level `m` before the first passage above `m`.
    pub fn phi(&self, m: usize) -> Result<&Mat> {
        self.check_horizon(m)?;
        Ok(&self.phi[m])
    }

    /// `Xi(m)`: expected time at level 0 before the first visit to `m`.
    pub fn xi(&self, m: usize) -> Result<&Mat> {
        if m == 0 {
            return Err(Error::InvalidArgument("Xi is defined for m >= 1".into()));
        }
        self.check_horizon(m)?;
        Ok(&self.xi[m])
    }

    /// `Theta(k)`: expected time at level 0 before the first visit to `-k`.
    pub fn theta(&self, k: usize) -> Result<&Mat> {
        if k == 0 {
            return Err(Error::InvalidArgument("Theta is defined for k >= 1".into()));
        }
        self.check_horizon(k)?;
        self.theta_h
            .as_ref()
            .or(self.theta_xi.as_ref())
            .map(|t| &t[k])
            .ok_or(Error::NullRecurrentAndSingularA)
    }

    /// `sum_{n <= K} Phi(n) z^n`.
    pub fn phi_transform(&self, z: f64) -> Mat {
        let n = self.phi[0].nrows();
        let mut acc = Mat::zeros(n, n);
        let mut zp = 1.0;
        for p in &self.phi {
            acc += p * zp;
            zp *= z;
        }
        acc
    }

    /// Residual of `sum_n Phi(n) z^n = F(z)^{-1}(R - z I)` and the tail bound
    /// of the truncated series at `|z| <= 1`.
    pub fn phi_transform_residual(&self, model: &LatticeModel, r: &Mat, z: f64) -> Result<(f64, f64)> {
        if z == 0.0 || z.abs() > 1.0 {
            return Err(Error::ZOutsideDomain {
                z,
                reason: "the Phi transform is checked for 0 < |z| <= 1".into(),
            });
        }
        let n = r.nrows();
        let f = model.f_real(z)?;
        let rhs = linalg::solve_left(&f, &(r - Mat::identity(n, n) * z), "F(z)")?;
        let residual = linalg::norm_inf(&(self.phi_transform(z) - rhs));
        let norms: Vec<f64> = self
            .phi
            .iter()
            .enumerate()
            .map(|(k, p)| linalg::norm_inf(p) * z.abs().powi(k as i32))
            .collect();
        Ok((residual, geometric_tail(&norms)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::birth_death;
    use crate::solvers::SolveOptions;

    fn bd12() -> (LatticeModel, LatticeFundamentals) {
        let m = birth_death(1.0, 2.0).unwrap();
        let f = LatticeFundamentals::solve(&m, &SolveOptions::default()).unwrap();
        (m, f)
    }

    #[test]
    fn overshoot_birth_death() {
        let (_, f) = bd12();
        assert!((f.overshoot[0][(0, 0)] - 1.0 / 3.0).abs() < 1e-14);
        assert!((f.overshoot[1][(0, 0)] - 1.0 / 3.0).abs() < 1e-14);
        assert!((f.r_tilde[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tables_birth_death() {
        let (m, f) = bd12();
        let t = TabooTables::build(&m, &f, 20).unwrap();
        for k in 0..=20usize {
            let two = 2f64.powi(-(k as i32));
            assert!((t.phi(k).unwrap()[(0, 0)] - 0.5 * two).abs() < 1e-13);
            if k >= 1 {
                assert!((t.xi(k).unwrap()[(0, 0)] - (1.0 - two)).abs() < 1e-12);
                assert!((t.theta(k).unwrap()[(0, 0)] - (1.0 - two)).abs() < 1e-12);
                let alt = &t.theta_xi.as_ref().unwrap()[k];
                assert!((alt[(0, 0)] - (1.0 - two)).abs() < 1e-12);
            }
        }
        assert_eq!(t.xi(1).unwrap(), t.phi(0).unwrap());
        let (res, _) = t.phi_transform_residual(&m, &f.r, 0.3).unwrap();
        assert!(res < 1e-6);
        assert!(matches!(t.phi(21), Err(Error::HorizonTooSmall { .. })));
    }

    #[test]
    fn geometric_tail_of_halving_sequence() {
        let norms: Vec<f64> = (0..20).map(|k| 0.5f64.powi(k)).collect();
        let tail = geometric_tail(&norms);
        assert!((tail - 0.5f64.powi(19)).abs() < 1e-12);
        assert_eq!(geometric_tail(&[1.0, 1.0, 1.0]), f64::INFINITY);
    }
}
