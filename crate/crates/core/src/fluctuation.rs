//! Two-sided exit, scale matrices, creeping, occupation times on strips,
//! transform certificates and decay diagnostics for lattice models.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Lu, Mat};
use crate::model::{LatticeModel, TOL_DRIFT};
use crate::solvers::{LatticeFundamentals, SolveOptions};
use crate::taboo::{geometric_tail, TabooTables};

/// `W(1..=K)` from `W(1) = A_{-1}^{-1}`,
/// `W(k+1) = -A_{-1}^{-1} sum_{nu=1}^{k} A_{k-nu} W(nu)`.
#[derive(Debug, Clone)]
pub struct ScaleTable {
    w: Vec<Mat>,
}

impl ScaleTable {
    pub fn build(model: &LatticeModel, horizon: usize) -> Result<Self> {
        let n = model.n_phases();
        let lu = Lu::new(model.a_minus1(), "A[-1]").map_err(|_| Error::SingularAminus1)?;
        let m_max = model.max_jump() as i64;
        let mut w = vec![Mat::zeros(n, n), lu.inverse()];
        for k in 1..horizon {
            let mut acc = Mat::zeros(n, n);
            for nu in 1..=k {
                let idx = (k - nu) as i64;
                if idx <= m_max {
                    acc += model.block(idx).unwrap() * &w[nu];
                }
            }
            w.push(-lu.solve(&acc));
        }
        Ok(ScaleTable { w })
    }

    pub fn horizon(&self) -> usize {
        self.w.len() - 1
    }

    /// `W(j)`, with `W(j) = 0` for `j <= 0`.
    pub fn w(&self, j: i64) -> Result<Mat> {
        let n = self.w[0].nrows();
        if j <= 0 {
            return Ok(Mat::zeros(n, n));
        }
        self.w.get(j as usize).cloned().ok_or(Error::HorizonTooSmall {
            have: self.horizon(),
            need: j as usize,
        })
    }

    pub fn values(&self) -> &[Mat] {
        &self.w[1..]
    }
}

/// Residual of a truncated transform identity and the estimated size of the
/// omitted tail.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransformCheck {
    pub z: f64,
    pub residual: f64,
    pub tail_bound: f64,
    /// Accumulated rounding allowance of the partial sum.
    pub rounding: f64,
    pub terms: usize,
}

impl TransformCheck {
    pub fn passes(&self) -> bool {
        self.residual <= self.tail_bound + self.rounding + 1e-8
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub xi: Vec<f64>,
    pub xi_star: f64,
    pub phi: Option<f64>,
    pub product_within_5pct: Option<bool>,
    pub root_sequence_monotone: bool,
}

/// Everything needed to answer fluctuation queries on one lattice model up to
/// a level horizon `K`.
#[derive(Debug, Clone)]
pub struct LatticeAnalysis {
    pub model: LatticeModel,
    pub fund: LatticeFundamentals,
    pub tables: TabooTables,
    pub scale: Option<ScaleTable>,
}

fn pow(a: &Mat, k: usize) -> Mat {
    linalg::mat_pow(a, k)
}

impl LatticeAnalysis {
    pub fn new(model: LatticeModel, opts: &SolveOptions, horizon: usize) -> Result<Self> {
        let fund = LatticeFundamentals::solve(&model, opts)?;
        Self::with_fundamentals(model, fund, horizon)
    }

    pub fn with_fundamentals(model: LatticeModel, fund: LatticeFundamentals, horizon: usize) -> Result<Self> {
        let horizon = horizon.max(1);
        let tables = TabooTables::build(&model, &fund, horizon)?;
        let scale = match ScaleTable::build(&model, horizon + 1) {
            Ok(s) => Some(s),
            Err(Error::SingularAminus1) => None,
            Err(e) => return Err(e),
        };
        Ok(LatticeAnalysis {
            model,
            fund,
            tables,
            scale,
        })
    }

    pub fn horizon(&self) -> usize {
        self.tables.horizon
    }

    fn n(&self) -> usize {
        self.model.n_phases()
    }

    pub fn scale(&self) -> Result<&ScaleTable> {
        self.scale.as_ref().ok_or(Error::SingularAminus1)
    }

    fn r_inverse(&self) -> Result<Mat> {
        linalg::inverse(&self.fund.r, "R")
    }

    // -- two-sided exit ---------------------------------------------------

    fn exit_boundary(&self, a: usize, b: usize) -> Option<Mat> {
        let n = self.n();
        match (a, b) {
            (0, 0) => Some(Mat::identity(n, n)),
            (_, 0) => Some(Mat::zeros(n, n)),
            _ => None,
        }
    }

    /// `D_{a,b} = P[tau_{-a} < tau_b^up, J]` as `Xi(b) R^a Xi(a+b)^{-1}`.
    pub fn two_sided_exit(&self, a: usize, b: usize) -> Result<Mat> {
        if let Some(d) = self.exit_boundary(a, b) {
            return Ok(d);
        }
        let t = &self.tables;
        let num = t.xi(b)? * pow(&self.fund.r, a);
        linalg::solve_right(&num, t.xi(a + b)?, "Xi(a+b)")
    }

    /// `D_{a,b} = W(b) W(a+b)^{-1}`.
    pub fn two_sided_exit_scale(&self, a: usize, b: usize) -> Result<Mat> {
        if let Some(d) = self.exit_boundary(a, b) {
            return Ok(d);
        }
        let s = self.scale()?;
        linalg::solve_right(&s.w(b as i64)?, &s.w((a + b) as i64)?, "W(a+b)")
    }

    /// `D_{a,b} = (G^{-b} Theta(b)) (G^{-a-b} Theta(a+b))^{-1}`.
    pub fn two_sided_exit_theta(&self, a: usize, b: usize) -> Result<Mat> {
        if let Some(d) = self.exit_boundary(a, b) {
            return Ok(d);
        }
        let t = &self.tables;
        let g = &self.fund.g;
        let left = linalg::solve_left(&pow(g, b), t.theta(b)?, "G^b")?;
        let right = linalg::solve_left(&pow(g, a + b), t.theta(a + b)?, "G^(a+b)")?;
        linalg::solve_right(&left, &right, "G^-(a+b) Theta(a+b)")
    }

    // -- scale transform ----------------------------------------------------

    fn min_g_modulus(&self) -> f64 {
        linalg::eigenvalues(&self.fund.g)
            .iter()
            .map(|z| z.norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Default probe points `{0.1, 0.3, 0.5 min|sp(G)|}` restricted to the
    /// convergence domain of the scale transform.
    pub fn scale_probe_points(&self) -> Vec<f64> {
        let rho = self.min_g_modulus();
        let mut v: Vec<f64> = [0.1, 0.3, 0.5 * rho]
            .into_iter()
            .filter(|&z| z > 0.0 && z < rho - 1e-6)
            .collect();
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        v
    }

    /// `sum_{k<=K} W(k) z^k` against `z F(z)^{-1}`.
    pub fn check_scale_transform(&self, z: f64) -> Result<TransformCheck> {
        let rho = self.min_g_modulus();
        if z == 0.0 {
            return Err(Error::ZeroArgument);
        }
        if !(z.abs() < rho - 1e-6) {
            return Err(Error::ZOutsideDomain {
                z,
                reason: format!("|z| must be below min |sp(G)| = {rho}"),
            });
        }
        // the terms decay like (|z| / rho)^k; pick a horizon that reaches
        // 1e-13 without letting W(k) ~ rho^{-k} overflow
        let ratio = z.abs() / rho;
        let want = (1e-13f64.ln() / ratio.ln()).ceil() as usize;
        let cap = if rho < 1.0 { (250.0 / -rho.log10()).floor() as usize } else { 5000 };
        let k = want.clamp(8, cap.max(8)).min(5000);
        let s = ScaleTable::build(&self.model, k)?;
        let n = self.n();
        let mut acc = Mat::zeros(n, n);
        let mut norms = Vec::new();
        let mut zp = 1.0;
        for w in s.values() {
            zp *= z;
            acc += w * zp;
            norms.push(linalg::norm_inf(w) * zp.abs());
        }
        let target = linalg::inverse(&self.model.f_real(z)?, "F(z)")? * z;
        let rounding = 1e-14 * norms.iter().sum::<f64>();
        Ok(TransformCheck {
            z,
            residual: linalg::norm_inf(&(acc - target)),
            tail_bound: geometric_tail(&norms),
            rounding,
            terms: norms.len(),
        })
    }

    // -- creeping and passage ---------------------------------------------

    /// `P[tau_m = tau_m^up, J] = Phi(m) Phi(0)^{-1}`.
    pub fn creeping(&self, m: usize) -> Result<Mat> {
        let t = &self.tables;
        linalg::solve_right(t.phi(m)?, t.phi(0)?, "Phi(0)")
    }

    /// `(W(m+1) - W(m) R^{-1}) W(1)^{-1}`.
    pub fn creeping_scale(&self, m: usize) -> Result<Mat> {
        let s = self.scale()?;
        let num = s.w(m as i64 + 1)? - s.w(m as i64)? * self.r_inverse()?;
        linalg::solve_right(&num, &s.w(1)?, "W(1)")
    }

    /// `P[tau_m < tau_{m+l}^up, J]`.
    pub fn hit_before_upcross(&self, m: usize, l: usize) -> Result<Mat> {
        if l == 0 {
            return Err(Error::InvalidArgument("l must be at least 1".into()));
        }
        let t = &self.tables;
        let n = self.n();
        let mut num = Mat::zeros(n, n);
        let mut rp = Mat::identity(n, n);
        for i in 0..l {
            num += t.phi(m + i)? * &rp;
            rp = &rp * &self.fund.r;
        }
        linalg::solve_right(&num, t.xi(l)?, "Xi(l)")
    }

    /// `(W(m+l) - W(m) R^{-l}) W(l)^{-1}`.
    pub fn hit_before_upcross_scale(&self, m: usize, l: usize) -> Result<Mat> {
        if l == 0 {
            return Err(Error::InvalidArgument("l must be at least 1".into()));
        }
        let s = self.scale()?;
        let num = s.w((m + l) as i64)? - s.w(m as i64)? * pow(&self.r_inverse()?, l);
        linalg::solve_right(&num, &s.w(l as i64)?, "W(l)")
    }

    // -- occupation on strips -----------------------------------------------

    fn check_strip(k: i64, l: usize, m: usize) -> Result<()> {
        if l == 0 || m == 0 || !(-(l as i64) < k && k < m as i64) {
            return Err(Error::InvalidArgument(format!(
                "strip occupation needs l, m >= 1 and -l < k < m (got k={k}, l={l}, m={m})"
            )));
        }
        Ok(())
    }

    /// `E[L(k, tau_m^up)] = H(k) - H(m) R^{m-k}` for `k < m`.
    pub fn occupation_before_upcross(&self, k: i64, m: usize) -> Result<Mat> {
        let hk = self.fund.occupation_at_level(k)?;
        let hm = self.fund.occupation_at_level(m as i64)?;
        Ok(hk - hm * pow(&self.fund.r, (m as i64 - k) as usize))
    }

    /// Transient route:
    /// `E[L(k, tau_{-l} ^ tau_m^up)] = E[L(k, tau_m^up)] - D_{l,m} E[L(k+l, tau_{m+l}^up)]`.
    pub fn strip_occupation_transient(&self, k: i64, l: usize, m: usize) -> Result<Mat> {
        Self::check_strip(k, l, m)?;
        let first = self.occupation_before_upcross(k, m)?;
        let shifted = self.occupation_before_upcross(k + l as i64, m + l)?;
        Ok(first - self.two_sided_exit(l, m)? * shifted)
    }

    /// Scale route: `W(m) W(m+l)^{-1} W(k+l) - W(k)`.
    pub fn strip_occupation_scale(&self, k: i64, l: usize, m: usize) -> Result<Mat> {
        Self::check_strip(k, l, m)?;
        let s = self.scale()?;
        let ratio = linalg::solve_right(&s.w(m as i64)?, &s.w((m + l) as i64)?, "W(m+l)")?;
        Ok(ratio * s.w(k + l as i64)? - s.w(k)?)
    }

    /// Prefers the transient route; falls back to the scale route.
    pub fn strip_occupation(&self, k: i64, l: usize, m: usize) -> Result<Mat> {
        Self::check_strip(k, l, m)?;
        if self.fund.h.is_some() {
            return self.strip_occupation_transient(k, l, m);
        }
        if self.scale.is_some() {
            return self.strip_occupation_scale(k, l, m);
        }
        Err(Error::NoValidRoute(
            "process is null recurrent and A[-1] is singular".into(),
        ))
    }

    /// `P[tau_m^up < tau_{-l}, X = m + u, J]`, summing over the last level
    /// visited before the upward exit.
    pub fn exit_overshoot(&self, l: usize, m: usize, u: usize) -> Result<Mat> {
        let n = self.n();
        let mut out = Mat::zeros(n, n);
        let mm = self.model.max_jump();
        for nu in 1..(m + l) {
            if nu + u > mm {
                break;
            }
            let occ = self.strip_occupation(m as i64 - nu as i64, l, m)?;
            out += occ * self.model.block((nu + u) as i64).unwrap();
        }
        Ok(out)
    }

    /// Row-wise `|1 - (upper exits + lower exit + killing)|`.
    pub fn exit_mass_defect(&self, l: usize, m: usize) -> Result<f64> {
        let n = self.n();
        let ones = Mat::from_element(n, 1, 1.0);
        let mut mass = self.two_sided_exit(l, m)? * &ones;
        for u in 0..self.model.max_jump() {
            mass += self.exit_overshoot(l, m, u)? * &ones;
        }
        let q = Mat::from_column_slice(n, 1, self.model.kill_rates().as_slice());
        for k in (1 - l as i64)..(m as i64) {
            mass += self.strip_occupation(k, l, m)? * &q;
        }
        Ok(mass.iter().map(|x| (1.0 - x).abs()).fold(0.0, f64::max))
    }

    // -- transform of H -----------------------------------------------------

    /// Largest real part among the eigenvalues of `F(z)/z`.
    pub fn transform_abscissa(&self, z: f64) -> Result<f64> {
        let f = self.model.f_real(z)? / z;
        Ok(linalg::spectral_abscissa(&f))
    }

    /// Points of a uniform grid in `(0, 1)` at which every eigenvalue of
    /// `F(z)/z` has negative real part.
    pub fn bilateral_domain_scan(&self, points: usize) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for i in 1..points {
            let z = i as f64 / points as f64;
            if self.transform_abscissa(z)? < -1e-9 {
                out.push(z);
            }
        }
        Ok(out)
    }

    /// Centre of the scanned bilateral domain, if any.
    pub fn find_bilateral_z(&self) -> Result<Option<f64>> {
        let pts = self.bilateral_domain_scan(1000)?;
        Ok(pts.get(pts.len() / 2).copied())
    }

    /// `sum_{k in Z} z^k H(k) = -z F(z)^{-1}`, both tails summed explicitly.
    pub fn check_h_transform_bilateral(&self, z: f64) -> Result<TransformCheck> {
        let h = self.fund.h()?.clone();
        if z <= 0.0 || self.transform_abscissa(z)? >= 0.0 {
            return Err(Error::ZOutsideDomain {
                z,
                reason: "F(z)/z has an eigenvalue with non-negative real part".into(),
            });
        }
        let n = self.n();
        let scale = linalg::norm_inf(&h).max(1.0);
        let k_max = 20_000usize;
        let mut acc = h.clone();
        let mut down = h.clone();
        let mut norms_down = vec![linalg::norm_inf(&h)];
        let mut k = 0;
        while k < k_max {
            k += 1;
            down = &self.fund.g * down / z;
            acc += &down;
            norms_down.push(linalg::norm_inf(&down));
            if norms_down[k] < 1e-17 * scale && k > 10 {
                break;
            }
        }
        let mut terms = k;
        // upper tail in blocks to reuse the triangular recursion
        let mut horizon = 64usize;
        let mut norms_up;
        loop {
            let levels = self.fund.occupation_levels(horizon)?;
            norms_up = vec![linalg::norm_inf(&levels[0])];
            let mut up_sum = Mat::zeros(n, n);
            let mut zp = 1.0;
            for lvl in levels.iter().skip(1) {
                zp *= z;
                up_sum += lvl * zp;
                norms_up.push(linalg::norm_inf(lvl) * zp);
            }
            if norms_up[horizon] < 1e-17 * scale || horizon >= k_max {
                acc += up_sum;
                break;
            }
            horizon *= 2;
        }
        terms += horizon;
        let target = linalg::inverse(&self.model.f_real(z)?, "F(z)")? * (-z);
        let tail = geometric_tail(&norms_down) + geometric_tail(&norms_up);
        Ok(TransformCheck {
            z,
            residual: linalg::norm_inf(&(acc - target)),
            tail_bound: tail,
            rounding: 1e-14 * (norms_down.iter().sum::<f64>() + norms_up.iter().sum::<f64>()),
            terms,
        })
    }

    /// `sum_{k>=1} z^k P[J_{tau_k}] H + z (z I - G)^{-1} H = -z F(z)^{-1}` on
    /// the unit disk away from the spectrum of `G`.
    pub fn check_h_transform_unilateral(&self, z: f64) -> Result<TransformCheck> {
        let h = self.fund.h()?.clone();
        if z == 0.0 || z.abs() >= 1.0 {
            return Err(Error::ZOutsideDomain {
                z,
                reason: "unilateral form needs 0 < |z| < 1".into(),
            });
        }
        if linalg::eigenvalues(&self.fund.g).iter().any(|e| (e - z).norm() < 1e-6) {
            return Err(Error::ZOutsideDomain {
                z,
                reason: "z is an eigenvalue of G".into(),
            });
        }
        let n = self.n();
        let id = Mat::identity(n, n);
        let scale = linalg::norm_inf(&h).max(1.0);
        let mut horizon = 64usize;
        let (sum, norms) = loop {
            let levels = self.fund.occupation_levels(horizon)?;
            let mut sum = Mat::zeros(n, n);
            let mut norms = Vec::with_capacity(horizon);
            let mut zp = 1.0;
            for lvl in levels.iter().skip(1) {
                zp *= z;
                sum += lvl * zp;
                norms.push(linalg::norm_inf(lvl) * zp.abs());
            }
            if norms[horizon - 1] < 1e-17 * scale || horizon >= 20_000 {
                break (sum, norms);
            }
            horizon *= 2;
        };
        let lower = linalg::solve_left(&(&id * z - &self.fund.g), &h, "zI - G")? * z;
        let target = linalg::inverse(&self.model.f_real(z)?, "F(z)")? * (-z);
        Ok(TransformCheck {
            z,
            residual: linalg::norm_inf(&(sum + lower - target)),
            tail_bound: geometric_tail(&norms),
            rounding: 1e-14 * norms.iter().sum::<f64>(),
            terms: horizon,
        })
    }

    // -- decay ----------------------------------------------------------------

    /// Right end of the interval `(1, phi)` on which `F(z)/z` has all
    /// eigenvalues in the open left half-plane.
    fn decay_phi(&self) -> Result<Option<f64>> {
        let valid = |z: f64| -> Result<bool> { Ok(self.transform_abscissa(z)? < 0.0) };
        let grid: Vec<f64> = (0..=2000).map(|i| 1.0 + 10f64.powf(-6.0 + 9.0 * i as f64 / 2000.0)).collect();
        if !valid(grid[0])? {
            return Ok(None);
        }
        let mut lo = grid[0];
        let mut hi = None;
        for &z in &grid[1..] {
            if valid(z)? {
                lo = z;
            } else {
                hi = Some(z);
                break;
            }
        }
        let Some(mut hi) = hi else {
            return Ok(None);
        };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if valid(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(0.5 * (lo + hi)))
    }

    pub fn decay_diagnostic(&self, k_max: usize) -> Result<DecayReport> {
        if !(self.fund.regime.mu < -TOL_DRIFT) {
            return Err(Error::WrongRegime("decay diagnostic needs negative drift".into()));
        }
        if k_max < 5 {
            return Err(Error::InvalidArgument("decay horizon must be at least 5".into()));
        }
        let hits = self.fund.hitting_matrices_up(k_max)?;
        let xi: Vec<f64> = hits[1..].iter().map(linalg::spectral_radius).collect();
        let roots: Vec<f64> = xi.iter().enumerate().map(|(i, x)| x.powf(1.0 / (i + 1) as f64)).collect();
        let tail = &roots[4..];
        let increasing = tail.windows(2).all(|w| w[1] >= w[0] - 1e-12);
        let decreasing = tail.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let xi_star = roots[k_max - 1];
        let phi = self.decay_phi()?;
        Ok(DecayReport {
            product_within_5pct: phi.map(|p| (xi_star * p - 1.0).abs() < 0.05),
            xi,
            xi_star,
            phi,
            root_sequence_monotone: increasing || decreasing,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::birth_death;

    fn bd(up: f64, down: f64, horizon: usize) -> LatticeAnalysis {
        LatticeAnalysis::new(birth_death(up, down).unwrap(), &SolveOptions::default(), horizon).unwrap()
    }

    #[test]
    fn scale_birth_death() {
        let a = bd(1.0, 2.0, 30);
        let s = a.scale().unwrap();
        for k in 1..=30 {
            assert!((s.w(k).unwrap()[(0, 0)] - (1.0 - 2f64.powi(-(k as i32)))).abs() < 1e-12);
        }
        assert_eq!(s.w(0).unwrap()[(0, 0)], 0.0);
        assert_eq!(s.w(-3).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn exit_birth_death_all_routes() {
        let a = bd(1.0, 2.0, 20);
        for (x, y) in [(2usize, 3usize), (1, 1), (4, 6)] {
            let want = (1.0 - 2f64.powi(-(y as i32))) / (1.0 - 2f64.powi(-((x + y) as i32)));
            assert!((a.two_sided_exit(x, y).unwrap()[(0, 0)] - want).abs() < 1e-12);
            assert!((a.two_sided_exit_scale(x, y).unwrap()[(0, 0)] - want).abs() < 1e-12);
            assert!((a.two_sided_exit_theta(x, y).unwrap()[(0, 0)] - want).abs() < 1e-12);
        }
        assert_eq!(a.two_sided_exit(0, 0).unwrap()[(0, 0)], 1.0);
        assert_eq!(a.two_sided_exit(3, 0).unwrap()[(0, 0)], 0.0);
        assert!(matches!(a.two_sided_exit(15, 15), Err(Error::HorizonTooSmall { .. })));
    }

    #[test]
    fn strip_and_creeping() {
        let a = bd(1.0, 2.0, 20);
        assert!((a.strip_occupation_transient(0, 2, 2).unwrap()[(0, 0)] - 0.6).abs() < 1e-12);
        assert!((a.strip_occupation_scale(0, 2, 2).unwrap()[(0, 0)] - 0.6).abs() < 1e-12);
        assert!((a.creeping(3).unwrap()[(0, 0)] - 0.125).abs() < 1e-14);
        assert!((a.creeping_scale(3).unwrap()[(0, 0)] - 0.125).abs() < 1e-12);
        assert!((a.hit_before_upcross(2, 1).unwrap()[(0, 0)] - 0.25).abs() < 1e-14);
        assert!(a.exit_mass_defect(2, 3).unwrap() < 1e-12);
        assert!(a.strip_occupation(3, 1, 2).is_err());
    }

    #[test]
    fn null_recurrent_uses_scale_route() {
        let a = bd(1.0, 1.0, 10);
        assert!(a.strip_occupation_transient(0, 1, 1).is_err());
        // symmetric walk: W(k) = k, so L(0) on {-1 < X < 2} is W(1) W(3)^{-1} W(2) = 2/3
        let v = a.strip_occupation(0, 1, 2).unwrap()[(0, 0)];
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn transforms_birth_death() {
        let a = bd(2.0, 1.0, 40);
        let c = a.check_scale_transform(0.2).unwrap();
        assert!(c.passes() && c.residual < 1e-8);
        assert!(matches!(a.check_scale_transform(0.5), Err(Error::ZOutsideDomain { .. })));
        let a = bd(1.0, 2.0, 40);
        assert!(a.find_bilateral_z().unwrap().is_none());
        assert!(a.check_h_transform_unilateral(0.5).unwrap().residual < 1e-12);
    }

    #[test]
    fn decay_birth_death() {
        let a = bd(1.0, 2.0, 10);
        let d = a.decay_diagnostic(40).unwrap();
        assert!((d.phi.unwrap() - 2.0).abs() < 1e-9);
        assert!((d.xi_star - 0.5).abs() < 1e-12);
        assert_eq!(d.product_within_5pct, Some(true));
    }
}
