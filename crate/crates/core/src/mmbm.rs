//! Scale function, two-sided exit and the creeping identity for
//! Markov-modulated Brownian motion with every phase diffusive.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::model::MmbmModel;
use crate::solvers::{MmbmFundamentals, SolveOptions};

#[derive(Debug, Clone)]
pub struct MmbmAnalysis {
    pub model: MmbmModel,
    pub fund: MmbmFundamentals,
}

impl MmbmAnalysis {
    pub fn new(model: MmbmModel, opts: &SolveOptions) -> Result<Self> {
        if let Some(phase) = (0..model.n_phases()).find(|&i| model.sigma2()[i] == 0.0) {
            return Err(Error::FluidPhasePresent { phase });
        }
        let fund = MmbmFundamentals::solve(&model, opts)?;
        Ok(MmbmAnalysis { model, fund })
    }

    fn n(&self) -> usize {
        self.model.n_phases()
    }

    fn lambda(&self) -> &Mat {
        self.fund.lambda.as_ref().expect("all phases are diffusive")
    }

    fn h(&self) -> Result<&Mat> {
        self.fund.h.as_ref().ok_or(Error::NullRecurrent)
    }

    /// `P[J_{tau_{-x}}] = e^{G x}`.
    pub fn hitting_down(&self, x: f64) -> Mat {
        linalg::expm(&(&self.fund.g * x))
    }

    /// `P[J_{tau_x}] = e^{Lambda x}`.
    pub fn hitting_up(&self, x: f64) -> Mat {
        linalg::expm(&(self.lambda() * x))
    }

    /// `W(x) = (e^{-G x} - e^{Lambda x}) H`.
    pub fn scale(&self, x: f64) -> Result<Mat> {
        if x < 0.0 {
            return Ok(Mat::zeros(self.n(), self.n()));
        }
        let h = self.h()?;
        Ok((linalg::expm(&(&self.fund.g * -x)) - self.hitting_up(x)) * h)
    }

    /// `W'(x) = (-G e^{-G x} - Lambda e^{Lambda x}) H`.
    pub fn scale_derivative(&self, x: f64) -> Result<Mat> {
        let h = self.h()?;
        let g = &self.fund.g;
        let l = self.lambda();
        Ok((-(g * linalg::expm(&(g * -x))) - l * self.hitting_up(x)) * h)
    }

    /// `P[tau_{-a} < tau_b^+, J] = W(b) W(a+b)^{-1}`.
    pub fn exit(&self, a: f64, b: f64) -> Result<Mat> {
        if a < 0.0 || b < 0.0 || a + b <= 0.0 || !(a + b).is_finite() {
            return Err(Error::InvalidArgument("exit needs a, b >= 0 with a + b > 0".into()));
        }
        let n = self.n();
        if a == 0.0 {
            return Ok(Mat::identity(n, n));
        }
        if b == 0.0 {
            return Ok(Mat::zeros(n, n));
        }
        linalg::solve_right(&self.scale(b)?, &self.scale(a + b)?, "W(a+b)")
    }

    /// `|(W'(x) + W(x) R) Delta_sigma2 / 2 - e^{Lambda x}|`.
    pub fn creeping_residual(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Err(Error::InvalidArgument("x must be positive".into()));
        }
        let half = Mat::from_diagonal(&(self.model.sigma2() * 0.5));
        let lhs = (self.scale_derivative(x)? + self.scale(x)? * &self.fund.r) * half;
        Ok(linalg::norm_inf(&(lhs - self.hitting_up(x))))
    }

    /// Smallest real part in the spectrum of `G`.
    pub fn g_abscissa_min(&self) -> f64 {
        linalg::eigenvalues(&self.fund.g)
            .iter()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min)
    }

    /// `|int_0^X e^{alpha x} W(x) dx - F(alpha)^{-1}|` by adaptive Simpson
    /// quadrature, for `alpha` left of the spectrum of `G`.
    pub fn transform_quadrature_residual(&self, alpha: f64) -> Result<f64> {
        let g_min = self.g_abscissa_min();
        let lambda_max = linalg::spectral_abscissa(self.lambda());
        let decay = (g_min - alpha).min(-alpha - lambda_max);
        if !(decay > 0.0) {
            return Err(Error::ZOutsideDomain {
                z: alpha,
                reason: format!("alpha must lie left of min Re sp(G) = {g_min}"),
            });
        }
        let upper = 50.0 / decay;
        let f = |x: f64| -> Result<Mat> { Ok(self.scale(x)? * (alpha * x).exp()) };
        let integral = adaptive_simpson(&f, 0.0, upper, 1e-8)?;
        let target = linalg::inverse(&self.model.f_real(alpha), "F(alpha)")?;
        Ok(linalg::norm_inf(&(integral - target)))
    }
}

/// Adaptive Simpson quadrature of a matrix-valued function.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> Result<Mat>
where
    F: Fn(f64) -> Result<Mat>,
{
    struct Panel {
        a: f64,
        b: f64,
        fa: Mat,
        fm: Mat,
        fb: Mat,
        whole: Mat,
        tol: f64,
        depth: u32,
    }
    let simpson = |a: f64, b: f64, fa: &Mat, fm: &Mat, fb: &Mat| (fa + fm * 4.0 + fb) * ((b - a) / 6.0);
    // start from a uniform split so that narrow features near 0 are seen
    let pieces = 64;
    let mut total = Mat::zeros(0, 0);
    let mut stack = Vec::new();
    for k in 0..pieces {
        let x0 = a + (b - a) * k as f64 / pieces as f64;
        let x1 = a + (b - a) * (k + 1) as f64 / pieces as f64;
        let (fa, fm, fb) = (f(x0)?, f(0.5 * (x0 + x1))?, f(x1)?);
        let whole = simpson(x0, x1, &fa, &fm, &fb);
        stack.push(Panel {
            a: x0,
            b: x1,
            fa,
            fm,
            fb,
            whole,
            tol: tol / pieces as f64,
            depth: 0,
        });
    }
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let flm = f(lm)?;
        let frm = f(rm)?;
        let left = simpson(p.a, m, &p.fa, &flm, &p.fm);
        let right = simpson(m, p.b, &p.fm, &frm, &p.fb);
        let delta = &left + &right - &p.whole;
        if p.depth >= 40 || linalg::max_abs(&delta) <= 15.0 * p.tol {
            let piece = left + right + delta / 15.0;
            total = if total.is_empty() { piece } else { total + piece };
        } else {
            stack.push(Panel {
                a: p.a,
                b: m,
                fa: p.fa,
                fm: flm,
                fb: p.fm.clone(),
                whole: left,
                tol: 0.5 * p.tol,
                depth: p.depth + 1,
            });
            stack.push(Panel {
                a: m,
                b: p.b,
                fa: p.fm,
                fm: frm,
                fb: p.fb,
                whole: right,
                tol: 0.5 * p.tol,
                depth: p.depth + 1,
            });
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, s2: f64, q: f64) -> MmbmAnalysis {
        let m = MmbmModel::new(vec![a], vec![s2], Mat::zeros(1, 1), Some(vec![q])).unwrap();
        MmbmAnalysis::new(m, &SolveOptions::default()).unwrap()
    }

    #[test]
    fn scalar_scale_matches_two_root_formula() {
        let an = scalar(-1.0, 2.0, 1.0);
        // exponents of W are the roots of s2/2 r^2 - a r - q = 0
        let disc = (1.0f64 + 4.0).sqrt();
        let (r1, r2) = ((-1.0 + disc) / 2.0, (-1.0 - disc) / 2.0);
        for x in [0.01, 0.5, 1.0, 4.0] {
            let want = ((r1 * x).exp() - (r2 * x).exp()) / (r1 - r2);
            assert!((an.scale(x).unwrap()[(0, 0)] - want).abs() < 1e-12 * want.max(1.0));
        }
        assert!(an.scale(0.0).unwrap()[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn brownian_exit() {
        let an = scalar(-1.0, 2.0, 0.0);
        let (a, b) = (0.7f64, 1.3f64);
        let want = (1.0 - (-b).exp()) / (1.0 - (-(a + b)).exp());
        assert!((an.exit(a, b).unwrap()[(0, 0)] - want).abs() < 1e-12);
        assert_eq!(an.exit(0.0, 1.0).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn creeping_and_transform() {
        let an = scalar(-1.0, 2.0, 1.0);
        for x in [0.01, 1.0, 10.0] {
            assert!(an.creeping_residual(x).unwrap() < 1e-10);
        }
        let alpha = an.g_abscissa_min() - 1.0;
        assert!(an.transform_quadrature_residual(alpha).unwrap() < 1e-6);
    }

    #[test]
    fn fluid_phase_rejected() {
        let m = MmbmModel::new(
            vec![-1.0, 0.5],
            vec![0.0, 1.0],
            Mat::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]),
            None,
        )
        .unwrap();
        assert!(matches!(
            MmbmAnalysis::new(m, &SolveOptions::default()),
            Err(Error::FluidPhasePresent { phase: 0 })
        ));
    }
}
