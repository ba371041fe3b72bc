//! The two model classes: lattice MAPs given by a finite block family
//! `A_{-1}, A_0, ..., A_M`, and Markov-modulated Brownian motion (MMBM).
//!
//! Killing is never an explicit cemetery phase. For lattice models it is the
//! deficit of the row sums of `sum_m A_m`; for MMBM it is a separate rate
//! vector next to a conservative phase generator.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, Mat};

/// Default threshold on |mu| below which a non-defective model is classified
/// as zero drift.
pub const TOL_DRIFT: f64 = 1e-10;

const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeTag {
    #[serde(rename = "C1_zero_drift")]
    C1ZeroDrift,
    #[serde(rename = "C1_negative_drift")]
    C1NegativeDrift,
    #[serde(rename = "C2_defective")]
    C2Defective,
    #[serde(rename = "C2_positive_drift")]
    C2PositiveDrift,
}

impl RegimeTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeTag::C1ZeroDrift => "C1_zero_drift",
            RegimeTag::C1NegativeDrift => "C1_negative_drift",
            RegimeTag::C2Defective => "C2_defective",
            RegimeTag::C2PositiveDrift => "C2_positive_drift",
        }
    }
}

/// Stationary phase law, asymptotic drift and the resulting regime.
#[derive(Debug, Clone, PartialEq)]
pub struct Regime {
    pub tag: RegimeTag,
    pub pi: DVector<f64>,
    pub mu: f64,
}

impl Regime {
    fn classify(pi: DVector<f64>, mu: f64, defective: bool, tol_drift: f64) -> Self {
        let tag = if defective {
            RegimeTag::C2Defective
        } else if mu.abs() < tol_drift {
            RegimeTag::C1ZeroDrift
        } else if mu < 0.0 {
            RegimeTag::C1NegativeDrift
        } else {
            RegimeTag::C2PositiveDrift
        };
        Regime { tag, pi, mu }
    }

    /// Downward first passage is certain.
    pub fn is_c1(&self) -> bool {
        matches!(self.tag, RegimeTag::C1ZeroDrift | RegimeTag::C1NegativeDrift)
    }

    pub fn is_transient(&self) -> bool {
        self.tag != RegimeTag::C1ZeroDrift
    }
}

fn check_generator_offdiag(q: &Mat) -> Result<()> {
    for i in 0..q.nrows() {
        for j in 0..q.ncols() {
            if i != j && q[(i, j)] < 0.0 {
                return Err(Error::NegativeRate {
                    block: 0,
                    row: i,
                    col: j,
                    value: q[(i, j)],
                });
            }
        }
    }
    Ok(())
}

fn generator_irreducible(q: &Mat) -> bool {
    let n = q.nrows();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i && q[(i, j)] > 0.0).collect())
        .collect();
    linalg::strongly_connected(&adj)
}

/// Turns row sums of a (possibly defective) rate matrix into killing rates.
fn killing_from_row_sums(total: &Mat) -> Result<DVector<f64>> {
    let scale = linalg::max_abs(total).max(1.0);
    let n = total.nrows();
    let mut q = DVector::zeros(n);
    for i in 0..n {
        let s: f64 = total.row(i).sum();
        if s > ROW_SUM_TOL * scale {
            return Err(Error::RowSumExceedsZero { row: i, sum: s });
        }
        q[i] = if s.abs() <= ROW_SUM_TOL * scale { 0.0 } else { -s };
    }
    Ok(q)
}

fn check_extra_killing(n: usize, extra: &[f64]) -> Result<()> {
    if extra.len() != n {
        return Err(Error::InvalidArgument(format!(
            "extra killing has length {}, expected {n}",
            extra.len()
        )));
    }
    if let Some(v) = extra.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "extra killing rates must be finite and non-negative (got {v})"
        )));
    }
    Ok(())
}

/// Lattice MAP, skip-free downwards, with finite upward jump support `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeModel {
    // blocks[m + 1] = A_m for m = -1..=M
    blocks: Vec<Mat>,
    kill: DVector<f64>,
}

impl LatticeModel {
    /// Validates a block family `[A_{-1}, A_0, ..., A_M]`.
    pub fn new(blocks: Vec<Mat>) -> Result<Self> {
        if blocks.len() < 2 {
            return Err(Error::InvalidModel(
                "at least the blocks A[-1] and A[0] are required".into(),
            ));
        }
        let n = blocks[0].nrows();
        if n == 0 {
            return Err(Error::InvalidModel("zero phases".into()));
        }
        for (idx, b) in blocks.iter().enumerate() {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::InvalidModel(format!(
                    "block A[{}] is {}x{}, expected {n}x{n}",
                    idx as i64 - 1,
                    b.nrows(),
                    b.ncols()
                )));
            }
            if b.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "block A[{}] has non-finite entries",
                    idx as i64 - 1
                )));
            }
        }
        for (idx, b) in blocks.iter().enumerate() {
            let m = idx as i64 - 1;
            for i in 0..n {
                for j in 0..n {
                    if (m != 0 || i != j) && b[(i, j)] < 0.0 {
                        return Err(Error::NegativeRate {
                            block: m,
                            row: i,
                            col: j,
                            value: b[(i, j)],
                        });
                    }
                }
            }
        }
        for i in 0..n {
            let d = blocks[1][(i, i)];
            if d >= 0.0 {
                return Err(Error::BadDiagonal { row: i, value: d });
            }
        }
        let total = blocks.iter().fold(Mat::zeros(n, n), |acc, b| acc + b);
        let kill = killing_from_row_sums(&total)?;
        if !generator_irreducible(&total) {
            return Err(Error::ReducibleGenerator);
        }
        let model = LatticeModel { blocks, kill };
        if !model.chain_irreducible() {
            return Err(Error::ReducibleChain);
        }
        Ok(model)
    }

    /// Strong connectivity of the level/phase transition graph restricted to
    /// levels `-(M+1)..=M+1`, without wrap-around.
    fn chain_irreducible(&self) -> bool {
        let n = self.n_phases();
        let m_max = self.max_jump() as i64;
        let lo = -(m_max + 1);
        let hi = m_max + 1;
        let width = (hi - lo + 1) as usize;
        let idx = |level: i64, phase: usize| ((level - lo) as usize) * n + phase;
        let mut adj = vec![Vec::new(); width * n];
        for level in lo..=hi {
            for i in 0..n {
                for (bidx, b) in self.blocks.iter().enumerate() {
                    let m = bidx as i64 - 1;
                    let target = level + m;
                    if target < lo || target > hi {
                        continue;
                    }
                    for j in 0..n {
                        if (m != 0 || i != j) && b[(i, j)] > 0.0 {
                            adj[idx(level, i)].push(idx(target, j));
                        }
                    }
                }
            }
        }
        linalg::strongly_connected(&adj)
    }

    pub fn n_phases(&self) -> usize {
        self.blocks[0].nrows()
    }

    /// Largest upward jump `M`.
    pub fn max_jump(&self) -> usize {
        self.blocks.len() - 2
    }

    /// Block `A_m`, or `None` outside `-1..=M`.
    pub fn block(&self, m: i64) -> Option<&Mat> {
        if m < -1 {
            return None;
        }
        self.blocks.get((m + 1) as usize)
    }

    /// All blocks, `blocks()[m + 1] = A_m`.
    pub fn blocks(&self) -> &[Mat] {
        &self.blocks
    }

    pub fn a_minus1(&self) -> &Mat {
        &self.blocks[0]
    }

    pub fn a0(&self) -> &Mat {
        &self.blocks[1]
    }

    pub fn kill_rates(&self) -> &DVector<f64> {
        &self.kill
    }

    pub fn is_defective(&self) -> bool {
        self.kill.iter().any(|&q| q > 0.0)
    }

    /// `Q = F(1) = sum_m A_m`; defective when killing is present.
    pub fn generator(&self) -> Mat {
        let n = self.n_phases();
        self.blocks.iter().fold(Mat::zeros(n, n), |acc, b| acc + b)
    }

    /// `Q + Delta_q`.
    pub fn conservative_generator(&self) -> Mat {
        self.generator() + Mat::from_diagonal(&self.kill)
    }

    /// Diagonal of `-A_0`, the total event rates per phase.
    pub fn event_rates(&self) -> DVector<f64> {
        -self.a0().diagonal()
    }

    /// `sum_k k A_k`.
    pub fn mean_jump_matrix(&self) -> Mat {
        let n = self.n_phases();
        self.blocks
            .iter()
            .enumerate()
            .fold(Mat::zeros(n, n), |acc, (idx, b)| acc + b * (idx as f64 - 1.0))
    }

    pub fn drift_and_pi(&self) -> Result<Regime> {
        self.drift_and_pi_with_tol(TOL_DRIFT)
    }

    pub fn drift_and_pi_with_tol(&self, tol_drift: f64) -> Result<Regime> {
        let pi = linalg::stationary(&self.conservative_generator())?;
        let ones = DVector::from_element(self.n_phases(), 1.0);
        let mu = (pi.transpose() * self.mean_jump_matrix() * ones)[(0, 0)];
        Ok(Regime::classify(pi, mu, self.is_defective(), tol_drift))
    }

    /// Adds killing `q'` by lowering the diagonal of `A_0`.
    pub fn with_killing(&self, extra: &[f64]) -> Result<Self> {
        check_extra_killing(self.n_phases(), extra)?;
        let mut blocks = self.blocks.clone();
        for (i, q) in extra.iter().enumerate() {
            blocks[1][(i, i)] -= q;
        }
        let mut kill = self.kill.clone();
        for (i, q) in extra.iter().enumerate() {
            kill[i] += q;
        }
        Ok(LatticeModel { blocks, kill })
    }

    /// Time reversal `A_m -> Delta_pi^{-1} A_m^T Delta_pi`, with `pi` the
    /// stationary law of `Q + Delta_q`. Killing rates are preserved.
    pub fn reverse(&self) -> Result<Self> {
        let pi = linalg::stationary(&self.conservative_generator())?;
        let blocks = self
            .blocks
            .iter()
            .map(|b| conjugate_transpose_by(b, &pi))
            .collect();
        LatticeModel::new(blocks)
    }

    /// `F(z) = z sum_m z^m A_m`.
    pub fn f_of_z(&self, z: Complex64) -> Result<CMat> {
        if z == Complex64::new(0.0, 0.0) {
            return Err(Error::ZeroArgument);
        }
        let n = self.n_phases();
        let mut acc = CMat::zeros(n, n);
        let mut zp = Complex64::new(1.0, 0.0);
        for b in &self.blocks {
            acc += linalg::to_complex(b) * zp;
            zp *= z;
        }
        Ok(acc)
    }

    /// Real-argument version of [`f_of_z`](Self::f_of_z).
    pub fn f_real(&self, z: f64) -> Result<Mat> {
        if z == 0.0 {
            return Err(Error::ZeroArgument);
        }
        let n = self.n_phases();
        let mut acc = Mat::zeros(n, n);
        let mut zp = 1.0;
        for b in &self.blocks {
            acc += b * zp;
            zp *= z;
        }
        Ok(acc)
    }
}

/// `Delta_pi^{-1} B^T Delta_pi`.
pub(crate) fn conjugate_transpose_by(b: &Mat, pi: &DVector<f64>) -> Mat {
    let n = b.nrows();
    Mat::from_fn(n, n, |i, j| b[(j, i)] * pi[j] / pi[i])
}

/// Markov-modulated Brownian motion: per-phase drift and variance, a
/// conservative phase generator and killing rates.
#[derive(Debug, Clone, PartialEq)]
pub struct MmbmModel {
    drift: DVector<f64>,
    sigma2: DVector<f64>,
    generator: Mat,
    kill: DVector<f64>,
}

impl MmbmModel {
    /// `generator` may be defective; its row-sum deficit becomes killing.
    pub fn new(drift: Vec<f64>, sigma2: Vec<f64>, generator: Mat, extra_kill: Option<Vec<f64>>) -> Result<Self> {
        let n = drift.len();
        if n == 0 {
            return Err(Error::InvalidModel("zero phases".into()));
        }
        if sigma2.len() != n || generator.nrows() != n || generator.ncols() != n {
            return Err(Error::InvalidModel("inconsistent phase counts".into()));
        }
        if drift.iter().chain(sigma2.iter()).chain(generator.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        if let Some((i, s)) = sigma2.iter().enumerate().find(|(_, s)| **s < 0.0) {
            return Err(Error::InvalidModel(format!("negative variance {s} in phase {i}")));
        }
        check_generator_offdiag(&generator)?;
        let mut kill = killing_from_row_sums(&generator)?;
        let mut conservative = generator;
        for i in 0..n {
            conservative[(i, i)] += kill[i];
        }
        if let Some(extra) = extra_kill {
            check_extra_killing(n, &extra)?;
            for (k, e) in kill.iter_mut().zip(extra) {
                *k += e;
            }
        }
        if !generator_irreducible(&conservative) {
            return Err(Error::ReducibleGenerator);
        }
        for i in 0..n {
            if sigma2[i] == 0.0 && drift[i] >= 0.0 {
                return Err(Error::SubordinatorPhase {
                    phase: i,
                    drift: drift[i],
                });
            }
        }
        Ok(MmbmModel {
            drift: DVector::from_vec(drift),
            sigma2: DVector::from_vec(sigma2),
            generator: conservative,
            kill,
        })
    }

    pub fn n_phases(&self) -> usize {
        self.drift.len()
    }

    pub fn drift(&self) -> &DVector<f64> {
        &self.drift
    }

    pub fn sigma2(&self) -> &DVector<f64> {
        &self.sigma2
    }

    /// Conservative phase generator.
    pub fn generator(&self) -> &Mat {
        &self.generator
    }

    pub fn kill_rates(&self) -> &DVector<f64> {
        &self.kill
    }

    /// `Q - Delta_q`.
    pub fn defective_generator(&self) -> Mat {
        &self.generator - Mat::from_diagonal(&self.kill)
    }

    pub fn is_defective(&self) -> bool {
        self.kill.iter().any(|&q| q > 0.0)
    }

    pub fn all_brownian(&self) -> bool {
        self.sigma2.iter().all(|&s| s > 0.0)
    }

    pub fn drift_and_pi(&self) -> Result<Regime> {
        self.drift_and_pi_with_tol(TOL_DRIFT)
    }

    pub fn drift_and_pi_with_tol(&self, tol_drift: f64) -> Result<Regime> {
        let pi = linalg::stationary(&self.generator)?;
        let mu = pi.dot(&self.drift);
        Ok(Regime::classify(pi, mu, self.is_defective(), tol_drift))
    }

    pub fn with_killing(&self, extra: &[f64]) -> Result<Self> {
        check_extra_killing(self.n_phases(), extra)?;
        let mut out = self.clone();
        for (k, e) in out.kill.iter_mut().zip(extra) {
            *k += e;
        }
        Ok(out)
    }

    /// Time reversal: drifts and variances unchanged, generator conjugated by
    /// the stationary law.
    pub fn reverse(&self) -> Result<Self> {
        let pi = linalg::stationary(&self.generator)?;
        let q = conjugate_transpose_by(&self.generator, &pi);
        MmbmModel::new(
            self.drift.iter().copied().collect(),
            self.sigma2.iter().copied().collect(),
            q,
            Some(self.kill.iter().copied().collect()),
        )
    }

    /// The level-negated process `(-X, J)`.
    pub fn negated(&self) -> Result<Self> {
        MmbmModel::new(
            self.drift.iter().map(|a| -a).collect(),
            self.sigma2.iter().copied().collect(),
            self.generator.clone(),
            Some(self.kill.iter().copied().collect()),
        )
    }

    /// `F(alpha) = 1/2 Delta_sigma2 alpha^2 + Delta_a alpha + Q - Delta_q`.
    pub fn f_of_alpha(&self, alpha: Complex64) -> CMat {
        let n = self.n_phases();
        let mut f = linalg::to_complex(&self.defective_generator());
        for i in 0..n {
            f[(i, i)] += alpha * alpha * (0.5 * self.sigma2[i]) + alpha * self.drift[i];
        }
        f
    }

    pub fn f_real(&self, alpha: f64) -> Mat {
        let mut f = self.defective_generator();
        for i in 0..self.n_phases() {
            f[(i, i)] += 0.5 * self.sigma2[i] * alpha * alpha + self.drift[i] * alpha;
        }
        f
    }
}

/// Either model class, as read from a model file.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Lattice(LatticeModel),
    Mmbm(MmbmModel),
}

impl Model {
    pub fn n_phases(&self) -> usize {
        match self {
            Model::Lattice(m) => m.n_phases(),
            Model::Mmbm(m) => m.n_phases(),
        }
    }

    pub fn drift_and_pi(&self) -> Result<Regime> {
        match self {
            Model::Lattice(m) => m.drift_and_pi(),
            Model::Mmbm(m) => m.drift_and_pi(),
        }
    }
}

/// Scalar birth-death lattice model with up rate `up` and down rate `down`.
pub fn birth_death(up: f64, down: f64) -> Result<LatticeModel> {
    LatticeModel::new(vec![
        Mat::from_element(1, 1, down),
        Mat::from_element(1, 1, -(up + down)),
        Mat::from_element(1, 1, up),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_like_model() -> LatticeModel {
        LatticeModel::new(vec![
            Mat::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.3, 0.8, 0.1, 0.0, 0.5, 1.2]),
            Mat::from_row_slice(3, 3, &[-3.0, 0.5, 0.4, 0.2, -2.6, 0.3, 0.6, 0.1, -3.1]),
            Mat::from_row_slice(3, 3, &[0.4, 0.1, 0.2, 0.3, 0.2, 0.1, 0.2, 0.3, 0.2]),
            Mat::from_row_slice(3, 3, &[0.2, 0.0, 0.0, 0.0, 0.2, 0.1, 0.0, 0.0, 0.0]),
        ])
        .unwrap()
    }

    #[test]
    fn bd12_is_valid_non_defective() {
        let m = birth_death(1.0, 2.0).unwrap();
        assert_eq!(m.kill_rates()[0], 0.0);
        assert_eq!(m.max_jump(), 1);
    }

    #[test]
    fn positive_diagonal_rejected() {
        let r = LatticeModel::new(vec![Mat::from_element(1, 1, 0.0), Mat::from_element(1, 1, 1.0)]);
        assert!(matches!(r, Err(Error::BadDiagonal { .. })));
    }

    #[test]
    fn negative_rate_rejected() {
        let r = LatticeModel::new(vec![
            Mat::from_element(1, 1, -1.0),
            Mat::from_element(1, 1, -1.0),
            Mat::from_element(1, 1, 1.0),
        ]);
        assert!(matches!(r, Err(Error::NegativeRate { block: -1, .. })));
    }

    #[test]
    fn positive_row_sum_rejected() {
        let r = LatticeModel::new(vec![
            Mat::from_element(1, 1, 2.0),
            Mat::from_element(1, 1, -1.0),
            Mat::from_element(1, 1, 1.0),
        ]);
        assert!(matches!(r, Err(Error::RowSumExceedsZero { .. })));
    }

    #[test]
    fn level_free_chain_is_reducible() {
        let r = LatticeModel::new(vec![
            Mat::zeros(2, 2),
            Mat::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -2.0]),
        ]);
        assert!(matches!(r, Err(Error::ReducibleChain)));
    }

    #[test]
    fn reducible_generator_rejected() {
        let r = LatticeModel::new(vec![
            Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            Mat::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, -2.0]),
            Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
        ]);
        assert!(matches!(r, Err(Error::ReducibleGenerator)));
    }

    #[test]
    fn drift_of_birth_death() {
        let r = birth_death(1.0, 2.0).unwrap().drift_and_pi().unwrap();
        assert_eq!(r.tag, RegimeTag::C1NegativeDrift);
        assert!((r.mu + 1.0).abs() < 1e-15);
        assert!((r.pi[0] - 1.0).abs() < 1e-15);
        let r = birth_death(2.0, 1.0).unwrap().drift_and_pi().unwrap();
        assert_eq!(r.tag, RegimeTag::C2PositiveDrift);
        assert!((r.mu - 1.0).abs() < 1e-15);
        let r = birth_death(1.0, 1.0).unwrap().drift_and_pi().unwrap();
        assert_eq!(r.tag, RegimeTag::C1ZeroDrift);
        assert_eq!(r.mu, 0.0);
    }

    #[test]
    fn killing_injection() {
        let m = birth_death(1.0, 2.0).unwrap();
        assert_eq!(m.with_killing(&[0.0]).unwrap(), m);
        let k = m.with_killing(&[1.0]).unwrap();
        assert_eq!(k.a0()[(0, 0)], -4.0);
        assert_eq!(k.kill_rates()[0], 1.0);
        assert_eq!(k.drift_and_pi().unwrap().tag, RegimeTag::C2Defective);
        let base = random_like_model();
        let killed = base.with_killing(&[0.3, 0.0, 1.0]).unwrap();
        let p0 = base.drift_and_pi().unwrap().pi;
        let p1 = killed.drift_and_pi().unwrap().pi;
        assert!((p0 - p1).amax() < 1e-14);
    }

    #[test]
    fn killed_model_round_trips_through_constructor() {
        let killed = random_like_model().with_killing(&[0.3, 0.0, 1.0]).unwrap();
        let rebuilt = LatticeModel::new(killed.blocks().to_vec()).unwrap();
        assert!((rebuilt.kill_rates() - killed.kill_rates()).amax() < 1e-14);
    }

    #[test]
    fn reversal_properties() {
        let m = birth_death(1.0, 2.0).unwrap();
        assert_eq!(m.reverse().unwrap(), m);
        let m = random_like_model().with_killing(&[0.0, 0.4, 0.0]).unwrap();
        let r = m.reverse().unwrap();
        let rr = r.reverse().unwrap();
        for (a, b) in m.blocks().iter().zip(rr.blocks()) {
            assert!((a - b).amax() < 1e-12);
        }
        assert!((r.kill_rates() - m.kill_rates()).amax() < 1e-13);
        let pi = m.drift_and_pi().unwrap().pi;
        // pi Q_hat = 0 by direct multiplication
        let qhat = r.conservative_generator();
        assert!((pi.transpose() * qhat).amax() < 1e-14);
        let mu = random_like_model().drift_and_pi().unwrap().mu;
        let mu_hat = random_like_model().reverse().unwrap().drift_and_pi().unwrap().mu;
        assert!((mu - mu_hat).abs() < 1e-12);
    }

    #[test]
    fn generating_function_values() {
        let m = birth_death(1.0, 2.0).unwrap();
        assert_eq!(m.f_real(1.0).unwrap()[(0, 0)], 0.0);
        assert!((m.f_real(0.5).unwrap()[(0, 0)] - 0.75).abs() < 1e-15);
        assert!(matches!(m.f_of_z(Complex64::new(0.0, 0.0)), Err(Error::ZeroArgument)));
        let b = random_like_model().with_killing(&[0.1, 0.2, 0.3]).unwrap();
        let row = b.f_real(1.0).unwrap() * DVector::from_element(3, 1.0);
        assert!((row + b.kill_rates()).amax() < 1e-14);
        let mm = MmbmModel::new(vec![-1.0], vec![2.0], Mat::zeros(1, 1), Some(vec![1.0])).unwrap();
        assert_eq!(mm.f_real(1.0)[(0, 0)], -1.0);
    }

    #[test]
    fn mmbm_validation() {
        let r = MmbmModel::new(vec![1.0], vec![0.0], Mat::zeros(1, 1), None);
        assert!(matches!(r, Err(Error::SubordinatorPhase { phase: 0, .. })));
        let ok = MmbmModel::new(vec![-1.0], vec![0.0], Mat::zeros(1, 1), None).unwrap();
        assert!(!ok.all_brownian());
        // defective generator: deficit becomes killing
        let m = MmbmModel::new(
            vec![-1.0, 0.5],
            vec![1.0, 2.0],
            Mat::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -1.0]),
            None,
        )
        .unwrap();
        assert_eq!(m.kill_rates()[0], 1.0);
        assert_eq!(m.generator()[(0, 0)], -1.0);
        let rev = m.reverse().unwrap().reverse().unwrap();
        assert!((rev.generator() - m.generator()).amax() < 1e-12);
    }
}
