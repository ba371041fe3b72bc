//! Joint law of the running maximum (or minimum) and the position at the
//! killing time, for defective lattice models.
//!
//! Cells are indexed by `(m, l)`: for the maximum, `P[max = m, X_zeta = m - l]`;
//! for the minimum, `P[min = -m, X_zeta = -m + l]`. `(X_zeta, J_zeta)` is the
//! state just before killing.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fluctuation::LatticeAnalysis;
use crate::linalg::{self, Mat};
use crate::taboo::{geometric_tail, TabooTables};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Max,
    Min,
}

#[derive(Debug, Clone)]
pub struct ExtremaCell {
    pub m: usize,
    pub l: usize,
    pub prob: Mat,
}

#[derive(Debug, Clone)]
pub struct ExtremaLaw {
    pub direction: Direction,
    pub cells: Vec<ExtremaCell>,
    pub m_horizon: usize,
    pub l_horizon: usize,
    /// Largest row total over the grid.
    pub captured_mass: f64,
    /// Per-row mass outside the grid, bounded above.
    pub tail_bound: f64,
    /// Per-row totals over the grid.
    pub row_mass: Vec<f64>,
}

fn require_defective(a: &LatticeAnalysis) -> Result<()> {
    if !a.model.is_defective() {
        return Err(Error::NotDefective);
    }
    Ok(())
}

fn kill_diag(a: &LatticeAnalysis) -> Mat {
    Mat::from_diagonal(a.model.kill_rates())
}

/// `P[max = m, X_zeta = m - l, J_zeta] = Phi(m) R^l Delta_q`.
pub fn max_at_killing(a: &LatticeAnalysis, m: usize, l: usize) -> Result<Mat> {
    require_defective(a)?;
    Ok(a.tables.phi(m)? * linalg::mat_pow(&a.fund.r, l) * kill_diag(a))
}

/// `G^m E[L(l, tau_{-1})] Delta_q` with `E[L(l, tau_{-1})] = H(l) - G H(l+1)`.
pub fn min_at_killing(a: &LatticeAnalysis, m: usize, l: usize) -> Result<Mat> {
    require_defective(a)?;
    let f = &a.fund;
    let occ = f.occupation_at_level(l as i64)? - &f.g * f.occupation_at_level(l as i64 + 1)?;
    Ok(linalg::mat_pow(&f.g, m) * occ * kill_diag(a))
}

/// Scale route `G^m (G W(l+1) - W(l)) Delta_q`.
pub fn min_at_killing_scale(a: &LatticeAnalysis, m: usize, l: usize) -> Result<Mat> {
    require_defective(a)?;
    let s = a.scale()?;
    let g = &a.fund.g;
    let occ = g * s.w(l as i64 + 1)? - s.w(l as i64)?;
    Ok(linalg::mat_pow(g, m) * occ * kill_diag(a))
}

fn column_max(v: &Mat) -> f64 {
    v.iter().cloned().fold(0.0, f64::max)
}

/// Tabulates the law on a square grid, doubling the horizon until the mass
/// outside the grid is below `tail_tol` or `max_horizon` is reached.
pub fn extrema_law(a: &LatticeAnalysis, direction: Direction, tail_tol: f64, max_horizon: usize) -> Result<ExtremaLaw> {
    require_defective(a)?;
    let n = a.model.n_phases();
    let id = Mat::identity(n, n);
    let ones = Mat::from_element(n, 1, 1.0);
    let q = kill_diag(a);
    let f = &a.fund;
    let mut h = 16usize.min(max_horizon.max(1));
    loop {
        let (cells, tail) = match direction {
            Direction::Max => {
                // rows of Phi(m) R^l Delta_q 1 summed over l > L are exact;
                // the m > M remainder is extrapolated from the decay of Phi
                let tables = TabooTables::build(&a.model, f, h)?;
                let ir = linalg::inverse(&(&id - &f.r), "I - R")?;
                let r_pows: Vec<Mat> = (0..=h).map(|l| linalg::mat_pow(&f.r, l)).collect();
                let mut cells = Vec::with_capacity((h + 1) * (h + 1));
                let mut beyond_l = Mat::zeros(n, 1);
                for m in 0..=h {
                    let phi = &tables.phi[m];
                    for (l, rp) in r_pows.iter().enumerate() {
                        cells.push(ExtremaCell {
                            m,
                            l,
                            prob: phi * rp * &q,
                        });
                    }
                    beyond_l += phi * &r_pows[h] * &f.r * &ir * &q * &ones;
                }
                let norms: Vec<f64> = tables.phi.iter().map(linalg::norm_inf).collect();
                let beyond_m = geometric_tail(&norms) * column_max(&(&ir * &q * &ones));
                (cells, column_max(&beyond_l) + beyond_m)
            }
            Direction::Min => {
                let levels = f.occupation_levels(h + 1)?;
                let ig = linalg::inverse(&(&id - &f.g), "I - G")?;
                let occ: Vec<Mat> = (0..=h).map(|l| &levels[l] - &f.g * &levels[l + 1]).collect();
                let g_pows: Vec<Mat> = (0..=h).map(|m| linalg::mat_pow(&f.g, m)).collect();
                let mut cells = Vec::with_capacity((h + 1) * (h + 1));
                for (m, gp) in g_pows.iter().enumerate() {
                    for (l, o) in occ.iter().enumerate() {
                        cells.push(ExtremaCell {
                            m,
                            l,
                            prob: gp * o * &q,
                        });
                    }
                }
                // the killed-before-tau_{-1} mass is at most one per row
                let beyond_m = linalg::norm_inf(&(&g_pows[h] * &f.g * &ig));
                let norms: Vec<f64> = occ.iter().map(|o| linalg::norm_inf(&(o * &q))).collect();
                let beyond_l = linalg::norm_inf(&ig) * geometric_tail(&norms);
                (cells, beyond_m + beyond_l)
            }
        };
        if tail < tail_tol || h >= max_horizon {
            let mut row_mass = vec![0.0; n];
            for c in &cells {
                for (i, r) in row_mass.iter_mut().enumerate() {
                    *r += c.prob.row(i).sum();
                }
            }
            return Ok(ExtremaLaw {
                direction,
                cells,
                m_horizon: h,
                l_horizon: h,
                captured_mass: row_mass.iter().cloned().fold(0.0, f64::max),
                tail_bound: tail,
                row_mass,
            });
        }
        h = (2 * h).min(max_horizon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::birth_death;
    use crate::solvers::SolveOptions;

    fn killed_bd() -> LatticeAnalysis {
        let m = birth_death(1.0, 2.0).unwrap().with_killing(&[1.0]).unwrap();
        LatticeAnalysis::new(m, &SolveOptions::default(), 30).unwrap()
    }

    #[test]
    fn not_defective_rejected() {
        let a = LatticeAnalysis::new(birth_death(1.0, 2.0).unwrap(), &SolveOptions::default(), 5).unwrap();
        assert!(matches!(max_at_killing(&a, 0, 0), Err(Error::NotDefective)));
        assert!(matches!(min_at_killing(&a, 0, 0), Err(Error::NotDefective)));
    }

    #[test]
    fn routes_agree_and_mass_is_one() {
        let a = killed_bd();
        for m in 0..5 {
            for l in 0..5 {
                let x = min_at_killing(&a, m, l).unwrap();
                let y = min_at_killing_scale(&a, m, l).unwrap();
                assert!((x[(0, 0)] - y[(0, 0)]).abs() < 1e-12);
            }
        }
        for dir in [Direction::Max, Direction::Min] {
            let law = extrema_law(&a, dir, 1e-10, 4096).unwrap();
            let total = law.captured_mass + law.tail_bound;
            assert!(total >= 1.0 - 1e-6 && total <= 1.0 + 1e-9, "{dir:?}: {total}");
        }
    }
}
