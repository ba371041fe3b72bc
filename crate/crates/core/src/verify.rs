//! Cross-identity checks and the seeded random-model generator behind the
//! `verify` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extrema::{self, Direction};
use crate::fluctuation::LatticeAnalysis;
use crate::linalg::{self, Mat};
use crate::mmbm::MmbmAnalysis;
use crate::model::{conjugate_transpose_by, LatticeModel, MmbmModel};
use crate::solvers::{self, MmbmFundamentals, SolveOptions};

/// Default seed of the random verification suite.
pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub residual: Option<f64>,
    pub limit: Option<f64>,
    pub note: Option<String>,
}

impl Check {
    fn measure(name: &str, residual: f64, limit: f64) -> Self {
        Check {
            name: name.to_string(),
            status: if residual <= limit { Status::Pass } else { Status::Fail },
            residual: Some(residual),
            limit: Some(limit),
            note: None,
        }
    }

    fn flag(name: &str, ok: bool, note: &str) -> Self {
        Check {
            name: name.to_string(),
            status: if ok { Status::Pass } else { Status::Fail },
            residual: None,
            limit: None,
            note: Some(note.to_string()),
        }
    }

    fn skip(name: &str, reason: &str) -> Self {
        Check {
            name: name.to_string(),
            status: Status::Skip,
            residual: None,
            limit: None,
            note: Some(reason.to_string()),
        }
    }

    fn failed(name: &str, err: &Error) -> Self {
        Check {
            name: name.to_string(),
            status: Status::Fail,
            residual: None,
            limit: None,
            note: Some(err.to_string()),
        }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.status != Status::Fail)
}

/// Collects checks while mapping computation errors to failures.
struct Suite(Vec<Check>);

impl Suite {
    fn add(&mut self, name: &str, limit: f64, f: impl FnOnce() -> Result<f64>) {
        self.0.push(match f() {
            Ok(r) => Check::measure(name, r, limit),
            Err(e) => Check::failed(name, &e),
        });
    }

    fn add_gated(&mut self, name: &str, gate: std::result::Result<(), &str>, limit: f64, f: impl FnOnce() -> Result<f64>) {
        match gate {
            Ok(()) => self.add(name, limit, f),
            Err(reason) => self.0.push(Check::skip(name, reason)),
        }
    }
}

fn diff(a: &Mat, b: &Mat) -> f64 {
    linalg::max_abs(&(a - b))
}

fn norm(a: &Mat) -> f64 {
    linalg::norm_inf(a)
}

fn inv_norm(a: &Mat) -> f64 {
    linalg::inverse(a, "").map(|i| linalg::norm_inf(&i)).unwrap_or(f64::INFINITY)
}

/// Condition number in the infinity norm, infinite when the pivot check fails.
fn cond(a: &Mat) -> f64 {
    norm(a) * inv_norm(a)
}

/// Route discrepancy relative to the rounding an ill-conditioned route can
/// produce: cases with `kappa` above `1e6` are allowed `1e-14 kappa`.
fn scaled(d: f64, kappa: f64) -> f64 {
    d / (1e-6 * kappa).max(1.0)
}

/// Largest distance between the spectra under greedy nearest matching.
fn spectrum_distance(a: &Mat, b: &Mat) -> f64 {
    let ea = linalg::eigenvalues(a);
    let mut eb = linalg::eigenvalues(b);
    let mut worst: f64 = 0.0;
    for x in ea {
        let (idx, d) = eb
            .iter()
            .enumerate()
            .map(|(i, y)| (i, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        worst = worst.max(d);
        eb.swap_remove(idx);
    }
    worst
}

/// Every applicable identity for a lattice model. Horizon-dependent checks
/// use level indices up to `horizon`.
pub fn verify_lattice(model: &LatticeModel, opts: &SolveOptions, horizon: usize) -> Vec<Check> {
    let mut s = Suite(Vec::new());
    let horizon = horizon.max(12);
    let an = match LatticeAnalysis::new(model.clone(), opts, horizon) {
        Ok(a) => a,
        Err(e) => return vec![Check::failed("fundamentals", &e)],
    };
    let f = &an.fund;
    let n = model.n_phases();
    let transient = f.h.is_some();
    let gate_t: std::result::Result<(), &str> = if transient { Ok(()) } else { Err("null-recurrent") };
    let gate_w: std::result::Result<(), &str> = if an.scale.is_some() { Ok(()) } else { Err("A[-1] singular") };
    let r_nonsingular = linalg::Lu::new(&f.r, "R").is_ok();
    let g_nonsingular = linalg::Lu::new(&f.g, "G").is_ok();
    let gate_w_r: std::result::Result<(), &str> = match (an.scale.is_some(), r_nonsingular) {
        (true, true) => Ok(()),
        (false, _) => Err("A[-1] singular"),
        (_, false) => Err("R singular"),
    };

    s.add("G equation", 1e-9, || Ok(solvers::residual_g(model, &f.g)));
    s.add("R equation", 1e-9, || Ok(solvers::residual_r(model, &f.r)));
    s.add("R tilde equation", 1e-9, || Ok(crate::taboo::residual_r_tilde(model, &f.r_tilde)));
    s.add("G non-negative", 1e-12, || Ok(f.g.iter().map(|x| (-x).max(0.0)).fold(0.0, f64::max)));
    s.add("R non-negative", 1e-12, || Ok(f.r.iter().map(|x| (-x).max(0.0)).fold(0.0, f64::max)));
    let row_sums: Vec<f64> = (0..n).map(|i| f.g.row(i).sum()).collect();
    if f.regime.is_c1() {
        s.add("G stochastic in C1", 1e-10, || Ok(row_sums.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max)));
    } else {
        let max = row_sums.iter().cloned().fold(0.0, f64::max);
        s.0.push(Check::flag("G strictly substochastic in C2", max < 1.0, &format!("max row sum {max}")));
    }
    s.add("reversal involution", 1e-12, || {
        let back = model.reverse()?.reverse()?;
        Ok(model.blocks().iter().zip(back.blocks()).map(|(a, b)| diff(a, b)).fold(0.0, f64::max))
    });
    s.add("reversed drift", 1e-12, || Ok((model.reverse()?.drift_and_pi()?.mu - f.regime.mu).abs()));
    s.add("duality round trip", 1e-9, || {
        let rev = model.reverse()?;
        // R of the reversed model, transported back, must return G
        let r_rev = solvers::solve_r_lattice(&rev, &f.g, opts)?;
        Ok(diff(&conjugate_transpose_by(&r_rev, &f.regime.pi), &f.g))
    });
    s.add("row sums of F(1)", 1e-12, || {
        let f1 = model.f_real(1.0)?;
        Ok((0..n).map(|i| (f1.row(i).sum() + model.kill_rates()[i]).abs()).fold(0.0, f64::max))
    });

    s.add_gated("spectra of G and R", gate_t, 1e-8, || Ok(spectrum_distance(&f.g, &f.r)));
    s.add_gated("GH = HR", gate_t, 1e-9, || {
        let h = f.h()?;
        Ok(diff(&(&f.g * h), &(h * &f.r)) / linalg::max_abs(h).max(1.0))
    });
    s.add_gated("Xi against H", gate_t, 1e-9, || {
        let h = f.h()?;
        let mut worst: f64 = 0.0;
        for m in 1..=5 {
            let alt = h - f.hitting_matrix(m as i64)? * linalg::mat_pow(&f.g, m) * h;
            worst = worst.max(diff(an.tables.xi(m)?, &alt) / linalg::max_abs(h).max(1.0));
        }
        Ok(worst)
    });
    s.add("Xi telescoping", 1e-10, || {
        let t = &an.tables;
        let mut worst: f64 = 0.0;
        for m in 1..horizon {
            let direct: Mat = (0..m).fold(Mat::zeros(n, n), |acc, nu| acc + &t.phi[nu] * linalg::mat_pow(&f.r, nu));
            worst = worst.max(diff(&t.xi[m], &direct) / linalg::max_abs(&t.xi[m]).max(1.0));
        }
        Ok(worst)
    });
    let gate_theta: std::result::Result<(), &str> = match (transient, r_nonsingular) {
        (true, true) => Ok(()),
        (false, _) => Err("null-recurrent"),
        (_, false) => Err("R singular"),
    };
    s.add_gated("Theta(k) R^k = G^k Xi(k)", gate_theta, 1e-9, || {
        let t = &an.tables;
        let theta = t.theta_h.as_ref().unwrap();
        let mut worst: f64 = 0.0;
        for k in 1..=5 {
            let lhs = &theta[k] * linalg::mat_pow(&f.r, k);
            let rhs = linalg::mat_pow(&f.g, k) * &t.xi[k];
            worst = worst.max(diff(&lhs, &rhs) / linalg::max_abs(&rhs).max(1.0));
        }
        Ok(worst)
    });

    let gate_d: std::result::Result<(), &str> = if an.scale.is_none() {
        Err("A[-1] singular")
    } else if !g_nonsingular {
        Err("G singular")
    } else if an.tables.theta_h.is_none() && an.tables.theta_xi.is_none() {
        Err("Theta unavailable")
    } else {
        Ok(())
    };
    s.add_gated("exit: Xi, W and Theta forms (conditioning-scaled)", gate_d, 1e-8, || {
        let mut worst: f64 = 0.0;
        for a in 0..=4 {
            for b in 0..=4 {
                let d = an.two_sided_exit(a, b)?;
                if let Ok(x) = an.two_sided_exit_scale(a, b) {
                    let w = an.scale()?;
                    let kappa = cond(&w.w((a + b) as i64)?) + norm(&w.w(b as i64)?) * inv_norm(&w.w((a + b) as i64)?);
                    worst = worst.max(scaled(diff(&d, &x), kappa));
                }
                if let Ok(y) = an.two_sided_exit_theta(a, b) {
                    let kappa = cond(&f.g).powi((a + b) as i32);
                    worst = worst.max(scaled(diff(&d, &y), kappa));
                }
            }
        }
        Ok(worst)
    });
    s.add("exit probabilities in [0,1]", 1e-10, || {
        let mut worst: f64 = 0.0;
        for a in 0..=4 {
            for b in 0..=4 {
                let d = an.two_sided_exit(a, b)?;
                for i in 0..n {
                    worst = worst.max(d.row(i).sum() - 1.0);
                }
                worst = worst.max(d.iter().map(|x| -x).fold(0.0, f64::max));
            }
        }
        Ok(worst)
    });
    let probes = an.scale_probe_points();
    match gate_w {
        Ok(()) if !probes.is_empty() => {
            for z in probes.iter().take(2) {
                s.0.push(match an.check_scale_transform(*z) {
                    Ok(c) => Check::measure(&format!("scale transform at z={z:.4}"), c.residual, c.tail_bound + c.rounding + 1e-8),
                    Err(e) => Check::failed("scale transform", &e),
                });
            }
        }
        Ok(()) => s.0.push(Check::skip("scale transform", "empty convergence domain")),
        Err(r) => s.0.push(Check::skip("scale transform", r)),
    }
    s.add_gated("creeping: Phi and W forms (conditioning-scaled)", gate_w_r, 1e-8, || {
        let w = an.scale()?;
        let (r_inv, r_cond) = (inv_norm(&f.r), cond(&f.r));
        let mut worst: f64 = 0.0;
        for m in 1..=5 {
            let Ok(x) = an.creeping_scale(m) else { continue };
            let kappa = norm(&w.w(m as i64)?) * r_inv * r_cond * inv_norm(&w.w(1)?) + cond(&w.w(1)?);
            worst = worst.max(scaled(diff(&an.creeping(m)?, &x), kappa));
        }
        Ok(worst)
    });
    s.add_gated("hit before upcross: Phi and W forms (conditioning-scaled)", gate_w_r, 1e-8, || {
        let w = an.scale()?;
        let (r_inv, r_cond) = (inv_norm(&f.r), cond(&f.r));
        let mut worst: f64 = 0.0;
        for m in 0..=3 {
            for l in 1..=4usize {
                let Ok(x) = an.hit_before_upcross_scale(m, l) else { continue };
                let wl_inv = inv_norm(&w.w(l as i64)?);
                let kappa = norm(&w.w(m as i64)?) * r_inv.powi(l as i32) * l as f64 * r_cond * wl_inv
                    + norm(&w.w((m + l) as i64)?) * wl_inv;
                worst = worst.max(scaled(diff(&an.hit_before_upcross(m, l)?, &x), kappa));
            }
        }
        Ok(worst)
    });
    s.add_gated("creeping <= hit before upcross <= hitting", gate_t, 1e-10, || {
        let mut worst: f64 = 0.0;
        for m in 1..=4 {
            let c = an.creeping(m)?;
            let p = an.hit_before_upcross(m, 3)?;
            let h = f.hitting_matrix(m as i64)?;
            worst = worst.max((&c - &p).max()).max((&p - &h).max());
        }
        Ok(worst)
    });
    let gate_strip: std::result::Result<(), &str> = if transient && an.scale.is_some() {
        Ok(())
    } else {
        Err("needs both routes")
    };
    s.add_gated("strip occupation: two routes (conditioning-scaled)", gate_strip, 1e-8, || {
        let w = an.scale()?;
        let mut worst: f64 = 0.0;
        for (l, m) in [(1, 1), (2, 3), (3, 2)] {
            for k in (1 - l as i64)..(m as i64) {
                let x = an.strip_occupation_transient(k, l, m)?;
                let Ok(y) = an.strip_occupation_scale(k, l, m) else { continue };
                let big = w.w((m + l) as i64)?;
                let kappa = norm(&w.w(m as i64)?) * inv_norm(&big) * norm(&w.w(k + l as i64)?) * cond(&big);
                worst = worst.max(scaled(diff(&x, &y) / linalg::max_abs(&x).max(1.0), kappa));
            }
        }
        Ok(worst)
    });
    s.add("exit mass conservation", 1e-8, || {
        let mut worst: f64 = 0.0;
        for (l, m) in [(1, 1), (2, 3), (3, 2)] {
            worst = worst.max(an.exit_mass_defect(l, m)?);
        }
        Ok(worst)
    });
    s.add("Phi transform at z=0.3", 1e-6, || {
        let (res, tail) = an.tables.phi_transform_residual(model, &f.r, 0.3)?;
        Ok((res - tail).max(0.0))
    });
    let gate_def: std::result::Result<(), &str> = if model.is_defective() { Ok(()) } else { Err("not defective") };
    s.add_gated("sum of Phi against F(1)^-1 (R - I)", gate_def, 1e-8, || {
        let mut k = horizon;
        loop {
            let t = crate::taboo::TabooTables::build(model, f, k)?;
            let (res, tail) = t.phi_transform_residual(model, &f.r, 1.0)?;
            if tail < 1e-10 || k >= 1 << 16 {
                return Ok((res - tail).max(0.0));
            }
            k *= 4;
        }
    });
    s.add_gated("unilateral H transform at z=0.5", gate_t, 1e-8, || {
        let c = an.check_h_transform_unilateral(0.5)?;
        Ok((c.residual - c.tail_bound).max(0.0))
    });
    let fully_killed = model.kill_rates().iter().all(|&q| q > 0.0);
    let gate_ext: std::result::Result<(), &str> = if fully_killed { Ok(()) } else { Err("not killed in every phase") };
    for dir in [Direction::Max, Direction::Min] {
        let name = format!("extrema mass ({dir:?})").to_lowercase();
        s.add_gated(&name, gate_ext, 1e-6, || {
            let law = extrema::extrema_law(&an, dir, 1e-10, 4096)?;
            let total = law.captured_mass + law.tail_bound;
            if total > 1.0 + 1e-9 {
                return Ok(f64::INFINITY);
            }
            Ok((1.0 - total).max(0.0))
        });
    }
    let gate_min: std::result::Result<(), &str> = match (model.is_defective(), an.scale.is_some()) {
        (true, true) => Ok(()),
        (false, _) => Err("not defective"),
        _ => Err("A[-1] singular"),
    };
    s.add_gated("minimum law: two routes (conditioning-scaled)", gate_min, 1e-9, || {
        let w = an.scale()?;
        let mut worst: f64 = 0.0;
        for m in 0..=3 {
            for l in 0..=3 {
                let kappa = norm(&w.w(l as i64 + 1)?) + norm(&w.w(l as i64)?);
                let d = diff(&extrema::min_at_killing(&an, m, l)?, &extrema::min_at_killing_scale(&an, m, l)?);
                worst = worst.max(scaled(d, kappa));
            }
        }
        Ok(worst)
    });
    s.0
}

/// Every applicable identity for an MMBM.
pub fn verify_mmbm(model: &MmbmModel, opts: &SolveOptions) -> Vec<Check> {
    let mut s = Suite(Vec::new());
    let fund = match MmbmFundamentals::solve(model, opts) {
        Ok(f) => f,
        Err(e) => return vec![Check::failed("fundamentals", &e)],
    };
    s.add("G equation", 1e-9, || Ok(solvers::residual_g_mmbm(model, &fund.g)));
    s.add("R equation", 1e-9, || Ok(solvers::residual_r_mmbm(model, &fund.r)));
    s.add("exp(Gx) substochastic", 1e-10, || {
        let mut worst: f64 = 0.0;
        for x in [0.1, 1.0, 10.0] {
            let e = linalg::expm(&(&fund.g * x));
            for i in 0..e.nrows() {
                worst = worst.max(e.row(i).sum() - 1.0);
            }
            worst = worst.max(e.iter().map(|v| -v).fold(0.0, f64::max));
        }
        Ok(worst)
    });
    s.add("reversal involution", 1e-12, || {
        let back = model.reverse()?.reverse()?;
        Ok(diff(back.generator(), model.generator()))
    });
    if !model.all_brownian() {
        s.0.push(Check::skip("scale function identities", "zero-variance phase present"));
        return s.0;
    }
    let an = MmbmAnalysis {
        model: model.clone(),
        fund: fund.clone(),
    };
    let lambda = fund.lambda.clone().unwrap();
    s.add("Lambda equation", 1e-9, || Ok(solvers::residual_g_mmbm(&model.negated()?, &lambda)));
    s.add("exp(Lambda x) semigroup", 1e-10, || {
        let (x, y) = (0.7, 1.9);
        Ok(diff(&an.hitting_up(x + y), &(an.hitting_up(x) * an.hitting_up(y))))
    });
    if fund.h.is_none() {
        s.0.push(Check::skip("H-dependent identities", "null-recurrent"));
        return s.0;
    }
    s.add("H independent of alpha", 1e-9, || Ok(fund.residuals["alpha_independence"]));
    s.add("GH = HR", 1e-9, || {
        let h = fund.h.as_ref().unwrap();
        Ok(diff(&(&fund.g * h), &(h * &fund.r)) / linalg::max_abs(h).max(1.0))
    });
    s.add("creeping limit identity", 1e-8, || {
        let mut worst: f64 = 0.0;
        for x in [0.01, 1.0, 10.0] {
            worst = worst.max(an.creeping_residual(x)?);
        }
        Ok(worst)
    });
    s.add("scale transform by quadrature", 1e-6, || {
        an.transform_quadrature_residual(an.g_abscissa_min() - 1.0)
    });
    s.add("exit probabilities in [0,1]", 1e-10, || {
        let mut worst: f64 = 0.0;
        for a in [0.2, 1.0, 3.0] {
            for b in [0.2, 1.0, 3.0] {
                let d = an.exit(a, b)?;
                for i in 0..d.nrows() {
                    worst = worst.max(d.row(i).sum() - 1.0);
                }
                worst = worst.max(d.iter().map(|v| -v).fold(0.0, f64::max));
            }
        }
        Ok(worst)
    });
    s.0
}

/// Random lattice model: `N` in {2,3,4}, `M` in {1,2,3}, rates uniform on
/// (0,1), killing uniform on (0,1) in every phase for half of the models.
/// The downward block is multiplied by a factor uniform on `(1/4, M(M+1))` so
/// that both drift signs occur.
pub fn random_lattice(rng: &mut impl Rng) -> LatticeModel {
    loop {
        let n = rng.random_range(2..=4usize);
        let m = rng.random_range(1..=3usize);
        let defective = rng.random_bool(0.5);
        let mut blocks: Vec<Mat> = (0..m + 2)
            .map(|_| Mat::from_fn(n, n, |_, _| rng.random::<f64>()))
            .collect();
        let down_scale = rng.random_range(0.25..(m * (m + 1)) as f64);
        blocks[0] *= down_scale;
        for i in 0..n {
            let mut out = 0.0;
            for (idx, b) in blocks.iter().enumerate() {
                for j in 0..n {
                    if !(idx == 1 && j == i) {
                        out += b[(i, j)];
                    }
                }
            }
            let q = if defective { rng.random::<f64>() } else { 0.0 };
            blocks[1][(i, i)] = -(out + q);
        }
        if let Ok(model) = LatticeModel::new(blocks) {
            return model;
        }
    }
}

pub fn random_lattice_models(count: usize, seed: u64) -> Vec<LatticeModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_lattice(&mut rng)).collect()
}
