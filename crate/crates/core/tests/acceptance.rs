//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use skipfree::extrema::{self, Direction};
use skipfree::fluctuation::LatticeAnalysis;
use skipfree::linalg::{self, Mat};
use skipfree::mmbm::MmbmAnalysis;
use skipfree::model::{birth_death, LatticeModel, MmbmModel};
use skipfree::sim::{self, LatticeTarget, MmbmTarget, SimConfig};
use skipfree::solvers::{self, SolveOptions};
use skipfree::verify;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn lattice(blocks: &[&[f64]], n: usize) -> LatticeModel {
    LatticeModel::new(blocks.iter().map(|b| Mat::from_row_slice(n, n, b)).collect()).unwrap()
}

fn opts() -> SolveOptions {
    SolveOptions::default()
}

fn diff(a: &Mat, b: &Mat) -> f64 {
    linalg::max_abs(&(a - b))
}

// 1. birth-death closed forms
fn birth_death_family() -> Outcome {
    let mut worst: f64 = 0.0;
    for (up, down) in [(1.0, 2.0), (2.0, 1.0), (1.0, 3.0), (3.0, 1.0)] {
        let an = LatticeAnalysis::new(birth_death(up, down).unwrap(), &opts(), 30).unwrap();
        let g_exact = f64::min(1.0, down / up);
        worst = worst.max((an.fund.g[(0, 0)] - g_exact).abs());
        worst = worst.max((an.fund.r[(0, 0)] - g_exact).abs());
        worst = worst.max((an.fund.h().unwrap()[(0, 0)] - 1.0 / (up - down).abs()).abs());
        // z / F(z) = z / (up (z - 1)(z - rho)) expanded by partial fractions
        let rho = down / up;
        let w = an.scale().unwrap();
        for k in 1..=30 {
            let exact = (rho.powi(-k) - 1.0) / (up * (1.0 - rho));
            let got = w.w(k as i64).unwrap()[(0, 0)];
            worst = worst.max((got - exact).abs() / exact.abs().max(1.0));
        }
        let r = up / down;
        for a in 0..=10usize {
            for b in 0..=10usize {
                if a + b == 0 {
                    continue;
                }
                let exact = (1.0 - r.powi(b as i32)) / (1.0 - r.powi((a + b) as i32));
                worst = worst.max((an.two_sided_exit(a, b).unwrap()[(0, 0)] - exact).abs());
            }
        }
    }
    outcome(worst < 1e-10, format!("worst error {worst:.2e} (limit 1e-10)"))
}

// 2. identity suite on the random models
fn random_identity_suite() -> Outcome {
    let models = verify::random_lattice_models(50, verify::DEFAULT_SEED);
    let (mut g_eq, mut r_eq, mut ghr, mut theta, mut dab, mut dab_wide) = (0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
    let mut transform_fail = 0;
    let mut transform_runs = 0;
    let mut errors = Vec::new();
    for (idx, m) in models.iter().enumerate() {
        let an = match LatticeAnalysis::new(m.clone(), &opts(), 20) {
            Ok(a) => a,
            Err(e) => {
                errors.push(format!("model {idx}: {e}"));
                continue;
            }
        };
        let f = &an.fund;
        g_eq = g_eq.max(solvers::residual_g(m, &f.g));
        r_eq = r_eq.max(solvers::residual_r(m, &f.r));
        if let Some(h) = &f.h {
            ghr = ghr.max(diff(&(&f.g * h), &(h * &f.r)));
        }
        if an.scale.is_some() {
            for k in 1..=5usize {
                let lhs = an.tables.theta(k).unwrap() * linalg::mat_pow(&f.r, k);
                let rhs = linalg::mat_pow(&f.g, k) * an.tables.xi(k).unwrap();
                theta = theta.max(diff(&lhs, &rhs));
            }
            for a in 0..=4usize {
                for b in 0..=4usize {
                    if a + b == 0 {
                        continue;
                    }
                    let d = an.two_sided_exit(a, b).unwrap();
                    let routes = [an.two_sided_exit_scale(a, b), an.two_sided_exit_theta(a, b)];
                    for r in routes {
                        let e = r.map(|x| diff(&d, &x)).unwrap_or(f64::INFINITY);
                        if a + b <= 2 {
                            dab = dab.max(e);
                        }
                        dab_wide = dab_wide.max(e);
                    }
                }
            }
            let probes = an.scale_probe_points();
            for z in probes.iter().take(2) {
                transform_runs += 1;
                match an.check_scale_transform(*z) {
                    Ok(c) if c.residual <= c.tail_bound + 1e-8 => {}
                    _ => transform_fail += 1,
                }
            }
        }
    }
    let ok = errors.is_empty()
        && g_eq < 1e-9
        && r_eq < 1e-9
        && ghr < 1e-9
        && theta < 1e-9
        && dab < 1e-8
        && transform_fail == 0;
    outcome(
        ok,
        format!(
            "G eq {g_eq:.1e}, R eq {r_eq:.1e}, GH-HR {ghr:.1e}, Theta {theta:.1e}, D (a+b<=2) {dab:.1e} [a,b<=4: {dab_wide:.1e}], \
             transform {}/{} ok, solver errors {}",
            transform_runs - transform_fail,
            transform_runs,
            errors.len()
        ),
    )
}

/// Sim-versus-analytic models: negative drift, defective 3-phase, rank-one
/// `A[-1]`, positive drift, killed birth-death.
fn mc_models() -> Vec<(&'static str, LatticeModel)> {
    vec![
        (
            "negative drift",
            lattice(
                &[
                    &[1.5, 0.2, 0.3, 1.0],
                    &[-2.6, 0.4, 0.5, -2.2],
                    &[0.3, 0.1, 0.2, 0.1],
                    &[0.1, 0.0, 0.0, 0.1],
                ],
                2,
            ),
        ),
        (
            "defective 3-phase",
            lattice(
                &[
                    &[1.0, 0.2, 0.0, 0.0, 0.8, 0.2, 0.3, 0.0, 1.2],
                    &[-2.5, 0.3, 0.2, 0.2, -2.4, 0.4, 0.1, 0.3, -2.8],
                    &[0.5, 0.1, 0.0, 0.2, 0.4, 0.1, 0.0, 0.2, 0.5],
                ],
                3,
            ),
        ),
        (
            "rank-one A[-1]",
            lattice(&[&[0.6, 0.9, 0.4, 0.6], &[-2.5, 0.3, 0.4, -2.0], &[0.4, 0.2, 0.3, 0.2]], 2),
        ),
        (
            "positive drift",
            lattice(
                &[
                    &[0.8, 0.1, 0.2, 0.9],
                    &[-2.0, 0.3, 0.2, -2.1],
                    &[0.3, 0.1, 0.2, 0.3],
                    &[0.0, 0.0, 0.0, 0.0],
                    &[0.4, 0.0, 0.0, 0.3],
                ],
                2,
            ),
        ),
        ("killed birth-death", birth_death(1.0, 2.0).unwrap().with_killing(&[1.0]).unwrap()),
    ]
}

// 3. Monte Carlo agreement
fn monte_carlo() -> Outcome {
    let cfg = SimConfig {
        n_paths: 1_000_000,
        seed: 2024,
        ..SimConfig::default()
    };
    let mut worst: f64 = 0.0;
    let mut worst_at = String::new();
    let mut compared = 0;
    let mut failures = Vec::new();
    for (name, m) in mc_models() {
        let an = LatticeAnalysis::new(m.clone(), &opts(), 40).unwrap();
        let transient_down = an.fund.regime.is_c1() || m.is_defective();
        let reaches_up = m.is_defective() || an.fund.regime.mu > 0.0;
        let mut cases: Vec<(String, LatticeTarget, Mat)> = Vec::new();
        if transient_down {
            cases.push(("G".into(), LatticeTarget::G { k: 1 }, an.fund.g.clone()));
        }
        cases.push(("D(1,2)".into(), LatticeTarget::Exit { a: 1, b: 2 }, an.two_sided_exit(1, 2).unwrap()));
        cases.push((
            "strip(0;2,2)".into(),
            LatticeTarget::StripOccupation { k: 0, l: 2, m: 2 },
            an.strip_occupation(0, 2, 2).unwrap(),
        ));
        if reaches_up {
            cases.push(("creeping(2)".into(), LatticeTarget::Creeping { m: 2 }, an.creeping(2).unwrap()));
        }
        if name == "defective 3-phase" {
            for (dir, mm, l) in [(Direction::Max, 0, 0), (Direction::Max, 1, 1), (Direction::Min, 1, 0), (Direction::Min, 2, 1)] {
                let exact = match dir {
                    Direction::Max => extrema::max_at_killing(&an, mm, l).unwrap(),
                    Direction::Min => extrema::min_at_killing(&an, mm, l).unwrap(),
                };
                let t = LatticeTarget::Extrema {
                    direction: dir,
                    m: mm as u64,
                    l: l as u64,
                };
                cases.push((format!("{dir:?}({mm},{l})"), t, exact));
            }
        }
        for (label, target, exact) in cases {
            match sim::sim_lattice(&m, target, &cfg) {
                Ok(est) => {
                    let z = est.max_z_score(&exact);
                    compared += 1;
                    if z > worst {
                        worst = z;
                        worst_at = format!("{name}/{label}");
                    }
                    if z > 4.0 {
                        failures.push(format!("{name}/{label} z={z:.2}"));
                    }
                }
                Err(e) => failures.push(format!("{name}/{label}: {e}")),
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("{compared} targets, worst z {worst:.2} at {worst_at} (limit 4){}", if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join(", ")) }),
    )
}

// 4. extrema mass conservation
fn extrema_mass() -> Outcome {
    let models = [
        birth_death(1.0, 2.0).unwrap().with_killing(&[1.0]).unwrap(),
        mc_models().swap_remove(1).1,
    ];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for m in models {
        let an = LatticeAnalysis::new(m, &opts(), 16).unwrap();
        for dir in [Direction::Max, Direction::Min] {
            let law = extrema::extrema_law(&an, dir, 1e-10, 4096).unwrap();
            for r in &law.row_mass {
                lo = lo.min(r + law.tail_bound);
                hi = hi.max(r + law.tail_bound);
            }
        }
    }
    outcome(
        lo >= 1.0 - 1e-6 && hi <= 1.0 + 1e-9,
        format!("row mass + tail in [{lo:.12}, {hi:.12}] (need [1-1e-6, 1+1e-9])"),
    )
}

// 5. MMBM
fn mmbm_suite() -> Outcome {
    let mut closed: f64 = 0.0;
    for (a, s2, q) in [(-1.0f64, 2.0f64, 1.0f64), (1.0, 1.0, 0.5), (0.5, 3.0, 2.0), (-0.3, 0.7, 0.1)] {
        let m = MmbmModel::new(vec![a], vec![s2], Mat::zeros(1, 1), Some(vec![q])).unwrap();
        let an = MmbmAnalysis::new(m, &opts()).unwrap();
        let disc = (a * a + 2.0 * s2 * q).sqrt();
        let g = (-a - disc) / s2;
        closed = closed.max((an.fund.g[(0, 0)] - g).abs());
        closed = closed.max((an.fund.h.as_ref().unwrap()[(0, 0)] - 1.0 / disc).abs());
    }
    for (a, s2) in [(-1.0f64, 2.0f64), (0.7, 1.0)] {
        let m = MmbmModel::new(vec![a], vec![s2], Mat::zeros(1, 1), None).unwrap();
        let an = MmbmAnalysis::new(m, &opts()).unwrap();
        let theta = 2.0 * a / s2;
        for (lo, up) in [(0.5, 1.0), (1.0, 2.0), (2.0, 0.3)] {
            // exp(-theta x) is harmonic for the scalar Brownian motion
            let up_first = (1.0 - (theta * lo).exp()) / ((-theta * up).exp() - (theta * lo).exp());
            closed = closed.max((an.exit(lo, up).unwrap()[(0, 0)] - (1.0 - up_first)).abs());
        }
    }
    // slow switching keeps |e^{-10 G}| moderate: the creeping residual at x
    // carries rounding of size eps |e^{-G x}|
    let two = MmbmModel::new(
        vec![-0.5, 0.3],
        vec![1.0, 2.0],
        Mat::from_row_slice(2, 2, &[-0.2, 0.2, 0.3, -0.3]),
        Some(vec![0.05, 0.02]),
    )
    .unwrap();
    let an = MmbmAnalysis::new(two.clone(), &opts()).unwrap();
    let creep = [0.01, 1.0, 10.0]
        .iter()
        .map(|&x| an.creeping_residual(x).unwrap())
        .fold(0.0, f64::max);
    let growth = linalg::norm_inf(&linalg::expm(&(&an.fund.g * -10.0)));
    let quad = an.transform_quadrature_residual(an.g_abscissa_min() - 1.0).unwrap();
    let cfg = SimConfig {
        n_paths: 100_000,
        seed: 99,
        euler_dt: 1e-3,
        ..SimConfig::default()
    };
    // barriers far from sigma sqrt(dt), which sets the Euler monitoring bias
    let (ea, eb) = (2.0, 3.0);
    let est = sim::sim_mmbm(&two, MmbmTarget::Exit { a: ea, b: eb }, &cfg).unwrap();
    let exact = an.exit(ea, eb).unwrap();
    let mut mc_ok = true;
    let mut mc_worst: f64 = 0.0;
    for k in 0..4 {
        let d = (est.mean.as_slice()[k] - exact.as_slice()[k]).abs();
        let allow = (4.0 * est.stderr.as_slice()[k]).max(5e-3);
        mc_worst = mc_worst.max(d / allow);
        mc_ok &= d <= allow;
    }
    outcome(
        closed < 1e-10 && creep < 1e-8 && quad < 1e-6 && mc_ok,
        format!(
            "closed forms {closed:.1e} (1e-10), creeping {creep:.1e} (1e-8, |e^(-10G)| {growth:.1e}), quadrature {quad:.1e} (1e-6), \
             Euler exit worst |diff|/allowance {mc_worst:.2}"
        ),
    )
}

// 6. bilateral and unilateral transforms, monotonicity of H(0; q)
fn appendix_transforms() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut h0 = Vec::new();
    let plain = LatticeAnalysis::new(birth_death(1.0, 2.0).unwrap(), &opts(), 10).unwrap();
    h0.push(plain.fund.h().unwrap()[(0, 0)]);
    for q in [0.5, 1.0, 2.0] {
        let m = birth_death(1.0, 2.0).unwrap().with_killing(&[q]).unwrap();
        let an = LatticeAnalysis::new(m, &opts(), 10).unwrap();
        h0.push(an.fund.h().unwrap()[(0, 0)]);
        match an.find_bilateral_z().unwrap() {
            Some(z) => {
                let c = an.check_h_transform_bilateral(z).unwrap();
                ok &= c.passes();
                notes.push(format!("q={q}: z={z:.3} residual {:.1e}", c.residual));
            }
            None => {
                ok = false;
                notes.push(format!("q={q}: no valid z"));
            }
        }
    }
    let empty = plain.bilateral_domain_scan(1000).unwrap().is_empty();
    let uni = plain.check_h_transform_unilateral(0.5).unwrap();
    let monotone = h0.windows(2).all(|w| w[1] <= w[0]);
    ok &= empty && uni.passes() && monotone;
    notes.push(format!(
        "no killing: domain empty {empty}, unilateral residual {:.1e}; H(0;q) nonincreasing {monotone}",
        uni.residual
    ));
    outcome(ok, notes.join("; "))
}

// 7. decay
fn decay() -> Outcome {
    let an = LatticeAnalysis::new(birth_death(1.0, 2.0).unwrap(), &opts(), 40).unwrap();
    let r = an.decay_diagnostic(40).unwrap();
    let phi = r.phi.unwrap_or(f64::NAN);
    let prod = (r.xi_star * phi - 1.0).abs();
    outcome(
        (1.999..=2.001).contains(&phi) && prod < 0.01,
        format!("phi {phi:.6}, |xi_40^(1/40) phi - 1| = {prod:.2e}"),
    )
}

fn main() {
    // the harness may pass test-runner flags; listing mode prints nothing
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, fn() -> Outcome, Duration); 7] = [
        ("1 birth-death closed forms", birth_death_family, Duration::from_secs(1)),
        ("2 random identity suite", random_identity_suite, Duration::from_secs(30)),
        ("3 Monte Carlo agreement", monte_carlo, Duration::from_secs(120)),
        ("4 extrema mass", extrema_mass, Duration::from_secs(60)),
        ("5 MMBM", mmbm_suite, Duration::from_secs(120)),
        ("6 bilateral/unilateral transforms", appendix_transforms, Duration::from_secs(60)),
        ("7 decay diagnostic", decay, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let ok = out.ok && took <= budget;
        if !ok {
            failed += 1;
        }
        println!(
            "acceptance {name}: {} ({:.2}s of {}s) {}",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            out.detail
        );
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        std::process::exit(1);
    }
}
