use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use skipfree::extrema::{self, Direction};
use skipfree::fluctuation::LatticeAnalysis;
use skipfree::format::{self, ModelFile};
use skipfree::linalg::{self, Mat};
use skipfree::mmbm::MmbmAnalysis;
use skipfree::model::{LatticeModel, MmbmModel, Model};
use skipfree::sim::{self, LatticeTarget, SimConfig};
use skipfree::solvers::SolveOptions;
use skipfree::verify;

fn model_from(seed: u64) -> LatticeModel {
    verify::random_lattice(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn analysis(seed: u64) -> LatticeAnalysis {
    LatticeAnalysis::new(model_from(seed), &SolveOptions::default(), 16).unwrap()
}

fn row_sums(m: &Mat) -> Vec<f64> {
    (0..m.nrows()).map(|i| m.row(i).sum()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn g_is_substochastic(seed in any::<u64>()) {
        let an = analysis(seed);
        prop_assert!(an.fund.g.iter().all(|&x| x >= -1e-12));
        for s in row_sums(&an.fund.g) {
            prop_assert!(s <= 1.0 + 1e-10);
            if an.fund.regime.is_c1() {
                prop_assert!((s - 1.0).abs() < 1e-9);
            }
        }
        prop_assert!(an.fund.r.iter().all(|&x| x >= -1e-12));
    }

    #[test]
    fn reversal_is_an_involution(seed in any::<u64>()) {
        let m = model_from(seed);
        let back = m.reverse().unwrap().reverse().unwrap();
        for (a, b) in m.blocks().iter().zip(back.blocks()) {
            prop_assert!(linalg::max_abs(&(a - b)) < 1e-12);
        }
        let (mu, mu_rev) = (m.drift_and_pi().unwrap().mu, m.reverse().unwrap().drift_and_pi().unwrap().mu);
        prop_assert!((mu - mu_rev).abs() < 1e-12);
    }

    #[test]
    fn exit_is_a_subprobability(seed in any::<u64>(), a in 0usize..5, b in 0usize..5) {
        prop_assume!(a + b > 0);
        let an = analysis(seed);
        let d = an.two_sided_exit(a, b).unwrap();
        prop_assert!(d.iter().all(|&x| (-1e-10..=1.0 + 1e-10).contains(&x)));
        prop_assert!(row_sums(&d).iter().all(|&s| s <= 1.0 + 1e-10));
    }

    #[test]
    fn exit_is_monotone_in_the_lower_barrier(seed in any::<u64>(), a in 1usize..5, b in 1usize..5) {
        // a deeper lower barrier can only be hit later
        let an = analysis(seed);
        let near = an.two_sided_exit(a, b).unwrap();
        let far = an.two_sided_exit(a + 1, b).unwrap();
        for (x, y) in row_sums(&near).iter().zip(row_sums(&far)) {
            prop_assert!(y <= x + 1e-10);
        }
    }

    #[test]
    fn creeping_is_below_hitting_first(seed in any::<u64>(), m in 1usize..5, l in 1usize..4) {
        let an = analysis(seed);
        let creep = an.creeping(m).unwrap();
        prop_assert!(creep.iter().all(|&x| x >= -1e-10));
        prop_assert!(row_sums(&creep).iter().all(|&s| s <= 1.0 + 1e-10));
        let hbu = an.hit_before_upcross(m, l).unwrap();
        prop_assert!(hbu.iter().all(|&x| x >= -1e-10 && x <= 1.0 + 1e-10));
    }

    #[test]
    fn killed_extrema_laws_have_unit_mass(seed in any::<u64>(), q in 0.05f64..2.0) {
        let m = model_from(seed);
        let killed = m.with_killing(&vec![q; m.n_phases()]).unwrap();
        let an = LatticeAnalysis::new(killed, &SolveOptions::default(), 16).unwrap();
        for dir in [Direction::Max, Direction::Min] {
            let law = extrema::extrema_law(&an, dir, 1e-10, 2048).unwrap();
            for r in &law.row_mass {
                prop_assert!(*r <= 1.0 + 1e-9);
                prop_assert!(r + law.tail_bound >= 1.0 - 1e-6, "{:?} {} {}", dir, r, law.tail_bound);
            }
        }
    }

    #[test]
    fn model_files_round_trip(seed in any::<u64>()) {
        let m = Model::Lattice(model_from(seed));
        let text = format::to_json_string(&ModelFile::from_model(&m), true);
        let back = format::parse_model(&text).unwrap();
        prop_assert_eq!(format::model_hash(&back), format::model_hash(&m));
        prop_assert_eq!(back, m);
    }

    #[test]
    fn scalar_mmbm_g_solves_the_quadratic(a in -2.0f64..2.0, s2 in 0.1f64..3.0, q in 0.01f64..2.0) {
        let m = MmbmModel::new(vec![a], vec![s2], Mat::zeros(1, 1), Some(vec![q])).unwrap();
        let an = MmbmAnalysis::new(m, &SolveOptions::default()).unwrap();
        let g = an.fund.g[(0, 0)];
        prop_assert!(g < 0.0);
        prop_assert!((0.5 * s2 * g * g + a * g - q).abs() < 1e-10);
        let d = an.exit(0.5, 0.7).unwrap()[(0, 0)];
        prop_assert!((0.0..=1.0).contains(&d));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn simulation_is_reproducible(seed in any::<u64>(), sim_seed in any::<u64>()) {
        let m = model_from(seed).with_killing(&[0.5, 0.5, 0.5, 0.5][..model_from(seed).n_phases()]).unwrap();
        let cfg = SimConfig { n_paths: 3000, seed: sim_seed, ..SimConfig::default() };
        let t = LatticeTarget::Exit { a: 1, b: 2 };
        let a = sim::sim_lattice(&m, t, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
        let b = pool.install(|| sim::sim_lattice(&m, t, &cfg).unwrap());
        prop_assert_eq!(&a.mean, &b.mean);
        prop_assert_eq!(&a.stderr, &b.stderr);
        prop_assert!(a.stderr.iter().all(|&s| s >= 0.0));
    }
}
