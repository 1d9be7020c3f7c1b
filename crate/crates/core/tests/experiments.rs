use lqdemix::experiments::*;
use lqdemix::linops::OperatorKind;
use lqdemix::solvers::{SolverConfig, SolverKind};
use proptest::prelude::*;

fn small(k: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec { m: 32, n1: 32, n2: 32, a2_kind: OperatorKind::GaussianOrthonormal, ..SyntheticSpec::separation(k, seed) }
}

fn csv(outcomes: Vec<TrialOutcome>) -> String {
    PhaseReport { solver: SolverKind::Bcd, k_values: vec![], trials: outcomes.len(), success_rate: vec![], outcomes }.to_csv()
}

#[test]
fn trials_are_deterministic_and_prefix_stable() {
    let cfg = SolverConfig::default();
    let a = run_trials(&small(4, 3), SolverKind::Bcd, &cfg, 3);
    let b = run_trials(&small(4, 3), SolverKind::Bcd, &cfg, 6);
    assert_eq!(csv(a.clone()), csv(b[..3].to_vec()));
    assert_eq!(csv(a), csv(run_trials(&small(4, 3), SolverKind::Bcd, &cfg, 3)));
}

#[test]
fn single_cell_grid_matches_phase_point() {
    let cfg = SolverConfig::default();
    let spec = small(6, 12);
    let grid = run_q_grid(&spec, SolverKind::Admm, &cfg, &[0.5], &[0.5], 4, &[]).unwrap();
    let phase = run_phase_transition(&spec, SolverKind::Admm, &cfg, &[6], 4, &[]).unwrap();
    assert_eq!(grid.success_rate[0][0], phase.success_rate[0]);
    assert_eq!(grid.mean_relerr_db[0][0], mean_relerr_db(&phase.outcomes));
}

#[test]
fn grid_csv_has_one_row_per_cell() {
    let r = run_q_grid(&small(3, 1), SolverKind::Bcd, &SolverConfig::default(), &[0.5, 1.0], &[0.5], 2, &[]).unwrap();
    let csv = r.to_csv();
    assert_eq!(csv.lines().count(), 3);
    assert_eq!((r.mean_relerr_db.len(), r.mean_relerr_db[0].len()), (2, 1));
}

#[test]
fn success_rate_falls_with_sparsity() {
    let trials = 20;
    let ks = [1, 4, 8, 12, 16];
    let r = run_phase_transition(&small(0, 77), SolverKind::Bcd, &SolverConfig::default(), &ks, trials, &[]).unwrap();
    for i in 0..ks.len() {
        for j in i + 1..ks.len() {
            let (a, b) = (r.success_rate[i], r.success_rate[j]);
            let sd = ((a * (1.0 - a) + b * (1.0 - b)) / trials as f64).sqrt();
            assert!(b <= a + 2.0 * sd, "K={} rate {a} < K={} rate {b}", ks[i], ks[j]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn success_flag_matches_threshold(k in 0usize..10, seed in 0u64..1000, q in prop::sample::select(vec![0.5, 1.0])) {
        let o = run_trial(&small(k, seed), SolverKind::Bcd, &SolverConfig::default().with_q(q, q), 0);
        prop_assert!(o.error.is_none());
        prop_assert_eq!(o.success, o.relerr_x1 <= SUCCESS_RELERR);
    }

    #[test]
    fn sparse_signal_has_exact_support(n in 1usize..200, frac in 0.0f64..=1.0, seed in 0u64..10_000) {
        let k = (frac * n as f64) as usize;
        let x = generate_sparse_signal(n, k, seed).unwrap();
        prop_assert_eq!(x.iter().filter(|v| **v != 0.0).count(), k);
        prop_assert_eq!(x, generate_sparse_signal(n, k, seed).unwrap());
    }
}
