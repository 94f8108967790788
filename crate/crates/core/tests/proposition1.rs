use dagbandit::bai::{floor_pow, run_bai, BaiParams, StepView, UniformScorer};
use dagbandit::oracle::SyntheticOracle;
use dagbandit::{DomainSpec, ExplorationFn, SearchDag};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SCORES: [f64; 6] = [-0.3, 0.0, 0.03, 0.3, 0.4, 0.5];

/// |L*_t| <= |L_0| + t^b after every step, and the expansion count never
/// runs ahead of the schedule.
fn check(domain: DomainSpec, b: f64, seed: u64) {
    let mut dag = SearchDag::build_to_depth(&domain, 1);
    let initial = dag.initial_leaf_count();
    let mut oracle = SyntheticOracle::new(SCORES.to_vec());
    let params = BaiParams { epsilon: 0.0, beta: ExplorationFn::practical(0.1).unwrap(), b, max_steps: 5_000 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let mut observer = |v: &StepView| {
        let bound = initial as f64 + (v.t as f64).powf(b);
        if v.dag.leaf_count() as f64 > bound {
            violations.push((v.t, v.dag.leaf_count()));
        }
    };
    let report = run_bai(&mut dag, &domain, &mut oracle, &mut UniformScorer, &params, &mut rng, &mut observer).unwrap();
    assert!(violations.is_empty(), "b = {b}, seed {seed}: {violations:?}");
    assert!(report.expansions <= floor_pow(report.samples, b), "b = {b}: {report:?}");
}

#[test]
fn leaf_growth_respects_the_schedule() {
    for i in 1..=9 {
        let b = f64::from(i) / 10.0;
        for seed in 0..5 {
            check(DomainSpec::FixedLattice { n_features: 6, leaf_depth: 3 }, b, seed);
            check(DomainSpec::FixedTree { n_features: 6, leaf_depth: 3 }, b, seed);
            check(DomainSpec::FeatureLattice { n_features: 6 }, b, seed);
        }
    }
}
