use cwss::fusion::{decide_local, fuse_decisions, LocalDecision};
use cwss::sensing::SensingMatrix;
use cwss::spectrum::{make_paper_band_plan, OccupancyVector, OccupiedCounts, ScenarioTruth, Synthesis};
use cwss::{make_sensing_matrix, measure, run_pipeline, PipelineConfig, PriorKnowledge, Snr, Variant};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scenario(seed: u64, m: usize, j: usize) -> (ScenarioTruth<f64>, SensingMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plan = make_paper_band_plan();
    let truth = ScenarioTruth::generate(&plan, OccupiedCounts::PAPER, j, &Synthesis::default(), &mut rng).unwrap();
    let theta = make_sensing_matrix(m, plan.n(), &mut rng).unwrap();
    (truth, theta)
}

#[test]
fn noiseless_mod_omp_def_recovers_occupancy() {
    for seed in 0..10 {
        let (truth, theta) = scenario(seed, 100, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let ms = measure(&theta, &truth.spectra, Snr::Infinite, &mut rng).unwrap();
        let prior = PriorKnowledge::from_plan(truth.plan.clone());
        for variant in [Variant::ModOmpDef, Variant::ModSompDaf] {
            let est = run_pipeline(variant, &ms, &theta, &truth.plan, &prior, &PipelineConfig::default()).unwrap();
            assert_eq!(est, truth.occupancy, "{} seed {seed}", variant.token());
        }
    }
}

#[test]
fn data_fusion_with_one_user_is_the_local_decision() {
    for seed in 0..10 {
        let (truth, theta) = scenario(seed, 70, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let ms = measure(&theta, &truth.spectra, Snr::Db(10.0), &mut rng).unwrap();
        let cfg = PipelineConfig::default();
        for (daf, def, prior) in [
            (Variant::SompDaf, Variant::OmpDef, PriorKnowledge::none()),
            (Variant::ModSompDaf, Variant::ModOmpDef, PriorKnowledge::from_plan(truth.plan.clone())),
        ] {
            let a = run_pipeline(daf, &ms, &theta, &truth.plan, &prior, &cfg).unwrap();
            let b = run_pipeline(def, &ms, &theta, &truth.plan, &prior, &cfg).unwrap();
            assert_eq!(a, b, "seed {seed}");
        }
    }
}

#[test]
fn local_decisions_of_true_spectra_match_occupancy() {
    let (truth, _) = scenario(3, 70, 4);
    for s in &truth.spectra {
        assert_eq!(decide_local(s, &truth.plan, 1e-6).unwrap(), truth.occupancy);
    }
}

proptest! {
    #[test]
    fn lowering_the_vote_threshold_only_adds_flags(
        votes in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 12), 1..9),
        l in 1usize..9,
    ) {
        let j = votes.len();
        let l = l.min(j);
        let locals: Vec<_> = votes
            .iter()
            .enumerate()
            .map(|(owner, v)| LocalDecision { owner, flags: OccupancyVector::new(v.clone()) })
            .collect();
        let strict = fuse_decisions(&locals, l).unwrap();
        if l > 1 {
            let loose = fuse_decisions(&locals, l - 1).unwrap();
            for k in 0..12 {
                prop_assert!(!strict.get(k) || loose.get(k));
            }
        }
        let all = fuse_decisions(&locals, j).unwrap();
        let any = fuse_decisions(&locals, 1).unwrap();
        for k in 0..12 {
            prop_assert_eq!(all.get(k), votes.iter().all(|v| v[k]));
            prop_assert_eq!(any.get(k), votes.iter().any(|v| v[k]));
        }
    }

    #[test]
    fn flipping_one_vote_on_moves_the_fused_flag_up_only(
        votes in proptest::collection::vec(any::<bool>(), 7),
        who in 0usize..7,
    ) {
        let mk = |v: &[bool]| -> Vec<LocalDecision> {
            v.iter().enumerate().map(|(owner, &b)| LocalDecision { owner, flags: OccupancyVector::new(vec![b]) }).collect()
        };
        let before = fuse_decisions(&mk(&votes), 4).unwrap().get(0);
        let mut raised = votes.clone();
        raised[who] = true;
        let after = fuse_decisions(&mk(&raised), 4).unwrap().get(0);
        prop_assert!(!before || after);
    }
}
