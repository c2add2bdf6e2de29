//! Synthetic end-to-end runs through the public API.

use std::collections::BTreeSet;

use capr::backends::synth_data::{synthetic_log, synthetic_prompts, SyntheticLogConfig};
use capr::backends::Backends;
use capr::capability::{GenerateAndScore, PromptScorer, QuantizerSpec};
use capr::corpus;
use capr::log_store::{extract_pairs, segment_sessions, LogStore, SegmentationParams};
use capr::surrogate::{training_data, Surrogate, SurrogateModel, DEFAULT_LAMBDA};
use capr::tuner::{
    brute_force_oracle, tune, DeltaVector, DimBounds, ObjectiveEstimator, SearchSpace, TunerConfig,
    DEFAULT_ORACLE_CAP,
};
use capr::StyleLexicon;
use proptest::prelude::*;

fn scorer(b: &Backends) -> GenerateAndScore<'_> {
    GenerateAndScore {
        generator: b.generator.as_ref(),
        scorer: b.scorer.as_ref(),
        images_per_prompt: 1,
        seed: 0,
        steps: 20,
    }
}

#[test]
fn log_to_tuned_delta() {
    let backends = Backends::synthetic(StyleLexicon::default());
    let records = synthetic_log(&SyntheticLogConfig::default(), &backends.lexicon);
    let (store, report) = LogStore::from_records(records.clone()).unwrap();
    assert_eq!(report.ingested, records.len());

    let sessions = segment_sessions(&store, SegmentationParams::default(), backends.similarity.as_ref()).unwrap();
    let total: usize = sessions.iter().map(|s| s.records.len()).sum();
    assert_eq!(total, store.len());
    let pairs = extract_pairs(&sessions);
    assert!(pairs.len() > 20, "only {} pairs", pairs.len());

    let sc = scorer(&backends);
    let (scored, unscorable) = corpus::resolve_pair_scores(&pairs, Some(&sc as &dyn PromptScorer));
    assert_eq!((scored.len(), unscorable), (pairs.len(), 0));
    let spec = QuantizerSpec::fit(&corpus::pooled_scores(&scored), 10).unwrap();
    let (triplets, drops) = corpus::build_triplets(&scored, &spec, None).unwrap();
    assert_eq!(triplets.len() + drops.zero_phrase + drops.unscorable, scored.len());
    let (train, val) = corpus::split(&triplets, 0.2, 7).unwrap();
    let train_ids: BTreeSet<_> = train.iter().map(|t| &t.session_id).collect();
    assert!(val.iter().all(|t| !train_ids.contains(&t.session_id)));

    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus::export(&train, &val, &spec, drops, dir.path()).unwrap();
    assert_eq!((manifest.train, manifest.validation), (train.len(), val.len()));
    assert_eq!(corpus::load_split(&dir.path().join(corpus::TRAIN_FILE)).unwrap(), train);
    assert_eq!(corpus::load_split(&dir.path().join(corpus::VAL_FILE)).unwrap(), val);
    assert_eq!(QuantizerSpec::load(&dir.path().join(corpus::QUANTIZER_FILE)).unwrap(), spec);
    let pairs_path = dir.path().join(corpus::SCORED_PAIRS_FILE);
    corpus::write_scored_pairs(&scored, &pairs_path).unwrap();
    assert_eq!(corpus::load_scored_pairs(&pairs_path).unwrap(), scored);

    let model = SurrogateModel::fit(&training_data(&scored), DEFAULT_LAMBDA, &backends.lexicon).unwrap();
    assert_eq!(model.samples, 2 * scored.len());
    let surrogate = Surrogate::new(model, backends.lexicon.clone()).unwrap();

    let prompts: Vec<String> = val.iter().map(|t| t.initial_prompt.clone()).collect();
    let est = ObjectiveEstimator {
        prompts: &prompts,
        predictor: &surrogate,
        quantizer: &spec,
        reformulator: backends.reformulator.as_ref(),
        generator: backends.generator.as_ref(),
        scorer: backends.scorer.as_ref(),
        seed: 0,
        steps: 20,
        images_per_prompt: 1,
    };
    let d = DeltaVector::REFERENCE;
    assert_eq!(est.evaluate(&d).unwrap(), est.evaluate(&d).unwrap());

    let space = SearchSpace::default_for(10);
    let config = TunerConfig { budget: 15, n_initial: 5, seed: 3, ..Default::default() };
    let result = tune(&space, &config, |d| est.evaluate(d)).unwrap();
    assert_eq!(result.trace.len(), result.calls_used);
    assert_eq!(result.calls_used, 15);
    let distinct: BTreeSet<_> = result.trace.iter().map(|t| t.delta).collect();
    assert_eq!(distinct.len(), result.trace.len());
    let max = result.trace.iter().map(|t| t.value).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(result.best_value, max);
    assert!(result.trace.iter().all(|t| t.delta.overall == 9 && space.contains(&t.delta)));
}

/// Surrogate and quantizer fitted on scored synthetic prompts.
fn world(backends: &Backends) -> (Surrogate, QuantizerSpec) {
    let prompts = synthetic_prompts(500, 11, &backends.lexicon);
    let sc = scorer(backends);
    let data: Vec<_> = prompts.iter().map(|p| (p.clone(), sc.prompt_scores(p).unwrap())).collect();
    let scores: Vec<_> = data.iter().map(|(_, s)| *s).collect();
    let spec = QuantizerSpec::fit(&scores, 10).unwrap();
    let model = SurrogateModel::fit(&data, DEFAULT_LAMBDA, &backends.lexicon).unwrap();
    (Surrogate::new(model, backends.lexicon.clone()).unwrap(), spec)
}

#[test]
fn oracle_landscape_is_interior_in_aesthetic_and_length() {
    let backends = Backends::synthetic(StyleLexicon::default());
    let (surrogate, spec) = world(&backends);
    let prompts = synthetic_prompts(100, 12, &backends.lexicon);
    let est = ObjectiveEstimator {
        prompts: &prompts,
        predictor: &surrogate,
        quantizer: &spec,
        reformulator: backends.reformulator.as_ref(),
        generator: backends.generator.as_ref(),
        scorer: backends.scorer.as_ref(),
        seed: 0,
        steps: 20,
        images_per_prompt: 1,
    };
    let oracle = brute_force_oracle(&SearchSpace::default_for(10), DEFAULT_ORACLE_CAP, |d| est.evaluate(d)).unwrap();
    assert_eq!(oracle.table.len(), 1000);
    let a = oracle.argmax;
    assert_eq!(a.overall, 9);
    assert!((1..=8).contains(&a.aesthetic), "{a:?}");
    assert!((1..=8).contains(&a.length), "{a:?}");
    // Similarity targets cap the style count, so the optimum sits at zero.
    assert_eq!(a.similarity, 0, "{a:?}");
    let worst = oracle.table.iter().map(|t| t.value).fold(f64::INFINITY, f64::min);
    assert!(oracle.best_value - worst > 0.05);
}

#[test]
fn oracle_rejects_oversized_space() {
    let space = SearchSpace {
        overall: DimBounds::new(0, 9),
        similarity: DimBounds::new(0, 9),
        aesthetic: DimBounds::new(0, 9),
        length: DimBounds::new(0, 9),
    };
    assert!(brute_force_oracle(&space, 1000, |_| Ok(0.0)).is_err());
}

fn bumpy(d: &DeltaVector) -> f64 {
    let x = [d.similarity as f64, d.aesthetic as f64, d.length as f64];
    -(x[0] - 2.0).powi(2) - 0.5 * (x[1] - 6.0).powi(2) - (x[2] - 4.0).powi(2) + (x[0] * x[1] + x[2]).sin()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn larger_budget_never_hurts(seed in 0u64..1000, b1 in 3usize..20, extra in 0usize..15) {
        let space = SearchSpace::default_for(10);
        let run = |budget| {
            let config = TunerConfig { budget, n_initial: 3, seed, ..Default::default() };
            tune(&space, &config, |d| Ok(bumpy(d))).unwrap()
        };
        let (small, large) = (run(b1), run(b1 + extra));
        prop_assert!(large.best_value >= small.best_value);
        prop_assert_eq!(&large.trace[..b1], &small.trace[..]);
    }
}
