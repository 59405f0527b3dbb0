use taxozsl::data::synth_dataset;
use taxozsl::experiment::{balanced_taxonomy, ExperimentSpec};
use taxozsl::gan::{train, TrainConfig, TrWeights};
use taxozsl::numerics::derive_seed;
use taxozsl::taxonomy::{make_split, SplitMode, SplitSpec};

/// The weighted regulariser should come down early in training. Compares
/// the mean of the first and last 20 logged iterations of a 200-iteration run.
#[test]
fn regularizer_falls_during_the_first_200_iterations() {
    let tax = balanced_taxonomy(3, 2, 2).unwrap();
    let spec = ExperimentSpec::default();
    let w = TrWeights::default().as_array();
    let mut falling = 0;
    for seed in 0..5 {
        let data = synth_dataset(&tax, &spec.synth, derive_seed(seed, "data")).unwrap();
        let split = make_split(
            &tax,
            &SplitSpec {
                mode: SplitMode::Easy,
                unseen_fraction: 1.0 / 3.0,
                seed: derive_seed(seed, "split"),
            },
        )
        .unwrap();
        let cfg = TrainConfig {
            iterations: 200,
            seed: derive_seed(seed, "train"),
            ..TrainConfig::default()
        };
        let log = train(&data.restrict(&split.seen), &tax, &cfg).unwrap().log;
        let mean = |rows: &[taxozsl::gan::LogRow]| {
            rows.iter().map(|r| r.tr_total(w)).sum::<f64>() / rows.len() as f64
        };
        let (head, tail) = (mean(&log[..20]), mean(&log[180..]));
        if tail < head {
            falling += 1;
        }
    }
    assert!(falling >= 4, "regulariser fell in only {falling}/5 seeds");
}

#[test]
fn zero_iterations_keep_the_initial_generator() {
    let tax = balanced_taxonomy(1, 2, 2).unwrap();
    let data = synth_dataset(&tax, &Default::default(), 1).unwrap();
    let cfg = TrainConfig {
        iterations: 0,
        ..TrainConfig::default()
    };
    let a = train(&data, &tax, &cfg).unwrap();
    let b = train(&data, &tax, &cfg).unwrap();
    assert!(a.log.is_empty());
    assert_eq!(a.generator.net.to_flat(), b.generator.net.to_flat());
}
