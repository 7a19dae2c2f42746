//! Source pretraining followed by target fine-tuning.

use replisel::model::{evaluate, init_params, two_stage_train, two_stage_train_detailed, Hyper};
use replisel::{generate_synthetic, StrategyConfig, SynthConfig};

fn pair(shift: f64) -> replisel::DomainPair {
    generate_synthetic(&SynthConfig {
        dim: 8,
        n_source: 600,
        n_target: 300,
        n_eval: 600,
        shift_strength: shift,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn hyper(epochs: usize) -> Hyper {
    Hyper {
        epochs,
        ..Hyper::default()
    }
}

#[test]
fn pretraining_beats_random_start_without_shift() {
    let p = pair(0.0);
    for seed in 0..5 {
        let run = two_stage_train_detailed(&p, &StrategyConfig::Uniform, &hyper(5), &hyper(3), seed).unwrap();
        let start = evaluate(&run.source_stage.params, &p.target_eval, 4.0).unwrap().accuracy;
        let random = evaluate(&init_params(8, 3, seed), &p.target_eval, 4.0).unwrap().accuracy;
        assert!(start > random, "seed {seed}: {start} <= {random}");
        assert!(start > 0.6);
    }
}

#[test]
fn frozen_second_stage_keeps_source_params() {
    let p = pair(1.5);
    let frozen = Hyper {
        lr: 0.0,
        ..hyper(2)
    };
    for tag in StrategyConfig::TAGS {
        let s = StrategyConfig::default_for(tag).unwrap();
        let run = two_stage_train_detailed(&p, &s, &hyper(3), &frozen, 5).unwrap();
        assert_eq!(run.target_stage.params, run.source_stage.params, "{tag}");
    }
}

#[test]
fn two_stage_is_deterministic_per_seed() {
    let p = pair(1.5);
    let s = StrategyConfig::default_for("gradient_based").unwrap();
    let a = two_stage_train(&p, &s, &hyper(2), &hyper(2), 11).unwrap();
    let b = two_stage_train(&p, &s, &hyper(2), &hyper(2), 11).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let c = two_stage_train(&p, &s, &hyper(2), &hyper(2), 12).unwrap();
    assert_ne!(a.params, c.params);
}
