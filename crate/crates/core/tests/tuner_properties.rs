//! Run-level invariants of the tuner on small spaces.

use std::collections::HashSet;

use proptest::prelude::*;

use knobtune::exploration::{PpoParams, SaParams};
use knobtune::measurement::{
    brute_force, CostPolicy, SyntheticBackend, SyntheticLandscape, SyntheticLandscapeParams, TabularBackend,
};
use knobtune::sampling::SamplingParams;
use knobtune::tuner::{compare, run, trace_csv, Mode, TunerParams};
use knobtune::{DesignSpace, Knob};

fn space(rule: Option<&str>) -> DesignSpace {
    let knobs = ["a", "b", "c", "d"]
        .iter()
        .map(|n| Knob {
            name: n.to_string(),
            values: (0..6).map(|p| 1i64 << p).collect(),
        })
        .collect();
    DesignSpace::new("props", knobs, rule).unwrap()
}

fn backend(s: &DesignSpace, seed: u64, rule: Option<&str>) -> SyntheticBackend {
    let params = SyntheticLandscapeParams {
        seed,
        invalid_rule: rule.map(str::to_string),
        ..Default::default()
    };
    SyntheticBackend::new(SyntheticLandscape::new(params, s).unwrap(), CostPolicy::default())
}

fn quick(mode: Mode, seed: u64) -> TunerParams {
    TunerParams {
        mode,
        iterations: 5,
        total_budget: 200,
        rng_seed: seed,
        sa: SaParams {
            num_chains: 16,
            max_steps: 40,
            ..Default::default()
        },
        ppo: PpoParams {
            episodes_per_iteration: 16,
            max_episode_steps: 20,
            hidden_dim: 32,
            head_hidden_dim: 16,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn traces_are_deterministic_budgeted_and_monotone() {
    let rule = Some("a * b <= 64");
    let s = space(rule);
    let b = backend(&s, 3, rule);
    for mode in Mode::ALL {
        for seed in 0..2 {
            let p = quick(mode, seed);
            let first = run(&s, &b, &p).unwrap();
            let second = run(&s, &b, &p).unwrap();
            assert_eq!(trace_csv(&first.trace), trace_csv(&second.trace), "{mode} seed {seed}");
            assert_eq!(first.measurements, second.measurements);

            let mut seen = HashSet::new();
            for m in &first.measurements {
                assert!(seen.insert(m.config.clone()), "{mode}: {} measured twice", m.config);
                if !m.valid {
                    assert_eq!(m.fitness, 0.0);
                    assert_eq!(m.cost_units, 2.0);
                }
            }
            assert!(first.total_measurements() <= p.total_budget);
            let cost: f64 = first.measurements.iter().map(|m| m.cost_units).sum();
            assert!((first.total_cost() - cost).abs() < 1e-9);
            for w in first.trace.windows(2) {
                assert!(w[1].best_fitness_so_far >= w[0].best_fitness_so_far);
                assert!(w[1].cumulative_measurements >= w[0].cumulative_measurements);
            }
            let best = first.measurements.iter().filter(|m| m.valid).map(|m| m.fitness).fold(0.0, f64::max);
            assert_eq!(first.best_fitness, best);
            assert_eq!(s.id_of(&first.best_config).unwrap(), first.best_id);
        }
    }
}

#[test]
fn plain_modes_measure_full_batches() {
    let s = space(None);
    let b = backend(&s, 4, None);
    let p = TunerParams {
        total_budget: 1000,
        ..quick(Mode::Sa, 1)
    };
    let out = run(&s, &b, &p).unwrap();
    assert!(out.iterations.iter().all(|l| l.measured == 64));
    let adaptive = run(&s, &b, &TunerParams { mode: Mode::SaAs, ..p.clone() }).unwrap();
    assert!(adaptive.iterations.iter().all(|l| (1..=63).contains(&l.measured)));
}

#[test]
fn budget_caps_the_last_iteration() {
    let s = space(None);
    let b = backend(&s, 5, None);
    let p = TunerParams {
        total_budget: 150,
        ..quick(Mode::Ae, 2)
    };
    let out = run(&s, &b, &p).unwrap();
    assert_eq!(out.total_measurements(), 150);
    assert_eq!(out.trace.len(), 3);
    assert_eq!(out.trace.last().unwrap().cumulative_measurements, 150);
}

#[test]
fn exhaustive_budget_finds_tabular_maximum() {
    let s = DesignSpace::new(
        "tiny",
        vec![
            Knob { name: "x".into(), values: vec![1, 2] },
            Knob { name: "y".into(), values: vec![1, 2, 3] },
        ],
        None,
    )
    .unwrap();
    let rows: Vec<(u64, f64)> = vec![(0, 0.3), (1, 0.9), (2, 0.1), (3, 0.7), (4, 0.5), (5, 0.2)];
    let t = TabularBackend::from_rows(&s, &rows, CostPolicy::default()).unwrap();
    let p = TunerParams {
        mode: Mode::Sa,
        total_budget: 6,
        sampling: SamplingParams {
            greedy_batch: 6,
            ..Default::default()
        },
        ..quick(Mode::Sa, 0)
    };
    let out = run(&s, &t, &p).unwrap();
    let oracle = brute_force(&s, &t, 100).unwrap();
    assert_eq!(out.best_fitness, oracle.max_fitness);
    assert_eq!(out.best_id, oracle.argmax_id);
    assert_eq!(out.total_measurements(), 6);
}

#[test]
fn no_valid_result_is_reported() {
    let s = DesignSpace::new(
        "none",
        vec![Knob { name: "x".into(), values: (1..=8).collect() }],
        Some("x > 100"),
    )
    .unwrap();
    let b = backend(&s, 0, None);
    let p = TunerParams {
        total_budget: 64,
        ..quick(Mode::Sa, 0)
    };
    assert!(matches!(run(&s, &b, &p), Err(knobtune::Error::NoValidResult)));
}

#[test]
fn sa_and_sa_as_share_exploration_until_sampling_diverges() {
    let s = space(None);
    let b = backend(&s, 6, None);
    for seed in 0..3 {
        let sa = run(&s, &b, &quick(Mode::Sa, seed)).unwrap();
        let sa_as = run(&s, &b, &quick(Mode::SaAs, seed)).unwrap();
        // Iteration 1 explores before any sampling decision has been made.
        assert_eq!(sa.iterations[0].candidate_digest, sa_as.iterations[0].candidate_digest);
        assert_eq!(sa.iterations[0].num_candidates, sa_as.iterations[0].num_candidates);
        assert_ne!(sa.iterations[0].sampled, sa_as.iterations[0].sampled);
    }
}

#[test]
fn compare_reports_one_row_per_mode() {
    let s = space(None);
    let b = backend(&s, 7, None);
    let base = quick(Mode::Sa, 0);
    let rows = compare(&s, &b, &base, &[Mode::Sa, Mode::AeAs], &[1, 2, 3]).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.runs == 3));
    let again = compare(&s, &b, &base, &[Mode::Sa, Mode::AeAs], &[1, 2, 3]).unwrap();
    assert_eq!(rows, again);
    assert!(compare(&s, &b, &base, &[], &[1]).is_err());
}

fn mode_strategy() -> impl Strategy<Value = Mode> {
    proptest::sample::select(Mode::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn run_invariants_hold_on_random_spaces(
        cards in proptest::collection::vec(2usize..6, 1..5),
        mode in mode_strategy(),
        seed in 0u64..1000,
        budget in 64usize..300,
    ) {
        let knobs = cards
            .iter()
            .enumerate()
            .map(|(i, &c)| Knob { name: format!("k{i}"), values: (1..=c as i64).collect() })
            .collect();
        let s = DesignSpace::new("random", knobs, Some("k0 <= 4")).unwrap();
        let b = backend(&s, seed, None);
        let p = TunerParams { total_budget: budget, iterations: 4, ..quick(mode, seed) };
        let out = match run(&s, &b, &p) {
            Ok(out) => out,
            Err(e) => return Err(TestCaseError::fail(format!("run failed: {e}"))),
        };
        prop_assert!(out.total_measurements() <= budget);
        prop_assert!(out.total_measurements() as u64 <= s.size());
        let distinct: HashSet<_> = out.measurements.iter().map(|m| m.config.clone()).collect();
        prop_assert_eq!(distinct.len(), out.measurements.len());
        prop_assert!(out.trace.windows(2).all(|w| w[1].best_fitness_so_far >= w[0].best_fitness_so_far));
        prop_assert!(out.measurements.iter().all(|m| m.valid || m.fitness == 0.0));
        prop_assert!(s.validate(&out.best_config).unwrap());
    }
}
