use measure_times::experiments::{online_schedule, optimize_offline, run_online_pipeline, simulate_run, ExperimentConfig, SimulatedRun};
use measure_times::filter::{init_particles, log_sum_exp};
use measure_times::model::{BenchmarkModel, LinearGaussianModel, SystemModel, TumorModel, TumorParams};
use measure_times::noise::Stream;
use measure_times::objective::CostSettings;
use measure_times::optimizers::{ExhaustiveConfig, OptimizerChoice};
use measure_times::{estimate_cost, run_filter, AcquiredPrefix, Schedule, StreamKey};

use proptest::prelude::*;

fn schedule_from_mask(mask: u64, horizon: usize) -> Schedule {
    let times = (0..=horizon).filter(|t| mask >> t & 1 == 1).collect();
    Schedule::new(times, horizon).unwrap()
}

fn check_normalized<M: SystemModel>(model: &M, schedule: &Schedule, particles: usize, seed: u64) -> Result<(), TestCaseError> {
    let mut noise = Stream::from_seed(seed);
    let run = simulate_run(model, StreamKey::new(seed));
    let mut ps = init_particles(model, particles, &mut noise).unwrap();
    for t in 0..=model.horizon() {
        if t > 0 {
            ps.predict(model, &mut noise).unwrap();
            prop_assert!(log_sum_exp(ps.log_weights()).abs() < 1e-9);
        }
        if schedule.contains(t) {
            ps.correct(model, &run.measurements[t]).unwrap();
            prop_assert!(log_sum_exp(ps.log_weights()).abs() < 1e-9);
            ps.resample_systematic(&mut noise);
            prop_assert!(log_sum_exp(ps.log_weights()).abs() < 1e-9);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_stay_normalized(seed in any::<u64>(), mask in any::<u64>(), particles in 1usize..200) {
        check_normalized(&BenchmarkModel::default(), &schedule_from_mask(mask, 30), particles, seed)?;
        let tumor = TumorModel::new(TumorParams::default()).unwrap();
        check_normalized(&tumor, &schedule_from_mask(mask.rotate_left(7), 30), particles, seed)?;
    }

    #[test]
    fn truncation_leaves_earlier_estimates_untouched(seed in any::<u64>(), mask in any::<u64>(), cut in 0usize..=30) {
        let m = BenchmarkModel::default();
        let full = schedule_from_mask(mask, 30);
        let kept: Vec<usize> = full.times().iter().copied().filter(|&t| t <= cut).collect();
        let short = Schedule::new(kept, 30).unwrap();
        let run = simulate_run(&m, StreamKey::new(seed));
        let ys = |s: &Schedule| s.times().iter().map(|&t| (t, run.measurements[t])).collect::<Vec<_>>();
        let key = StreamKey::new(seed ^ 0x5555);
        let a = run_filter(&m, &full, &ys(&full), 50, key).unwrap();
        let b = run_filter(&m, &short, &ys(&short), 50, key).unwrap();
        let first_removed = full.times().iter().copied().find(|&t| t > cut).unwrap_or(31);
        for t in 0..first_removed {
            prop_assert_eq!(a[t].to_bits(), b[t].to_bits(), "t={}", t);
        }
    }
}

#[test]
fn cost_is_independent_of_worker_count() {
    let m = BenchmarkModel::default();
    let prefix = AcquiredPrefix::new(vec![(0, 1.5), (4, -2.0)]).unwrap();
    let settings = CostSettings { draws: 64, particles: 40 };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            (
                estimate_cost(&m, &AcquiredPrefix::empty(), &[3, 9, 20], settings, StreamKey::new(2)).unwrap(),
                estimate_cost(&m, &prefix, &[9, 20], settings, StreamKey::new(2)).unwrap(),
            )
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn online_decisions_ignore_unacquired_measurements() {
    let m = LinearGaussianModel::random_walk(1.0, 1.0, 1.0, 8).unwrap();
    let cfg = ExperimentConfig { measurements: 3, draws: 40, particles: 30, filter_particles: 30, simulations: 1 };
    let opt = OptimizerChoice::Exhaustive(ExhaustiveConfig::default());
    let root = StreamKey::new(21);
    let first = optimize_offline(&m, &opt, &cfg, root).unwrap();
    let run = simulate_run(&m, StreamKey::new(5));
    let (schedule, _) = online_schedule(&m, &opt, &cfg, root, &run, &first).unwrap();
    let mut other: SimulatedRun<LinearGaussianModel> =
        SimulatedRun { states: run.states.clone(), measurements: run.measurements.clone() };
    for t in 0..=8 {
        if !schedule.contains(t) {
            other.measurements[t] += 10.0;
        }
    }
    let (replayed, _) = online_schedule(&m, &opt, &cfg, root, &other, &first).unwrap();
    assert_eq!(schedule, replayed);
}

#[test]
fn first_online_time_equals_offline_first_time() {
    let m = LinearGaussianModel::random_walk(1.0, 1.0, 1.0, 6).unwrap();
    let cfg = ExperimentConfig { measurements: 2, draws: 200, particles: 50, filter_particles: 50, simulations: 20 };
    let opt = OptimizerChoice::Exhaustive(ExhaustiveConfig::default());
    let root = StreamKey::new(9);
    let offline = optimize_offline(&m, &opt, &cfg, root).unwrap();
    let online = run_online_pipeline(&m, &opt, &cfg, root).unwrap();
    assert_eq!(online.first_program.times[0], offline.times[0]);
    assert!(online.batch.records.iter().all(|r| r.schedule[0] == offline.times[0]));
}
