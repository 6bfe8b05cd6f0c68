use fcast_core::evaltests::{dm_test, dm_test_values, lrt_power, Estimator, Preferred};
use fcast_core::{scores, ForecastDistribution, RngStream, ScoreSeries};
use rayon::prelude::*;

fn logs_series(f: &ForecastDistribution, name: &str, ys: &[f64]) -> ScoreSeries {
    ScoreSeries::score("logs", name, &vec![f.clone(); ys.len()], ys, |f, y| Ok(scores::logs(f, y))).unwrap()
}

/// Two forecasts equally far from the truth on opposite sides have equal
/// expected scores, so the two-sided test should reject about 5% of the time.
#[test]
fn two_sided_size_under_null() {
    let truth = ForecastDistribution::standard_normal();
    let f = ForecastDistribution::gaussian(0.3, 1.0).unwrap();
    let g = ForecastDistribution::gaussian(-0.3, 1.0).unwrap();
    let root = RngStream::new(17, 0);
    let reps = 10_000;
    let rejections: usize = (0..reps)
        .into_par_iter()
        .map(|i| {
            let ys = truth.sample(&root.derive(i), 100);
            let sf: Vec<f64> = ys.iter().map(|y| scores::logs(&f, *y)).collect();
            let sg: Vec<f64> = ys.iter().map(|y| scores::logs(&g, *y)).collect();
            let r = dm_test_values(&sf, &sg, Estimator::Kdep(1), 0.05).unwrap();
            usize::from(r.p_two_sided < 0.05)
        })
        .sum();
    let freq = rejections as f64 / reps as f64;
    assert!((0.03..=0.07).contains(&freq), "rejection frequency {freq}");
}

#[test]
fn logs_prefers_truth_over_student_t() {
    let n01 = ForecastDistribution::standard_normal();
    let t5 = ForecastDistribution::standardized_t(5).unwrap();
    let ys = n01.sample(&RngStream::new(5, 0), 10_000);
    let r = dm_test(&logs_series(&n01, "normal", &ys), &logs_series(&t5, "t5", &ys), Estimator::Kdep(1), 0.05).unwrap();
    assert_eq!(r.preferred, Preferred::F);
    assert!(r.statistic < 0.0);

    // Rejection frequency over repeated samples agrees with the LR benchmark's
    // ordering: the DM power cannot exceed the most powerful test.
    let root = RngStream::new(6, 0);
    let reps = 200;
    let n = 400;
    let hits: usize = (0..reps)
        .into_par_iter()
        .map(|i| {
            let ys = t5.sample(&root.derive(i), n);
            let sf: Vec<f64> = ys.iter().map(|y| scores::logs(&n01, *y)).collect();
            let sg: Vec<f64> = ys.iter().map(|y| scores::logs(&t5, *y)).collect();
            let r = dm_test_values(&sf, &sg, Estimator::Kdep(1), 0.05).unwrap();
            usize::from(r.p_one_sided < 0.05)
        })
        .sum();
    let dm = hits as f64 / reps as f64;
    let lrt = lrt_power(&n01, &t5, n, 0.05, 2000, &RngStream::new(7, 0)).unwrap();
    let se = (dm * (1.0 - dm) / reps as f64 + lrt.power * (1.0 - lrt.power) / 2000.0).sqrt();
    assert!(dm <= lrt.power + 3.0 * se, "DM {dm} vs LRT {}", lrt.power);
}

#[test]
fn lrt_results_do_not_depend_on_pool_size() {
    let n01 = ForecastDistribution::standard_normal();
    let t5 = ForecastDistribution::standardized_t(5).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| lrt_power(&n01, &t5, 60, 0.05, 1500, &RngStream::new(11, 3)).unwrap())
    };
    assert_eq!(run(1), run(3));
}
