use std::io::Write;

use fcast_core::stats::ks_uniform;
use fcast_core::tslab::{self, ArPrior};
use fcast_core::RngStream;
use rand::Rng;
use rand_distr::StandardNormal;

/// The one-step mixture must match direct simulation: pick a posterior draw,
/// then add its innovation.
#[test]
fn one_step_predictive_matches_simulation() {
    let values = tslab::simulate_ar(&[0.5, 0.4, -0.2], 0.8, 160, 100, &RngStream::new(21, 0)).unwrap();
    let post = tslab::fit_ar(&values, 2, 1000, &ArPrior::default(), &RngStream::new(21, 1)).unwrap();
    let pred = tslab::predict(&post, &values, 1, 1, &RngStream::new(21, 2)).unwrap();
    let dist = pred.distribution().unwrap();
    let (y1, y2) = (values[values.len() - 1], values[values.len() - 2]);
    let mut rng = RngStream::new(21, 3).rng();
    let pit: Vec<f64> = (0..100_000)
        .map(|_| {
            let d = &post.draws[rng.random_range(0..post.draws.len())];
            let z: f64 = rng.sample(StandardNormal);
            dist.cdf(d.coefs[0] + d.coefs[1] * y1 + d.coefs[2] * y2 + d.sigma * z)
        })
        .collect();
    let ks = ks_uniform(&pit);
    assert!(ks < 1.628 / (pit.len() as f64).sqrt(), "KS {ks}");
}

#[test]
fn series_loads_from_file() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write!(file, "quarter,gdp,other\n2001Q4,1.5,x\n2002Q1,-0.25,y\n2002Q2,0.75,z\n").unwrap();
    let s = tslab::load_series(file.path(), "gdp").unwrap();
    assert_eq!(s.values, vec![1.5, -0.25, 0.75]);
    assert_eq!(s.timestamps[1].to_string(), "2002Q1");
    assert!(tslab::load_series(file.path(), "missing").is_err());
    assert!(tslab::load_series("/nonexistent/series.csv", "gdp").is_err());
}
