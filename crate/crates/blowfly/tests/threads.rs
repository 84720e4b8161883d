use blowfly::core::blowfly::BlowflyModel;
use blowfly::core::lgssm::LinearGaussian;
use blowfly::core::mif::{mif_search, MifConfig};
use blowfly::core::smc::pfilter;
use blowfly::core::{BlowflyParams, DelayState};
use blowfly::io::simulated_series;

fn pool(n: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()
}

#[test]
fn blowfly_filter_is_identical_on_one_and_four_threads() {
    let params = BlowflyParams::published_mle();
    let series = simulated_series(&params, &DelayState::new(&[900; 15], 0), 40, 2).unwrap();
    let model = BlowflyModel::from_series(&series, 1, 14).unwrap();
    let obs = series.fit_window_f64();
    let run = |n| pool(n).install(|| pfilter(&model, &params.estimated(), &obs, 500, 77).unwrap());
    let (a, b) = (run(1), run(4));
    assert_eq!(a, b);
}

#[test]
fn iterated_filtering_is_identical_on_one_and_four_threads() {
    let m = LinearGaussian;
    let ys = m.simulate(&[0.7, 1.0, 0.5], 60, 4);
    let cfg = MifConfig {
        particles: 200,
        iterations: 3,
        rw_sd: vec![0.05, 0.05, 0.05],
        cooling_factor: 0.9,
        seed: 6,
        eval_particles: 200,
        eval_replicates: 2,
    };
    let run = |n| pool(n).install(|| mif_search(&m, &ys, &[0.5, 1.0, 1.0], &cfg).unwrap());
    assert_eq!(run(1), run(4));
}
