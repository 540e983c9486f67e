//! Rough per-modulus cost of an equidistribution run.
fn main() {
    for q in [101i128, 997, 1999] {
        let t0 = std::time::Instant::now();
        let mut config = qorbit::harness::ExperimentConfig::new(
            qorbit::harness::ExperimentKind::Equidist,
            vec![q],
        );
        config.tol = 1e-3;
        let r = qorbit::harness::run_experiment(&config).unwrap();
        let dev = r.reports[0]
            .ratios
            .iter()
            .map(|x| x.deviation)
            .fold(0.0, f64::max);
        println!("q={q}: {:.1}s, max dev {dev:.4}", t0.elapsed().as_secs_f64());
    }
}
