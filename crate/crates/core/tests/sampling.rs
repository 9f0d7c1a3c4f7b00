use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waring_core::GwdParams;

fn mean_and_se(draws: &[u64]) -> (f64, f64) {
    let n = draws.len() as f64;
    let mean = draws.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = draws
        .iter()
        .map(|&x| (x as f64 - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn yule_mean_within_three_standard_errors() {
    // GWD(1,1,4) has mean ab/(c-a-b-1) = 1 but infinite variance; the
    // standard error is the empirical one
    let g = GwdParams::new(1.0, 1.0, 4.0).unwrap();
    assert_eq!(g.mean().finite(), Some(1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(20_241_016);
    let draws: Vec<u64> = (0..1_000_000).map(|_| g.sample(&mut rng)).collect();
    let (mean, se) = mean_and_se(&draws);
    assert!((mean - 1.0).abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn finite_variance_mean_within_three_standard_errors() {
    let g = GwdParams::new(2.0, 3.0, 11.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws: Vec<u64> = (0..200_000).map(|_| g.sample(&mut rng)).collect();
    let (mean, _) = mean_and_se(&draws);
    let se = (g.variance().finite().unwrap() / draws.len() as f64).sqrt();
    let target = g.mean().finite().unwrap();
    assert!((mean - target).abs() <= 3.0 * se, "mean {mean} vs {target}");
}

#[test]
fn mass_at_zero_of_yule() {
    let g = GwdParams::new(1.0, 1.0, 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 200_000;
    let zeros = (0..n).filter(|_| g.sample(&mut rng) == 0).count() as f64;
    let se = (0.25 / n as f64).sqrt();
    assert!((zeros / n as f64 - 0.5).abs() <= 3.0 * se);
}
