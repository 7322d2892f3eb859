//! Shared fixtures for the benchmarks.

use sieveboot::acvf::{arfima_acvf, ArfimaSpec};
use sieveboot::rng::stream;
use sieveboot::GaussianSimulator;

/// One simulated ARFIMA(1,d,0) path.
pub fn fixture(d: f64, phi: f64, t: usize, seed: u64) -> Vec<f64> {
    let acvf = arfima_acvf(&ArfimaSpec::new(d, phi, 1.0).expect("valid spec"), t).expect("acvf");
    GaussianSimulator::new(&acvf, t).expect("simulator").sample(&mut stream(seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_deterministic() {
        assert_eq!(fixture(0.3, 0.3, 64, 1), fixture(0.3, 0.3, 64, 1));
        assert_ne!(fixture(0.3, 0.3, 64, 1), fixture(0.3, 0.3, 64, 2));
    }
}
