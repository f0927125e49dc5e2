//! Fits the karate club model sets and prints estimates with standard errors.
//!
//!     cargo run --release -p countergm --example karate -- [full|faction|transitivity] [seed]

use std::time::Instant;

use countergm::data::{karate, karate_model};
use countergm::{mcmc_mle, FitControl};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let name = args.get(1).map_or("full", String::as_str);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let (y, attrs) = karate();
    let spec = karate_model(name).expect("model name: full, faction or transitivity");
    let model = spec.compile_for(&y, &attrs).unwrap();
    let control = FitControl::for_network(&y).with_seed(seed);
    let start = Instant::now();
    let fit = mcmc_mle(&model, &y, None, &control).unwrap();
    println!("{name}: {:?} after {} iterations, {:.1?}", fit.status, fit.iterations, start.elapsed());
    for k in 0..fit.labels.len() {
        println!(
            "{:>22} {:>8.3} ({:.3}) mc {:.3}{}",
            fit.labels[k],
            fit.theta_hat[k],
            fit.std_errors[k],
            fit.mc_std_errors[k],
            if fit.significant(k) { " *" } else { "" }
        );
    }
    println!("final discrepancy {:.3}", fit.discrepancy);
}
