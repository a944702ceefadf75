//! Growing a candidate invariant subspace from data.
//!
//! Uses fewer particles than the default so it finishes in a few seconds;
//! pass N as the first argument for a full-size run.

use symlab::ea_discovery::{discover, DiscoveryConfig};

fn main() -> symlab::Result<()> {
    let mut cfg = DiscoveryConfig::default();
    cfg.train.n_particles = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let result = discover(&cfg)?;
    for s in &result.state.history {
        println!(
            "step {}: k = {}  RMD^2 to E_j = {:?}  RMD^2 to E^G = {:?}  {:?}",
            s.j, s.k_j, s.rmd2_to_ej, s.rmd2_to_true_eg, s.decision
        );
    }
    println!("principal angles to E^G: {:?}", result.principal_angles);
    Ok(())
}
