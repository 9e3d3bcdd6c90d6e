//! Pilot runs of the three coexistence regimes. Prints a JSON summary used
//! to set the bands in `data/coexistence_bands.json`.

use clockrc::mcmc::{estimate_coexistence, CoexistenceConfig};
use clockrc::Exec;

fn main() {
    let regimes = [
        ("ordered", 1.0, 2.0, 1, false),
        ("dilute", 0.75, 2.5, 8, true),
        ("disordered", 1.0, 0.1, 1, false),
    ];
    for (name, p, beta, replicas, quenched) in regimes {
        for seed in [101u64, 202, 303] {
            let config = CoexistenceConfig {
                q: 3,
                beta,
                p,
                n: 32,
                d: 2,
                replicas,
                quenched,
                seed,
                ..Default::default()
            };
            let start = std::time::Instant::now();
            let report = estimate_coexistence(&config, Exec::default()).expect("valid config");
            println!(
                "{{\"regime\":\"{name}\",\"seed\":{seed},\"delta\":{:.5},\"delta_se\":{:.5},\"connection\":{:.5},\"connection_se\":{:.5},\"converged\":{},\"seconds\":{:.1}}}",
                report.delta.mean,
                report.delta.stderr,
                report.connection.mean,
                report.connection.stderr,
                report.converged(),
                start.elapsed().as_secs_f64()
            );
        }
    }
}
