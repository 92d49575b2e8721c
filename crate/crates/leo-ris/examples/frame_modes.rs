//! One desk-scale frame under every operating mode, on common random numbers.

use leo_ris::ao::Mode;
use leo_ris::harness::{run_scenario, ScenarioConfig};

fn main() {
    let mut cfg = ScenarioConfig::desk();
    cfg.frame.slots = 4;
    cfg.frame.duration_s = 4.0;
    for mode in Mode::ALL {
        match run_scenario(&cfg, mode) {
            Ok(frame) => {
                let rates = frame.min_rates();
                let mean = rates.iter().sum::<f64>() / rates.len() as f64;
                let end = frame.trajectory().last().copied().unwrap_or_default();
                println!("{:>15}: mean min rate {mean:.4}  final position ({:.1}, {:.1})", mode.name(), end.x, end.y);
            }
            Err(e) => println!("{:>15}: {e}", mode.name()),
        }
    }
}
