//! Alternating optimization of one slot on a synthetic scene.

use leo_ris::ao::{optimize_slot, AoSettings, Mode, SlotInit};
use leo_ris::synthetic::{SyntheticParams, SyntheticScene};
use leo_ris::trajectory::UavModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let scene = SyntheticScene::generate(SyntheticParams::default(), seed);
    let uav = UavModel::default();
    let budgets = vec![1.0; scene.params.sats];
    let init = SlotInit::initial(scene.ris_array.len(), &uav);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = std::time::Instant::now();
    for mode in [Mode::FullAo, Mode::FixedUav, Mode::RandomRis, Mode::NoRis, Mode::TwoStageStub] {
        let random = leo_ris::rate::PhaseConfig::random(&mut rng, scene.ris_array.len());
        let fixed = (mode == Mode::RandomRis).then_some(&random);
        let sol = optimize_slot(&scene, &budgets, &init, mode, &AoSettings::default(), &uav, 0.0, fixed)
            .expect("scene is valid");
        println!("{:>15}: trace {:?}", mode.name(), sol.t_trace.iter().map(|t| format!("{t:.4}")).collect::<Vec<_>>());
        println!("                 position {:.2?}", sol.position.as_slice());
    }
    println!("elapsed {:.2?}", start.elapsed());
}
