//! Single training run: `train_once <problem> <d> <r> <n> <seed> <epochs> <test_size>`.

use picnn::network::ArchSpec;
use picnn::problems::problem_library;
use picnn::trainer::{test_data, train, TrainConfig};

fn main() -> picnn::Result<()> {
    let a: Vec<String> = std::env::args().collect();
    let p = |i: usize| a[i].parse::<usize>().unwrap();
    let problem = problem_library(&a[1], p(2), p(3) as u32)?;
    let arch = ArchSpec::default_for_dim(problem.d);
    let cfg = TrainConfig {
        train_size: p(4),
        seed: p(5) as u64,
        epochs: p(6),
        test_size: p(7),
        ..TrainConfig::default()
    };
    let test = test_data(&problem, cfg.test_size, 7)?;
    let r = train(&arch, &problem, &cfg, &test, 7)?;
    for (e, h) in r.history.iter().enumerate() {
        println!(
            "{e} {:.4e} {:.4e} {:.4e} {:.4e}",
            h.train_pinn, h.test_pinn, h.train_mse, h.test_mse
        );
    }
    println!("best {:?} {:?} {:.1}s", r.best_epoch, r.best, r.wall_time_s);
    Ok(())
}
