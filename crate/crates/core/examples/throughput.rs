//! Times minibatch gradient steps and test-set evaluation for the default architecture.

use std::time::Instant;

use picnn::network::{ArchSpec, ParamSet};
use picnn::pinn::{evaluate_model, pinn_loss_gradient, PinnData};
use picnn::problems::problem_library;
use picnn::sphere::sample_uniform;

fn main() -> picnn::Result<()> {
    for (name, d) in [("smooth2d", 3usize), ("dim_smooth", 6), ("dim_smooth", 10)] {
        let problem = problem_library(name, d, 0)?;
        let arch = ArchSpec::default_for_dim(d);
        let model = arch.model()?;
        let params = ParamSet::init_uniform(&arch, 1)?;
        let data = PinnData::new(&problem, sample_uniform(8192, d, 2)?)?;
        for batch in [1usize, 8, 64] {
            let idx: Vec<usize> = (0..batch).collect();
            let reps = 400 / batch.max(1) + 5;
            let t = Instant::now();
            for _ in 0..reps {
                pinn_loss_gradient(&problem, &model, params.values(), &data, &idx)?;
            }
            let per = t.elapsed().as_secs_f64() / reps as f64;
            println!(
                "{name} d={d} batch={batch}: {:.3} ms/step, {:.1} us/point",
                per * 1e3,
                per * 1e6 / batch as f64
            );
        }
        let test = PinnData::new(&problem, sample_uniform(5120, d, 3)?)?;
        let t = Instant::now();
        evaluate_model(&problem, &model, params.values(), &test)?;
        println!(
            "{name} d={d}: eval 5120 points {:.3} s",
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
