use picnn::constructive::{approximation_ladder, ConstructiveParams};
use picnn::sphere::{sample_uniform, JetFn};

fn main() {
    let d: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(2);
    let u = JetFn::new(d, |x| x[0].clone() * x[1].clone() + x[1].clone());
    let samples = sample_uniform(200, d, 3).unwrap();
    let base = ConstructiveParams {
        n0: 1,
        k: 3,
        s: 0,
        r: 1.0,
        d,
        kernel_size: 3,
    };
    let t = std::time::Instant::now();
    for r in approximation_ladder(&u, base, &[1, 2, 3, 4], &samples).unwrap() {
        println!("{:?}", r);
    }
    println!("{:.1}s", t.elapsed().as_secs_f64());
}
