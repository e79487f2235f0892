use rand::SeedableRng;
use std::time::Instant;
use twomat::matrix::MatrixPair;
use twomat::model::{force_into, ForceWorkspace, ModelParams};
fn main() {
    for &n in &[16usize, 32] {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x = MatrixPair::<f64>::sample_momentum(n, &mut rng);
        let p = ModelParams::new(0.5, 0.05, 0.05, n).unwrap();
        let mut ws = ForceWorkspace::new(n);
        let mut out = MatrixPair::zeros(n);
        let reps = 20000;
        let t = Instant::now();
        for _ in 0..reps {
            force_into(&p, &x, &mut ws, &mut out).unwrap();
        }
        let dt = t.elapsed().as_secs_f64() / reps as f64;
        println!("N={n}: {:.1} us per force", dt * 1e6);
    }
}
