use sparsecert::certify::{sdp_bound, SensingMatrix, alpha1, s_exact_bruteforce};
use sparsecert::linalg::gaussian_matrix;
use sparsecert::rng::RngStream;

fn main() {
    for (m, n) in [(3usize, 6usize), (4, 10), (6, 12), (4, 8), (8, 16), (16, 32)] {
        let start = std::time::Instant::now();
        let mut iters = 0usize;
        let mut worst_low = f64::INFINITY;
        for seed in 0..5u64 {
            let a = SensingMatrix::new(gaussian_matrix(m, n, &RngStream::new(seed, 99)).unwrap()).unwrap();
            let b = sdp_bound(&a, 1e-7).unwrap();
            iters += b.iterations;
            let alpha = alpha1(&a, 1e-8).unwrap();
            let floor = 1.0 / (2.0 * n as f64).sqrt();
            worst_low = worst_low.min(b.estimate - floor);
            let s_ex = if n <= 14 && m <= 7 { s_exact_bruteforce(&a).unwrap() } else { f64::NAN };
            println!("  ({m},{n}) seed {seed}: sdp {:.6} rounded {:.6} alpha1 {:.6} s_exact {:.6} iters {} status {:?}",
                b.estimate, b.rounded, alpha, s_ex, b.iterations, b.status);
            // sandwich
            let ok1 = alpha <= b.estimate.sqrt() + 1e-3;
            let ok2 = b.estimate.sqrt() <= alpha.sqrt() + 1e-3;
            let ok3 = s_ex.is_nan() || (alpha - 1e-3 <= s_ex && s_ex <= b.estimate.sqrt() + 1e-3);
            if !(ok1 && ok2 && ok3) { println!("    !! SANDWICH VIOLATION {ok1} {ok2} {ok3}"); }
        }
        println!("({m},{n}): total {:?}, avg iters {}, worst margin above 1/sqrt(2n): {:.6}", start.elapsed(), iters / 5, worst_low);
    }
}
