use nalgebra::DMatrix;
use sparsecert::conic::{solve_split_sdp_with, SdpOptions, SplitSdp};
use sparsecert::linalg::gaussian_matrix;
use sparsecert::rng::RngStream;

fn main() {
    for (m, n) in [(6usize, 12usize), (16, 32)] {
        let a = gaussian_matrix(m, n, &RngStream::new(0, 99)).unwrap();
        let gram = a.transpose() * &a;
        let scale = gram.norm().max(1.0);
        let p = SplitSdp {
            objective: DMatrix::identity(n, n),
            affine: vec![(gram.unscale(scale), 0.0)],
            l1_radius: Some(1.0),
            psd: true,
            diag_one: false,
        };
        let sol = solve_split_sdp_with(&p, &SdpOptions { tol: 1e-7, max_iters: 100_000, trace_every: 2000, ..SdpOptions::default() }).unwrap();
        println!("== ({m},{n}) status {:?} obj {:.8}", sol.status, sol.objective);
        for row in sol.trace.iter().take(50) {
            println!("  it {:>6}  rp {:.3e}  rd {:.3e}  obj {:.8}", row.iteration, row.primal_residual, row.dual_residual, row.objective);
        }
    }
}
