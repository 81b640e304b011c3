use nalgebra::DMatrix;
use sparsecert::conic::{solve_split_sdp_with, SdpOptions, SplitSdp};
use sparsecert::linalg::gaussian_matrix;
use sparsecert::rng::RngStream;

fn main() {
    let (m, n) = (16usize, 32usize);
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
    // long reference run
    let reference = solve_split_sdp_with(&p, &SdpOptions { tol: 1e-12, max_iters: 400_000, rho: 0.05, ..SdpOptions::default() }).unwrap();
    println!("reference obj {:.8} (rp {:.2e} rd {:.2e})", reference.objective, reference.primal_residual, reference.dual_residual);
    for rho in [0.01, 0.05, 0.2, 1.0, 5.0] {
        for iters in [30_000usize] {
            let t = std::time::Instant::now();
            let sol = solve_split_sdp_with(&p, &SdpOptions { tol: 1e-9, max_iters: iters, rho, ..SdpOptions::default() }).unwrap();
            println!("rho {rho:>5}: obj {:.8} err {:+.2e} rp {:.2e} rd {:.2e} ({:?})",
                sol.objective, sol.objective - reference.objective, sol.primal_residual, sol.dual_residual, t.elapsed());
        }
    }
}
