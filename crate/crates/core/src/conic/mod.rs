//! Conic solvers: a dense interior-point LP solver and a projection-splitting
//! solver for trace-objective SDPs whose feasible set mixes an affine
//! subspace, the PSD cone, an entrywise l1 ball and a unit diagonal.

pub mod lp;
pub mod sdp;

pub use lp::{solve_lp, solve_lp_with, LinearProgram, LpOptions};
pub use sdp::{solve_split_sdp, solve_split_sdp_with, SdpOptions, SplitSdp};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    Infeasible,
    Unbounded,
}

/// Primal iterate: a vector for LPs, a symmetric matrix for SDPs.
#[derive(Debug, Clone)]
pub enum PrimalPoint {
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

impl PrimalPoint {
    pub fn as_vector(&self) -> Option<&DVector<f64>> {
        match self {
            PrimalPoint::Vector(v) => Some(v),
            PrimalPoint::Matrix(_) => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            PrimalPoint::Matrix(m) => Some(m),
            PrimalPoint::Vector(_) => None,
        }
    }
}

/// One diagnostics row of an iterative solve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Objective value at the returned iterate (relaxation estimate for the
    /// splitting solver).
    pub objective: f64,
    /// LP dual objective when available.
    pub dual_objective: Option<f64>,
    pub point: PrimalPoint,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Objective after feasibility rounding (splitting solver only); a
    /// conservative companion to `objective`.
    pub rounded_objective: Option<f64>,
    pub iterations: usize,
    /// Residual history sampled every `trace_every` iterations when requested.
    pub trace: Vec<TraceRow>,
}

impl ConicSolution {
    /// The solution if the solver proved optimality; the solver's status
    /// mapped to an error otherwise.
    pub fn require_optimal(self) -> crate::error::Result<Self> {
        match self.status {
            SolveStatus::Optimal => Ok(self),
            SolveStatus::Infeasible => Err(crate::error::Error::Infeasible),
            SolveStatus::MaxIters => Err(crate::error::Error::MaxIters(self.iterations)),
            SolveStatus::Unbounded => {
                Err(crate::error::Error::Numerical("problem is unbounded".into()))
            }
        }
    }

    /// Write the iteration trace as CSV (`iteration,primal,dual,objective`).
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,primal_residual,dual_residual,objective\n");
        for row in &self.trace {
            out.push_str(&format!(
                "{},{:e},{:e},{:e}\n",
                row.iteration, row.primal_residual, row.dual_residual, row.objective
            ));
        }
        out
    }
}
