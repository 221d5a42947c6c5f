use serde::{Deserialize, Serialize};

use crate::qcore::matrix::{CMat, MatrixLiteral};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    FrankWolfe,
    Bisection,
    ProjectedGradient,
    /// Support mismatch detected before optimisation.
    Infeasible,
}

/// A divergence value with certified bounds, in bits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DivergenceResult {
    #[serde(with = "crate::serde_ext")]
    pub value: f64,
    #[serde(with = "crate::serde_ext")]
    pub lower_bound: f64,
    #[serde(with = "crate::serde_ext")]
    pub upper_bound: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: Method,
    /// Closest free state (relative entropy, D_max) or optimal test (D_H).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<MatrixLiteral>,
}

impl DivergenceResult {
    pub fn exact(value: f64, optimizer: Option<&CMat>, method: Method) -> Self {
        DivergenceResult {
            value,
            lower_bound: value,
            upper_bound: value,
            iterations: 0,
            converged: true,
            method,
            optimizer: optimizer.map(MatrixLiteral::from_matrix),
        }
    }

    /// `upper − lower`, zero when both are the same infinity.
    pub fn gap(&self) -> f64 {
        if self.upper_bound == self.lower_bound {
            0.0
        } else {
            self.upper_bound - self.lower_bound
        }
    }

    pub fn optimizer_matrix(&self) -> Option<CMat> {
        self.optimizer.as_ref().and_then(|m| m.to_matrix().ok())
    }
}
