//! Hard and soft thresholding.
//!
//! `prox_{gamma C |.|_0}(s) = argmin_v C |v|_0 + (v - s)^2 / (2 gamma)` keeps `s`
//! when `|s| > sqrt(2 gamma C)` and returns zero otherwise; the tie at the
//! threshold resolves to zero. The soft-thresholding operator is the l1
//! counterpart used by the convex baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Step size and penalty weight for a proximal map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxParams {
    gamma: f64,
    c: f64,
}

impl ProxParams {
    pub fn new(gamma: f64, c: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
        }
        Ok(Self { gamma, c })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `sqrt(2 gamma C)`.
    pub fn l0_threshold(&self) -> f64 {
        (2.0 * self.gamma * self.c).sqrt()
    }

    /// `gamma C`.
    pub fn l1_threshold(&self) -> f64 {
        self.gamma * self.c
    }
}

/// Sparsity penalty on the S block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    #[default]
    L0,
    L1,
}

impl Penalty {
    pub fn prox_scalar(self, s: f64, p: ProxParams) -> f64 {
        match self {
            Penalty::L0 => prox_l0_scalar(s, p),
            Penalty::L1 => prox_l1_scalar(s, p),
        }
    }

    pub fn prox_matrix(self, s: &SymMatrix, p: ProxParams) -> SymMatrix {
        match self {
            Penalty::L0 => prox_l0_matrix(s, p),
            Penalty::L1 => prox_l1_matrix(s, p),
        }
    }

    /// Penalty value `C ||S||_0` or `C ||S||_1`.
    pub fn value(self, s: &SymMatrix, c: f64, zero_tol: f64) -> f64 {
        match self {
            Penalty::L0 => c * l0_norm(s, zero_tol) as f64,
            Penalty::L1 => c * s.iter().map(|v| v.abs()).sum::<f64>(),
        }
    }
}

impl std::str::FromStr for Penalty {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l0" => Ok(Penalty::L0),
            "l1" => Ok(Penalty::L1),
            other => Err(Error::InvalidParameter(format!("unknown penalty {other:?}"))),
        }
    }
}

pub fn prox_l0_scalar(s: f64, p: ProxParams) -> f64 {
    if s.abs() <= p.l0_threshold() {
        0.0
    } else {
        s
    }
}

pub fn prox_l0_matrix(s: &SymMatrix, p: ProxParams) -> SymMatrix {
    let t = p.l0_threshold();
    s.map(|v| if v.abs() <= t { 0.0 } else { v })
}

pub fn prox_l1_scalar(s: f64, p: ProxParams) -> f64 {
    let t = p.l1_threshold();
    s.signum() * (s.abs() - t).max(0.0)
}

pub fn prox_l1_matrix(s: &SymMatrix, p: ProxParams) -> SymMatrix {
    s.map(|v| prox_l1_scalar(v, p))
}

/// Number of entries with `|s_ij| > zero_tol`.
pub fn l0_norm(s: &SymMatrix, zero_tol: f64) -> usize {
    s.iter().filter(|v| v.abs() > zero_tol).count()
}

/// Zero tolerance for matrices read back from files: `1e-8 * max |s_ij|`.
pub fn external_zero_tol(s: &SymMatrix) -> f64 {
    1e-8 * s.max_abs()
}
