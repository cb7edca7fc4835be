//! Twin fusion: two probability 4-vectors in, one binary decision out.

use serde::{Deserialize, Serialize};

use super::{CompoundClass, Decision};

/// First index of the largest component; earlier indices win ties.
pub fn argmax(v: &[f64; 4]) -> usize {
    let mut best = 0;
    for k in 1..4 {
        if v[k] > v[best] {
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fused {
    pub decision: Decision,
    /// Largest probability among the four components of the winning label.
    pub confidence: f64,
}

/// Combines `theta` (prediction for `x+`) and `psi` (prediction for `x-`).
///
/// 1. `argmax θ = N+` and `argmax ψ = N-` → N.
/// 2. `argmax θ = P+` and `argmax ψ = P-` → P.
/// 3. Otherwise N iff `max(θN+, θN-, ψN+, ψN-) > max(θP+, θP-, ψP+, ψP-)`,
///    else P; an exact tie therefore yields P.
///
/// The third rule compares negative against positive maxima over both twins.
pub fn fuse(theta: &[f64; 4], psi: &[f64; 4]) -> Fused {
    let p_max = theta[0].max(theta[1]).max(psi[0]).max(psi[1]);
    let n_max = theta[2].max(theta[3]).max(psi[2]).max(psi[3]);
    let (ta, pa) = (argmax(theta), argmax(psi));
    let decision = if ta == CompoundClass::NPlus.index() && pa == CompoundClass::NMinus.index() {
        Decision::N
    } else if ta == CompoundClass::PPlus.index() && pa == CompoundClass::PMinus.index() {
        Decision::P
    } else if n_max > p_max {
        Decision::N
    } else {
        Decision::P
    };
    let confidence = match decision {
        Decision::P => p_max,
        Decision::N => n_max,
    };
    Fused {
        decision,
        confidence,
    }
}
