//! Q-ω primary droop and the pinned distributed secondary frequency
//! controller.
//!
//! Each CIG broadcasts its sampled frequency and droop-scaled reactive
//! sharing signal every `t1`; between rounds the received values are held
//! (zero-order hold) while the local setpoint ω* integrates continuously
//! against them. Exactly one CIG carries a non-zero pinning gain and anchors
//! the network to ω_s.

use serde::{Deserialize, Serialize};

/// Q-ω droop parameters of one CIG.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DroopParams {
    /// Droop coefficient (rad/s per var), strictly positive.
    pub m: f64,
    /// Nominal reactive base value (var).
    pub q_nom: f64,
}

/// Held neighbor values entering the secondary-frequency rate: edge weight,
/// last received frequency sample and sharing-signal sample.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeighborState {
    pub weight: f64,
    pub omega_hat: f64,
    pub q_hat: f64,
}

/// Primary droop: ω = ω* + m·(Q − Q_base) with Q_base = Q_nom + Q_Vind.
pub fn droop_frequency(omega_star: f64, q: f64, q_base: f64, m: f64) -> f64 {
    omega_star + m * (q - q_base)
}

/// Broadcast reactive sharing signal Q̂ = m·(Q − Q_base).
pub fn sharing_signal(q: f64, q_base: f64, m: f64) -> f64 {
    m * (q - q_base)
}

/// Secondary control rate
/// ω̇* = −c_f·( b_i(ω_i − ω_s) + Σ_j a_ij(ω_i − ω̂_j − ŝ_i + Q̂_j) ),
/// where `own_signal` ŝ_i = m_i(Q_i − Q_i^base) is evaluated continuously
/// and the neighbor terms are the latest held samples.
pub fn secondary_freq_rate(
    omega_i: f64,
    omega_s: f64,
    own_signal: f64,
    neighbors: &[NeighborState],
    c_f: f64,
    b_i: f64,
) -> f64 {
    let mut acc = b_i * (omega_i - omega_s);
    for n in neighbors {
        acc += n.weight * (omega_i - n.omega_hat - own_signal + n.q_hat);
    }
    -c_f * acc
}
