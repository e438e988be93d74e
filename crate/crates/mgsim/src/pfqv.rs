//! Conventional P-ω / Q-V droop with distributed secondary control, the
//! comparison baseline.
//!
//! The inner loops track the droop voltage reference directly
//! (voltage-source behavior) and communication is continuous: neighbor
//! values are exchanged at every integration step rather than on the `t1`
//! clock.

use serde::{Deserialize, Serialize};

/// Droop and secondary gains of the baseline controller.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PfqvParams {
    /// P-ω droop gain (rad/s per W).
    pub m_p: f64,
    /// Q-V droop gain (V per var).
    pub n_q: f64,
    /// Secondary frequency coupling gain.
    pub c_f: f64,
    /// Secondary voltage coupling gain.
    pub c_v: f64,
}

/// Local setpoints entering the primary droop.
#[derive(Debug, Clone, Copy)]
pub struct PfqvSetpoints {
    pub omega_star: f64,
    pub v_star: f64,
    pub p_nom: f64,
    pub q_nom: f64,
}

/// Own quantities entering the secondary rates.
#[derive(Debug, Clone, Copy)]
pub struct PfqvOwn {
    pub omega: f64,
    /// Active sharing signal m_p·(P − P_nom).
    pub p_share: f64,
    pub vmag: f64,
}

/// Neighbor quantities (continuous communication: current values).
#[derive(Debug, Clone, Copy)]
pub struct PfqvNeighbor {
    pub weight: f64,
    pub omega: f64,
    pub p_share: f64,
    pub vmag: f64,
}

/// Primary droop: ω = ω* − m_p(P − P_nom), ‖v_o‖ref = V* − n_q(Q − Q_nom).
pub fn pfqv_primary(p: f64, q: f64, set: &PfqvSetpoints, params: &PfqvParams) -> (f64, f64) {
    (
        set.omega_star - params.m_p * (p - set.p_nom),
        set.v_star - params.n_q * (q - set.q_nom),
    )
}

/// Secondary rates (ω̇*, V̇*).
///
/// Frequency uses the pinned-consensus template with active-power sharing
/// signals; for the P-ω droop sign the sharing term enters as
/// (p̂_i − p̂_j), so the bracket again collapses to ω*_i − ω*_j. Voltage
/// drives every ‖v_o‖ to the pinned reference: only the pinned CIG accesses
/// V_s, the rest synchronize through the vmag consensus term.
pub fn pfqv_secondary_rates(
    own: &PfqvOwn,
    omega_s: f64,
    v_s: f64,
    neighbors: &[PfqvNeighbor],
    params: &PfqvParams,
    b_i: f64,
) -> (f64, f64) {
    let mut freq_acc = b_i * (own.omega - omega_s);
    let mut volt_acc = b_i * (own.vmag - v_s);
    for n in neighbors {
        freq_acc += n.weight * ((own.omega - n.omega) + (own.p_share - n.p_share));
        volt_acc += n.weight * (own.vmag - n.vmag);
    }
    (-params.c_f * freq_acc, -params.c_v * volt_acc)
}
