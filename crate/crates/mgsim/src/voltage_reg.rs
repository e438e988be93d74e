//! Distributed average-voltage regulation and the triggered decentralized
//! individual-voltage controller.
//!
//! Average path: a dynamic average consensus estimator runs on the `t1`
//! communication clock, tracking the network-wide mean of the sampled
//! voltage magnitudes; a discrete PI on the `t2` clock turns the estimate
//! error into an active-power contribution `P_Vav = n_i·d`, shared across
//! CIGs in proportion to the gains `n_i`.
//!
//! Individual path: once triggered, each CIG applies PI action on its own
//! ‖v_o‖ error, producing `P_Vind` and `Q_Vind` without regard to sharing
//! ratios. Proportional-only gains give mode 1 (partial regulation); any
//! integral gain gives mode 2 (exact regulation).

use serde::{Deserialize, Serialize};

use crate::comm::CommGraph;
use crate::error::DomainError;

/// Estimator parameters; stability depends on the communication graph and is
/// checked empirically by [`consensus_stability_probe`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConsensusParams {
    pub rho: f64,
    pub k_i: f64,
}

impl ConsensusParams {
    /// Default parameters for a graph of maximum degree `d_max`.
    pub fn for_max_degree(d_max: usize) -> Self {
        ConsensusParams {
            rho: 0.5,
            k_i: 1.0 / (1.0 + d_max as f64),
        }
    }
}

/// Per-CIG estimator state. `r` must start at zero on every CIG so the
/// initial integrator states average to zero; the agreement state satisfies
/// `x = u_held − r_curr` after every update.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConsensusState {
    pub r_curr: f64,
    pub r_prev: f64,
    pub x: f64,
    pub u_held: f64,
}

impl ConsensusState {
    /// Synchronous round update from the neighbors' agreement states
    /// (weight, x_j), all sampled at the same round:
    /// `r⁺ = (1+ρ²)r − ρ²r⁻ + k_I·Σ a_ij(x_i − x_j)`, then `x = u − r⁺`.
    pub fn step(&mut self, params: &ConsensusParams, neighbor_x: &[(f64, f64)]) {
        let rho2 = params.rho * params.rho;
        let mut disagreement = 0.0;
        for &(a_ij, x_j) in neighbor_x {
            disagreement += a_ij * (self.x - x_j);
        }
        let r_new = (1.0 + rho2) * self.r_curr - rho2 * self.r_prev + params.k_i * disagreement;
        self.r_prev = self.r_curr;
        self.r_curr = r_new;
        self.x = self.u_held - self.r_curr;
    }

    /// `t2` boundary: hold a fresh input sample. The caller must read `x`
    /// (the average estimate) *before* refreshing.
    pub fn refresh_input(&mut self, u: f64) {
        self.u_held = u;
        self.x = self.u_held - self.r_curr;
    }
}

/// Centralized arithmetic mean; reference oracle only — the running system
/// never computes it globally.
pub fn average_voltage(vmags: &[f64]) -> Result<f64, DomainError> {
    if vmags.is_empty() {
        return Err(DomainError::EmptyList);
    }
    Ok(vmags.iter().sum::<f64>() / vmags.len() as f64)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AvgVoltGains {
    pub kp: f64,
    pub ki: f64,
}

/// Discrete PI (velocity form, compensator K_p + K_i·t2/(z−1)) acting on the
/// consensus estimate of the average voltage magnitude.
#[derive(Debug, Clone, Copy)]
pub struct AvgVoltPi {
    pub gains: AvgVoltGains,
    /// Sharing gain n_i scaling this CIG's contribution.
    pub n_share: f64,
    /// Sample period t2 (s).
    pub t2: f64,
    /// Controller output memory d.
    pub d: f64,
    /// Previous error e_{k−1}.
    pub e_prev: f64,
}

impl AvgVoltPi {
    pub fn new(gains: AvgVoltGains, n_share: f64, t2: f64) -> Self {
        AvgVoltPi {
            gains,
            n_share,
            t2,
            d: 0.0,
            e_prev: 0.0,
        }
    }

    /// One `t2` sample: e = V_s − v̄ᵉ;
    /// d += K_p(e − e_prev) + K_i·t2·e_prev; returns P_Vav = n_i·d.
    pub fn step(&mut self, vbar_estimate: f64, v_s: f64) -> f64 {
        let e = v_s - vbar_estimate;
        self.d += self.gains.kp * (e - self.e_prev) + self.gains.ki * self.t2 * self.e_prev;
        self.e_prev = e;
        self.output()
    }

    pub fn output(&self) -> f64 {
        self.n_share * self.d
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IndVoltGains {
    pub kp_p: f64,
    pub ki_p: f64,
    pub kp_q: f64,
    pub ki_q: f64,
}

/// Operating mode of the triggered individual controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndVoltMode {
    /// Mode 1: proportional only; ‖v_o‖ approaches but does not reach V_s.
    Partial,
    /// Mode 2: integral action present; ‖v_o‖ is driven to V_s.
    Exact,
}

impl IndVoltGains {
    /// Gains actually applied for a given mode (mode 1 zeroes the integral
    /// gains).
    pub fn for_mode(&self, mode: IndVoltMode) -> IndVoltGains {
        match mode {
            IndVoltMode::Partial => IndVoltGains {
                ki_p: 0.0,
                ki_q: 0.0,
                ..*self
            },
            IndVoltMode::Exact => *self,
        }
    }
}

/// (P_Vind, Q_Vind) for error e = V_s − ‖v_o‖ and integral states ∫e dt.
/// Exactly zero when not triggered.
pub fn ind_volt_output(
    gains: &IndVoltGains,
    triggered: bool,
    v_s: f64,
    vmag: f64,
    int_p: f64,
    int_q: f64,
) -> (f64, f64) {
    if !triggered {
        return (0.0, 0.0);
    }
    let e = v_s - vmag;
    (
        gains.kp_p * e + gains.ki_p * int_p,
        gains.kp_q * e + gains.ki_q * int_q,
    )
}

/// Self-contained individual-voltage controller with forward-Euler
/// integral update, for standalone use. In the simulation engine the
/// integral states are carried in the continuous state vector instead and
/// integrated by the same scheme as the plant.
#[derive(Debug, Clone, Copy)]
pub struct IndVoltCtl {
    pub gains: IndVoltGains,
    pub v_s: f64,
    pub triggered: bool,
    pub int_p: f64,
    pub int_q: f64,
}

impl IndVoltCtl {
    pub fn new(gains: IndVoltGains, v_s: f64) -> Self {
        IndVoltCtl {
            gains,
            v_s,
            triggered: false,
            int_p: 0.0,
            int_q: 0.0,
        }
    }

    /// Advances the integrals over `dt` and returns (P_Vind, Q_Vind).
    /// Integrals hold at zero while untriggered.
    pub fn step(&mut self, vmag: f64, dt: f64) -> (f64, f64) {
        if self.triggered {
            let e = self.v_s - vmag;
            self.int_p += e * dt;
            self.int_q += e * dt;
        }
        ind_volt_output(
            &self.gains,
            self.triggered,
            self.v_s,
            vmag,
            self.int_p,
            self.int_q,
        )
    }
}

/// Empirical stability check of the consensus recursion on a given graph:
/// runs the estimator with constant unequal inputs and reports whether the
/// disagreement decays towards consensus.
pub fn consensus_stability_probe(graph: &CommGraph, params: &ConsensusParams) -> bool {
    let n = graph.len();
    if n <= 1 {
        return true;
    }
    let mut states: Vec<ConsensusState> = (0..n)
        .map(|i| {
            let mut s = ConsensusState::default();
            s.refresh_input(i as f64);
            s
        })
        .collect();
    let mean = (n as f64 - 1.0) / 2.0;
    let initial: f64 = states
        .iter()
        .map(|s| (s.x - mean).abs())
        .fold(0.0, f64::max);
    let mut scratch: Vec<f64> = states.iter().map(|s| s.x).collect();
    for _ in 0..500 {
        for (i, s) in states.iter_mut().enumerate() {
            let neighbor_x: Vec<(f64, f64)> =
                graph.neighbors(i).iter().map(|&j| (1.0, scratch[j])).collect();
            s.step(params, &neighbor_x);
        }
        for (i, s) in states.iter().enumerate() {
            scratch[i] = s.x;
            if !s.x.is_finite() {
                return false;
            }
        }
    }
    let residual: f64 = states
        .iter()
        .map(|s| (s.x - mean).abs())
        .fold(0.0, f64::max);
    residual < 1e-6 * initial.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn run_consensus(graph: &CommGraph, u: &[f64], rounds: usize) -> Vec<ConsensusState> {
        let params = ConsensusParams::for_max_degree(graph.max_degree());
        let mut states: Vec<ConsensusState> = u
            .iter()
            .map(|&ui| {
                let mut s = ConsensusState::default();
                s.refresh_input(ui);
                s
            })
            .collect();
        let mut xs: Vec<f64> = states.iter().map(|s| s.x).collect();
        for _ in 0..rounds {
            for (i, s) in states.iter_mut().enumerate() {
                let nb: Vec<(f64, f64)> =
                    graph.neighbors(i).iter().map(|&j| (1.0, xs[j])).collect();
                s.step(&params, &nb);
            }
            for (i, s) in states.iter().enumerate() {
                xs[i] = s.x;
            }
        }
        states
    }

    #[test]
    fn equal_inputs_stay_at_consensus() {
        let g = CommGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let states = run_consensus(&g, &[7.5, 7.5, 7.5], 50);
        for s in states {
            assert_eq!(s.x, 7.5);
            assert_eq!(s.r_curr, 0.0);
        }
    }

    /// Two-node oracle: the difference δr = r_0 − r_1 obeys the scalar
    /// recursion δr⁺ = (1+ρ²−2k_I)δr − ρ²δr⁻ + 2k_I·D with D = u_0 − u_1,
    /// solved in closed form through the characteristic roots. With the
    /// default (ρ, k_I) the roots are a complex pair ρ·e^{±iθ}.
    #[test]
    fn two_node_matches_eigen_oracle() {
        let g = CommGraph::from_edges(2, &[(0, 1)]).unwrap();
        let params = ConsensusParams::for_max_degree(1);
        let (rho, k) = (params.rho, params.k_i);
        let rho2 = rho * rho;
        let d_in = -2.0; // u = (0, 2)

        // roots of z² − bz + ρ² with b = 1+ρ²−2k_I; here b² < 4ρ²
        let b = 1.0 + rho2 - 2.0 * k;
        let disc = b * b - 4.0 * rho2;
        assert!(disc < 0.0, "test assumes the oscillatory regime");
        let theta = (-disc).sqrt().atan2(b); // roots ρ·e^{±iθ} scaled: |z| = ρ
        // δr_k = D + ρᵏ(C1·cos kθ + C2·sin kθ); δr_0 = 0, δr_1 = 2k_I·D
        let c1 = -d_in;
        let c2 = ((2.0 * k * d_in - d_in) / rho - c1 * theta.cos()) / theta.sin();
        let delta_r = |k_round: usize| -> f64 {
            let kk = k_round as f64;
            d_in + rho.powi(k_round as i32) * (c1 * (kk * theta).cos() + c2 * (kk * theta).sin())
        };

        let mut states: Vec<ConsensusState> = [0.0, 2.0]
            .iter()
            .map(|&u| {
                let mut s = ConsensusState::default();
                s.refresh_input(u);
                s
            })
            .collect();
        let mut xs = [states[0].x, states[1].x];
        for round in 1..=60 {
            let nb0 = [(1.0, xs[1])];
            let nb1 = [(1.0, xs[0])];
            states[0].step(&params, &nb0);
            states[1].step(&params, &nb1);
            xs = [states[0].x, states[1].x];
            let expected = delta_r(round);
            assert_abs_diff_eq!(states[0].r_curr - states[1].r_curr, expected, epsilon = 1e-9);
            // r sums to zero, so x mean is conserved at mean(u) = 1
            assert_abs_diff_eq!(states[0].r_curr + states[1].r_curr, 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(xs[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(xs[1], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn ring_converges_to_centralized_mean() {
        let g = CommGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let u = [396.0, 401.0, 404.0, 399.5];
        let mean = average_voltage(&u).unwrap();
        let states = run_consensus(&g, &u, 200);
        for s in &states {
            assert_abs_diff_eq!(s.x, mean, epsilon = 1e-6);
        }
    }

    #[test]
    fn average_voltage_examples() {
        assert_eq!(average_voltage(&[400.0, 398.0, 402.0, 400.0]), Ok(400.0));
        assert_eq!(average_voltage(&[400.0]), Ok(400.0));
        assert_eq!(average_voltage(&[0.0, 800.0]), Ok(400.0));
        assert_eq!(average_voltage(&[]), Err(DomainError::EmptyList));
    }

    #[test]
    fn avg_pi_zero_error_holds_output() {
        let mut pi = AvgVoltPi::new(AvgVoltGains { kp: 1.0, ki: 2.0 }, 1.5, 0.05);
        pi.d = 3.0;
        let out = pi.step(400.0, 400.0);
        assert_eq!(pi.d, 3.0);
        assert_eq!(out, 4.5);
    }

    #[test]
    fn avg_pi_proportional_kick() {
        let mut pi = AvgVoltPi::new(AvgVoltGains { kp: 1.0, ki: 0.0 }, 1.0, 0.05);
        let out = pi.step(398.0, 400.0); // e steps 0 → 2
        assert_eq!(pi.d, 2.0);
        assert_eq!(out, 2.0);
    }

    #[test]
    fn avg_pi_discrete_integrator() {
        let mut pi = AvgVoltPi::new(AvgVoltGains { kp: 0.0, ki: 1.0 }, 1.0, 0.05);
        pi.step(399.0, 400.0); // e becomes 1; first increment uses e_prev = 0
        let before = pi.d;
        pi.step(399.0, 400.0);
        assert_relative_eq!(pi.d - before, 0.05);
        let before = pi.d;
        pi.step(399.0, 400.0);
        assert_relative_eq!(pi.d - before, 0.05);
    }

    #[test]
    fn sharing_is_proportional_to_n() {
        let gains = AvgVoltGains { kp: 0.8, ki: 12.0 };
        let mut pi_a = AvgVoltPi::new(gains, 1.0, 0.05);
        let mut pi_b = AvgVoltPi::new(gains, 2.5, 0.05);
        for est in [398.0, 399.2, 400.4, 399.9] {
            let out_a = pi_a.step(est, 400.0);
            let out_b = pi_b.step(est, 400.0);
            assert_eq!(pi_a.d, pi_b.d);
            assert_eq!(out_b, 2.5 * out_a);
        }
    }

    #[test]
    fn untriggered_outputs_are_zero() {
        let gains = IndVoltGains {
            kp_p: 1000.0,
            ki_p: 2000.0,
            kp_q: 1000.0,
            ki_q: 1500.0,
        };
        let mut ctl = IndVoltCtl::new(gains, 400.0);
        for _ in 0..100 {
            assert_eq!(ctl.step(350.0, 0.01), (0.0, 0.0));
        }
        assert_eq!(ctl.int_p, 0.0);
        assert_eq!(ctl.int_q, 0.0);
    }

    #[test]
    fn mode1_proportional_output() {
        let gains = IndVoltGains {
            kp_p: 1000.0,
            ki_p: 2000.0,
            kp_q: 1000.0,
            ki_q: 1500.0,
        }
        .for_mode(IndVoltMode::Partial);
        let (p, q) = ind_volt_output(&gains, true, 400.0, 399.5, 5.0, 5.0);
        assert_eq!((p, q), (500.0, 500.0));
    }

    #[test]
    fn mode2_integral_accumulates() {
        let gains = IndVoltGains {
            kp_p: 0.0,
            ki_p: 2000.0,
            kp_q: 0.0,
            ki_q: 1500.0,
        };
        let mut ctl = IndVoltCtl::new(gains, 400.0);
        ctl.triggered = true;
        let dt = 1e-4;
        let mut out = (0.0, 0.0);
        for _ in 0..10_000 {
            out = ctl.step(399.9, dt); // constant e = 0.1 for 1 s
        }
        assert_relative_eq!(out.0, 200.0, max_relative = 1e-9);
        assert_relative_eq!(out.1, 150.0, max_relative = 1e-9);
    }

    #[test]
    fn stability_probe_accepts_defaults_and_rejects_hot_gains() {
        let ring = CommGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert!(consensus_stability_probe(
            &ring,
            &ConsensusParams::for_max_degree(ring.max_degree())
        ));
        // k_I far beyond the stable range diverges
        assert!(!consensus_stability_probe(
            &ring,
            &ConsensusParams { rho: 0.5, k_i: 2.0 }
        ));
    }
}
