//! Per-CIG active-power setpoint tracking and the cascaded voltage/current
//! PI loops producing the switching-voltage input.
//!
//! The chain is: P* → d-axis voltage setpoint (power-seeking division by the
//! output current) → outer d-voltage PI → voltage loop PI → current loop PI
//! → `v_s`. All integral states are continuous and live in the engine's
//! state vector; the functions here are pure maps from (error, integral) to
//! the loop output.

use serde::{Deserialize, Serialize};

use crate::frames::Vec2;

/// Gains of the cascaded loops. `f_ff` is the current feed-forward gain and
/// `eps` the small positive constant that bounds the d-voltage setpoint near
/// zero output current.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InnerGains {
    pub kp_vd: f64,
    pub ki_vd: f64,
    pub kp_v: f64,
    pub ki_v: f64,
    pub kp_i: f64,
    pub ki_i: f64,
    pub f_ff: f64,
    pub eps: f64,
}

/// Continuous integral states of the three loops.
#[derive(Debug, Clone, Copy, Default)]
pub struct InnerIntegrators {
    /// ∫(v_od^set − v_od) dt
    pub int_vd: f64,
    /// ∫(v_o* − v_o) dt
    pub int_v: Vec2,
    /// ∫(i_s* − i_s) dt
    pub int_i: Vec2,
}

/// P* = P_nom + P_Vav + P_Vind.
pub fn power_setpoint(p_nom: f64, p_vav: f64, p_vind: f64) -> f64 {
    p_nom + p_vav + p_vind
}

/// d-axis voltage setpoint v_od^set = sgn(i_od)·P*/(|i_od| + ε), with
/// sgn(0) = +1. Bounded by P*/ε for all currents.
pub fn vd_setpoint(p_star: f64, i_od: f64, eps: f64) -> f64 {
    let sign = if i_od >= 0.0 { 1.0 } else { -1.0 };
    sign * p_star / (i_od.abs() + eps)
}

/// Outer d-voltage PI producing the voltage-loop setpoint v_od*.
/// The q-axis setpoint is fixed at zero.
pub fn outer_voltage_pi(
    v_od_set: f64,
    v_od: f64,
    gains: &InnerGains,
    ints: &InnerIntegrators,
) -> f64 {
    let e = v_od_set - v_od;
    gains.kp_vd * e + gains.ki_vd * ints.int_vd
}

/// Voltage loop: i_s* = F·i_o − C_f·ω·K·v_o + Kp_v·(v_o* − v_o) + Ki_v·∫e.
pub fn voltage_loop(
    v_o_star: Vec2,
    v_o: Vec2,
    i_o: Vec2,
    omega: f64,
    gains: &InnerGains,
    c_f: f64,
    ints: &InnerIntegrators,
) -> Vec2 {
    let e = v_o_star - v_o;
    i_o * gains.f_ff - v_o.perp() * (c_f * omega) + e * gains.kp_v + ints.int_v * gains.ki_v
}

/// Current loop: v_s = −L_f·ω·K·i_s + Kp_i·(i_s* − i_s) + Ki_i·∫e.
pub fn current_loop(
    i_s_star: Vec2,
    i_s: Vec2,
    omega: f64,
    gains: &InnerGains,
    l_f: f64,
    ints: &InnerIntegrators,
) -> Vec2 {
    let e = i_s_star - i_s;
    -(i_s.perp() * (l_f * omega)) + e * gains.kp_i + ints.int_i * gains.ki_i
}
