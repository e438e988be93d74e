//! Continuous-time electrical dynamics: CIG LC filters, RL distribution
//! lines, RL loads, and the algebraic network coupling.
//!
//! Network closure: every network bus carries a large virtual shunt
//! resistance `r_shunt` to ground, which turns the KCL constraint into an
//! explicit formula for the bus voltage in terms of the branch currents. The
//! CIG capacitor node is exact (its voltage is a state) and carries no shunt;
//! each CIG reaches its network bus through an output connector modelled as
//! one extra DQ-frame line.

use serde::{Deserialize, Serialize};

use crate::frames::{to_global, FrameAngle, Vec2};

/// Electrical parameters of one CIG: LC output filter plus output connector.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CigParams {
    /// Filter resistance (Ω).
    pub r_f: f64,
    /// Filter inductance (H).
    pub l_f: f64,
    /// Filter capacitance (F).
    pub c_f: f64,
    /// Connector resistance (Ω).
    pub r_c: f64,
    /// Connector inductance (H).
    pub l_c: f64,
    /// Network bus the connector feeds into.
    pub bus: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LineParams {
    pub r: f64,
    pub l: f64,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LoadParams {
    pub r: f64,
    pub l: f64,
    pub bus: usize,
}

/// Electrical layout of the microgrid.
#[derive(Debug, Clone)]
pub struct Topology {
    pub n_buses: usize,
    pub cigs: Vec<CigParams>,
    pub lines: Vec<LineParams>,
    pub loads: Vec<LoadParams>,
    /// Virtual shunt resistance at every network bus (Ω).
    pub r_shunt: f64,
}

impl Topology {
    /// Checks that the electrical graph (buses + CIG nodes joined by lines
    /// and connectors) is a single connected component and that no bus is
    /// dangling. Returns the offending buses otherwise.
    pub fn check_connected(&self) -> Result<(), Vec<usize>> {
        let n = self.n_buses;
        // union-find over buses; CIG nodes are leaves on their bus and
        // loads do not join buses.
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for line in &self.lines {
            let (a, b) = (
                find(&mut parent, line.from),
                find(&mut parent, line.to),
            );
            parent[a] = b;
        }
        let mut touched = vec![false; n];
        for line in &self.lines {
            touched[line.from] = true;
            touched[line.to] = true;
        }
        for cig in &self.cigs {
            touched[cig.bus] = true;
        }
        for load in &self.loads {
            touched[load.bus] = true;
        }
        let root = find(&mut parent, self.cigs.first().map(|c| c.bus).unwrap_or(0));
        let stray: Vec<usize> = (0..n)
            .filter(|&h| !touched[h] || find(&mut parent, h) != root)
            .collect();
        if stray.is_empty() {
            Ok(())
        } else {
            Err(stray)
        }
    }
}

/// Continuous electrical state of one CIG.
#[derive(Debug, Clone, Copy, Default)]
pub struct CigState {
    /// Switching current through the filter inductor (A, local dq).
    pub i_s: Vec2,
    /// Capacitor output voltage (V, local dq).
    pub v_o: Vec2,
    /// Connector current towards the network bus (A, system DQ).
    pub i_conn: Vec2,
    /// Local frame angle.
    pub delta: FrameAngle,
}

/// Solved algebraic node voltages, all in the system DQ frame.
#[derive(Debug, Clone, Default)]
pub struct BusVoltages {
    /// Exact capacitor-node voltage of each CIG.
    pub cig_nodes: Vec<Vec2>,
    /// Virtual-shunt voltage of each network bus.
    pub buses: Vec<Vec2>,
}

impl BusVoltages {
    pub fn sized(n_cigs: usize, n_buses: usize) -> Self {
        BusVoltages {
            cig_nodes: vec![Vec2::ZERO; n_cigs],
            buses: vec![Vec2::ZERO; n_buses],
        }
    }
}

/// Derivatives of the CIG filter states (`i_s`, `v_o`) for switching-voltage
/// input `v_s` and local output current `i_o`, both in the local dq frame.
pub fn cig_derivatives(
    state: &CigState,
    v_s: Vec2,
    omega_i: f64,
    params: &CigParams,
    i_o: Vec2,
) -> (Vec2, Vec2) {
    let di_s = (state.i_s * (-params.r_f) + v_s - state.v_o) * (1.0 / params.l_f)
        + state.i_s.perp() * omega_i;
    let dv_o = (state.i_s - i_o) * (1.0 / params.c_f) + state.v_o.perp() * omega_i;
    (di_s, dv_o)
}

/// Current derivative of an RL line between bus voltages `v_a` and `v_b`.
pub fn line_derivative(i: Vec2, v_a: Vec2, v_b: Vec2, params: &LineParams, omega_s: f64) -> Vec2 {
    (i * (-params.r) + v_a - v_b) * (1.0 / params.l) + i.perp() * omega_s
}

/// Current derivative of a series RL load at bus voltage `v`.
pub fn load_derivative(i: Vec2, v: Vec2, params: &LoadParams, omega_s: f64) -> Vec2 {
    (i * (-params.r) + v) * (1.0 / params.l) + i.perp() * omega_s
}

/// Solves the network node voltages for given branch currents.
///
/// CIG capacitor nodes are exact; every network bus voltage follows from
/// Ohm's law on its virtual shunt: `V_h = r_shunt · (net DQ current injected
/// into h)`.
pub fn solve_bus_voltages_into(
    topo: &Topology,
    cigs: &[CigState],
    line_currents: &[Vec2],
    load_currents: &[Vec2],
    out: &mut BusVoltages,
) {
    for v in out.buses.iter_mut() {
        *v = Vec2::ZERO;
    }
    // Accumulate net injected current per bus, then scale by r_shunt.
    for (cig, state) in topo.cigs.iter().zip(cigs) {
        out.buses[cig.bus] += state.i_conn;
    }
    for (line, &i) in topo.lines.iter().zip(line_currents) {
        out.buses[line.from] += -i;
        out.buses[line.to] += i;
    }
    for (load, &i) in topo.loads.iter().zip(load_currents) {
        out.buses[load.bus] += -i;
    }
    for v in out.buses.iter_mut() {
        *v = *v * topo.r_shunt;
    }
    for (k, state) in cigs.iter().enumerate() {
        out.cig_nodes[k] = to_global(state.v_o, state.delta);
    }
}

pub fn solve_bus_voltages(
    topo: &Topology,
    cigs: &[CigState],
    line_currents: &[Vec2],
    load_currents: &[Vec2],
) -> BusVoltages {
    let mut out = BusVoltages::sized(cigs.len(), topo.n_buses);
    solve_bus_voltages_into(topo, cigs, line_currents, load_currents, &mut out);
    out
}

/// Instantaneous power and voltage measurement at a CIG terminal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    /// Active power (W).
    pub p: f64,
    /// Reactive power (var).
    pub q: f64,
    /// Output voltage magnitude (V).
    pub vmag: f64,
}

/// P = v_d·i_d + v_q·i_q, Q = v_q·i_d − v_d·i_q, ‖v‖ = √(v_d² + v_q²).
pub fn measure(v_o: Vec2, i_o: Vec2) -> Measurement {
    Measurement {
        p: v_o.d * i_o.d + v_o.q * i_o.q,
        q: v_o.q * i_o.d - v_o.d * i_o.q,
        vmag: v_o.norm(),
    }
}

/// Steady-state sensitivity ∂P/∂‖V‖ = (P + G‖V‖²)/‖V‖ of the connector
/// power-flow relation. Diagnostic/validation use.
pub fn pf_sensitivity_p(p: f64, g: f64, vmag: f64) -> Result<f64, crate::error::DomainError> {
    if vmag <= 0.0 {
        return Err(crate::error::DomainError::NonPositiveVoltage(vmag));
    }
    Ok((p + g * vmag * vmag) / vmag)
}

/// Steady-state sensitivity ∂Q/∂‖V‖ = (Q − B‖V‖²)/‖V‖.
pub fn pf_sensitivity_q(q: f64, b: f64, vmag: f64) -> Result<f64, crate::error::DomainError> {
    if vmag <= 0.0 {
        return Err(crate::error::DomainError::NonPositiveVoltage(vmag));
    }
    Ok((q - b * vmag * vmag) / vmag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::DomainError;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};

    fn cig_params(bus: usize) -> CigParams {
        CigParams {
            r_f: 0.1,
            l_f: 1.35e-3,
            c_f: 50e-6,
            r_c: 0.03,
            l_c: 0.35e-3,
            bus,
        }
    }

    #[test]
    fn zero_state_is_equilibrium() {
        let p = cig_params(0);
        let (di, dv) = cig_derivatives(&CigState::default(), Vec2::ZERO, 0.0, &p, Vec2::ZERO);
        assert_eq!((di, dv), (Vec2::ZERO, Vec2::ZERO));

        let lp = LineParams {
            r: 1.0,
            l: 1.0,
            from: 0,
            to: 1,
        };
        assert_eq!(
            line_derivative(Vec2::ZERO, Vec2::new(5.0, 0.0), Vec2::new(5.0, 0.0), &lp, 1.0),
            Vec2::ZERO
        );
        let ld = LoadParams { r: 1.0, l: 1.0, bus: 0 };
        assert_eq!(load_derivative(Vec2::ZERO, Vec2::ZERO, &ld, 314.0), Vec2::ZERO);
    }

    #[test]
    fn filter_current_derivative_direct_substitution() {
        let mut p = cig_params(0);
        p.r_f = 1.0;
        p.l_f = 1.0;
        let state = CigState {
            i_s: Vec2::new(1.0, 0.0),
            ..Default::default()
        };
        let (di, _) = cig_derivatives(&state, Vec2::ZERO, 0.0, &p, Vec2::ZERO);
        assert_eq!(di, Vec2::new(-1.0, 0.0));
    }

    #[test]
    fn capacitor_rotation_term() {
        let mut p = cig_params(0);
        p.c_f = 1.0;
        let omega0 = 2.0 * std::f64::consts::PI * 50.0;
        let state = CigState {
            i_s: Vec2::new(2.0, -1.0),
            v_o: Vec2::new(0.0, 1.0),
            ..Default::default()
        };
        // i_s == i_o, so only the ω·K·v_o term remains.
        let (_, dv) = cig_derivatives(&state, Vec2::ZERO, omega0, &p, state.i_s);
        assert_abs_diff_eq!(dv.d, omega0, epsilon = 1e-12);
        assert_abs_diff_eq!(dv.q, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn line_derivative_direct_substitution() {
        let lp = LineParams {
            r: 1.0,
            l: 1.0,
            from: 0,
            to: 1,
        };
        let di = line_derivative(
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(0.0, 0.0),
            &lp,
            0.0,
        );
        assert_eq!(di, Vec2::new(1.0, 0.0));

        // rotation term only: R=0, equal voltages
        let lp0 = LineParams {
            r: 0.0,
            l: 1.0,
            from: 0,
            to: 1,
        };
        let omega0 = 100.0;
        let di = line_derivative(Vec2::new(1.0, 0.0), Vec2::ZERO, Vec2::ZERO, &lp0, omega0);
        assert_eq!(di, Vec2::new(0.0, -omega0));
    }

    #[test]
    fn load_derivative_mirrors_line() {
        let ld = LoadParams { r: 1.0, l: 1.0, bus: 0 };
        let di = load_derivative(Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0), &ld, 0.0);
        // −R·I + V = 1
        assert_eq!(di, Vec2::new(1.0, 0.0));
        let ld0 = LoadParams { r: 0.0, l: 1.0, bus: 0 };
        let di = load_derivative(Vec2::new(1.0, 0.0), Vec2::ZERO, &ld0, 50.0);
        assert_eq!(di, Vec2::new(0.0, -50.0));
    }

    #[test]
    fn shunt_bus_is_ohms_law() {
        // single non-CIG bus, net injected (0.1, 0) A through one connector
        let topo = Topology {
            n_buses: 1,
            cigs: vec![cig_params(0)],
            lines: vec![],
            loads: vec![],
            r_shunt: 1000.0,
        };
        let cigs = [CigState {
            i_conn: Vec2::new(0.1, 0.0),
            ..Default::default()
        }];
        let v = solve_bus_voltages(&topo, &cigs, &[], &[]);
        assert_eq!(v.buses[0], Vec2::new(100.0, 0.0));

        // zero net current → zero voltage
        let cigs = [CigState::default()];
        let v = solve_bus_voltages(&topo, &cigs, &[], &[]);
        assert_eq!(v.buses[0], Vec2::ZERO);
    }

    /// Independent oracle: assemble the full shunt-conductance KCL system
    /// G·V = I_inj and solve it densely, then compare with the explicit
    /// per-bus formula.
    #[test]
    fn bus_solve_matches_dense_nodal_oracle() {
        let topo = Topology {
            n_buses: 2,
            cigs: vec![cig_params(0)],
            lines: vec![LineParams {
                r: 0.35,
                l: 0.6e-3,
                from: 0,
                to: 1,
            }],
            loads: vec![LoadParams {
                r: 3.2,
                l: 2.0e-3,
                bus: 1,
            }],
            r_shunt: 50.0,
        };
        let cigs = [CigState {
            i_conn: Vec2::new(40.0, -3.0),
            v_o: Vec2::new(398.0, 1.0),
            delta: FrameAngle(0.02),
            ..Default::default()
        }];
        let line_i = [Vec2::new(25.0, -7.0)];
        let load_i = [Vec2::new(24.0, -6.0)];

        let got = solve_bus_voltages(&topo, &cigs, &line_i, &load_i);

        // dense oracle, one channel at a time
        for channel in 0..2 {
            let pick = |v: Vec2| if channel == 0 { v.d } else { v.q };
            let mut g = [[0.0f64; 2]; 2];
            g[0][0] = 1.0 / topo.r_shunt;
            g[1][1] = 1.0 / topo.r_shunt;
            let inj = [
                pick(cigs[0].i_conn) - pick(line_i[0]),
                pick(line_i[0]) - pick(load_i[0]),
            ];
            let v_oracle = solve2(g, inj);
            assert_relative_eq!(pick(got.buses[0]), v_oracle[0], max_relative = 1e-12);
            assert_relative_eq!(pick(got.buses[1]), v_oracle[1], max_relative = 1e-12);
        }

        // KCL residual at every bus: net injected − V/r_shunt = 0 exactly
        let net0 = cigs[0].i_conn - line_i[0];
        let net1 = line_i[0] - load_i[0];
        assert_abs_diff_eq!(net0.d - got.buses[0].d / topo.r_shunt, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(net1.q - got.buses[1].q / topo.r_shunt, 0.0, epsilon = 1e-12);

        // CIG node voltage is the rotated capacitor voltage
        let expect = to_global(cigs[0].v_o, cigs[0].delta);
        assert_eq!(got.cig_nodes[0], expect);
    }

    fn solve2(mut a: [[f64; 2]; 2], mut b: [f64; 2]) -> [f64; 2] {
        // 2×2 Gaussian elimination with partial pivoting
        if a[1][0].abs() > a[0][0].abs() {
            a.swap(0, 1);
            b.swap(0, 1);
        }
        let f = a[1][0] / a[0][0];
        a[1][1] -= f * a[0][1];
        b[1] -= f * b[0];
        let x1 = b[1] / a[1][1];
        let x0 = (b[0] - a[0][1] * x1) / a[0][0];
        [x0, x1]
    }

    #[test]
    fn measurement_examples() {
        let m = measure(Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0));
        assert_eq!((m.p, m.q, m.vmag), (1.0, 0.0, 1.0));

        let m = measure(Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0));
        assert_eq!((m.p, m.q, m.vmag), (0.0, 1.0, 1.0));

        let m = measure(Vec2::new(3.0, 4.0), Vec2::new(2.0, -1.0));
        assert_eq!((m.p, m.q, m.vmag), (2.0, 11.0, 5.0));
    }

    #[test]
    fn sensitivity_examples() {
        assert_eq!(pf_sensitivity_p(0.0, 1.0, 1.0), Ok(1.0));
        assert_eq!(pf_sensitivity_q(0.0, -1.0, 2.0), Ok(2.0));
        assert_eq!(
            pf_sensitivity_p(1.0, 1.0, 0.0),
            Err(DomainError::NonPositiveVoltage(0.0))
        );
    }

    // Power-flow relations of the output connector, used as the
    // finite-difference oracle for the sensitivity formulas.
    pub(crate) fn power_flow_p(vi: f64, vj: f64, theta: f64, g: f64, b: f64) -> f64 {
        vi * vj * (-g * theta.cos() - b * theta.sin()) + g * vi * vi
    }

    pub(crate) fn power_flow_q(vi: f64, vj: f64, theta: f64, g: f64, b: f64) -> f64 {
        vi * vj * (-g * theta.sin() + b * theta.cos()) - b * vi * vi
    }

    #[test]
    fn sensitivities_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let vi: f64 = rng.gen_range(300.0..500.0);
            let vj: f64 = rng.gen_range(300.0..500.0);
            let theta: f64 = rng.gen_range(-0.5..0.5);
            let g: f64 = rng.gen_range(0.1..5.0);
            let b: f64 = rng.gen_range(-10.0..-0.1);
            let h = vi * 1e-5;

            let p = power_flow_p(vi, vj, theta, g, b);
            let dp_fd = (power_flow_p(vi + h, vj, theta, g, b)
                - power_flow_p(vi - h, vj, theta, g, b))
                / (2.0 * h);
            let dp = pf_sensitivity_p(p, g, vi).unwrap();
            assert_relative_eq!(dp, dp_fd, max_relative = 1e-6);

            let q = power_flow_q(vi, vj, theta, g, b);
            let dq_fd = (power_flow_q(vi + h, vj, theta, g, b)
                - power_flow_q(vi - h, vj, theta, g, b))
                / (2.0 * h);
            let dq = pf_sensitivity_q(q, b, vi).unwrap();
            assert_relative_eq!(dq, dq_fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn connectivity_check_flags_stray_bus() {
        let topo = Topology {
            n_buses: 3,
            cigs: vec![cig_params(0)],
            lines: vec![LineParams {
                r: 0.1,
                l: 1e-3,
                from: 0,
                to: 1,
            }],
            loads: vec![],
            r_shunt: 50.0,
        };
        assert_eq!(topo.check_connected(), Err(vec![2]));
    }
}
