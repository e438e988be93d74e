//! Fixed-step hybrid simulation engine.
//!
//! Continuous states (plant + controller integrators) advance with classic
//! RK4 at step `dt`. On top run the discrete layers: scenario events are
//! applied atomically at their timestamps, communication rounds and
//! consensus updates fire every `t1`, and the average-voltage PI samples
//! every `t2`. One run is single-threaded and bit-reproducible.
//!
//! State vector layout: one 16-slot block per CIG
//! `[i_s(2), v_o(2), i_conn(2), δ, ∫vd, ∫v(2), ∫i(2), ω*, ∫e_P, ∫e_Q, V*]`
//! followed by 2 slots per line current and 2 per load current. Slots a
//! controller family does not use keep zero derivatives.

use crate::comm::{Channel, Message};
use crate::error::{ConfigError, SimError};
use crate::frames::{to_local, FrameAngle, Vec2};
use crate::freq_control::{droop_frequency, secondary_freq_rate, sharing_signal, NeighborState};
use crate::inner_control::{
    current_loop, outer_voltage_pi, power_setpoint, vd_setpoint, voltage_loop, InnerGains,
    InnerIntegrators,
};
use crate::pfqv::{PfqvNeighbor, PfqvOwn, PfqvParams, pfqv_secondary_rates};
use crate::plant::{
    cig_derivatives, line_derivative, load_derivative, measure, solve_bus_voltages_into,
    BusVoltages, CigState, LineParams, Measurement, Topology,
};
use crate::scenario::{
    ControllerFamily, ControllerSwitch, Event, EventKind, ScenarioConfig, SetpointField,
    TriggerKind,
};
use crate::trace::{CigSample, Summary, Trace, TraceRecord};
use crate::voltage_reg::{
    ind_volt_output, AvgVoltPi, ConsensusParams, ConsensusState, IndVoltGains, IndVoltMode,
};

// Slot offsets inside a CIG block.
const IS_D: usize = 0;
const IS_Q: usize = 1;
const VO_D: usize = 2;
const VO_Q: usize = 3;
const IC_D: usize = 4;
const IC_Q: usize = 5;
const DELTA: usize = 6;
const INT_VD: usize = 7;
const INT_V_D: usize = 8;
const INT_V_Q: usize = 9;
const INT_I_D: usize = 10;
const INT_I_Q: usize = 11;
const OMEGA_STAR: usize = 12;
const INT_EP: usize = 13;
const INT_EQ: usize = 14;
const V_STAR: usize = 15;
const CIG_STRIDE: usize = 16;

const CIG_SLOT_NAMES: [&str; CIG_STRIDE] = [
    "i_s.d", "i_s.q", "v_o.d", "v_o.q", "i_conn.d", "i_conn.q", "delta", "int_vd", "int_v.d",
    "int_v.q", "int_i.d", "int_i.q", "omega_star", "int_e_p", "int_e_q", "v_star",
];

/// Index map from (component, slot) to positions in the flat state vector.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub n_cigs: usize,
    pub n_lines: usize,
    pub n_loads: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        CIG_STRIDE * self.n_cigs + 2 * (self.n_lines + self.n_loads)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn cig(&self, i: usize) -> usize {
        CIG_STRIDE * i
    }

    #[inline]
    pub fn line(&self, j: usize) -> usize {
        CIG_STRIDE * self.n_cigs + 2 * j
    }

    #[inline]
    pub fn load(&self, h: usize) -> usize {
        CIG_STRIDE * self.n_cigs + 2 * self.n_lines + 2 * h
    }

    /// Human-readable name of a state slot, for diagnostics.
    pub fn describe(&self, idx: usize) -> String {
        if idx < CIG_STRIDE * self.n_cigs {
            format!("cig{}.{}", idx / CIG_STRIDE, CIG_SLOT_NAMES[idx % CIG_STRIDE])
        } else {
            let rest = idx - CIG_STRIDE * self.n_cigs;
            if rest < 2 * self.n_lines {
                format!("line{}.i.{}", rest / 2, if rest % 2 == 0 { "d" } else { "q" })
            } else {
                let rest = rest - 2 * self.n_lines;
                format!("load{}.i.{}", rest / 2, if rest % 2 == 0 { "d" } else { "q" })
            }
        }
    }
}

/// A linear ramp installed by a `ramp_setpoint` event.
#[derive(Debug, Clone, Copy)]
struct Ramp {
    from: f64,
    to: f64,
    t_start: f64,
    t_end: f64,
}

impl Ramp {
    fn eval(&self, t: f64) -> f64 {
        let s = ((t - self.t_start) / (self.t_end - self.t_start)).clamp(0.0, 1.0);
        self.from + (self.to - self.from) * s
    }
}

/// Time-varying nominal setpoints of one CIG.
#[derive(Debug, Clone, Copy)]
struct SetpointState {
    p_base: f64,
    q_base: f64,
    p_ramp: Option<Ramp>,
    q_ramp: Option<Ramp>,
}

impl SetpointState {
    fn p_nom(&self, t: f64) -> f64 {
        self.p_ramp.map_or(self.p_base, |r| r.eval(t))
    }

    fn q_nom(&self, t: f64) -> f64 {
        self.q_ramp.map_or(self.q_base, |r| r.eval(t))
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Enables {
    consensus: bool,
    avg_pi: bool,
    secondary_freq: bool,
    pfqv_secondary: bool,
}

/// Everything the derivative evaluation reads; mutated only between
/// integration steps (events, rounds, sampled holds).
#[derive(Clone)]
struct SimCore {
    layout: Layout,
    topo: Topology,
    omega_s: f64,
    v_s: f64,
    family: ControllerFamily,
    droop_m: Vec<f64>,
    b_pin: Vec<f64>,
    inner: InnerGains,
    c_f_secondary: f64,
    pfqv: Option<PfqvParams>,
    neighbors_of: Vec<Vec<usize>>,
    setpoints: Vec<SetpointState>,
    p_vav: Vec<f64>,
    ind_triggered: Vec<bool>,
    ind_gains: Vec<IndVoltGains>,
    held_neighbors: Vec<Vec<NeighborState>>,
    enables: Enables,
}

/// Scratch buffers reused across derivative evaluations.
#[derive(Clone, Default)]
struct WorkBuffers {
    cigs: Vec<CigState>,
    line_i: Vec<Vec2>,
    load_i: Vec<Vec2>,
    bus_v: BusVoltages,
    meas: Vec<Measurement>,
    omega: Vec<f64>,
    p_share: Vec<f64>,
    pfqv_nb: Vec<PfqvNeighbor>,
}

/// Observable quantities of one CIG derived from the current state.
#[derive(Debug, Clone, Copy)]
pub struct CigObservables {
    pub meas: Measurement,
    pub omega: f64,
    /// Droop-scaled sharing signal (reactive for the tunable scheme, active
    /// for pfqv).
    pub own_signal: f64,
    pub p_vind: f64,
    pub q_vind: f64,
}

impl SimCore {
    fn decode(&self, y: &[f64], work: &mut WorkBuffers) {
        let lay = &self.layout;
        for i in 0..lay.n_cigs {
            let b = lay.cig(i);
            work.cigs[i] = CigState {
                i_s: Vec2::new(y[b + IS_D], y[b + IS_Q]),
                v_o: Vec2::new(y[b + VO_D], y[b + VO_Q]),
                i_conn: Vec2::new(y[b + IC_D], y[b + IC_Q]),
                delta: FrameAngle(y[b + DELTA]),
            };
        }
        for j in 0..lay.n_lines {
            let b = lay.line(j);
            work.line_i[j] = Vec2::new(y[b], y[b + 1]);
        }
        for h in 0..lay.n_loads {
            let b = lay.load(h);
            work.load_i[h] = Vec2::new(y[b], y[b + 1]);
        }
    }

    fn observables(&self, t: f64, y: &[f64], i: usize) -> CigObservables {
        let b = self.layout.cig(i);
        let delta = FrameAngle(y[b + DELTA]);
        let v_o = Vec2::new(y[b + VO_D], y[b + VO_Q]);
        let i_conn = Vec2::new(y[b + IC_D], y[b + IC_Q]);
        let i_o = to_local(i_conn, delta);
        let meas = measure(v_o, i_o);
        match self.family {
            ControllerFamily::Proposed => {
                let (p_vind, q_vind) = ind_volt_output(
                    &self.ind_gains[i],
                    self.ind_triggered[i],
                    self.v_s,
                    meas.vmag,
                    y[b + INT_EP],
                    y[b + INT_EQ],
                );
                let q_base = self.setpoints[i].q_nom(t) + q_vind;
                let omega = droop_frequency(y[b + OMEGA_STAR], meas.q, q_base, self.droop_m[i]);
                let own_signal = sharing_signal(meas.q, q_base, self.droop_m[i]);
                CigObservables {
                    meas,
                    omega,
                    own_signal,
                    p_vind,
                    q_vind,
                }
            }
            ControllerFamily::Pfqv => {
                let params = self.pfqv.as_ref().expect("pfqv params");
                let p_share = params.m_p * (meas.p - self.setpoints[i].p_nom(t));
                let omega = y[b + OMEGA_STAR] - p_share;
                CigObservables {
                    meas,
                    omega,
                    own_signal: p_share,
                    p_vind: 0.0,
                    q_vind: 0.0,
                }
            }
        }
    }

    fn derivative(&self, t: f64, y: &[f64], dy: &mut [f64], work: &mut WorkBuffers) {
        dy.fill(0.0);
        self.decode(y, work);
        solve_bus_voltages_into(&self.topo, &work.cigs, &work.line_i, &work.load_i, &mut work.bus_v);

        match self.family {
            ControllerFamily::Proposed => self.proposed_cig_rates(t, y, dy, work),
            ControllerFamily::Pfqv => self.pfqv_cig_rates(t, y, dy, work),
        }

        let lay = &self.layout;
        for (j, line) in self.topo.lines.iter().enumerate() {
            let di = line_derivative(
                work.line_i[j],
                work.bus_v.buses[line.from],
                work.bus_v.buses[line.to],
                line,
                self.omega_s,
            );
            let b = lay.line(j);
            dy[b] = di.d;
            dy[b + 1] = di.q;
        }
        for (h, load) in self.topo.loads.iter().enumerate() {
            let di = load_derivative(
                work.load_i[h],
                work.bus_v.buses[load.bus],
                load,
                self.omega_s,
            );
            let b = lay.load(h);
            dy[b] = di.d;
            dy[b + 1] = di.q;
        }
    }

    fn proposed_cig_rates(&self, t: f64, y: &[f64], dy: &mut [f64], work: &mut WorkBuffers) {
        let lay = &self.layout;
        for i in 0..lay.n_cigs {
            let b = lay.cig(i);
            let state = work.cigs[i];
            let params = &self.topo.cigs[i];
            let i_o = to_local(state.i_conn, state.delta);
            let meas = measure(state.v_o, i_o);

            // individual voltage controller (continuous integrals)
            let triggered = self.ind_triggered[i];
            let (p_vind, q_vind) = ind_volt_output(
                &self.ind_gains[i],
                triggered,
                self.v_s,
                meas.vmag,
                y[b + INT_EP],
                y[b + INT_EQ],
            );
            let e_v = if triggered { self.v_s - meas.vmag } else { 0.0 };
            dy[b + INT_EP] = e_v;
            dy[b + INT_EQ] = e_v;

            // primary droop + distributed secondary frequency control
            let q_base = self.setpoints[i].q_nom(t) + q_vind;
            let m = self.droop_m[i];
            let omega_i = droop_frequency(y[b + OMEGA_STAR], meas.q, q_base, m);
            if self.enables.secondary_freq {
                let own = sharing_signal(meas.q, q_base, m);
                dy[b + OMEGA_STAR] = secondary_freq_rate(
                    omega_i,
                    self.omega_s,
                    own,
                    &self.held_neighbors[i],
                    self.c_f_secondary,
                    self.b_pin[i],
                );
            }

            // active power setpoint chain
            let p_star = power_setpoint(self.setpoints[i].p_nom(t), self.p_vav[i], p_vind);
            let v_od_set = vd_setpoint(p_star, i_o.d, self.inner.eps);
            let ints = InnerIntegrators {
                int_vd: y[b + INT_VD],
                int_v: Vec2::new(y[b + INT_V_D], y[b + INT_V_Q]),
                int_i: Vec2::new(y[b + INT_I_D], y[b + INT_I_Q]),
            };
            let v_od_star = outer_voltage_pi(v_od_set, state.v_o.d, &self.inner, &ints);
            dy[b + INT_VD] = v_od_set - state.v_o.d;
            let v_o_star = Vec2::new(v_od_star, 0.0);

            let i_s_star = voltage_loop(
                v_o_star,
                state.v_o,
                i_o,
                omega_i,
                &self.inner,
                params.c_f,
                &ints,
            );
            let ev = v_o_star - state.v_o;
            dy[b + INT_V_D] = ev.d;
            dy[b + INT_V_Q] = ev.q;

            let v_s_cmd = current_loop(i_s_star, state.i_s, omega_i, &self.inner, params.l_f, &ints);
            let ei = i_s_star - state.i_s;
            dy[b + INT_I_D] = ei.d;
            dy[b + INT_I_Q] = ei.q;

            self.write_electrical_rates(i, &state, v_s_cmd, omega_i, i_o, dy, work);
        }
    }

    fn pfqv_cig_rates(&self, t: f64, y: &[f64], dy: &mut [f64], work: &mut WorkBuffers) {
        let lay = &self.layout;
        let params = *self.pfqv.as_ref().expect("pfqv params");
        // first pass: measurements and droop frequencies of all CIGs
        for i in 0..lay.n_cigs {
            let b = lay.cig(i);
            let state = work.cigs[i];
            let i_o = to_local(state.i_conn, state.delta);
            let meas = measure(state.v_o, i_o);
            work.meas[i] = meas;
            work.p_share[i] = params.m_p * (meas.p - self.setpoints[i].p_nom(t));
            work.omega[i] = y[b + OMEGA_STAR] - work.p_share[i];
        }
        for i in 0..lay.n_cigs {
            let b = lay.cig(i);
            let state = work.cigs[i];
            let cig_params = &self.topo.cigs[i];
            let i_o = to_local(state.i_conn, state.delta);
            let meas = work.meas[i];
            let omega_i = work.omega[i];

            // Q-V droop reference tracked directly by the inner loops
            let vmag_ref = y[b + V_STAR] - params.n_q * (meas.q - self.setpoints[i].q_nom(t));
            let v_o_star = Vec2::new(vmag_ref, 0.0);
            let ints = InnerIntegrators {
                int_vd: 0.0,
                int_v: Vec2::new(y[b + INT_V_D], y[b + INT_V_Q]),
                int_i: Vec2::new(y[b + INT_I_D], y[b + INT_I_Q]),
            };
            let i_s_star = voltage_loop(
                v_o_star,
                state.v_o,
                i_o,
                omega_i,
                &self.inner,
                cig_params.c_f,
                &ints,
            );
            let ev = v_o_star - state.v_o;
            dy[b + INT_V_D] = ev.d;
            dy[b + INT_V_Q] = ev.q;
            let v_s_cmd =
                current_loop(i_s_star, state.i_s, omega_i, &self.inner, cig_params.l_f, &ints);
            let ei = i_s_star - state.i_s;
            dy[b + INT_I_D] = ei.d;
            dy[b + INT_I_Q] = ei.q;

            if self.enables.pfqv_secondary {
                // continuous communication: neighbors read at the current
                // integration stage
                work.pfqv_nb.clear();
                for &j in &self.neighbors_of[i] {
                    work.pfqv_nb.push(PfqvNeighbor {
                        weight: 1.0,
                        omega: work.omega[j],
                        p_share: work.p_share[j],
                        vmag: work.meas[j].vmag,
                    });
                }
                let own = PfqvOwn {
                    omega: omega_i,
                    p_share: work.p_share[i],
                    vmag: meas.vmag,
                };
                let (dw, dv) = pfqv_secondary_rates(
                    &own,
                    self.omega_s,
                    self.v_s,
                    &work.pfqv_nb,
                    &params,
                    self.b_pin[i],
                );
                dy[b + OMEGA_STAR] = dw;
                dy[b + V_STAR] = dv;
            }

            self.write_electrical_rates(i, &state, v_s_cmd, omega_i, i_o, dy, work);
        }
    }

    fn write_electrical_rates(
        &self,
        i: usize,
        state: &CigState,
        v_s_cmd: Vec2,
        omega_i: f64,
        i_o: Vec2,
        dy: &mut [f64],
        work: &WorkBuffers,
    ) {
        let b = self.layout.cig(i);
        let params = &self.topo.cigs[i];
        let (di_s, dv_o) = cig_derivatives(state, v_s_cmd, omega_i, params, i_o);
        dy[b + IS_D] = di_s.d;
        dy[b + IS_Q] = di_s.q;
        dy[b + VO_D] = dv_o.d;
        dy[b + VO_Q] = dv_o.q;
        dy[b + DELTA] = omega_i - self.omega_s;
        // connector: one DQ-frame line from the capacitor node to the bus
        let conn = LineParams {
            r: params.r_c,
            l: params.l_c,
            from: 0,
            to: 0,
        };
        let di_c = line_derivative(
            state.i_conn,
            work.bus_v.cig_nodes[i],
            work.bus_v.buses[params.bus],
            &conn,
            self.omega_s,
        );
        dy[b + IC_D] = di_c.d;
        dy[b + IC_Q] = di_c.q;
    }
}

/// One scenario run in progress.
#[derive(Clone)]
pub struct Simulation {
    core: SimCore,
    state: Vec<f64>,
    step_index: u64,
    dt: f64,
    duration_steps: u64,
    steps_per_t1: u64,
    t1_per_t2: u64,
    round: u64,
    consensus_params: ConsensusParams,
    consensus: Vec<ConsensusState>,
    avg_pi: Vec<AvgVoltPi>,
    channel: Channel,
    events: Vec<Event>,
    next_event: usize,
    ind_base_gains: IndVoltGains,
    band: Option<(f64, f64, IndVoltMode)>,
    band_accum: Vec<f64>,
    graph: crate::comm::CommGraph,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    ytmp: Vec<f64>,
    work: WorkBuffers,
    label: String,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, ConfigError> {
        let layout = Layout {
            n_cigs: cfg.cigs.len(),
            n_lines: cfg.lines.len(),
            n_loads: cfg.loads.len(),
        };
        let n = layout.n_cigs;
        let omega_s = cfg.system.omega_s();
        let v_s = cfg.system.v_nominal;

        let mut state = vec![0.0; layout.len()];
        for i in 0..n {
            state[layout.cig(i) + OMEGA_STAR] = omega_s;
            state[layout.cig(i) + V_STAR] = v_s;
        }

        let ind_base_gains = cfg
            .ind_voltage
            .as_ref()
            .map(|iv| iv.gains())
            .unwrap_or(IndVoltGains {
                kp_p: 0.0,
                ki_p: 0.0,
                kp_q: 0.0,
                ki_q: 0.0,
            });
        let band = cfg.ind_voltage.as_ref().and_then(|iv| {
            matches!(iv.trigger, TriggerKind::Band).then(|| {
                let mode = if iv.band_mode == 1 {
                    IndVoltMode::Partial
                } else {
                    IndVoltMode::Exact
                };
                (iv.band_threshold, iv.band_dwell, mode)
            })
        });

        let avg_gains = cfg.avg_voltage.unwrap_or(crate::voltage_reg::AvgVoltGains {
            kp: 0.0,
            ki: 0.0,
        });

        let core = SimCore {
            layout,
            topo: cfg.topology(),
            omega_s,
            v_s,
            family: cfg.controller.family(),
            droop_m: cfg.cigs.iter().map(|c| c.m_droop).collect(),
            b_pin: cfg.cigs.iter().map(|c| c.b_pin).collect(),
            inner: cfg.inner,
            c_f_secondary: cfg.secondary_freq.c_f,
            pfqv: cfg.pfqv,
            neighbors_of: (0..n).map(|i| cfg.comm_graph.neighbors(i).to_vec()).collect(),
            setpoints: cfg
                .cigs
                .iter()
                .map(|c| SetpointState {
                    p_base: c.p_nom,
                    q_base: c.q_nom,
                    p_ramp: None,
                    q_ramp: None,
                })
                .collect(),
            p_vav: vec![0.0; n],
            ind_triggered: vec![false; n],
            ind_gains: vec![ind_base_gains; n],
            held_neighbors: vec![Vec::new(); n],
            enables: Enables::default(),
        };

        let steps_per_t1 = (cfg.timing.t1 / cfg.timing.dt).round() as u64;
        let t1_per_t2 = (cfg.timing.t2 / cfg.timing.t1).round() as u64;
        let duration_steps = (cfg.timing.duration / cfg.timing.dt).round() as u64;
        let len = layout.len();

        Ok(Simulation {
            core,
            state,
            step_index: 0,
            dt: cfg.timing.dt,
            duration_steps,
            steps_per_t1,
            t1_per_t2,
            round: 0,
            consensus_params: cfg.consensus,
            consensus: vec![ConsensusState::default(); n],
            avg_pi: (0..n)
                .map(|i| AvgVoltPi::new(avg_gains, cfg.cigs[i].n_share, cfg.timing.t2))
                .collect(),
            channel: Channel::new(cfg.comm.drop_prob, cfg.comm.delay_rounds, cfg.system.seed),
            events: cfg.events.clone(),
            next_event: 0,
            ind_base_gains,
            band,
            band_accum: vec![0.0; n],
            graph: cfg.comm_graph.clone(),
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            ytmp: vec![0.0; len],
            work: WorkBuffers {
                cigs: vec![CigState::default(); n],
                line_i: vec![Vec2::ZERO; layout.n_lines],
                load_i: vec![Vec2::ZERO; layout.n_loads],
                bus_v: BusVoltages::sized(n, cfg.system.n_buses),
                meas: vec![
                    Measurement {
                        p: 0.0,
                        q: 0.0,
                        vmag: 0.0
                    };
                    n
                ],
                omega: vec![0.0; n],
                p_share: vec![0.0; n],
                pfqv_nb: Vec::with_capacity(n),
            },
            label: cfg.controller.label().to_string(),
        })
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.dt
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn layout(&self) -> Layout {
        self.core.layout
    }

    pub fn finished(&self) -> bool {
        self.step_index >= self.duration_steps
    }

    pub fn observables(&self, i: usize) -> CigObservables {
        self.core.observables(self.time(), &self.state, i)
    }

    /// Advances one `dt`: due events, due discrete updates, one RK4 step.
    pub fn step(&mut self) -> Result<(), SimError> {
        let t = self.time();
        self.apply_due_events();
        self.discrete_updates(t);
        self.rk4_advance(t);
        self.step_index += 1;
        self.check_finite()
    }

    fn apply_due_events(&mut self) {
        while self.next_event < self.events.len() {
            let due = {
                let ev = &self.events[self.next_event];
                (ev.time / self.dt).round() as u64 <= self.step_index
            };
            if !due {
                break;
            }
            let ev = self.events[self.next_event].clone();
            self.apply_event(&ev);
            self.next_event += 1;
        }
    }

    fn apply_event(&mut self, ev: &Event) {
        match &ev.kind {
            EventKind::LoadStep { load, r, l } => {
                self.core.topo.loads[*load].r = *r;
                self.core.topo.loads[*load].l = *l;
            }
            EventKind::RampSetpoint {
                cig,
                field,
                from,
                to,
                t_end,
            } => {
                let ramp = Ramp {
                    from: *from,
                    to: *to,
                    t_start: ev.time,
                    t_end: *t_end,
                };
                match field {
                    SetpointField::PNom => self.core.setpoints[*cig].p_ramp = Some(ramp),
                    SetpointField::QNom => self.core.setpoints[*cig].q_ramp = Some(ramp),
                }
            }
            EventKind::EnableController { name } => match name {
                ControllerSwitch::Consensus => self.core.enables.consensus = true,
                ControllerSwitch::SecondaryFreq => self.core.enables.secondary_freq = true,
                ControllerSwitch::PfqvSecondary => self.core.enables.pfqv_secondary = true,
                ControllerSwitch::AvgVoltagePi => {
                    // fresh PI memories at activation
                    for pi in &mut self.avg_pi {
                        pi.d = 0.0;
                        pi.e_prev = 0.0;
                    }
                    self.core.enables.avg_pi = true;
                }
            },
            EventKind::TriggerIndVoltage { cigs, mode } => {
                let mode = if *mode == 1 {
                    IndVoltMode::Partial
                } else {
                    IndVoltMode::Exact
                };
                for &i in cigs {
                    self.core.ind_triggered[i] = true;
                    self.core.ind_gains[i] = self.ind_base_gains.for_mode(mode);
                }
            }
        }
    }

    fn discrete_updates(&mut self, t: f64) {
        if self.core.family == ControllerFamily::Pfqv {
            return; // continuous communication, no round machinery
        }
        if self.step_index % self.steps_per_t1 != 0 {
            return;
        }
        let n = self.core.layout.n_cigs;
        let k1_round = self.round;
        let obs: Vec<CigObservables> = (0..n)
            .map(|i| self.core.observables(t, &self.state, i))
            .collect();

        // t2 boundary: read estimates into the PI, then refresh the held inputs
        if k1_round % self.t1_per_t2 == 0 {
            if self.core.enables.avg_pi {
                for i in 0..n {
                    let estimate = self.consensus[i].x;
                    self.core.p_vav[i] = self.avg_pi[i].step(estimate, self.core.v_s);
                }
            }
            if self.core.enables.consensus {
                for i in 0..n {
                    self.consensus[i].refresh_input(obs[i].meas.vmag);
                }
            }
        }

        // optional band trigger
        if let Some((threshold, dwell, mode)) = self.band {
            let t1 = self.steps_per_t1 as f64 * self.dt;
            for i in 0..n {
                if self.core.ind_triggered[i] {
                    continue;
                }
                if (obs[i].meas.vmag - self.core.v_s).abs() > threshold {
                    self.band_accum[i] += t1;
                    if self.band_accum[i] + 1e-12 >= dwell {
                        self.core.ind_triggered[i] = true;
                        self.core.ind_gains[i] = self.ind_base_gains.for_mode(mode);
                    }
                } else {
                    self.band_accum[i] = 0.0;
                }
            }
        }

        // communication round
        let samples: Vec<Message> = (0..n)
            .map(|i| Message {
                sender: i,
                omega_hat: obs[i].omega,
                q_hat: obs[i].own_signal,
                x: self.consensus[i].x,
                round: k1_round,
            })
            .collect();
        let inboxes = self.channel.deliver(&self.graph, k1_round, &samples);

        if self.core.enables.consensus {
            for i in 0..n {
                let neighbor_x: Vec<(f64, f64)> =
                    inboxes[i].iter().map(|m| (1.0, m.x)).collect();
                self.consensus[i].step(&self.consensus_params, &neighbor_x);
            }
        }
        for i in 0..n {
            self.core.held_neighbors[i] = inboxes[i]
                .iter()
                .map(|m| NeighborState {
                    weight: 1.0,
                    omega_hat: m.omega_hat,
                    q_hat: m.q_hat,
                })
                .collect();
        }
        self.round += 1;
    }

    fn rk4_advance(&mut self, t: f64) {
        let dt = self.dt;
        let y = &mut self.state;
        let nlen = y.len();
        self.core.derivative(t, y, &mut self.k1, &mut self.work);
        for i in 0..nlen {
            self.ytmp[i] = y[i] + 0.5 * dt * self.k1[i];
        }
        self.core
            .derivative(t + 0.5 * dt, &self.ytmp, &mut self.k2, &mut self.work);
        for i in 0..nlen {
            self.ytmp[i] = y[i] + 0.5 * dt * self.k2[i];
        }
        self.core
            .derivative(t + 0.5 * dt, &self.ytmp, &mut self.k3, &mut self.work);
        for i in 0..nlen {
            self.ytmp[i] = y[i] + dt * self.k3[i];
        }
        self.core
            .derivative(t + dt, &self.ytmp, &mut self.k4, &mut self.work);
        for i in 0..nlen {
            y[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }

    fn check_finite(&self) -> Result<(), SimError> {
        let sum: f64 = self.state.iter().sum();
        if sum.is_finite() {
            return Ok(());
        }
        let idx = self
            .state
            .iter()
            .position(|v| !v.is_finite())
            .unwrap_or(0);
        Err(SimError::NonFinite {
            time: self.time(),
            variable: self.core.layout.describe(idx),
            value: self.state[idx],
        })
    }

    /// Integrates the continuous part only (no events, rounds, or sampled
    /// updates) for `duration` with an explicit step; analysis helper for
    /// convergence studies. Leaves the discrete clocks untouched.
    pub fn integrate_segment(&mut self, duration: f64, dt: f64) -> Result<(), SimError> {
        let steps = (duration / dt).round() as u64;
        let t0 = self.time();
        let saved_dt = self.dt;
        self.dt = dt;
        for k in 0..steps {
            let t = t0 + k as f64 * dt;
            self.rk4_advance(t);
        }
        self.dt = saved_dt;
        let sum: f64 = self.state.iter().sum();
        if !sum.is_finite() {
            let idx = self.state.iter().position(|v| !v.is_finite()).unwrap_or(0);
            return Err(SimError::NonFinite {
                time: t0,
                variable: self.core.layout.describe(idx),
                value: self.state[idx],
            });
        }
        Ok(())
    }

    /// Current trace row.
    pub fn record_row(&self) -> TraceRecord {
        let t = self.time();
        let n = self.core.layout.n_cigs;
        let per_cig = (0..n)
            .map(|i| {
                let o = self.core.observables(t, &self.state, i);
                CigSample {
                    omega: o.omega,
                    vmag: o.meas.vmag,
                    p: o.meas.p,
                    q: o.meas.q,
                    vbar_est: self.consensus[i].x,
                    p_vav: self.core.p_vav[i],
                    p_vind: o.p_vind,
                    q_vind: o.q_vind,
                }
            })
            .collect();
        TraceRecord { t, per_cig }
    }
}

/// Result of a full scenario run.
pub struct CaseResult {
    pub trace: Trace,
    pub summary: Summary,
}

/// Runs a validated scenario to completion, collecting the decimated trace
/// and the summary metrics.
pub fn run_case(cfg: &ScenarioConfig) -> Result<CaseResult, SimError> {
    let started = std::time::Instant::now();
    let mut sim = Simulation::new(cfg)?;
    let steps_per_trace = (cfg.system.trace_period / cfg.timing.dt).round() as u64;
    let mut trace = Trace::new(cfg.controller.label().to_string(), cfg.cigs.len());
    while !sim.finished() {
        if sim.step_index % steps_per_trace == 0 {
            trace.rows.push(sim.record_row());
        }
        sim.step()?;
    }
    trace.rows.push(sim.record_row());
    let wall_seconds = started.elapsed().as_secs_f64();
    let summary = crate::trace::summarize(&trace, cfg, wall_seconds);
    Ok(CaseResult { trace, summary })
}

#[cfg(test)]
mod tests;
