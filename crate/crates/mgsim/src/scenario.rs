//! Scenario configuration: file schema, loading, and validation.
//!
//! Scenarios are TOML files with nested tables for CIGs, lines, loads, the
//! communication graph and the event schedule; see the reference files under
//! `scenarios/` and the schema walk-through in the repository README.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::comm::CommGraph;
use crate::error::ConfigError;
use crate::freq_control::DroopParams;
use crate::inner_control::InnerGains;
use crate::pfqv::PfqvParams;
use crate::plant::{CigParams, LineParams, LoadParams, Topology};
use crate::voltage_reg::{
    consensus_stability_probe, AvgVoltGains, ConsensusParams, IndVoltGains,
};

/// Which controller a run uses. `Case1`–`Case3` are the tunable scheme under
/// the three reference operating modes, `Pfqv` the baseline, `Custom` the
/// tunable scheme with an unconstrained event schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerChoice {
    Case1,
    Case2,
    Case3,
    Pfqv,
    Custom,
}

impl ControllerChoice {
    pub fn family(self) -> ControllerFamily {
        match self {
            ControllerChoice::Pfqv => ControllerFamily::Pfqv,
            _ => ControllerFamily::Proposed,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ControllerChoice::Case1 => "case1",
            ControllerChoice::Case2 => "case2",
            ControllerChoice::Case3 => "case3",
            ControllerChoice::Pfqv => "case4",
            ControllerChoice::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerFamily {
    Proposed,
    Pfqv,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Timing {
    /// Integration step (s).
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Communication period (s); must be an integer multiple of `dt`.
    pub t1: f64,
    /// Sampling period of the average-voltage PI (s); an integer multiple of `t1`.
    pub t2: f64,
    pub duration: f64,
}

fn default_dt() -> f64 {
    5e-5
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SystemParams {
    /// Nominal system frequency (Hz); the D-Q frame rotates at 2π·f.
    #[serde(default = "default_f_nominal")]
    pub f_nominal_hz: f64,
    /// Nominal CIG output voltage magnitude V_s (V).
    pub v_nominal: f64,
    /// Virtual shunt resistance at network buses (Ω).
    #[serde(default = "default_r_shunt")]
    pub r_shunt: f64,
    pub n_buses: usize,
    #[serde(default)]
    pub seed: u64,
    /// Trace decimation period (s).
    #[serde(default = "default_trace_period")]
    pub trace_period: f64,
}

fn default_f_nominal() -> f64 {
    50.0
}

fn default_r_shunt() -> f64 {
    50.0
}

fn default_trace_period() -> f64 {
    1e-3
}

impl SystemParams {
    pub fn omega_s(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f_nominal_hz
    }
}

/// One CIG: electrical parameters plus its control constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CigConfig {
    pub bus: usize,
    pub r_f: f64,
    pub l_f: f64,
    pub c_f: f64,
    pub r_c: f64,
    pub l_c: f64,
    /// Q-ω droop coefficient (rad/s per var).
    pub m_droop: f64,
    #[serde(default)]
    pub p_nom: f64,
    #[serde(default)]
    pub q_nom: f64,
    /// Average-voltage sharing gain n_i.
    #[serde(default = "default_one")]
    pub n_share: f64,
    /// Pinning gain; positive on exactly one CIG.
    #[serde(default)]
    pub b_pin: f64,
}

fn default_one() -> f64 {
    1.0
}

impl CigConfig {
    pub fn electrical(&self) -> CigParams {
        CigParams {
            r_f: self.r_f,
            l_f: self.l_f,
            c_f: self.c_f,
            r_c: self.r_c,
            l_c: self.l_c,
            bus: self.bus,
        }
    }

    pub fn droop(&self) -> DroopParams {
        DroopParams {
            m: self.m_droop,
            q_nom: self.q_nom,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommConfig {
    /// Undirected edges as CIG index pairs.
    pub edges: Vec<(usize, usize)>,
    #[serde(default)]
    pub drop_prob: f64,
    #[serde(default)]
    pub delay_rounds: u32,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SecondaryFreqConfig {
    #[serde(default = "default_c_f")]
    pub c_f: f64,
}

impl Default for SecondaryFreqConfig {
    fn default() -> Self {
        SecondaryFreqConfig { c_f: default_c_f() }
    }
}

fn default_c_f() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TriggerKind {
    /// Triggered only by scheduled `trigger_ind_voltage` events.
    #[default]
    Scheduled,
    /// Triggered when |‖v_o‖ − V_s| exceeds a threshold for a dwell time.
    Band,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IndVoltConfig {
    pub kp_p: f64,
    pub kp_q: f64,
    #[serde(default)]
    pub ki_p: f64,
    #[serde(default)]
    pub ki_q: f64,
    #[serde(default)]
    pub trigger: TriggerKind,
    #[serde(default)]
    pub band_threshold: f64,
    #[serde(default)]
    pub band_dwell: f64,
    #[serde(default = "default_band_mode")]
    pub band_mode: u8,
}

fn default_band_mode() -> u8 {
    2
}

impl IndVoltConfig {
    pub fn gains(&self) -> IndVoltGains {
        IndVoltGains {
            kp_p: self.kp_p,
            ki_p: self.ki_p,
            kp_q: self.kp_q,
            ki_q: self.ki_q,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConsensusConfig {
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Estimator integral gain; derived from the graph degree when omitted.
    pub k_i: Option<f64>,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        ConsensusConfig {
            rho: default_rho(),
            k_i: None,
        }
    }
}

fn default_rho() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetpointField {
    PNom,
    QNom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerSwitch {
    Consensus,
    AvgVoltagePi,
    SecondaryFreq,
    PfqvSecondary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Replace a load's R and L.
    LoadStep { load: usize, r: f64, l: f64 },
    /// Linearly ramp a CIG setpoint from `from` to `to` over
    /// [`time`, `t_end`]; the value holds at `to` afterwards.
    RampSetpoint {
        cig: usize,
        field: SetpointField,
        from: f64,
        to: f64,
        t_end: f64,
    },
    EnableController { name: ControllerSwitch },
    TriggerIndVoltage { cigs: Vec<usize>, mode: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Raw file schema before validation.
#[derive(Debug, Clone, Deserialize)]
struct RawScenario {
    name: String,
    controller: ControllerChoice,
    timing: Timing,
    system: SystemParams,
    #[serde(default, rename = "cig")]
    cigs: Vec<CigConfig>,
    #[serde(default, rename = "line")]
    lines: Vec<LineParams>,
    #[serde(default, rename = "load")]
    loads: Vec<LoadParams>,
    comm: CommConfig,
    inner: InnerGains,
    #[serde(default)]
    secondary_freq: SecondaryFreqConfig,
    #[serde(default)]
    consensus: ConsensusConfig,
    avg_voltage: Option<AvgVoltGains>,
    ind_voltage: Option<IndVoltConfig>,
    pfqv: Option<PfqvParams>,
    #[serde(default, rename = "event")]
    events: Vec<Event>,
}

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub controller: ControllerChoice,
    pub timing: Timing,
    pub system: SystemParams,
    pub cigs: Vec<CigConfig>,
    pub lines: Vec<LineParams>,
    pub loads: Vec<LoadParams>,
    pub comm: CommConfig,
    pub comm_graph: CommGraph,
    pub inner: InnerGains,
    pub secondary_freq: SecondaryFreqConfig,
    pub consensus: ConsensusParams,
    pub avg_voltage: Option<AvgVoltGains>,
    pub ind_voltage: Option<IndVoltConfig>,
    pub pfqv: Option<PfqvParams>,
    /// Sorted by time.
    pub events: Vec<Event>,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_toml_str(&text, &path.display().to_string())
}

pub fn from_toml_str(text: &str, origin: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    validate(raw)
}

/// Checks that `whole`/`part` is a positive integer ratio (to float
/// tolerance) and returns it.
fn integer_ratio(whole: f64, part: f64, what: &str) -> Result<u64, ConfigError> {
    if !(part > 0.0) || !(whole > 0.0) {
        return Err(ConfigError::Invalid(format!(
            "{what}: both quantities must be positive (got {whole} / {part})"
        )));
    }
    let ratio = whole / part;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-6 * n {
        return Err(ConfigError::Invalid(format!(
            "{what}: {whole} is not an integer multiple of {part}"
        )));
    }
    Ok(n as u64)
}

fn require_positive(value: f64, what: &str) -> Result<(), ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!(
            "{what} must be strictly positive, got {value}"
        )))
    }
}

fn require_non_negative(value: f64, what: &str) -> Result<(), ConfigError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!(
            "{what} must be non-negative, got {value}"
        )))
    }
}

fn validate(raw: RawScenario) -> Result<ScenarioConfig, ConfigError> {
    let RawScenario {
        name,
        controller,
        timing,
        system,
        cigs,
        lines,
        loads,
        comm,
        inner,
        secondary_freq,
        consensus,
        avg_voltage,
        ind_voltage,
        pfqv,
        mut events,
    } = raw;

    // -- timing ----------------------------------------------------------
    integer_ratio(timing.t1, timing.dt, "timing: t1 vs dt")?;
    integer_ratio(timing.t2, timing.t1, "timing: t2 vs t1")?;
    integer_ratio(system.trace_period, timing.dt, "timing: trace_period vs dt")?;
    integer_ratio(timing.duration, timing.dt, "timing: duration vs dt")?;
    integer_ratio(timing.duration, system.trace_period, "timing: duration vs trace_period")?;
    if timing.t2 <= timing.t1 {
        return Err(ConfigError::Invalid(format!(
            "timing: t2 ({}) must exceed t1 ({})",
            timing.t2, timing.t1
        )));
    }

    // -- system ----------------------------------------------------------
    require_positive(system.f_nominal_hz, "system.f_nominal_hz")?;
    require_positive(system.v_nominal, "system.v_nominal")?;
    require_positive(system.r_shunt, "system.r_shunt")?;
    if system.n_buses == 0 {
        return Err(ConfigError::Invalid("system.n_buses must be at least 1".into()));
    }

    // -- components ------------------------------------------------------
    if cigs.is_empty() {
        return Err(ConfigError::Invalid("at least one [[cig]] is required".into()));
    }
    for (i, c) in cigs.iter().enumerate() {
        for (v, what) in [
            (c.r_f, "r_f"),
            (c.l_f, "l_f"),
            (c.c_f, "c_f"),
            (c.r_c, "r_c"),
            (c.l_c, "l_c"),
            (c.m_droop, "m_droop"),
            (c.n_share, "n_share"),
        ] {
            require_positive(v, &format!("cig {i}: {what}"))?;
        }
        require_non_negative(c.b_pin, &format!("cig {i}: b_pin"))?;
        if c.bus >= system.n_buses {
            return Err(ConfigError::Invalid(format!(
                "cig {i}: bus {} out of range (n_buses = {})",
                c.bus, system.n_buses
            )));
        }
    }
    let pinned = cigs.iter().filter(|c| c.b_pin > 0.0).count();
    if pinned != 1 {
        return Err(ConfigError::Invalid(format!(
            "exactly one CIG must carry a positive pinning gain b_pin, found {pinned}"
        )));
    }
    for (j, l) in lines.iter().enumerate() {
        require_positive(l.r, &format!("line {j}: r"))?;
        require_positive(l.l, &format!("line {j}: l"))?;
        if l.from >= system.n_buses || l.to >= system.n_buses {
            return Err(ConfigError::Invalid(format!(
                "line {j}: bus out of range (n_buses = {})",
                system.n_buses
            )));
        }
        if l.from == l.to {
            return Err(ConfigError::Invalid(format!(
                "line {j}: from and to must differ"
            )));
        }
    }
    for (h, l) in loads.iter().enumerate() {
        require_positive(l.r, &format!("load {h}: r"))?;
        require_positive(l.l, &format!("load {h}: l"))?;
        if l.bus >= system.n_buses {
            return Err(ConfigError::Invalid(format!(
                "load {h}: bus {} out of range (n_buses = {})",
                l.bus, system.n_buses
            )));
        }
    }

    let topo = Topology {
        n_buses: system.n_buses,
        cigs: cigs.iter().map(|c| c.electrical()).collect(),
        lines: lines.clone(),
        loads: loads.clone(),
        r_shunt: system.r_shunt,
    };
    if let Err(stray) = topo.check_connected() {
        return Err(ConfigError::Invalid(format!(
            "electrical network is not connected; isolated or unreachable buses: {stray:?}"
        )));
    }

    // -- inner gains -----------------------------------------------------
    require_positive(inner.eps, "inner.eps")?;
    for (v, what) in [
        (inner.kp_vd, "kp_vd"),
        (inner.ki_vd, "ki_vd"),
        (inner.kp_v, "kp_v"),
        (inner.ki_v, "ki_v"),
        (inner.kp_i, "kp_i"),
        (inner.ki_i, "ki_i"),
        (inner.f_ff, "f_ff"),
    ] {
        require_non_negative(v, &format!("inner.{what}"))?;
    }

    // -- communication graph ---------------------------------------------
    let comm_graph = CommGraph::from_edges(cigs.len(), &comm.edges)?;
    if !(0.0..=1.0).contains(&comm.drop_prob) {
        return Err(ConfigError::Invalid(format!(
            "comm.drop_prob must be within [0, 1], got {}",
            comm.drop_prob
        )));
    }

    let consensus = ConsensusParams {
        rho: consensus.rho,
        k_i: consensus
            .k_i
            .unwrap_or_else(|| 1.0 / (1.0 + comm_graph.max_degree() as f64)),
    };
    if controller.family() == ControllerFamily::Proposed
        && !consensus_stability_probe(&comm_graph, &consensus)
    {
        return Err(ConfigError::Invalid(format!(
            "consensus estimator diverges on this communication graph with rho={}, k_i={}",
            consensus.rho, consensus.k_i
        )));
    }

    // -- controller-family requirements ------------------------------------
    match controller.family() {
        ControllerFamily::Proposed => {
            if avg_voltage.is_none() {
                return Err(ConfigError::Invalid(
                    "[avg_voltage] gains are required for this controller".into(),
                ));
            }
        }
        ControllerFamily::Pfqv => {
            if pfqv.is_none() {
                return Err(ConfigError::Invalid(
                    "[pfqv] parameters are required when controller = \"pfqv\"".into(),
                ));
            }
        }
    }
    if let Some(p) = &pfqv {
        require_positive(p.m_p, "pfqv.m_p")?;
        require_positive(p.n_q, "pfqv.n_q")?;
        require_non_negative(p.c_f, "pfqv.c_f")?;
        require_non_negative(p.c_v, "pfqv.c_v")?;
    }
    if let Some(g) = &avg_voltage {
        require_non_negative(g.kp, "avg_voltage.kp")?;
        require_non_negative(g.ki, "avg_voltage.ki")?;
    }
    if let Some(iv) = &ind_voltage {
        for (v, what) in [
            (iv.kp_p, "kp_p"),
            (iv.kp_q, "kp_q"),
            (iv.ki_p, "ki_p"),
            (iv.ki_q, "ki_q"),
        ] {
            require_non_negative(v, &format!("ind_voltage.{what}"))?;
        }
        if matches!(iv.trigger, TriggerKind::Band) {
            require_positive(iv.band_threshold, "ind_voltage.band_threshold")?;
            require_positive(iv.band_dwell, "ind_voltage.band_dwell")?;
            if !matches!(iv.band_mode, 1 | 2) {
                return Err(ConfigError::Invalid(format!(
                    "ind_voltage.band_mode must be 1 or 2, got {}",
                    iv.band_mode
                )));
            }
        }
    }

    // -- events ------------------------------------------------------------
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut consensus_on_at: Option<f64> = None;
    let mut has_trigger = false;
    for (idx, ev) in events.iter().enumerate() {
        if !(0.0..=timing.duration).contains(&ev.time) {
            return Err(ConfigError::Invalid(format!(
                "event {idx} at t={} lies outside [0, {}]",
                ev.time, timing.duration
            )));
        }
        if ev.time > 0.0 {
            integer_ratio(ev.time, timing.dt, &format!("event {idx} time vs dt"))?;
        }
        match &ev.kind {
            EventKind::LoadStep { load, r, l } => {
                if *load >= loads.len() {
                    return Err(ConfigError::Invalid(format!(
                        "event {idx}: load {load} out of range"
                    )));
                }
                require_positive(*r, &format!("event {idx}: load_step r"))?;
                require_positive(*l, &format!("event {idx}: load_step l"))?;
            }
            EventKind::RampSetpoint { cig, t_end, .. } => {
                if *cig >= cigs.len() {
                    return Err(ConfigError::Invalid(format!(
                        "event {idx}: cig {cig} out of range"
                    )));
                }
                if *t_end <= ev.time {
                    return Err(ConfigError::Invalid(format!(
                        "event {idx}: ramp t_end ({t_end}) must exceed its start time ({})",
                        ev.time
                    )));
                }
            }
            EventKind::EnableController { name } => {
                let ok = match (controller.family(), name) {
                    (ControllerFamily::Proposed, ControllerSwitch::PfqvSecondary) => false,
                    (ControllerFamily::Pfqv, ControllerSwitch::PfqvSecondary) => true,
                    (ControllerFamily::Pfqv, _) => false,
                    (ControllerFamily::Proposed, _) => true,
                };
                if !ok {
                    return Err(ConfigError::Invalid(format!(
                        "event {idx}: controller switch {name:?} does not belong to the {controller:?} controller"
                    )));
                }
                if *name == ControllerSwitch::Consensus {
                    consensus_on_at = Some(consensus_on_at.map_or(ev.time, |t: f64| t.min(ev.time)));
                }
                if *name == ControllerSwitch::AvgVoltagePi {
                    match consensus_on_at {
                        Some(t) if t <= ev.time => {}
                        _ => {
                            return Err(ConfigError::Invalid(format!(
                                "event {idx}: avg_voltage_pi enabled at t={} before the consensus estimator",
                                ev.time
                            )))
                        }
                    }
                }
            }
            EventKind::TriggerIndVoltage { cigs: ids, mode } => {
                has_trigger = true;
                if controller.family() == ControllerFamily::Pfqv {
                    return Err(ConfigError::Invalid(format!(
                        "event {idx}: trigger_ind_voltage is not available under pfqv"
                    )));
                }
                if !matches!(mode, 1 | 2) {
                    return Err(ConfigError::Invalid(format!(
                        "event {idx}: mode must be 1 or 2, got {mode}"
                    )));
                }
                for id in ids {
                    if *id >= cigs.len() {
                        return Err(ConfigError::Invalid(format!(
                            "event {idx}: cig {id} out of range"
                        )));
                    }
                }
                match controller {
                    ControllerChoice::Case1 => {
                        return Err(ConfigError::Invalid(
                            "case1 must not trigger the individual voltage controller".into(),
                        ))
                    }
                    ControllerChoice::Case2 if *mode != 1 => {
                        return Err(ConfigError::Invalid(
                            "case2 uses mode 1 (proportional-only) triggers".into(),
                        ))
                    }
                    ControllerChoice::Case3 if *mode != 2 => {
                        return Err(ConfigError::Invalid(
                            "case3 uses mode 2 (integral) triggers".into(),
                        ))
                    }
                    _ => {}
                }
            }
        }
    }
    let band = matches!(
        ind_voltage.as_ref().map(|iv| iv.trigger),
        Some(TriggerKind::Band)
    );
    if (has_trigger || band) && ind_voltage.is_none() {
        return Err(ConfigError::Invalid(
            "[ind_voltage] gains are required when the individual controller can trigger".into(),
        ));
    }
    if band && controller.family() == ControllerFamily::Pfqv {
        return Err(ConfigError::Invalid(
            "band trigger is not available under pfqv".into(),
        ));
    }
    match controller {
        ControllerChoice::Case2 | ControllerChoice::Case3 if !has_trigger && !band => {
            return Err(ConfigError::Invalid(format!(
                "{} requires an individual-voltage trigger",
                controller.label()
            )));
        }
        _ => {}
    }

    Ok(ScenarioConfig {
        name,
        controller,
        timing,
        system,
        cigs,
        lines,
        loads,
        comm,
        comm_graph,
        inner,
        secondary_freq,
        consensus,
        avg_voltage,
        ind_voltage,
        pfqv,
        events,
    })
}

impl ScenarioConfig {
    pub fn topology(&self) -> Topology {
        Topology {
            n_buses: self.system.n_buses,
            cigs: self.cigs.iter().map(|c| c.electrical()).collect(),
            lines: self.lines.clone(),
            loads: self.loads.clone(),
            r_shunt: self.system.r_shunt,
        }
    }

    /// Overrides dt and/or duration (CLI flags) and re-checks the timing
    /// invariants.
    pub fn apply_overrides(
        &mut self,
        dt: Option<f64>,
        duration: Option<f64>,
    ) -> Result<(), ConfigError> {
        if let Some(dt) = dt {
            self.timing.dt = dt;
        }
        if let Some(d) = duration {
            self.timing.duration = d;
        }
        integer_ratio(self.timing.t1, self.timing.dt, "timing: t1 vs dt")?;
        integer_ratio(
            self.system.trace_period,
            self.timing.dt,
            "timing: trace_period vs dt",
        )?;
        integer_ratio(self.timing.duration, self.timing.dt, "timing: duration vs dt")?;
        integer_ratio(
            self.timing.duration,
            self.system.trace_period,
            "timing: duration vs trace_period",
        )?;
        for (idx, ev) in self.events.iter().enumerate() {
            if ev.time > self.timing.duration {
                return Err(ConfigError::Invalid(format!(
                    "event {idx} at t={} lies outside the overridden duration {}",
                    ev.time, self.timing.duration
                )));
            }
            if ev.time > 0.0 {
                integer_ratio(ev.time, self.timing.dt, &format!("event {idx} time vs dt"))?;
            }
        }
        Ok(())
    }

    /// Hash of the physical scenario (topology, timing, load/ramp events),
    /// excluding controller selection and activation schedule. Used to check
    /// that a cross-case comparison ran on the same plant.
    pub fn fingerprint(&self) -> String {
        let mut text = String::new();
        use std::fmt::Write;
        let _ = write!(
            text,
            "buses={};f={};v={};rsh={};dur={}",
            self.system.n_buses,
            self.system.f_nominal_hz,
            self.system.v_nominal,
            self.system.r_shunt,
            self.timing.duration,
        );
        for c in &self.cigs {
            let _ = write!(
                text,
                ";cig={},{},{},{},{},{}",
                c.bus, c.r_f, c.l_f, c.c_f, c.r_c, c.l_c
            );
        }
        for l in &self.lines {
            let _ = write!(text, ";line={},{},{},{}", l.from, l.to, l.r, l.l);
        }
        for l in &self.loads {
            let _ = write!(text, ";load={},{},{}", l.bus, l.r, l.l);
        }
        for ev in &self.events {
            match &ev.kind {
                EventKind::LoadStep { load, r, l } => {
                    let _ = write!(text, ";step@{}={},{},{}", ev.time, load, r, l);
                }
                EventKind::RampSetpoint {
                    cig,
                    field,
                    from,
                    to,
                    t_end,
                } => {
                    let _ = write!(
                        text,
                        ";ramp@{}={},{:?},{},{},{}",
                        ev.time, cig, field, from, to, t_end
                    );
                }
                _ => {}
            }
        }
        format!("{:016x}", fnv1a(text.as_bytes()))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
