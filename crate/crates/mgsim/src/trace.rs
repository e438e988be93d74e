//! Run outputs: decimated CSV traces, per-run summary metrics, and the
//! cross-case ordering comparison.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::scenario::{EventKind, ScenarioConfig};

/// Per-CIG sample at one trace instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CigSample {
    pub omega: f64,
    pub vmag: f64,
    pub p: f64,
    pub q: f64,
    pub vbar_est: f64,
    pub p_vav: f64,
    pub p_vind: f64,
    pub q_vind: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub per_cig: Vec<CigSample>,
}

/// Decimated run trace.
#[derive(Debug, Clone)]
pub struct Trace {
    pub case: String,
    pub n_cigs: usize,
    pub rows: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(case: String, n_cigs: usize) -> Self {
        Trace {
            case,
            n_cigs,
            rows: Vec::new(),
        }
    }

    /// Writes the CSV: a header row, then one row per instant with the
    /// per-CIG column groups in fixed order.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        write!(w, "t")?;
        for i in 1..=self.n_cigs {
            write!(
                w,
                ",omega_{i},vmag_{i},p_{i},q_{i},vbar_est_{i},p_vav_{i},p_vind_{i},q_vind_{i}"
            )?;
        }
        writeln!(w)?;
        for row in &self.rows {
            write!(w, "{}", row.t)?;
            for s in &row.per_cig {
                write!(
                    w,
                    ",{},{},{},{},{},{},{},{}",
                    s.omega, s.vmag, s.p, s.q, s.vbar_est, s.p_vav, s.p_vind, s.q_vind
                )?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to vec");
        String::from_utf8(buf).expect("csv is utf8")
    }
}

/// Frequency-restoration check after one disturbance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Restoration {
    pub event_time: f64,
    /// Start of the checked window (event + 5 s).
    pub settle_deadline: f64,
    /// max over CIGs and trace rows in [deadline, next disturbance) of
    /// |ω − ω_s|.
    pub max_abs_freq_err_after: f64,
    pub ok: bool,
}

/// Largest post-step active-power deviation per CIG for one load step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepDeviation {
    pub event_time: f64,
    pub dp_per_cig: Vec<f64>,
}

/// Steady-state and event metrics of one run. All window statistics use the
/// final `window` span of the trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub case: String,
    pub scenario: String,
    pub scenario_fingerprint: String,
    pub n_cigs: usize,
    pub duration: f64,
    pub dt: f64,
    pub omega_s: f64,
    pub v_nominal: f64,
    pub window_start: f64,
    pub window_end: f64,
    /// max |ω − ω_s| over the final window, all CIGs.
    pub freq_err_final_max: f64,
    pub restorations: Vec<Restoration>,
    /// Time-average over the final window of the CIG-mean ‖v_o‖.
    pub mean_vmag: f64,
    pub mean_vmag_err: f64,
    pub vmag_err_per_cig: Vec<f64>,
    pub vmag_err_max: f64,
    pub p_mean: Vec<f64>,
    pub q_mean: Vec<f64>,
    /// Max pairwise relative deviation of the window-averaged P (resp. Q).
    pub p_dispersion: f64,
    pub q_dispersion: f64,
    pub p_vind_abs_max: f64,
    pub q_vind_abs_max: f64,
    pub step_deviations: Vec<StepDeviation>,
    pub wall_seconds: f64,
}

/// Max pairwise relative deviation: (max − min) / |mean|.
pub fn dispersion(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (max - min) / mean.abs().max(1e-9)
}

pub fn summarize(trace: &Trace, cfg: &ScenarioConfig, wall_seconds: f64) -> Summary {
    let n = trace.n_cigs;
    let omega_s = cfg.system.omega_s();
    let v_s = cfg.system.v_nominal;
    let duration = cfg.timing.duration;
    let w0 = (duration - 2.0).max(0.0);

    let window: Vec<&TraceRecord> = trace
        .rows
        .iter()
        .filter(|r| r.t >= w0 - 1e-9)
        .collect();
    let count = window.len().max(1) as f64;

    let mut p_mean = vec![0.0; n];
    let mut q_mean = vec![0.0; n];
    let mut vmag_mean = vec![0.0; n];
    let mut freq_err_final_max: f64 = 0.0;
    for row in &window {
        for (i, s) in row.per_cig.iter().enumerate() {
            p_mean[i] += s.p;
            q_mean[i] += s.q;
            vmag_mean[i] += s.vmag;
            freq_err_final_max = freq_err_final_max.max((s.omega - omega_s).abs());
        }
    }
    for i in 0..n {
        p_mean[i] /= count;
        q_mean[i] /= count;
        vmag_mean[i] /= count;
    }
    let mean_vmag = vmag_mean.iter().sum::<f64>() / n.max(1) as f64;
    let vmag_err_per_cig: Vec<f64> = vmag_mean.iter().map(|v| (v - v_s).abs()).collect();
    let vmag_err_max = vmag_err_per_cig.iter().cloned().fold(0.0, f64::max);

    let mut p_vind_abs_max: f64 = 0.0;
    let mut q_vind_abs_max: f64 = 0.0;
    for row in &trace.rows {
        for s in &row.per_cig {
            p_vind_abs_max = p_vind_abs_max.max(s.p_vind.abs());
            q_vind_abs_max = q_vind_abs_max.max(s.q_vind.abs());
        }
    }

    // disturbances = load steps and individual-voltage triggers
    let mut disturbances: Vec<f64> = cfg
        .events
        .iter()
        .filter(|e| {
            matches!(
                e.kind,
                EventKind::LoadStep { .. } | EventKind::TriggerIndVoltage { .. }
            )
        })
        .map(|e| e.time)
        .collect();
    disturbances.sort_by(f64::total_cmp);

    let mut restorations = Vec::new();
    for (k, &t_ev) in disturbances.iter().enumerate() {
        let deadline = t_ev + 5.0;
        let end = disturbances.get(k + 1).copied().unwrap_or(duration);
        let mut max_err: Option<f64> = None;
        for row in trace
            .rows
            .iter()
            .filter(|r| r.t >= deadline - 1e-9 && r.t < end - 1e-9)
        {
            for s in &row.per_cig {
                let e = (s.omega - omega_s).abs();
                max_err = Some(max_err.map_or(e, |m| m.max(e)));
            }
        }
        restorations.push(Restoration {
            event_time: t_ev,
            settle_deadline: deadline,
            max_abs_freq_err_after: max_err.unwrap_or(f64::NAN),
            ok: max_err.is_some_and(|m| m <= 1e-3),
        });
    }

    // post-step power deviations for the nearest-CIG property
    let mut step_deviations = Vec::new();
    for ev in &cfg.events {
        if let EventKind::LoadStep { .. } = ev.kind {
            let t_ev = ev.time;
            let mut base = vec![0.0; n];
            let mut base_count = 0usize;
            for row in trace
                .rows
                .iter()
                .filter(|r| r.t >= t_ev - 0.5 - 1e-9 && r.t < t_ev - 1e-9)
            {
                for (i, s) in row.per_cig.iter().enumerate() {
                    base[i] += s.p;
                }
                base_count += 1;
            }
            if base_count > 0 {
                for b in &mut base {
                    *b /= base_count as f64;
                }
            }
            let mut dp = vec![0.0; n];
            for row in trace
                .rows
                .iter()
                .filter(|r| r.t > t_ev + 1e-9 && r.t <= t_ev + 1.0 + 1e-9)
            {
                for (i, s) in row.per_cig.iter().enumerate() {
                    dp[i] = dp[i].max((s.p - base[i]).abs());
                }
            }
            step_deviations.push(StepDeviation {
                event_time: t_ev,
                dp_per_cig: dp,
            });
        }
    }

    Summary {
        case: trace.case.clone(),
        scenario: cfg.name.clone(),
        scenario_fingerprint: cfg.fingerprint(),
        n_cigs: n,
        duration,
        dt: cfg.timing.dt,
        omega_s,
        v_nominal: v_s,
        window_start: w0,
        window_end: duration,
        freq_err_final_max,
        restorations,
        mean_vmag,
        mean_vmag_err: (mean_vmag - v_s).abs(),
        vmag_err_per_cig,
        vmag_err_max,
        p_mean,
        q_mean,
        p_dispersion: dispersion(&p_mean),
        q_dispersion: dispersion(&q_mean),
        p_vind_abs_max,
        q_vind_abs_max,
        step_deviations,
        wall_seconds,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub checks: Vec<Check>,
    pub all_pass: bool,
}

impl ComparisonReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(if c.pass { "PASS " } else { "FAIL " });
            out.push_str(&c.name);
            out.push_str(": ");
            out.push_str(&c.detail);
            out.push('\n');
        }
        out.push_str(if self.all_pass {
            "all orderings hold\n"
        } else {
            "ordering violations present\n"
        });
        out
    }
}

/// `b` exceeds `a` by at least the 10% relative margin.
fn margin_gt(b: f64, a: f64) -> bool {
    b >= 1.1 * a && b > a
}

/// Checks the cross-case trade-off orderings on four run summaries
/// (case 1, case 2, case 3, case 4/pfqv, in that order).
pub fn compare_cases(summaries: &[Summary]) -> Result<ComparisonReport, ConfigError> {
    if summaries.len() != 4 {
        return Err(ConfigError::Invalid(format!(
            "compare needs exactly 4 case summaries, got {}",
            summaries.len()
        )));
    }
    let fp = &summaries[0].scenario_fingerprint;
    if summaries.iter().any(|s| &s.scenario_fingerprint != fp) {
        return Err(ConfigError::Invalid(
            "case summaries come from different physical scenarios (fingerprint mismatch)".into(),
        ));
    }

    let q: Vec<f64> = summaries.iter().map(|s| s.q_dispersion).collect();
    let p: Vec<f64> = summaries.iter().map(|s| s.p_dispersion).collect();
    let v: Vec<f64> = summaries.iter().map(|s| s.vmag_err_max).collect();

    let mut checks = Vec::new();
    let mut add = |name: String, pass: bool, detail: String| {
        checks.push(Check { name, pass, detail });
    };

    for (lo, hi) in [(0usize, 1usize), (1, 2), (2, 3)] {
        add(
            format!("q_dispersion case{} < case{}", lo + 1, hi + 1),
            margin_gt(q[hi], q[lo]),
            format!("{:.4e} < {:.4e} (margin 10%)", q[lo], q[hi]),
        );
    }
    add(
        "p_dispersion case1 < case2".into(),
        margin_gt(p[1], p[0]),
        format!("{:.4e} < {:.4e} (margin 10%)", p[0], p[1]),
    );
    add(
        "p_dispersion case4 < case2".into(),
        margin_gt(p[1], p[3]),
        format!("{:.4e} < {:.4e} (margin 10%)", p[3], p[1]),
    );
    add(
        "p_dispersion case2 < case3".into(),
        margin_gt(p[2], p[1]),
        format!("{:.4e} < {:.4e} (margin 10%)", p[1], p[2]),
    );
    add(
        "voltage_error case1 > case2".into(),
        margin_gt(v[0], v[1]),
        format!("{:.3} V > {:.3} V (margin 10%)", v[0], v[1]),
    );
    add(
        "voltage_error case2 > case3".into(),
        margin_gt(v[1], v[2]),
        format!("{:.3} V > {:.3} V (margin 10%)", v[1], v[2]),
    );
    add(
        "voltage_error case3 ~ case4 (both exact)".into(),
        v[2] <= 0.5 && v[3] <= 0.5,
        format!("{:.3} V and {:.3} V, both within 0.5 V", v[2], v[3]),
    );

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(ComparisonReport { checks, all_pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dummy_summary(case: &str, p: f64, q: f64, v: f64) -> Summary {
        Summary {
            case: case.into(),
            scenario: "ref".into(),
            scenario_fingerprint: "f00d".into(),
            n_cigs: 4,
            duration: 60.0,
            dt: 4e-6,
            omega_s: 314.159,
            v_nominal: 400.0,
            window_start: 58.0,
            window_end: 60.0,
            freq_err_final_max: 1e-4,
            restorations: vec![],
            mean_vmag: 400.0,
            mean_vmag_err: 0.0,
            vmag_err_per_cig: vec![v; 4],
            vmag_err_max: v,
            p_mean: vec![20000.0; 4],
            q_mean: vec![4000.0; 4],
            p_dispersion: p,
            q_dispersion: q,
            p_vind_abs_max: 0.0,
            q_vind_abs_max: 0.0,
            step_deviations: vec![],
            wall_seconds: 1.0,
        }
    }

    #[test]
    fn dispersion_is_max_pairwise_over_mean() {
        assert_eq!(dispersion(&[1.0, 1.0, 1.0]), 0.0);
        let d = dispersion(&[9.0, 10.0, 11.0]);
        assert!((d - 0.2).abs() < 1e-12);
    }

    #[test]
    fn orderings_pass_on_well_separated_cases() {
        let s = vec![
            dummy_summary("case1", 0.005, 0.005, 4.0),
            dummy_summary("case2", 0.05, 0.3, 1.5),
            dummy_summary("case3", 0.12, 0.6, 0.05),
            dummy_summary("case4", 0.004, 1.1, 0.03),
        ];
        let report = compare_cases(&s).unwrap();
        assert!(report.all_pass, "{}", report.render());
    }

    #[test]
    fn identical_summaries_fail_strict_orderings() {
        let s = vec![
            dummy_summary("case1", 0.05, 0.3, 1.0),
            dummy_summary("case2", 0.05, 0.3, 1.0),
            dummy_summary("case3", 0.05, 0.3, 1.0),
            dummy_summary("case4", 0.05, 0.3, 1.0),
        ];
        let report = compare_cases(&s).unwrap();
        assert!(!report.all_pass);
    }

    #[test]
    fn wrong_length_is_an_error() {
        let s = vec![dummy_summary("case1", 0.1, 0.1, 1.0)];
        assert!(compare_cases(&s).is_err());
    }

    #[test]
    fn fingerprint_mismatch_is_an_error() {
        let mut s = vec![
            dummy_summary("case1", 0.005, 0.005, 4.0),
            dummy_summary("case2", 0.05, 0.3, 1.5),
            dummy_summary("case3", 0.12, 0.6, 0.05),
            dummy_summary("case4", 0.004, 1.1, 0.03),
        ];
        s[2].scenario_fingerprint = "beef".into();
        assert!(compare_cases(&s).is_err());
    }

    #[test]
    fn csv_layout_is_stable() {
        let mut trace = Trace::new("case1".into(), 2);
        trace.rows.push(TraceRecord {
            t: 0.0,
            per_cig: vec![
                CigSample {
                    omega: 314.0,
                    vmag: 400.0,
                    p: 1.0,
                    q: 2.0,
                    vbar_est: 399.0,
                    p_vav: 3.0,
                    p_vind: 0.0,
                    q_vind: 0.0,
                },
                CigSample {
                    omega: 314.1,
                    vmag: 401.0,
                    p: 1.5,
                    q: 2.5,
                    vbar_est: 399.0,
                    p_vav: 3.0,
                    p_vind: 0.0,
                    q_vind: 0.0,
                },
            ],
        });
        let csv = trace.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,omega_1,vmag_1,p_1,q_1,vbar_est_1,p_vav_1,p_vind_1,q_vind_1,omega_2,vmag_2,p_2,q_2,vbar_est_2,p_vav_2,p_vind_2,q_vind_2"
        );
        assert_eq!(
            lines.next().unwrap(),
            "0,314,400,1,2,399,3,0,0,314.1,401,1.5,2.5,399,3,0,0"
        );
    }
}
