use std::fmt::Write as _;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::controllers::{tracking_error, ReferenceSample, TrackingError};
use crate::dynamics::AttitudeState;
use crate::error::{Error, Result};
use crate::lnmpc::SolveStatus;

pub const CSV_COLUMNS: [&str; 21] = [
    "t",
    "phi",
    "theta",
    "psi",
    "dphi",
    "dtheta",
    "dpsi",
    "phi_d",
    "theta_d",
    "psi_d",
    "tau_phi",
    "tau_theta",
    "tau_psi",
    "tau_phi_raw",
    "tau_theta_raw",
    "tau_psi_raw",
    "v_smc",
    "contraction_lhs",
    "contraction_rhs",
    "sqp_iters",
    "solve_ms",
];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LogHeader {
    pub scenario: String,
    pub controller: String,
    pub seed: u64,
    pub dt: f64,
    pub u_max: [f64; 3],
    /// Additional `key=value` pairs echoed verbatim.
    pub extra: Vec<(String, String)>,
}

/// One control step. `state` is the true plant state at `t`; the sliding
/// value and contraction terms are evaluated at the state the controller saw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub state: AttitudeState,
    pub reference: ReferenceSample,
    /// Torque commanded after saturation, before any input disturbance.
    pub applied: Vector3<f64>,
    /// Controller output before saturation.
    pub raw: Vector3<f64>,
    pub v_smc: f64,
    /// `V̇` at the applied torque.
    pub contraction_lhs: f64,
    /// Decrease rate guaranteed by the sliding-mode law.
    pub contraction_rhs: f64,
    /// Zero for the baseline controllers.
    pub sqp_iters: usize,
    pub solve_ms: f64,
    /// Not serialized to CSV.
    pub status: Option<SolveStatus>,
}

impl LogRecord {
    pub fn error(&self) -> TrackingError {
        tracking_error(&self.state, &self.reference)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub header: LogHeader,
    pub records: Vec<LogRecord>,
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && v.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn format_vec3(v: &[f64; 3]) -> String {
    v.iter().map(|x| format_f64(*x)).collect::<Vec<_>>().join(",")
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Equality on everything the CSV stores except the wall-clock solve time.
    pub fn same_trajectory(&self, other: &Self) -> bool {
        self.header == other.header
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                let mut b = *b;
                b.solve_ms = a.solve_ms;
                b.status = a.status;
                *a == b
            })
    }

    pub fn mean_solve_ms(&self) -> Option<f64> {
        let timed: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.sqp_iters > 0)
            .map(|r| r.solve_ms)
            .collect();
        (!timed.is_empty()).then(|| timed.iter().sum::<f64>() / timed.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let h = &self.header;
        let mut out = String::new();
        let _ = writeln!(out, "# scenario={}", h.scenario);
        let _ = writeln!(out, "# controller={}", h.controller);
        let _ = writeln!(out, "# seed={}", h.seed);
        let _ = writeln!(out, "# dt={}", format_f64(h.dt));
        let _ = writeln!(out, "# u_max={}", format_vec3(&h.u_max));
        for (k, v) in &h.extra {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(&CSV_COLUMNS.join(","));
        out.push('\n');
        for r in &self.records {
            let mut fields: Vec<String> = Vec::with_capacity(CSV_COLUMNS.len());
            fields.push(format_f64(r.t));
            fields.extend(r.state.to_vector().iter().map(|v| format_f64(*v)));
            fields.extend(r.reference.xi1d.iter().map(|v| format_f64(*v)));
            fields.extend(r.applied.iter().map(|v| format_f64(*v)));
            fields.extend(r.raw.iter().map(|v| format_f64(*v)));
            fields.push(format_f64(r.v_smc));
            fields.push(format_f64(r.contraction_lhs));
            fields.push(format_f64(r.contraction_rhs));
            fields.push(r.sqp_iters.to_string());
            fields.push(format_f64(r.solve_ms));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses [`TrajectoryLog::to_csv`] output. Reference rates are not
    /// stored in the file; they are re-evaluated from the named scenario
    /// when it is a built-in one and left at zero otherwise.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut header = LogHeader::default();
        let mut columns_seen = false;
        let mut records = Vec::new();
        let scenario_for = |name: &str| Scenario::from_id(name).ok();
        let mut scenario: Option<Scenario> = None;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let err = |message: String| Error::Csv { line: lineno, message };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| err("header line is not `# key=value`".into()))?;
                let (k, v) = (k.trim(), v.trim());
                let num = |v: &str| v.parse::<f64>().map_err(|e| err(format!("`{k}`: {e}")));
                match k {
                    "scenario" => {
                        header.scenario = v.to_string();
                        scenario = scenario_for(v);
                    }
                    "controller" => header.controller = v.to_string(),
                    "seed" => {
                        header.seed = v.parse().map_err(|e| err(format!("`seed`: {e}")))?
                    }
                    "dt" => header.dt = num(v)?,
                    "u_max" => {
                        let parts: Vec<&str> = v.split(',').collect();
                        if parts.len() != 3 {
                            return Err(err("`u_max` needs three comma-separated values".into()));
                        }
                        for (slot, p) in header.u_max.iter_mut().zip(parts) {
                            *slot = num(p)?;
                        }
                    }
                    _ => header.extra.push((k.to_string(), v.to_string())),
                }
                continue;
            }
            if !columns_seen {
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols != CSV_COLUMNS {
                    return Err(err("unexpected column header".into()));
                }
                columns_seen = true;
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != CSV_COLUMNS.len() {
                return Err(err(format!(
                    "expected {} fields, got {}",
                    CSV_COLUMNS.len(),
                    cells.len()
                )));
            }
            let mut v = [0.0; 21];
            for (i, c) in cells.iter().enumerate() {
                if i == 19 {
                    continue;
                }
                v[i] = c
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| err(format!("column `{}`: {e}", CSV_COLUMNS[i])))?;
            }
            let sqp_iters = cells[19]
                .trim()
                .parse::<usize>()
                .map_err(|e| err(format!("column `sqp_iters`: {e}")))?;
            let t = v[0];
            let xi1d = Vector3::new(v[7], v[8], v[9]);
            let reference = match &scenario {
                Some(sc) => {
                    let r = sc.reference(t);
                    ReferenceSample::new(xi1d, r.xi2d, r.xi2d_dot)
                }
                None => ReferenceSample::hold(xi1d),
            };
            records.push(LogRecord {
                t,
                state: AttitudeState::new(
                    Vector3::new(v[1], v[2], v[3]),
                    Vector3::new(v[4], v[5], v[6]),
                ),
                reference,
                applied: Vector3::new(v[10], v[11], v[12]),
                raw: Vector3::new(v[13], v[14], v[15]),
                v_smc: v[16],
                contraction_lhs: v[17],
                contraction_rhs: v[18],
                sqp_iters,
                solve_ms: v[20],
                status: None,
            });
        }
        if !columns_seen {
            return Err(Error::Csv {
                line: text.lines().count(),
                message: "missing column header".into(),
            });
        }
        Ok(Self { header, records })
    }
}
