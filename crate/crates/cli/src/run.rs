//! Bound evaluation for one efficiency value, and sweeps over η.

use postsel::bell::{behaviour_from_state, evaluate as bell_evaluate, ps_lhv_bound, quantum_max_tilted, BellFunctional, VIOLATION_MARGIN};
use postsel::conic::SolveOptions;
use postsel::hermitian::HermitianMatrix;
use postsel::multipartite::{tri_assemblage, tri_evaluate, tri_ps_lhs_bound, TriFunctional};
use postsel::scenario::{apply_loss, assemblage_from_state, post_select, projectors, MeasurementSet};
use postsel::steering::{
    analytic_upper_bound, cos_theta, evaluate, projective_functional, ps_lhs_bound, Assemblage, EfficiencyProfile,
    SteeringFunctional,
};
use postsel::{Error, Result};
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::format::{g12, round12};
use crate::scenario::{parse_operator, Efficiency, FunctionalSpec, Kind, Scenario};

/// Scenario data that does not depend on η.
pub enum Prepared {
    Steering {
        measurements: Option<MeasurementSet>,
        projectors: Option<Vec<Vec<HermitianMatrix>>>,
        operators: Option<SteeringFunctional>,
        ideal: Option<Assemblage>,
    },
    Tripartite {
        functional: TriFunctional,
        quantum: Option<f64>,
    },
    Bell {
        /// (α, functional, quantum value)
        family: Vec<(Option<f64>, BellFunctional, Option<f64>)>,
    },
}

pub fn prepare(s: &Scenario, seed: u64) -> Result<Prepared> {
    match s.kind {
        Kind::Steering => {
            let measurements = s.measurements()?;
            let state = s.state()?;
            let (projectors, operators) = match &s.functional {
                FunctionalSpec::Projective => {
                    let m = measurements
                        .as_ref()
                        .ok_or_else(|| Error::Invalid("projective functionals need measurements".into()))?;
                    (Some(projectors(&m.transposed())), None)
                }
                FunctionalSpec::Operators { operators, offset } => {
                    let ops = operators
                        .iter()
                        .map(|row| row.iter().map(|op| parse_operator(op)).collect::<Result<Vec<_>>>())
                        .collect::<Result<Vec<_>>>()?;
                    (None, Some(SteeringFunctional::new(ops, *offset)?))
                }
                other => return Err(Error::Invalid(format!("functional {other:?} does not apply to steering scenarios"))),
            };
            let ideal = match (&state, &measurements) {
                (Some(st), Some(m)) => Some(assemblage_from_state(st, m)?),
                _ => None,
            };
            Ok(Prepared::Steering { measurements, projectors, operators, ideal })
        }
        Kind::Tripartite => {
            let functional = s.tri_functional()?;
            let quantum = match (s.state()?, s.measurement_pair()?) {
                (Some(st), Some((ma, mb))) => Some(tri_evaluate(&functional, &tri_assemblage(&st, &ma, &mb)?)?),
                _ => None,
            };
            Ok(Prepared::Tripartite { functional, quantum })
        }
        Kind::Bell => {
            let state = s.state()?;
            let pair = s.measurement_pair()?;
            let family = s
                .bell_functionals()?
                .into_iter()
                .map(|(alpha, f)| {
                    let q = match (&state, &pair, alpha) {
                        (Some(st), Some((ma, mb)), _) => Some(bell_evaluate(&f, &behaviour_from_state(st, ma, mb)?)?),
                        (None, _, Some(a)) => Some(quantum_max_tilted(a, seed, false)?.value),
                        _ => None,
                    };
                    Ok((alpha, f, q))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Prepared::Bell { family })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub bound: f64,
    pub status: String,
    pub gap: f64,
    pub quantum_value: Option<f64>,
    pub analytic_upper_bound: Option<f64>,
    pub alpha: Option<f64>,
    /// Exact simplex value of the same LP (Bell scenarios).
    pub lp_check: Option<f64>,
}

impl Point {
    pub fn violated(&self) -> Option<bool> {
        self.quantum_value.map(|q| q > self.bound + VIOLATION_MARGIN)
    }
}

pub fn steering_functional(p: &Prepared, eta: &EfficiencyProfile) -> Result<SteeringFunctional> {
    match p {
        Prepared::Steering { projectors: Some(pr), .. } => projective_functional(pr, eta),
        Prepared::Steering { operators: Some(f), .. } => Ok(f.clone()),
        _ => Err(Error::Invalid("not a steering scenario".into())),
    }
}

pub fn point(s: &Scenario, p: &Prepared, eta: Option<f64>, opts: &SolveOptions) -> Result<Point> {
    match (p, s.efficiency(eta)?) {
        (Prepared::Steering { ideal, projectors, .. }, Efficiency::Single(e)) => {
            let f = steering_functional(p, &e)?;
            let (bound, sol) = ps_lhs_bound(&f, &e, opts)?;
            let quantum_value = match ideal {
                Some(a) => Some(evaluate(&f, &post_select(&apply_loss(a, &e)?)?.0)?),
                None => None,
            };
            let analytic_upper_bound = match projectors {
                Some(pr) => Some(analytic_upper_bound(e.etas().len(), cos_theta(pr)?, e.mean())),
                None => None,
            };
            Ok(Point {
                bound,
                status: sol.status.as_str().into(),
                gap: sol.gap,
                quantum_value,
                analytic_upper_bound,
                alpha: None,
                lp_check: None,
            })
        }
        (Prepared::Tripartite { functional, quantum }, Efficiency::Pair(e)) => {
            let (bound, sol) = tri_ps_lhs_bound(functional, &e, opts)?;
            Ok(Point {
                bound,
                status: sol.status.as_str().into(),
                gap: sol.gap,
                quantum_value: *quantum,
                analytic_upper_bound: None,
                alpha: None,
                lp_check: None,
            })
        }
        (Prepared::Bell { family }, Efficiency::Pair(e)) => {
            let mut best: Option<(f64, Point)> = None;
            for (alpha, f, q) in family {
                let r = ps_lhv_bound(f, &e, opts)?;
                let pt = Point {
                    bound: r.value,
                    status: r.solution.status.as_str().into(),
                    gap: r.solution.gap,
                    quantum_value: *q,
                    analytic_upper_bound: None,
                    alpha: *alpha,
                    lp_check: Some(r.simplex_value),
                };
                let margin = q.map_or(f64::NEG_INFINITY, |q| q - r.value);
                if best.as_ref().is_none_or(|(m, _)| margin > *m) {
                    best = Some((margin, pt));
                }
            }
            best.map(|(_, pt)| pt).ok_or_else(|| Error::Invalid("empty functional family".into()))
        }
        _ => Err(Error::Invalid("efficiency specification does not match the scenario kind".into())),
    }
}

pub fn scenario_hash(s: &Scenario) -> String {
    let canonical = serde_json::to_string(s).expect("scenario serialises");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, |v| json!(round12(v)))
}

pub fn bound_json(s: &Scenario, pt: &Point, eta: &Efficiency) -> Value {
    let eta = match eta {
        Efficiency::Single(e) => json!(e.etas().iter().map(|&v| round12(v)).collect::<Vec<_>>()),
        Efficiency::Pair(e) => json!({
            "eta_ab": e.eta_ab.iter().map(|r| r.iter().map(|&v| round12(v)).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "eta_a": e.eta_a.iter().map(|&v| round12(v)).collect::<Vec<_>>(),
            "eta_b": e.eta_b.iter().map(|&v| round12(v)).collect::<Vec<_>>(),
        }),
    };
    json!({
        "kind": s.kind,
        "scenario_sha256": scenario_hash(s),
        "efficiency": eta,
        "bound": round12(pt.bound),
        "status": pt.status,
        "gap": round12(pt.gap),
        "quantum_value": opt_num(pt.quantum_value),
        "violated": pt.violated(),
        "analytic_upper_bound": opt_num(pt.analytic_upper_bound),
        "alpha": opt_num(pt.alpha),
        "lp_check": opt_num(pt.lp_check),
    })
}

/// Rows in sweep order; failed rows keep their error.
pub fn sweep(s: &Scenario, p: &Prepared, opts: &SolveOptions) -> Result<Vec<(f64, Result<Point>)>> {
    let sweep = s
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Invalid("scenario has no sweep section".into()))?;
    let values = sweep.values()?;
    Ok(values.par_iter().map(|&eta| (eta, point(s, p, Some(eta), opts))).collect())
}

pub fn sweep_csv(s: &Scenario, rows: &[(f64, Result<Point>)], seed: u64) -> String {
    let with_alpha = matches!(s.functional, FunctionalSpec::TiltedChsh { .. });
    let mut out = String::new();
    out.push_str("# postsel sweep\n");
    out.push_str(&format!("# scenario_sha256: {}\n", scenario_hash(s)));
    out.push_str(&format!("# kind: {}\n", serde_json::to_string(&s.kind).unwrap().trim_matches('"')));
    out.push_str(&format!("# seed: {seed}\n"));
    out.push_str("# conventions: settings 0-based; outcome 0 is the no-click; violated iff quantum_value > bound + 1e-7; 12 significant digits\n");
    out.push_str(if with_alpha { "eta,bound,quantum_value,violated,alpha\n" } else { "eta,bound,quantum_value,violated\n" });
    for (eta, r) in rows {
        let line = match r {
            Ok(pt) => {
                let q = pt.quantum_value.map_or_else(String::new, g12);
                let v = pt.violated().map_or_else(String::new, |v| v.to_string());
                let mut l = format!("{},{},{},{}", g12(*eta), g12(pt.bound), q, v);
                if with_alpha {
                    l.push(',');
                    l.push_str(&pt.alpha.map_or_else(String::new, g12));
                }
                l
            }
            Err(e) => {
                let mut l = format!("{},NaN,,failed", g12(*eta));
                if with_alpha {
                    l.push(',');
                }
                eprintln!("row eta={}: {e}", g12(*eta));
                l
            }
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}
