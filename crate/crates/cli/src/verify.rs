//! Consistency checks run by `postsel verify`.

use postsel::bell::{lhv_bound, lhv_bound_conic, ps_lhv_bound};
use postsel::conic::{verify_certificate, SolveOptions};
use postsel::extension::{build_extension_model, ideal_reduction_check, induced_assemblage};
use postsel::multipartite::{tri_lhs_bound, tri_ps_lhs_bound, tri_ps_program, EfficiencyProfile2};
use postsel::scenario::{apply_loss, post_select};
use postsel::steering::{evaluate, ps_lhs_bound, ps_lhs_bound_dual, ps_lhs_program, Assemblage, EfficiencyProfile};
use postsel::Result;

use crate::format::g12;
use crate::run::{steering_functional, Prepared};
use crate::scenario::{Efficiency, Scenario};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check { name: name.into(), pass, detail }
}

fn max_dev(a: &Assemblage, b: &Assemblage) -> f64 {
    let mut worst = 0.0f64;
    for x in 0..a.settings() {
        for k in 0..=a.outcomes() {
            worst = worst.max(a.member(k, x).sub(b.member(k, x)).matrix().max_abs());
        }
    }
    worst
}

pub fn run_checks(s: &Scenario, p: &Prepared, opts: &SolveOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    match (p, s.efficiency(None)?) {
        (Prepared::Steering { measurements, projectors, ideal, .. }, Efficiency::Single(eta)) => {
            let m = eta.etas().len();
            let f1 = steering_functional(p, &EfficiencyProfile::uniform(m, 1.0)?)?;
            let r = ideal_reduction_check(&f1, opts)?;
            out.push(check(
                "ideal-reduction",
                r.within_tolerance,
                format!("difference {}, no-click weight {}", g12(r.difference), g12(r.max_no_click_trace)),
            ));

            let f = steering_functional(p, &eta)?;
            let (prog, _) = ps_lhs_program(&f, &eta)?;
            let sol = prog.solve(opts)?;
            let cert = verify_certificate(&prog, &sol);
            out.push(check(
                "certificate",
                sol.is_optimal() && cert.passes(1e-8, 1e-7),
                format!("primal {}, dual {}, gap {}", g12(cert.primal_residual), g12(cert.dual_residual), g12(cert.gap)),
            ));

            let (primal, _) = ps_lhs_bound(&f, &eta, opts)?;
            let (dual, _) = ps_lhs_bound_dual(&f, &eta, opts)?;
            out.push(check(
                "dual-agreement",
                (primal - dual).abs() <= 1e-6,
                format!("primal {}, dual {}", g12(primal), g12(dual)),
            ));

            let sum: f64 = eta.etas().iter().sum();
            if let (Some(st), Some(ms), Some(a)) = (s.state()?, measurements, ideal) {
                if sum <= 1.0 + 1e-12 {
                    let model = build_extension_model(&st, ms, &eta)?;
                    let induced = induced_assemblage(&model)?;
                    let dev = max_dev(&induced, &apply_loss(a, &eta)?);
                    out.push(check("oracle-reproduction", dev <= 1e-12, format!("max entry deviation {}", g12(dev))));
                    if projectors.is_some() && (sum - 1.0).abs() <= 1e-9 {
                        let value = evaluate(&f, &post_select(&induced)?.0)?;
                        out.push(check(
                            "oracle-saturation",
                            (value - primal).abs() <= 1e-6,
                            format!("model value {}, bound {}", g12(value), g12(primal)),
                        ));
                    }
                }
            }
        }
        (Prepared::Tripartite { functional, .. }, Efficiency::Pair(eta)) => {
            let (prog, _) = tri_ps_program(functional, &eta)?;
            let sol = prog.solve(opts)?;
            let cert = verify_certificate(&prog, &sol);
            out.push(check(
                "certificate",
                sol.is_optimal() && cert.passes(1e-8, 1e-7),
                format!("primal {}, dual {}, gap {}", g12(cert.primal_residual), g12(cert.dual_residual), g12(cert.gap)),
            ));
            let ideal = tri_lhs_bound(functional)?;
            let (ps, _) = tri_ps_lhs_bound(functional, &EfficiencyProfile2::uncorrelated(functional.settings(), 1.0)?, opts)?;
            out.push(check(
                "ideal-limit",
                (ideal - ps).abs() <= 1e-6,
                format!("enumerated {}, post-selected at 1 {}", g12(ideal), g12(ps)),
            ));
        }
        (Prepared::Bell { family }, Efficiency::Pair(eta)) => {
            for (alpha, f, _) in family {
                let tag = alpha.map_or_else(String::new, |a| format!(" alpha={}", g12(a)));
                let r = ps_lhv_bound(f, &eta, opts)?;
                out.push(check(
                    "lp-agreement",
                    (r.value - r.simplex_value).abs() <= 1e-7,
                    format!("conic {}, simplex {}{tag}", g12(r.value), g12(r.simplex_value)),
                ));
                let enumerated = lhv_bound(f)?;
                let conic = lhv_bound_conic(f, opts)?;
                out.push(check(
                    "ideal-lp",
                    (enumerated - conic).abs() <= 1e-7,
                    format!("enumerated {}, conic {}{tag}", g12(enumerated), g12(conic)),
                ));
                let corr = ps_lhv_bound(f, &EfficiencyProfile2::perfectly_correlated(f.settings(), 0.5)?, opts)?;
                out.push(check(
                    "correlated-loss",
                    (corr.simplex_value - enumerated).abs() <= 1e-7,
                    format!("bound at 0.5 {}, ideal {}{tag}", g12(corr.simplex_value), g12(enumerated)),
                ));
            }
        }
        _ => return Err(postsel::Error::Invalid("efficiency specification does not match the scenario kind".into())),
    }
    Ok(out)
}

/// Compares a freshly generated sweep with a reference CSV.
pub fn compare_csv(fresh: &str, reference: &str) -> Vec<String> {
    let mut problems = Vec::new();
    let hash = |t: &str| t.lines().find(|l| l.starts_with("# scenario_sha256:")).map(str::to_string);
    if hash(fresh) != hash(reference) {
        problems.push("scenario hash differs".to_string());
    }
    let rows = |t: &str| t.lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect::<Vec<_>>();
    let (a, b) = (rows(fresh), rows(reference));
    if a.len() != b.len() {
        problems.push(format!("{} rows expected, reference has {}", a.len(), b.len()));
    }
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        let fx: Vec<&str> = x.split(',').collect();
        let fy: Vec<&str> = y.split(',').collect();
        let same = fx.len() == fy.len()
            && fx.iter().zip(&fy).all(|(u, v)| match (u.parse::<f64>(), v.parse::<f64>()) {
                (Ok(p), Ok(q)) => (p - q).abs() <= 1e-9 * (1.0 + p.abs()) || (p.is_nan() && q.is_nan()),
                _ => u == v,
            });
        if !same {
            problems.push(format!("line {}: expected {x:?}, reference has {y:?}", i + 1));
        }
    }
    problems
}
