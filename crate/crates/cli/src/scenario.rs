//! Scenario files: JSON schema, named presets and resolution into core
//! objects.

use postsel::bell::{compile_bell_terms, tilted_chsh, xz_measurements, BellFunctional, LossPreset};
use postsel::hermitian::{CMatrix, HermitianMatrix, C64};
use postsel::multipartite::{compile_correlators, ghz_inequality, w_inequality, EfficiencyProfile2, TermSpec, TriFunctional};
use postsel::scenario::{ghz, isotropic, max_entangled, mub_measurements, pauli_measurements, two_qubit_pure, w_state, MeasurementSet, QuantumState};
use postsel::steering::EfficiencyProfile;
use postsel::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Steering,
    Tripartite,
    Bell,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    MaxEntangled { dim: usize },
    Isotropic { dim: usize, w: f64 },
    TwoQubitPure { phi: f64 },
    Ghz,
    W,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasurementSpec {
    /// Mutually unbiased bases for prime `dim` (default 2).
    Mub { settings: usize, #[serde(default = "two")] dim: usize },
    /// X, Y, Z.
    Pauli,
    /// X–Z plane angles per party (Bell scenarios).
    Xz { alice: Vec<f64>, bob: Vec<f64> },
}

fn two() -> usize {
    2
}

/// Either a fixed α or a grid searched for the largest violation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Fixed(f64),
    Range { min: f64, max: f64, steps: usize },
}

impl AlphaSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        match *self {
            AlphaSpec::Fixed(a) => Ok(vec![a]),
            AlphaSpec::Range { min, max, steps } => {
                if steps < 2 || !(max > min) {
                    return Err(Error::Invalid("alpha range needs min < max and at least 2 steps".into()));
                }
                Ok((0..steps).map(|i| min + (max - min) * i as f64 / (steps - 1) as f64).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionalSpec {
    /// F_{a|x} = η_x Π_{a|x} with Π the transposed measurement projectors.
    Projective,
    /// Raw operators `[x][a-1]`, each a row-major matrix of `[re, im]` pairs.
    Operators { operators: Vec<Vec<Vec<Vec<[f64; 2]>>>>, #[serde(default)] offset: f64 },
    Correlators { terms: Vec<TermSpec>, #[serde(default = "three")] settings: usize },
    Ghz,
    W,
    TiltedChsh { alpha: AlphaSpec },
}

fn three() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EfficiencySpec {
    Vector { etas: Vec<f64> },
    Preset { preset: String, eta: f64 },
    Triple { eta_ab: Vec<Vec<f64>>, eta_a: Vec<f64>, eta_b: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "eta_name")]
    pub parameter: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

fn eta_name() -> String {
    "eta".into()
}

impl SweepSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.parameter != "eta" {
            return Err(Error::Unsupported(format!("sweep parameter {:?}; only \"eta\" is swept", self.parameter)));
        }
        match self.steps {
            0 => Err(Error::Invalid("sweep needs at least one step".into())),
            1 => Ok(vec![self.from]),
            n => Ok((0..n).map(|i| self.from + (self.to - self.from) * i as f64 / (n - 1) as f64).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: Kind,
    #[serde(default)]
    pub state: Option<StateSpec>,
    #[serde(default)]
    pub measurements: Option<MeasurementSpec>,
    pub functional: FunctionalSpec,
    pub efficiency: EfficiencySpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

pub const PRESETS: &[(&str, &str)] = &[
    (
        "bell-state-zx",
        r#"{"kind":"steering","state":{"name":"max-entangled","dim":2},"measurements":{"name":"mub","settings":2},
            "functional":{"type":"projective"},"efficiency":{"etas":[1.0,1.0]},"sweep":{"from":0.3,"to":1.0,"steps":71}}"#,
    ),
    (
        "pauli-steering",
        r#"{"kind":"steering","state":{"name":"max-entangled","dim":2},"measurements":{"name":"pauli"},
            "functional":{"type":"projective"},"efficiency":{"etas":[1.0,1.0,1.0]},"sweep":{"from":0.2,"to":1.0,"steps":81}}"#,
    ),
    (
        "ghz",
        r#"{"kind":"tripartite","state":{"name":"ghz"},"measurements":{"name":"pauli"},"functional":{"type":"ghz"},
            "efficiency":{"preset":"uncorrelated-isotropic","eta":1.0},"sweep":{"from":0.25,"to":1.0,"steps":76}}"#,
    ),
    (
        "w",
        r#"{"kind":"tripartite","state":{"name":"w"},"measurements":{"name":"pauli"},"functional":{"type":"w"},
            "efficiency":{"preset":"uncorrelated-isotropic","eta":1.0},"sweep":{"from":0.25,"to":1.0,"steps":76}}"#,
    ),
    (
        "chsh-uncorrelated",
        r#"{"kind":"bell","functional":{"type":"tilted-chsh","alpha":{"min":1.0,"max":1.5,"steps":11}},
            "efficiency":{"preset":"uncorrelated-isotropic","eta":1.0},"sweep":{"from":0.5,"to":1.0,"steps":51}}"#,
    ),
    (
        "chsh-one-sided",
        r#"{"kind":"bell","functional":{"type":"tilted-chsh","alpha":{"min":1.0,"max":1.5,"steps":11}},
            "efficiency":{"preset":"one-sided","eta":1.0},"sweep":{"from":0.3,"to":1.0,"steps":71}}"#,
    ),
    (
        "chsh-correlated",
        r#"{"kind":"bell","functional":{"type":"tilted-chsh","alpha":1.0},
            "efficiency":{"preset":"perfectly-correlated","eta":1.0},"sweep":{"from":0.1,"to":1.0,"steps":10}}"#,
    ),
];

pub fn preset(name: &str) -> Option<Scenario> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, json)| serde_json::from_str(json).expect("built-in presets parse"))
}

/// Parse failure with the offending line quoted.
#[derive(Debug)]
pub struct ParseError(pub String);

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn parse(text: &str, origin: &str) -> std::result::Result<Scenario, ParseError> {
    serde_json::from_str(text).map_err(|e| {
        let line = e.line();
        let snippet = text.lines().nth(line.saturating_sub(1)).unwrap_or("").trim_end();
        ParseError(format!("{origin}:{line}:{}: {e}\n  | {snippet}", e.column()))
    })
}

/// Efficiencies at a given sweep value (or as written when `eta` is None).
#[derive(Clone, Debug)]
pub enum Efficiency {
    Single(EfficiencyProfile),
    Pair(EfficiencyProfile2),
}

impl Scenario {
    pub fn settings(&self) -> usize {
        match (&self.functional, &self.measurements) {
            (FunctionalSpec::TiltedChsh { .. }, _) => 2,
            (FunctionalSpec::Correlators { settings, .. }, _) => *settings,
            (FunctionalSpec::Ghz | FunctionalSpec::W, _) => 3,
            (FunctionalSpec::Operators { operators, .. }, _) => operators.len(),
            (_, Some(MeasurementSpec::Mub { settings, .. })) => *settings,
            (_, Some(MeasurementSpec::Pauli)) => 3,
            (_, Some(MeasurementSpec::Xz { alice, .. })) => alice.len(),
            (_, None) => 2,
        }
    }

    pub fn efficiency(&self, eta: Option<f64>) -> Result<Efficiency> {
        let m = self.settings();
        match (self.kind, &self.efficiency) {
            (Kind::Steering, EfficiencySpec::Vector { etas }) => match eta {
                Some(e) => Ok(Efficiency::Single(EfficiencyProfile::uniform(etas.len(), e)?)),
                None => Ok(Efficiency::Single(EfficiencyProfile::new(etas.clone())?)),
            },
            (Kind::Steering, EfficiencySpec::Preset { preset, eta: e0 }) => {
                if preset != "uniform" {
                    return Err(Error::Invalid(format!("steering efficiencies take preset \"uniform\", not {preset:?}")));
                }
                Ok(Efficiency::Single(EfficiencyProfile::uniform(m, eta.unwrap_or(*e0))?))
            }
            (Kind::Steering, EfficiencySpec::Triple { .. }) => {
                Err(Error::Invalid("steering scenarios take a vector of efficiencies".into()))
            }
            (_, EfficiencySpec::Preset { preset, eta: e0 }) => {
                Ok(Efficiency::Pair(LossPreset::parse(preset)?.profile(m, eta.unwrap_or(*e0))?))
            }
            (_, EfficiencySpec::Triple { eta_ab, eta_a, eta_b }) => {
                if eta.is_some() {
                    return Err(Error::Unsupported("sweeps over an explicit efficiency triple; use a preset".into()));
                }
                Ok(Efficiency::Pair(EfficiencyProfile2::new(eta_ab.clone(), eta_a.clone(), eta_b.clone())?))
            }
            (_, EfficiencySpec::Vector { .. }) => {
                Err(Error::Invalid("two lossy parties need a preset or an efficiency triple".into()))
            }
        }
    }

    pub fn state(&self) -> Result<Option<QuantumState>> {
        let spec = match (&self.state, &self.functional) {
            (Some(s), _) => s.clone(),
            (None, FunctionalSpec::Ghz) => StateSpec::Ghz,
            (None, FunctionalSpec::W) => StateSpec::W,
            (None, _) if self.kind == Kind::Steering => StateSpec::MaxEntangled { dim: self.measurements()?.map_or(2, |m| m.dim()) },
            (None, _) => return Ok(None),
        };
        Ok(Some(match spec {
            StateSpec::MaxEntangled { dim } => max_entangled(dim),
            StateSpec::Isotropic { dim, w } => isotropic(dim, w)?,
            StateSpec::TwoQubitPure { phi } => two_qubit_pure(phi),
            StateSpec::Ghz => ghz(),
            StateSpec::W => w_state(),
        }))
    }

    /// Measurement sets for Alice and Bob (Bob's equals Alice's unless
    /// given separately).
    pub fn measurement_pair(&self) -> Result<Option<(MeasurementSet, MeasurementSet)>> {
        Ok(match &self.measurements {
            Some(MeasurementSpec::Xz { alice, bob }) => Some((xz_measurements(alice), xz_measurements(bob))),
            _ => self.measurements()?.map(|m| (m.clone(), m)),
        })
    }

    pub fn measurements(&self) -> Result<Option<MeasurementSet>> {
        Ok(match &self.measurements {
            Some(MeasurementSpec::Mub { settings, dim }) => Some(mub_measurements(*dim, *settings)?),
            Some(MeasurementSpec::Pauli) => Some(pauli_measurements()),
            Some(MeasurementSpec::Xz { alice, .. }) => Some(xz_measurements(alice)),
            None if self.kind == Kind::Tripartite => Some(pauli_measurements()),
            None => None,
        })
    }

    pub fn tri_functional(&self) -> Result<TriFunctional> {
        match &self.functional {
            FunctionalSpec::Ghz => compile_correlators(&ghz_inequality(), 3, 2),
            FunctionalSpec::W => compile_correlators(&w_inequality(), 3, 2),
            FunctionalSpec::Correlators { terms, settings } => {
                let terms = terms.iter().map(TermSpec::to_term).collect::<Result<Vec<_>>>()?;
                compile_correlators(&terms, *settings, 2)
            }
            other => Err(Error::Invalid(format!("functional {other:?} does not apply to tripartite scenarios"))),
        }
    }

    /// Bell functionals, one per α when a tilted family is searched.
    pub fn bell_functionals(&self) -> Result<Vec<(Option<f64>, BellFunctional)>> {
        match &self.functional {
            FunctionalSpec::TiltedChsh { alpha } => Ok(alpha.values()?.into_iter().map(|a| (Some(a), tilted_chsh(a))).collect()),
            FunctionalSpec::Correlators { terms, settings } => Ok(vec![(None, compile_bell_terms(terms, *settings)?)]),
            other => Err(Error::Invalid(format!("functional {other:?} does not apply to Bell scenarios"))),
        }
    }
}

pub fn parse_operator(rows: &[Vec<[f64; 2]>]) -> Result<HermitianMatrix> {
    let n = rows.len();
    let mut entries = Vec::with_capacity(n * n);
    for r in rows {
        if r.len() != n {
            return Err(Error::Dimension(format!("operator row of length {} in a {n}x{n} matrix", r.len())));
        }
        entries.extend(r.iter().map(|[re, im]| C64::new(*re, *im)));
    }
    HermitianMatrix::new(CMatrix::from_row_slice(n, n, &entries)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_resolve() {
        for (name, _) in PRESETS {
            let s = preset(name).unwrap();
            assert!(s.efficiency(None).is_ok(), "{name}");
            assert!(s.sweep.as_ref().unwrap().values().is_ok());
        }
        assert!(preset("nonexistent").is_none());
    }

    #[test]
    fn parse_error_has_line_context() {
        let text = "{\n  \"kind\": \"steering\",\n  \"functional\": {\"type\": \"nope\"}\n}";
        let e = parse(text, "s.json").unwrap_err();
        assert!(e.0.starts_with("s.json:3:"), "{}", e.0);
        assert!(e.0.contains("\"nope\""));
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"kind":"bell","functional":{"type":"tilted-chsh","alpha":1.0},"efficiency":{"preset":"one-sided","eta":0.9},"colour":1}"#;
        assert!(parse(text, "x").is_err());
    }

    #[test]
    fn alpha_grid() {
        let a = AlphaSpec::Range { min: 1.0, max: 1.5, steps: 11 }.values().unwrap();
        assert_eq!(a.len(), 11);
        assert!((a[10] - 1.5).abs() < 1e-15);
        assert!(AlphaSpec::Range { min: 1.0, max: 1.0, steps: 3 }.values().is_err());
    }

    #[test]
    fn sweep_grid() {
        let s = SweepSpec { parameter: "eta".into(), from: 0.25, to: 1.0, steps: 76 };
        let v = s.values().unwrap();
        assert_eq!(v.len(), 76);
        assert!((v[1] - 0.26).abs() < 1e-12);
        let bad = SweepSpec { parameter: "w".into(), ..s };
        assert!(matches!(bad.values(), Err(Error::Unsupported(_))));
    }
}
