//! Deterministic response functions for uncharacterised parties.
//!
//! Outcomes are labelled `1..=d` for conclusive results and `0` for a
//! no-click. Settings are 0-based. Enumeration order is lexicographic in the
//! outcome list, with setting 0 the most significant position; downstream
//! conic programs index their variables in this order.

use crate::error::{Error, Result};

/// Label reserved for the no-click outcome.
pub const NO_CLICK: usize = 0;

/// Default upper limit on the number of enumerated strategies.
pub const DEFAULT_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeterministicStrategy {
    outcomes: Vec<usize>,
}

impl DeterministicStrategy {
    /// `outcomes[x]` is the answer to setting `x`; `d` is the number of
    /// conclusive outcomes.
    pub fn new(outcomes: Vec<usize>, d: usize, allow_no_click: bool) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::Invalid("strategy needs at least one setting".into()));
        }
        let lowest = if allow_no_click { 0 } else { 1 };
        if let Some(&bad) = outcomes.iter().find(|&&a| a < lowest || a > d) {
            return Err(Error::OutOfRange(format!(
                "outcome {bad} not in {lowest}..={d}"
            )));
        }
        Ok(Self { outcomes })
    }

    pub fn settings(&self) -> usize {
        self.outcomes.len()
    }

    pub fn outcomes(&self) -> &[usize] {
        &self.outcomes
    }

    /// The outcome announced for setting `x`.
    pub fn respond(&self, x: usize) -> Result<usize> {
        self.outcomes
            .get(x)
            .copied()
            .ok_or_else(|| Error::OutOfRange(format!("setting {x} of {}", self.outcomes.len())))
    }

    /// D_λ(a|x) ∈ {0, 1}.
    pub fn indicator(&self, a: usize, x: usize) -> f64 {
        if self.outcomes[x] == a {
            1.0
        } else {
            0.0
        }
    }

    pub fn clicks(&self, x: usize) -> bool {
        self.outcomes[x] != NO_CLICK
    }

    pub fn no_click_count(&self) -> usize {
        self.outcomes.iter().filter(|&&a| a == NO_CLICK).count()
    }
}

/// A pair of local strategies λ = (λ_A, λ_B).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProductStrategy {
    pub alice: DeterministicStrategy,
    pub bob: DeterministicStrategy,
}

impl ProductStrategy {
    /// D_λ(ab|xy) = D_{λA}(a|x)·D_{λB}(b|y).
    pub fn indicator(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.alice.indicator(a, x) * self.bob.indicator(b, y)
    }
}

fn strategy_count(m: usize, d: usize, include_no_click: bool) -> Option<u128> {
    let base = (d + usize::from(include_no_click)) as u128;
    base.checked_pow(u32::try_from(m).ok()?)
}

fn check_args(m: usize, d: usize) -> Result<()> {
    if m == 0 || d < 2 {
        return Err(Error::Invalid(format!(
            "need m >= 1 and d >= 2, got m={m}, d={d}"
        )));
    }
    Ok(())
}

/// All deterministic strategies for `m` settings and `d` conclusive
/// outcomes, optionally including the no-click outcome.
pub fn enumerate(m: usize, d: usize, include_no_click: bool) -> Result<Vec<DeterministicStrategy>> {
    enumerate_capped(m, d, include_no_click, DEFAULT_CAP)
}

pub fn enumerate_capped(
    m: usize,
    d: usize,
    include_no_click: bool,
    cap: usize,
) -> Result<Vec<DeterministicStrategy>> {
    check_args(m, d)?;
    let count = strategy_count(m, d, include_no_click).unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(Error::TooManyStrategies { count, cap });
    }
    let lowest = usize::from(!include_no_click);
    let base = d + 1 - lowest;
    let mut out = Vec::with_capacity(count as usize);
    for mut k in 0..count as usize {
        let mut outcomes = vec![0; m];
        for slot in outcomes.iter_mut().rev() {
            *slot = lowest + k % base;
            k /= base;
        }
        out.push(DeterministicStrategy { outcomes });
    }
    Ok(out)
}

/// Cartesian product of two single-party enumerations; Alice's strategy is
/// the slower-varying index.
pub fn enumerate_products(m: usize, d: usize, include_no_click: bool) -> Result<Vec<ProductStrategy>> {
    check_args(m, d)?;
    let single = strategy_count(m, d, include_no_click).unwrap_or(u128::MAX);
    let count = single.saturating_mul(single);
    if count > DEFAULT_CAP as u128 {
        return Err(Error::TooManyStrategies { count, cap: DEFAULT_CAP });
    }
    let singles = enumerate(m, d, include_no_click)?;
    let mut out = Vec::with_capacity(count as usize);
    for alice in &singles {
        for bob in &singles {
            out.push(ProductStrategy { alice: alice.clone(), bob: bob.clone() });
        }
    }
    Ok(out)
}
