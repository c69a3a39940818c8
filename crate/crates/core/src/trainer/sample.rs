use crate::error::{Error, Result};
use crate::sim::Scenario;

/// Network input for one base station of one scenario.
///
/// `x` is `vec(r ⋆ M_i)` laid out user-major: entry `k·T_f + j` holds the
/// normalized rate of user `k` in frame `j` if the user is served by this
/// base station in that frame, and zero otherwise. Padded users are all
/// zero. The same masked rates drive the QoS normalization of the plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    /// `M_i` flattened in the same layout as `x`.
    pub assoc: Vec<f64>,
    pub scenario: usize,
    pub bs: usize,
}

impl Sample {
    /// Rates used by the plan normalization.
    pub fn rates(&self) -> &[f64] {
        &self.x
    }
}

pub fn build_input(sc: &Scenario, bs: usize) -> Result<Sample> {
    if bs >= sc.n_bs() {
        return Err(Error::InvalidArgument(format!(
            "BS index {bs} out of range for {} base stations",
            sc.n_bs()
        )));
    }
    let m = &sc.assoc[bs];
    let assoc = m.data().to_vec();
    let x = sc
        .norm_rates
        .data()
        .iter()
        .zip(&assoc)
        .map(|(r, a)| r * a)
        .collect();
    Ok(Sample {
        x,
        assoc,
        scenario: 0,
        bs,
    })
}

/// One sample per (scenario, base station), scenario-major.
pub fn build_samples(scenarios: &[Scenario]) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    for (n, sc) in scenarios.iter().enumerate() {
        for i in 0..sc.n_bs() {
            let mut s = build_input(sc, i)?;
            s.scenario = n;
            out.push(s);
        }
    }
    Ok(out)
}
