//! Parameter sweeps toward the `eta -> 0` and `eps -> 0` limits.

use rayon::prelude::*;

use super::{merged_times, snapshot, state_distance, Norm, RunConfig};
use crate::error::{Error, Result};
use crate::model::{Forcing, State, SystemVariant};
use crate::spectral::Spectral;
use crate::timestepper::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParameter {
    Eta,
    Eps,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Eta => "eta",
            SweepParameter::Eps => "eps",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    /// Strictly decreasing, positive.
    pub values: Vec<f64>,
    pub base: RunConfig,
    pub norm: Norm,
    /// Comparison times in `[0, t_end]`.
    pub times: Vec<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let name = self.parameter.name();
        if self.values.is_empty() {
            return Err(Error::param("values", "a sweep needs at least one value"));
        }
        if self.values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::param("values", format!("every {name} must be positive")));
        }
        if self.values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::param("values", "must be strictly decreasing"));
        }
        if self.times.is_empty() {
            return Err(Error::param("times", "at least one comparison time is required"));
        }
        merged_times(&self.times, self.base.t_end)?;
        match (self.parameter, self.base.variant) {
            (SweepParameter::Eta, SystemVariant::PEpsEta { .. }) => Ok(()),
            (SweepParameter::Eps, SystemVariant::PEps { .. } | SystemVariant::PEpsEta { .. }) => {
                Ok(())
            }
            (_, v) => Err(Error::param(
                "variant",
                format!("cannot sweep {name} on the {} variant", v.name()),
            )),
        }
    }

    /// Configuration of member `k`.
    pub fn member(&self, k: usize) -> RunConfig {
        let value = self.values[k];
        let variant = match (self.parameter, self.base.variant) {
            (SweepParameter::Eta, SystemVariant::PEpsEta { eps, .. }) => {
                SystemVariant::PEpsEta { eps, eta: value }
            }
            (SweepParameter::Eps, SystemVariant::PEpsEta { eta, .. }) => {
                SystemVariant::PEpsEta { eps: value, eta }
            }
            (SweepParameter::Eps, SystemVariant::PEps { .. }) => SystemVariant::PEps { eps: value },
            (_, v) => v,
        };
        self.base.with_variant(variant)
    }
}

/// `d_k = ||State(p_k) - State(p_{k+1})||` at one comparison time.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub time: f64,
    pub index: usize,
    pub value: f64,
    pub next_value: f64,
    pub distance: f64,
    pub per_field: [f64; 6],
    /// `log2(d_k / d_{k+1})`, when both are positive.
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    pub norm: Norm,
    pub values: Vec<f64>,
    pub times: Vec<f64>,
    /// Grouped by time, then ordered by index.
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// The sequence `d_k` at `time`.
    pub fn distances_at(&self, time: f64) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.time == time)
            .map(|r| r.distance)
            .collect()
    }

    /// Whether `d_k` strictly decreases at `time`.
    pub fn strictly_decreasing_at(&self, time: f64) -> bool {
        self.distances_at(time).windows(2).all(|w| w[1] < w[0])
    }

    /// Whether every entry is exactly zero.
    pub fn all_zero(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.distance == 0.0 && r.per_field.iter().all(|&d| d == 0.0))
    }
}

#[derive(Clone, Debug)]
pub struct SweepMember {
    pub value: f64,
    pub config: RunConfig,
    pub trajectory: Trajectory,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub table: SweepTable,
    pub members: Vec<SweepMember>,
}

fn build_table(spec: &SweepSpec, members: &[SweepMember], sp: &Spectral) -> Result<SweepTable> {
    let mut times: Vec<f64> = spec.times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut rows = Vec::new();
    for &t in &times {
        let start = rows.len();
        for k in 0..members.len().saturating_sub(1) {
            let a = snapshot(&members[k].trajectory, t)?;
            let b = snapshot(&members[k + 1].trajectory, t)?;
            let d = state_distance(sp, a, b, spec.norm)?;
            rows.push(SweepRow {
                time: t,
                index: k,
                value: members[k].value,
                next_value: members[k + 1].value,
                distance: d.total,
                per_field: d.per_field,
                rate: None,
            });
        }
        for i in start..rows.len().saturating_sub(1) {
            let (d0, d1) = (rows[i].distance, rows[i + 1].distance);
            if d0 > 0.0 && d1 > 0.0 {
                rows[i].rate = Some((d0 / d1).log2());
            }
        }
    }
    Ok(SweepTable {
        parameter: spec.parameter,
        norm: spec.norm,
        values: members.iter().map(|m| m.value).collect(),
        times,
        rows,
    })
}

/// Runs every member from the same `initial` state (members run concurrently)
/// and tabulates distances between consecutive members. If a member fails the
/// error carries the table of the members before it.
pub fn sweep(spec: &SweepSpec, initial: &State, forcing: &dyn Forcing) -> Result<SweepOutcome> {
    spec.validate()?;
    let times = merged_times(&spec.times, spec.base.t_end)?;
    let results: Vec<Result<SweepMember>> = (0..spec.values.len())
        .into_par_iter()
        .map(|k| {
            let config = spec.member(k);
            let trajectory = config
                .stepper()?
                .run_to(initial, &times, forcing, |_, _| Ok(()))?;
            Ok(SweepMember {
                value: spec.values[k],
                config,
                trajectory,
            })
        })
        .collect();

    let sp = Spectral::new(spec.base.grid);
    let mut members = Vec::with_capacity(results.len());
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(m) => members.push(m),
            Err(source) => {
                let partial = build_table(spec, &members, &sp)?;
                return Err(Error::SweepMemberFailed {
                    index: k,
                    parameter: spec.parameter.name(),
                    value: spec.values[k],
                    source: Box::new(source),
                    partial: Box::new(partial),
                });
            }
        }
    }
    let table = build_table(spec, &members, &sp)?;
    Ok(SweepOutcome { table, members })
}
