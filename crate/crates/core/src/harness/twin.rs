//! Twin runs: two nearby initial states in the same saturation regime.

use super::{merged_times, snapshot, Regime, RunConfig};
use crate::diagnostics::TwinSaturation;
use crate::error::{Error, Result};
use crate::model::{Component, Forcing, State};
use crate::spectral::RealField;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Perturbation {
    None,
    /// Adds `delta0 sin(2 pi y / L)` to the field (`sin(2 pi x / L)` for the
    /// second velocity components, so velocities stay solenoidal).
    Field { component: Component, delta0: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwinSpec {
    pub base: RunConfig,
    /// `Subsaturated` or `Supersaturated`.
    pub regime: Regime,
    pub perturbation: Perturbation,
    /// Sampling times for `delta(t)` in `(0, t_end]`; the end time is always included.
    pub times: Vec<f64>,
}

impl TwinSpec {
    pub fn validate(&self) -> Result<()> {
        if self.regime == Regime::Mixed {
            return Err(Error::param(
                "regime",
                "twin runs need a sign regime (subsaturated or supersaturated)",
            ));
        }
        if let Perturbation::Field { delta0, .. } = self.perturbation {
            if !(delta0 >= 0.0 && delta0.is_finite()) {
                return Err(Error::param("delta0", format!("must be non-negative, got {delta0}")));
            }
        }
        merged_times(&self.times, self.base.t_end).map(|_| ())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwinSample {
    pub time: f64,
    /// `||State_1 - State_2||_2`.
    pub delta: f64,
    /// `delta(t) / delta(0)`, or 0 when `delta(0) = 0`.
    pub growth: f64,
    pub saturation: TwinSaturation,
}

/// First sample where the two humidities sit on opposite sides of `q_s`,
/// or where the initial data violate the regime.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Breakdown {
    pub time: f64,
    /// Area fraction of the crossed set.
    pub crossed: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwinReport {
    pub samples: Vec<TwinSample>,
    pub delta0: f64,
    /// Smallest rate with `growth <= exp(kappa t)` at every sample.
    pub kappa: f64,
    /// Least-squares slope of `ln(growth)` against time.
    pub kappa_fit: f64,
    /// Some rate between consecutive samples exceeds `3 max(|kappa_fit|, 1)`.
    pub super_exponential: bool,
    pub breakdown: Option<Breakdown>,
}

impl TwinReport {
    /// Whether every sample has `delta` exactly zero.
    pub fn identical(&self) -> bool {
        self.samples.iter().all(|s| s.delta == 0.0)
    }

    pub fn within_envelope(&self) -> bool {
        self.samples
            .iter()
            .all(|s| s.growth <= (self.kappa * s.time).exp() * (1.0 + 1e-12))
    }
}

/// `initial` with `p` applied.
pub fn perturb(initial: &State, p: Perturbation) -> Result<State> {
    let mut out = initial.clone();
    if let Perturbation::Field { component, delta0 } = p {
        let grid = *initial.grid();
        let k = 2.0 * std::f64::consts::PI / grid.length();
        let shape = match component {
            Component::U2 | Component::V2 => RealField::from_fn(grid, |x, _| delta0 * (k * x).sin()),
            _ => RealField::from_fn(grid, |_, y| delta0 * (k * y).sin()),
        }?;
        let f = out.component_mut(component);
        *f = f.add(&shape)?;
    }
    Ok(out)
}

/// Twin run of `initial` against `perturb(initial, spec.perturbation)`.
pub fn twin_run(spec: &TwinSpec, initial: &State, forcing: &dyn Forcing) -> Result<TwinReport> {
    let other = perturb(initial, spec.perturbation)?;
    twin_run_pair(spec, initial, &other, forcing)
}

/// Integrates both states side by side and compares them at the sample times.
/// A regime violation is reported as a breakdown, not an error.
pub fn twin_run_pair(
    spec: &TwinSpec,
    first: &State,
    second: &State,
    forcing: &dyn Forcing,
) -> Result<TwinReport> {
    spec.validate()?;
    let stepper = spec.base.stepper()?;
    let q_s = spec.base.consts.q_s;
    let a0 = stepper.model().prepare(first)?;
    let b0 = stepper.model().prepare(second)?;
    let delta0 = a0.l2_distance(&b0)?;
    let sat0 = TwinSaturation::classify(&a0.q, &b0.q, q_s)?;
    let first_sample = TwinSample {
        time: 0.0,
        delta: delta0,
        growth: if delta0 > 0.0 { 1.0 } else { 0.0 },
        saturation: sat0,
    };
    if !(spec.regime.holds(&a0.q, q_s) && spec.regime.holds(&b0.q, q_s)) {
        return Ok(TwinReport {
            samples: vec![first_sample],
            delta0,
            kappa: 0.0,
            kappa_fit: 0.0,
            super_exponential: false,
            breakdown: Some(Breakdown {
                time: 0.0,
                crossed: sat0.crossed,
            }),
        });
    }

    let times = merged_times(&spec.times, spec.base.t_end)?;
    let (ta, tb) = rayon::join(
        || stepper.run_to(&a0, &times, forcing, |_, _| Ok(())),
        || stepper.run_to(&b0, &times, forcing, |_, _| Ok(())),
    );
    let (ta, tb) = (ta?, tb?);

    let mut samples = vec![first_sample];
    let mut breakdown = None;
    for &t in &times {
        let (a, b) = (snapshot(&ta, t)?, snapshot(&tb, t)?);
        let delta = a.l2_distance(b)?;
        let saturation = TwinSaturation::classify(&a.q, &b.q, q_s)?;
        if saturation.crossed > 0.0 && breakdown.is_none() {
            breakdown = Some(Breakdown {
                time: t,
                crossed: saturation.crossed,
            });
        }
        samples.push(TwinSample {
            time: t,
            delta,
            growth: if delta0 > 0.0 { delta / delta0 } else { 0.0 },
            saturation,
        });
    }

    let (kappa, kappa_fit, super_exponential) = growth_rates(&samples);
    Ok(TwinReport {
        samples,
        delta0,
        kappa,
        kappa_fit,
        super_exponential,
        breakdown,
    })
}

fn growth_rates(samples: &[TwinSample]) -> (f64, f64, bool) {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.growth > 0.0)
        .map(|s| (s.time, s.growth.ln()))
        .collect();
    if pts.len() < 2 {
        return (0.0, 0.0, false);
    }
    let kappa = pts
        .iter()
        .filter(|(t, _)| *t > 0.0)
        .map(|(t, l)| l / t)
        .fold(f64::NEG_INFINITY, f64::max);
    let n = pts.len() as f64;
    let (mt, ml) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let sxy: f64 = pts.iter().map(|(t, l)| (t - mt) * (l - ml)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mt) * (t - mt)).sum();
    let fit = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let limit = 3.0 * fit.abs().max(1.0);
    let jump = pts
        .windows(2)
        .any(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0) > limit);
    (kappa, fit, jump)
}
