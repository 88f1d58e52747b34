//! Manufactured solutions with closed-form forcing, on the `2 pi` torus.
//!
//! With amplitude `a(t)` and a shear parameter `beta`:
//!
//! ```text
//! u = a (sin y, sin x)
//! v = a (sin y + beta sin x, sin x)        div v = beta a cos x
//! T = a cos x
//! q = q_base + q_amp (q_offset + sin x) a
//! ```
//!
//! The smooth families take `beta = 0`, so no precipitation occurs. The
//! saturated family keeps `q > q_s + eps` and has `div v < 0` on half the
//! domain, exercising the saturated branch of the source.

use rayon::prelude::*;

use super::RunConfig;
use crate::error::{Error, Result};
use crate::model::{Component, Forcing, State, SystemVariant};
use crate::spectral::{Grid, RealField};
use crate::thermo::{precipitation_at, Heaviside, PhysConsts};
use crate::timestepper::{Scheme, StepPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmsFamily {
    /// `a = exp(-t)`, no precipitation.
    Decay,
    /// `a = 1 / (1 + t)`, no precipitation.
    Rational,
    /// `a = 1 / (1 + t)`, saturated everywhere, precipitating where `cos x < 0`.
    Saturated,
}

impl MmsFamily {
    pub fn name(self) -> &'static str {
        match self {
            MmsFamily::Decay => "decay",
            MmsFamily::Rational => "rational",
            MmsFamily::Saturated => "saturated",
        }
    }

    pub fn parse(s: &str) -> Option<MmsFamily> {
        [MmsFamily::Decay, MmsFamily::Rational, MmsFamily::Saturated]
            .into_iter()
            .find(|f| f.name() == s)
    }
}

#[derive(Clone, Debug)]
pub struct ManufacturedSolution {
    family: MmsFamily,
    consts: PhysConsts,
    heaviside: Heaviside,
    eta: f64,
    beta: f64,
    q_base: f64,
    q_amp: f64,
    q_offset: f64,
}

impl ManufacturedSolution {
    pub fn new(family: MmsFamily, consts: PhysConsts, variant: SystemVariant) -> Result<Self> {
        consts.validate()?;
        variant.validate()?;
        let q_s = consts.q_s;
        let (beta, q_base, q_amp, q_offset) = match family {
            MmsFamily::Decay | MmsFamily::Rational => (0.0, 0.0, 0.05 * q_s, 10.0),
            MmsFamily::Saturated => (0.5, q_s + variant.eps().unwrap_or(0.0), 0.25 * q_s, 2.0),
        };
        Ok(Self {
            family,
            consts,
            heaviside: variant.heaviside(),
            eta: variant.eta(),
            beta,
            q_base,
            q_amp,
            q_offset,
        })
    }

    pub fn family(&self) -> MmsFamily {
        self.family
    }

    /// `(a(t), a'(t))`.
    pub fn amplitude(&self, t: f64) -> (f64, f64) {
        match self.family {
            MmsFamily::Decay => {
                let a = (-t).exp();
                (a, -a)
            }
            MmsFamily::Rational | MmsFamily::Saturated => {
                let a = 1.0 / (1.0 + t);
                (a, -a * a)
            }
        }
    }

    pub fn value(&self, c: Component, x: f64, y: f64, t: f64) -> f64 {
        let (a, _) = self.amplitude(t);
        match c {
            Component::U1 => a * y.sin(),
            Component::U2 | Component::V2 => a * x.sin(),
            Component::V1 => a * (y.sin() + self.beta * x.sin()),
            Component::Temp => a * x.cos(),
            Component::Q => self.q_base + self.q_amp * (self.q_offset + x.sin()) * a,
        }
    }

    fn precip(&self, x: f64, a: f64) -> f64 {
        let (sx, cx) = x.sin_cos();
        let q = self.q_base + self.q_amp * (self.q_offset + sx) * a;
        precipitation_at(self.beta * a * cx, q, a * cx, &self.heaviside, &self.consts)
    }

    /// The exact state at time `t`; the grid must have side `2 pi`.
    pub fn exact(&self, grid: Grid, t: f64) -> Result<State> {
        let two_pi = 2.0 * std::f64::consts::PI;
        if (grid.length() - two_pi).abs() > 1e-12 * two_pi {
            return Err(Error::InvalidGrid(format!(
                "manufactured solutions live on a side of 2 pi, got {}",
                grid.length()
            )));
        }
        let mut fields = Vec::with_capacity(6);
        for c in Component::ALL {
            fields.push(RealField::from_fn(grid, |x, y| self.value(c, x, y, t))?);
        }
        State::from_components(fields.try_into().expect("six components"))
    }
}

impl Forcing for ManufacturedSolution {
    fn source(&self, c: Component, x: f64, y: f64, t: f64) -> f64 {
        let (a, da) = self.amplitude(t);
        let (sx, cx) = x.sin_cos();
        let (sy, cy) = y.sin_cos();
        let k = &self.consts;
        let (mu, beta) = (k.mu, self.beta);
        let a2 = a * a;
        match c {
            Component::U1 => (da + mu * a) * sy + a2 * beta * cx * sy,
            Component::U2 => (da + mu * a) * sx + a2 * beta * ((2.0 * x).sin() - sx * cy),
            Component::V1 => {
                (da + mu * a) * (sy + beta * sx)
                    + a2 * (beta * sy * cx + 2.0 * sx * cy)
                    + k.buoyancy_coeff() * a * sx
            }
            Component::V2 => (da + mu * a) * sx + a2 * (2.0 * cx * sy + beta * sx * cx),
            Component::Temp => {
                (da + a) * cx - a2 * sx * sy - k.stratification_coeff() * beta * a * cx
                    - self.precip(x, a)
            }
            Component::Q => {
                self.q_amp * (self.q_offset + sx) * da
                    + self.q_amp * a2 * sy * cx
                    + k.q_bar * beta * a * cx
                    + self.eta * self.q_amp * a * sx
                    + self.precip(x, a)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MmsSpec {
    pub family: MmsFamily,
    pub consts: PhysConsts,
    pub variant: SystemVariant,
    pub scheme: Scheme,
    /// Grid sizes for the spatial study, run at the smallest step.
    pub resolutions: Vec<usize>,
    /// Steps for the temporal study, run at the largest grid.
    pub dts: Vec<f64>,
    pub t_end: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MmsRow {
    pub n: usize,
    pub dt: f64,
    /// Largest pointwise error over all fields at `t_end`.
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MmsReport {
    pub family: MmsFamily,
    /// Errors against the exact solution.
    pub spatial: Vec<MmsRow>,
    /// Errors against the exact solution, or against the run with half the
    /// step when `self_convergence` is set.
    pub temporal: Vec<MmsRow>,
    /// `log2(e_k / e_{k+1}) / log2(dt_k / dt_{k+1})` for consecutive steps.
    pub orders: Vec<f64>,
    /// Least-squares slope of `ln e` against `ln dt`.
    pub fitted_order: f64,
    pub self_convergence: bool,
}

fn max_error(a: &State, b: &State) -> Result<f64> {
    let mut e = 0.0_f64;
    for c in Component::ALL {
        e = e.max(a.component(c).sub(b.component(c))?.max_abs());
    }
    Ok(e)
}

/// Spatial and temporal refinement study against a manufactured solution.
/// The saturated family is measured by temporal self-convergence, since its
/// forcing has a kink where `div v` changes sign.
pub fn mms_verify(spec: &MmsSpec) -> Result<MmsReport> {
    if spec.resolutions.is_empty() || spec.dts.is_empty() {
        return Err(Error::param("resolutions", "need at least one grid and one step"));
    }
    if !(spec.t_end > 0.0 && spec.t_end.is_finite()) {
        return Err(Error::param("t_end", "must be positive"));
    }
    let sol = ManufacturedSolution::new(spec.family, spec.consts, spec.variant)?;
    let self_convergence = spec.family == MmsFamily::Saturated;
    let config = |n: usize, dt: f64| -> Result<RunConfig> {
        Ok(RunConfig {
            grid: Grid::periodic(n)?,
            consts: spec.consts,
            variant: spec.variant,
            policy: StepPolicy {
                dt,
                scheme: spec.scheme,
                min_dt: dt.min(StepPolicy::default().min_dt),
                ..StepPolicy::default()
            },
            t_end: spec.t_end,
            cadence: 0.0,
        })
    };
    let solve = |n: usize, dt: f64| -> Result<State> {
        let cfg = config(n, dt)?;
        let init = sol.exact(cfg.grid, 0.0)?;
        let traj = cfg.run(&init, &sol)?;
        Ok(traj.final_state().expect("t_end > 0").1.clone())
    };

    let dt_min = spec.dts.iter().copied().fold(f64::INFINITY, f64::min);
    let n_max = *spec.resolutions.iter().max().expect("non-empty");

    let spatial = spec
        .resolutions
        .par_iter()
        .map(|&n| {
            let s = solve(n, dt_min)?;
            let exact = sol.exact(*s.grid(), spec.t_end)?;
            Ok(MmsRow {
                n,
                dt: dt_min,
                error: max_error(&s, &exact)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let temporal = spec
        .dts
        .par_iter()
        .map(|&dt| {
            let s = solve(n_max, dt)?;
            let reference = if self_convergence {
                solve(n_max, 0.5 * dt)?
            } else {
                sol.exact(*s.grid(), spec.t_end)?
            };
            Ok(MmsRow {
                n: n_max,
                dt,
                error: max_error(&s, &reference)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let orders = temporal
        .windows(2)
        .map(|w| (w[0].error / w[1].error).log2() / (w[0].dt / w[1].dt).log2())
        .collect();
    let pts: Vec<(f64, f64)> = temporal
        .iter()
        .filter(|r| r.error > 0.0)
        .map(|r| (r.dt.ln(), r.error.ln()))
        .collect();
    let fitted_order = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };

    Ok(MmsReport {
        family: spec.family,
        spatial,
        temporal,
        orders,
        fitted_order,
        self_convergence,
    })
}
