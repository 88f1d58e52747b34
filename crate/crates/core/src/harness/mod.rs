//! Experiment suites built on the stepper: parameter sweeps, twin runs and
//! manufactured-solution verification.

mod init;
mod mms;
mod sweep;
mod twin;

pub use init::{generate, random_field, InitSpec, Regime};
pub use mms::{mms_verify, ManufacturedSolution, MmsFamily, MmsReport, MmsRow, MmsSpec};
pub use sweep::{sweep, SweepMember, SweepOutcome, SweepParameter, SweepRow, SweepSpec, SweepTable};
pub use twin::{
    perturb, twin_run, twin_run_pair, Breakdown, Perturbation, TwinReport, TwinSample, TwinSpec,
};

use crate::error::{Error, Result};
use crate::model::{Component, Forcing, Model, State, SystemVariant};
use crate::spectral::{Grid, Spectral};
use crate::thermo::PhysConsts;
use crate::timestepper::{output_times, StepPolicy, Stepper, Trajectory};

/// Everything that defines a single run apart from its initial data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub grid: Grid,
    pub consts: PhysConsts,
    pub variant: SystemVariant,
    pub policy: StepPolicy,
    pub t_end: f64,
    /// Snapshot spacing; non-positive means the final time only.
    pub cadence: f64,
}

impl RunConfig {
    pub fn model(&self) -> Result<Model> {
        Model::new(self.grid, self.consts, self.variant)
    }

    pub fn stepper(&self) -> Result<Stepper> {
        Stepper::new(self.model()?, self.policy)
    }

    pub fn output_times(&self) -> Result<Vec<f64>> {
        output_times(self.t_end, self.cadence)
    }

    pub fn run(&self, initial: &State, forcing: &dyn Forcing) -> Result<Trajectory> {
        self.stepper()?.run(initial, self.t_end, self.cadence, forcing)
    }

    pub fn with_variant(&self, variant: SystemVariant) -> Self {
        Self { variant, ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L2,
    H1,
    Linf,
}

impl Norm {
    pub fn name(self) -> &'static str {
        match self {
            Norm::L2 => "l2",
            Norm::H1 => "h1",
            Norm::Linf => "linf",
        }
    }

    pub fn parse(s: &str) -> Option<Norm> {
        [Norm::L2, Norm::H1, Norm::Linf].into_iter().find(|n| n.name() == s)
    }
}

/// Norm of a state difference, in total and per component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Distance {
    pub total: f64,
    pub per_field: [f64; 6],
}

pub fn state_distance(spectral: &Spectral, a: &State, b: &State, norm: Norm) -> Result<Distance> {
    spectral.grid().ensure_same(a.grid())?;
    let mut per_field = [0.0; 6];
    for c in Component::ALL {
        let d = a.component(c).sub(b.component(c))?;
        per_field[c.index()] = match norm {
            Norm::L2 => d.l2_norm(),
            Norm::Linf => d.max_abs(),
            Norm::H1 => {
                let h = spectral.forward(&d)?;
                let grad = spectral.dx_hat(&h).l2_norm_sq() + spectral.dy_hat(&h).l2_norm_sq();
                (d.l2_norm_sq() + grad).sqrt()
            }
        };
    }
    let total = match norm {
        Norm::Linf => per_field.iter().copied().fold(0.0, f64::max),
        _ => per_field.iter().map(|v| v * v).sum::<f64>().sqrt(),
    };
    Ok(Distance { total, per_field })
}

/// Snapshot of `traj` taken at time `t`.
pub(crate) fn snapshot(traj: &Trajectory, t: f64) -> Result<&State> {
    traj.snapshot_at(t)
        .ok_or_else(|| Error::param("times", format!("no snapshot was taken at t = {t}")))
}

/// `times` merged with the configuration's end time, sorted, positive entries only.
pub(crate) fn merged_times(times: &[f64], t_end: f64) -> Result<Vec<f64>> {
    for &t in times {
        if !(t >= 0.0 && t <= t_end) {
            return Err(Error::param(
                "times",
                format!("comparison time {t} lies outside [0, {t_end}]"),
            ));
        }
    }
    let mut out: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
    out.push(t_end);
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::RealField;

    #[test]
    fn distances_of_a_single_mode() {
        let g = Grid::periodic(16).unwrap();
        let sp = Spectral::new(g);
        let a = State::zeros(g);
        let mut b = State::zeros(g);
        b.temp = RealField::from_fn(g, |x, _| (2.0 * x).sin()).unwrap();
        let pi = std::f64::consts::PI;
        let l2 = state_distance(&sp, &a, &b, Norm::L2).unwrap();
        assert!((l2.total - (2.0 * pi * pi).sqrt()).abs() < 1e-12);
        assert_eq!(l2.per_field[0], 0.0);
        let h1 = state_distance(&sp, &a, &b, Norm::H1).unwrap();
        assert!((h1.total - (5.0 * 2.0 * pi * pi).sqrt()).abs() < 1e-11);
        let inf = state_distance(&sp, &a, &b, Norm::Linf).unwrap();
        assert!((inf.total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn merged_times_sorted_and_bounded() {
        assert_eq!(merged_times(&[0.5, 0.0, 0.25], 1.0).unwrap(), vec![0.25, 0.5, 1.0]);
        assert_eq!(merged_times(&[1.0], 1.0).unwrap(), vec![1.0]);
        assert!(merged_times(&[2.0], 1.0).is_err());
    }
}
