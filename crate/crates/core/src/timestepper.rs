//! Integrating-factor Runge-Kutta time stepping.
//!
//! Diffusion is integrated exactly mode by mode through `exp(-nu |k|^2 tau)`;
//! every other term is explicit. For an explicit tableau `(a, b, c)` with
//! nondecreasing nodes the step reads
//!
//! ```text
//! U_i     = E(c_i h) u_n + h sum_j a_ij E((c_i - c_j) h) K_j,   K_i = N(t_n + c_i h, U_i)
//! u_{n+1} = E(h) u_n     + h sum_j b_j  E((1 - c_j) h) K_j
//! ```
//!
//! so only decaying exponentials appear.

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::model::{Forcing, HatState, Model, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Heun's method, second order.
    IfRk2,
    /// Kutta's third-order method.
    IfRk3,
}

impl Scheme {
    pub fn order(self) -> u32 {
        match self {
            Scheme::IfRk2 => 2,
            Scheme::IfRk3 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::IfRk2 => "if_rk2",
            Scheme::IfRk3 => "if_rk3",
        }
    }

    fn tableau(self) -> Tableau {
        match self {
            Scheme::IfRk2 => Tableau {
                a: &[&[], &[1.0]],
                b: &[0.5, 0.5],
                c: &[0.0, 1.0],
            },
            Scheme::IfRk3 => Tableau {
                a: &[&[], &[0.5], &[-1.0, 2.0]],
                b: &[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
                c: &[0.0, 0.5, 1.0],
            },
        }
    }
}

struct Tableau {
    a: &'static [&'static [f64]],
    b: &'static [f64],
    c: &'static [f64],
}

/// Time-step controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepPolicy {
    /// Upper bound on every step.
    pub dt: f64,
    /// Courant number for the advective bound, in `(0, 1)`.
    pub cfl_target: f64,
    /// Safety factor on the precipitation-stiffness bound, in `(0, 1]`.
    pub eps_substep_safety: f64,
    pub scheme: Scheme,
    /// Floor for the saturation-overshoot cap of the limit variant.
    pub min_dt: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            cfl_target: 0.5,
            eps_substep_safety: 0.5,
            scheme: Scheme::IfRk2,
            min_dt: 1e-8,
        }
    }
}

impl StepPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.cfl_target > 0.0 && self.cfl_target < 1.0) {
            return Err(Error::param(
                "cfl_target",
                format!("must lie in (0, 1), got {}", self.cfl_target),
            ));
        }
        if !(self.eps_substep_safety > 0.0 && self.eps_substep_safety <= 1.0) {
            return Err(Error::param(
                "eps_substep_safety",
                format!("must lie in (0, 1], got {}", self.eps_substep_safety),
            ));
        }
        if !(self.min_dt > 0.0 && self.min_dt <= self.dt) {
            return Err(Error::param(
                "min_dt",
                format!("must lie in (0, dt], got {}", self.min_dt),
            ));
        }
        Ok(())
    }
}

/// Snapshots at the output cadence plus one diagnostics record per step.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub snapshots: Vec<(f64, State)>,
    pub records: Vec<DiagnosticsRecord>,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<&(f64, State)> {
        self.snapshots.last()
    }

    /// Snapshot taken at exactly time `t`, if any.
    pub fn snapshot_at(&self, t: f64) -> Option<&State> {
        self.snapshots
            .iter()
            .find(|(ts, _)| (ts - t).abs() <= 1e-12 * t.abs().max(1.0))
            .map(|(_, s)| s)
    }
}

/// Partial results of a run that hit a failing step.
#[derive(Debug)]
pub struct RunFailure {
    pub steps_completed: usize,
    pub last_good_time: f64,
    pub last_good: State,
    pub partial: Trajectory,
    pub cause: Error,
}

#[derive(Clone, Debug)]
pub struct Stepper {
    model: Model,
    policy: StepPolicy,
}

impl Stepper {
    pub fn new(model: Model, policy: StepPolicy) -> Result<Self> {
        policy.validate()?;
        Ok(Self { model, policy })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn policy(&self) -> &StepPolicy {
        &self.policy
    }

    /// Largest admissible step for `s`: the policy step, the advective CFL
    /// bound and the precipitation-stiffness bound, whichever is smallest.
    pub fn cfl_dt(&self, s: &State) -> Result<f64> {
        self.model.grid().ensure_same(s.grid())?;
        let sp = self.model.spectral();
        let c = self.model.consts();
        let mut dt = self.policy.dt;

        let n2 = s.grid().len();
        let mut speed = 0.0_f64;
        for k in 0..n2 {
            let u = s.u[0].values()[k].hypot(s.u[1].values()[k]);
            let v = s.v[0].values()[k].hypot(s.v[1].values()[k]);
            speed = speed.max(u + v);
        }
        if speed > 0.0 {
            dt = dt.min(self.policy.cfl_target * s.grid().dx() / speed);
        }

        let div_v = sp.divergence(&s.v[0], &s.v[1])?;
        let q = s.q.values();
        let coeff = c.precip_coeff();
        match self.model.variant().eps() {
            Some(eps) => {
                // The mollified source is (1/eps)-Lipschitz in q near saturation.
                let g_bound = c.g_bound();
                let mut rate = 0.0_f64;
                for (k, &d) in div_v.values().iter().enumerate() {
                    if q[k] > c.q_s - eps {
                        rate = rate.max(coeff * (-d).max(0.0) * g_bound);
                    }
                }
                if rate > 0.0 {
                    dt = dt.min(self.policy.eps_substep_safety * eps / rate);
                }
            }
            None => {
                // Keep supersaturated points from overshooting q_s in one step.
                let h = self.model.variant().heaviside();
                let mut cap = f64::INFINITY;
                for (k, &d) in div_v.values().iter().enumerate() {
                    let excess = q[k] - c.q_s;
                    if excess > 0.0 {
                        let p = crate::thermo::precipitation_at(d, q[k], s.temp.values()[k], &h, c);
                        if p > 0.0 {
                            cap = cap.min(0.5 * excess / p);
                        }
                    }
                }
                if cap.is_finite() {
                    dt = dt.min(cap.max(self.policy.min_dt));
                }
            }
        }
        Ok(dt)
    }

    fn heat(&self, hat: &HatState, tau: f64) -> HatState {
        let sp = self.model.spectral();
        let nu = self.model.diffusivities();
        std::array::from_fn(|i| sp.heat_factor_hat(&hat[i], nu[i], tau))
    }

    fn step_hat(&self, un: &HatState, t: f64, h: f64, forcing: &dyn Forcing) -> Result<HatState> {
        let tab = self.policy.scheme.tableau();
        let sp = self.model.spectral();
        let nu = self.model.diffusivities();
        let mut ks: Vec<HatState> = Vec::with_capacity(tab.b.len());
        for (i, &ci) in tab.c.iter().enumerate() {
            let mut stage = self.heat(un, ci * h);
            for (j, &aij) in tab.a[i].iter().enumerate() {
                if aij == 0.0 {
                    continue;
                }
                for f in 0..6 {
                    let kj = sp.heat_factor_hat(&ks[j][f], nu[f], (ci - tab.c[j]) * h);
                    stage[f].add_scaled(h * aij, &kj);
                }
            }
            ks.push(self.model.explicit_hat(&stage, t + ci * h, forcing)?);
        }
        let mut out = self.heat(un, h);
        for (j, &bj) in tab.b.iter().enumerate() {
            for f in 0..6 {
                let kj = sp.heat_factor_hat(&ks[j][f], nu[f], (1.0 - tab.c[j]) * h);
                out[f].add_scaled(h * bj, &kj);
            }
        }
        self.model.project_hat(&mut out);
        Ok(out)
    }

    /// One step of size `dt` from time `t`. Steps above [`Stepper::cfl_dt`] are rejected.
    pub fn step(&self, s: &State, t: f64, dt: f64, forcing: &dyn Forcing) -> Result<State> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        let bound = self.cfl_dt(s)?;
        if dt > bound * (1.0 + 1e-12) {
            return Err(Error::UnstableStep { dt, bound });
        }
        self.advance(s, t, dt, forcing)
    }

    fn advance(&self, s: &State, t: f64, dt: f64, forcing: &dyn Forcing) -> Result<State> {
        let hat = self.model.to_hat(s)?;
        let out = self.model.from_hat(&self.step_hat(&hat, t, dt, forcing)?);
        out.check_finite()?;
        Ok(out)
    }

    /// Integrates from `t = 0` to `t_end` with steps of [`Stepper::cfl_dt`],
    /// shortened to land exactly on the output times of [`output_times`].
    /// One diagnostics record is taken per step.
    pub fn run(
        &self,
        initial: &State,
        t_end: f64,
        cadence: f64,
        forcing: &dyn Forcing,
    ) -> Result<Trajectory> {
        self.run_with(initial, t_end, cadence, forcing, |_, _| Ok(()))
    }

    /// [`Stepper::run`] with a callback invoked on every snapshot as it is taken.
    pub fn run_with(
        &self,
        initial: &State,
        t_end: f64,
        cadence: f64,
        forcing: &dyn Forcing,
        on_snapshot: impl FnMut(f64, &State) -> Result<()>,
    ) -> Result<Trajectory> {
        self.run_to(initial, &output_times(t_end, cadence)?, forcing, on_snapshot)
    }

    /// Integrates from `t = 0` through the strictly increasing `times`, taking a
    /// snapshot at each of them (and at `t = 0`). The last entry is the end time.
    pub fn run_to(
        &self,
        initial: &State,
        times: &[f64],
        forcing: &dyn Forcing,
        mut on_snapshot: impl FnMut(f64, &State) -> Result<()>,
    ) -> Result<Trajectory> {
        let mut prev = 0.0;
        for &t in times {
            if !(t > prev && t.is_finite()) {
                return Err(Error::param(
                    "output times",
                    format!("must be finite and strictly increasing from 0, got {t} after {prev}"),
                ));
            }
            prev = t;
        }
        let t_end = prev;
        let mut state = self.model.prepare(initial)?;
        let mut traj = Trajectory::default();
        let mut t = 0.0;
        traj.records.push(diagnostics::record(&self.model, t, &state)?);
        on_snapshot(t, &state)?;
        traj.snapshots.push((t, state.clone()));

        let mut targets = times.iter().copied().peekable();
        let mut steps = 0usize;
        let snap_tol = 1e-12 * t_end.max(1.0);

        while let Some(&target) = targets.peek() {
            let attempt = (|| -> Result<(State, f64, bool)> {
                let bound = self.cfl_dt(&state)?;
                let remaining = target - t;
                let (dt, hit) =
                    if remaining <= bound * (1.0 + 1e-12) || remaining - bound < snap_tol {
                        (remaining, true)
                    } else if remaining < 2.0 * bound {
                        // Two even steps rather than a full one and a sliver.
                        (0.5 * remaining, false)
                    } else {
                        (bound, false)
                    };
                let next = self.advance(&state, t, dt, forcing)?;
                Ok((next, if hit { target } else { t + dt }, hit))
            })();
            let (next, t_next, hit) = match attempt {
                Ok(v) => v,
                Err(cause) => {
                    let cause = Error::StepFailed {
                        step: steps + 1,
                        time: t,
                        source: Box::new(cause),
                    };
                    return Err(Error::RunFailed(Box::new(RunFailure {
                        steps_completed: steps,
                        last_good_time: t,
                        last_good: state,
                        partial: traj,
                        cause,
                    })));
                }
            };
            steps += 1;
            state = next;
            t = t_next;
            traj.records.push(diagnostics::record(&self.model, t, &state)?);
            let n = traj.records.len();
            if n >= 3 {
                let r = diagnostics::energy_residual_at(
                    &traj.records[n - 3],
                    &traj.records[n - 2],
                    &traj.records[n - 1],
                );
                traj.records[n - 2].energy_residual = Some(r);
            }
            if hit {
                on_snapshot(t, &state)?;
                traj.snapshots.push((t, state.clone()));
                targets.next();
            }
        }
        Ok(traj)
    }
}

/// Multiples of `cadence` below `t_end`, then `t_end` itself. A non-positive
/// cadence yields `[t_end]`; `t_end = 0` yields nothing.
pub fn output_times(t_end: f64, cadence: f64) -> Result<Vec<f64>> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::param("t_end", format!("must be non-negative, got {t_end}")));
    }
    if t_end == 0.0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    if cadence > 0.0 && cadence.is_finite() {
        let tol = 1e-9 * cadence;
        let mut k = 1u64;
        loop {
            let t = k as f64 * cadence;
            if t >= t_end - tol {
                break;
            }
            out.push(t);
            k += 1;
        }
    }
    out.push(t_end);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NoForcing, SystemVariant};
    use crate::spectral::{Grid, RealField};
    use crate::thermo::PhysConsts;
    use std::f64::consts::PI;

    fn heat_consts() -> PhysConsts {
        let mut c = PhysConsts::unit();
        c.brunt_vaisala = 0.0;
        c
    }

    fn stepper(n: usize, c: PhysConsts, variant: SystemVariant, policy: StepPolicy) -> Stepper {
        let m = Model::new(Grid::periodic(n).unwrap(), c, variant).unwrap();
        Stepper::new(m, policy).unwrap()
    }

    #[test]
    fn policy_validation() {
        let mut p = StepPolicy::default();
        p.cfl_target = 1.0;
        assert!(p.validate().is_err());
        let mut p = StepPolicy::default();
        p.dt = 0.0;
        assert!(p.validate().is_err());
        let mut p = StepPolicy::default();
        p.eps_substep_safety = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn zero_state_stays_zero_and_gets_policy_dt() {
        let st = stepper(16, PhysConsts::unit(), SystemVariant::default(), StepPolicy::default());
        let z = State::zeros(*st.model().grid());
        assert_eq!(st.cfl_dt(&z).unwrap(), st.policy().dt);
        let next = st.step(&z, 0.0, 1e-3, &NoForcing).unwrap();
        assert_eq!(next.max_abs(), 0.0);
    }

    #[test]
    fn uniform_unit_velocity_gives_half_dx() {
        let policy = StepPolicy {
            dt: 1.0,
            ..StepPolicy::default()
        };
        let st = stepper(128, heat_consts(), SystemVariant::default(), policy);
        let g = *st.model().grid();
        let mut s = State::zeros(g);
        s.u[0] = RealField::constant(g, 1.0);
        let dt = st.cfl_dt(&s).unwrap();
        assert!((dt - 0.5 * 2.0 * PI / 128.0).abs() < 1e-15);
    }

    #[test]
    fn eps_bound_scales_linearly() {
        let policy = StepPolicy {
            dt: 1.0,
            ..StepPolicy::default()
        };
        let c = PhysConsts::unit();
        let g = Grid::periodic(32).unwrap();
        let mut s = State::zeros(g);
        s.v[0] = RealField::from_fn(g, |x, _| x.sin()).unwrap();
        s.q = RealField::constant(g, 2.0 * c.q_s);
        let a = stepper(32, c, SystemVariant::PEps { eps: 0.02 }, policy);
        let b = stepper(32, c, SystemVariant::PEps { eps: 0.01 }, policy);
        let (da, db) = (a.cfl_dt(&s).unwrap(), b.cfl_dt(&s).unwrap());
        assert!(da < 0.5 * (2.0 * PI / 32.0), "eps bound must be active");
        assert!((db - 0.5 * da).abs() < 1e-14 * da);
    }

    #[test]
    fn limit_variant_caps_overshoot() {
        let policy = StepPolicy {
            dt: 1.0,
            ..StepPolicy::default()
        };
        let c = PhysConsts::unit();
        let g = Grid::periodic(16).unwrap();
        let mut s = State::zeros(g);
        s.v[0] = RealField::from_fn(g, |x, _| 0.01 * x.sin()).unwrap();
        s.q = RealField::constant(g, c.q_s + 1e-3);
        let st = stepper(16, c, SystemVariant::Limit { alpha: 1.0 }, policy);
        let dt = st.cfl_dt(&s).unwrap();
        let p = st.model().precipitation(&s).unwrap();
        assert!(dt * p.max() <= 0.5e-3 * (1.0 + 1e-12));
    }

    #[test]
    fn step_above_bound_is_rejected() {
        let st = stepper(16, PhysConsts::unit(), SystemVariant::default(), StepPolicy::default());
        let z = State::zeros(*st.model().grid());
        assert!(matches!(
            st.step(&z, 0.0, 1.0, &NoForcing),
            Err(Error::UnstableStep { .. })
        ));
    }

    #[test]
    fn heat_mode_decays_exactly() {
        for scheme in [Scheme::IfRk2, Scheme::IfRk3] {
            let policy = StepPolicy {
                dt: 0.05,
                scheme,
                ..StepPolicy::default()
            };
            let l = 2.0 * PI;
            let st = stepper(16, heat_consts(), SystemVariant::default(), policy);
            let g = *st.model().grid();
            let mut s = State::zeros(g);
            s.temp = RealField::from_fn(g, |x, _| x.sin()).unwrap();
            let traj = st.run(&s, 1.0, 0.5, &NoForcing).unwrap();
            let (t, fin) = traj.final_state().unwrap();
            assert_eq!(*t, 1.0);
            let k = 2.0 * PI / l;
            let expected = s.temp.scale((-k * k).exp());
            let err = fin.temp.sub(&expected).unwrap().max_abs();
            assert!(err < 1e-10 * (-k * k).exp(), "{scheme:?}: {err}");
        }
    }

    #[test]
    fn zero_end_time_returns_initial_only() {
        let st = stepper(8, PhysConsts::unit(), SystemVariant::default(), StepPolicy::default());
        let traj = st.run(&State::zeros(*st.model().grid()), 0.0, 0.1, &NoForcing).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.records.len(), 1);
    }

    #[test]
    fn output_times_follow_cadence() {
        assert_eq!(output_times(1.0, 0.25).unwrap(), vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(output_times(1.0, 0.0).unwrap(), vec![1.0]);
        assert_eq!(output_times(0.3, 0.1).unwrap().len(), 3);
        assert!(output_times(0.0, 0.1).unwrap().is_empty());
        assert!(output_times(-1.0, 0.1).is_err());
    }

    #[test]
    fn snapshots_land_on_cadence() {
        let policy = StepPolicy {
            dt: 0.03,
            ..StepPolicy::default()
        };
        let st = stepper(8, heat_consts(), SystemVariant::default(), policy);
        let g = *st.model().grid();
        let mut s = State::zeros(g);
        s.temp = RealField::from_fn(g, |x, _| x.cos()).unwrap();
        let traj = st.run(&s, 0.2, 0.1, &NoForcing).unwrap();
        let times: Vec<f64> = traj.snapshots.iter().map(|(t, _)| *t).collect();
        assert_eq!(times.len(), 3);
        assert!((times[1] - 0.1).abs() < 1e-15 && times[2] == 0.2);
        assert!(traj.records.windows(2).all(|w| w[1].time > w[0].time));
        assert!(traj.records[1].energy_residual.is_some());
        assert!(traj.records.last().unwrap().energy_residual.is_none());
    }

    #[test]
    fn failing_step_reports_last_good_state() {
        // A forcing that turns NaN after t = 0.05.
        struct Bad;
        impl Forcing for Bad {
            fn source(&self, _: crate::model::Component, _: f64, _: f64, t: f64) -> f64 {
                if t > 0.05 {
                    f64::NAN
                } else {
                    0.0
                }
            }
        }
        let policy = StepPolicy {
            dt: 0.02,
            ..StepPolicy::default()
        };
        let st = stepper(8, PhysConsts::unit(), SystemVariant::default(), policy);
        let err = st
            .run(&State::zeros(*st.model().grid()), 1.0, 0.5, &Bad)
            .unwrap_err();
        match err {
            Error::RunFailed(f) => {
                assert!(f.steps_completed >= 2);
                assert!(f.last_good_time <= 0.06);
                assert!(matches!(f.cause, Error::StepFailed { .. }));
                assert_eq!(f.partial.records.len(), f.steps_completed + 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
