//! Scalar diagnostics of a state and checks of the energy balance.
//!
//! The energy `E = (||u||^2 + ||v||^2 + ||T||^2 + ||q||^2) / 2` obeys
//!
//! ```text
//! dE/dt + mu||grad u||^2 + mu||grad v||^2 + ||grad T||^2 + eta||grad q||^2
//!     = a (grad T, v) + b (T, div v) + (P, T) - Qbar (q, div v) - (P, q)
//! ```
//!
//! exactly for the semi-discrete system, because every state produced by
//! the stepper lives in the two-thirds band where the advective triple
//! products cancel without aliasing.

use crate::error::{Error, Result};
use crate::model::{Component, Model, State};
use crate::spectral::{RealField, SpectralField};
use crate::thermo::precipitation_at;

/// Area fractions of `{q < q_s}`, `{q = q_s}` and `{q > q_s}`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SaturationFractions {
    pub below: f64,
    pub at: f64,
    pub above: f64,
}

impl SaturationFractions {
    pub fn classify(q: &RealField, q_s: f64) -> Self {
        let (mut below, mut at, mut above) = (0usize, 0usize, 0usize);
        for &v in q.values() {
            if v < q_s {
                below += 1;
            } else if v > q_s {
                above += 1;
            } else {
                at += 1;
            }
        }
        let n = q.values().len() as f64;
        Self {
            below: below as f64 / n,
            at: at as f64 / n,
            above: above as f64 / n,
        }
    }
}

/// Area fractions of the seven sets comparing two humidity fields against
/// `q_s`, plus the set where the two lie on opposite sides (`crossed`).
///
/// Index `k` of `sets` is `Omega_{k+1}`:
/// `(<,<) (<,=) (=,<) (=,=) (=,>) (>,=) (>,>)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TwinSaturation {
    pub sets: [f64; 7],
    pub crossed: f64,
}

impl TwinSaturation {
    pub fn classify(q1: &RealField, q2: &RealField, q_s: f64) -> Result<Self> {
        q1.grid().ensure_same(q2.grid())?;
        let mut counts = [0usize; 7];
        let mut crossed = 0usize;
        for (&a, &b) in q1.values().iter().zip(q2.values()) {
            use std::cmp::Ordering::*;
            let sa = a.partial_cmp(&q_s).unwrap_or(Equal);
            let sb = b.partial_cmp(&q_s).unwrap_or(Equal);
            let slot = match (sa, sb) {
                (Less, Less) => 0,
                (Less, Equal) => 1,
                (Equal, Less) => 2,
                (Equal, Equal) => 3,
                (Equal, Greater) => 4,
                (Greater, Equal) => 5,
                (Greater, Greater) => 6,
                (Less, Greater) | (Greater, Less) => {
                    crossed += 1;
                    continue;
                }
            };
            counts[slot] += 1;
        }
        let n = q1.values().len() as f64;
        Ok(Self {
            sets: counts.map(|c| c as f64 / n),
            crossed: crossed as f64 / n,
        })
    }
}

/// The five integrals on the right of the energy balance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyBudget {
    /// `a (grad T, v)`
    pub buoyancy: f64,
    /// `b (T, div v)`
    pub stratification: f64,
    /// `(P, T)`
    pub latent_heating: f64,
    /// `-Qbar (q, div v)`
    pub moisture_convergence: f64,
    /// `-(P, q)`
    pub precip_sink: f64,
}

impl EnergyBudget {
    pub fn total(&self) -> f64 {
        self.buoyancy
            + self.stratification
            + self.latent_heating
            + self.moisture_convergence
            + self.precip_sink
    }
}

/// Per-record scalars. Norms are grid quadratures; sup norms are grid maxima.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub energy: f64,
    pub grad_u: f64,
    pub grad_v: f64,
    pub grad_t: f64,
    pub grad_q: f64,
    pub sup_t: f64,
    pub sup_grad_u: f64,
    pub sup_grad_v: f64,
    pub h1_u: f64,
    pub h1_v: f64,
    pub h1_t: f64,
    pub h1_q: f64,
    /// `2 mu ||grad u||^2 + mu ||grad v||^2 + ||grad T||^2 + 2 eta ||grad q||^2`.
    pub dissipation: f64,
    /// `mu ||grad u||^2 + mu ||grad v||^2 + ||grad T||^2 + eta ||grad q||^2`.
    pub balance_dissipation: f64,
    pub precip_total: f64,
    pub saturation: SaturationFractions,
    pub budget: EnergyBudget,
    /// Filled once the following record exists; `None` at the ends of a run.
    pub energy_residual: Option<f64>,
}

impl DiagnosticsRecord {
    /// All scalar entries, for finiteness checks.
    pub fn scalars(&self) -> Vec<f64> {
        let mut v = vec![
            self.time,
            self.energy,
            self.grad_u,
            self.grad_v,
            self.grad_t,
            self.grad_q,
            self.sup_t,
            self.sup_grad_u,
            self.sup_grad_v,
            self.h1_u,
            self.h1_v,
            self.h1_t,
            self.h1_q,
            self.dissipation,
            self.balance_dissipation,
            self.precip_total,
            self.saturation.below,
            self.saturation.at,
            self.saturation.above,
            self.budget.buoyancy,
            self.budget.stratification,
            self.budget.latent_heating,
            self.budget.moisture_convergence,
            self.budget.precip_sink,
        ];
        v.extend(self.energy_residual);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.scalars().iter().all(|v| v.is_finite())
    }
}

fn grad_norm_sq(model: &Model, fh: &SpectralField) -> f64 {
    let sp = model.spectral();
    let gx = sp.dx_hat(fh);
    let gy = sp.dy_hat(fh);
    gx.l2_norm_sq() + gy.l2_norm_sq()
}

/// Evaluates every diagnostic of `s` under `model`'s constants and variant.
pub fn record(model: &Model, time: f64, s: &State) -> Result<DiagnosticsRecord> {
    let sp = model.spectral();
    let c = model.consts();
    let eta = model.variant().eta();
    sp.grid().ensure_same(s.grid())?;
    s.check_finite()?;
    let hat = sp.forward_many_unchecked(&s.components());

    let l2 = Component::ALL.map(|comp| s.component(comp).l2_norm_sq());
    let g2: Vec<f64> = hat.iter().map(|h| grad_norm_sq(model, h)).collect();
    let (u_sq, v_sq) = (l2[0] + l2[1], l2[2] + l2[3]);
    let (gu_sq, gv_sq) = (g2[0] + g2[1], g2[2] + g2[3]);
    let (gt_sq, gq_sq) = (g2[4], g2[5]);

    let derivs: Vec<SpectralField> = hat[..5]
        .iter()
        .flat_map(|h| [sp.dx_hat(h), sp.dy_hat(h)])
        .collect();
    let grads = sp.inverse_many(&derivs.iter().collect::<Vec<_>>());
    let [u1x, u1y, u2x, u2y, v1x, v1y, v2x, v2y, tx, ty]: [RealField; 10] =
        grads.try_into().expect("ten gradients");
    let frob_max = |f: [&RealField; 4]| {
        let mut m = 0.0_f64;
        for k in 0..f[0].values().len() {
            let s2: f64 = f.iter().map(|g| g.values()[k] * g.values()[k]).sum();
            m = m.max(s2.sqrt());
        }
        m
    };
    let sup_grad_u = frob_max([&u1x, &u1y, &u2x, &u2y]);
    let sup_grad_v = frob_max([&v1x, &v1y, &v2x, &v2y]);

    let div_v = v1x.add(&v2y)?;
    let h = model.variant().heaviside();
    let precip: Vec<f64> = div_v
        .values()
        .iter()
        .zip(s.q.values())
        .zip(s.temp.values())
        .map(|((&d, &q), &t)| precipitation_at(d, q, t, &h, c))
        .collect();
    let precip = RealField::new(*s.grid(), precip)?;

    let budget = EnergyBudget {
        buoyancy: c.buoyancy_coeff() * (tx.inner(&s.v[0])? + ty.inner(&s.v[1])?),
        stratification: c.stratification_coeff() * s.temp.inner(&div_v)?,
        latent_heating: precip.inner(&s.temp)?,
        moisture_convergence: -c.q_bar * s.q.inner(&div_v)?,
        precip_sink: -precip.inner(&s.q)?,
    };

    Ok(DiagnosticsRecord {
        time,
        energy: 0.5 * l2.iter().sum::<f64>(),
        grad_u: gu_sq.sqrt(),
        grad_v: gv_sq.sqrt(),
        grad_t: gt_sq.sqrt(),
        grad_q: gq_sq.sqrt(),
        sup_t: s.temp.max_abs(),
        sup_grad_u,
        sup_grad_v,
        h1_u: (u_sq + gu_sq).sqrt(),
        h1_v: (v_sq + gv_sq).sqrt(),
        h1_t: (l2[4] + gt_sq).sqrt(),
        h1_q: (l2[5] + gq_sq).sqrt(),
        dissipation: 2.0 * c.mu * gu_sq + c.mu * gv_sq + gt_sq + 2.0 * eta * gq_sq,
        balance_dissipation: c.mu * gu_sq + c.mu * gv_sq + gt_sq + eta * gq_sq,
        precip_total: precip.integral(),
        saturation: SaturationFractions::classify(&s.q, c.q_s),
        budget,
        energy_residual: None,
    })
}

/// Second-order derivative of `E` at the middle of three records, valid for
/// unequal spacing.
fn energy_rate(prev: &DiagnosticsRecord, mid: &DiagnosticsRecord, next: &DiagnosticsRecord) -> f64 {
    let hm = mid.time - prev.time;
    let hp = next.time - mid.time;
    (hm * hm * next.energy - hp * hp * prev.energy - (hm * hm - hp * hp) * mid.energy)
        / (hm * hp * (hm + hp))
}

/// Residual of the energy balance at the middle of three consecutive records.
pub fn energy_residual_at(
    prev: &DiagnosticsRecord,
    mid: &DiagnosticsRecord,
    next: &DiagnosticsRecord,
) -> f64 {
    (energy_rate(prev, mid, next) + mid.balance_dissipation - mid.budget.total()).abs()
}

/// Largest balance residual over the interior of `window`.
pub fn energy_identity_residual(window: &[DiagnosticsRecord]) -> Result<f64> {
    if window.len() < 3 {
        return Err(Error::WindowTooShort(window.len()));
    }
    Ok(window
        .windows(3)
        .map(|w| energy_residual_at(&w[0], &w[1], &w[2]))
        .fold(0.0, f64::max))
}

/// Fills `energy_residual` on every interior record.
pub fn fill_energy_residuals(records: &mut [DiagnosticsRecord]) {
    for k in 1..records.len().saturating_sub(1) {
        let r = energy_residual_at(&records[k - 1], &records[k], &records[k + 1]);
        records[k].energy_residual = Some(r);
    }
}

/// Constant of the Gronwall estimate, from Cauchy-Schwarz and Young with
/// `||div v|| <= ||grad v||` and `|G^+| <= C_G`.
///
/// With `A = Qbar + c_P C_G`, `B = b + c_P C_G` the source terms are bounded by
/// `(mu/2)||grad v||^2 + (max(A, B)^2 / mu) ||(T, q)||^2 + ||grad T||^2 / 2 + (a^2/2)||v||^2`,
/// so `dE/dt + dissipation / 2 <= 2 C E` with `C = max(max(A, B)^2 / mu, a^2 / 2)`.
pub fn gronwall_constant(model: &Model) -> f64 {
    let c = model.consts();
    let src = c.precip_coeff() * c.g_bound();
    let a = c.q_bar + src;
    let b = c.stratification_coeff() + src;
    let buoy = c.buoyancy_coeff();
    (a.max(b).powi(2) / c.mu).max(0.5 * buoy * buoy)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GronwallViolation {
    pub index: usize,
    pub time: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GronwallReport {
    pub constant: f64,
    /// Largest `lhs / rhs` over the trajectory (0 when `E(0) = 0`).
    pub max_ratio: f64,
    pub first_violation: Option<GronwallViolation>,
}

impl GronwallReport {
    pub fn satisfied(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Checks `E(t) + int_0^t dissipation / 2 <= E(0) exp(2 C t)` on every record,
/// integrating the dissipation with the trapezoidal rule. Unforced runs only.
pub fn gronwall_bound_check(model: &Model, records: &[DiagnosticsRecord]) -> GronwallReport {
    let constant = gronwall_constant(model);
    let mut report = GronwallReport {
        constant,
        max_ratio: 0.0,
        first_violation: None,
    };
    let Some(first) = records.first() else {
        return report;
    };
    let (e0, t0) = (first.energy, first.time);
    let mut integral = 0.0;
    for (k, r) in records.iter().enumerate() {
        if k > 0 {
            let p = &records[k - 1];
            integral += 0.25 * (r.time - p.time) * (r.dissipation + p.dissipation);
        }
        let lhs = r.energy + integral;
        let rhs = e0 * (2.0 * constant * (r.time - t0)).exp();
        if rhs > 0.0 {
            report.max_ratio = report.max_ratio.max(lhs / rhs);
        }
        if lhs > rhs * (1.0 + 1e-10) + 1e-300 && report.first_violation.is_none() {
            report.first_violation = Some(GronwallViolation {
                index: k,
                time: r.time,
                lhs,
                rhs,
            });
        }
    }
    report
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupTReport {
    pub max_sup_t: f64,
    /// Number of records carrying a finite `sup_t`.
    pub recorded: usize,
    pub exceeded_xi0: bool,
    pub first_exceedance: Option<f64>,
    /// Whether `||T||_inf` never increased between records.
    pub nonincreasing: bool,
}

/// Tracks `||T||_inf` over time and flags any excursion above `xi0`.
pub fn sup_t_monitor(records: &[DiagnosticsRecord], xi0: f64) -> SupTReport {
    let mut report = SupTReport {
        max_sup_t: 0.0,
        recorded: 0,
        exceeded_xi0: false,
        first_exceedance: None,
        nonincreasing: true,
    };
    for (k, r) in records.iter().enumerate() {
        if r.sup_t.is_finite() {
            report.recorded += 1;
        }
        report.max_sup_t = report.max_sup_t.max(r.sup_t);
        if r.sup_t > xi0 && !report.exceeded_xi0 {
            report.exceeded_xi0 = true;
            report.first_exceedance = Some(r.time);
        }
        if k > 0 && r.sup_t > records[k - 1].sup_t {
            report.nonincreasing = false;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemVariant;
    use crate::spectral::Grid;
    use crate::thermo::PhysConsts;
    use std::f64::consts::PI;

    fn model(n: usize) -> Model {
        Model::new(
            Grid::periodic(n).unwrap(),
            PhysConsts::unit(),
            SystemVariant::PEpsEta { eps: 0.1, eta: 0.01 },
        )
        .unwrap()
    }

    #[test]
    fn zero_state_record() {
        let m = model(16);
        let r = record(&m, 0.0, &State::zeros(*m.grid())).unwrap();
        assert_eq!(r.energy, 0.0);
        assert_eq!(r.dissipation, 0.0);
        assert_eq!(r.sup_t, 0.0);
        assert_eq!(r.saturation.below, 1.0);
        assert_eq!(r.budget.total(), 0.0);
        assert!(r.is_finite());
    }

    #[test]
    fn single_sine_energy() {
        let m = model(32);
        let mut s = State::zeros(*m.grid());
        s.u[0] = RealField::from_fn(*m.grid(), |x, _| x.sin()).unwrap();
        let r = record(&m, 0.0, &s).unwrap();
        assert!((s.u[0].l2_norm_sq() - 2.0 * PI * PI).abs() < 1e-12);
        assert!((r.energy - PI * PI).abs() < 1e-12);
        assert!((r.grad_u - (2.0 * PI * PI).sqrt()).abs() < 1e-12);
        assert!((r.dissipation - 4.0 * PI * PI).abs() < 1e-11);
    }

    #[test]
    fn saturation_fractions_partition() {
        let g = Grid::periodic(8).unwrap();
        let mut v = vec![0.1; 64];
        v[0] = 0.5;
        v[1] = 0.7;
        v[2] = 0.7;
        let q = RealField::new(g, v).unwrap();
        let f = SaturationFractions::classify(&q, 0.5);
        assert_eq!(f.at, 1.0 / 64.0);
        assert_eq!(f.above, 2.0 / 64.0);
        assert!((f.below + f.at + f.above - 1.0).abs() < 1e-15);
    }

    #[test]
    fn twin_classes_cover_domain() {
        let g = Grid::periodic(8).unwrap();
        let q1 = RealField::from_fn(g, |x, _| 0.5 + 0.1 * x.sin()).unwrap();
        let q2 = RealField::from_fn(g, |x, _| 0.5 - 0.1 * x.sin()).unwrap();
        let t = TwinSaturation::classify(&q1, &q2, 0.5).unwrap();
        let total: f64 = t.sets.iter().sum::<f64>() + t.crossed;
        assert!((total - 1.0).abs() < 1e-14);
        assert!(t.crossed > 0.0);
        let same = TwinSaturation::classify(&q1, &q1, 0.5).unwrap();
        assert_eq!(same.crossed, 0.0);
    }

    #[test]
    fn short_window_is_rejected() {
        let m = model(8);
        let r = record(&m, 0.0, &State::zeros(*m.grid())).unwrap();
        assert!(matches!(
            energy_identity_residual(&[r.clone(), r]),
            Err(Error::WindowTooShort(2))
        ));
    }

    #[test]
    fn stationary_zero_state_has_zero_residual() {
        let m = model(8);
        let recs: Vec<_> = (0..4)
            .map(|k| record(&m, 0.1 * k as f64, &State::zeros(*m.grid())).unwrap())
            .collect();
        assert_eq!(energy_identity_residual(&recs).unwrap(), 0.0);
    }

    #[test]
    fn energy_rate_is_exact_for_quadratics_on_uneven_steps() {
        let mk = |t: f64| DiagnosticsRecord {
            time: t,
            energy: 1.0 + 2.0 * t + 3.0 * t * t,
            grad_u: 0.0,
            grad_v: 0.0,
            grad_t: 0.0,
            grad_q: 0.0,
            sup_t: 0.0,
            sup_grad_u: 0.0,
            sup_grad_v: 0.0,
            h1_u: 0.0,
            h1_v: 0.0,
            h1_t: 0.0,
            h1_q: 0.0,
            dissipation: 0.0,
            balance_dissipation: 0.0,
            precip_total: 0.0,
            saturation: SaturationFractions::default(),
            budget: EnergyBudget::default(),
            energy_residual: None,
        };
        let rate = energy_rate(&mk(0.1), &mk(0.25), &mk(0.3));
        assert!((rate - (2.0 + 6.0 * 0.25)).abs() < 1e-12);
    }

    #[test]
    fn gronwall_trivial_for_zero_state() {
        let m = model(8);
        let recs: Vec<_> = (0..3)
            .map(|k| record(&m, k as f64, &State::zeros(*m.grid())).unwrap())
            .collect();
        let rep = gronwall_bound_check(&m, &recs);
        assert!(rep.satisfied());
        assert!(rep.constant > 0.0);
    }

    #[test]
    fn sup_t_monitor_flags_exceedance() {
        let m = model(8);
        let g = *m.grid();
        let mut recs = Vec::new();
        for (k, amp) in [1.0, 12.0, 3.0].iter().enumerate() {
            let mut s = State::zeros(g);
            s.temp = RealField::constant(g, *amp);
            recs.push(record(&m, k as f64, &s).unwrap());
        }
        let rep = sup_t_monitor(&recs, m.consts().xi0());
        assert_eq!(rep.max_sup_t, 12.0);
        assert!(rep.exceeded_xi0);
        assert_eq!(rep.first_exceedance, Some(1.0));
        assert!(!rep.nonincreasing);
        assert_eq!(rep.recorded, 3);
    }
}
