//! Physical constants and the closure functions of the precipitation source.
//!
//! The condensation closure is
//!
//! ```text
//! G(T) = q_s (L R - c_p R_v T) / (c_p R_v T^2 + q_s L^2),    F(T) = T G(T)
//! ```
//!
//! and precipitation is `P = (H g / (pi R)) (div v)^- H(q - q_s) G^+(T)` with
//! one of three single-valued stand-ins for the Heaviside graph `H`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::RealField;

/// Physical parameters of the two-mode tropical model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysConsts {
    /// Latent heat of evaporation `L` (J/kg).
    pub latent_heat: f64,
    /// Dry-air gas constant `R` (J/(kg K)).
    pub r_dry: f64,
    /// Water-vapour gas constant `R_v` (J/(kg K)).
    pub r_vapor: f64,
    /// Specific heat at constant pressure (J/(kg K)).
    pub c_p: f64,
    pub gravity: f64,
    /// Troposphere thickness `H` (m).
    pub h_trop: f64,
    /// Reference potential temperature (K).
    pub theta0: f64,
    /// Brunt-Vaisala frequency (1/s).
    pub brunt_vaisala: f64,
    /// Gross moisture stratification; must be positive.
    pub q_bar: f64,
    /// Saturation humidity, in `(0, 1)`.
    pub q_s: f64,
    /// Viscosity of both velocity modes.
    pub mu: f64,
}

impl Default for PhysConsts {
    fn default() -> Self {
        Self::physical()
    }
}

impl PhysConsts {
    /// SI values for the tropical troposphere.
    pub fn physical() -> Self {
        Self {
            latent_heat: 2.5e6,
            r_dry: 287.0,
            r_vapor: 461.5,
            c_p: 1004.0,
            gravity: 9.81,
            h_trop: 1.6e4,
            theta0: 300.0,
            brunt_vaisala: 1.0e-2,
            q_bar: 0.9,
            q_s: 0.02,
            mu: 1.0,
        }
    }

    /// Nondimensional preset with every coupling coefficient equal to one,
    /// `G(0) = 1` and `xi0 = 10`.
    pub fn unit() -> Self {
        Self {
            latent_heat: 1.0,
            r_dry: 1.0,
            r_vapor: 0.1,
            c_p: 1.0,
            gravity: 1.0,
            h_trop: PI,
            theta0: 1.0,
            brunt_vaisala: 1.0,
            q_bar: 0.5,
            q_s: 0.5,
            mu: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("latent_heat", self.latent_heat),
            ("r_dry", self.r_dry),
            ("r_vapor", self.r_vapor),
            ("c_p", self.c_p),
            ("gravity", self.gravity),
            ("h_trop", self.h_trop),
            ("theta0", self.theta0),
            ("q_bar", self.q_bar),
            ("mu", self.mu),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.brunt_vaisala.is_finite() && self.brunt_vaisala >= 0.0) {
            return Err(Error::param(
                "brunt_vaisala",
                format!("must be non-negative, got {}", self.brunt_vaisala),
            ));
        }
        if !(self.q_s > 0.0 && self.q_s < 1.0) {
            return Err(Error::param(
                "q_s",
                format!("must lie in (0, 1), got {}", self.q_s),
            ));
        }
        Ok(())
    }

    /// Temperature `L R / (c_p R_v)` at which `G` changes sign.
    pub fn xi0(&self) -> f64 {
        self.latent_heat * self.r_dry / (self.c_p * self.r_vapor)
    }

    /// `H g / (pi R)`, the precipitation prefactor.
    pub fn precip_coeff(&self) -> f64 {
        self.h_trop * self.gravity / (PI * self.r_dry)
    }

    /// `(H / pi)(g / theta0)`, coupling of `grad T` into the baroclinic momentum.
    pub fn buoyancy_coeff(&self) -> f64 {
        self.h_trop / PI * self.gravity / self.theta0
    }

    /// `(H / pi)(theta0 N^2 / g)`, coupling of `div v` into the temperature.
    pub fn stratification_coeff(&self) -> f64 {
        self.h_trop / PI * self.theta0 * self.brunt_vaisala * self.brunt_vaisala / self.gravity
    }

    fn cr(&self) -> f64 {
        self.c_p * self.r_vapor
    }

    fn denom(&self, t: f64) -> f64 {
        self.cr() * t * t + self.q_s * self.latent_heat * self.latent_heat
    }

    /// `G(T)`, written through `xi0 - T` so that `G(xi0)` is exactly zero.
    pub fn closure_g(&self, t: f64) -> f64 {
        self.q_s * self.cr() * (self.xi0() - t) / self.denom(t)
    }

    pub fn closure_g_plus(&self, t: f64) -> f64 {
        self.closure_g(t).max(0.0)
    }

    /// `F(T) = T G(T)`.
    pub fn closure_f(&self, t: f64) -> f64 {
        t * self.closure_g(t)
    }

    pub fn closure_g_prime(&self, t: f64) -> f64 {
        let b = self.cr();
        let a = b * self.xi0();
        let d = self.q_s * self.latent_heat * self.latent_heat;
        let den = self.denom(t);
        self.q_s * (b * b * t * t - 2.0 * a * b * t - b * d) / (den * den)
    }

    pub fn closure_f_prime(&self, t: f64) -> f64 {
        self.closure_g(t) + t * self.closure_g_prime(t)
    }

    /// Stationary points of `G`: roots of `B T^2 - 2 A T - D`.
    fn g_critical_points(&self) -> [f64; 2] {
        let b = self.cr();
        let a = b * self.xi0();
        let d = self.q_s * self.latent_heat * self.latent_heat;
        let s = (a * a + b * d).sqrt();
        [(a - s) / b, (a + s) / b]
    }

    /// Stationary points of `F`: roots of `A B T^2 + 2 B D T - A D`.
    fn f_critical_points(&self) -> [f64; 2] {
        let b = self.cr();
        let a = b * self.xi0();
        let d = self.q_s * self.latent_heat * self.latent_heat;
        let s = (b * b * d * d + a * a * b * d).sqrt();
        [(-b * d - s) / (a * b), (-b * d + s) / (a * b)]
    }

    /// `sup |G|`, from the stationary points (`G` vanishes at infinity).
    pub fn g_bound(&self) -> f64 {
        self.g_critical_points()
            .iter()
            .map(|&t| self.closure_g(t).abs())
            .fold(0.0, f64::max)
    }

    /// `sup |F|`; `F` tends to `-q_s` at infinity.
    pub fn f_bound(&self) -> f64 {
        self.f_critical_points()
            .iter()
            .map(|&t| self.closure_f(t).abs())
            .fold(self.q_s, f64::max)
    }
}

/// Sampling controls for measuring the closure constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosureTolerances {
    pub lipschitz_sample_count: usize,
    pub bound_check_tolerance: f64,
}

impl Default for ClosureTolerances {
    fn default() -> Self {
        Self {
            lipschitz_sample_count: 400_001,
            bound_check_tolerance: 1e-9,
        }
    }
}

impl ClosureTolerances {
    pub fn validate(&self) -> Result<()> {
        if self.lipschitz_sample_count < 2 {
            return Err(Error::param("lipschitz_sample_count", "need at least 2 samples"));
        }
        if !(self.bound_check_tolerance > 0.0) {
            return Err(Error::param("bound_check_tolerance", "must be positive"));
        }
        Ok(())
    }
}

/// Measured bounds `|F| <= c_f`, `|G| <= c_g` and Lipschitz constants `m_f`, `m_g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosureConstants {
    pub c_f: f64,
    pub c_g: f64,
    pub m_f: f64,
    pub m_g: f64,
}

/// Half-width of the temperature window scanned by [`measure_closure_constants`].
pub const SAMPLE_HALF_WIDTH: f64 = 1.0e4;

/// Dense sampling over `[-1e4, 1e4]` plus the analytic stationary points; the
/// sampled derivative maxima are polished by a local golden-section search.
pub fn measure_closure_constants(
    c: &PhysConsts,
    tol: &ClosureTolerances,
) -> Result<ClosureConstants> {
    c.validate()?;
    tol.validate()?;
    let n = tol.lipschitz_sample_count;
    let h = 2.0 * SAMPLE_HALF_WIDTH / (n - 1) as f64;
    let sample = |i: usize| -SAMPLE_HALF_WIDTH + i as f64 * h;

    let mut c_f = c.f_bound();
    let mut c_g = c.g_bound();
    let (mut m_f, mut arg_f) = (0.0_f64, 0.0);
    let (mut m_g, mut arg_g) = (0.0_f64, 0.0);
    for i in 0..n {
        let t = sample(i);
        c_f = c_f.max(c.closure_f(t).abs());
        c_g = c_g.max(c.closure_g(t).abs());
        let df = c.closure_f_prime(t).abs();
        if df > m_f {
            m_f = df;
            arg_f = t;
        }
        let dg = c.closure_g_prime(t).abs();
        if dg > m_g {
            m_g = dg;
            arg_g = t;
        }
    }
    m_f = m_f.max(golden_max(|t| c.closure_f_prime(t).abs(), arg_f - h, arg_f + h));
    m_g = m_g.max(golden_max(|t| c.closure_g_prime(t).abs(), arg_g - h, arg_g + h));
    Ok(ClosureConstants { c_f, c_g, m_f, m_g })
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5.0_f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let a = hi - r * (hi - lo);
        let b = lo + r * (hi - lo);
        if f(a) > f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    f(0.5 * (lo + hi))
}

/// Piecewise-linear mollified Heaviside: `0` for `r <= 0`, `r / eps` on `(0, eps]`, `1` above.
pub fn heaviside_eps(r: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param("eps", format!("must be positive, got {eps}")));
    }
    Ok(mollified(r, eps))
}

#[inline]
fn mollified(r: f64, eps: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else if r <= eps {
        r / eps
    } else {
        1.0
    }
}

/// Single-valued selection of the Heaviside graph: `alpha` exactly at `r == 0`.
pub fn heaviside_selection(r: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(selection(r, alpha))
}

#[inline]
fn selection(r: f64, alpha: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        0.0
    } else {
        alpha
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("must lie in [0, 1], got {alpha}")))
    }
}

/// Which stand-in for the Heaviside graph multiplies the precipitation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Heaviside {
    Mollified { eps: f64 },
    Selection { alpha: f64 },
    /// `1` when `q >= q_s`, else `0`.
    Indicator,
}

impl Heaviside {
    pub fn mollified(eps: f64) -> Result<Self> {
        heaviside_eps(0.0, eps).map(|_| Heaviside::Mollified { eps })
    }

    pub fn selection(alpha: f64) -> Result<Self> {
        check_alpha(alpha).map(|_| Heaviside::Selection { alpha })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Heaviside::Mollified { eps } => heaviside_eps(0.0, eps).map(|_| ()),
            Heaviside::Selection { alpha } => check_alpha(alpha),
            Heaviside::Indicator => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Heaviside::Mollified { eps } => mollified(r, eps),
            Heaviside::Selection { alpha } => selection(r, alpha),
            Heaviside::Indicator => {
                if r >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Pointwise precipitation rate.
#[inline]
pub fn precipitation_at(div_v: f64, q: f64, t: f64, h: &Heaviside, c: &PhysConsts) -> f64 {
    let updraft = (-div_v).max(0.0);
    if updraft == 0.0 {
        return 0.0;
    }
    c.precip_coeff() * updraft * h.eval(q - c.q_s) * c.closure_g_plus(t)
}

/// Precipitation field `(H g / (pi R)) (div v)^- H(q - q_s) G^+(T)`.
pub fn precipitation(
    div_v: &RealField,
    q: &RealField,
    temp: &RealField,
    h: &Heaviside,
    c: &PhysConsts,
) -> Result<RealField> {
    h.validate()?;
    let grid = *div_v.grid();
    grid.ensure_same(q.grid())?;
    grid.ensure_same(temp.grid())?;
    let values = div_v
        .values()
        .iter()
        .zip(q.values())
        .zip(temp.values())
        .map(|((&d, &qq), &tt)| precipitation_at(d, qq, tt, h, c))
        .collect();
    RealField::new(grid, values)
}
