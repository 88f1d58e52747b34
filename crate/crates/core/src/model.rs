//! Right-hand sides of the three system variants.
//!
//! With `a = (H/pi)(g/theta0)`, `b = (H/pi)(theta0 N^2/g)` and `P` the
//! precipitation rate,
//!
//! ```text
//! du/dt = Leray[-u.grad u - div(v (x) v) + mu lap u]
//! dv/dt = -u.grad v - v.grad u + mu lap v + a grad T
//! dT/dt = -u.grad T + lap T + b div v + P
//! dq/dt = -u.grad q - Qbar div v - P (+ eta lap q)
//! ```
//!
//! Quadratic terms and `P` are formed pointwise on the grid and truncated
//! by the two-thirds rule before they enter a tendency.

use crate::error::{Error, Result};
use crate::spectral::{Grid, RealField, Spectral, SpectralField};
use crate::thermo::{precipitation_at, Heaviside, PhysConsts};

/// Prognostic fields in snapshot order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Component {
    U1,
    U2,
    V1,
    V2,
    Temp,
    Q,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::U1,
        Component::U2,
        Component::V1,
        Component::V2,
        Component::Temp,
        Component::Q,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::U1 => "u1",
            Component::U2 => "u2",
            Component::V1 => "v1",
            Component::V2 => "v2",
            Component::Temp => "T",
            Component::Q => "q",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(name: &str) -> Option<Component> {
        Component::ALL.into_iter().find(|c| c.name() == name)
    }
}

/// Barotropic velocity `u`, baroclinic velocity `v`, temperature and humidity.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub u: [RealField; 2],
    pub v: [RealField; 2],
    pub temp: RealField,
    pub q: RealField,
}

impl State {
    pub fn zeros(grid: Grid) -> Self {
        let z = RealField::zeros(grid);
        Self {
            u: [z.clone(), z.clone()],
            v: [z.clone(), z.clone()],
            temp: z.clone(),
            q: z,
        }
    }

    pub fn from_components(fields: [RealField; 6]) -> Result<Self> {
        let [u1, u2, v1, v2, temp, q] = fields;
        let grid = *u1.grid();
        for f in [&u2, &v1, &v2, &temp, &q] {
            grid.ensure_same(f.grid())?;
        }
        Ok(Self {
            u: [u1, u2],
            v: [v1, v2],
            temp,
            q,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.u[0].grid()
    }

    pub fn component(&self, c: Component) -> &RealField {
        match c {
            Component::U1 => &self.u[0],
            Component::U2 => &self.u[1],
            Component::V1 => &self.v[0],
            Component::V2 => &self.v[1],
            Component::Temp => &self.temp,
            Component::Q => &self.q,
        }
    }

    pub fn component_mut(&mut self, c: Component) -> &mut RealField {
        match c {
            Component::U1 => &mut self.u[0],
            Component::U2 => &mut self.u[1],
            Component::V1 => &mut self.v[0],
            Component::V2 => &mut self.v[1],
            Component::Temp => &mut self.temp,
            Component::Q => &mut self.q,
        }
    }

    pub fn components(&self) -> [&RealField; 6] {
        Component::ALL.map(|c| self.component(c))
    }

    pub fn check_finite(&self) -> Result<()> {
        for c in Component::ALL {
            self.component(c).check_finite(c.name())?;
        }
        Ok(())
    }

    /// Largest grid magnitude over all six fields.
    pub fn max_abs(&self) -> f64 {
        self.components()
            .iter()
            .map(|f| f.max_abs())
            .fold(0.0, f64::max)
    }

    /// `sqrt(sum over fields of ||a - b||_2^2)`.
    pub fn l2_distance(&self, other: &State) -> Result<f64> {
        let mut acc = 0.0;
        for c in Component::ALL {
            acc += self.component(c).sub(other.component(c))?.l2_norm_sq();
        }
        Ok(acc.sqrt())
    }
}

/// Which member of the regularization cascade is integrated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SystemVariant {
    /// Mollified Heaviside plus artificial humidity diffusion `eta lap q`.
    PEpsEta { eps: f64, eta: f64 },
    /// Mollified Heaviside, no humidity diffusion.
    PEps { eps: f64 },
    /// Discontinuous limit with the constant selection `alpha` on `{q = q_s}`.
    Limit { alpha: f64 },
}

impl Default for SystemVariant {
    fn default() -> Self {
        SystemVariant::PEps { eps: 1e-2 }
    }
}

impl SystemVariant {
    pub fn validate(&self) -> Result<()> {
        self.heaviside().validate()?;
        if let SystemVariant::PEpsEta { eta, .. } = *self {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::param("eta", format!("must be positive, got {eta}")));
            }
        }
        Ok(())
    }

    pub fn heaviside(&self) -> Heaviside {
        match *self {
            SystemVariant::PEpsEta { eps, .. } | SystemVariant::PEps { eps } => {
                Heaviside::Mollified { eps }
            }
            SystemVariant::Limit { alpha } => Heaviside::Selection { alpha },
        }
    }

    /// Humidity diffusivity.
    pub fn eta(&self) -> f64 {
        match *self {
            SystemVariant::PEpsEta { eta, .. } => eta,
            _ => 0.0,
        }
    }

    pub fn eps(&self) -> Option<f64> {
        match *self {
            SystemVariant::PEpsEta { eps, .. } | SystemVariant::PEps { eps } => Some(eps),
            SystemVariant::Limit { .. } => None,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            SystemVariant::Limit { alpha } => Some(alpha),
            _ => None,
        }
    }

    /// Snapshot tag: 0 `p_eps_eta`, 1 `p_eps`, 2 `limit`.
    pub fn tag(&self) -> u8 {
        match self {
            SystemVariant::PEpsEta { .. } => 0,
            SystemVariant::PEps { .. } => 1,
            SystemVariant::Limit { .. } => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SystemVariant::PEpsEta { .. } => "p_eps_eta",
            SystemVariant::PEps { .. } => "p_eps",
            SystemVariant::Limit { .. } => "limit",
        }
    }
}

/// Prescribed source terms, e.g. for manufactured solutions.
pub trait Forcing: Sync {
    fn source(&self, component: Component, x: f64, y: f64, t: f64) -> f64;

    /// `false` lets callers skip sampling altogether.
    fn is_active(&self) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NoForcing;

impl Forcing for NoForcing {
    fn source(&self, _: Component, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }

    fn is_active(&self) -> bool {
        false
    }
}

pub(crate) type HatState = [SpectralField; 6];

/// Grid, constants and variant bound together; evaluates tendencies.
#[derive(Clone, Debug)]
pub struct Model {
    spectral: Spectral,
    consts: PhysConsts,
    variant: SystemVariant,
}

struct Nonlinear {
    /// Dealiased nonlinear terms plus forcing; `u` not yet projected.
    terms: HatState,
    div_v: SpectralField,
}

impl Model {
    pub fn new(grid: Grid, consts: PhysConsts, variant: SystemVariant) -> Result<Self> {
        consts.validate()?;
        variant.validate()?;
        Ok(Self {
            spectral: Spectral::new(grid),
            consts,
            variant,
        })
    }

    /// Same grid and constants, different variant.
    pub fn with_variant(&self, variant: SystemVariant) -> Result<Self> {
        variant.validate()?;
        Ok(Self {
            spectral: self.spectral.clone(),
            consts: self.consts,
            variant,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.spectral.grid()
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn consts(&self) -> &PhysConsts {
        &self.consts
    }

    pub fn variant(&self) -> &SystemVariant {
        &self.variant
    }

    /// Per-component diffusivities in snapshot order.
    pub fn diffusivities(&self) -> [f64; 6] {
        let mu = self.consts.mu;
        [mu, mu, mu, mu, 1.0, self.variant.eta()]
    }

    pub(crate) fn to_hat(&self, s: &State) -> Result<HatState> {
        self.grid().ensure_same(s.grid())?;
        s.check_finite()?;
        let hats = self.spectral.forward_many_unchecked(&s.components());
        Ok(hats.try_into().expect("six components"))
    }

    pub(crate) fn from_hat(&self, hat: &HatState) -> State {
        let fields = self.spectral.inverse_many(&hat.each_ref());
        let [u1, u2, v1, v2, temp, q]: [RealField; 6] = fields.try_into().expect("six components");
        State {
            u: [u1, u2],
            v: [v1, v2],
            temp,
            q,
        }
    }

    pub(crate) fn project_hat(&self, hat: &mut HatState) {
        let (a, b) = self.spectral.leray_hat(&hat[0], &hat[1]);
        hat[0] = a;
        hat[1] = b;
    }

    /// Dealiases every field and Leray-projects `u`.
    pub fn prepare(&self, s: &State) -> Result<State> {
        let mut hat = self.to_hat(s)?;
        hat.iter_mut()
            .for_each(|h| self.spectral.dealias_in_place(h));
        self.project_hat(&mut hat);
        Ok(self.from_hat(&hat))
    }

    fn forcing_hat(&self, forcing: &dyn Forcing, t: f64) -> Result<Option<HatState>> {
        if !forcing.is_active() {
            return Ok(None);
        }
        let grid = *self.grid();
        let mut fields = Vec::with_capacity(6);
        for c in Component::ALL {
            let f = RealField::from_fn(grid, |x, y| forcing.source(c, x, y, t)).map_err(|e| {
                match e {
                    Error::NonFinite { i, j, value, .. } => Error::NonFinite {
                        field: format!("forcing {}", c.name()),
                        i,
                        j,
                        value,
                    },
                    other => other,
                }
            })?;
            fields.push(f);
        }
        let refs: Vec<&RealField> = fields.iter().collect();
        let hats = self.spectral.forward_many_unchecked(&refs);
        Ok(Some(hats.try_into().expect("six components")))
    }

    fn nonlinear(&self, hat: &HatState, t: f64, forcing: &dyn Forcing) -> Result<Nonlinear> {
        let sp = &self.spectral;
        let derivs: Vec<SpectralField> = hat
            .iter()
            .flat_map(|h| [sp.dx_hat(h), sp.dy_hat(h)])
            .collect();
        let mut spectra: Vec<&SpectralField> = hat.iter().collect();
        spectra.extend(derivs.iter());
        let phys = sp.inverse_many(&spectra);
        let [u1, u2, v1, v2, temp, q] = [0, 1, 2, 3, 4, 5].map(|i| phys[i].values());
        let g = |c: Component, d: usize| phys[6 + 2 * c.index() + d].values();
        let n2 = self.grid().len();

        let h = self.variant.heaviside();
        let c = &self.consts;
        let (gu1x, gu1y) = (g(Component::U1, 0), g(Component::U1, 1));
        let (gu2x, gu2y) = (g(Component::U2, 0), g(Component::U2, 1));
        let (gv1x, gv1y) = (g(Component::V1, 0), g(Component::V1, 1));
        let (gv2x, gv2y) = (g(Component::V2, 0), g(Component::V2, 1));
        let (gtx, gty) = (g(Component::Temp, 0), g(Component::Temp, 1));
        let (gqx, gqy) = (g(Component::Q, 0), g(Component::Q, 1));

        let mut nl: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; n2]);
        let mut vv: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n2]);
        for k in 0..n2 {
            let (a1, a2) = (u1[k], u2[k]);
            let (b1, b2) = (v1[k], v2[k]);
            let p = precipitation_at(gv1x[k] + gv2y[k], q[k], temp[k], &h, c);
            nl[0][k] = -(a1 * gu1x[k] + a2 * gu1y[k]);
            nl[1][k] = -(a1 * gu2x[k] + a2 * gu2y[k]);
            nl[2][k] = -(a1 * gv1x[k] + a2 * gv1y[k]) - (b1 * gu1x[k] + b2 * gu1y[k]);
            nl[3][k] = -(a1 * gv2x[k] + a2 * gv2y[k]) - (b1 * gu2x[k] + b2 * gu2y[k]);
            nl[4][k] = -(a1 * gtx[k] + a2 * gty[k]) + p;
            nl[5][k] = -(a1 * gqx[k] + a2 * gqy[k]) - p;
            vv[0][k] = b1 * b1;
            vv[1][k] = b1 * b2;
            vv[2][k] = b2 * b2;
        }

        let grid = *self.grid();
        let names = ["u1", "u2", "v1", "v2", "T", "q", "v1 v1", "v1 v2", "v2 v2"];
        let mut products = Vec::with_capacity(9);
        for (values, name) in nl.into_iter().chain(vv).zip(names) {
            let f = RealField::from_vec_unchecked(grid, values);
            f.check_finite(name)?;
            products.push(f);
        }
        let refs: Vec<&RealField> = products.iter().collect();
        let mut hats = sp.forward_many_unchecked(&refs);
        let w22 = hats.pop().expect("nine products");
        let w12 = hats.pop().expect("nine products");
        let w11 = hats.pop().expect("nine products");
        let mut terms = hats;
        terms[0].add_scaled(-1.0, &sp.div_hat(&w11, &w12));
        terms[1].add_scaled(-1.0, &sp.div_hat(&w12, &w22));

        if let Some(f) = self.forcing_hat(forcing, t)? {
            for (term, fh) in terms.iter_mut().zip(&f) {
                term.add_assign(fh);
            }
        }
        for term in terms.iter_mut() {
            sp.dealias_in_place(term);
        }
        let div_v = sp.div_hat(&hat[2], &hat[3]);
        Ok(Nonlinear {
            terms: terms.try_into().expect("six components"),
            div_v,
        })
    }

    fn add_linear_coupling(&self, nl: &mut Nonlinear, hat: &HatState) {
        let sp = &self.spectral;
        let a = self.consts.buoyancy_coeff();
        nl.terms[2].add_scaled(a, &sp.dx_hat(&hat[4]));
        nl.terms[3].add_scaled(a, &sp.dy_hat(&hat[4]));
        nl.terms[4].add_scaled(self.consts.stratification_coeff(), &nl.div_v);
        nl.terms[5].add_scaled(-self.consts.q_bar, &nl.div_v);
    }

    /// Every term except diffusion, with `u` projected. This is what the
    /// integrating-factor stepper treats explicitly.
    pub(crate) fn explicit_hat(
        &self,
        hat: &HatState,
        t: f64,
        forcing: &dyn Forcing,
    ) -> Result<HatState> {
        let mut nl = self.nonlinear(hat, t, forcing)?;
        self.add_linear_coupling(&mut nl, hat);
        let mut terms = nl.terms;
        self.project_hat(&mut terms);
        Ok(terms)
    }

    /// Full time derivative of every prognostic field.
    pub fn tendencies(&self, s: &State, t: f64, forcing: &dyn Forcing) -> Result<State> {
        let hat = self.to_hat(s)?;
        let mut nl = self.nonlinear(&hat, t, forcing)?;
        self.add_linear_coupling(&mut nl, &hat);
        let mut terms = nl.terms;
        for ((term, h), nu) in terms.iter_mut().zip(&hat).zip(self.diffusivities()) {
            if nu != 0.0 {
                term.add_scaled(nu, &self.spectral.laplacian_hat(h));
            }
        }
        self.project_hat(&mut terms);
        let out = self.from_hat(&terms);
        for c in Component::ALL {
            out.component(c)
                .check_finite(&format!("tendency of {}", c.name()))?;
        }
        Ok(out)
    }

    /// Max-norm mismatch between `dT/dt + dq/dt` and the precipitation-free
    /// combination `-u.grad(T + q) + lap T + (b - Qbar) div v (+ eta lap q)`.
    pub fn source_cancellation_check(&self, s: &State) -> Result<f64> {
        let tend = self.tendencies(s, 0.0, &NoForcing)?;
        let lhs = tend.temp.add(&tend.q)?;

        let sp = &self.spectral;
        let w = s.temp.add(&s.q)?;
        let (wx, wy) = sp.gradient(&w)?;
        let adv = s.u[0]
            .zip_map(&wx, |a, b| a * b)?
            .add(&s.u[1].zip_map(&wy, |a, b| a * b)?)?;
        let adv = sp.dealias_field(&adv)?;
        let div_v = sp.divergence(&s.v[0], &s.v[1])?;
        let coupling = self.consts.stratification_coeff() - self.consts.q_bar;
        let mut rhs = sp
            .laplacian(&s.temp)?
            .sub(&adv)?
            .add(&div_v.scale(coupling))?;
        let eta = self.variant.eta();
        if eta != 0.0 {
            rhs = rhs.add(&sp.laplacian(&s.q)?.scale(eta))?;
        }
        Ok(lhs.sub(&rhs)?.max_abs())
    }

    /// Vertical velocity `w = -(H/pi) div v`.
    pub fn vertical_velocity(&self, v: &[RealField; 2]) -> Result<RealField> {
        let div = self.spectral.divergence(&v[0], &v[1])?;
        Ok(div.scale(-self.consts.h_trop / std::f64::consts::PI))
    }

    /// Baroclinic pressure `p1 = -(H/pi)(g/theta0) T`.
    pub fn baroclinic_pressure(&self, temp: &RealField) -> RealField {
        temp.scale(-self.consts.buoyancy_coeff())
    }

    /// Pointwise precipitation of state `s` under this model's variant.
    pub fn precipitation(&self, s: &State) -> Result<RealField> {
        let div_v = self.spectral.divergence(&s.v[0], &s.v[1])?;
        crate::thermo::precipitation(
            &div_v,
            &s.q,
            &s.temp,
            &self.variant.heaviside(),
            &self.consts,
        )
    }
}
