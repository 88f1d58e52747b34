//! Seeded band-limited initial data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Component, State};
use crate::spectral::{Grid, RealField, Spectral, SpectralField};
use crate::thermo::PhysConsts;
use num_complex::Complex64;

/// Where the initial humidity sits relative to saturation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// `q < q_s` everywhere.
    Subsaturated,
    /// `q > q_s` everywhere.
    Supersaturated,
    /// `q` oscillates about `q_s`.
    Mixed,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Subsaturated => "subsaturated",
            Regime::Supersaturated => "supersaturated",
            Regime::Mixed => "mixed",
        }
    }

    pub fn parse(s: &str) -> Option<Regime> {
        [Regime::Subsaturated, Regime::Supersaturated, Regime::Mixed]
            .into_iter()
            .find(|r| r.name() == s)
    }

    /// Whether every entry of `q` lies in this regime (`Mixed` always holds).
    pub fn holds(self, q: &RealField, q_s: f64) -> bool {
        match self {
            Regime::Subsaturated => q.values().iter().all(|&v| v < q_s),
            Regime::Supersaturated => q.values().iter().all(|&v| v > q_s),
            Regime::Mixed => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitSpec {
    pub seed: u64,
    pub regime: Regime,
    /// Gap between `q` and `q_s`, as a fraction of `q_s`. Unused for `Mixed`.
    pub margin: f64,
    /// Largest wavenumber index in either direction.
    pub kmax: usize,
    /// RMS amplitudes of `u` (before projection), `v` and `T`.
    pub amp_u: f64,
    pub amp_v: f64,
    pub amp_t: f64,
    /// Peak deviation of `q` from its mean, as a fraction of `q_s`.
    pub amp_q: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            regime: Regime::Subsaturated,
            margin: 0.2,
            kmax: 4,
            amp_u: 1.0,
            amp_v: 1.0,
            amp_t: 1.0,
            amp_q: 0.2,
        }
    }
}

impl InitSpec {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.kmax == 0 || 3 * self.kmax > grid.n() {
            return Err(Error::param(
                "kmax",
                format!("must lie in [1, n/3] = [1, {}], got {}", grid.n() / 3, self.kmax),
            ));
        }
        for (name, v) in [
            ("amp_u", self.amp_u),
            ("amp_v", self.amp_v),
            ("amp_t", self.amp_t),
            ("amp_q", self.amp_q),
            ("margin", self.margin),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be non-negative, got {v}")));
            }
        }
        if self.regime == Regime::Subsaturated && self.margin + 2.0 * self.amp_q > 1.0 {
            return Err(Error::param(
                "amp_q",
                "margin + 2 amp_q must not exceed 1 or q turns negative",
            ));
        }
        Ok(())
    }
}

/// Zero-mean real field with random Fourier coefficients on `|m_x|, |m_y| <= kmax`,
/// weighted by `1 / (1 + |m|^2)` and scaled to RMS `rms`. The coefficients depend
/// on `(seed, stream)` only, not on the grid.
pub fn random_field(
    spectral: &Spectral,
    kmax: usize,
    seed: u64,
    stream: u64,
    rms: f64,
) -> RealField {
    let grid = *spectral.grid();
    let n = grid.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    let k = kmax as i64;
    let wrap = |m: i64| m.rem_euclid(n as i64) as usize;
    for mx in 0..=k {
        for my in -k..=k {
            if mx == 0 && my <= 0 {
                continue;
            }
            let w = 1.0 / (1.0 + (mx * mx + my * my) as f64);
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * w;
            coeffs[wrap(my) * n + wrap(mx)] = c;
            coeffs[wrap(-my) * n + wrap(-mx)] = c.conj();
        }
    }
    let f = spectral.inverse(&SpectralField::from_coeffs(grid, coeffs));
    let norm = f.l2_norm() / grid.length();
    if rms == 0.0 || norm == 0.0 {
        return RealField::zeros(grid);
    }
    f.scale(rms / norm)
}

/// Random state per `spec`: `u` Leray-projected, `q` placed in the requested regime.
pub fn generate(grid: Grid, consts: &PhysConsts, spec: &InitSpec) -> Result<State> {
    spec.validate(&grid)?;
    let sp = Spectral::new(grid);
    let field = |c: Component, rms: f64| random_field(&sp, spec.kmax, spec.seed, c.index() as u64, rms);
    let (u1, u2) = sp.leray_project(&field(Component::U1, spec.amp_u), &field(Component::U2, spec.amp_u))?;
    let v1 = field(Component::V1, spec.amp_v);
    let v2 = field(Component::V2, spec.amp_v);
    let temp = field(Component::Temp, spec.amp_t);

    let shape = field(Component::Q, 1.0);
    let peak = shape.max_abs();
    let q_s = consts.q_s;
    let center = match spec.regime {
        Regime::Subsaturated => q_s * (1.0 - spec.margin - spec.amp_q),
        Regime::Supersaturated => q_s * (1.0 + spec.margin + spec.amp_q),
        Regime::Mixed => q_s,
    };
    let dev = spec.amp_q * q_s;
    let q = shape.map(|v| center + dev * v / peak);
    State::from_components([u1, u2, v1, v2, temp, q])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regimes_are_respected() {
        let g = Grid::periodic(32).unwrap();
        let c = PhysConsts::unit();
        for regime in [Regime::Subsaturated, Regime::Supersaturated] {
            let spec = InitSpec {
                regime,
                margin: 0.1,
                ..InitSpec::default()
            };
            let s = generate(g, &c, &spec).unwrap();
            assert!(regime.holds(&s.q, c.q_s));
            let gap = s.q.values().iter().map(|v| (v - c.q_s).abs()).fold(f64::MAX, f64::min);
            assert!(gap >= 0.1 * c.q_s * (1.0 - 1e-12));
        }
        let spec = InitSpec {
            regime: Regime::Mixed,
            ..InitSpec::default()
        };
        let s = generate(g, &c, &spec).unwrap();
        assert!(s.q.max() > c.q_s && s.q.min() < c.q_s);
    }

    #[test]
    fn same_seed_same_state_different_seed_different_state() {
        let g = Grid::periodic(16).unwrap();
        let c = PhysConsts::unit();
        let a = generate(g, &c, &InitSpec::default()).unwrap();
        let b = generate(g, &c, &InitSpec::default()).unwrap();
        assert_eq!(a, b);
        let d = generate(g, &c, &InitSpec { seed: 1, ..InitSpec::default() }).unwrap();
        assert!(a.l2_distance(&d).unwrap() > 0.1);
    }

    #[test]
    fn amplitude_and_band_limit() {
        let g = Grid::periodic(32).unwrap();
        let sp = Spectral::new(g);
        let f = random_field(&sp, 3, 7, 2, 0.5);
        assert!((f.l2_norm() / g.length() - 0.5).abs() < 1e-12);
        let hat = sp.forward(&f).unwrap();
        for iy in 0..32 {
            for ix in 0..32 {
                if g.mode(ix).abs() > 3 || g.mode(iy).abs() > 3 {
                    assert!(hat.get(ix, iy).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn velocity_is_divergence_free() {
        let g = Grid::periodic(32).unwrap();
        let s = generate(g, &PhysConsts::unit(), &InitSpec::default()).unwrap();
        let div = Spectral::new(g).divergence(&s.u[0], &s.u[1]).unwrap();
        assert!(div.max_abs() < 1e-12);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let g = Grid::periodic(16).unwrap();
        let c = PhysConsts::unit();
        assert!(generate(g, &c, &InitSpec { kmax: 6, ..InitSpec::default() }).is_err());
        assert!(generate(g, &c, &InitSpec { amp_t: -1.0, ..InitSpec::default() }).is_err());
        assert!(generate(g, &c, &InitSpec { amp_q: 0.6, ..InitSpec::default() }).is_err());
    }
}
