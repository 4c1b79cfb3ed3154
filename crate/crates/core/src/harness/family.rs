//! Deterministic instance generators.
//!
//! Every family starts from the polar midpoint quadrature of `B_4` at a given
//! ring count, extended by further rings of the same width out to radius
//! about 4.6. Restricted to `B_4` this is exactly the quadrature behind the
//! data term at the same ring count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::measure::{lebesgue_quadrature, Ball, DiscreteMeasure};

/// Radius of the extended quadrature.
pub const OUTER_RADIUS: f64 = 4.6;

fn default_rings() -> usize {
    19
}

fn default_wave() -> Point {
    [1.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceFamily {
    /// `lambda` is the quadrature and `mu` the same atoms with density
    /// `1 + a sin(k.x)`, rescaled to equal mass.
    SmoothSine {
        amplitude: f64,
        #[serde(default = "default_wave")]
        wave: Point,
        #[serde(default = "default_rings")]
        rings: usize,
    },
    /// `lambda` is the quadrature, `mu` the same atoms each moved by an
    /// independent uniform offset of size up to `jitter` times the local ring width.
    AtomicCloud {
        jitter: f64,
        #[serde(default = "default_rings")]
        rings: usize,
    },
    /// Both measures are the quadrature with independent random weight
    /// perturbations of relative size `amplitude` on the annulus `2 <= |x| <= 3.5`.
    AnnulusNoise {
        amplitude: f64,
        #[serde(default = "default_rings")]
        rings: usize,
    },
    Identity {
        #[serde(default = "default_rings")]
        rings: usize,
    },
}

impl InstanceFamily {
    pub fn rings(&self) -> usize {
        match *self {
            Self::SmoothSine { rings, .. } | Self::AtomicCloud { rings, .. } | Self::AnnulusNoise { rings, .. } | Self::Identity { rings } => rings,
        }
    }

    /// The same family with its scale parameter replaced.
    pub fn with_scale(&self, s: f64) -> Self {
        match self.clone() {
            Self::SmoothSine { wave, rings, .. } => Self::SmoothSine { amplitude: s, wave, rings },
            Self::AtomicCloud { rings, .. } => Self::AtomicCloud { jitter: s, rings },
            Self::AnnulusNoise { rings, .. } => Self::AnnulusNoise { amplitude: s, rings },
            f @ Self::Identity { .. } => f,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SmoothSine { .. } => "smooth_sine",
            Self::AtomicCloud { .. } => "atomic_cloud",
            Self::AnnulusNoise { .. } => "annulus_noise",
            Self::Identity { .. } => "identity",
        }
    }

    fn validate(&self) -> Result<()> {
        let scale_ok = match *self {
            Self::SmoothSine { amplitude, wave, .. } => amplitude.is_finite() && amplitude >= 0.0 && geom::norm(wave) > 0.0 && geom::is_finite(wave),
            Self::AtomicCloud { jitter, .. } => (0.0..=0.5).contains(&jitter),
            Self::AnnulusNoise { amplitude, .. } => (0.0..1.0).contains(&amplitude),
            Self::Identity { .. } => true,
        };
        if !scale_ok || self.rings() < 2 {
            return Err(Error::invalid(format!("invalid instance family {self:?}")));
        }
        Ok(())
    }
}

/// Quadrature of `B_4` with `rings` rings, extended to about [`OUTER_RADIUS`].
pub fn base_quadrature(dim: usize, rings: usize) -> Result<DiscreteMeasure> {
    let (cells, width) = match dim {
        1 => (rings, 8.0 / rings as f64),
        2 => (rings, 4.0 / rings as f64),
        _ => return Err(Error::invalid(format!("dimension {dim} not in {{1, 2}}"))),
    };
    let extra = ((OUTER_RADIUS - 4.0) / width).round() as usize;
    if dim == 1 {
        let total = cells + 2 * extra;
        lebesgue_quadrature(&Ball::centered(4.0 + extra as f64 * width), 1, total)
    } else {
        let total = cells + extra;
        lebesgue_quadrature(&Ball::centered(total as f64 * width), 2, total)
    }
}

/// Scales `mu` to the total mass of `lambda`, up to summation rounding.
fn equalize(lambda: &DiscreteMeasure, mu: &mut DiscreteMeasure) {
    let s = lambda.total_mass() / mu.total_mass();
    for w in &mut mu.weights {
        *w *= s;
    }
    let defect = lambda.total_mass() - mu.total_mass();
    if let Some(k) = (0..mu.len()).max_by(|&a, &b| mu.weights[a].total_cmp(&mu.weights[b])) {
        mu.weights[k] += defect;
    }
}

/// `(lambda, mu)` for `family` in dimension `dim`; deterministic in `seed`.
pub fn generate(family: &InstanceFamily, dim: usize, seed: u64) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    family.validate()?;
    let lambda = base_quadrature(dim, family.rings())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu = lambda.clone();
    match *family {
        InstanceFamily::SmoothSine { amplitude, wave, .. } => {
            if amplitude >= 1.0 {
                return Err(Error::invalid(format!("smooth-sine amplitude {amplitude} must be below 1")));
            }
            for (x, w) in mu.points.iter().zip(mu.weights.iter_mut()) {
                *w *= 1.0 + amplitude * geom::dot(wave, *x).sin();
            }
        }
        InstanceFamily::AtomicCloud { jitter, rings } => {
            let width = if dim == 1 { 8.0 / rings as f64 } else { 4.0 / rings as f64 };
            for x in &mut mu.points {
                let d0 = rng.random_range(-1.0..=1.0);
                let d1 = if dim == 1 { 0.0 } else { rng.random_range(-1.0..=1.0) };
                *x = geom::add(*x, geom::scale(jitter * width, [d0, d1]));
            }
        }
        InstanceFamily::AnnulusNoise { amplitude, .. } => {
            let mut l = lambda.clone();
            for m in [&mut l, &mut mu] {
                for (x, w) in m.points.iter().zip(m.weights.iter_mut()) {
                    let r = geom::norm(*x);
                    if (2.0..=3.5).contains(&r) {
                        *w *= 1.0 + amplitude * rng.random_range(-1.0..=1.0);
                    }
                }
            }
            equalize(&lambda, &mut l);
            equalize(&l, &mut mu);
            return Ok((l, mu));
        }
        InstanceFamily::Identity { .. } => {}
    }
    equalize(&lambda, &mut mu);
    Ok((lambda, mu))
}
