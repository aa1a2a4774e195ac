//! Refractive-index power spectra and the longitudinal correlation
//! `B(q, ζ) = ∫ exp(-i k_z ζ) Φn(q, k_z) dk_z / 2π`.
//!
//! All spectra carry the prefactor `0.033 · Cn²`. Internally everything is
//! evaluated for unit `Cn²` and scaled at the end, which keeps every derived
//! quantity exactly linear in the structure constant.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::{integrate_adaptive, Tolerance};

const KOLMOGOROV_PREFACTOR: f64 = 0.033;
/// `κm = INNER_SCALE_FACTOR / l0`.
pub const INNER_SCALE_FACTOR: f64 = 5.92;
/// k_z truncation of the correlation integral in units of `κm`.
pub const KZ_TRUNCATION: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpectrumVariant {
    Kolmogorov,
    VonKarman,
    Tatarskii,
    /// Von Karman transverse profile held flat in `k_z` up to a cutoff.
    /// Emulates the delta-correlated (Markovian) medium as the cutoff grows.
    FlatKz,
}

impl SpectrumVariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Kolmogorov => "kolmogorov",
            Self::VonKarman => "von_karman",
            Self::Tatarskii => "tatarskii",
            Self::FlatKz => "flat_kz",
        }
    }
}

impl std::str::FromStr for SpectrumVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kolmogorov" => Ok(Self::Kolmogorov),
            "von_karman" => Ok(Self::VonKarman),
            "tatarskii" => Ok(Self::Tatarskii),
            "flat_kz" => Ok(Self::FlatKz),
            other => Err(Error::InvalidModel(format!(
                "unknown spectrum variant `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumModel {
    pub variant: SpectrumVariant,
    /// Structure constant, m^(-2/3).
    pub cn2: f64,
    /// Outer scale L0 in meters (unused for Kolmogorov).
    pub outer_scale: f64,
    /// Inner scale l0 in meters (unused for Kolmogorov).
    pub inner_scale: f64,
    /// k_z cutoff in rad/m for [`SpectrumVariant::FlatKz`].
    pub kz_cut: f64,
}

impl SpectrumModel {
    pub fn kolmogorov(cn2: f64) -> Result<Self> {
        Self {
            variant: SpectrumVariant::Kolmogorov,
            cn2,
            outer_scale: f64::INFINITY,
            inner_scale: 0.0,
            kz_cut: 0.0,
        }
        .validated()
    }

    pub fn von_karman(cn2: f64, outer_scale: f64, inner_scale: f64) -> Result<Self> {
        Self {
            variant: SpectrumVariant::VonKarman,
            cn2,
            outer_scale,
            inner_scale,
            kz_cut: 0.0,
        }
        .validated()
    }

    pub fn tatarskii(cn2: f64, outer_scale: f64, inner_scale: f64) -> Result<Self> {
        Self {
            variant: SpectrumVariant::Tatarskii,
            cn2,
            outer_scale,
            inner_scale,
            kz_cut: 0.0,
        }
        .validated()
    }

    pub fn flat_kz(cn2: f64, outer_scale: f64, inner_scale: f64, kz_cut: f64) -> Result<Self> {
        Self {
            variant: SpectrumVariant::FlatKz,
            cn2,
            outer_scale,
            inner_scale,
            kz_cut,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.cn2 >= 0.0 && self.cn2.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "cn2 must be >= 0, got {}",
                self.cn2
            )));
        }
        if self.variant != SpectrumVariant::Kolmogorov
            && !(self.inner_scale > 0.0 && self.outer_scale > self.inner_scale)
        {
            return Err(Error::InvalidModel(format!(
                "scales must satisfy L0 > l0 > 0, got L0 = {}, l0 = {}",
                self.outer_scale, self.inner_scale
            )));
        }
        if self.variant == SpectrumVariant::FlatKz
            && !(self.kz_cut > 0.0 && self.kz_cut.is_finite())
        {
            return Err(Error::InvalidModel(format!(
                "flat_kz needs a positive k_z cutoff, got {}",
                self.kz_cut
            )));
        }
        Ok(self)
    }

    pub fn with_cn2(mut self, cn2: f64) -> Self {
        self.cn2 = cn2;
        self
    }

    /// `2π / L0` (zero for Kolmogorov and Tatarskii).
    pub fn kappa0(&self) -> f64 {
        match self.variant {
            SpectrumVariant::VonKarman | SpectrumVariant::FlatKz => 2.0 * PI / self.outer_scale,
            _ => 0.0,
        }
    }

    /// `5.92 / l0` (infinite for Kolmogorov).
    pub fn kappa_m(&self) -> f64 {
        match self.variant {
            SpectrumVariant::Kolmogorov => f64::INFINITY,
            _ => INNER_SCALE_FACTOR / self.inner_scale,
        }
    }

    /// Whether the spectrum is finite at the origin.
    pub fn finite_at_origin(&self) -> bool {
        matches!(
            self.variant,
            SpectrumVariant::VonKarman | SpectrumVariant::FlatKz
        )
    }

    /// Shortest longitudinal scale on which `B(q, ζ)` varies.
    pub fn longitudinal_scale(&self) -> f64 {
        match self.variant {
            SpectrumVariant::FlatKz => PI / self.kz_cut,
            SpectrumVariant::Kolmogorov => f64::INFINITY,
            _ => self.inner_scale,
        }
    }

    /// Upper end of the k_z integration domain.
    pub fn kz_max(&self) -> f64 {
        match self.variant {
            SpectrumVariant::FlatKz => self.kz_cut,
            _ => KZ_TRUNCATION * self.kappa_m(),
        }
    }

    /// Spectrum for unit Cn², given `|k_perp|²` and `k_z`.
    pub fn psd_unit(&self, k_perp2: f64, kz: f64) -> f64 {
        match self.variant {
            SpectrumVariant::Kolmogorov => {
                KOLMOGOROV_PREFACTOR * (k_perp2 + kz * kz).powf(-11.0 / 6.0)
            }
            SpectrumVariant::VonKarman | SpectrumVariant::Tatarskii => {
                let k2 = k_perp2 + kz * kz;
                let km = self.kappa_m();
                let k0 = self.kappa0();
                KOLMOGOROV_PREFACTOR * (k2 + k0 * k0).powf(-11.0 / 6.0) * (-k2 / (km * km)).exp()
            }
            SpectrumVariant::FlatKz => {
                if kz.abs() <= self.kz_cut {
                    let km = self.kappa_m();
                    let k0 = self.kappa0();
                    KOLMOGOROV_PREFACTOR
                        * (k_perp2 + k0 * k0).powf(-11.0 / 6.0)
                        * (-k_perp2 / (km * km)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    fn check_origin(&self, k2: f64) -> Result<()> {
        if k2 == 0.0 && !self.finite_at_origin() {
            return Err(Error::Singularity);
        }
        Ok(())
    }
}

/// Three-dimensional spectrum `Φn(k)` in m³.
pub fn psd_3d(model: &SpectrumModel, kvec: [f64; 3]) -> Result<f64> {
    let kp2 = kvec[0] * kvec[0] + kvec[1] * kvec[1];
    model.check_origin(kp2 + kvec[2] * kvec[2])?;
    if model.cn2 == 0.0 {
        return Ok(0.0);
    }
    Ok(model.cn2 * model.psd_unit(kp2, kvec[2]))
}

/// Markovian value `Φn(q, 0)`.
pub fn markovian_psd(model: &SpectrumModel, q: [f64; 2]) -> Result<f64> {
    psd_3d(model, [q[0], q[1], 0.0])
}

/// `B(q, ζ)` in m² for the model's Cn².
pub fn longitudinal_correlation(model: &SpectrumModel, q: [f64; 2], zeta: f64) -> Result<f64> {
    let q2 = q[0] * q[0] + q[1] * q[1];
    Ok(model.cn2 * longitudinal_correlation_unit(model, q2, zeta)?)
}

/// `B(q, ζ)` for unit Cn², keyed by `|q|²`. Even in ζ by construction.
pub fn longitudinal_correlation_unit(model: &SpectrumModel, q2: f64, zeta: f64) -> Result<f64> {
    if model.variant == SpectrumVariant::Kolmogorov {
        return Err(Error::InvalidModel(
            "the Kolmogorov spectrum has no inner scale; the k_z integral needs von_karman, tatarskii or flat_kz"
                .into(),
        ));
    }
    model.check_origin(q2)?;
    let zeta = zeta.abs();
    if model.variant == SpectrumVariant::FlatKz {
        // separable: Φn(q,0) ∫_{-c}^{c} cos(k_z ζ) dk_z/2π
        let c = model.kz_cut;
        let shape = if zeta * c < 1e-8 {
            c / PI
        } else {
            (c * zeta).sin() / (PI * zeta)
        };
        return Ok(model.psd_unit(q2, 0.0) * shape);
    }
    correlation_by_quadrature(model, q2, zeta)
}

fn correlation_by_quadrature(model: &SpectrumModel, q2: f64, zeta: f64) -> Result<f64> {
    let kmax = model.kz_max();
    let scale = (q2 + model.kappa0().powi(2)).sqrt().min(model.kappa_m());
    let breakpoints = breakpoints(scale, kmax);
    let peak = model.psd_unit(q2, 0.0);
    let tol = Tolerance {
        abs: 1e-15 * peak * scale,
        rel: 1e-12,
        max_segments: 50_000,
    };
    let (value, _) = integrate_adaptive(
        |kz| model.psd_unit(q2, kz) * (kz * zeta).cos(),
        &breakpoints,
        tol,
    )?;
    // ∫_{-∞}^{∞} dk_z/2π over an even integrand
    Ok(value / PI)
}

/// Geometric breakpoints `0, s/8, s/4, ... , kmax` resolving the spectral peak.
fn breakpoints(scale: f64, kmax: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    let mut x = scale / 8.0;
    while x < kmax {
        pts.push(x);
        x *= 2.0;
    }
    pts.push(kmax);
    pts
}
