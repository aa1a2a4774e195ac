use std::path::{Path, PathBuf};

use scint_core::oracle::medium_box;
use scint_core::{build_grid, SpectrumModel, SpectrumVariant, TransverseGrid};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_side: usize,
    pub k_extent: f64,
    pub k0: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub variant: String,
    pub cn2: f64,
    #[serde(default = "infinite", alias = "L0")]
    pub outer_scale: f64,
    #[serde(default, alias = "l0")]
    pub inner_scale: f64,
    /// Only read by `flat_kz`.
    pub kz_cut: Option<f64>,
}

fn infinite() -> f64 {
    f64::INFINITY
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationSection {
    pub z0: f64,
    /// Output planes; the first must be `z0`.
    pub z_samples: Vec<f64>,
    #[serde(default)]
    pub markovian: bool,
    #[serde(default)]
    pub resummed: bool,
    /// Gaussian width in K of the launched beam and of the thermal occupation profile.
    #[serde(default = "one")]
    pub beam_sigma: f64,
    /// Occupation at K = 0 of the thermal state fed to `evolve`.
    #[serde(default = "one")]
    pub peak_occupation: f64,
    #[serde(default = "yes")]
    pub quartic: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    pub n_realizations: usize,
    pub seed: u64,
    /// `[nx, ny, nz]`; a transverse entry of 0 takes the size the grid needs.
    pub dims: [usize; 3],
    /// `[dx, dy, dz]`; a transverse entry of 0 takes the spacing the grid needs.
    pub spacings: [f64; 3],
    #[serde(default)]
    pub thin_screen: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<String> {
    vec!["csv".into()]
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_dir(),
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub spectrum: SpectrumSection,
    pub propagation: PropagationSection,
    pub montecarlo: Option<MonteCarloSection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// A config that passed every precondition check, plus what was built from it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub grid: TransverseGrid,
    pub model: SpectrumModel,
    /// Hex SHA-256 of the config bytes and any seed override.
    pub hash: String,
    /// Base for a relative output directory.
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<(TransverseGrid, SpectrumModel), CliError> {
        let grid = build_grid(self.grid.n_side, self.grid.k_extent, self.grid.k0)?;
        let model = self.model()?;

        let p = &self.propagation;
        let zs = &p.z_samples;
        if !p.z0.is_finite() {
            return usage(format!("z0 must be finite, got {}", p.z0));
        }
        if zs.len() < 2 {
            return usage("z_samples needs at least two planes".into());
        }
        if zs[0] != p.z0 {
            return usage(format!(
                "z_samples must start at z0 = {}, got {}",
                p.z0, zs[0]
            ));
        }
        if zs.windows(2).any(|w| !(w[1] > w[0])) || !zs.iter().all(|z| z.is_finite()) {
            return usage("z_samples must be finite and strictly increasing".into());
        }
        if !(p.beam_sigma > 0.0 && p.beam_sigma.is_finite()) {
            return usage(format!("beam_sigma must be positive, got {}", p.beam_sigma));
        }
        if !(p.peak_occupation >= 0.0 && p.peak_occupation.is_finite()) {
            return usage(format!(
                "peak_occupation must be >= 0, got {}",
                p.peak_occupation
            ));
        }

        if let Some(mc) = &self.montecarlo {
            self.check_montecarlo(mc, &grid)?;
        }
        if self.output.formats.is_empty() {
            return usage("output.formats is empty".into());
        }
        if let Some(f) = self
            .output
            .formats
            .iter()
            .find(|f| f.as_str() != "csv" && f.as_str() != "bin")
        {
            return usage(format!("unknown output format `{f}`; use csv or bin"));
        }
        Ok((grid, model))
    }

    fn model(&self) -> Result<SpectrumModel, CliError> {
        let s = &self.spectrum;
        let variant: SpectrumVariant = s.variant.parse()?;
        if variant != SpectrumVariant::FlatKz && s.kz_cut.is_some() {
            return usage(format!("kz_cut is only used by flat_kz, not {}", s.variant));
        }
        let model = match variant {
            SpectrumVariant::Kolmogorov => SpectrumModel::kolmogorov(s.cn2),
            SpectrumVariant::VonKarman => {
                SpectrumModel::von_karman(s.cn2, s.outer_scale, s.inner_scale)
            }
            SpectrumVariant::Tatarskii => {
                SpectrumModel::tatarskii(s.cn2, s.outer_scale, s.inner_scale)
            }
            SpectrumVariant::FlatKz => {
                let cut = s
                    .kz_cut
                    .ok_or_else(|| CliError::Usage("flat_kz needs kz_cut".into()))?;
                SpectrumModel::flat_kz(s.cn2, s.outer_scale, s.inner_scale, cut)
            }
        }?;
        Ok(model)
    }

    fn check_montecarlo(
        &self,
        mc: &MonteCarloSection,
        grid: &TransverseGrid,
    ) -> Result<(), CliError> {
        if mc.n_realizations < 2 {
            return usage(format!(
                "n_realizations must be >= 2, got {}",
                mc.n_realizations
            ));
        }
        let (n, dx) = medium_box(grid);
        for (axis, (&d, &s)) in ["x", "y"].iter().zip(mc.dims.iter().zip(&mc.spacings)) {
            if d != 0 && d != n {
                return usage(format!(
                    "montecarlo dims {axis} must be {n} (or 0) for this grid, got {d}"
                ));
            }
            if s != 0.0 && (s - dx).abs() > 1e-12 * dx {
                return usage(format!(
                    "montecarlo spacing {axis} must be {dx} (or 0) for this grid, got {s}"
                ));
            }
        }
        let (nz, dz) = (mc.dims[2], mc.spacings[2]);
        if nz == 0 || !(dz > 0.0 && dz.is_finite()) {
            return usage(format!(
                "montecarlo needs nz >= 1 and dz > 0, got {nz}, {dz}"
            ));
        }
        let distance = self.distance();
        let steps = (distance / dz).round();
        if (steps * dz - distance).abs() > 1e-9 * distance.max(dz) {
            return usage(format!(
                "propagation distance {distance} is not a multiple of dz = {dz}"
            ));
        }
        if steps as usize > nz {
            return usage(format!(
                "propagation distance needs {steps} slabs, dims give nz = {nz}"
            ));
        }
        if self.spectrum.variant == "kolmogorov" {
            return usage("the medium sampler needs a spectrum finite at k = 0".into());
        }
        Ok(())
    }

    /// Last output plane minus `z0`.
    pub fn distance(&self) -> f64 {
        let p = &self.propagation;
        p.z_samples.last().copied().unwrap_or(p.z0) - p.z0
    }

    pub fn z_end(&self) -> f64 {
        self.propagation.z0 + self.distance()
    }

    pub fn wants(&self, format: &str) -> bool {
        self.output.formats.iter().any(|f| f == format)
    }
}

fn usage<T>(msg: String) -> Result<T, CliError> {
    Err(CliError::Usage(msg))
}

pub fn config_hash(bytes: &[u8], seed_override: Option<u64>) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    if let Some(s) = seed_override {
        h.update(format!("\nseed-override {s}\n").as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads, parses and validates; `seed` replaces `montecarlo.seed`.
pub fn load(path: &Path, seed: Option<u64>) -> Result<Loaded, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| CliError::Usage(format!("{} is not UTF-8", path.display())))?;
    let mut config = RunConfig::parse(text)?;
    if let (Some(s), Some(mc)) = (seed, config.montecarlo.as_mut()) {
        mc.seed = s;
    }
    let (grid, model) = config.validate()?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Loaded {
        config,
        grid,
        model,
        hash: config_hash(&bytes, seed),
        base_dir,
    })
}
