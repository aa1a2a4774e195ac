use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use scint_core::evolve::WATCHDOG_TOL;
use scint_core::io::{self, Stamp};
use scint_core::oracle::{
    medium_box, run_ensemble, sample_medium_with, Allowance, EnsembleConfig, NORM_TOL,
};
use scint_core::{
    compare_mcf_to_moment, evolve_thermal_with, first_moment_equation, phi1_markovian,
    propagate_classical, thermal_from_modes, EvolutionMode, EvolutionResult, EvolveOptions,
    FieldRealization, KernelPair, ThermalState,
};

use crate::config::Loaded;
use crate::error::CliError;

/// Largest accepted contraction residual.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Largest accepted relative trace drift of an evolution.
pub const TRACE_TOL: f64 = 1e-8;
/// Largest accepted fraction of comparison entries beyond |z| = 3.
pub const BEYOND3_TOL: f64 = 0.05;

pub struct Output {
    dir: PathBuf,
    stamp: Stamp,
}

impl Output {
    pub fn create(dir: PathBuf, stamp: Stamp) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self { dir, stamp })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write<F>(&self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>, &Stamp) -> scint_core::Result<()>,
    {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        let wrap = |e: scint_core::Error| match e {
            scint_core::Error::Io(io) => CliError::io(&path, io),
            other => other.into(),
        };
        body(&mut w, &self.stamp).map_err(wrap)?;
        w.flush().map_err(|e| CliError::io(&path, e))
    }
}

fn z_end(run: &Loaded) -> f64 {
    run.config.z_end()
}

/// Φ₁, Φ₀ slices and the contraction residual at the last output plane.
pub fn kernels(run: &Loaded, out: &Output) -> Result<Vec<String>, CliError> {
    let z0 = run.config.propagation.z0;
    let z = z_end(run);
    let pair = KernelPair::new(&run.grid, &run.model, z, z0)?;
    let residual = scint_core::contraction_residual(&pair.vertex, &pair.drift);

    out.write("phi1.csv", |w, s| {
        io::write_phi1_csv(w, s, &run.grid, &pair.drift)
    })?;
    if run.config.propagation.markovian {
        let m = phi1_markovian(&run.grid, &run.model)?;
        out.write("phi1_markovian.csv", |w, s| {
            io::write_phi1_csv(w, s, &run.grid, &m)
        })?;
    }
    let mut slices = vec![0, run.grid.len() / 2];
    slices.dedup();
    for &i3 in &slices {
        out.write(&format!("phi0_slice_{i3}.csv"), |w, s| {
            io::write_phi0_slice_csv(w, s, &pair.vertex, i3)
        })?;
    }
    let trace = pair.drift.trace();
    out.write("kernels_summary.csv", |w, s| {
        s.write_comment(w)?;
        writeln!(w, "z0,z,residual,tolerance,phi1_trace_re,phi1_trace_im")?;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            io::fmt_f64(z0),
            io::fmt_f64(z),
            io::fmt_f64(residual),
            io::fmt_f64(RESIDUAL_TOL),
            io::fmt_f64(trace.re),
            io::fmt_f64(trace.im)
        )?;
        Ok(())
    })?;

    let line = format!("contraction residual {residual:.3e} (tolerance {RESIDUAL_TOL:e})");
    if !(residual < RESIDUAL_TOL) {
        return Err(CliError::Violation(line));
    }
    Ok(vec![line])
}

/// Thermal state with occupation `peak · exp(-|K|² σ²)` at `z0`.
pub fn initial_thermal(run: &Loaded) -> Result<ThermalState, CliError> {
    let p = &run.config.propagation;
    let occ: Vec<f64> = (0..run.grid.len())
        .map(|i| p.peak_occupation * (-run.grid.k2(i) * p.beam_sigma * p.beam_sigma).exp())
        .collect();
    let mut st = thermal_from_modes(&run.grid, &occ)?;
    st.z = p.z0;
    Ok(st)
}

fn write_evolution(
    run: &Loaded,
    out: &Output,
    tag: &str,
    evo: &EvolutionResult,
) -> Result<(), CliError> {
    out.write(&format!("evolution_{tag}.csv"), |w, s| {
        io::write_evolution_csv(w, s, evo)
    })?;
    for (i, st) in evo.states.iter().enumerate() {
        if run.config.wants("csv") {
            out.write(&format!("states/{tag}_{i:03}.csv"), |w, s| {
                io::write_state_csv(w, s, st)
            })?;
        }
        if run.config.wants("bin") {
            out.write(&format!("states/{tag}_{i:03}.bin"), |w, s| {
                io::write_state_bin(w, s, st)
            })?;
        }
    }
    Ok(())
}

/// Literal evolution, plus the resummed one when the config asks for it.
pub fn evolve(run: &Loaded, out: &Output) -> Result<Vec<String>, CliError> {
    let p = &run.config.propagation;
    let initial = initial_thermal(run)?;
    let mut modes = vec![(EvolutionMode::Literal, "literal")];
    if p.resummed {
        modes.push((EvolutionMode::Resummed, "resummed"));
    }
    let mut lines = Vec::new();
    let mut violations = Vec::new();
    for (mode, tag) in modes {
        let opts = EvolveOptions {
            mode,
            quartic: p.quartic,
            ..EvolveOptions::default()
        };
        let evo = evolve_thermal_with(&initial, &run.grid, &run.model, &p.z_samples, &opts)?;
        write_evolution(run, out, tag, &evo)?;
        let drift = evo.trace_drift.iter().fold(0.0, |m: f64, d| m.max(d.abs()));
        let q = evo.quartic_norm.last().copied().unwrap_or(0.0);
        let mut line = format!("{tag}: max trace drift {drift:.3e}, final quartic norm {q:.6e}");
        if let Some(i) = evo.validity_exit {
            line.push_str(&format!(
                ", positivity watchdog ({WATCHDOG_TOL:e}) tripped at sample {i}"
            ));
        }
        if !(drift < TRACE_TOL) {
            violations.push(format!("{tag} trace drift {drift:e} >= {TRACE_TOL:e}"));
        }
        lines.push(line);
    }
    if !violations.is_empty() {
        return Err(CliError::Violation(violations.join("; ")));
    }
    Ok(lines)
}

/// Monte-Carlo MCF against the moment prediction at the last output plane.
pub fn validate(run: &Loaded, out: &Output) -> Result<Vec<String>, CliError> {
    let mc = run.config.montecarlo.as_ref().ok_or_else(|| {
        CliError::Usage("validate needs a [montecarlo] section in the config".into())
    })?;
    let p = &run.config.propagation;
    let (grid, model) = (&run.grid, &run.model);
    let launch = FieldRealization::gaussian(grid, p.beam_sigma, p.z0)?;
    let initial = ThermalState::from_field(&launch.gc, grid.weight(), p.z0)?;
    let opts = EvolveOptions {
        quartic: false,
        ..EvolveOptions::default()
    };
    let evo = evolve_thermal_with(&initial, grid, model, &p.z_samples, &opts)?;

    let cfg = EnsembleConfig {
        realizations: mc.n_realizations,
        distance: run.config.distance(),
        nz: mc.dims[2],
        dz: mc.spacings[2],
        thin_screen: mc.thin_screen,
        seed: mc.seed,
    };
    let ens = run_ensemble(grid, model, &launch, &cfg)?;
    let initial_mcf = mcf_of(&launch.gc);
    let report = compare_mcf_to_moment(
        &ens.estimate,
        &initial_mcf,
        &evo,
        z_end(run),
        Allowance::default(),
    )?;

    out.write("mcf.csv", |w, s| io::write_mcf_csv(w, s, &ens.estimate))?;
    out.write("comparison.csv", |w, s| {
        io::write_comparison_csv(w, s, &report)
    })?;
    out.write("telemetry.csv", |w, s| {
        s.write_comment(w)?;
        writeln!(w, "realization,norm_drift,leakage,medium_mean")?;
        for i in 0..ens.norm_drift.len() {
            writeln!(
                w,
                "{i},{},{},{}",
                io::fmt_f64(ens.norm_drift[i]),
                io::fmt_f64(ens.leakage[i]),
                io::fmt_f64(ens.medium_means[i])
            )?;
        }
        Ok(())
    })?;
    if run.config.wants("bin") {
        let (n, dx) = medium_box(grid);
        let medium = sample_medium_with(
            model,
            [n, n, mc.dims[2]],
            [dx, dx, mc.spacings[2]],
            mc.seed,
            0,
            mc.thin_screen,
        )?;
        let field = propagate_classical(&launch, &medium, grid, cfg.distance)?;
        out.write("medium_0000.bin", |w, s| {
            io::write_medium_bin(w, s, &medium)
        })?;
        out.write("field_0000.bin", |w, s| {
            io::write_field_bin(w, s, grid, &field, mc.seed)
        })?;
    }

    let max_drift = ens.norm_drift.iter().fold(0.0, |m: f64, d| m.max(*d));
    let max_leak = ens.leakage.iter().fold(0.0, |m: f64, d| m.max(*d));
    let line = format!(
        "{} realizations: {:.2}% within |z| 2, {:.2}% beyond |z| 3, max norm drift {max_drift:.2e}, max leakage {max_leak:.2e}",
        mc.n_realizations,
        100.0 * report.frac_within_2,
        100.0 * report.frac_beyond_3
    );
    if report.frac_beyond_3 > BEYOND3_TOL {
        return Err(CliError::Violation(line));
    }
    if max_drift > NORM_TOL {
        return Err(CliError::Violation(format!(
            "norm drift {max_drift:e} above {NORM_TOL:e}"
        )));
    }
    Ok(vec![line])
}

/// `⟨G*(a) G(b)⟩` of a single deterministic field.
fn mcf_of(gc: &[Complex64]) -> DMatrix<Complex64> {
    let n = gc.len();
    DMatrix::from_fn(n, n, |a, b| gc[a].conj() * gc[b])
}

/// Loss-model diagnostics in both kernel modes; never a pass/fail.
pub fn losscheck(run: &Loaded, out: &Output) -> Result<Vec<String>, CliError> {
    let z0 = run.config.propagation.z0;
    let z = z_end(run);
    let non = first_moment_equation(&run.grid, &run.model, z, z0, false)?;
    let mar = first_moment_equation(&run.grid, &run.model, z, z0, true)?;
    out.write("loss_nonmarkovian.csv", |w, s| {
        io::write_loss_csv(w, s, &run.grid, &non)
    })?;
    out.write("loss_markovian.csv", |w, s| {
        io::write_loss_csv(w, s, &run.grid, &mar)
    })?;
    out.write("loss_summary.csv", |w, s| {
        io::write_loss_summary_csv(w, s, &[&non, &mar])
    })?;
    Ok(vec![
        format!("non-markovian k_variation {:.6e}", non.k_variation),
        format!("markovian k_variation {:.6e}", mar.k_variation),
    ])
}
