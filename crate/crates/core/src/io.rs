//! CSV and binary export.
//!
//! CSV files start with `#` comment lines naming the tool version and the
//! config hash, then a header row. Floats are written with 17 significant
//! digits so they round-trip exactly. Binary layouts are little-endian:
//! integers as u64, reals as f64, complex values as (re, im) pairs.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolve::EvolutionResult;
use crate::grid::TransverseGrid;
use crate::kernels::{DriftKernel, VertexKernel};
use crate::lossmodel::LossDiagnostics;
use crate::oracle::{ComparisonReport, FieldRealization, MCFEstimate, Medium3D};
use crate::states::ThermalState;

const STATE_MAGIC: &[u8; 8] = b"SCNTSTA1";
const MEDIUM_MAGIC: &[u8; 8] = b"SCNTMED1";
const FIELD_MAGIC: &[u8; 8] = b"SCNTFLD1";

/// Provenance stamped on every output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamp {
    pub tool_version: String,
    pub config_hash: String,
}

impl Stamp {
    pub fn new(tool_version: impl Into<String>, config_hash: impl Into<String>) -> Self {
        Self {
            tool_version: tool_version.into(),
            config_hash: config_hash.into(),
        }
    }

    /// `# scint <version>` and `# config-sha256 <hash>` comment lines.
    pub fn write_comment<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# scint {}", self.tool_version)?;
        writeln!(w, "# config-sha256 {}", self.config_hash)?;
        Ok(())
    }

    /// Fixed-width binary form: version and hash as length-prefixed strings.
    fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        for s in [&self.tool_version, &self.config_hash] {
            put_u64(w, s.len() as u64)?;
            w.write_all(s.as_bytes())?;
        }
        Ok(())
    }

    fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let mut take = || -> Result<String> {
            let n = get_u64(r)? as usize;
            if n > 4096 {
                return Err(Error::InvalidArgument(format!("stamp string of {n} bytes")));
            }
            let mut buf = vec![0u8; n];
            r.read_exact(&mut buf)?;
            String::from_utf8(buf).map_err(|e| Error::InvalidArgument(e.to_string()))
        };
        let tool_version = take()?;
        let config_hash = take()?;
        Ok(Self {
            tool_version,
            config_hash,
        })
    }
}

/// `{:.16e}`: 17 significant digits, '.' decimal point.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn put_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 8]) -> Result<()> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    if &b != magic {
        return Err(Error::InvalidArgument(format!(
            "bad file magic {:?}, expected {:?}",
            String::from_utf8_lossy(&b),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

/// Φ₁ diagonal: `kx,ky,re,im`.
pub fn write_phi1_csv<W: Write>(
    w: &mut W,
    stamp: &Stamp,
    grid: &TransverseGrid,
    kernel: &DriftKernel,
) -> Result<()> {
    check_len(grid, kernel.diag.len())?;
    stamp.write_comment(w)?;
    writeln!(w, "kx,ky,re,im")?;
    for (p, v) in grid.points().iter().zip(&kernel.diag) {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(p[0]),
            fmt_f64(p[1]),
            fmt_f64(v.re),
            fmt_f64(v.im)
        )?;
    }
    Ok(())
}

/// Φ₀ at fixed `K₃`: `k1x,k1y,k2x,k2y,re,im` for every `(K₁, K₂)` whose
/// fourth leg stays on the grid.
pub fn write_phi0_slice_csv<W: Write>(
    w: &mut W,
    stamp: &Stamp,
    vk: &VertexKernel,
    i3: usize,
) -> Result<()> {
    let grid = vk.grid();
    if i3 >= grid.len() {
        return Err(Error::InvalidArgument(format!(
            "slice index {i3} out of range"
        )));
    }
    stamp.write_comment(w)?;
    let k3 = grid.point(i3);
    writeln!(w, "# k3 {},{}", fmt_f64(k3[0]), fmt_f64(k3[1]))?;
    writeln!(w, "k1x,k1y,k2x,k2y,re,im")?;
    for i1 in 0..grid.len() {
        for i2 in 0..grid.len() {
            if vk.fourth_index(i1, i2, i3).is_none() {
                continue;
            }
            let (p1, p2) = (grid.point(i1), grid.point(i2));
            let v = vk.eval(i1, i2, i3);
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_f64(p1[0]),
                fmt_f64(p1[1]),
                fmt_f64(p2[0]),
                fmt_f64(p2[1]),
                fmt_f64(v.re),
                fmt_f64(v.im)
            )?;
        }
    }
    Ok(())
}

fn write_matrix_csv<W: Write>(w: &mut W, m: &DMatrix<Complex64>) -> Result<()> {
    writeln!(w, "row,col,re,im")?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            writeln!(w, "{r},{c},{},{}", fmt_f64(v.re), fmt_f64(v.im))?;
        }
    }
    Ok(())
}

/// Θ⁻¹ entries: `row,col,re,im`.
pub fn write_state_csv<W: Write>(w: &mut W, stamp: &Stamp, state: &ThermalState) -> Result<()> {
    stamp.write_comment(w)?;
    writeln!(w, "# z {}", fmt_f64(state.z))?;
    write_matrix_csv(w, &state.theta_inv)
}

/// Magic, stamp, `n_side`, `z`, `w`, then Θ⁻¹ row-major.
pub fn write_state_bin<W: Write>(w: &mut W, stamp: &Stamp, state: &ThermalState) -> Result<()> {
    let n = state.dim();
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::Dimension(format!("{n} modes is not a square grid")));
    }
    w.write_all(STATE_MAGIC)?;
    stamp.write_binary(w)?;
    put_u64(w, side as u64)?;
    put_f64(w, state.z)?;
    put_f64(w, state.weight)?;
    for r in 0..n {
        for c in 0..n {
            let v = state.theta_inv[(r, c)];
            put_f64(w, v.re)?;
            put_f64(w, v.im)?;
        }
    }
    Ok(())
}

pub fn read_state_bin<R: Read>(r: &mut R) -> Result<(Stamp, ThermalState)> {
    expect_magic(r, STATE_MAGIC)?;
    let stamp = Stamp::read_binary(r)?;
    let side = get_u64(r)? as usize;
    if side == 0 || side > 4096 {
        return Err(Error::InvalidArgument(format!(
            "n_side {side} in state file"
        )));
    }
    let z = get_f64(r)?;
    let weight = get_f64(r)?;
    let n = side * side;
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let re = get_f64(r)?;
        let im = get_f64(r)?;
        data.push(Complex64::new(re, im));
    }
    let theta_inv = DMatrix::from_row_slice(n, n, &data);
    Ok((stamp, ThermalState::new_unchecked(theta_inv, weight, z)?))
}

/// Time series: `z,trace,trace_drift,min_eigenvalue,max_eigenvalue,quartic_norm`.
pub fn write_evolution_csv<W: Write>(
    w: &mut W,
    stamp: &Stamp,
    evo: &EvolutionResult,
) -> Result<()> {
    stamp.write_comment(w)?;
    writeln!(w, "# quartic-seed {}", evo.quartic_seed)?;
    if let Some(i) = evo.validity_exit {
        writeln!(w, "# validity-exit {i}")?;
    }
    writeln!(
        w,
        "z,trace,trace_drift,min_eigenvalue,max_eigenvalue,quartic_norm"
    )?;
    for i in 0..evo.z.len() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_f64(evo.z[i]),
            fmt_f64(evo.states[i].weighted_trace()),
            fmt_f64(evo.trace_drift[i]),
            fmt_f64(evo.min_eigenvalue[i]),
            fmt_f64(evo.max_eigenvalue[i]),
            fmt_f64(evo.quartic_norm[i])
        )?;
    }
    Ok(())
}

/// MCF estimate: `a,b,re,im,stderr`.
pub fn write_mcf_csv<W: Write>(w: &mut W, stamp: &Stamp, est: &MCFEstimate) -> Result<()> {
    stamp.write_comment(w)?;
    writeln!(w, "# z {}", fmt_f64(est.z))?;
    writeln!(w, "# realizations {}", est.n_realizations)?;
    writeln!(w, "a,b,re,im,stderr")?;
    let n = est.mcf.nrows();
    for a in 0..n {
        for b in 0..n {
            let v = est.mcf[(a, b)];
            writeln!(
                w,
                "{a},{b},{},{},{}",
                fmt_f64(v.re),
                fmt_f64(v.im),
                fmt_f64(est.stderr[(a, b)])
            )?;
        }
    }
    Ok(())
}

/// Per-entry comparison: `a,b,z_score,mc_re,mc_im,moment_re,moment_im`.
pub fn write_comparison_csv<W: Write>(
    w: &mut W,
    stamp: &Stamp,
    rep: &ComparisonReport,
) -> Result<()> {
    stamp.write_comment(w)?;
    writeln!(w, "# z {}", fmt_f64(rep.z))?;
    writeln!(
        w,
        "# within2 {} beyond3 {} chi2 {} max_abs_z {}",
        fmt_f64(rep.frac_within_2),
        fmt_f64(rep.frac_beyond_3),
        fmt_f64(rep.chi2_per_entry),
        fmt_f64(rep.max_abs_z)
    )?;
    writeln!(w, "a,b,z_score,mc_re,mc_im,moment_re,moment_im")?;
    let n = rep.z_scores.nrows();
    for a in 0..n {
        for b in 0..n {
            let (m, t) = (rep.mcf_increment[(a, b)], rep.moment_increment[(a, b)]);
            writeln!(
                w,
                "{a},{b},{},{},{},{},{}",
                fmt_f64(rep.z_scores[(a, b)]),
                fmt_f64(m.re),
                fmt_f64(m.im),
                fmt_f64(t.re),
                fmt_f64(t.im)
            )?;
        }
    }
    Ok(())
}

/// Φ₁ diagonal rows `kx,ky,re,im` of a loss-model diagnostic.
pub fn write_loss_csv<W: Write>(
    w: &mut W,
    stamp: &Stamp,
    grid: &TransverseGrid,
    diag: &LossDiagnostics,
) -> Result<()> {
    check_len(grid, diag.phi1_diag.len())?;
    stamp.write_comment(w)?;
    writeln!(w, "kx,ky,re,im")?;
    for (p, v) in grid.points().iter().zip(&diag.phi1_diag) {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(p[0]),
            fmt_f64(p[1]),
            fmt_f64(v.re),
            fmt_f64(v.im)
        )?;
    }
    Ok(())
}

/// One summary row per diagnostic: `mean_re,mean_im,k_variation,markovian`.
pub fn write_loss_summary_csv<W: Write>(
    w: &mut W,
    stamp: &Stamp,
    rows: &[&LossDiagnostics],
) -> Result<()> {
    stamp.write_comment(w)?;
    writeln!(w, "mean_re,mean_im,k_variation,markovian")?;
    for d in rows {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(d.mean_rate.re),
            fmt_f64(d.mean_rate.im),
            fmt_f64(d.k_variation),
            d.markovian
        )?;
    }
    Ok(())
}

/// Magic, stamp, dims (3 × u64), spacings (3 × f64), seed, stream, then the
/// values in the medium's own `(iz, ix, iy)` order.
pub fn write_medium_bin<W: Write>(w: &mut W, stamp: &Stamp, m: &Medium3D) -> Result<()> {
    w.write_all(MEDIUM_MAGIC)?;
    stamp.write_binary(w)?;
    for d in [m.nx, m.ny, m.nz] {
        put_u64(w, d as u64)?;
    }
    for s in [m.dx, m.dy, m.dz] {
        put_f64(w, s)?;
    }
    put_u64(w, m.seed)?;
    put_u64(w, m.stream)?;
    for v in &m.values {
        put_f64(w, *v)?;
    }
    Ok(())
}

pub fn read_medium_bin<R: Read>(r: &mut R) -> Result<(Stamp, Medium3D)> {
    expect_magic(r, MEDIUM_MAGIC)?;
    let stamp = Stamp::read_binary(r)?;
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        *d = get_u64(r)? as usize;
    }
    let total = dims
        .iter()
        .try_fold(1usize, |acc, d| acc.checked_mul(*d))
        .filter(|t| *t > 0 && *t <= 1 << 32)
        .ok_or_else(|| Error::InvalidArgument(format!("medium dims {dims:?}")))?;
    let mut spacings = [0.0; 3];
    for s in spacings.iter_mut() {
        *s = get_f64(r)?;
    }
    let seed = get_u64(r)?;
    let stream = get_u64(r)?;
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        values.push(get_f64(r)?);
    }
    let mut m = Medium3D::from_values(dims, spacings, values)?;
    m.seed = seed;
    m.stream = stream;
    Ok((stamp, m))
}

/// Magic, stamp, `n_side`, `δk`, `z`, seed, then `G_c` as (re, im) pairs.
pub fn write_field_bin<W: Write>(
    w: &mut W,
    stamp: &Stamp,
    grid: &TransverseGrid,
    field: &FieldRealization,
    seed: u64,
) -> Result<()> {
    check_len(grid, field.gc.len())?;
    w.write_all(FIELD_MAGIC)?;
    stamp.write_binary(w)?;
    put_u64(w, grid.n_side() as u64)?;
    put_f64(w, grid.delta_k())?;
    put_f64(w, field.z)?;
    put_u64(w, seed)?;
    for v in &field.gc {
        put_f64(w, v.re)?;
        put_f64(w, v.im)?;
    }
    Ok(())
}

fn check_len(grid: &TransverseGrid, n: usize) -> Result<()> {
    if n != grid.len() {
        return Err(Error::Dimension(format!(
            "{n} values for a grid of {} points",
            grid.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::states::thermal_from_modes;

    fn stamp() -> Stamp {
        Stamp::new("0.0.0", "abc123")
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            assert!(!s.contains(','));
        }
    }

    #[test]
    fn state_binary_round_trip() {
        let g = build_grid(2, 1.0, 1.0).unwrap();
        let mut st = thermal_from_modes(&g, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        st.theta_inv[(0, 1)] = Complex64::new(0.01, 0.02);
        st.theta_inv[(1, 0)] = Complex64::new(0.01, -0.02);
        st.z = 2.5;
        let mut buf = Vec::new();
        write_state_bin(&mut buf, &stamp(), &st).unwrap();
        let (s, back) = read_state_bin(&mut buf.as_slice()).unwrap();
        assert_eq!(s, stamp());
        assert_eq!(back, st);
    }

    #[test]
    fn medium_binary_round_trip() {
        let values: Vec<f64> = (0..80).map(|i| (i as f64).sin()).collect();
        let mut m = Medium3D::from_values([4, 5, 4], [0.1, 0.2, 0.3], values).unwrap();
        m.seed = 77;
        m.stream = 3;
        let mut buf = Vec::new();
        write_medium_bin(&mut buf, &stamp(), &m).unwrap();
        let (_, back) = read_medium_bin(&mut buf.as_slice()).unwrap();
        assert_eq!(back.values, m.values);
        assert_eq!((back.seed, back.stream), (77, 3));
        assert_eq!((back.nx, back.ny, back.nz), (4, 5, 4));
    }

    #[test]
    fn truncated_or_foreign_files_are_rejected() {
        let g = build_grid(2, 1.0, 1.0).unwrap();
        let st = ThermalState::vacuum(&g, 0.0);
        let mut buf = Vec::new();
        write_state_bin(&mut buf, &stamp(), &st).unwrap();
        assert!(read_state_bin(&mut &buf[..buf.len() - 3]).is_err());
        assert!(read_medium_bin(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn csv_carries_stamp_and_header() {
        let g = build_grid(2, 1.0, 1.0).unwrap();
        let k = DriftKernel::zeros(4, 1.0, 0.0, false);
        let mut buf = Vec::new();
        write_phi1_csv(&mut buf, &stamp(), &g, &k).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# scint 0.0.0");
        assert_eq!(lines[1], "# config-sha256 abc123");
        assert_eq!(lines[2], "kx,ky,re,im");
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[3].split(',').count(), 4);
    }
}
