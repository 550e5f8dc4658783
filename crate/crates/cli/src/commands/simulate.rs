//! Forward synthesis of cooling curves, detuning sweeps and spectra.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use omckit::parallel::{self, derive_seed, Execution};
use omckit::physics::{bose_einstein, gamma_om, occupancy_from_rates, BathModel, ProbeState};
use omckit::spectra::{sideband_line, simulate_series, voigt_fwhm, NoiseSpec};
use omckit::table::{format_f64, Table};

use super::temperature_tag;
use crate::config::{NoiseConfig, RunConfig, Side, SweepVariable};
use crate::error::{CliError, CliResult};
use crate::report::{cell, BundleWriter, ReportBundle};

pub const SERIES_COLUMNS: [&str; 18] = [
    "t_f",
    "detuning_sign",
    "n_c",
    "detuning",
    "occupancy",
    "occupancy_meas",
    "occupancy_err",
    "linewidth",
    "linewidth_meas",
    "linewidth_err",
    "fwhm",
    "gamma_om",
    "gamma_0",
    "gamma_p",
    "gamma_g",
    "n_p",
    "t_p",
    "detected_area",
];

pub const ASYMMETRY_COLUMNS: [&str; 5] = ["t_f", "n_c", "asymmetry", "asymmetry_meas", "asymmetry_err"];

pub const BATH_COLUMNS: [&str; 5] = ["t_p", "n_p", "gamma_p", "gamma_g", "gamma_i"];

/// Offset separating the spectrum seeds from the tabulated-noise seeds.
const SPECTRUM_STREAM: u64 = 1 << 40;

#[derive(Clone, Copy, Debug)]
struct Point {
    t_f: f64,
    sign: i8,
    probe: ProbeState,
}

/// Model values at one probe setting; `None` where the mode self-oscillates.
#[derive(Clone, Copy, Debug, Default)]
struct Row {
    occupancy: Option<f64>,
    occupancy_meas: Option<f64>,
    occupancy_err: Option<f64>,
    linewidth: Option<f64>,
    linewidth_meas: Option<f64>,
    linewidth_err: Option<f64>,
    fwhm: Option<f64>,
    gamma_om: f64,
    gamma_0: f64,
    gamma_p: f64,
    gamma_g: f64,
    n_p: f64,
    t_p: f64,
    detected_area: Option<f64>,
}

fn sign_of(detuning: f64) -> i8 {
    if detuning > 0.0 {
        1
    } else if detuning < 0.0 {
        -1
    } else {
        0
    }
}

fn points(cfg: &RunConfig) -> Vec<Point> {
    let dev = &cfg.device;
    let values = cfg.sweep.values();
    let mut out = Vec::new();
    match cfg.sweep.variable {
        SweepVariable::NC => {
            for t_f in cfg.fridge_temperatures() {
                for side in &cfg.probe.sides {
                    out.extend(values.iter().map(|&n| Point { t_f, sign: side.sign(), probe: side.probe(dev, n) }));
                }
            }
        }
        SweepVariable::Detuning => {
            for t_f in cfg.fridge_temperatures() {
                out.extend(values.iter().map(|&d| Point {
                    t_f,
                    sign: sign_of(d),
                    probe: ProbeState::new(d, cfg.probe.n_c),
                }));
            }
        }
        SweepVariable::TF => {
            for side in &cfg.probe.sides {
                out.extend(values.iter().map(|&t_f| Point {
                    t_f,
                    sign: side.sign(),
                    probe: side.probe(dev, cfg.probe.n_c),
                }));
            }
        }
        SweepVariable::TP => {}
    }
    out
}

fn with_scatter(rng: &mut ChaCha8Rng, value: Option<f64>, rel: f64) -> (Option<f64>, Option<f64>) {
    let z: f64 = StandardNormal.sample(rng);
    match value {
        Some(v) => (Some(v * (1.0 + rel * z)), Some(rel * v.abs())),
        None => (None, None),
    }
}

fn evaluate(cfg: &RunConfig, p: &Point, index: usize) -> CliResult<Row> {
    let dev = &cfg.device;
    let bath = cfg.bath.with_fridge_temperature(p.t_f);
    let st = bath.state(dev, p.probe.n_c)?;
    let g_om = gamma_om(dev, &p.probe);
    let lw = st.gamma_i() + g_om;
    let occupancy = match occupancy_from_rates(st.gamma_0, st.n_f, st.gamma_p, st.n_p, g_om) {
        Ok(n) => Some(n),
        Err(omckit::Error::Instability { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let stable = occupancy.is_some();
    let linewidth = stable.then_some(lw);
    let detected_area =
        if stable { Some(sideband_line(dev, &p.probe, &bath, &cfg.calibration())?.detected_area) } else { None };
    let noise = cfg.noise.unwrap_or(NoiseConfig { occupancy: 0.0, linewidth: 0.0, ..NoiseConfig::default() });
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(noise.seed, index as u64));
    let (occupancy_meas, occupancy_err) = with_scatter(&mut rng, occupancy, noise.occupancy);
    let (linewidth_meas, linewidth_err) = with_scatter(&mut rng, linewidth, noise.linewidth);
    Ok(Row {
        occupancy,
        occupancy_meas,
        occupancy_err,
        linewidth,
        linewidth_meas,
        linewidth_err,
        fwhm: linewidth.map(|g| voigt_fwhm(g, st.gamma_g)),
        gamma_om: g_om,
        gamma_0: st.gamma_0,
        gamma_p: st.gamma_p,
        gamma_g: st.gamma_g,
        n_p: st.n_p,
        t_p: st.t_p,
        detected_area,
    })
}

fn series_table(pts: &[Point], rows: &[Row]) -> CliResult<Table> {
    let mut t = Table::new(SERIES_COLUMNS);
    for (p, r) in pts.iter().zip(rows) {
        t.push_row([
            format_f64(p.t_f),
            p.sign.to_string(),
            format_f64(p.probe.n_c),
            format_f64(p.probe.detuning),
            cell(r.occupancy),
            cell(r.occupancy_meas),
            cell(r.occupancy_err),
            cell(r.linewidth),
            cell(r.linewidth_meas),
            cell(r.linewidth_err),
            cell(r.fwhm),
            format_f64(r.gamma_om),
            format_f64(r.gamma_0),
            format_f64(r.gamma_p),
            format_f64(r.gamma_g),
            format_f64(r.n_p),
            format_f64(r.t_p),
            cell(r.detected_area),
        ])?;
    }
    Ok(t)
}

/// ξ = (⟨n⟩_b + 1)/⟨n⟩_r − 1 for every red/blue pair at equal (T_f, n_c).
fn asymmetry_table(pts: &[Point], rows: &[Row]) -> CliResult<Table> {
    let mut t = Table::new(ASYMMETRY_COLUMNS);
    for (i, p) in pts.iter().enumerate().filter(|(_, p)| p.sign == 1) {
        let Some(j) = pts.iter().position(|b| b.sign == -1 && b.t_f == p.t_f && b.probe.n_c == p.probe.n_c) else {
            continue;
        };
        let (r, b) = (&rows[i], &rows[j]);
        let xi = |nr: Option<f64>, nb: Option<f64>| match (nr, nb) {
            (Some(nr), Some(nb)) if nr > 0.0 => Some((nb + 1.0) / nr - 1.0),
            _ => None,
        };
        let err = match (r.occupancy_meas, r.occupancy_err, b.occupancy_err) {
            (Some(nr), Some(er), Some(eb)) if nr > 0.0 => {
                let nb = b.occupancy_meas.unwrap_or(0.0);
                Some(((eb / nr).powi(2) + ((nb + 1.0) * er / (nr * nr)).powi(2)).sqrt())
            }
            _ => None,
        };
        let meas = xi(r.occupancy_meas, b.occupancy_meas);
        t.push_row([
            format_f64(p.t_f),
            format_f64(p.probe.n_c),
            cell(xi(r.occupancy, b.occupancy)),
            cell(meas),
            cell(meas.and(err)),
        ])?;
    }
    Ok(t)
}

/// γ_p, γ_G and the equivalent occupancy against the absorption-bath temperature.
fn bath_table(cfg: &RunConfig) -> CliResult<Table> {
    let b: &BathModel = &cfg.bath;
    let mut t = Table::new(BATH_COLUMNS);
    for t_p in cfg.sweep.values() {
        let gamma_p = b.gamma_p_law.eval(t_p)?;
        let gamma_g = b.jitter_law.map_or(0.0, |j| j.eval(t_p));
        let n_p = bose_einstein(cfg.device.omega_m, t_p)?;
        t.push_f64_row(&[t_p, n_p, gamma_p, gamma_g, b.gamma_0 + gamma_p])?;
    }
    Ok(t)
}

/// Synthesizes every stable probe's spectrum, one series per (T_f, side).
fn write_spectra(cfg: &RunConfig, pts: &[Point], rows: &[Row], exec: Execution, w: &mut BundleWriter) -> CliResult<()> {
    let grid = cfg.grid();
    let calib = cfg.calibration();
    let mut index = Table::new(["file", "t_f", "detuning_sign", "n_c", "detuning"]);
    let by_sweep = cfg.sweep.variable == SweepVariable::Detuning;
    let key = |p: &Point| (p.t_f, if by_sweep { 0 } else { p.sign });
    let mut groups: Vec<(f64, i8)> = Vec::new();
    for p in pts {
        if !groups.contains(&key(p)) {
            groups.push(key(p));
        }
    }
    for (g, &(t_f, sign)) in groups.iter().enumerate() {
        let members: Vec<usize> =
            (0..pts.len()).filter(|&i| key(&pts[i]) == (t_f, sign) && rows[i].occupancy.is_some()).collect();
        let probes: Vec<ProbeState> = members.iter().map(|&i| pts[i].probe).collect();
        let bath = cfg.bath.with_fridge_temperature(t_f);
        let noise =
            cfg.noise.map(|n| NoiseSpec { seed: derive_seed(n.seed, SPECTRUM_STREAM + g as u64), n_avg: n.n_avg });
        let spectra = simulate_series(&cfg.device, &probes, &bath, &calib, &grid, noise, exec)?;
        let side = if by_sweep { "detuning".to_string() } else { side_name(sign).to_string() };
        for (k, (s, &i)) in spectra.iter().zip(&members).enumerate() {
            let rel = format!("spectra/{}_{side}_{k:03}.csv", temperature_tag(t_f));
            let path = w.dir().join(&rel);
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            s.write(&path).map_err(CliError::in_file(&path))?;
            let p = &pts[i];
            index.push_row([
                rel,
                format_f64(t_f),
                p.sign.to_string(),
                format_f64(p.probe.n_c),
                format_f64(p.probe.detuning),
            ])?;
        }
    }
    w.table("spectra", &index)
}

fn side_name(sign: i8) -> &'static str {
    match sign {
        1 => Side::Red.name(),
        -1 => Side::Blue.name(),
        _ => Side::Resonant.name(),
    }
}

pub fn run(cfg: &RunConfig, exec: Execution) -> CliResult<ReportBundle> {
    cfg.validate_simulation()?;
    let mut w = BundleWriter::new("simulate", cfg)?;
    if cfg.sweep.variable == SweepVariable::TP {
        w.table("bath", &bath_table(cfg)?)?;
        return w.finish(cfg);
    }
    let pts = points(cfg);
    let rows: Vec<Row> =
        parallel::map_range(exec, pts.len(), |i| evaluate(cfg, &pts[i], i)).into_iter().collect::<CliResult<_>>()?;
    let unstable = rows.iter().filter(|r| r.occupancy.is_none()).count();
    if unstable > 0 {
        w.warn(format!("{unstable} probe settings self-oscillate; their occupancy cells are empty"));
    }
    w.table("series", &series_table(&pts, &rows)?)?;
    let asym = asymmetry_table(&pts, &rows)?;
    if !asym.is_empty() {
        w.table("asymmetry", &asym)?;
    }
    if cfg.outputs.spectra {
        write_spectra(cfg, &pts, &rows, exec, &mut w)?;
    }
    w.finish(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unstable_blue_points_leave_empty_cells() {
        let mut cfg = RunConfig::default();
        cfg.sweep.points = 5;
        let pts = points(&cfg);
        let rows: Vec<Row> = pts.iter().enumerate().map(|(i, p)| evaluate(&cfg, p, i).unwrap()).collect();
        let last_blue = pts.iter().rposition(|p| p.sign == -1).unwrap();
        assert!(rows[last_blue].occupancy.is_none());
        assert!(rows[0].occupancy.is_some());
        let t = series_table(&pts, &rows).unwrap();
        assert_eq!(t.column_opt_f64("occupancy").unwrap()[last_blue], None);
    }
}
