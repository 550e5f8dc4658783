//! Fits to spectra or to tabulated series, with residual and overlay tables.

use std::path::PathBuf;

use serde::Serialize;

use omckit::fitting::{
    backaction_ratio, fit_area_vs_detuning, fit_bath_model, fit_g0_from_linewidths, fit_lorentzian_batch,
    fit_power_law, fit_voigt_batch, fit_voigt_detuning_series, BathFit, CoolingCurvePoint, FitResult, LineshapeFit,
    VoigtConstraint,
};
use omckit::parallel::Execution;
use omckit::physics::{inverse_bose_einstein, ProbeState};
use omckit::spectra::{calibrate_occupancy, voigt_fwhm, voigt_psd, Spectrum, SpectrumUnit};
use omckit::table::{format_f64, Table};

use super::{close, distinct};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::report::{cell, BundleWriter, LoadedBundle, ReportBundle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum FitMode {
    Lorentzian,
    Voigt,
    Detuning,
    PowerLaw,
    BathModel,
    G0,
}

pub const SUMMARY_COLUMNS: [&str; 17] = [
    "file",
    "detuning",
    "n_c",
    "t_f",
    "center",
    "center_err",
    "gamma_l",
    "gamma_l_err",
    "gamma_g",
    "gamma_g_err",
    "area",
    "area_err",
    "floor",
    "fwhm",
    "occupancy",
    "occupancy_err",
    "converged",
];

/// Errors that describe the data rather than the invocation are reported
/// as failed fits; the rest abort the command.
fn data_problem(e: omckit::Error) -> CliResult<String> {
    match e {
        omckit::Error::Validation { .. } | omckit::Error::Parse { .. } | omckit::Error::Io(_) => Err(e.into()),
        other => Ok(other.to_string()),
    }
}

fn failed_fit(msg: String) -> FitResult {
    FitResult { converged: false, warnings: vec![msg], ..FitResult::default() }
}

/// Replaces every bundle directory in `inputs` by the files of its `table`.
fn expand(inputs: &[PathBuf], table: &str) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if !p.is_dir() {
            out.push(p.clone());
            continue;
        }
        let b = LoadedBundle::load(p)?;
        let Some(t) = b.table(table) else {
            return Err(CliError::validation(format!("{}: bundle has no `{table}` table", p.display())));
        };
        if table == "spectra" {
            for f in t?.column_str("file")? {
                out.push(p.join(f));
            }
        } else {
            out.push(b.table_path(table).expect("listed table"));
        }
    }
    if out.is_empty() {
        return Err(CliError::validation("no input files"));
    }
    Ok(out)
}

fn read_spectra(paths: &[PathBuf]) -> CliResult<Vec<Spectrum>> {
    paths.iter().map(|p| Spectrum::read(p).map_err(CliError::in_file(p))).collect()
}

fn read_series(paths: &[PathBuf]) -> CliResult<Vec<(PathBuf, Table)>> {
    paths.iter().map(|p| Ok((p.clone(), Table::read(p).map_err(CliError::in_file(p))?))).collect()
}

/// Unique table-safe names from file stems.
fn names(paths: &[PathBuf]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for p in paths {
        let stem = p.file_stem().map_or("input".into(), |s| {
            s.to_string_lossy().replace(|c: char| !c.is_ascii_alphanumeric() && c != '-', "_")
        });
        let mut name = stem.clone();
        let mut k = 1;
        while out.contains(&name) {
            k += 1;
            name = format!("{stem}_{k}");
        }
        out.push(name);
    }
    out
}

fn dense(lo: f64, hi: f64, n: usize, log: bool) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            if log {
                lo * (hi / lo).powf(t)
            } else {
                lo + t * (hi - lo)
            }
        })
        .collect()
}

fn sigma(r: &FitResult, name: &str) -> Option<f64> {
    r.uncertainties.get(name).copied()
}

fn lineshape_tables(s: &Spectrum, f: &LineshapeFit, overlay_points: usize) -> CliResult<(Table, Table)> {
    let mut res = Table::new(["frequency_hz", "psd", "model", "residual"]);
    for (i, &y) in s.values().iter().enumerate() {
        let x = s.frequency(i);
        let m = voigt_psd(&f.params, x);
        res.push_f64_row(&[x, y, m, y - m])?;
    }
    let n = overlay_points.max(2 * s.len());
    let xs = dense(s.frequency(0), s.frequency(s.len() - 1), n, false);
    let ms: Vec<f64> = xs.iter().map(|&x| voigt_psd(&f.params, x)).collect();
    Ok((res, Table::from_columns(&[("frequency_hz", &xs), ("model", &ms)])?))
}

fn calibrated_occupancy(cfg: &RunConfig, s: &Spectrum, f: &LineshapeFit) -> Option<(f64, f64)> {
    let m = s.metadata();
    if s.unit() != SpectrumUnit::ShotNoise {
        return None;
    }
    let probe = ProbeState::new(m.detuning_hz?, m.n_c?);
    let calib = cfg.calibration();
    let n = calibrate_occupancy(f.params.area, &calib, &cfg.device, &probe).ok()?;
    let per_area =
        calibrate_occupancy(1.0, &calib, &cfg.device, &ProbeState::new(probe.detuning.abs(), probe.n_c)).ok()?;
    Some((n, per_area * sigma(&f.result, "area").unwrap_or(0.0)))
}

fn lineshapes(
    cfg: &RunConfig,
    mode: FitMode,
    inputs: &[PathBuf],
    exec: Execution,
    w: &mut BundleWriter,
) -> CliResult<()> {
    let paths = expand(inputs, "spectra")?;
    let spectra = read_spectra(&paths)?;
    let fits = match mode {
        FitMode::Lorentzian => fit_lorentzian_batch(&spectra, exec),
        _ => fit_voigt_batch(&spectra, cfg.fit.voigt, exec),
    };
    let mut summary = Table::new(SUMMARY_COLUMNS);
    for ((name, s), fit) in names(&paths).iter().zip(&spectra).zip(fits) {
        let m = s.metadata();
        let meta = [cell(m.detuning_hz), cell(m.n_c), cell(m.t_f_k)];
        match fit {
            Ok(f) => {
                if !f.result.converged {
                    w.warn(format!("{name}: fit did not converge"));
                }
                let (res, overlay) = lineshape_tables(s, &f, cfg.fit.overlay_points)?;
                w.table(&format!("{name}_residuals"), &res)?;
                w.table(&format!("{name}_overlay"), &overlay)?;
                let occ = calibrated_occupancy(cfg, s, &f);
                let p = &f.params;
                let r = &f.result;
                let mut row = vec![name.clone()];
                row.extend(meta);
                row.extend([
                    format_f64(p.center),
                    cell(sigma(r, "center")),
                    format_f64(p.gamma_l),
                    cell(sigma(r, "gamma_l")),
                    format_f64(p.gamma_g),
                    cell(sigma(r, "gamma_g")),
                    format_f64(p.area),
                    cell(sigma(r, "area")),
                    format_f64(p.floor),
                    format_f64(p.fwhm()),
                    cell(occ.map(|o| o.0)),
                    cell(occ.map(|o| o.1)),
                    u8::from(r.converged).to_string(),
                ]);
                summary.push_row(row)?;
                w.fit(name, &f)?;
            }
            Err(e) => {
                let msg = data_problem(e)?;
                w.warn(format!("{name}: {msg}"));
                let mut row = vec![name.clone()];
                row.extend(meta);
                row.extend(std::iter::repeat_n(String::new(), 12));
                row.push("0".into());
                summary.push_row(row)?;
                w.fit(name, &failed_fit(msg))?;
            }
        }
    }
    w.table("lineshape_summary", &summary)
}

/// Per-spectrum Voigt fits give areas and widths; the area model yields C,
/// which then constrains the joint Voigt fit of the whole series.
fn detuning(cfg: &RunConfig, inputs: &[PathBuf], exec: Execution, w: &mut BundleWriter) -> CliResult<()> {
    let dev = &cfg.device;
    let paths = expand(inputs, "spectra")?;
    let spectra = read_spectra(&paths)?;
    let mut pts = Vec::new();
    for (s, f) in spectra.iter().zip(fit_voigt_batch(&spectra, VoigtConstraint::Free, exec)) {
        let d =
            s.metadata().detuning_hz.ok_or_else(|| CliError::validation("detuning mode needs detuning_hz metadata"))?;
        match f {
            Ok(f) => pts.push((d, s.metadata().n_c.unwrap_or(f64::NAN), f)),
            Err(e) => w.warn(format!("spectrum at detuning {d} Hz skipped: {}", data_problem(e)?)),
        }
    }
    let detunings: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let areas: Vec<f64> = pts.iter().map(|p| p.2.params.area).collect();
    let area_err: Vec<f64> = pts.iter().map(|p| sigma(&p.2.result, "area").unwrap_or(0.0)).collect();
    let fwhm: Vec<f64> = pts.iter().map(|p| p.2.params.fwhm()).collect();
    let errs = area_err.iter().all(|e| *e > 0.0).then_some(&area_err[..]);

    let area_fit = match fit_area_vs_detuning(&detunings, &areas, errs, dev) {
        Ok(f) => Some(f),
        Err(e) => {
            let msg = data_problem(e)?;
            w.warn(format!("area fit: {msg}"));
            w.fit("area_fit", &failed_fit(msg))?;
            None
        }
    };
    let c = match (cfg.fit.cooperativity, &area_fit) {
        (Some(c), _) => c,
        (None, Some(f)) => f.cooperativity,
        (None, None) => return Ok(()),
    };
    let series = match fit_voigt_detuning_series(&spectra, dev, c) {
        Ok(f) => Some(f),
        Err(e) => {
            let msg = data_problem(e)?;
            w.warn(format!("joint detuning fit: {msg}"));
            w.fit("series_fit", &failed_fit(msg))?;
            None
        }
    };

    let unit = dev.with_g0(1.0);
    let ratio = |d: f64| 1.0 + c * backaction_ratio(&unit, d, 1.0, 1.0);
    // Jitter-free comparison: FWHM = γ_i'(1 + C·ratio) with γ_i' by least squares.
    let (num, den) =
        detunings.iter().zip(&fwhm).fold((0.0, 0.0), |(a, b), (&d, &f)| (a + f * ratio(d), b + ratio(d).powi(2)));
    let gamma_i_plain = if den > 0.0 { num / den } else { f64::NAN };

    let mut table =
        Table::new(["detuning", "n_c", "area", "area_err", "fwhm", "gamma_l", "gamma_g", "area_model", "residual"]);
    let fitted = area_fit.as_ref().and_then(|f| f.predict(dev, &detunings).ok()).map(|p| p.0);
    for (i, (d, n_c, f)) in pts.iter().enumerate() {
        let model = fitted.as_ref().map(|m| m[i]);
        table.push_row([
            format_f64(*d),
            cell(Some(*n_c)),
            format_f64(areas[i]),
            format_f64(area_err[i]),
            format_f64(fwhm[i]),
            format_f64(f.params.gamma_l),
            format_f64(f.params.gamma_g),
            cell(model),
            cell(model.map(|m| areas[i] - m)),
        ])?;
    }
    w.table("detuning_points", &table)?;

    if let (Some(lo), Some(hi)) =
        (detunings.iter().copied().reduce(f64::min), detunings.iter().copied().reduce(f64::max))
    {
        let xs = dense(lo, hi, cfg.fit.overlay_points, false);
        let (fit_curve, null_curve) = match &area_fit {
            Some(f) => f.predict(dev, &xs).map(|(a, b)| (Some(a), Some(b))).unwrap_or((None, None)),
            None => (None, None),
        };
        let mut overlay = Table::new(["detuning", "area_fit", "area_null", "linewidth_jitter", "linewidth_no_jitter"]);
        for (k, &d) in xs.iter().enumerate() {
            let jitter = series.as_ref().map(|s| voigt_fwhm(s.gamma_i * ratio(d), s.gamma_g));
            overlay.push_row([
                format_f64(d),
                cell(fit_curve.as_ref().map(|v| v[k])),
                cell(null_curve.as_ref().map(|v| v[k])),
                cell(jitter),
                cell(Some(gamma_i_plain * ratio(d))),
            ])?;
        }
        w.table("detuning_overlay", &overlay)?;
    }
    if let Some(f) = area_fit {
        w.fit("area_fit", &f)?;
    }
    if let Some(f) = series {
        w.fit("series_fit", &f)?;
    }
    w.fit("no_jitter_fit", &serde_json::json!({ "cooperativity": c, "gamma_i": gamma_i_plain }))
}

fn power_law(cfg: &RunConfig, inputs: &[PathBuf], w: &mut BundleWriter) -> CliResult<()> {
    let spec = &cfg.fit.power_law;
    let (mut x, mut y, mut e) = (Vec::new(), Vec::new(), Vec::new());
    for (path, t) in read_series(&expand(inputs, "series")?)? {
        let ctx = CliError::in_file(&path);
        let xs = t.column_opt_f64(&spec.x).map_err(ctx)?;
        let ys = t.column_opt_f64(&spec.y).map_err(CliError::in_file(&path))?;
        let es = match &spec.err {
            Some(c) if t.has_column(c) => t.column_opt_f64(c).map_err(CliError::in_file(&path))?,
            _ => vec![None; t.len()],
        };
        let signs = t.optional_column_f64("detuning_sign").map_err(CliError::in_file(&path))?;
        let tfs = t.optional_column_f64("t_f").map_err(CliError::in_file(&path))?;
        for i in 0..t.len() {
            if let (Some(want), Some(s)) = (spec.detuning_sign, &signs) {
                if s[i] != f64::from(want) {
                    continue;
                }
            }
            if let (Some(want), Some(tf)) = (spec.t_f, &tfs) {
                if !close(tf[i], want) {
                    continue;
                }
            }
            if let (Some(a), Some(b)) = (xs[i], ys[i]) {
                x.push(a);
                y.push(b);
                e.push(es[i].unwrap_or(0.0));
            }
        }
    }
    if x.is_empty() {
        return Err(CliError::validation(format!(
            "invalid config field `fit.power_law`: no rows with values in `{}` and `{}` match detuning_sign = {:?}, t_f = {:?}",
            spec.x, spec.y, spec.detuning_sign, spec.t_f
        )));
    }
    let errs = e.iter().all(|v| *v > 0.0).then_some(&e[..]);
    let f = match fit_power_law(&x, &y, errs) {
        Ok(f) => f,
        Err(e) => {
            let msg = data_problem(e)?;
            w.warn(format!("power-law fit: {msg}"));
            return w.fit("power_law", &failed_fit(msg));
        }
    };
    let model: Vec<f64> = x.iter().map(|&v| f.eval(v)).collect();
    let resid: Vec<f64> = y.iter().zip(&model).map(|(a, b)| a - b).collect();
    w.table(
        "power_law_residuals",
        &Table::from_columns(&[("x", &x), ("y", &y), ("model", &model), ("residual", &resid)])?,
    )?;
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let xs = dense(lo, hi, cfg.fit.overlay_points, lo > 0.0);
    let ms: Vec<f64> = xs.iter().map(|&v| f.eval(v)).collect();
    w.table("power_law_overlay", &Table::from_columns(&[("x", &xs), ("model", &ms)])?)?;
    let norm = resid.iter().map(|r| r * r).sum::<f64>().sqrt();
    #[derive(Serialize)]
    struct Out<'a> {
        x: &'a str,
        y: &'a str,
        #[serde(flatten)]
        fit: omckit::fitting::PowerLawFit,
        result: FitResult,
    }
    w.fit("power_law", &Out { x: &spec.x, y: &spec.y, fit: f, result: f.to_fit_result(norm) })
}

/// Cooling-curve points from series tables; rows without an occupancy are skipped.
fn cooling_points(inputs: &[PathBuf]) -> CliResult<Vec<CoolingCurvePoint>> {
    let mut out = Vec::new();
    for (path, t) in read_series(&expand(inputs, "series")?)? {
        let col = |name: &str| t.column_opt_f64(name).map_err(CliError::in_file(&path));
        let opt = |name: &str| -> CliResult<Vec<Option<f64>>> {
            if t.has_column(name) {
                col(name)
            } else {
                Ok(vec![None; t.len()])
            }
        };
        let n_c = col("n_c")?;
        let sign = col("detuning_sign")?;
        let t_f = col("t_f")?;
        let occ = if t.has_column("occupancy_meas") { col("occupancy_meas")? } else { col("occupancy")? };
        let occ_err = opt("occupancy_err")?;
        let lw = if t.has_column("linewidth_meas") { opt("linewidth_meas")? } else { opt("linewidth")? };
        let lw_err = opt("linewidth_err")?;
        for i in 0..t.len() {
            let (Some(n_c), Some(sign), Some(t_f)) = (n_c[i], sign[i], t_f[i]) else {
                return Err(CliError::validation(format!(
                    "{}: row {} lacks n_c, detuning_sign or t_f",
                    path.display(),
                    i + 2
                )));
            };
            let Some(occupancy) = occ[i] else { continue };
            let p = CoolingCurvePoint {
                n_c,
                occupancy,
                occupancy_err: occ_err[i].unwrap_or(0.0),
                linewidth: lw[i].unwrap_or(0.0),
                linewidth_err: if lw[i].is_some() { lw_err[i].unwrap_or(0.0) } else { 0.0 },
                detuning_sign: sign as i8,
                t_f,
            };
            p.validate().map_err(|e| CliError::validation(format!("{}: row {}: {e}", path.display(), i + 2)))?;
            out.push(p);
        }
    }
    Ok(out)
}

fn bath_overlay(cfg: &RunConfig, fit: &BathFit, pts: &[CoolingCurvePoint]) -> CliResult<Table> {
    let dev = &cfg.device;
    let lo = pts.iter().map(|p| p.n_c).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.n_c).fold(f64::NEG_INFINITY, f64::max);
    let xs = dense(lo, hi, cfg.fit.overlay_points, true);
    let bound = |g0: f64| BathFit { gamma_0: g0, ..fit.clone() };
    let (low, high) = (bound(fit.gamma_0_interval.0), bound(fit.gamma_0_interval.1));
    let mut t = Table::new([
        "t_f",
        "n_c",
        "occupancy",
        "occupancy_lo",
        "occupancy_hi",
        "occupancy_blue",
        "asymmetry",
        "asymmetry_err",
        "gamma_p",
        "gamma_i",
        "linewidth_red",
    ]);
    for t_f in distinct(pts.iter().map(|p| p.t_f)) {
        for &n_c in &xs {
            let n = fit.occupancy(dev, n_c, t_f, 1)?;
            let a = low.occupancy(dev, n_c, t_f, 1)?;
            let b = high.occupancy(dev, n_c, t_f, 1)?;
            let blue = fit.occupancy(dev, n_c, t_f, -1).ok();
            let xi = blue.and_then(|_| fit.asymmetry_with_error(dev, n_c, t_f).ok());
            let gp = fit.gamma_p(n_c);
            t.push_row([
                format_f64(t_f),
                format_f64(n_c),
                format_f64(n),
                format_f64(a.min(b)),
                format_f64(a.max(b)),
                cell(blue),
                cell(xi.map(|v| v.0)),
                cell(xi.map(|v| v.1)),
                format_f64(gp),
                format_f64(fit.gamma_0 + gp),
                format_f64(fit.linewidth(dev, n_c, 1)),
            ])?;
        }
    }
    Ok(t)
}

fn bath_model(cfg: &RunConfig, inputs: &[PathBuf], w: &mut BundleWriter) -> CliResult<()> {
    let dev = &cfg.device;
    let pts = cooling_points(inputs)?;
    let fit = match fit_bath_model(&pts, dev, cfg.np_law(), &cfg.fit.bath) {
        Ok(f) => f,
        Err(e) => {
            let msg = data_problem(e)?;
            w.warn(format!("bath fit: {msg}"));
            return w.fit("bath_model", &failed_fit(msg));
        }
    };
    for msg in &fit.result.warnings {
        w.warn(format!("bath fit: {msg}"));
    }
    let mut res = Table::new(["t_f", "detuning_sign", "n_c", "occupancy", "occupancy_err", "model", "residual"]);
    for p in &pts {
        let m = fit.occupancy(dev, p.n_c, p.t_f, p.detuning_sign).ok();
        res.push_row([
            format_f64(p.t_f),
            p.detuning_sign.to_string(),
            format_f64(p.n_c),
            format_f64(p.occupancy),
            format_f64(p.occupancy_err),
            cell(m),
            cell(m.map(|m| p.occupancy - m)),
        ])?;
    }
    w.table("bath_residuals", &res)?;
    let mut knots = Table::new(["n_c", "t_p", "gamma_p", "gamma_p_err", "gamma_p_upper", "gamma_i"]);
    for i in 0..fit.knot_n_c.len() {
        let n_c = fit.knot_n_c[i];
        let t_p = inverse_bose_einstein(dev.omega_m, fit.np_law.eval(n_c)).ok();
        knots.push_row([
            format_f64(n_c),
            cell(t_p),
            format_f64(fit.knot_gamma_p[i]),
            format_f64(fit.knot_gamma_p_err[i]),
            format_f64(fit.knot_gamma_p_upper[i]),
            format_f64(fit.gamma_0 + fit.knot_gamma_p[i]),
        ])?;
    }
    w.table("bath_knots", &knots)?;
    w.table("bath_overlay", &bath_overlay(cfg, &fit, &pts)?)?;
    w.fit("bath_model", &fit)
}

fn g0(cfg: &RunConfig, inputs: &[PathBuf], w: &mut BundleWriter) -> CliResult<()> {
    let pts = cooling_points(inputs)?;
    let fit = match fit_g0_from_linewidths(&pts, &cfg.device) {
        Ok(f) => f,
        Err(e) => {
            let msg = data_problem(e)?;
            w.warn(format!("g0 fit: {msg}"));
            return w.fit("g0", &failed_fit(msg));
        }
    };
    let mut table = Table::new(["t_f", "n_c", "gamma_om", "gamma_om_err", "model", "residual"]);
    let mut hi: f64 = 0.0;
    for r in pts.iter().filter(|p| p.detuning_sign > 0 && p.linewidth > 0.0) {
        let Some(b) =
            pts.iter().find(|b| b.detuning_sign < 0 && b.t_f == r.t_f && close(b.n_c, r.n_c) && b.linewidth > 0.0)
        else {
            continue;
        };
        let g = 0.5 * (r.linewidth - b.linewidth);
        let err = 0.5 * r.linewidth_err.hypot(b.linewidth_err);
        let m = fit.slope * r.n_c;
        hi = hi.max(r.n_c);
        table.push_f64_row(&[r.t_f, r.n_c, g, err, m, g - m])?;
    }
    w.table("g0_points", &table)?;
    let xs = dense(0.0, hi, cfg.fit.overlay_points, false);
    let ms: Vec<f64> = xs.iter().map(|x| fit.slope * x).collect();
    w.table("g0_overlay", &Table::from_columns(&[("n_c", &xs), ("model", &ms)])?)?;
    w.fit("g0", &fit)
}

pub fn run(cfg: &RunConfig, mode: FitMode, inputs: &[PathBuf], exec: Execution) -> CliResult<ReportBundle> {
    cfg.validate()?;
    let mut w = BundleWriter::new("fit", cfg)?;
    match mode {
        FitMode::Lorentzian | FitMode::Voigt => lineshapes(cfg, mode, inputs, exec, &mut w)?,
        FitMode::Detuning => detuning(cfg, inputs, exec, &mut w)?,
        FitMode::PowerLaw => power_law(cfg, inputs, &mut w)?,
        FitMode::BathModel => bath_model(cfg, inputs, &mut w)?,
        FitMode::G0 => g0(cfg, inputs, &mut w)?,
    }
    w.finish(cfg)
}
