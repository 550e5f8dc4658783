//! Plot-ready CSVs, one per curve, assembled from simulate and fit bundles.

use std::path::PathBuf;

use omckit::physics::bose_einstein;
use omckit::table::{format_f64, Table};

use super::{close, distinct, temperature_tag};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::report::{cell, BundleWriter, LoadedBundle, ReportBundle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    /// Linewidth against photon number, red and blue probes.
    #[value(name = "fig2a")]
    Fig2a,
    /// Occupancy against photon number, red and blue probes.
    #[value(name = "fig2b")]
    Fig2b,
    /// Detected area against detuning with the cooling and null models.
    #[value(name = "fig3b")]
    Fig3b,
    /// Linewidth against detuning with and without jitter.
    #[value(name = "fig3c")]
    Fig3c,
    /// Resonant-probe heating with its power law.
    #[value(name = "fig4a")]
    Fig4a,
    /// Linewidths and the fitted intrinsic damping.
    #[value(name = "fig4b")]
    Fig4b,
    /// Cooling curves and asymmetry at each fridge temperature.
    #[value(name = "fig4e")]
    Fig4e,
    /// Linewidth and γ_p against absorption-bath temperature.
    #[value(name = "figS5b", alias = "figs5b")]
    FigS5b,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2a => "fig2a",
            Figure::Fig2b => "fig2b",
            Figure::Fig3b => "fig3b",
            Figure::Fig3c => "fig3c",
            Figure::Fig4a => "fig4a",
            Figure::Fig4b => "fig4b",
            Figure::Fig4e => "fig4e",
            Figure::FigS5b => "figS5b",
        }
    }
}

const SIMULATE_NC: &str = "omckit simulate (n_c sweep)";
const SIMULATE_RED_BLUE: &str = "omckit simulate (n_c sweep with red and blue probe sides)";
const FIT_DETUNING: &str = "omckit fit --mode detuning";
const FIT_POWER_LAW: &str = "omckit fit --mode power-law";
const FIT_BATH: &str = "omckit fit --mode bath-model";

struct Sources {
    figure: Figure,
    bundles: Vec<LoadedBundle>,
}

impl Sources {
    fn find(&self, name: &str) -> Option<(&LoadedBundle, CliResult<Table>)> {
        self.bundles.iter().find_map(|b| b.table(name).map(|t| (b, t)))
    }

    fn require(&self, name: &str, step: &str) -> CliResult<(&LoadedBundle, Table)> {
        match self.find(name) {
            Some((b, t)) => Ok((b, t?)),
            None => Err(self.missing(name, step)),
        }
    }

    fn missing(&self, series: &str, step: &str) -> CliError {
        CliError::MissingSeries { figure: self.figure.name().into(), series: series.into(), step: step.into() }
    }
}

fn column(t: &Table, name: &str) -> CliResult<Vec<Option<f64>>> {
    Ok(t.column_opt_f64(name)?)
}

/// Row indices with the given probe sign and (optionally) fridge temperature.
fn select(t: &Table, sign: i8, t_f: Option<f64>) -> CliResult<Vec<usize>> {
    let s = column(t, "detuning_sign")?;
    let tf = column(t, "t_f")?;
    Ok((0..t.len())
        .filter(|&i| s[i] == Some(f64::from(sign)) && t_f.is_none_or(|want| tf[i].is_some_and(|v| close(v, want))))
        .collect())
}

/// Copies `rows` of the named columns, renaming them as `(output, input)`.
fn subset(t: &Table, rows: &[usize], cols: &[(&str, &str)]) -> CliResult<Table> {
    let data: Vec<Vec<Option<f64>>> = cols.iter().map(|(_, c)| column(t, c)).collect::<CliResult<_>>()?;
    let mut out = Table::new(cols.iter().map(|c| c.0));
    for &i in rows {
        out.push_row(data.iter().map(|c| cell(c[i])))?;
    }
    Ok(out)
}

fn nonempty(src: &Sources, rows: Vec<usize>, what: &str, step: &str) -> CliResult<Vec<usize>> {
    if rows.is_empty() {
        Err(src.missing(what, step))
    } else {
        Ok(rows)
    }
}

const LINEWIDTH_COLS: [(&str, &str); 3] =
    [("n_c", "n_c"), ("linewidth", "linewidth_meas"), ("linewidth_err", "linewidth_err")];
const OCCUPANCY_COLS: [(&str, &str); 3] =
    [("n_c", "n_c"), ("occupancy", "occupancy_meas"), ("occupancy_err", "occupancy_err")];

fn fig2a(src: &Sources, out: &mut Vec<(String, Table)>) -> CliResult<()> {
    let (_, s) = src.require("series", SIMULATE_RED_BLUE)?;
    let red = nonempty(src, select(&s, 1, None)?, "series (red-detuned rows)", SIMULATE_RED_BLUE)?;
    let blue = nonempty(src, select(&s, -1, None)?, "series (blue-detuned rows)", SIMULATE_RED_BLUE)?;
    out.push(("fig2a_red".into(), subset(&s, &red, &LINEWIDTH_COLS)?));
    out.push(("fig2a_blue".into(), subset(&s, &blue, &LINEWIDTH_COLS)?));
    // γ_i as the red/blue average and γ_OM as half their difference
    let (n_c, tf, lw) = (column(&s, "n_c")?, column(&s, "t_f")?, column(&s, "linewidth_meas")?);
    let mut pairs = Table::new(["n_c", "gamma_i", "gamma_om"]);
    for &r in &red {
        let partner = blue.iter().find(|&&b| n_c[b] == n_c[r] && tf[b] == tf[r]);
        if let Some((Some(a), Some(b))) = partner.map(|&b| (lw[r], lw[b])) {
            pairs.push_row([cell(n_c[r]), format_f64(0.5 * (a + b)), format_f64(0.5 * (a - b))])?;
        }
    }
    out.push(("fig2a_pairs".into(), pairs));
    if let Some((_, t)) = src.find("g0_overlay") {
        out.push(("fig2a_gamma_om_fit".into(), t?));
    }
    Ok(())
}

fn fig2b(src: &Sources, out: &mut Vec<(String, Table)>) -> CliResult<()> {
    let (b, s) = src.require("series", SIMULATE_RED_BLUE)?;
    let red = nonempty(src, select(&s, 1, None)?, "series (red-detuned rows)", SIMULATE_RED_BLUE)?;
    let blue = select(&s, -1, None)?;
    out.push(("fig2b_red".into(), subset(&s, &red, &OCCUPANCY_COLS)?));
    out.push(("fig2b_blue".into(), subset(&s, &blue, &OCCUPANCY_COLS)?));
    let n_c = column(&s, "n_c")?;
    let tf = column(&s, "t_f")?;
    let mut nf = Table::new(["n_c", "t_f", "n_f"]);
    for &i in &red {
        let (Some(x), Some(t)) = (n_c[i], tf[i]) else { continue };
        nf.push_f64_row(&[x, t, bose_einstein(b.config.device.omega_m, t)?])?;
    }
    out.push(("fig2b_n_f".into(), nf));
    Ok(())
}

fn fig3(src: &Sources, out: &mut Vec<(String, Table)>, area: bool) -> CliResult<()> {
    let (_, pts) = src.require("detuning_points", FIT_DETUNING)?;
    let (_, model) = src.require("detuning_overlay", FIT_DETUNING)?;
    let all: Vec<usize> = (0..pts.len()).collect();
    let all_model: Vec<usize> = (0..model.len()).collect();
    if area {
        out.push((
            "fig3b_data".into(),
            subset(&pts, &all, &[("detuning", "detuning"), ("area", "area"), ("area_err", "area_err")])?,
        ));
        out.push((
            "fig3b_model".into(),
            subset(
                &model,
                &all_model,
                &[("detuning", "detuning"), ("area_fit", "area_fit"), ("area_null", "area_null")],
            )?,
        ));
    } else {
        out.push(("fig3c_data".into(), subset(&pts, &all, &[("detuning", "detuning"), ("linewidth", "fwhm")])?));
        out.push((
            "fig3c_model".into(),
            subset(
                &model,
                &all_model,
                &[
                    ("detuning", "detuning"),
                    ("linewidth_jitter", "linewidth_jitter"),
                    ("linewidth_no_jitter", "linewidth_no_jitter"),
                ],
            )?,
        ));
    }
    Ok(())
}

fn fig4a(src: &Sources, out: &mut Vec<(String, Table)>) -> CliResult<()> {
    const STEP: &str = "omckit simulate (n_c sweep with a resonant probe side)";
    let (_, s) = src.require("series", STEP)?;
    let rows = nonempty(src, select(&s, 0, None)?, "series (resonant rows)", STEP)?;
    let mut cols = OCCUPANCY_COLS.to_vec();
    cols.push(("t_p", "t_p"));
    out.push(("fig4a_data".into(), subset(&s, &rows, &cols)?));
    let (_, model) = src.require("power_law_overlay", FIT_POWER_LAW)?;
    let all: Vec<usize> = (0..model.len()).collect();
    out.push(("fig4a_model".into(), subset(&model, &all, &[("n_c", "x"), ("n_p", "model")])?));
    Ok(())
}

fn fig4b(src: &Sources, out: &mut Vec<(String, Table)>) -> CliResult<()> {
    const STEP: &str = "omckit simulate (n_c sweep with resonant and red probe sides)";
    let (_, s) = src.require("series", STEP)?;
    let resonant = nonempty(src, select(&s, 0, None)?, "series (resonant rows)", STEP)?;
    let red = nonempty(src, select(&s, 1, None)?, "series (red-detuned rows)", STEP)?;
    out.push(("fig4b_resonant".into(), subset(&s, &resonant, &LINEWIDTH_COLS)?));
    out.push(("fig4b_red".into(), subset(&s, &red, &LINEWIDTH_COLS)?));
    let (_, knots) = src.require("bath_knots", FIT_BATH)?;
    let all: Vec<usize> = (0..knots.len()).collect();
    out.push((
        "fig4b_gamma_i".into(),
        subset(&knots, &all, &[("n_c", "n_c"), ("gamma_i", "gamma_i"), ("gamma_i_err", "gamma_p_err")])?,
    ));
    let (_, model) = src.require("bath_overlay", FIT_BATH)?;
    let first_tf = column(&model, "t_f")?.first().copied().flatten();
    let tf = column(&model, "t_f")?;
    let rows: Vec<usize> = (0..model.len()).filter(|&i| tf[i] == first_tf).collect();
    let (gi, gp) = (column(&model, "gamma_i")?, column(&model, "gamma_p")?);
    let n_c = column(&model, "n_c")?;
    let mut t = Table::new(["n_c", "gamma_0", "gamma_p"]);
    for i in rows {
        t.push_row([cell(n_c[i]), cell(gi[i].zip(gp[i]).map(|(a, b)| a - b)), cell(gp[i])])?;
    }
    out.push(("fig4b_model".into(), t));
    Ok(())
}

/// Two CSVs per fridge temperature: measured points with their asymmetry,
/// and the bath-model curve with its γ₀ band.
fn fig4e(src: &Sources, out: &mut Vec<(String, Table)>) -> CliResult<()> {
    let (_, s) = src.require("series", SIMULATE_RED_BLUE)?;
    let (_, asym) = src.require("asymmetry", SIMULATE_RED_BLUE)?;
    let (_, model) = src.require("bath_overlay", FIT_BATH)?;
    let temps = distinct(column(&s, "t_f")?.into_iter().flatten());
    let (a_tf, a_nc) = (column(&asym, "t_f")?, column(&asym, "n_c")?);
    let (a_xi, a_err) = (column(&asym, "asymmetry_meas")?, column(&asym, "asymmetry_err")?);
    let m_tf = column(&model, "t_f")?;
    for t_f in temps {
        let red = select(&s, 1, Some(t_f))?;
        if red.is_empty() {
            continue;
        }
        let (n_c, occ, err) = (column(&s, "n_c")?, column(&s, "occupancy_meas")?, column(&s, "occupancy_err")?);
        let mut data = Table::new(["n_c", "occupancy", "occupancy_err", "asymmetry", "asymmetry_err"]);
        for &i in &red {
            let j = (0..asym.len()).find(|&j| {
                a_tf[j].is_some_and(|v| close(v, t_f)) && a_nc[j].zip(n_c[i]).is_some_and(|(a, b)| close(a, b))
            });
            data.push_row([
                cell(n_c[i]),
                cell(occ[i]),
                cell(err[i]),
                cell(j.and_then(|j| a_xi[j])),
                cell(j.and_then(|j| a_err[j])),
            ])?;
        }
        let rows: Vec<usize> = (0..model.len()).filter(|&i| m_tf[i].is_some_and(|v| close(v, t_f))).collect();
        if rows.is_empty() {
            return Err(src.missing(&format!("bath_overlay at T_f = {t_f} K"), FIT_BATH));
        }
        let curve = subset(
            &model,
            &rows,
            &[
                ("n_c", "n_c"),
                ("occupancy", "occupancy"),
                ("occupancy_lo", "occupancy_lo"),
                ("occupancy_hi", "occupancy_hi"),
                ("asymmetry", "asymmetry"),
                ("asymmetry_err", "asymmetry_err"),
            ],
        )?;
        let tag = temperature_tag(t_f);
        out.push((format!("fig4e_data_{tag}"), data));
        out.push((format!("fig4e_model_{tag}"), curve));
    }
    if out.is_empty() {
        return Err(src.missing("series (red-detuned rows)", SIMULATE_RED_BLUE));
    }
    Ok(())
}

fn fig_s5b(src: &Sources, out: &mut Vec<(String, Table)>) -> CliResult<()> {
    let (_, s) = src.require("series", SIMULATE_NC)?;
    let mut rows = select(&s, 0, None)?;
    rows.extend(select(&s, 1, None)?);
    let rows = nonempty(src, rows, "series (resonant or red rows)", SIMULATE_NC)?;
    out.push((
        "figS5b_data".into(),
        subset(
            &s,
            &rows,
            &[("t_p", "t_p"), ("detuning_sign", "detuning_sign"), ("fwhm", "fwhm"), ("linewidth", "linewidth_meas")],
        )?,
    ));
    let (_, knots) = src.require("bath_knots", FIT_BATH)?;
    let all: Vec<usize> = (0..knots.len()).collect();
    out.push((
        "figS5b_gamma_p".into(),
        subset(&knots, &all, &[("t_p", "t_p"), ("gamma_p", "gamma_p"), ("gamma_p_err", "gamma_p_err")])?,
    ));
    Ok(())
}

pub fn run(cfg: &RunConfig, figure: Figure, bundles: &[PathBuf]) -> CliResult<ReportBundle> {
    cfg.validate()?;
    if bundles.is_empty() {
        return Err(CliError::validation("plotdata needs at least one --bundle"));
    }
    let src = Sources { figure, bundles: bundles.iter().map(|b| LoadedBundle::load(b)).collect::<CliResult<_>>()? };
    let mut out = Vec::new();
    match figure {
        Figure::Fig2a => fig2a(&src, &mut out)?,
        Figure::Fig2b => fig2b(&src, &mut out)?,
        Figure::Fig3b => fig3(&src, &mut out, true)?,
        Figure::Fig3c => fig3(&src, &mut out, false)?,
        Figure::Fig4a => fig4a(&src, &mut out)?,
        Figure::Fig4b => fig4b(&src, &mut out)?,
        Figure::Fig4e => fig4e(&src, &mut out)?,
        Figure::FigS5b => fig_s5b(&src, &mut out)?,
    }
    let mut w = BundleWriter::new("plotdata", cfg)?;
    for (name, t) in &out {
        w.table(name, t)?;
    }
    w.finish(cfg)
}
