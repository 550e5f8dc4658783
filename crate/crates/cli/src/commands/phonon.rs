//! Tabulates the continuum-bath damping rate against its two asymptotes.

use serde::Serialize;

use omckit::phonon::{bose_integral, bose_integral_at_zero, gamma_p_high_t, gamma_p_integral, gamma_p_low_t};
use omckit::table::{format_f64, Table};

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::report::{cell, BundleWriter, ReportBundle};

pub const COLUMNS: [&str; 9] = [
    "t_p",
    "x_c",
    "bose_integral",
    "gamma_p",
    "gamma_p_low_t",
    "gamma_p_high_t",
    "ratio_low_t",
    "ratio_high_t",
    "error",
];

#[derive(Serialize)]
struct Summary {
    a: f64,
    cutoff_temperature: f64,
    bose_integral_at_zero: Option<f64>,
    activated_amplitude: f64,
    failed_rows: usize,
}

pub fn run(cfg: &RunConfig) -> CliResult<ReportBundle> {
    cfg.validate_phonon()?;
    let bath = &cfg.phonon.bath;
    let omega_m = cfg.device.omega_m;
    let mut w = BundleWriter::new("phonon", cfg)?;
    let mut t = Table::new(COLUMNS);
    let mut failed = 0;
    for t_p in cfg.phonon.t_p.values() {
        let x_c = bath.cutoff_x(t_p);
        let row = (|| -> omckit::Result<[f64; 4]> {
            Ok([
                bose_integral(bath.a, x_c)?,
                gamma_p_integral(bath, omega_m, t_p)?,
                gamma_p_low_t(bath, omega_m, t_p),
                gamma_p_high_t(bath, omega_m, t_p)?,
            ])
        })();
        let ratio = |num: f64, den: f64| (den > 0.0).then(|| num / den);
        match row {
            Ok([i, exact, low, high]) => t.push_row([
                format_f64(t_p),
                format_f64(x_c),
                format_f64(i),
                format_f64(exact),
                format_f64(low),
                format_f64(high),
                cell(ratio(low, exact)),
                cell(ratio(high, exact)),
                String::new(),
            ])?,
            Err(e) => {
                failed += 1;
                let mut row = vec![format_f64(t_p), format_f64(x_c)];
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push(e.to_string().replace(',', ";"));
                t.push_row(row)?;
            }
        }
    }
    if failed > 0 {
        w.warn(format!("{failed} temperatures failed; see the `error` column"));
    }
    w.table("phonon", &t)?;
    w.fit(
        "phonon",
        &Summary {
            a: bath.a,
            cutoff_temperature: bath.cutoff_temperature(),
            bose_integral_at_zero: bose_integral_at_zero(bath.a).ok(),
            activated_amplitude: bath.activated_amplitude(omega_m),
            failed_rows: failed,
        },
    )?;
    w.finish(cfg)
}
