use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use omckit::table::Table;
use serde_json::Value;
use tempfile::TempDir;

fn omckit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_omckit"))
        .args(args)
        .current_dir(dir)
        .env_remove("OMCKIT_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, json: Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(&json).unwrap()).unwrap();
    p
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn two_temperature_config(noise: bool) -> Value {
    let mut v = serde_json::json!({
        "fridge_temperatures": [0.01, 0.635],
        "sweep": {"variable": "n_c", "scale": "log", "start": 0.01, "stop": 100.0, "points": 17},
        "probe": {"sides": ["red", "blue"]}
    });
    if noise {
        v["noise"] = serde_json::json!({"seed": 5, "n_avg": 1000000, "occupancy": 0.03, "linewidth": 0.03});
    }
    v
}

/// Every file under `dir` keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn without_timestamp(bytes: &[u8]) -> Value {
    let mut v: Value = serde_json::from_slice(bytes).unwrap();
    v["provenance"]["timestamp"] = Value::Null;
    v
}

#[test]
fn single_point_sweep_is_a_validation_error() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = two_temperature_config(false);
    cfg["sweep"]["points"] = 1.into();
    let c = write_config(tmp.path(), "cfg.json", cfg);
    let o = omckit(tmp.path(), &["simulate", "--config", c.to_str().unwrap(), "--out", "o"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("sweep.points"), "{}", stderr(&o));
}

#[test]
fn exit_codes_separate_validation_from_io() {
    let tmp = TempDir::new().unwrap();
    let o = omckit(tmp.path(), &["simulate", "--config", "absent.json"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));

    fs::write(tmp.path().join("bad.json"), "{ not json").unwrap();
    assert_eq!(code(&omckit(tmp.path(), &["simulate", "--config", "bad.json"])), 2);

    let c = write_config(tmp.path(), "typo.json", serde_json::json!({"sweep": {"variabel": "n_c"}}));
    assert_eq!(code(&omckit(tmp.path(), &["simulate", "--config", c.to_str().unwrap()])), 2);

    fs::write(tmp.path().join("occupied"), "a file, not a directory").unwrap();
    let o = omckit(tmp.path(), &["simulate", "--out", "occupied/sub"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));

    assert_eq!(code(&omckit(tmp.path(), &["simulate", "--workers", "0", "--out", "w"])), 2);
    assert_eq!(code(&omckit(tmp.path(), &["simulate", "--format", "svg", "--out", "w"])), 2);
    assert_eq!(code(&omckit(tmp.path(), &["frobnicate"])), 2);
}

#[test]
fn noiseless_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let c = write_config(tmp.path(), "cfg.json", two_temperature_config(false));
    let c = c.to_str().unwrap();
    assert_eq!(code(&omckit(tmp.path(), &["simulate", "--config", c, "--out", "a"])), 0);
    assert_eq!(code(&omckit(tmp.path(), &["simulate", "--config", c, "--out", "b"])), 0);
    // the output directory is part of the hashed config
    let mut cfg_a: Value = serde_json::from_slice(&fs::read(tmp.path().join("a/config.json")).unwrap()).unwrap();
    let cfg_b: Value = serde_json::from_slice(&fs::read(tmp.path().join("b/config.json")).unwrap()).unwrap();
    cfg_a["outputs"]["directory"] = "b".into();
    assert_eq!(cfg_a, cfg_b);
    assert_eq!(fs::read(tmp.path().join("a/series.csv")).unwrap(), fs::read(tmp.path().join("b/series.csv")).unwrap());
    assert_eq!(
        fs::read(tmp.path().join("a/asymmetry.csv")).unwrap(),
        fs::read(tmp.path().join("b/asymmetry.csv")).unwrap()
    );
}

#[test]
fn seeded_runs_do_not_depend_on_worker_count() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = two_temperature_config(true);
    cfg["outputs"] = serde_json::json!({"directory": "out", "spectra": true});
    cfg["grid"] = serde_json::json!({"span": 100000.0, "points": 101});
    let c = write_config(tmp.path(), "cfg.json", cfg);
    let c = c.to_str().unwrap();
    let one = TempDir::new().unwrap();
    let four = TempDir::new().unwrap();
    let run = |dir: &Path, w: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_omckit"))
            .args(["simulate", "--config", c, "--workers", w])
            .current_dir(tmp.path())
            .env("OMCKIT_OUT", dir)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    };
    run(one.path(), "1");
    run(four.path(), "4");
    let (a, b) = (snapshot(one.path()), snapshot(four.path()));
    assert_eq!(a.len(), b.len());
    for (k, v) in &a {
        if k.extension().is_some_and(|e| e == "csv") {
            assert!(v == &b[k], "{} differs", k.display());
        }
    }
    // a different seed changes the noise
    let other = TempDir::new().unwrap();
    let o = omckit(tmp.path(), &["simulate", "--config", c, "--seed", "6", "--out", other.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_ne!(fs::read(other.path().join("series.csv")).unwrap(), a[Path::new("series.csv")]);
}

#[test]
fn out_flag_overrides_environment() {
    let tmp = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_omckit"))
        .args(["phonon", "--out", "flag"])
        .current_dir(tmp.path())
        .env("OMCKIT_OUT", "env")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("flag/phonon.csv").exists());
    assert!(!tmp.path().join("env").exists());
}

#[test]
fn provenance_hash_matches_written_config() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&omckit(tmp.path(), &["phonon", "--out", "p"])), 0);
    let bytes = fs::read(tmp.path().join("p/config.json")).unwrap();
    use sha2::Digest;
    let hex: String = sha2::Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let r = report(&tmp.path().join("p"));
    assert_eq!(r["provenance"]["config_sha256"], Value::String(hex));
    assert_eq!(r["provenance"]["version"], env!("CARGO_PKG_VERSION"));
    // the written config reproduces the run
    assert_eq!(code(&omckit(tmp.path(), &["phonon", "--config", "p/config.json", "--out", "q"])), 0);
    let (p, q) = (tmp.path().join("p"), tmp.path().join("q"));
    assert_eq!(fs::read(p.join("phonon.csv")).unwrap(), fs::read(q.join("phonon.csv")).unwrap());
    assert_eq!(
        without_timestamp(&fs::read(p.join("report.json")).unwrap())["fits"],
        without_timestamp(&fs::read(q.join("report.json")).unwrap())["fits"]
    );
}

#[test]
fn emitted_tables_reparse_to_identical_values() {
    let tmp = TempDir::new().unwrap();
    let c = write_config(tmp.path(), "cfg.json", two_temperature_config(true));
    assert_eq!(code(&omckit(tmp.path(), &["simulate", "--config", c.to_str().unwrap(), "--out", "s"])), 0);
    let r = report(&tmp.path().join("s"));
    for rel in r["tables"].as_object().unwrap().values() {
        let text = fs::read_to_string(tmp.path().join("s").join(rel.as_str().unwrap())).unwrap();
        let t = Table::parse(&text).unwrap();
        assert_eq!(t.to_csv_string(), text);
        for h in t.header() {
            t.column_opt_f64(h).unwrap();
        }
    }
}

#[test]
fn simulate_then_fit_recovers_the_bath() {
    let tmp = TempDir::new().unwrap();
    let c = write_config(tmp.path(), "cfg.json", two_temperature_config(false));
    let c = c.to_str().unwrap();
    assert_eq!(code(&omckit(tmp.path(), &["simulate", "--config", c, "--out", "s"])), 0);
    let o = omckit(tmp.path(), &["fit", "--mode", "bath-model", "--config", c, "--out", "f", "s"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fit = &report(&tmp.path().join("f"))["fits"]["bath_model"];
    let g0 = fit["gamma_0"].as_f64().unwrap();
    assert!((g0 / 306.0 - 1.0).abs() < 1e-3, "gamma_0 = {g0}");
    assert_eq!(fit["result"]["converged"], Value::Bool(true));
    for key in ["parameters", "uncertainties", "residual_norm", "converged", "iterations"] {
        assert!(fit["result"].get(key).is_some(), "FitResult lacks {key}");
    }

    let o = omckit(tmp.path(), &["fit", "--mode", "g0", "--config", c, "--out", "g", "s/series.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let g = report(&tmp.path().join("g"))["fits"]["g0"]["g0"].as_f64().unwrap();
    assert!((g / 735e3 - 1.0).abs() < 1e-3, "g0 = {g}");
}

#[test]
fn spectra_fit_back_to_the_simulated_occupancy() {
    let tmp = TempDir::new().unwrap();
    let cfg = serde_json::json!({
        "sweep": {"variable": "n_c", "scale": "log", "start": 0.1, "stop": 10.0, "points": 3},
        "probe": {"sides": ["red"]},
        "fridge_temperatures": [4.0],
        "outputs": {"spectra": true}
    });
    let c = write_config(tmp.path(), "cfg.json", cfg);
    let c = c.to_str().unwrap();
    assert_eq!(code(&omckit(tmp.path(), &["simulate", "--config", c, "--out", "s"])), 0);
    let o = omckit(tmp.path(), &["fit", "--mode", "lorentzian", "--config", c, "--out", "f", "s"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let series = Table::read(tmp.path().join("s/series.csv")).unwrap();
    let truth = series.column_f64("occupancy").unwrap();
    let widths = series.column_f64("linewidth").unwrap();
    let summary = Table::read(tmp.path().join("f/lineshape_summary.csv")).unwrap();
    let got = summary.column_f64("occupancy").unwrap();
    let gl = summary.column_f64("gamma_l").unwrap();
    assert_eq!(got.len(), 3);
    for i in 0..3 {
        assert!((got[i] / truth[i] - 1.0).abs() < 1e-3, "{} vs {}", got[i], truth[i]);
        assert!((gl[i] / widths[i] - 1.0).abs() < 1e-3);
    }
    let r = report(&tmp.path().join("f"));
    assert!(r["tables"].get("tf4000mK_red_000_residuals").is_some(), "{}", r["tables"]);
    assert!(r["tables"].get("tf4000mK_red_000_overlay").is_some());
}

#[test]
fn malformed_row_names_the_line() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("s.csv"), "t_f,detuning_sign,n_c,occupancy\n0.01,1,0.1,0.5\n0.01,1,0.2,oops\n").unwrap();
    let o = omckit(tmp.path(), &["fit", "--mode", "bath-model", "--out", "f", "s.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    fs::write(tmp.path().join("x.csv"), "frequency_hz,psd\n1,2\n2\n").unwrap();
    let o = omckit(tmp.path(), &["fit", "--mode", "voigt", "--out", "f", "x.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn failed_fits_are_results_not_crashes() {
    let tmp = TempDir::new().unwrap();
    let flat: Vec<String> = (0..64).map(|i| format!("{},1.1,shot_noise,100", 50e6 + 100.0 * i as f64)).collect();
    fs::write(tmp.path().join("flat.csv"), format!("frequency_hz,psd,unit,rbw_hz\n{}\n", flat.join("\n"))).unwrap();
    let o = omckit(tmp.path(), &["fit", "--mode", "lorentzian", "--out", "f", "flat.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(&tmp.path().join("f"));
    assert_eq!(r["fits"]["flat"]["converged"], Value::Bool(false));
    assert!(!r["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn single_temperature_bath_fit_warns() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = two_temperature_config(false);
    cfg["fridge_temperatures"] = serde_json::json!([0.01]);
    let c = write_config(tmp.path(), "cfg.json", cfg);
    let c = c.to_str().unwrap();
    assert_eq!(code(&omckit(tmp.path(), &["simulate", "--config", c, "--out", "s"])), 0);
    let o = omckit(tmp.path(), &["fit", "--mode", "bath-model", "--config", c, "--out", "f", "s"]);
    assert_eq!(code(&o), 0);
    let w = report(&tmp.path().join("f"))["warnings"].to_string();
    assert!(w.contains("single fridge temperature"), "{w}");
}

#[test]
fn fig4e_yields_four_tables_with_documented_columns() {
    let tmp = TempDir::new().unwrap();
    let c = write_config(tmp.path(), "cfg.json", two_temperature_config(true));
    let c = c.to_str().unwrap();
    assert_eq!(code(&omckit(tmp.path(), &["simulate", "--config", c, "--out", "s"])), 0);
    assert_eq!(code(&omckit(tmp.path(), &["fit", "--mode", "bath-model", "--config", c, "--out", "f", "s"])), 0);
    let o = omckit(
        tmp.path(),
        &["plotdata", "--figure", "fig4e", "--bundle", "s", "--bundle", "f", "--out", "p", "--format", "csv,svg"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut csvs: Vec<String> = fs::read_dir(tmp.path().join("p"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    csvs.sort();
    assert_eq!(
        csvs,
        ["fig4e_data_tf10mK.csv", "fig4e_data_tf635mK.csv", "fig4e_model_tf10mK.csv", "fig4e_model_tf635mK.csv"]
    );
    let data = Table::read(tmp.path().join("p/fig4e_data_tf10mK.csv")).unwrap();
    assert_eq!(data.header(), ["n_c", "occupancy", "occupancy_err", "asymmetry", "asymmetry_err"]);
    let model = Table::read(tmp.path().join("p/fig4e_model_tf635mK.csv")).unwrap();
    assert_eq!(model.header(), ["n_c", "occupancy", "occupancy_lo", "occupancy_hi", "asymmetry", "asymmetry_err"]);
    assert!(tmp.path().join("p/fig4e_model_tf635mK.svg").exists());

    // at 635 mK the curve starts near the Bose occupancy of the fridge and cools
    let n_f = 1.0 / ((6.626_070_15e-34_f64 * 3.6e9 / (1.380_649e-23 * 0.635)).exp() - 1.0);
    let occ = model.column_f64("occupancy").unwrap();
    assert!((occ[0] / n_f - 1.0).abs() < 0.1, "{} vs {n_f}", occ[0]);
    assert!(occ[occ.len() - 1] < 0.5 * occ[0]);
    // at 10 mK absorption heating wins first, back-action cooling later
    let cold = Table::read(tmp.path().join("p/fig4e_model_tf10mK.csv")).unwrap().column_f64("occupancy").unwrap();
    let peak = cold.iter().cloned().fold(f64::MIN, f64::max);
    assert!(cold[0] < 1.0 && peak > 2.0 * cold[0] && *cold.last().unwrap() < 0.5 * peak);
    // asymmetry is absent where the blue probe self-oscillates
    let xi = data.column_opt_f64("asymmetry").unwrap();
    assert!(xi.first().unwrap().is_some() && xi.last().unwrap().is_none());
}

#[test]
fn missing_series_names_the_step() {
    let tmp = TempDir::new().unwrap();
    let cfg = serde_json::json!({"probe": {"sides": ["red"]}, "fridge_temperatures": [0.01, 0.635]});
    let c = write_config(tmp.path(), "cfg.json", cfg);
    let c = c.to_str().unwrap();
    assert_eq!(code(&omckit(tmp.path(), &["simulate", "--config", c, "--out", "s"])), 0);
    assert_eq!(code(&omckit(tmp.path(), &["fit", "--mode", "bath-model", "--config", c, "--out", "f", "s"])), 0);
    let o = omckit(tmp.path(), &["plotdata", "--figure", "fig4e", "--bundle", "s", "--bundle", "f", "--out", "p"]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    assert!(e.contains("asymmetry") && e.contains("omckit simulate"), "{e}");

    let o = omckit(tmp.path(), &["plotdata", "--figure", "fig3b", "--bundle", "s", "--out", "p"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("omckit fit --mode detuning"), "{}", stderr(&o));
}

#[test]
fn phonon_ratios_approach_one_in_their_limits() {
    let tmp = TempDir::new().unwrap();
    let c = write_config(
        tmp.path(),
        "cfg.json",
        serde_json::json!({"phonon": {"t_p": {"scale": "log", "start": 0.1, "stop": 10.0, "points": 21}}}),
    );
    let o = omckit(tmp.path(), &["phonon", "--config", c.to_str().unwrap(), "--out", "p"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = Table::read(tmp.path().join("p/phonon.csv")).unwrap();
    assert_eq!(
        t.header(),
        [
            "t_p",
            "x_c",
            "bose_integral",
            "gamma_p",
            "gamma_p_low_t",
            "gamma_p_high_t",
            "ratio_low_t",
            "ratio_high_t",
            "error"
        ]
    );
    let low = t.column_f64("ratio_low_t").unwrap();
    let high = t.column_f64("ratio_high_t").unwrap();
    // the activated form carries an O(a/x_c) correction: 0.86 at x_c = 20
    assert!(low[0] > 0.85 && low[0] < 1.0, "{}", low[0]);
    assert!(low.windows(2).all(|w| w[0] > w[1]));
    assert!((high[20] - 1.0).abs() < 0.01, "{}", high[20]);
    assert!(high.windows(2).all(|w| w[0] > w[1]));
    // x_c -> 0 limit: 3·Γ(3)·ζ(3)
    let zero = report(&tmp.path().join("p"))["fits"]["phonon"]["bose_integral_at_zero"].as_f64().unwrap();
    assert!((zero - 6.0 * 1.202_056_903_159_594_2).abs() < 1e-12, "{zero}");
}

#[test]
fn empty_phonon_grid_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let c = write_config(tmp.path(), "cfg.json", serde_json::json!({"phonon": {"t_p": {"points": 0}}}));
    let o = omckit(tmp.path(), &["phonon", "--config", c.to_str().unwrap(), "--out", "p"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("phonon.t_p.points"), "{}", stderr(&o));
}

#[test]
fn detuning_pipeline_reaches_both_figures() {
    let tmp = TempDir::new().unwrap();
    let cfg = serde_json::json!({
        "device": {"g0": 715000.0, "kappa": 529e6, "kappa_e": 153e6, "kappa_i": 376e6, "omega_m": 3.6e9, "lambda_c": 1545e-9},
        "bath": {"gamma_0": 306.0, "t_f": 0.185, "np_amplitude": 13.3, "np_exponent": 0.25,
                 "gamma_p_law": {"kind": "constant", "gamma_p": 1994.0},
                 "jitter_law": {"amplitude": 6100.0, "exponent": 0.0}},
        "sweep": {"variable": "detuning", "scale": "linear", "start": 3.2e9, "stop": 4.0e9, "points": 9},
        "probe": {"n_c": 0.5},
        "grid": {"span": 160000.0, "points": 321},
        "outputs": {"spectra": true}
    });
    let c = write_config(tmp.path(), "cfg.json", cfg);
    let c = c.to_str().unwrap();
    assert_eq!(code(&omckit(tmp.path(), &["simulate", "--config", c, "--out", "s"])), 0);
    let o = omckit(tmp.path(), &["fit", "--mode", "detuning", "--config", c, "--out", "f", "s"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fits = &report(&tmp.path().join("f"))["fits"];
    let gi = fits["series_fit"]["gamma_i"].as_f64().unwrap();
    let gg = fits["series_fit"]["gamma_g"].as_f64().unwrap();
    assert!((gi / 2300.0 - 1.0).abs() < 1e-3 && (gg / 6100.0 - 1.0).abs() < 1e-3, "{gi} {gg}");
    for fig in ["fig3b", "fig3c"] {
        let o = omckit(tmp.path(), &["plotdata", "--figure", fig, "--bundle", "f", "--out", fig]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(tmp.path().join(fig).join(format!("{fig}_data.csv")).exists());
        assert!(tmp.path().join(fig).join(format!("{fig}_model.csv")).exists());
    }
}

#[test]
fn power_law_selection_must_match_rows() {
    let tmp = TempDir::new().unwrap();
    let c = write_config(tmp.path(), "cfg.json", two_temperature_config(false));
    let c = c.to_str().unwrap();
    assert_eq!(code(&omckit(tmp.path(), &["simulate", "--config", c, "--out", "s"])), 0);
    // the default selection is the resonant probe, which this sweep lacks
    let o = omckit(tmp.path(), &["fit", "--mode", "power-law", "--config", c, "--out", "f", "s"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("fit.power_law"), "{}", stderr(&o));
}
