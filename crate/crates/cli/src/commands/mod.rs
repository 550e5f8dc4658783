pub mod fit;
pub mod phonon;
pub mod plotdata;
pub mod simulate;

/// Relative equality at 1e-9, used to match temperatures and photon numbers
/// read back from CSV.
pub(crate) fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Values in order of first appearance, merging near-equal ones.
pub(crate) fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if !out.iter().any(|u| close(*u, v)) {
            out.push(v);
        }
    }
    out
}

/// File-name tag for a fridge temperature, e.g. `tf10mK` or `tf12p5mK`.
pub(crate) fn temperature_tag(t_f: f64) -> String {
    let mk = format!("{:.3}", t_f * 1e3);
    let mk = mk.trim_end_matches('0').trim_end_matches('.');
    format!("tf{}mK", mk.replace('.', "p"))
}
