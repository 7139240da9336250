//! Parameter sweeps: run one session per grid point, varying a single
//! dotted-path scenario field, and collect the reports as table rows.

use rayon::prelude::*;
use serde::Serialize;

use crate::detector::bias_at_t1;
use crate::error::{Error, Result};
use crate::harness::scenario::Scenario;
use crate::harness::session::{run_session, SessionReport};

/// One grid point. The bias columns evaluate the detectors' T1 voltage at
/// the scenario's CW blinding power, which traces the bias-vs-power curve
/// when `attack.cw_power` is the swept parameter.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub param: String,
    pub value: f64,
    pub bias_t1_det0: f64,
    pub bias_t1_det1: f64,
    pub blinded0: bool,
    pub blinded1: bool,
    pub click_fraction: f64,
    #[serde(flatten)]
    pub report: SessionReport,
}

/// Set a dotted-path field (e.g. `attack.cw_power` or `source.slots`) in the
/// scenario's TOML representation.
fn set_param(table: &mut toml::Table, path: &str, value: f64) -> Result<()> {
    let mut segments: Vec<&str> = path.split('.').collect();
    let leaf = segments.pop().ok_or_else(|| Error::UnknownSweepParam(path.to_string()))?;
    let mut current = table;
    for seg in segments {
        current = current
            .get_mut(seg)
            .and_then(|v| v.as_table_mut())
            .ok_or_else(|| Error::UnknownSweepParam(path.to_string()))?;
    }
    let new_value = match current.get(leaf) {
        Some(toml::Value::Integer(_)) => toml::Value::Integer(value as i64),
        Some(toml::Value::Boolean(_)) => toml::Value::Boolean(value != 0.0),
        _ => toml::Value::Float(value),
    };
    current.insert(leaf.to_string(), new_value);
    Ok(())
}

fn scenario_at(template: &Scenario, param: &str, value: f64) -> Result<Scenario> {
    let text = template.to_toml_string();
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    set_param(&mut table, param, value)?;
    let text = toml::to_string(&table).map_err(|e| Error::ConfigParse(e.to_string()))?;
    Scenario::from_toml_str(&text)
}

/// Run the grid. Sessions execute concurrently; rows come back sorted by
/// grid index.
pub fn sweep(template: &Scenario, param: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::EmptySweepGrid);
    }
    // fail fast on a bad path before spawning the grid
    scenario_at(template, param, values[0])?;
    let mut rows: Vec<SweepRow> = values
        .par_iter()
        .enumerate()
        .map(|(index, &value)| -> Result<SweepRow> {
            let scenario = scenario_at(template, param, value)?;
            let (d0, d1) = scenario.build_detectors()?;
            let cw = scenario.attack.config.cw_power;
            let report = run_session(&scenario)?;
            Ok(SweepRow {
                index,
                param: param.to_string(),
                value,
                bias_t1_det0: bias_at_t1(cw, &d0.elec),
                bias_t1_det1: bias_at_t1(cw, &d1.elec),
                blinded0: d0.is_blinded(cw),
                blinded1: d1.is_blinded(cw),
                click_fraction: report.bob_clicks as f64 / report.slots.max(1) as f64,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.index);
    Ok(rows)
}

/// Write rows as CSV with a header row.
pub fn write_csv<W: std::io::Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "index",
        "param",
        "value",
        "bias_t1_det0",
        "bias_t1_det1",
        "blinded0",
        "blinded1",
        "click_fraction",
        "seed",
        "slots",
        "bob_clicks",
        "double_clicks",
        "clicks_photon",
        "clicks_dark",
        "clicks_linear",
        "sifted_len",
        "qber",
        "disclosed_bits",
        "final_key_len",
        "ec_verified",
        "aborted",
        "eve_raw_agreement",
        "eve_sifted_agreement",
        "eve_final_agreement",
        "alarms",
    ])
    .map_err(csv_err)?;
    let fmt_opt_f64 = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let rep = &r.report;
        w.write_record([
            r.index.to_string(),
            r.param.clone(),
            r.value.to_string(),
            r.bias_t1_det0.to_string(),
            r.bias_t1_det1.to_string(),
            r.blinded0.to_string(),
            r.blinded1.to_string(),
            r.click_fraction.to_string(),
            rep.seed.to_string(),
            rep.slots.to_string(),
            rep.bob_clicks.to_string(),
            rep.double_clicks.to_string(),
            rep.clicks_photon.to_string(),
            rep.clicks_dark.to_string(),
            rep.clicks_linear.to_string(),
            rep.sifted_len.to_string(),
            fmt_opt_f64(rep.qber),
            rep.disclosed_bits.to_string(),
            rep.final_key_len.to_string(),
            rep.ec_verified.map(|b| b.to_string()).unwrap_or_default(),
            rep.aborted.clone().unwrap_or_default(),
            fmt_opt_f64(rep.eve_raw_agreement),
            fmt_opt_f64(rep.eve_sifted_agreement),
            fmt_opt_f64(rep.eve_final_agreement),
            rep.alarms.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::ConfigParse(format!("csv write failed: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::clavis2_baseline;

    #[test]
    fn empty_grid_is_rejected() {
        let sc = clavis2_baseline();
        assert!(matches!(sweep(&sc, "source.mean_photon_number", &[]), Err(Error::EmptySweepGrid)));
    }

    #[test]
    fn unknown_path_is_rejected() {
        let sc = clavis2_baseline();
        assert!(matches!(
            sweep(&sc, "nosuch.field", &[1.0]),
            Err(Error::UnknownSweepParam(_))
        ));
    }

    #[test]
    fn bias_curve_is_monotone_with_knee_at_p_blind() {
        let mut sc = clavis2_baseline();
        sc.source.slots = 10; // bias columns do not need statistics
        let values: Vec<f64> = (0..=24).map(|i| i as f64 * 50e-6).collect();
        let rows = sweep(&sc, "attack.cw_power", &values).unwrap();
        let mut prev = f64::INFINITY;
        for r in &rows {
            assert!(r.bias_t1_det0 <= prev);
            prev = r.bias_t1_det0;
            assert_eq!(r.blinded0, r.value >= 397e-6);
            assert_eq!(r.blinded1, r.value >= 765e-6);
        }
    }

    #[test]
    fn integer_fields_survive_sweeping() {
        let sc = clavis2_baseline();
        let rows = sweep(&sc, "source.slots", &[50.0, 100.0]).unwrap();
        assert_eq!(rows[0].report.slots, 50);
        assert_eq!(rows[1].report.slots, 100);
    }

    #[test]
    fn csv_has_header_and_one_line_per_row() {
        let mut sc = clavis2_baseline();
        sc.source.slots = 20;
        let rows = sweep(&sc, "source.mean_photon_number", &[0.1, 0.2]).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("index,param,value"));
    }
}
