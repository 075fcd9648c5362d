//! CSV rows and plot-ready series. Writers take any `io::Write`; callers own the files.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::ResultRow;
use crate::error::{Error, Result};

/// Column order of the results CSV.
pub const CSV_HEADER: [&str; 10] =
    ["scenario", "sweep_variable", "sweep_value", "scheme", "metric", "value", "value_db", "std_error", "trials", "failed"];

/// CSV view of a row; wall time is excluded so equal specs give equal files.
#[derive(Serialize, Deserialize)]
struct CsvRow {
    scenario: String,
    sweep_variable: String,
    sweep_value: f64,
    scheme: String,
    metric: String,
    value: f64,
    value_db: f64,
    std_error: f64,
    trials: usize,
    failed: usize,
}

impl From<&ResultRow> for CsvRow {
    fn from(r: &ResultRow) -> Self {
        CsvRow {
            scenario: r.scenario.clone(),
            sweep_variable: r.sweep_variable.clone(),
            sweep_value: r.sweep_value,
            scheme: r.scheme.clone(),
            metric: r.metric.clone(),
            value: r.value,
            value_db: r.value_db,
            std_error: r.std_error,
            trials: r.trials,
            failed: r.failed,
        }
    }
}

impl From<CsvRow> for ResultRow {
    fn from(r: CsvRow) -> Self {
        ResultRow {
            scenario: r.scenario,
            sweep_variable: r.sweep_variable,
            sweep_value: r.sweep_value,
            scheme: r.scheme,
            metric: r.metric,
            value: r.value,
            value_db: r.value_db,
            std_error: r.std_error,
            trials: r.trials,
            failed: r.failed,
            wall_time_s: 0.0,
        }
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    let io = |e: csv::Error| Error::Parse(format!("csv write: {e}"));
    wr.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        wr.serialize(CsvRow::from(r)).map_err(io)?;
    }
    wr.flush().map_err(|e| Error::Parse(format!("csv flush: {e}")))
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers().map_err(|e| Error::Parse(e.to_string()))?.iter().map(String::from).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
    }
    rd.deserialize::<CsvRow>().map(|r| r.map(ResultRow::from).map_err(|e| Error::Parse(format!("csv row: {e}")))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub file_name: String,
    pub scenario: String,
    pub scheme: String,
    pub metric: String,
    /// (sweep value, metric in dB)
    pub points: Vec<(f64, f64)>,
}

impl PlotSeries {
    /// Two whitespace-separated columns, one line per sweep point.
    pub fn render(&self) -> String {
        self.points.iter().map(|(x, y)| format!("{x} {y}\n")).collect()
    }
}

/// One series per (scenario, scheme, metric), in first-appearance order.
pub fn plot_series(rows: &[ResultRow]) -> Vec<PlotSeries> {
    let mut order: Vec<(String, String, String)> = Vec::new();
    let mut pts: BTreeMap<(String, String, String), Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        let key = (r.scenario.clone(), r.scheme.clone(), r.metric.clone());
        if !pts.contains_key(&key) {
            order.push(key.clone());
        }
        pts.entry(key).or_default().push((r.sweep_value, r.value_db));
    }
    order
        .into_iter()
        .map(|key| {
            let points = pts.remove(&key).unwrap_or_default();
            let (scenario, scheme, metric) = key;
            PlotSeries { file_name: format!("{scenario}_{scheme}_{metric}.dat"), scenario, scheme, metric, points }
        })
        .collect()
}

/// Figure each preset mirrors and its y-axis label.
pub fn figure_caption(scenario: &str) -> (&'static str, &'static str) {
    match scenario {
        "fig3" => ("average location CRB versus reflecting elements", "CRB (dB m^2)"),
        "fig4" => ("average location CRB versus sensors", "CRB (dB m^2)"),
        "fig5" => ("average location CRB versus coverage radius", "CRB (dB m^2)"),
        "fig6" => ("angle MSE versus BS transmit power", "MSE (dB rad^2)"),
        "fig7" => ("location MSE versus BS transmit power", "MSE (dB m^2)"),
        "fig8" => ("location MSE versus IRS abscissa", "MSE (dB m^2)"),
        _ => ("custom experiment", "value (dB)"),
    }
}

/// Manifest listing every series file once, with axis labels.
pub fn manifest(series: &[PlotSeries], x_label: &str) -> String {
    let mut out = String::from("# file\tscenario\tscheme\tmetric\tx_label\ty_label\tfigure\n");
    for s in series {
        let (fig, y) = figure_caption(&s.scenario);
        out.push_str(&format!("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", s.file_name, s.scenario, s.scheme, s.metric, x_label, y, fig));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: f64, scheme: &str) -> ResultRow {
        ResultRow {
            scenario: "fig3".into(),
            sweep_variable: "elements".into(),
            sweep_value: v,
            scheme: scheme.into(),
            metric: "crb_location".into(),
            value: 0.0123 * v,
            value_db: 10.0 * (0.0123 * v).log10(),
            std_error: 0.001,
            trials: 100,
            failed: 1,
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn empty_rows_write_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_HEADER.join(",") + "\n");
    }

    #[test]
    fn round_trip_and_db_column() {
        let rows = vec![r(8.0, "collaborative"), r(16.0, "collaborative"), r(8.0, "single-irs")];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
        for row in back {
            assert!((row.value_db - 10.0 * row.value.log10()).abs() < 1e-9);
        }
    }

    #[test]
    fn series_and_manifest() {
        let rows = vec![r(8.0, "collaborative"), r(8.0, "single-irs"), r(16.0, "collaborative")];
        let s = plot_series(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].points.len(), 2);
        assert_eq!(s[1].render().lines().count(), 1);
        let m = manifest(&s, "N");
        for one in &s {
            assert_eq!(m.matches(&one.file_name).count(), 1);
        }
    }
}
