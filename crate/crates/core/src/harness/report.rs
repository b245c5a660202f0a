//! Result serialization: the CSV exchange format and a self-contained SVG
//! line chart.

use super::sweep::ResultRecord;
use crate::methods::MethodId;
use crate::{Error, Result};
use std::io::Write;
use std::path::Path;

pub const CSV_HEADER: &str = "method,axis,axis_value,snr_db,trials,sync_errors,sync_error_prob,bits_total,bit_errors,ber,seed,config_digest";

/// Write records in the fixed column order. Float columns use shortest
/// round-trip formatting, so `parse_csv` recovers the exact values.
pub fn emit_csv(records: &[ResultRecord], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "{CSV_HEADER}").expect("vec write");
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.axis,
            r.axis_value,
            r.snr_db,
            r.trials,
            r.sync_errors,
            r.sync_error_prob(),
            r.bits_total,
            r.bit_errors,
            r.ber(),
            r.seed,
            r.config_digest
        )
        .expect("vec write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn field<'a>(parts: &'a [&'a str], idx: usize, line_no: usize) -> Result<&'a str> {
    parts
        .get(idx)
        .copied()
        .ok_or_else(|| Error::invalid(format!("csv line {line_no}: missing column {idx}")))
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str, line_no: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::invalid(format!("csv line {line_no}: bad {what} `{s}`")))
}

/// Read records back; the derived probability columns are checked for
/// presence but recomputed from the integer tallies.
pub fn parse_csv(path: &Path) -> Result<Vec<ResultRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(Error::invalid(format!("csv: unexpected header `{header}`")))
        }
        None => return Err(Error::invalid("csv: empty file".to_string())),
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = i + 1;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 12 {
            return Err(Error::invalid(format!(
                "csv line {line_no}: {} columns, expected 12",
                parts.len()
            )));
        }
        records.push(ResultRecord {
            method: MethodId::parse(field(&parts, 0, line_no)?)?,
            axis: field(&parts, 1, line_no)?.to_string(),
            axis_value: parse_num(parts[2], "axis_value", line_no)?,
            snr_db: parse_num(parts[3], "snr_db", line_no)?,
            trials: parse_num(parts[4], "trials", line_no)?,
            sync_errors: parse_num(parts[5], "sync_errors", line_no)?,
            bits_total: parse_num(parts[7], "bits_total", line_no)?,
            bit_errors: parse_num(parts[8], "bit_errors", line_no)?,
            seed: parse_num(parts[10], "seed", line_no)?,
            config_digest: field(&parts, 11, line_no)?.to_string(),
        });
    }
    Ok(records)
}

/// Which aggregate the chart plots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotMetric {
    SyncErrorProb,
    Ber,
}

impl PlotMetric {
    fn label(self) -> &'static str {
        match self {
            PlotMetric::SyncErrorProb => "sync error probability",
            PlotMetric::Ber => "bit error rate",
        }
    }

    fn value(self, r: &ResultRecord) -> f64 {
        match self {
            PlotMetric::SyncErrorProb => r.sync_error_prob(),
            PlotMetric::Ber => r.ber(),
        }
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const PLOT_W: f64 = 760.0;
const PLOT_H: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 55.0;
/// Zero estimates are clamped here so they stay on the log axis.
const LOG_FLOOR: f64 = 1e-7;

/// Render a log-y line chart with one series per (method, axis value).
pub fn emit_plot(records: &[ResultRecord], metric: PlotMetric, path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::NoData);
    }
    // series in first-seen order
    let mut series: Vec<((MethodId, String, u64), Vec<(f64, f64)>)> = Vec::new();
    for r in records {
        let key = (r.method, r.axis.clone(), r.axis_value.to_bits());
        let value = metric.value(r).max(LOG_FLOOR);
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, pts)) => pts.push((r.snr_db, value)),
            None => series.push((key, vec![(r.snr_db, value)])),
        }
    }
    let finite_x: Vec<f64> = records
        .iter()
        .map(|r| r.snr_db)
        .filter(|x| x.is_finite())
        .collect();
    if finite_x.is_empty() {
        return Err(Error::invalid("plot: no finite SNR values".to_string()));
    }
    let x_min = finite_x.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_max = finite_x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let y_max_log = 0.0; // 10^0
    let y_min_log = LOG_FLOOR.log10();

    let to_x = |snr: f64| MARGIN_L + (snr - x_min) / x_span * (PLOT_W - MARGIN_L - MARGIN_R);
    let to_y = |v: f64| -> f64 {
        let lv = v.log10().clamp(y_min_log, y_max_log);
        MARGIN_T + (y_max_log - lv) / (y_max_log - y_min_log) * (PLOT_H - MARGIN_T - MARGIN_B)
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" \
         viewBox=\"0 0 {PLOT_W} {PLOT_H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{PLOT_W}\" height=\"{PLOT_H}\" fill=\"white\"/>\n"
    ));

    // decade gridlines + y tick labels
    let mut decade = y_max_log as i32;
    while decade >= y_min_log as i32 {
        let y = to_y(10f64.powi(decade));
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" \
             stroke=\"#dddddd\"/>\n",
            PLOT_W - MARGIN_R
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e{decade}</text>\n",
            MARGIN_L - 6.0,
            y + 4.0
        ));
        decade -= 1;
    }
    // x ticks at each distinct SNR
    let mut xticks = finite_x.clone();
    xticks.sort_by(f64::total_cmp);
    xticks.dedup();
    for &snr in &xticks {
        let x = to_x(snr);
        svg.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{MARGIN_T}\" x2=\"{x:.1}\" y2=\"{:.1}\" \
             stroke=\"#eeeeee\"/>\n",
            PLOT_H - MARGIN_B
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{snr}</text>\n",
            PLOT_H - MARGIN_B + 18.0
        ));
    }
    // axes
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{:.1}\" height=\"{:.1}\" \
         fill=\"none\" stroke=\"black\"/>\n",
        PLOT_W - MARGIN_L - MARGIN_R,
        PLOT_H - MARGIN_T - MARGIN_B
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">SNR (dB)</text>\n",
        MARGIN_L + (PLOT_W - MARGIN_L - MARGIN_R) / 2.0,
        PLOT_H - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {:.1})\">{}</text>\n",
        PLOT_H / 2.0,
        PLOT_H / 2.0,
        metric.label()
    ));

    for (idx, ((method, axis, value_bits), points)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut sorted = points.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path_d: Vec<String> = sorted
            .iter()
            .filter(|(x, _)| x.is_finite())
            .enumerate()
            .map(|(i, (x, y))| {
                format!(
                    "{}{:.1},{:.1}",
                    if i == 0 { "M" } else { "L" },
                    to_x(*x),
                    to_y(*y)
                )
            })
            .collect();
        if !path_d.is_empty() {
            svg.push_str(&format!(
                "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                path_d.join(" ")
            ));
        }
        for (x, y) in sorted.iter().filter(|(x, _)| x.is_finite()) {
            svg.push_str(&format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>\n",
                to_x(*x),
                to_y(*y)
            ));
        }
        let label = if axis == "none" {
            method.to_string()
        } else {
            format!("{method} ({axis}={})", f64::from_bits(*value_bits))
        };
        let ly = MARGIN_T + 14.0 + idx as f64 * 18.0;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" \
             stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            PLOT_W - MARGIN_R + 10.0,
            PLOT_W - MARGIN_R + 34.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\">{label}</text>\n",
            PLOT_W - MARGIN_R + 40.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}
