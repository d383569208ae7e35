//! Hand-rolled SVG plots for the analyze command.
//!
//! Every data-bearing element carries a `data-*` attribute with the exact
//! value it draws, so plots can be compared structurally instead of by pixel.

use std::fmt::Write;

use smurfscan::AnalysisReport;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 50.0;
const RIGHT: f64 = 830.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 430.0;

struct Frame {
    z_min: f64,
    z_span: f64,
}

impl Frame {
    fn new(report: &AnalysisReport) -> Self {
        let edges = &report.histogram.edges;
        Frame {
            z_min: edges[0],
            z_span: edges[edges.len() - 1] - edges[0],
        }
    }

    fn x(&self, z: f64) -> f64 {
        LEFT + (z - self.z_min) / self.z_span * (RIGHT - LEFT)
    }
}

fn open_svg(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n\
         <text x=\"{LEFT}\" y=\"22\">{title}</text>"
    );
}

fn threshold_line(out: &mut String, frame: &Frame) {
    let x = frame.x(0.0);
    let _ = writeln!(
        out,
        "<line class=\"threshold\" x1=\"{x:.2}\" y1=\"{TOP}\" x2=\"{x:.2}\" y2=\"{BOTTOM}\" \
         stroke=\"#7f3fbf\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n\
         <text x=\"{:.2}\" y=\"{:.0}\" fill=\"#7f3fbf\">threshold</text>",
        x + 5.0,
        TOP + 14.0,
    );
}

fn axis(out: &mut String, frame: &Frame) {
    let _ = writeln!(
        out,
        "<line x1=\"{LEFT}\" y1=\"{BOTTOM}\" x2=\"{RIGHT}\" y2=\"{BOTTOM}\" stroke=\"#333\"/>"
    );
    // integer z ticks
    let lo = frame.z_min.ceil() as i64;
    let hi = (frame.z_min + frame.z_span).floor() as i64;
    for t in lo..=hi {
        let x = frame.x(t as f64);
        let _ = writeln!(
            out,
            "<line x1=\"{x:.2}\" y1=\"{BOTTOM}\" x2=\"{x:.2}\" y2=\"{:.0}\" stroke=\"#333\"/>\n\
             <text x=\"{x:.2}\" y=\"{:.0}\" text-anchor=\"middle\">{t}</text>",
            BOTTOM + 5.0,
            BOTTOM + 20.0,
        );
    }
}

/// Observed bin fractions as bars, model predictions as markers (circles on
/// bins the model was fitted to, squares on the excluded window bins) and a
/// dashed vertical line at the alert threshold (z = 0).
pub fn histogram_svg(report: &AnalysisReport) -> String {
    let hist = &report.histogram;
    let frame = Frame::new(report);
    let peak = hist
        .fractions
        .iter()
        .chain(&report.fit.fitted_fractions)
        .fold(1e-12_f64, |m, &v| m.max(v))
        * 1.06;
    let y = |fraction: f64| BOTTOM - (fraction.max(0.0) / peak) * (BOTTOM - TOP);

    let mut out = String::new();
    open_svg(
        &mut out,
        "Transaction log: observed bin fractions vs. smooth counterfactual",
    );
    axis(&mut out, &frame);
    for (o, &fraction) in hist.fractions.iter().enumerate() {
        let x0 = frame.x(hist.edges[o]);
        let x1 = frame.x(hist.edges[o + 1]);
        let top = y(fraction);
        let _ = writeln!(
            out,
            "<rect class=\"bin\" data-fraction=\"{fraction}\" x=\"{:.2}\" y=\"{top:.2}\" \
             width=\"{:.2}\" height=\"{:.2}\" fill=\"#4878cf\" fill-opacity=\"0.75\"/>",
            x0 + 0.5,
            (x1 - x0 - 1.0).max(0.5),
            BOTTOM - top,
        );
    }
    for (o, &fitted) in report.fit.fitted_fractions.iter().enumerate() {
        let bin = hist.n_min + o as i64;
        let cx = frame.x(hist.midpoints[o]);
        let cy = y(fitted);
        if report.window.contains_bin(bin) {
            let _ = writeln!(
                out,
                "<rect class=\"counterfactual\" data-fitted=\"{fitted}\" x=\"{:.2}\" y=\"{:.2}\" \
                 width=\"8\" height=\"8\" fill=\"#d62728\"/>",
                cx - 4.0,
                cy - 4.0,
            );
        } else {
            let _ = writeln!(
                out,
                "<circle class=\"fitted\" data-fitted=\"{fitted}\" cx=\"{cx:.2}\" cy=\"{cy:.2}\" \
                 r=\"4\" fill=\"#ff8c00\"/>"
            );
        }
    }
    threshold_line(&mut out, &frame);
    out.push_str("</svg>\n");
    out
}

/// One cell per bin colored by the excess n_i - n̂_i (darker = more observed
/// transactions than the counterfactual predicts).
pub fn excess_svg(report: &AnalysisReport) -> String {
    let hist = &report.histogram;
    let frame = Frame::new(report);
    let n = hist.total_n as f64;
    let excess: Vec<f64> = hist
        .fractions
        .iter()
        .zip(&report.fit.fitted_fractions)
        .map(|(obs, fitted)| (obs - fitted) * n)
        .collect();
    let lo = excess.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let hi = excess.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let span = (hi - lo).max(1e-12);

    let mut out = String::new();
    open_svg(
        &mut out,
        "Excess transactions per bin (observed minus counterfactual)",
    );
    axis(&mut out, &frame);
    for (o, &e) in excess.iter().enumerate() {
        let x0 = frame.x(hist.edges[o]);
        let x1 = frame.x(hist.edges[o + 1]);
        // white -> dark purple ramp
        let t = (e - lo) / span;
        let r = (255.0 - t * (255.0 - 45.0)) as u8;
        let g = (255.0 - t * (255.0 - 10.0)) as u8;
        let b = (255.0 - t * (255.0 - 87.0)) as u8;
        let _ = writeln!(
            out,
            "<rect class=\"excess\" data-excess=\"{e}\" x=\"{:.2}\" y=\"{TOP}\" width=\"{:.2}\" \
             height=\"{:.2}\" fill=\"rgb({r},{g},{b})\" stroke=\"#999\" stroke-width=\"0.5\"/>",
            x0,
            x1 - x0,
            BOTTOM - TOP,
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.0}\" text-anchor=\"middle\" font-size=\"11\">{e:.0}</text>",
            (x0 + x1) / 2.0,
            BOTTOM + 40.0,
        );
    }
    threshold_line(&mut out, &frame);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use smurfscan::{analyze, AnalyzeOptions, TransactionSample};

    fn report() -> AnalysisReport {
        let config = smurfscan::SimulationConfig {
            n_draws: 6000,
            mean: -2.2,
            stddev: 1.6,
            seed: 5,
        };
        let amounts: Vec<f64> = smurfscan::simulate_draws(&config)
            .unwrap()
            .iter()
            .map(|z| 50_000.0 * z.exp())
            .collect();
        let sample = TransactionSample::new(amounts, 50_000.0).unwrap();
        let options = AnalyzeOptions {
            replicate_count: 120,
            ..AnalyzeOptions::default()
        };
        analyze(&sample, &options).unwrap()
    }

    #[test]
    fn histogram_svg_carries_every_bin() {
        let report = report();
        let svg = histogram_svg(&report);
        assert_eq!(
            svg.matches("class=\"bin\"").count(),
            report.histogram.bin_count()
        );
        let markers = svg.matches("class=\"fitted\"").count()
            + svg.matches("class=\"counterfactual\"").count();
        assert_eq!(markers, report.histogram.bin_count());
        assert_eq!(svg.matches("class=\"threshold\"").count(), 1);
        assert!(svg.contains("stroke-dasharray"));
    }

    #[test]
    fn data_attributes_are_exact() {
        let report = report();
        let svg = histogram_svg(&report);
        let mut fractions = Vec::new();
        for part in svg.split("data-fraction=\"").skip(1) {
            let end = part.find('"').unwrap();
            fractions.push(part[..end].parse::<f64>().unwrap());
        }
        assert_eq!(fractions, report.histogram.fractions);
    }

    #[test]
    fn excess_svg_has_one_cell_per_bin() {
        let report = report();
        let svg = excess_svg(&report);
        assert_eq!(
            svg.matches("class=\"excess\"").count(),
            report.histogram.bin_count()
        );
        assert_eq!(svg.matches("class=\"threshold\"").count(), 1);
    }
}
