//! Static report generation: four SVG panels per environment plus a
//! markdown summary.
//!
//! Panels follow the paper-style layout: learner return, clone return,
//! return gap, and bits per step on a log scale. Curves are smoothed with
//! a Gaussian kernel whose standard deviation is 2% of total training
//! steps; the solid line is the mean across seeds and the band one
//! standard deviation.

use super::ledger::RunMeta;
use crate::protocol::{RunLedger, Scheme};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no ledgers given")]
    Empty,
    #[error("mismatched ledgers: {0}")]
    Mismatched(String),
}

pub struct Report {
    pub svg: String,
    pub markdown: String,
}

fn scheme_color(s: Scheme) -> &'static str {
    match s {
        Scheme::Grasp => "#d62728",
        Scheme::Asc => "#1f77b4",
        Scheme::Fr => "#2ca02c",
        Scheme::Qr16 => "#9467bd",
        Scheme::Qr8 => "#ff7f0e",
        Scheme::Qr4 => "#8c564b",
    }
}

/// Gaussian-kernel smoothing at the sample positions. Weights are
/// normalized per point, so a constant series is preserved exactly.
pub fn gaussian_smooth(xs: &[f64], ys: &[f64], sigma: f64) -> Vec<f64> {
    assert_eq!(xs.len(), ys.len());
    if sigma <= 0.0 || xs.len() < 2 {
        return ys.to_vec();
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    xs.iter()
        .map(|&xi| {
            let mut num = 0.0;
            let mut den = 0.0;
            for (&xj, &yj) in xs.iter().zip(ys) {
                let d = xi - xj;
                let w = (-d * d * inv).exp();
                num += w * yj;
                den += w;
            }
            num / den
        })
        .collect()
}

struct Series {
    label: String,
    color: &'static str,
    xs: Vec<f64>,
    mean: Vec<f64>,
    std: Vec<f64>,
}

fn mean_std_across(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let len = rows[0].len();
    let mut mean = vec![0.0; len];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; len];
    for r in rows {
        for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in &mut std {
        *s = s.sqrt();
    }
    (mean, std)
}

/// Per-epoch mean of the summed per-step bits of one ledger.
fn bits_per_step_series(ledger: &RunLedger) -> (Vec<f64>, Vec<f64>) {
    let b = ledger.batch_size;
    let epochs = ledger.total_steps / b;
    let mut sums = vec![0.0; epochs as usize];
    for row in &ledger.bit_rows {
        sums[(row.step / b) as usize] += row.bits_ideal;
    }
    let xs = (0..epochs).map(|e| ((e + 1) * b) as f64).collect();
    let ys = sums.into_iter().map(|s| s / b as f64).collect();
    (xs, ys)
}

/// Group ledgers by scheme and build the four panels' series.
pub fn build_report(runs: &[(RunLedger, Option<RunMeta>)]) -> Result<Report, ReportError> {
    if runs.is_empty() {
        return Err(ReportError::Empty);
    }
    let env = &runs[0].0.env;
    let total_steps = runs[0].0.total_steps;
    for (l, _) in runs {
        if &l.env != env {
            return Err(ReportError::Mismatched(format!(
                "environments differ: {env} vs {}",
                l.env
            )));
        }
        if l.total_steps != total_steps {
            return Err(ReportError::Mismatched("total_steps differ".into()));
        }
    }
    let sigma = 0.02 * total_steps as f64;

    let mut schemes: Vec<Scheme> = Vec::new();
    for (l, _) in runs {
        if !schemes.contains(&l.scheme) {
            schemes.push(l.scheme);
        }
    }

    let mut ret_series = Vec::new();
    let mut clone_series = Vec::new();
    let mut gap_series = Vec::new();
    let mut bits_series = Vec::new();

    for &scheme in &schemes {
        let group: Vec<&RunLedger> = runs
            .iter()
            .map(|(l, _)| l)
            .filter(|l| l.scheme == scheme)
            .collect();
        let xs: Vec<f64> = group[0].eval_rows.iter().map(|r| r.step as f64).collect();
        for l in &group {
            let x2: Vec<f64> = l.eval_rows.iter().map(|r| r.step as f64).collect();
            if x2 != xs {
                return Err(ReportError::Mismatched(
                    "evaluation cadences differ within a scheme".into(),
                ));
            }
        }
        let smooth = |rows: Vec<Vec<f64>>, xs: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let smoothed: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| gaussian_smooth(xs, r, sigma))
                .collect();
            mean_std_across(&smoothed)
        };

        let returns: Vec<Vec<f64>> = group
            .iter()
            .map(|l| l.eval_rows.iter().map(|r| r.controller_return_mean).collect())
            .collect();
        let (m, s) = smooth(returns, &xs);
        ret_series.push(Series {
            label: scheme.name().to_string(),
            color: scheme_color(scheme),
            xs: xs.clone(),
            mean: m,
            std: s,
        });

        if group[0].eval_rows[0].clone_return_mean.is_some() {
            let clones: Vec<Vec<f64>> = group
                .iter()
                .map(|l| {
                    l.eval_rows
                        .iter()
                        .map(|r| r.clone_return_mean.unwrap_or(f64::NAN))
                        .collect()
                })
                .collect();
            let (m, s) = smooth(clones.clone(), &xs);
            clone_series.push(Series {
                label: scheme.name().to_string(),
                color: scheme_color(scheme),
                xs: xs.clone(),
                mean: m,
                std: s,
            });
            let gaps: Vec<Vec<f64>> = group
                .iter()
                .map(|l| {
                    l.eval_rows
                        .iter()
                        .map(|r| r.controller_return_mean - r.clone_return_mean.unwrap_or(f64::NAN))
                        .collect()
                })
                .collect();
            let (m, s) = smooth(gaps, &xs);
            gap_series.push(Series {
                label: scheme.name().to_string(),
                color: scheme_color(scheme),
                xs: xs.clone(),
                mean: m,
                std: s,
            });
        }

        let bits: Vec<(Vec<f64>, Vec<f64>)> =
            group.iter().map(|l| bits_per_step_series(l)).collect();
        let bxs = bits[0].0.clone();
        let rows: Vec<Vec<f64>> = bits.into_iter().map(|(_, ys)| ys).collect();
        let (m, s) = smooth(rows, &bxs);
        bits_series.push(Series {
            label: scheme.name().to_string(),
            color: scheme_color(scheme),
            xs: bxs,
            mean: m,
            std: s,
        });
    }

    let panels = [
        panel_svg(&format!("{env}: return"), &ret_series, false),
        panel_svg(&format!("{env}: clone return"), &clone_series, false),
        panel_svg(&format!("{env}: return gap"), &gap_series, false),
        panel_svg(&format!("{env}: bits/step"), &bits_series, true),
    ];
    let svg = compose_panels(&panels);

    let mut md = String::new();
    md.push_str(&format!(
        "# {env} ({} runs, {} schemes, {total_steps} steps)\n\n",
        runs.len(),
        schemes.len()
    ));
    md.push_str("| scheme | final return | final clone return | final bits/step (ideal) | total ideal bits |\n");
    md.push_str("|---|---|---|---|---|\n");
    for &scheme in &schemes {
        let group: Vec<&RunLedger> = runs
            .iter()
            .map(|(l, _)| l)
            .filter(|l| l.scheme == scheme)
            .collect();
        let finals: Vec<f64> = group
            .iter()
            .map(|l| l.final_eval().unwrap().controller_return_mean)
            .collect();
        let fmean = finals.iter().sum::<f64>() / finals.len() as f64;
        let clones: Vec<f64> = group
            .iter()
            .filter_map(|l| l.final_eval().unwrap().clone_return_mean)
            .collect();
        let cstr = if clones.is_empty() {
            "-".to_string()
        } else {
            format!("{:.4}", clones.iter().sum::<f64>() / clones.len() as f64)
        };
        let last_quarter: f64 = group
            .iter()
            .map(|l| l.mean_ideal_bits_in(l.total_steps * 3 / 4, l.total_steps) * l.num_actors as f64)
            .sum::<f64>()
            / group.len() as f64;
        let total: f64 =
            group.iter().map(|l| l.total_ideal_bits()).sum::<f64>() / group.len() as f64;
        md.push_str(&format!(
            "| {scheme} | {fmean:.4} | {cstr} | {last_quarter:.3} | {total:.1} |\n"
        ));
    }

    Ok(Report { svg, markdown: md })
}

// ── SVG drawing ─────────────────────────────────────────────────

const PANEL_W: f64 = 340.0;
const PANEL_H: f64 = 250.0;
const ML: f64 = 52.0;
const MR: f64 = 12.0;
const MT: f64 = 26.0;
const MB: f64 = 34.0;

fn panel_svg(title: &str, series: &[Series], log_y: bool) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{PANEL_W}\" height=\"{PANEL_H}\" fill=\"white\" stroke=\"none\"/>\n"
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"16\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
        PANEL_W / 2.0,
        title
    ));
    if series.is_empty() {
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\" fill=\"#888\" font-family=\"sans-serif\">no data</text>\n",
            PANEL_W / 2.0,
            PANEL_H / 2.0
        ));
        return s;
    }

    let ty = |y: f64| if log_y { y.max(1e-6).log10() } else { y };
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for ser in series {
        for (&x, (&m, &sd)) in ser.xs.iter().zip(ser.mean.iter().zip(&ser.std)) {
            if !m.is_finite() {
                continue;
            }
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(ty(m - sd)).min(ty(m));
            y_max = y_max.max(ty(m + sd)).max(ty(m));
        }
    }
    if !(x_min.is_finite() && y_min.is_finite()) {
        return s;
    }
    if (y_max - y_min).abs() < 1e-12 {
        y_min -= 1.0;
        y_max += 1.0;
    }
    if (x_max - x_min).abs() < 1e-12 {
        x_max += 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    let px = |x: f64| ML + (x - x_min) / (x_max - x_min) * (PANEL_W - ML - MR);
    let py = |y: f64| PANEL_H - MB - (ty(y) - y_min) / (y_max - y_min) * (PANEL_H - MT - MB);

    // axes
    s.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333\" stroke-width=\"1\"/>\n",
        PANEL_H - MB,
        PANEL_W - MR,
        PANEL_H - MB
    ));
    s.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"#333\" stroke-width=\"1\"/>\n",
        PANEL_H - MB
    ));
    // ticks
    for k in 0..=3 {
        let xv = x_min + (x_max - x_min) * k as f64 / 3.0;
        let x = px(xv);
        s.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"#333\"/>\n",
            PANEL_H - MB,
            PANEL_H - MB + 4.0
        ));
        s.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-size=\"9\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
            PANEL_H - MB + 14.0,
            format_tick(xv)
        ));
    }
    for k in 0..=3 {
        let yt = y_min + (y_max - y_min) * k as f64 / 3.0;
        let y = PANEL_H - MB - (yt - y_min) / (y_max - y_min) * (PANEL_H - MT - MB);
        let label = if log_y {
            format_tick(10f64.powf(yt))
        } else {
            format_tick(yt)
        };
        s.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{ML}\" y2=\"{y}\" stroke=\"#333\"/>\n",
            ML - 4.0
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"9\" text-anchor=\"end\" font-family=\"sans-serif\">{label}</text>\n",
            ML - 6.0,
            y + 3.0
        ));
    }

    for ser in series {
        // band
        let mut fwd = Vec::new();
        let mut bwd = Vec::new();
        for (&x, (&m, &sd)) in ser.xs.iter().zip(ser.mean.iter().zip(&ser.std)) {
            if !m.is_finite() {
                continue;
            }
            fwd.push(format!("{:.2},{:.2}", px(x), py(m + sd)));
            bwd.push(format!("{:.2},{:.2}", px(x), py(m - sd)));
        }
        bwd.reverse();
        if fwd.len() > 1 {
            s.push_str(&format!(
                "<polygon points=\"{} {}\" fill=\"{}\" opacity=\"0.15\" stroke=\"none\"/>\n",
                fwd.join(" "),
                bwd.join(" "),
                ser.color
            ));
        }
        // mean line
        let pts: Vec<String> = ser
            .xs
            .iter()
            .zip(&ser.mean)
            .filter(|(_, m)| m.is_finite())
            .map(|(&x, &m)| format!("{:.2},{:.2}", px(x), py(m)))
            .collect();
        s.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"/>\n",
            pts.join(" "),
            ser.color
        ));
    }

    // legend
    for (i, ser) in series.iter().enumerate() {
        let y = MT + 10.0 + i as f64 * 12.0;
        s.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            PANEL_W - MR - 58.0,
            PANEL_W - MR - 44.0,
            ser.color
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"9\" font-family=\"sans-serif\">{}</text>\n",
            PANEL_W - MR - 40.0,
            y + 3.0,
            ser.label
        ));
    }
    s
}

fn format_tick(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".to_string()
    } else if a >= 10_000.0 || a < 0.01 {
        format!("{v:.0e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn compose_panels(panels: &[String; 4]) -> String {
    let total_w = PANEL_W * 2.0 + 20.0;
    let total_h = PANEL_H * 2.0 + 20.0;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{total_w}\" height=\"{total_h}\" viewBox=\"0 0 {total_w} {total_h}\">\n<rect width=\"{total_w}\" height=\"{total_h}\" fill=\"white\"/>\n"
    );
    for (i, p) in panels.iter().enumerate() {
        let x = (i % 2) as f64 * (PANEL_W + 20.0);
        let y = (i / 2) as f64 * (PANEL_H + 20.0);
        svg.push_str(&format!("<g transform=\"translate({x},{y})\">\n{p}</g>\n"));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{run_experiment, RunConfig, Scheme};

    #[test]
    fn smoothing_preserves_constant_series() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 10.0).collect();
        let ys = vec![3.25; 50];
        let sm = gaussian_smooth(&xs, &ys, 25.0);
        for v in sm {
            assert!((v - 3.25).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_reduces_oscillation() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let ys: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let sm = gaussian_smooth(&xs, &ys, 5.0);
        let amp = sm.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(amp < 0.2, "amplitude after smoothing: {amp}");
    }

    fn tiny_run(scheme: Scheme, seed: u64) -> RunLedger {
        run_experiment(&RunConfig {
            scheme,
            run_seed: seed,
            total_steps: 256,
            batch_size: 128,
            eval_interval: 128,
            eval_episodes: 3,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn report_builds_for_mixed_schemes() {
        let runs = vec![
            (tiny_run(Scheme::Grasp, 1), None),
            (tiny_run(Scheme::Grasp, 2), None),
            (tiny_run(Scheme::Fr, 1), None),
        ];
        let report = build_report(&runs).unwrap();
        assert!(report.svg.starts_with("<svg"));
        assert!(report.svg.contains("bits/step"));
        assert!(report.markdown.contains("| grasp |"));
        assert!(report.markdown.contains("| fr |"));
    }

    #[test]
    fn single_seed_band_is_zero_width() {
        let runs = vec![(tiny_run(Scheme::Asc, 5), None)];
        let report = build_report(&runs).unwrap();
        assert!(report.svg.contains("polyline"));
    }

    #[test]
    fn mismatched_envs_rejected() {
        let a = tiny_run(Scheme::Fr, 1);
        let mut cfg = RunConfig {
            scheme: Scheme::Fr,
            env: "pointnav".into(),
            total_steps: 256,
            batch_size: 128,
            eval_interval: 128,
            eval_episodes: 3,
            ..Default::default()
        };
        cfg.run_seed = 1;
        let b = run_experiment(&cfg).unwrap();
        assert!(build_report(&[(a, None), (b, None)]).is_err());
    }
}
