//! SVG figures drawn from the rows already written to CSV.

use anyhow::{anyhow, Result};
use plotters::prelude::*;
use std::path::Path;

use crate::commands::{EchoRow, FitRow, StatsRow, TransferRow};

const SIZE: (u32, u32) = (800, 560);
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn line_chart(path: &Path, caption: &str, x_desc: &str, y_desc: &str, series: &[(String, Vec<(f64, f64)>)]) -> Result<()> {
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let pad = 0.05 * (y1 - y0);
    let mut chart = ChartBuilder::on(&root)
        .caption(caption, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, (y0 - pad)..(y1 + pad))
        .map_err(|e| anyhow!("{e}"))?;
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc(y_desc)
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(|e| anyhow!("{e}"))?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    root.present().map_err(|e| anyhow!("{e}"))?;
    Ok(())
}

pub fn echo_curves(path: &Path, rows: &[EchoRow]) -> Result<()> {
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for row in rows {
        let name = format!("{} ({})", row.series, row.mode);
        match series.iter_mut().find(|s| s.0 == name) {
            Some(s) => s.1.push((row.t, row.f_ec)),
            None => series.push((name, vec![(row.t, row.f_ec)])),
        }
    }
    let n = rows.first().map_or(0, |r| r.n);
    line_chart(path, &format!("Echo fidelity, n = {n}"), "t", "f_ec", &series)
}

pub fn transfer_curve(path: &Path, rows: &[TransferRow]) -> Result<()> {
    let Some(first) = rows.first() else { return Ok(()) };
    let pts = rows.iter().map(|r| (r.t, r.f_tr)).collect();
    line_chart(
        path,
        &format!("Transfer fidelity, n = {}", first.n),
        "t",
        "f_tr",
        &[(first.engine.to_string(), pts)],
    )
}

/// Mean infidelity against `v` on log axes, with each length's fit line.
pub fn loglog(path: &Path, stats: &[StatsRow], fits: &[FitRow]) -> Result<()> {
    let positive: Vec<&StatsRow> = stats.iter().filter(|s| s.mean_infidelity > 0.0 && s.v > 0.0).collect();
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
    let (v0, v1) = bounds(positive.iter().map(|s| s.v));
    let (i0, i1) = bounds(positive.iter().map(|s| s.mean_infidelity));
    let (v0, v1) = (v0.max(1e-300), v1.max(v0 * 10.0));
    let (i0, i1) = (i0.max(1e-300) / 2.0, (i1 * 2.0).max(i0 * 10.0));
    let mut chart = ChartBuilder::on(&root)
        .caption("Infidelity vs gate noise", ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d((v0..v1).log_scale(), (i0..i1).log_scale())
        .map_err(|e| anyhow!("{e}"))?;
    chart
        .configure_mesh()
        .x_desc("v")
        .y_desc("mean infidelity")
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    for (k, fit) in fits.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = positive
            .iter()
            .filter(|s| s.n == fit.n)
            .map(|s| (s.v, s.mean_infidelity))
            .collect();
        chart
            .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
            .map_err(|e| anyhow!("{e}"))?
            .label(format!("n = {}", fit.n))
            .legend(move |(x, y)| Circle::new((x + 10, y), 3, color.filled()));
        if let (Some(a), Some(b)) = (fit.a, fit.b) {
            let line = [v0, v1].map(|v| (v, (a + b * v.ln()).exp()));
            chart
                .draw_series(LineSeries::new(line, color))
                .map_err(|e| anyhow!("{e}"))?;
        }
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    root.present().map_err(|e| anyhow!("{e}"))?;
    Ok(())
}

/// Fitted slope against chain length, optionally split by parity.
pub fn slopes(path: &Path, fits: &[FitRow], by_parity: bool) -> Result<()> {
    let pts: Vec<(usize, f64)> = fits.iter().filter_map(|f| f.b.map(|b| (f.n, b))).collect();
    let to_series = |keep: &dyn Fn(usize) -> bool| -> Vec<(f64, f64)> {
        pts.iter().filter(|p| keep(p.0)).map(|&(n, b)| (n as f64, b)).collect()
    };
    let series = if by_parity {
        vec![
            ("even n".to_owned(), to_series(&|n| n % 2 == 0)),
            ("odd n".to_owned(), to_series(&|n| n % 2 == 1)),
        ]
    } else {
        vec![("b(n)".to_owned(), to_series(&|_| true))]
    };
    line_chart(path, "Infidelity exponent", "n", "b", &series)
}
