//! Output emission: CSV tables, key-value summaries, SVG plots.
//!
//! Files are written to a temporary sibling and renamed into place, so a
//! failed run never leaves a half-written artifact behind. Numbers go out
//! with 12 significant digits — below every invariant tolerance, above
//! reformatting noise — and identical runs produce bit-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::experiments::{SweepResult, TimeSeries, TruncationPoint};
use crate::observables::TSIRELSON;
use crate::{Error, Result};

/// 12 significant digits.
pub fn format_number(v: f64) -> String {
    format!("{v:.11e}")
}

/// Write `contents` atomically: temp file first, rename into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    let outcome = std::fs::write(&tmp, contents).and_then(|()| std::fs::rename(&tmp, path));
    if let Err(e) = outcome {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::Io(e));
    }
    Ok(())
}

/// `time_series.csv`: one row per recorded sample.
pub fn write_time_series_csv(dir: &Path, ts: &TimeSeries) -> Result<PathBuf> {
    let mut text = String::from("t_us,fidelity,chsh,photon_number,p_gg,p_ee,p_odd\n");
    for r in &ts.records {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{}",
            format_number(r.t),
            format_number(r.fidelity),
            format_number(r.chsh),
            format_number(r.photon_number),
            format_number(r.p_gg),
            format_number(r.p_ee),
            format_number(r.p_odd),
        );
    }
    let path = dir.join("time_series.csv");
    write_atomic(&path, &text)?;
    Ok(path)
}

/// `sweep.csv`: long format, one row per grid point.
pub fn write_sweep_csv(dir: &Path, sweep: &SweepResult) -> Result<PathBuf> {
    let mut text = String::from("nbar,omega_nbar_over_kappa,fidelity,chsh\n");
    for (i, &nbar) in sweep.nbar_values.iter().enumerate() {
        for (j, &ratio) in sweep.omega_ratio_values.iter().enumerate() {
            let _ = writeln!(
                text,
                "{},{},{},{}",
                format_number(nbar),
                format_number(ratio),
                format_number(sweep.fidelity[[i, j]]),
                format_number(sweep.chsh[[i, j]]),
            );
        }
    }
    let path = dir.join("sweep.csv");
    write_atomic(&path, &text)?;
    Ok(path)
}

/// `truncation.csv`: the convergence table.
pub fn write_truncation_csv(dir: &Path, table: &[TruncationPoint]) -> Result<PathBuf> {
    let mut text = String::from("n_cav,steady_fidelity,valid\n");
    for p in table {
        let fidelity = p.steady_fidelity.map(format_number).unwrap_or_else(|| "nan".into());
        let _ = writeln!(text, "{},{},{}", p.n_cav, fidelity, p.valid);
    }
    let path = dir.join("truncation.csv");
    write_atomic(&path, &text)?;
    Ok(path)
}

/// `summary.txt`: `key: value` lines.
pub fn write_summary(dir: &Path, entries: &[(String, String)]) -> Result<PathBuf> {
    let mut text = String::new();
    for (key, value) in entries {
        let _ = writeln!(text, "{key}: {value}");
    }
    let path = dir.join("summary.txt");
    write_atomic(&path, &text)?;
    Ok(path)
}

/// `time_series.svg`: fidelity (left axis) and CHSH (right axis) vs time,
/// with horizontal reference lines at the classical bound 2 and at 2√2.
pub fn plot_time_series(dir: &Path, ts: &TimeSeries) -> Result<PathBuf> {
    let path = dir.join("time_series.svg");
    std::fs::create_dir_all(dir)?;
    let t_max = ts.records.last().map(|r| r.t).unwrap_or(1.0).max(1e-9);
    {
        let root = SVGBackend::new(&path, (900, 540)).into_drawing_area();
        root.fill(&WHITE).map_err(draw_err)?;
        let mut chart = ChartBuilder::on(&root)
            .margin(18)
            .x_label_area_size(42)
            .y_label_area_size(54)
            .right_y_label_area_size(54)
            .caption("Bell-state stabilization", ("sans-serif", 22))
            .build_cartesian_2d(0.0..t_max, 0.0..1.0)
            .map_err(draw_err)?
            .set_secondary_coord(0.0..t_max, -0.2..3.0);

        chart
            .configure_mesh()
            .x_desc("t (µs)")
            .y_desc("fidelity to target Bell state")
            .disable_mesh()
            .draw()
            .map_err(draw_err)?;
        chart
            .configure_secondary_axes()
            .y_desc("CHSH correlation")
            .draw()
            .map_err(draw_err)?;

        chart
            .draw_series(LineSeries::new(
                ts.records.iter().map(|r| (r.t, r.fidelity)),
                &BLUE,
            ))
            .map_err(draw_err)?
            .label("fidelity")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], BLUE));
        chart
            .draw_secondary_series(LineSeries::new(
                ts.records.iter().map(|r| (r.t, r.chsh)),
                &RED,
            ))
            .map_err(draw_err)?
            .label("CHSH")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], RED));
        // classical bound and maximal violation
        chart
            .draw_secondary_series(LineSeries::new([(0.0, 2.0), (t_max, 2.0)], &GREEN))
            .map_err(draw_err)?
            .label("CHSH = 2")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], GREEN));
        chart
            .draw_secondary_series(LineSeries::new(
                [(0.0, TSIRELSON), (t_max, TSIRELSON)],
                &GREEN.mix(0.5),
            ))
            .map_err(draw_err)?
            .label("CHSH = 2√2")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], GREEN.mix(0.5)));

        chart
            .configure_series_labels()
            .border_style(BLACK)
            .background_style(WHITE.mix(0.85))
            .position(SeriesLabelPosition::LowerRight)
            .draw()
            .map_err(draw_err)?;
        root.present().map_err(draw_err)?;
    }
    Ok(path)
}

/// `sweep.svg`: steady-state fidelity heat map over the (Ωⁿ̄/κ, n̄) grid.
pub fn plot_sweep_heatmap(dir: &Path, sweep: &SweepResult) -> Result<PathBuf> {
    let path = dir.join("sweep.svg");
    std::fs::create_dir_all(dir)?;
    {
        let root = SVGBackend::new(&path, (820, 620)).into_drawing_area();
        root.fill(&WHITE).map_err(draw_err)?;

        let nx = sweep.omega_ratio_values.len();
        let ny = sweep.nbar_values.len();
        let mut chart = ChartBuilder::on(&root)
            .margin(18)
            .x_label_area_size(42)
            .y_label_area_size(48)
            .caption("steady-state fidelity", ("sans-serif", 22))
            .build_cartesian_2d(0.0..nx as f64, 0.0..ny as f64)
            .map_err(draw_err)?;
        chart
            .configure_mesh()
            .disable_mesh()
            .x_desc("Ω^n̄ / κ")
            .y_desc("n̄")
            .x_labels(nx)
            .y_labels(ny)
            .x_label_formatter(&|x| {
                let idx = x.floor() as usize;
                sweep
                    .omega_ratio_values
                    .get(idx)
                    .map(|v| format!("{v}"))
                    .unwrap_or_default()
            })
            .y_label_formatter(&|y| {
                let idx = y.floor() as usize;
                sweep.nbar_values.get(idx).map(|v| format!("{v}")).unwrap_or_default()
            })
            .draw()
            .map_err(draw_err)?;

        for (i, _) in sweep.nbar_values.iter().enumerate() {
            for (j, _) in sweep.omega_ratio_values.iter().enumerate() {
                let f = sweep.fidelity[[i, j]];
                let color = fidelity_color(f);
                chart
                    .draw_series(std::iter::once(Rectangle::new(
                        [(j as f64, i as f64), (j as f64 + 1.0, i as f64 + 1.0)],
                        color.filled(),
                    )))
                    .map_err(draw_err)?;
                let label = if f.is_nan() { "—".to_string() } else { format!("{f:.3}") };
                chart
                    .draw_series(std::iter::once(Text::new(
                        label,
                        (j as f64 + 0.28, i as f64 + 0.55),
                        ("sans-serif", 15).into_font().color(&BLACK),
                    )))
                    .map_err(draw_err)?;
            }
        }
        root.present().map_err(draw_err)?;
    }
    Ok(path)
}

/// Map fidelity in [0.5, 1.0] onto a cold→warm ramp; NaN renders grey.
fn fidelity_color(f: f64) -> RGBColor {
    if f.is_nan() {
        return RGBColor(170, 170, 170);
    }
    let x = ((f - 0.5) / 0.5).clamp(0.0, 1.0);
    let r = (255.0 * x) as u8;
    let b = (255.0 * (1.0 - x)) as u8;
    let g = (90.0 + 100.0 * x) as u8;
    RGBColor(r, g, b)
}

fn draw_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Io(std::io::Error::other(format!("plot rendering failed: {e}")))
}
