//! Plain-text writers for sampled paths, traces, and fitted summaries.
//!
//! All writers emit deterministic output for identical inputs; floats use
//! the shortest round-trip decimal form.

use crate::flow::{RealTrajectory, TimeChangeRecord};
use crate::geometry::{DimensionFit, HullApprox};
use crate::stable::LevyPath;
use std::collections::HashSet;
use std::io::{self, Write};

pub fn write_levy_path_csv<W: Write>(out: &mut W, path: &LevyPath) -> io::Result<()> {
    let jump_times: HashSet<u64> = path.large_jumps.iter().map(|j| j.time.to_bits()).collect();
    writeln!(out, "t,w,is_large_jump")?;
    for (t, w) in path.times.iter().zip(&path.values) {
        let flag = jump_times.contains(&t.to_bits()) as u8;
        writeln!(out, "{t},{w},{flag}")?;
    }
    Ok(())
}

pub fn write_hull_csv<W: Write>(out: &mut W, hull: &HullApprox) -> io::Result<()> {
    writeln!(out, "t,re,im,is_jump")?;
    for ((t, p), flag) in hull.times.iter().zip(&hull.points).zip(&hull.jump_flags) {
        writeln!(out, "{t},{},{},{}", p.re, p.im, *flag as u8)?;
    }
    Ok(())
}

pub fn write_real_trajectory_csv<W: Write>(out: &mut W, traj: &RealTrajectory) -> io::Result<()> {
    writeln!(out, "t,x")?;
    for (t, x) in &traj.samples {
        writeln!(out, "{t},{x}")?;
    }
    Ok(())
}

pub fn write_flow_records_csv<W: Write>(out: &mut W, records: &[TimeChangeRecord]) -> io::Result<()> {
    writeln!(out, "u,gamma_u,log_deriv,censored")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{}",
            r.u,
            r.gamma_u,
            r.log_deriv_at_gamma,
            r.censored as u8
        )?;
    }
    Ok(())
}

pub fn write_dimension_fit_csv<W: Write>(out: &mut W, fit: &DimensionFit) -> io::Result<()> {
    writeln!(out, "eps,count")?;
    for (e, n) in fit.scales.iter().zip(&fit.counts) {
        writeln!(out, "{e},{n}")?;
    }
    Ok(())
}

/// Renders the trace as SVG polylines, one per continuous stretch; jump
/// intervals break the polyline so branches stay visually detached.
pub fn write_hull_svg<W: Write>(out: &mut W, hull: &HullApprox) -> io::Result<()> {
    let (mut min_re, mut max_re, mut max_im) = (0.0f64, 0.0f64, 0.0f64);
    for p in &hull.points {
        min_re = min_re.min(p.re);
        max_re = max_re.max(p.re);
        max_im = max_im.max(p.im);
    }
    let span = (max_re - min_re).max(max_im).max(1e-6);
    let margin = 0.05 * span;
    let (x0, y0) = (min_re - margin, -max_im - margin);
    let (w, h) = (max_re - min_re + 2.0 * margin, max_im + 2.0 * margin);
    let stroke = span / 400.0;
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0} {y0} {w} {h}">"#
    )?;
    writeln!(
        out,
        r##"<line x1="{x0}" y1="0" x2="{}" y2="0" stroke="#888" stroke-width="{stroke}"/>"##,
        x0 + w
    )?;
    let mut run: Vec<String> = Vec::new();
    let flush = |run: &mut Vec<String>, out: &mut W| -> io::Result<()> {
        if run.len() >= 2 {
            writeln!(
                out,
                r##"<polyline fill="none" stroke="#1a3a6b" stroke-width="{stroke}" points="{}"/>"##,
                run.join(" ")
            )?;
        }
        run.clear();
        Ok(())
    };
    for (k, p) in hull.points.iter().enumerate() {
        if hull.jump_flags[k] {
            flush(&mut run, out)?;
        }
        run.push(format!("{},{}", p.re, -p.im));
    }
    flush(&mut run, out)?;
    writeln!(out, "</svg>")
}
