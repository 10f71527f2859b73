//! CSV emission with reproducibility metadata, plus minimal static SVG
//! line plots. Every file starts with a metadata block sufficient to
//! reproduce it: config hash, seed, RNG identifier, code version.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::experiment::{MartingaleReport, MomentTable, SllnReport};
use crate::particle::TrajectoryRecord;

/// FNV-1a over a canonical string rendering of the configuration.
pub fn config_hash(canonical: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in canonical.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Metadata block prefixed to every output file.
#[derive(Clone, Debug)]
pub struct RunMetadata {
    pub config_hash: u64,
    pub seed: u64,
    pub epsilon: f64,
    pub max_particles: usize,
    pub n_paths: usize,
}

impl RunMetadata {
    pub fn header(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# config_hash: {:016x}", self.config_hash);
        let _ = writeln!(s, "# seed: {}", self.seed);
        let _ = writeln!(s, "# epsilon: {}", self.epsilon);
        let _ = writeln!(s, "# max_particles: {}", self.max_particles);
        let _ = writeln!(s, "# n_paths: {}", self.n_paths);
        let _ = writeln!(s, "# rng: {}", crate::rng::RNG_ID);
        let _ = writeln!(s, "# version: {}", env!("CARGO_PKG_VERSION"));
        s
    }
}

/// Long-format trajectory CSV: path_id, t, observable name, value.
pub fn write_trajectories(
    path: &Path,
    meta: &RunMetadata,
    records: &[TrajectoryRecord],
    observable_names: &[String],
) -> Result<()> {
    let mut s = meta.header();
    s.push_str("path_id,t,observable,value\n");
    for r in records {
        for (k, &t) in r.times.iter().enumerate() {
            for (j, name) in observable_names.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    r.path_id, t, name, r.observable_values[j][k]
                );
            }
            let _ = writeln!(s, "{},{},W,{}", r.path_id, t, r.w_values[k]);
            let _ = writeln!(s, "{},{},particles,{}", r.path_id, t, r.particle_counts[k]);
            let _ = writeln!(
                s,
                "{},{},extinct,{}",
                r.path_id,
                t,
                if r.extinct[k] { 1 } else { 0 }
            );
        }
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn write_moment_table(path: &Path, meta: &RunMetadata, table: &MomentTable) -> Result<()> {
    let mut s = meta.header();
    s.push_str("observable,t,quantity,empirical,oracle,z\n");
    for row in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            row.f_name, row.t, row.quantity, row.empirical, row.oracle, row.z
        );
    }
    let _ = writeln!(s, "# pass_fraction: {}", table.pass_fraction());
    fs::write(path, s)?;
    Ok(())
}

pub fn write_martingale_report(
    path: &Path,
    meta: &RunMetadata,
    report: &MartingaleReport,
) -> Result<()> {
    let mut s = meta.header();
    s.push_str("t,mean_w,se_w,z\n");
    for row in &report.rows {
        let _ = writeln!(s, "{},{},{},{}", row.t, row.mean_w, row.se_w, row.z);
    }
    let _ = writeln!(
        s,
        "# w2_final: empirical {} se {} oracle {} z {}",
        report.w2_final_empirical, report.w2_final_se, report.w2_final_oracle, report.w2_z
    );
    let _ = writeln!(
        s,
        "# survival: fraction {} se {} target {} z {}",
        report.survival_fraction, report.survival_se, report.survival_target, report.survival_z
    );
    fs::write(path, s)?;
    Ok(())
}

pub fn write_slln_report(path: &Path, meta: &RunMetadata, report: &SllnReport) -> Result<()> {
    let mut s = meta.header();
    let _ = writeln!(s, "# survival_fraction: {}", report.survival_fraction);
    let _ = writeln!(s, "# degenerate: {}", report.degenerate);
    s.push_str(
        "observable,t,scaled_mean,scaled_se,ratio_mean,ratio_se,ratio_iqr,ratio_mad,target,target_provenance\n",
    );
    for f in &report.functions {
        for row in &f.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                f.f_name,
                row.t,
                row.scaled_mean,
                row.scaled_se,
                row.ratio_mean,
                row.ratio_se,
                row.ratio_iqr,
                row.ratio_mad,
                f.target,
                f.target_provenance
            );
        }
    }
    fs::write(path, s)?;
    Ok(())
}

/// Minimal polyline SVG of one or more series over a common time grid.
pub fn write_svg_lines(
    path: &Path,
    title: &str,
    times: &[f64],
    series: &[(&str, Vec<f64>)],
) -> Result<()> {
    let (w, h, margin) = (720.0, 400.0, 50.0);
    let finite = |v: &f64| v.is_finite();
    let ys: Vec<f64> = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .filter(finite)
        .collect();
    let (tmin, tmax) = (
        times.first().copied().unwrap_or(0.0),
        times.last().copied().unwrap_or(1.0),
    );
    let ymin = ys.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let ymax = ys
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        .max(1e-12);
    let sx = |t: f64| margin + (t - tmin) / (tmax - tmin).max(1e-12) * (w - 2.0 * margin);
    let sy = |v: f64| h - margin - (v - ymin) / (ymax - ymin).max(1e-12) * (h - 2.0 * margin);
    let palette = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2",
    ];
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"14\">{title}</text>",
        margin
    );
    // axes
    let _ = writeln!(
        s,
        "<line x1=\"{m}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>",
        m = margin,
        y0 = h - margin,
        x1 = w - margin
    );
    let _ = writeln!(
        s,
        "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{y0}\" stroke=\"black\"/>",
        m = margin,
        y0 = h - margin
    );
    for (i, (name, values)) in series.iter().enumerate() {
        let color = palette[i % palette.len()];
        let pts: Vec<String> = times
            .iter()
            .zip(values)
            .filter(|(_, v)| v.is_finite())
            .map(|(&t, &v)| format!("{:.2},{:.2}", sx(t), sy(v)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" fill=\"{color}\">{name}</text>",
            w - margin + 4.0 - 160.0,
            margin + 16.0 * i as f64
        );
    }
    s.push_str("</svg>\n");
    fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash("model=inward-ou seed=42");
        let b = config_hash("model=inward-ou seed=42");
        let c = config_hash("model=inward-ou seed=43");
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn metadata_header_fields() {
        let meta = RunMetadata {
            config_hash: 0xabc,
            seed: 7,
            epsilon: 0.05,
            max_particles: 1000,
            n_paths: 10,
        };
        let h = meta.header();
        assert!(h.contains("# seed: 7"));
        assert!(h.contains("# rng: splitmix64-counter/v1"));
        assert!(h.contains("# version:"));
    }

    #[test]
    fn svg_writes_polyline() {
        let dir = std::env::temp_dir().join("supersim-svg-test");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("plot.svg");
        write_svg_lines(
            &p,
            "test",
            &[0.0, 1.0, 2.0],
            &[("a", vec![0.0, 1.0, 0.5]), ("b", vec![1.0, f64::NAN, 0.2])],
        )
        .unwrap();
        let s = std::fs::read_to_string(&p).unwrap();
        assert!(s.starts_with("<svg"));
        assert!(s.contains("polyline"));
    }
}
