//! Result files: CSV tables, SVG plots, binary field snapshots and a JSON manifest with checksums.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wavepacket_core::direct::WaveField;
use wavepacket_core::envelope::EnvelopeGrid;
use wavepacket_core::grid::TensorGrid;
use wavepacket_core::C64;

use crate::config::ExperimentConfig;
use crate::fit::LineFit;
use crate::validation::{CheckOutcome, MemberResult, Runtimes, SweepFits, SweepResult};
use crate::{HarnessError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const ERROR_TABLE: &str = "error_vs_epsilon.csv";
pub const ERROR_PLOT: &str = "error_vs_epsilon.svg";

/// Caveats attached to every validation report.
pub const REPORT_NOTES: [&str; 2] = [
    "W is evaluated on a periodic box; non-periodic W relies on the boundary guard.",
    "Rates are fitted; the constants of the asymptotic estimates are not asserted.",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub epsilon: f64,
    pub summary: crate::validation::MemberSummary,
    pub runtimes: Runtimes,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: ExperimentConfig,
    pub ehrenfest_constant: f64,
    pub ehrenfest_horizon: Option<f64>,
    pub files: Vec<FileEntry>,
    pub fits: Option<SweepFits>,
    pub members: Vec<MemberReport>,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
    pub notes: Vec<String>,
    /// Free-form results of commands that produce no sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<serde_json::Value>,
}

/// Collects written files relative to an output directory.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&mut self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        self.files.push(PathBuf::from(rel));
        Ok(p)
    }

    /// Writes a CSV table with a header row.
    pub fn csv(&mut self, rel: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let path = self.path(rel)?;
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn entries(&self) -> Result<Vec<FileEntry>> {
        let mut out = Vec::new();
        for rel in &self.files {
            let mut bytes = Vec::new();
            fs::File::open(self.root.join(rel))?.read_to_end(&mut bytes)?;
            out.push(FileEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                bytes: bytes.len() as u64,
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
        Ok(out)
    }

    pub fn write_manifest(&self, manifest: &Manifest) -> Result<PathBuf> {
        let path = self.root.join(MANIFEST);
        let text = serde_json::to_string_pretty(manifest).map_err(|e| HarnessError::Io(e.to_string()))?;
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Shortest round-trip decimal, in scientific notation outside `[1e-4, 1e6)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e6).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// As [`num`], empty for missing values.
fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn axis_names(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|k| format!("{prefix}{k}")).collect()
}

/// Label for a member, e.g. `eps64` for ε = 1/64.
pub fn member_tag(epsilon: f64) -> String {
    format!("eps{}", (1.0 / epsilon).round() as u64)
}

/// Every table, plot and snapshot of a sweep, then the manifest.
pub fn emit_outputs(result: &SweepResult, dir: &Path, command: &str) -> Result<Manifest> {
    let mut out = OutputDir::create(dir)?;
    let d = result.config.dim;
    let with_data: Vec<&MemberResult> = result.members.iter().filter(|m| !m.trajectory.is_empty()).collect();
    if !with_data.is_empty() {
        write_error_table(&mut out, result)?;
    }
    if let Some(fit) = result.fits.corrected_final {
        plot_error_vs_epsilon(&mut out, result, fit)?;
    }
    for m in &with_data {
        let tag = member_tag(m.epsilon);
        write_trajectory(&mut out, &format!("trajectory_{tag}.csv"), d, m)?;
        write_observables(&mut out, &format!("observables_{tag}.csv"), d, m)?;
        write_corrector(&mut out, &format!("corrector_{tag}.csv"), m)?;
        for snap in &m.snapshots {
            write_envelope(&mut out, &format!("envelope_{tag}_t{}.csv", num(snap.t)), snap)?;
        }
        plot_member(&mut out, &tag, m)?;
        if result.config.direct.dump_fields {
            if let Some((psi, tilde)) = &m.fields {
                let p = out.path(&format!("fields/psi_{tag}.bin"))?;
                write_field_dump(&p, psi)?;
                let p = out.path(&format!("fields/psi_tilde_{tag}.bin"))?;
                write_field_dump(&p, tilde)?;
            }
        }
    }
    let manifest = Manifest {
        command: command.into(),
        config: result.config.clone(),
        ehrenfest_constant: result.config.ehrenfest_constant,
        ehrenfest_horizon: result.config.ehrenfest_horizon(),
        files: out.entries()?,
        fits: Some(result.fits.clone()),
        members: result
            .members
            .iter()
            .map(|m| MemberReport { epsilon: m.epsilon, summary: m.summary.clone(), runtimes: m.runtimes.clone(), error: m.error.clone() })
            .collect(),
        checks: result.checks.clone(),
        passed: result.passed(),
        notes: REPORT_NOTES.iter().map(|s| s.to_string()).collect(),
        report: None,
    };
    out.write_manifest(&manifest)?;
    Ok(manifest)
}

pub const ERROR_COLUMNS: [&str; 9] = [
    "epsilon",
    "corrected_final",
    "corrected_sup",
    "leading_final",
    "leading_sup",
    "expansion_final",
    "expansion_sup",
    "field_position_final",
    "field_position_sup",
];

fn write_error_table(out: &mut OutputDir, result: &SweepResult) -> Result<()> {
    let header: Vec<String> = ERROR_COLUMNS.iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = result
        .members
        .iter()
        .filter(|m| m.error.is_none())
        .map(|m| {
            let s = &m.summary;
            vec![
                num(m.epsilon),
                opt(s.corrector_final),
                opt(s.corrector_sup),
                opt(s.leading_final),
                opt(s.leading_sup),
                opt(s.expansion_final),
                opt(s.expansion_sup),
                opt(s.field_final),
                opt(s.field_sup),
            ]
        })
        .collect();
    out.csv(ERROR_TABLE, &header, &rows)
}

fn write_trajectory(out: &mut OutputDir, rel: &str, d: usize, m: &MemberResult) -> Result<()> {
    let mut header = vec!["t".to_string()];
    for p in ["q", "p", "Q", "P", "Qs"] {
        header.extend(axis_names(p, d));
    }
    header.extend(["S", "phi_B", "H_eps", "gap", "symplectic_residual"].map(String::from));
    let rows: Vec<Vec<String>> = m
        .trajectory
        .iter()
        .map(|r| {
            let mut row = vec![num(r.t)];
            for v in [&r.q, &r.p, &r.big_q, &r.big_p, &r.qs] {
                row.extend(v.iter().map(|x| num(*x)));
            }
            row.extend([r.action, r.phi_b, r.h_eps, r.gap, r.symplectic_residual].map(num));
            row
        })
        .collect();
    out.csv(rel, &header, &rows)
}

fn write_observables(out: &mut OutputDir, rel: &str, d: usize, m: &MemberResult) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(axis_names("Q_ansatz", d));
    header.extend(axis_names("P_ansatz", d));
    header.extend(axis_names("Q_field", d));
    header.extend(["N", "residual_Q", "residual_P", "residual_field"].map(String::from));
    let rows: Vec<Vec<String>> = m
        .checkpoints
        .iter()
        .map(|r| {
            let mut row = vec![num(r.t)];
            row.extend(r.q_ansatz.iter().map(|x| num(*x)));
            row.extend(r.p_ansatz.iter().map(|x| num(*x)));
            match &r.q_field {
                Some(q) => row.extend(q.iter().map(|x| num(*x))),
                None => row.extend(std::iter::repeat_n(String::new(), d)),
            }
            row.extend([num(r.norm), num(r.expansion_residual), num(r.momentum_residual), opt(r.field_residual)]);
            row
        })
        .collect();
    out.csv(rel, &header, &rows)
}

fn write_corrector(out: &mut OutputDir, rel: &str, m: &MemberResult) -> Result<()> {
    let header = ["t", "corrector", "corrector_leading"].map(String::from);
    let rows: Vec<Vec<String>> =
        m.checkpoints.iter().map(|r| vec![num(r.t), opt(r.corrector), opt(r.corrector_leading)]).collect();
    out.csv(rel, &header, &rows)
}

fn write_envelope(out: &mut OutputDir, rel: &str, env: &EnvelopeGrid) -> Result<()> {
    let d = env.dim();
    let mut header = axis_names("y", d);
    header.extend(["re_a", "im_a", "re_b", "im_b"].map(String::from));
    let mut rows = Vec::with_capacity(env.grid.len());
    env.grid.for_each_point(|i, y| {
        let mut row: Vec<String> = y.iter().map(|v| num(*v)).collect();
        row.extend([env.a[i].re, env.a[i].im, env.b[i].re, env.b[i].im].map(num));
        rows.push(row);
    });
    out.csv(rel, &header, &rows)
}

/// Little-endian dump: `d: u64`, `n_points: u64 × d`, `box_length: f64 × d`, `t: f64`,
/// `epsilon: f64`, then interleaved `(re, im)` doubles.
pub fn write_field_dump(path: &Path, field: &WaveField) -> Result<()> {
    let g = &field.grid;
    let mut buf = Vec::with_capacity(16 * field.psi.len() + 64);
    buf.extend_from_slice(&(g.dim() as u64).to_le_bytes());
    for &n in g.points() {
        buf.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for &l in g.lengths() {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    buf.extend_from_slice(&field.t.to_le_bytes());
    buf.extend_from_slice(&field.epsilon.to_le_bytes());
    for z in &field.psi {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

/// Reads a dump written by [`write_field_dump`] onto a centred grid.
pub fn read_field_dump(path: &Path) -> Result<WaveField> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;
    let mut take8 = || -> Result<[u8; 8]> {
        let chunk = bytes.get(pos..pos + 8).ok_or_else(|| HarnessError::Io("truncated field dump".into()))?;
        pos += 8;
        Ok(chunk.try_into().expect("eight bytes"))
    };
    let d = u64::from_le_bytes(take8()?) as usize;
    if !(1..=3).contains(&d) {
        return Err(HarnessError::Io(format!("bad dimension {d} in field dump")));
    }
    let points = (0..d).map(|_| Ok(u64::from_le_bytes(take8()?) as usize)).collect::<Result<Vec<_>>>()?;
    let lengths = (0..d).map(|_| Ok(f64::from_le_bytes(take8()?))).collect::<Result<Vec<_>>>()?;
    let t = f64::from_le_bytes(take8()?);
    let epsilon = f64::from_le_bytes(take8()?);
    let n: usize = points.iter().product();
    let psi = (0..n)
        .map(|_| Ok(C64::new(f64::from_le_bytes(take8()?), f64::from_le_bytes(take8()?))))
        .collect::<Result<Vec<_>>>()?;
    let grid = TensorGrid::new(&lengths, &points, &vec![0.0; d])?;
    Ok(WaveField::new(grid, psi, t, epsilon)?)
}

/// Slope annotation as written into the plot.
pub fn slope_annotation(label: &str, fit: &LineFit) -> String {
    format!("{label} slope = {:.15}", fit.slope)
}

type Series = (String, Vec<(f64, f64)>, RGBColor);

struct PlotSpec<'a> {
    title: &'a str,
    x_label: &'a str,
    y_label: &'a str,
    log_x: bool,
    log_y: bool,
    annotations: Vec<String>,
}

fn bounds(series: &[Series], log: bool, pick: impl Fn(&(f64, f64)) -> f64) -> (f64, f64) {
    let vals: Vec<f64> =
        series.iter().flat_map(|s| s.1.iter().map(&pick)).filter(|v| v.is_finite() && (!log || *v > 0.0)).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        return if log { (1e-3, 1.0) } else { (0.0, 1.0) };
    }
    if log {
        (lo / 1.5, hi * 1.5)
    } else if hi - lo < 1e-300 {
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn draw_plot(path: &Path, spec: &PlotSpec, series: &[Series]) -> Result<()> {
    let err = |e: &dyn std::fmt::Display| HarnessError::Io(format!("plot {}: {e}", path.display()));
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let (x0, x1) = bounds(series, spec.log_x, |p| p.0);
    let (y0, y1) = bounds(series, spec.log_y, |p| p.1);
    let mut builder = ChartBuilder::on(&root);
    builder.caption(spec.title, ("sans-serif", 18)).margin(12).x_label_area_size(40).y_label_area_size(70);
    macro_rules! body {
        ($chart:expr) => {{
            let mut chart = $chart;
            chart
                .configure_mesh()
                .x_desc(spec.x_label)
                .y_desc(spec.y_label)
                .y_label_formatter(&|v| format!("{v:.2e}"))
                .draw()
                .map_err(|e| err(&e))?;
            for (name, pts, color) in series {
                let pts: Vec<(f64, f64)> = pts
                    .iter()
                    .copied()
                    .filter(|(x, y)| x.is_finite() && y.is_finite() && (!spec.log_x || *x > 0.0) && (!spec.log_y || *y > 0.0))
                    .collect();
                let color = *color;
                chart
                    .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
                    .map_err(|e| err(&e))?
                    .label(name.as_str())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
                chart.draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled()))).map_err(|e| err(&e))?;
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(|e| err(&e))?;
        }};
    }
    match (spec.log_x, spec.log_y) {
        (true, true) => body!(builder.build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale()).map_err(|e| err(&e))?),
        (false, true) => body!(builder.build_cartesian_2d(x0..x1, (y0..y1).log_scale()).map_err(|e| err(&e))?),
        (true, false) => body!(builder.build_cartesian_2d((x0..x1).log_scale(), y0..y1).map_err(|e| err(&e))?),
        (false, false) => body!(builder.build_cartesian_2d(x0..x1, y0..y1).map_err(|e| err(&e))?),
    }
    for (k, text) in spec.annotations.iter().enumerate() {
        root.draw(&Text::new(text.clone(), (90, 60 + 18 * k as i32), ("sans-serif", 14)))
            .map_err(|e| err(&e))?;
    }
    root.present().map_err(|e| err(&e))?;
    Ok(())
}

fn fitted_line(eps: &[f64], fit: &LineFit) -> Vec<(f64, f64)> {
    eps.iter().map(|&e| (e, (fit.intercept + fit.slope * e.ln()).exp())).collect()
}

fn plot_error_vs_epsilon(out: &mut OutputDir, result: &SweepResult, fit: LineFit) -> Result<()> {
    let ok: Vec<&MemberResult> = result.members.iter().filter(|m| m.error.is_none()).collect();
    let eps: Vec<f64> = ok.iter().map(|m| m.epsilon).collect();
    let pts = |f: &dyn Fn(&MemberResult) -> Option<f64>| -> Vec<(f64, f64)> {
        ok.iter().filter_map(|m| f(m).map(|v| (m.epsilon, v))).collect()
    };
    let mut series: Vec<Series> = vec![
        ("corrected, t = T".into(), pts(&|m| m.summary.corrector_final), RED),
        ("corrected fit".into(), fitted_line(&eps, &fit), RGBColor(240, 150, 150)),
    ];
    let mut annotations = vec![slope_annotation("corrected", &fit)];
    if let Some(lf) = result.fits.leading_final {
        series.push(("leading-only, t = T".into(), pts(&|m| m.summary.leading_final), BLUE));
        series.push(("leading-only fit".into(), fitted_line(&eps, &lf), RGBColor(150, 150, 240)));
        annotations.push(slope_annotation("leading-only", &lf));
    }
    if let Some(sf) = result.fits.corrected_sup {
        series.push(("corrected, sup over [0, T]".into(), pts(&|m| m.summary.corrector_sup), RGBColor(200, 120, 0)));
        annotations.push(slope_annotation("corrected sup", &sf));
    }
    let spec = PlotSpec {
        title: "corrector norm vs epsilon",
        x_label: "epsilon",
        y_label: "||psi - psi_tilde||",
        log_x: true,
        log_y: true,
        annotations,
    };
    let path = out.path(ERROR_PLOT)?;
    draw_plot(&path, &spec, &series)
}

fn plot_member(out: &mut OutputDir, tag: &str, m: &MemberResult) -> Result<()> {
    let traj = |f: &dyn Fn(&crate::validation::TrajectoryRow) -> f64| -> Vec<(f64, f64)> {
        m.trajectory.iter().map(|r| (r.t, f(r))).collect()
    };
    let series = vec![
        ("q1".to_string(), traj(&|r| r.q[0]), BLUE),
        ("Q1".to_string(), traj(&|r| r.big_q[0]), RED),
        ("p1".to_string(), traj(&|r| r.p[0]), GREEN),
    ];
    let spec = PlotSpec {
        title: "trajectory",
        x_label: "t",
        y_label: "value",
        log_x: false,
        log_y: false,
        annotations: vec![],
    };
    let path = out.path(&format!("trajectory_{tag}.svg"))?;
    draw_plot(&path, &spec, &series)?;

    let h0 = m.trajectory.first().map(|r| r.h_eps).unwrap_or(0.0);
    let series = vec![
        ("H_eps(t) - H_eps(0)".to_string(), traj(&|r| r.h_eps - h0), RED),
        ("symplectic residual".to_string(), traj(&|r| r.symplectic_residual), BLUE),
    ];
    let spec = PlotSpec {
        title: "invariant drifts",
        x_label: "t",
        y_label: "drift",
        log_x: false,
        log_y: false,
        annotations: vec![],
    };
    let path = out.path(&format!("invariants_{tag}.svg"))?;
    draw_plot(&path, &spec, &series)?;

    if m.checkpoints.iter().any(|r| r.corrector.is_some()) {
        let pts = |f: &dyn Fn(&crate::validation::CheckpointRow) -> Option<f64>| -> Vec<(f64, f64)> {
            m.checkpoints.iter().filter_map(|r| f(r).map(|v| (r.t, v))).collect()
        };
        let series = vec![
            ("corrected".to_string(), pts(&|r| r.corrector), RED),
            ("leading-only".to_string(), pts(&|r| r.corrector_leading), BLUE),
        ];
        let spec = PlotSpec {
            title: "corrector norm vs time",
            x_label: "t",
            y_label: "||psi - psi_tilde||",
            log_x: false,
            log_y: true,
            annotations: m.summary.growth.map(|g| vec![format!("growth rate c = {:.6}", g.slope)]).unwrap_or_default(),
        };
        let path = out.path(&format!("corrector_{tag}.svg"))?;
        draw_plot(&path, &spec, &series)?;
    }
    Ok(())
}

/// Manifest for commands without a sweep (geometry, bands).
pub fn emit_report(
    out: OutputDir,
    config: &ExperimentConfig,
    command: &str,
    report: serde_json::Value,
    checks: Vec<CheckOutcome>,
) -> Result<Manifest> {
    let passed = checks.iter().all(|c| c.passed);
    let manifest = Manifest {
        command: command.into(),
        config: config.clone(),
        ehrenfest_constant: config.ehrenfest_constant,
        ehrenfest_horizon: config.ehrenfest_horizon(),
        files: out.entries()?,
        fits: None,
        members: Vec::new(),
        checks,
        passed,
        notes: REPORT_NOTES.iter().map(|s| s.to_string()).collect(),
        report: Some(report),
    };
    out.write_manifest(&manifest)?;
    Ok(manifest)
}
