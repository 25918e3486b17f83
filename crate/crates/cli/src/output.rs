//! Files written by a run.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use reorient::oracle::VerificationReport;
use reorient::structure::SolveReport;
use reorient::{Maneuver, SpacecraftModel, Terminal, Trajectory};
use serde::Serialize;

use crate::config::RunConfig;

pub const TRAJECTORY_HEADER: &str = "t,omega1,omega2,omega3,x1,x2,u1,u2,u3,lam1,lam2,lam3,lam4,lam5,g1,g2,g3,H";

fn csv_file(path: &Path, header: &str, rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{header}")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// One row per sample; costate-derived columns are `NaN` without costates.
pub fn write_trajectory(trajectory: &Trajectory, model: &SpacecraftModel, path: &Path) -> Result<()> {
    let rows = trajectory.points.iter().map(|p| {
        let lam = p.costate.unwrap_or([f64::NAN; 5]);
        let g = p.switching().unwrap_or([f64::NAN; 3]);
        let h = p.hamiltonian(model).unwrap_or(f64::NAN);
        let mut row = vec![p.t];
        row.extend(p.state);
        row.extend(p.control);
        row.extend(lam);
        row.extend(g);
        row.push(h);
        row
    });
    csv_file(path, TRAJECTORY_HEADER, rows)
}

/// Plot-ready series: controls, switching functions, angular velocities and
/// the x₁–x₂ plane.
pub fn write_plots(trajectory: &Trajectory, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let pts = &trajectory.points;
    csv_file(&dir.join("controls.csv"), "t,u1,u2,u3", pts.iter().map(|p| [vec![p.t], p.control.to_vec()].concat()))?;
    csv_file(
        &dir.join("switching.csv"),
        "t,g1,g2,g3",
        pts.iter().map(|p| [vec![p.t], p.switching().unwrap_or([f64::NAN; 3]).to_vec()].concat()),
    )?;
    csv_file(&dir.join("angular_velocity.csv"), "t,omega1,omega2,omega3", pts.iter().map(|p| [vec![p.t], p.state[..3].to_vec()].concat()))?;
    csv_file(&dir.join("plane.csv"), "x1,x2", pts.iter().map(|p| vec![p.state[3], p.state[4]]))?;
    Ok(())
}

#[derive(Serialize)]
struct FullReport<'a> {
    config: &'a RunConfig,
    maneuver: &'a Maneuver,
    report: &'a SolveReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    verification: Option<&'a VerificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

pub fn write_report_json(
    path: &Path,
    config: &RunConfig,
    maneuver: &Maneuver,
    report: &SolveReport,
    verification: Option<&VerificationReport>,
    error: Option<&str>,
) -> Result<()> {
    let full = FullReport { config, maneuver, report, verification, error };
    fs::write(path, serde_json::to_string_pretty(&full)?).with_context(|| format!("writing {}", path.display()))
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or("-".into(), |v| format!("{v:.prec$e}"))
}

/// Table-style summary: switch times, final time, regularization, accuracy
/// and cost columns.
pub fn report_text(maneuver: &Maneuver, report: &SolveReport, verification: Option<&VerificationReport>, error: Option<&str>) -> String {
    let mut s = String::new();
    let m = &maneuver.model;
    let _ = writeln!(s, "maneuver          {}", maneuver.name);
    let _ = writeln!(s, "torque_mode       {}", m.torque_mode());
    let _ = writeln!(s, "a                 {}", m.a());
    let _ = writeln!(s, "bounds            [{}, {}]", m.u_min(), m.u_max());
    let _ = writeln!(s, "status            {}", report.failed_stage.map_or("ok".to_string(), |st| format!("failed at {st}")));
    if let Some(e) = error {
        let _ = writeln!(s, "error             {e}");
    }
    let _ = writeln!(s, "t_f               {:.6}", report.t_final);
    let _ = writeln!(s, "switch_times      {}", report.switch_times.iter().map(|t| format!("{t:.4}")).collect::<Vec<_>>().join(" "));
    for (i, sw) in report.switches.iter().enumerate() {
        let _ = writeln!(s, "  t_s{:<2}           {:.6}  u{}  {} -> {}", i + 1, sw.time, sw.control, sw.from, sw.to);
    }
    let r = &report.regularization;
    let _ = writeln!(s, "epsilon           {}", opt(r.epsilon, 1));
    let _ = writeln!(s, "delta             {:.2e}", r.delta);
    let _ = writeln!(s, "p                 {}", r.p);
    if let Some(p) = &report.pmp {
        let _ = writeln!(s, "max|H+1|          {:.2e}", p.hamiltonian_error);
        let _ = writeln!(s, "H_variation       {:.2e}", p.hamiltonian_variation);
        let _ = writeln!(s, "costate_defect    {:.2e}", p.costate_defect);
        let _ = writeln!(s, "transversality    {:.2e}", p.transversality_error);
        let _ = writeln!(s, "switching_misfit  {:.4}", p.switching_consistency);
        let _ = writeln!(s, "legendre_clebsch  {}", opt(p.legendre_clebsch_min, 2));
    }
    let _ = writeln!(s, "mesh_rounds       {}", report.mesh_history.len());
    let _ = writeln!(s, "nlp_iterations    {}", report.nlp_iterations);
    let _ = writeln!(s, "wall_time_s       {:.2}", report.wall_time_s);
    for w in &report.warnings {
        let _ = writeln!(s, "warning           {w}");
    }
    if let Some(v) = verification {
        let _ = writeln!(s, "verification      {}", if v.passed() { "passed" } else { "failed" });
        let _ = writeln!(s, "  reintegration   {:.2e}", v.reintegration_error);
        if let Some(ind) = &v.indirect {
            let _ = writeln!(s, "  shooting_res    {:.2e}", ind.residual_norm);
            let _ = writeln!(s, "  shooting_t_f    {:.8}", ind.t_final);
            let _ = writeln!(s, "  delta_t_f       {:.2e}", ind.discrepancy.t_final);
            let _ = writeln!(s, "  delta_state     {:.2e}", ind.discrepancy.max_state);
            let _ = writeln!(s, "  delta_switch    {:.2e}", ind.discrepancy.max_switch());
        }
        if let Some(note) = &v.indirect_note {
            let _ = writeln!(s, "  note            {note}");
        }
        for f in &v.failures {
            let _ = writeln!(s, "  failure         {f}");
        }
    }
    s
}

/// Listing entry of a maneuver.
#[derive(Debug, Serialize)]
pub struct ManeuverEntry {
    pub name: String,
    pub a: f64,
    pub omega30: f64,
    pub torque_mode: String,
    pub u_min: f64,
    pub u_max: f64,
    pub initial_state: [f64; 5],
    pub terminal: [Terminal; 5],
}

impl ManeuverEntry {
    pub fn new(m: &Maneuver) -> Self {
        Self {
            name: m.name.clone(),
            a: m.model.a(),
            omega30: m.bc.initial_state.omega3,
            torque_mode: m.model.torque_mode().to_string(),
            u_min: m.model.u_min(),
            u_max: m.model.u_max(),
            initial_state: m.bc.initial_state.to_array(),
            terminal: m.bc.terminal,
        }
    }

    pub fn text(&self) -> String {
        let term: Vec<String> = self
            .terminal
            .iter()
            .map(|t| match t {
                Terminal::Fixed(v) => v.to_string(),
                Terminal::Free => "free".into(),
            })
            .collect();
        format!(
            "{:<14} a = {:<4} omega30 = {:<5} torque = {:<5} y0 = [{}]  yf = [{}]",
            self.name,
            self.a,
            self.omega30,
            self.torque_mode,
            self.initial_state.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "),
            term.join(", ")
        )
    }
}
