//! Trajectory CSV and metadata sidecar.
//!
//! One CSV row per agent per recorded instant, agents numbered from 1:
//!
//! ```text
//! t,agent,y,y_r,u,theta_tilde,eta_ff,u_star,zeta,xi_ii,x1..xn,xt1..xtn,eta1..etas,z1..zm,v1..vq
//! ```
//!
//! Vector columns are sized by the largest block across agents; shorter blocks
//! and unavailable quantities leave the field empty. Numbers use the shortest
//! decimal form that round-trips, so identical runs give identical bytes.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::metrics::MetricsReport;
use super::Trajectory;
use crate::error::Result;

pub const CSV_FILE: &str = "trajectory.csv";
pub const METADATA_FILE: &str = "metadata.json";

fn widths(traj: &Trajectory) -> [usize; 4] {
    let w = |f: fn(&super::AgentSeries) -> &Vec<Vec<f64>>| {
        traj.agents
            .iter()
            .map(|a| f(a).first().map_or(0, Vec::len))
            .max()
            .unwrap_or(0)
    };
    [w(|a| &a.x), w(|a| &a.x_tilde), w(|a| &a.eta), w(|a| &a.z)]
}

pub fn csv_header(traj: &Trajectory) -> String {
    let [nx, nxt, neta, nz] = widths(traj);
    let nv = traj.v.first().map_or(0, Vec::len);
    let mut cols: Vec<String> = ["t", "agent", "y", "y_r", "u", "theta_tilde", "eta_ff", "u_star", "zeta", "xi_ii"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for (prefix, count) in [("x", nx), ("xt", nxt), ("eta", neta), ("z", nz), ("v", nv)] {
        cols.extend((1..=count).map(|k| format!("{prefix}{k}")));
    }
    cols.join(",")
}

fn push_num(line: &mut String, x: f64) {
    line.push(',');
    line.push_str(&format!("{x:?}"));
}

fn push_padded(line: &mut String, values: Option<&Vec<f64>>, width: usize) {
    let values = values.map_or(&[][..], |v| v.as_slice());
    for k in 0..width {
        match values.get(k) {
            Some(&x) => push_num(line, x),
            None => line.push(','),
        }
    }
}

pub fn write_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    let [nx, nxt, neta, nz] = widths(traj);
    writeln!(w, "{}", csv_header(traj))?;
    let mut line = String::new();
    for k in 0..traj.len() {
        for (i, a) in traj.agents.iter().enumerate() {
            line.clear();
            line.push_str(&format!("{:?},{}", traj.t[k], i + 1));
            for x in [a.y[k], a.y_r[k], a.u[k], a.theta_tilde[k], a.eta_ff[k]] {
                push_num(&mut line, x);
            }
            match a.u_star.get(k) {
                Some(&x) => push_num(&mut line, x),
                None => line.push(','),
            }
            push_num(&mut line, a.zeta[k]);
            push_num(&mut line, a.xi_ii[k]);
            push_padded(&mut line, a.x.get(k), nx);
            push_padded(&mut line, a.x_tilde.get(k), nxt);
            push_padded(&mut line, a.eta.get(k), neta);
            push_padded(&mut line, a.z.get(k), nz);
            for &v in &traj.v[k] {
                push_num(&mut line, v);
            }
            writeln!(w, "{line}")?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata<'a> {
    pub version: &'static str,
    pub seed: u64,
    pub columns: String,
    pub scenario: &'a serde_json::Value,
    pub metrics: &'a MetricsReport,
}

/// Writes `trajectory.csv` and `metadata.json` into `dir`, creating it if needed.
pub fn write_run(
    dir: &Path,
    traj: &Trajectory,
    scenario: &serde_json::Value,
    seed: u64,
    metrics: &MetricsReport,
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(CSV_FILE);
    let file = io::BufWriter::new(fs::File::create(&csv_path)?);
    write_csv(traj, file)?;
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        seed,
        columns: csv_header(traj),
        scenario,
        metrics,
    };
    let meta_path = dir.join(METADATA_FILE);
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)?;
    Ok((csv_path, meta_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::AgentSeries;

    #[test]
    fn header_and_padding() {
        let a = AgentSeries {
            y: vec![1.0],
            y_r: vec![2.0],
            u: vec![0.5],
            theta_tilde: vec![0.0],
            eta_ff: vec![-1.0],
            u_star: vec![],
            zeta: vec![0.0],
            xi_ii: vec![1.0],
            x: vec![vec![1.0, 0.1]],
            x_tilde: vec![vec![1.0, 0.0]],
            eta: vec![vec![0.0, 0.0]],
            z: vec![vec![]],
        };
        let mut b = a.clone();
        b.x = vec![vec![1.0, 0.1, 1e-20]];
        b.x_tilde = vec![vec![1.0, 0.0, 0.0]];
        b.eta = vec![vec![0.0, 0.0, 0.0]];
        let mut a = a;
        a.z = vec![vec![3.0]];
        let traj = Trajectory {
            t: vec![0.0],
            agents: vec![a, b],
            xi_row_sum_error: vec![0.0],
            v: vec![vec![0.0, 1.0]],
            ..Default::default()
        };
        let mut out = Vec::new();
        write_csv(&traj, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "t,agent,y,y_r,u,theta_tilde,eta_ff,u_star,zeta,xi_ii,x1,x2,x3,xt1,xt2,xt3,eta1,eta2,eta3,z1,v1,v2"
        );
        assert_eq!(lines[1], "0.0,1,1.0,2.0,0.5,0.0,-1.0,,0.0,1.0,1.0,0.1,,1.0,0.0,,0.0,0.0,,3.0,0.0,1.0");
        assert_eq!(lines[2], "0.0,2,1.0,2.0,0.5,0.0,-1.0,,0.0,1.0,1.0,0.1,1e-20,1.0,0.0,0.0,0.0,0.0,0.0,,0.0,1.0");
        let ncols = lines[0].split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == ncols));
    }
}
