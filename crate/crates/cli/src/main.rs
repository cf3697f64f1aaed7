//! Command line driver: configuration in, solutions / diagnostics / CSV out.
//!
//! Exit codes: 0 success, 1 solver failure, 2 incompatible right-hand side,
//! 3 configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use guillemin_ma::barrier::{build_barrier, lipschitz_check, verify_barrier, Orientation, Side};
use guillemin_ma::config::{load_config, Experiment};
use guillemin_ma::diagnostics::{compute_diagnostics, DiagnosticsParams};
use guillemin_ma::geometry::{check_compatibility, COMPAT_TOL};
use guillemin_ma::legendre::{
    keldysh_residual, partial_legendre, round_trip_error, StripSpec, DEFAULT_Y_FLOOR,
};
use guillemin_ma::mesh::MeshParams;
use guillemin_ma::potential::u0_eval;
use guillemin_ma::solver::{solve, Solution};
use guillemin_ma::study::approximation_study;
use guillemin_ma::{Error, Result};

#[derive(Parser)]
#[command(
    name = "gma",
    about = "Singular Monge-Ampere solver on convex polygons with Guillemin boundary conditions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Experiment configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports and CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the first mesh level of the configuration.
    #[arg(long, global = true)]
    mesh_level: Option<u32>,
    /// Override the Newton solver tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve and dump the field on the mesh nodes.
    Solve,
    /// Assemble and dump the edge boundary data only.
    Boundary,
    /// Solve and run the full regularity diagnostics sweep.
    Diagnose,
    /// Solve, take the partial Legendre transform, check the Keldysh
    /// equation.
    Keldysh,
    /// Solve and verify the corner barriers.
    Barrier,
    /// Mollified approximation study H_n -> H.
    Approx,
    /// Solve across the configured mesh levels and tabulate differences.
    Convergence,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::IncompatibleH { .. } | Error::CompatibilityLost(_) => 2,
        Error::Config(_) => 3,
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<()> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let text = fs::read_to_string(config_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let mut exp = load_config(&text)?;
    if let Some(level) = cli.mesh_level {
        if !(2..=12).contains(&level) {
            return Err(Error::Config(format!("--mesh-level {level} outside 2..=12")));
        }
        exp.mesh.level = level as usize;
        exp.levels[0] = level;
    }
    if let Some(tol) = cli.tol {
        if !(tol > 0.0) {
            return Err(Error::Config(format!("--tol must be positive, got {tol}")));
        }
        exp.solver.tol = tol;
    }
    let out_dir: PathBuf = cli
        .out
        .clone()
        .or_else(|| exp.out_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)?;

    // Gate every solving command on vertex compatibility, with per-vertex
    // residuals in the report.
    let compat = check_compatibility(&exp.polygon, &exp.rhs, COMPAT_TOL);
    if !compat.compatible {
        eprintln!("incompatible right-hand side; per-vertex residuals:");
        for (v, r) in compat.residuals.iter().enumerate() {
            eprintln!("  vertex {v}: residual {:.3} (required H = {:.6})", r.abs(), compat.required[v]);
        }
        let worst = compat
            .residuals
            .iter()
            .cloned()
            .fold(0.0f64, |a, b| a.max(b.abs()));
        return Err(Error::IncompatibleH {
            edge: 0,
            residual: worst,
        });
    }

    match cli.cmd {
        Cmd::Solve => cmd_solve(&exp, &out_dir),
        Cmd::Boundary => cmd_boundary(&exp, &out_dir),
        Cmd::Diagnose => cmd_diagnose(&exp, &out_dir),
        Cmd::Keldysh => cmd_keldysh(&exp, &out_dir),
        Cmd::Barrier => cmd_barrier(&exp, &out_dir),
        Cmd::Approx => cmd_approx(&exp, &out_dir),
        Cmd::Convergence => cmd_convergence(&exp, &out_dir),
    }
}

fn solve_experiment(exp: &Experiment) -> Result<Solution> {
    solve(
        &exp.polygon,
        &exp.rhs,
        &exp.vertex_values,
        exp.mesh,
        exp.solver,
    )
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_solve(exp: &Experiment, out: &Path) -> Result<()> {
    let sol = solve_experiment(exp)?;
    let mut csv = String::from("x1,x2,v,u,u11,u12,u22\n");
    for k in 0..sol.mesh.nodes.len() {
        let x = sol.mesh.points[k];
        let e = sol.evaluate(x, 2)?;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            x.x,
            x.y,
            e.v,
            e.u,
            e.hess[(0, 0)],
            e.hess[(0, 1)],
            e.hess[(1, 1)]
        ));
    }
    write_file(&out.join("solve.csv"), &csv)?;
    println!(
        "solved: level {}, {} nodes, {} Newton iterations, residual {:.3e}",
        exp.mesh.level,
        sol.mesh.nodes.len(),
        sol.iterations,
        sol.residual_norm
    );
    Ok(())
}

fn cmd_boundary(exp: &Experiment, out: &Path) -> Result<()> {
    use guillemin_ma::boundary::assemble_dirichlet_data;
    let data = assemble_dirichlet_data(&exp.polygon, &exp.rhs, &exp.vertex_values)?;
    for (i, trace) in data.traces.iter().enumerate() {
        let mut csv = String::from("t,u,v,h\n");
        for (j, &t) in trace.ts.iter().enumerate() {
            let u = trace.u_at(t);
            let x = exp.polygon.edges[i].point_at(t);
            let v = u - u0_eval(&exp.polygon, x)?;
            csv.push_str(&format!("{},{},{},{}\n", t, u, v, trace.h[j]));
        }
        write_file(&out.join(format!("boundary_edge{i}.csv")), &csv)?;
    }
    Ok(())
}

fn cmd_diagnose(exp: &Experiment, out: &Path) -> Result<()> {
    let sol = solve_experiment(exp)?;
    let d = &exp.diagnostics;
    let mut params = DiagnosticsParams::for_polygon(&exp.polygon, exp.rhs.alpha);
    if let Some(g) = d.gamma {
        params.gamma = g;
    }
    params.delta = d.delta_frac * exp.polygon.min_edge_length();
    params.k_range = (d.k_min, d.k_max);
    params.t_probes = d.t_probes;
    let report = compute_diagnostics(&sol, &params)?;
    for ed in &report.decay {
        let mut csv = String::from("k,s,D,s^{1\u{2212}\u{3b3}}D\n");
        for row in &ed.rows {
            csv.push_str(&format!("{},{},{},{}\n", row.k, row.s, row.d, row.scaled));
        }
        write_file(&out.join(format!("decay_edge{}.csv", ed.edge)), &csv)?;
    }
    let text = toml::to_string_pretty(&report)
        .map_err(|e| Error::Config(format!("report serialization: {e}")))?;
    write_file(&out.join("diagnostics.toml"), &text)?;
    println!(
        "sup D = {:.6} | sup E = {:.6} | sup D1 = {:.6} | sup D2 = {:.6} | hessian C = {:.6} | decay ok = {} | modulus = {:.3e}",
        report.sup_d.value,
        report.sup_e.value,
        report.sup_d1.value,
        report.sup_d2.value,
        report.hessian.c,
        report.decay_all_ok,
        report.modulus.m
    );
    Ok(())
}

fn cmd_keldysh(exp: &Experiment, out: &Path) -> Result<()> {
    let sol = solve_experiment(exp)?;
    let len = exp.polygon.edges[0].length;
    let strip = StripSpec {
        edge: 0,
        t_min: 0.25 * len,
        t_max: 0.75 * len,
        y_min: 0.02 * len,
        y_max: 0.2 * len,
        np: 33,
        ny: 33,
    };
    let lf = partial_legendre(&sol, &strip)?;
    let rt = round_trip_error(&sol, &lf, &strip, 16)?;
    let polygon = &exp.polygon;
    let edge = strip.edge;
    // Transformed coefficient: with det D^2 u = H / prod l_j and l_edge = y,
    // the Keldysh equation holds with H divided by the non-edge factors.
    let h = |t: f64, y: f64| {
        let x = guillemin_ma::field::edge_point(polygon, edge, t, y);
        let prod: f64 = exp
            .polygon
            .l_values(x)
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != edge)
            .map(|(_, &l)| l)
            .product();
        exp.rhs.value(x) / prod
    };
    let rep = keldysh_residual(&lf, &h, DEFAULT_Y_FLOOR);
    let mut csv = String::from("p,y,ustar,residual\n");
    for row in &rep.rows {
        csv.push_str(&format!("{},{},{},{}\n", row.p, row.y, row.ustar, row.residual));
    }
    write_file(&out.join("keldysh.csv"), &csv)?;
    println!(
        "keldysh: round-trip error {rt:.3e}, sup residual {:.3e} (y >= {}), below-floor {:.3e}",
        rep.sup, rep.y_floor, rep.sup_below_floor
    );
    Ok(())
}

fn cmd_barrier(exp: &Experiment, out: &Path) -> Result<()> {
    let sol = solve_experiment(exp)?;
    // Smallest cell width of the solved mesh; graded meshes concentrate
    // nodes near the boundary, where the barrier comparison happens.
    let min_gap = |axis: &[f64]| {
        axis.windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    };
    let mesh_h = min_gap(&sol.mesh.xs).min(min_gap(&sol.mesh.ys));
    let mut text = String::new();
    let mut worst = f64::INFINITY;
    for vertex in 0..exp.polygon.num_edges() {
        for side in [Side::Upper, Side::Lower] {
            for orientation in [Orientation::X2, Orientation::X1] {
                let b = build_barrier(&sol, vertex, &exp.rhs, side, orientation, mesh_h)?;
                let rep = verify_barrier(&sol, &b, 48)?;
                worst = worst.min(rep.min_margin);
                text.push_str(&format!(
                    "vertex {vertex} {side:?} {orientation:?}: A = {:.6}, B = {:.6}, r = {:.6}, min margin = {:.3e} at {:?}\n",
                    b.a_const, b.b_const, b.r, rep.min_margin, rep.arg
                ));
            }
        }
        let lip = lipschitz_check(&sol, vertex, 0.25 * exp.polygon.min_edge_length(), 24)?;
        text.push_str(&format!(
            "vertex {vertex} lipschitz: c1 = {:.6}, c2 = {:.6}\n",
            lip.c1, lip.c2
        ));
    }
    write_file(&out.join("barrier.txt"), &text)?;
    println!("barrier: worst min margin {worst:.3e}");
    if worst < -1e-6 {
        return Err(Error::NewtonStalled(0, worst));
    }
    Ok(())
}

fn cmd_approx(exp: &Experiment, out: &Path) -> Result<()> {
    let outcome = approximation_study(
        &exp.polygon,
        &exp.rhs,
        &exp.vertex_values,
        exp.mesh,
        exp.solver,
        2,
        4,
        0.5 * exp.rhs.lower,
    )?;
    let mut csv = String::from("k,width,sup_diff,weighted_diff\n");
    for row in &outcome.rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.k, row.width, row.sup_diff, row.weighted_diff
        ));
    }
    write_file(&out.join("approx.csv"), &csv)?;
    for row in &outcome.rows {
        println!(
            "width {:.4}: sup diff {:.3e}, weighted diff {:.3e}",
            row.width, row.sup_diff, row.weighted_diff
        );
    }
    Ok(())
}

fn cmd_convergence(exp: &Experiment, out: &Path) -> Result<()> {
    if exp.levels.len() < 2 {
        return Err(Error::Config(
            "convergence needs at least two entries in mesh.levels".into(),
        ));
    }
    let mut prev: Option<Solution> = None;
    let mut csv = String::from("level,sup_diff\n");
    for &level in &exp.levels {
        let sol = solve(
            &exp.polygon,
            &exp.rhs,
            &exp.vertex_values,
            MeshParams {
                level: level as usize,
                grading: exp.mesh.grading,
            },
            exp.solver,
        )?;
        if let Some(p) = &prev {
            // Compare on the coarser solution's nodes.
            let mut sup = 0.0f64;
            for k in 0..p.mesh.nodes.len() {
                let x = p.mesh.points[k];
                sup = sup.max((sol.evaluate(x, 0)?.v - p.v[k]).abs());
            }
            csv.push_str(&format!("{},{}\n", level, sup));
            println!("level {level}: sup diff to previous {sup:.3e}");
        }
        prev = Some(sol);
    }
    write_file(&out.join("convergence.csv"), &csv)?;
    Ok(())
}
