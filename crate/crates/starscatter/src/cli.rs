//! Command-line front end: merges flags into the run configuration, runs one
//! pipeline and writes its artifacts into the output directory.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;

use crate::acceptance;
use crate::config::{Packet, RunConfig};
use crate::core::bc::{normalize_boundary, BoundaryPair};
use crate::core::evolve::{
    evolve_kernel, evolve_spectral, evolve_stepper, EvolutionResult, KernelTables, Method,
    SpectralTables, StepperSettings,
};
use crate::core::fold::{
    delta_boundary, evolve_line, transmission_residual, LineProblem, LineSettings, LineState,
};
use crate::core::harness::{
    decay_fit, lp_sample_bound, node_box, strichartz_norm, StrichartzWindows,
};
use crate::core::jost::{KGrid, Propagator, ScatteringTable};
use crate::core::kernels::{fs_transform, kernel_kgrid, transformation_kernel, KernelSettings};
use crate::core::linalg::{self, CVec};
use crate::core::potential::PotentialGrid;
use crate::core::spectrum::{classify_zero_energy, find_bound_states, BoundStateSet};
use crate::core::state::{State, StateGrid};
use crate::io::{self, matrix_columns, matrix_values, NormalFormRecord, PotentialFile, Table};
use crate::AppError;

#[derive(Debug, Parser)]
#[command(
    name = "starscatter",
    version,
    about = "Scattering data, kernels and dispersive evolution on the half-line"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "STARSCATTER_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub h: Option<f64>,
    #[arg(long, global = true)]
    pub xmax: Option<f64>,
    #[arg(long, global = true)]
    pub kmax: Option<f64>,
    #[arg(long, global = true)]
    pub dk: Option<f64>,
    /// Evolution time for `evolve` and `fold`, last time for `decay`.
    #[arg(long = "t-max", global = true)]
    pub t_max: Option<f64>,
    #[arg(long, global = true)]
    pub p: Option<f64>,
    #[arg(long, global = true)]
    pub q: Option<f64>,
    #[arg(long, global = true)]
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the boundary pair and print its normal form.
    BcValidate,
    /// Jost and scattering matrices on the k grid.
    Scatter,
    BoundStates,
    ZeroEnergy,
    /// Transformation kernel K and F_s tables.
    Kernels,
    /// Evolve a Gaussian packet by the configured route.
    Evolve,
    /// Evolve on the line through the folded problem.
    Fold,
    /// Decay rate fit.
    Decay,
    /// Mixed-norm ratio for an admissible pair.
    Strichartz,
    /// Run the acceptance suite.
    Selftest,
}

impl Cli {
    /// Configuration file (if any) with the flags applied on top.
    pub fn config(&self) -> Result<RunConfig, AppError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if let Some(h) = self.h {
            cfg.grid.h = h;
        }
        if self.xmax.is_some() {
            cfg.grid.x_max = self.xmax;
        }
        if let Some(k) = self.kmax {
            cfg.grid.k_max = k;
        }
        if let Some(dk) = self.dk {
            cfg.grid.dk = dk;
        }
        if let Some(t) = self.t_max {
            cfg.evolve.t = t;
            cfg.fold.t = t;
            cfg.decay.t_max = t;
        }
        if let Some(p) = self.p {
            cfg.decay.p = p;
        }
        if let Some(q) = self.q {
            cfg.strichartz.q = q;
        }
        if let Some(r) = self.r {
            cfg.strichartz.r = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs the command and returns the exit status.
pub fn run(cli: &Cli) -> Result<i32, AppError> {
    let cfg = cli.config()?;
    if let Some(threads) = cfg.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out).map_err(|e| AppError::Config(format!("{}: {e}", out.display())))?;
    match cli.command {
        Command::BcValidate => bc_validate(&cfg, &out),
        Command::Scatter => scatter(&cfg, &out),
        Command::BoundStates => bound_states(&cfg, &out),
        Command::ZeroEnergy => zero_energy(&cfg, &out),
        Command::Kernels => kernels(&cfg, &out),
        Command::Evolve => evolve(&cfg, &out),
        Command::Fold => fold(&cfg, &out),
        Command::Decay => decay(&cfg, &out),
        Command::Strichartz => strichartz(&cfg, &out),
        Command::Selftest => selftest(&out),
    }
}

fn setup(cfg: &RunConfig) -> Result<(PotentialGrid, BoundaryPair, Propagator), AppError> {
    let pg = cfg.potential()?;
    let bp = cfg.boundary(pg.n)?;
    let prop = Propagator::new(&pg)?;
    Ok((pg, bp, prop))
}

/// `theta` as a multiple of `pi / 4` when it is one.
fn angle(theta: f64) -> String {
    let quarters = theta / (PI / 4.0);
    let q = quarters.round();
    if (quarters - q).abs() > 1e-9 {
        return format!("{theta:.17e}");
    }
    match q as i64 {
        0 => "0".into(),
        4 => "π".into(),
        2 => "π/2".into(),
        q if q % 4 == 0 => format!("{}π", q / 4),
        q if q % 2 == 0 => format!("{}π/2", q / 2),
        1 => "π/4".into(),
        q => format!("{q}π/4"),
    }
}

fn bc_validate(cfg: &RunConfig, out: &Path) -> Result<i32, AppError> {
    let pg = cfg.potential()?;
    let bp = cfg.boundary(pg.n)?;
    let nf = normalize_boundary(&bp)?;
    let thetas: Vec<String> = nf.thetas.iter().map(|&t| angle(t)).collect();
    println!("valid, θ = [{}]", thetas.join(", "));
    println!(
        "mixed {}, dirichlet {}, neumann {}",
        nf.n_mixed, nf.n_dirichlet, nf.n_neumann
    );
    io::write_toml(&out.join("normal_form.toml"), &NormalFormRecord::from(&nf))?;
    Ok(0)
}

fn scatter(cfg: &RunConfig, out: &Path) -> Result<i32, AppError> {
    let (pg, bp, prop) = setup(cfg)?;
    let kg = KGrid::new(cfg.grid.k_max, cfg.grid.dk)?;
    let table = ScatteringTable::compute(&prop, &bp, kg, false)?;
    let n = pg.n;
    let mut columns = vec!["k".to_string()];
    columns.extend(matrix_columns("J", n));
    columns.extend(matrix_columns("S", n));
    columns.push("unitarity".into());
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let id = linalg::identity(n);
    let mut csv = Table::new(&cols)
        .meta("n", n)
        .meta("dk", format!("{:.17e}", kg.dk))
        .meta("k_max", format!("{:.17e}", kg.k_max()))
        .meta("potential", PotentialFile::from_grid(&pg).digest()?);
    for j in 0..kg.len() {
        let mut row = vec![kg.k(j)];
        matrix_values(&table.j[j], &mut row);
        matrix_values(&table.s[j], &mut row);
        row.push(linalg::frob(&(&table.s[j] * table.s[j].adjoint() - &id)));
        csv.push(row);
    }
    csv.write(&out.join("scatter.csv"))?;
    println!(
        "{} k points, max unitarity residual {:.3e}, max symmetry residual {:.3e}",
        kg.len(),
        table.unitarity_residual(),
        table.symmetry_residual()
    );
    Ok(0)
}

fn bound_set(
    cfg: &RunConfig,
    pg: &PotentialGrid,
    bp: &BoundaryPair,
    prop: &Propagator,
    length: f64,
) -> Result<BoundStateSet, AppError> {
    let grid = StateGrid::new(pg.n, pg.h, length)?;
    // kappa^2 <= max |V| for the potential part; the boundary adds at most
    // what cot(theta) allows, covered by the generous margin
    let kappa_max = pg.max_norm().sqrt() + 10.0;
    let _ = cfg;
    Ok(find_bound_states(prop, bp, 1e-3, kappa_max, &grid)?)
}

fn bound_states(cfg: &RunConfig, out: &Path) -> Result<i32, AppError> {
    let (pg, bp, prop) = setup(cfg)?;
    let set = bound_set(cfg, &pg, &bp, &prop, cfg.evolve.length)?;
    let mut csv = Table::new(&["j", "kappa", "multiplicity", "energy"]).meta("count", set.count());
    for (j, b) in set.states.iter().enumerate() {
        csv.push(vec![j as f64, b.kappa, b.multiplicity as f64, b.energy()]);
    }
    csv.write(&out.join("bound_states.csv"))?;
    println!("{} bound states (with multiplicity)", set.count());
    for b in &set.states {
        println!(
            "kappa = {:.17e}, multiplicity {}, energy {:.17e}",
            b.kappa,
            b.multiplicity,
            b.energy()
        );
    }
    Ok(0)
}

#[derive(serde::Serialize)]
struct ZeroEnergyReport {
    classification: String,
    rank_defect: usize,
    min_det: f64,
    limit_det: f64,
}

fn zero_energy(cfg: &RunConfig, out: &Path) -> Result<i32, AppError> {
    let (_, bp, prop) = setup(cfg)?;
    let z = classify_zero_energy(&prop, &bp, 0.1, 10)?;
    let report = ZeroEnergyReport {
        classification: format!("{:?}", z.classification).to_lowercase(),
        rank_defect: z.rank_defect,
        min_det: z.min_det,
        limit_det: z.d_limit_det(),
    };
    io::write_toml(&out.join("zero_energy.toml"), &report)?;
    println!(
        "{}, rank defect {}, min |det D| {:.17e}, |det D(0+)| {:.17e}",
        report.classification, report.rank_defect, report.min_det, report.limit_det
    );
    Ok(0)
}

fn kernels(cfg: &RunConfig, out: &Path) -> Result<i32, AppError> {
    let (pg, bp, prop) = setup(cfg)?;
    let settings = KernelSettings::default();
    let table =
        ScatteringTable::compute(&prop, &bp, kernel_kgrid(pg.h, pg.x_max, &settings), true)?;
    let k = transformation_kernel(&table, &pg, &settings)?;
    let fs = fs_transform(&table, &pg, &settings)?;
    let n = pg.n;

    let mut columns = vec!["i".to_string(), "l".into(), "x".into(), "y".into()];
    columns.extend(matrix_columns("K", n));
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut kt = Table::new(&cols)
        .meta("nodes", k.nodes)
        .meta("span", k.span)
        .meta("leakage", format!("{:.17e}", k.leakage))
        .meta("diagonal_error", format!("{:.17e}", k.diagonal_error(&pg)));
    for i in 0..k.nodes {
        for s in 0..k.span {
            let mut row = vec![i as f64, (i + s) as f64, k.x(i), k.x(i) + s as f64 * k.h];
            matrix_values(&k.value(i, s), &mut row);
            kt.push(row);
        }
    }
    kt.write(&out.join("kernel_k.csv"))?;

    let mut columns = vec!["y".to_string()];
    columns.extend(matrix_columns("F", n));
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut ft = Table::new(&cols).meta("tail_ratio", format!("{:.17e}", fs.tail_ratio));
    for l in 0..fs.len() {
        let mut row = vec![fs.y(l)];
        matrix_values(&fs.value(l), &mut row);
        ft.push(row);
    }
    ft.write(&out.join("fs.csv"))?;
    println!(
        "K: leakage {:.3e}, diagonal error {:.3e}; F_s: tail ratio {:.3e}, max {:.3e}",
        k.leakage,
        k.diagonal_error(&pg),
        fs.tail_ratio,
        fs.max_abs
    );
    Ok(0)
}

fn packet_state(grid: &StateGrid, packet: &Packet, weight: impl Fn(f64) -> f64) -> State {
    grid.from_fn(|x| CVec::from_element(grid.n, packet.at(x) * weight(x)))
}

fn kernel_tables(
    pg: &PotentialGrid,
    bp: &BoundaryPair,
    prop: &Propagator,
) -> Result<KernelTables, AppError> {
    let settings = KernelSettings::default();
    let table = ScatteringTable::compute(prop, bp, kernel_kgrid(pg.h, pg.x_max, &settings), true)?;
    Ok(KernelTables::new(&table, pg, &settings)?)
}

fn state_table(r: &EvolutionResult) -> Table {
    let grid = r.grid;
    let mut columns = vec!["x".to_string()];
    for c in 0..grid.n {
        columns.push(format!("re_{c}"));
        columns.push(format!("im_{c}"));
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut t = Table::new(&cols);
    for j in 0..grid.nodes {
        let mut row = vec![grid.x(j)];
        for z in grid.node(&r.u, j) {
            row.push(z.re);
            row.push(z.im);
        }
        t.push(row);
    }
    t
}

fn evolve(cfg: &RunConfig, out: &Path) -> Result<i32, AppError> {
    let (pg, bp, prop) = setup(cfg)?;
    let e = &cfg.evolve;
    let bound = bound_set(cfg, &pg, &bp, &prop, e.length)?;
    let grid = bound.grid;
    let psi = packet_state(&grid, &e.packet, |_| 1.0);
    let r = match Method::from(e.method) {
        Method::Spectral => {
            let tables = SpectralTables::new(&prop, &bp, e.k_max, e.dk)?;
            evolve_spectral(&psi, e.t, &tables, &bound, &bp)?
        }
        Method::Kernel => evolve_kernel(&psi, e.t, &kernel_tables(&pg, &bp, &prop)?, &bound, &bp)?,
        Method::Stepper => {
            evolve_stepper(&psi, e.t, &pg, &bp, &bound, &StepperSettings::default())?
        }
    };
    let table = state_table(&r)
        .meta("t", format!("{:.17e}", r.t))
        .meta("method", r.method.name())
        .meta("norm_in", format!("{:.17e}", grid.norm(&psi)))
        .meta("norm_out", format!("{:.17e}", grid.norm(&r.u)))
        .meta("norm_drift", format!("{:.17e}", r.norm_drift))
        .meta("boundary_residual", format!("{:.17e}", r.boundary_residual))
        .meta("bound_states", bound.count());
    table.write(&out.join("evolve.csv"))?;
    println!(
        "{} route, t = {}, norm drift {:.3e}, boundary residual {:.3e}, {} bound states projected out",
        r.method.name(),
        r.t,
        r.norm_drift,
        r.boundary_residual,
        bound.count()
    );
    Ok(0)
}

fn fold(cfg: &RunConfig, out: &Path) -> Result<i32, AppError> {
    let f = &cfg.fold;
    let h = cfg.grid.h;
    let lp = match &f.file {
        Some(path) => {
            let file: PotentialFile = io::read_toml(path)?;
            let lambda = cfg.coupling(file.n)?;
            let mut lp =
                LineProblem::new(file.n, file.h, file.cells(2.0)?, delta_boundary(&lambda)?)?;
            lp.coupling = Some(lambda);
            lp
        }
        None => {
            let n = (cfg.boundary.lambda_re.len() as f64)
                .sqrt()
                .round()
                .max(1.0) as usize;
            LineProblem::delta(n, h, f.x_max, &cfg.coupling(n)?, |_| linalg::zeros(n))?
        }
    };
    let n = lp.n;
    let grid = StateGrid::new(n, lp.h, f.length)?;
    let v0 = LineState::from_fn(grid, |x| CVec::from_element(n, f.packet.at(x)));
    let settings = LineSettings {
        method: f.method.into(),
        ..LineSettings::default()
    };
    let r = evolve_line(&lp, &v0, f.t, &settings)?;

    let mut columns = vec!["x".to_string(), "side".into()];
    for c in 0..n {
        columns.push(format!("re_{c}"));
        columns.push(format!("im_{c}"));
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new(&cols)
        .meta("t", format!("{:.17e}", r.t))
        .meta("method", settings.method.name())
        .meta("bound_states", r.bound_count)
        .meta("norm_drift", format!("{:.17e}", r.norm_drift));
    if let Some(lambda) = &lp.coupling {
        let (jump, kink) = transmission_residual(&r.v, lambda);
        table = table
            .meta("jump_residual", format!("{jump:.17e}"))
            .meta("kink_residual", format!("{kink:.17e}"));
    }
    // left half from the far end to 0-, then 0+ to the right end
    let push = |table: &mut Table, j: usize, side: i8| {
        let mut row = vec![f64::from(side) * grid.x(j), f64::from(side)];
        for z in r.v.at(j, side) {
            row.push(z.re);
            row.push(z.im);
        }
        table.push(row);
    };
    for j in (0..grid.nodes).rev() {
        push(&mut table, j, -1);
    }
    for j in 0..grid.nodes {
        push(&mut table, j, 1);
    }
    table.write(&out.join("fold.csv"))?;
    println!(
        "line evolution to t = {}: {} bound states, norm drift {:.3e}",
        r.t, r.bound_count, r.norm_drift
    );
    Ok(0)
}

fn doubling_times(t_max: f64) -> Vec<f64> {
    let mut ts = vec![1.0];
    while ts[ts.len() - 1] * 2.0 <= t_max * (1.0 + 1e-12) {
        ts.push(ts[ts.len() - 1] * 2.0);
    }
    ts
}

fn decay(cfg: &RunConfig, out: &Path) -> Result<i32, AppError> {
    let (pg, bp, prop) = setup(cfg)?;
    let d = &cfg.decay;
    let kt = kernel_tables(&pg, &bp, &prop)?;
    let ts = doubling_times(d.t_max);
    let report = if d.p == 1.0 {
        let nodes = node_box(pg.h, d.box_max, d.stride);
        decay_fit(&kt, &ts, &nodes, &nodes)?
    } else {
        let bound = bound_set(cfg, &pg, &bp, &prop, d.length)?;
        let grid = bound.grid;
        // x times the packet vanishes at 0, so it suits every boundary
        let psi = packet_state(&grid, &d.packet, |x| x);
        lp_sample_bound(&grid, &psi, d.p, &ts, |p, t| {
            evolve_kernel(p, t, &kt, &bound, &bp).map(|r| r.u)
        })?
    };
    let mut table = Table::new(&["t", "value"])
        .meta("p", format!("{:.17e}", report.p))
        .meta("slope", format!("{:.17e}", report.fit.slope))
        .meta(
            "slope_uncertainty",
            format!("{:.17e}", report.slope_uncertainty()),
        )
        .meta("expected_slope", format!("{:.17e}", report.expected_slope))
        .meta("constant", format!("{:.17e}", report.constant));
    for (t, v) in report.ts.iter().zip(&report.values) {
        table.push(vec![*t, *v]);
    }
    table.write(&out.join("decay.csv"))?;
    println!(
        "p = {}: slope {:.4} +- {:.1e} (expected {:.4}), empirical constant {:.4e}",
        report.p,
        report.fit.slope,
        report.slope_uncertainty(),
        report.expected_slope,
        report.constant
    );
    Ok(0)
}

fn strichartz(cfg: &RunConfig, out: &Path) -> Result<i32, AppError> {
    let (pg, bp, prop) = setup(cfg)?;
    let s = &cfg.strichartz;
    let kt = kernel_tables(&pg, &bp, &prop)?;
    let bound = bound_set(cfg, &pg, &bp, &prop, s.length)?;
    let grid = bound.grid;
    let phi = packet_state(&grid, &s.packet, |x| x);
    let windows = StrichartzWindows {
        t_min: s.t_min,
        first_octaves: s.octaves,
        doublings: s.doublings,
        per_octave: s.per_octave,
    };
    let rep = strichartz_norm(&grid, &phi, s.q, s.r, &windows, |p: &[Complex64], t| {
        evolve_kernel(p, t, &kt, &bound, &bp).map(|r| r.u)
    })?;
    let mut table = Table::new(&["t", "norm"])
        .meta("q", format!("{:.17e}", rep.q))
        .meta("r", format!("{:.17e}", rep.r))
        .meta("input_norm", format!("{:.17e}", rep.input_norm))
        .meta("ratio", format!("{:.17e}", rep.ratio()))
        .meta("convergence", format!("{:.17e}", rep.convergence()));
    for (t, v) in &rep.samples {
        table.push(vec![*t, *v]);
    }
    table.write(&out.join("strichartz.csv"))?;
    for (t, ratio) in &rep.windows {
        println!("T = {t:.4}: ratio {ratio:.6}");
    }
    println!(
        "(q, r) = ({}, {}): ratio {:.6}, change over the last doubling {:.2e}",
        rep.q,
        rep.r,
        rep.ratio(),
        rep.convergence()
    );
    Ok(0)
}

fn selftest(out: &Path) -> Result<i32, AppError> {
    let mut text = String::new();
    let mut all = true;
    for id in 1..=acceptance::CRITERIA.len() {
        let o = acceptance::run(id);
        println!("{}", o.line());
        text.push_str(&o.line());
        text.push('\n');
        all &= o.ok();
    }
    fs::write(out.join("selftest.txt"), text)?;
    Ok(if all { 0 } else { 1 })
}
