//! Command-line driver. Every run reads one config file (JSON or
//! TOML), executes a single subcommand, and writes one artifact that
//! embeds the manifest which produced it: JSON reports carry it under
//! a `manifest` key, CSV tables as `#`-prefixed header comments.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use semiscat::config::{load_config, RunConfig};
use semiscat::flow::{certify_nontrapping, follow, PhasePoint};
use semiscat::forward::{fibonacci_sphere, generate_rays, synthesize_dataset, ExperimentConfig};
use semiscat::inversion::{
    fit_powers, plan_for_inversion, reconstruct, schwartz_diagnostic, DecayVerdict, RayData,
};
use semiscat::manifest::RunManifest;
use semiscat::symbols::generate_lattice;
use semiscat::xray::{xray_full_line, Ray};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "semiscat",
    version,
    about = "Semiclassical scattering expansions and X-ray inversion for homogeneous potential tails"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config file, JSON or TOML.
    #[arg(long, global = true, default_value = "semiscat.json")]
    config: PathBuf,
    /// Artifact path; defaults to <subcommand>.json or .csv.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 or absent keeps the library default.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Sample the potential on radial profiles (CSV).
    PotentialEval,
    /// Trajectory sample table: endpoints and energy drift (CSV).
    Flow,
    /// Monte Carlo non-trapping certificate (JSON).
    Certify,
    /// Full-line transforms along the configured ray set (CSV).
    Xray,
    /// Exponent lattice with provenances (JSON).
    Lattice {
        /// Upper bound for the enumerated exponents.
        #[arg(long, default_value_t = 5.0)]
        nu_max: f64,
    },
    /// Synthesize the matrix-element dataset over the h grid (JSON).
    Forward,
    /// Fit power-series coefficients per ray of a dataset (JSON).
    Fit {
        /// Dataset file produced by `forward`.
        #[arg(long)]
        data: PathBuf,
    },
    /// Recover the angular profiles from a dataset (JSON).
    Invert {
        #[arg(long)]
        data: PathBuf,
    },
    /// Compare the decay of two datasets ray by ray (JSON).
    Diagnose {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        other: PathBuf,
    },
    /// forward + fit + invert + error report in one run (JSON).
    Roundtrip,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::PotentialEval => "potential-eval",
            Command::Flow => "flow",
            Command::Certify => "certify",
            Command::Xray => "xray",
            Command::Lattice { .. } => "lattice",
            Command::Forward => "forward",
            Command::Fit { .. } => "fit",
            Command::Invert { .. } => "invert",
            Command::Diagnose { .. } => "diagnose",
            Command::Roundtrip => "roundtrip",
        }
    }

    fn default_out(&self) -> &'static str {
        match self {
            Command::PotentialEval => "potential-eval.csv",
            Command::Flow => "flow.csv",
            Command::Certify => "certify.json",
            Command::Xray => "xray.csv",
            Command::Lattice { .. } => "lattice.json",
            Command::Forward => "forward.json",
            Command::Fit { .. } => "fit.json",
            Command::Invert { .. } => "invert.json",
            Command::Diagnose { .. } => "diagnose.json",
            Command::Roundtrip => "roundtrip.json",
        }
    }
}

/// On-disk dataset: the forward output and the inverse-side input.
#[derive(Serialize, Deserialize)]
struct DatasetFile {
    manifest: RunManifest,
    experiment: ExperimentConfig,
    exponents: Vec<f64>,
    truncation: usize,
    rays: Vec<RayData>,
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let started = Instant::now();

    let config_bytes = std::fs::read(&cli.config)
        .with_context(|| format!("cannot read config {}", cli.config.display()))?;
    let mut cfg = load_config(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let workers = cli.workers.unwrap_or(cfg.workers);
    if workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("warning: worker pool already initialized: {e}");
        }
    }

    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(cli.command.default_out()));
    let mut manifest = RunManifest::new(
        cli.command.name(),
        &cli.config.display().to_string(),
        &config_bytes,
        cfg.seed,
    );
    manifest.outputs.push(out.display().to_string());

    match cli.command.clone() {
        Command::PotentialEval => potential_eval(&cfg, manifest, started, &out),
        Command::Flow => flow_table(&cfg, manifest, started, &out),
        Command::Certify => certify(&cfg, manifest, started, &out),
        Command::Xray => xray_table(&cfg, manifest, started, &out),
        Command::Lattice { nu_max } => lattice(&cfg, nu_max, manifest, started, &out),
        Command::Forward => forward(&cfg, manifest, started, &out),
        Command::Fit { data } => fit(&cfg, &data, manifest, started, &out),
        Command::Invert { data } => invert(&cfg, &data, manifest, started, &out),
        Command::Diagnose { data, other } => diagnose(&data, &other, manifest, started, &out),
        Command::Roundtrip => roundtrip(&cfg, manifest, started, &out),
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_csv(path: &Path, manifest: &RunManifest, header: &str, rows: &[String]) -> Result<()> {
    let mut text = manifest.csv_comment();
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn read_dataset(path: &Path) -> Result<DatasetFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read dataset {}", path.display()))?;
    let ds: DatasetFile = serde_json::from_str(&text)
        .with_context(|| format!("cannot parse dataset {}", path.display()))?;
    Ok(ds)
}

fn potential_eval(
    cfg: &RunConfig,
    mut manifest: RunManifest,
    started: Instant,
    out: &Path,
) -> Result<()> {
    let ev = &cfg.eval;
    let dirs = fibonacci_sphere(ev.directions);
    let radii = semiscat::forward::log_h_grid(ev.radii, ev.r_min, ev.r_max);
    let mut rows = Vec::new();
    for u in &dirs {
        for &r in &radii {
            let x = [r * u[0], r * u[1], r * u[2]];
            let v = cfg.potential.eval(x);
            rows.push(format!(
                "{},{},{},{},{},{},{},{v:.17e}",
                u[0], u[1], u[2], r, x[0], x[1], x[2]
            ));
        }
    }
    manifest.finish(started);
    write_csv(out, &manifest, "ux,uy,uz,r,x,y,z,value", &rows)
}

fn flow_table(cfg: &RunConfig, mut manifest: RunManifest, started: Instant, out: &Path) -> Result<()> {
    let fl = &cfg.flow;
    let energy = fl.certify.energy;
    let n = fl.samples.max(1);
    let positions = fibonacci_sphere(n);
    let directions = fibonacci_sphere(n);
    let r0 = 0.5 * fl.certify.sample_radius;
    let mut rows = Vec::new();
    let mut skipped = 0usize;
    for i in 0..n {
        let p = positions[i];
        let x = [r0 * p[0], r0 * p[1], r0 * p[2]];
        let kinetic = energy - cfg.potential.eval(x);
        if kinetic <= 0.0 {
            skipped += 1;
            continue;
        }
        let d = directions[(i + n / 2) % n];
        let speed = kinetic.sqrt();
        let start = PhasePoint {
            x,
            xi: [speed * d[0], speed * d[1], speed * d[2]],
        };
        for t in [fl.time, -fl.time] {
            let traj = follow(&cfg.potential, start, t, &cfg.ode)?;
            let r_end: f64 = traj.end.x.iter().map(|c| c * c).sum::<f64>().sqrt();
            rows.push(format!(
                "{},{},{},{},{},{},{t},{r_end:.17e},{:.17e},{}",
                start.x[0],
                start.x[1],
                start.x[2],
                start.xi[0],
                start.xi[1],
                start.xi[2],
                traj.energy_drift,
                traj.steps,
            ));
        }
    }
    if rows.is_empty() {
        bail!("all {n} flow samples start in the classically forbidden region (skipped {skipped})");
    }
    manifest.finish(started);
    write_csv(
        out,
        &manifest,
        "x0,y0,z0,xi0,eta0,zeta0,t,r_end,energy_drift,steps",
        &rows,
    )
}

fn certify(cfg: &RunConfig, mut manifest: RunManifest, started: Instant, out: &Path) -> Result<()> {
    let mut settings = cfg.flow.certify.clone();
    settings.seed = cfg.seed;
    let report = certify_nontrapping(&cfg.potential, &settings, &cfg.ode)?;
    manifest.finish(started);
    write_json(out, &json!({ "manifest": manifest, "report": report }))
}

fn xray_table(cfg: &RunConfig, mut manifest: RunManifest, started: Instant, out: &Path) -> Result<()> {
    let rays = generate_rays(&cfg.rays)?;
    let mut rows = Vec::new();
    for (src, _) in &rays {
        let ray = Ray::orthogonalized(src.omega, src.center)?;
        let y = ray.offset();
        let value = xray_full_line(&cfg.potential, &ray, 1e-10)?;
        rows.push(format!(
            "{},{},{},{},{},{},{},{value:.17e}",
            src.omega[0],
            src.omega[1],
            src.omega[2],
            y[0],
            y[1],
            y[2],
            ray.offset_norm(),
        ));
    }
    manifest.finish(started);
    write_csv(out, &manifest, "wx,wy,wz,yx,yy,yz,dist,value", &rows)
}

fn lattice(
    cfg: &RunConfig,
    nu_max: f64,
    mut manifest: RunManifest,
    started: Instant,
    out: &Path,
) -> Result<()> {
    let rhos = cfg.potential.orders();
    let lat = generate_lattice(&rhos, cfg.experiment.delta, nu_max)?;
    manifest.finish(started);
    write_json(
        out,
        &json!({
            "manifest": manifest,
            "delta": lat.delta,
            "nu_max": lat.nu_max,
            "gammas": lat.gammas,
            "entries": lat.entries,
        }),
    )
}

fn forward(cfg: &RunConfig, mut manifest: RunManifest, started: Instant, out: &Path) -> Result<()> {
    let inv = cfg.inversion_config()?;
    let (_, plan, truncation) = plan_for_inversion(&inv)?;
    let rays = generate_rays(&cfg.rays)?;
    let h_grid = cfg.h_grid.grid();
    let data = synthesize_dataset(
        &cfg.experiment,
        &rays,
        &cfg.potential,
        &plan,
        &h_grid,
        &cfg.pairing,
    )?;
    let exponents: Vec<f64> = plan.nodes.iter().map(|n| n.nu).collect();
    let rays: Vec<RayData> = data.iter().map(RayData::from).collect();
    manifest.finish(started);
    let ds = DatasetFile {
        manifest,
        experiment: cfg.experiment.clone(),
        exponents,
        truncation,
        rays,
    };
    write_json(out, &serde_json::to_value(&ds)?)
}

fn fit(
    cfg: &RunConfig,
    data: &Path,
    mut manifest: RunManifest,
    started: Instant,
    out: &Path,
) -> Result<()> {
    manifest.inputs.push(data.display().to_string());
    let ds = read_dataset(data)?;
    let method = cfg.inversion.fit_method()?;
    let fits = ds
        .rays
        .iter()
        .map(|r| fit_powers(&r.samples, &ds.exponents, method))
        .collect::<Result<Vec<_>, _>>()?;
    manifest.finish(started);
    write_json(
        out,
        &json!({
            "manifest": manifest,
            "exponents": ds.exponents,
            "fits": fits,
        }),
    )
}

fn invert(
    cfg: &RunConfig,
    data: &Path,
    mut manifest: RunManifest,
    started: Instant,
    out: &Path,
) -> Result<()> {
    manifest.inputs.push(data.display().to_string());
    let ds = read_dataset(data)?;
    let inv = cfg.inversion_config()?;
    let result = reconstruct(&ds.rays, &inv, Some(&cfg.potential))?;
    manifest.finish(started);
    write_json(
        out,
        &json!({
            "manifest": manifest,
            "layers": result.layers,
            "errors": result.errors,
            "potential": result.potential,
        }),
    )
}

fn diagnose(
    data: &Path,
    other: &Path,
    mut manifest: RunManifest,
    started: Instant,
    out: &Path,
) -> Result<()> {
    manifest.inputs.push(data.display().to_string());
    manifest.inputs.push(other.display().to_string());
    let a = read_dataset(data)?;
    let b = read_dataset(other)?;
    if a.rays.len() != b.rays.len() {
        bail!(
            "datasets pair {} rays against {}; they must match ray for ray",
            a.rays.len(),
            b.rays.len()
        );
    }
    if a.exponents != b.exponents {
        bail!("datasets carry different exponent lattices");
    }
    let rank = |v: &DecayVerdict| match v {
        DecayVerdict::DiffersAtLeading => 0usize,
        DecayVerdict::AgreesThrough { nodes } => *nodes,
        DecayVerdict::Maximal => usize::MAX,
    };
    let mut reports = Vec::with_capacity(a.rays.len());
    for (ra, rb) in a.rays.iter().zip(&b.rays) {
        reports.push(schwartz_diagnostic(&ra.samples, &rb.samples, &a.exponents, 0.05)?);
    }
    let worst = reports
        .iter()
        .map(|r| rank(&r.verdict))
        .min()
        .unwrap_or(usize::MAX);
    let overall = reports
        .iter()
        .find(|r| rank(&r.verdict) == worst)
        .map(|r| r.verdict);
    manifest.finish(started);
    write_json(
        out,
        &json!({
            "manifest": manifest,
            "exponents": a.exponents,
            "rays": reports,
            "overall": overall,
        }),
    )
}

fn roundtrip(cfg: &RunConfig, mut manifest: RunManifest, started: Instant, out: &Path) -> Result<()> {
    let inv = cfg.inversion_config()?;
    let (_, plan, truncation) = plan_for_inversion(&inv)?;
    let ray_specs = generate_rays(&cfg.rays)?;
    let h_grid = cfg.h_grid.grid();
    let data = synthesize_dataset(
        &cfg.experiment,
        &ray_specs,
        &cfg.potential,
        &plan,
        &h_grid,
        &cfg.pairing,
    )?;
    let rays: Vec<RayData> = data.iter().map(RayData::from).collect();
    let result = reconstruct(&rays, &inv, Some(&cfg.potential))?;
    manifest.finish(started);
    write_json(
        out,
        &json!({
            "manifest": manifest,
            "rays": rays.len(),
            "h_grid": h_grid,
            "truncation": truncation,
            "layers": result.layers,
            "errors": result.errors,
            "potential": result.potential,
        }),
    )
}
