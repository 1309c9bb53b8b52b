//! Command-line front end for the `skle` library.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use skle::abm_mc::{EstimateCI, ExcursionLaw, McParams, RngStream};
use skle::annulus::{annulus_sle_trace, write_annulus_csv};
use skle::bmd_grid::{drift_grid, kernel_grid, GridConfig};
use skle::bmd_kernel::{b_bmd, default_contour, drift, neumann_series, SlitKernel};
use skle::harness::{parse_constant, parse_drift, run_experiment, ExperimentConfig, Preset, Report};
use skle::skle::{run_skle, RunManifest, SkleOptions};
use skle::{ComplexPoint, SlitVector};

#[derive(Parser)]
#[command(name = "skle", version, about = "Loewner, Komatu-Loewner and annulus SLE simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Grid,
    Mc,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum LawArg {
    ConditionedEscape,
    UniformOnSlit,
}

#[derive(clap::Args)]
struct McArgs {
    /// Walkers per Monte Carlo estimate.
    #[arg(long, default_value_t = 20_000)]
    n_walkers: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Absolute escape radius; defaults to a multiple of the obstacle size.
    #[arg(long)]
    escape_radius: Option<f64>,
    /// Capture shell relative to the obstacle scale.
    #[arg(long, default_value_t = 1e-6)]
    shell: f64,
    #[arg(long, value_enum, default_value_t = LawArg::ConditionedEscape)]
    law: LawArg,
}

impl McArgs {
    fn params(&self) -> McParams {
        McParams { shell: self.shell, escape_radius: self.escape_radius, ..McParams::default() }
    }

    fn law(&self) -> ExcursionLaw {
        match self.law {
            LawArg::ConditionedEscape => ExcursionLaw::ConditionedEscape,
            LawArg::UniformOnSlit => ExcursionLaw::UniformOnSlit,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// BMD complex Poisson kernel on a slit domain.
    Kernel {
        /// Slits as JSON `{"y":[..],"x":[..],"xr":[..]}` or a path to such a file.
        #[arg(long)]
        slits: String,
        #[arg(long, default_value_t = 0.0)]
        xi: f64,
        #[arg(long, default_value_t = 0.02)]
        grid_h: f64,
        #[arg(long, default_value_t = 200.0)]
        box_scale: f64,
        #[arg(long, value_enum, default_value_t = BackendArg::Grid)]
        backend: BackendArg,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Domain constant b_BMD with its error estimate.
    Bbmd {
        #[arg(long)]
        slits: String,
        /// Also report the extrapolated grid estimate.
        #[arg(long)]
        grid: bool,
        #[arg(long, default_value_t = 0.02)]
        grid_h: f64,
        #[arg(long, default_value_t = 200.0)]
        box_scale: f64,
    },
    /// One SKLE path: run CSV plus JSON manifest.
    SkleRun {
        #[arg(long)]
        slits: String,
        #[arg(long, default_value_t = 0.0)]
        xi0: f64,
        /// Diffusion coefficient: a number or `const:<v>`.
        #[arg(long, default_value = "const:2.449489742783178")]
        alpha: String,
        /// Drift: `zero`, `neg-bmd` or `const:<v>`.
        #[arg(long, default_value = "zero")]
        b: String,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 1.0)]
        t_max: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output CSV; the manifest is written next to it with extension `json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Annulus SLE trace from the outer circle.
    AnnulusTrace {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        kappa: f64,
        #[arg(long, default_value_t = 1e-3)]
        ds: f64,
        #[arg(long)]
        t_max: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Radial SLE against chordal SLE mapped to the disk.
    RadialCompare {
        #[arg(long, default_value_t = 500)]
        n_paths: usize,
        #[arg(long, default_value_t = 6.0)]
        kappa: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Radius of the target disk around the origin.
        #[arg(long)]
        disk_radius: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Statistical experiment preset.
    Experiment {
        #[arg(long)]
        preset: Preset,
        /// JSON file overriding preset defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Kernel { slits, xi, grid_h, box_scale, backend, mc } => {
            let s = read_slits(&slits)?;
            let grid = GridConfig { h: grid_h, box_scale, ..GridConfig::default() };
            print_json(&kernel_report(&s, xi, &grid, backend, &mc)?)
        }
        Command::Bbmd { slits, grid, grid_h, box_scale } => {
            let s = read_slits(&slits)?;
            let mut out = Map::new();
            out.insert("b_bmd".into(), serde_json::to_value(b_bmd(&s)?)?);
            if grid {
                let cfg = GridConfig { h: grid_h, box_scale, ..GridConfig::default() };
                let (_, bb, flux) = drift_grid(&s, &cfg)?;
                out.insert("grid".into(), serde_json::to_value(bb)?);
                out.insert("grid_max_flux".into(), json!(flux));
            }
            print_json(&Value::Object(out))
        }
        Command::SkleRun { slits, xi0, alpha, b, dt, t_max, seed, out } => {
            let s = read_slits(&slits)?;
            let a = parse_constant(&alpha)?;
            let alpha_fn = skle::geometry::CoefficientFunction::constant(a);
            let b_fn = parse_drift(&b)?;
            let opts = SkleOptions { track_phi: true, ..SkleOptions::new(dt, t_max) };
            let run = run_skle(&s, xi0, &alpha_fn, &b_fn, opts.clone(), RngStream::new(seed, 0))?;
            ensure_parent(&out)?;
            run.write_csv(&out)?;
            let manifest = RunManifest::new(&run, &alpha, &b, &opts, seed);
            let path = out.with_extension("json");
            fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
            print_json(&serde_json::to_value(&manifest)?)
        }
        Command::AnnulusTrace { q, kappa, ds, t_max, seed, out } => {
            let mut rng = RngStream::new(seed, 0).rng();
            let samples = annulus_sle_trace(q, kappa, ds, t_max, &mut rng)?;
            ensure_parent(&out)?;
            write_annulus_csv(&out, &samples)?;
            println!("{} samples written to {}", samples.len(), out.display());
            Ok(())
        }
        Command::RadialCompare { n_paths, kappa, dt, seed, disk_radius, out } => {
            let mut over = json!({ "n_paths": n_paths, "kappa": kappa, "dt": dt, "seed": seed });
            if let Some(r) = disk_radius {
                over["disk_radius"] = json!(r);
            }
            let cfg = ExperimentConfig::from_json(Preset::RadialCompare, &over)?;
            summarize(&run_experiment(&cfg, &out)?, &out)
        }
        Command::Experiment { preset, config, out } => {
            let over = match config {
                Some(p) => serde_json::from_str(&fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => json!({}),
            };
            let cfg = ExperimentConfig::from_json(preset, &over)?;
            summarize(&run_experiment(&cfg, &out)?, &out)
        }
    }
}

fn read_slits(arg: &str) -> Result<SlitVector> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading slits from {arg}"))?
    };
    serde_json::from_str(&text).context("slits must be {\"y\":[..],\"x\":[..],\"xr\":[..]}")
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn print_json(v: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn summarize(report: &Report, out: &Path) -> Result<()> {
    for c in &report.comparisons {
        println!(
            "{} vs {} [{}]: D = {:.4}, p = {:.4}, expect {:?}: {}",
            c.first,
            c.second,
            c.ks.functional,
            c.ks.statistic,
            c.ks.p_value,
            c.expect,
            if c.passed { "pass" } else { "fail" }
        );
    }
    println!("report written to {}", out.join("report.json").display());
    Ok(())
}

fn kernel_report(s: &SlitVector, xi: f64, grid: &GridConfig, backend: BackendArg, mc: &McArgs) -> Result<Value> {
    let spectral = SlitKernel::solve(&s.shift(xi), 0.0)?;
    let n = s.len();
    let slit_values: Vec<f64> = (0..n).map(|j| spectral.slit_value(j)).collect();
    let endpoints: Vec<[f64; 2]> = (0..n)
        .map(|j| {
            let (l, r) = spectral.endpoint_values(j);
            [l.re, r.re]
        })
        .collect();
    let samples: Vec<Value> = sample_points(s, xi)
        .into_iter()
        .map(|z| {
            let psi = spectral.psi(z - xi).map(|w| json!([w.re, w.im])).unwrap_or(Value::Null);
            json!({ "z": [z.re, z.im], "psi": psi })
        })
        .collect();
    let mut out = json!({
        "slits": s,
        "xi": xi,
        "samples": samples,
        "spectral": {
            "terms": spectral.terms(),
            "slit_values": slit_values,
            "endpoint_re": endpoints,
            "regular_part": spectral.regular_part_at_pole(),
        },
    });
    if n == 0 {
        return Ok(out);
    }
    let d = drift(&s.shift(xi))?;
    out["spectral"]["b"] = json!(d.b);
    out["spectral"]["b_bmd"] = json!(d.b_bmd);
    let mut grid_vals = None;
    if backend != BackendArg::Mc {
        let g = kernel_grid(s, xi, grid)?;
        grid_vals = Some(g.slit_values.clone());
        out["grid"] = serde_json::to_value(&g)?;
    }
    if backend != BackendArg::Grid {
        let contours: Vec<_> = (0..n).map(|j| default_contour(s, &[], j)).collect();
        let p = move |z: ComplexPoint| (z.im / std::f64::consts::PI) / ((z.re - xi).powi(2) + z.im * z.im);
        let sys = neumann_series(s, &[], &contours, &p, mc.n_walkers, mc.law(), &mc.params(), RngStream::new(mc.seed, 0))?;
        out["mc"] = json!({
            "slit_values": sys.v_star,
            "delta0": sys.delta0,
            "tail_bound": sys.tail_bound,
            "bound_holds": sys.bound_holds(),
        });
        if let Some(gv) = grid_vals {
            out["discrepancy"] = discrepancy(&gv, &sys.v_star);
        }
    }
    Ok(out)
}

fn discrepancy(grid: &[f64], mc: &[EstimateCI]) -> Value {
    let rows: Vec<Value> = grid
        .iter()
        .zip(mc)
        .map(|(g, m)| {
            let diff = m.value - g;
            let z = if m.std_error > 0.0 { (diff.abs() - m.bias_bound).max(0.0) / m.std_error } else { f64::INFINITY };
            json!({ "difference": diff, "z_score": z })
        })
        .collect();
    let max_z = rows.iter().filter_map(|r| r["z_score"].as_f64()).fold(0.0, f64::max);
    if !max_z.is_finite() {
        return json!({ "per_slit": rows, "max_z_score": Value::Null });
    }
    json!({ "per_slit": rows, "max_z_score": max_z, "within_3_sigma": max_z <= 3.0 })
}

fn sample_points(s: &SlitVector, xi: f64) -> Vec<ComplexPoint> {
    let mut pts = vec![ComplexPoint::new(xi, 0.5), ComplexPoint::new(xi + 1.0, 1.0), ComplexPoint::new(xi - 1.0, 2.0)];
    for j in 0..s.len() {
        pts.push(s.center(j) + ComplexPoint::new(0.0, 0.5 * s.half_length(j).min(s.min_height())));
    }
    pts.retain(|z| s.distance(*z).0 > 0.0);
    pts
}
