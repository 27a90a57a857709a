use clap::{Parser, Subcommand};
use memdarcy::cell_corrector::decay_diagnostics;
use memdarcy::checks::{self, Check};
use memdarcy::config::RunConfig;
use memdarcy::darcy_memory::{check_homogenized, pressure_norms};
use memdarcy::io::{write_field, write_text, FieldHeader};
use memdarcy::mac::MacGrid;
use memdarcy::pipeline::{cell_stage, content_hash, macro_stage, run_sweep, Cache, SweepReport};
use memdarcy::{Error, Result};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "memdarcy", version, about = "Homogenization lab for unsteady Stokes flow in perforated domains")]
struct Cli {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's `output`).
    #[arg(long, global = true, env = "MEMDARCY_OUT")]
    out: Option<PathBuf>,
    /// Concurrent ε pipelines.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cell and perforated-domain masks.
    Cell,
    /// Correctors, permeability kernel and decay diagnostics.
    Kernel,
    /// Darcy-with-memory solve on the macroscopic grid.
    Homogenize,
    /// Fine-scale solves and error norms for every ε; writes report.json.
    Fine,
    /// Acceptance checks.
    Verify {
        /// Exit with status 3 if any check fails.
        #[arg(long)]
        strict: bool,
    },
    /// report.json, rates.csv and plot data.
    Rates,
}

struct Run {
    cfg: RunConfig,
    out: PathBuf,
    jobs: usize,
    start: Instant,
}

impl Run {
    fn log(&self, msg: &str) {
        eprintln!("[{:>7.1}s] {msg}", self.start.elapsed().as_secs_f64());
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        write_text(&self.out, name, text)?;
        self.log(&format!("wrote {}", self.out.join(name).display()));
        Ok(())
    }

    fn sweep(&self) -> Result<SweepReport> {
        let cache = Cache::new(&self.out.join("cache"))?;
        let log = |m: &str| eprintln!("[{:>7.1}s] {m}", self.start.elapsed().as_secs_f64());
        let report = run_sweep(&self.cfg, Some(&cache), self.jobs, &log)?;
        self.write("report.json", &report.to_json())?;
        Ok(report)
    }

    fn header(&self, name: &str, grid: &MacGrid, t: Option<f64>, nodes: usize) -> Result<FieldHeader> {
        let cell = self.cfg.cell_geometry::<f64>()?;
        Ok(FieldHeader {
            name: name.into(),
            nx: grid.nx,
            ny: grid.ny,
            t,
            time_nodes: nodes,
            horizon: self.cfg.time.horizon,
            geometry_hash: content_hash("mask", &cell.solid),
        })
    }

    fn cell(&self) -> Result<()> {
        let cell = self.cfg.cell_geometry::<f64>()?;
        self.write("cell.pgm", &cell.to_pgm())?;
        let mut domains = Vec::new();
        for &eps in &self.cfg.sweep.epsilons {
            let dom = self.cfg.domain(&cell, eps)?;
            self.write(&format!("domain_eps{}.pgm", dom.cells_per_side), &dom.to_pgm())?;
            domains.push(json!({
                "eps": eps,
                "n": dom.n,
                "obstacles": dom.kept.len(),
                "obstacle_margin": dom.obstacle_margin(),
                "fluid_measure": dom.fluid_measure(),
                "connected": dom.fluid_connected(),
            }));
        }
        let summary = json!({
            "shape": cell.shape,
            "obstacle_extent": cell.extent,
            "n_cell": cell.n_cell,
            "fluid_fraction": cell.fluid_fraction,
            "connected": cell.fluid_connected(),
            "mask_hash": content_hash("mask", &cell.solid),
            "domains": domains,
        });
        self.write("cell.json", &serde_json::to_string_pretty(&summary)?)
    }

    fn kernel(&self) -> Result<()> {
        let time = self.cfg.kernel_time()?;
        self.log(&format!("correctors on the graded grid, M = {}", time.steps));
        let st = cell_stage::<f64>(&self.cfg, &time, false)?;
        let k = &st.kernel;
        let decay = decay_diagnostics(&st.traj, k, None)?;
        self.write("kernel.csv", &k.to_csv())?;
        let summary = json!({
            "fluid_fraction": k.fluid_fraction,
            "a0_plus": k.a0_plus,
            "initial_defect": k.initial_defect(),
            "symmetry_defect": k.symmetry_defect(),
            "min_eigenvalue": k.min_eigenvalue(),
            "trace_nonincreasing": k.trace_nonincreasing(),
            "derivative_l1": k.derivative_l1,
            "corrector_max_divergence": st.traj.iter().map(|t| t.max_divergence()).fold(0.0, f64::max),
            "decay": decay,
        });
        self.write("kernel.json", &serde_json::to_string_pretty(&summary)?)?;
        let last = time.len() - 1;
        for tr in &st.traj {
            let (u, v) = tr.grid.cell_average(&tr.w[last]);
            for (comp, vals) in [("x", u), ("y", v)] {
                let name = format!("W{}_{comp}", tr.dir + 1);
                let h = self.header(&name, &tr.grid, Some(time.t[last]), time.len())?;
                self.write(&format!("fields/{name}.txt"), &write_field(&h, &vals)?)?;
            }
        }
        Ok(())
    }

    fn homogenize(&self) -> Result<()> {
        let time = self.cfg.sweep_time()?;
        self.log("kernel on the uniform grid");
        let st = cell_stage::<f64>(&self.cfg, &time, false)?;
        self.log(&format!("homogenized solve, N = {}", self.cfg.sweep.n_macro));
        let mac = macro_stage::<f64>(&self.cfg, &st.kernel)?;
        let sol = &mac.solution;
        let res = check_homogenized(&mac.grid, &sol.u);
        let (grad_p, p) = pressure_norms(&mac.grid, &time, &sol.p);
        let summary = json!({
            "n_macro": self.cfg.sweep.n_macro,
            "leading": sol.leading,
            "c1": sol.c1,
            "max_contraction_ratio": sol.max_contraction_ratio(),
            "windows": sol.windows,
            "max_divergence": res.max_divergence(),
            "max_normal_flux": res.max_normal_flux(),
            "pressure_gradient_norm": grad_p,
            "pressure_norm": p,
        });
        self.write("homogenized.json", &serde_json::to_string_pretty(&summary)?)?;
        let last = time.len() - 1;
        let h = self.header("p0", &mac.grid, Some(time.t[last]), time.len())?;
        self.write("fields/p0.txt", &write_field(&h, &sol.p[last])?)
    }

    fn rates(&self) -> Result<()> {
        let report = self.sweep()?;
        self.write("rates.csv", &report.rates_csv())?;
        for (name, text) in report.plot_data() {
            self.write(&format!("plot/{name}"), &text)?;
        }
        Ok(())
    }

    fn verify(&self) -> Result<bool> {
        let cfg = &self.cfg;
        let mut all: Vec<Check> = Vec::new();
        let steps: [(&str, fn(&RunConfig) -> Result<Check>); 5] = [
            ("kernel structure", checks::kernel_structure),
            ("trivial cell", checks::trivial_cell),
            ("corrector energy", checks::corrector_energy),
            ("fixed-point solver", checks::fixed_point),
            ("semigroup relation", checks::semigroup),
        ];
        for (name, f) in steps {
            self.log(name);
            let c = f(cfg)?;
            println!("{}", c.line());
            all.push(c);
        }
        let report = self.sweep()?;
        for c in checks::sweep_checks(&report) {
            println!("{}", c.line());
            all.push(c);
        }
        all.sort_by_key(|c| c.id);
        self.write("verify.json", &serde_json::to_string_pretty(&all)?)?;
        let failed = all.iter().filter(|c| !c.pass).count();
        println!("{} of {} checks passed", all.len() - failed, all.len());
        Ok(failed == 0)
    }
}

fn output_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| Path::new("memdarcy-out").to_path_buf())
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let out = output_dir(cli.out, &cfg);
    let r = Run { cfg, out, jobs: cli.jobs, start: Instant::now() };
    match cli.cmd {
        Cmd::Cell => r.cell()?,
        Cmd::Kernel => r.kernel()?,
        Cmd::Homogenize => r.homogenize()?,
        Cmd::Fine => {
            r.sweep()?;
        }
        Cmd::Rates => r.rates()?,
        Cmd::Verify { strict } => {
            let ok = r.verify()?;
            return Ok(ok || !strict);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
