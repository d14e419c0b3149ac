use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use multizeta::dataset::{synth_potential, DEFAULT_BOX_HALFWIDTH};
use multizeta::diagnostics::gaussian_mass_within;
use multizeta::experiment::{run_correlate, run_locality, run_scan, ExperimentConfig, SCAN_CSV};
use multizeta::{Error, KernelFamily, Result};

#[derive(Parser)]
#[command(name = "multizeta", version, about = "Multi-zeta rectangular kernel regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan the length parameter for single- and multi-zeta kernels.
    Scan(ConfigArgs),
    /// Kernel-entry distributions at a given (or the best scanned) length.
    Locality {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        l: Option<f64>,
    },
    /// Exact-vs-predicted data for one fitted variant.
    Correlate {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        l: Option<f64>,
        /// `single_zeta`, `double_zeta` or `multi_zeta`.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Write a synthetic potential dataset as CSV.
    GenData {
        #[arg(long)]
        dimension: usize,
        #[arg(long)]
        n_points: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_BOX_HALFWIDTH)]
        halfwidth: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Table of standard Gaussian mass within radius r in D dimensions.
    Mass {
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 3, 6, 15])]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5f64, 1.0, 2.0, 3.0])]
        radii: Vec<f64>,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    n_centers: Option<usize>,
    #[arg(long)]
    kernel: Option<KernelFamily>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::from_file(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(n) = self.n_centers {
            cfg.n_centers = n;
        }
        if let Some(k) = self.kernel {
            cfg.kernel = k;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Scan(args) => {
            let cfg = args.load()?;
            let result = run_scan(&cfg)?;
            for v in &result.variants {
                match (v.best_l, v.best_mean_test_rmse) {
                    (Some(l), Some(rmse)) => println!("{}: best l = {l:.4}, mean test rmse = {rmse:.6}", v.name),
                    _ => println!("{}: no successful fits", v.name),
                }
            }
            println!("wrote {}", cfg.output_dir.join(SCAN_CSV).display());
        }
        Command::Locality { common, l } => {
            let cfg = common.load()?;
            for r in run_locality(&cfg, l)? {
                println!(
                    "D={} l={:.4} zeta={} min={:.4} median={:.4} max={:.4}",
                    r.dimension,
                    r.length,
                    r.zeta_index,
                    r.min(),
                    r.median(),
                    r.max()
                );
            }
        }
        Command::Correlate { common, l, variant } => {
            let cfg = common.load()?;
            let s = run_correlate(&cfg, l, variant.as_deref())?;
            let r = |m: &multizeta::Metrics| m.correlation_r.map_or("n/a".to_string(), |r| format!("{r:.2}"));
            println!("train: R = {}, rmse = {:.6}", r(&s.train), s.train.rmse);
            match &s.test {
                Some(t) => println!("test: R = {}, rmse = {:.6}", r(t), t.rmse),
                None => println!("test: empty"),
            }
        }
        Command::GenData { dimension, n_points, seed, halfwidth, out } => {
            synth_potential(dimension, n_points, seed, halfwidth)?.write_csv(&out)?;
        }
        Command::Mass { dims, radii, out } => {
            let mut text = String::from("dimension,r,mass\n");
            for &d in &dims {
                for &r in &radii {
                    text.push_str(&format!("{d},{r:?},{:?}\n", gaussian_mass_within(d, r)));
                }
            }
            match out {
                Some(p) => std::fs::write(&p, text).map_err(|e| Error::Io { path: p, source: e })?,
                None => std::io::stdout()
                    .write_all(text.as_bytes())
                    .map_err(|e| Error::Io { path: "<stdout>".into(), source: e })?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("multizeta: error: {e}");
            ExitCode::FAILURE
        }
    }
}
