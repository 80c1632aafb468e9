//! Command-line driver: estimation, simulation, Monte Carlo experiments,
//! and RD-plot data. Exit codes: 0 success, 1 input error, 2 estimation
//! degenerate.

// `!(x > 0.0)` guards reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bdd::bandwidth::{self, BandwidthResult};
use bdd::curve::{self, CurveMethod, CurveReport, CurveResult, GridSpec, Weighting};
use bdd::data::{load_dataset, write_dataset_string};
use bdd::dgp::DgpSpec;
use bdd::emit::{fmt_f64, fmt_opt, to_json_string};
use bdd::error::Error;
use bdd::frame::SampleFrame;
use bdd::geometry::{read_boundary_file, Boundary, SegmentPartition};
use bdd::mc::{monte_carlo, HSource, McEstimator};
use bdd::pooled::{self, BinScheme, PooledSpec};
use bdd::regress::KernelKind;

#[derive(Parser)]
#[command(name = "bdd", version, about = "Boundary discontinuity design estimation and inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate treatment effects from a dataset and a boundary file.
    Estimate(EstimateArgs),
    /// Draw a dataset from a DGP spec and write it with a truth sidecar.
    Simulate(SimulateArgs),
    /// Monte Carlo coverage/bias experiment over a DGP.
    Mc(McArgs),
    /// Binned outcome means against the signed distance.
    Rdplot(RdplotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Uniform,
    Triangular,
    Epanechnikov,
}

impl From<KernelArg> for KernelKind {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Uniform => KernelKind::Uniform,
            KernelArg::Triangular => KernelKind::Triangular,
            KernelArg::Epanechnikov => KernelKind::Epanechnikov,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct EstimateArgs {
    /// CSV file with a y,x1,x2 header.
    #[arg(long)]
    data: PathBuf,
    /// Boundary file (see README for the format).
    #[arg(long)]
    boundary: PathBuf,
    /// Specification: 1..8, `distance`, or `location`.
    #[arg(long)]
    spec: String,
    /// Polynomial order.
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Bias-correction order; omit for conventional inference only.
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, value_enum, default_value = "triangular")]
    kernel: KernelArg,
    /// Bandwidth: a number, or `mse` for the plug-in selector.
    #[arg(long, default_value = "mse", allow_hyphen_values = true)]
    h: String,
    /// Number of boundary grid points for curve methods.
    #[arg(long, default_value_t = 40)]
    grid: usize,
    /// Segment count for an equal-arclength partition (ignored when the
    /// boundary file carries an explicit partition).
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "json")]
    out: OutFormat,
    /// Seed for the uniform-band draws.
    #[arg(long, default_value_t = 20250801)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    band_draws: usize,
    /// Write to a file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// DGP spec file (flat key = value text).
    #[arg(long)]
    dgp_spec: PathBuf,
    /// Output CSV path; the truth sidecar goes to `<out>.truth.json`.
    #[arg(long)]
    out: PathBuf,
    /// Override the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the spec's sample size.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    dgp_spec: PathBuf,
    /// Estimator: 1..8, `distance`, or `location`.
    #[arg(long)]
    spec: String,
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, value_enum, default_value = "triangular")]
    kernel: KernelArg,
    #[arg(long, default_value = "mse", allow_hyphen_values = true)]
    h: String,
    #[arg(long, default_value_t = 20)]
    grid: usize,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long, default_value_t = 20250801)]
    seed: u64,
    #[arg(long, default_value_t = 2_000)]
    band_draws: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RdplotArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    boundary: PathBuf,
    /// Bins per side.
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[arg(long, value_enum, default_value = "evenly-spaced")]
    scheme: SchemeArg,
    /// Restrict to |D| <= h; omit to use the full support.
    #[arg(long, allow_hyphen_values = true)]
    h: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    EvenlySpaced,
    Quantile,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage text on bad flags; parse problems are input errors
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Estimate(args) => run_estimate(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Mc(args) => run_mc(args),
        Command::Rdplot(args) => run_rdplot(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::EmptyWindow
        | Error::DegenerateDesign(_)
        | Error::PilotDegenerate(_)
        | Error::AllWeightsZero => 2,
        _ => 1,
    }
}

enum HArg {
    Fixed(f64),
    Mse,
}

fn parse_h(text: &str) -> Result<HArg, Error> {
    if text == "mse" {
        return Ok(HArg::Mse);
    }
    let v: f64 = text
        .parse()
        .map_err(|_| Error::invalid(format!("bad bandwidth `{text}`: expected a number or `mse`")))?;
    if !(v > 0.0) {
        return Err(Error::NonpositiveBandwidth);
    }
    Ok(HArg::Fixed(v))
}

enum SpecArg {
    Pooled(u8),
    Curve(CurveMethod),
}

fn parse_spec(text: &str) -> Result<SpecArg, Error> {
    match text {
        "distance" => Ok(SpecArg::Curve(CurveMethod::Distance)),
        "location" => Ok(SpecArg::Curve(CurveMethod::Location)),
        other => {
            let id: u8 = other
                .parse()
                .map_err(|_| Error::invalid(format!("bad spec `{other}`: expected 1..8, distance, or location")))?;
            if !(1..=8).contains(&id) {
                return Err(Error::invalid(format!("spec id {id} outside 1..8")));
            }
            Ok(SpecArg::Pooled(id))
        }
    }
}

fn write_out(output: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_inputs(
    data: &Path,
    boundary_path: &Path,
    segments: Option<usize>,
) -> Result<(SampleFrame, Boundary, usize), Error> {
    let ds = load_dataset(data)?;
    let (boundary, file_partition) = read_boundary_file(boundary_path)?;
    let partition = match (file_partition, segments) {
        (Some(p), None) => Some(p),
        (Some(p), Some(l)) => {
            if p.n_pieces() != l {
                return Err(Error::invalid(format!(
                    "--segments {l} conflicts with the boundary file's {}-piece partition",
                    p.n_pieces()
                )));
            }
            Some(p)
        }
        (None, Some(l)) => Some(SegmentPartition::uniform(&boundary, l)?),
        (None, None) => None,
    };
    let l = partition.as_ref().map_or(1, SegmentPartition::n_pieces);
    let frame = SampleFrame::derive(&ds, &boundary, partition.as_ref())?;
    Ok((frame, boundary, l))
}

fn run_estimate(args: EstimateArgs) -> Result<(), Error> {
    let spec_arg = parse_spec(&args.spec)?;
    let h_arg = parse_h(&args.h)?;
    let kernel: KernelKind = args.kernel.into();
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    let (frame, boundary, l) = load_inputs(&args.data, &args.boundary, args.segments)?;

    match spec_arg {
        SpecArg::Pooled(id) => {
            let (h, bw) = match h_arg {
                HArg::Fixed(v) => (v, None),
                HArg::Mse => {
                    let proxy_p = if id <= 3 { args.p.max(1) } else { args.p };
                    let bw = bandwidth::h_mse_pooled(&frame, proxy_p, kernel, Some(&boundary))?;
                    (bw.h, Some(bw))
                }
            };
            let spec = PooledSpec::new(id, args.p, l, kernel, h)?;
            let mut est = match args.q {
                Some(q) => pooled::estimate_rbc(&spec, &frame, q, args.alpha)?,
                None => pooled::estimate(&spec, &frame, args.alpha)?,
            };
            est.bandwidth = bw;
            let text = match args.out {
                OutFormat::Json => to_json_string(&est).map_err(|e| Error::invalid(e.to_string()))?,
                OutFormat::Csv => pooled_csv(&est),
            };
            write_out(&args.output, &text)
        }
        SpecArg::Curve(method) => {
            let grid = GridSpec::new(&boundary, args.grid)?;
            let (h, bw) = match h_arg {
                HArg::Fixed(v) => (v, None),
                HArg::Mse => {
                    let bw = bandwidth::h_mse_integrated(&frame, &boundary, &grid.points, args.p, kernel)?;
                    (bw.h, Some(bw))
                }
            };
            let curve_result = match args.q {
                Some(q) => curve::estimate_curve_rbc(
                    method,
                    &frame,
                    &grid,
                    args.p,
                    q,
                    kernel,
                    h,
                    args.alpha,
                    args.band_draws,
                    args.seed,
                )?,
                None => {
                    let mut c = match method {
                        CurveMethod::Distance => {
                            curve::estimate_distance(&frame, &grid, args.p, kernel, h, args.alpha)?
                        }
                        CurveMethod::Location => {
                            curve::estimate_location(&frame, &grid, args.p, kernel, h, args.alpha)?
                        }
                    };
                    curve::apply_band(&mut c, args.alpha, args.band_draws, args.seed)?;
                    c
                }
            };
            let aggregate =
                curve::aggregate(&curve_result, &boundary, &Weighting::Density { frame: &frame, h })
                    .ok();
            let text = match args.out {
                OutFormat::Json => {
                    #[derive(serde::Serialize)]
                    struct CurveOut<'a> {
                        curve: CurveReport,
                        aggregate: Option<&'a curve::AggregateResult>,
                        #[serde(skip_serializing_if = "Option::is_none")]
                        bandwidth: Option<&'a BandwidthResult>,
                    }
                    to_json_string(&CurveOut {
                        curve: curve_result.report(),
                        aggregate: aggregate.as_ref(),
                        bandwidth: bw.as_ref(),
                    })
                    .map_err(|e| Error::invalid(e.to_string()))?
                }
                OutFormat::Csv => curve_csv(&curve_result),
            };
            write_out(&args.output, &text)
        }
    }
}

fn pooled_csv(est: &pooled::EstimateResult) -> String {
    let mut out = String::from(
        "effect,tau_hat,se,ci_lo,ci_hi,rbc_lo,rbc_hi,n_treated,n_control,h_used\n",
    );
    for k in 0..est.tau_hat.len() {
        let (lo, hi) = est.ci_conventional[k];
        let rbc = est.ci_rbc.as_ref().map(|v| v[k]);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            k + 1,
            fmt_f64(est.tau_hat[k]),
            fmt_f64(est.se[k]),
            fmt_f64(lo),
            fmt_f64(hi),
            fmt_opt(rbc.map(|c| c.0)),
            fmt_opt(rbc.map(|c| c.1)),
            est.n_treated,
            est.n_control,
            fmt_f64(est.h_used)
        ));
    }
    out
}

fn curve_csv(c: &CurveResult) -> String {
    let mut out = String::from("arclength,b1,b2,tau_hat,se,ci_lo,ci_hi,band_lo,band_hi\n");
    for p in &c.points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(p.arclength),
            fmt_f64(p.location.x1),
            fmt_f64(p.location.x2),
            fmt_opt(p.tau),
            fmt_opt(p.se),
            fmt_opt(p.ci.map(|c| c.0)),
            fmt_opt(p.ci.map(|c| c.1)),
            fmt_opt(p.band.map(|b| b.0)),
            fmt_opt(p.band.map(|b| b.1)),
        ));
    }
    out
}

fn run_simulate(args: SimulateArgs) -> Result<(), Error> {
    let mut spec = DgpSpec::load(&args.dgp_spec)?;
    if let Some(seed) = args.seed {
        spec = spec.with_seed(seed);
    }
    if let Some(n) = args.n {
        spec = spec.with_n(n);
    }
    let (ds, truth) = spec.simulate();
    std::fs::write(&args.out, write_dataset_string(&ds))?;
    let sidecar = PathBuf::from(format!("{}.truth.json", args.out.display()));
    std::fs::write(&sidecar, to_json_string(&truth).map_err(|e| Error::invalid(e.to_string()))?)?;
    eprintln!(
        "wrote {} rows to {} (truth sidecar: {})",
        ds.len(),
        args.out.display(),
        sidecar.display()
    );
    Ok(())
}

fn run_mc(args: McArgs) -> Result<(), Error> {
    let spec = DgpSpec::load(&args.dgp_spec)?;
    let h = match parse_h(&args.h)? {
        HArg::Fixed(v) => HSource::Fixed(v),
        HArg::Mse => HSource::Mse,
    };
    let kernel: KernelKind = args.kernel.into();
    let estimator = match parse_spec(&args.spec)? {
        SpecArg::Pooled(id) => McEstimator::Pooled { spec_id: id, p: args.p, q: args.q, kernel, h },
        SpecArg::Curve(method) => McEstimator::Curve {
            method,
            p: args.p,
            q: args.q.unwrap_or(args.p + 1),
            grid_j: args.grid,
            kernel,
            h,
            band_draws: args.band_draws,
        },
    };
    let report = monte_carlo(&spec, &estimator, args.reps, args.seed)?;
    let text = to_json_string(&report).map_err(|e| Error::invalid(e.to_string()))?;
    write_out(&args.output, &text)
}

fn run_rdplot(args: RdplotArgs) -> Result<(), Error> {
    let (frame, _, _) = load_inputs(&args.data, &args.boundary, None)?;
    let scheme = match args.scheme {
        SchemeArg::EvenlySpaced => BinScheme::EvenlySpaced,
        SchemeArg::Quantile => BinScheme::Quantile,
    };
    if let Some(h) = args.h {
        if !(h > 0.0) {
            return Err(Error::NonpositiveBandwidth);
        }
    }
    let bins = pooled::rd_plot_bins(&frame, args.bins, scheme, args.h)?;
    let mut out = String::from("bin_center,mean_y,count,side\n");
    for b in &bins {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(b.center),
            fmt_opt(b.mean_y),
            b.count,
            b.side
        ));
    }
    write_out(&args.output, &out)
}
