use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ridgetrace::dataset::{Dataset, DatasetSource};
use ridgetrace::graph_file::{save_graph, StoredGraph};
use ridgetrace::service::{replay_interactions, serve, AppState, Interaction, ServiceConfig};
use ridgetrace::swc::{export_swc, import_swc};
use ridgetrace::synth::{gapped_tube, neurite_volume, noise_volume, TubeParams};
use ridgetrace::volume_file::{default_meta_path, load_volume, save_volume, Dtype};
use ridgetrace_core::metric::{extract_guide_points, replay, score, ScoreParams};
use ridgetrace_core::morse::{ridge_graph, GraphParams};
use ridgetrace_core::pathing::{compute_arc_weights, WeightParams};
use ridgetrace_core::session::SessionConfig;
use ridgetrace_core::volume::{normalize, preprocess, FilterParams};

#[derive(Parser)]
#[command(name = "ridgetrace", version, about = "Semi-automatic neuron tracing on ridge graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Median filter and blur a volume.
    Preprocess {
        #[command(flatten)]
        input: VolumeArgs,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "f32")]
        dtype: String,
    },
    /// Extract, simplify and weigh the ridge graph of a raw volume.
    BuildGraph {
        #[command(flatten)]
        input: VolumeArgs,
        #[command(flatten)]
        filter: FilterArgs,
        /// Persistence threshold as a fraction of the value range.
        #[arg(long, default_value_t = GraphParams::default().persistence)]
        persistence: f64,
        #[arg(long, visible_alias = "smooth-iters", default_value_t = GraphParams::default().smooth_iterations)]
        smooth: usize,
        #[arg(long, default_value_t = WeightParams::default().epsilon)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a candidate SWC against a reference SWC.
    Score {
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, visible_alias = "xy", default_value_t = ScoreParams::default().xy_threshold)]
        xy_threshold: f64,
        #[arg(long, visible_alias = "z", default_value_t = ScoreParams::default().z_threshold)]
        z_threshold: f64,
        /// Count every key node once instead of weighting by path length.
        #[arg(long)]
        unweighted: bool,
        /// Subdivide candidate edges longer than this before matching.
        #[arg(long)]
        resample: Option<f64>,
        /// Also print the per-node match list.
        #[arg(long)]
        matches: bool,
    },
    /// Re-trace a reference SWC by chaining shortest paths between its key nodes.
    Replay {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write per-segment timings as JSON.
        #[arg(long)]
        timings: Option<PathBuf>,
    },
    /// Re-run a recorded interaction log and write the resulting SWC.
    ReplayLog {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        /// Dataset served to sessions opened without explicit files.
        #[arg(long, requires = "graph")]
        volume: Option<PathBuf>,
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long, requires = "volume")]
        graph: Option<PathBuf>,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long, default_value_t = WeightParams::default().epsilon)]
        epsilon: f64,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Overrides the port of `--addr`.
        #[arg(long)]
        port: Option<u16>,
    },
    /// Write a synthetic test volume.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, num_args = 3, default_values_t = [64, 64, 64])]
        dims: Vec<usize>,
        #[arg(long, num_args = 3, default_values_t = [1.0, 1.0, 1.0])]
        spacing: Vec<f64>,
        /// Gaps for `tube`, trees for `neurites`.
        #[arg(long, default_value_t = 3)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "u8")]
        dtype: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Tube,
    Neurites,
    Noise,
}

#[derive(Args)]
struct VolumeArgs {
    #[arg(long, visible_alias = "in")]
    volume: PathBuf,
    /// Header file; defaults to `<volume>.meta`.
    #[arg(long)]
    meta: Option<PathBuf>,
}

impl VolumeArgs {
    fn meta(&self) -> PathBuf {
        self.meta.clone().unwrap_or_else(|| default_meta_path(&self.volume))
    }
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    volume: PathBuf,
    /// Header file; defaults to `<volume>.meta`.
    #[arg(long)]
    meta: Option<PathBuf>,
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    filter: FilterArgs,
    #[arg(long, default_value_t = WeightParams::default().epsilon)]
    epsilon: f64,
}

impl DataArgs {
    fn open(&self) -> Result<Dataset> {
        let src = DatasetSource::new(&self.volume, self.meta.as_deref(), &self.graph);
        Dataset::open(&src, &self.filter.params(), &WeightParams { epsilon: self.epsilon })
            .with_context(|| format!("loading {} and {}", self.volume.display(), self.graph.display()))
    }
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long, visible_alias = "median", default_value_t = FilterParams::default().median_radius)]
    median_radius: usize,
    #[arg(long, visible_alias = "gaussian", default_value_t = FilterParams::default().gaussian_radius)]
    gaussian_radius: usize,
}

impl FilterArgs {
    fn params(&self) -> FilterParams {
        FilterParams { median_radius: self.median_radius, gaussian_radius: self.gaussian_radius }
    }
}

fn read_swc(path: &Path) -> Result<ridgetrace_core::Reconstruction> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    import_swc(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Preprocess { input, filter, out, dtype } => {
            let raw = load_volume(&input.volume, &input.meta())?;
            let clean = preprocess(&raw, &filter.params());
            save_volume(&clean, dtype.parse()?, &out, &default_meta_path(&out))?;
        }
        Command::BuildGraph { input, filter, persistence, smooth, epsilon, out } => {
            let raw = load_volume(&input.volume, &input.meta())?;
            let t = Instant::now();
            let clean = preprocess(&raw, &filter.params());
            let graph = ridge_graph(&clean, &GraphParams { persistence, smooth_iterations: smooth });
            let wg = compute_arc_weights(graph, &normalize(&clean), &WeightParams { epsilon })?;
            save_graph(&StoredGraph::from_weighted(&wg), &out)?;
            let g = wg.graph();
            eprintln!(
                "{} nodes, {} arcs, {} points in {:.2}s",
                g.nodes().len(),
                g.arcs().len(),
                g.num_points(),
                t.elapsed().as_secs_f64()
            );
        }
        Command::Score { candidate, reference, xy_threshold, z_threshold, unweighted, resample, matches } => {
            let p = ScoreParams { xy_threshold, z_threshold, length_weighted: !unweighted, resample };
            let mut report = serde_json::to_value(score(&read_swc(&candidate)?, &read_swc(&reference)?, &p))?;
            if !matches {
                report.as_object_mut().expect("report is an object").remove("matches");
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Replay { data, reference, out, timings } => {
            let ds = data.open()?;
            let segments = extract_guide_points(&read_swc(&reference)?)?;
            let clock = Instant::now();
            let r = replay(&ds.context, &segments, &mut || clock.elapsed().as_secs_f64());
            write(&out, &export_swc(&r.reconstruction))?;
            if let Some(path) = timings {
                let doc = json!({
                    "segments": segments.len(),
                    "failed": r.failed,
                    "segment_seconds": r.segment_seconds,
                    "total_seconds": r.total_seconds,
                });
                write(&path, &serde_json::to_string_pretty(&doc)?)?;
            }
            eprintln!("{} segments in {:.3}s, {} failed", segments.len(), r.total_seconds, r.failed.len());
        }
        Command::ReplayLog { data, log, out } => {
            let ds = data.open()?;
            let text = fs::read_to_string(&log).with_context(|| format!("reading {}", log.display()))?;
            let log: Vec<Interaction> = serde_json::from_str(&text)?;
            let (session, results) = replay_interactions(ds.context.clone(), SessionConfig::default(), &log);
            write(&out, &export_swc(session.reconstruction()))?;
            let failed = results.iter().filter(|r| r.is_err()).count();
            eprintln!("{} interactions, {failed} rejected", log.len());
        }
        Command::Serve { volume, meta, graph, filter, epsilon, mut addr, port } => {
            if let Some(p) = port {
                addr.set_port(p);
            }
            let config = ServiceConfig { filter: filter.params(), weights: WeightParams { epsilon }, ..Default::default() };
            let default = match (volume, graph) {
                (Some(v), Some(g)) => {
                    let src = DatasetSource::new(&v, meta.as_deref(), &g);
                    Some(Arc::new(Dataset::open(&src, &config.filter, &config.weights)?))
                }
                _ => None,
            };
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("listening on http://{addr}");
            rt.block_on(serve(AppState::new(config, default), addr))?;
        }
        Command::Synth { kind, seed, dims, spacing, count, out, dtype } => {
            let dims = [dims[0], dims[1], dims[2]];
            let spacing = [spacing[0], spacing[1], spacing[2]];
            let p = TubeParams { dims, ..Default::default() };
            let v = match kind {
                SynthKind::Tube => gapped_tube(seed, count, &p).volume.with_spacing(spacing)?,
                SynthKind::Neurites => neurite_volume(seed, dims, spacing, count, &p),
                SynthKind::Noise => noise_volume(seed, dims, spacing),
            };
            let dtype: Dtype = dtype.parse()?;
            if dtype != Dtype::F32 && matches!(kind, SynthKind::Noise) {
                bail!("noise values lie in [0, 1); write them as f32");
            }
            save_volume(&v, dtype, &out, &default_meta_path(&out))?;
        }
    }
    Ok(())
}
