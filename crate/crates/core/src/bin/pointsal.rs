use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pointsal::config::{DatasetManifest, PipelineConfig};
use pointsal::io::write_bytes;
use pointsal::metrics::MeanFMode;
use pointsal::pipeline::{self, LossFiles};
use pointsal::service::{self, ServiceState};
use pointsal::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "pointsal", version, about = "Point-supervised saliency pseudo-labels, refinement and evaluation")]
struct Cli {
    /// TOML configuration file; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Adaptive mask divisor.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Edge binarization threshold in [0, 1].
    #[arg(long, global = true)]
    edge_threshold: Option<f64>,
    /// Resize inputs to N x N before processing.
    #[arg(long, global = true)]
    resize: Option<u32>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct DatasetArgs {
    /// Dataset root holding images/, edges/, annotations.json and gt/.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Overrides the images directory.
    #[arg(long)]
    images: Option<PathBuf>,
    /// Overrides the edge-map directory.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Overrides the annotation file.
    #[arg(long)]
    annotations: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// First-round trimaps from point annotations and edge maps.
    PseudoLabel {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Second-round trimaps from round-1 saliency maps.
    Nss {
        #[command(flatten)]
        dataset: DatasetArgs,
        /// Round-1 saliency maps, one PNG per image id.
        #[arg(long)]
        saliency: PathBuf,
        /// Refine the saliency maps with the dense CRF before suppression.
        #[arg(long, value_enum, default_value = "off")]
        crf: Switch,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dense CRF refinement of saliency maps.
    Crf {
        #[arg(long)]
        saliency: PathBuf,
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metric suite over a prediction directory.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use the adaptive threshold for mean F instead of the sweep mean.
        #[arg(long)]
        adaptive: bool,
    },
    /// Evaluates the training losses for one sample.
    Losses {
        /// Predicted saliency map.
        #[arg(long)]
        pred: PathBuf,
        /// Trimap supervising the saliency map.
        #[arg(long)]
        trimap: PathBuf,
        /// RGB image for the gated CRF term.
        #[arg(long)]
        image: PathBuf,
        /// Predicted edge map.
        #[arg(long)]
        edge_pred: PathBuf,
        /// Edge target, binarized at 128.
        #[arg(long)]
        edge_gt: PathBuf,
    },
    /// Gradient-magnitude edge maps for a directory of images.
    DemoEdges {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Annotation service for the web UI.
    Serve {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[arg(long, default_value = "127.0.0.1")]
        bind: std::net::IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Static UI bundle to serve at /.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

fn manifest(args: &DatasetArgs, config: &PipelineConfig) -> Result<DatasetManifest> {
    let mut m = match &args.data {
        Some(root) => DatasetManifest::from_root(root),
        None => config.dataset.clone(),
    };
    if let Some(p) = &args.images {
        m.images_dir = p.clone();
    }
    if let Some(p) = &args.edges {
        m.edges_dir = p.clone();
    }
    if let Some(p) = &args.annotations {
        m.annotations = p.clone();
    }
    m.validate()?;
    Ok(m)
}

fn write_report(out: &Path, report: &impl Serialize) -> Result<()> {
    let json = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    write_bytes(&out.join("report.json"), json.as_bytes())
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(g) = cli.gamma {
        config.mask.gamma = g;
    }
    if let Some(t) = cli.edge_threshold {
        config.mask.edge_threshold = t;
    }
    if cli.resize.is_some() {
        config.resize = cli.resize;
    }
    config.validate()?;
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }

    match cli.command {
        Command::PseudoLabel { dataset, out } => {
            let report = pipeline::cmd_pseudo_label(&manifest(&dataset, &config)?, &config, &out)?;
            println!("pseudo-label: {} written, {} skipped", report.written.len(), report.skipped.len());
            write_report(&out, &report)
        }
        Command::Nss { dataset, saliency, crf, out } => {
            let m = manifest(&dataset, &config)?;
            let report = pipeline::cmd_nss(&saliency, &m, &config, matches!(crf, Switch::On), &out)?;
            let removed: usize = report.written.iter().map(|r| r.components_removed).sum();
            println!(
                "nss: {} written, {} skipped, {removed} components suppressed",
                report.written.len(),
                report.skipped.len()
            );
            write_report(&out, &report)
        }
        Command::Crf { saliency, images, out } => {
            let report = pipeline::cmd_crf(&saliency, &images, &config, &out)?;
            println!("crf: {} written, {} skipped", report.written.len(), report.skipped.len());
            write_report(&out, &report)
        }
        Command::Eval { pred, gt, out, adaptive } => {
            let mut opts = config.eval;
            if adaptive {
                opts.mean_f = MeanFMode::Adaptive;
            }
            let report = pipeline::cmd_eval(&pred, &gt, &opts, &out)?;
            print!("{}", report.result.to_table());
            for s in &report.skipped {
                println!("skipped {}: {}", s.id, s.reason);
            }
            Ok(())
        }
        Command::Losses { pred, trimap, image, edge_pred, edge_gt } => {
            let files = LossFiles {
                saliency_pred: pred,
                trimap,
                image,
                edge_pred,
                edge_gt,
            };
            let report = pipeline::cmd_losses(&files, &config)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
        Command::DemoEdges { images, out } => {
            let report = pipeline::cmd_demo_edges(&images, &out)?;
            println!("demo-edges: {} written, {} skipped", report.written.len(), report.skipped.len());
            write_report(&out, &report)
        }
        Command::Serve { dataset, bind, port, ui_dir } => {
            let mut m = match &dataset.data {
                Some(root) => DatasetManifest::from_root(root),
                None => config.dataset.clone(),
            };
            if let Some(p) = dataset.images {
                m.images_dir = p;
            }
            if let Some(p) = dataset.edges {
                m.edges_dir = p;
            }
            if let Some(p) = dataset.annotations {
                m.annotations = p;
            }
            if !m.images_dir.is_dir() {
                return Err(Error::Validation(format!("images dir {} does not exist", m.images_dir.display())));
            }
            let state = Arc::new(ServiceState::new(&m.images_dir, &m.edges_dir, &m.annotations, config)?);
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| Error::Io { path: PathBuf::from("<runtime>"), source: e })?;
            let addr = SocketAddr::new(bind, port);
            rt.block_on(service::serve(state, addr, ui_dir))
                .map_err(|e| Error::Io { path: PathBuf::from(addr.to_string()), source: e })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("POINTSAL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
