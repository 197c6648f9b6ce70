use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use shuffledet::analysis::{ablation_table, network_cost};
use shuffledet::detect::Detector;
use shuffledet::graph::{build_network, NetworkConfig, NetworkPlan, RandomInit, StoreSource};
use shuffledet::io::{
    detections_to_json, evaluate_ap, evaluate_counts, load_png, read_annotations, read_detections, to_records,
    WeightStore,
};
use shuffledet::selftest;
use shuffledet::ssd::generate_priors;

/// Published reference figures printed next to computed ones.
const REFERENCE_BASELINE_GFLOPS: f64 = 2.94;
const REFERENCE_FULL_GFLOPS: f64 = 3.8;
const REFERENCE_PRIORS: usize = 28_642;

#[derive(Parser)]
#[command(name = "shuffledet", version, about = "ShuffleDet vehicle detector: inference, complexity and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Network config JSON; defaults to full ShuffleDet.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<NetworkConfig> {
        match &self.config {
            Some(p) => NetworkConfig::from_file(p).with_context(|| format!("loading config {}", p.display())),
            None => Ok(NetworkConfig::default()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Detect vehicles in a PNG image.
    Detect {
        #[command(flatten)]
        config: ConfigArg,
        /// Weight manifest; random initialisation from --seed when absent.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        image: PathBuf,
        /// Image id written to the output; defaults to the file stem.
        #[arg(long)]
        image_id: Option<String>,
        /// Run on overlapping input-sized windows instead of resizing.
        #[arg(long)]
        tile: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Analytic FLOP and parameter report.
    Flops {
        #[command(flatten)]
        config: ConfigArg,
        /// Print the DAB and mincep ablation tables instead.
        #[arg(long)]
        ablation_grid: bool,
        /// Include every layer, not just stage subtotals.
        #[arg(long)]
        layers: bool,
        /// Emit JSON.
        #[arg(long)]
        json: bool,
    },
    /// Prior box counts per tap.
    Priors {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Counting errors (and optionally AP) of detections against ground truth.
    Eval {
        #[arg(long)]
        dets: PathBuf,
        /// Ground-truth CSV: image_id,xmin,ymin,xmax,ymax,class.
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        ap: bool,
        #[arg(long, default_value_t = 0.5)]
        iou: f32,
    },
    /// Run the built-in oracle checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write randomly initialised weights.
    InitWeights {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Manifest path; the blob goes next to it with a `.bin` extension.
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn detect(
    cfg: NetworkConfig,
    weights: Option<&Path>,
    seed: u64,
    image: &Path,
    image_id: Option<String>,
    tile: bool,
    out: &Path,
) -> Result<()> {
    let net = match weights {
        Some(w) => {
            let store = WeightStore::load(w).with_context(|| format!("loading weights {}", w.display()))?;
            build_network(&cfg, &mut StoreSource::new(&store))?
        }
        None => build_network(&cfg, &mut RandomInit::new(seed))?,
    };
    let img = load_png(image).with_context(|| format!("reading {}", image.display()))?;
    let detector = Detector::new(net)?;
    let dets = if tile {
        detector.detect_tiled(&img)?
    } else {
        detector.detect(&img)?
    };
    let id = image_id.unwrap_or_else(|| {
        image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    write_out(out, &detections_to_json(&to_records(&id, &dets)))?;
    println!("{} detections written to {}", dets.len(), out.display());
    Ok(())
}

fn flops(cfg: NetworkConfig, grid: bool, layers: bool, json: bool) -> Result<()> {
    if grid {
        let dab = ablation_table(&NetworkConfig::dab_ablation_grid())?;
        let mincep = ablation_table(&NetworkConfig::mincep_ablation_grid())?;
        if json {
            println!("{{\"dab\": {}, \"mincep\": {}}}", dab.to_json(), mincep.to_json());
        } else {
            println!("DAB ablation\n{}\nmincep ablation\n{}", dab.to_text(), mincep.to_text());
        }
        return Ok(());
    }
    let report = network_cost(&cfg)?;
    if json {
        println!("{}", report.to_json());
        return Ok(());
    }
    if layers {
        print!("{}", report.to_text());
    } else {
        for s in &report.stages {
            println!("{:<8} {:>14} flops {:>10} params", s.stage, s.flops, s.params);
        }
        println!(
            "total    {:>14} flops {:>10} params ({:.4} GFLOPs, {:.4} GMACs)",
            report.total_flops,
            report.total_params,
            report.gflops(),
            report.gmacs()
        );
    }
    let base = network_cost(&NetworkConfig::shufflenet_ssd())?.gflops();
    let full = network_cost(&NetworkConfig::shuffledet())?.gflops();
    println!();
    println!("baseline shufflenet-ssd {base:.4} GFLOPs (reference {REFERENCE_BASELINE_GFLOPS})");
    println!("full shuffledet         {full:.4} GFLOPs (reference {REFERENCE_FULL_GFLOPS})");
    println!(
        "delta                   {:.4} GFLOPs (reference {:.2})",
        full - base,
        REFERENCE_FULL_GFLOPS - REFERENCE_BASELINE_GFLOPS
    );
    Ok(())
}

fn priors(cfg: NetworkConfig) -> Result<()> {
    let plan = NetworkPlan::new(&cfg)?;
    let set = generate_priors(&cfg)?;
    for ((tap, count), scale) in plan.taps.iter().zip(&set.per_tap).zip(&set.scales) {
        println!(
            "{:<5} {:<7} {:>3}x{:<3} B={} s={:.4} {:>6}",
            tap.name,
            NetworkConfig::slot_name(tap.slot),
            tap.hw.0,
            tap.hw.1,
            tap.boxes,
            scale,
            count
        );
    }
    println!("total {} priors per class", set.len());
    println!("reference {REFERENCE_PRIORS}");
    if set.len() != REFERENCE_PRIORS {
        let diff = set.len() as i64 - REFERENCE_PRIORS as i64;
        println!(
            "note: computed count differs from the reference by {diff}; the reference tap resolutions are not \
             published and no standard box assignment reproduces it, so the computed value is reported as is"
        );
    }
    Ok(())
}

fn eval(dets: &Path, gt: &Path, ap: bool, iou: f32) -> Result<()> {
    let gts = read_annotations(gt).with_context(|| format!("reading {}", gt.display()))?;
    let mut found = read_detections(dets).with_context(|| format!("reading {}", dets.display()))?;
    // An image with no detections simply has no records.
    for id in gts.keys() {
        found.entry(id.clone()).or_default();
    }
    let mut summary = evaluate_counts(&found, &gts)?;
    if ap {
        summary.ap = Some(evaluate_ap(&found, &gts, iou)?);
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Detect {
            config,
            weights,
            seed,
            image,
            image_id,
            tile,
            out,
        } => detect(config.load()?, weights.as_deref(), seed, &image, image_id, tile, &out)?,
        Command::Flops {
            config,
            ablation_grid,
            layers,
            json,
        } => flops(config.load()?, ablation_grid, layers, json)?,
        Command::Priors { config } => priors(config.load()?)?,
        Command::Eval { dets, gt, ap, iou } => eval(&dets, &gt, ap, iou)?,
        Command::Selftest { seed } => {
            let checks = selftest::run_all(seed);
            for c in &checks {
                println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
        Command::InitWeights { config, seed, out } => {
            let cfg = config.load()?;
            let net = build_network(&cfg, &mut RandomInit::new(seed))?;
            net.to_weight_store()?.save(&out)?;
            println!("{} parameters written to {}", net.num_parameters(), out.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
