use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use cbrn::dataset::{Dataset, DatasetManifest};
use cbrn::learning::Phase;
use cbrn::{
    chain_recall, default_chains, identify, load_weights, reconstruct, save_pbm, save_weights,
    train_system, vectorize, CbrnSystem, Group, Outcome, SystemConfig,
};

#[derive(Parser, Debug)]
#[command(name = "cbrn", version, about = "Cue Ball / Recall Net associative memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(clap::Args, Debug)]
struct SizeArgs {
    /// Image width in pixels
    #[arg(long, default_value_t = 116)]
    width: usize,
    /// Image height in pixels
    #[arg(long, default_value_t = 116)]
    height: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the default synthetic pattern set as PBM files plus a manifest
    GenDataset {
        #[arg(long, env = "CBRN_DATASET_DIR", default_value = "dataset")]
        out: PathBuf,
        /// Manifest path (default: <out>/manifest.tsv)
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        size: SizeArgs,
        /// Overwrite existing files
        #[arg(long)]
        force: bool,
    },
    /// Learn w, v and cross-link weights and write a weight archive
    Train {
        #[arg(long, env = "CBRN_MANIFEST", default_value = "dataset/manifest.tsv")]
        manifest: PathBuf,
        #[arg(long, env = "CBRN_WEIGHTS", default_value = "weights.cbrn")]
        weights: PathBuf,
        /// Learning targets per series, comma separated
        #[arg(long, value_delimiter = ',', default_values_t = [100.0, 110.0])]
        theta: Vec<f64>,
        /// Firing threshold D
        #[arg(long, default_value_t = 72.0)]
        threshold: f64,
        #[command(flatten)]
        size: SizeArgs,
        /// Also write the per-learning report as CSV
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print the pre-activation of every cue neuron for one presented pattern
    Qtable {
        #[arg(long, env = "CBRN_WEIGHTS", default_value = "weights.cbrn")]
        weights: PathBuf,
        #[arg(long, env = "CBRN_MANIFEST", default_value = "dataset/manifest.tsv")]
        manifest: PathBuf,
        #[arg(long)]
        ball: String,
        #[arg(long)]
        label: String,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Present a pattern to a group's start ball and follow the chain
    Chain {
        #[arg(long, env = "CBRN_WEIGHTS", default_value = "weights.cbrn")]
        weights: PathBuf,
        #[arg(long, env = "CBRN_MANIFEST", default_value = "dataset/manifest.tsv")]
        manifest: PathBuf,
        /// Chain group: 0 runs the chain order forward, 1 backward
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
        cmb: u8,
        #[arg(long)]
        label: String,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Write the image stored in one cue neuron
    Render {
        #[arg(long, env = "CBRN_WEIGHTS", default_value = "weights.cbrn")]
        weights: PathBuf,
        #[arg(long)]
        ball: String,
        #[arg(long)]
        neuron: usize,
        /// PBM output path
        #[arg(long, required_unless_present = "ascii")]
        out: Option<PathBuf>,
        /// Draw the image on standard output
        #[arg(long)]
        ascii: bool,
    },
    /// Check a trained archive against its dataset and the default chains
    Verify {
        #[arg(long, env = "CBRN_WEIGHTS", default_value = "weights.cbrn")]
        weights: PathBuf,
        #[arg(long, env = "CBRN_MANIFEST", default_value = "dataset/manifest.tsv")]
        manifest: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::GenDataset {
            out,
            manifest,
            size,
            force,
        } => gen_dataset(&out, manifest.as_deref(), &size, force),
        Command::Train {
            manifest,
            weights,
            theta,
            threshold,
            size,
            report,
        } => {
            let config = SystemConfig {
                image_width: size.width,
                image_height: size.height,
                theta_series: theta,
                threshold_d: threshold,
                ..SystemConfig::default()
            };
            train(&manifest, &weights, config, report.as_deref())
        }
        Command::Qtable {
            weights,
            manifest,
            ball,
            label,
            format,
        } => qtable(&weights, &manifest, &ball, &label, format),
        Command::Chain {
            weights,
            manifest,
            cmb,
            label,
            format,
        } => chain(&weights, &manifest, cmb, &label, format),
        Command::Render {
            weights,
            ball,
            neuron,
            out,
            ascii,
        } => render(&weights, &ball, neuron, out.as_deref(), ascii),
        Command::Verify { weights, manifest } => verify(&weights, &manifest),
    }
}

fn gen_dataset(out: &Path, manifest: Option<&Path>, size: &SizeArgs, force: bool) -> Result<ExitCode> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let manifest_path = manifest
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.join("manifest.tsv"));
    let table = DatasetManifest::default_files(out);

    let mut targets = vec![manifest_path.clone()];
    for attr in table.attributes() {
        for el in &attr.elements {
            targets.push(out.join(format!("{}.pbm", el.label)));
        }
    }
    if !force {
        if let Some(existing) = targets.iter().find(|p| p.exists()) {
            bail!("{} already exists (use --force to overwrite)", existing.display());
        }
    }

    let mut count = 0;
    for attr in table.attributes() {
        for el in &attr.elements {
            let img = cbrn::synth_pattern(&el.label, size.width, size.height)?;
            let path = out.join(format!("{}.pbm", el.label));
            fs::write(&path, save_pbm(&img)).with_context(|| format!("writing {}", path.display()))?;
            count += 1;
        }
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new(""));
    let text = if base == out {
        table.to_text(out)
    } else {
        let abs = DatasetManifest::default_files(&fs::canonicalize(out)?);
        abs.to_text(Path::new(""))
    };
    fs::write(&manifest_path, text).with_context(|| format!("writing {}", manifest_path.display()))?;
    println!(
        "wrote {count} patterns ({}x{}) to {} and manifest {}",
        size.width,
        size.height,
        out.display(),
        manifest_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn load_dataset(manifest: &Path, config: &SystemConfig) -> Result<Dataset> {
    let m = DatasetManifest::load(manifest)?;
    Ok(m.resolve(
        &config.chain_order,
        config.neurons_per_ball,
        config.image_width,
        config.image_height,
    )?)
}

fn load_system(weights: &Path) -> Result<CbrnSystem> {
    let bytes = fs::read(weights).with_context(|| format!("reading {}", weights.display()))?;
    load_weights(&bytes).with_context(|| format!("loading {}", weights.display()))
}

fn train(manifest: &Path, weights: &Path, config: SystemConfig, report_path: Option<&Path>) -> Result<ExitCode> {
    let mut system = CbrnSystem::new(config)?;
    let dataset = load_dataset(manifest, system.config())?;
    let chains = default_chains(system.config())?;
    let report = train_system(&mut system, &dataset, &chains)?;
    fs::write(weights, save_weights(&system)).with_context(|| format!("writing {}", weights.display()))?;
    if let Some(path) = report_path {
        fs::write(path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }

    let by_group = |g: Group| report.records.iter().filter(|r| r.group == Some(g)).count();
    println!(
        "w learnings: {}\nv learnings: {}\nu learnings: {} (cmb 0: {}, cmb 1: {})",
        report.count(Phase::W),
        report.count(Phase::V),
        report.count(Phase::U),
        by_group(Group::Forward),
        by_group(Group::Reverse),
    );
    println!("max |q - theta|: {:e}", report.max_q_error());
    println!("weights written to {}", weights.display());
    Ok(ExitCode::SUCCESS)
}

fn presented(dataset: &Dataset, ball: &str, label: &str) -> Result<cbrn::PatternVector> {
    let images = dataset
        .images(ball)
        .ok_or_else(|| anyhow!("unknown ball {ball:?}"))?;
    let img = images
        .iter()
        .find(|i| i.label() == label)
        .ok_or_else(|| anyhow!("no element labeled {label:?} in ball {ball:?}"))?;
    Ok(vectorize(img)?)
}

fn qtable(weights: &Path, manifest: &Path, ball: &str, label: &str, format: Format) -> Result<ExitCode> {
    let system = load_system(weights)?;
    let dataset = load_dataset(manifest, system.config())?;
    let v = presented(&dataset, ball, label)?;
    let r = identify(&system, ball, &v)?;
    let mut out = std::io::stdout().lock();
    match format {
        Format::Csv => {
            writeln!(out, "neuron,q,fired,argmax")?;
            for (i, q) in r.q_values.iter().enumerate() {
                let fired = r.fired.iter().any(|f| f.neuron == i);
                writeln!(out, "{i},{q},{},{}", u8::from(fired), u8::from(i == r.argmax))?;
            }
        }
        Format::Text => {
            writeln!(out, "{ball} presented with {label:?} (D = {})", system.config().threshold_d)?;
            for (i, q) in r.q_values.iter().enumerate() {
                let fired = r.fired.iter().any(|f| f.neuron == i);
                let mark = if i == r.argmax { " <- max" } else { "" };
                writeln!(out, "{i:>3} {q:>10.2} x={}{mark}", u8::from(fired))?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn chain(weights: &Path, manifest: &Path, cmb: u8, label: &str, format: Format) -> Result<ExitCode> {
    let system = load_system(weights)?;
    let dataset = load_dataset(manifest, system.config())?;
    let group = Group::from_id(cmb).ok_or_else(|| anyhow!("cmb must be 0 or 1"))?;
    let start = group.start_ball(system.config());
    let v = match dataset.find_label(label) {
        Some((ball, _)) if ball == start => presented(&dataset, ball, label)?,
        Some((ball, _)) => bail!("{label:?} belongs to {ball}, but cmb={cmb} starts at {start}"),
        None => bail!("no element labeled {label:?}"),
    };
    let trace = chain_recall(&system, group, &v)?;
    match format {
        Format::Csv => emit(&trace.to_csv(&system))?,
        Format::Text => emit(&trace.to_text())?,
    }
    match &trace.outcome {
        Outcome::Complete => Ok(ExitCode::SUCCESS),
        Outcome::Failed { ball, max_q } => {
            eprintln!("recall failed: nothing in {ball} reached the threshold (max q = {max_q})");
            Ok(ExitCode::from(2))
        }
        Outcome::Truncated { ball, reason } => {
            eprintln!("recall stopped at {ball}: {reason}");
            Ok(ExitCode::from(2))
        }
    }
}

fn render(weights: &Path, ball: &str, neuron: usize, out: Option<&Path>, ascii: bool) -> Result<ExitCode> {
    let system = load_system(weights)?;
    let img = reconstruct(&system, ball, neuron)?;
    if let Some(path) = out {
        fs::write(path, save_pbm(&img)).with_context(|| format!("writing {}", path.display()))?;
    }
    if ascii {
        emit(&img.to_ascii())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(weights: &Path, manifest: &Path) -> Result<ExitCode> {
    let system = load_system(weights)?;
    let dataset = load_dataset(manifest, system.config())?;
    let config = system.config();
    let mut ok = true;
    let mut report = |name: &str, pass: bool, detail: String| {
        println!("{}  {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    };

    let mut mismatched = Vec::new();
    let mut wrong = Vec::new();
    for (ball, images) in dataset.balls() {
        for (i, img) in images.iter().enumerate() {
            match reconstruct(&system, ball, i) {
                Ok(r) if &r == img => {}
                _ => mismatched.push(format!("{ball}[{i}]")),
            }
            let r = identify(&system, ball, &vectorize(img)?)?;
            if r.argmax != i || r.fired_indices() != [i] {
                wrong.push(format!("{ball}[{i}]"));
            }
        }
    }
    let total: usize = dataset.balls().iter().map(|(_, v)| v.len()).sum();
    report(
        "reconstruction",
        mismatched.is_empty(),
        format!("{}/{total} stored images match {:?}", total - mismatched.len(), mismatched),
    );
    report(
        "identification",
        wrong.is_empty(),
        format!("{}/{total} identified {:?}", total - wrong.len(), wrong),
    );

    match default_chains(config) {
        Ok(chains) => {
            for spec in chains {
                let order = spec.group.ball_order(config);
                let start = spec.series.first().map_or(0, |s| s.neurons[0]);
                let img = &dataset.images(&order[0]).expect("resolved")[start];
                let trace = chain_recall(&system, spec.group, &vectorize(img)?)?;
                let mut pass = trace.is_complete();
                for (step, resp) in trace.responses.iter().enumerate().skip(1) {
                    let mut want: Vec<usize> = spec.series.iter().map(|s| s.neurons[step]).collect();
                    want.sort_unstable();
                    want.dedup();
                    pass &= resp.fired_indices() == want;
                    for s in &spec.series {
                        pass &= resp.q_values[s.neurons[step]] == s.theta;
                    }
                }
                report(
                    &format!("chain cmb={}", spec.group),
                    pass,
                    format!("{} images recalled from {:?}", trace.recalled.len(), img.label()),
                );
            }
        }
        Err(e) => report("chains", false, e.to_string()),
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
