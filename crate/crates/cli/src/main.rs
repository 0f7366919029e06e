use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use monodecomp_core::harness::{self, Algorithm, RunConfig, SweepParam, SweepSpec};
use monodecomp_core::ingest::{self, CsvImport, ScanOptions};
use monodecomp_core::{metrics, Configuration, Decomposition, GroundTruth, MonolithGraph, StopList};

#[derive(Parser)]
#[command(name = "monodecomp", version, about = "Split a monolith's call graph into candidate microservices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a dependency CSV (caller,callee,count) into a graph file.
    Ingest {
        dependencies: PathBuf,
        /// One class id per line; defaults to the ids seen in the CSV.
        #[arg(long)]
        classes: Option<PathBuf>,
        /// JSON object mapping class id to {token: count}.
        #[arg(long)]
        terms: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Build a graph file from a tree of Java-like sources.
    Scan {
        root: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Extensions to scan (repeatable).
        #[arg(long = "ext", default_value = "java")]
        extensions: Vec<String>,
        /// Fail on unreadable files instead of skipping them.
        #[arg(long)]
        strict: bool,
    },
    /// Decompose a graph and write decomposition, metrics and run log.
    Decompose {
        graph: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score an existing decomposition.
    Evaluate {
        graph: PathBuf,
        decomposition: PathBuf,
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
    /// Run all six configurations for one or all algorithms.
    Compare {
        graph: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Compare every algorithm rather than only the selected one.
        #[arg(long)]
        all_algorithms: bool,
    },
    /// Vary eps or the bandwidth multiplier and tabulate the metrics.
    Sweep {
        graph: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        param: Option<String>,
        #[arg(long, requires_all = ["end", "step"])]
        start: Option<f64>,
        #[arg(long)]
        end: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Write a Graphviz view of a decomposition.
    ExportDot {
        graph: PathBuf,
        decomposition: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
    configuration: Option<u8>,
    /// bmsc, meanshift or dbscan.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    min_pts: Option<usize>,
    #[arg(long)]
    bandwidth_quantile: Option<f64>,
    /// Structural weight; the semantic weight becomes 1 - alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Grid size as WxH, for example 3x3.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Extra stop words, one per line.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .with_context(|| format!("grid `{s}` is not of the form WxH"))?;
    Ok((w.trim().parse()?, h.trim().parse()?))
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(id) = self.configuration {
            c.configuration = Configuration::new(id)?;
        }
        if let Some(a) = &self.algorithm {
            c.algorithm = a.parse()?;
        }
        if let Some(e) = self.eps {
            c.bmsc.eps = Some(e);
        }
        if let Some(m) = self.min_pts {
            c.bmsc.min_pts = m;
        }
        if let Some(q) = self.bandwidth_quantile {
            c.bmsc.quantile = q;
        }
        if let Some(a) = self.alpha {
            c.bmsc.alpha = a;
            c.bmsc.beta = 1.0 - a;
        }
        if let Some(g) = &self.grid {
            (c.bmsc.width, c.bmsc.height) = parse_grid(g)?;
        }
        if let Some(o) = &self.out {
            c.out = Some(o.clone());
        }
        c.validate()?;
        Ok(c)
    }

    fn stop_list(&self) -> Result<StopList> {
        let mut stop = StopList::default();
        if let Some(p) = &self.stopwords {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            stop.extend_from_text(&text);
        }
        Ok(stop)
    }

    fn truth(&self) -> Result<Option<GroundTruth>> {
        self.ground_truth.as_deref().map(load_truth).transpose()
    }
}

fn load_truth(p: &Path) -> Result<GroundTruth> {
    Decomposition::load(p).with_context(|| format!("loading ground truth {}", p.display()))
}

fn load_graph(p: &Path) -> Result<MonolithGraph> {
    let (g, summary) = ingest::load_graph(p).with_context(|| format!("loading graph {}", p.display()))?;
    log::info!("{} classes, {} edges", summary.classes, summary.edges);
    Ok(g)
}

fn out_dir(config: &RunConfig) -> PathBuf {
    config.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest {
            dependencies,
            classes,
            terms,
            out,
        } => {
            let (g, s) = ingest::import_dependency_csv(&CsvImport {
                dependencies,
                class_list: classes,
                terms,
            })?;
            ingest::save_graph(&g, &out)?;
            println!(
                "{} classes, {} edges (total frequency {}), {} self calls dropped, {} duplicates merged",
                s.classes, s.edges, s.total_frequency, s.self_edges_dropped, s.duplicates_merged
            );
        }
        Command::Scan {
            root,
            out,
            extensions,
            strict,
        } => {
            let o = ingest::scan_sources(&root, &ScanOptions { extensions, strict })?;
            ingest::save_graph(&o.graph, &out)?;
            println!(
                "{} files, {} classes, {} edges; {} skipped, {} ambiguous calls, {} duplicate names",
                o.report.files_scanned,
                o.summary.classes,
                o.summary.edges,
                o.report.skipped.len(),
                o.report.ambiguous.len(),
                o.report.duplicates.len()
            );
        }
        Command::Decompose { graph, run } => {
            let config = run.config()?;
            let g = load_graph(&graph)?;
            let truth = run.truth()?;
            let out = harness::run_once(&config, &g, &run.stop_list()?, truth.as_ref())?;
            let dir = out_dir(&config);
            out.write(&dir)?;
            if !out.converged {
                log::warn!("stopped at the iteration cap without a stable cluster count");
            }
            println!("{}", metrics::MetricsReport::CSV_HEADER);
            println!("{}", out.metrics.csv_fields());
            if let Some(gt) = &out.ground_truth {
                println!("precision {} SR@5 {} SR@7 {} SR@9 {}", gt.precision, gt.sr[&5], gt.sr[&7], gt.sr[&9]);
            }
            println!("wrote {}", dir.display());
        }
        Command::Evaluate {
            graph,
            decomposition,
            ground_truth,
        } => {
            let g = load_graph(&graph)?;
            let d = Decomposition::load(&decomposition)?;
            println!("{}", metrics::summarize(&d, &g)?.to_json());
            if let Some(p) = ground_truth {
                let t = load_truth(&p)?;
                println!("{}", monodecomp_core::gteval::evaluate(&d, &t)?.to_json());
            }
        }
        Command::Compare {
            graph,
            run,
            all_algorithms,
        } => {
            let config = run.config()?;
            let g = load_graph(&graph)?;
            let algorithms = if all_algorithms {
                vec![Algorithm::Bmsc, Algorithm::MeanShift, Algorithm::Dbscan]
            } else {
                vec![config.algorithm]
            };
            let truth = run.truth()?;
            let rows = harness::compare(&config, &g, &run.stop_list()?, &algorithms, truth.as_ref())?;
            let csv = harness::compare_csv(&rows);
            match &config.out {
                Some(dir) => write_file(&dir.join("compare.csv"), &csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Sweep {
            graph,
            run,
            param,
            start,
            end,
            step,
        } => {
            let mut config = run.config()?;
            let param: Option<SweepParam> = param.as_deref().map(str::parse).transpose()?;
            if let (Some(start), Some(end), Some(step)) = (start, end, step) {
                let Some(param) = param.or(config.sweep.as_ref().map(|s| s.param)) else {
                    bail!("--start/--end/--step need --param");
                };
                config.sweep = Some(SweepSpec { param, start, end, step });
            }
            let g = load_graph(&graph)?;
            let rows = harness::sweep(&config, &g, &run.stop_list()?, param)?;
            let csv = harness::sweep_csv(&rows);
            match &config.out {
                Some(dir) => write_file(&dir.join("sweep.csv"), &csv)?,
                None => print!("{csv}"),
            }
        }
        Command::ExportDot {
            graph,
            decomposition,
            out,
        } => {
            let g = load_graph(&graph)?;
            let d = Decomposition::load(&decomposition)?;
            let dot = harness::export_dot(&d, &g)?;
            match out {
                Some(p) => write_file(&p, &dot)?,
                None => print!("{dot}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
