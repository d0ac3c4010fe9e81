use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kbenrich_core::eval::{run_eval, EvalConfig};
use kbenrich_core::gnn::{train, Checkpoint, GnnConfig};
use kbenrich_core::graph::{build_graph, EntityPropertyGraph, GraphOptions};
use kbenrich_core::kb::synthetic::{generate_kb, SyntheticKbConfig};
use kbenrich_core::kb::{leave_n_out, load_kb, write_jsonl, write_tsv, FactKey, KbFormat, KnowledgeBase};
use kbenrich_core::pipeline::{enrich, write_audit, write_back, PipelineConfig};
use kbenrich_core::rng::derive_seed;
use kbenrich_core::similarity::{top_k_neighbors, CorpusStats};
use kbenrich_core::source_sim::{
    generate_world, read_claims, read_facts, save_world, simulate_claims, write_facts, Extractor, PlantedFact,
    read_sources, SimulatedExtractor, SourceConfig, SourceType, World, WorldConfig, SOURCES_FILE,
};
use kbenrich_core::truth::{predict_cardinalities, verify, write_source_reliability, write_verified_facts};
use kbenrich_core::Error;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Config(_)) | CliError::Usage(_) => 1,
            CliError::Core(_) => 2,
            CliError::NotConverged(_) => 3,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Knowledge-base enrichment for long-tail entities.
#[derive(Debug, Parser)]
#[command(name = "kbenrich", version)]
struct Cli {
    /// TOML config file. `eval run` reads an evaluation config, every
    /// other command a pipeline config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Knowledge-base utilities.
    #[command(subcommand)]
    Kb(KbCommand),
    /// Entity similarity.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Entity-property graph.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Property prediction model.
    #[command(subcommand)]
    Gnn(GnnCommand),
    /// Simulated sources and claims.
    #[command(subcommand)]
    World(WorldCommand),
    /// Infer the truth of claimed facts.
    Verify(VerifyArgs),
    /// Predict, collect, verify and optionally write back facts for one entity.
    Enrich(EnrichArgs),
    /// Evaluation protocol.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Debug, Args)]
struct KbArg {
    /// KB file (TSV triples, or JSON lines for .jsonl/.json).
    #[arg(long)]
    kb: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum KbCommand {
    /// Print entity, property, class and fact counts.
    Stats(KbArg),
    /// Write a synthetic KB with class-correlated property usage.
    Generate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Hide all but `keep` properties of an entity: writes the reduced KB
    /// and the hidden facts (as true facts) for `world generate --facts`.
    Holdout {
        #[command(flatten)]
        kb: KbArg,
        #[arg(long)]
        entity: String,
        #[arg(long, default_value_t = 5)]
        keep: usize,
        #[arg(long)]
        out_kb: PathBuf,
        #[arg(long)]
        out_facts: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum SimCommand {
    /// The k most similar entities as TSV (entity, score).
    Topk {
        #[command(flatten)]
        kb: KbArg,
        #[arg(long)]
        entity: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
}

#[derive(Debug, Subcommand)]
enum GraphCommand {
    /// Build the graph and write it as canonical JSON.
    Build {
        #[command(flatten)]
        kb: KbArg,
        #[arg(long)]
        out: PathBuf,
        /// Entity neighbours per node.
        #[arg(long)]
        k: Option<usize>,
        /// Make entity-entity edges mutual.
        #[arg(long)]
        symmetrize_ee: bool,
    },
}

#[derive(Debug, Args)]
struct GraphSource {
    #[command(flatten)]
    kb: KbArg,
    /// Prebuilt graph JSON; built from the KB when absent.
    #[arg(long)]
    graph: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum GnnCommand {
    /// Train the model and write a checkpoint.
    Train {
        #[command(flatten)]
        source: GraphSource,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Separate attention parameters per neighbour role.
        #[arg(long)]
        per_role_attention: bool,
        /// Uniform aggregation coefficients instead of attention.
        #[arg(long)]
        no_attention: bool,
    },
    /// Top-m missing properties of an entity as TSV (property, score).
    Rank {
        #[command(flatten)]
        source: GraphSource,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        entity: String,
        #[arg(long)]
        m: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
enum WorldCommand {
    /// Simulate sources and claims; writes claims, planted truths, prior
    /// truths and the source table into a directory.
    Generate {
        #[arg(long)]
        out: PathBuf,
        /// Plant these facts (JSON lines; a missing `truth` counts as true)
        /// instead of a synthetic fact pool.
        #[arg(long)]
        facts: Option<PathBuf>,
        #[arg(long)]
        n_facts: Option<usize>,
        #[arg(long)]
        n_sources: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Claims as JSON lines.
    #[arg(long)]
    claims: Option<PathBuf>,
    /// Facts known to be true, as JSON lines.
    #[arg(long)]
    prior: Option<PathBuf>,
    /// KB used to predict property cardinality; all properties are treated
    /// as multi-valued without one.
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Output directory for verified_facts.tsv and source_reliability.tsv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the plain sample variance instead of the confidence-bound estimator.
    #[arg(long)]
    plain_variance: bool,
}

#[derive(Debug, Args)]
struct EnrichArgs {
    #[command(flatten)]
    source: GraphSource,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    claims: Option<PathBuf>,
    #[arg(long)]
    entity: String,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the updated KB and the audit log.
    #[arg(long)]
    write_back: bool,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Run the synthetic leave-n-out protocol and write a JSON report.
    Run {
        #[arg(long)]
        out: PathBuf,
        /// Also train a uniform-coefficient model for comparison.
        #[arg(long)]
        ablate_attention: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn pipeline_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.check_paths()?;
    Ok(cfg)
}

/// The command-line path if given, else the configured one.
fn pick(flag: &Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> CliResult<PathBuf> {
    flag.clone()
        .or_else(|| configured.clone())
        .ok_or_else(|| CliError::Usage(format!("no {what} given: pass --{what} or set paths.{what} in the config")))
}

fn read_kb(path: &Path) -> CliResult<KnowledgeBase> {
    Ok(load_kb(path, KbFormat::from_path(path))?)
}

fn save_kb(kb: &KnowledgeBase, path: &Path) -> CliResult {
    let file = fs::File::create(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let mut w = std::io::BufWriter::new(file);
    let res = match KbFormat::from_path(path) {
        KbFormat::TsvTriples => write_tsv(kb, &mut w),
        KbFormat::JsonLines => write_jsonl(kb, &mut w),
    };
    res.and_then(|_| std::io::Write::flush(&mut w)).map_err(|e| {
        CliError::Core(Error::Io {
            path: path.into(),
            source: e,
        })
    })
}

fn write_file(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.into(),
            source: e,
        })?;
    }
    fs::write(path, text).map_err(|e| {
        CliError::Core(Error::Io {
            path: path.into(),
            source: e,
        })
    })
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::Core(Error::Io {
            path: dir.into(),
            source: e,
        })
    })
}

fn gnn_config(cfg: &PipelineConfig) -> GnnConfig {
    GnnConfig {
        seed: derive_seed(cfg.seed, "gnn"),
        ..cfg.gnn.clone()
    }
}

fn load_graph(source: &GraphSource, cfg: &PipelineConfig) -> CliResult<(KnowledgeBase, EntityPropertyGraph)> {
    let kb = read_kb(&pick(&source.kb.kb, &cfg.paths.kb, "kb")?)?;
    let graph = match source.graph.clone().or_else(|| cfg.paths.graph.clone()) {
        Some(path) => {
            let text = fs::read_to_string(&path).map_err(|e| Error::Io { path, source: e })?;
            EntityPropertyGraph::from_json(&text)?
        }
        None => build_graph(&kb, &cfg.graph)?,
    };
    Ok((kb, graph))
}

fn load_checkpoint(flag: &Option<PathBuf>, cfg: &PipelineConfig, graph: &EntityPropertyGraph) -> CliResult<Checkpoint> {
    let ck = Checkpoint::load(pick(flag, &cfg.paths.checkpoint, "checkpoint")?)?;
    ck.matches(graph)?;
    Ok(ck)
}

fn run(cli: Cli) -> CliResult {
    if let Command::Eval(EvalCommand::Run { out, ablate_attention }) = &cli.command {
        let mut cfg = match &cli.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                EvalConfig::from_toml(&text)?
            }
            None => EvalConfig::default(),
        };
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        cfg.ablate_attention |= ablate_attention;
        let report = run_eval(&cfg)?;
        write_file(out, &(report.to_json()? + "\n"))?;
        if !report.average.inference_converged {
            log::warn!("truth inference did not converge for every class");
        }
        return Ok(());
    }

    let cfg = pipeline_config(&cli)?;
    match cli.command {
        Command::Kb(KbCommand::Stats(arg)) => {
            let kb = read_kb(&pick(&arg.kb, &cfg.paths.kb, "kb")?)?;
            let long_tail = kb.entities().iter().filter(|e| kb.is_long_tail(e)).count();
            println!("entities\t{}", kb.entities().len());
            println!("properties\t{}", kb.properties().len());
            println!("classes\t{}", kb.classes().len());
            println!("literals\t{}", kb.literals().len());
            println!("facts\t{}", kb.len());
            println!("long_tail_entities\t{long_tail}");
        }
        Command::Kb(KbCommand::Generate { out }) => {
            let syn = SyntheticKbConfig {
                seed: derive_seed(cfg.seed, "kb"),
                ..SyntheticKbConfig::default()
            };
            save_kb(&generate_kb(&syn), &out)?;
        }
        Command::Kb(KbCommand::Holdout {
            kb,
            entity,
            keep,
            out_kb,
            out_facts,
        }) => {
            let full = read_kb(&pick(&kb.kb, &cfg.paths.kb, "kb")?)?;
            let lo = leave_n_out(&full, &entity, keep, derive_seed(cfg.seed, "holdout"))?;
            let overrides = [(entity.clone(), lo.kept_facts.clone())].into_iter().collect();
            save_kb(&full.restrict(full.entities(), &overrides), &out_kb)?;
            let hidden: Vec<FactKey> = lo.removed_facts.iter().map(|f| f.key()).collect();
            write_facts(&out_facts, hidden.iter().map(|f| (f, Some(true))))?;
        }
        Command::Sim(SimCommand::Topk { kb, entity, k }) => {
            let kb = read_kb(&pick(&kb.kb, &cfg.paths.kb, "kb")?)?;
            let stats = CorpusStats::from_kb(&kb);
            for (e, s) in top_k_neighbors(&kb, &stats, &cfg.graph.weights, &entity, k)? {
                println!("{e}\t{s}");
            }
        }
        Command::Graph(GraphCommand::Build {
            kb,
            out,
            k,
            symmetrize_ee,
        }) => {
            let kb = read_kb(&pick(&kb.kb, &cfg.paths.kb, "kb")?)?;
            let opts = GraphOptions {
                k: k.unwrap_or(cfg.graph.k),
                symmetrize_ee: symmetrize_ee || cfg.graph.symmetrize_ee,
                ..cfg.graph
            };
            write_file(&out, &build_graph(&kb, &opts)?.to_canonical_json()?)?;
        }
        Command::Gnn(GnnCommand::Train {
            source,
            out,
            epochs,
            per_role_attention,
            no_attention,
        }) => {
            let (_, graph) = load_graph(&source, &cfg)?;
            let mut gcfg = gnn_config(&cfg);
            gcfg.epochs = epochs.unwrap_or(gcfg.epochs);
            gcfg.per_role_attention |= per_role_attention;
            gcfg.attention_enabled &= !no_attention;
            let out = pick(&out, &cfg.paths.checkpoint, "checkpoint")?;
            let model = train(&graph, &gcfg)?;
            if let (Some(first), Some(last)) = (model.epoch_losses.first(), model.epoch_losses.last()) {
                log::info!("training loss {first:.4} -> {last:.4}");
            }
            Checkpoint::new(&graph, model).save(out)?;
        }
        Command::Gnn(GnnCommand::Rank {
            source,
            checkpoint,
            entity,
            m,
        }) => {
            let (_, graph) = load_graph(&source, &cfg)?;
            let ck = load_checkpoint(&checkpoint, &cfg, &graph)?;
            for (p, s) in ck.model.rank_properties(&graph, &entity, m.unwrap_or(cfg.m))? {
                println!("{p}\t{s}");
            }
        }
        Command::World(WorldCommand::Generate {
            out,
            facts,
            n_facts,
            n_sources,
        }) => {
            let mut wcfg: WorldConfig = cfg.world.clone();
            wcfg.n_facts = n_facts.unwrap_or(wcfg.n_facts);
            wcfg.sources = SourceConfig {
                n_sources: n_sources.unwrap_or(wcfg.sources.n_sources),
                seed: derive_seed(cfg.seed, "world"),
                ..wcfg.sources
            };
            let world: World = match facts {
                Some(path) => {
                    let planted: Vec<PlantedFact> = read_facts(path)?
                        .into_iter()
                        .map(|(fact, truth)| PlantedFact {
                            fact,
                            truth: truth.unwrap_or(true),
                            prior: false,
                        })
                        .collect();
                    simulate_claims(&planted, &wcfg.sources)?
                }
                None => generate_world(&wcfg)?,
            };
            save_world(&world, &out)?;
        }
        Command::Verify(args) => {
            let claims_path = pick(&args.claims, &cfg.paths.claims, "claims")?;
            let claims = read_claims(&claims_path)?;
            let prior = read_prior(args.prior.as_ref().or(cfg.paths.prior.as_ref()))?;
            let cardinality = match args.kb.as_ref().or(cfg.paths.kb.as_ref()) {
                Some(path) => predict_cardinalities(&read_kb(path)?, cfg.truth.multi_value_share),
                None => Default::default(),
            };
            let mut tcfg = cfg.truth.clone();
            tcfg.use_ci_estimator &= !args.plain_variance;
            let out = verify(&claims, &prior, &cardinality, &tcfg)?;
            let dir = pick(&args.out, &cfg.paths.output, "out")?;
            create_dir(&dir)?;
            write_verified_facts(dir.join("verified_facts.tsv"), &out.facts)?;
            write_source_reliability(dir.join("source_reliability.tsv"), &out.sources)?;
            if !out.converged {
                return Err(CliError::NotConverged(format!(
                    "truth inference stopped after {} iterations without converging; results were written",
                    out.iterations
                )));
            }
        }
        Command::Enrich(args) => {
            let (kb, graph) = load_graph(&args.source, &cfg)?;
            let ck = load_checkpoint(&args.checkpoint, &cfg, &graph)?;
            let claims_path = pick(&args.claims, &cfg.paths.claims, "claims")?;
            let claims = read_claims(&claims_path)?;
            let sources_path = claims_path.with_file_name(SOURCES_FILE);
            let extractors = if sources_path.exists() {
                let world = World {
                    sources: read_sources(&sources_path)?,
                    claims,
                    truths: Default::default(),
                    prior_truths: Default::default(),
                };
                SimulatedExtractor::all(&world)
            } else {
                vec![SimulatedExtractor::from_claims(claims, SourceType::Structured)]
            };
            let dyn_extractors: Vec<&dyn Extractor> = extractors.iter().map(|x| x as &dyn Extractor).collect();
            let prior = read_prior(cfg.paths.prior.as_ref())?;
            let m = args.m.unwrap_or(cfg.m);
            let result = enrich(&kb, &graph, &ck.model, &dyn_extractors, &prior, &args.entity, m, &cfg.truth)?;
            let dir = pick(&args.out, &cfg.paths.output, "out")?;
            create_dir(&dir)?;
            write_file(&dir.join("enrichment.json"), &(serde_json::to_string_pretty(&result).map_err(Error::from)? + "\n"))?;
            write_verified_facts(dir.join("verified_facts.tsv"), &result.facts)?;
            if args.write_back {
                let (updated, audit) = write_back(&kb, &result, &cfg.ranges);
                save_kb(&updated, &dir.join("kb.tsv"))?;
                write_audit(dir.join("audit.jsonl"), &audit)?;
            }
            println!(
                "{}\t{} candidate facts\t{} accepted",
                result.entity,
                result.facts.len(),
                result.accepted().count()
            );
            if !result.converged {
                return Err(CliError::NotConverged("truth inference did not converge; results were written".into()));
            }
        }
        Command::Eval(_) => unreachable!("handled above"),
    }
    Ok(())
}

fn read_prior(path: Option<&PathBuf>) -> CliResult<BTreeSet<FactKey>> {
    Ok(match path {
        Some(p) => read_facts(p)?.into_iter().map(|(f, _)| f).collect(),
        None => BTreeSet::new(),
    })
}
