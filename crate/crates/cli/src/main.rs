use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use causal_fl::baselines;
use causal_fl::corpus::load_corpus;
use causal_fl::eval::experiment::{run_experiment, technique_ranking, ExperimentConfig};
use causal_fl::eval::mutate::{run_plain, seed_faults, Operator};
use causal_fl::gsa::{InstrumentedProgram, SiteTable};
use causal_fl::lang::render;
use causal_fl::pipeline::instrument_program;
use causal_fl::profile::{run_suite, ProfileMatrix, RunConfig, TestSuite};
use causal_fl::scorer::{score_all, site_forest, ScoreConfig};
use causal_fl::transform::transform_predicates;
use causal_fl::{parse, Ranking, Technique};

/// Causal statistical fault localization for MIL programs.
#[derive(Parser, Debug)]
#[command(name = "causal-fl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Also score and rank phi (merge) sites.
    #[arg(long, global = true)]
    include_phi: bool,
    #[arg(long, global = true, default_value_t = 500)]
    n_trees: usize,
    /// Minimum number of runs executing a site for it to be scored.
    #[arg(long, global = true, default_value_t = 6)]
    min_rows: usize,
    /// UniVal repetitions per version in `evaluate`.
    #[arg(long, global = true, default_value_t = 10)]
    repetitions: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TechniqueArg {
    Unival,
    Ochiai,
    Dstar,
    Baah,
    Esp,
    Predswitch,
    All,
}

impl TechniqueArg {
    fn expand(list: &[TechniqueArg]) -> Vec<Technique> {
        let mut out: Vec<Technique> = Vec::new();
        for t in list {
            let ts: &[Technique] = match t {
                TechniqueArg::All => &Technique::ALL,
                TechniqueArg::Unival => &[Technique::Unival],
                TechniqueArg::Ochiai => &[Technique::Ochiai],
                TechniqueArg::Dstar => &[Technique::Dstar],
                TechniqueArg::Baah => &[Technique::Baah],
                TechniqueArg::Esp => &[Technique::Esp],
                TechniqueArg::Predswitch => &[Technique::Predswitch],
            };
            for t in ts {
                if !out.contains(t) {
                    out.push(*t);
                }
            }
        }
        out
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rewrite branch and loop conditions into predicate assignments.
    Transform {
        program: PathBuf,
        /// Directory for `transformed.mil` and `predicates.json` (default: source to stdout).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Transform and place recording sites.
    Instrument {
        program: PathBuf,
        /// Directory for `instrumented.mil`, `sites.json` and `predicates.json`.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the instrumented program over a suite and write per-test profiles (JSON lines).
    Profile {
        program: PathBuf,
        #[arg(long)]
        suite: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Instrument, profile and rank in one pass; ranking CSV on stdout.
    Localize {
        /// Not needed with `--from-profiles` unless predicate switching is requested.
        program: Option<PathBuf>,
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "unival")]
        technique: Vec<TechniqueArg>,
        /// Use stored profiles instead of running the suite.
        #[arg(long, requires = "sites")]
        from_profiles: Option<PathBuf>,
        /// Site table written by `instrument`.
        #[arg(long)]
        sites: Option<PathBuf>,
        /// Write the per-site UniVal report (counterfactual means) as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Print the per-site UniVal breakdown to standard error.
        #[arg(short, long)]
        verbose: bool,
        /// Write every fitted UniVal forest as `<function>-<site>.json` into this directory.
        #[arg(long)]
        dump_model: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Rank with baseline techniques; ranking CSV on stdout.
    Baseline {
        program: Option<PathBuf>,
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
        technique: Vec<TechniqueArg>,
        #[arg(long, requires = "sites")]
        from_profiles: Option<PathBuf>,
        #[arg(long)]
        sites: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run every technique over a corpus directory and write the report.
    Evaluate {
        /// Directory of `<program>/{program.mil, suite.json, faults/}`.
        corpus: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
        technique: Vec<TechniqueArg>,
        /// Directory for `report.md`, `report.json` and `scatter.csv` (default: Markdown to stdout).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate killed mutants of a program as faulty versions.
    SeedFaults {
        program: PathBuf,
        #[arg(long)]
        suite: PathBuf,
        /// Mutation operators (default: all).
        #[arg(long, value_delimiter = ',')]
        operators: Vec<String>,
        /// Keep only mutants failing at least this many tests.
        #[arg(long, default_value_t = 1)]
        min_failing: usize,
        /// Keep only mutants passing at least this many tests.
        #[arg(long, default_value_t = 1)]
        min_passing: usize,
        /// Keep every k-th eligible mutant.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Directory for `<id>.mil` and `<id>.json` (default: summary only).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// A command line that parses but cannot be acted on; exits like a clap
/// usage error.
#[derive(Debug)]
struct Usage(&'static str);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.0)
    }
}

impl std::error::Error for Usage {}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn load_program(path: &Path) -> Result<InstrumentedProgram> {
    let src = read(path)?;
    let program = parse(&src).with_context(|| format!("{}", path.display()))?;
    instrument_program(&program).with_context(|| format!("{}", path.display()))
}

fn load_suite(path: &Path) -> Result<TestSuite> {
    TestSuite::from_json(&read(path)?).with_context(|| format!("invalid suite {}", path.display()))
}

fn load_profiles(path: &Path) -> Result<ProfileMatrix> {
    let f = fs::File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    ProfileMatrix::read_jsonl(BufReader::new(f)).with_context(|| format!("invalid profiles {}", path.display()))
}

fn score_config(c: &Common) -> ScoreConfig {
    ScoreConfig {
        seed: c.seed,
        n_trees: c.n_trees,
        min_rows: c.min_rows,
        include_phi: c.include_phi,
        ..ScoreConfig::default()
    }
}

/// Everything a ranking can be computed from.
struct Inputs {
    program: Option<InstrumentedProgram>,
    suite: Option<TestSuite>,
    sites: SiteTable,
    profiles: ProfileMatrix,
}

fn gather(
    program: Option<&Path>,
    suite: Option<&Path>,
    from_profiles: Option<&Path>,
    sites: Option<&Path>,
) -> Result<Inputs> {
    let program = program.map(load_program).transpose()?;
    let suite = suite.map(load_suite).transpose()?;
    if let Some(pp) = from_profiles {
        let sp = sites.expect("clap enforces --sites");
        let table = SiteTable::from_json(&read(sp)?).with_context(|| format!("invalid site table {}", sp.display()))?;
        return Ok(Inputs {
            program,
            suite,
            sites: table,
            profiles: load_profiles(pp)?,
        });
    }
    let (Some(ip), Some(s)) = (&program, &suite) else {
        bail!(Usage("a program and --suite are required unless --from-profiles is given"));
    };
    let profiles = run_suite(ip, s, RunConfig::default())?;
    info!("profiled {} tests, {} failing", profiles.rows.len(), profiles.n_failing());
    Ok(Inputs {
        sites: ip.sites.clone(),
        program,
        suite,
        profiles,
    })
}

fn rankings(inputs: &Inputs, techniques: &[Technique], common: &Common) -> Result<Vec<Ranking>> {
    techniques
        .iter()
        .map(|&t| match t {
            Technique::Predswitch => {
                let (Some(ip), Some(s)) = (&inputs.program, &inputs.suite) else {
                    bail!(Usage("predswitch re-runs the program: give the program and --suite"));
                };
                Ok(technique_ranking(t, ip, s, &inputs.profiles, &score_config(common), RunConfig::default())?)
            }
            Technique::Unival => Ok(score_all(&inputs.profiles, &inputs.sites, &score_config(common)).ranking),
            other => Ok(baselines::rank(other, &inputs.profiles, &inputs.sites)),
        })
        .collect()
}

fn csv(rankings: &[Ranking]) -> String {
    let mut out = String::new();
    for (i, r) in rankings.iter().enumerate() {
        let text = r.to_csv();
        if i == 0 {
            out.push_str(&text);
        } else {
            out.extend(text.split_inclusive('\n').skip(1));
        }
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    match cli.command {
        Command::Transform { program, output } => {
            let p = parse(&read(&program)?).with_context(|| format!("{}", program.display()))?;
            let (t, preds) = transform_predicates(&p);
            match output {
                Some(dir) => {
                    create_dir(&dir)?;
                    write_out(Some(&dir.join("transformed.mil")), &render(&t))?;
                    write_out(Some(&dir.join("predicates.json")), &preds.to_json())?;
                }
                None => write_out(None, &render(&t))?,
            }
        }
        Command::Instrument { program, output } => {
            let ip = load_program(&program)?;
            match output {
                Some(dir) => {
                    create_dir(&dir)?;
                    write_out(Some(&dir.join("instrumented.mil")), &ip.annotated_source())?;
                    write_out(Some(&dir.join("sites.json")), &ip.sites.to_json())?;
                    write_out(Some(&dir.join("predicates.json")), &ip.predicates.to_json())?;
                }
                None => write_out(None, &ip.annotated_source())?,
            }
        }
        Command::Profile { program, suite, output } => {
            let ip = load_program(&program)?;
            let s = load_suite(&suite)?;
            let m = run_suite(&ip, &s, RunConfig::default())?;
            info!("{} tests, {} failing", m.rows.len(), m.n_failing());
            write_out(output.as_deref(), &m.to_jsonl())?;
        }
        Command::Localize {
            program,
            suite,
            technique,
            from_profiles,
            sites,
            report,
            verbose,
            dump_model,
            output,
        } => {
            let inputs = gather(program.as_deref(), suite.as_deref(), from_profiles.as_deref(), sites.as_deref())?;
            let techniques = TechniqueArg::expand(&technique);
            if report.is_some() || verbose {
                let r = score_all(&inputs.profiles, &inputs.sites, &score_config(common));
                if verbose {
                    eprint!("{}", r.verbose());
                }
                if let Some(path) = report {
                    write_out(Some(&path), &serde_json::to_string_pretty(&r)?)?;
                }
            }
            if let Some(dir) = dump_model {
                create_dir(&dir)?;
                let cfg = score_config(common);
                for site in inputs.sites.iter() {
                    if let Some(forest) = site_forest(&inputs.profiles, &inputs.sites, site.id, &cfg) {
                        let path = dir.join(format!("{}-{}.json", site.function, site.name));
                        write_out(Some(&path), &forest.to_json())?;
                    }
                }
            }
            write_out(output.as_deref(), &csv(&rankings(&inputs, &techniques, common)?))?;
        }
        Command::Baseline {
            program,
            suite,
            technique,
            from_profiles,
            sites,
            output,
        } => {
            let inputs = gather(program.as_deref(), suite.as_deref(), from_profiles.as_deref(), sites.as_deref())?;
            let mut techniques = TechniqueArg::expand(&technique);
            techniques.retain(|t| *t != Technique::Unival);
            if techniques.is_empty() {
                bail!(Usage("no baseline technique selected"));
            }
            if inputs.program.is_none() {
                techniques.retain(|t| *t != Technique::Predswitch);
            }
            write_out(output.as_deref(), &csv(&rankings(&inputs, &techniques, common)?))?;
        }
        Command::Evaluate {
            corpus,
            technique,
            output,
        } => {
            let programs = load_corpus(&corpus)?;
            let config = ExperimentConfig {
                techniques: TechniqueArg::expand(&technique),
                repetitions: common.repetitions,
                seed: common.seed,
                n_trees: common.n_trees,
                min_rows: common.min_rows,
                include_phi: common.include_phi,
                ..ExperimentConfig::default()
            };
            let report = run_experiment(&programs, &config);
            match output {
                Some(dir) => {
                    create_dir(&dir)?;
                    write_out(Some(&dir.join("report.md")), &report.to_markdown())?;
                    write_out(Some(&dir.join("report.json")), &report.to_json())?;
                    write_out(Some(&dir.join("scatter.csv")), &report.scatter_csv())?;
                }
                None => write_out(None, &report.to_markdown())?,
            }
        }
        Command::SeedFaults {
            program,
            suite,
            operators,
            min_failing,
            min_passing,
            stride,
            output,
        } => {
            let src = read(&program)?;
            let s = load_suite(&suite)?;
            let ops: Vec<Operator> = if operators.is_empty() {
                Operator::ALL.to_vec()
            } else {
                operators.iter().map(|o| o.parse()).collect::<Result<_, String>>().map_err(anyhow::Error::msg)?
            };
            let parsed = parse(&src).with_context(|| format!("{}", program.display()))?;
            if run_plain(&parsed, &s, causal_fl::lang::DEFAULT_STEP_LIMIT).failing > 0 {
                bail!("{}: the original program already fails its suite", program.display());
            }
            let name = program
                .parent()
                .and_then(|d| d.file_name())
                .map_or("program".to_string(), |n| n.to_string_lossy().into_owned());
            let n = s.tests.len();
            let kept: Vec<_> = seed_faults(&name, &src, &s, &ops)
                .into_iter()
                .filter(|m| m.n_failing >= min_failing && n - m.n_failing >= min_passing)
                .step_by(stride.max(1))
                .collect();
            if let Some(dir) = &output {
                create_dir(dir)?;
            }
            for m in &kept {
                println!("{}\t{} failing\t{}", m.id, m.n_failing, m.fault.description);
                if let Some(dir) = &output {
                    write_out(Some(&dir.join(format!("{}.mil", m.id))), &m.source)?;
                    write_out(
                        Some(&dir.join(format!("{}.json", m.id))),
                        &format!("{}\n", serde_json::to_string_pretty(&m.fault)?),
                    )?;
                }
            }
            info!("{} mutants kept", kept.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CAUSAL_FL_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let jobs = cli.common.jobs;
    let result = match jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(|| run(cli)),
            Err(e) => Err(e.into()),
        },
        None => run(cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
