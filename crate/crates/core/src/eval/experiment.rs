//! Corpus experiments: every faulty version × technique × repetition, folded
//! into a deterministic report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{covariate_imbalance, fault_rank, hit_at_n, spearman, FaultRank, Imbalance};
use crate::baselines;
use crate::corpus::{CorpusProgram, FaultVersion};
use crate::gsa::{InstrumentedProgram, SiteKind};
use crate::lang::{SiteId, DEFAULT_STEP_LIMIT};
use crate::pipeline::prepare;
use crate::profile::{run_suite, ProfileMatrix, RunConfig, TestSuite};
use crate::ranking::{Ranking, Technique, Universe};
use crate::scorer::{score_all, ScoreConfig};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub techniques: Vec<Technique>,
    /// UniVal runs per version; its forest seeds differ per repetition.
    pub repetitions: usize,
    pub seed: u64,
    pub n_trees: usize,
    pub min_rows: usize,
    pub include_phi: bool,
    pub step_limit: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            techniques: Technique::ALL.to_vec(),
            repetitions: 10,
            seed: 42,
            n_trees: 500,
            min_rows: 6,
            include_phi: false,
            step_limit: DEFAULT_STEP_LIMIT,
        }
    }
}

impl ExperimentConfig {
    /// Scorer settings for repetition `rep`.
    pub fn score_config(&self, rep: usize) -> ScoreConfig {
        ScoreConfig {
            seed: seed::derive(self.seed, &[rep as u64]),
            n_trees: self.n_trees,
            min_rows: self.min_rows,
            include_phi: self.include_phi,
            ..ScoreConfig::default()
        }
    }

    fn run_config(&self) -> RunConfig {
        RunConfig {
            step_limit: self.step_limit,
            forced_flip: None,
        }
    }
}

/// Ranking of one technique for an already profiled program. `score` is only
/// used by UniVal.
pub fn technique_ranking(
    technique: Technique,
    program: &InstrumentedProgram,
    suite: &TestSuite,
    profiles: &ProfileMatrix,
    score: &ScoreConfig,
    run: RunConfig,
) -> Result<Ranking, crate::profile::ProfileError> {
    Ok(match technique {
        Technique::Unival => score_all(profiles, &program.sites, score).ranking,
        Technique::Predswitch => {
            let scores = baselines::predicate_switching(program, suite, profiles, run)?;
            Ranking::from_site_scores(
                technique,
                &program.sites,
                &scores,
                Universe {
                    include_phi: false,
                    predicates_only: true,
                },
            )
        }
        other => baselines::rank(other, profiles, &program.sites),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueResult {
    /// Mean EXAM over repetitions.
    pub exam: f64,
    /// Mean effective rank over repetitions; `None` if the fault was unranked
    /// in some repetition.
    pub rank: Option<f64>,
    pub n_elements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceRecord {
    pub site: String,
    #[serde(flatten)]
    pub imbalance: Imbalance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionResult {
    pub program: String,
    pub version: String,
    pub faulty_lines: Vec<u32>,
    pub n_tests: usize,
    pub n_failing: usize,
    /// A whole branch/loop condition sits on a faulty line.
    pub predicate_fault: bool,
    /// ... and some other site depends on it.
    pub confounding_prone: bool,
    pub imbalance: Option<ImbalanceRecord>,
    pub techniques: BTreeMap<Technique, TechniqueResult>,
    /// Range of all UniVal site scores over all repetitions.
    pub unival_score_range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub program: String,
    pub version: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueSummary {
    pub n: usize,
    pub mean_exam: f64,
    pub hit_at_5: usize,
    pub hit_at_10: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSummary {
    pub n: usize,
    pub mean_exam: BTreeMap<Technique, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceStudy {
    pub n: usize,
    pub note: String,
    /// Spearman correlation between standardized imbalance and EXAM.
    pub spearman: BTreeMap<Technique, Option<f64>>,
    /// Versions in the top third by standardized imbalance.
    pub top_tercile: SubsetSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub versions: Vec<VersionResult>,
    pub exclusions: Vec<Exclusion>,
    pub summary: BTreeMap<Technique, TechniqueSummary>,
    pub program_means: BTreeMap<String, BTreeMap<Technique, f64>>,
    pub confounding_prone: SubsetSummary,
    pub imbalance_study: ImbalanceStudy,
}

const IMBALANCE_NOTE: &str = "covariates are the numeric (int/float) parents of the condition and its atoms; boolean covariates are excluded";

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn subset(versions: &[&VersionResult], techniques: &[Technique]) -> SubsetSummary {
    SubsetSummary {
        n: versions.len(),
        mean_exam: techniques
            .iter()
            .filter(|_| !versions.is_empty())
            .map(|t| (*t, mean(versions.iter().map(|v| v.techniques[t].exam))))
            .collect(),
    }
}

enum Outcome {
    Done(Box<VersionResult>),
    Excluded(Exclusion),
}

fn run_version(program: &CorpusProgram, version: &FaultVersion, config: &ExperimentConfig) -> Outcome {
    let exclude = |reason: String| {
        warn!("{}/{}: excluded ({reason})", program.name, version.id);
        Outcome::Excluded(Exclusion {
            program: program.name.clone(),
            version: version.id.clone(),
            reason,
        })
    };
    let ip = match prepare(&version.source) {
        Ok(ip) => ip,
        Err(e) => return exclude(e.to_string()),
    };
    let profiles = match run_suite(&ip, &program.suite, config.run_config()) {
        Ok(p) => p,
        Err(e) => return exclude(e.to_string()),
    };
    let n_failing = profiles.n_failing();
    if n_failing == 0 {
        return exclude("no failing test".into());
    }
    if profiles.n_passing() == 0 {
        return exclude("no passing test".into());
    }
    let lines = &version.fault.faulty_lines;
    let conditions: Vec<SiteId> = ip
        .sites
        .iter()
        .filter(|s| {
            s.kind == SiteKind::Predicate
                && lines.contains(&s.line)
                && ip.predicates.get(&s.base).is_some_and(|e| e.conjunct_index == 0)
        })
        .map(|s| s.id)
        .collect();
    let predicate_fault = !conditions.is_empty();
    let confounding_prone = conditions.iter().any(|c| !ip.sites.dependents(*c).is_empty());
    let imbalance = conditions.iter().find_map(|c| {
        covariate_imbalance(&profiles, &ip.sites, &ip.predicates, *c)
            .ok()
            .map(|imbalance| ImbalanceRecord {
                site: ip.sites.get(*c).name.clone(),
                imbalance,
            })
    });

    let mut techniques = BTreeMap::new();
    let mut score_range: Option<(f64, f64)> = None;
    for &t in &config.techniques {
        let reps = if t == Technique::Unival { config.repetitions.max(1) } else { 1 };
        let mut ranks: Vec<Option<FaultRank>> = Vec::with_capacity(reps);
        let mut n_elements = 0;
        for rep in 0..reps {
            let score = config.score_config(rep);
            let ranking = if t == Technique::Unival {
                let report = score_all(&profiles, &ip.sites, &score);
                for s in report.sites.iter().filter_map(|s| s.score) {
                    score_range = Some(score_range.map_or((s, s), |(lo, hi)| (lo.min(s), hi.max(s))));
                }
                report.ranking
            } else {
                match technique_ranking(t, &ip, &program.suite, &profiles, &score, config.run_config()) {
                    Ok(r) => r,
                    Err(e) => return exclude(format!("{t}: {e}")),
                }
            };
            n_elements = ranking.entries.len();
            let r = fault_rank(&ranking, lines);
            if let Err(e) = &r {
                warn!("{}/{}: {e}; charging 100%", program.name, version.id);
            }
            ranks.push(r.ok());
        }
        let exam = mean(ranks.iter().map(|r| r.map_or(100.0, |r| r.exam())));
        let rank = ranks
            .iter()
            .map(|r| r.map(|r| r.effective_rank()))
            .collect::<Option<Vec<f64>>>()
            .map(mean);
        techniques.insert(t, TechniqueResult { exam, rank, n_elements });
    }
    info!("{}/{}: done", program.name, version.id);
    Outcome::Done(Box::new(VersionResult {
        program: program.name.clone(),
        version: version.id.clone(),
        faulty_lines: lines.clone(),
        n_tests: profiles.rows.len(),
        n_failing,
        predicate_fault,
        confounding_prone,
        imbalance,
        techniques,
        unival_score_range: score_range,
    }))
}

/// Runs every version of every program. Versions are processed in parallel
/// on the current rayon pool; the report does not depend on the pool size.
pub fn run_experiment(corpus: &[CorpusProgram], config: &ExperimentConfig) -> Report {
    let jobs: Vec<(&CorpusProgram, &FaultVersion)> =
        corpus.iter().flat_map(|p| p.versions.iter().map(move |v| (p, v))).collect();
    let outcomes: Vec<Outcome> = jobs.par_iter().map(|(p, v)| run_version(p, v, config)).collect();
    let mut versions = Vec::new();
    let mut exclusions = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Done(v) => versions.push(*v),
            Outcome::Excluded(e) => exclusions.push(e),
        }
    }
    assemble(config.clone(), versions, exclusions)
}

/// Aggregates per-version results; a pure function of its inputs.
pub fn assemble(config: ExperimentConfig, versions: Vec<VersionResult>, exclusions: Vec<Exclusion>) -> Report {
    let techniques = config.techniques.clone();
    let summary = techniques
        .iter()
        .map(|t| {
            let ranks: Vec<f64> = versions
                .iter()
                .map(|v| v.techniques[t].rank.unwrap_or(f64::INFINITY))
                .collect();
            (
                *t,
                TechniqueSummary {
                    n: versions.len(),
                    mean_exam: mean(versions.iter().map(|v| v.techniques[t].exam)),
                    hit_at_5: hit_at_n(&ranks, 5),
                    hit_at_10: hit_at_n(&ranks, 10),
                },
            )
        })
        .collect();
    let mut program_means: BTreeMap<String, BTreeMap<Technique, f64>> = BTreeMap::new();
    let mut programs: Vec<&str> = versions.iter().map(|v| v.program.as_str()).collect();
    programs.dedup();
    for p in programs {
        let vs: Vec<&VersionResult> = versions.iter().filter(|v| v.program == p).collect();
        program_means.insert(p.to_string(), subset(&vs, &techniques).mean_exam);
    }
    let prone: Vec<&VersionResult> = versions.iter().filter(|v| v.confounding_prone).collect();
    let confounding_prone = subset(&prone, &techniques);

    let mut studied: Vec<&VersionResult> = versions.iter().filter(|v| v.imbalance.is_some()).collect();
    let imb = |v: &VersionResult| v.imbalance.as_ref().map_or(0.0, |i| i.imbalance.standardized);
    let xs: Vec<f64> = studied.iter().map(|v| imb(v)).collect();
    let spearman = techniques
        .iter()
        .map(|t| {
            let ys: Vec<f64> = studied.iter().map(|v| v.techniques[t].exam).collect();
            (*t, spearman(&xs, &ys))
        })
        .collect();
    // Stable sort by descending imbalance; ties keep corpus order.
    studied.sort_by(|a, b| imb(b).total_cmp(&imb(a)));
    let top = studied.len().div_ceil(3);
    let imbalance_study = ImbalanceStudy {
        n: studied.len(),
        note: IMBALANCE_NOTE.to_string(),
        spearman,
        top_tercile: subset(&studied[..top], &techniques),
    };
    Report {
        config,
        versions,
        exclusions,
        summary,
        program_means,
        confounding_prone,
        imbalance_study,
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("-".to_string(), |x| format!("{x:.3}"))
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Per-version rows for plotting imbalance against cost.
    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("version,site,imbalance_raw,imbalance_std,exam_unival,exam_ochiai\n");
        for v in &self.versions {
            let Some(i) = &v.imbalance else { continue };
            let exam = |t: Technique| v.techniques.get(&t).map_or(String::new(), |r| r.exam.to_string());
            writeln!(
                out,
                "{}/{},{},{},{},{},{}",
                v.program,
                v.version,
                i.site,
                i.imbalance.raw,
                i.imbalance.standardized,
                exam(Technique::Unival),
                exam(Technique::Ochiai)
            )
            .unwrap();
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let ts = &self.config.techniques;
        let header = |out: &mut String, first: &str| {
            write!(out, "| {first} |").unwrap();
            for t in ts {
                write!(out, " {t} |").unwrap();
            }
            out.push_str("\n|---|");
            for _ in ts {
                out.push_str("---:|");
            }
            out.push('\n');
        };
        let mut out = String::from("# Fault localization experiment\n\n");
        writeln!(
            out,
            "Seed {}, {} UniVal repetition(s), {} trees, {} version(s) evaluated, {} excluded.\n",
            self.config.seed,
            self.config.repetitions,
            self.config.n_trees,
            self.versions.len(),
            self.exclusions.len()
        )
        .unwrap();

        out.push_str("## Summary\n\n");
        header(&mut out, "metric");
        for (label, f) in [
            ("mean EXAM (%)", &(|s: &TechniqueSummary| format!("{:.2}", s.mean_exam)) as &dyn Fn(&TechniqueSummary) -> String),
            ("Hit@5", &|s: &TechniqueSummary| s.hit_at_5.to_string()),
            ("Hit@10", &|s: &TechniqueSummary| s.hit_at_10.to_string()),
        ] {
            write!(out, "| {label} |").unwrap();
            for t in ts {
                write!(out, " {} |", f(&self.summary[t])).unwrap();
            }
            out.push('\n');
        }

        out.push_str("\n## Mean EXAM per program\n\n");
        header(&mut out, "program");
        for (p, m) in &self.program_means {
            write!(out, "| {p} |").unwrap();
            for t in ts {
                write!(out, " {:.2} |", m[t]).unwrap();
            }
            out.push('\n');
        }

        out.push_str("\n## Per version EXAM (%)\n\n");
        header(&mut out, "version");
        for v in &self.versions {
            let mark = if v.confounding_prone { " *" } else { "" };
            write!(out, "| {}/{}{mark} |", v.program, v.version).unwrap();
            for t in ts {
                write!(out, " {:.2} |", v.techniques[t].exam).unwrap();
            }
            out.push('\n');
        }
        out.push_str("\n`*` marks confounding-prone versions (faulty condition with dependent sites).\n");

        writeln!(out, "\n## Confounding-prone subset ({} versions)\n", self.confounding_prone.n).unwrap();
        if self.confounding_prone.n > 0 {
            header(&mut out, "metric");
            out.push_str("| mean EXAM (%) |");
            for t in ts {
                write!(out, " {:.2} |", self.confounding_prone.mean_exam[t]).unwrap();
            }
            out.push('\n');
        }

        let st = &self.imbalance_study;
        writeln!(out, "\n## Covariate imbalance ({} predicate-fault versions)\n", st.n).unwrap();
        writeln!(out, "Note: {}.\n", st.note).unwrap();
        if st.n > 0 {
            header(&mut out, "metric");
            out.push_str("| Spearman(imbalance, EXAM) |");
            for t in ts {
                write!(out, " {} |", fmt_opt(st.spearman[t])).unwrap();
            }
            writeln!(out, "\n| top tercile mean EXAM (n={}) |", st.top_tercile.n).unwrap();
            out.pop();
            for t in ts {
                write!(out, " {:.2} |", st.top_tercile.mean_exam[t]).unwrap();
            }
            out.push('\n');
        }

        if !self.exclusions.is_empty() {
            out.push_str("\n## Exclusions\n\n");
            for e in &self.exclusions {
                writeln!(out, "- {}/{}: {}", e.program, e.version, e.reason).unwrap();
            }
        }
        out
    }
}
