//! `fairclust` — solve, relax, reduce, round, brute-force, verify and
//! benchmark (p,q)-fair clustering instances.
//!
//! All randomness flows from `--seed`; outputs are bit-reproducible for
//! identical (instance, seed, flags). Wall-clock timing is logged to stderr
//! only (and the `millis` column of bench CSVs).

use clap::{Parser, Subcommand, ValueEnum};
use fairclust_core::algorithms::{self, PipelineOptions};
use fairclust_core::instance::Instance;
use fairclust_core::io::{
    self, load_instance, to_json_string, InstanceDoc, MsuDoc, ReduceDoc, RelaxDoc, RoundDoc,
    RunRecord, SolutionDoc,
};
use fairclust_core::oracle::{self, ClaimKind};
use fairclust_core::reduction::{bipartition, build_reduction};
use fairclust_core::relax::{self, RoundOrCutOptions, SolverOptions};
use fairclust_core::rounding;
use fairclust_core::{hardness, Error, TOOL_VERSION};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "fairclust", version, about = "(p,q)-fair clustering toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Auto,
    Pgeq,
    Pleq,
    Baseline,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    Auto,
    Pgeq,
    Pleq,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CaseArg {
    Random,
    Dense,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a full approximation pipeline and emit a certified solution.
    Solve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the convex relaxation only.
    Relax {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 50)]
        max_rounds: usize,
        #[arg(long, value_enum, default_value = "auto")]
        regime: RegimeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sparsify a fractional solution and verify the reduction properties.
    Reduce {
        #[arg(long = "in")]
        input: PathBuf,
        /// Fractional solution document; solved from scratch when absent.
        #[arg(long)]
        solution: Option<PathBuf>,
        #[arg(long, default_value_t = 0.2)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized rounding trials on the sparsified instance.
    Round {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Emit this many per-trial traces.
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Keep only the best trial of this many.
        #[arg(long)]
        best_of: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact brute-force optimum.
    Brute {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        limit: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive claim checks against the oracle.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        /// all | claim23 | item4 | item5 | claim41
        #[arg(long, default_value = "all")]
        claims: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate Min s-Union hardness instances and their transcriptions.
    GenHardness {
        #[arg(long, value_enum)]
        case: CaseArg,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        /// Min s-Union document path.
        #[arg(long)]
        out_msu: Option<PathBuf>,
        /// Transcribed clustering instance path.
        #[arg(long)]
        out_instance: Option<PathBuf>,
    },
    /// Cross product of corpus × methods × seeds, CSV out.
    Bench {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated methods (auto, pgeq, pleq, baseline).
        #[arg(long, default_value = "auto,baseline")]
        methods: String,
        /// Comma-separated seeds.
        #[arg(long, default_value = "0")]
        seeds: String,
        #[arg(long, default_value_t = 1_000_000)]
        opt_limit: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    let started = Instant::now();
    let code = match run(cli, started) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    };
    std::process::exit(code);
}

fn emit<T: Serialize>(out: &Option<PathBuf>, doc: &T) -> Result<(), Error> {
    match out {
        Some(path) => io::save_json(path, doc),
        None => {
            print!("{}", to_json_string(doc));
            Ok(())
        }
    }
}

fn log_run(
    inst: Option<&Instance>,
    command: &str,
    parameters: serde_json::Value,
    seed: u64,
    started: Instant,
) {
    let record = RunRecord {
        instance_hash: inst.map(oracle::instance_hash).unwrap_or_default(),
        command: command.to_string(),
        parameters,
        seed,
        wall_millis: started.elapsed().as_millis(),
        tool_version: TOOL_VERSION.to_string(),
    };
    eprintln!("{}", serde_json::to_string(&record).expect("record serializes"));
}

fn pipeline_options(tol: f64, trials: usize) -> PipelineOptions {
    let mut opts = PipelineOptions::default();
    opts.solver = SolverOptions { tol, ..Default::default() };
    opts.round_or_cut.solver = opts.solver;
    opts.trials = trials;
    opts
}

/// Solve the regime-appropriate relaxation for an instance (used wherever a
/// fractional solution is needed but none was supplied).
fn solve_relaxation(
    inst: &Instance,
    regime: RegimeArg,
    tol: f64,
    max_rounds: usize,
) -> Result<(relax::FractionalSolution, Option<Vec<RoundDoc>>, Option<bool>, usize), Error> {
    let solver = SolverOptions { tol, ..Default::default() };
    let use_pgeq = match regime {
        RegimeArg::Pgeq => true,
        RegimeArg::Pleq => false,
        RegimeArg::Auto => inst.p() >= inst.q(),
    };
    if use_pgeq {
        let sol = relax::solve_pgeq(inst, &solver)?;
        Ok((sol, None, None, 0))
    } else {
        let opts = RoundOrCutOptions { solver, max_rounds, ..Default::default() };
        let res = relax::round_or_cut(inst, &opts)?;
        let rounds = res
            .rounds
            .iter()
            .map(|r| RoundDoc {
                b: r.b,
                b_lower: r.b_lower,
                families_added: r.families_added,
            })
            .collect();
        Ok((res.solution, Some(rounds), Some(res.converged), res.pool.families.len()))
    }
}

fn run(cli: Cli, started: Instant) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Solve { input, method, seed, trials, tol, out } => {
            let inst = load_instance(&input)?;
            let opts = pipeline_options(tol, trials);
            let solution = match method {
                MethodArg::Auto => algorithms::solve_auto(&inst, seed, &opts)?,
                MethodArg::Pgeq => algorithms::solve_pgeq_full(&inst, seed, &opts)?,
                MethodArg::Pleq => algorithms::solve_pleq_full(&inst, seed, &opts)?,
                MethodArg::Baseline => algorithms::baseline_norm_swap(&inst, &opts)?,
            };
            let doc = SolutionDoc {
                format_version: io::FORMAT_VERSION,
                instance_hash: oracle::instance_hash(&inst),
                solution,
            };
            emit(&out, &doc)?;
            log_run(
                Some(&inst),
                "solve",
                serde_json::json!({"trials": trials, "tol": tol}),
                seed,
                started,
            );
            Ok(())
        }
        Cmd::Relax { input, tol, max_rounds, regime, out } => {
            let inst = load_instance(&input)?;
            let (sol, rounds, converged, pool_families) =
                solve_relaxation(&inst, regime, tol, max_rounds)?;
            sol.verify_polytope(&inst, 1e-7)?;
            let doc = RelaxDoc::from_solution(&inst, &sol, rounds, converged, pool_families);
            emit(&out, &doc)?;
            log_run(
                Some(&inst),
                "relax",
                serde_json::json!({"tol": tol, "max_rounds": max_rounds}),
                0,
                started,
            );
            Ok(())
        }
        Cmd::Reduce { input, solution, gamma, seed, out } => {
            let inst = load_instance(&input)?;
            let sol = match solution {
                Some(path) => {
                    let doc: RelaxDoc = io::load_json(&path)?;
                    doc.into_solution()
                }
                None => solve_relaxation(&inst, RegimeArg::Auto, 1e-6, 50)?.0,
            };
            sol.verify_polytope(&inst, 1e-6)?;
            let red = build_reduction(&inst, &sol, gamma)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sample = Vec::new();
            use rand::seq::SliceRandom;
            for _ in 0..100 {
                let mut pts: Vec<usize> = (0..inst.m()).collect();
                pts.shuffle(&mut rng);
                pts.truncate(inst.k());
                sample.push(fairclust_core::CenterSet::new(pts)?);
            }
            let report = fairclust_core::reduction::verify_properties(&inst, &red, &sol, &sample)?;
            let doc = ReduceDoc {
                format_version: io::FORMAT_VERSION,
                instance_hash: oracle::instance_hash(&inst),
                reduced: red,
                report,
            };
            emit(&out, &doc)?;
            log_run(Some(&inst), "reduce", serde_json::json!({"gamma": gamma}), seed, started);
            Ok(())
        }
        Cmd::Round { input, seed, trials, best_of, out } => {
            let inst = load_instance(&input)?;
            let (sol, ..) = solve_relaxation(&inst, RegimeArg::Auto, 1e-6, 50)?;
            let red = build_reduction(&inst, &sol, 0.2)?;
            #[derive(Serialize)]
            struct TrialDoc {
                trace: rounding::RoundingTrace,
                cost: f64,
                claim41_bound: f64,
            }
            #[derive(Serialize)]
            struct RoundOut {
                format_version: u32,
                instance_hash: String,
                b: f64,
                surplus: usize,
                trials: Vec<TrialDoc>,
            }
            let mut out_doc = RoundOut {
                format_version: io::FORMAT_VERSION,
                instance_hash: oracle::instance_hash(&inst),
                b: sol.b,
                surplus: red.size().saturating_sub(inst.k()),
                trials: Vec::new(),
            };
            if red.size() > inst.k() {
                let bip = bipartition(&red)?;
                let kprime = rounding::select_kprime(&inst, &red, &bip)?;
                let total = best_of.unwrap_or(trials);
                let mut best: Option<TrialDoc> = None;
                for t in 0..total {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(t as u64);
                    let trace =
                        rounding::randomized_round(&inst, &red, &kprime, &mut rng, seed, t as u64)?;
                    let cost = inst.gencost(&trace.centers)?;
                    let bound = rounding::claim41_bound(&inst, &trace, sol.b);
                    let doc = TrialDoc { trace, cost, claim41_bound: bound };
                    if best_of.is_some() {
                        if best.as_ref().is_none_or(|b| doc.cost < b.cost) {
                            best = Some(doc);
                        }
                    } else {
                        out_doc.trials.push(doc);
                    }
                }
                if let Some(b) = best {
                    out_doc.trials.push(b);
                }
            }
            emit(&out, &out_doc)?;
            log_run(
                Some(&inst),
                "round",
                serde_json::json!({"trials": trials, "best_of": best_of}),
                seed,
                started,
            );
            Ok(())
        }
        Cmd::Brute { input, limit, out } => {
            let inst = load_instance(&input)?;
            let result = oracle::cached_brute_force(&inst, limit)?;
            #[derive(Serialize)]
            struct BruteDoc {
                format_version: u32,
                instance_hash: String,
                #[serde(flatten)]
                result: oracle::BruteForceResult,
            }
            let doc = BruteDoc {
                format_version: io::FORMAT_VERSION,
                instance_hash: oracle::instance_hash(&inst),
                result,
            };
            emit(&out, &doc)?;
            log_run(Some(&inst), "brute", serde_json::json!({"limit": limit}), 0, started);
            Ok(())
        }
        Cmd::Verify { input, claims, seed, out } => {
            let inst = load_instance(&input)?;
            let kinds: Vec<ClaimKind> = match claims.as_str() {
                "all" => vec![
                    ClaimKind::Claim23,
                    ClaimKind::Item4,
                    ClaimKind::Item5,
                    ClaimKind::Claim41,
                ],
                "claim23" => vec![ClaimKind::Claim23],
                "item4" => vec![ClaimKind::Item4],
                "item5" => vec![ClaimKind::Item5],
                "claim41" => vec![ClaimKind::Claim41],
                other => {
                    return Err(Error::Parse(format!(
                        "unknown claim selector `{other}` (use all|claim23|item4|item5|claim41)"
                    )))
                }
            };
            #[derive(Serialize)]
            struct VerifyDoc {
                format_version: u32,
                instance_hash: String,
                claims: Vec<oracle::ClaimReport>,
                pass: bool,
            }
            let mut reports = Vec::new();
            for kind in kinds {
                reports.push(oracle::exhaustive_claim_check(&inst, kind, seed)?);
            }
            let pass = reports.iter().all(|r| r.pass);
            let doc = VerifyDoc {
                format_version: io::FORMAT_VERSION,
                instance_hash: oracle::instance_hash(&inst),
                claims: reports,
                pass,
            };
            emit(&out, &doc)?;
            log_run(Some(&inst), "verify", serde_json::json!({"claims": claims}), seed, started);
            if pass {
                Ok(())
            } else {
                Err(Error::Internal("claim verification reported violations".into()))
            }
        }
        Cmd::GenHardness { case, m, eps, delta, seed, p, q, out_msu, out_instance } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (msu, plant) = match case {
                CaseArg::Random => (hardness::gen_random_case(m, eps, &mut rng)?, None),
                CaseArg::Dense => {
                    let delta = delta.ok_or_else(|| {
                        Error::Parse("--delta is required for the dense case".into())
                    })?;
                    let (msu, plant) = hardness::gen_dense_case(m, eps, delta, &mut rng)?;
                    (msu, Some(plant))
                }
            };
            let (inst, _kept) = hardness::reduce_to_clustering(&msu, p, q)?;
            let msu_doc =
                MsuDoc { format_version: io::FORMAT_VERSION, msu, plant };
            emit(&out_msu, &msu_doc)?;
            let inst_doc = InstanceDoc::from_instance(&inst);
            emit(&out_instance, &inst_doc)?;
            log_run(
                Some(&inst),
                "gen-hardness",
                serde_json::json!({"m": m, "eps": eps, "delta": delta}),
                seed,
                started,
            );
            Ok(())
        }
        Cmd::Bench { corpus, out, methods, seeds, opt_limit } => {
            bench(&corpus, &out, &methods, &seeds, opt_limit, started)
        }
    }
}

fn bench(
    corpus: &Path,
    out: &Path,
    methods: &str,
    seeds: &str,
    opt_limit: u64,
    started: Instant,
) -> Result<(), Error> {
    let methods: Vec<MethodArg> = methods
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| match s.trim() {
            "auto" => Ok(MethodArg::Auto),
            "pgeq" => Ok(MethodArg::Pgeq),
            "pleq" => Ok(MethodArg::Pleq),
            "baseline" => Ok(MethodArg::Baseline),
            other => Err(Error::Parse(format!("unknown method `{other}`"))),
        })
        .collect::<Result<_, _>>()?;
    let seeds: Vec<u64> = seeds
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| s.trim().parse::<u64>().map_err(|e| Error::Parse(e.to_string())))
        .collect::<Result<_, _>>()?;

    let mut entries: Vec<PathBuf> = std::fs::read_dir(corpus)
        .map_err(|e| Error::Io(e.to_string()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();

    let method_name = |m: &MethodArg| match m {
        MethodArg::Auto => "auto",
        MethodArg::Pgeq => "pgeq",
        MethodArg::Pleq => "pleq",
        MethodArg::Baseline => "baseline",
    };

    let mut csv = String::from("instance,m,n,k,p,q,method,seed,cost,B,opt,ratio,millis\n");
    // max certified ratio per (p, q) cell
    let mut summary: std::collections::BTreeMap<String, f64> = Default::default();

    for path in &entries {
        let name = path.file_stem().unwrap().to_string_lossy().to_string();
        let inst = match load_instance(path) {
            Ok(i) => i,
            Err(e) => {
                eprintln!("bench: skipping {name}: {e}");
                continue;
            }
        };
        let opt = oracle::cached_brute_force(&inst, opt_limit).ok().map(|r| r.optimum);
        for method in &methods {
            for &seed in &seeds {
                let row_start = Instant::now();
                let opts = pipeline_options(1e-6, 50);
                let result = match method {
                    MethodArg::Auto => algorithms::solve_auto(&inst, seed, &opts),
                    MethodArg::Pgeq if inst.p() >= inst.q() => {
                        algorithms::solve_pgeq_full(&inst, seed, &opts)
                    }
                    MethodArg::Pleq if inst.p() <= inst.q() => {
                        algorithms::solve_pleq_full(&inst, seed, &opts)
                    }
                    MethodArg::Baseline => algorithms::baseline_norm_swap(&inst, &opts),
                    _ => continue, // regime-mismatched explicit method
                };
                let millis = row_start.elapsed().as_millis();
                let prefix = format!(
                    "{name},{},{},{},{},{},{},{seed}",
                    inst.m(),
                    inst.n(),
                    inst.k(),
                    inst.p(),
                    inst.q(),
                    method_name(method),
                );
                match result {
                    Ok(sol) => {
                        let opt_cell =
                            opt.map(|o| format!("{o}")).unwrap_or_default();
                        csv.push_str(&format!(
                            "{prefix},{},{},{opt_cell},{},{millis}\n",
                            sol.cost, sol.relaxation_b, sol.certified_ratio
                        ));
                        let cell = format!("p={},q={}", inst.p(), inst.q());
                        let entry = summary.entry(cell).or_insert(0.0);
                        if sol.certified_ratio.is_finite() {
                            *entry = entry.max(sol.certified_ratio);
                        }
                    }
                    Err(e) => {
                        eprintln!("bench: {name}/{}/{seed}: {e}", method_name(method));
                        csv.push_str(&format!("{prefix},,,,,{millis}\n"));
                    }
                }
            }
        }
    }
    std::fs::write(out, &csv).map_err(|e| Error::Io(e.to_string()))?;

    println!("max certified_ratio per (p,q) cell:");
    for (cell, ratio) in &summary {
        println!("  {cell}: {ratio:.6}");
    }
    log_run(None, "bench", serde_json::json!({"rows": entries.len()}), 0, started);
    Ok(())
}
