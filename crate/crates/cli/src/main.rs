//! `sgsem`: eigen-seeded searches for multiple solutions of
//! `-Δu = f(u)` with zero Dirichlet data on a rectangle.
//!
//! Exit status: 0 when every solve converged, 2 when some failed, 1 on
//! configuration or I/O errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use sgsem_core::analysis::{
    classify, convergence_study, distinct_up_to_sign, export_field, format_convergence_table, write_convergence_csv,
    Problem, SignClass,
};
use sgsem_core::eigen::{group_by_multiplicity, laplace_eigenpairs, Normalization, RectDomain};
use sgsem_core::DiscreteSolution;

use config::{RunConfig, SeedSpec, RNG_SEED_ENV};
use run::{Manifest, RunDir};

#[derive(Parser, Debug)]
#[command(
    name = "sgsem",
    version,
    about = "Multiple solutions of -Δu = f(u) from eigenfunction seeds"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for seed-level parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// RNG seed (overrides the config and SGSEM_RNG_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Polynomial order per direction.
    #[arg(short = 'N', global = true)]
    n: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dirichlet Laplacian eigenvalues of the domain, grouped by multiplicity.
    Eigs {
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Domain as `x_lo,x_hi,y_lo,y_hi` (overrides the config).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        domain: Option<Vec<f64>>,
    },
    /// Builds initial guesses and writes them to `seeds/`.
    Seeds,
    /// Solves from every seed and classifies the results.
    Solve {
        /// Read seeds from this directory instead of generating them.
        #[arg(long)]
        seeds: Option<PathBuf>,
        /// Only solve seeds with these labels.
        #[arg(long = "only")]
        only: Vec<String>,
    },
    /// Error against a high-order reference for a list of orders.
    Converge {
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        #[arg(long)]
        reference_n: Option<usize>,
        /// Seed to study (defaults to the first one).
        #[arg(long)]
        label: Option<String>,
    },
    /// Seed search, solve and deduplication for each parameter value.
    Scan {
        #[arg(long, value_delimiter = ',')]
        kappa: Option<Vec<f64>>,
    },
    /// Samples solutions on a uniform grid as CSV.
    Export {
        /// A single solution file; otherwise every solution in the run directory.
        #[arg(long)]
        solution: Option<PathBuf>,
        #[arg(long)]
        resolution: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Ok,
    Partial,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors share the configuration-error status; 2 means partial failure.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    let base = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let env_seed = std::env::var(RNG_SEED_ENV).ok();
    let mut cfg = base.resolve(env_seed.as_deref(), cli.common.seed, cli.common.n)?;
    let workers = cli.common.workers.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("starting worker pool")?;
    let out = cli
        .common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("sgsem-run"));
    pool.install(|| match cli.command {
        Command::Eigs { count, domain } => {
            if let Some(d) = domain {
                if d.len() != 4 {
                    bail!("--domain takes four values x_lo,x_hi,y_lo,y_hi");
                }
                cfg.domain = RectDomain::new(d[0], d[1], d[2], d[3])?;
            }
            cmd_eigs(&cfg, count, cli.common.out.as_deref())
        }
        Command::Seeds => cmd_seeds(&cfg, &out),
        Command::Solve { seeds, only } => cmd_solve(&cfg, &out, seeds.as_deref(), &only),
        Command::Converge {
            n_list,
            reference_n,
            label,
        } => {
            if let Some(l) = n_list {
                cfg.converge.n_list = l;
            }
            if let Some(r) = reference_n {
                cfg.converge.reference_n = r;
            }
            if label.is_some() {
                cfg.converge.seed_label = label;
            }
            cmd_converge(&cfg, &out)
        }
        Command::Scan { kappa } => {
            if let Some(k) = kappa {
                cfg.scan.kappa = k;
            }
            cmd_scan(&cfg, &out)
        }
        Command::Export { solution, resolution } => {
            if let Some(r) = resolution {
                cfg.export_resolution = r;
            }
            cmd_export(&cfg, &out, solution.as_deref())
        }
    })
}

fn cmd_eigs(cfg: &RunConfig, count: usize, out: Option<&Path>) -> anyhow::Result<Status> {
    if count == 0 {
        bail!("--count must be positive");
    }
    let pairs = laplace_eigenpairs(&cfg.domain, count, Normalization::Orthonormal)?;
    let groups = group_by_multiplicity(&pairs);
    let mut text = format!("{:>4} {:>4} {:>4} {:>14} {:>6}\n", "k", "m", "n", "lambda", "group");
    let mut csv = String::from("k,m,n,lambda,group,multiplicity\n");
    let mut k = 0;
    for (gi, g) in groups.iter().enumerate() {
        for &(m, n) in &g.members {
            k += 1;
            let _ = writeln!(text, "{k:>4} {m:>4} {n:>4} {:>14.6} {:>6}", g.lambda, gi + 1);
            let _ = writeln!(csv, "{k},{m},{n},{:?},{},{}", g.lambda, gi + 1, g.multiplicity);
        }
    }
    print!("{text}");
    if let Some(dir) = out {
        let run = RunDir::create(dir)?;
        let path = run.sub("tables")?.join("eigenvalues.csv");
        fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
        let mut m = Manifest::new("eigs", cfg);
        m.tables.push("tables/eigenvalues.csv".into());
        run.write_manifest(&m)?;
    }
    Ok(Status::Ok)
}

fn cmd_seeds(cfg: &RunConfig, out: &Path) -> anyhow::Result<Status> {
    let set = run::generate_seeds(cfg)?;
    let dir = RunDir::create(out)?;
    let names = run::write_seeds(&set, &dir.sub("seeds")?)?;
    for s in &set.seeds {
        println!("{:<24} residual {:.2e}", s.label, s.residual_norm);
    }
    println!("{} seeds ({} up to sign)", set.seeds.len(), set.canonical);
    let mut m = Manifest::new("seeds", cfg);
    m.seeds = names.iter().map(|n| format!("seeds/{n}")).collect();
    m.canonical_seeds = Some(set.canonical);
    dir.write_manifest(&m)?;
    Ok(Status::Ok)
}

fn cmd_solve(cfg: &RunConfig, out: &Path, seed_dir: Option<&Path>, only: &[String]) -> anyhow::Result<Status> {
    let dir = RunDir::create(out)?;
    let mut manifest = Manifest::new("solve", cfg);
    let mut seeds = match seed_dir {
        Some(d) => run::read_seed_dir(d)?,
        None => {
            let set = run::generate_seeds(cfg)?;
            let names = run::write_seeds(&set, &dir.sub("seeds")?)?;
            manifest.canonical_seeds = Some(set.canonical);
            names
                .into_iter()
                .map(|n| n.trim_end_matches(".json").to_string())
                .zip(set.seeds)
                .collect()
        }
    };
    if !only.is_empty() {
        seeds.retain(|(_, s)| only.contains(&s.label));
        if seeds.is_empty() {
            bail!("no seed matches --only {only:?}");
        }
    }
    manifest.seeds = seeds.iter().map(|(stem, _)| format!("seeds/{stem}.json")).collect();
    let results = run::solve_batch(cfg, &seeds, Some(&dir.sub("solutions")?))?;
    let records: Vec<run::SolveRecord> = results.into_iter().map(|r| r.record).collect();
    let summary_path = dir.sub("tables")?.join("summary.csv");
    run::write_summary_csv(&records, &summary_path)?;
    for r in &records {
        match (&r.sign, &r.error) {
            (Some(sign), _) => println!(
                "{:<24} converged  residual {:.2e}  iters {:>3}  {:<13} peaks {}",
                r.seed_label,
                r.residual_norm,
                r.newton_iters,
                run::sign_name(*sign),
                r.num_peaks.unwrap_or(0)
            ),
            (None, e) => println!("{:<24} FAILED     {}", r.seed_label, e.as_deref().unwrap_or("")),
        }
    }
    let summary = run::summarize(&records);
    println!(
        "{} solves: {} converged, {} failed",
        summary.total, summary.converged, summary.failed
    );
    manifest.solutions = records;
    manifest.tables.push("tables/summary.csv".into());
    manifest.summary = Some(summary);
    dir.write_manifest(&manifest)?;
    Ok(if summary.failed == 0 {
        Status::Ok
    } else {
        Status::Partial
    })
}

fn cmd_converge(cfg: &RunConfig, out: &Path) -> anyhow::Result<Status> {
    let spec = &cfg.converge;
    if spec.n_list.is_empty() {
        bail!("the N list for a convergence study is empty");
    }
    let set = run::generate_seeds(cfg)?;
    let seed = match &spec.seed_label {
        Some(l) => set
            .seeds
            .iter()
            .find(|s| &s.label == l)
            .ok_or_else(|| anyhow::anyhow!("no seed labelled {l}"))?,
        None => set.seeds.first().ok_or_else(|| anyhow::anyhow!("no seeds to study"))?,
    };
    let problem = Problem {
        domain: cfg.domain,
        nonlinearity: cfg.nonlinearity,
        newton: cfg.newton.clone(),
        mass: cfg.mass,
    };
    let records = convergence_study(seed, &spec.n_list, spec.reference_n, &problem)?;
    let dir = RunDir::create(out)?;
    let tables = dir.sub("tables")?;
    let stem = run::file_stem(0, &seed.label);
    let stem = stem.trim_start_matches("000_");
    let csv = format!("convergence_{stem}.csv");
    let txt = format!("convergence_{stem}.txt");
    write_convergence_csv(&records, &tables.join(&csv))?;
    let table = format_convergence_table(&records);
    fs::write(tables.join(&txt), &table)?;
    print!("{table}");
    for r in records.iter().filter(|r| !r.converged()) {
        println!("N = {} failed: {}", r.n, r.failure.as_deref().unwrap_or(""));
    }
    let failed = records.iter().filter(|r| !r.converged()).count();
    let mut m = Manifest::new("converge", cfg);
    m.tables = vec![format!("tables/{csv}"), format!("tables/{txt}")];
    m.summary = Some(run::Summary {
        total: records.len(),
        converged: records.len() - failed,
        failed,
    });
    dir.write_manifest(&m)?;
    Ok(if failed == 0 { Status::Ok } else { Status::Partial })
}

#[derive(Debug, Clone, PartialEq)]
struct CatalogRow {
    kappa: f64,
    canonical_seeds: usize,
    failed: usize,
    canonical_solutions: usize,
    signed_solutions: usize,
    positive: usize,
    negative: usize,
    sign_changing: usize,
    peaks: Vec<usize>,
}

fn cmd_scan(cfg: &RunConfig, out: &Path) -> anyhow::Result<Status> {
    if cfg.scan.kappa.is_empty() {
        bail!("scan needs at least one parameter value");
    }
    if cfg.nonlinearity.parameter().is_none() {
        bail!("{} has no parameter to scan", cfg.nonlinearity);
    }
    let dir = RunDir::create(out)?;
    let mut manifest = Manifest::new("scan", cfg);
    let mut rows = Vec::new();
    let mut all_records = Vec::new();
    for &kappa in &cfg.scan.kappa {
        let f = cfg
            .nonlinearity
            .with_parameter(kappa)
            .ok_or_else(|| anyhow::anyhow!("cannot set parameter {kappa}"))?;
        let mut kcfg = RunConfig {
            nonlinearity: f,
            ..cfg.clone()
        };
        if kcfg.seeds.is_none() {
            kcfg.seeds = Some(kcfg.seed_spec());
        }
        if !matches!(kcfg.seeds, Some(SeedSpec::Random { .. })) {
            log::info!("scan uses the configured seed spec as is");
        }
        let tag = format!("kappa_{kappa}");
        let set = run::generate_seeds(&kcfg)?;
        let names = run::write_seeds(&set, &dir.sub(&format!("seeds/{tag}"))?)?;
        manifest.seeds.extend(names.iter().map(|n| format!("seeds/{tag}/{n}")));
        let seeds: Vec<(String, _)> = names
            .into_iter()
            .map(|n| n.trim_end_matches(".json").to_string())
            .zip(set.seeds)
            .collect();
        let results = run::solve_batch(&kcfg, &seeds, Some(&dir.sub(&format!("solutions/{tag}"))?))?;
        let sols: Vec<&DiscreteSolution> = results.iter().filter_map(|r| r.solution.as_ref()).collect();
        let failed = results.len() - sols.len();
        let fields: Vec<_> = sols.iter().map(|s| &s.u).collect();
        let keep = distinct_up_to_sign(&fields, cfg.scan.dedup_tol);
        let mut row = CatalogRow {
            kappa,
            canonical_seeds: set.canonical,
            failed,
            canonical_solutions: 0,
            signed_solutions: 0,
            positive: 0,
            negative: 0,
            sign_changing: 0,
            peaks: Vec::new(),
        };
        for &i in &keep {
            let c = classify(sols[i]);
            if c.sign == SignClass::Zero {
                continue;
            }
            row.canonical_solutions += 1;
            row.signed_solutions += 2;
            row.peaks.push(c.num_peaks);
            // Both members of the ± pair are counted.
            match c.sign {
                SignClass::Positive | SignClass::Negative => {
                    row.positive += 1;
                    row.negative += 1;
                }
                _ => row.sign_changing += 2,
            }
        }
        println!(
            "κ = {kappa}: {} canonical solutions, {} signed ({} positive, {} negative, {} sign-changing), {} failed solves",
            row.canonical_solutions, row.signed_solutions, row.positive, row.negative, row.sign_changing, row.failed
        );
        all_records.extend(results.into_iter().map(|mut r| {
            r.record.file = format!("{tag}/{}", r.record.file);
            r.record
        }));
        rows.push(row);
    }
    let tables = dir.sub("tables")?;
    let mut csv = String::from(
        "kappa,canonical_seeds,failed_solves,canonical_solutions,signed_solutions,positive,negative,sign_changing,peaks\n",
    );
    let mut txt = format!(
        "{:>8} {:>10} {:>10} {:>8} {:>8} {:>8} {:>14}\n",
        "kappa", "canonical", "signed", "pos", "neg", "failed", "sign-changing"
    );
    for r in &rows {
        let peaks: Vec<String> = r.peaks.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.kappa,
            r.canonical_seeds,
            r.failed,
            r.canonical_solutions,
            r.signed_solutions,
            r.positive,
            r.negative,
            r.sign_changing,
            peaks.join(";")
        );
        let _ = writeln!(
            txt,
            "{:>8} {:>10} {:>10} {:>8} {:>8} {:>8} {:>14}",
            r.kappa, r.canonical_solutions, r.signed_solutions, r.positive, r.negative, r.failed, r.sign_changing
        );
    }
    fs::write(tables.join("catalog.csv"), csv)?;
    fs::write(tables.join("catalog.txt"), txt)?;
    let summary = run::summarize(&all_records);
    manifest.solutions = all_records;
    manifest.tables = vec!["tables/catalog.csv".into(), "tables/catalog.txt".into()];
    manifest.summary = Some(summary);
    dir.write_manifest(&manifest)?;
    Ok(if summary.failed == 0 {
        Status::Ok
    } else {
        Status::Partial
    })
}

fn cmd_export(cfg: &RunConfig, out: &Path, solution: Option<&Path>) -> anyhow::Result<Status> {
    let files: Vec<PathBuf> = match solution {
        Some(p) => vec![p.to_path_buf()],
        None => {
            let mut v = Vec::new();
            collect_solutions(&out.join("solutions"), &mut v)?;
            v.sort();
            v
        }
    };
    if files.is_empty() {
        bail!("no solutions found under {}", out.join("solutions").display());
    }
    let dir = RunDir::create(out)?;
    let fields = dir.sub("fields")?;
    // Exporting adds to the manifest of the run it reads from.
    let mut m = dir.read_manifest().unwrap_or_else(|| Manifest::new("export", cfg));
    m.fields.clear();
    for f in files {
        let sol = DiscreteSolution::read_json(&f).with_context(|| format!("reading solution {}", f.display()))?;
        let stem = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let name = format!("{stem}.csv");
        export_field(&sol, cfg.export_resolution, &fields.join(&name)).with_context(|| format!("exporting {name}"))?;
        println!("fields/{name}");
        m.fields.push(format!("fields/{name}"));
    }
    dir.write_manifest(&m)?;
    Ok(Status::Ok)
}

fn collect_solutions(dir: &Path, acc: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    if !dir.is_dir() {
        return Ok(());
    }
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let p = entry?.path();
        if p.is_dir() {
            collect_solutions(&p, acc)?;
        } else if p.extension().is_some_and(|x| x == "json") {
            acc.push(p);
        }
    }
    Ok(())
}
