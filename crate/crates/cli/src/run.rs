//! Seed generation, batch solves and the run directory layout.
//!
//! ```text
//! <out>/manifest.json
//! <out>/seeds/000_u_11.json ...
//! <out>/solutions/000_u_11.json, 000_u_11.history.csv ...
//! <out>/tables/*.csv, *.txt
//! <out>/fields/*.csv
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sgsem_core::analysis::{classify, SignClass};
use sgsem_core::eigen::{eigen_group, laplace_eigenpairs, EigenPair, Normalization};
use sgsem_core::newton::newton_solve;
use sgsem_core::seeds::{
    default_quad_order, enumerate_cubic_seeds, extend_seed, random_newton_search, seed_label, seed_to_nodal_on,
    subproblem_residual, RandomSearch, SeedGuess,
};
use sgsem_core::{DiscreteSolution, Nonlinearity, TensorOperators};

use crate::config::{RunConfig, SeedSpec};

pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating run directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn sub(&self, name: &str) -> anyhow::Result<PathBuf> {
        let p = self.root.join(name);
        fs::create_dir_all(&p).with_context(|| format!("creating {}", p.display()))?;
        Ok(p)
    }

    pub fn read_manifest(&self) -> Option<Manifest> {
        let text = fs::read_to_string(self.root.join("manifest.json")).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn write_manifest(&self, manifest: &Manifest) -> anyhow::Result<()> {
        let path = self.root.join("manifest.json");
        let text = serde_json::to_string_pretty(manifest)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Everything needed to find what a run produced. Holds no timestamps, so
/// identical configurations give identical manifests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub rng_seed: u64,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_seeds: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub solutions: Vec<SolveRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tables: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            tool: "sgsem".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            rng_seed: cfg.rng_seed,
            config: cfg.clone(),
            seeds: Vec::new(),
            canonical_seeds: None,
            solutions: Vec::new(),
            tables: Vec::new(),
            fields: Vec::new(),
            summary: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub converged: usize,
    pub failed: usize,
}

/// Seeds of a run in output order, and the number of `±` classes among them.
pub struct SeedSet {
    pub seeds: Vec<SeedGuess>,
    pub canonical: usize,
}

pub fn generate_seeds(cfg: &RunConfig) -> anyhow::Result<SeedSet> {
    let d = &cfg.domain;
    let f = &cfg.nonlinearity;
    match cfg.seed_spec() {
        SeedSpec::Eigen { lambda, extend_to } => {
            let mut seeds = Vec::new();
            for &lam in &lambda {
                let group = eigen_group(d, lam, Normalization::UnitAmplitude)
                    .ok_or_else(|| anyhow!("λ = {lam} is not a Dirichlet eigenvalue of the domain"))?;
                let found = if *f == Nonlinearity::Cubic {
                    enumerate_cubic_seeds(&group, f, d)?
                } else {
                    signed(random_newton_search(
                        &group.pairs(),
                        d,
                        f,
                        &random_search(cfg, 2000, 10.0),
                        None,
                    )?)
                };
                match extend_to {
                    Some(k) => {
                        let basis = extended_basis(&group.pairs(), d, k)?;
                        for s in &found {
                            let e = extend_seed(s, &basis, d, f, None)?;
                            if let Some(w) = &e.warning {
                                warn!("{}: {w}", s.label);
                            }
                            seeds.push(e);
                        }
                    }
                    None => seeds.extend(found),
                }
            }
            let canonical = seeds.len() / 2;
            Ok(SeedSet { seeds, canonical })
        }
        SeedSpec::Explicit { seeds } => {
            let mut out = Vec::with_capacity(seeds.len());
            for s in seeds {
                let pairs: Vec<EigenPair> = s
                    .basis
                    .iter()
                    .map(|&(m, n)| EigenPair::new(d, m, n, s.normalization))
                    .collect();
                let r = subproblem_residual(&s.coefficients, &pairs, d, f, default_quad_order(&pairs))?;
                out.push(SeedGuess {
                    label: s.label.unwrap_or_else(|| seed_label(&s.basis, &s.coefficients)),
                    basis: s.basis,
                    normalization: s.normalization,
                    coefficients: s.coefficients,
                    residual_norm: r.iter().map(|v| v * v).sum::<f64>().sqrt(),
                    rng_seed: None,
                    warning: None,
                });
            }
            let canonical = out.len();
            Ok(SeedSet { seeds: out, canonical })
        }
        SeedSpec::Random {
            basis_size,
            trials,
            box_size,
        } => {
            let basis = laplace_eigenpairs(d, basis_size, Normalization::Orthonormal)?;
            let roots = random_newton_search(&basis, d, f, &random_search(cfg, trials, box_size), None)?;
            let canonical = roots.len();
            Ok(SeedSet {
                seeds: signed(roots),
                canonical,
            })
        }
    }
}

fn random_search(cfg: &RunConfig, trials: usize, box_size: f64) -> RandomSearch {
    RandomSearch {
        trials,
        box_size,
        rng_seed: cfg.rng_seed,
        ..RandomSearch::default()
    }
}

/// Each canonical root followed by its negation.
fn signed(roots: Vec<SeedGuess>) -> Vec<SeedGuess> {
    roots
        .into_iter()
        .flat_map(|s| {
            let neg = s.negated();
            [s, neg]
        })
        .collect()
}

/// The group members first, then the lowest other eigenpairs up to `k` in total.
fn extended_basis(group: &[EigenPair], d: &sgsem_core::eigen::RectDomain, k: usize) -> anyhow::Result<Vec<EigenPair>> {
    let mut basis = group.to_vec();
    let norm = group[0].normalization;
    for p in laplace_eigenpairs(d, k + group.len(), norm)? {
        if basis.len() >= k.max(group.len()) {
            break;
        }
        if !basis.iter().any(|b| (b.m, b.n) == (p.m, p.n)) {
            basis.push(p);
        }
    }
    Ok(basis)
}

/// File stem `007_u_12+21` for the seed at `index`.
pub fn file_stem(index: usize, label: &str) -> String {
    let clean: String = label
        .chars()
        .filter(|c| !matches!(c, '{' | '}' | '(' | ')'))
        .map(|c| if c == ',' { '.' } else { c })
        .collect();
    format!("{index:03}_{clean}")
}

pub fn write_seeds(set: &SeedSet, dir: &Path) -> anyhow::Result<Vec<String>> {
    let mut names = Vec::with_capacity(set.seeds.len());
    for (i, s) in set.seeds.iter().enumerate() {
        let name = format!("{}.json", file_stem(i, &s.label));
        s.write_json(&dir.join(&name))
            .with_context(|| format!("writing seed {name}"))?;
        names.push(name);
    }
    Ok(names)
}

/// Seeds from `*.json` files in `dir`, in file-name order.
pub fn read_seed_dir(dir: &Path) -> anyhow::Result<Vec<(String, SeedGuess)>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading seed directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let seed = SeedGuess::read_json(&p).with_context(|| format!("reading seed {}", p.display()))?;
            let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok((stem, seed))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub file: String,
    pub seed_label: String,
    pub converged: bool,
    pub residual_norm: f64,
    pub newton_iters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<SignClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_abs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_peaks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct SolveResult {
    pub record: SolveRecord,
    pub solution: Option<DiscreteSolution>,
}

/// Solves every seed from its nodal samples; failures are recorded, not fatal.
/// Results come back in input order whatever the schedule.
pub fn solve_batch(
    cfg: &RunConfig,
    seeds: &[(String, SeedGuess)],
    out: Option<&Path>,
) -> anyhow::Result<Vec<SolveResult>> {
    let ops = TensorOperators::with_mass(cfg.n, cfg.domain, cfg.mass)?;
    let results: Vec<anyhow::Result<SolveResult>> = seeds
        .par_iter()
        .map(|(stem, seed)| {
            let u0 = seed_to_nodal_on(seed, &ops);
            let res = match newton_solve(&u0, &ops, &cfg.nonlinearity, &cfg.newton) {
                Ok(outcome) => {
                    let mut sol = outcome.solution;
                    sol.seed_label = seed.label.clone();
                    if let Some(dir) = out {
                        sol.write_json(&dir.join(format!("{stem}.json")))?;
                        sgsem_core::newton::write_history_csv(
                            &outcome.history,
                            &dir.join(format!("{stem}.history.csv")),
                        )?;
                    }
                    let class = classify(&sol);
                    SolveResult {
                        record: SolveRecord {
                            file: format!("{stem}.json"),
                            seed_label: seed.label.clone(),
                            converged: true,
                            residual_norm: sol.residual_norm,
                            newton_iters: sol.newton_iters,
                            sign: Some(class.sign),
                            max_abs: Some(class.max_abs),
                            num_peaks: Some(class.num_peaks),
                            error: None,
                        },
                        solution: Some(sol),
                    }
                }
                Err(e) => {
                    let (iters, resid) = match &e {
                        sgsem_core::Error::NotConverged {
                            iterations,
                            last_residual,
                            ..
                        } => (*iterations, *last_residual),
                        _ => (0, f64::NAN),
                    };
                    warn!("{}: {e}", seed.label);
                    SolveResult {
                        record: SolveRecord {
                            file: format!("{stem}.json"),
                            seed_label: seed.label.clone(),
                            converged: false,
                            residual_norm: resid,
                            newton_iters: iters,
                            sign: None,
                            max_abs: None,
                            num_peaks: None,
                            error: Some(e.to_string()),
                        },
                        solution: None,
                    }
                }
            };
            info!(
                "{} -> {}",
                seed.label,
                if res.record.converged { "converged" } else { "failed" }
            );
            Ok(res)
        })
        .collect();
    results.into_iter().collect()
}

pub fn summarize(records: &[SolveRecord]) -> Summary {
    let converged = records.iter().filter(|r| r.converged).count();
    Summary {
        total: records.len(),
        converged,
        failed: records.len() - converged,
    }
}

pub fn sign_name(s: SignClass) -> &'static str {
    match s {
        SignClass::Positive => "positive",
        SignClass::Negative => "negative",
        SignClass::SignChanging => "sign-changing",
        SignClass::Zero => "zero",
    }
}

pub fn write_summary_csv(records: &[SolveRecord], path: &Path) -> anyhow::Result<()> {
    let mut s = String::from("file,seed_label,status,residual_norm,newton_iters,sign,max_abs,num_peaks\n");
    for r in records {
        s.push_str(&format!(
            "{},{},{},{:e},{},{},{},{}\n",
            r.file,
            r.seed_label,
            if r.converged { "converged" } else { "failed" },
            r.residual_norm,
            r.newton_iters,
            r.sign.map(sign_name).unwrap_or(""),
            r.max_abs.map(|v| format!("{v:e}")).unwrap_or_default(),
            r.num_peaks.map(|v| v.to_string()).unwrap_or_default(),
        ));
    }
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
