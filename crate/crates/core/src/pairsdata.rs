//! Cause-effect pair ingestion, equiprobable binning and the weighted
//! intervention-count benchmark.
//!
//! The dataset directory holds `pairmeta.txt` plus one `pairNNNN.txt` per
//! pair. Each metadata line reads
//! `id cause_first cause_last effect_first effect_last weight` with 1-based
//! column numbers; only the first cause and first effect column are used.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gain::GainOptions;
use crate::ptree::VariableSpace;
use crate::simharness::{restart_seed, run_experiment, ExperimentConfig, JointTable, Setup};
use crate::strategies::StrategyKind;

pub const META_FILE: &str = "pairmeta.txt";
pub const DEFAULT_BINS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct PairMeta {
    pub id: String,
    /// 1-based, inclusive column ranges.
    pub cause_columns: (usize, usize),
    pub effect_columns: (usize, usize),
    pub weight: f64,
}

impl PairMeta {
    pub fn data_file(&self, dir: &Path) -> PathBuf {
        dir.join(format!("pair{}.txt", self.id))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairRecord {
    pub id: String,
    pub cause: Vec<f64>,
    pub effect: Vec<f64>,
    pub weight: f64,
}

/// Bin indices for one column. `degenerate` is set when some bin is empty,
/// which happens when ties leave too few distinct values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinnedColumn {
    pub bins: Vec<usize>,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinnedPair {
    pub id: String,
    pub cause_bins: Vec<usize>,
    pub effect_bins: Vec<usize>,
    pub k: usize,
    pub weight: f64,
    pub degenerate: bool,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_meta_line(text: &str, path: &Path, line: usize) -> Result<PairMeta> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != 6 {
        return Err(parse_err(
            path,
            line,
            format!("expected 6 fields, found {}", fields.len()),
        ));
    }
    let column = |i: usize| -> Result<usize> {
        match fields[i].parse::<usize>() {
            Ok(c) if c >= 1 => Ok(c),
            _ => Err(parse_err(
                path,
                line,
                format!("bad column number `{}`", fields[i]),
            )),
        }
    };
    let range = |a: usize, b: usize| -> Result<(usize, usize)> {
        let (first, last) = (column(a)?, column(b)?);
        if last < first {
            return Err(parse_err(
                path,
                line,
                format!("column range {first}-{last} is reversed"),
            ));
        }
        Ok((first, last))
    };
    let weight: f64 = fields[5]
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad weight `{}`", fields[5])))?;
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(parse_err(
            path,
            line,
            format!("weight must be positive, got {weight}"),
        ));
    }
    Ok(PairMeta {
        id: fields[0].to_string(),
        cause_columns: range(1, 2)?,
        effect_columns: range(3, 4)?,
        weight,
    })
}

/// Reads `pairmeta.txt` from `dir`. Blank lines are skipped.
pub fn load_meta(dir: &Path) -> Result<Vec<PairMeta>> {
    let path = dir.join(META_FILE);
    let text = read_to_string(&path)?;
    let metas = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_meta_line(l, &path, i + 1))
        .collect::<Result<Vec<_>>>()?;
    if metas.is_empty() {
        return Err(parse_err(&path, 0, "no pairs listed"));
    }
    Ok(metas)
}

/// Every nonblank line must hold at least as many numeric cells as the
/// highest column used.
pub fn load_pair(data_path: &Path, meta: &PairMeta) -> Result<PairRecord> {
    let text = read_to_string(data_path)?;
    let (c, e) = (meta.cause_columns.0 - 1, meta.effect_columns.0 - 1);
    let mut cause = Vec::new();
    let mut effect = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells = line
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(data_path, i + 1, format!("non-numeric cell `{s}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let needed = c.max(e) + 1;
        if cells.len() < needed {
            return Err(parse_err(
                data_path,
                i + 1,
                format!("{} columns, need at least {needed}", cells.len()),
            ));
        }
        cause.push(cells[c]);
        effect.push(cells[e]);
    }
    if cause.is_empty() {
        return Err(parse_err(data_path, 0, "no data rows"));
    }
    Ok(PairRecord {
        id: meta.id.clone(),
        cause,
        effect,
        weight: meta.weight,
    })
}

pub fn load_dataset(dir: &Path) -> Result<Vec<PairRecord>> {
    load_meta(dir)?
        .iter()
        .map(|m| load_pair(&m.data_file(dir), m))
        .collect()
}

/// Equiprobable bins. With `s` the sorted values and `n` their count, edge
/// `i` (for `i` in `1..K`) is `s[ceil(i n / K) - 1]` and a value's bin is the
/// number of edges strictly below it, so a value equal to an edge falls in
/// the lower bin.
pub fn quantile_bin(values: &[f64], k: usize) -> Result<BinnedColumn> {
    if k < 2 {
        return Err(Error::param("k", format!("must be at least 2, got {k}")));
    }
    if values.is_empty() {
        return Err(Error::param("values", "must be nonempty"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::param("values", "must not contain NaN"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let edges: Vec<f64> = (1..k).map(|i| sorted[(i * n).div_ceil(k) - 1]).collect();
    let bins: Vec<usize> = values
        .iter()
        .map(|&v| edges.partition_point(|&e| e < v))
        .collect();
    let mut occupied = vec![false; k];
    for &b in &bins {
        occupied[b] = true;
    }
    Ok(BinnedColumn {
        bins,
        degenerate: occupied.contains(&false),
    })
}

pub fn bin_pair(pair: &PairRecord, k: usize) -> Result<BinnedPair> {
    if pair.cause.len() != pair.effect.len() {
        return Err(Error::param("pair", "cause and effect lengths differ"));
    }
    let cause = quantile_bin(&pair.cause, k)?;
    let effect = quantile_bin(&pair.effect, k)?;
    Ok(BinnedPair {
        id: pair.id.clone(),
        cause_bins: cause.bins,
        effect_bins: effect.bins,
        k,
        weight: pair.weight,
        degenerate: cause.degenerate || effect.degenerate,
    })
}

/// Relative frequencies over (cause bin, effect bin), cause first.
pub fn empirical_joint(pair: &BinnedPair) -> Result<JointTable> {
    let space = VariableSpace::new(vec!["cause".into(), "effect".into()], vec![pair.k, pair.k])?;
    let mut counts = vec![0.0; pair.k * pair.k];
    for (&a, &b) in pair.cause_bins.iter().zip(&pair.effect_bins) {
        counts[a * pair.k + b] += 1.0;
    }
    JointTable::from_weights(space, counts)
}

/// `(mean, standard error)` with weights `w`: the mean is `Σ w x / Σ w` and
/// the error `sqrt(Σ w² (x - mean)²) / Σ w`. Both are invariant to rescaling
/// the weights.
pub fn weighted_mean_stderr(values: &[f64], weights: &[f64]) -> (f64, f64) {
    let total: f64 = weights.iter().sum();
    if values.is_empty() || total <= 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().zip(weights).map(|(x, w)| w * x).sum::<f64>() / total;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values
        .iter()
        .zip(weights)
        .map(|(x, w)| (w * (x - mean)).powi(2))
        .sum::<f64>();
    (mean, var.sqrt() / total)
}

#[derive(Clone, Debug)]
pub struct PairsConfig {
    pub n_obs: usize,
    pub strategies: Vec<StrategyKind>,
    pub restarts: usize,
    pub alpha: f64,
    pub max_interventions: usize,
    pub threshold: f64,
    pub bins: usize,
    pub seed: u64,
    pub gain: GainOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairOutcome {
    pub id: String,
    pub weight: f64,
    pub degenerate: bool,
    /// Mean steps to certainty over restarts, one entry per strategy.
    pub mean_steps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairsRow {
    pub n_obs: usize,
    pub strategy: StrategyKind,
    pub weighted_mean: f64,
    pub weighted_stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairsSummary {
    pub pairs: Vec<PairOutcome>,
    pub rows: Vec<PairsRow>,
}

/// Runs every strategy on every pair with the annotated cause as the first
/// variable and the cause-to-effect chain as the truth. Restarts are averaged
/// per pair first, then pairs are combined with their weights.
pub fn run_pairs_benchmark(dir: &Path, cfg: &PairsConfig) -> Result<PairsSummary> {
    let records = load_dataset(dir)?;
    run_pairs_on(&records, cfg)
}

pub fn run_pairs_on(records: &[PairRecord], cfg: &PairsConfig) -> Result<PairsSummary> {
    if cfg.strategies.is_empty() {
        return Err(Error::param(
            "strategies",
            "at least one strategy is required",
        ));
    }
    let pairs = records
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let binned = bin_pair(rec, cfg.bins)?;
            let exp = ExperimentConfig {
                setup: Setup::Empirical {
                    joint: empirical_joint(&binned)?,
                },
                true_hypothesis: 0,
                n_obs: cfg.n_obs,
                max_interventions: cfg.max_interventions,
                alpha: cfg.alpha,
                threshold: cfg.threshold,
                seed: restart_seed(cfg.seed ^ 0x5041_4952, i),
                gain: cfg.gain,
            };
            let mean_steps = cfg
                .strategies
                .iter()
                .map(|&s| run_experiment(&exp, s, cfg.restarts).map(|r| r.mean_steps))
                .collect::<Result<Vec<_>>>()?;
            Ok(PairOutcome {
                id: rec.id.clone(),
                weight: rec.weight,
                degenerate: binned.degenerate,
                mean_steps,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let weights: Vec<f64> = pairs.iter().map(|p| p.weight).collect();
    let rows = cfg
        .strategies
        .iter()
        .enumerate()
        .map(|(s, &strategy)| {
            let values: Vec<f64> = pairs.iter().map(|p| p.mean_steps[s]).collect();
            let (weighted_mean, weighted_stderr) = weighted_mean_stderr(&values, &weights);
            PairsRow {
                n_obs: cfg.n_obs,
                strategy,
                weighted_mean,
                weighted_stderr,
            }
        })
        .collect();
    Ok(PairsSummary { pairs, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn meta_path() -> PathBuf {
        PathBuf::from("pairmeta.txt")
    }

    #[test]
    fn meta_lines() {
        let m = parse_meta_line("0007 1 2 3 3 0.5", &meta_path(), 1).unwrap();
        assert_eq!(m.id, "0007");
        assert_eq!(m.cause_columns, (1, 2));
        assert_eq!(m.effect_columns, (3, 3));
        assert_eq!(m.weight, 0.5);
        assert!(parse_meta_line("0007 1 2 3 3", &meta_path(), 1).is_err());
        assert!(parse_meta_line("0007 0 1 2 2 1", &meta_path(), 1).is_err());
        assert!(parse_meta_line("0007 2 1 3 3 1", &meta_path(), 1).is_err());
        assert!(parse_meta_line("0007 1 1 2 2 0", &meta_path(), 1).is_err());
        let err = parse_meta_line("0007 1 1 2 2 w", &meta_path(), 9).unwrap_err();
        assert!(err.to_string().contains("pairmeta.txt:9"));
    }

    #[test]
    fn bins_of_one_to_ten() {
        let values: Vec<f64> = (1..=10).map(f64::from).collect();
        let b = quantile_bin(&values, 5).unwrap();
        assert_eq!(b.bins, vec![0, 0, 1, 1, 2, 2, 3, 3, 4, 4]);
        assert!(!b.degenerate);
        let shuffled = [7.0, 1.0, 10.0, 4.0];
        assert_eq!(quantile_bin(&shuffled, 2).unwrap().bins, vec![1, 0, 1, 0]);
    }

    #[test]
    fn constant_column_is_degenerate() {
        let b = quantile_bin(&[3.0; 12], 5).unwrap();
        assert!(b.bins.iter().all(|&x| x == 0));
        assert!(b.degenerate);
        assert!(quantile_bin(&[], 5).is_err());
        assert!(quantile_bin(&[1.0], 1).is_err());
    }

    #[test]
    fn weighted_summary() {
        let (m, se) = weighted_mean_stderr(&[10.0, 20.0], &[1.0, 3.0]);
        assert_abs_diff_eq!(m, 17.5, epsilon = 1e-12);
        // sqrt((1 * 7.5)^2 + (3 * 2.5)^2) / 4
        assert_abs_diff_eq!(se, (112.5f64).sqrt() / 4.0, epsilon = 1e-12);
        let (m2, se2) = weighted_mean_stderr(&[10.0, 20.0], &[0.25, 0.75]);
        assert_abs_diff_eq!(m, m2, epsilon = 1e-12);
        assert_abs_diff_eq!(se, se2, epsilon = 1e-12);
        assert_eq!(weighted_mean_stderr(&[4.0], &[2.0]), (4.0, 0.0));
    }

    #[test]
    fn empirical_joint_counts() {
        let pair = BinnedPair {
            id: "x".into(),
            cause_bins: vec![0, 0, 1, 1],
            effect_bins: vec![0, 1, 1, 1],
            k: 2,
            weight: 1.0,
            degenerate: false,
        };
        let j = empirical_joint(&pair).unwrap();
        assert_eq!(j.probs(), &[0.25, 0.25, 0.0, 0.5]);
    }
}
