//! Proper scores, skill scores, reliability diagrams with the Brier score
//! decomposition, day-block bootstrap intervals and paired t-tests.

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::gev::CensoredGevParams;
use crate::predictors::gini_md;

/// Upper edges of the first ten reliability bins; the last bin is
/// `[0.95, 1.0]`.
pub const BIN_EDGES: [f64; 10] = [0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95];
pub const N_BINS: usize = 11;

/// CRPS of the raw ensemble, `E|X - y| - ½ E|X - X'|` under the empirical
/// distribution of the members.
pub fn crps_ensemble(members: &[f64], y: f64) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::domain("CRPS of an empty ensemble"));
    }
    if members.iter().any(|v| !v.is_finite()) || !y.is_finite() {
        return Err(Error::domain("non-finite ensemble member or observation"));
    }
    let k = members.len() as f64;
    let abs_err = members.iter().map(|f| (f - y).abs()).sum::<f64>() / k;
    let spread = gini_md(members, None)?;
    Ok((abs_err - 0.5 * spread).max(0.0))
}

pub fn brier_score(p: f64, occurred: bool) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("probability {p} outside [0, 1]")));
    }
    let o = if occurred { 1.0 } else { 0.0 };
    Ok((o - p) * (o - p))
}

/// `1 - score / reference`.
pub fn skill_score(mean_score: f64, mean_ref_score: f64) -> Result<f64> {
    if !(mean_ref_score > 0.0) {
        return Err(Error::UndefinedSkill(mean_ref_score));
    }
    Ok(1.0 - mean_score / mean_ref_score)
}

/// Fraction of members strictly above `t`.
pub fn ensemble_threshold_prob(members: &[f64], t: f64) -> f64 {
    if members.is_empty() {
        return f64::NAN;
    }
    members.iter().filter(|v| **v > t).count() as f64 / members.len() as f64
}

/// Index of the reliability bin containing `p`.
pub fn bin_index(p: f64) -> usize {
    BIN_EDGES.iter().take_while(|edge| p >= **edge).count()
}

pub fn bin_bounds(index: usize) -> (f64, f64) {
    let lower = if index == 0 { 0.0 } else { BIN_EDGES[index - 1] };
    let upper = if index == N_BINS - 1 { 1.0 } else { BIN_EDGES[index] };
    (lower, upper)
}

/// Per-bin sufficient statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BinTally {
    pub count: usize,
    pub sum_prob: f64,
    pub sum_obs: f64,
}

impl BinTally {
    fn add(&mut self, other: &BinTally) {
        self.count += other.count;
        self.sum_prob += other.sum_prob;
        self.sum_obs += other.sum_obs;
    }
}

fn tally(pairs: &[(f64, bool)]) -> Result<[BinTally; N_BINS]> {
    let mut bins = [BinTally::default(); N_BINS];
    for &(p, o) in pairs {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("probability {p} outside [0, 1]")));
        }
        let b = &mut bins[bin_index(p)];
        b.count += 1;
        b.sum_prob += p;
        b.sum_obs += if o { 1.0 } else { 0.0 };
    }
    Ok(bins)
}

/// Brier score decomposition `BS ≈ REL - RES + UNC`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrierDecomposition {
    pub reliability: f64,
    pub resolution: f64,
    pub uncertainty: f64,
}

/// Classical binned decomposition and the bias-corrected variant of Ferro
/// and Fricker. The corrected terms need at least two forecasts.
pub fn decompose(bins: &[BinTally; N_BINS]) -> Option<(BrierDecomposition, Option<BrierDecomposition>)> {
    let n: usize = bins.iter().map(|b| b.count).sum();
    if n == 0 {
        return None;
    }
    let nf = n as f64;
    let obar = bins.iter().map(|b| b.sum_obs).sum::<f64>() / nf;
    let mut rel = 0.0;
    let mut res = 0.0;
    let mut within = 0.0;
    for b in bins.iter().filter(|b| b.count > 0) {
        let nk = b.count as f64;
        let pk = b.sum_prob / nk;
        let ok = b.sum_obs / nk;
        rel += nk / nf * (pk - ok).powi(2);
        res += nk / nf * (ok - obar).powi(2);
        if b.count > 1 {
            within += nk / nf * ok * (1.0 - ok) / (nk - 1.0);
        }
    }
    let unc = obar * (1.0 - obar);
    let classical = BrierDecomposition {
        reliability: rel,
        resolution: res,
        uncertainty: unc,
    };
    let corrected = (n > 1).then(|| BrierDecomposition {
        reliability: rel - within,
        resolution: res - within + unc / (nf - 1.0),
        uncertainty: nf * unc / (nf - 1.0),
    });
    Some((classical, corrected))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReliabilityBin {
    pub index: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Mean forecast probability in the bin; `None` for empty bins.
    pub mean_prob: Option<f64>,
    pub obs_freq: Option<f64>,
    pub ci: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityDiagram {
    pub bins: Vec<ReliabilityBin>,
    pub decomposition: BrierDecomposition,
    pub bias_corrected: Option<BrierDecomposition>,
    pub decomposition_ci: Option<DecompositionIntervals>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionIntervals {
    pub reliability: Interval,
    pub resolution: Interval,
    pub uncertainty: Interval,
}

fn diagram_from_tally(bins: &[BinTally; N_BINS]) -> Result<ReliabilityDiagram> {
    let (decomposition, bias_corrected) =
        decompose(bins).ok_or_else(|| Error::InsufficientData("reliability diagram of no forecasts".into()))?;
    let bins = bins
        .iter()
        .enumerate()
        .map(|(index, b)| {
            let (lower, upper) = bin_bounds(index);
            let nk = b.count as f64;
            ReliabilityBin {
                index,
                lower,
                upper,
                count: b.count,
                mean_prob: (b.count > 0).then(|| b.sum_prob / nk),
                obs_freq: (b.count > 0).then(|| b.sum_obs / nk),
                ci: None,
            }
        })
        .collect();
    Ok(ReliabilityDiagram {
        bins,
        decomposition,
        bias_corrected,
        decomposition_ci: None,
    })
}

/// Reliability diagram over `(probability, occurred)` pairs.
pub fn reliability_diagram(pairs: &[(f64, bool)]) -> Result<ReliabilityDiagram> {
    diagram_from_tally(&tally(pairs)?)
}

/// Mean Brier score over `(probability, occurred)` pairs.
pub fn mean_brier(pairs: &[(f64, bool)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData("Brier score of no forecasts".into()));
    }
    let mut total = 0.0;
    for &(p, o) in pairs {
        total += brier_score(p, o)?;
    }
    Ok(total / pairs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    /// Confidence level in percent.
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 1000,
            level: 90.0,
            seed: 1,
        }
    }
}

impl BootstrapConfig {
    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("bootstrap needs at least one replicate".into()));
        }
        if !(self.level > 0.0 && self.level <= 100.0) {
            return Err(Error::Config(format!("confidence level {} outside (0, 100]", self.level)));
        }
        Ok(())
    }
}

/// Day indices drawn with replacement for each replicate. Replicate `r`
/// uses stream `r` of a generator seeded from `seed`, so the draws do not
/// depend on scheduling.
pub fn resample_days(n_days: usize, replicates: usize, seed: u64) -> Vec<Vec<usize>> {
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            (0..n_days).map(|_| rng.random_range(0..n_days)).collect()
        })
        .collect()
}

/// Type-7 sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-tailed percentile interval of the finite replicate values.
pub fn percentile_interval(values: &[f64], level: f64) -> Option<Interval> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let alpha = 1.0 - level / 100.0;
    Some(Interval {
        low: quantile_sorted(&v, alpha / 2.0),
        high: quantile_sorted(&v, 1.0 - alpha / 2.0),
    })
}

/// Day-block bootstrap interval for the mean of `daily_values`.
pub fn block_bootstrap_ci(daily_values: &[f64], config: &BootstrapConfig) -> Result<Interval> {
    config.validate()?;
    if daily_values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "bootstrap needs at least 2 days, got {}",
            daily_values.len()
        )));
    }
    let n = daily_values.len() as f64;
    let stats: Vec<f64> = resample_days(daily_values.len(), config.replicates, config.seed)
        .iter()
        .map(|idx| idx.iter().map(|&i| daily_values[i]).sum::<f64>() / n)
        .collect();
    percentile_interval(&stats, config.level)
        .ok_or_else(|| Error::InsufficientData("no finite bootstrap replicates".into()))
}

/// Two-sided paired t-test on daily differences `a - b`.
pub fn paired_ttest_daily(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::data(format!(
            "paired series have different lengths ({} and {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData(format!("t-test needs at least 2 days, got {}", a.len())));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().all(|x| *x == 0.0) {
        return Ok(1.0);
    }
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // constant nonzero differences (up to rounding): unbounded t
    if var.sqrt() <= 1e-14 * mean.abs() {
        return Ok(0.0);
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| Error::domain(e.to_string()))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

/// Reference forecast used for skill scores.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    Ensemble(&'a [f64]),
    Parametric(&'a CensoredGevParams),
}

impl Reference<'_> {
    fn crps(&self, y: f64) -> Result<f64> {
        match self {
            Reference::Ensemble(m) => crps_ensemble(m, y),
            Reference::Parametric(p) => p.crps(y),
        }
    }

    fn exceedance(&self, t: f64) -> f64 {
        match self {
            Reference::Ensemble(m) => ensemble_threshold_prob(m, t),
            Reference::Parametric(p) => 1.0 - p.cdf(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOutcome {
    pub threshold: f64,
    pub p_model: f64,
    pub p_reference: f64,
    pub occurred: bool,
}

/// Scores of the model and the reference at one (day, site).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub day: NaiveDate,
    pub site: Arc<str>,
    pub crps_model: f64,
    pub crps_reference: f64,
    pub threshold_probs: Vec<ThresholdOutcome>,
}

pub fn score_pair(
    day: NaiveDate,
    site: Arc<str>,
    model: &CensoredGevParams,
    reference: Reference<'_>,
    y: f64,
    thresholds: &[f64],
) -> Result<ScoredPair> {
    let threshold_probs = thresholds
        .iter()
        .map(|&t| ThresholdOutcome {
            threshold: t,
            p_model: (1.0 - model.cdf(t)).clamp(0.0, 1.0),
            p_reference: reference.exceedance(t).clamp(0.0, 1.0),
            occurred: y > t,
        })
        .collect();
    Ok(ScoredPair {
        day,
        site,
        crps_model: model.crps(y)?,
        crps_reference: reference.crps(y)?,
        threshold_probs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreSummary {
    pub model: f64,
    pub reference: f64,
    pub model_ci: Option<Interval>,
    pub reference_ci: Option<Interval>,
    /// `None` when the reference score is zero.
    pub skill: Option<f64>,
    pub skill_ci: Option<Interval>,
    /// Two-sided paired t-test on daily sums; `None` with fewer than 2 days.
    pub p_value_two_sided: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionSummary {
    pub classical: BrierDecomposition,
    pub classical_ci: Option<DecompositionIntervals>,
    pub bias_corrected: Option<BrierDecomposition>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSummary {
    pub threshold: f64,
    pub base_rate: f64,
    pub brier: ScoreSummary,
    pub model_decomposition: DecompositionSummary,
    pub reference_decomposition: DecompositionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub n_pairs: usize,
    pub n_days: usize,
    pub reference: String,
    pub bootstrap: BootstrapConfig,
    pub crps: ScoreSummary,
    pub thresholds: Vec<ThresholdSummary>,
}

/// Report plus the per-threshold reliability diagrams of model and
/// reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub report: VerificationReport,
    pub model_diagrams: Vec<ReliabilityDiagram>,
    pub reference_diagrams: Vec<ReliabilityDiagram>,
}

struct DayTotals {
    n: usize,
    crps_model: f64,
    crps_reference: f64,
    brier_model: Vec<f64>,
    brier_reference: Vec<f64>,
    bins_model: Vec<[BinTally; N_BINS]>,
    bins_reference: Vec<[BinTally; N_BINS]>,
}

fn day_totals(pairs: &[&ScoredPair], n_thresholds: usize) -> Result<DayTotals> {
    let mut t = DayTotals {
        n: pairs.len(),
        crps_model: 0.0,
        crps_reference: 0.0,
        brier_model: vec![0.0; n_thresholds],
        brier_reference: vec![0.0; n_thresholds],
        bins_model: vec![[BinTally::default(); N_BINS]; n_thresholds],
        bins_reference: vec![[BinTally::default(); N_BINS]; n_thresholds],
    };
    for p in pairs {
        t.crps_model += p.crps_model;
        t.crps_reference += p.crps_reference;
        for (j, o) in p.threshold_probs.iter().enumerate() {
            t.brier_model[j] += brier_score(o.p_model, o.occurred)?;
            t.brier_reference[j] += brier_score(o.p_reference, o.occurred)?;
            let obs = if o.occurred { 1.0 } else { 0.0 };
            for (bins, prob) in [(&mut t.bins_model[j], o.p_model), (&mut t.bins_reference[j], o.p_reference)] {
                let b = &mut bins[bin_index(prob)];
                b.count += 1;
                b.sum_prob += prob;
                b.sum_obs += obs;
            }
        }
    }
    Ok(t)
}

fn ratio_skill(model: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        1.0 - model / reference
    } else {
        f64::NAN
    }
}

fn interval_of(values: impl Iterator<Item = f64>, level: f64) -> Option<Interval> {
    percentile_interval(&values.collect::<Vec<_>>(), level)
}

struct Replicate {
    n: usize,
    crps_model: f64,
    crps_reference: f64,
    brier_model: Vec<f64>,
    brier_reference: Vec<f64>,
    bins_model: Vec<[BinTally; N_BINS]>,
    bins_reference: Vec<[BinTally; N_BINS]>,
}

fn aggregate(days: &[DayTotals], idx: impl Iterator<Item = usize>, n_thresholds: usize) -> Replicate {
    let mut r = Replicate {
        n: 0,
        crps_model: 0.0,
        crps_reference: 0.0,
        brier_model: vec![0.0; n_thresholds],
        brier_reference: vec![0.0; n_thresholds],
        bins_model: vec![[BinTally::default(); N_BINS]; n_thresholds],
        bins_reference: vec![[BinTally::default(); N_BINS]; n_thresholds],
    };
    for i in idx {
        let d = &days[i];
        r.n += d.n;
        r.crps_model += d.crps_model;
        r.crps_reference += d.crps_reference;
        for j in 0..n_thresholds {
            r.brier_model[j] += d.brier_model[j];
            r.brier_reference[j] += d.brier_reference[j];
            for k in 0..N_BINS {
                r.bins_model[j][k].add(&d.bins_model[j][k]);
                r.bins_reference[j][k].add(&d.bins_reference[j][k]);
            }
        }
    }
    r
}

fn summarize_scores(
    model_total: f64,
    reference_total: f64,
    n: usize,
    replicates: &[Replicate],
    pick: impl Fn(&Replicate) -> (f64, f64),
    daily_model: &[f64],
    daily_reference: &[f64],
    level: f64,
) -> Result<ScoreSummary> {
    let nf = n as f64;
    let model = model_total / nf;
    let reference = reference_total / nf;
    let skill = skill_score(model, reference).ok();
    let p_value_two_sided = if daily_model.len() >= 2 {
        Some(paired_ttest_daily(daily_model, daily_reference)?)
    } else {
        None
    };
    Ok(ScoreSummary {
        model,
        reference,
        model_ci: interval_of(replicates.iter().map(|r| pick(r).0 / r.n as f64), level),
        reference_ci: interval_of(replicates.iter().map(|r| pick(r).1 / r.n as f64), level),
        skill,
        skill_ci: skill.and_then(|_| {
            interval_of(
                replicates.iter().map(|r| {
                    let (m, rf) = pick(r);
                    ratio_skill(m, rf)
                }),
                level,
            )
        }),
        p_value_two_sided,
    })
}

fn diagram_with_ci(
    bins: &[BinTally; N_BINS],
    replicate_bins: &[&[BinTally; N_BINS]],
    level: f64,
) -> Result<ReliabilityDiagram> {
    let mut diagram = diagram_from_tally(bins)?;
    if replicate_bins.is_empty() {
        return Ok(diagram);
    }
    for (k, bin) in diagram.bins.iter_mut().enumerate() {
        if bin.count == 0 {
            continue;
        }
        bin.ci = interval_of(
            replicate_bins
                .iter()
                .filter(|b| b[k].count > 0)
                .map(|b| b[k].sum_obs / b[k].count as f64),
            level,
        );
    }
    let decomps: Vec<BrierDecomposition> = replicate_bins.iter().filter_map(|b| decompose(b).map(|d| d.0)).collect();
    diagram.decomposition_ci = (|| {
        Some(DecompositionIntervals {
            reliability: interval_of(decomps.iter().map(|d| d.reliability), level)?,
            resolution: interval_of(decomps.iter().map(|d| d.resolution), level)?,
            uncertainty: interval_of(decomps.iter().map(|d| d.uncertainty), level)?,
        })
    })();
    Ok(diagram)
}

fn decomposition_summary(d: &ReliabilityDiagram) -> DecompositionSummary {
    DecompositionSummary {
        classical: d.decomposition,
        classical_ci: d.decomposition_ci,
        bias_corrected: d.bias_corrected,
    }
}

/// Aggregates scored pairs into a report. Bootstrap intervals resample
/// whole days and are omitted when fewer than two days are present.
pub fn verify(pairs: &[ScoredPair], thresholds: &[f64], reference_label: &str, config: &BootstrapConfig) -> Result<Verification> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no forecast-observation pairs to verify".into()));
    }
    for p in pairs {
        let ts: Vec<f64> = p.threshold_probs.iter().map(|o| o.threshold).collect();
        if ts != thresholds {
            return Err(Error::data(format!(
                "pair ({}, {}) was scored at thresholds {ts:?}, expected {thresholds:?}",
                p.day, p.site
            )));
        }
    }
    let nt = thresholds.len();
    let mut by_day: BTreeMap<NaiveDate, Vec<&ScoredPair>> = BTreeMap::new();
    for p in pairs {
        by_day.entry(p.day).or_default().push(p);
    }
    let days: Vec<DayTotals> = by_day
        .values()
        .map(|v| day_totals(v, nt))
        .collect::<Result<_>>()?;
    let full = aggregate(&days, 0..days.len(), nt);

    let replicates: Vec<Replicate> = if days.len() >= 2 {
        resample_days(days.len(), config.replicates, config.seed)
            .into_par_iter()
            .map(|idx| aggregate(&days, idx.into_iter(), nt))
            .collect()
    } else {
        log::warn!("only one verification day; bootstrap intervals are omitted");
        Vec::new()
    };

    let daily_crps_model: Vec<f64> = days.iter().map(|d| d.crps_model).collect();
    let daily_crps_reference: Vec<f64> = days.iter().map(|d| d.crps_reference).collect();
    let crps = summarize_scores(
        full.crps_model,
        full.crps_reference,
        full.n,
        &replicates,
        |r| (r.crps_model, r.crps_reference),
        &daily_crps_model,
        &daily_crps_reference,
        config.level,
    )?;

    let mut summaries = Vec::with_capacity(nt);
    let mut model_diagrams = Vec::with_capacity(nt);
    let mut reference_diagrams = Vec::with_capacity(nt);
    for (j, &t) in thresholds.iter().enumerate() {
        let daily_model: Vec<f64> = days.iter().map(|d| d.brier_model[j]).collect();
        let daily_reference: Vec<f64> = days.iter().map(|d| d.brier_reference[j]).collect();
        let brier = summarize_scores(
            full.brier_model[j],
            full.brier_reference[j],
            full.n,
            &replicates,
            |r| (r.brier_model[j], r.brier_reference[j]),
            &daily_model,
            &daily_reference,
            config.level,
        )?;
        if brier.skill.is_none() {
            log::warn!("Brier skill at threshold {t} is undefined: reference score is zero");
        }
        let rep_model: Vec<&[BinTally; N_BINS]> = replicates.iter().map(|r| &r.bins_model[j]).collect();
        let rep_reference: Vec<&[BinTally; N_BINS]> = replicates.iter().map(|r| &r.bins_reference[j]).collect();
        let md = diagram_with_ci(&full.bins_model[j], &rep_model, config.level)?;
        let rd = diagram_with_ci(&full.bins_reference[j], &rep_reference, config.level)?;
        let events: f64 = full.bins_model[j].iter().map(|b| b.sum_obs).sum();
        summaries.push(ThresholdSummary {
            threshold: t,
            base_rate: events / full.n as f64,
            brier,
            model_decomposition: decomposition_summary(&md),
            reference_decomposition: decomposition_summary(&rd),
        });
        model_diagrams.push(md);
        reference_diagrams.push(rd);
    }

    Ok(Verification {
        report: VerificationReport {
            n_pairs: full.n,
            n_days: days.len(),
            reference: reference_label.to_string(),
            bootstrap: *config,
            crps,
            thresholds: summaries,
        },
        model_diagrams,
        reference_diagrams,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::quadrature::integrate;
    use rand_distr::{Distribution, Uniform};

    fn empirical_crps_integral(members: &[f64], y: f64) -> f64 {
        let mut pts: Vec<f64> = members.to_vec();
        pts.push(y);
        pts.sort_by(f64::total_cmp);
        let k = members.len() as f64;
        // integrand is piecewise constant between sorted points
        pts.windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let f = members.iter().filter(|v| **v <= mid).count() as f64 / k;
                let step = if mid >= y { 1.0 } else { 0.0 };
                (f - step).powi(2) * (w[1] - w[0])
            })
            .sum()
    }

    #[test]
    fn ensemble_crps_examples() {
        assert_eq!(crps_ensemble(&[0.0, 2.0], 1.0).unwrap(), 0.5);
        assert_eq!(crps_ensemble(&[3.0], 1.25).unwrap(), 1.75);
        assert!((crps_ensemble(&[2.5; 6], 1.0).unwrap() - 1.5).abs() < 1e-15);
        assert!(crps_ensemble(&[], 1.0).is_err());
    }

    #[test]
    fn ensemble_crps_matches_integral() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = Uniform::new(0.0, 10.0).unwrap();
        for k in 1..=10 {
            for _ in 0..20 {
                let members: Vec<f64> = (0..k).map(|_| u.sample(&mut rng)).collect();
                let y = u.sample(&mut rng);
                let a = crps_ensemble(&members, y).unwrap();
                assert!((a - empirical_crps_integral(&members, y)).abs() < 1e-10);
            }
        }
        // adaptive quadrature on a smooth stretch as a second check
        let members = [1.0, 4.0];
        let integrand = |t: f64| {
            let f = members.iter().filter(|v| **v <= t).count() as f64 / 2.0;
            let s = if t >= 2.0 { 1.0 } else { 0.0 };
            (f - s).powi(2)
        };
        let q = integrate(&integrand, 1.0, 2.0, 1e-12) + integrate(&integrand, 2.0, 4.0, 1e-12);
        assert!((crps_ensemble(&members, 2.0).unwrap() - q).abs() < 1e-10);
    }

    #[test]
    fn brier_and_skill_examples() {
        assert_eq!(brier_score(0.5, true).unwrap(), 0.25);
        assert_eq!(brier_score(1.0, true).unwrap(), 0.0);
        assert!((brier_score(0.3, false).unwrap() - 0.09).abs() < 1e-16);
        assert!(brier_score(1.2, true).is_err());
        assert_eq!(skill_score(0.7, 0.7).unwrap(), 0.0);
        assert_eq!(skill_score(0.0, 0.7).unwrap(), 1.0);
        assert!((skill_score(0.9, 1.0).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(skill_score(0.1, 0.0), Err(Error::UndefinedSkill(_))));
        assert_eq!(skill_score(0.45, 0.6).unwrap(), skill_score(4.5, 6.0).unwrap());
    }

    #[test]
    fn threshold_probabilities() {
        assert_eq!(ensemble_threshold_prob(&[3.0, 4.0], 2.0), 1.0);
        assert_eq!(ensemble_threshold_prob(&[0.0, 1.0], 2.0), 0.0);
        assert_eq!(ensemble_threshold_prob(&[0.0, 1.0, 3.0, 5.0], 2.0), 0.5);
        assert_eq!(ensemble_threshold_prob(&[2.0], 2.0), 0.0);
    }

    #[test]
    fn bin_boundaries() {
        assert_eq!(bin_index(0.0), 0);
        assert_eq!(bin_index(0.0499), 0);
        assert_eq!(bin_index(0.05), 1);
        assert_eq!(bin_index(0.10), 1);
        assert_eq!(bin_index(0.15), 2);
        assert_eq!(bin_index(0.95), 10);
        assert_eq!(bin_index(1.0), 10);
        for k in 0..N_BINS {
            let (lo, _) = bin_bounds(k);
            assert_eq!(bin_index(lo), k);
        }
    }

    #[test]
    fn all_zero_forecasts_fill_first_bin() {
        let d = reliability_diagram(&vec![(0.0, false); 40]).unwrap();
        assert_eq!(d.bins[0].count, 40);
        assert_eq!(d.bins[0].obs_freq, Some(0.0));
        assert_eq!(d.bins[0].mean_prob, Some(0.0));
        assert!(d.bins[1..].iter().all(|b| b.count == 0 && b.obs_freq.is_none()));
    }

    #[test]
    fn climatological_forecast_decomposition() {
        let pairs: Vec<(f64, bool)> = (0..20).map(|i| (0.25, i % 4 == 0)).collect();
        let d = reliability_diagram(&pairs).unwrap();
        assert!(d.decomposition.reliability.abs() < 1e-15);
        assert!(d.decomposition.resolution.abs() < 1e-15);
        assert!((mean_brier(&pairs).unwrap() - d.decomposition.uncertainty).abs() < 1e-15);
    }

    #[test]
    fn perfect_forecast_decomposition() {
        let pairs: Vec<(f64, bool)> = (0..30).map(|i| if i % 3 == 0 { (1.0, true) } else { (0.0, false) }).collect();
        let d = reliability_diagram(&pairs).unwrap();
        assert_eq!(d.decomposition.reliability, 0.0);
        assert!((d.decomposition.resolution - d.decomposition.uncertainty).abs() < 1e-15);
        assert_eq!(mean_brier(&pairs).unwrap(), 0.0);
    }

    #[test]
    fn bias_corrected_terms_preserve_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pairs: Vec<(f64, bool)> = (0..300)
            .map(|_| {
                let p: f64 = rng.random();
                (p, rng.random::<f64>() < p)
            })
            .collect();
        let d = reliability_diagram(&pairs).unwrap();
        let c = d.bias_corrected.unwrap();
        let a = d.decomposition;
        let classical = a.reliability - a.resolution + a.uncertainty;
        let corrected = c.reliability - c.resolution + c.uncertainty;
        assert!((classical - corrected).abs() < 1e-14);
        let n = 300.0;
        assert!((c.uncertainty - n / (n - 1.0) * a.uncertainty).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_examples() {
        let cfg = BootstrapConfig::default();
        let ci = block_bootstrap_ci(&[2.5; 12], &cfg).unwrap();
        assert_eq!((ci.low, ci.high), (2.5, 2.5));
        assert!(matches!(block_bootstrap_ci(&[1.0], &cfg), Err(Error::InsufficientData(_))));

        let values: Vec<f64> = (0..15).map(|i| (i as f64 * 0.37).sin()).collect();
        let full = BootstrapConfig { level: 100.0, ..cfg };
        let n = values.len() as f64;
        let stats: Vec<f64> = resample_days(values.len(), full.replicates, full.seed)
            .iter()
            .map(|idx| idx.iter().map(|&i| values[i]).sum::<f64>() / n)
            .collect();
        let ci = block_bootstrap_ci(&values, &full).unwrap();
        let min = stats.iter().copied().fold(f64::INFINITY, f64::min);
        let max = stats.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((ci.low, ci.high), (min, max));
    }

    #[test]
    fn bootstrap_is_reproducible() {
        let values: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let cfg = BootstrapConfig { seed: 99, ..Default::default() };
        assert_eq!(block_bootstrap_ci(&values, &cfg).unwrap(), block_bootstrap_ci(&values, &cfg).unwrap());
    }

    #[test]
    fn ttest_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(paired_ttest_daily(&a, &a).unwrap(), 1.0);
        let b: Vec<f64> = a.iter().map(|x| x + 0.5).collect();
        assert_eq!(paired_ttest_daily(&a, &b).unwrap(), 0.0);
        assert!(matches!(paired_ttest_daily(&a, &a[..3]), Err(Error::Data(_))));
        assert!(matches!(paired_ttest_daily(&a[..1], &a[..1]), Err(Error::InsufficientData(_))));
        // scipy.stats.ttest_rel
        let p = paired_ttest_daily(&[1.0, 0.0, 2.0], &[0.0, 1.0, 0.0]).unwrap();
        assert!((p - 0.5285954792089683).abs() < 1e-12, "{p}");
    }

    #[test]
    fn verify_model_equal_to_reference_has_zero_skill() {
        let params = CensoredGevParams::new(2.0, 1.0, 0.1).unwrap();
        let thresholds = [0.0, 5.0];
        let pairs: Vec<ScoredPair> = (0..40)
            .map(|i| {
                let day = NaiveDate::from_ymd_opt(2011, 5, 1 + i / 4).unwrap();
                score_pair(day, Arc::from(format!("s{}", i % 4)), &params, Reference::Parametric(&params), (i % 7) as f64, &thresholds)
                    .unwrap()
            })
            .collect();
        let v = verify(&pairs, &thresholds, "model", &BootstrapConfig { replicates: 50, ..Default::default() }).unwrap();
        assert_eq!(v.report.crps.skill, Some(0.0));
        assert_eq!(v.report.crps.p_value_two_sided, Some(1.0));
        for t in &v.report.thresholds {
            assert_eq!(t.brier.skill, Some(0.0));
        }
        assert_eq!(v.report.n_days, 10);
        assert_eq!(v.model_diagrams[0].bins.iter().map(|b| b.count).sum::<usize>(), 40);
    }
}
