//! Adjusted Rand Index and the clustering benchmark harness.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::clustering::{compute_matrix, cut, hierarchical_cluster, Linkage, Measure, MeasureConfig};
use crate::distances::{cepstrum_distance, d_dtw_exact, d_euclidean, lb_keogh, system_cepstrum, DtwConfig};
use crate::error::{Error, Result};
use crate::lti::{paper_circuits, Discretization, DEFAULT_CIRCUIT_DT, DEFAULT_HINF_GRID};
use crate::par::Execution;
use crate::rng::derive_seed;
use crate::signal::{build_dataset, GeneratorConfig, IOPair, InputCounts};
use crate::spectral::{power_cepstrum, WelchConfig, DEFAULT_SEGMENT_CAP};

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Hubert-Arabie ARI from the contingency table. When the chance-corrected
/// denominator vanishes the score is 1 for identical partitions (up to
/// relabelling) and 0 otherwise.
pub fn adjusted_rand_index(p1: &[usize], p2: &[usize]) -> Result<f64> {
    if p1.len() != p2.len() {
        return Err(Error::Parameter(format!(
            "partitions have different lengths: {} vs {}",
            p1.len(),
            p2.len()
        )));
    }
    let n = p1.len();
    if n < 2 {
        return Err(Error::Parameter("ARI needs at least 2 items".into()));
    }
    let k1 = p1.iter().max().map_or(0, |m| m + 1);
    let k2 = p2.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0usize; k1 * k2];
    let mut rows = vec![0usize; k1];
    let mut cols = vec![0usize; k2];
    for (&a, &b) in p1.iter().zip(p2) {
        table[a * k2 + b] += 1;
        rows[a] += 1;
        cols[b] += 1;
    }
    let index: f64 = table.iter().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.iter().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(n);
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        let nonempty = |v: &[usize]| v.iter().filter(|&&c| c > 0).count();
        let same = table.iter().filter(|&&c| c > 0).count();
        let identical = same == nonempty(&rows) && same == nonempty(&cols);
        return Ok(if identical { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub series_lengths: Vec<usize>,
    pub repetitions: usize,
    pub generator: GeneratorConfig,
    pub measures: Vec<Measure>,
    /// Fixed Welch settings; `None` uses the default segment per length.
    pub welch: Option<WelchConfig>,
    pub welch_segment_cap: usize,
    pub dtw: DtwConfig,
    pub linkage: Linkage,
    pub sample_period: f64,
    pub discretization: Discretization,
    pub hinf_grid: usize,
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// 40 pairs (10 LTI, 5 multisine, 5 noise inputs per circuit), lengths 2^8..2^12, 10 repetitions.
    pub fn desk() -> Self {
        Self {
            series_lengths: vec![1 << 8, 1 << 10, 1 << 12],
            repetitions: 10,
            generator: GeneratorConfig::new(InputCounts::new(10, 5, 5)),
            measures: vec![
                Measure::Euclidean,
                Measure::KeoghLb,
                Measure::Cepstral,
                Measure::ExtendedCepstral,
                Measure::H2,
                Measure::Hinf,
            ],
            welch: None,
            welch_segment_cap: DEFAULT_SEGMENT_CAP,
            dtw: DtwConfig::default(),
            linkage: Linkage::Average,
            sample_period: DEFAULT_CIRCUIT_DT,
            discretization: Discretization::Bilinear,
            hinf_grid: DEFAULT_HINF_GRID,
            master_seed: 2024,
        }
    }

    /// 400 pairs, lengths 2^6..2^16, 100 repetitions.
    pub fn paper() -> Self {
        Self {
            series_lengths: (6..=16).map(|p| 1usize << p).collect(),
            repetitions: 100,
            generator: GeneratorConfig::new(InputCounts::new(100, 50, 50)),
            ..Self::desk()
        }
    }

    /// White-noise inputs only, 20 per system, length 2^10.
    pub fn white_noise() -> Self {
        Self {
            series_lengths: vec![1 << 10],
            generator: GeneratorConfig::new(InputCounts::new(0, 0, 20)),
            ..Self::desk()
        }
    }

    pub fn welch_for(&self, length: usize) -> WelchConfig {
        self.welch
            .unwrap_or_else(|| WelchConfig::for_length_capped(length, self.welch_segment_cap))
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.series_lengths.is_empty() || self.measures.is_empty() {
            return Err(Error::Config("need at least one length and one measure".into()));
        }
        if self.generator.counts.total() == 0 {
            return Err(Error::Config("input counts are all zero".into()));
        }
        self.dtw.validate()?;
        for &n in &self.series_lengths {
            if !n.is_power_of_two() {
                return Err(Error::Config(format!("length {n} is not a power of two")));
            }
            let welch = self.welch_for(n);
            welch.validate()?;
            if n < 2 * welch.segment_length {
                return Err(Error::Config(format!(
                    "length {n} is shorter than twice the Welch segment {}",
                    welch.segment_length
                )));
            }
        }
        Ok(())
    }

    /// Seed for the dataset of one repetition at one length.
    pub fn dataset_seed(&self, repetition: usize, length: usize) -> u64 {
        derive_seed(self.master_seed, &[repetition as u64, length as u64])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repetition: usize,
    pub ari: Option<f64>,
    pub seconds: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub measure: Measure,
    pub length: usize,
    pub label: String,
    pub ari_mean: Option<f64>,
    pub ari_std: Option<f64>,
    pub seconds_mean: Option<f64>,
    pub seconds_std: Option<f64>,
    pub failures: usize,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub crate_version: String,
    pub unix_timestamp: u64,
    pub timing_scope: String,
    pub model_norm_note: String,
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub cells: Vec<CellSummary>,
    pub metadata: ReportMetadata,
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

fn column_label(measure: Measure) -> String {
    if measure.uses_known_models() {
        format!("{measure} model-norm (known models)")
    } else {
        measure.to_string()
    }
}

impl ExperimentReport {
    pub fn cell(&self, measure: Measure, length: usize) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.measure == measure && c.length == length)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `measure,length,repetition,ari,seconds`, one row per run.
    pub fn to_long_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["measure", "length", "repetition", "ari", "seconds"])?;
        for cell in &self.cells {
            for run in &cell.runs {
                let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                w.write_record([
                    cell.measure.to_string(),
                    cell.length.to_string(),
                    run.repetition.to_string(),
                    opt(run.ari),
                    opt(run.seconds),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn run_cell(
    cfg: &ExperimentConfig,
    measure: Measure,
    dataset: &crate::signal::LabeledDataset,
    length: usize,
    k: usize,
    exec: Execution,
) -> Result<(f64, f64)> {
    let mcfg = MeasureConfig {
        welch: Some(cfg.welch_for(length)),
        dtw: cfg.dtw,
        hinf_grid: cfg.hinf_grid,
    };
    let start = Instant::now();
    let matrix = compute_matrix(measure, dataset, &mcfg, exec)?;
    let partition = cut(&hierarchical_cluster(&matrix, cfg.linkage), k)?;
    let seconds = start.elapsed().as_secs_f64();
    let ari = adjusted_rand_index(partition.labels(), dataset.labels())?;
    Ok((ari, seconds))
}

/// Runs every (measure, length, repetition) cell on the two circuits.
/// Timings cover matrix construction and clustering, not data generation.
/// Repetitions run one after another so timings are not contended; the
/// distance matrix itself uses `exec`.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<ExperimentReport> {
    cfg.validate()?;
    let systems = paper_circuits(cfg.sample_period, cfg.discretization)?;
    let mut runs: Vec<Vec<Vec<RunRecord>>> =
        vec![vec![Vec::new(); cfg.series_lengths.len()]; cfg.measures.len()];
    for rep in 0..cfg.repetitions {
        for (li, &length) in cfg.series_lengths.iter().enumerate() {
            let dataset = build_dataset(length, &cfg.generator, &systems, cfg.dataset_seed(rep, length));
            for (mi, &measure) in cfg.measures.iter().enumerate() {
                let record = match dataset
                    .as_ref()
                    .map_err(|e| Error::Config(e.to_string()))
                    .and_then(|ds| run_cell(cfg, measure, ds, length, systems.len(), exec))
                {
                    Ok((ari, seconds)) => RunRecord {
                        repetition: rep,
                        ari: Some(ari),
                        seconds: Some(seconds),
                        error: None,
                    },
                    Err(e) => RunRecord {
                        repetition: rep,
                        ari: None,
                        seconds: None,
                        error: Some(e.to_string()),
                    },
                };
                runs[mi][li].push(record);
            }
        }
    }
    let mut cells = Vec::new();
    for (mi, &measure) in cfg.measures.iter().enumerate() {
        for (li, &length) in cfg.series_lengths.iter().enumerate() {
            let records = std::mem::take(&mut runs[mi][li]);
            let aris: Vec<f64> = records.iter().filter_map(|r| r.ari).collect();
            let secs: Vec<f64> = records.iter().filter_map(|r| r.seconds).collect();
            let ari = mean_std(&aris);
            let sec = mean_std(&secs);
            cells.push(CellSummary {
                measure,
                length,
                label: column_label(measure),
                ari_mean: ari.map(|v| v.0),
                ari_std: ari.map(|v| v.1),
                seconds_mean: sec.map(|v| v.0),
                seconds_std: sec.map(|v| v.1),
                failures: records.iter().filter(|r| r.error.is_some()).count(),
                runs: records,
            });
        }
    }
    let unix_timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(ExperimentReport {
        config: cfg.clone(),
        cells,
        metadata: ReportMetadata {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            unix_timestamp,
            timing_scope: "distance matrix construction (including PSD and cepstrum work) plus \
                           clustering; dataset generation excluded"
                .into(),
            model_norm_note: "h2 and hinf columns use the ground-truth circuit models \
                              (model-norm (known models)); no system identification"
                .into(),
            execution: exec,
        },
    })
}

/// Consecutive ratios `t[i+1] / t[i]`.
pub fn doubling_ratios(timings: &[f64]) -> Vec<f64> {
    timings.windows(2).map(|w| w[1] / w[0]).collect()
}

/// Mean-time ratios between consecutive doubling lengths for one measure.
pub fn timing_scaling_check(report: &ExperimentReport, measure: Measure) -> Result<Vec<f64>> {
    let mut cells: Vec<&CellSummary> = report.cells.iter().filter(|c| c.measure == measure).collect();
    cells.sort_by_key(|c| c.length);
    if cells.len() < 3 {
        return Err(Error::Parameter(format!(
            "need at least 3 lengths for {measure}, found {}",
            cells.len()
        )));
    }
    if let Some(w) = cells.windows(2).find(|w| w[1].length != 2 * w[0].length) {
        return Err(Error::Parameter(format!(
            "lengths {} and {} are not a doubling",
            w[0].length, w[1].length
        )));
    }
    let times = cells
        .iter()
        .map(|c| {
            c.seconds_mean.ok_or_else(|| {
                Error::Parameter(format!("no timing for {measure} at length {}", c.length))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(doubling_ratios(&times))
}

/// Best-of-`batches` wall-clock seconds for one distance between two pairs,
/// each batch averaging `per_batch` evaluations. Cepstral measures include
/// the cepstrum computation.
pub fn time_single_distance(
    measure: Measure,
    p1: &IOPair,
    p2: &IOPair,
    welch: &WelchConfig,
    dtw: &DtwConfig,
    batches: usize,
    per_batch: usize,
) -> Result<f64> {
    let eval = || -> Result<f64> {
        match measure {
            Measure::Euclidean => d_euclidean(p1.output(), p2.output()),
            Measure::Dtw => d_dtw_exact(p1.output(), p2.output(), dtw),
            Measure::KeoghLb => lb_keogh(p1.output(), p2.output(), dtw),
            Measure::Cepstral => cepstrum_distance(
                &power_cepstrum(p1.output(), welch)?,
                &power_cepstrum(p2.output(), welch)?,
            ),
            Measure::ExtendedCepstral => {
                cepstrum_distance(&system_cepstrum(p1, welch)?, &system_cepstrum(p2, welch)?)
            }
            Measure::H2 | Measure::Hinf => Err(Error::Parameter(format!(
                "{measure} does not operate on series"
            ))),
        }
    };
    std::hint::black_box(eval()?);
    let mut best = f64::INFINITY;
    for _ in 0..batches.max(1) {
        let start = Instant::now();
        for _ in 0..per_batch.max(1) {
            std::hint::black_box(eval()?);
        }
        best = best.min(start.elapsed().as_secs_f64() / per_batch.max(1) as f64);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    /// Pair-counting Rand index adjusted with the permutation-model expectation,
    /// computed by enumerating all item pairs.
    fn ari_by_pairs(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let (mut both, mut only_a, mut only_b, mut total) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let sa = a[i] == a[j];
                let sb = b[i] == b[j];
                total += 1.0;
                if sa && sb {
                    both += 1.0;
                }
                if sa {
                    only_a += 1.0;
                }
                if sb {
                    only_b += 1.0;
                }
            }
        }
        let expected = only_a * only_b / total;
        (both - expected) / (0.5 * (only_a + only_b) - expected)
    }

    #[test]
    fn ari_hand_cases() {
        assert_eq!(adjusted_rand_index(&[0, 1, 1, 2], &[0, 1, 1, 2]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        let v = adjusted_rand_index(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 2, 2]).unwrap();
        assert!((v - 0.8 / 3.3).abs() < 1e-12);
        assert!((v - 0.2424).abs() < 1e-4);
        assert!(adjusted_rand_index(&[0, 1], &[0, 1, 1]).is_err());
    }

    #[test]
    fn ari_degenerate_cases() {
        assert_eq!(adjusted_rand_index(&[0, 0, 0], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 1, 2], &[2, 0, 1]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 0], &[0, 1, 2]).unwrap(), 0.0);
    }

    #[test]
    fn ari_of_random_partitions_averages_near_zero() {
        let mut rng = rng_from_seed(17);
        let truth: Vec<usize> = (0..40).map(|i| i / 20).collect();
        let total: f64 = (0..1000)
            .map(|_| {
                let guess: Vec<usize> = (0..40).map(|_| rng.random_range(0..2)).collect();
                adjusted_rand_index(&truth, &guess).unwrap()
            })
            .sum();
        assert!((total / 1000.0).abs() <= 0.05);
    }

    #[test]
    fn ratios_and_std() {
        assert_eq!(doubling_ratios(&[1.0, 2.0, 4.0]), vec![2.0, 2.0]);
        let (m, s) = mean_std(&[1.0, 0.0]).unwrap();
        assert_eq!(m, 0.5);
        assert!((s - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[0.3]).unwrap(), (0.3, 0.0));
    }

    #[test]
    fn presets_are_valid() {
        ExperimentConfig::desk().validate().unwrap();
        ExperimentConfig::paper().validate().unwrap();
        ExperimentConfig::white_noise().validate().unwrap();
        let bad = ExperimentConfig {
            series_lengths: vec![16],
            welch: Some(WelchConfig::with_segment(256)),
            ..ExperimentConfig::desk()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            series_lengths: vec![256, 512, 1024],
            repetitions: 2,
            generator: GeneratorConfig::new(InputCounts::new(2, 1, 1)),
            measures: vec![Measure::Euclidean, Measure::ExtendedCepstral, Measure::H2],
            ..ExperimentConfig::desk()
        }
    }

    #[test]
    fn small_experiment_is_deterministic_and_complete() {
        let cfg = small_config();
        let a = run_experiment(&cfg, Execution::Parallel).unwrap();
        let b = run_experiment(&cfg, Execution::Sequential).unwrap();
        assert_eq!(a.cells.len(), 9);
        for (x, y) in a.cells.iter().zip(&b.cells) {
            let ax: Vec<_> = x.runs.iter().map(|r| r.ari).collect();
            let by: Vec<_> = y.runs.iter().map(|r| r.ari).collect();
            assert_eq!(ax, by);
            assert_eq!(x.failures, 0);
        }
        let h2 = a.cell(Measure::H2, 512).unwrap();
        assert_eq!(h2.ari_mean, Some(1.0));
        assert!(h2.label.contains("model-norm (known models)"));
        let ratios = timing_scaling_check(&a, Measure::ExtendedCepstral).unwrap();
        assert_eq!(ratios.len(), 2);
        let csv = a.to_long_csv().unwrap();
        assert!(csv.starts_with("measure,length,repetition,ari,seconds\n"));
        assert_eq!(csv.lines().count(), 1 + 9 * 2);
        let back: ExperimentReport = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        assert_eq!(back.cells.len(), 9);
    }

    #[test]
    fn scaling_check_needs_three_doublings() {
        let cfg = ExperimentConfig {
            series_lengths: vec![256, 1024],
            repetitions: 1,
            generator: GeneratorConfig::new(InputCounts::new(0, 0, 2)),
            measures: vec![Measure::Euclidean],
            ..ExperimentConfig::desk()
        };
        let r = run_experiment(&cfg, Execution::Sequential).unwrap();
        assert!(matches!(timing_scaling_check(&r, Measure::Euclidean), Err(Error::Parameter(_))));
    }

    proptest! {
        #[test]
        fn ari_is_symmetric_and_bounded(a in proptest::collection::vec(0usize..4, 2..40), seed in any::<u64>()) {
            let mut rng = rng_from_seed(seed);
            let b: Vec<usize> = a.iter().map(|_| rng.random_range(0..3)).collect();
            let ab = adjusted_rand_index(&a, &b).unwrap();
            let ba = adjusted_rand_index(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab <= 1.0 + 1e-12);
            let perm: Vec<usize> = a.iter().map(|&l| 3 - l).collect();
            prop_assert_eq!(adjusted_rand_index(&a, &perm).unwrap(), 1.0);
            let denom_ok = {
                let r = ari_by_pairs(&a, &b);
                r.is_finite()
            };
            if denom_ok {
                prop_assert!((ab - ari_by_pairs(&a, &b)).abs() < 1e-9);
            }
        }
    }
}
