//! Pairwise distance matrices and agglomerative hierarchical clustering.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distances::{
    cepstrum_distance, dtw_banded, euclidean, system_cepstrum, DtwConfig, KeoghFeature,
};
use crate::error::{Error, Result};
use crate::lti::{model_distance, ModelNorm, StateSpace, DEFAULT_HINF_GRID};
use crate::lti::{h2_norm, hinf_norm, parallel_difference};
use crate::par::{map_indexed, Execution};
use crate::signal::LabeledDataset;
use crate::spectral::{power_cepstrum, Cepstrum, WelchConfig};

/// Symmetric, zero-diagonal, finite, nonnegative `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::InvalidMatrix(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        Self::from_flat(n, rows.into_iter().flatten().collect())
    }

    /// Row-major entries.
    pub fn from_flat(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "{} entries for a {n}x{n} matrix",
                data.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = data[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i}, {j}) = {v} is not a finite nonnegative number"
                    )));
                }
                if i == j && v != 0.0 {
                    return Err(Error::InvalidMatrix(format!("diagonal entry {i} is {v}")));
                }
                if v != data[j * n + i] {
                    return Err(Error::InvalidMatrix(format!(
                        "entries ({i}, {j}) and ({j}, {i}) differ"
                    )));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_flat(self.n, self.data.iter().map(|v| v * factor).collect())
    }
}

/// A distance over dataset items with a per-item feature computed once.
pub trait PairMetric: Sync {
    type Feature: Send + Sync;

    fn prepare(&self, dataset: &LabeledDataset, index: usize) -> Result<Self::Feature>;

    fn distance(&self, a: &Self::Feature, b: &Self::Feature) -> Result<f64>;
}

/// Prepares every item once, evaluates each unordered pair once and mirrors
/// the result. Errors report the lowest failing index or `(i, j)` pair.
pub fn pairwise_matrix<M: PairMetric>(
    dataset: &LabeledDataset,
    metric: &M,
    exec: Execution,
) -> Result<DistanceMatrix> {
    let n = dataset.len();
    let features = map_indexed(exec, n, |i| metric.prepare(dataset, i))
        .into_iter()
        .enumerate()
        .map(|(index, f)| {
            f.map_err(|e| Error::Prepare {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = map_indexed(exec, n, |i| {
        ((i + 1)..n)
            .map(|j| {
                metric
                    .distance(&features[i], &features[j])
                    .and_then(|d| {
                        if d.is_finite() && d >= 0.0 {
                            Ok(d)
                        } else {
                            Err(Error::InvalidMatrix(format!("measure returned {d}")))
                        }
                    })
                    .map_err(|e| Error::Pair {
                        i,
                        j,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<f64>>>()
    });
    let mut data = vec![0.0; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        for (offset, d) in row?.into_iter().enumerate() {
            let j = i + 1 + offset;
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, data })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    Euclidean,
    Dtw,
    KeoghLb,
    Cepstral,
    ExtendedCepstral,
    H2,
    Hinf,
}

impl Measure {
    pub const ALL: [Measure; 7] = [
        Measure::Euclidean,
        Measure::Dtw,
        Measure::KeoghLb,
        Measure::Cepstral,
        Measure::ExtendedCepstral,
        Measure::H2,
        Measure::Hinf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Euclidean => "euclidean",
            Measure::Dtw => "dtw",
            Measure::KeoghLb => "keogh-lb",
            Measure::Cepstral => "cepstral",
            Measure::ExtendedCepstral => "extended-cepstral",
            Measure::H2 => "h2",
            Measure::Hinf => "hinf",
        }
    }

    /// Model norms need the generating systems rather than the series.
    pub fn uses_known_models(self) -> bool {
        matches!(self, Measure::H2 | Measure::Hinf)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::Parameter(format!(
                    "unknown measure '{s}', expected one of: {}",
                    Measure::ALL.map(|m| m.name()).join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    /// `None` picks the default segment for the shortest series in the dataset.
    pub welch: Option<WelchConfig>,
    pub dtw: DtwConfig,
    pub hinf_grid: usize,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            welch: None,
            dtw: DtwConfig::default(),
            hinf_grid: DEFAULT_HINF_GRID,
        }
    }
}

impl MeasureConfig {
    pub fn welch_for(&self, dataset: &LabeledDataset) -> WelchConfig {
        self.welch.unwrap_or_else(|| {
            let shortest = dataset.pairs().iter().map(|p| p.len()).min().unwrap_or(0);
            WelchConfig::for_length(shortest)
        })
    }
}

pub struct EuclideanMetric;

impl PairMetric for EuclideanMetric {
    type Feature = Vec<f64>;

    fn prepare(&self, ds: &LabeledDataset, index: usize) -> Result<Vec<f64>> {
        Ok(ds.pairs()[index].output().values().to_vec())
    }

    fn distance(&self, a: &Vec<f64>, b: &Vec<f64>) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::IncompatibleLength {
                left: a.len(),
                right: b.len(),
            });
        }
        Ok(euclidean(a, b))
    }
}

pub struct DtwMetric(pub DtwConfig);

impl PairMetric for DtwMetric {
    type Feature = Vec<f64>;

    fn prepare(&self, ds: &LabeledDataset, index: usize) -> Result<Vec<f64>> {
        self.0.validate()?;
        Ok(ds.pairs()[index].output().values().to_vec())
    }

    fn distance(&self, a: &Vec<f64>, b: &Vec<f64>) -> Result<f64> {
        dtw_banded(a, b, self.0.radius(a.len(), b.len()))
    }
}

pub struct KeoghMetric(pub DtwConfig);

impl PairMetric for KeoghMetric {
    type Feature = KeoghFeature;

    fn prepare(&self, ds: &LabeledDataset, index: usize) -> Result<KeoghFeature> {
        KeoghFeature::new(ds.pairs()[index].output(), &self.0)
    }

    fn distance(&self, a: &KeoghFeature, b: &KeoghFeature) -> Result<f64> {
        a.bound(b)
    }
}

/// Output cepstra only.
pub struct CepstralMetric(pub WelchConfig);

impl PairMetric for CepstralMetric {
    type Feature = Cepstrum;

    fn prepare(&self, ds: &LabeledDataset, index: usize) -> Result<Cepstrum> {
        power_cepstrum(ds.pairs()[index].output(), &self.0)
    }

    fn distance(&self, a: &Cepstrum, b: &Cepstrum) -> Result<f64> {
        cepstrum_distance(a, b)
    }
}

/// Output minus input cepstra.
pub struct ExtendedCepstralMetric(pub WelchConfig);

impl PairMetric for ExtendedCepstralMetric {
    type Feature = Cepstrum;

    fn prepare(&self, ds: &LabeledDataset, index: usize) -> Result<Cepstrum> {
        system_cepstrum(&ds.pairs()[index], &self.0)
    }

    fn distance(&self, a: &Cepstrum, b: &Cepstrum) -> Result<f64> {
        cepstrum_distance(a, b)
    }
}

/// Norm of the difference between the ground-truth systems behind two items.
/// Each system pair is evaluated once up front.
pub struct ModelNormMetric {
    systems: usize,
    table: Vec<f64>,
}

impl ModelNormMetric {
    pub fn new(systems: &[StateSpace], norm: ModelNorm, hinf_grid: usize) -> Result<Self> {
        let k = systems.len();
        let mut table = vec![0.0; k * k];
        for i in 0..k {
            for j in (i + 1)..k {
                let d = match norm {
                    ModelNorm::H2 => model_distance(&systems[i], &systems[j], ModelNorm::H2)?,
                    ModelNorm::Hinf => {
                        hinf_norm(&parallel_difference(&systems[i], &systems[j])?, hinf_grid)?
                    }
                };
                table[i * k + j] = d;
                table[j * k + i] = d;
            }
        }
        // Norms of the systems themselves must exist even when k == 1
        for ss in systems {
            match norm {
                ModelNorm::H2 => h2_norm(ss)?,
                ModelNorm::Hinf => hinf_norm(ss, hinf_grid)?,
            };
        }
        Ok(Self { systems: k, table })
    }
}

impl PairMetric for ModelNormMetric {
    type Feature = usize;

    fn prepare(&self, ds: &LabeledDataset, index: usize) -> Result<usize> {
        let label = ds.labels()[index];
        if label >= self.systems {
            return Err(Error::Parameter(format!("no known model for label {label}")));
        }
        Ok(label)
    }

    fn distance(&self, a: &usize, b: &usize) -> Result<f64> {
        Ok(self.table[a * self.systems + b])
    }
}

/// Distance matrix for a named measure.
pub fn compute_matrix(
    measure: Measure,
    dataset: &LabeledDataset,
    cfg: &MeasureConfig,
    exec: Execution,
) -> Result<DistanceMatrix> {
    let model_metric = |norm| {
        if dataset.systems().is_empty() {
            return Err(Error::Parameter(format!(
                "measure {measure} needs the generating models"
            )));
        }
        ModelNormMetric::new(dataset.systems(), norm, cfg.hinf_grid)
    };
    match measure {
        Measure::Euclidean => pairwise_matrix(dataset, &EuclideanMetric, exec),
        Measure::Dtw => pairwise_matrix(dataset, &DtwMetric(cfg.dtw), exec),
        Measure::KeoghLb => pairwise_matrix(dataset, &KeoghMetric(cfg.dtw), exec),
        Measure::Cepstral => pairwise_matrix(dataset, &CepstralMetric(cfg.welch_for(dataset)), exec),
        Measure::ExtendedCepstral => pairwise_matrix(
            dataset,
            &ExtendedCepstralMetric(cfg.welch_for(dataset)),
            exec,
        ),
        Measure::H2 => pairwise_matrix(dataset, &model_metric(ModelNorm::H2)?, exec),
        Measure::Hinf => pairwise_matrix(dataset, &model_metric(ModelNorm::Hinf)?, exec),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Complete,
    Single,
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            "single" => Ok(Linkage::Single),
            _ => Err(Error::Parameter(format!(
                "unknown linkage '{s}', expected average, complete or single"
            ))),
        }
    }
}

/// One agglomeration step. Leaves are clusters `0..n`; step `s` creates cluster `n + s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

/// Lance-Williams agglomeration. Among equal heights the lowest `(i, j)`
/// slot pair merges first.
pub fn hierarchical_cluster(matrix: &DistanceMatrix, linkage: Linkage) -> Dendrogram {
    let n = matrix.len();
    let mut d = matrix.as_flat().to_vec();
    let mut active = vec![true; n];
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if active[j] && d[i * n + j] < best.2 {
                    best = (i, j, d[i * n + j]);
                }
            }
        }
        let (i, j, height) = best;
        let (ni, nj) = (sizes[i] as f64, sizes[j] as f64);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let (dik, djk) = (d[i * n + k], d[j * n + k]);
            let v = match linkage {
                Linkage::Average => (ni * dik + nj * djk) / (ni + nj),
                Linkage::Complete => dik.max(djk),
                Linkage::Single => dik.min(djk),
            };
            d[i * n + k] = v;
            d[k * n + i] = v;
        }
        active[j] = false;
        merges.push(Merge {
            a: ids[i].min(ids[j]),
            b: ids[i].max(ids[j]),
            height,
            size: sizes[i] + sizes[j],
        });
        sizes[i] += sizes[j];
        ids[i] = n + step;
    }
    Dendrogram { n, merges }
}

/// Cluster labels in `0..k`, every label used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; k];
        labels.iter().for_each(|&l| seen[l] = true);
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Parameter(format!("label {missing} is unused")));
        }
        Ok(Self { labels, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Replays the first `n - k` merges; labels follow the smallest member index.
pub fn cut(dendrogram: &Dendrogram, k: usize) -> Result<Partition> {
    let n = dendrogram.n;
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k must lie in 1..={n}, got {k}")));
    }
    if dendrogram.merges.len() + 1 != n {
        return Err(Error::Parameter(format!(
            "dendrogram over {n} points has {} merges",
            dendrogram.merges.len()
        )));
    }
    let mut parent: Vec<usize> = (0..n).collect();
    // a leaf standing in for every cluster id
    let mut rep: Vec<usize> = (0..n).collect();
    for m in &dendrogram.merges[..n - k] {
        let (ra, rb) = (find(&mut parent, rep[m.a]), find(&mut parent, rep[m.b]));
        parent[ra.max(rb)] = ra.min(rb);
        rep.push(ra.min(rb));
    }
    let mut label_of_root = vec![usize::MAX; n];
    let mut next = 0;
    let labels = (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            label_of_root[r]
        })
        .collect();
    Partition::new(labels)
}
