//! Problem instances: labels, prior, per-model conditional tables, costs and
//! statewise tolerances, plus query plans and calibration from response logs.
//!
//! Labels and output symbols are strings in files and dense indices
//! everywhere else. Log-probability tables are computed once at construction
//! so the hot loops in the bound and enumeration code never call `ln`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;
use std::ops::Add;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Tolerance on row sums and on the prior sum.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Two conditional rows closer than this (max abs entry difference) are
/// treated as identical.
pub const ROW_DISTINCT_TOLERANCE: f64 = 1e-12;

/// Laplace pseudo-count used by [`calibrate`] when none is given.
pub const DEFAULT_SMOOTHING: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    LabelCount,
    ModelCount,
    DuplicateName,
    Dimension,
    AlphabetSize,
    PriorPositivity,
    PriorSum,
    ToleranceRange,
    StrictPositivity,
    RowSum,
    PositiveCost,
    PairwiseIdentifiability,
    UniverseCoverage,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::LabelCount => "label count",
            Rule::ModelCount => "model count",
            Rule::DuplicateName => "duplicate name",
            Rule::Dimension => "dimension",
            Rule::AlphabetSize => "alphabet size",
            Rule::PriorPositivity => "prior positivity",
            Rule::PriorSum => "prior sum",
            Rule::ToleranceRange => "tolerance range",
            Rule::StrictPositivity => "strict positivity",
            Rule::RowSum => "row sum",
            Rule::PositiveCost => "positive cost",
            Rule::PairwiseIdentifiability => "pairwise identifiability",
            Rule::UniverseCoverage => "universe coverage",
        }
    }
}

/// One failed instance invariant: which field, which rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: Rule,
    pub detail: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: Rule, detail: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ({})", self.field, self.rule.as_str(), self.detail)
    }
}

/// A queryable model: output alphabet, conditional table `p(x|y)` with one
/// row per label, and a per-query cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "ModelSpecRepr", into = "ModelSpecRepr")]
pub struct ModelSpec {
    name: String,
    cost: f64,
    alphabet: Vec<String>,
    conditional: Vec<Vec<f64>>,
    log_conditional: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ModelSpecRepr {
    name: String,
    cost: f64,
    alphabet: Vec<String>,
    conditional: Vec<Vec<f64>>,
}

impl From<ModelSpecRepr> for ModelSpec {
    fn from(r: ModelSpecRepr) -> Self {
        ModelSpec::new(r.name, r.alphabet, r.conditional, r.cost)
    }
}

impl From<ModelSpec> for ModelSpecRepr {
    fn from(m: ModelSpec) -> Self {
        ModelSpecRepr {
            name: m.name,
            cost: m.cost,
            alphabet: m.alphabet,
            conditional: m.conditional,
        }
    }
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, alphabet: Vec<String>, conditional: Vec<Vec<f64>>, cost: f64) -> Self {
        let log_conditional = conditional
            .iter()
            .map(|row| row.iter().map(|p| p.ln()).collect())
            .collect();
        Self {
            name: name.into(),
            cost,
            alphabet,
            conditional,
            log_conditional,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet.len()
    }

    /// `p(·|y)` for label index `y`.
    pub fn row(&self, y: usize) -> &[f64] {
        &self.conditional[y]
    }

    pub fn log_row(&self, y: usize) -> &[f64] {
        &self.log_conditional[y]
    }

    pub fn conditional(&self) -> &[Vec<f64>] {
        &self.conditional
    }

    pub fn symbol_index(&self, symbol: &str) -> Option<usize> {
        self.alphabet.iter().position(|s| s == symbol)
    }

    /// Whether the rows for `y` and `y2` differ by more than
    /// [`ROW_DISTINCT_TOLERANCE`].
    pub fn distinguishes(&self, y: usize, y2: usize) -> bool {
        self.conditional[y]
            .iter()
            .zip(&self.conditional[y2])
            .any(|(a, b)| (a - b).abs() > ROW_DISTINCT_TOLERANCE)
    }

    /// Largest `|log p(x|y) - log p(x|y')|` over symbols and label pairs.
    pub fn max_abs_log_ratio(&self) -> f64 {
        let l = self.log_conditional.len();
        let mut best = 0.0f64;
        for y in 0..l {
            for y2 in 0..l {
                if y == y2 {
                    continue;
                }
                for (a, b) in self.log_conditional[y].iter().zip(&self.log_conditional[y2]) {
                    best = best.max((a - b).abs());
                }
            }
        }
        best
    }

    /// KL divergence `D(p(·|y) || p(·|y2))`.
    pub fn kl(&self, y: usize, y2: usize) -> f64 {
        self.conditional[y]
            .iter()
            .zip(self.log_conditional[y].iter().zip(&self.log_conditional[y2]))
            .map(|(p, (lp, lq))| p * (lp - lq))
            .sum()
    }

    fn renormalized(&self) -> Self {
        let rows = self
            .conditional
            .iter()
            .map(|row| {
                let s: f64 = row.iter().sum();
                row.iter().map(|p| p / s).collect()
            })
            .collect();
        ModelSpec::new(self.name.clone(), self.alphabet.clone(), rows, self.cost)
    }
}

/// Full problem description. Immutable once built; share freely.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "InstanceRepr", into = "InstanceRepr")]
pub struct Instance {
    labels: Vec<String>,
    prior: Vec<f64>,
    tolerances: Vec<f64>,
    models: Vec<ModelSpec>,
    metadata: BTreeMap<String, serde_json::Value>,
    log_prior: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct InstanceRepr {
    #[serde(default = "schema_version")]
    schema_version: u32,
    labels: Vec<String>,
    prior: Vec<f64>,
    tolerances: Vec<f64>,
    models: Vec<ModelSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, serde_json::Value>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl From<InstanceRepr> for Instance {
    fn from(r: InstanceRepr) -> Self {
        Instance::new(r.labels, r.prior, r.tolerances, r.models).with_metadata(r.metadata)
    }
}

impl From<Instance> for InstanceRepr {
    fn from(i: Instance) -> Self {
        InstanceRepr {
            schema_version: SCHEMA_VERSION,
            labels: i.labels,
            prior: i.prior,
            tolerances: i.tolerances,
            models: i.models,
            metadata: i.metadata,
        }
    }
}

impl Instance {
    /// Builds an instance without checking it. Call [`Instance::validate`] or
    /// use [`Instance::validated`] before handing it to a solver.
    pub fn new(labels: Vec<String>, prior: Vec<f64>, tolerances: Vec<f64>, models: Vec<ModelSpec>) -> Self {
        let log_prior = prior.iter().map(|p| p.ln()).collect();
        Self {
            labels,
            prior,
            tolerances,
            models,
            metadata: BTreeMap::new(),
            log_prior,
        }
    }

    pub fn validated(
        labels: Vec<String>,
        prior: Vec<f64>,
        tolerances: Vec<f64>,
        models: Vec<ModelSpec>,
    ) -> Result<Self> {
        let inst = Self::new(labels, prior, tolerances, models);
        inst.ensure_valid()?;
        Ok(inst)
    }

    pub fn with_metadata(mut self, metadata: BTreeMap<String, serde_json::Value>) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn with_tolerances(&self, tolerances: Vec<f64>) -> Self {
        let mut out = self.clone();
        out.tolerances = tolerances;
        out
    }

    /// Same tolerance for every label.
    pub fn with_uniform_tolerance(&self, alpha: f64) -> Self {
        self.with_tolerances(vec![alpha; self.num_labels()])
    }

    /// Rescales every conditional row to sum to one. Only used when the
    /// caller asks for it explicitly; the default is to reject.
    pub fn renormalized(&self) -> Self {
        let models = self.models.iter().map(ModelSpec::renormalized).collect();
        Self::new(self.labels.clone(), self.prior.clone(), self.tolerances.clone(), models)
            .with_metadata(self.metadata.clone())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn log_prior(&self) -> &[f64] {
        &self.log_prior
    }

    pub fn tolerances(&self) -> &[f64] {
        &self.tolerances
    }

    pub fn models(&self) -> &[ModelSpec] {
        &self.models
    }

    pub fn model(&self, m: usize) -> &ModelSpec {
        &self.models[m]
    }

    pub fn metadata(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.metadata
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn num_models(&self) -> usize {
        self.models.len()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.models.iter().map(|m| m.cost).collect()
    }

    pub fn label_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownToken {
                kind: "label",
                token: label.to_string(),
            })
    }

    pub fn model_index(&self, name: &str) -> Result<usize> {
        self.models
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| Error::UnknownToken {
                kind: "model",
                token: name.to_string(),
            })
    }

    pub fn alpha_min(&self) -> f64 {
        self.tolerances.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn prior_min(&self) -> f64 {
        self.prior.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn prior_max(&self) -> f64 {
        self.prior.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn cost_min(&self) -> f64 {
        self.models.iter().map(|m| m.cost).fold(f64::INFINITY, f64::min)
    }

    pub fn cost_sum(&self) -> f64 {
        self.models.iter().map(|m| m.cost).sum()
    }

    /// Ordered pairs `(y, y')` with `y != y'`, lexicographic.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        ordered_pairs(self.num_labels())
    }

    /// Every instance and model invariant; empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let l = self.labels.len();
        if l < 2 {
            out.push(Violation::new(
                "labels",
                Rule::LabelCount,
                format!("need at least 2 labels, got {l}"),
            ));
        }
        if self.models.is_empty() {
            out.push(Violation::new("models", Rule::ModelCount, "need at least 1 model"));
        }
        let mut seen = BTreeSet::new();
        for name in &self.labels {
            if !seen.insert(name) {
                out.push(Violation::new(
                    "labels",
                    Rule::DuplicateName,
                    format!("label `{name}` repeated"),
                ));
            }
        }
        let mut seen = BTreeSet::new();
        for m in &self.models {
            if !seen.insert(&m.name) {
                out.push(Violation::new(
                    "models",
                    Rule::DuplicateName,
                    format!("model `{}` repeated", m.name),
                ));
            }
        }

        if self.prior.len() != l {
            out.push(Violation::new(
                "prior",
                Rule::Dimension,
                format!("expected {l} entries, got {}", self.prior.len()),
            ));
        } else {
            for (y, p) in self.prior.iter().enumerate() {
                if !(p.is_finite() && *p > 0.0) {
                    out.push(Violation::new(
                        format!("prior[{y}]"),
                        Rule::PriorPositivity,
                        format!("value {p}"),
                    ));
                }
            }
            let s: f64 = self.prior.iter().sum();
            if !((s - 1.0).abs() <= SUM_TOLERANCE) {
                out.push(Violation::new("prior", Rule::PriorSum, format!("sums to {s}")));
            }
        }

        if self.tolerances.len() != l {
            out.push(Violation::new(
                "tolerances",
                Rule::Dimension,
                format!("expected {l} entries, got {}", self.tolerances.len()),
            ));
        } else {
            for (y, a) in self.tolerances.iter().enumerate() {
                if !(*a > 0.0 && *a < 1.0) {
                    out.push(Violation::new(
                        format!("tolerances[{y}]"),
                        Rule::ToleranceRange,
                        format!("value {a} not in (0,1)"),
                    ));
                }
            }
        }

        let mut shapes_ok = true;
        for (mi, m) in self.models.iter().enumerate() {
            let field = format!("models[{mi}]");
            if !(m.cost.is_finite() && m.cost > 0.0) {
                out.push(Violation::new(
                    format!("{field}.cost"),
                    Rule::PositiveCost,
                    format!("value {}", m.cost),
                ));
            }
            if m.alphabet.len() < 2 {
                out.push(Violation::new(
                    format!("{field}.alphabet"),
                    Rule::AlphabetSize,
                    format!("need at least 2 symbols, got {}", m.alphabet.len()),
                ));
            }
            let mut seen = BTreeSet::new();
            for s in &m.alphabet {
                if !seen.insert(s) {
                    out.push(Violation::new(
                        format!("{field}.alphabet"),
                        Rule::DuplicateName,
                        format!("symbol `{s}` repeated"),
                    ));
                }
            }
            if m.conditional.len() != l {
                shapes_ok = false;
                out.push(Violation::new(
                    format!("{field}.conditional"),
                    Rule::Dimension,
                    format!("expected {l} rows, got {}", m.conditional.len()),
                ));
                continue;
            }
            for (y, row) in m.conditional.iter().enumerate() {
                if row.len() != m.alphabet.len() {
                    shapes_ok = false;
                    out.push(Violation::new(
                        format!("{field}.conditional[{y}]"),
                        Rule::Dimension,
                        format!("expected {} columns, got {}", m.alphabet.len(), row.len()),
                    ));
                    continue;
                }
                for (x, p) in row.iter().enumerate() {
                    if !(p.is_finite() && *p > 0.0) {
                        out.push(Violation::new(
                            format!("{field}.conditional[{y}][{x}]"),
                            Rule::StrictPositivity,
                            format!("value {p}"),
                        ));
                    }
                }
                let s: f64 = row.iter().sum();
                if !((s - 1.0).abs() <= SUM_TOLERANCE) {
                    out.push(Violation::new(
                        format!("{field}.conditional[{y}]"),
                        Rule::RowSum,
                        format!("sums to {s}"),
                    ));
                }
            }
        }

        if shapes_ok && l >= 2 {
            for y in 0..l {
                for y2 in (y + 1)..l {
                    if !self.models.iter().any(|m| m.distinguishes(y, y2)) {
                        out.push(Violation::new(
                            "models",
                            Rule::PairwiseIdentifiability,
                            format!("no model separates `{}` and `{}`", self.labels[y], self.labels[y2]),
                        ));
                    }
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }

    pub fn plan_cost(&self, plan: &QueryPlan) -> Result<f64> {
        plan_cost(self, plan)
    }

    pub fn check_plan(&self, plan: &QueryPlan) -> Result<()> {
        if plan.len() != self.num_models() {
            return Err(Error::Dimension {
                what: "plan entries",
                expected: self.num_models(),
                got: plan.len(),
            });
        }
        Ok(())
    }

    pub fn check_label(&self, y: usize) -> Result<()> {
        if y >= self.num_labels() {
            return Err(Error::OutOfRange {
                what: "label",
                index: y,
                size: self.num_labels(),
            });
        }
        Ok(())
    }

    /// Parses without validating.
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Canonical serialization: fixed field order, shortest round-trip floats.
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    /// Reads and validates an instance file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let inst = Self::load_unchecked(path)?;
        inst.ensure_valid()?;
        Ok(inst)
    }

    pub fn load_unchecked(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

pub fn ordered_pairs(num_labels: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(num_labels * num_labels.saturating_sub(1));
    for y in 0..num_labels {
        for y2 in 0..num_labels {
            if y != y2 {
                out.push((y, y2));
            }
        }
    }
    out
}

/// Non-adaptive query plan: how many times to query each model.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueryPlan(Vec<u32>);

impl QueryPlan {
    pub fn new(counts: Vec<u32>) -> Self {
        Self(counts)
    }

    pub fn zeros(num_models: usize) -> Self {
        Self(vec![0; num_models])
    }

    pub fn uniform(num_models: usize, n: u32) -> Self {
        Self(vec![n; num_models])
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, m: usize) -> u32 {
        self.0[m]
    }

    /// Total number of queries `N(r)`.
    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| c as u64).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn incremented(&self, m: usize) -> Self {
        let mut c = self.0.clone();
        c[m] += 1;
        Self(c)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl Add for &QueryPlan {
    type Output = QueryPlan;

    fn add(self, rhs: &QueryPlan) -> QueryPlan {
        assert_eq!(self.len(), rhs.len(), "plan lengths differ");
        QueryPlan(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Display for QueryPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// `C(r) = sum_m c_m r_m`.
pub fn plan_cost(instance: &Instance, plan: &QueryPlan) -> Result<f64> {
    instance.check_plan(plan)?;
    Ok(instance
        .models
        .iter()
        .zip(plan.counts())
        .map(|(m, &r)| m.cost * r as f64)
        .sum())
}

/// One observed query in a calibration log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub model: String,
    pub label: String,
    pub response: String,
}

/// Model declaration for calibration. When `alphabet` is `None` it is
/// inferred from the log (sorted symbol order).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDecl {
    pub name: String,
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<Vec<String>>,
}

/// Everything an instance needs except the conditional tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceTemplate {
    pub labels: Vec<String>,
    pub prior: Vec<f64>,
    pub tolerances: Vec<f64>,
    pub models: Vec<ModelDecl>,
}

impl InstanceTemplate {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Calibrates the tables from `records` and assembles the instance.
    pub fn calibrate(&self, records: &[CalibrationRecord], smoothing: f64) -> Result<Instance> {
        let models = calibrate(records, &self.labels, &self.models, smoothing)?;
        Ok(Instance::new(
            self.labels.clone(),
            self.prior.clone(),
            self.tolerances.clone(),
            models,
        ))
    }
}

pub fn read_calibration_log<R: Read>(reader: R) -> Result<Vec<CalibrationRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Additively smoothed conditional tables:
/// `p(x|y) = (n(m,y,x) + smoothing) / (n(m,y,·) + smoothing·|X_m|)`.
pub fn calibrate(
    records: &[CalibrationRecord],
    labels: &[String],
    models: &[ModelDecl],
    smoothing: f64,
) -> Result<Vec<ModelSpec>> {
    if records.is_empty() {
        return Err(Error::EmptyLog);
    }
    if !(smoothing.is_finite() && smoothing > 0.0) {
        return Err(Error::Argument(format!("smoothing must be positive, got {smoothing}")));
    }
    let label_idx: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let model_idx: HashMap<&str, usize> = models.iter().enumerate().map(|(i, m)| (m.name.as_str(), i)).collect();

    // Resolve alphabets first; undeclared ones come from the log.
    let mut inferred: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); models.len()];
    for rec in records {
        let m = *model_idx.get(rec.model.as_str()).ok_or_else(|| Error::UnknownToken {
            kind: "model",
            token: rec.model.clone(),
        })?;
        if !label_idx.contains_key(rec.label.as_str()) {
            return Err(Error::UnknownToken {
                kind: "label",
                token: rec.label.clone(),
            });
        }
        inferred[m].insert(rec.response.as_str());
    }
    let alphabets: Vec<Vec<String>> = models
        .iter()
        .zip(&inferred)
        .map(|(decl, inf)| match &decl.alphabet {
            Some(a) => a.clone(),
            None => inf.iter().map(|s| s.to_string()).collect(),
        })
        .collect();

    let mut counts: Vec<Vec<Vec<f64>>> = alphabets
        .iter()
        .map(|a| vec![vec![0.0; a.len()]; labels.len()])
        .collect();
    for rec in records {
        let m = model_idx[rec.model.as_str()];
        let y = label_idx[rec.label.as_str()];
        let x = alphabets[m]
            .iter()
            .position(|s| *s == rec.response)
            .ok_or_else(|| Error::UnknownToken {
                kind: "symbol",
                token: rec.response.clone(),
            })?;
        counts[m][y][x] += 1.0;
    }

    Ok(models
        .iter()
        .zip(alphabets)
        .zip(counts)
        .map(|((decl, alphabet), table)| {
            let k = alphabet.len() as f64;
            let rows = table
                .into_iter()
                .map(|row| {
                    let total: f64 = row.iter().sum();
                    row.iter().map(|c| (c + smoothing) / (total + smoothing * k)).collect()
                })
                .collect();
            ModelSpec::new(decl.name.clone(), alphabet, rows, decl.cost)
        })
        .collect())
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    /// Binary symmetric channel, crossover 0.1, equal priors, alpha 0.05.
    pub fn bsc() -> Instance {
        Instance::validated(
            strs(&["1", "2"]),
            vec![0.5, 0.5],
            vec![0.05, 0.05],
            vec![ModelSpec::new(
                "bsc",
                strs(&["0", "1"]),
                vec![vec![0.1, 0.9], vec![0.9, 0.1]],
                1.0,
            )],
        )
        .unwrap()
    }
}
