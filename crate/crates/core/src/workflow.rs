//! Measure, prune, re-measure and compare.
//!
//! An [`Experiment`] bundles an environment, a policy and a property. Each
//! measurement builds the induced chain from scratch and checks the property
//! on it; pruning experiments repeat that for the pruned policy and report
//! the difference `delta = m_hat - m`.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::environments;
use crate::error::{Error, Result};
use crate::induced::{build_induced_dtmc, BuildLimits, BuildResult};
use crate::model::{load_explicit_model, EnvironmentModel};
use crate::pctl::{check, parse_property, Comparator, ProbBound, Property};
use crate::policy::{load_policy, NeuralPolicy};
use crate::pruning::{prune, PruneMask, PruneSpec};

/// Deltas at or below this magnitude count as "unchanged".
pub const UNCHANGED_TOLERANCE: f64 = 1e-12;

pub const CSV_HEADER: [&str; 11] = [
    "method",
    "layer",
    "fraction",
    "seed",
    "property",
    "m",
    "m_hat",
    "delta",
    "states",
    "transitions",
    "time_ms",
];

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Loads `builtin:<name>?...` or an explicit model file.
pub fn load_model(uri: &str) -> Result<Box<dyn EnvironmentModel>> {
    if uri.starts_with("builtin:") {
        environments::builtin(uri)
    } else {
        let text = read_text(Path::new(uri))?;
        Ok(Box::new(load_explicit_model(&text)?))
    }
}

pub fn load_policy_file(path: &Path) -> Result<NeuralPolicy> {
    load_policy(&read_text(path)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    HigherIsSafer,
    LowerIsSafer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Unchanged,
    Improved,
    Degraded,
    Violation,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Unchanged => "unchanged",
            Verdict::Improved => "improved",
            Verdict::Degraded => "degraded",
            Verdict::Violation => "violation",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Threshold {
    pub comparator: Comparator,
    pub value: f64,
}

impl Threshold {
    pub fn holds(&self, probability: f64) -> bool {
        self.comparator.holds(probability, self.value)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Measurement {
    pub value: f64,
    pub states: usize,
    pub transitions: usize,
    pub iterations: usize,
    pub residual: f64,
    #[serde(skip)]
    pub elapsed_ms: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SafetyReport {
    pub property: String,
    pub model: String,
    pub policy: String,
    pub m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<Threshold>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prune: Option<PruneSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pruned_connections: Option<usize>,
    pub original: Measurement,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pruned: Option<Measurement>,
    /// Wall-clock milliseconds (original, pruned); only filled on request
    /// since it breaks byte-for-byte reproducibility.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<(f64, Option<f64>)>,
}

impl SafetyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMethod {
    L1,
    Random,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub method: SweepMethod,
    pub layer: usize,
    pub fractions: Vec<f64>,
    /// Seeds for random pruning; ignored by l1.
    pub seeds: Vec<u64>,
}

/// Expands `start:stop:step` into an inclusive grid inside [0, 1].
///
/// Points are `start + i * step`, rounded to 12 decimals so that e.g.
/// `0:1:0.1` yields `0.3` rather than `0.30000000000000004`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Semantic(format!("fraction grid `{spec}` is not start:stop:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&stop) || start > stop {
        return Err(Error::Semantic(format!(
            "fraction grid `{spec}` must satisfy 0 <= start <= stop <= 1"
        )));
    }
    if step.is_nan() || step <= 0.0 {
        return Err(Error::Semantic(format!("fraction grid `{spec}` needs a positive step")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

pub struct Experiment {
    pub env: Box<dyn EnvironmentModel>,
    pub policy: NeuralPolicy,
    pub property: Property,
    pub property_text: String,
    pub model_id: String,
    pub policy_id: String,
    pub limits: BuildLimits,
    pub polarity: Polarity,
    pub threshold: Option<Threshold>,
    pub record_timings: bool,
}

impl Experiment {
    /// Defaults: polarity and threshold follow the property's comparator;
    /// `=?` queries count higher values as safer and carry no threshold.
    pub fn new(
        env: Box<dyn EnvironmentModel>,
        policy: NeuralPolicy,
        property_text: &str,
    ) -> Result<Self> {
        let property = parse_property(property_text)?;
        policy.check_schema(env.as_ref())?;
        let (polarity, threshold) = match property.bound {
            ProbBound::Query => (Polarity::HigherIsSafer, None),
            ProbBound::Compare(comparator, value) => (
                if comparator.higher_is_better() {
                    Polarity::HigherIsSafer
                } else {
                    Polarity::LowerIsSafer
                },
                Some(Threshold { comparator, value }),
            ),
        };
        Ok(Experiment {
            env,
            policy,
            property,
            property_text: property_text.trim().to_string(),
            model_id: String::new(),
            policy_id: String::new(),
            limits: BuildLimits::default(),
            polarity,
            threshold,
            record_timings: false,
        })
    }

    pub fn load(model_uri: &str, policy_path: &Path, property_text: &str) -> Result<Self> {
        let env = load_model(model_uri)?;
        let policy = load_policy_file(policy_path)?;
        let mut exp = Experiment::new(env, policy, property_text)?;
        exp.model_id = model_uri.to_string();
        exp.policy_id = policy_path.display().to_string();
        Ok(exp)
    }

    pub fn with_limits(mut self, limits: BuildLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn with_polarity(mut self, polarity: Polarity) -> Self {
        self.polarity = polarity;
        self
    }

    pub fn with_threshold(mut self, threshold: Option<Threshold>) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn build(&self, policy: &NeuralPolicy) -> Result<BuildResult> {
        build_induced_dtmc(self.env.as_ref(), policy, self.limits)
    }

    /// Builds the induced chain of `policy` and checks the property on it.
    pub fn measure_policy(&self, policy: &NeuralPolicy) -> Result<Measurement> {
        let start = Instant::now();
        let built = self.build(policy)?;
        let result = check(&built.dtmc, &self.property)?;
        Ok(Measurement {
            value: result.probability,
            states: built.stats.states,
            transitions: built.stats.transitions,
            iterations: result.iterations,
            residual: result.residual,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            warnings: result.warnings,
        })
    }

    fn base_report(&self, original: Measurement) -> SafetyReport {
        SafetyReport {
            property: self.property_text.clone(),
            model: self.model_id.clone(),
            policy: self.policy_id.clone(),
            m: original.value,
            m_hat: None,
            delta: None,
            verdict: None,
            threshold: None,
            prune: None,
            pruned_connections: None,
            timings_ms: self.record_timings.then_some((original.elapsed_ms, None)),
            original,
            pruned: None,
        }
    }

    pub fn measure(&self) -> Result<SafetyReport> {
        Ok(self.base_report(self.measure_policy(&self.policy)?))
    }

    pub fn verdict(&self, delta: f64, m_hat: f64) -> Verdict {
        if let Some(t) = &self.threshold {
            if !t.holds(m_hat) {
                return Verdict::Violation;
            }
        }
        if delta.abs() <= UNCHANGED_TOLERANCE {
            Verdict::Unchanged
        } else if (delta > 0.0) == (self.polarity == Polarity::HigherIsSafer) {
            Verdict::Improved
        } else {
            Verdict::Degraded
        }
    }

    fn compare(&self, original: Measurement, mask: &PruneMask, pruned: Measurement) -> SafetyReport {
        let m_hat = pruned.value;
        let delta = m_hat - original.value;
        let mut report = self.base_report(original);
        report.m_hat = Some(m_hat);
        report.delta = Some(delta);
        report.verdict = Some(self.verdict(delta, m_hat));
        report.threshold = self.threshold;
        report.prune = Some(mask.spec.clone());
        report.pruned_connections = Some(mask.len());
        if let Some((orig_ms, _)) = report.timings_ms {
            report.timings_ms = Some((orig_ms, Some(pruned.elapsed_ms)));
        }
        report.pruned = Some(pruned);
        report
    }

    /// Measures the original and the pruned policy and compares them.
    pub fn prune_and_measure(&self, spec: &PruneSpec) -> Result<(SafetyReport, NeuralPolicy, PruneMask)> {
        let original = self.measure_policy(&self.policy)?;
        self.prune_against(original, spec)
    }

    fn prune_against(
        &self,
        original: Measurement,
        spec: &PruneSpec,
    ) -> Result<(SafetyReport, NeuralPolicy, PruneMask)> {
        let (pruned_policy, mask) = prune(&self.policy, spec)?;
        let pruned = self.measure_policy(&pruned_policy)?;
        Ok((self.compare(original, &mask, pruned), pruned_policy, mask))
    }

    /// One report per input feature, in schema order, each pruning just
    /// that feature.
    pub fn feature_importance(&self) -> Result<Vec<SafetyReport>> {
        let original = self.measure_policy(&self.policy)?;
        self.policy
            .feature_names()
            .par_iter()
            .map(|f| {
                let spec = PruneSpec::Feature { feature: f.clone() };
                self.prune_against(original.clone(), &spec).map(|(r, _, _)| r)
            })
            .collect()
    }

    /// Runs every grid point and returns the CSV document. Random sweeps add
    /// a `mean` row after the per-seed rows of each fraction.
    pub fn sweep(&self, config: &SweepConfig) -> Result<String> {
        if config.method == SweepMethod::Random && config.seeds.is_empty() {
            return Err(Error::InvalidPruneSpec("random sweeps need at least one seed".into()));
        }
        let original = self.measure_policy(&self.policy)?;
        let mut points: Vec<(f64, Option<u64>)> = Vec::new();
        for &fraction in &config.fractions {
            match config.method {
                SweepMethod::L1 => points.push((fraction, None)),
                SweepMethod::Random => {
                    let mut seeds = config.seeds.clone();
                    seeds.sort_unstable();
                    seeds.dedup();
                    points.extend(seeds.into_iter().map(|s| (fraction, Some(s))));
                }
            }
        }
        let reports: Vec<SafetyReport> = points
            .par_iter()
            .map(|&(fraction, seed)| {
                let spec = match seed {
                    None => PruneSpec::L1 {
                        layer: config.layer,
                        fraction,
                    },
                    Some(seed) => PruneSpec::Random {
                        layer: config.layer,
                        fraction,
                        seed,
                    },
                };
                self.prune_against(original.clone(), &spec).map(|(r, _, _)| r)
            })
            .collect::<Result<_>>()?;

        let method = match config.method {
            SweepMethod::L1 => "l1",
            SweepMethod::Random => "random",
        };
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(CSV_HEADER)?;
        let m = original.value.to_string();
        let layer = config.layer.to_string();
        let mut i = 0;
        while i < reports.len() {
            let fraction = points[i].0;
            let mut group_sum = (0.0, 0.0);
            let mut group = 0;
            while i < reports.len() && points[i].0 == fraction {
                let r = &reports[i];
                let pruned = r.pruned.as_ref().expect("pruned measurement");
                let m_hat = r.m_hat.expect("m_hat");
                let delta = r.delta.expect("delta");
                group_sum.0 += m_hat;
                group_sum.1 += delta;
                group += 1;
                let time = if self.record_timings {
                    format!("{:.3}", pruned.elapsed_ms)
                } else {
                    String::new()
                };
                out.write_record([
                    method,
                    &layer,
                    &fraction.to_string(),
                    &points[i].1.map(|s| s.to_string()).unwrap_or_default(),
                    &self.property_text,
                    &m,
                    &m_hat.to_string(),
                    &delta.to_string(),
                    &pruned.states.to_string(),
                    &pruned.transitions.to_string(),
                    &time,
                ])?;
                i += 1;
            }
            if config.method == SweepMethod::Random {
                let n = group as f64;
                out.write_record([
                    method,
                    &layer,
                    &fraction.to_string(),
                    "mean",
                    &self.property_text,
                    &m,
                    &(group_sum.0 / n).to_string(),
                    &(group_sum.1 / n).to_string(),
                    "",
                    "",
                    "",
                ])?;
            }
        }
        let bytes = out
            .into_inner()
            .map_err(|e| Error::io("csv buffer", std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Like [`Experiment::sweep`] but writes the CSV to `path`. Nothing is
    /// written when any grid point fails.
    pub fn sweep_to_file(&self, config: &SweepConfig, path: &Path) -> Result<()> {
        let csv = self.sweep(config)?;
        write_text(path, &csv)
    }
}
