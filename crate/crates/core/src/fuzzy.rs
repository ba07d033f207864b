//! Mamdani fuzzy controller mapping (angle deviation, center deviation) to a
//! wheel speed difference.
//!
//! Inference: AND = min, implication = clipping, aggregation = pointwise max
//! over the sampled output universe, then a discretized centroid.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FuzzyError {
    #[error("no rule fired")]
    NoRuleFired,
    #[error("invalid fuzzy set `{name}`: {reason}")]
    InvalidSet { name: String, reason: String },
    #[error("invalid linguistic variable `{name}`: {reason}")]
    InvalidVariable { name: String, reason: String },
    #[error("invalid rule base: {0}")]
    InvalidRules(String),
}

/// Triangle with left foot `d`, apex `c` and right foot `e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangularSet {
    pub d: f64,
    pub c: f64,
    pub e: f64,
}

impl TriangularSet {
    pub const fn new(d: f64, c: f64, e: f64) -> Self {
        Self { d, c, e }
    }

    pub fn is_valid(&self) -> bool {
        self.d.is_finite() && self.c.is_finite() && self.e.is_finite() && self.d <= self.c && self.c <= self.e
    }

    /// Degree of membership of `x`. A degenerate side (`d == c` or
    /// `c == e`) is a shoulder with membership 1 at the apex.
    pub fn membership(&self, x: f64) -> f64 {
        if x < self.d || x > self.e {
            0.0
        } else if x == self.c {
            1.0
        } else if x < self.c {
            (x - self.d) / (self.c - self.d)
        } else {
            (self.e - x) / (self.e - self.c)
        }
    }
}

pub fn membership(set: &TriangularSet, x: f64) -> f64 {
    set.membership(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinguisticVariable {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub sets: Vec<(String, TriangularSet)>,
}

impl LinguisticVariable {
    pub fn new(
        name: impl Into<String>,
        lo: f64,
        hi: f64,
        step: f64,
        sets: Vec<(String, TriangularSet)>,
    ) -> Result<Self, FuzzyError> {
        let var = Self { name: name.into(), lo, hi, step, sets };
        var.validate()?;
        Ok(var)
    }

    /// `N` / `Z` / `P` triangles over the symmetric universe `[-range, range]`.
    pub fn symmetric_three(name: &str, range: f64, step: f64) -> Result<Self, FuzzyError> {
        Self::new(
            name,
            -range,
            range,
            step,
            vec![
                ("negative".into(), TriangularSet::new(-range, -range, 0.0)),
                ("zero".into(), TriangularSet::new(-range, 0.0, range)),
                ("positive".into(), TriangularSet::new(0.0, range, range)),
            ],
        )
    }

    fn validate(&self) -> Result<(), FuzzyError> {
        let bad = |reason: String| Err(FuzzyError::InvalidVariable { name: self.name.clone(), reason });
        if !(self.lo < self.hi && self.lo.is_finite() && self.hi.is_finite()) {
            return bad(format!("universe [{}, {}] is empty", self.lo, self.hi));
        }
        if !(self.step > 0.0 && self.step <= self.hi - self.lo) {
            return bad(format!("step {} must be in (0, hi - lo]", self.step));
        }
        if self.sets.is_empty() {
            return bad("no fuzzy sets".into());
        }
        for (i, (name, set)) in self.sets.iter().enumerate() {
            if !set.is_valid() {
                return Err(FuzzyError::InvalidSet { name: name.clone(), reason: "requires d <= c <= e".into() });
            }
            if set.d < self.lo || set.e > self.hi {
                return Err(FuzzyError::InvalidSet {
                    name: name.clone(),
                    reason: format!("extends outside [{}, {}]", self.lo, self.hi),
                });
            }
            if self.sets[..i].iter().any(|(other, _)| other == name) {
                return bad(format!("duplicate set name `{name}`"));
            }
        }
        if let Some(x) = self.samples().into_iter().find(|&x| self.sets.iter().all(|(_, s)| s.membership(x) == 0.0)) {
            return bad(format!("universe not covered at {x}"));
        }
        Ok(())
    }

    /// Sample points `lo, lo + step, ..., hi`; the count is rounded so both
    /// ends are included.
    pub fn samples(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step).round() as usize;
        (0..=n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / n as f64).collect()
    }

    pub fn set_index(&self, name: &str) -> Option<usize> {
        self.sets.iter().position(|(n, _)| n == name)
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn fuzzify(&self, x: f64) -> Vec<f64> {
        self.sets.iter().map(|(_, s)| s.membership(x)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub angle: usize,
    pub center: usize,
    pub output: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RuleVariant {
    /// N&N->N, Z&Z->Z, P&P->P.
    #[default]
    Basic3,
    /// Full 3x3 table over every antecedent pair.
    Full9,
}

impl RuleVariant {
    fn table(self) -> &'static [(&'static str, &'static str, &'static str)] {
        match self {
            RuleVariant::Basic3 => &[
                ("negative", "negative", "negative"),
                ("zero", "zero", "zero"),
                ("positive", "positive", "positive"),
            ],
            RuleVariant::Full9 => &[
                ("negative", "negative", "negative"),
                ("negative", "zero", "negative"),
                ("negative", "positive", "zero"),
                ("zero", "negative", "negative"),
                ("zero", "zero", "zero"),
                ("zero", "positive", "positive"),
                ("positive", "negative", "zero"),
                ("positive", "zero", "positive"),
                ("positive", "positive", "positive"),
            ],
        }
    }
}

/// Centroid `sum(w_i * J_i) / sum(w_i)` of weighted samples.
pub fn defuzzify_centroid(samples: &[(f64, f64)]) -> Result<f64, FuzzyError> {
    let (num, den) = samples.iter().fold((0.0, 0.0), |(n, d), &(j, w)| (n + w * j, d + w));
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(FuzzyError::NoRuleFired)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuzzySettings {
    pub rules: RuleVariant,
    pub output_gain: f64,
    /// Half-width of the angle universe, degrees.
    pub angle_range: f64,
    pub angle_step: f64,
    /// Half-width of the center universe, millimeters.
    pub center_range: f64,
    pub center_step: f64,
    /// Half-width of the output universe, rad/s.
    pub output_range: f64,
    pub output_step: f64,
}

impl Default for FuzzySettings {
    fn default() -> Self {
        Self {
            rules: RuleVariant::Basic3,
            output_gain: 1.0,
            angle_range: 10.0,
            angle_step: 0.1,
            center_range: 100.0,
            center_step: 1.0,
            output_range: 10.0,
            output_step: 0.1,
        }
    }
}

/// Crisp output plus per-rule activations, for debugging.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyEvaluation {
    pub output: f64,
    pub activations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyController {
    pub angle: LinguisticVariable,
    pub center: LinguisticVariable,
    pub output: LinguisticVariable,
    pub rules: Vec<Rule>,
    pub output_gain: f64,
    output_samples: Vec<f64>,
}

impl FuzzyController {
    pub fn new(
        angle: LinguisticVariable,
        center: LinguisticVariable,
        output: LinguisticVariable,
        rules: Vec<Rule>,
        output_gain: f64,
    ) -> Result<Self, FuzzyError> {
        if rules.is_empty() {
            return Err(FuzzyError::InvalidRules("rule base is empty".into()));
        }
        for (i, r) in rules.iter().enumerate() {
            if r.angle >= angle.sets.len() || r.center >= center.sets.len() || r.output >= output.sets.len() {
                return Err(FuzzyError::InvalidRules(format!("rule {i} references an unknown set")));
            }
            if rules[..i].iter().any(|o| o.angle == r.angle && o.center == r.center) {
                return Err(FuzzyError::InvalidRules(format!("rule {i} duplicates an antecedent pair")));
            }
        }
        if !output_gain.is_finite() {
            return Err(FuzzyError::InvalidRules("output_gain must be finite".into()));
        }
        let output_samples = output.samples();
        Ok(Self { angle, center, output, rules, output_gain, output_samples })
    }

    pub fn from_settings(s: &FuzzySettings) -> Result<Self, FuzzyError> {
        let angle = LinguisticVariable::symmetric_three("angle_deviation", s.angle_range, s.angle_step)?;
        let center = LinguisticVariable::symmetric_three("center_deviation", s.center_range, s.center_step)?;
        let output = LinguisticVariable::symmetric_three("speed_difference", s.output_range, s.output_step)?;
        let rules = s
            .rules
            .table()
            .iter()
            .map(|(a, c, o)| Rule {
                angle: angle.set_index(a).expect("symmetric sets"),
                center: center.set_index(c).expect("symmetric sets"),
                output: output.set_index(o).expect("symmetric sets"),
            })
            .collect();
        Self::new(angle, center, output, rules, s.output_gain)
    }

    /// Evaluates the Mamdani pipeline. Inputs are clamped to their
    /// universes; when no rule fires the output is 0.
    pub fn evaluate(&self, angle_dev_deg: f64, center_dev_mm: f64) -> FuzzyEvaluation {
        let a = self.angle.fuzzify(self.angle.clamp(angle_dev_deg));
        let c = self.center.fuzzify(self.center.clamp(center_dev_mm));
        let activations: Vec<f64> = self.rules.iter().map(|r| a[r.angle].min(c[r.center])).collect();

        let aggregate: Vec<(f64, f64)> = self
            .output_samples
            .iter()
            .map(|&x| {
                let mu = self
                    .rules
                    .iter()
                    .zip(&activations)
                    .map(|(r, &act)| act.min(self.output.sets[r.output].1.membership(x)))
                    .fold(0.0, f64::max);
                (x, mu)
            })
            .collect();
        let crisp = defuzzify_centroid(&aggregate).unwrap_or(0.0);
        FuzzyEvaluation { output: self.output_gain * crisp, activations }
    }

    pub fn controller_step(&self, angle_dev_deg: f64, center_dev_mm: f64) -> f64 {
        self.evaluate(angle_dev_deg, center_dev_mm).output
    }

    pub fn describe_rule(&self, rule: &Rule) -> String {
        format!(
            "{}[{}] & {}[{}] -> {}[{}]",
            self.angle.name,
            self.angle.sets[rule.angle].0,
            self.center.name,
            self.center.sets[rule.center].0,
            self.output.name,
            self.output.sets[rule.output].0
        )
    }
}

impl Default for FuzzyController {
    fn default() -> Self {
        Self::from_settings(&FuzzySettings::default()).expect("default settings are valid")
    }
}

impl fmt::Display for FuzzyEvaluation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "output={}", self.output)
    }
}
