//! The structured algorithm-descriptor space: the closed design space over
//! which new algorithms are proposed, validated and tuned.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MoeaError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HpKind {
    Int,
    Float,
    Bool,
}

/// A hyperparameter value. Ordered comparisons only make sense within one
/// kind; validation enforces kind agreement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HpValue {
    Bool(bool),
    Int(i64),
    Float(f64),
}

impl HpValue {
    pub fn kind(&self) -> HpKind {
        match self {
            HpValue::Int(_) => HpKind::Int,
            HpValue::Float(_) => HpKind::Float,
            HpValue::Bool(_) => HpKind::Bool,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            HpValue::Int(v) => *v as f64,
            HpValue::Float(v) => *v,
            HpValue::Bool(v) => f64::from(*v),
        }
    }

    pub fn as_usize(&self) -> usize {
        match self {
            HpValue::Int(v) => (*v).max(0) as usize,
            HpValue::Float(v) => v.max(0.0) as usize,
            HpValue::Bool(v) => usize::from(*v),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HpRange {
    /// Closed interval for non-categorical int/float parameters.
    Interval { lo: f64, hi: f64 },
    /// Explicit value set for categorical parameters.
    Choices(Vec<HpValue>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperparameterDef {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: HpKind,
    pub default: HpValue,
    pub categorical: bool,
    pub range: HpRange,
    #[serde(default)]
    pub description: String,
}

impl HyperparameterDef {
    pub fn float(name: &str, default: f64, lo: f64, hi: f64, description: &str) -> Self {
        Self {
            name: name.into(),
            kind: HpKind::Float,
            default: HpValue::Float(default),
            categorical: false,
            range: HpRange::Interval { lo, hi },
            description: description.into(),
        }
    }

    pub fn int(name: &str, default: i64, lo: i64, hi: i64, description: &str) -> Self {
        Self {
            name: name.into(),
            kind: HpKind::Int,
            default: HpValue::Int(default),
            categorical: false,
            range: HpRange::Interval {
                lo: lo as f64,
                hi: hi as f64,
            },
            description: description.into(),
        }
    }

    pub fn boolean(name: &str, default: bool, description: &str) -> Self {
        Self {
            name: name.into(),
            kind: HpKind::Bool,
            default: HpValue::Bool(default),
            categorical: true,
            range: HpRange::Choices(vec![HpValue::Bool(false), HpValue::Bool(true)]),
            description: description.into(),
        }
    }

    /// Checks one value against this definition.
    pub fn admits(&self, value: &HpValue) -> bool {
        if value.kind() != self.kind {
            return false;
        }
        match &self.range {
            HpRange::Interval { lo, hi } => {
                let v = value.as_f64();
                v.is_finite() && *lo <= v && v <= *hi
            }
            HpRange::Choices(choices) => choices.contains(value),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    UniformRandom,
    /// Per-individual bit densities stratified over (0, 1).
    StratifiedBits,
    /// Cycles sparse, balanced and dense densities; exploits constraint
    /// structure where sparse solutions are feasible.
    HeuristicBiased,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossoverOp {
    Uniform,
    OnePoint,
    TwoPoint,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatingSelection {
    BinaryTournament,
    Random,
    /// Mate with one of the nearest neighbors in objective space (weight
    /// space for decomposition).
    Neighborhood,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    Tchebycheff,
    WeightedSum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "scheme")]
pub enum UpdateScheme {
    /// Nondominated sorting with crowding-distance truncation.
    NondominatedSortingCrowding,
    /// Nondominated sorting with reference-direction niching.
    ReferenceDirectionNiching,
    /// Decomposition into scalar subproblems over uniform weight vectors.
    Decomposition { aggregation: Aggregation },
    /// Strength/density fitness with a bounded external archive.
    StrengthDensityArchive,
    /// Hypervolume-contribution truncation.
    HypervolumeContribution,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchivePolicy {
    pub enabled: bool,
}

/// Structural operator choices plus the hyperparameter schema they bind to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmDescriptor {
    pub init_scheme: InitScheme,
    pub crossover: CrossoverOp,
    pub mating_selection: MatingSelection,
    pub update_scheme: UpdateScheme,
    pub archive: ArchivePolicy,
    pub hyperparameters: Vec<HyperparameterDef>,
}

/// Hyperparameter names the engine reads directly.
pub mod wellknown {
    pub const POP_SIZE: &str = "pop_size";
    pub const CROSSOVER_RATE: &str = "crossover_rate";
    pub const MUTATION_RATE: &str = "mutation_rate";
    pub const NEIGHBORHOOD_SIZE: &str = "neighborhood_size";
    pub const ARCHIVE_CAPACITY: &str = "archive_capacity";
}

impl AlgorithmDescriptor {
    pub fn def(&self, name: &str) -> Option<&HyperparameterDef> {
        self.hyperparameters.iter().find(|d| d.name == name)
    }

    /// Hyperparameters the structural choices require.
    pub fn required_names(&self) -> Vec<&'static str> {
        let mut names = vec![wellknown::POP_SIZE, wellknown::MUTATION_RATE];
        if self.crossover != CrossoverOp::None {
            names.push(wellknown::CROSSOVER_RATE);
        }
        let needs_neighborhood = self.mating_selection == MatingSelection::Neighborhood
            || matches!(self.update_scheme, UpdateScheme::Decomposition { .. });
        if needs_neighborhood {
            names.push(wellknown::NEIGHBORHOOD_SIZE);
        }
        if self.archive.enabled {
            names.push(wellknown::ARCHIVE_CAPACITY);
        }
        names
    }

    /// Reports every schema violation: missing definitions, defaults out of
    /// range, duplicate names, bad rate ranges.
    pub fn validate(&self) -> Vec<String> {
        let mut violations = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for def in &self.hyperparameters {
            if !seen.insert(def.name.clone()) {
                violations.push(format!("duplicate hyperparameter {:?}", def.name));
            }
            if !def.admits(&def.default) {
                violations.push(format!("default out of range for {:?}", def.name));
            }
            if let HpRange::Interval { lo, hi } = &def.range {
                if !(lo < hi) {
                    violations.push(format!("empty range for {:?}", def.name));
                }
            }
            if let HpRange::Choices(choices) = &def.range {
                if choices.is_empty() {
                    violations.push(format!("empty choice set for {:?}", def.name));
                }
            }
        }
        for name in self.required_names() {
            match self.def(name) {
                None => violations.push(format!("hyperparameter {name:?} used but undefined")),
                Some(def) => {
                    // the two rates must stay inside the unit interval
                    if name == wellknown::CROSSOVER_RATE || name == wellknown::MUTATION_RATE {
                        if let HpRange::Interval { lo, hi } = def.range {
                            if lo < 0.0 || hi > 1.0 {
                                violations
                                    .push(format!("{name:?} range must stay within [0, 1]"));
                            }
                        }
                    }
                    if name == wellknown::POP_SIZE {
                        if def.default.as_usize() < 2 {
                            violations.push("pop_size default below 2".into());
                        }
                    }
                }
            }
        }
        violations
    }
}

/// A fully instantiated algorithm: descriptor plus a concrete assignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub descriptor: AlgorithmDescriptor,
    pub assignment: BTreeMap<String, HpValue>,
    pub label: String,
}

impl Configuration {
    /// Pairs a descriptor with its default assignment.
    pub fn with_defaults(descriptor: AlgorithmDescriptor, label: &str) -> Self {
        let assignment = descriptor
            .hyperparameters
            .iter()
            .map(|d| (d.name.clone(), d.default.clone()))
            .collect();
        Self {
            descriptor,
            assignment,
            label: label.into(),
        }
    }

    pub fn value(&self, name: &str) -> Option<&HpValue> {
        self.assignment.get(name)
    }

    pub(crate) fn usize_param(&self, name: &str) -> Result<usize, MoeaError> {
        self.value(name)
            .map(HpValue::as_usize)
            .ok_or_else(|| MoeaError::InvalidConfiguration(format!("missing {name}")))
    }

    pub(crate) fn f64_param(&self, name: &str) -> Result<f64, MoeaError> {
        self.value(name)
            .map(HpValue::as_f64)
            .ok_or_else(|| MoeaError::InvalidConfiguration(format!("missing {name}")))
    }

    /// Checks the assignment against every definition and the structural
    /// requirements.
    pub fn validate(&self) -> Vec<String> {
        let mut violations = self.descriptor.validate();
        for (name, value) in &self.assignment {
            match self.descriptor.def(name) {
                None => violations.push(format!("assignment names unknown hyperparameter {name:?}")),
                Some(def) => {
                    if !def.admits(value) {
                        violations.push(format!("assignment for {name:?} out of range"));
                    }
                }
            }
        }
        for def in &self.descriptor.hyperparameters {
            if !self.assignment.contains_key(&def.name) {
                violations.push(format!("assignment missing {:?}", def.name));
            }
        }
        violations
    }

    /// Canonical serialized form; portfolio membership distinctness keys on
    /// this.
    pub fn fingerprint(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_descriptor() -> AlgorithmDescriptor {
        AlgorithmDescriptor {
            init_scheme: InitScheme::UniformRandom,
            crossover: CrossoverOp::Uniform,
            mating_selection: MatingSelection::BinaryTournament,
            update_scheme: UpdateScheme::NondominatedSortingCrowding,
            archive: ArchivePolicy { enabled: false },
            hyperparameters: vec![
                HyperparameterDef::int(wellknown::POP_SIZE, 20, 4, 200, "population size"),
                HyperparameterDef::float(wellknown::CROSSOVER_RATE, 0.9, 0.0, 1.0, ""),
                HyperparameterDef::float(wellknown::MUTATION_RATE, 0.05, 0.001, 0.5, ""),
            ],
        }
    }

    #[test]
    fn valid_descriptor_passes() {
        assert!(minimal_descriptor().validate().is_empty());
    }

    #[test]
    fn default_out_of_range_is_reported() {
        let mut d = minimal_descriptor();
        d.hyperparameters[1] = HyperparameterDef::float(wellknown::CROSSOVER_RATE, 1.5, 0.0, 1.0, "");
        let vs = d.validate();
        assert!(vs.iter().any(|v| v.contains("default out of range")), "{vs:?}");
    }

    #[test]
    fn missing_required_hyperparameter_is_reported() {
        let mut d = minimal_descriptor();
        d.hyperparameters.remove(0);
        let vs = d.validate();
        assert!(vs.iter().any(|v| v.contains("pop_size")), "{vs:?}");
    }

    #[test]
    fn configuration_round_trips_losslessly() {
        let cfg = Configuration::with_defaults(minimal_descriptor(), "test");
        let text = serde_json::to_string(&cfg).unwrap();
        let back: Configuration = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn assignment_validation_catches_out_of_range() {
        let mut cfg = Configuration::with_defaults(minimal_descriptor(), "test");
        cfg.assignment
            .insert(wellknown::MUTATION_RATE.into(), HpValue::Float(0.9));
        let vs = cfg.validate();
        assert!(vs.iter().any(|v| v.contains("out of range")), "{vs:?}");
    }
}
