//! Scenario configs: TOML text in, fully resolved scenario out.
//!
//! Parsing is strict (unknown keys are rejected) and resolution is
//! exhaustive: every violated constraint is reported in one pass, and
//! every default the run will use is materialized into the resolved
//! scenario so the report echo leaves nothing implicit.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use sensornet_core::adversary::{
    AdversaryModel, ChannelSpec, DishonestBehavior, NetworkTopology, SourceAttack, VerifierRole,
};
use sensornet_core::encoding::{LinearFunctionSpec, PhaseVector};
use sensornet_core::qcore::QuantumState;
use sensornet_core::sensing::SensingParams;
use sensornet_core::tol;
use sensornet_core::verification::{self, VerificationParams};

pub const DEFAULT_BRANCH_WINDOW: (f64, f64) = (0.0, std::f64::consts::PI);
pub const DEFAULT_QFI_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topology: TopologyConfig,
    pub verification: VerificationConfig,
    #[serde(default)]
    pub adversary: AdversaryConfig,
    #[serde(default)]
    pub function: Option<FunctionConfig>,
    #[serde(default)]
    pub phases: Option<PhasesConfig>,
    #[serde(default)]
    pub sensing: Option<SensingConfig>,
    pub seeds: SeedsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub qfi: Option<QfiConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub nodes: usize,
    /// Default: every node.
    #[serde(default)]
    pub honest: Option<Vec<usize>>,
    /// Default: node 0. Write `verifier = { node = i }` or `verifier = "crs"`.
    #[serde(default)]
    pub verifier: Option<VerifierConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum VerifierConfig {
    Node { node: usize },
    Named(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationConfig {
    pub m: f64,
    pub c: f64,
    #[serde(default = "one")]
    pub lambda: usize,
    #[serde(default)]
    pub n_test_override: Option<usize>,
    #[serde(default)]
    pub allow_constraint_violation: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdversaryConfig {
    pub coordination_seed: u64,
    pub source: Option<SourceConfig>,
    /// Same channel on every qubit; mutually exclusive with `channel`.
    pub uniform_channel: Option<ChannelSpec>,
    /// Per-qubit channels, `[[adversary.channel]]` entries.
    pub channel: Vec<ChannelEntry>,
    /// Per-node behavior, `[[adversary.node]]` entries. Entries for nodes
    /// the topology lists as honest are echoed but never acted on.
    pub node: Vec<NodeBehaviorEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceConfig {
    /// The source distributes this computational basis state, every copy.
    FixedBasisState { bits: Vec<u8> },
    /// The source pushes every qubit through this channel.
    Channel { channel: ChannelSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    pub qubit: usize,
    pub channel: ChannelSpec,
}

/// Flat mirror of the dishonest-behavior knobs plus the node they apply
/// to. Kept flat so unknown keys are still rejected; serde's `flatten`
/// would silently turn that check off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeBehaviorEntry {
    pub node: usize,
    #[serde(default)]
    pub report_flip_prob: f64,
    #[serde(default)]
    pub pre_measurement_unitary: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default)]
    pub encode_skip: bool,
    #[serde(default)]
    pub verifier_fail_prob: f64,
}

impl NodeBehaviorEntry {
    pub fn behavior(&self) -> DishonestBehavior {
        DishonestBehavior {
            report_flip_prob: self.report_flip_prob,
            pre_measurement_unitary: self.pre_measurement_unitary.clone(),
            encode_skip: self.encode_skip,
            verifier_fail_prob: self.verifier_fail_prob,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionConfig {
    pub scale: f64,
    pub weights: Vec<i64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhasesConfig {
    pub values: Option<Vec<f64>>,
    pub uniform: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingConfig {
    pub rounds: usize,
    #[serde(default)]
    pub branch_window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsConfig {
    pub master: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    /// Default: structured-record only.
    pub formats: Option<Vec<ReportFormat>>,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    /// One CSV row per repetition.
    SummaryTable,
    /// Versioned JSON record; round-trips every numeric field exactly.
    StructuredRecord,
    /// JSONL, one line per stabilizer test plus a target line (verify only).
    PerTestLog,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QfiConfig {
    pub state: StateFamilyConfig,
    /// Per-node phase direction; default all ones (the phase-sum direction).
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    #[serde(default)]
    pub bures_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateFamilyConfig {
    Ghz { n: usize },
    DephasedGhz { n: usize, coherence: f64 },
    PlusProduct { n: usize },
    /// The resource the configured function would be sensed with.
    FunctionResource,
}

fn one() -> usize {
    1
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow!("config parse failed: {e}"))
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seeds.master = seed;
        }
        if let Some(reps) = overrides.reps {
            self.seeds.repetitions = reps;
        }
        if let Some(out) = &overrides.out {
            self.output.directory = Some(out.clone());
        }
        if let Some(formats) = &overrides.formats {
            self.output.formats = Some(formats.clone());
        }
    }

    /// Validate everything at once and materialize all defaults. The error
    /// lists every violation found, not just the first.
    pub fn resolve(&self) -> Result<ResolvedScenario> {
        let mut violations: Vec<String> = Vec::new();
        let n = self.topology.nodes;
        if n < 2 {
            violations.push(format!("topology.nodes = {n} must be at least 2"));
        }

        let honest: Vec<usize> = match &self.topology.honest {
            None => (0..n).collect(),
            Some(list) => {
                let set: BTreeSet<usize> = list.iter().copied().collect();
                if set.is_empty() {
                    violations.push("topology.honest must not be empty".into());
                }
                for &node in &set {
                    if node >= n {
                        violations.push(format!(
                            "topology.honest lists node {node}, but nodes = {n}"
                        ));
                    }
                }
                set.into_iter().collect()
            }
        };

        let verifier = match &self.topology.verifier {
            None => VerifierRole::Node { index: 0 },
            Some(VerifierConfig::Node { node }) => VerifierRole::Node { index: *node },
            Some(VerifierConfig::Named(name)) if name == "crs" => {
                VerifierRole::CommonRandomSource
            }
            Some(VerifierConfig::Named(name)) => {
                violations.push(format!(
                    "topology.verifier = {name:?} is not recognized; use \"crs\" or {{ node = i }}"
                ));
                VerifierRole::CommonRandomSource
            }
        };

        let lambda = self.verification.lambda;
        match verifier {
            VerifierRole::Node { index } => {
                if index >= n {
                    violations.push(format!(
                        "topology.verifier node {index} is outside 0..{n}"
                    ));
                } else if lambda == 1 && !honest.contains(&index) {
                    violations.push(format!(
                        "topology.verifier node {index} must be honest when lambda = 1"
                    ));
                }
                if lambda >= 2 {
                    violations.push(
                        "lambda >= 2 draws verifiers from shared randomness; set \
                         topology.verifier = \"crs\""
                            .into(),
                    );
                }
            }
            VerifierRole::CommonRandomSource => {
                if lambda == 1 {
                    violations.push(
                        "lambda = 1 needs a designated verifier node, not \"crs\"".into(),
                    );
                }
            }
        }

        let verification = VerificationParams {
            m: self.verification.m,
            c: self.verification.c,
            n_nodes: n,
            lambda,
            n_test_override: self.verification.n_test_override,
            allow_constraint_violation: self.verification.allow_constraint_violation,
        };
        if let Err(e) = verification.validate_basic() {
            violations.push(format!("verification: {e}"));
        }
        if self.verification.n_test_override == Some(0) {
            violations.push("verification.n_test_override must be positive".into());
        }

        let function = match &self.function {
            None => LinearFunctionSpec::average(n),
            Some(f) => {
                if f.weights.len() != n {
                    violations.push(format!(
                        "function.weights has {} entries for {n} nodes",
                        f.weights.len()
                    ));
                }
                if f.weights.iter().all(|&k| k == 0) {
                    violations.push("function.weights must not be all zero".into());
                }
                if !f.scale.is_finite() || f.scale == 0.0 {
                    violations.push(format!(
                        "function.scale = {} must be finite and nonzero",
                        f.scale
                    ));
                }
                LinearFunctionSpec {
                    scale: f.scale,
                    weights: f.weights.clone(),
                }
            }
        };

        let effective_n = function.total_qubits();
        if effective_n < 2 {
            violations.push(format!(
                "the resource spans {effective_n} qubit(s); at least 2 are needed"
            ));
        }
        if effective_n > tol::QUBIT_CAP_DEFAULT {
            violations.push(format!(
                "the resource spans {effective_n} qubits, above the dense-simulation cap {}",
                tol::QUBIT_CAP_DEFAULT
            ));
        }
        let constraint_violations = verification.constraint_violations(effective_n.max(2));
        if !constraint_violations.is_empty() && !verification.allow_constraint_violation {
            for v in &constraint_violations {
                violations.push(format!(
                    "verification: {v} (set allow_constraint_violation to run anyway)"
                ));
            }
        }

        let phases: Vec<f64> = match &self.phases {
            None => vec![0.0; n],
            Some(p) => match (&p.values, p.uniform) {
                (Some(values), None) => {
                    if values.len() != n {
                        violations.push(format!(
                            "phases.values has {} entries for {n} nodes",
                            values.len()
                        ));
                    }
                    if let Some(bad) = values.iter().find(|t| !t.is_finite()) {
                        violations.push(format!("phases.values contains {bad}"));
                    }
                    values.clone()
                }
                (None, Some(theta)) => {
                    if !theta.is_finite() {
                        violations.push(format!("phases.uniform = {theta} must be finite"));
                    }
                    vec![theta; n]
                }
                (Some(_), Some(_)) => {
                    violations
                        .push("phases: set either values or uniform, not both".into());
                    vec![0.0; n]
                }
                (None, None) => {
                    violations.push("phases: set values or uniform".into());
                    vec![0.0; n]
                }
            },
        };

        let sensing = match &self.sensing {
            None => None,
            Some(s) => {
                if s.rounds == 0 {
                    violations.push("sensing.rounds must be positive".into());
                }
                let window = s.branch_window.unwrap_or(DEFAULT_BRANCH_WINDOW);
                if !(window.0.is_finite() && window.1.is_finite() && window.0 < window.1) {
                    violations.push(format!(
                        "sensing.branch_window = ({}, {}) must be an ordered finite pair",
                        window.0, window.1
                    ));
                }
                Some(SensingEcho {
                    rounds: s.rounds,
                    branch_window: window,
                })
            }
        };

        self.validate_adversary(effective_n, n, &mut violations);

        if self.seeds.repetitions == 0 {
            violations.push("seeds.repetitions must be positive".into());
        }

        let formats = self
            .output
            .formats
            .clone()
            .unwrap_or_else(|| vec![ReportFormat::StructuredRecord]);
        if formats.is_empty() {
            violations.push("output.formats must name at least one format".into());
        }
        let directory = self
            .output
            .directory
            .as_ref()
            .map(|p| p.to_string_lossy().into_owned());
        if directory.is_none() {
            for f in &formats {
                if *f != ReportFormat::StructuredRecord {
                    violations.push(format!(
                        "output.directory is required for the {} format",
                        match f {
                            ReportFormat::SummaryTable => "summary-table",
                            ReportFormat::PerTestLog => "per-test-log",
                            ReportFormat::StructuredRecord => unreachable!(),
                        }
                    ));
                }
            }
        }

        let qfi = match &self.qfi {
            None => None,
            Some(q) => {
                let family_nodes = match q.state {
                    StateFamilyConfig::Ghz { n } => n,
                    StateFamilyConfig::DephasedGhz { n, coherence } => {
                        if !(0.0..=1.0).contains(&coherence) {
                            violations.push(format!(
                                "qfi.state.coherence = {coherence} must lie in [0, 1]"
                            ));
                        }
                        n
                    }
                    StateFamilyConfig::PlusProduct { n } => n,
                    StateFamilyConfig::FunctionResource => function.n_nodes(),
                };
                if family_nodes < 2 {
                    violations.push("qfi.state needs at least 2 qubits".into());
                }
                if family_nodes > tol::QUBIT_CAP_DEFAULT {
                    violations.push(format!(
                        "qfi.state spans {family_nodes} qubits, above the cap {}",
                        tol::QUBIT_CAP_DEFAULT
                    ));
                }
                let direction = match &q.direction {
                    None => vec![1.0; family_nodes],
                    Some(d) => {
                        if d.len() != family_nodes {
                            violations.push(format!(
                                "qfi.direction has {} entries for {family_nodes} nodes",
                                d.len()
                            ));
                        }
                        d.clone()
                    }
                };
                let bures_step = q.bures_step.unwrap_or(DEFAULT_QFI_STEP);
                if !(bures_step > 0.0) {
                    violations.push(format!("qfi.bures_step = {bures_step} must be positive"));
                }
                Some(QfiEcho {
                    state: q.state.clone(),
                    direction,
                    bures_step,
                })
            }
        };

        if !violations.is_empty() {
            bail!(
                "scenario validation failed:\n  - {}",
                violations.join("\n  - ")
            );
        }

        let derived = DerivedEcho {
            effective_n,
            n_test: verification.n_test(effective_n)?,
            n_total: verification::total_copies(
                effective_n,
                verification.n_test(effective_n)?,
                lambda,
            ),
            threshold: verification::acceptance_threshold(effective_n, lambda),
            constraint_violations,
        };

        Ok(ResolvedScenario {
            topology: TopologyEcho {
                nodes: n,
                honest,
                verifier,
            },
            verification,
            adversary: AdversaryEcho {
                coordination_seed: self.adversary.coordination_seed,
                source: self.adversary.source.clone(),
                uniform_channel: self.adversary.uniform_channel.clone(),
                channel: self.adversary.channel.clone(),
                node: self.adversary.node.clone(),
            },
            function,
            phases,
            sensing,
            qfi,
            seeds: SeedsEcho {
                master: self.seeds.master,
                repetitions: self.seeds.repetitions,
            },
            output: OutputEcho { directory, formats },
            derived,
        })
    }

    fn validate_adversary(&self, effective_n: usize, n: usize, violations: &mut Vec<String>) {
        let adv = &self.adversary;
        if let Some(SourceConfig::FixedBasisState { bits }) = &adv.source {
            if bits.len() != effective_n {
                violations.push(format!(
                    "adversary.source.bits has {} entries for a {effective_n}-qubit resource",
                    bits.len()
                ));
            }
            if let Some(bad) = bits.iter().find(|&&b| b > 1) {
                violations.push(format!("adversary.source.bits contains {bad}; use 0 or 1"));
            }
        }
        if let Some(SourceConfig::Channel { channel }) = &adv.source {
            if let Err(e) = channel.kraus_operators() {
                violations.push(format!("adversary.source.channel: {e}"));
            }
        }
        if adv.uniform_channel.is_some() && !adv.channel.is_empty() {
            violations.push(
                "adversary: set uniform_channel or per-qubit channel entries, not both".into(),
            );
        }
        if let Some(spec) = &adv.uniform_channel {
            if let Err(e) = spec.kraus_operators() {
                violations.push(format!("adversary.uniform_channel: {e}"));
            }
        }
        let mut seen_qubits = BTreeSet::new();
        for entry in &adv.channel {
            if entry.qubit >= effective_n {
                violations.push(format!(
                    "adversary.channel qubit {} is outside the {effective_n}-qubit resource",
                    entry.qubit
                ));
            }
            if !seen_qubits.insert(entry.qubit) {
                violations.push(format!(
                    "adversary.channel lists qubit {} twice",
                    entry.qubit
                ));
            }
            if let Err(e) = entry.channel.kraus_operators() {
                violations.push(format!("adversary.channel[{}]: {e}", entry.qubit));
            }
        }
        let mut seen_nodes = BTreeSet::new();
        for entry in &adv.node {
            if entry.node >= n {
                violations.push(format!(
                    "adversary.node entry {} is outside 0..{n}",
                    entry.node
                ));
            }
            if !seen_nodes.insert(entry.node) {
                violations.push(format!("adversary.node lists node {} twice", entry.node));
            }
            if let Err(e) = entry.behavior().validate() {
                violations.push(format!("adversary.node[{}]: {e}", entry.node));
            }
        }
    }

}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub out: Option<PathBuf>,
    pub formats: Option<Vec<ReportFormat>>,
}

/// A scenario after validation, with every default written out. This is
/// what reports echo; the `derived` block repeats the quantities the run
/// computes from the constants so a report is interpretable on its own.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedScenario {
    pub topology: TopologyEcho,
    pub verification: VerificationParams,
    pub adversary: AdversaryEcho,
    pub function: LinearFunctionSpec,
    pub phases: Vec<f64>,
    pub sensing: Option<SensingEcho>,
    pub qfi: Option<QfiEcho>,
    pub seeds: SeedsEcho,
    pub output: OutputEcho,
    pub derived: DerivedEcho,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyEcho {
    pub nodes: usize,
    pub honest: Vec<usize>,
    pub verifier: VerifierRole,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdversaryEcho {
    pub coordination_seed: u64,
    pub source: Option<SourceConfig>,
    pub uniform_channel: Option<ChannelSpec>,
    pub channel: Vec<ChannelEntry>,
    pub node: Vec<NodeBehaviorEntry>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SensingEcho {
    pub rounds: usize,
    pub branch_window: (f64, f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QfiEcho {
    pub state: StateFamilyConfig,
    pub direction: Vec<f64>,
    pub bures_step: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SeedsEcho {
    pub master: u64,
    pub repetitions: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputEcho {
    pub directory: Option<String>,
    pub formats: Vec<ReportFormat>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivedEcho {
    pub effective_n: usize,
    pub n_test: usize,
    pub n_total: usize,
    pub threshold: f64,
    pub constraint_violations: Vec<String>,
}

impl ResolvedScenario {
    pub fn topology(&self) -> Result<NetworkTopology> {
        NetworkTopology::new(
            self.topology.nodes,
            &self.topology.honest,
            self.topology.verifier,
        )
        .context("topology")
    }

    pub fn adversary_model(&self) -> Result<AdversaryModel> {
        let adv = &self.adversary;
        let source_attack = match &adv.source {
            None => SourceAttack::None,
            Some(SourceConfig::FixedBasisState { bits }) => {
                let mut index = 0usize;
                for &b in bits {
                    index = (index << 1) | b as usize;
                }
                SourceAttack::FixedState(
                    QuantumState::basis(bits.len(), index).context("adversary.source")?,
                )
            }
            Some(SourceConfig::Channel { channel }) => SourceAttack::Channel(channel.clone()),
        };
        let channel_noise = if let Some(spec) = &adv.uniform_channel {
            vec![Some(spec.clone()); self.derived.effective_n]
        } else if adv.channel.is_empty() {
            Vec::new()
        } else {
            let mut noise = vec![None; self.derived.effective_n];
            for entry in &adv.channel {
                noise[entry.qubit] = Some(entry.channel.clone());
            }
            noise
        };
        Ok(AdversaryModel {
            source_attack,
            channel_noise,
            dishonest_behavior: adv
                .node
                .iter()
                .map(|e| (e.node, e.behavior()))
                .collect(),
            coordination_seed: adv.coordination_seed,
            copy_hook: None,
        })
    }

    pub fn phase_vector(&self) -> PhaseVector {
        PhaseVector(self.phases.clone())
    }

    pub fn sensing_params(&self) -> Result<SensingParams> {
        let sensing = self
            .sensing
            .as_ref()
            .ok_or_else(|| anyhow!("this command needs a [sensing] section in the config"))?;
        let mut params = SensingParams::new(
            sensing.rounds,
            self.verification.clone(),
            self.function.clone(),
            self.phase_vector(),
        )?;
        params.branch_window = sensing.branch_window;
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [topology]
        nodes = 4

        [verification]
        m = 1.0
        c = 2.0

        [phases]
        uniform = 0.2

        [sensing]
        rounds = 1000

        [seeds]
        master = 42
    "#;

    #[test]
    fn minimal_config_resolves_with_documented_defaults() {
        let scenario = ScenarioConfig::parse(MINIMAL).unwrap().resolve().unwrap();
        assert_eq!(scenario.topology.honest, vec![0, 1, 2, 3]);
        assert_eq!(scenario.topology.verifier, VerifierRole::Node { index: 0 });
        assert_eq!(scenario.derived.n_test, 355);
        assert_eq!(scenario.derived.n_total, 2840);
        assert_eq!(scenario.derived.threshold, 0.03125);
        assert_eq!(scenario.function.weights, vec![1, 1, 1, 1]);
        assert_eq!(scenario.function.scale, 0.25);
        assert_eq!(scenario.phases, vec![0.2; 4]);
        assert_eq!(scenario.seeds.repetitions, 1);
        assert_eq!(
            scenario.sensing.unwrap().branch_window,
            DEFAULT_BRANCH_WINDOW
        );
        assert_eq!(scenario.output.formats, vec![ReportFormat::StructuredRecord]);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let text = MINIMAL.replace("rounds = 1000", "rounds = 1000\nbogus_knob = 3");
        let err = ScenarioConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("bogus_knob"), "{err}");
    }

    #[test]
    fn constraint_violations_are_listed_together() {
        // m = 0.1 gives the window (15, 2.25), which is empty, so c = 10
        // breaks both ends at once.
        let text = MINIMAL
            .replace("m = 1.0", "m = 0.1")
            .replace("c = 2.0", "c = 10.0");
        let err = ScenarioConfig::parse(&text)
            .unwrap()
            .resolve()
            .unwrap_err()
            .to_string();
        assert!(err.contains("3/(2m)"), "{err}");
        assert!(err.contains("(n-1)^2/4"), "{err}");
    }

    #[test]
    fn violated_constraints_pass_with_the_override_flag() {
        let text = MINIMAL.replace(
            "c = 2.0",
            "c = 10.0\nallow_constraint_violation = true",
        );
        let scenario = ScenarioConfig::parse(&text).unwrap().resolve().unwrap();
        assert_eq!(scenario.derived.constraint_violations.len(), 1);
    }

    #[test]
    fn weighted_function_assigns_qubits_and_flags() {
        let text = r#"
            [topology]
            nodes = 2

            [verification]
            m = 4.0
            c = 0.5

            [function]
            scale = 1.0
            weights = [2, -1]

            [phases]
            values = [0.2, 0.5]

            [seeds]
            master = 7
        "#;
        let scenario = ScenarioConfig::parse(text).unwrap().resolve().unwrap();
        assert_eq!(scenario.derived.effective_n, 3);
        let (_, assignment) =
            sensornet_core::encoding::resource_state_for_function(&scenario.function).unwrap();
        assert_eq!(assignment.x_flags(), vec![false, false, true]);
    }

    #[test]
    fn verifier_shape_must_match_lambda() {
        let crs_at_lambda_one = MINIMAL.replace("nodes = 4", "nodes = 4\nverifier = \"crs\"");
        assert!(ScenarioConfig::parse(&crs_at_lambda_one)
            .unwrap()
            .resolve()
            .is_err());

        let node_at_lambda_two = MINIMAL.replace("c = 2.0", "c = 2.0\nlambda = 2");
        assert!(ScenarioConfig::parse(&node_at_lambda_two)
            .unwrap()
            .resolve()
            .is_err());

        let fixed = MINIMAL
            .replace("nodes = 4", "nodes = 4\nverifier = \"crs\"")
            .replace("c = 2.0", "c = 2.0\nlambda = 2");
        assert!(ScenarioConfig::parse(&fixed).unwrap().resolve().is_ok());
    }

    #[test]
    fn phases_must_pick_exactly_one_form() {
        let both = MINIMAL.replace("uniform = 0.2", "uniform = 0.2\nvalues = [0.1, 0.1, 0.1, 0.1]");
        assert!(ScenarioConfig::parse(&both).unwrap().resolve().is_err());

        let neither = MINIMAL.replace("uniform = 0.2", "");
        assert!(ScenarioConfig::parse(&neither).unwrap().resolve().is_err());
    }

    #[test]
    fn basis_state_source_resolves_to_the_right_index() {
        let text = MINIMAL.replace(
            "[phases]",
            "[adversary.source]\nkind = \"fixed-basis-state\"\nbits = [0, 0, 0, 0]\n\n[phases]",
        );
        let scenario = ScenarioConfig::parse(&text).unwrap().resolve().unwrap();
        let model = scenario.adversary_model().unwrap();
        match model.source_attack {
            SourceAttack::FixedState(state) => {
                assert_eq!(state.n_qubits(), 4);
                let amps = state.amplitudes().unwrap();
                assert_eq!(amps[0].re, 1.0);
            }
            _ => panic!("expected a fixed-state source"),
        }
    }
}
