//! Parameter sweeps: rerun one scenario with a single numeric config
//! field stepped through a value list, and tabulate the bound-relevant
//! quantities per point.
//!
//! The axis is edited in the raw TOML document and the result is parsed
//! again from scratch, so every point passes the same validation as a
//! hand-written config.

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use sensornet_core::sensing::{self};
use sensornet_core::verification;

use crate::config::{Overrides, ScenarioConfig};
use crate::report::mean_std;
use crate::run::{self, Command, ScenarioRun};

pub struct SweepOutcome {
    pub axis: String,
    pub points: Vec<SweepPoint>,
}

pub struct SweepPoint {
    pub value: f64,
    pub run: ScenarioRun,
    pub row: SweepRow,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub acceptance_rate: Option<f64>,
    pub mean_failure_rate: Option<f64>,
    /// Fidelity floor evaluated at the mean failure rate of accepted runs.
    pub fidelity_bound_at_mean_f: Option<f64>,
    pub mean_fidelity: Option<f64>,
    pub privacy_eps_over_n: Option<f64>,
    pub privacy_eps_definition: Option<f64>,
    pub measured_privacy_epsilon: Option<f64>,
    pub mean_estimate: Option<f64>,
    pub std_estimate: Option<f64>,
}

/// Replace the numeric leaf at a dotted path, e.g.
/// "adversary.uniform_channel.p" or "verification.c". The path must
/// already exist in the document; integer leaves only accept whole values.
pub fn apply_axis(doc: &toml::Value, path: &str, value: f64) -> Result<toml::Value> {
    let mut out = doc.clone();
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        bail!("axis path {path:?} has an empty segment");
    }
    let mut cursor = &mut out;
    for (i, segment) in segments.iter().enumerate() {
        let table = cursor.as_table_mut().ok_or_else(|| {
            anyhow!(
                "axis path {path:?}: {} is not a table",
                segments[..i].join(".")
            )
        })?;
        cursor = table.get_mut(*segment).ok_or_else(|| {
            anyhow!(
                "axis path {path:?} not found in the config; the swept field must be \
                 written out explicitly, defaults cannot be swept"
            )
        })?;
    }
    match cursor {
        toml::Value::Float(f) => *f = value,
        toml::Value::Integer(i) => {
            if value.fract() != 0.0 {
                bail!("axis {path:?} is an integer field; {value} is not a whole number");
            }
            *i = value as i64;
        }
        other => bail!(
            "axis {path:?} addresses a {} field, not a numeric one",
            other.type_str()
        ),
    }
    Ok(out)
}

pub fn run_sweep(
    config_text: &str,
    overrides: &Overrides,
    axis: &str,
    values: &[f64],
) -> Result<SweepOutcome> {
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    let doc: toml::Value = toml::from_str(config_text).context("config parse failed")?;

    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let edited = apply_axis(&doc, axis, value)?;
        let mut config: ScenarioConfig = edited
            .try_into()
            .map_err(|e| anyhow!("config invalid at {axis} = {value}: {e}"))?;
        config.apply(overrides);
        let scenario = config
            .resolve()
            .with_context(|| format!("at {axis} = {value}"))?;

        let command = if scenario.sensing.is_some() {
            Command::Sense
        } else {
            Command::Verify
        };
        let run = run::run_scenario(&scenario, command)
            .with_context(|| format!("at {axis} = {value}"))?;

        let measured_eps = measured_privacy(&scenario)?;
        let row = tabulate(axis, value, &scenario, &run, measured_eps);
        points.push(SweepPoint { value, run, row });
    }
    Ok(SweepOutcome {
        axis: axis.to_string(),
        points,
    })
}

/// Mean measured privacy leakage over one audit per repetition, reusing
/// the repetition seeds so the audited states match the swept run's.
/// None when fewer than two nodes are honest (hiding needs a partner).
fn measured_privacy(scenario: &crate::config::ResolvedScenario) -> Result<Option<f64>> {
    if scenario.topology.honest.len() < 2 {
        return Ok(None);
    }
    let audit_run = run::run_scenario(scenario, Command::PrivacyAudit)?;
    Ok(audit_run.report.aggregate.mean_privacy_epsilon)
}

fn tabulate(
    axis: &str,
    value: f64,
    scenario: &crate::config::ResolvedScenario,
    run: &ScenarioRun,
    measured_privacy_epsilon: Option<f64>,
) -> SweepRow {
    let agg = &run.report.aggregate;
    let params = &scenario.verification;
    let n = scenario.derived.effective_n;
    let honest = scenario.topology.honest.len();

    // Bound columns are evaluated at the mean failure rate of accepted
    // repetitions; with none accepted the bounds claim nothing.
    let accepted_f: Vec<f64> = run
        .report
        .repetitions
        .iter()
        .filter_map(|r| {
            if let Some(v) = &r.verification {
                v.accepted.then_some(v.average_failure_rate)
            } else {
                r.sensing.as_ref().map(|s| s.mean_accepted_failure_rate)
            }
        })
        .collect();
    let (mean_accepted_f, _) = mean_std(&accepted_f);

    let fidelity_bound_at_mean_f = mean_accepted_f.map(|f| {
        if params.lambda == 1 {
            verification::fidelity_bound(params.c, n, f.min(1.0))
        } else {
            verification::symmetrised_fidelity_bound(params.m, params.c, n, f, params.lambda, honest)
                .fidelity_floor
        }
    });
    let guarantee = mean_accepted_f
        .and_then(|f| sensing::privacy_guarantee(params.m, params.c, n, f, honest).ok());

    // Sense repetitions report 1 - mean accepted fidelity rather than the
    // fidelity itself; undo that for the table.
    let mean_fidelity = agg.mean_fidelity.or_else(|| {
        let fidelities: Vec<f64> = run
            .report
            .repetitions
            .iter()
            .filter_map(|r| r.sensing.as_ref())
            .map(|s| 1.0 - s.epsilon_measured)
            .collect();
        mean_std(&fidelities).0
    });

    let acceptance_rate = agg.acceptance_rate.or_else(|| {
        // Sense reports count rounds, not repetitions; surface the round
        // acceptance fraction instead.
        let fractions: Vec<f64> = run
            .report
            .repetitions
            .iter()
            .filter_map(|r| r.sensing.as_ref())
            .map(|s| s.rounds_used as f64 / (s.rounds_used + s.rounds_discarded) as f64)
            .collect();
        mean_std(&fractions).0
    });

    SweepRow {
        axis: axis.to_string(),
        value,
        acceptance_rate,
        mean_failure_rate: agg.mean_failure_rate,
        fidelity_bound_at_mean_f,
        mean_fidelity,
        privacy_eps_over_n: guarantee.as_ref().map(|g| g.eps_over_n),
        privacy_eps_definition: guarantee.as_ref().map(|g| g.eps_definition),
        measured_privacy_epsilon,
        mean_estimate: agg.mean_estimate,
        std_estimate: agg.std_estimate,
    }
}

pub fn render_sweep_table(outcome: &SweepOutcome) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for point in &outcome.points {
        w.serialize(&point.row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> toml::Value {
        toml::from_str(
            r#"
            [verification]
            c = 2.0

            [sensing]
            rounds = 100

            [adversary.uniform_channel]
            kind = "dephasing"
            p = 0.1
        "#,
        )
        .unwrap()
    }

    #[test]
    fn float_and_integer_leaves_are_replaced() {
        let edited = apply_axis(&doc(), "verification.c", 0.5).unwrap();
        assert_eq!(edited["verification"]["c"].as_float(), Some(0.5));

        let edited = apply_axis(&doc(), "sensing.rounds", 250.0).unwrap();
        assert_eq!(edited["sensing"]["rounds"].as_integer(), Some(250));

        let edited = apply_axis(&doc(), "adversary.uniform_channel.p", 0.3).unwrap();
        assert_eq!(
            edited["adversary"]["uniform_channel"]["p"].as_float(),
            Some(0.3)
        );
    }

    #[test]
    fn fractional_values_cannot_land_on_integer_fields() {
        let err = apply_axis(&doc(), "sensing.rounds", 10.5).unwrap_err();
        assert!(err.to_string().contains("whole number"), "{err}");
    }

    #[test]
    fn missing_and_non_numeric_axes_are_rejected() {
        assert!(apply_axis(&doc(), "verification.missing", 1.0).is_err());
        assert!(apply_axis(&doc(), "nope.c", 1.0).is_err());
        let err = apply_axis(&doc(), "adversary.uniform_channel.kind", 1.0).unwrap_err();
        assert!(err.to_string().contains("not a numeric"), "{err}");
    }
}
