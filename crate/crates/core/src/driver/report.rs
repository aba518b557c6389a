//! Repair reports, as text and JSON.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ir::{FuncSig, LineId, Program};
use crate::localizer::LocalizationResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RepairOutcome {
    Repaired { line: LineId, patch: String, program: String },
    Failed { reason: String },
}

/// What happened after a localization round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepResult {
    NotAttempted,
    Descend { callee: String },
    NoSketch { reason: String },
    NoPatch,
    Patched { patch: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub function: String,
    pub localized: LocalizationResult,
    /// Candidate lines the localization query ranged over.
    pub candidates: usize,
    pub sketch: Option<String>,
    pub grammar_size: usize,
    pub candidates_tried: usize,
    pub synthesis: StepResult,
}

impl IterationRecord {
    pub fn new(f: &FuncSig, localized: LocalizationResult, candidates: usize) -> Self {
        IterationRecord {
            function: f.to_string(),
            localized,
            candidates,
            sketch: None,
            grammar_size: 0,
            candidates_tried: 0,
            synthesis: StepResult::NotAttempted,
        }
    }
}

/// Wall-clock seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub localization: f64,
    pub synthesis: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    pub outcome: RepairOutcome,
    pub iterations: Vec<IterationRecord>,
    pub timings: Timings,
    #[serde(skip)]
    pub program: Option<Program>,
}

impl RepairReport {
    pub fn is_repaired(&self) -> bool {
        matches!(self.outcome, RepairOutcome::Repaired { .. })
    }

    pub fn fault_line(&self) -> Option<LineId> {
        match &self.outcome {
            RepairOutcome::Repaired { line, .. } => Some(*line),
            RepairOutcome::Failed { .. } => None,
        }
    }

    pub fn patch(&self) -> Option<&str> {
        match &self.outcome {
            RepairOutcome::Repaired { patch, .. } => Some(patch),
            RepairOutcome::Failed { .. } => None,
        }
    }

    /// Functions in the order they were targeted, without repeats.
    pub fn targets(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.iterations {
            if out.last() != Some(&r.function.as_str()) {
                out.push(&r.function);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for StepResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepResult::NotAttempted => write!(f, "-"),
            StepResult::Descend { callee } => write!(f, "call statement, descend into {callee}"),
            StepResult::NoSketch { reason } => write!(f, "no sketch: {reason}"),
            StepResult::NoPatch => write!(f, "no patch found"),
            StepResult::Patched { patch } => write!(f, "patch `{patch}`"),
        }
    }
}

impl fmt::Display for RepairReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.outcome {
            RepairOutcome::Repaired { line, patch, .. } => writeln!(f, "repaired: line {line}: {patch}")?,
            RepairOutcome::Failed { reason } => writeln!(f, "failed: {reason}")?,
        }
        for (i, r) in self.iterations.iter().enumerate() {
            let loc = match r.localized {
                LocalizationResult::FaultAt(l) => format!("line {l}"),
                LocalizationResult::NoFault => "no fault".into(),
            };
            write!(f, "  {:>2}. {:<28} {:<10} {}", i + 1, r.function, loc, r.synthesis)?;
            if let Some(s) = &r.sketch {
                write!(f, " [{s}; {} productions, {} tried]", r.grammar_size, r.candidates_tried)?;
            }
            writeln!(f)?;
        }
        write!(
            f,
            "time: localization {:.3}s, synthesis {:.3}s, total {:.3}s",
            self.timings.localization, self.timings.synthesis, self.timings.total
        )
    }
}
