//! The `report.json` document and its console rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use wasp_core::engine::{FinalPrediction, RunMetadata, WinnerAccuracy};
use wasp_core::voting::{stochastic_dominance, Direction, DominanceOrder, Election, VotingSystem};
use wasp_core::Result;

use crate::ACCURACY_FILE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixInfo {
    pub file: String,
    pub rows: usize,
    pub columns: usize,
}

/// One strategy's value under every voting system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaRow {
    pub strategy: String,
    pub fptp: f64,
    pub positional: f64,
    pub evaluative: f64,
    pub ecdf_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEntry {
    pub system: VotingSystem,
    pub direction: Direction,
    pub winners: Vec<String>,
    /// Present only when the tie-break was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_break_winner: Option<String>,
}

/// Pairs `[dominating, dominated]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub first_order: Vec<[String; 2]>,
    pub second_order: Vec<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<RunMetadata>,
    pub accuracy_matrix: MatrixInfo,
    pub criteria: Vec<CriteriaRow>,
    pub selections: Vec<SelectionEntry>,
    pub dominance: Dominance,
    #[serde(default)]
    pub final_predictions: Vec<FinalPrediction>,
    #[serde(default)]
    pub winner_accuracy: Vec<WinnerAccuracy>,
    pub artifacts: Vec<String>,
}

fn dominance_pairs(election: &Election, order: DominanceOrder) -> Result<Vec<[String; 2]>> {
    let relation = stochastic_dominance(&election.w3, order)?;
    let names = election.strategies();
    let mut pairs = Vec::new();
    for (i, row) in relation.iter().enumerate() {
        for (j, &dominates) in row.iter().enumerate() {
            if dominates {
                pairs.push([names[i].clone(), names[j].clone()]);
            }
        }
    }
    Ok(pairs)
}

impl ReportDocument {
    pub fn from_election(election: &Election, tie_break: bool) -> Result<Self> {
        let names = election.strategies();
        let value = |system, p: usize| election.selection(system).criterion_values[p];
        let criteria = names
            .iter()
            .enumerate()
            .map(|(p, name)| CriteriaRow {
                strategy: name.clone(),
                fptp: value(VotingSystem::Fptp, p),
                positional: value(VotingSystem::Positional, p),
                evaluative: value(VotingSystem::Evaluative, p),
                ecdf_auc: value(VotingSystem::EcdfAuc, p),
            })
            .collect();
        let broken = election.tie_broken_winners();
        let selections = election
            .selections
            .iter()
            .zip(broken)
            .map(|(s, (_, winner))| SelectionEntry {
                system: s.system,
                direction: s.direction,
                winners: s.winners.clone(),
                tie_break_winner: tie_break.then_some(winner),
            })
            .collect();
        Ok(ReportDocument {
            version: env!("CARGO_PKG_VERSION").to_string(),
            metadata: None,
            accuracy_matrix: MatrixInfo {
                file: ACCURACY_FILE.into(),
                rows: election.w1.values.nrows(),
                columns: names.len(),
            },
            criteria,
            selections,
            dominance: Dominance {
                first_order: dominance_pairs(election, DominanceOrder::First)?,
                second_order: dominance_pairs(election, DominanceOrder::Second)?,
            },
            final_predictions: Vec::new(),
            winner_accuracy: Vec::new(),
            artifacts: Vec::new(),
        })
    }

    fn is_winner(&self, system: VotingSystem, strategy: &str) -> bool {
        self.selections
            .iter()
            .find(|s| s.system == system)
            .is_some_and(|s| s.winners.iter().any(|w| w == strategy))
    }

    /// Criteria table with three decimals; `*` marks winners.
    pub fn criteria_table(&self) -> String {
        let width = self
            .criteria
            .iter()
            .map(|c| c.strategy.len())
            .max()
            .unwrap_or(0)
            .max("strategy".len());
        let mut out = format!(
            "{:<width$}  {:>11}  {:>11}  {:>11}  {:>11}\n",
            "strategy", "fptp", "positional", "evaluative", "ecdf_auc"
        );
        for row in &self.criteria {
            let _ = write!(out, "{:<width$}", row.strategy);
            for (system, v) in [
                (VotingSystem::Fptp, row.fptp),
                (VotingSystem::Positional, row.positional),
                (VotingSystem::Evaluative, row.evaluative),
                (VotingSystem::EcdfAuc, row.ecdf_auc),
            ] {
                let mark = if self.is_winner(system, &row.strategy) { "*" } else { " " };
                let _ = write!(out, "  {:>10.3}{mark}", v);
            }
            out.push('\n');
        }
        for s in &self.selections {
            let _ = write!(out, "{}: {}", s.system.name(), s.winners.join(", "));
            if let Some(w) = &s.tie_break_winner {
                if s.winners.len() > 1 {
                    let _ = write!(out, " (tie-break: {w})");
                }
            }
            out.push('\n');
        }
        out
    }
}
