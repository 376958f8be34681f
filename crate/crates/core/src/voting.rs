//! Voting systems that elect a strategy from the accuracy matrix.
//!
//! Each row of the accuracy matrix is a voter and each column a candidate.
//! Rows are turned into votes three ways (indicator of the minimum, ranks,
//! min-max scaling) and four criteria are computed from those votes.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::accuracy::AccuracyMatrix;
use crate::error::{Result, WaspError};
use crate::matrix::LabeledMatrix;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Fptp,
    Positional,
    Scaled,
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transform::Fptp => "fptp",
            Transform::Positional => "positional",
            Transform::Scaled => "scaled",
        })
    }
}

/// W1, W2 or W3.
#[derive(Debug, Clone, PartialEq)]
pub struct VotingMatrix {
    pub values: LabeledMatrix,
    pub transform: Transform,
}

impl VotingMatrix {
    /// Accepts a scaled matrix from outside (for example a saved `w3.csv`).
    pub fn scaled(values: LabeledMatrix) -> Result<Self> {
        check_unit_interval(&values)?;
        Ok(VotingMatrix {
            values,
            transform: Transform::Scaled,
        })
    }

    fn require(&self, expected: Transform) -> Result<()> {
        if self.transform == expected {
            Ok(())
        } else {
            Err(WaspError::Transform {
                expected: expected.to_string(),
                actual: self.transform.to_string(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VotingSystem {
    Fptp,
    Positional,
    Evaluative,
    EcdfAuc,
}

impl VotingSystem {
    pub const ALL: [VotingSystem; 4] = [
        VotingSystem::Fptp,
        VotingSystem::Positional,
        VotingSystem::Evaluative,
        VotingSystem::EcdfAuc,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            VotingSystem::Fptp => "fptp",
            VotingSystem::Positional => "positional",
            VotingSystem::Evaluative => "evaluative",
            VotingSystem::EcdfAuc => "ecdf_auc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub system: VotingSystem,
    pub criterion_values: Vec<f64>,
    /// Every strategy whose criterion ties the best value, in column order.
    pub winners: Vec<String>,
    pub direction: Direction,
}

impl SelectionResult {
    fn elect(system: VotingSystem, criterion_values: Vec<f64>, direction: Direction, names: &[String]) -> Self {
        let best = match direction {
            Direction::HigherBetter => criterion_values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Direction::LowerBetter => criterion_values.iter().copied().fold(f64::INFINITY, f64::min),
        };
        let tol = 1e-12 * best.abs().max(1.0);
        let winners = criterion_values
            .iter()
            .zip(names)
            .filter(|(v, _)| (*v - best).abs() <= tol)
            .map(|(_, n)| n.clone())
            .collect();
        SelectionResult {
            system,
            criterion_values,
            winners,
            direction,
        }
    }

    pub fn is_tied(&self) -> bool {
        self.winners.len() > 1
    }
}

/// Deterministic tie-break among `result.winners`: the lowest ECDF-AUC, then
/// the lexicographically smallest strategy name.
pub fn break_tie(result: &SelectionResult, ecdf: &SelectionResult, names: &[String]) -> String {
    let auc = |name: &String| {
        names
            .iter()
            .position(|n| n == name)
            .map_or(f64::INFINITY, |i| ecdf.criterion_values[i])
    };
    result
        .winners
        .iter()
        .min_by(|a, b| auc(a).total_cmp(&auc(b)).then_with(|| a.cmp(b)))
        .cloned()
        .expect("a selection always has at least one winner")
}

fn map_rows(a: &LabeledMatrix, f: impl Fn(&[f64]) -> Vec<f64>) -> LabeledMatrix {
    let data: Vec<f64> = (0..a.nrows()).flat_map(|r| f(a.row(r))).collect();
    a.with_data(data)
}

fn column_stat(m: &LabeledMatrix, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..m.ncols()).map(|c| f(&m.column(c))).collect()
}

fn fptp_row(row: &[f64]) -> Vec<f64> {
    let min = row.iter().copied().fold(f64::INFINITY, f64::min);
    let tied = row.iter().filter(|&&v| v == min).count() as f64;
    row.iter().map(|&v| if v == min { 1.0 / tied } else { 0.0 }).collect()
}

/// Midranks with `P` for the smallest value and 1 for the largest.
fn positional_row(row: &[f64]) -> Vec<f64> {
    let p = row.len() as f64;
    row.iter()
        .map(|&v| {
            let below = row.iter().filter(|&&w| w < v).count() as f64;
            let equal = row.iter().filter(|&&w| w == v).count() as f64;
            p + 1.0 - (below + (equal + 1.0) / 2.0)
        })
        .collect()
}

fn scaled_row(row: &[f64]) -> Vec<f64> {
    let min = row.iter().copied().fold(f64::INFINITY, f64::min);
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return vec![1.0; row.len()];
    }
    row.iter().map(|&v| 1.0 - (v - min) / (max - min)).collect()
}

/// First past the post: each row gives one vote, split evenly between the
/// strategies tied at the row minimum. The criterion is the column sum.
pub fn fptp_vote(a: &AccuracyMatrix) -> (VotingMatrix, SelectionResult) {
    let w1 = map_rows(&a.values, fptp_row);
    let sums = column_stat(&w1, stats::order_free_sum);
    let result = SelectionResult::elect(VotingSystem::Fptp, sums, Direction::HigherBetter, w1.col_labels());
    (
        VotingMatrix {
            values: w1,
            transform: Transform::Fptp,
        },
        result,
    )
}

/// Positional voting on midranks; the criterion is the column median.
pub fn positional_vote(a: &AccuracyMatrix) -> (VotingMatrix, SelectionResult) {
    let w2 = map_rows(&a.values, positional_row);
    let medians = column_stat(&w2, stats::median);
    let result = SelectionResult::elect(
        VotingSystem::Positional,
        medians,
        Direction::HigherBetter,
        w2.col_labels(),
    );
    (
        VotingMatrix {
            values: w2,
            transform: Transform::Positional,
        },
        result,
    )
}

/// Min-max scaling of each row, reversed so the most accurate strategy
/// scores 1. A constant row scores 1 everywhere.
pub fn scale_rows(a: &AccuracyMatrix) -> VotingMatrix {
    VotingMatrix {
        values: map_rows(&a.values, scaled_row),
        transform: Transform::Scaled,
    }
}

pub fn evaluative_vote(w3: &VotingMatrix) -> Result<SelectionResult> {
    w3.require(Transform::Scaled)?;
    let medians = column_stat(&w3.values, stats::median);
    Ok(SelectionResult::elect(
        VotingSystem::Evaluative,
        medians,
        Direction::HigherBetter,
        w3.values.col_labels(),
    ))
}

/// Empirical CDF of one strategy's scaled scores, as right-continuous steps:
/// `F(x) = cdf[i]` for `x` in `[x[i], x[i+1])`, zero left of `x[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfCurve {
    pub strategy: String,
    pub x: Vec<f64>,
    pub cdf: Vec<f64>,
    pub auc: f64,
}

impl EcdfCurve {
    fn from_scores(strategy: &str, scores: &[f64], auc: f64) -> Self {
        let sorted = stats::sorted(scores);
        let n = sorted.len() as f64;
        let (mut x, mut cdf) = (Vec::new(), Vec::new());
        for (i, &v) in sorted.iter().enumerate() {
            let share = (i + 1) as f64 / n;
            if x.last() == Some(&v) {
                *cdf.last_mut().expect("x and cdf have equal length") = share;
            } else {
                x.push(v);
                cdf.push(share);
            }
        }
        EcdfCurve {
            strategy: strategy.to_string(),
            x,
            cdf,
            auc,
        }
    }

    pub fn eval(&self, at: f64) -> f64 {
        match self.x.partition_point(|&v| v <= at) {
            0 => 0.0,
            i => self.cdf[i - 1],
        }
    }
}

fn check_unit_interval(m: &LabeledMatrix) -> Result<()> {
    if let Some(i) = m.data().iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(WaspError::Domain(format!(
            "scaled entry ({}, {}) = {} lies outside [0, 1]",
            i / m.ncols() + 1,
            i % m.ncols() + 1,
            m.data()[i]
        )));
    }
    Ok(())
}

/// Area under each column's ECDF on `[0, 1]`, which equals one minus the
/// column mean. Smaller is better.
pub fn ecdf_auc_vote(w3: &VotingMatrix) -> Result<(SelectionResult, Vec<EcdfCurve>)> {
    w3.require(Transform::Scaled)?;
    check_unit_interval(&w3.values)?;
    let s = w3.values.nrows() as f64;
    let names = w3.values.col_labels();
    let mut aucs = Vec::with_capacity(names.len());
    let mut curves = Vec::with_capacity(names.len());
    for (c, name) in names.iter().enumerate() {
        let column = w3.values.column(c);
        let auc = 1.0 - stats::order_free_sum(&column) / s;
        curves.push(EcdfCurve::from_scores(name, &column, auc));
        aucs.push(auc);
    }
    let result = SelectionResult::elect(VotingSystem::EcdfAuc, aucs, Direction::LowerBetter, names);
    Ok((result, curves))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DominanceOrder {
    First,
    Second,
}

/// `relation[i][j]` is true when strategy `i` dominates strategy `j`
/// (higher scores being better). Dominance needs the inequality to hold
/// everywhere and to be strict somewhere.
pub fn stochastic_dominance(w3: &VotingMatrix, order: DominanceOrder) -> Result<Vec<Vec<bool>>> {
    w3.require(Transform::Scaled)?;
    let p = w3.values.ncols();
    let columns: Vec<Vec<f64>> = (0..p).map(|c| stats::sorted(&w3.values.column(c))).collect();
    let mut relation = vec![vec![false; p]; p];
    for i in 0..p {
        for j in 0..p {
            if i != j {
                relation[i][j] = match order {
                    DominanceOrder::First => first_order(&columns[i], &columns[j]),
                    DominanceOrder::Second => second_order(&columns[i], &columns[j]),
                };
            }
        }
    }
    Ok(relation)
}

/// With equal sample sizes, `F_a <= F_b` everywhere exactly when every
/// order statistic of `a` is at least the matching one of `b`.
fn first_order(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a != b
}

/// Compares `x -> integral of F from 0 to x`, which is piecewise linear with
/// kinks at the sample values, so checking the kinks is enough.
fn second_order(a: &[f64], b: &[f64]) -> bool {
    let integral = |sorted: &[f64], x: f64| -> f64 { sorted.iter().map(|&v| (x - v).max(0.0)).sum() };
    let mut strict = false;
    for &x in a.iter().chain(b).chain(std::iter::once(&1.0)) {
        match integral(a, x).partial_cmp(&integral(b, x)) {
            Some(Ordering::Greater) | None => return false,
            Some(Ordering::Less) => strict = true,
            Some(Ordering::Equal) => {}
        }
    }
    strict
}

/// Voting matrices and the four selections for one accuracy matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Election {
    pub w1: VotingMatrix,
    pub w2: VotingMatrix,
    pub w3: VotingMatrix,
    /// In the order of [`VotingSystem::ALL`].
    pub selections: Vec<SelectionResult>,
    pub ecdf: Vec<EcdfCurve>,
}

impl Election {
    pub fn strategies(&self) -> &[String] {
        self.w1.values.col_labels()
    }

    pub fn selection(&self, system: VotingSystem) -> &SelectionResult {
        self.selections
            .iter()
            .find(|s| s.system == system)
            .expect("an election holds every voting system")
    }

    /// Every strategy that wins under at least one system, in column order.
    pub fn all_winners(&self) -> Vec<String> {
        self.strategies()
            .iter()
            .filter(|name| self.selections.iter().any(|s| s.winners.contains(name)))
            .cloned()
            .collect()
    }

    /// One winner per system, ties resolved by [`break_tie`].
    pub fn tie_broken_winners(&self) -> Vec<(VotingSystem, String)> {
        let ecdf = self.selection(VotingSystem::EcdfAuc);
        self.selections
            .iter()
            .map(|s| (s.system, break_tie(s, ecdf, self.strategies())))
            .collect()
    }
}

pub fn hold_election(a: &AccuracyMatrix) -> Result<Election> {
    if a.ncols() < 2 {
        return Err(WaspError::Config("at least two strategies are required to vote".into()));
    }
    let (w1, fptp) = fptp_vote(a);
    let (w2, positional) = positional_vote(a);
    let w3 = scale_rows(a);
    let evaluative = evaluative_vote(&w3)?;
    let (ecdf_auc, ecdf) = ecdf_auc_vote(&w3)?;
    Ok(Election {
        w1,
        w2,
        w3,
        selections: vec![fptp, positional, evaluative, ecdf_auc],
        ecdf,
    })
}
