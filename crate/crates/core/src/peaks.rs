//! Peaks of (multi-)steps, the lattice-theoretic criticality test, the
//! classical critical-pair construction by unification, the equivalence
//! cross-check between the two, peak decomposition at an uncovered edge,
//! and bounded joinability / confluence reports.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::geometry::{internal_positions, ClusterError, Position, PositionSet};
use crate::inductive::{Gap, InductiveCluster};
use crate::rewriting::{
    make_multistep, multisteps_from, redex_occurrences, MultiStep, RedexOccurrence, Side,
    StepError, Trs, DEFAULT_OCCURRENCE_CAP,
};
use crate::terms::{
    enumerate_standard_terms, format_path, is_linear, match_pattern, rename_variables, standardize,
    unify, Path, Substitution, Term, TermError, Variable,
};

/// Default depth for joinability search.
pub const DEFAULT_JOIN_DEPTH: usize = 8;
/// Default cap on explored states per joinability search.
pub const DEFAULT_STATE_CAP: usize = 4096;
/// Default size bound for the equivalence check's term enumeration.
pub const DEFAULT_EQUIVALENCE_BOUND: usize = 6;

/// Errors for peak construction and analysis.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PeakError {
    #[error("the two steps have different sources: {left} vs {right}")]
    SourceMismatch { left: String, right: String },
    #[error("peak is critical")]
    PeakIsCritical,
    #[error("proper instance of a rule application, no analysis")]
    SinglePattern,
    #[error("peak contracts no redexes, nothing to decompose")]
    NoPatterns,
    #[error("{0}")]
    Step(#[from] StepError),
    #[error("{0}")]
    Term(#[from] TermError),
    #[error("{0}")]
    Cluster(#[from] ClusterError),
}

/// Two multi-steps from a common source. Construction standardizes the
/// source (renaming both steps) whenever it is linear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Peak {
    source: Term,
    left: MultiStep,
    right: MultiStep,
}

impl Peak {
    pub fn new(left: MultiStep, right: MultiStep) -> Result<Peak, PeakError> {
        let l = left.project(Side::Left);
        let r = right.project(Side::Left);
        if l != r {
            return Err(PeakError::SourceMismatch {
                left: l.to_string(),
                right: r.to_string(),
            });
        }
        if is_linear(&l) {
            let (source, renaming) = standardize(&l).expect("linear source standardizes");
            Ok(Peak {
                source,
                left: left.rename_variables(&renaming),
                right: right.rename_variables(&renaming),
            })
        } else {
            Ok(Peak {
                source: l,
                left,
                right,
            })
        }
    }

    pub fn source(&self) -> &Term {
        &self.source
    }

    pub fn left(&self) -> &MultiStep {
        &self.left
    }

    pub fn right(&self) -> &MultiStep {
        &self.right
    }

    pub fn swapped(&self) -> Peak {
        Peak {
            source: self.source.clone(),
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "source": self.source.to_string(),
            "left": self.left.to_json()["redexes"],
            "right": self.right.to_json()["redexes"],
        })
    }
}

/// The multi-step's cluster with rules replaced by their left-hand sides;
/// the refinement order extends to steps through this cluster.
pub fn lhs_cluster(m: &MultiStep) -> InductiveCluster {
    m.cluster_with(|rule| rule.lhs().term().clone())
}

/// The verdict of the lattice criticality test, with diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CriticalityReport {
    pub join_positions: PositionSet,
    pub top_positions: PositionSet,
    pub missing: PositionSet,
    pub is_critical: bool,
    pub is_trivial: bool,
    /// Size of the meet of the two lhs-clusters.
    pub overlap_size: usize,
}

/// Joins the two steps' lhs-clusters geometrically and compares against the
/// top cluster of the source: the peak is critical when nothing is missed.
pub fn is_critical(peak: &Peak) -> CriticalityReport {
    let left = lhs_cluster(peak.left()).to_geometric();
    let right = lhs_cluster(peak.right()).to_geometric();
    let join = left.positions().union(right.positions());
    let top = internal_positions(peak.source());
    let missing = top.difference(&join);
    let overlap = left.positions().intersection(right.positions());
    CriticalityReport {
        is_critical: missing.is_empty(),
        is_trivial: peak
            .left()
            .as_cluster()
            .canonical_eq(&peak.right().as_cluster()),
        join_positions: join,
        top_positions: top,
        missing,
        overlap_size: overlap.len(),
    }
}

/// For a peak whose steps jointly cover the whole source, the most general
/// critical peak it instantiates: the source with variable occurrences made
/// distinct and standardized, the same steps rebuilt, plus the variable
/// substitution mapping the general source back. `None` when the join is
/// not the top cluster.
pub fn variable_instance(peak: &Peak) -> Option<(Peak, Substitution)> {
    if !is_critical(peak).is_critical {
        return None;
    }
    let source = peak.source();
    let mut next = 1u64;
    let mut bindings = Vec::new();
    fn linearize(t: &Term, next: &mut u64, bindings: &mut Vec<(Variable, Term)>) -> Term {
        match t {
            Term::Var(v) => {
                let fresh = Variable::standard(*next);
                *next += 1;
                bindings.push((fresh.clone(), Term::Var(v.clone())));
                Term::Var(fresh)
            }
            Term::App(f, args) => Term::App(
                f.clone(),
                args.iter().map(|a| linearize(a, next, bindings)).collect(),
            ),
        }
    }
    let general = linearize(source, &mut next, &mut bindings);
    let sigma = Substitution::from_pairs(bindings);
    debug_assert_eq!(&sigma.apply(&general), source);
    let rebuild = |m: &MultiStep| -> MultiStep {
        let occs: Vec<RedexOccurrence> = m
            .occurrences()
            .into_iter()
            .map(|(rule, pos)| {
                RedexOccurrence::new(&general, pos, rule)
                    .expect("path exists in the generalized source")
                    .expect("patterns do not inspect variables")
            })
            .collect();
        make_multistep(&general, &occs).expect("disjointness is preserved")
    };
    let critical = Peak::new(rebuild(peak.left()), rebuild(peak.right()))
        .expect("rebuilt steps share the generalized source");
    debug_assert!(match_pattern(critical.source(), source)
        .map(|m| m.is_some())
        .unwrap_or(false));
    Some((critical, sigma))
}

/// A classical critical pair: an outer rule contracted at the root against
/// an inner rule contracted at a non-variable position of the outer
/// left-hand side, at their most general overlap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriticalPair {
    /// Left step: outer rule at the root. Right step: inner rule at `position`.
    pub peak: Peak,
    pub targets: (Term, Term),
    pub outer: String,
    pub inner: String,
    pub position: Path,
}

impl CriticalPair {
    pub fn to_json(&self) -> Value {
        json!({
            "source": self.peak.source().to_string(),
            "outer": self.outer,
            "inner": self.inner,
            "position": format_path(&self.position),
            "targets": [self.targets.0.to_string(), self.targets.1.to_string()],
        })
    }
}

/// Enumerates classical critical peaks by unification: for every ordered
/// rule pair and every non-variable position of the outer left-hand side,
/// rename apart, unify, and build the peak at the most general overlap.
/// The overlap of a rule with itself at the root is excluded as trivial.
/// Deterministic order: outer rule index, inner rule index, position.
pub fn classical_critical_peaks(trs: &Trs) -> Vec<CriticalPair> {
    let mut out = Vec::new();
    for (oi, outer) in trs.rules().iter().enumerate() {
        let outer_lhs = rename_apart(outer.lhs().term(), "xL");
        for (ii, inner) in trs.rules().iter().enumerate() {
            let inner_lhs = rename_apart(inner.lhs().term(), "yR");
            for position in outer.lhs().term().function_paths() {
                if position.is_empty() && oi == ii {
                    continue; // overlap of a rule with itself at the root
                }
                let sub = outer_lhs
                    .subterm_at(&position)
                    .expect("function path exists");
                let Some(mgu) = unify(&inner_lhs, sub) else {
                    continue;
                };
                let source = mgu.apply(&outer_lhs);
                let outer_occ = RedexOccurrence::new(&source, Vec::new(), outer)
                    .expect("root path")
                    .expect("source instantiates the outer lhs");
                let inner_occ = RedexOccurrence::new(&source, position.clone(), inner)
                    .expect("overlap position exists")
                    .expect("source instantiates the inner lhs at the overlap");
                let left = make_multistep(&source, &[outer_occ]).expect("single redex");
                let right = make_multistep(&source, &[inner_occ]).expect("single redex");
                let peak = Peak::new(left, right).expect("common source");
                let targets = (peak.left().target(), peak.right().target());
                out.push(CriticalPair {
                    peak,
                    targets,
                    outer: outer.name().to_string(),
                    inner: inner.name().to_string(),
                    position,
                });
            }
        }
    }
    out
}

// Renames the standard variables x1…xn into a private namespace, e.g. xL1…xLn.
fn rename_apart(lhs: &Term, namespace: &str) -> Term {
    let renaming: BTreeMap<Variable, Variable> = lhs
        .variables()
        .into_iter()
        .map(|v| {
            let i = v.standard_index().expect("rule lhs is standard");
            (v, Variable::from_name(&format!("{namespace}{i}")))
        })
        .collect();
    rename_variables(lhs, &renaming)
}

/// Outcome of the two-directional equivalence check between the lattice
/// definition of critical peaks and the classical construction.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EquivalenceReport {
    pub size_bound: usize,
    pub classical_count: usize,
    pub terms_checked: usize,
    pub lattice_critical_count: usize,
    /// Classical pairs that the lattice test does not deem critical.
    pub direction1_failures: Vec<Value>,
    /// Lattice-critical peaks with no classical counterpart.
    pub direction2_failures: Vec<Value>,
    pub passed: bool,
}

/// Direction 1: every classical critical peak is lattice-critical.
/// Direction 2: every lattice-critical, non-trivial peak of single steps
/// from a standardized term of at most `size_bound` function symbols equals
/// a classical pair, up to renaming and chiasmus.
pub fn equivalence_check(trs: &Trs, size_bound: usize) -> Result<EquivalenceReport, PeakError> {
    let classical = classical_critical_peaks(trs);
    let mut direction1_failures = Vec::new();
    for pair in &classical {
        let report = is_critical(&pair.peak);
        if !report.is_critical {
            direction1_failures.push(json!({
                "pair": pair.to_json(),
                "missing": report.missing,
            }));
        }
    }

    let mut direction2_failures = Vec::new();
    let mut lattice_critical_count = 0usize;
    let terms = enumerate_standard_terms(trs.signature(), size_bound);
    for t in &terms {
        let occs = redex_occurrences(t, trs);
        if occs.len() > DEFAULT_OCCURRENCE_CAP {
            return Err(PeakError::Step(StepError::CapExceeded {
                count: occs.len(),
                cap: DEFAULT_OCCURRENCE_CAP,
            }));
        }
        let steps: Vec<MultiStep> = occs
            .iter()
            .map(|occ| make_multistep(t, std::slice::from_ref(occ)).expect("single redex"))
            .collect();
        for i in 0..steps.len() {
            for j in i + 1..steps.len() {
                let peak =
                    Peak::new(steps[i].clone(), steps[j].clone()).expect("steps share the source");
                let report = is_critical(&peak);
                if !report.is_critical || report.is_trivial {
                    continue;
                }
                lattice_critical_count += 1;
                let mut descriptors = vec![
                    (occs[i].rule.name().to_string(), occs[i].position.clone()),
                    (occs[j].rule.name().to_string(), occs[j].position.clone()),
                ];
                descriptors.sort();
                let matched = classical.iter().any(|pair| {
                    if pair.peak.source() != peak.source() {
                        return false;
                    }
                    let mut classical_desc = vec![
                        (pair.outer.clone(), Vec::new()),
                        (pair.inner.clone(), pair.position.clone()),
                    ];
                    classical_desc.sort();
                    classical_desc == descriptors
                });
                if !matched {
                    direction2_failures.push(json!({
                        "source": t.to_string(),
                        "steps": [
                            {"rule": occs[i].rule.name(), "pos": format_path(&occs[i].position)},
                            {"rule": occs[j].rule.name(), "pos": format_path(&occs[j].position)},
                        ],
                    }));
                }
            }
        }
    }
    Ok(EquivalenceReport {
        size_bound,
        classical_count: classical.len(),
        terms_checked: terms.len(),
        lattice_critical_count,
        passed: direction1_failures.is_empty() && direction2_failures.is_empty(),
        direction1_failures,
        direction2_failures,
    })
}

/// A peak split at an uncovered edge into an outer and an inner sub-peak.
/// The raw sub-steps keep the original variable names so that substituting
/// the inner data at `hole_var` literally recomposes the input peak; the
/// `outer` and `inner` peaks are their standardized forms.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub outer: Peak,
    pub inner: Peak,
    pub split_edge: Position,
    pub hole_var: Variable,
    pub raw_outer: (MultiStep, MultiStep),
    pub raw_inner: (MultiStep, MultiStep),
}

/// Splits a non-critical peak with at least two redex-patterns at the
/// leftmost-outermost uncovered edge. Since patterns are connected they
/// never straddle an uncovered edge, so each gap lands wholly on one side.
pub fn decompose(peak: &Peak) -> Result<Decomposition, PeakError> {
    let report = is_critical(peak);
    if report.is_critical {
        return Err(PeakError::PeakIsCritical);
    }
    match peak.left().gap_count() + peak.right().gap_count() {
        0 => return Err(PeakError::NoPatterns),
        1 => return Err(PeakError::SinglePattern),
        _ => {}
    }
    let split_edge = report
        .missing
        .iter()
        .find(|p| p.is_edge())
        .cloned()
        .expect("a non-critical peak with two or more patterns leaves an edge uncovered");
    let hole = split_edge.path.clone();
    let source = peak.source();
    let sub = source.subterm_at(&hole)?.clone();
    let max_index = source
        .variables()
        .iter()
        .filter_map(Variable::standard_index)
        .max()
        .unwrap_or(0);
    let hole_var = Variable::standard(max_index + 1);
    let outer_source = source.replace_at(&hole, Term::Var(hole_var.clone()))?;

    let split_step = |m: &MultiStep| -> Result<(MultiStep, MultiStep), PeakError> {
        let mut outer_occs = Vec::new();
        let mut inner_occs = Vec::new();
        for (rule, pos) in m.occurrences() {
            if pos.starts_with(&hole) {
                let rel = pos[hole.len()..].to_vec();
                inner_occs.push(
                    RedexOccurrence::new(&sub, rel, rule)?.expect("rule matches below the split"),
                );
            } else {
                outer_occs.push(
                    RedexOccurrence::new(&outer_source, pos, rule)?
                        .expect("rule matches outside the split"),
                );
            }
        }
        Ok((
            make_multistep(&outer_source, &outer_occs)?,
            make_multistep(&sub, &inner_occs)?,
        ))
    };
    let (outer_left, inner_left) = split_step(peak.left())?;
    let (outer_right, inner_right) = split_step(peak.right())?;

    // Re-verify the decomposition postconditions before returning.
    for (original, outer_m, inner_m) in [
        (peak.left(), &outer_left, &inner_left),
        (peak.right(), &outer_right, &inner_right),
    ] {
        let recomposed = recompose_multistep(outer_m, &hole_var, inner_m);
        assert_eq!(recomposed.source(), source, "sources recompose");
        assert!(
            recomposed.as_cluster().canonical_eq(&original.as_cluster()),
            "substituting the sub-steps recomposes the original step"
        );
        assert!(
            outer_m.skeleton().size() < original.skeleton().size()
                && inner_m.skeleton().size() < original.skeleton().size(),
            "sub-skeletons are strictly smaller"
        );
    }

    Ok(Decomposition {
        outer: Peak::new(outer_left.clone(), outer_right.clone())?,
        inner: Peak::new(inner_left.clone(), inner_right.clone())?,
        split_edge,
        hole_var,
        raw_outer: (outer_left, outer_right),
        raw_inner: (inner_left, inner_right),
    })
}

/// Substitutes the inner multi-step for the variable `hole` of the outer
/// one, composing skeletons, rule assignments (inner gaps renamed apart)
/// and sources.
pub fn recompose_multistep(outer: &MultiStep, hole: &Variable, inner: &MultiStep) -> MultiStep {
    let offset = outer.rules().len() as u64;
    let renaming: BTreeMap<Gap, Gap> = inner
        .skeleton()
        .gaps_in_order()
        .into_iter()
        .enumerate()
        .map(|(k, g)| {
            (
                g.clone(),
                Gap::new(format!("Y{}", offset + k as u64 + 1), g.arity),
            )
        })
        .collect();
    let inner_skeleton = inner.skeleton().rename_gaps(&renaming);
    let skeleton = outer.skeleton().substitute_var(hole, &inner_skeleton);
    let mut rules = outer.rules().clone();
    for (g, rule) in inner.rules() {
        rules.insert(renaming[g].clone(), rule.clone());
    }
    let source =
        Substitution::singleton(hole.clone(), inner.source().clone()).apply(outer.source());
    MultiStep::assemble(source, skeleton, rules)
}

/// Result of a bounded joinability search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Joinability {
    Joinable(JoinWitness),
    /// Both reachable sets were fully explored and are disjoint.
    NotJoinable,
    /// No witness within the depth; the reachable sets are incomplete.
    ExhaustedDepth,
    /// The state cap was hit; no verdict.
    ExhaustedStates,
}

impl Joinability {
    pub fn verdict(&self) -> &'static str {
        match self {
            Joinability::Joinable(_) => "joinable",
            Joinability::NotJoinable => "not joinable",
            Joinability::ExhaustedDepth | Joinability::ExhaustedStates => "unknown",
        }
    }
}

/// A common reduct with the rewrite traces that reach it from both sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinWitness {
    pub witness: Term,
    pub trace_left: Vec<Term>,
    pub trace_right: Vec<Term>,
}

/// Breadth-first closure of both terms under single-step rewriting up to
/// `depth`. Reports a common reduct with traces, definite non-joinability
/// when both closures complete, or an inconclusive exhaustion otherwise.
pub fn bounded_joinable(
    t1: &Term,
    t2: &Term,
    trs: &Trs,
    depth: usize,
    max_states: usize,
) -> Joinability {
    let mut left: BTreeMap<Term, Option<Term>> = BTreeMap::new();
    let mut right: BTreeMap<Term, Option<Term>> = BTreeMap::new();
    left.insert(t1.clone(), None);
    right.insert(t2.clone(), None);
    let mut left_frontier: BTreeSet<Term> = [t1.clone()].into();
    let mut right_frontier: BTreeSet<Term> = [t2.clone()].into();

    let common = |left: &BTreeMap<Term, Option<Term>>, right: &BTreeMap<Term, Option<Term>>| {
        left.keys().find(|t| right.contains_key(*t)).cloned()
    };
    let trace = |seen: &BTreeMap<Term, Option<Term>>, from: &Term| {
        let mut path = vec![from.clone()];
        let mut cur = from.clone();
        while let Some(Some(parent)) = seen.get(&cur) {
            path.push(parent.clone());
            cur = parent.clone();
        }
        path.reverse();
        path
    };

    let joinable = |left: &BTreeMap<Term, Option<Term>>, right: &BTreeMap<Term, Option<Term>>| {
        common(left, right).map(|w| {
            Joinability::Joinable(JoinWitness {
                trace_left: trace(left, &w),
                trace_right: trace(right, &w),
                witness: w,
            })
        })
    };

    if let Some(found) = joinable(&left, &right) {
        return found;
    }
    for _ in 0..depth {
        if left_frontier.is_empty() && right_frontier.is_empty() {
            return Joinability::NotJoinable;
        }
        for (seen, frontier) in [
            (&mut left, &mut left_frontier),
            (&mut right, &mut right_frontier),
        ] {
            let mut next = BTreeSet::new();
            for t in frontier.iter() {
                for occ in redex_occurrences(t, trs) {
                    let target = t
                        .replace_at(&occ.position, occ.bindings.apply(occ.rule.rhs()))
                        .expect("redex position exists");
                    if !seen.contains_key(&target) {
                        seen.insert(target.clone(), Some(t.clone()));
                        next.insert(target);
                    }
                }
            }
            *frontier = next;
        }
        if left.len() + right.len() > max_states {
            return Joinability::ExhaustedStates;
        }
        if let Some(found) = joinable(&left, &right) {
            return found;
        }
    }
    if left_frontier.is_empty() && right_frontier.is_empty() {
        Joinability::NotJoinable
    } else {
        Joinability::ExhaustedDepth
    }
}

/// Aggregate verdict of a bounded analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Verdict {
    LocallyConfluent,
    NotLocallyConfluent,
    Unknown,
}

/// Local confluence by joinability of all classical critical pairs.
#[derive(Debug, Clone)]
pub struct ConfluenceReport {
    pub verdict: Verdict,
    pub pairs: Vec<(CriticalPair, Joinability)>,
    pub counterexamples: Vec<(Term, Term)>,
}

impl ConfluenceReport {
    pub fn to_json(&self) -> Value {
        let verdict = match self.verdict {
            Verdict::LocallyConfluent => "locally confluent",
            Verdict::NotLocallyConfluent => "not locally confluent",
            Verdict::Unknown => "unknown",
        };
        let pairs: Vec<Value> = self
            .pairs
            .iter()
            .map(|(pair, joinability)| {
                let mut value = pair.to_json();
                value["joinability"] = json!(joinability.verdict());
                if let Joinability::Joinable(w) = joinability {
                    value["witness"] = json!(w.witness.to_string());
                }
                value
            })
            .collect();
        let counterexamples: Vec<Value> = self
            .counterexamples
            .iter()
            .map(|(a, b)| json!([a.to_string(), b.to_string()]))
            .collect();
        json!({
            "verdict": verdict,
            "criticalPairs": pairs,
            "counterexamples": counterexamples,
        })
    }
}

/// Runs the classical construction and a bounded joinability search on each
/// pair. Refutes local confluence only on a completed, disjoint closure.
pub fn local_confluence_report(trs: &Trs, depth: usize, max_states: usize) -> ConfluenceReport {
    let mut pairs = Vec::new();
    let mut counterexamples = Vec::new();
    let mut unknown = false;
    for pair in classical_critical_peaks(trs) {
        let joinability =
            bounded_joinable(&pair.targets.0, &pair.targets.1, trs, depth, max_states);
        match &joinability {
            Joinability::NotJoinable => {
                counterexamples.push((pair.targets.0.clone(), pair.targets.1.clone()));
            }
            Joinability::ExhaustedDepth | Joinability::ExhaustedStates => unknown = true,
            Joinability::Joinable(_) => {}
        }
        pairs.push((pair, joinability));
    }
    let verdict = if !counterexamples.is_empty() {
        Verdict::NotLocallyConfluent
    } else if unknown {
        Verdict::Unknown
    } else {
        Verdict::LocallyConfluent
    };
    ConfluenceReport {
        verdict,
        pairs,
        counterexamples,
    }
}

/// Orthogonality: left-linearity (enforced at load) plus absence of
/// non-trivial classical critical pairs.
#[derive(Debug, Clone)]
pub struct OrthogonalityReport {
    pub left_linear: bool,
    pub critical_pairs: Vec<CriticalPair>,
    pub orthogonal: bool,
}

impl OrthogonalityReport {
    pub fn to_json(&self) -> Value {
        json!({
            "leftLinear": self.left_linear,
            "criticalPairs": self.critical_pairs.iter().map(CriticalPair::to_json).collect::<Vec<_>>(),
            "orthogonal": self.orthogonal,
        })
    }
}

pub fn orthogonality(trs: &Trs) -> OrthogonalityReport {
    let critical_pairs = classical_critical_peaks(trs);
    OrthogonalityReport {
        left_linear: true,
        orthogonal: critical_pairs.is_empty(),
        critical_pairs,
    }
}

/// Diamond property of multi-steps from one source: every peak of
/// multi-steps has a common reduct one multi-step from each target.
#[derive(Debug, Clone)]
pub struct DiamondReport {
    pub term: Term,
    pub peaks_checked: usize,
    pub failures: Vec<(MultiStep, MultiStep)>,
    pub holds: bool,
}

pub fn diamond_check(trs: &Trs, t: &Term, cap: usize) -> Result<DiamondReport, StepError> {
    let steps = multisteps_from(t, trs, cap)?;
    let mut successors: BTreeMap<Term, BTreeSet<Term>> = BTreeMap::new();
    let mut targets_of = |term: &Term| -> Result<BTreeSet<Term>, StepError> {
        if let Some(cached) = successors.get(term) {
            return Ok(cached.clone());
        }
        let set: BTreeSet<Term> = multisteps_from(term, trs, cap)?
            .iter()
            .map(MultiStep::target)
            .collect();
        successors.insert(term.clone(), set.clone());
        Ok(set)
    };
    let mut failures = Vec::new();
    let mut peaks_checked = 0usize;
    for i in 0..steps.len() {
        for j in i..steps.len() {
            peaks_checked += 1;
            let u = steps[i].target();
            let v = steps[j].target();
            let from_u = targets_of(&u)?;
            let from_v = targets_of(&v)?;
            if from_u.intersection(&from_v).next().is_none() {
                failures.push((steps[i].clone(), steps[j].clone()));
            }
        }
    }
    Ok(DiamondReport {
        term: t.clone(),
        peaks_checked,
        holds: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewriting::{load_trs, multistep_from_specs};
    use crate::terms::{parse_term, Signature};
    use std::collections::BTreeSet as Set;

    fn parse(text: &str, vs: &[&str]) -> Term {
        let vars: Set<String> = vs.iter().map(|s| s.to_string()).collect();
        parse_term(text, &vars, &mut Signature::new()).expect("parse")
    }

    fn pos_set(items: &[&str]) -> PositionSet {
        items.iter().map(|s| Position::parse(s).unwrap()).collect()
    }

    fn peak(
        trs: &Trs,
        source: &Term,
        left: &[(&str, &[usize])],
        right: &[(&str, &[usize])],
    ) -> Peak {
        let specs = |list: &[(&str, &[usize])]| -> Vec<(String, Path)> {
            list.iter()
                .map(|(name, pos)| (name.to_string(), pos.to_vec()))
                .collect()
        };
        Peak::new(
            multistep_from_specs(source, &specs(left), trs).unwrap(),
            multistep_from_specs(source, &specs(right), trs).unwrap(),
        )
        .unwrap()
    }

    fn collapse_trs() -> Trs {
        load_trs("(VAR x) (RULES a(x) -> x a(x) -> 0)").unwrap()
    }

    #[test]
    fn criticality_triple() {
        let trs = collapse_trs();

        // x1 <- a(x1) -> 0: critical, nothing missing.
        let p1 = peak(
            &trs,
            &parse("a(x1)", &["x1"]),
            &[("r1", &[])],
            &[("r2", &[])],
        );
        let r1 = is_critical(&p1);
        assert!(r1.is_critical && !r1.is_trivial);
        assert!(r1.missing.is_empty());
        assert_eq!(r1.join_positions, pos_set(&["eps:v"]));

        // b' <- a(b') -> 0: union {eps:v} misses the constant's positions.
        let with_const = load_trs("(VAR x) (RULES a(x) -> x a(x) -> 0 b' -> b')").unwrap();
        let p2 = peak(
            &with_const,
            &parse("a(b')", &[]),
            &[("r1", &[])],
            &[("r2", &[])],
        );
        let r2 = is_critical(&p2);
        assert!(!r2.is_critical);
        assert_eq!(r2.missing, pos_set(&["1:e", "1:v"]));

        // 0 <- a(a(x1)) -> a(0): union {eps:v, 1:v} misses the edge 1:e.
        let p3 = peak(
            &trs,
            &parse("a(a(x1))", &["x1"]),
            &[("r2", &[])],
            &[("r2", &[1])],
        );
        let r3 = is_critical(&p3);
        assert!(!r3.is_critical);
        assert_eq!(r3.missing, pos_set(&["1:e"]));
    }

    #[test]
    fn criticality_is_symmetric_and_trivial_detected() {
        let trs = collapse_trs();
        let p = peak(
            &trs,
            &parse("a(x1)", &["x1"]),
            &[("r1", &[])],
            &[("r2", &[])],
        );
        let swapped = is_critical(&p.swapped());
        assert_eq!(is_critical(&p).is_critical, swapped.is_critical);

        let trivial = peak(
            &trs,
            &parse("a(x1)", &["x1"]),
            &[("r1", &[])],
            &[("r1", &[])],
        );
        assert!(is_critical(&trivial).is_trivial);
    }

    #[test]
    fn join_is_bounded_by_top() {
        let trs = load_trs("(VAR x) (RULES a(x) -> x a(x) -> 0 b' -> b')").unwrap();
        for (source, vars, left, right) in [
            ("a(x1)", vec!["x1"], ("r1", vec![]), ("r2", vec![])),
            ("a(b')", vec![], ("r1", vec![]), ("r2", vec![])),
            ("a(a(x1))", vec!["x1"], ("r2", vec![]), ("r2", vec![1])),
        ] {
            let t = parse(source, &vars);
            let p = peak(&trs, &t, &[(left.0, &left.1)], &[(right.0, &right.1)]);
            let report = is_critical(&p);
            assert!(report.join_positions.is_subset(&report.top_positions));
            assert_eq!(
                report.is_critical,
                report.join_positions == report.top_positions
            );
        }
    }

    #[test]
    fn lhs_cluster_positions() {
        let trs = load_trs("(VAR x) (RULES a(x) -> b(x,x) f(0,0) -> c' 0 -> b')").unwrap();
        let t = parse("a(f(a(0)))", &[]);
        let root = multistep_from_specs(&t, &[("r1".into(), vec![])], &trs).unwrap();
        assert_eq!(
            lhs_cluster(&root).to_geometric().positions(),
            &pos_set(&["eps:v"])
        );

        let par = parse("f(0,0)", &[]);
        let both = multistep_from_specs(
            &par,
            &[("r3".into(), vec![1]), ("r3".into(), vec![2])],
            &trs,
        )
        .unwrap();
        assert_eq!(
            lhs_cluster(&both).to_geometric().positions(),
            &pos_set(&["1:v", "2:v"])
        );

        let empty = MultiStep::empty(&t);
        assert!(lhs_cluster(&empty).to_geometric().positions().is_empty());
    }

    #[test]
    fn classical_pairs_of_collapse_rules() {
        let trs = collapse_trs();
        let pairs = classical_critical_peaks(&trs);
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].peak.source(), &parse("a(x1)", &["x1"]));
        assert_eq!(
            (&pairs[0].targets.0, &pairs[0].targets.1),
            (&Term::xvar(1), &Term::constant("0"))
        );
        assert_eq!(
            (&pairs[1].targets.0, &pairs[1].targets.1),
            (&Term::constant("0"), &Term::xvar(1))
        );
    }

    #[test]
    fn classical_pairs_of_parallel_system() {
        let trs = load_trs("(RULES f(0,0) -> c' 0 -> b')").unwrap();
        let pairs = classical_critical_peaks(&trs);
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].position, vec![1]);
        assert_eq!(pairs[1].position, vec![2]);
        assert_eq!(pairs[0].targets.0, parse("c'", &[]));
        assert_eq!(pairs[0].targets.1, parse("f(b',0)", &[]));
    }

    #[test]
    fn orthogonal_trs_has_no_pairs() {
        let trs = load_trs("(VAR x) (RULES a(x) -> x)").unwrap();
        assert!(classical_critical_peaks(&trs).is_empty());
        assert!(orthogonality(&trs).orthogonal);

        let self_overlapping = load_trs("(VAR x) (RULES a(a(x)) -> b'(x))").unwrap();
        let report = orthogonality(&self_overlapping);
        assert!(!report.orthogonal);
        // The only overlap is the rule with itself below the root.
        assert_eq!(report.critical_pairs.len(), 1);
        assert_eq!(report.critical_pairs[0].position, vec![1]);
        assert_eq!(
            report.critical_pairs[0].peak.source(),
            &parse("a(a(a(x1)))", &["x1"])
        );
    }

    #[test]
    fn footnote_meet_nonempty_for_critical_peaks() {
        // Whenever the join is top and both steps are nonempty, the meet of
        // the lhs-clusters is nonempty.
        for text in [
            "(VAR x) (RULES a(x) -> x a(x) -> 0)",
            "(VAR x) (RULES a(a(x)) -> b'(x))",
            "(RULES f(0,0) -> c' 0 -> b')",
        ] {
            let trs = load_trs(text).unwrap();
            for pair in classical_critical_peaks(&trs) {
                let report = is_critical(&pair.peak);
                if report.is_critical
                    && pair.peak.left().gap_count() > 0
                    && pair.peak.right().gap_count() > 0
                {
                    assert!(report.overlap_size > 0, "footnote fails for {}", text);
                }
            }
        }
    }

    #[test]
    fn variable_instance_of_collapsed_source() {
        let trs = load_trs("(VAR x y) (RULES f(x,y) -> x f(x,y) -> y)").unwrap();
        let source = parse("f(x1,x1)", &["x1"]);
        let left = multistep_from_specs(&source, &[("r1".into(), vec![])], &trs).unwrap();
        let right = multistep_from_specs(&source, &[("r2".into(), vec![])], &trs).unwrap();
        let p = Peak::new(left, right).unwrap();
        // Source is non-linear, so construction keeps it; the join still
        // covers all internal positions.
        assert!(is_critical(&p).is_critical);
        let (critical, sigma) = variable_instance(&p).expect("join is top");
        assert_eq!(critical.source(), &parse("f(x1,x2)", &["x1", "x2"]));
        assert_eq!(sigma.apply(critical.source()), source);

        // A non-top peak has no variable-instance reading.
        let collapse = collapse_trs();
        let q = peak(
            &collapse,
            &parse("a(a(x1))", &["x1"]),
            &[("r2", &[])],
            &[("r2", &[1])],
        );
        assert!(variable_instance(&q).is_none());
    }

    #[test]
    fn decompose_spec_example() {
        let trs = collapse_trs();
        let p = peak(
            &trs,
            &parse("a(a(x1))", &["x1"]),
            &[("r2", &[])],
            &[("r2", &[1])],
        );
        let d = decompose(&p).expect("non-critical with two patterns");
        assert_eq!(d.split_edge, Position::parse("1:e").unwrap());
        assert_eq!(d.outer.source(), &parse("a(x1)", &["x1"]));
        assert_eq!(d.inner.source(), &parse("a(x1)", &["x1"]));
        assert_eq!(d.outer.left().gap_count() + d.outer.right().gap_count(), 1);
        assert_eq!(d.inner.left().gap_count() + d.inner.right().gap_count(), 1);

        // Recomposition reproduces the original steps.
        for (orig, outer_m, inner_m) in [
            (p.left(), &d.raw_outer.0, &d.raw_inner.0),
            (p.right(), &d.raw_outer.1, &d.raw_inner.1),
        ] {
            let recomposed = recompose_multistep(outer_m, &d.hole_var, inner_m);
            assert!(recomposed.as_cluster().canonical_eq(&orig.as_cluster()));
            assert_eq!(recomposed.source(), p.source());
        }
    }

    #[test]
    fn decompose_separates_disjoint_redexes() {
        let trs = load_trs("(RULES 0 -> b')").unwrap();
        let source = parse("f(0,0)", &[]);
        let p = peak(&trs, &source, &[("r1", &[1])], &[("r1", &[2])]);
        let d = decompose(&p).unwrap();
        assert_eq!(d.split_edge, Position::parse("1:e").unwrap());
        // One side of each sub-peak is the empty multi-step.
        assert_eq!(d.inner.left().gap_count(), 1);
        assert_eq!(d.inner.right().gap_count(), 0);
        assert_eq!(d.outer.left().gap_count(), 0);
        assert_eq!(d.outer.right().gap_count(), 1);
    }

    #[test]
    fn decompose_guards() {
        let trs = collapse_trs();
        let critical = peak(
            &trs,
            &parse("a(x1)", &["x1"]),
            &[("r1", &[])],
            &[("r2", &[])],
        );
        assert!(matches!(
            decompose(&critical),
            Err(PeakError::PeakIsCritical)
        ));

        let single = peak(&trs, &parse("a(b')", &[]), &[("r1", &[])], &[]);
        let single = Peak::new(single.left().clone(), MultiStep::empty(single.source())).unwrap();
        assert!(matches!(decompose(&single), Err(PeakError::SinglePattern)));

        let none = Peak::new(
            MultiStep::empty(&parse("a(b')", &[])),
            MultiStep::empty(&parse("a(b')", &[])),
        )
        .unwrap();
        assert!(matches!(decompose(&none), Err(PeakError::NoPatterns)));
    }

    #[test]
    fn joinability_examples() {
        let trs = collapse_trs();
        // Equal terms join immediately.
        match bounded_joinable(&Term::xvar(1), &Term::xvar(1), &trs, 0, 100) {
            Joinability::Joinable(w) => assert_eq!(w.witness, Term::xvar(1)),
            other => panic!("expected joinable, got {other:?}"),
        }
        // x1 and 0 are distinct normal forms: a definite refutation.
        assert_eq!(
            bounded_joinable(&Term::xvar(1), &Term::constant("0"), &trs, 8, 100),
            Joinability::NotJoinable
        );
        // Constructed instance joins at m with depth 1.
        let diamondish =
            load_trs("(VAR x) (RULES h(x) -> k(x) h(x) -> k'(x) k(x) -> m k'(x) -> m)").unwrap();
        match bounded_joinable(
            &parse("k(x1)", &["x1"]),
            &parse("k'(x1)", &["x1"]),
            &diamondish,
            1,
            100,
        ) {
            Joinability::Joinable(w) => {
                assert_eq!(w.witness, parse("m", &[]));
                assert_eq!(w.trace_left.len(), 2);
                assert_eq!(w.trace_right.len(), 2);
            }
            other => panic!("expected joinable, got {other:?}"),
        }
    }

    #[test]
    fn local_confluence_refuted_for_collapse_rules() {
        let trs = collapse_trs();
        let report = local_confluence_report(&trs, 5, 1000);
        assert_eq!(report.verdict, Verdict::NotLocallyConfluent);
        assert!(report
            .counterexamples
            .contains(&(Term::xvar(1), Term::constant("0"))));
        let json = report.to_json();
        assert_eq!(json["verdict"], "not locally confluent");
    }

    #[test]
    fn equivalence_check_passes_on_samples() {
        for text in [
            "(VAR x) (RULES a(x) -> x a(x) -> 0)",
            "(VAR x) (RULES a(a(x)) -> b'(x))",
            "(RULES f(0,0) -> c' 0 -> b')",
        ] {
            let trs = load_trs(text).unwrap();
            let report = equivalence_check(&trs, 5).unwrap();
            assert!(report.passed, "equivalence fails for {text}: {report:?}");
            assert!(report.classical_count > 0 || report.lattice_critical_count == 0);
        }
    }

    #[test]
    fn diamond_on_orthogonal_sample() {
        let trs = load_trs("(VAR x) (RULES a(x) -> b'(x) c'' -> d'')").unwrap();
        let t = parse("a(a(c''))", &[]);
        let report = diamond_check(&trs, &t, 20).unwrap();
        assert!(report.holds);
        assert!(report.peaks_checked > 0);
    }

    #[test]
    fn overlap_size_is_additive_over_pattern_pairs() {
        let trs = load_trs("(VAR x) (RULES a(a(x)) -> b'(x))").unwrap();
        let t = parse("a(a(a(x1)))", &["x1"]);
        let left = multistep_from_specs(&t, &[("r1".into(), vec![])], &trs).unwrap();
        let right = multistep_from_specs(&t, &[("r1".into(), vec![1])], &trs).unwrap();
        let p = Peak::new(left, right).unwrap();
        let report = is_critical(&p);
        let sum: usize = lhs_cluster(p.left())
            .gap_components()
            .iter()
            .flat_map(|(_, a)| {
                lhs_cluster(p.right())
                    .gap_components()
                    .into_iter()
                    .map(move |(_, b)| a.intersection(&b).len())
            })
            .sum();
        assert_eq!(report.overlap_size, sum);
    }
}
