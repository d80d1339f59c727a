//! Rules, TRS loading in the COPS `.trs` subset, classical positional
//! rewriting, redex occurrences, and single/parallel/multi-steps
//! represented as clusters whose gaps carry rule symbols.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::geometry::{internal_positions, GeometricCluster, PositionSet};
use crate::inductive::{flatten_with, InductiveCluster, Pattern, Skeleton, Violation};
use crate::terms::{
    format_path, match_pattern, standardize, Path, Signature, Substitution, Symbol, Term,
    TermError, TermParser, Variable,
};

/// A rewrite rule with standardized, linear, non-variable left-hand side.
/// The right-hand side draws its variables from `x1…xn` and may repeat or
/// drop them.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Rule {
    name: String,
    lhs: Pattern,
    rhs: Term,
}

impl Rule {
    pub fn new(name: impl Into<String>, lhs: Term, rhs: Term) -> Result<Rule, TrsError> {
        let name = name.into();
        if matches!(lhs, Term::Var(_)) {
            return Err(TrsError::LhsIsVariable { rule: name });
        }
        let (std_lhs, renaming) = standardize(&lhs).map_err(|e| match e {
            TermError::NonLinearTerm { variable } => TrsError::NotLeftLinear {
                rule: name.clone(),
                variable,
            },
            other => TrsError::Term(other),
        })?;
        for v in rhs.variables() {
            if !renaming.contains_key(&v) {
                return Err(TrsError::RhsVariableNotInLhs {
                    rule: name,
                    variable: v.to_string(),
                });
            }
        }
        let rhs = crate::terms::rename_variables(&rhs, &renaming);
        let lhs = Pattern::new(std_lhs).map_err(|v| TrsError::BadPattern {
            rule: name.clone(),
            violation: v,
        })?;
        Ok(Rule { name, lhs, rhs })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lhs(&self) -> &Pattern {
        &self.lhs
    }

    pub fn rhs(&self) -> &Term {
        &self.rhs
    }

    pub fn arity(&self) -> usize {
        self.lhs.arity()
    }

    /// The rule symbol `ρ:name`, of the left-hand side's arity. Rule symbols
    /// live outside the parseable identifier space and never collide with
    /// signature symbols.
    pub fn symbol(&self) -> Symbol {
        Symbol::new(format!("ρ:{}", self.name), self.arity())
    }

    /// The rule symbol applied to `x1…xn`, as a pattern for step clusters.
    pub fn symbol_pattern(&self) -> Term {
        let args = (1..=self.arity()).map(|i| Term::xvar(i as u64)).collect();
        Term::App(self.symbol(), args)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} -> {}", self.name, self.lhs, self.rhs)
    }
}

/// A left-linear term rewrite system.
///
/// Equality compares the signature and rules; the declared variable names
/// (kept for parsing further terms against the system) are presentation.
#[derive(Debug, Clone, Eq)]
pub struct Trs {
    signature: Signature,
    rules: Vec<Rule>,
    declared_variables: BTreeSet<String>,
}

impl PartialEq for Trs {
    fn eq(&self, other: &Trs) -> bool {
        self.signature == other.signature && self.rules == other.rules
    }
}

impl Trs {
    pub fn new(signature: Signature, rules: Vec<Rule>) -> Result<Trs, TrsError> {
        Trs::with_variables(signature, rules, BTreeSet::new())
    }

    pub fn with_variables(
        signature: Signature,
        rules: Vec<Rule>,
        declared_variables: BTreeSet<String>,
    ) -> Result<Trs, TrsError> {
        let mut names = BTreeSet::new();
        for rule in &rules {
            if !names.insert(rule.name().to_string()) {
                return Err(TrsError::DuplicateRuleName {
                    name: rule.name().to_string(),
                });
            }
        }
        Ok(Trs {
            signature,
            rules,
            declared_variables,
        })
    }

    /// The variable names of the VAR block, for parsing terms against this
    /// system.
    pub fn declared_variables(&self) -> &BTreeSet<String> {
        &self.declared_variables
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name() == name)
    }

    /// Canonical COPS printing; reparsing yields an equal system.
    pub fn to_cops(&self) -> String {
        let mut vars: BTreeSet<Variable> = BTreeSet::new();
        for rule in &self.rules {
            vars.extend(rule.lhs().term().variables());
        }
        let var_list = vars
            .iter()
            .map(|v| format!(" {v}"))
            .collect::<Vec<_>>()
            .join("");
        let mut out = format!("(VAR{var_list})\n(RULES\n");
        for (i, rule) in self.rules.iter().enumerate() {
            if rule.name() != format!("r{}", i + 1) {
                out.push_str(&format!("  (COMMENT @{})\n", rule.name()));
            }
            out.push_str(&format!("  {} -> {}\n", rule.lhs(), rule.rhs()));
        }
        out.push_str(")\n");
        out
    }
}

/// Errors raised while loading or using a TRS.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrsError {
    #[error("{0}")]
    Term(#[from] TermError),
    #[error("rule {rule} is not left-linear: variable '{variable}' occurs more than once in the left-hand side; only left-linear systems are supported")]
    NotLeftLinear { rule: String, variable: String },
    #[error("rule {rule}: left-hand side is a variable")]
    LhsIsVariable { rule: String },
    #[error(
        "rule {rule}: right-hand side variable '{variable}' does not occur in the left-hand side"
    )]
    RhsVariableNotInLhs { rule: String, variable: String },
    #[error("rule {rule}: bad left-hand side: {violation}")]
    BadPattern { rule: String, violation: Violation },
    #[error("duplicate rule name '{name}'")]
    DuplicateRuleName { name: String },
    #[error("unsupported section '({section} …)': only VAR, RULES and COMMENT are accepted")]
    UnsupportedSection { section: String },
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
}

/// Parses the COPS subset: `(VAR x y …)` then `(RULES l -> r …)`, with
/// optional `(COMMENT …)` blocks. A comment of the form `(COMMENT @name)`
/// directly before a rule names it; other rules are named `r1, r2, …` in
/// file order.
pub fn load_trs(text: &str) -> Result<Trs, TrsError> {
    let bytes = text.as_bytes();
    let mut pos = 0usize;
    let mut vars: BTreeSet<String> = BTreeSet::new();
    let mut seen_var = false;
    let mut seen_rules = false;
    let mut signature = Signature::new();
    let mut rules: Vec<Rule> = Vec::new();

    let skip_ws = |pos: &mut usize| {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
    };
    let syntax = |pos: usize, message: &str| TrsError::Syntax {
        offset: pos,
        message: message.to_string(),
    };

    loop {
        skip_ws(&mut pos);
        if pos >= bytes.len() {
            break;
        }
        if bytes[pos] != b'(' {
            return Err(syntax(pos, "expected '(' opening a section"));
        }
        pos += 1;
        skip_ws(&mut pos);
        let word_start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_alphabetic() {
            pos += 1;
        }
        let section = &text[word_start..pos];
        match section {
            "VAR" => {
                if seen_var {
                    return Err(syntax(word_start, "duplicate VAR section"));
                }
                seen_var = true;
                loop {
                    skip_ws(&mut pos);
                    if pos >= bytes.len() {
                        return Err(syntax(pos, "unterminated VAR section"));
                    }
                    if bytes[pos] == b')' {
                        pos += 1;
                        break;
                    }
                    let start = pos;
                    while pos < bytes.len()
                        && !bytes[pos].is_ascii_whitespace()
                        && bytes[pos] != b')'
                    {
                        pos += 1;
                    }
                    let name = &text[start..pos];
                    let ok = name
                        .chars()
                        .next()
                        .map(|c| c.is_ascii_alphabetic() || c == '_')
                        .unwrap_or(false)
                        && name
                            .chars()
                            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'');
                    if !ok {
                        return Err(syntax(start, "variable names must be identifiers"));
                    }
                    vars.insert(name.to_string());
                }
            }
            "RULES" => {
                if seen_rules {
                    return Err(syntax(word_start, "duplicate RULES section"));
                }
                seen_rules = true;
                let mut pending_name: Option<String> = None;
                loop {
                    skip_ws(&mut pos);
                    if pos >= bytes.len() {
                        return Err(syntax(pos, "unterminated RULES section"));
                    }
                    if bytes[pos] == b')' {
                        pos += 1;
                        break;
                    }
                    if bytes[pos] == b'(' {
                        // Only comments may nest here.
                        let open = pos;
                        pos += 1;
                        skip_ws(&mut pos);
                        if !text[pos..].starts_with("COMMENT") {
                            return Err(syntax(open, "only (COMMENT …) blocks may appear here"));
                        }
                        pos += "COMMENT".len();
                        let comment = skip_balanced(text, &mut pos, open)?;
                        if let Some(name) = comment.trim().strip_prefix('@') {
                            pending_name = Some(name.trim().to_string());
                        }
                        continue;
                    }
                    let mut parser = TermParser::new(text, &vars);
                    parser.pos = pos;
                    let lhs = parser.term(&mut signature)?;
                    parser.skip_ws();
                    pos = parser.pos;
                    if !text[pos..].starts_with("->") {
                        return Err(syntax(pos, "expected '->' between rule sides"));
                    }
                    pos += 2;
                    parser.pos = pos;
                    let rhs = parser.term(&mut signature)?;
                    pos = parser.pos;
                    let name = pending_name
                        .take()
                        .unwrap_or_else(|| format!("r{}", rules.len() + 1));
                    rules.push(Rule::new(name, lhs, rhs)?);
                }
            }
            "COMMENT" => {
                skip_balanced(text, &mut pos, word_start)?;
            }
            other => {
                return Err(TrsError::UnsupportedSection {
                    section: other.to_string(),
                });
            }
        }
    }
    if !seen_rules {
        return Err(syntax(text.len(), "missing RULES section"));
    }
    Trs::with_variables(signature, rules, vars)
}

// Consumes the remainder of a comment block (the opening paren and the
// COMMENT keyword already read), balancing nested parentheses, and returns
// the body text.
fn skip_balanced(text: &str, pos: &mut usize, open: usize) -> Result<String, TrsError> {
    let bytes = text.as_bytes();
    let body_start = *pos;
    let mut depth = 1usize;
    while *pos < bytes.len() {
        match bytes[*pos] {
            b'(' => depth += 1,
            b')' => {
                depth -= 1;
                if depth == 0 {
                    let body = text[body_start..*pos].to_string();
                    *pos += 1;
                    return Ok(body);
                }
            }
            _ => {}
        }
        *pos += 1;
    }
    Err(TrsError::Syntax {
        offset: open,
        message: "unterminated COMMENT block".to_string(),
    })
}

/// Applies `rule` at path `p` of `t`: `Some` rewritten term when the
/// left-hand side matches there, `None` otherwise.
pub fn rewrite_step_at(t: &Term, p: &[usize], rule: &Rule) -> Result<Option<Term>, TermError> {
    let sub = t.subterm_at(p)?;
    let bindings = match_pattern(rule.lhs().term(), sub).expect("rule lhs is linear");
    match bindings {
        Some(sigma) => Ok(Some(t.replace_at(p, sigma.apply(rule.rhs()))?)),
        None => Ok(None),
    }
}

/// One match of a rule's left-hand side inside a term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedexOccurrence {
    pub rule: Rule,
    pub position: Path,
    /// The rule's internal lhs positions shifted to the occurrence.
    pub pattern_positions: PositionSet,
    pub bindings: Substitution,
}

impl RedexOccurrence {
    pub fn new(
        t: &Term,
        position: Path,
        rule: &Rule,
    ) -> Result<Option<RedexOccurrence>, TermError> {
        let sub = t.subterm_at(&position)?;
        let bindings = match_pattern(rule.lhs().term(), sub).expect("rule lhs is linear");
        Ok(bindings.map(|bindings| RedexOccurrence {
            pattern_positions: internal_positions(rule.lhs().term()).shifted_by(&position),
            rule: rule.clone(),
            position,
            bindings,
        }))
    }
}

/// All redex occurrences in `t`, outermost-leftmost first, then rule order.
pub fn redex_occurrences(t: &Term, trs: &Trs) -> Vec<RedexOccurrence> {
    let mut out = Vec::new();
    for path in t.node_paths() {
        for rule in trs.rules() {
            if let Ok(Some(occ)) = RedexOccurrence::new(t, path.clone(), rule) {
                out.push(occ);
            }
        }
    }
    out
}

/// How a multi-step contracts its redexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum StepKind {
    /// No redexes: the identity step.
    Empty,
    /// Exactly one redex.
    Single,
    /// Several redexes, none nested inside another's arguments.
    Parallel,
    /// Nested redexes.
    Multi,
}

/// Projection side of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Errors for step construction and enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("overlapping redex occurrences: {first_rule} at {} and {second_rule} at {} share positions {shared}", format_path(.first_pos), format_path(.second_pos))]
    Overlapping {
        first_rule: String,
        first_pos: Path,
        second_rule: String,
        second_pos: Path,
        shared: PositionSet,
    },
    #[error("{count} redex occurrences exceed the cap of {cap}")]
    CapExceeded { count: usize, cap: usize },
    #[error("{0}")]
    Term(#[from] TermError),
    #[error("no rule named '{name}'")]
    NoSuchRule { name: String },
    #[error("rule {rule} does not match at {}", format_path(.position))]
    NoMatch { rule: String, position: Path },
}

/// A multi-step: simultaneous contraction of pairwise non-overlapping
/// redex-patterns, stored as the cluster whose gaps carry the rules.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MultiStep {
    source: Term,
    skeleton: Skeleton,
    rules: BTreeMap<crate::inductive::Gap, Rule>,
}

impl MultiStep {
    /// The empty multi-step on `t` (identity; bottom cluster).
    pub fn empty(t: &Term) -> MultiStep {
        MultiStep {
            source: t.clone(),
            skeleton: Skeleton::from_term(t),
            rules: BTreeMap::new(),
        }
    }

    pub fn source(&self) -> &Term {
        &self.source
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn rules(&self) -> &BTreeMap<crate::inductive::Gap, Rule> {
        &self.rules
    }

    pub fn gap_count(&self) -> usize {
        self.rules.len()
    }

    /// The underlying cluster with rule symbols `ρ:name(x1…xn)` as patterns.
    pub fn as_cluster(&self) -> InductiveCluster {
        self.cluster_with(|rule| rule.symbol_pattern())
    }

    /// The cluster with each gap's pattern replaced by `f(rule)`.
    pub fn cluster_with(&self, f: impl Fn(&Rule) -> Term) -> InductiveCluster {
        let assignment = self
            .rules
            .iter()
            .map(|(g, rule)| {
                (
                    g.clone(),
                    Pattern::new(f(rule)).expect("rule projections of standard arity are patterns"),
                )
            })
            .collect();
        InductiveCluster::from_validated(self.skeleton.clone(), assignment)
    }

    /// Projects the step: `Left` flattens with left-hand sides (giving the
    /// source), `Right` with right-hand sides (giving the target).
    pub fn project(&self, side: Side) -> Term {
        flatten_with(&self.skeleton, &mut |g| {
            let rule = self.rules.get(g)?;
            Some(match side {
                Side::Left => rule.lhs().term().clone(),
                Side::Right => rule.rhs().clone(),
            })
        })
        .expect("every gap carries a rule")
    }

    pub fn target(&self) -> Term {
        self.project(Side::Right)
    }

    /// Empty / Single / Parallel / Multi, by gap count and nesting.
    pub fn classify(&self) -> StepKind {
        match self.gap_count() {
            0 => StepKind::Empty,
            1 => StepKind::Single,
            _ => {
                fn contains_gap(sk: &Skeleton) -> bool {
                    match sk {
                        Skeleton::Var(_) => false,
                        Skeleton::App(_, args) => args.iter().any(contains_gap),
                        Skeleton::Gap(..) => true,
                    }
                }
                fn nested(sk: &Skeleton) -> bool {
                    match sk {
                        Skeleton::Var(_) => false,
                        Skeleton::App(_, args) => args.iter().any(nested),
                        Skeleton::Gap(_, args) => {
                            args.iter().any(contains_gap) || args.iter().any(nested)
                        }
                    }
                }
                if nested(&self.skeleton) {
                    StepKind::Multi
                } else {
                    StepKind::Parallel
                }
            }
        }
    }

    /// The contracted occurrences as (rule, position) pairs, in
    /// outermost-leftmost order.
    pub fn occurrences(&self) -> Vec<(&Rule, Path)> {
        let lhs_cluster = self.cluster_with(|rule| rule.lhs().term().clone());
        lhs_cluster
            .gap_components()
            .into_iter()
            .map(|(g, set)| {
                let root = set
                    .iter()
                    .next()
                    .expect("rule patterns are nonempty")
                    .path
                    .clone();
                (&self.rules[&g], root)
            })
            .collect()
    }

    /// The contracted occurrences as (rule name, position) pairs, in
    /// outermost-leftmost order.
    pub fn occurrence_specs(&self) -> Vec<(String, Path)> {
        self.occurrences()
            .into_iter()
            .map(|(rule, pos)| (rule.name().to_string(), pos))
            .collect()
    }

    /// Assembles a multi-step from parts, re-verifying that they form a
    /// valid step cluster whose left projection is the source.
    pub fn assemble(
        source: Term,
        skeleton: Skeleton,
        rules: BTreeMap<crate::inductive::Gap, Rule>,
    ) -> MultiStep {
        let step = MultiStep {
            source,
            skeleton,
            rules,
        };
        let _ = step.as_cluster(); // validates gap-linearity and arities
        assert_eq!(
            step.project(Side::Left),
            step.source,
            "left projection is the source"
        );
        step
    }

    /// Renames source variables throughout the step.
    pub fn rename_variables(&self, renaming: &BTreeMap<Variable, Variable>) -> MultiStep {
        MultiStep {
            source: crate::terms::rename_variables(&self.source, renaming),
            skeleton: self.skeleton.rename_variables(renaming),
            rules: self.rules.clone(),
        }
    }

    /// Applies a variable substitution to the step (source and skeleton).
    pub fn substitute(&self, sigma: &Substitution) -> MultiStep {
        fn subst_skeleton(sk: &Skeleton, sigma: &Substitution) -> Skeleton {
            match sk {
                Skeleton::Var(v) => match sigma.get(v) {
                    Some(t) => Skeleton::from_term(t),
                    None => sk.clone(),
                },
                Skeleton::App(f, args) => Skeleton::App(
                    f.clone(),
                    args.iter().map(|a| subst_skeleton(a, sigma)).collect(),
                ),
                Skeleton::Gap(g, args) => Skeleton::Gap(
                    g.clone(),
                    args.iter().map(|a| subst_skeleton(a, sigma)).collect(),
                ),
            }
        }
        MultiStep {
            source: sigma.apply(&self.source),
            skeleton: subst_skeleton(&self.skeleton, sigma),
            rules: self.rules.clone(),
        }
    }

    /// JSON encoding: source and redex list.
    pub fn to_json(&self) -> Value {
        let redexes: Vec<Value> = self
            .occurrence_specs()
            .into_iter()
            .map(|(rule, pos)| json!({"rule": rule, "pos": format_path(&pos)}))
            .collect();
        json!({
            "source": self.source.to_string(),
            "redexes": redexes,
        })
    }
}

impl fmt::Display for MultiStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_cluster())
    }
}

/// Builds the multi-step contracting the given occurrences of `t`. The
/// occurrences' patterns must be pairwise disjoint; an empty list yields the
/// empty multi-step.
pub fn make_multistep(t: &Term, occs: &[RedexOccurrence]) -> Result<MultiStep, StepError> {
    for (i, a) in occs.iter().enumerate() {
        for b in &occs[i + 1..] {
            let shared = a.pattern_positions.intersection(&b.pattern_positions);
            if !shared.is_empty() {
                return Err(StepError::Overlapping {
                    first_rule: a.rule.name().to_string(),
                    first_pos: a.position.clone(),
                    second_rule: b.rule.name().to_string(),
                    second_pos: b.position.clone(),
                    shared,
                });
            }
        }
    }
    let mut union = PositionSet::new();
    for occ in occs {
        union = union.union(&occ.pattern_positions);
    }
    let cluster = GeometricCluster::new(t.clone(), union)
        .expect("disjoint redex patterns form a cluster")
        .to_inductive();
    let mut sorted: Vec<&RedexOccurrence> = occs.iter().collect();
    sorted.sort_by(|a, b| a.position.cmp(&b.position));
    let gaps = cluster.skeleton().gaps_in_order();
    assert_eq!(gaps.len(), sorted.len(), "one gap per occurrence");
    let mut rules = BTreeMap::new();
    for (gap, occ) in gaps.into_iter().zip(&sorted) {
        assert_eq!(
            cluster.pattern(gap).map(Pattern::term),
            Some(occ.rule.lhs().term()),
            "component pattern equals the rule's left-hand side"
        );
        rules.insert(gap.clone(), occ.rule.clone());
    }
    let step = MultiStep {
        source: t.clone(),
        skeleton: cluster.skeleton().clone(),
        rules,
    };
    assert_eq!(
        &step.project(Side::Left),
        t,
        "left projection is the source"
    );
    Ok(step)
}

/// Resolves `(rule name, position)` specs against a TRS into a multi-step.
pub fn multistep_from_specs(
    t: &Term,
    specs: &[(String, Path)],
    trs: &Trs,
) -> Result<MultiStep, StepError> {
    let occs = specs
        .iter()
        .map(|(name, pos)| {
            let rule = trs
                .rule(name)
                .ok_or_else(|| StepError::NoSuchRule { name: name.clone() })?;
            RedexOccurrence::new(t, pos.clone(), rule)?.ok_or_else(|| StepError::NoMatch {
                rule: name.clone(),
                position: pos.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    make_multistep(t, &occs)
}

/// Default cap on redex occurrences for multi-step enumeration.
pub const DEFAULT_OCCURRENCE_CAP: usize = 20;

/// All multi-steps from `t`: every subset of the redex occurrences with
/// pairwise-disjoint patterns, the empty step included, in deterministic
/// order.
pub fn multisteps_from(t: &Term, trs: &Trs, cap: usize) -> Result<Vec<MultiStep>, StepError> {
    let occs = redex_occurrences(t, trs);
    // Subset enumeration is a 2^n walk; 60 bounds the mask width.
    let cap = cap.min(60);
    if occs.len() > cap {
        return Err(StepError::CapExceeded {
            count: occs.len(),
            cap,
        });
    }
    let n = occs.len();
    let disjoint: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    occs[i]
                        .pattern_positions
                        .is_disjoint(&occs[j].pattern_positions)
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    'mask: for mask in 0u64..(1u64 << n) {
        let chosen: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        for (k, &i) in chosen.iter().enumerate() {
            for &j in &chosen[k + 1..] {
                if !disjoint[i][j] {
                    continue 'mask;
                }
            }
        }
        let selected: Vec<RedexOccurrence> = chosen.into_iter().map(|i| occs[i].clone()).collect();
        out.push(make_multistep(t, &selected).expect("disjointness checked"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Position;
    use crate::terms::parse_term;
    use std::collections::BTreeSet as Set;

    fn parse(text: &str, vs: &[&str]) -> Term {
        let vars: Set<String> = vs.iter().map(|s| s.to_string()).collect();
        parse_term(text, &vars, &mut Signature::new()).expect("parse")
    }

    fn pos_set(items: &[&str]) -> PositionSet {
        items.iter().map(|s| Position::parse(s).unwrap()).collect()
    }

    #[test]
    fn load_two_collapse_rules() {
        let trs = load_trs("(VAR x) (RULES a(x) -> x a(x) -> 0)").unwrap();
        assert_eq!(trs.rules().len(), 2);
        for rule in trs.rules() {
            assert_eq!(rule.lhs().term(), &parse("a(x1)", &["x1"]));
        }
        assert_eq!(trs.rules()[0].name(), "r1");
        assert_eq!(trs.rules()[0].rhs(), &Term::xvar(1));
        assert_eq!(trs.rules()[1].rhs(), &Term::constant("0"));
    }

    #[test]
    fn rejects_non_left_linear() {
        let err = load_trs("(VAR x) (RULES f(x,x) -> x)").unwrap_err();
        assert!(matches!(err, TrsError::NotLeftLinear { .. }));
        assert!(err.to_string().contains("left-linear"));
    }

    #[test]
    fn rejects_undeclared_reserved_variable() {
        let err = load_trs("(VAR) (RULES a(a(x1)) -> b(x1))").unwrap_err();
        assert!(matches!(
            err,
            TrsError::Term(TermError::UndeclaredVariable { .. })
        ));
    }

    #[test]
    fn rejects_lhs_variable_and_rhs_extra_variable() {
        assert!(matches!(
            load_trs("(VAR x) (RULES x -> 0)"),
            Err(TrsError::LhsIsVariable { .. })
        ));
        assert!(matches!(
            load_trs("(VAR x y) (RULES a(x) -> y)"),
            Err(TrsError::RhsVariableNotInLhs { .. })
        ));
    }

    #[test]
    fn rejects_arity_clash_and_unknown_section() {
        assert!(matches!(
            load_trs("(VAR) (RULES a(0) -> a(0,0))"),
            Err(TrsError::Term(TermError::ArityMismatch { .. }))
        ));
        assert!(matches!(
            load_trs("(VAR x) (CONDITION x > 0) (RULES a(x) -> x)"),
            Err(TrsError::UnsupportedSection { .. })
        ));
    }

    #[test]
    fn comment_directive_names_rule() {
        let trs = load_trs(
            "(COMMENT two collapse rules)\n(VAR x)\n(RULES\n  (COMMENT @collapse)\n  a(x) -> x\n  a(x) -> 0\n)",
        )
        .unwrap();
        assert_eq!(trs.rules()[0].name(), "collapse");
        assert_eq!(trs.rules()[1].name(), "r2");
    }

    #[test]
    fn cops_round_trip() {
        let text = "(VAR x)\n(RULES\n  (COMMENT @dup)\n  a(x) -> b(x,x)\n  0 -> e\n)";
        let trs = load_trs(text).unwrap();
        let printed = trs.to_cops();
        let reparsed = load_trs(&printed).unwrap();
        assert_eq!(trs, reparsed);
        assert_eq!(printed, reparsed.to_cops());
    }

    #[test]
    fn rewrite_at_root_and_elsewhere() {
        let dup = Rule::new("dup", parse("a(x1)", &["x1"]), parse("b(x1,x1)", &["x1"])).unwrap();
        let t = parse("a(f(a(0)))", &[]);
        assert_eq!(
            rewrite_step_at(&t, &[], &dup).unwrap(),
            Some(parse("b(f(a(0)),f(a(0)))", &[]))
        );

        let collapse = Rule::new("c", parse("a(x1)", &["x1"]), Term::xvar(1)).unwrap();
        assert_eq!(
            rewrite_step_at(&parse("a(0)", &[]), &[], &collapse).unwrap(),
            Some(Term::constant("0"))
        );
        assert_eq!(
            rewrite_step_at(&parse("b(0,0)", &[]), &[], &collapse).unwrap(),
            None
        );
        assert!(rewrite_step_at(&parse("a(0)", &[]), &[2], &collapse).is_err());
    }

    #[test]
    fn occurrences_of_collapse_rule() {
        let trs = load_trs("(VAR x) (RULES a(x) -> x)").unwrap();
        let occs = redex_occurrences(&parse("a(a(0))", &[]), &trs);
        let positions: Vec<Path> = occs.iter().map(|o| o.position.clone()).collect();
        assert_eq!(positions, vec![vec![], vec![1]]);
        assert!(redex_occurrences(&Term::xvar(1), &trs).is_empty());
    }

    #[test]
    fn occurrences_shift_patterns_and_overlap() {
        let trs = load_trs("(VAR x) (RULES a(a(x)) -> b(x))").unwrap();
        let occs = redex_occurrences(&parse("a(a(a(x1)))", &["x1"]), &trs);
        assert_eq!(occs.len(), 2);
        assert_eq!(occs[0].pattern_positions, pos_set(&["eps:v", "1:e", "1:v"]));
        assert_eq!(
            occs[1].pattern_positions,
            pos_set(&["1:v", "1.1:e", "1.1:v"])
        );
        // The two patterns overlap at 1:v.
        assert_eq!(
            occs[0]
                .pattern_positions
                .intersection(&occs[1].pattern_positions),
            pos_set(&["1:v"])
        );
    }

    #[test]
    fn make_multistep_single_root_occurrence() {
        let dup = Rule::new("dup", parse("a(x1)", &["x1"]), parse("b(x1,x1)", &["x1"])).unwrap();
        let t = parse("a(f(a(0)))", &[]);
        let occ = RedexOccurrence::new(&t, vec![], &dup).unwrap().unwrap();
        let step = make_multistep(&t, &[occ]).unwrap();
        assert_eq!(step.skeleton().to_string(), "X1(f(a(0)))");
        assert_eq!(step.classify(), StepKind::Single);
        assert_eq!(step.project(Side::Left), t);
        assert_eq!(step.project(Side::Right), parse("b(f(a(0)),f(a(0)))", &[]));
        assert_eq!(
            step.as_cluster().to_string(),
            "⟨X1(f(a(0))), [X1 := ρ:dup(x1)]⟩"
        );
    }

    #[test]
    fn inner_step_projections() {
        // The same rule contracted below the root: the cluster has shape
        // a(X1(a(0))) and projects to a(a(a(0))) / a(b(a(0),a(0))).
        let dup = Rule::new("dup", parse("a(x1)", &["x1"]), parse("b(x1,x1)", &["x1"])).unwrap();
        let t = parse("a(a(a(0)))", &[]);
        let occ = RedexOccurrence::new(&t, vec![1], &dup).unwrap().unwrap();
        let step = make_multistep(&t, &[occ]).unwrap();
        assert_eq!(step.skeleton().to_string(), "a(X1(a(0)))");
        assert_eq!(step.project(Side::Left), t);
        assert_eq!(step.project(Side::Right), parse("a(b(a(0),a(0)))", &[]));
    }

    #[test]
    fn empty_multistep_is_identity() {
        let t = parse("a(0)", &[]);
        let step = make_multistep(&t, &[]).unwrap();
        assert_eq!(step.classify(), StepKind::Empty);
        assert_eq!(step.project(Side::Left), t);
        assert_eq!(step.project(Side::Right), t);
        assert_eq!(step.skeleton(), &Skeleton::from_term(&t));
    }

    #[test]
    fn parallel_two_gap_cluster() {
        let trs = load_trs("(RULES f(0,0) -> c' 0 -> b')").unwrap();
        let t = parse("f(0,0)", &[]);
        let zero = trs.rule("r2").unwrap();
        let occ1 = RedexOccurrence::new(&t, vec![1], zero).unwrap().unwrap();
        let occ2 = RedexOccurrence::new(&t, vec![2], zero).unwrap().unwrap();
        let step = make_multistep(&t, &[occ1, occ2]).unwrap();
        assert_eq!(step.classify(), StepKind::Parallel);
        assert_eq!(step.skeleton().to_string(), "f(X1,X2)");
        assert_eq!(step.project(Side::Right), parse("f(b',b')", &[]));
    }

    #[test]
    fn development_step_is_multi() {
        let trs = load_trs("(VAR x) (RULES a(0) -> c' b'(a(x)) -> x 0 -> b'')").unwrap();
        let t = parse("b'(a(0))", &[]);
        let outer = RedexOccurrence::new(&t, vec![], trs.rule("r2").unwrap())
            .unwrap()
            .unwrap();
        let inner = RedexOccurrence::new(&t, vec![1, 1], trs.rule("r3").unwrap())
            .unwrap()
            .unwrap();
        let step = make_multistep(&t, &[outer, inner]).unwrap();
        assert_eq!(step.classify(), StepKind::Multi);
        assert_eq!(step.skeleton().to_string(), "X1(X2)");
        assert_eq!(step.project(Side::Right), parse("b''", &[]));
    }

    #[test]
    fn overlapping_occurrences_rejected() {
        let trs = load_trs("(VAR x) (RULES a(a(x)) -> b(x))").unwrap();
        let t = parse("a(a(a(x1)))", &["x1"]);
        let occs = redex_occurrences(&t, &trs);
        let err = make_multistep(&t, &occs).unwrap_err();
        match err {
            StepError::Overlapping { shared, .. } => {
                assert_eq!(shared, pos_set(&["1:v"]));
            }
            other => panic!("expected overlap error, got {other:?}"),
        }
    }

    #[test]
    fn multistep_counts() {
        let collapse = load_trs("(VAR x) (RULES a(x) -> x)").unwrap();
        // Patterns {eps:v} and {1:v} are disjoint, so all four subsets work.
        assert_eq!(
            multisteps_from(&parse("a(a(0))", &[]), &collapse, 20)
                .unwrap()
                .len(),
            4
        );
        assert_eq!(
            multisteps_from(&Term::xvar(1), &collapse, 20)
                .unwrap()
                .len(),
            1
        );

        let nested = load_trs("(VAR x) (RULES a(a(x)) -> b(x))").unwrap();
        // The two occurrences overlap at 1:v, so only the singletons remain.
        assert_eq!(
            multisteps_from(&parse("a(a(a(x1)))", &["x1"]), &nested, 20)
                .unwrap()
                .len(),
            3
        );
        assert!(matches!(
            multisteps_from(&parse("a(a(a(x1)))", &["x1"]), &nested, 1),
            Err(StepError::CapExceeded { .. })
        ));
    }

    #[test]
    fn occurrence_specs_round_trip() {
        let trs = load_trs("(RULES f(0,0) -> c' 0 -> b')").unwrap();
        let t = parse("f(0,0)", &[]);
        for step in multisteps_from(&t, &trs, 20).unwrap() {
            let specs = step.occurrence_specs();
            let rebuilt = multistep_from_specs(&t, &specs, &trs).unwrap();
            assert_eq!(rebuilt, step);
        }
    }

    #[test]
    fn step_clusters_validate_with_lhs_patterns() {
        let trs = load_trs("(VAR x) (RULES a(x) -> x f(0,0) -> c' 0 -> b')").unwrap();
        for text in ["f(0,0)", "a(f(0,a(0)))"] {
            let t = parse(text, &[]);
            for step in multisteps_from(&t, &trs, 20).unwrap() {
                let lhs = step.cluster_with(|rule| rule.lhs().term().clone());
                let raw: BTreeMap<_, _> = lhs
                    .assignment()
                    .iter()
                    .map(|(g, p)| (g.clone(), p.term().clone()))
                    .collect();
                assert!(crate::inductive::validate(lhs.skeleton(), &raw).is_empty());
            }
        }
    }

    #[test]
    fn projection_commutes_with_substitution() {
        let trs = load_trs("(VAR x) (RULES a(x) -> b(x,x))").unwrap();
        let t = parse("a(x1)", &["x1"]);
        let step = multisteps_from(&t, &trs, 20)
            .unwrap()
            .into_iter()
            .find(|s| s.gap_count() == 1)
            .unwrap();
        let sigma = Substitution::singleton(Variable::standard(1), parse("c(0)", &[]));
        let substituted = step.substitute(&sigma);
        assert_eq!(
            substituted.project(Side::Left),
            sigma.apply(&step.project(Side::Left))
        );
        assert_eq!(
            substituted.project(Side::Right),
            sigma.apply(&step.project(Side::Right))
        );
    }

    #[test]
    fn multistep_json_shape() {
        let trs = load_trs("(VAR x) (RULES a(x) -> x)").unwrap();
        let t = parse("a(a(0))", &[]);
        let steps = multisteps_from(&t, &trs, 20).unwrap();
        let full = steps.iter().find(|s| s.gap_count() == 2).unwrap();
        let json = full.to_json();
        assert_eq!(json["source"], "a(a(0))");
        assert_eq!(json["redexes"][0]["pos"], "eps");
        assert_eq!(json["redexes"][1]["pos"], "1");
    }
}
