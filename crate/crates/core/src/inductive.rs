//! Skeletons with second-order gaps, patterns, inductive clusters,
//! canonicalization up to gap renaming, and the coarsening/refinement
//! order with explicit witnesses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::geometry::ClusterError;
use crate::terms::{is_linear, is_standard, Symbol, Term, Variable};

/// A second-order variable of fixed arity. Canonical names are `X1, X2, …`
/// assigned left-to-right in the owning skeleton.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Gap {
    pub name: String,
    pub arity: usize,
}

impl Gap {
    pub fn new(name: impl Into<String>, arity: usize) -> Gap {
        Gap {
            name: name.into(),
            arity,
        }
    }

    /// The i-th canonical gap `Xi` (1-based).
    pub fn canonical(i: u64, arity: usize) -> Gap {
        Gap {
            name: format!("X{i}"),
            arity,
        }
    }
}

impl fmt::Display for Gap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// A skeleton: built from function symbols, first-order variables, and gaps
/// applied to argument skeletons.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Skeleton {
    Var(Variable),
    App(Symbol, Vec<Skeleton>),
    Gap(Gap, Vec<Skeleton>),
}

impl Skeleton {
    pub fn from_term(t: &Term) -> Skeleton {
        match t {
            Term::Var(v) => Skeleton::Var(v.clone()),
            Term::App(f, args) => {
                Skeleton::App(f.clone(), args.iter().map(Skeleton::from_term).collect())
            }
        }
    }

    /// The term this skeleton denotes, if it has no gaps.
    pub fn to_term(&self) -> Option<Term> {
        match self {
            Skeleton::Var(v) => Some(Term::Var(v.clone())),
            Skeleton::App(f, args) => Some(Term::App(
                f.clone(),
                args.iter()
                    .map(Skeleton::to_term)
                    .collect::<Option<Vec<_>>>()?,
            )),
            Skeleton::Gap(..) => None,
        }
    }

    /// Gap occurrences in left-to-right order.
    pub fn gaps_in_order(&self) -> Vec<&Gap> {
        let mut out = Vec::new();
        fn walk<'a>(sk: &'a Skeleton, out: &mut Vec<&'a Gap>) {
            match sk {
                Skeleton::Var(_) => {}
                Skeleton::App(_, args) => args.iter().for_each(|a| walk(a, out)),
                Skeleton::Gap(g, args) => {
                    out.push(g);
                    args.iter().for_each(|a| walk(a, out));
                }
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn gap_set(&self) -> BTreeSet<Gap> {
        self.gaps_in_order().into_iter().cloned().collect()
    }

    /// Size for induction: function symbols plus gap occurrences,
    /// variables excluded.
    pub fn size(&self) -> usize {
        match self {
            Skeleton::Var(_) => 0,
            Skeleton::App(_, args) => 1 + args.iter().map(Skeleton::size).sum::<usize>(),
            Skeleton::Gap(_, args) => 1 + args.iter().map(Skeleton::size).sum::<usize>(),
        }
    }

    pub fn rename_gaps(&self, renaming: &BTreeMap<Gap, Gap>) -> Skeleton {
        match self {
            Skeleton::Var(_) => self.clone(),
            Skeleton::App(f, args) => Skeleton::App(
                f.clone(),
                args.iter().map(|a| a.rename_gaps(renaming)).collect(),
            ),
            Skeleton::Gap(g, args) => Skeleton::Gap(
                renaming.get(g).cloned().unwrap_or_else(|| g.clone()),
                args.iter().map(|a| a.rename_gaps(renaming)).collect(),
            ),
        }
    }

    pub fn rename_variables(&self, renaming: &BTreeMap<Variable, Variable>) -> Skeleton {
        match self {
            Skeleton::Var(v) => {
                Skeleton::Var(renaming.get(v).cloned().unwrap_or_else(|| v.clone()))
            }
            Skeleton::App(f, args) => Skeleton::App(
                f.clone(),
                args.iter().map(|a| a.rename_variables(renaming)).collect(),
            ),
            Skeleton::Gap(g, args) => Skeleton::Gap(
                g.clone(),
                args.iter().map(|a| a.rename_variables(renaming)).collect(),
            ),
        }
    }

    /// Replaces every occurrence of variable `v` by `replacement`.
    pub fn substitute_var(&self, v: &Variable, replacement: &Skeleton) -> Skeleton {
        match self {
            Skeleton::Var(u) if u == v => replacement.clone(),
            Skeleton::Var(_) => self.clone(),
            Skeleton::App(f, args) => Skeleton::App(
                f.clone(),
                args.iter()
                    .map(|a| a.substitute_var(v, replacement))
                    .collect(),
            ),
            Skeleton::Gap(g, args) => Skeleton::Gap(
                g.clone(),
                args.iter()
                    .map(|a| a.substitute_var(v, replacement))
                    .collect(),
            ),
        }
    }
}

impl fmt::Display for Skeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn write_args(f: &mut fmt::Formatter<'_>, args: &[Skeleton]) -> fmt::Result {
            if !args.is_empty() {
                write!(f, "(")?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{arg}")?;
                }
                write!(f, ")")?;
            }
            Ok(())
        }
        match self {
            Skeleton::Var(v) => write!(f, "{v}"),
            Skeleton::App(sym, args) => {
                write!(f, "{}", sym.name)?;
                write_args(f, args)
            }
            Skeleton::Gap(g, args) => {
                write!(f, "{}", g.name)?;
                write_args(f, args)
            }
        }
    }
}

/// A pattern: a non-variable, linear, standard term. Its arity is its
/// number of variables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern(Term);

impl Pattern {
    pub fn new(term: Term) -> Result<Pattern, Violation> {
        if matches!(term, Term::Var(_)) {
            return Err(Violation::PatternIsVariable {
                pattern: term.to_string(),
            });
        }
        if !is_linear(&term) {
            return Err(Violation::PatternNotLinear {
                pattern: term.to_string(),
            });
        }
        if !is_standard(&term) {
            return Err(Violation::PatternNotStandard {
                pattern: term.to_string(),
            });
        }
        Ok(Pattern(term))
    }

    pub fn term(&self) -> &Term {
        &self.0
    }

    pub fn arity(&self) -> usize {
        self.0.variable_occurrences().len()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A violation of the inductive-cluster side conditions.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("skeleton not linear in gaps: gap '{gap}' occurs more than once")]
    GapNotLinear { gap: String },
    #[error("gap '{gap}' has no assigned pattern")]
    GapUnassigned { gap: String },
    #[error("assignment names gap '{gap}' which does not occur in the skeleton")]
    AssignmentExtraGap { gap: String },
    #[error("gap '{gap}' has arity {gap_arity} but its pattern has arity {pattern_arity}")]
    GapArityMismatch {
        gap: String,
        gap_arity: usize,
        pattern_arity: usize,
    },
    #[error("gap '{gap}' of arity {arity} is applied to {found} arguments")]
    GapApplicationArity {
        gap: String,
        arity: usize,
        found: usize,
    },
    #[error("symbol '{symbol}' of arity {arity} is applied to {found} arguments")]
    SymbolApplicationArity {
        symbol: String,
        arity: usize,
        found: usize,
    },
    #[error("pattern is a variable: {pattern}")]
    PatternIsVariable { pattern: String },
    #[error("pattern is not linear: {pattern}")]
    PatternNotLinear { pattern: String },
    #[error("pattern is not standard: {pattern}")]
    PatternNotStandard { pattern: String },
}

/// Lists every violation of the cluster side conditions for a skeleton and
/// a raw gap-to-term assignment. Empty result means the pair is a valid
/// inductive cluster.
pub fn validate(skeleton: &Skeleton, assignment: &BTreeMap<Gap, Term>) -> Vec<Violation> {
    let mut out = Vec::new();
    fn walk(sk: &Skeleton, out: &mut Vec<Violation>) {
        match sk {
            Skeleton::Var(_) => {}
            Skeleton::App(f, args) => {
                if f.arity != args.len() {
                    out.push(Violation::SymbolApplicationArity {
                        symbol: f.name.clone(),
                        arity: f.arity,
                        found: args.len(),
                    });
                }
                args.iter().for_each(|a| walk(a, out));
            }
            Skeleton::Gap(g, args) => {
                if g.arity != args.len() {
                    out.push(Violation::GapApplicationArity {
                        gap: g.name.clone(),
                        arity: g.arity,
                        found: args.len(),
                    });
                }
                args.iter().for_each(|a| walk(a, out));
            }
        }
    }
    walk(skeleton, &mut out);

    let occurrences = skeleton.gaps_in_order();
    let mut seen = BTreeSet::new();
    for g in &occurrences {
        if !seen.insert((*g).clone()) {
            out.push(Violation::GapNotLinear {
                gap: g.name.clone(),
            });
        }
    }
    for g in &seen {
        if !assignment.contains_key(g) {
            out.push(Violation::GapUnassigned {
                gap: g.name.clone(),
            });
        }
    }
    for (g, term) in assignment {
        if !seen.contains(g) {
            out.push(Violation::AssignmentExtraGap {
                gap: g.name.clone(),
            });
        }
        match Pattern::new(term.clone()) {
            Err(v) => out.push(v),
            Ok(p) => {
                if p.arity() != g.arity {
                    out.push(Violation::GapArityMismatch {
                        gap: g.name.clone(),
                        gap_arity: g.arity,
                        pattern_arity: p.arity(),
                    });
                }
            }
        }
    }
    out
}

/// An inductive cluster: a skeleton linear in its gaps together with an
/// arity-respecting assignment of patterns to exactly those gaps.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct InductiveCluster {
    skeleton: Skeleton,
    assignment: BTreeMap<Gap, Pattern>,
}

impl InductiveCluster {
    pub fn new(
        skeleton: Skeleton,
        assignment: BTreeMap<Gap, Term>,
    ) -> Result<InductiveCluster, Vec<Violation>> {
        let violations = validate(&skeleton, &assignment);
        if !violations.is_empty() {
            return Err(violations);
        }
        let assignment = assignment
            .into_iter()
            .map(|(g, t)| (g, Pattern::new(t).expect("validated")))
            .collect();
        Ok(InductiveCluster {
            skeleton,
            assignment,
        })
    }

    pub(crate) fn from_validated(
        skeleton: Skeleton,
        assignment: BTreeMap<Gap, Pattern>,
    ) -> InductiveCluster {
        debug_assert!(
            {
                let raw = assignment
                    .iter()
                    .map(|(g, p)| (g.clone(), p.term().clone()))
                    .collect();
                validate(&skeleton, &raw).is_empty()
            },
            "internal: invalid inductive cluster"
        );
        InductiveCluster {
            skeleton,
            assignment,
        }
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn assignment(&self) -> &BTreeMap<Gap, Pattern> {
        &self.assignment
    }

    pub fn pattern(&self, g: &Gap) -> Option<&Pattern> {
        self.assignment.get(g)
    }

    pub fn gap_count(&self) -> usize {
        self.assignment.len()
    }

    /// The term this cluster is for: the skeleton with every gap occurrence
    /// replaced by its pattern, pattern variables bound to the flattened
    /// arguments.
    pub fn flatten(&self) -> Term {
        flatten_with(&self.skeleton, &mut |g| {
            Some(self.assignment.get(g)?.term().clone())
        })
        .expect("cluster assignment covers all gaps")
    }

    /// Renames gaps to `X1, X2, …` in left-to-right skeleton order. Equality
    /// of canonical forms decides cluster equality up to gap renaming.
    pub fn canonicalize(&self) -> InductiveCluster {
        let renaming: BTreeMap<Gap, Gap> = self
            .skeleton
            .gaps_in_order()
            .into_iter()
            .enumerate()
            .map(|(i, g)| (g.clone(), Gap::canonical(i as u64 + 1, g.arity)))
            .collect();
        InductiveCluster {
            skeleton: self.skeleton.rename_gaps(&renaming),
            assignment: self
                .assignment
                .iter()
                .map(|(g, p)| (renaming[g].clone(), p.clone()))
                .collect(),
        }
    }

    /// Equality up to gap renaming.
    pub fn canonical_eq(&self, other: &InductiveCluster) -> bool {
        self.canonicalize() == other.canonicalize()
    }

    /// JSON encoding: skeleton and patterns in term syntax.
    pub fn to_json(&self) -> Value {
        let assignment: serde_json::Map<String, Value> = self
            .assignment
            .iter()
            .map(|(g, p)| (g.name.clone(), json!(p.to_string())))
            .collect();
        json!({
            "skeleton": self.skeleton.to_string(),
            "assignment": assignment,
        })
    }
}

impl fmt::Display for InductiveCluster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{}, [", self.skeleton)?;
        let in_order = self.skeleton.gaps_in_order();
        for (i, g) in in_order.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            match self.assignment.get(g) {
                Some(p) => write!(f, "{} := {}", g, p)?,
                None => write!(f, "{} := ?", g)?,
            }
        }
        write!(f, "]⟩")
    }
}

/// Instantiates a template term whose variables are standard `x1…xn` with
/// the given arguments.
pub fn instantiate(template: &Term, args: &[Term]) -> Term {
    match template {
        Term::Var(v) => {
            let i = v.standard_index().expect("template variables are standard") as usize;
            args.get(i - 1)
                .unwrap_or_else(|| panic!("template variable x{i} has no argument"))
                .clone()
        }
        Term::App(f, targs) => Term::App(
            f.clone(),
            targs.iter().map(|t| instantiate(t, args)).collect(),
        ),
    }
}

/// Flattens a skeleton, replacing each gap occurrence by the template the
/// callback supplies (instantiated at the flattened arguments). First-order
/// variables are kept. Returns `None` when the callback has no template for
/// some gap.
pub fn flatten_with<F: FnMut(&Gap) -> Option<Term>>(sk: &Skeleton, f: &mut F) -> Option<Term> {
    match sk {
        Skeleton::Var(v) => Some(Term::Var(v.clone())),
        Skeleton::App(sym, args) => Some(Term::App(
            sym.clone(),
            args.iter()
                .map(|a| flatten_with(a, f))
                .collect::<Option<Vec<_>>>()?,
        )),
        Skeleton::Gap(g, args) => {
            let template = f(g)?;
            let flat_args = args
                .iter()
                .map(|a| flatten_with(a, f))
                .collect::<Option<Vec<_>>>()?;
            Some(instantiate(&template, &flat_args))
        }
    }
}

/// Instantiates a skeleton template (standard variables `x1…xn`) with
/// argument skeletons.
fn instantiate_skeleton(template: &Skeleton, args: &[Skeleton]) -> Option<Skeleton> {
    match template {
        Skeleton::Var(v) => {
            let i = v.standard_index()? as usize;
            args.get(i - 1).cloned()
        }
        Skeleton::App(f, targs) => Some(Skeleton::App(
            f.clone(),
            targs
                .iter()
                .map(|t| instantiate_skeleton(t, args))
                .collect::<Option<Vec<_>>>()?,
        )),
        Skeleton::Gap(g, targs) => Some(Skeleton::Gap(
            g.clone(),
            targs
                .iter()
                .map(|t| instantiate_skeleton(t, args))
                .collect::<Option<Vec<_>>>()?,
        )),
    }
}

/// A pattern-skeleton substitution witnessing a coarsening: maps each gap of
/// the coarse cluster to a skeleton over the fine cluster's gaps, standard
/// in its first-order variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness(BTreeMap<Gap, Skeleton>);

impl Witness {
    pub fn new(map: BTreeMap<Gap, Skeleton>) -> Witness {
        Witness(map)
    }

    pub fn get(&self, g: &Gap) -> Option<&Skeleton> {
        self.0.get(g)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Gap, &Skeleton)> {
        self.0.iter()
    }

    /// The identity witness on a cluster: each gap maps to itself applied to
    /// its argument variables.
    pub fn identity(cluster: &InductiveCluster) -> Witness {
        Witness(
            cluster
                .assignment()
                .keys()
                .map(|g| {
                    let args = (1..=g.arity)
                        .map(|i| Skeleton::Var(Variable::standard(i as u64)))
                        .collect();
                    (g.clone(), Skeleton::Gap(g.clone(), args))
                })
                .collect(),
        )
    }

    /// Applies the witness to a skeleton over the coarse cluster's gaps.
    pub fn apply(&self, sk: &Skeleton) -> Option<Skeleton> {
        match sk {
            Skeleton::Var(_) => Some(sk.clone()),
            Skeleton::App(f, args) => Some(Skeleton::App(
                f.clone(),
                args.iter()
                    .map(|a| self.apply(a))
                    .collect::<Option<Vec<_>>>()?,
            )),
            Skeleton::Gap(g, args) => {
                let template = self.0.get(g)?;
                let applied = args
                    .iter()
                    .map(|a| self.apply(a))
                    .collect::<Option<Vec<_>>>()?;
                instantiate_skeleton(template, &applied)
            }
        }
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, (g, sk)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{g} ↦ {sk}")?;
        }
        write!(f, "]")
    }
}

/// Verifies that `witness` proves `fine ⊑ coarse`: applying it to the coarse
/// skeleton yields the fine skeleton, and flattening each witness skeleton
/// under the fine assignment recovers the coarse pattern.
pub fn witness_check(
    fine: &InductiveCluster,
    coarse: &InductiveCluster,
    witness: &Witness,
) -> bool {
    match witness.apply(coarse.skeleton()) {
        Some(applied) if &applied == fine.skeleton() => {}
        _ => return false,
    }
    coarse.assignment().iter().all(|(g, pattern)| {
        let Some(template) = witness.get(g) else {
            return false;
        };
        let flattened = flatten_with(template, &mut |h| {
            Some(fine.assignment().get(h)?.term().clone())
        });
        flattened.as_ref() == Some(pattern.term())
    })
}

/// Decides `fine ⊑ coarse` (the coarse cluster merges patterns of the fine
/// one, i.e. has the larger geometric position set) and returns a verified
/// witness substitution. `None` when the clusters are unrelated.
///
/// Both clusters must be for the same subject term.
pub fn coarsening_le(
    fine: &InductiveCluster,
    coarse: &InductiveCluster,
) -> Result<Option<Witness>, ClusterError> {
    let subject = fine.flatten();
    if subject != coarse.flatten() {
        return Err(ClusterError::SubjectMismatch);
    }
    let fine_geo = fine.to_geometric();
    let coarse_geo = coarse.to_geometric();
    if !fine_geo.positions().is_subset(coarse_geo.positions()) {
        return Ok(None);
    }
    let witness = crate::isomorphism::build_witness(fine, coarse, &fine_geo);
    assert!(
        witness_check(fine, coarse, &witness),
        "internal: constructed coarsening witness failed verification"
    );
    Ok(Some(witness))
}
