//! The order isomorphism between geometric and inductive clusters.
//!
//! Inductive to geometric evaluates the skeleton in a pair of algebras:
//! function symbols shift their argument sets (`f(P1,…,Pn) = ⋃ i·Pi`,
//! contributing no positions of their own), while a gap occurrence
//! evaluates its pattern in the position algebra (every pattern symbol
//! contributes `{eps:e, eps:v}` shifted to its place, pattern variables
//! take the already-evaluated argument sets) and drops the pattern's
//! root edge. Geometric to inductive proceeds by induction on the term,
//! carving out connected components as fresh gaps.

use std::collections::BTreeMap;

use crate::geometry::{internal_positions, ClusterError, GeometricCluster, Position, PositionSet};
use crate::inductive::{Gap, InductiveCluster, Pattern, Skeleton, Witness};
use crate::terms::{Path, Term, Variable};

impl InductiveCluster {
    /// The geometric cluster this inductive cluster denotes. Its subject is
    /// the flattened term.
    pub fn to_geometric(&self) -> GeometricCluster {
        let (positions, _) = eval_skeleton(self.skeleton(), self.assignment());
        GeometricCluster::new(self.flatten(), positions)
            .expect("evaluation of a valid cluster is a valid cluster")
    }

    /// Each gap paired with the positions of its pattern occurrence in the
    /// subject term, in left-to-right skeleton order (equivalently:
    /// outermost-leftmost component order).
    pub fn gap_components(&self) -> Vec<(Gap, PositionSet)> {
        let (_, components) = eval_skeleton(self.skeleton(), self.assignment());
        components
    }

    /// Transported lattice join: union on the geometric side.
    pub fn join(&self, other: &InductiveCluster) -> Result<InductiveCluster, ClusterError> {
        Ok(self
            .to_geometric()
            .join(&other.to_geometric())?
            .to_inductive())
    }

    /// Transported lattice meet: intersection on the geometric side.
    pub fn meet(&self, other: &InductiveCluster) -> Result<InductiveCluster, ClusterError> {
        Ok(self
            .to_geometric()
            .meet(&other.to_geometric())?
            .to_inductive())
    }

    /// The top cluster for a term: every internal position covered.
    pub fn top(subject: &Term) -> InductiveCluster {
        GeometricCluster::top(subject.clone()).to_inductive()
    }

    /// The bottom cluster for a term: no positions, the skeleton is the term.
    pub fn bottom(subject: &Term) -> InductiveCluster {
        GeometricCluster::bottom(subject.clone()).to_inductive()
    }
}

// Evaluates a skeleton bottom-up, returning the positions of the whole
// cluster and the per-gap pattern contributions in skeleton order.
fn eval_skeleton(
    sk: &Skeleton,
    assignment: &BTreeMap<Gap, Pattern>,
) -> (PositionSet, Vec<(Gap, PositionSet)>) {
    match sk {
        Skeleton::Var(_) => (PositionSet::new(), Vec::new()),
        Skeleton::App(_, args) => {
            let mut positions = PositionSet::new();
            let mut components = Vec::new();
            for (i, arg) in args.iter().enumerate() {
                let (p, comps) = eval_skeleton(arg, assignment);
                positions = positions.union(&p.shifted(i + 1));
                components.extend(comps.into_iter().map(|(g, set)| (g, set.shifted(i + 1))));
            }
            (positions, components)
        }
        Skeleton::Gap(g, args) => {
            let pattern = assignment
                .get(g)
                .unwrap_or_else(|| panic!("gap {} has no pattern", g.name));
            // The pattern's own contribution, its root edge removed.
            let own = internal_positions(pattern.term());
            let var_paths = pattern_variable_paths(pattern);
            let mut positions = own.clone();
            let mut components = vec![(g.clone(), own)];
            for (i, arg) in args.iter().enumerate() {
                let (p, comps) = eval_skeleton(arg, assignment);
                let at = &var_paths[i];
                positions = positions.union(&p.shifted_by(at));
                components.extend(comps.into_iter().map(|(h, set)| (h, set.shifted_by(at))));
            }
            (positions, components)
        }
    }
}

// Paths of the standard variables x1…xn of a pattern, indexed by i-1.
fn pattern_variable_paths(pattern: &Pattern) -> Vec<Path> {
    let mut paths = vec![Vec::new(); pattern.arity()];
    fn walk(t: &Term, prefix: &mut Path, paths: &mut Vec<Path>) {
        match t {
            Term::Var(v) => {
                let i = v.standard_index().expect("patterns are standard") as usize;
                paths[i - 1] = prefix.clone();
            }
            Term::App(_, args) => {
                for (i, arg) in args.iter().enumerate() {
                    prefix.push(i + 1);
                    walk(arg, prefix, paths);
                    prefix.pop();
                }
            }
        }
    }
    walk(pattern.term(), &mut Vec::new(), &mut paths);
    paths
}

impl GeometricCluster {
    /// The inductive cluster this geometric cluster denotes, with canonical
    /// gaps `X1, X2, …` in outermost-leftmost component order. Satisfies
    /// `result.flatten() == subject` and `result.to_geometric() == self`.
    pub fn to_inductive(&self) -> InductiveCluster {
        let mut counter = 1u64;
        let mut assignment = BTreeMap::new();
        let skeleton = rebuild(
            self.subject(),
            self.positions(),
            &mut counter,
            &mut assignment,
        );
        InductiveCluster::from_validated(skeleton, assignment)
    }
}

// Replaces each outermost component occurrence by a fresh gap applied to
// the recursively-processed fringe subterms; the component itself, fringe
// replaced by x1…xn, becomes the gap's pattern.
fn rebuild(
    t: &Term,
    positions: &PositionSet,
    counter: &mut u64,
    assignment: &mut BTreeMap<Gap, Pattern>,
) -> Skeleton {
    if positions.is_empty() {
        return Skeleton::from_term(t);
    }
    if positions.contains(&Position::root_vertex()) {
        let mut fringe = Vec::new();
        let mut next_var = 1u64;
        let pattern_term = carve(t, positions, &mut Vec::new(), &mut fringe, &mut next_var);
        let pattern = Pattern::new(pattern_term).expect("carved component is a pattern");
        let gap = Gap::canonical(*counter, pattern.arity());
        *counter += 1;
        assignment.insert(gap.clone(), pattern);
        let args = fringe
            .iter()
            .map(|path| {
                let sub = t.subterm_at(path).expect("fringe path addresses a node");
                let sub_positions = positions.restricted_to(path);
                rebuild(sub, &sub_positions, counter, assignment)
            })
            .collect();
        Skeleton::Gap(gap, args)
    } else {
        match t {
            Term::App(f, args) => Skeleton::App(
                f.clone(),
                args.iter()
                    .enumerate()
                    .map(|(i, arg)| {
                        let sub_positions = positions.restricted_to(&[i + 1]);
                        rebuild(arg, &sub_positions, counter, assignment)
                    })
                    .collect(),
            ),
            Term::Var(_) => unreachable!("valid clusters have no positions at variables"),
        }
    }
}

// Copies the component containing the root vertex, replacing each subterm
// hanging off the component (no connecting edge in the cluster) by the next
// standard variable, recording its path.
fn carve(
    t: &Term,
    positions: &PositionSet,
    prefix: &mut Path,
    fringe: &mut Vec<Path>,
    next_var: &mut u64,
) -> Term {
    match t {
        Term::Var(_) => unreachable!("component vertices are function nodes"),
        Term::App(f, args) => {
            let new_args = args
                .iter()
                .enumerate()
                .map(|(i, arg)| {
                    prefix.push(i + 1);
                    let connected = positions.contains(&Position::edge(prefix.clone()));
                    let result = if connected {
                        carve(arg, positions, prefix, fringe, next_var)
                    } else {
                        fringe.push(prefix.clone());
                        let v = Term::Var(Variable::standard(*next_var));
                        *next_var += 1;
                        v
                    };
                    prefix.pop();
                    result
                })
                .collect();
            Term::App(f.clone(), new_args)
        }
    }
}

/// Builds the coarsening witness for `fine ⊑ coarse` (assumes the geometric
/// inclusion has been established): every coarse pattern is re-carved along
/// the fine positions it contains, and the resulting gaps are renamed to the
/// fine gaps occupying the same components.
pub(crate) fn build_witness(
    fine: &InductiveCluster,
    coarse: &InductiveCluster,
    fine_geo: &GeometricCluster,
) -> Witness {
    let component_to_fine_gap: BTreeMap<PositionSet, Gap> = fine
        .gap_components()
        .into_iter()
        .map(|(g, set)| (set, g))
        .collect();
    let mut map = BTreeMap::new();
    for (z, component) in coarse.gap_components() {
        let root: Path = component
            .iter()
            .next()
            .expect("components are nonempty")
            .path
            .clone();
        let rel: PositionSet = fine_geo
            .positions()
            .iter()
            .filter(|p| component.contains(p))
            .map(|p| {
                p.strip_prefix(&root)
                    .expect("component positions extend its root")
            })
            .collect();
        let pattern = coarse.pattern(&z).expect("valid cluster").clone();
        let sub = GeometricCluster::new(pattern.term().clone(), rel)
            .expect("fine positions inside a component form a cluster of its pattern")
            .to_inductive();
        let renaming: BTreeMap<Gap, Gap> = sub
            .gap_components()
            .into_iter()
            .map(|(local, set)| {
                let absolute = set.shifted_by(&root);
                let fine_gap = component_to_fine_gap
                    .get(&absolute)
                    .expect("each fine component lies inside exactly one coarse component")
                    .clone();
                (local, fine_gap)
            })
            .collect();
        map.insert(z, sub.skeleton().rename_gaps(&renaming));
    }
    Witness::new(map)
}
