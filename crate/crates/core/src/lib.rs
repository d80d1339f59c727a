//! Two representations of clusters in first-order terms, geometric
//! (edge-closed sets of vertex/edge positions) and inductive (skeletons
//! with second-order gaps plus pattern substitutions), together with
//! their order isomorphism, the refinement lattice, steps-as-clusters,
//! and a lattice-theoretic criticality test for peaks of (multi-)steps,
//! cross-validated against the classical unification-based critical-pair
//! construction.
//!
//! Modules follow the pipeline:
//!
//! * [`terms`]: terms, substitution, matching, unification, standardization
//! * [`geometry`]: vertex/edge positions, geometric clusters, the subset lattice
//! * [`inductive`]: skeletons, gaps, inductive clusters, the coarsening order
//! * [`isomorphism`]: the maps between the two cluster representations
//! * [`rewriting`]: rules, COPS parsing, redexes, multi-steps
//! * [`peaks`]: criticality, classical critical pairs, decomposition, joinability

pub mod geometry;
pub mod inductive;
pub mod isomorphism;
pub mod peaks;
pub mod rewriting;
pub mod terms;

pub use geometry::{GeometricCluster, Position, PositionKind, PositionSet};
pub use inductive::{Gap, InductiveCluster, Pattern, Skeleton, Witness};
pub use peaks::{CriticalPair, CriticalityReport, Peak};
pub use rewriting::{MultiStep, RedexOccurrence, Rule, Trs};
pub use terms::{Signature, Substitution, Term, Variable};

#[cfg(test)]
mod thread_safety {
    // All values are immutable after construction and freely shareable.
    fn assert_send_sync<T: Send + Sync>() {}

    #[test]
    fn core_types_are_send_and_sync() {
        assert_send_sync::<crate::Term>();
        assert_send_sync::<crate::PositionSet>();
        assert_send_sync::<crate::GeometricCluster>();
        assert_send_sync::<crate::InductiveCluster>();
        assert_send_sync::<crate::Witness>();
        assert_send_sync::<crate::Trs>();
        assert_send_sync::<crate::MultiStep>();
        assert_send_sync::<crate::Peak>();
        assert_send_sync::<crate::CriticalityReport>();
    }
}
