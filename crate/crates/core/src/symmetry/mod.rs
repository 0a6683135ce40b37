//! Symmetry groups, invariant-partition leaves and manifold descriptors.

mod group;
mod invariance;
mod partition;
mod sim;

pub use group::{generated_group, GroupElement, LinearAction, Permutation, SignedPerm};
pub use invariance::{check_infinitesimal_invariance, InvarianceReport, FIXED_POINT_TOL};
pub use partition::{
    classify_partition, enumerate_leaves, predicted_leaf_dim, set_partitions, NeuronPartition, PartitionMode,
    DEFAULT_CLASSIFY_TOL, MAX_ENUMERATE_WIDTH,
};
pub use sim::{Constraint, SimDescriptor, TieRelation, MAX_GROUP_ORDER};

fn to_one_based<E: serde::de::Error>(k: usize) -> Result<usize, E> {
    k.checked_sub(1).ok_or_else(|| E::custom("indices are 1-based"))
}

pub(crate) mod one_based_index {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &usize, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(*v as u64 + 1)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
        super::to_one_based(usize::deserialize(d)?)
    }
}

pub(crate) mod one_based {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[usize], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|k| k + 1))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
        Vec::<usize>::deserialize(d)?.into_iter().map(super::to_one_based).collect()
    }
}

pub(crate) mod one_based_nested {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<usize>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|b| b.iter().map(|k| k + 1).collect::<Vec<_>>()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<usize>>, D::Error> {
        Vec::<Vec<usize>>::deserialize(d)?
            .into_iter()
            .map(|b| b.into_iter().map(super::to_one_based).collect())
            .collect()
    }
}
