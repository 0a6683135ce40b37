//! Declarative invariant-manifold descriptors.
//!
//! Every descriptor is a linear subspace of parameter space. All but
//! [`SimDescriptor::FixedPointSet`] compile to disjoint coordinate
//! constraints: a coordinate is zero, or a set of signed coordinates share a
//! common value.

use serde::{Deserialize, Serialize};

use super::group::{generated_group, GroupElement, LinearAction};
use super::partition::{NeuronPartition, PartitionMode};
use crate::error::{check_len, Error, Result};
use crate::model::{Model, NetworkLayout, TwoLayer};

/// Largest group closure used for fixed-point projection and dimension.
pub const MAX_GROUP_ORDER: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRelation {
    /// `(a_i, w_i) = (a_j, w_j)`.
    Equal,
    /// `(a_i, w_i) = −(a_j, w_j)`.
    Negated,
    /// `(a_i, w_i) = (a_j, −w_j)`.
    EvenMirror,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimDescriptor {
    EqualityClass {
        partition: NeuronPartition,
    },
    SignClass {
        partition: NeuronPartition,
    },
    PairTie {
        #[serde(with = "super::one_based_index")]
        i: usize,
        #[serde(with = "super::one_based_index")]
        j: usize,
        relation: TieRelation,
    },
    /// `(a_i, w_i) = 0`.
    NeuronZero {
        #[serde(with = "super::one_based_index")]
        i: usize,
    },
    /// `w_i = 0`.
    WeightZero {
        #[serde(with = "super::one_based_index")]
        i: usize,
    },
    /// `a_i = 0`.
    OutputZero {
        #[serde(with = "super::one_based_index")]
        i: usize,
    },
    /// `w_i = w_j` (or `w_i = −w_j` when `negated`).
    WeightTie {
        #[serde(with = "super::one_based_index")]
        i: usize,
        #[serde(with = "super::one_based_index")]
        j: usize,
        #[serde(default)]
        negated: bool,
    },
    /// Sets `I_1 … I_{L−1}` of hidden units; weights linking a set to its
    /// complement and biases of set members vanish.
    ZeroPattern {
        #[serde(with = "super::one_based_nested")]
        sets: Vec<Vec<usize>>,
    },
    /// Row `row` of `W^(layer)` and `b^(layer)_row` vanish.
    RowZero {
        layer: usize,
        #[serde(with = "super::one_based_index")]
        row: usize,
    },
    FixedPointSet {
        elements: Vec<GroupElement>,
    },
    FullSpace,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    Zero(usize),
    /// `s_k θ_k` equal across all listed `(k, s_k)`.
    Tie(Vec<(usize, f64)>),
}

impl Constraint {
    fn residual(&self, theta: &[f64]) -> f64 {
        match self {
            Constraint::Zero(k) => theta[*k].abs(),
            Constraint::Tie(entries) => {
                let (lo, hi) = entries.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(k, s)| {
                    let v = s * theta[k];
                    (lo.min(v), hi.max(v))
                });
                if entries.is_empty() {
                    0.0
                } else {
                    hi - lo
                }
            }
        }
    }

    fn project(&self, theta: &mut [f64]) {
        match self {
            Constraint::Zero(k) => theta[*k] = 0.0,
            Constraint::Tie(entries) => {
                let mean = entries.iter().map(|&(k, s)| s * theta[k]).sum::<f64>() / entries.len() as f64;
                for &(k, s) in entries {
                    theta[k] = s * mean;
                }
            }
        }
    }

    fn codim(&self) -> usize {
        match self {
            Constraint::Zero(_) => 1,
            Constraint::Tie(entries) => entries.len().saturating_sub(1),
        }
    }
}

fn two_layer<'a>(model: &'a Model, what: &str) -> Result<&'a TwoLayer> {
    model
        .as_two_layer()
        .ok_or_else(|| Error::Unsupported(format!("{what} applies to two-layer networks only")))
}

fn layout(model: &Model, what: &str) -> Result<NetworkLayout> {
    model
        .layout()
        .ok_or_else(|| Error::Unsupported(format!("{what} needs a layered network")))
}

fn check_neuron(net: &TwoLayer, i: usize) -> Result<()> {
    if i < net.m {
        Ok(())
    } else {
        Err(Error::invalid(format!("neuron index {} out of range 1..={}", i + 1, net.m)))
    }
}

/// Ties between neurons `i` and `j`: `a` with sign `sa`, `w` with sign `sw`.
fn neuron_tie(net: &TwoLayer, members: &[(usize, f64, f64)], include_a: bool) -> Vec<Constraint> {
    let b = net.d + 1;
    let first = if include_a { 0 } else { 1 };
    (first..b)
        .map(|k| {
            Constraint::Tie(
                members
                    .iter()
                    .map(|&(i, sa, sw)| (i * b + k, if k == 0 { sa } else { sw }))
                    .collect(),
            )
        })
        .collect()
}

impl SimDescriptor {
    pub fn kind(&self) -> &'static str {
        match self {
            SimDescriptor::EqualityClass { .. } => "equality_class",
            SimDescriptor::SignClass { .. } => "sign_class",
            SimDescriptor::PairTie { .. } => "pair_tie",
            SimDescriptor::NeuronZero { .. } => "neuron_zero",
            SimDescriptor::WeightZero { .. } => "weight_zero",
            SimDescriptor::OutputZero { .. } => "output_zero",
            SimDescriptor::WeightTie { .. } => "weight_tie",
            SimDescriptor::ZeroPattern { .. } => "zero_pattern",
            SimDescriptor::RowZero { .. } => "row_zero",
            SimDescriptor::FixedPointSet { .. } => "fixed_point_set",
            SimDescriptor::FullSpace => "full_space",
        }
    }

    /// Descriptor for the leaf closure of `partition`.
    pub fn from_partition(partition: NeuronPartition) -> Self {
        match partition.mode {
            PartitionMode::Equality => SimDescriptor::EqualityClass { partition },
            PartitionMode::Sign => SimDescriptor::SignClass { partition },
        }
    }

    /// Coordinate constraints; `None` for fixed-point sets.
    pub fn constraints(&self, model: &Model) -> Result<Option<Vec<Constraint>>> {
        let out = match self {
            SimDescriptor::EqualityClass { partition } | SimDescriptor::SignClass { partition } => {
                let net = two_layer(model, self.kind())?;
                partition.validate()?;
                let want = if matches!(self, SimDescriptor::EqualityClass { .. }) {
                    PartitionMode::Equality
                } else {
                    PartitionMode::Sign
                };
                if partition.mode != want {
                    return Err(Error::invalid(format!("{} needs a {want}-mode partition", self.kind())));
                }
                check_len("partition width", net.m, partition.width())?;
                let b = net.d + 1;
                let mut cs: Vec<Constraint> = partition
                    .zero_block
                    .iter()
                    .flat_map(|&i| (i * b..(i + 1) * b).map(Constraint::Zero))
                    .collect();
                for block in partition.blocks.iter().filter(|blk| blk.len() > 1) {
                    let members: Vec<(usize, f64, f64)> = block
                        .iter()
                        .map(|&i| {
                            let g = f64::from(partition.gamma[i]);
                            (i, g, g)
                        })
                        .collect();
                    cs.extend(neuron_tie(net, &members, true));
                }
                cs
            }
            SimDescriptor::PairTie { i, j, relation } => {
                let net = two_layer(model, self.kind())?;
                check_neuron(net, *i)?;
                check_neuron(net, *j)?;
                if i == j {
                    return Err(Error::invalid("pair_tie needs two distinct neurons"));
                }
                let (sa, sw) = match relation {
                    TieRelation::Equal => (1.0, 1.0),
                    TieRelation::Negated => (-1.0, -1.0),
                    TieRelation::EvenMirror => (1.0, -1.0),
                };
                neuron_tie(net, &[(*i, 1.0, 1.0), (*j, sa, sw)], true)
            }
            SimDescriptor::NeuronZero { i } => {
                let net = two_layer(model, self.kind())?;
                check_neuron(net, *i)?;
                let b = net.d + 1;
                (i * b..(i + 1) * b).map(Constraint::Zero).collect()
            }
            SimDescriptor::WeightZero { i } => {
                let net = two_layer(model, self.kind())?;
                check_neuron(net, *i)?;
                let b = net.d + 1;
                (i * b + 1..(i + 1) * b).map(Constraint::Zero).collect()
            }
            SimDescriptor::OutputZero { i } => {
                let net = two_layer(model, self.kind())?;
                check_neuron(net, *i)?;
                vec![Constraint::Zero(i * (net.d + 1))]
            }
            SimDescriptor::WeightTie { i, j, negated } => {
                let net = two_layer(model, self.kind())?;
                check_neuron(net, *i)?;
                check_neuron(net, *j)?;
                if i == j {
                    return Err(Error::invalid("weight_tie needs two distinct neurons"));
                }
                let s = if *negated { -1.0 } else { 1.0 };
                neuron_tie(net, &[(*i, 1.0, 1.0), (*j, s, s)], false)
            }
            SimDescriptor::ZeroPattern { sets } => {
                let lay = layout(model, self.kind())?;
                let depth = lay.depth();
                if sets.len() != depth - 1 {
                    return Err(Error::invalid(format!(
                        "zero_pattern needs {} hidden-layer sets, got {}",
                        depth - 1,
                        sets.len()
                    )));
                }
                let member = zero_pattern_membership(&lay, sets)?;
                let mut cs = Vec::new();
                for l in 1..=depth {
                    for i in 0..lay.width(l) {
                        for j in 0..lay.width(l - 1) {
                            if member[l][i] != member[l - 1][j] {
                                cs.push(Constraint::Zero(lay.weight_index(l, i, j)));
                            }
                        }
                        if member[l][i] {
                            cs.extend(lay.bias_index(l, i).map(Constraint::Zero));
                        }
                    }
                }
                cs
            }
            SimDescriptor::RowZero { layer, row } => {
                let lay = layout(model, self.kind())?;
                if *layer == 0 || *layer > lay.depth() || *row >= lay.width(*layer) {
                    return Err(Error::invalid(format!("row_zero ({layer}, {}) out of range", row + 1)));
                }
                lay.row_indices(*layer, *row).into_iter().map(Constraint::Zero).collect()
            }
            SimDescriptor::FixedPointSet { elements } => {
                let lay = layout(model, self.kind())?;
                for g in elements {
                    g.action(&lay)?;
                }
                return Ok(None);
            }
            SimDescriptor::FullSpace => Vec::new(),
        };
        Ok(Some(out))
    }

    pub fn validate(&self, model: &Model) -> Result<()> {
        self.constraints(model).map(|_| ())
    }

    fn actions(&self, model: &Model) -> Result<(NetworkLayout, Vec<LinearAction>)> {
        let SimDescriptor::FixedPointSet { elements } = self else {
            unreachable!("only fixed-point sets carry group elements")
        };
        let lay = layout(model, self.kind())?;
        let acts = elements.iter().map(|g| g.action(&lay)).collect::<Result<_>>()?;
        Ok((lay, acts))
    }

    /// Zero exactly on members; see the variant docs for the norm used.
    pub fn distance(&self, model: &Model, theta: &[f64]) -> Result<f64> {
        check_len("theta", model.n_params(), theta.len())?;
        match self.constraints(model)? {
            Some(cs) => Ok(cs.iter().map(|c| c.residual(theta)).fold(0.0, f64::max)),
            None => {
                let (lay, acts) = self.actions(model)?;
                let mut worst = 0.0_f64;
                for g in &acts {
                    let moved = g.apply(&lay, theta)?;
                    worst = moved.iter().zip(theta).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
                }
                Ok(worst)
            }
        }
    }

    pub fn contains(&self, model: &Model, theta: &[f64], tol: f64) -> Result<bool> {
        Ok(self.distance(model, theta)? <= tol)
    }

    /// A point of the manifold: block means for ties, zeros for vanishing
    /// entries, group average for fixed-point sets.
    pub fn project(&self, model: &Model, theta: &[f64]) -> Result<Vec<f64>> {
        check_len("theta", model.n_params(), theta.len())?;
        let mut out = theta.to_vec();
        match self.constraints(model)? {
            Some(cs) => {
                for c in &cs {
                    c.project(&mut out);
                }
            }
            None => {
                let (lay, acts) = self.actions(model)?;
                let group = generated_group(&acts, &lay, MAX_GROUP_ORDER)?;
                out.iter_mut().for_each(|x| *x = 0.0);
                for g in &group {
                    for (o, v) in out.iter_mut().zip(g.apply(&lay, theta)?) {
                        *o += v;
                    }
                }
                let n = group.len() as f64;
                out.iter_mut().for_each(|x| *x /= n);
            }
        }
        Ok(out)
    }

    pub fn dim(&self, model: &Model) -> Result<usize> {
        let n = model.n_params();
        match self.constraints(model)? {
            Some(cs) => Ok(n - cs.iter().map(Constraint::codim).sum::<usize>()),
            None => {
                let (lay, acts) = self.actions(model)?;
                let group = generated_group(&acts, &lay, MAX_GROUP_ORDER)?;
                let trace: i64 = group.iter().map(|g| g.trace(&lay)).sum();
                Ok((trace / group.len() as i64) as usize)
            }
        }
    }

    /// Entries `W^(l)_{ij}` with `i ∈ I_l`, `j ∈ I_{l−1}` of a zero pattern;
    /// empty for other descriptors.
    pub fn free_entries(&self, model: &Model) -> Result<Vec<usize>> {
        let SimDescriptor::ZeroPattern { sets } = self else {
            return Ok(Vec::new());
        };
        self.validate(model)?;
        let lay = layout(model, self.kind())?;
        let member = zero_pattern_membership(&lay, sets)?;
        let mut out = Vec::new();
        for l in 1..=lay.depth() {
            for i in 0..lay.width(l) {
                for j in 0..lay.width(l - 1) {
                    if member[l][i] && member[l - 1][j] {
                        out.push(lay.weight_index(l, i, j));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Sign element whose fixed-point set is this zero pattern.
    pub fn zero_pattern_element(&self, model: &Model) -> Result<GroupElement> {
        let SimDescriptor::ZeroPattern { sets } = self else {
            return Err(Error::invalid("not a zero_pattern descriptor"));
        };
        self.validate(model)?;
        let lay = layout(model, self.kind())?;
        let member = zero_pattern_membership(&lay, sets)?;
        Ok(GroupElement::sign(
            (1..lay.depth())
                .map(|l| member[l].iter().map(|&inside| if inside { -1 } else { 1 }).collect())
                .collect(),
        ))
    }
}

/// `member[l][i]` for every layer `0..=L`; input and output layers are empty.
fn zero_pattern_membership(lay: &NetworkLayout, sets: &[Vec<usize>]) -> Result<Vec<Vec<bool>>> {
    let mut member: Vec<Vec<bool>> = lay.widths().iter().map(|&n| vec![false; n]).collect();
    for (k, set) in sets.iter().enumerate() {
        let l = k + 1;
        for &i in set {
            if i >= lay.width(l) {
                return Err(Error::invalid(format!("zero_pattern index {} exceeds width of layer {l}", i + 1)));
            }
            member[l][i] = true;
        }
    }
    Ok(member)
}
