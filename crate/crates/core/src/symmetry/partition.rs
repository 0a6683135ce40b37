//! Invariant-partition leaves of two-layer networks.
//!
//! Neuron `i` is the vector `v_i = (a_i, w_i) ∈ R^{d+1}`. In equality mode a
//! leaf is fixed by which neurons coincide. In sign mode (odd activations)
//! neurons are compared up to sign, and neurons equal to zero form a separate
//! zero block.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TwoLayer;
use crate::rng::SeededRng;

pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-9;

/// Largest width accepted by [`enumerate_leaves`].
pub const MAX_ENUMERATE_WIDTH: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    Equality,
    Sign,
}

impl fmt::Display for PartitionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartitionMode::Equality => "equality",
            PartitionMode::Sign => "sign",
        })
    }
}

impl std::str::FromStr for PartitionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equality" => Ok(PartitionMode::Equality),
            "sign" => Ok(PartitionMode::Sign),
            _ => Err(Error::invalid(format!("unknown partition mode '{s}'"))),
        }
    }
}

/// Canonical leaf label. `blocks` holds the nonzero blocks only, each sorted,
/// ordered by smallest member. Indices are 0-based in memory and 1-based in
/// JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawPartition")]
pub struct NeuronPartition {
    pub mode: PartitionMode,
    #[serde(with = "super::one_based_nested")]
    pub blocks: Vec<Vec<usize>>,
    #[serde(with = "super::one_based", default)]
    pub zero_block: Vec<usize>,
    pub gamma: Vec<i8>,
    pub tol: f64,
}

/// Wire form; `gamma` and `tol` may be omitted and are canonicalized on load.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPartition {
    mode: PartitionMode,
    #[serde(with = "super::one_based_nested")]
    blocks: Vec<Vec<usize>>,
    #[serde(with = "super::one_based", default)]
    zero_block: Vec<usize>,
    #[serde(default)]
    gamma: Option<Vec<i8>>,
    #[serde(default = "default_tol")]
    tol: f64,
}

fn default_tol() -> f64 {
    DEFAULT_CLASSIFY_TOL
}

impl TryFrom<RawPartition> for NeuronPartition {
    type Error = Error;

    fn try_from(r: RawPartition) -> Result<Self> {
        NeuronPartition::new(r.mode, r.blocks, r.zero_block, r.gamma, r.tol)
    }
}

impl PartialEq for NeuronPartition {
    /// Leaf identity; the tolerance is not part of it.
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode
            && self.blocks == other.blocks
            && self.zero_block == other.zero_block
            && self.gamma == other.gamma
    }
}

impl Eq for NeuronPartition {}

fn inf_dist(u: &[f64], v: &[f64], sign: f64) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - sign * b).abs()).fold(0.0, f64::max)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn neurons<'a>(net: &TwoLayer, theta: &'a [f64]) -> Result<Vec<&'a [f64]>> {
    crate::error::check_len("theta", net.n_params(), theta.len())?;
    if let Some(k) = theta.iter().position(|x| !x.is_finite()) {
        return Err(Error::non_finite(format!("theta[{k}]")));
    }
    Ok(theta.chunks(net.d + 1).collect())
}

/// Value in the ambiguous band `(tol, 2·tol]`.
fn in_guard_band(dist: f64, tol: f64) -> bool {
    dist > tol && dist <= 2.0 * tol
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        self.0[i] = r;
        r
    }

    fn union(&mut self, i: usize, j: usize) {
        let (a, b) = (self.find(i), self.find(j));
        let (lo, hi) = (a.min(b), a.max(b));
        self.0[hi] = lo;
    }
}

/// Group `members` by union-find root, sorted canonically.
fn collect_blocks(members: &[usize], uf: &mut UnionFind) -> Vec<Vec<usize>> {
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<(usize, usize)> = Vec::new();
    for &i in members {
        let r = uf.find(i);
        match root_of.iter().find(|(root, _)| *root == r) {
            Some(&(_, b)) => blocks[b].push(i),
            None => {
                root_of.push((r, blocks.len()));
                blocks.push(vec![i]);
            }
        }
    }
    blocks
}

/// Leaf of `theta`. Pairwise distances in `(tol, 2·tol]` are refused with
/// [`Error::Ambiguous`] so that tolerance-equality stays transitive.
pub fn classify_partition(net: &TwoLayer, theta: &[f64], mode: PartitionMode, tol: f64) -> Result<NeuronPartition> {
    if !(tol >= 0.0) {
        return Err(Error::invalid("classification tolerance must be ≥ 0"));
    }
    let v = neurons(net, theta)?;
    let m = net.m;
    let ambiguous = |i: usize, j: usize, distance: f64| Error::Ambiguous {
        i: i + 1,
        j: j + 1,
        distance,
        tol,
    };

    let mut zero_block = Vec::new();
    let mut nonzero = Vec::new();
    if mode == PartitionMode::Sign {
        for (i, vi) in v.iter().enumerate() {
            let n = inf_norm(vi);
            if in_guard_band(n, tol) {
                return Err(ambiguous(i, i, n));
            }
            if n <= tol {
                zero_block.push(i);
            } else {
                nonzero.push(i);
            }
        }
    } else {
        nonzero.extend(0..m);
    }

    let mut uf = UnionFind((0..m).collect());
    let mut tie_sign = vec![vec![0_i8; m]; m];
    for (a, &i) in nonzero.iter().enumerate() {
        for &j in &nonzero[a + 1..] {
            let plus = inf_dist(v[i], v[j], 1.0);
            let (dist, sign) = if mode == PartitionMode::Sign {
                let minus = inf_dist(v[i], v[j], -1.0);
                if minus < plus {
                    (minus, -1)
                } else {
                    (plus, 1)
                }
            } else {
                (plus, 1)
            };
            if in_guard_band(dist, tol) {
                return Err(ambiguous(i, j, dist));
            }
            if dist <= tol {
                uf.union(i, j);
                tie_sign[i][j] = sign;
            }
        }
    }
    let blocks = collect_blocks(&nonzero, &mut uf);
    let mut gamma = vec![1_i8; m];
    if mode == PartitionMode::Sign {
        for b in &blocks {
            for &j in &b[1..] {
                gamma[j] = tie_sign[b[0]][j];
            }
        }
    }
    Ok(NeuronPartition {
        mode,
        blocks,
        zero_block,
        gamma,
        tol,
    })
}

impl NeuronPartition {
    /// Build and canonicalize from 0-based blocks. `gamma` is rescaled so
    /// every block leader carries `+1`.
    pub fn new(
        mode: PartitionMode,
        mut blocks: Vec<Vec<usize>>,
        mut zero_block: Vec<usize>,
        gamma: Option<Vec<i8>>,
        tol: f64,
    ) -> Result<Self> {
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.retain(|b| !b.is_empty());
        blocks.sort_by_key(|b| b[0]);
        zero_block.sort_unstable();
        let m = blocks.iter().map(Vec::len).sum::<usize>() + zero_block.len();
        let mut gamma = gamma.unwrap_or_else(|| vec![1; m]);
        if mode == PartitionMode::Sign {
            for b in &blocks {
                let lead = gamma.get(b[0]).copied().unwrap_or(1);
                for &i in b {
                    if let Some(g) = gamma.get_mut(i) {
                        *g *= lead;
                    }
                }
            }
            for &i in &zero_block {
                if let Some(g) = gamma.get_mut(i) {
                    *g = 1;
                }
            }
        }
        let p = NeuronPartition {
            mode,
            blocks,
            zero_block,
            gamma,
            tol,
        };
        p.validate()?;
        Ok(p)
    }

    /// All-singleton partition of width `m`.
    pub fn discrete(m: usize, mode: PartitionMode) -> Self {
        NeuronPartition {
            mode,
            blocks: (0..m).map(|i| vec![i]).collect(),
            zero_block: Vec::new(),
            gamma: vec![1; m],
            tol: DEFAULT_CLASSIFY_TOL,
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.gamma.len();
        let mut seen = vec![false; m];
        for &i in self.blocks.iter().flatten().chain(&self.zero_block) {
            if i >= m || std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("neuron {} listed twice or out of range", i + 1)));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("partition blocks must cover every neuron"));
        }
        if self.mode == PartitionMode::Equality {
            if !self.zero_block.is_empty() {
                return Err(Error::invalid("zero_block is only used in sign mode"));
            }
            if self.gamma.iter().any(|&g| g != 1) {
                return Err(Error::invalid("gamma must be all +1 in equality mode"));
            }
        }
        if self.gamma.iter().any(|&g| g != 1 && g != -1) {
            return Err(Error::invalid("gamma entries must be ±1"));
        }
        for b in &self.blocks {
            if b.is_empty() || b.windows(2).any(|w| w[0] >= w[1]) || self.gamma[b[0]] != 1 {
                return Err(Error::invalid("partition is not in canonical form"));
            }
        }
        if self.blocks.windows(2).any(|w| w[0][0] >= w[1][0])
            || self.zero_block.windows(2).any(|w| w[0] >= w[1])
            || self.zero_block.iter().any(|&i| self.gamma[i] != 1)
        {
            return Err(Error::invalid("partition is not in canonical form"));
        }
        Ok(())
    }

    /// Number of nonzero blocks.
    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Leaf membership: within-block ties and zero neurons hold up to `tol`,
    /// and no further tie or zero holds.
    pub fn contains(&self, net: &TwoLayer, theta: &[f64], tol: f64) -> bool {
        let Ok(v) = neurons(net, theta) else {
            return false;
        };
        if self.width() != net.m {
            return false;
        }
        let sign = self.mode == PartitionMode::Sign;
        let g = |i: usize| f64::from(self.gamma[i]);
        if self.zero_block.iter().any(|&i| inf_norm(v[i]) > tol) {
            return false;
        }
        for (p, b) in self.blocks.iter().enumerate() {
            let lead = b[0];
            if sign && inf_norm(v[lead]) <= tol {
                return false;
            }
            if b[1..].iter().any(|&j| inf_dist(v[lead], v[j], g(lead) * g(j)) > tol) {
                return false;
            }
            for c in &self.blocks[p + 1..] {
                let other = c[0];
                if inf_dist(v[lead], v[other], 1.0) <= tol || (sign && inf_dist(v[lead], v[other], -1.0) <= tol) {
                    return false;
                }
            }
        }
        true
    }

    /// Order of the stabilizer subgroup of any leaf member.
    pub fn stabilizer_order(&self) -> u128 {
        let fact = |n: usize| (1..=n as u128).product::<u128>();
        let blocks: u128 = self.blocks.iter().map(|b| fact(b.len())).product();
        match self.mode {
            PartitionMode::Equality => blocks,
            // zero neurons permute freely and take either sign
            PartitionMode::Sign => (blocks * fact(self.zero_block.len())) << self.zero_block.len(),
        }
    }

    /// Random leaf member: one standard-normal representative per block,
    /// spread with `gamma`; zero-block neurons are 0.
    pub fn sample_member(&self, d: usize, rng: &mut SeededRng) -> Vec<f64> {
        let mut theta = vec![0.0; self.width() * (d + 1)];
        for b in &self.blocks {
            let rep = crate::rng::normal_vec(rng, d + 1);
            for &i in b {
                let g = f64::from(self.gamma[i]);
                for (k, r) in rep.iter().enumerate() {
                    theta[i * (d + 1) + k] = g * r;
                }
            }
        }
        theta
    }

    /// Short label such as `{1,2}{3}` or `0{1}|{2,-3}`.
    pub fn label(&self) -> String {
        let mut s = String::new();
        if self.mode == PartitionMode::Sign {
            s.push('0');
            s.push_str(&brace(self.zero_block.iter().map(|i| (i + 1).to_string())));
            s.push('|');
        }
        for b in &self.blocks {
            s.push_str(&brace(b.iter().map(|&i| {
                if self.gamma[i] < 0 {
                    format!("-{}", i + 1)
                } else {
                    (i + 1).to_string()
                }
            })));
        }
        s
    }
}

fn brace(items: impl Iterator<Item = String>) -> String {
    format!("{{{}}}", items.collect::<Vec<_>>().join(","))
}

impl fmt::Display for NeuronPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// `(d+1)` per nonzero block.
pub fn predicted_leaf_dim(partition: &NeuronPartition, d: usize) -> usize {
    (d + 1) * partition.n_blocks()
}

/// Set partitions of `items` via restricted growth strings, in lexicographic
/// order of the string.
pub fn set_partitions(items: &[usize]) -> Vec<Vec<Vec<usize>>> {
    let n = items.len();
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut rgs = vec![0_usize; n];
    loop {
        let k = rgs.iter().max().map_or(0, |&x| x + 1);
        let mut blocks = vec![Vec::new(); k];
        for (pos, &b) in rgs.iter().enumerate() {
            blocks[b].push(items[pos]);
        }
        out.push(blocks);
        // next restricted growth string
        let mut pos = n - 1;
        loop {
            if pos == 0 {
                return out;
            }
            let prefix_max = rgs[..pos].iter().copied().max().unwrap_or(0);
            if rgs[pos] <= prefix_max {
                rgs[pos] += 1;
                for r in &mut rgs[pos + 1..] {
                    *r = 0;
                }
                break;
            }
            pos -= 1;
        }
    }
}

/// Every canonical leaf of width `m`.
pub fn enumerate_leaves(m: usize, mode: PartitionMode) -> Result<Vec<NeuronPartition>> {
    if m > MAX_ENUMERATE_WIDTH {
        return Err(Error::TooLarge {
            m,
            max: MAX_ENUMERATE_WIDTH,
        });
    }
    let all: Vec<usize> = (0..m).collect();
    let mut leaves = Vec::new();
    match mode {
        PartitionMode::Equality => {
            for blocks in set_partitions(&all) {
                leaves.push(NeuronPartition::new(mode, blocks, Vec::new(), None, DEFAULT_CLASSIFY_TOL)?);
            }
        }
        PartitionMode::Sign => {
            for mask in 0..1_usize << m {
                let zero: Vec<usize> = all.iter().copied().filter(|&i| mask >> i & 1 == 1).collect();
                let rest: Vec<usize> = all.iter().copied().filter(|&i| mask >> i & 1 == 0).collect();
                for blocks in set_partitions(&rest) {
                    let followers: Vec<usize> = blocks.iter().flat_map(|b| b[1..].iter().copied()).collect();
                    for signs in 0..1_usize << followers.len() {
                        let mut gamma = vec![1_i8; m];
                        for (k, &i) in followers.iter().enumerate() {
                            if signs >> k & 1 == 1 {
                                gamma[i] = -1;
                            }
                        }
                        leaves.push(NeuronPartition::new(
                            mode,
                            blocks.clone(),
                            zero.clone(),
                            Some(gamma),
                            DEFAULT_CLASSIFY_TOL,
                        )?);
                    }
                }
            }
        }
    }
    Ok(leaves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Activation;

    fn net(m: usize, d: usize) -> TwoLayer {
        TwoLayer::new(Activation::Tanh, m, d).unwrap()
    }

    #[test]
    fn distinct_neurons_are_singletons() {
        let theta = [1.0, 2.0, 3.0, -1.0, 0.5, 0.0];
        let p = classify_partition(&net(3, 1), &theta, PartitionMode::Equality, 1e-9).unwrap();
        assert_eq!(p.blocks, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(p.stabilizer_order(), 1);
    }

    #[test]
    fn tied_pair() {
        let theta = [1.0, 0.3, 1.0, 0.3, 2.0, -0.7];
        let p = classify_partition(&net(3, 1), &theta, PartitionMode::Equality, 1e-9).unwrap();
        assert_eq!(p.blocks, vec![vec![0, 1], vec![2]]);
        assert_eq!(p.label(), "{1,2}{3}");
    }

    #[test]
    fn sign_mode_negated_pair() {
        let theta = [0.5, 1.5, -0.5, -1.5];
        let p = classify_partition(&net(2, 1), &theta, PartitionMode::Sign, 1e-9).unwrap();
        assert_eq!(p.blocks, vec![vec![0, 1]]);
        assert_eq!(p.gamma, vec![1, -1]);
        assert!(p.zero_block.is_empty());
        assert_eq!(predicted_leaf_dim(&p, 1), 2);
    }

    #[test]
    fn all_zero_sign_leaf_is_a_point() {
        let p = classify_partition(&net(3, 2), &[0.0; 9], PartitionMode::Sign, 1e-9).unwrap();
        assert_eq!(p.zero_block, vec![0, 1, 2]);
        assert_eq!(predicted_leaf_dim(&p, 2), 0);
        // the whole hyperoctahedral group of order 3!·2³
        assert_eq!(p.stabilizer_order(), 48);
    }

    #[test]
    fn guard_band_is_refused() {
        let theta = [1.0, 0.0, 1.0, 1.5e-9];
        let err = classify_partition(&net(2, 1), &theta, PartitionMode::Equality, 1e-9).unwrap_err();
        assert!(matches!(err, Error::Ambiguous { i: 1, j: 2, .. }));
        assert!(classify_partition(&net(2, 1), &theta, PartitionMode::Equality, 1e-10).is_ok());
    }

    #[test]
    fn stabilizer_orders() {
        let p = NeuronPartition::new(PartitionMode::Equality, vec![vec![0, 1, 2]], vec![], None, 0.0).unwrap();
        assert_eq!(p.stabilizer_order(), 6);
        let q = NeuronPartition::new(PartitionMode::Sign, vec![vec![2, 3]], vec![0, 1], None, 0.0).unwrap();
        assert_eq!(q.stabilizer_order(), 2 * 4 * 2);
    }

    #[test]
    fn canonical_gamma() {
        let p = NeuronPartition::new(PartitionMode::Sign, vec![vec![1, 0]], vec![], Some(vec![-1, 1]), 0.0).unwrap();
        assert_eq!(p.blocks, vec![vec![0, 1]]);
        assert_eq!(p.gamma, vec![1, -1]);
    }

    #[test]
    fn enumeration_sizes() {
        let bell = [1, 1, 2, 5, 15, 52, 203];
        for (m, &b) in bell.iter().enumerate() {
            assert_eq!(enumerate_leaves(m, PartitionMode::Equality).unwrap().len(), b);
        }
        assert_eq!(enumerate_leaves(1, PartitionMode::Sign).unwrap().len(), 2);
        assert_eq!(enumerate_leaves(2, PartitionMode::Sign).unwrap().len(), 6);
        assert!(matches!(enumerate_leaves(7, PartitionMode::Equality), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn json_uses_one_based_indices() {
        let p = NeuronPartition::new(PartitionMode::Sign, vec![vec![1, 2]], vec![0], Some(vec![1, 1, -1]), 1e-9).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains(r#""blocks":[[2,3]],"zero_block":[1]"#), "{s}");
        let back: NeuronPartition = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
