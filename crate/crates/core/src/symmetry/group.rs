//! Permutation and sign-flip groups acting on network parameters.
//!
//! Every element is normalized to a [`LinearAction`]: for each layer `l`,
//! `W'_{ij} = r_l[i] · c_l[j] · W_{π_l(i), π_{l-1}(j)}` and
//! `b'_i = r_l[i] · b_{π_l(i)}`, with `π_0` and `π_L` the identity.
//! Such actions are orthogonal (signed coordinate permutations).

use std::collections::{HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{Model, NetworkLayout};

/// Permutation `π` of `0..n`, acting as `(P v)_i = v_{π(i)}`.
/// Serialized 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &k in &images {
            if k >= n || std::mem::replace(&mut seen[k], true) {
                return Err(Error::invalid(format!("{images:?} is not a permutation")));
            }
        }
        Ok(Permutation(images))
    }

    /// Transposition of `i` and `j` (0-based) in `S_n`.
    pub fn swap(n: usize, i: usize, j: usize) -> Self {
        let mut p: Vec<usize> = (0..n).collect();
        p.swap(i, j);
        Permutation(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    pub fn get(&self, i: usize) -> usize {
        self.0[i]
    }
}

impl Serialize for Permutation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(|k| k + 1))
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let one_based = Vec::<usize>::deserialize(d)?;
        let images = one_based
            .into_iter()
            .map(|k| k.checked_sub(1).ok_or_else(|| serde::de::Error::custom("indices are 1-based")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Permutation::new(images).map_err(serde::de::Error::custom)
    }
}

/// `(Λ, P)` in the hyper-octahedral group of one hidden layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignedPerm {
    pub signs: Vec<i8>,
    pub perm: Permutation,
}

/// Element of the permutation, sign, primed-sign or combined group.
/// Lists run over hidden layers `1..L-1`, except `SignPrime` which covers
/// every layer `1..L`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupElement {
    Perm { perms: Vec<Permutation> },
    Sign { signs: Vec<Vec<i8>> },
    SignPrime { signs: Vec<Vec<i8>> },
    Combined { layers: Vec<SignedPerm> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearAction {
    /// `π_0 … π_L`.
    perms: Vec<Vec<usize>>,
    /// `r_1 … r_L`, stored at index `l - 1`.
    row_signs: Vec<Vec<i8>>,
    /// `c_1 … c_L`, stored at index `l - 1`.
    col_signs: Vec<Vec<i8>>,
}

fn check_signs(signs: &[i8], n: usize, what: &str) -> Result<()> {
    if signs.len() != n {
        return Err(Error::invalid(format!("{what}: expected {n} signs, got {}", signs.len())));
    }
    if signs.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::invalid(format!("{what}: signs must be ±1")));
    }
    Ok(())
}

impl GroupElement {
    pub fn perm(perms: Vec<Permutation>) -> Self {
        GroupElement::Perm { perms }
    }

    pub fn sign(signs: Vec<Vec<i8>>) -> Self {
        GroupElement::Sign { signs }
    }

    pub fn sign_prime(signs: Vec<Vec<i8>>) -> Self {
        GroupElement::SignPrime { signs }
    }

    pub fn combined(layers: Vec<SignedPerm>) -> Self {
        GroupElement::Combined { layers }
    }

    /// Swap two neurons (0-based) of a two-layer network of width `m`.
    pub fn neuron_swap(m: usize, i: usize, j: usize) -> Self {
        GroupElement::Perm {
            perms: vec![Permutation::swap(m, i, j)],
        }
    }

    /// Identity element of the given variant for `layout`.
    pub fn identity_like(&self, layout: &NetworkLayout) -> Self {
        let hidden = &layout.widths()[1..layout.depth()];
        match self {
            GroupElement::Perm { .. } => {
                GroupElement::Perm { perms: hidden.iter().map(|&n| Permutation::identity(n)).collect() }
            }
            GroupElement::Sign { .. } => GroupElement::Sign { signs: hidden.iter().map(|&n| vec![1; n]).collect() },
            GroupElement::SignPrime { .. } => GroupElement::SignPrime {
                signs: layout.widths()[1..].iter().map(|&n| vec![1; n]).collect(),
            },
            GroupElement::Combined { .. } => GroupElement::Combined {
                layers: hidden
                    .iter()
                    .map(|&n| SignedPerm { signs: vec![1; n], perm: Permutation::identity(n) })
                    .collect(),
            },
        }
    }

    /// Normalize against a concrete layout, validating sizes.
    pub fn action(&self, layout: &NetworkLayout) -> Result<LinearAction> {
        let w = layout.widths();
        let depth = layout.depth();
        let hidden = depth - 1;
        let mut perms: Vec<Vec<usize>> = w.iter().map(|&n| (0..n).collect()).collect();
        let ones = |l: usize| vec![1_i8; w[l]];
        let mut row_signs: Vec<Vec<i8>> = (1..=depth).map(ones).collect();
        let mut col_signs: Vec<Vec<i8>> = (1..=depth).map(|l| ones(l - 1)).collect();

        let count = |got: usize, want: usize| -> Result<()> {
            if got == want {
                Ok(())
            } else {
                Err(Error::invalid(format!("group element has {got} layers, model needs {want}")))
            }
        };
        match self {
            GroupElement::Perm { perms: ps } => {
                count(ps.len(), hidden)?;
                for (l, p) in ps.iter().enumerate() {
                    crate::error::check_len("permutation", w[l + 1], p.len())?;
                    perms[l + 1] = p.0.clone();
                }
            }
            GroupElement::Sign { signs } => {
                count(signs.len(), hidden)?;
                for (k, s) in signs.iter().enumerate() {
                    let l = k + 1;
                    check_signs(s, w[l], "sign element")?;
                    row_signs[l - 1] = s.clone();
                    col_signs[l] = s.clone();
                }
            }
            GroupElement::SignPrime { signs } => {
                count(signs.len(), depth)?;
                for (k, s) in signs.iter().enumerate() {
                    check_signs(s, w[k + 1], "primed sign element")?;
                    row_signs[k] = s.clone();
                }
            }
            GroupElement::Combined { layers } => {
                count(layers.len(), hidden)?;
                for (k, sp) in layers.iter().enumerate() {
                    let l = k + 1;
                    check_signs(&sp.signs, w[l], "combined element")?;
                    crate::error::check_len("permutation", w[l], sp.perm.len())?;
                    perms[l] = sp.perm.0.clone();
                    row_signs[l - 1] = sp.signs.clone();
                    col_signs[l] = sp.signs.clone();
                }
            }
        }
        Ok(LinearAction {
            perms,
            row_signs,
            col_signs,
        })
    }

    pub fn apply(&self, model: &Model, theta: &[f64]) -> Result<Vec<f64>> {
        let layout = model
            .layout()
            .ok_or_else(|| Error::Unsupported("group actions need a layered network".into()))?;
        self.action(&layout)?.apply(&layout, theta)
    }

    /// Product `self · other` within the same variant (`self` applied last).
    /// For `Combined`: `(Λ₁,P₁)(Λ₂,P₂) = (Λ₁P₁Λ₂P₁ᵀ, P₁P₂)`.
    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        let perm_product = |p1: &Permutation, p2: &Permutation| -> Result<Permutation> {
            crate::error::check_len("permutation", p1.len(), p2.len())?;
            Ok(Permutation(p1.0.iter().map(|&k| p2.0[k]).collect()))
        };
        let sign_product = |s1: &[i8], s2: &[i8]| -> Result<Vec<i8>> {
            crate::error::check_len("signs", s1.len(), s2.len())?;
            Ok(s1.iter().zip(s2).map(|(a, b)| a * b).collect())
        };
        let same_len = |a: usize, b: usize| {
            if a == b {
                Ok(())
            } else {
                Err(Error::invalid("group elements have different layer counts"))
            }
        };
        match (self, other) {
            (GroupElement::Perm { perms: a }, GroupElement::Perm { perms: b }) => {
                same_len(a.len(), b.len())?;
                Ok(GroupElement::Perm {
                    perms: a.iter().zip(b).map(|(p, q)| perm_product(p, q)).collect::<Result<_>>()?,
                })
            }
            (GroupElement::Sign { signs: a }, GroupElement::Sign { signs: b }) => {
                same_len(a.len(), b.len())?;
                Ok(GroupElement::Sign {
                    signs: a.iter().zip(b).map(|(p, q)| sign_product(p, q)).collect::<Result<_>>()?,
                })
            }
            (GroupElement::SignPrime { signs: a }, GroupElement::SignPrime { signs: b }) => {
                same_len(a.len(), b.len())?;
                Ok(GroupElement::SignPrime {
                    signs: a.iter().zip(b).map(|(p, q)| sign_product(p, q)).collect::<Result<_>>()?,
                })
            }
            (GroupElement::Combined { layers: a }, GroupElement::Combined { layers: b }) => {
                same_len(a.len(), b.len())?;
                let layers = a
                    .iter()
                    .zip(b)
                    .map(|(g1, g2)| {
                        crate::error::check_len("signs", g1.signs.len(), g2.signs.len())?;
                        // P₁Λ₂P₁ᵀ is diagonal with entries λ₂[π₁(i)].
                        let conj: Vec<i8> = g1.perm.0.iter().map(|&k| g2.signs[k]).collect();
                        Ok(SignedPerm {
                            signs: sign_product(&g1.signs, &conj)?,
                            perm: perm_product(&g1.perm, &g2.perm)?,
                        })
                    })
                    .collect::<Result<_>>()?;
                Ok(GroupElement::Combined { layers })
            }
            _ => Err(Error::invalid("cannot compose group elements of different kinds")),
        }
    }
}

impl LinearAction {
    pub fn apply(&self, layout: &NetworkLayout, theta: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len("theta", layout.n_params(), theta.len())?;
        let mut out = vec![0.0; theta.len()];
        for l in 1..=layout.depth() {
            let (rows, cols) = (layout.width(l), layout.width(l - 1));
            let (rp, cp) = (&self.perms[l], &self.perms[l - 1]);
            let (rs, cs) = (&self.row_signs[l - 1], &self.col_signs[l - 1]);
            for i in 0..rows {
                for j in 0..cols {
                    let s = f64::from(rs[i] * cs[j]);
                    out[layout.weight_index(l, i, j)] = s * theta[layout.weight_index(l, rp[i], cp[j])];
                }
                if let (Some(dst), Some(src)) = (layout.bias_index(l, i), layout.bias_index(l, rp[i])) {
                    out[dst] = f64::from(rs[i]) * theta[src];
                }
            }
        }
        Ok(out)
    }

    /// `self ∘ other` (apply `other` first).
    pub fn then_after(&self, other: &LinearAction) -> LinearAction {
        let perms = self
            .perms
            .iter()
            .zip(&other.perms)
            .map(|(p1, p2)| p1.iter().map(|&k| p2[k]).collect())
            .collect();
        let compose_signs = |s1: &[Vec<i8>], s2: &[Vec<i8>], offset: usize| -> Vec<Vec<i8>> {
            s1.iter()
                .zip(s2)
                .enumerate()
                .map(|(k, (a, b))| {
                    let p1 = &self.perms[k + offset];
                    a.iter().enumerate().map(|(i, &ai)| ai * b[p1[i]]).collect()
                })
                .collect()
        };
        LinearAction {
            perms,
            row_signs: compose_signs(&self.row_signs, &other.row_signs, 1),
            col_signs: compose_signs(&self.col_signs, &other.col_signs, 0),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.perms.iter().all(|p| p.iter().enumerate().all(|(i, &k)| i == k))
            && self.row_signs.iter().chain(&self.col_signs).flatten().all(|&s| s == 1)
    }

    pub fn identity(layout: &NetworkLayout) -> Self {
        let w = layout.widths();
        LinearAction {
            perms: w.iter().map(|&n| (0..n).collect()).collect(),
            row_signs: (1..w.len()).map(|l| vec![1; w[l]]).collect(),
            col_signs: (1..w.len()).map(|l| vec![1; w[l - 1]]).collect(),
        }
    }

    /// Trace of the action as a signed permutation matrix.
    pub fn trace(&self, layout: &NetworkLayout) -> i64 {
        let mut tr = 0_i64;
        for l in 1..=layout.depth() {
            let (rp, cp) = (&self.perms[l], &self.perms[l - 1]);
            let (rs, cs) = (&self.row_signs[l - 1], &self.col_signs[l - 1]);
            for i in 0..layout.width(l) {
                if rp[i] != i {
                    continue;
                }
                for j in 0..layout.width(l - 1) {
                    if cp[j] == j {
                        tr += i64::from(rs[i] * cs[j]);
                    }
                }
                if layout.has_bias() {
                    tr += i64::from(rs[i]);
                }
            }
        }
        tr
    }
}

/// All elements of the finite group generated by `generators`, identity first.
pub fn generated_group(generators: &[LinearAction], layout: &NetworkLayout, limit: usize) -> Result<Vec<LinearAction>> {
    let id = LinearAction::identity(layout);
    let mut seen: HashSet<LinearAction> = HashSet::from([id.clone()]);
    let mut order = vec![id.clone()];
    let mut queue = VecDeque::from([id]);
    while let Some(g) = queue.pop_front() {
        for h in generators {
            let gh = h.then_after(&g);
            if seen.insert(gh.clone()) {
                if seen.len() > limit {
                    return Err(Error::Budget {
                        requested: seen.len(),
                        limit,
                    });
                }
                order.push(gh.clone());
                queue.push_back(gh);
            }
        }
    }
    Ok(order)
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serde_json::to_string(self).map_err(|_| fmt::Error)?)
    }
}
