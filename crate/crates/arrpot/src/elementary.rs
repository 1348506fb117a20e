//! Elementary subarrangements and the closed-form projection onto Sing.
//!
//! An elementary subarrangement is an ordered tuple of disjoint blocks
//! (J_1, …, J_m) with |J_h| = λ_h + 1 and Σ λ_h = k such that each prefix
//! J_1 ∪ … ∪ J_h spans rank λ^h = λ_1 + … + λ_h, and removing any single
//! index from a prefix leaves its rank unchanged. Every such tuple carries
//! singular elements (anchored wedges of its block relations) and a weight
//! a(J_λ, J) = a_J · ∏_{h<m} (level weights); summing the anchored elements
//! over all tuples that distinguish a fixed independent k-set I reproduces
//! the orthogonal projection of F_I.

use crate::arrangement::ArrangementFamily;
use crate::error::{Error, Result};
use crate::flag::FlagVector;
use crate::rat::Rat;
use itertools::Itertools;
use num::Zero;
use std::collections::BTreeSet;

/// An ordered tuple of disjoint index blocks, each sorted ascending,
/// validated as elementary for a particular family.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Elementary {
    blocks: Vec<Vec<usize>>,
}

impl Elementary {
    /// Validates the tuple against the family; rejects structurally broken
    /// input and tuples failing the elementary conditions.
    pub fn new(arr: &ArrangementFamily, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if !is_elementary(arr, &blocks)? {
            return Err(Error::Malformed(format!("{blocks:?} is not elementary")));
        }
        Ok(Elementary {
            blocks: blocks.into_iter().map(|mut b| {
                b.sort_unstable();
                b
            }).collect(),
        })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn m(&self) -> usize {
        self.blocks.len()
    }

    /// The composition (λ_1, …, λ_m) with λ_h = |J_h| − 1.
    pub fn lambda(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len() - 1).collect()
    }

    /// Indices of the first h blocks, sorted.
    pub fn prefix(&self, h: usize) -> Vec<usize> {
        let mut p: Vec<usize> = self.blocks[..h].iter().flatten().copied().collect();
        p.sort_unstable();
        p
    }
}

/// Decides the elementary conditions. Errors on out-of-range indices,
/// repeats within a block, or overlap between blocks; returns false when
/// some block is a singleton, the composition does not sum to k, or a rank
/// condition fails.
pub fn is_elementary(arr: &ArrangementFamily, blocks: &[Vec<usize>]) -> Result<bool> {
    let mut seen = BTreeSet::new();
    for block in blocks {
        if block.is_empty() {
            return Err(Error::Malformed("empty block".into()));
        }
        for &j in block {
            if !(1..=arr.n()).contains(&j) {
                return Err(Error::Malformed(format!("index {j} out of range 1..={}", arr.n())));
            }
            if !seen.insert(j) {
                return Err(Error::Malformed(format!("index {j} appears twice")));
            }
        }
    }
    if blocks.iter().any(|b| b.len() < 2) {
        return Ok(false);
    }
    let lambda: Vec<usize> = blocks.iter().map(|b| b.len() - 1).collect();
    if lambda.iter().sum::<usize>() != arr.k() {
        return Ok(false);
    }
    let mut prefix: Vec<usize> = Vec::new();
    let mut rank_target = 0usize;
    for (block, lam) in blocks.iter().zip(&lambda) {
        prefix.extend_from_slice(block);
        rank_target += lam;
        if arr.rank_of(&prefix) != rank_target {
            return Ok(false);
        }
        for &drop in &prefix {
            let rest: Vec<usize> = prefix.iter().copied().filter(|&x| x != drop).collect();
            if arr.rank_of(&rest) != rank_target {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// All elementary subarrangements, ordered by block count, then by the
/// composition λ, then lexicographically by blocks.
pub fn enumerate_elementary(arr: &ArrangementFamily) -> Vec<Elementary> {
    let mut out = Vec::new();
    for comp in compositions(arr.k()) {
        let mut current: Vec<Vec<usize>> = Vec::new();
        collect_tuples(arr, &comp, 0, &mut current, &mut out);
    }
    out.sort_by(|x, y| {
        (x.m(), x.lambda(), &x.blocks).cmp(&(y.m(), y.lambda(), &y.blocks))
    });
    out
}

/// Ordered compositions of k into positive parts.
fn compositions(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 1..=k {
        for rest in compositions(k - first) {
            let mut c = vec![first];
            c.extend(rest);
            out.push(c);
        }
    }
    out
}

fn collect_tuples(
    arr: &ArrangementFamily,
    comp: &[usize],
    depth: usize,
    current: &mut Vec<Vec<usize>>,
    out: &mut Vec<Elementary>,
) {
    if depth == comp.len() {
        if is_elementary(arr, current).unwrap_or(false) {
            out.push(Elementary { blocks: current.clone() });
        }
        return;
    }
    let used: BTreeSet<usize> = current.iter().flatten().copied().collect();
    let free: Vec<usize> = (1..=arr.n()).filter(|j| !used.contains(j)).collect();
    for block in free.iter().copied().combinations(comp[depth] + 1) {
        // Prune early: the prefix rank condition only depends on blocks so
        // far, so a failing prefix cannot be completed.
        current.push(block);
        let target: usize = comp[..=depth].iter().sum();
        let prefix: Vec<usize> = current.iter().flatten().copied().collect();
        if arr.rank_of(&prefix) == target {
            collect_tuples(arr, comp, depth + 1, current, out);
        }
        current.pop();
    }
}

/// The distinguished elements of an elementary tuple: pick a λ_h-subset of
/// each block (lexicographic order within the block), take the cartesian
/// product block-major, and concatenate. There are ∏ (λ_h + 1) of them.
pub fn distinguished_elements(e: &Elementary) -> Vec<Vec<usize>> {
    let per_block: Vec<Vec<Vec<usize>>> = e
        .blocks()
        .iter()
        .map(|b| b.iter().copied().combinations(b.len() - 1).collect())
        .collect();
    per_block
        .into_iter()
        .multi_cartesian_product()
        .map(|choice| choice.into_iter().flatten().collect())
        .collect()
}

/// Level weight a(J_λ, J, h) for h = 1..m−1: the sum of a_i over every
/// hyperplane of the whole family whose direction lies outside the span
/// X_h^* of the first h blocks.
pub fn subarr_weight_levels(arr: &ArrangementFamily, e: &Elementary) -> Vec<Rat> {
    (1..e.m())
        .map(|h| {
            let prefix = e.prefix(h);
            let r = arr.rank_of(&prefix);
            (1..=arr.n())
                .filter(|&i| {
                    let mut with = prefix.clone();
                    with.push(i);
                    arr.rank_of(&with) != r
                })
                .map(|i| arr.weight(i).clone())
                .sum()
        })
        .collect()
}

/// Total weight a(J_λ, J) = a_J · ∏_h a(J_λ, J, h). A vanishing factor is
/// a balanced dense edge and is reported as such.
pub fn subarr_weight(arr: &ArrangementFamily, e: &Elementary) -> Result<Rat> {
    let total = arr.total_weight();
    if total.is_zero() {
        return Err(Error::Balanced("total weight a_J vanishes".into()));
    }
    let mut w = total;
    for (h, level) in subarr_weight_levels(arr, e).into_iter().enumerate() {
        if level.is_zero() {
            let prefix = e.prefix(h + 1);
            let r = arr.rank_of(&prefix);
            let members: Vec<usize> = (1..=arr.n())
                .filter(|&i| {
                    let mut with = prefix.clone();
                    with.push(i);
                    arr.rank_of(&with) == r
                })
                .collect();
            return Err(Error::Balanced(format!(
                "weight of the dense edge spanned by hyperplanes {members:?} vanishes"
            )));
        }
        w *= level;
    }
    Ok(w)
}

/// The singular element of an elementary tuple anchored at a distinguished
/// element I: the wedge over blocks of w_h = Σ_i (−1)^{i+1} a_{j_i^h}
/// F_{J_h ∖ j_i^h}, scaled by ±1 so that the coefficient of F_I (in the
/// anchor's index order) equals +∏_h a_{dropped(h)}, where dropped(h) is
/// the block element missing from I.
pub fn singular_element(
    arr: &ArrangementFamily,
    e: &Elementary,
    anchor: &[usize],
) -> Result<FlagVector> {
    let anchor_set: BTreeSet<usize> = anchor.iter().copied().collect();
    let distinguished = distinguished_elements(e);
    if !distinguished
        .iter()
        .any(|d| d.iter().copied().collect::<BTreeSet<_>>() == anchor_set)
    {
        return Err(Error::Malformed(format!(
            "anchor {anchor:?} is not a distinguished element of {:?}",
            e.blocks()
        )));
    }

    // Expand the wedge: one term per choice of dropped element in each block.
    let drop_choices: Vec<Vec<usize>> =
        e.blocks().iter().map(|b| (0..b.len()).collect()).collect();
    let mut v = FlagVector::new();
    for choice in drop_choices.into_iter().multi_cartesian_product() {
        let mut coeff = Rat::from_integer(1.into());
        let mut idx: Vec<usize> = Vec::with_capacity(arr.k());
        for (block, &di) in e.blocks().iter().zip(&choice) {
            coeff *= arr.weight(block[di]);
            if di % 2 == 1 {
                coeff = -coeff;
            }
            idx.extend(block.iter().enumerate().filter(|&(p, _)| p != di).map(|(_, &j)| j));
        }
        v.add_signed(arr, &idx, coeff);
    }

    // Anchor normalization.
    let target: Rat = e
        .blocks()
        .iter()
        .map(|b| {
            let dropped = b.iter().find(|j| !anchor_set.contains(j)).expect("anchor checked");
            arr.weight(*dropped).clone()
        })
        .product();
    let current = v.coeff(anchor);
    assert!(
        current == target || current == -target.clone(),
        "wedge anchor coefficient must be the dropped-weight product up to sign"
    );
    if current == target {
        Ok(v)
    } else {
        Ok(v.scale(&-Rat::from_integer(1.into())))
    }
}

/// The tuples that distinguish a given independent k-set.
pub fn elementary_for(arr: &ArrangementFamily, i: &[usize]) -> Vec<Elementary> {
    let iset: BTreeSet<usize> = i.iter().copied().collect();
    enumerate_elementary(arr)
        .into_iter()
        .filter(|e| {
            distinguished_elements(e)
                .iter()
                .any(|d| d.iter().copied().collect::<BTreeSet<_>>() == iset)
        })
        .collect()
}

/// Closed-form projection: π(F_I) = Σ_E s(E, I) / a(J_λ, J) over every
/// elementary tuple E distinguishing I.  Families exist where no tuple
/// distinguishes I at all; the empty sum is then the correct answer, because
/// the complement generators span the full flag space around such an I and
/// the projection of F_I to the singular subspace vanishes.
pub fn project_formula(arr: &ArrangementFamily, i: &[usize]) -> Result<FlagVector> {
    assert!(arr.is_independent(i), "projection formula needs an independent k-set");
    let tuples = elementary_for(arr, i);
    let mut total = FlagVector::new();
    for e in &tuples {
        let w = subarr_weight(arr, e)?;
        let s = singular_element(arr, e, i)?;
        total = total.add(&s.scale(&w.recip()));
    }
    Ok(total)
}
