//! The top flag space F^k of an arrangement family and the orthogonal
//! projection onto the singular subspace.
//!
//! F^k is spanned by symbols F_{i_1,…,i_k} indexed by independent k-subsets,
//! skew-symmetric in the indices; monomials with repeated or dependent
//! indices are zero. The contravariant form S^(a) is diagonal on the sorted
//! basis with S(F_I, F_I) = ∏_{i∈I} a_i. The singular subspace Sing is the
//! S-orthogonal complement of the span of the generators
//! G_T = Σ_j F_{j,T} over independent (k−1)-subsets T.

use crate::arrangement::ArrangementFamily;
use crate::error::{Error, Result};
use crate::linalg::RatMatrix;
use crate::rat::{rat_to_string, Rat};
use num::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;

/// Sorts a tuple of indices, tracking the sign of the permutation.
/// Returns `None` when an index repeats.
fn sort_with_sign(idx: &[usize]) -> Option<(Vec<usize>, i64)> {
    let mut v = idx.to_vec();
    let mut sign = 1i64;
    // Insertion sort; each adjacent swap flips the sign.
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v, sign))
}

/// A vector in F^k, stored sparsely over sorted index sets with nonzero
/// coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct FlagVector {
    terms: BTreeMap<Vec<usize>, Rat>,
}

impl FlagVector {
    pub fn new() -> Self {
        FlagVector { terms: BTreeMap::new() }
    }

    /// The basis vector F_I for a sorted independent index set.
    pub fn basic(arr: &ArrangementFamily, i: &[usize]) -> Self {
        assert!(i.windows(2).all(|w| w[0] < w[1]), "basis index set must be sorted: {i:?}");
        assert!(arr.is_independent(i), "basis index set must be independent: {i:?}");
        let mut v = FlagVector::new();
        v.insert_sorted(i.to_vec(), Rat::one());
        v
    }

    /// Adds coeff·F_{idx} for an arbitrary ordered tuple: the indices are
    /// sorted with the permutation sign, and tuples with repeated or
    /// dependent indices contribute nothing.
    pub fn add_signed(&mut self, arr: &ArrangementFamily, idx: &[usize], coeff: Rat) {
        assert_eq!(idx.len(), arr.k(), "flag monomial needs k = {} indices", arr.k());
        if coeff.is_zero() {
            return;
        }
        let Some((sorted, sign)) = sort_with_sign(idx) else {
            return;
        };
        if !arr.is_independent(&sorted) {
            return;
        }
        let signed = if sign < 0 { -coeff } else { coeff };
        self.insert_sorted(sorted, signed);
    }

    fn insert_sorted(&mut self, key: Vec<usize>, coeff: Rat) {
        let entry = self.terms.entry(key.clone()).or_insert_with(Rat::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    /// Signed coefficient of F_{idx}: zero for repeated indices, otherwise
    /// ± the stored coefficient of the sorted set.
    pub fn coeff(&self, idx: &[usize]) -> Rat {
        let Some((sorted, sign)) = sort_with_sign(idx) else {
            return Rat::zero();
        };
        let c = self.terms.get(&sorted).cloned().unwrap_or_else(Rat::zero);
        if sign < 0 {
            -c
        } else {
            c
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, s: &Rat) -> Self {
        if s.is_zero() {
            return FlagVector::new();
        }
        FlagVector {
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v * s)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.insert_sorted(k.clone(), v.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-Rat::one()))
    }

    /// Sorted support and coefficients.
    pub fn iter(&self) -> impl Iterator<Item = (&Vec<usize>, &Rat)> {
        self.terms.iter()
    }

    /// Coordinates in the listed basis order; every support set must occur
    /// in the basis.
    pub fn to_coords(&self, basis: &[Vec<usize>]) -> Vec<Rat> {
        let pos: BTreeMap<&[usize], usize> =
            basis.iter().enumerate().map(|(i, b)| (b.as_slice(), i)).collect();
        let mut out = vec![Rat::zero(); basis.len()];
        for (k, v) in &self.terms {
            let i = pos
                .get(k.as_slice())
                .unwrap_or_else(|| panic!("support {k:?} outside the given basis"));
            out[*i] = v.clone();
        }
        out
    }

    pub fn from_coords(basis: &[Vec<usize>], coords: &[Rat]) -> Self {
        assert_eq!(basis.len(), coords.len(), "coordinate length mismatch");
        let mut v = FlagVector::new();
        for (b, c) in basis.iter().zip(coords) {
            if !c.is_zero() {
                v.insert_sorted(b.clone(), c.clone());
            }
        }
        v
    }
}

impl fmt::Display for FlagVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (pos, (key, coeff)) in self.terms.iter().enumerate() {
            let mag = coeff.abs();
            let sign = coeff < &Rat::zero();
            if pos == 0 {
                if sign {
                    write!(f, "-")?;
                }
            } else if sign {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if !mag.is_one() {
                write!(f, "{}*", rat_to_string(&mag))?;
            }
            let idx: Vec<String> = key.iter().map(|i| i.to_string()).collect();
            write!(f, "F_{{{}}}", idx.join(","))?;
        }
        Ok(())
    }
}

/// The contravariant form S^(a) applied to a vector: multiplies each basis
/// coefficient by ∏_{i∈I} a_i.
pub fn s_apply(arr: &ArrangementFamily, v: &FlagVector) -> FlagVector {
    let mut out = FlagVector::new();
    for (key, coeff) in v.iter() {
        let a_prod: Rat = key.iter().map(|&i| arr.weight(i).clone()).product();
        out.insert_sorted(key.clone(), coeff * &a_prod);
    }
    out
}

/// The contravariant pairing S^(a)(u, v) = Σ_I (∏_{i∈I} a_i) u_I v_I.
pub fn s_pairing(arr: &ArrangementFamily, u: &FlagVector, v: &FlagVector) -> Rat {
    let mut total = Rat::zero();
    for (key, cu) in u.iter() {
        let cv = v.coeff(key);
        if cv.is_zero() {
            continue;
        }
        let a_prod: Rat = key.iter().map(|&i| arr.weight(i).clone()).product();
        total += cu * &cv * a_prod;
    }
    total
}

/// The generators of the S-orthogonal complement of Sing:
/// G_T = Σ_{j=1..n} F_{j,t_1,…,t_{k−1}} for each independent (k−1)-subset T
/// in lexicographic order. Monomials with repeated or dependent indices are
/// dropped during expansion.
pub fn complement_generators(arr: &ArrangementFamily) -> Vec<FlagVector> {
    arr.independent_km1_subsets()
        .into_iter()
        .map(|t| {
            let mut g = FlagVector::new();
            for j in 1..=arr.n() {
                let mut idx = Vec::with_capacity(arr.k());
                idx.push(j);
                idx.extend_from_slice(&t);
                g.add_signed(arr, &idx, Rat::one());
            }
            g
        })
        .collect()
}

/// Matrix whose columns are the complement generators in the coordinates of
/// the sorted independent-k-subset basis.
fn generator_matrix(arr: &ArrangementFamily, basis: &[Vec<usize>]) -> RatMatrix {
    let gens = complement_generators(arr);
    RatMatrix::from_cols(gens.iter().map(|g| g.to_coords(basis)).collect())
}

/// S-orthogonal projection of F onto Sing, computed directly from the
/// normal equations: solve (Gᵀ S G) c = Gᵀ S F and return F − G c. An
/// inconsistent system means the form degenerates on the complement span,
/// which happens exactly for balanced weights.
pub fn project_oracle(arr: &ArrangementFamily, f: &FlagVector) -> Result<FlagVector> {
    let basis = arr.independent_k_subsets();
    let g = generator_matrix(arr, &basis);
    // S in these coordinates is diagonal with entries ∏_{i∈I} a_i.
    let s_diag: Vec<Rat> = basis
        .iter()
        .map(|key| key.iter().map(|&i| arr.weight(i).clone()).product())
        .collect();
    let mut sg = g.clone();
    for (r, d) in s_diag.iter().enumerate() {
        for c in 0..sg.cols() {
            let scaled = sg.at(r, c) * d;
            sg.set(r, c, scaled);
        }
    }
    let gt = g.transpose();
    let normal = gt.mul(&sg);
    let f_coords = f.to_coords(&basis);
    let sf: Vec<Rat> = f_coords.iter().zip(&s_diag).map(|(x, d)| x * d).collect();
    let rhs = gt.mul_vec(&sf);
    let c = normal.solve(&rhs).ok_or_else(|| {
        Error::Balanced("projection undefined: the contravariant form degenerates on the complement of Sing".into())
    })?;
    let gc = g.mul_vec(&c);
    let proj: Vec<Rat> = f_coords.iter().zip(&gc).map(|(x, y)| x - y).collect();
    Ok(FlagVector::from_coords(&basis, &proj))
}

/// dim Sing = (number of independent k-subsets) − rank of the generator
/// span.
pub fn sing_dimension(arr: &ArrangementFamily) -> usize {
    let basis = arr.independent_k_subsets();
    basis.len() - generator_matrix(arr, &basis).rank()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrangement::{collinear_k1, fig1};
    use crate::rat::{int, rat};

    fn generic_k2n3() -> ArrangementFamily {
        ArrangementFamily::new(
            2,
            3,
            RatMatrix::from_rows(vec![
                vec![int(1), int(0), int(1)],
                vec![int(0), int(1), int(1)],
            ]),
            vec![int(1), int(1), int(1)],
            None,
        )
        .unwrap()
    }

    #[test]
    fn insertion_normalizes_signs_and_drops_degenerate_tuples() {
        let arr = fig1([1, 1, 1, 1]);
        let mut v = FlagVector::new();
        v.add_signed(&arr, &[4, 3], int(1));
        assert_eq!(v.coeff(&[3, 4]), int(-1));
        assert_eq!(v.coeff(&[4, 3]), int(1));
        // Repeated index.
        v.add_signed(&arr, &[3, 3], int(5));
        // Dependent set: columns 1 and 2 are parallel.
        v.add_signed(&arr, &[1, 2], int(5));
        assert_eq!(v.iter().count(), 1);
        // Cancellation empties the table.
        v.add_signed(&arr, &[3, 4], int(-1));
        assert!(!v.is_zero());
        v.add_signed(&arr, &[3, 4], int(2));
        assert!(v.is_zero());
    }

    #[test]
    fn display_is_readable() {
        let arr = fig1([1, 1, 1, 1]);
        let mut v = FlagVector::new();
        v.add_signed(&arr, &[1, 3], int(2));
        v.add_signed(&arr, &[3, 4], int(-1));
        assert_eq!(v.to_string(), "2*F_{1,3} - F_{3,4}");
        assert_eq!(FlagVector::new().to_string(), "0");
    }

    #[test]
    fn complement_generators_match_hand_expansion() {
        let arr = fig1([1, 1, 1, 1]);
        let gens = complement_generators(&arr);
        assert_eq!(gens.len(), 4);
        // T = {1}: F_{2,1} is dependent, F_{3,1} = -F_{1,3}, F_{4,1} = -F_{1,4}.
        let mut g1 = FlagVector::new();
        g1.add_signed(&arr, &[1, 3], int(-1));
        g1.add_signed(&arr, &[1, 4], int(-1));
        assert_eq!(gens[0], g1);
        // T = {3}: F_{1,3} + F_{2,3} - F_{3,4}.
        let mut g3 = FlagVector::new();
        g3.add_signed(&arr, &[1, 3], int(1));
        g3.add_signed(&arr, &[2, 3], int(1));
        g3.add_signed(&arr, &[3, 4], int(-1));
        assert_eq!(gens[2], g3);

        let line = collinear_k1(&[1, 1, 1]);
        let gens = complement_generators(&line);
        assert_eq!(gens.len(), 1);
        let mut total = FlagVector::new();
        for j in 1..=3 {
            total.add_signed(&line, &[j], int(1));
        }
        assert_eq!(gens[0], total);
    }

    #[test]
    fn projection_on_three_points_of_a_line() {
        let line = collinear_k1(&[1, 1, 1]);
        let p = project_oracle(&line, &FlagVector::basic(&line, &[1])).unwrap();
        assert_eq!(p.coeff(&[1]), rat(2, 3));
        assert_eq!(p.coeff(&[2]), rat(-1, 3));
        assert_eq!(p.coeff(&[3]), rat(-1, 3));
    }

    #[test]
    fn projection_on_figure_family_unit_weights() {
        let arr = fig1([1, 1, 1, 1]);
        let p = project_oracle(&arr, &FlagVector::basic(&arr, &[3, 4])).unwrap();
        assert_eq!(p.coeff(&[3, 4]), rat(1, 2));
        assert_eq!(p.coeff(&[1, 3]), rat(1, 4));
        assert_eq!(p.coeff(&[1, 4]), rat(-1, 4));
        assert_eq!(p.coeff(&[2, 3]), rat(1, 4));
        assert_eq!(p.coeff(&[2, 4]), rat(-1, 4));
    }

    #[test]
    fn projection_matches_closed_form_for_general_weights() {
        // π(F_{3,4}) = ((a_1+a_2) F_{3,4} + a_4 (F_{1,3}+F_{2,3})
        //              − a_3 (F_{1,4}+F_{2,4})) / a_J.
        for weights in [[1, 2, 3, 5], [2, 2, 1, 7], [1, 1, 1, 2]] {
            let arr = fig1(weights);
            let [a1, a2, a3, a4] = weights.map(int);
            let aj = arr.total_weight();
            let p = project_oracle(&arr, &FlagVector::basic(&arr, &[3, 4])).unwrap();
            assert_eq!(p.coeff(&[3, 4]), (&a1 + &a2) / &aj);
            assert_eq!(p.coeff(&[1, 3]), &a4 / &aj);
            assert_eq!(p.coeff(&[2, 3]), &a4 / &aj);
            assert_eq!(p.coeff(&[1, 4]), -(&a3 / &aj));
            assert_eq!(p.coeff(&[2, 4]), -(&a3 / &aj));
        }
    }

    #[test]
    fn projection_is_idempotent_and_s_orthogonal_to_generators() {
        let arr = fig1([1, 2, 3, 5]);
        for key in arr.independent_k_subsets() {
            let p = project_oracle(&arr, &FlagVector::basic(&arr, &key)).unwrap();
            let pp = project_oracle(&arr, &p).unwrap();
            assert_eq!(p, pp, "projection must be idempotent at F_{key:?}");
            for g in complement_generators(&arr) {
                assert!(s_pairing(&arr, &p, &g).is_zero());
            }
        }
        // Generators project to zero.
        for g in complement_generators(&arr) {
            assert!(project_oracle(&arr, &g).unwrap().is_zero());
        }
    }

    #[test]
    fn balanced_weights_break_the_projection() {
        let line = collinear_k1(&[1, -1]);
        let err = project_oracle(&line, &FlagVector::basic(&line, &[1])).unwrap_err();
        assert!(matches!(err, Error::Balanced(_)));
    }

    #[test]
    fn singular_dimensions() {
        assert_eq!(sing_dimension(&collinear_k1(&[1, 1, 1])), 2);
        assert_eq!(sing_dimension(&collinear_k1(&[1, 2, 3, 4, 5])), 4);
        assert_eq!(sing_dimension(&fig1([1, 1, 1, 1])), 2);
        assert_eq!(sing_dimension(&generic_k2n3()), 1);
    }

    #[test]
    fn pairing_is_diagonal_in_the_weights() {
        let arr = fig1([1, 2, 3, 5]);
        let f13 = FlagVector::basic(&arr, &[1, 3]);
        let f14 = FlagVector::basic(&arr, &[1, 4]);
        assert_eq!(s_pairing(&arr, &f13, &f13), int(3));
        assert_eq!(s_pairing(&arr, &f14, &f14), int(5));
        assert_eq!(s_pairing(&arr, &f13, &f14), int(0));
        let s13 = s_apply(&arr, &f13);
        assert_eq!(s13.coeff(&[1, 3]), int(3));
    }
}
