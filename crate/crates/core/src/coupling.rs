//! Couplings of single-measurement distributions.
//!
//! The largest achievable `P(x¹ = … = xˡ)` over all couplings is
//! `μ = Σ_a min_j p_j(a)`: every diagonal mass is bounded by every
//! marginal, and [`canonical_maximal_coupling`] attains the bound.

use serde::{Deserialize, Serialize};

use crate::behavior::{tuple_digits, tuple_index, Distribution};
use crate::error::{Error, Result};
use crate::lp::{self, Certificate, LpProblem, LpStatus};
use crate::scalar::{self, Scalar};

/// Largest arity accepted by [`multimaximal_coupling`]; it enforces
/// `2^ℓ - ℓ - 1` subset constraints over `|O|^ℓ` cells.
pub const MAX_MULTIMAXIMAL_ARITY: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingPolicy {
    Maximal,
    Multimaximal,
}

impl std::str::FromStr for CouplingPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "maximal" => Ok(Self::Maximal),
            "multimaximal" => Ok(Self::Multimaximal),
            other => Err(format!("unknown coupling policy `{other}`")),
        }
    }
}

/// A joint distribution over `ℓ` copies with prescribed single marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTable<T> {
    marginals: Vec<Distribution<T>>,
    joint: Distribution<T>,
}

impl<T: Scalar> CouplingTable<T> {
    pub fn arity(&self) -> usize {
        self.marginals.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.marginals[0].len()
    }

    pub fn marginals(&self) -> &[Distribution<T>] {
        &self.marginals
    }

    pub fn joint(&self) -> &Distribution<T> {
        &self.joint
    }

    pub fn into_joint(self) -> Distribution<T> {
        self.joint
    }

    /// `P(all copies equal)` under the joint.
    pub fn equality_probability(&self) -> T {
        diagonal_mass(self.joint.probs(), self.arity(), self.alphabet_size(), None)
    }

    /// Single-copy marginal of the joint.
    pub fn joint_marginal(&self, copy: usize) -> Distribution<T> {
        self.joint
            .marginal_positions(self.arity(), self.alphabet_size(), &[copy])
    }
}

fn check_family<T: Scalar>(marginals: &[Distribution<T>], min: usize, max: usize) -> Result<usize> {
    if marginals.len() < min || marginals.len() > max {
        return Err(Error::CouplingArity {
            min,
            max,
            got: marginals.len(),
        });
    }
    let k = marginals[0].len();
    if let Some(m) = marginals.iter().find(|m| m.len() != k) {
        return Err(Error::MismatchedAlphabets(k, m.len()));
    }
    Ok(k)
}

/// Mass on cells where every copy in `subset` (all copies when `None`) agrees.
fn diagonal_mass<T: Scalar>(joint: &[T], arity: usize, k: usize, subset: Option<&[usize]>) -> T {
    joint
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_zero())
        .filter(|(idx, _)| all_equal(&tuple_digits(*idx, arity, k), subset))
        .fold(T::zero(), |acc, (_, p)| acc + p.clone())
}

fn all_equal(digits: &[usize], subset: Option<&[usize]>) -> bool {
    match subset {
        None => digits.windows(2).all(|w| w[0] == w[1]),
        Some(s) => s.windows(2).all(|w| digits[w[0]] == digits[w[1]]),
    }
}

/// `max P(x¹ = … = xˡ)` over all couplings of `marginals`.
pub fn mu<T: Scalar>(marginals: &[Distribution<T>]) -> Result<T> {
    let k = check_family(marginals, 2, usize::MAX)?;
    Ok(diagonal_floor(marginals, k).iter().fold(T::zero(), |acc, d| acc + d.clone()))
}

fn diagonal_floor<T: Scalar>(marginals: &[Distribution<T>], k: usize) -> Vec<T> {
    (0..k)
        .map(|a| {
            marginals[1..]
                .iter()
                .fold(marginals[0].probs()[a].clone(), |m, d| T::min_of(&m, &d.probs()[a]))
        })
        .collect()
}

/// The same `μ` computed as a linear program over all couplings.
pub fn mu_by_lp<T: Scalar>(marginals: &[Distribution<T>], eps: &T) -> Result<T> {
    let k = check_family(marginals, 2, usize::MAX)?;
    let arity = marginals.len();
    let cells = k.pow(arity as u32);
    let objective: Vec<T> = (0..cells)
        .map(|idx| {
            if all_equal(&tuple_digits(idx, arity, k), None) {
                -T::one()
            } else {
                T::zero()
            }
        })
        .collect();
    let (rows, rhs) = marginal_rows(marginals, k);
    let sol = lp::solve(&LpProblem::new(objective, rows, rhs), eps)?;
    match sol.status {
        LpStatus::Optimal => Ok(-sol.value.expect("optimal value")),
        status => Err(Error::Parse(format!("coupling LP returned {status:?}"))),
    }
}

fn marginal_rows<T: Scalar>(marginals: &[Distribution<T>], k: usize) -> (Vec<Vec<T>>, Vec<T>) {
    let arity = marginals.len();
    let cells = k.pow(arity as u32);
    let mut rows = Vec::with_capacity(arity * k);
    let mut rhs = Vec::with_capacity(arity * k);
    for (j, m) in marginals.iter().enumerate() {
        for a in 0..k {
            let row = (0..cells)
                .map(|idx| {
                    if tuple_digits(idx, arity, k)[j] == a {
                        T::one()
                    } else {
                        T::zero()
                    }
                })
                .collect();
            rows.push(row);
            rhs.push(m.probs()[a].clone());
        }
    }
    (rows, rhs)
}

/// Diagonal-plus-product maximal coupling.
///
/// Mass `d(a) = min_j p_j(a)` sits on each diagonal cell; the remaining
/// `R = 1 - Σ d(a)` is spread as the product of the normalized residuals
/// `r_j = p_j - d`. Every outcome has some `r_j(a) = 0`, so the product
/// adds nothing to the diagonal and `P(equal) = μ`.
pub fn canonical_maximal_coupling<T: Scalar>(marginals: &[Distribution<T>]) -> Result<CouplingTable<T>> {
    let k = check_family(marginals, 2, usize::MAX)?;
    let arity = marginals.len();
    let floor = diagonal_floor(marginals, k);
    let residual_mass = T::one() - scalar::sum(&floor);
    let mut joint = vec![T::zero(); k.pow(arity as u32)];
    for (a, d) in floor.iter().enumerate() {
        joint[tuple_index(&vec![a; arity], k)] = d.clone();
    }
    // Float round-off can leave a residual of a few ulps; it is dropped.
    let negligible = T::prob_tolerance() / T::from_usize_exact(1000);
    if residual_mass > negligible {
        let residuals: Vec<Vec<T>> = marginals
            .iter()
            .map(|m| {
                let r: Vec<T> = m
                    .probs()
                    .iter()
                    .zip(&floor)
                    .map(|(p, d)| p.clone() - d.clone())
                    .collect();
                let s = scalar::sum(&r);
                r.into_iter().map(|v| v / s.clone()).collect()
            })
            .collect();
        for (idx, cell) in joint.iter_mut().enumerate() {
            let digits = tuple_digits(idx, arity, k);
            let mut mass = residual_mass.clone();
            for (j, &a) in digits.iter().enumerate() {
                if residuals[j][a].is_zero() {
                    mass = T::zero();
                    break;
                }
                mass = mass * residuals[j][a].clone();
            }
            if !mass.is_zero() {
                *cell = cell.clone() + mass;
            }
        }
    }
    Ok(CouplingTable {
        marginals: marginals.to_vec(),
        joint: Distribution::from_unchecked(joint),
    })
}

/// Result of the multimaximal search.
#[derive(Debug, Clone, PartialEq)]
pub enum Multimaximal<T> {
    Exists(CouplingTable<T>),
    /// Farkas certificate that the subset constraints are inconsistent.
    DoesNotExist(Certificate<T>),
}

/// Searches for a coupling that is maximal on every subset of at least two copies.
pub fn multimaximal_coupling<T: Scalar>(marginals: &[Distribution<T>], eps: &T) -> Result<Multimaximal<T>> {
    let k = check_family(marginals, 2, MAX_MULTIMAXIMAL_ARITY)?;
    let arity = marginals.len();
    let cells = k.pow(arity as u32);
    let (mut rows, mut rhs) = marginal_rows(marginals, k);
    for subset in subsets_of_size_two_or_more(arity) {
        let members: Vec<Distribution<T>> = subset.iter().map(|&j| marginals[j].clone()).collect();
        let target = mu(&members)?;
        let row = (0..cells)
            .map(|idx| {
                if all_equal(&tuple_digits(idx, arity, k), Some(&subset)) {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect();
        rows.push(row);
        rhs.push(target);
    }
    let sol = lp::solve(&LpProblem::new(vec![T::zero(); cells], rows, rhs), eps)?;
    Ok(match sol.status {
        LpStatus::Infeasible => Multimaximal::DoesNotExist(sol.certificate),
        _ => Multimaximal::Exists(CouplingTable {
            marginals: marginals.to_vec(),
            joint: Distribution::from_unchecked(sol.primal),
        }),
    })
}

/// All index subsets with at least two members, by increasing bitmask.
pub fn subsets_of_size_two_or_more(arity: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << arity))
        .filter(|mask| mask.count_ones() >= 2)
        .map(|mask| (0..arity).filter(|j| mask & (1 << j) != 0).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use num_traits::{One, Zero};

    fn d(p: &[f64]) -> Distribution<f64> {
        Distribution::new(p.to_vec(), &1e-9).unwrap()
    }

    fn dq(p: &[(i64, i64)]) -> Distribution<Rational> {
        Distribution::from_unchecked(p.iter().map(|&(n, m)| Rational::new(n.into(), m.into())).collect())
    }

    #[test]
    fn mu_examples() {
        assert!((mu(&[d(&[0.6, 0.4]), d(&[0.5, 0.5])]).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(mu(&[d(&[0.3, 0.7]), d(&[0.3, 0.7])]).unwrap(), 1.0);
        assert_eq!(mu(&[d(&[1.0, 0.0]), d(&[0.0, 1.0]), d(&[0.5, 0.5])]).unwrap(), 0.0);
    }

    #[test]
    fn mu_lp_route_on_examples() {
        let fam = [dq(&[(3, 5), (2, 5)]), dq(&[(1, 2), (1, 2)])];
        assert_eq!(mu_by_lp(&fam, &Rational::zero()).unwrap(), Rational::new(9.into(), 10.into()));
        assert_eq!(mu(&fam).unwrap(), Rational::new(9.into(), 10.into()));
    }

    #[test]
    fn arity_and_alphabet_errors() {
        assert!(matches!(mu(&[d(&[1.0])]), Err(Error::CouplingArity { .. })));
        assert!(matches!(
            mu(&[d(&[1.0, 0.0]), d(&[0.2, 0.3, 0.5])]),
            Err(Error::MismatchedAlphabets(2, 3))
        ));
        let seven = vec![d(&[0.5, 0.5]); 7];
        assert!(matches!(
            multimaximal_coupling(&seven, &1e-7),
            Err(Error::CouplingArity { max: 6, .. })
        ));
    }

    #[test]
    fn canonical_coupling_examples() {
        let point = canonical_maximal_coupling(&[d(&[1.0, 0.0]), d(&[1.0, 0.0])]).unwrap();
        assert_eq!(point.joint().probs(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(point.equality_probability(), 1.0);

        // Outcomes ordered (+1, -1): diagonal (0.5, 0.4), residual 0.1 at (+1, -1).
        let fam = [dq(&[(6, 10), (4, 10)]), dq(&[(1, 2), (1, 2)])];
        let c = canonical_maximal_coupling(&fam).unwrap();
        assert_eq!(c.joint().probs(), dq(&[(1, 2), (1, 10), (0, 1), (4, 10)]).probs());
        assert_eq!(c.equality_probability(), Rational::new(9.into(), 10.into()));
        for j in 0..2 {
            assert_eq!(c.joint_marginal(j), fam[j]);
        }

        let product = canonical_maximal_coupling(&[d(&[1.0, 0.0]), d(&[0.0, 1.0])]).unwrap();
        assert_eq!(product.joint().probs(), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(product.equality_probability(), 0.0);
    }

    #[test]
    fn three_copy_canonical_coupling_is_exact() {
        let fam = [dq(&[(1, 2), (1, 3), (1, 6)]), dq(&[(1, 4), (1, 4), (1, 2)]), dq(&[(1, 3), (1, 3), (1, 3)])];
        let c = canonical_maximal_coupling(&fam).unwrap();
        assert!(c.joint().total().is_one());
        assert_eq!(c.equality_probability(), mu(&fam).unwrap());
        for j in 0..3 {
            assert_eq!(c.joint_marginal(j), fam[j]);
        }
    }

    #[test]
    fn multimaximal_with_identical_marginals_is_diagonal() {
        let fam = vec![d(&[0.2, 0.8]); 3];
        let Multimaximal::Exists(c) = multimaximal_coupling(&fam, &1e-7).unwrap() else {
            panic!("should exist");
        };
        assert!((c.equality_probability() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn multimaximal_pair_is_maximal() {
        let fam = [dq(&[(6, 10), (4, 10)]), dq(&[(1, 2), (1, 2)])];
        let Multimaximal::Exists(c) = multimaximal_coupling(&fam, &Rational::zero()).unwrap() else {
            panic!("should exist");
        };
        assert_eq!(c.equality_probability(), mu(&fam).unwrap());
    }

    #[test]
    fn multimaximal_three_binary_copies() {
        // Hand derivation: μ(all) = 0.4, μ12 = μ23 = 0.7, μ13 = 0.4 force
        // P(1=3≠2) = 0, P(1=2≠3) = P(2=3≠1) = 0.3; the marginals then give
        // p(+++) = 0.2, p(---) = 0.2, p(++-) = 0.3, p(+--) = 0.3, rest 0.
        let fam = [dq(&[(8, 10), (2, 10)]), dq(&[(1, 2), (1, 2)]), dq(&[(2, 10), (8, 10)])];
        let Multimaximal::Exists(c) = multimaximal_coupling(&fam, &Rational::zero()).unwrap() else {
            panic!("should exist");
        };
        // outcome index 0 = +, 1 = -
        let expect = dq(&[(2, 10), (3, 10), (0, 1), (3, 10), (0, 1), (0, 1), (0, 1), (2, 10)]);
        assert_eq!(c.joint(), &expect);
    }

    #[test]
    fn multimaximal_can_fail_to_exist() {
        // Outcomes (a, b, c). Pair 2-3 maximal forces x2 = c <=> x3 = c; pair
        // 1-2 forces x1 = b <=> x2 = b, hence x1 = b <=> x3 = a. Then
        // P(x1 = x3 = a) = 0, but pair 1-3 needs it to be 1/3.
        let fam = [dq(&[(2, 3), (1, 3), (0, 1)]), dq(&[(0, 1), (1, 3), (2, 3)]), dq(&[(1, 3), (0, 1), (2, 3)])];
        let Multimaximal::DoesNotExist(cert) = multimaximal_coupling(&fam, &Rational::zero()).unwrap() else {
            panic!("should not exist");
        };
        assert!(matches!(cert, Certificate::Farkas { .. }));
        let canonical = canonical_maximal_coupling(&fam).unwrap();
        assert_eq!(canonical.equality_probability(), Rational::zero());
    }

    #[test]
    fn subsets_enumeration() {
        assert_eq!(subsets_of_size_two_or_more(3).len(), 4);
        assert_eq!(subsets_of_size_two_or_more(6).len(), 64 - 6 - 1);
    }

    #[test]
    fn policy_parses() {
        assert_eq!("maximal".parse::<CouplingPolicy>().unwrap(), CouplingPolicy::Maximal);
        assert!("max".parse::<CouplingPolicy>().is_err());
    }

    fn family() -> impl proptest::strategy::Strategy<Value = Vec<Distribution<Rational>>> {
        use proptest::prelude::*;
        (2usize..=4, 2usize..=4).prop_flat_map(|(l, k)| {
            prop::collection::vec(prop::collection::vec(0i64..=5, k), l).prop_map(|weights| {
                weights
                    .into_iter()
                    .map(|mut w| {
                        if w.iter().all(|&v| v == 0) {
                            w[0] = 1;
                        }
                        let t: i64 = w.iter().sum();
                        Distribution::from_unchecked(w.into_iter().map(|v| Rational::new(v.into(), t.into())).collect())
                    })
                    .collect()
            })
        })
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(120))]

        #[test]
        fn closed_form_matches_lp(fam in family()) {
            proptest::prop_assert_eq!(mu(&fam).unwrap(), mu_by_lp(&fam, &Rational::zero()).unwrap());
        }

        #[test]
        fn canonical_coupling_is_exact_and_maximal(fam in family()) {
            let c = canonical_maximal_coupling(&fam).unwrap();
            proptest::prop_assert!(c.joint().probs().iter().all(|p| *p >= Rational::zero()));
            proptest::prop_assert_eq!(c.equality_probability(), mu(&fam).unwrap());
            for (j, m) in fam.iter().enumerate() {
                proptest::prop_assert_eq!(&c.joint_marginal(j), m);
            }
        }

        #[test]
        fn mu_is_permutation_invariant(fam in family(), rot in 0usize..4) {
            let mut shuffled = fam.clone();
            let len = shuffled.len();
            shuffled.rotate_left(rot % len);
            shuffled.swap(0, len - 1);
            proptest::prop_assert_eq!(mu(&fam).unwrap(), mu(&shuffled).unwrap());
        }
    }
}
