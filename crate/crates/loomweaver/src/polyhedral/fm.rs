//! Fourier-Motzkin elimination for loop-bound derivation.
//!
//! `project_bounds(set, k)` eliminates every dimension deeper than the
//! first `k` (and all locals) and returns the lower/upper bound terms for
//! dimension `k-1` in terms of the outer dimensions. Constants are
//! tightened by integer division at each step, which keeps the projection
//! exact on the conjunctive systems the transformations produce; the
//! membership filter backs it up during enumeration.

use crate::affine::{AffineExpr, BoundTerm};
use crate::polyhedral::set::{IntegerSet, Relation};

/// Bounds for one dimension: value ranges over `max(lowers) ..= min(uppers)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimBounds {
    pub lowers: Vec<BoundTerm>,
    pub uppers: Vec<BoundTerm>,
}

/// Inequality `expr >= 0` in dense form over an ordered name list.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Ineq {
    coeffs: Vec<i64>,
    constant: i64,
}

impl Ineq {
    fn coeff(&self, idx: usize) -> i64 {
        self.coeffs[idx]
    }

    fn is_trivial(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0) && self.constant >= 0
    }

    fn is_infeasible(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0) && self.constant < 0
    }

    /// Divide through by the gcd of the dimension coefficients, flooring
    /// the constant. Valid for integer solutions and tightens the bound.
    fn normalize(&mut self) {
        let mut g = 0i64;
        for &c in &self.coeffs {
            g = gcd(g, c.abs());
        }
        if g > 1 {
            for c in &mut self.coeffs {
                *c /= g;
            }
            self.constant = self.constant.div_euclid(g);
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Reduce `expr/den` by the gcd of every coefficient, the constant, and
/// the divisor; floor and ceiling are invariant under this scaling.
fn reduce_term(term: BoundTerm) -> BoundTerm {
    if term.den == 1 {
        return term;
    }
    let mut g = term.den;
    g = gcd(g, term.expr.constant_term().abs());
    for (_, c) in term.expr.dims() {
        g = gcd(g, c.abs());
    }
    if g <= 1 {
        return term;
    }
    let mut expr = AffineExpr::constant(term.expr.constant_term() / g);
    for (name, c) in term.expr.dims() {
        expr = expr.add(&AffineExpr::dim(name).scale(c / g));
    }
    BoundTerm {
        expr,
        den: term.den / g,
    }
}

/// Lower/upper bound terms for the innermost kept dimension after
/// eliminating everything deeper. `keep` must be in `1..=dims.len()`.
/// Returns `None` when the set is empty independent of outer values.
pub fn project_bounds(set: &IntegerSet, keep: usize) -> Option<DimBounds> {
    assert!(keep >= 1 && keep <= set.dims().len());
    // Name order: kept dims, then dims to eliminate, then locals.
    let mut names: Vec<String> = set.dims().to_vec();
    for l in set.locals() {
        names.push(l.name.clone());
    }

    let mut system: Vec<Ineq> = Vec::new();
    for c in set.constraints() {
        let dense = to_dense(&c.expr, &names);
        match c.rel {
            Relation::GeZero => system.push(dense),
            Relation::EqZero => {
                let mut neg = dense.clone();
                for co in &mut neg.coeffs {
                    *co = -*co;
                }
                neg.constant = -neg.constant;
                system.push(dense);
                system.push(neg);
            }
        }
    }
    for ineq in &mut system {
        ineq.normalize();
    }

    // Eliminate locals and dims deeper than the kept prefix, innermost first.
    for idx in (keep..names.len()).rev() {
        system = eliminate(system, idx);
        if system.iter().any(|i| i.is_infeasible()) {
            return None;
        }
    }

    let target = keep - 1;
    let mut lowers = Vec::new();
    let mut uppers = Vec::new();
    for ineq in &system {
        let c = ineq.coeff(target);
        if c == 0 {
            if ineq.is_infeasible() {
                return None;
            }
            continue;
        }
        // c*x + rest >= 0
        let mut rest = AffineExpr::constant(ineq.constant);
        for (i, name) in names.iter().enumerate().take(target) {
            if ineq.coeffs[i] != 0 {
                rest = rest.add(&AffineExpr::dim(name.clone()).scale(ineq.coeffs[i]));
            }
        }
        let term = if c > 0 {
            // x >= ceil(-rest / c)
            BoundTerm {
                expr: rest.scale(-1),
                den: c,
            }
        } else {
            // x <= floor(rest / -c)
            BoundTerm { expr: rest, den: -c }
        };
        let term = reduce_term(term);
        if c > 0 {
            if !lowers.contains(&term) {
                lowers.push(term);
            }
        } else if !uppers.contains(&term) {
            uppers.push(term);
        }
    }
    Some(DimBounds { lowers, uppers })
}

/// Per-level bounds for every dimension of the set, outermost first.
pub fn level_bounds(set: &IntegerSet) -> Option<Vec<DimBounds>> {
    (1..=set.dims().len())
        .map(|k| project_bounds(set, k))
        .collect()
}

fn to_dense(expr: &AffineExpr, names: &[String]) -> Ineq {
    Ineq {
        coeffs: names.iter().map(|n| expr.coeff(n)).collect(),
        constant: expr.constant_term(),
    }
}

/// One elimination step: combine every lower bound on `idx` with every
/// upper bound and keep the unrelated constraints.
fn eliminate(system: Vec<Ineq>, idx: usize) -> Vec<Ineq> {
    let mut rest = Vec::new();
    let mut lowers = Vec::new();
    let mut uppers = Vec::new();
    for ineq in system {
        match ineq.coeff(idx).signum() {
            0 => rest.push(ineq),
            1.. => lowers.push(ineq),
            _ => uppers.push(ineq),
        }
    }
    for lo in &lowers {
        let cl = lo.coeff(idx);
        for up in &uppers {
            let du = -up.coeff(idx);
            // cl*(up rest) + du*(lo rest) >= 0
            let mut combined = Ineq {
                coeffs: lo
                    .coeffs
                    .iter()
                    .zip(&up.coeffs)
                    .map(|(&l, &u)| l * du + u * cl)
                    .collect(),
                constant: lo.constant * du + up.constant * cl,
            };
            combined.coeffs[idx] = 0;
            combined.normalize();
            if !combined.is_trivial() && !rest.contains(&combined) {
                rest.push(combined);
            }
        }
    }
    rest
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyhedral::set::Constraint;

    #[test]
    fn plain_rectangle_bounds() {
        let s = IntegerSet::rectangle(&[("i".into(), 0, 32)]);
        let b = project_bounds(&s, 1).unwrap();
        assert_eq!(b.lowers.len(), 1);
        assert_eq!(b.lowers[0].as_constant_lower(), Some(0));
        assert_eq!(b.uppers[0].as_constant_upper(), Some(31));
    }

    #[test]
    fn skewed_bounds_read_off_constraints() {
        // {0 <= i <= 2, i <= j <= i+2}
        let mut s = IntegerSet::rectangle(&[("i".into(), 0, 3)]);
        let mut dims = s.dims().to_vec();
        dims.push("j".into());
        s.set_dims(dims);
        s.add_constraint(Constraint::ge0(
            AffineExpr::dim("j").sub(&AffineExpr::dim("i")),
        ));
        s.add_constraint(Constraint::ge0(
            AffineExpr::dim("i").add_constant(2).sub(&AffineExpr::dim("j")),
        ));
        let b = project_bounds(&s, 2).unwrap();
        assert_eq!(b.lowers.len(), 1);
        assert_eq!(b.lowers[0].expr, AffineExpr::dim("i"));
        assert_eq!(b.uppers[0].expr, AffineExpr::dim("i").add_constant(2));
        // projection of the outer dim stays [0, 2]
        let outer = project_bounds(&s, 1).unwrap();
        assert_eq!(outer.lowers[0].as_constant_lower(), Some(0));
        assert_eq!(outer.uppers[0].as_constant_upper(), Some(2));
    }

    #[test]
    fn nondivisible_split_bounds() {
        // i = 4*i0 + i1, 0 <= i <= 9, 0 <= i1 <= 3
        let mut s = IntegerSet::default();
        s.set_dims(vec!["i0".into(), "i1".into()]);
        let i = AffineExpr::dim("i0").scale(4).add(&AffineExpr::dim("i1"));
        s.add_constraint(Constraint::ge0(i.clone()));
        s.add_constraint(Constraint::ge0(i.scale(-1).add_constant(9)));
        s.add_constraint(Constraint::ge0(AffineExpr::dim("i1")));
        s.add_constraint(Constraint::ge0(
            AffineExpr::dim("i1").scale(-1).add_constant(3),
        ));
        let outer = project_bounds(&s, 1).unwrap();
        assert_eq!(outer.lowers[0].as_constant_lower(), Some(0));
        assert_eq!(outer.uppers[0].as_constant_upper(), Some(2));
        // inner: 0 <= i1 <= min(3, 9 - 4*i0)
        let inner = project_bounds(&s, 2).unwrap();
        let consts: Vec<Option<i64>> = inner.uppers.iter().map(|t| t.as_constant_upper()).collect();
        assert!(consts.contains(&Some(3)));
        let residual = inner
            .uppers
            .iter()
            .find(|t| t.as_constant_upper().is_none())
            .expect("residual bound");
        assert_eq!(residual.expr, AffineExpr::dim("i0").scale(-4).add_constant(9));
        assert_eq!(residual.den, 1);
        // enumeration matches the original 10 points
        assert_eq!(s.point_count(), 10);
    }
}
