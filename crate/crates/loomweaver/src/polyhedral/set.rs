//! Conjunctive quasi-affine integer sets.
//!
//! A set is an ordered list of dimension names plus constraints of the
//! form `expr >= 0` or `expr == 0`. Existential locals are supported only
//! as floor-division witnesses: each local carries its defining numerator
//! and divisor, so point membership stays decidable by direct evaluation.

use std::collections::BTreeMap;
use std::fmt;

use crate::affine::{floor_div, AffineExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `expr >= 0`
    GeZero,
    /// `expr == 0`
    EqZero,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub expr: AffineExpr,
    pub rel: Relation,
}

impl Constraint {
    pub fn ge0(expr: AffineExpr) -> Self {
        Constraint {
            expr,
            rel: Relation::GeZero,
        }
    }

    pub fn eq0(expr: AffineExpr) -> Self {
        Constraint {
            expr,
            rel: Relation::EqZero,
        }
    }

    pub fn holds(&self, env: &BTreeMap<String, i64>) -> bool {
        let v = self.expr.eval_map(env);
        match self.rel {
            Relation::GeZero => v >= 0,
            Relation::EqZero => v == 0,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rel {
            Relation::GeZero => write!(f, "{} >= 0", self.expr),
            Relation::EqZero => write!(f, "{} = 0", self.expr),
        }
    }
}

/// An existential dimension `q = floor(numer / denom)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalDef {
    pub name: String,
    pub numer: AffineExpr,
    pub denom: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntegerSet {
    dims: Vec<String>,
    locals: Vec<LocalDef>,
    constraints: Vec<Constraint>,
}

impl IntegerSet {
    /// Rectangular set from inclusive-exclusive ranges.
    pub fn rectangle(dims: &[(String, i64, i64)]) -> Self {
        let mut set = IntegerSet {
            dims: dims.iter().map(|(n, _, _)| n.clone()).collect(),
            locals: Vec::new(),
            constraints: Vec::new(),
        };
        for (name, lower, upper) in dims {
            // lower <= d <= upper-1
            set.constraints.push(Constraint::ge0(
                AffineExpr::dim(name.clone()).add_constant(-lower),
            ));
            set.constraints.push(Constraint::ge0(
                AffineExpr::dim(name.clone()).scale(-1).add_constant(upper - 1),
            ));
        }
        set
    }

    pub fn dims(&self) -> &[String] {
        &self.dims
    }

    pub fn dim_index(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d == name)
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn locals(&self) -> &[LocalDef] {
        &self.locals
    }

    pub fn add_constraint(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    /// Introduce a local `name = floor(numer / denom)` together with its
    /// two defining constraints `0 <= numer - denom*name <= denom - 1`.
    pub fn add_floor_local(&mut self, name: impl Into<String>, numer: AffineExpr, denom: i64) {
        let name = name.into();
        let rem = numer.sub(&AffineExpr::dim(name.clone()).scale(denom));
        self.constraints.push(Constraint::ge0(rem.clone()));
        self.constraints
            .push(Constraint::ge0(rem.scale(-1).add_constant(denom - 1)));
        self.locals.push(LocalDef { name, numer, denom });
    }

    pub(crate) fn set_dims(&mut self, dims: Vec<String>) {
        self.dims = dims;
    }

    /// Substitute `dim` (removed from the dimension list) by `repl`.
    pub fn substitute_dim(&mut self, dim: &str, repl: &AffineExpr) {
        for c in &mut self.constraints {
            c.expr = c.expr.substitute(dim, repl);
        }
        for l in &mut self.locals {
            l.numer = l.numer.substitute(dim, repl);
        }
        self.dims.retain(|d| d != dim);
    }

    /// Membership test. Locals are computed from their defining floor
    /// divisions, never searched.
    pub fn contains(&self, point: &[i64]) -> bool {
        if point.len() != self.dims.len() {
            return false;
        }
        let mut env: BTreeMap<String, i64> = self
            .dims
            .iter()
            .cloned()
            .zip(point.iter().copied())
            .collect();
        for l in &self.locals {
            let v = floor_div(l.numer.eval_map(&env), l.denom);
            env.insert(l.name.clone(), v);
        }
        self.constraints.iter().all(|c| c.holds(&env))
    }

    /// All integer points in lexicographic dimension order. Bounds come
    /// from Fourier-Motzkin projection; each candidate is then filtered
    /// through the exact membership test.
    pub fn enumerate(&self) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        if self.dims.is_empty() {
            return out;
        }
        let Some(bounds) = super::fm::level_bounds(self) else {
            return out;
        };
        let mut point = Vec::new();
        self.enum_rec(&bounds, &mut point, &mut out);
        out
    }

    fn enum_rec(
        &self,
        bounds: &[super::fm::DimBounds],
        point: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
    ) {
        let level = point.len();
        if level == self.dims.len() {
            if self.contains(point) {
                out.push(point.clone());
            }
            return;
        }
        let env: BTreeMap<String, i64> = self
            .dims
            .iter()
            .take(level)
            .cloned()
            .zip(point.iter().copied())
            .collect();
        let b = &bounds[level];
        let lo = b.lowers.iter().map(|t| t.eval_lower(&env)).max();
        let hi = b.uppers.iter().map(|t| t.eval_upper(&env)).min();
        let (Some(lo), Some(hi)) = (lo, hi) else {
            return;
        };
        for v in lo..=hi {
            point.push(v);
            self.enum_rec(bounds, point, out);
            point.pop();
        }
    }

    /// Number of integer points; enumeration-backed, intended for tests
    /// and small domains.
    pub fn point_count(&self) -> usize {
        self.enumerate().len()
    }
}

impl fmt::Display for IntegerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{ ({})", self.dims.join(", "))?;
        if !self.locals.is_empty() {
            let ls: Vec<String> = self
                .locals
                .iter()
                .map(|l| format!("{} = floor(({})/{})", l.name, l.numer, l.denom))
                .collect();
            write!(f, " exists {}", ls.join(", "))?;
        }
        write!(f, " : ")?;
        let cs: Vec<String> = self.constraints.iter().map(|c| c.to_string()).collect();
        write!(f, "{} }}", cs.join(" and "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_membership_and_count() {
        let s = IntegerSet::rectangle(&[("i".into(), 0, 4), ("j".into(), 1, 3)]);
        assert!(s.contains(&[0, 1]));
        assert!(s.contains(&[3, 2]));
        assert!(!s.contains(&[4, 1]));
        assert!(!s.contains(&[0, 0]));
        assert_eq!(s.point_count(), 8);
    }

    #[test]
    fn floor_local_constrains_membership() {
        // q = floor(i/3) with 0 <= i <= 8 and q = 2 selects i in 6..=8
        let mut s = IntegerSet::rectangle(&[("i".into(), 0, 9)]);
        s.add_floor_local("q", AffineExpr::dim("i"), 3);
        s.add_constraint(Constraint::eq0(AffineExpr::dim("q").add_constant(-2)));
        let pts = s.enumerate();
        assert_eq!(pts, vec![vec![6], vec![7], vec![8]]);
    }
}
