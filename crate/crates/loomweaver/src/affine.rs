//! Linear integer expressions over named dimensions.
//!
//! An [`AffineExpr`] is a linear combination of dimension names plus a
//! constant. It is the common currency between array index expressions,
//! iteration-domain constraints, and loop bounds. Quasi-affine division
//! never appears inside an `AffineExpr`; loop bounds that need a floor or
//! ceiling division wrap one in [`BoundTerm`].

use std::collections::BTreeMap;
use std::fmt;

/// `sum(coeff_i * dim_i) + constant` with integer coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct AffineExpr {
    terms: BTreeMap<String, i64>,
    constant: i64,
}

impl AffineExpr {
    pub fn constant(c: i64) -> Self {
        AffineExpr {
            terms: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn dim(name: impl Into<String>) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(name.into(), 1);
        AffineExpr { terms, constant: 0 }
    }

    pub fn coeff(&self, name: &str) -> i64 {
        self.terms.get(name).copied().unwrap_or(0)
    }

    pub fn constant_term(&self) -> i64 {
        self.constant
    }

    /// Names with nonzero coefficient, in sorted order.
    pub fn dims(&self) -> impl Iterator<Item = (&str, i64)> {
        self.terms.iter().map(|(n, &c)| (n.as_str(), c))
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<i64> {
        self.is_constant().then_some(self.constant)
    }

    /// True when the expression is a single dimension with coefficient 1.
    pub fn as_single_dim(&self) -> Option<&str> {
        if self.constant == 0 && self.terms.len() == 1 {
            let (name, &c) = self.terms.iter().next().unwrap();
            if c == 1 {
                return Some(name);
            }
        }
        None
    }

    pub fn add(&self, other: &AffineExpr) -> AffineExpr {
        let mut out = self.clone();
        for (name, c) in &other.terms {
            let e = out.terms.entry(name.clone()).or_insert(0);
            *e = e.wrapping_add(*c);
        }
        out.constant = out.constant.wrapping_add(other.constant);
        out.normalize();
        out
    }

    pub fn sub(&self, other: &AffineExpr) -> AffineExpr {
        self.add(&other.scale(-1))
    }

    pub fn scale(&self, k: i64) -> AffineExpr {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.wrapping_mul(k);
        }
        out.constant = out.constant.wrapping_mul(k);
        out.normalize();
        out
    }

    pub fn add_constant(&self, c: i64) -> AffineExpr {
        let mut out = self.clone();
        out.constant = out.constant.wrapping_add(c);
        out
    }

    fn normalize(&mut self) {
        self.terms.retain(|_, c| *c != 0);
    }

    /// Replace `dim` by `repl` everywhere.
    pub fn substitute(&self, dim: &str, repl: &AffineExpr) -> AffineExpr {
        let c = self.coeff(dim);
        if c == 0 {
            return self.clone();
        }
        let mut out = self.clone();
        out.terms.remove(dim);
        out.add(&repl.scale(c))
    }

    /// Apply several substitutions at once. Names on the right-hand sides
    /// are not re-substituted, so swaps like `{i -> j, j -> i}` work.
    pub fn substitute_all(&self, map: &BTreeMap<String, AffineExpr>) -> AffineExpr {
        let mut out = AffineExpr::constant(self.constant);
        for (name, &c) in &self.terms {
            match map.get(name) {
                Some(repl) => out = out.add(&repl.scale(c)),
                None => out = out.add(&AffineExpr::dim(name.clone()).scale(c)),
            }
        }
        out
    }

    /// Rename a dimension without changing coefficients.
    pub fn rename(&self, from: &str, to: &str) -> AffineExpr {
        if let Some(c) = self.terms.get(from).copied() {
            let mut out = self.clone();
            out.terms.remove(from);
            let e = out.terms.entry(to.to_string()).or_insert(0);
            *e += c;
            out.normalize();
            out
        } else {
            self.clone()
        }
    }

    pub fn eval(&self, env: &dyn Fn(&str) -> i64) -> i64 {
        let mut v = self.constant;
        for (name, c) in &self.terms {
            v = v.wrapping_add(c.wrapping_mul(env(name)));
        }
        v
    }

    pub fn eval_map(&self, env: &BTreeMap<String, i64>) -> i64 {
        self.eval(&|name| *env.get(name).unwrap_or(&0))
    }
}

impl fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (name, c) in &self.terms {
            if *c == 0 {
                continue;
            }
            if first {
                match *c {
                    1 => write!(f, "{name}")?,
                    -1 => write!(f, "-{name}")?,
                    c => write!(f, "{c}*{name}")?,
                }
                first = false;
            } else if *c > 0 {
                if *c == 1 {
                    write!(f, " + {name}")?;
                } else {
                    write!(f, " + {c}*{name}")?;
                }
            } else if *c == -1 {
                write!(f, " - {name}")?;
            } else {
                write!(f, " - {}*{name}", -c)?;
            }
        }
        if first {
            write!(f, "{}", self.constant)?;
        } else if self.constant > 0 {
            write!(f, " + {}", self.constant)?;
        } else if self.constant < 0 {
            write!(f, " - {}", -self.constant)?;
        }
        Ok(())
    }
}

/// Floor division rounding toward negative infinity.
pub fn floor_div(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    a.div_euclid(b)
}

/// Ceiling division for a positive divisor.
pub fn ceil_div(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    -((-a).div_euclid(b))
}

/// One candidate bound: `expr / den`, floored for upper bounds and
/// rounded up for lower bounds. `den` is 1 for plain affine bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundTerm {
    pub expr: AffineExpr,
    pub den: i64,
}

impl BoundTerm {
    pub fn plain(expr: AffineExpr) -> Self {
        BoundTerm { expr, den: 1 }
    }

    pub fn eval_lower(&self, env: &BTreeMap<String, i64>) -> i64 {
        ceil_div(self.expr.eval_map(env), self.den)
    }

    pub fn eval_upper(&self, env: &BTreeMap<String, i64>) -> i64 {
        floor_div(self.expr.eval_map(env), self.den)
    }

    pub fn as_constant_lower(&self) -> Option<i64> {
        self.expr.as_constant().map(|c| ceil_div(c, self.den))
    }

    pub fn as_constant_upper(&self) -> Option<i64> {
        self.expr.as_constant().map(|c| floor_div(c, self.den))
    }
}

impl fmt::Display for BoundTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.expr)
        } else {
            write!(f, "({})/{}", self.expr, self.den)
        }
    }
}

/// An inclusive loop bound: the max of its terms when used as a lower
/// bound, the min when used as an upper bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopBound {
    pub terms: Vec<BoundTerm>,
}

impl LoopBound {
    pub fn constant(c: i64) -> Self {
        LoopBound {
            terms: vec![BoundTerm::plain(AffineExpr::constant(c))],
        }
    }

    pub fn single(expr: AffineExpr) -> Self {
        LoopBound {
            terms: vec![BoundTerm::plain(expr)],
        }
    }

    pub fn eval_lower(&self, env: &BTreeMap<String, i64>) -> i64 {
        self.terms
            .iter()
            .map(|t| t.eval_lower(env))
            .max()
            .expect("bound has at least one term")
    }

    pub fn eval_upper(&self, env: &BTreeMap<String, i64>) -> i64 {
        self.terms
            .iter()
            .map(|t| t.eval_upper(env))
            .min()
            .expect("bound has at least one term")
    }

    pub fn as_constant_lower(&self) -> Option<i64> {
        let mut v: Option<i64> = None;
        for t in &self.terms {
            let c = t.as_constant_lower()?;
            v = Some(v.map_or(c, |x: i64| x.max(c)));
        }
        v
    }

    pub fn as_constant_upper(&self) -> Option<i64> {
        let mut v: Option<i64> = None;
        for t in &self.terms {
            let c = t.as_constant_upper()?;
            v = Some(v.map_or(c, |x: i64| x.min(c)));
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitute_all_swaps() {
        let e = AffineExpr::dim("i").add(&AffineExpr::dim("j").scale(2));
        let mut map = BTreeMap::new();
        map.insert("i".to_string(), AffineExpr::dim("j"));
        map.insert("j".to_string(), AffineExpr::dim("i"));
        let swapped = e.substitute_all(&map);
        assert_eq!(swapped.coeff("i"), 2);
        assert_eq!(swapped.coeff("j"), 1);
    }

    #[test]
    fn floor_ceil_negative() {
        assert_eq!(floor_div(-3, 4), -1);
        assert_eq!(ceil_div(-3, 4), 0);
        assert_eq!(floor_div(9, 4), 2);
        assert_eq!(ceil_div(9, 4), 3);
    }

    #[test]
    fn display_shapes() {
        let e = AffineExpr::dim("i")
            .scale(8)
            .add(&AffineExpr::dim("j"))
            .add_constant(-1);
        assert_eq!(e.to_string(), "8*i + j - 1");
    }
}
