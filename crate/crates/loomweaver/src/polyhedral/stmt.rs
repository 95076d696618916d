//! Polyhedral statements: a domain, a schedule, the statement body, and
//! hardware-optimization annotations.

use std::collections::BTreeMap;

use crate::affine::AffineExpr;
use crate::frontend::Compute;
use crate::polyhedral::schedule::ScheduleMap;
use crate::polyhedral::set::IntegerSet;

/// Hardware optimization attached to a loop dimension; carried through
/// AST generation and turned into a pragma attribute during lowering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HwAnnotation {
    Pipeline { dim: String, ii: i64 },
    Unroll { dim: String, factor: i64 },
}

impl HwAnnotation {
    pub fn dim(&self) -> &str {
        match self {
            HwAnnotation::Pipeline { dim, .. } | HwAnnotation::Unroll { dim, .. } => dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyStmt {
    pub name: String,
    /// Index of the originating compute in the function.
    pub compute: usize,
    pub domain: IntegerSet,
    pub schedule: ScheduleMap,
    /// The compute's iterators, outer to inner, as written.
    pub orig_iters: Vec<String>,
    /// Original iterator name -> affine expression over current domain
    /// dims. This is the substitution user-nodes carry into lowering.
    pub iter_map: BTreeMap<String, AffineExpr>,
    pub annotations: Vec<HwAnnotation>,
}

impl PolyStmt {
    pub fn depth(&self) -> usize {
        self.domain.dims().len()
    }

    pub fn has_dim(&self, name: &str) -> bool {
        self.domain.dim_index(name).is_some()
    }
}

/// Extract the polyhedral form of a compute: rectangular domain from the
/// iterator ranges and an identity 2d+1 schedule led by `order_index`.
pub fn lift(c: &Compute, compute_index: usize, order_index: i64) -> PolyStmt {
    let dims: Vec<(String, i64, i64)> = c
        .iters
        .iter()
        .map(|iv| (iv.name.clone(), iv.lower, iv.upper))
        .collect();
    let domain = IntegerSet::rectangle(&dims);
    let dim_names: Vec<String> = c.iters.iter().map(|iv| iv.name.clone()).collect();
    let iter_map = dim_names
        .iter()
        .map(|n| (n.clone(), AffineExpr::dim(n.clone())))
        .collect();
    PolyStmt {
        name: c.name.clone(),
        compute: compute_index,
        domain,
        schedule: ScheduleMap::identity(&dim_names, order_index),
        orig_iters: dim_names,
        iter_map,
        annotations: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    #[test]
    fn lift_is_identity() {
        let f = parse_program(
            r#"
            func f {
              iter i = 0..32; iter j = 0..32;
              array A: f32[32][32] inout;
              compute S (i, j) { A[i][j] = A[i][j] + 1.0; }
            }
            "#,
        )
        .unwrap();
        let s = lift(&f.computes[0], 0, 0);
        assert_eq!(s.schedule.to_string(), "[0, i, 0, j, 0]");
        assert_eq!(s.domain.dims(), &["i".to_string(), "j".to_string()]);
        assert_eq!(s.domain.point_count(), 1024);
        assert!(s.domain.contains(&[0, 31]));
        assert!(!s.domain.contains(&[32, 0]));
    }

    #[test]
    fn lift_fig8_domain() {
        let f = parse_program(
            r#"
            func f {
              iter t = 0..32; iter i = 0..32;
              array A: f32[32][32] inout;
              compute S (t, i) { A[t][i] = A[t][i] + 1.0; }
            }
            "#,
        )
        .unwrap();
        let s = lift(&f.computes[0], 0, 0);
        // {S(t,i): 0 <= t <= 31 and 0 <= i <= 31}
        assert!(s.domain.contains(&[31, 31]));
        assert_eq!(s.domain.point_count(), 1024);
    }
}
