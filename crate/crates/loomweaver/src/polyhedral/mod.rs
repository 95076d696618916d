//! Restricted polyhedral IR: conjunctive quasi-affine integer sets,
//! 2d+1 schedules, loop transformations, and AST generation.

pub mod astbuild;
pub mod fm;
pub mod schedule;
pub mod set;
pub mod stmt;
pub mod transform;

pub use astbuild::{build_ast, enumerate_instances, normalized_box, print_ast, AstBuild, PolyAst};
pub use fm::{level_bounds, project_bounds, DimBounds};
pub use schedule::{SchedCoord, ScheduleMap};
pub use set::{Constraint, IntegerSet, Relation};
pub use stmt::{lift, HwAnnotation, PolyStmt};
pub use transform::{interchange, order_after, set_loop_order, skew, split, tile};
