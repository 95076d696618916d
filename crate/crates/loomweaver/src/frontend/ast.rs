//! The parsed program model: algorithm specification plus schedule,
//! kept decoupled exactly as written in the source.

use std::fmt;

use crate::affine::AffineExpr;

/// Scalar element type of a placeholder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataType {
    I8,
    I16,
    I32,
    I64,
    U8,
    U16,
    U32,
    U64,
    F32,
    F64,
}

impl DataType {
    pub fn parse(s: &str) -> Option<DataType> {
        Some(match s {
            "i8" => DataType::I8,
            "i16" => DataType::I16,
            "i32" => DataType::I32,
            "i64" => DataType::I64,
            "u8" => DataType::U8,
            "u16" => DataType::U16,
            "u32" => DataType::U32,
            "u64" => DataType::U64,
            "f32" => DataType::F32,
            "f64" => DataType::F64,
            _ => return None,
        })
    }

    pub fn is_float(self) -> bool {
        matches!(self, DataType::F32 | DataType::F64)
    }

    pub fn is_signed(self) -> bool {
        matches!(
            self,
            DataType::I8 | DataType::I16 | DataType::I32 | DataType::I64
        )
    }

    pub fn bits(self) -> u32 {
        match self {
            DataType::I8 | DataType::U8 => 8,
            DataType::I16 | DataType::U16 => 16,
            DataType::I32 | DataType::U32 | DataType::F32 => 32,
            DataType::I64 | DataType::U64 | DataType::F64 => 64,
        }
    }

    /// The matching fixed-width C type.
    pub fn c_name(self) -> &'static str {
        match self {
            DataType::I8 => "int8_t",
            DataType::I16 => "int16_t",
            DataType::I32 => "int32_t",
            DataType::I64 => "int64_t",
            DataType::U8 => "uint8_t",
            DataType::U16 => "uint16_t",
            DataType::U32 => "uint32_t",
            DataType::U64 => "uint64_t",
            DataType::F32 => "float",
            DataType::F64 => "double",
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DataType::I8 => "i8",
            DataType::I16 => "i16",
            DataType::I32 => "i32",
            DataType::I64 => "i64",
            DataType::U8 => "u8",
            DataType::U16 => "u16",
            DataType::U32 => "u32",
            DataType::U64 => "u64",
            DataType::F32 => "f32",
            DataType::F64 => "f64",
        };
        f.write_str(s)
    }
}

/// A loop iterator with a half-open range `[lower, upper)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterVar {
    pub name: String,
    pub lower: i64,
    pub upper: i64,
}

impl IterVar {
    pub fn extent(&self) -> i64 {
        self.upper - self.lower
    }
}

/// How an array crosses the function boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortDir {
    In,
    Out,
    InOut,
    Temp,
}

impl PortDir {
    pub fn keyword(self) -> &'static str {
        match self {
            PortDir::In => "in",
            PortDir::Out => "out",
            PortDir::InOut => "inout",
            PortDir::Temp => "temp",
        }
    }
}

/// A named multi-dimensional array.
#[derive(Debug, Clone, PartialEq)]
pub struct Placeholder {
    pub name: String,
    pub dtype: DataType,
    pub shape: Vec<i64>,
    pub dir: PortDir,
}

impl Placeholder {
    pub fn rank(&self) -> usize {
        self.shape.len()
    }
}

/// A numeric literal. Integer and float constants are kept apart so the
/// interpreter and emitter can round-trip them exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum Lit {
    Int(i64),
    Float(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

/// Right-hand-side expression tree. Array index expressions are always
/// affine in the iterator names; general arithmetic is only allowed in
/// value position.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Lit),
    Iter(String),
    Load { array: String, indices: Vec<AffineExpr> },
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// All loads in this expression, in source order.
    pub fn loads(&self) -> Vec<(&str, &[AffineExpr])> {
        let mut out = Vec::new();
        self.walk_loads(&mut out);
        out
    }

    fn walk_loads<'a>(&'a self, out: &mut Vec<(&'a str, &'a [AffineExpr])>) {
        match self {
            Expr::Lit(_) | Expr::Iter(_) => {}
            Expr::Load { array, indices } => out.push((array.as_str(), indices.as_slice())),
            Expr::Neg(e) => e.walk_loads(out),
            Expr::Bin(_, l, r) => {
                l.walk_loads(out);
                r.walk_loads(out);
            }
        }
    }

    /// Iterator names referenced anywhere (value position or indices).
    pub fn iter_names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk_iters(&mut out);
        out
    }

    fn walk_iters<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Iter(name) => out.push(name),
            Expr::Load { indices, .. } => {
                for idx in indices {
                    for (name, _) in idx.dims() {
                        out.push(name);
                    }
                }
            }
            Expr::Neg(e) => e.walk_iters(out),
            Expr::Bin(_, l, r) => {
                l.walk_iters(out);
                r.walk_iters(out);
            }
        }
    }
}

/// `=` or `+=` on the destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOp {
    Assign,
    Accumulate,
}

/// One statement over a rectangular iteration domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Compute {
    pub name: String,
    /// Outer-to-inner loop iterators.
    pub iters: Vec<IterVar>,
    pub dest: String,
    pub dest_indices: Vec<AffineExpr>,
    pub op: AssignOp,
    pub rhs: Expr,
}

impl Compute {
    pub fn depth(&self) -> usize {
        self.iters.len()
    }

    pub fn iter_index(&self, name: &str) -> Option<usize> {
        self.iters.iter().position(|iv| iv.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionKind {
    Cyclic,
    Block,
    Complete,
}

impl PartitionKind {
    pub fn keyword(self) -> &'static str {
        match self {
            PartitionKind::Cyclic => "cyclic",
            PartitionKind::Block => "block",
            PartitionKind::Complete => "complete",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "cyclic" => PartitionKind::Cyclic,
            "block" => PartitionKind::Block,
            "complete" => PartitionKind::Complete,
            _ => return None,
        })
    }
}

/// Target of an `after` directive: a named loop level of the base
/// compute, or the root (`-1`) when no loops are shared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AfterLevel {
    Dim(String),
    Root,
}

/// One scheduling primitive, applied in source order.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleDirective {
    Interchange {
        compute: String,
        a: String,
        b: String,
    },
    Split {
        compute: String,
        dim: String,
        factor: i64,
        outer: String,
        inner: String,
    },
    Tile {
        compute: String,
        i: String,
        j: String,
        ti: i64,
        tj: i64,
        i0: String,
        j0: String,
        i1: String,
        j1: String,
    },
    Skew {
        compute: String,
        i: String,
        j: String,
        t1: i64,
        t2: i64,
        ni: String,
        nj: String,
    },
    After {
        compute: String,
        base: String,
        level: AfterLevel,
    },
    Pipeline {
        compute: String,
        dim: String,
        ii: i64,
    },
    Unroll {
        compute: String,
        dim: String,
        factor: i64,
    },
    Partition {
        array: String,
        factors: Vec<i64>,
        kind: PartitionKind,
    },
    AutoDse {
        path: Option<String>,
    },
}

impl ScheduleDirective {
    /// The compute (or array) name this directive is attached to.
    pub fn receiver(&self) -> Option<&str> {
        match self {
            ScheduleDirective::Interchange { compute, .. }
            | ScheduleDirective::Split { compute, .. }
            | ScheduleDirective::Tile { compute, .. }
            | ScheduleDirective::Skew { compute, .. }
            | ScheduleDirective::After { compute, .. }
            | ScheduleDirective::Pipeline { compute, .. }
            | ScheduleDirective::Unroll { compute, .. } => Some(compute),
            ScheduleDirective::Partition { array, .. } => Some(array),
            ScheduleDirective::AutoDse { .. } => None,
        }
    }
}

/// A whole parsed function: placeholders, computes in declaration order,
/// and the schedule block.
#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub name: String,
    pub placeholders: Vec<Placeholder>,
    pub computes: Vec<Compute>,
    pub directives: Vec<ScheduleDirective>,
}

impl Function {
    pub fn placeholder(&self, name: &str) -> Option<&Placeholder> {
        self.placeholders.iter().find(|p| p.name == name)
    }

    pub fn compute(&self, name: &str) -> Option<&Compute> {
        self.computes.iter().find(|c| c.name == name)
    }

    pub fn compute_index(&self, name: &str) -> Option<usize> {
        self.computes.iter().position(|c| c.name == name)
    }

    pub fn has_auto_dse(&self) -> bool {
        self.directives
            .iter()
            .any(|d| matches!(d, ScheduleDirective::AutoDse { .. }))
    }
}
