//! AST for the model language.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    /// `.*` and friends: elementwise over vectors, identical to the plain
    /// operator on scalars
    ElemAdd,
    ElemSub,
    ElemMul,
    ElemDiv,
    ElemPow,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
            BinOp::ElemAdd => ".+",
            BinOp::ElemSub => ".-",
            BinOp::ElemMul => ".*",
            BinOp::ElemDiv => "./",
            BinOp::ElemPow => ".^",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Ident(String),
    /// 1-based constant index, e.g. `eta[2]`
    Index(Box<Expr>, usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// Positional arguments and `name = value` keyword arguments.
    Call(String, Vec<Expr>, Vec<(String, Expr)>),
    /// `[a, b, c]`
    VecLit(Vec<Expr>),
    /// `[a b; c d]`
    MatLit(Vec<Vec<Expr>>),
    /// `@.` marker; all derived expressions are implicitly elementwise over
    /// observation times, so this is accepted and carries no extra meaning.
    Broadcast(Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamStmt {
    pub name: String,
    pub prior: Expr,
    pub line: usize,
    pub column: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssignStmt {
    pub name: String,
    pub expr: Expr,
    /// false for `:=` (non-stored intermediate)
    pub stored: bool,
    pub line: usize,
    pub column: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynStmt {
    pub compartment: String,
    pub rhs: Expr,
    pub line: usize,
    pub column: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DerivedStmt {
    Deterministic(AssignStmt),
    Probabilistic(ParamStmt),
}

impl DerivedStmt {
    pub fn name(&self) -> &str {
        match self {
            DerivedStmt::Deterministic(s) => &s.name,
            DerivedStmt::Probabilistic(s) => &s.name,
        }
    }
    pub fn location(&self) -> (usize, usize) {
        match self {
            DerivedStmt::Deterministic(s) => (s.line, s.column),
            DerivedStmt::Probabilistic(s) => (s.line, s.column),
        }
    }
}

/// Parsed model. `@param` and `@derived` are mandatory; the rest are
/// `None` when the block was not written.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ModelAst {
    pub param: Vec<ParamStmt>,
    pub random: Option<Vec<ParamStmt>>,
    pub covariates: Option<Vec<String>>,
    pub pre: Option<Vec<AssignStmt>>,
    pub init: Option<Vec<AssignStmt>>,
    pub vars: Option<Vec<AssignStmt>>,
    pub dynamics: Option<Vec<DynStmt>>,
    pub derived: Vec<DerivedStmt>,
}

impl ModelAst {
    /// Compartment names in declaration order (dynamics left-hand sides).
    pub fn compartments(&self) -> Vec<String> {
        self.dynamics
            .as_ref()
            .map(|d| d.iter().map(|s| s.compartment.clone()).collect())
            .unwrap_or_default()
    }

    /// Names of probabilistic `@derived` statements (the dependent variables).
    pub fn dependent_vars(&self) -> Vec<String> {
        self.derived
            .iter()
            .filter_map(|d| match d {
                DerivedStmt::Probabilistic(p) => Some(p.name.clone()),
                DerivedStmt::Deterministic(_) => None,
            })
            .collect()
    }
}
