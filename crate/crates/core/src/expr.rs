//! Scalar feature transformations encoded as typed expression trees.
//!
//! A [`FeatureTree`] is stored as a flat pre-order node list. Evaluation is
//! total: every operator is protected so that finite inputs always produce
//! finite outputs.
//!
//! Typing works on positions rather than on nodes. A position is either a
//! float context or a bool context:
//!
//! * float operators and constants are admissible only in float context,
//! * logical and comparison operators only in bool context,
//! * variables in either (logical operators read them as truthy when
//!   `|x| > 1e-9`).
//!
//! Children of float operators and comparisons are float contexts; children
//! of logical operators are bool contexts.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FewError, Result};
use crate::matrix::Matrix;

/// Tolerance for float equality and truthiness.
pub const EQ_TOL: f64 = 1e-9;
/// Magnitude bound applied to every float operator result.
pub const CLAMP: f64 = 1e30;
const EXP_CAP: f64 = 32.0;
/// Probability that a non-root position above the depth limit becomes a leaf.
const GROW_LEAF_PROB: f64 = 0.3;
/// Probability that a float-context leaf is a constant rather than a variable.
pub(crate) const CONST_LEAF_PROB: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Float,
    Bool,
}

impl std::str::FromStr for ValueType {
    type Err = FewError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "float" => Ok(ValueType::Float),
            "bool" => Ok(ValueType::Bool),
            other => Err(FewError::InvalidConfig(format!("unknown output type `{other}`"))),
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueType::Float => "float",
            ValueType::Bool => "bool",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Square,
    Cube,
    And,
    Or,
    Xor,
    Not,
    Eq,
    Gt,
    Geq,
    Lt,
    Leq,
}

/// Operator families that can replace one another under point mutation.
const FLOAT_BINARY: &[Op] = &[Op::Add, Op::Sub, Op::Mul, Op::Div];
const FLOAT_UNARY: &[Op] = &[Op::Sin, Op::Cos, Op::Exp, Op::Log, Op::Sqrt, Op::Square, Op::Cube];
const LOGIC_BINARY: &[Op] = &[Op::And, Op::Or, Op::Xor];
const LOGIC_UNARY: &[Op] = &[Op::Not];
const COMPARISON: &[Op] = &[Op::Eq, Op::Gt, Op::Geq, Op::Lt, Op::Leq];

const FLOAT_OPS: &[Op] = &[
    Op::Add,
    Op::Sub,
    Op::Mul,
    Op::Div,
    Op::Sin,
    Op::Cos,
    Op::Exp,
    Op::Log,
    Op::Sqrt,
    Op::Square,
    Op::Cube,
];
const BOOL_OPS: &[Op] = &[Op::And, Op::Or, Op::Xor, Op::Not, Op::Eq, Op::Gt, Op::Geq, Op::Lt, Op::Leq];

impl Op {
    pub const ALL: [Op; 20] = [
        Op::Add,
        Op::Sub,
        Op::Mul,
        Op::Div,
        Op::Sin,
        Op::Cos,
        Op::Exp,
        Op::Log,
        Op::Sqrt,
        Op::Square,
        Op::Cube,
        Op::And,
        Op::Or,
        Op::Xor,
        Op::Not,
        Op::Eq,
        Op::Gt,
        Op::Geq,
        Op::Lt,
        Op::Leq,
    ];

    pub fn arity(self) -> usize {
        match self {
            Op::Sin | Op::Cos | Op::Exp | Op::Log | Op::Sqrt | Op::Square | Op::Cube | Op::Not => 1,
            _ => 2,
        }
    }

    pub fn output_type(self) -> ValueType {
        if BOOL_OPS.contains(&self) {
            ValueType::Bool
        } else {
            ValueType::Float
        }
    }

    /// Context imposed on this operator's children.
    pub fn child_type(self) -> ValueType {
        match self {
            Op::And | Op::Or | Op::Xor | Op::Not => ValueType::Bool,
            _ => ValueType::Float,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Exp => "exp",
            Op::Log => "log",
            Op::Sqrt => "sqrt",
            Op::Square => "square",
            Op::Cube => "cube",
            Op::And => "and",
            Op::Or => "or",
            Op::Xor => "xor",
            Op::Not => "not",
            Op::Eq => "eq",
            Op::Gt => "gt",
            Op::Geq => "geq",
            Op::Lt => "lt",
            Op::Leq => "leq",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Op> {
        Op::ALL.iter().copied().find(|op| op.symbol() == s)
    }

    /// Operators that may stand in for `self` without changing arity or typing.
    pub fn family(self) -> &'static [Op] {
        for fam in [FLOAT_BINARY, FLOAT_UNARY, LOGIC_BINARY, LOGIC_UNARY, COMPARISON] {
            if fam.contains(&self) {
                return fam;
            }
        }
        unreachable!("every operator belongs to a family")
    }

    fn apply_unary(self, a: f64) -> f64 {
        let v = match self {
            Op::Sin => a.sin(),
            Op::Cos => a.cos(),
            Op::Exp => a.min(EXP_CAP).exp(),
            Op::Log => {
                if a.abs() > EQ_TOL {
                    a.abs().ln()
                } else {
                    0.0
                }
            }
            Op::Sqrt => a.abs().sqrt(),
            Op::Square => a * a,
            Op::Cube => a * a * a,
            Op::Not => return bool_val(!truthy(a)),
            _ => unreachable!("binary operator applied to one argument"),
        };
        clamp(v)
    }

    fn apply_binary(self, a: f64, b: f64) -> f64 {
        match self {
            Op::Add => clamp(a + b),
            Op::Sub => clamp(a - b),
            Op::Mul => clamp(a * b),
            Op::Div => {
                if b.abs() > EQ_TOL {
                    clamp(a / b)
                } else {
                    1.0
                }
            }
            Op::And => bool_val(truthy(a) && truthy(b)),
            Op::Or => bool_val(truthy(a) || truthy(b)),
            Op::Xor => bool_val(truthy(a) != truthy(b)),
            Op::Eq => bool_val((a - b).abs() <= EQ_TOL),
            Op::Gt => bool_val(a > b),
            Op::Geq => bool_val(a >= b),
            Op::Lt => bool_val(a < b),
            Op::Leq => bool_val(a <= b),
            _ => unreachable!("unary operator applied to two arguments"),
        }
    }
}

#[inline]
fn truthy(v: f64) -> bool {
    v.abs() > EQ_TOL
}

#[inline]
fn bool_val(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

#[inline]
fn clamp(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-CLAMP, CLAMP)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Op(Op),
    Var(usize),
    Const(f64),
}

impl Node {
    pub fn arity(&self) -> usize {
        match self {
            Node::Op(op) => op.arity(),
            _ => 0,
        }
    }

    /// Whether this node may occupy a position of the given context.
    pub fn admissible_in(&self, ctx: ValueType) -> bool {
        match self {
            Node::Var(_) => true,
            Node::Const(_) => ctx == ValueType::Float,
            Node::Op(op) => op.output_type() == ctx,
        }
    }
}

/// One evolved feature φ(x): a pre-order encoded expression tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTree {
    nodes: Vec<Node>,
}

impl FeatureTree {
    /// Builds a tree from pre-order nodes, checking that the arities close.
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        let mut need: usize = 1;
        for (i, n) in nodes.iter().enumerate() {
            if need == 0 {
                return Err(FewError::Structural(format!("trailing nodes after position {i}")));
            }
            need = need - 1 + n.arity();
        }
        if need != 0 || nodes.is_empty() {
            return Err(FewError::Structural("incomplete tree".into()));
        }
        Ok(FeatureTree { nodes })
    }

    pub fn var(index: usize) -> Self {
        FeatureTree { nodes: vec![Node::Var(index)] }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Type of the value produced at the root.
    pub fn output_type(&self) -> ValueType {
        match self.nodes[0] {
            Node::Op(op) => op.output_type(),
            _ => ValueType::Float,
        }
    }

    /// Index one past the last node of the subtree rooted at `start`.
    pub fn subtree_end(&self, start: usize) -> usize {
        let mut need = 1usize;
        let mut i = start;
        while need > 0 {
            need = need - 1 + self.nodes[i].arity();
            i += 1;
        }
        i
    }

    /// Longest root-to-leaf path counted in nodes; a bare leaf has depth 1.
    pub fn depth(&self) -> usize {
        self.node_depths().into_iter().max().unwrap_or(0)
    }

    /// Depth (1-based) of every node position.
    pub fn node_depths(&self) -> Vec<usize> {
        let mut depths = Vec::with_capacity(self.nodes.len());
        // stack of (depth of pending child slot, remaining children)
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for n in &self.nodes {
            let d = match stack.last_mut() {
                Some((d, rem)) => {
                    *rem -= 1;
                    *d
                }
                None => 1,
            };
            while matches!(stack.last(), Some((_, 0))) {
                stack.pop();
            }
            depths.push(d);
            if n.arity() > 0 {
                stack.push((d + 1, n.arity()));
            }
        }
        depths
    }

    /// Height of the subtree rooted at each position (leaf = 1).
    pub fn node_heights(&self) -> Vec<usize> {
        let mut heights = vec![0; self.nodes.len()];
        let mut stack: Vec<usize> = Vec::new();
        for i in (0..self.nodes.len()).rev() {
            let ar = self.nodes[i].arity();
            let mut h = 0;
            for _ in 0..ar {
                h = h.max(stack.pop().expect("well-formed tree"));
            }
            heights[i] = h + 1;
            stack.push(h + 1);
        }
        heights
    }

    /// Context required at each position, given the context of the root.
    pub fn node_contexts(&self, root: ValueType) -> Vec<ValueType> {
        let mut ctx = Vec::with_capacity(self.nodes.len());
        let mut pending: Vec<ValueType> = vec![root];
        for n in &self.nodes {
            let c = pending.pop().expect("well-formed tree");
            ctx.push(c);
            if let Node::Op(op) = n {
                for _ in 0..op.arity() {
                    pending.push(op.child_type());
                }
            }
        }
        ctx
    }

    /// Checks typing against a root context.
    pub fn well_typed(&self, root: ValueType) -> bool {
        self.node_contexts(root).iter().zip(&self.nodes).all(|(c, n)| n.admissible_in(*c))
    }

    pub fn max_var(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Var(i) => Some(*i),
                _ => None,
            })
            .max()
    }

    /// Returns a copy with `nodes[start..end]` replaced by `replacement`.
    pub fn splice(&self, start: usize, end: usize, replacement: &[Node]) -> FeatureTree {
        let mut nodes = Vec::with_capacity(self.nodes.len() - (end - start) + replacement.len());
        nodes.extend_from_slice(&self.nodes[..start]);
        nodes.extend_from_slice(replacement);
        nodes.extend_from_slice(&self.nodes[end..]);
        FeatureTree { nodes }
    }

    pub(crate) fn from_nodes_unchecked(nodes: Vec<Node>) -> FeatureTree {
        FeatureTree { nodes }
    }

    /// Evaluates the tree on every row of `x`.
    pub fn eval(&self, x: &Matrix) -> Result<Vec<f64>> {
        if let Some(m) = self.max_var() {
            if m >= x.cols() {
                return Err(FewError::Structural(format!(
                    "variable x{m} out of range for {} attributes",
                    x.cols()
                )));
            }
        }
        let n = x.rows();
        let mut stack: Vec<Vec<f64>> = Vec::new();
        for node in self.nodes.iter().rev() {
            match *node {
                Node::Var(j) => stack.push((0..n).map(|i| x.get(i, j)).collect()),
                Node::Const(c) => stack.push(vec![c; n]),
                Node::Op(op) => {
                    if op.arity() == 1 {
                        let mut a = stack.pop().expect("well-formed tree");
                        for v in a.iter_mut() {
                            *v = op.apply_unary(*v);
                        }
                        stack.push(a);
                    } else {
                        // pre-order reversed: first child is on top
                        let mut a = stack.pop().expect("well-formed tree");
                        let b = stack.pop().expect("well-formed tree");
                        for (va, vb) in a.iter_mut().zip(&b) {
                            *va = op.apply_binary(*va, *vb);
                        }
                        stack.push(a);
                    }
                }
            }
        }
        Ok(stack.pop().expect("non-empty tree"))
    }

    /// Evaluates on a single attribute vector.
    pub fn eval_row(&self, row: &[f64]) -> Result<f64> {
        let m = Matrix::from_vec(1, row.len(), row.to_vec());
        Ok(self.eval(&m)?[0])
    }

    /// Prefix s-expression, e.g. `(xor x18 x19)`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut closers: Vec<usize> = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            match n {
                Node::Op(op) => {
                    out.push('(');
                    out.push_str(op.symbol());
                    closers.push(op.arity());
                    continue;
                }
                Node::Var(j) => {
                    out.push('x');
                    out.push_str(&j.to_string());
                }
                Node::Const(c) => out.push_str(&format!("{c:?}")),
            }
            // a leaf completes one child slot; close finished operators
            while let Some(rem) = closers.last_mut() {
                *rem -= 1;
                if *rem == 0 {
                    out.push(')');
                    closers.pop();
                } else {
                    break;
                }
            }
        }
        out
    }
}

impl fmt::Display for FeatureTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub fn tree_to_text(tree: &FeatureTree) -> String {
    tree.to_text()
}

/// Parses a prefix s-expression over `d` attributes.
pub fn parse_tree(text: &str, d: usize) -> Result<FeatureTree> {
    let mut p = Parser { src: text, pos: 0, d, nodes: Vec::new() };
    p.skip_ws();
    p.expr()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(FeatureTree { nodes: p.nodes })
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    d: usize,
    nodes: Vec<Node>,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> FewError {
        FewError::Parse { position: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> &str {
        let start = self.pos;
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() || c == '(' || c == ')' {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.src[start..self.pos]
    }

    fn expr(&mut self) -> Result<()> {
        self.skip_ws();
        match self.src[self.pos..].chars().next() {
            None => Err(self.error("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                self.skip_ws();
                let sym_pos = self.pos;
                let sym = self.token().to_string();
                let op = Op::from_symbol(&sym).ok_or_else(|| FewError::Parse {
                    position: sym_pos,
                    message: format!("unknown symbol `{sym}`"),
                })?;
                self.nodes.push(Node::Op(op));
                for _ in 0..op.arity() {
                    self.skip_ws();
                    if self.src[self.pos..].starts_with(')') {
                        return Err(self.error(&format!("`{sym}` expects {} arguments", op.arity())));
                    }
                    self.expr()?;
                }
                self.skip_ws();
                if self.src[self.pos..].starts_with(')') {
                    self.pos += 1;
                    Ok(())
                } else {
                    Err(self.error(&format!("expected `)` closing `{sym}`")))
                }
            }
            Some(')') => Err(self.error("unexpected `)`")),
            Some(_) => {
                let start = self.pos;
                let tok = self.token().to_string();
                if let Some(idx) = tok.strip_prefix('x') {
                    let j: usize = idx.parse().map_err(|_| FewError::Parse {
                        position: start,
                        message: format!("bad variable `{tok}`"),
                    })?;
                    if j >= self.d {
                        return Err(FewError::Parse {
                            position: start,
                            message: format!("variable x{j} out of range for {} attributes", self.d),
                        });
                    }
                    self.nodes.push(Node::Var(j));
                } else {
                    let c: f64 = tok.parse().map_err(|_| FewError::Parse {
                        position: start,
                        message: format!("unknown atom `{tok}`"),
                    })?;
                    if !c.is_finite() {
                        return Err(FewError::Parse { position: start, message: "non-finite constant".into() });
                    }
                    self.nodes.push(Node::Const(c));
                }
                Ok(())
            }
        }
    }
}

/// Draws a random leaf admissible in `ctx`.
pub fn random_leaf<R: Rng + ?Sized>(ctx: ValueType, d: usize, rng: &mut R) -> Node {
    if ctx == ValueType::Float && rng.gen_bool(CONST_LEAF_PROB) {
        Node::Const(rng.gen_range(-1.0..=1.0))
    } else {
        Node::Var(rng.gen_range(0..d))
    }
}

fn ops_for(ctx: ValueType) -> &'static [Op] {
    match ctx {
        ValueType::Float => FLOAT_OPS,
        ValueType::Bool => BOOL_OPS,
    }
}

/// Grow-method tree: the root is an operator whenever `max_depth >= 2`;
/// other positions above the limit become leaves with probability 0.3.
pub fn random_tree<R: Rng + ?Sized>(max_depth: usize, output_type: ValueType, d: usize, rng: &mut R) -> FeatureTree {
    assert!(max_depth >= 1 && d >= 1, "random_tree needs max_depth >= 1 and d >= 1");
    let mut nodes = Vec::new();
    grow(&mut nodes, max_depth, output_type, d, true, rng);
    FeatureTree { nodes }
}

/// Appends a random subtree of height at most `budget` for context `ctx`.
pub(crate) fn grow<R: Rng + ?Sized>(
    nodes: &mut Vec<Node>,
    budget: usize,
    ctx: ValueType,
    d: usize,
    is_root: bool,
    rng: &mut R,
) {
    if budget <= 1 || (!is_root && rng.gen_bool(GROW_LEAF_PROB)) {
        nodes.push(random_leaf(ctx, d, rng));
        return;
    }
    let ops = ops_for(ctx);
    let op = ops[rng.gen_range(0..ops.len())];
    nodes.push(Node::Op(op));
    for _ in 0..op.arity() {
        grow(nodes, budget - 1, op.child_type(), d, false, rng);
    }
}

/// Evaluates a set of trees into an N×P feature matrix.
pub fn eval_features(trees: &[FeatureTree], x: &Matrix) -> Result<Matrix> {
    use rayon::prelude::*;
    let cols: Vec<Vec<f64>> = trees.par_iter().map(|t| t.eval(x)).collect::<Result<_>>()?;
    if cols.is_empty() {
        return Ok(Matrix::zeros(x.rows(), 0));
    }
    Ok(Matrix::from_columns(&cols))
}
