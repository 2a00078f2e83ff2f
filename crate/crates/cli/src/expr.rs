//! Scalar expressions over `x1..xn`, `y1..ym` (and `x`, `y` for the first).

use evalexpr::{
    build_operator_tree, ContextWithMutableFunctions, ContextWithMutableVariables, EvalexprError, Function, HashMapContext, Node, Value,
};

pub struct Expr {
    src: String,
    node: Node,
}

fn unary(f: fn(f64) -> f64) -> Function {
    Function::new(move |arg| Ok(Value::Float(f(arg.as_number()?))))
}

fn context(xs: &[f64], ys: &[f64]) -> Result<HashMapContext, EvalexprError> {
    let mut ctx = HashMapContext::new();
    for (name, f) in [
        ("sin", f64::sin as fn(f64) -> f64),
        ("cos", f64::cos),
        ("tan", f64::tan),
        ("tanh", f64::tanh),
        ("sinh", f64::sinh),
        ("cosh", f64::cosh),
        ("atan", f64::atan),
        ("exp", f64::exp),
        ("ln", f64::ln),
        ("sqrt", f64::sqrt),
        ("abs", f64::abs),
    ] {
        ctx.set_function(name.into(), unary(f))?;
    }
    for (prefix, vals) in [("x", xs), ("y", ys)] {
        for (i, v) in vals.iter().enumerate() {
            ctx.set_value(format!("{prefix}{}", i + 1), Value::Float(*v))?;
        }
        if let Some(v) = vals.first() {
            ctx.set_value(prefix.into(), Value::Float(*v))?;
        }
    }
    Ok(ctx)
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, String> {
        let node = build_operator_tree(src).map_err(|e| format!("`{src}`: {e}"))?;
        Ok(Self { src: src.to_string(), node })
    }

    pub fn try_eval(&self, xs: &[f64], ys: &[f64]) -> Result<f64, String> {
        let ctx = context(xs, ys).map_err(|e| e.to_string())?;
        self.node.eval_number_with_context(&ctx).map_err(|e| format!("`{}`: {e}", self.src))
    }

    /// Evaluate; failures after validation become NaN and surface as non-finite values.
    pub fn eval(&self, xs: &[f64], ys: &[f64]) -> f64 {
        self.try_eval(xs, ys).unwrap_or(f64::NAN)
    }
}
