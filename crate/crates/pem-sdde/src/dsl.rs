//! Expression language and problem-file loader.
//!
//! Expressions are arithmetic over named variables with `+ - * /`, unary
//! minus, integer powers via `^`, parentheses, and the functions `sin`,
//! `cos`, `exp`. Precedence from loosest to tightest: `+ -`, `* /`, unary
//! minus, `^`. Binary operators associate left; `^` requires a nonnegative
//! integer exponent and a chain like `x^2^3` folds right-to-left into one
//! integer, so it parses as `x^8`.
//!
//! Problem files are `key = value` lines. `#` starts a comment and blank
//! lines are skipped. Required keys: `name`, `drift`, `diffusion` (variables
//! `x`, `xd` for the current and delayed state), `history` (variable `t`),
//! `delay`, `horizon`, `q`. Optional keys override the assumption constants
//! derived from `q`: `L`, `eta`, `K1_history`, `beta`, `p`, `K1_khasminskii`.
//! Numeric values accept decimal literals and hex floats like `0x1.8p-1`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, SddeError};
use crate::problem::{AssumptionParams, SddeProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

/// Parsed expression tree. Variables are indices into the variable list the
/// expression was parsed against, in order.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Func(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, env: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => env[*i],
            Expr::Neg(e) => -e.eval(env),
            Expr::Bin(op, l, r) => {
                let (a, b) = (l.eval(env), r.eval(env));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Pow(base, k) => base.eval(env).powi(*k as i32),
            Expr::Func(f, a) => {
                let v = a.eval(env);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                }
            }
        }
    }

    /// Binding strength, tighter is larger. Atoms and function calls never
    /// need parentheses.
    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Func(..) => 5,
            Expr::Pow(..) => 4,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        }
    }

    /// Renders the tree so that reparsing yields the identical tree. Right
    /// children of binary operators are parenthesized at equal precedence
    /// because the parser associates left.
    pub fn format_with(&self, vars: &[&str]) -> String {
        let mut out = String::new();
        self.write_into(vars, &mut out);
        out
    }

    fn write_into(&self, vars: &[&str], out: &mut String) {
        match self {
            Expr::Const(c) => {
                let _ = write!(out, "{c}");
            }
            Expr::Var(i) => out.push_str(vars[*i]),
            Expr::Neg(e) => {
                out.push('-');
                self.write_child(e, e.precedence() < self.precedence(), vars, out);
            }
            Expr::Bin(op, l, r) => {
                let prec = self.precedence();
                self.write_child(l, l.precedence() < prec, vars, out);
                let spaced = matches!(op, BinOp::Add | BinOp::Sub);
                if spaced {
                    out.push(' ');
                }
                out.push(match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                });
                if spaced {
                    out.push(' ');
                }
                self.write_child(r, r.precedence() <= prec, vars, out);
            }
            Expr::Pow(base, k) => {
                self.write_child(base, base.precedence() < 5, vars, out);
                let _ = write!(out, "^{k}");
            }
            Expr::Func(f, a) => {
                out.push_str(match f {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Exp => "exp",
                });
                out.push('(');
                a.write_into(vars, out);
                out.push(')');
            }
        }
    }

    fn write_child(&self, child: &Expr, parens: bool, vars: &[&str], out: &mut String) {
        if parens {
            out.push('(');
        }
        child.write_into(vars, out);
        if parens {
            out.push(')');
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum TokKind<'a> {
    Num { value: f64, raw: &'a str },
    Ident(&'a str),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

#[derive(Clone, Copy, Debug)]
struct Tok<'a> {
    kind: TokKind<'a>,
    offset: usize,
}

fn parse_err(offset: usize, message: impl Into<String>) -> SddeError {
    SddeError::Parse { offset, message: message.into() }
}

fn lex(src: &str) -> Result<Vec<Tok<'_>>> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let b = bytes[pos];
        let kind = match b {
            b' ' | b'\t' | b'\r' | b'\n' => {
                pos += 1;
                continue;
            }
            b'+' => TokKind::Plus,
            b'-' => TokKind::Minus,
            b'*' => TokKind::Star,
            b'/' => TokKind::Slash,
            b'^' => TokKind::Caret,
            b'(' => TokKind::LParen,
            b')' => TokKind::RParen,
            b'0'..=b'9' => {
                let start = pos;
                while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'.' {
                    pos += 1;
                    while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                        pos += 1;
                    }
                }
                if pos < bytes.len() && (bytes[pos] == b'e' || bytes[pos] == b'E') {
                    let mut probe = pos + 1;
                    if probe < bytes.len() && (bytes[probe] == b'+' || bytes[probe] == b'-') {
                        probe += 1;
                    }
                    if probe < bytes.len() && bytes[probe].is_ascii_digit() {
                        pos = probe;
                        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                            pos += 1;
                        }
                    }
                }
                let raw = &src[start..pos];
                let value = raw
                    .parse::<f64>()
                    .map_err(|_| parse_err(start, format!("malformed number `{raw}`")))?;
                toks.push(Tok { kind: TokKind::Num { value, raw }, offset: start });
                continue;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = pos;
                while pos < bytes.len()
                    && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_')
                {
                    pos += 1;
                }
                toks.push(Tok { kind: TokKind::Ident(&src[start..pos]), offset: start });
                continue;
            }
            _ => {
                let ch = src[pos..].chars().next().unwrap();
                return Err(parse_err(pos, format!("unexpected character `{ch}`")));
            }
        };
        toks.push(Tok { kind, offset: pos });
        pos += 1;
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<Tok<'a>>,
    idx: usize,
    vars: &'a [&'a str],
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<TokKind<'a>> {
        self.toks.get(self.idx).map(|t| t.kind)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.idx).map_or(self.end, |t| t.offset)
    }

    fn bump(&mut self) -> Tok<'a> {
        let t = self.toks[self.idx];
        self.idx += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut e = self.term()?;
        loop {
            let op = match self.peek() {
                Some(TokKind::Plus) => BinOp::Add,
                Some(TokKind::Minus) => BinOp::Sub,
                _ => return Ok(e),
            };
            self.bump();
            e = Expr::Bin(op, Box::new(e), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(TokKind::Star) => BinOp::Mul,
                Some(TokKind::Slash) => BinOp::Div,
                _ => return Ok(e),
            };
            self.bump();
            e = Expr::Bin(op, Box::new(e), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(TokKind::Minus)) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(TokKind::Caret)) {
            self.bump();
            let exp = self.exponent_chain()?;
            if exp > i32::MAX as u32 {
                return Err(parse_err(self.offset(), "exponent too large"));
            }
            return Ok(Expr::Pow(Box::new(base), exp));
        }
        Ok(base)
    }

    fn exponent_chain(&mut self) -> Result<u32> {
        let offset = self.offset();
        let raw = match self.peek() {
            Some(TokKind::Num { raw, .. }) if raw.bytes().all(|b| b.is_ascii_digit()) => raw,
            _ => {
                return Err(parse_err(offset, "exponent must be a nonnegative integer literal"))
            }
        };
        self.bump();
        let base: u32 = raw
            .parse()
            .map_err(|_| parse_err(offset, format!("exponent `{raw}` too large")))?;
        if matches!(self.peek(), Some(TokKind::Caret)) {
            self.bump();
            let rhs = self.exponent_chain()?;
            return base
                .checked_pow(rhs)
                .ok_or_else(|| parse_err(offset, format!("exponent `{raw}^{rhs}` overflows")));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let offset = self.offset();
        match self.peek() {
            Some(TokKind::Num { value, .. }) => {
                self.bump();
                Ok(Expr::Const(value))
            }
            Some(TokKind::Ident(name)) => {
                self.bump();
                let func = match name {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    _ => None,
                };
                if let Some(func) = func {
                    if !matches!(self.peek(), Some(TokKind::LParen)) {
                        return Err(parse_err(
                            self.offset(),
                            format!("expected `(` after `{name}`"),
                        ));
                    }
                    self.bump();
                    let arg = self.expr()?;
                    if !matches!(self.peek(), Some(TokKind::RParen)) {
                        return Err(parse_err(self.offset(), "expected `)`"));
                    }
                    self.bump();
                    return Ok(Expr::Func(func, Box::new(arg)));
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(parse_err(offset, format!("unknown identifier `{name}`"))),
                }
            }
            Some(TokKind::LParen) => {
                self.bump();
                let e = self.expr()?;
                if !matches!(self.peek(), Some(TokKind::RParen)) {
                    return Err(parse_err(self.offset(), "expected `)`"));
                }
                self.bump();
                Ok(e)
            }
            _ => Err(parse_err(offset, "expected an expression")),
        }
    }
}

/// Parses one expression over the given variable names. Errors carry the
/// byte offset of the offending token in `src`.
pub fn parse_expr(src: &str, vars: &[&str]) -> Result<Expr> {
    let toks = lex(src)?;
    let mut p = Parser { toks, idx: 0, vars, end: src.len() };
    let e = p.expr()?;
    if p.idx != p.toks.len() {
        return Err(parse_err(p.offset(), "unexpected trailing input"));
    }
    Ok(e)
}

/// Parses a history expression over the single variable `t`.
pub fn parse_history_expr(src: &str) -> Result<Expr> {
    parse_expr(src, &["t"])
}

/// Parses a numeric field value: a decimal literal via the standard float
/// parser, or a hex float of the form `0xH.HHp±D`. `inf` and `nan` are
/// rejected; range checks on the value happen at the field level.
fn parse_number(value: &str, offset: usize) -> Result<f64> {
    let trimmed = value.trim();
    let (sign, body) = match trimmed.as_bytes().first() {
        Some(b'-') => (-1.0, &trimmed[1..]),
        Some(b'+') => (1.0, &trimmed[1..]),
        _ => (1.0, trimmed),
    };
    if body.starts_with("0x") || body.starts_with("0X") {
        return parse_hex_float(&body[2..], offset).map(|v| sign * v);
    }
    let parsed = trimmed
        .parse::<f64>()
        .map_err(|_| parse_err(offset, format!("malformed number `{trimmed}`")))?;
    if !parsed.is_finite() {
        return Err(parse_err(offset, format!("number `{trimmed}` is not finite")));
    }
    Ok(parsed)
}

/// Parses the part of a hex float after `0x`: hex digits, an optional point
/// and fraction, then a mandatory `p` exponent. The mantissa accumulates into
/// a u128 so the single conversion to f64 is the only rounding step.
fn parse_hex_float(body: &str, offset: usize) -> Result<f64> {
    let bad = |msg: &str| parse_err(offset, format!("malformed hex float: {msg}"));
    let bytes = body.as_bytes();
    let mut pos = 0;
    let mut mantissa: u128 = 0;
    let mut digits = 0usize;
    let mut frac_digits = 0usize;
    let mut seen_point = false;
    while pos < bytes.len() {
        let b = bytes[pos];
        if b == b'.' {
            if seen_point {
                return Err(bad("second `.`"));
            }
            seen_point = true;
            pos += 1;
            continue;
        }
        let Some(d) = (b as char).to_digit(16) else { break };
        if mantissa >> 124 != 0 {
            return Err(bad("more than 31 significant digits"));
        }
        mantissa = (mantissa << 4) | d as u128;
        digits += 1;
        if seen_point {
            frac_digits += 1;
        }
        pos += 1;
    }
    if digits == 0 {
        return Err(bad("no digits"));
    }
    if pos >= bytes.len() || (bytes[pos] != b'p' && bytes[pos] != b'P') {
        return Err(bad("missing `p` exponent"));
    }
    pos += 1;
    let exp_str = &body[pos..];
    let exp: i32 = exp_str
        .parse()
        .map_err(|_| bad("bad exponent"))?;
    if !(-20000..=20000).contains(&exp) {
        return Err(bad("exponent out of range"));
    }
    let e = exp - 4 * frac_digits as i32;
    if mantissa == 0 {
        return Ok(0.0);
    }
    let nbits = 128 - mantissa.leading_zeros() as i32;
    if nbits - 1 + e > 1023 {
        return Err(bad("value overflows f64"));
    }
    let value = if nbits <= 53 {
        // Exact mantissa: one multiply performs the only rounding. Split the
        // scale when 2^e itself is not representable; below 2^-1075 the
        // correctly rounded value is zero.
        let m = mantissa as f64;
        if e >= -1074 {
            m * pow2(e)
        } else if e >= -1611 {
            (m * pow2(-537)) * pow2(e + 537)
        } else {
            0.0
        }
    } else {
        // Round the integer mantissa to 53 bits by hand (ties to even), then
        // scale exactly. Results outside the normal range would need a second
        // rounding, so refuse them.
        let excess = nbits - 53;
        let kept = (mantissa >> excess) as u64;
        let rem = mantissa & ((1u128 << excess) - 1);
        let half = 1u128 << (excess - 1);
        let round_up = rem > half || (rem == half && kept & 1 == 1);
        let mut kept = kept + round_up as u64;
        let mut k = e + excess;
        if kept == 1 << 53 {
            kept >>= 1;
            k += 1;
        }
        if !(-1074..=971).contains(&k) {
            return Err(bad("value outside the normal f64 range"));
        }
        kept as f64 * pow2(k)
    };
    if value.is_infinite() {
        return Err(bad("value overflows f64"));
    }
    Ok(value)
}

/// 2^k for k in [-1074, 1023], exact.
fn pow2(k: i32) -> f64 {
    debug_assert!((-1074..=1023).contains(&k));
    (k as f64).exp2()
}

/// A problem file after parsing, before the expressions are bound into
/// callable coefficients.
#[derive(Clone, Debug)]
pub struct ProblemFile {
    pub name: String,
    pub drift: Expr,
    pub diffusion: Expr,
    pub history: Expr,
    pub delay: f64,
    pub horizon: f64,
    pub q: f64,
    pub monotonicity_const: Option<f64>,
    pub monotonicity_eta: Option<f64>,
    pub history_holder_const: Option<f64>,
    pub history_holder_exponent: Option<f64>,
    pub khasminskii_p: Option<f64>,
    pub khasminskii_const: Option<f64>,
}

impl ProblemFile {
    /// Binds the parsed expressions into a runnable scalar problem.
    pub fn into_problem(self) -> Result<SddeProblem> {
        let mut assumptions = AssumptionParams::new(self.q);
        assumptions.monotonicity_const = self.monotonicity_const;
        assumptions.monotonicity_eta = self.monotonicity_eta;
        assumptions.history_holder_const = self.history_holder_const;
        assumptions.history_holder_exponent = self.history_holder_exponent;
        assumptions.khasminskii_p = self.khasminskii_p;
        assumptions.khasminskii_const = self.khasminskii_const;
        let drift = self.drift;
        let diffusion = self.diffusion;
        let history = self.history;
        SddeProblem::scalar(
            &self.name,
            self.delay,
            self.horizon,
            move |x, xd| drift.eval(&[x, xd]),
            move |x, xd| diffusion.eval(&[x, xd]),
            move |t| history.eval(&[t]),
            assumptions,
        )
    }
}

struct RawField<'a> {
    value: &'a str,
    value_offset: usize,
}

const KNOWN_KEYS: [&str; 13] = [
    "name",
    "drift",
    "diffusion",
    "history",
    "delay",
    "horizon",
    "q",
    "L",
    "eta",
    "K1_history",
    "beta",
    "p",
    "K1_khasminskii",
];

/// Parses problem-file text. Every key may appear once; unknown keys are
/// errors. Parse errors carry byte offsets into `src`, including errors
/// inside expression values.
pub fn parse_problem_file(src: &str) -> Result<ProblemFile> {
    let mut fields: Vec<(&str, RawField)> = Vec::new();
    let mut line_start = 0;
    for line in src.split_inclusive('\n') {
        let offset = line_start;
        line_start += line.len();
        let content = match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        };
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(parse_err(
                offset + (content.len() - content.trim_start().len()),
                "expected `key = value`",
            ));
        };
        let key = content[..eq].trim();
        let key_offset = offset + (content[..eq].len() - content[..eq].trim_start().len());
        if key.is_empty() {
            return Err(parse_err(offset + eq, "missing key before `=`"));
        }
        if !KNOWN_KEYS.contains(&key) {
            return Err(parse_err(key_offset, format!("unknown key `{key}`")));
        }
        if fields.iter().any(|(k, _)| *k == key) {
            return Err(parse_err(key_offset, format!("duplicate key `{key}`")));
        }
        let rest = &content[eq + 1..];
        let value = rest.trim();
        if value.is_empty() {
            return Err(parse_err(offset + eq + 1, format!("empty value for `{key}`")));
        }
        let value_offset = offset + eq + 1 + (rest.len() - rest.trim_start().len());
        fields.push((key, RawField { value, value_offset }));
    }

    let take = |key: &str| -> Option<&RawField> {
        fields.iter().find(|(k, _)| *k == key).map(|(_, f)| f)
    };
    let required = |key: &'static str| -> Result<&RawField> {
        take(key).ok_or_else(|| SddeError::MissingKey(key.to_string()))
    };

    // Rebases an expression error from value-local offsets onto the file.
    let expr_field = |field: &RawField, vars: &[&str]| -> Result<Expr> {
        parse_expr(field.value, vars).map_err(|e| match e {
            SddeError::Parse { offset, message } => SddeError::Parse {
                offset: field.value_offset + offset,
                message,
            },
            other => other,
        })
    };
    let num_field = |field: &RawField| parse_number(field.value, field.value_offset);

    let file = ProblemFile {
        name: required("name")?.value.to_string(),
        drift: expr_field(required("drift")?, &["x", "xd"])?,
        diffusion: expr_field(required("diffusion")?, &["x", "xd"])?,
        history: expr_field(required("history")?, &["t"])?,
        delay: num_field(required("delay")?)?,
        horizon: num_field(required("horizon")?)?,
        q: num_field(required("q")?)?,
        monotonicity_const: take("L").map(num_field).transpose()?,
        monotonicity_eta: take("eta").map(num_field).transpose()?,
        history_holder_const: take("K1_history").map(num_field).transpose()?,
        history_holder_exponent: take("beta").map(num_field).transpose()?,
        khasminskii_p: take("p").map(num_field).transpose()?,
        khasminskii_const: take("K1_khasminskii").map(num_field).transpose()?,
    };
    Ok(file)
}

/// Reads and binds a problem file from disk.
pub fn load_problem<P: AsRef<Path>>(path: P) -> Result<SddeProblem> {
    let src = std::fs::read_to_string(path)?;
    parse_problem_file(&src)?.into_problem()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Expr {
        parse_expr(src, &["x", "xd"]).unwrap()
    }

    fn offset_of(err: SddeError) -> usize {
        match err {
            SddeError::Parse { offset, .. } => offset,
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn arithmetic_evaluates_exactly() {
        assert_eq!(parse("x + xd").eval(&[2.0, 3.0]), 5.0);
        assert_eq!(parse("2 + 3 * 4^2").eval(&[0.0, 0.0]), 50.0);
        assert_eq!(parse("3/2/2").eval(&[0.0, 0.0]), 0.75);
        assert_eq!(parse("10/4").eval(&[0.0, 0.0]), 2.5);
        assert_eq!(parse("-x^2").eval(&[3.0, 0.0]), -9.0);
        assert_eq!(parse("(-x)^2").eval(&[3.0, 0.0]), 9.0);
        assert_eq!(parse("x^2^3").eval(&[2.0, 0.0]), 256.0);
        assert_eq!(parse("2e-3").eval(&[0.0, 0.0]), 0.002);
        let e = parse("-2*x + xd - x^5");
        let (x, xd) = (1.5, 0.25);
        assert_eq!(e.eval(&[x, xd]).to_bits(), (-2.0 * x + xd - x.powi(5)).to_bits());
        let h = parse_history_expr("cos(t)").unwrap();
        assert_eq!(h.eval(&[0.3]).to_bits(), 0.3f64.cos().to_bits());
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        assert_eq!(
            parse("-x^2"),
            Expr::Neg(Box::new(Expr::Pow(Box::new(Expr::Var(0)), 2)))
        );
        assert_eq!(
            parse("-2*x"),
            Expr::Bin(
                BinOp::Mul,
                Box::new(Expr::Neg(Box::new(Expr::Const(2.0)))),
                Box::new(Expr::Var(0))
            )
        );
    }

    #[test]
    fn exponent_chains_fold_at_parse_time() {
        assert_eq!(parse("x^2^3"), Expr::Pow(Box::new(Expr::Var(0)), 8));
        assert!(matches!(
            parse_expr("x^4^16", &["x"]),
            Err(SddeError::Parse { .. })
        ));
        assert!(parse_expr("x^99999999999", &["x"]).is_err());
        assert!(parse_expr("x^-2", &["x"]).is_err());
        assert!(parse_expr("x^(2)", &["x"]).is_err());
        assert!(parse_expr("x^2.5", &["x"]).is_err());
    }

    #[test]
    fn errors_carry_byte_offsets() {
        assert_eq!(offset_of(parse_expr("x +", &["x"]).unwrap_err()), 3);
        assert_eq!(offset_of(parse_expr("x $ y", &["x", "y"]).unwrap_err()), 2);
        assert_eq!(offset_of(parse_expr("z + 1", &["x"]).unwrap_err()), 0);
        assert_eq!(offset_of(parse_expr("sin x", &["x"]).unwrap_err()), 4);
        assert_eq!(offset_of(parse_expr("x ^ y", &["x", "y"]).unwrap_err()), 4);
        assert_eq!(offset_of(parse_expr("(x + 1", &["x"]).unwrap_err()), 6);
        assert_eq!(offset_of(parse_expr("x 1", &["x"]).unwrap_err()), 2);
    }

    #[test]
    fn printing_then_parsing_preserves_the_tree() {
        let vars = ["x", "xd"];
        let sources = [
            "x",
            "-x",
            "--x",
            "x + xd",
            "x - xd - 1",
            "x - (xd - 1)",
            "x*xd/2",
            "x/(xd*2)",
            "-2*x + xd - x^5",
            "x^2 + xd^2",
            "-x^2",
            "(-x)^2",
            "-(x*xd)",
            "sin(x)*cos(xd) + exp(-x)",
            "x^0",
            "x^1",
            "2^3",
            "(x + 1)^2",
            "1.5e3*x - 0.25",
            "sin(x + cos(xd^3))",
        ];
        for src in sources {
            let tree = parse_expr(src, &vars).unwrap();
            let printed = tree.format_with(&vars);
            let reparsed = parse_expr(&printed, &vars)
                .unwrap_or_else(|e| panic!("printed form `{printed}` of `{src}`: {e:?}"));
            assert_eq!(reparsed, tree, "source `{src}` printed as `{printed}`");
        }
    }

    #[test]
    fn hex_floats_parse_with_correct_rounding() {
        let num = |s: &str| parse_number(s, 0).unwrap();
        assert_eq!(num("0x1.8p1"), 3.0);
        assert_eq!(num("0x1.8p-1"), 0.75);
        assert_eq!(num("0xAp0"), 10.0);
        assert_eq!(num("-0x1p0"), -1.0);
        assert_eq!(num("0x1p-1074"), f64::from_bits(1));
        assert_eq!(num("0x1p-13"), 2.0f64.powi(-13));
        // 1 + 2^-53 ties to even, down to 1; 1 + 3 * 2^-53 ties up.
        assert_eq!(num("0x1.00000000000008p0"), 1.0);
        assert_eq!(num("0x1.00000000000018p0"), 1.0 + 2.0f64.powi(-51));
        assert_eq!(num("0x0p0"), 0.0);
        assert!(parse_number("0x1p2000", 0).is_err());
        assert!(parse_number("0x1x", 0).is_err());
        assert!(parse_number("0xp3", 0).is_err());
    }

    #[test]
    fn decimal_numbers_reject_junk() {
        assert_eq!(parse_number("2.5", 0).unwrap(), 2.5);
        assert_eq!(parse_number("-1", 0).unwrap(), -1.0);
        assert_eq!(parse_number("1e-3", 7).unwrap(), 0.001);
        assert!(parse_number("inf", 0).is_err());
        assert!(parse_number("nan", 0).is_err());
        assert!(parse_number("1.2.3", 0).is_err());
        assert!(parse_number("", 0).is_err());
    }

    const EXAMPLE_FILE: &str = "\
# Scalar test problem.
name = example1-file
drift = -2*x + xd - x^5
diffusion = x^2
history = cos(t)
delay = 1
horizon = 2
q = 5
p = 30
";

    #[test]
    fn problem_files_parse_and_bind() {
        let file = parse_problem_file(EXAMPLE_FILE).unwrap();
        assert_eq!(file.name, "example1-file");
        assert_eq!(file.delay, 1.0);
        assert_eq!(file.q, 5.0);
        assert_eq!(file.khasminskii_p, Some(30.0));
        assert_eq!(file.monotonicity_eta, None);
        let problem = file.into_problem().unwrap();
        assert_eq!(problem.dim_state(), 1);
        assert_eq!(problem.assumptions().khasminskii_p, Some(30.0));
        let mut out = [0.0];
        problem.drift_into(&[1.5], &[0.25], &mut out);
        assert_eq!(out[0].to_bits(), (-2.0 * 1.5 + 0.25 - 1.5f64.powi(5)).to_bits());
    }

    #[test]
    fn file_errors_are_located_and_specific() {
        let dup = "name = a\nname = b\ndrift = x\n";
        let err = parse_problem_file(dup).unwrap_err();
        assert_eq!(offset_of(err), 9);

        let unknown = "name = a\nwobble = 3\n";
        match parse_problem_file(unknown).unwrap_err() {
            SddeError::Parse { offset, message } => {
                assert_eq!(offset, 9);
                assert!(message.contains("wobble"));
            }
            other => panic!("unexpected {other:?}"),
        }

        let missing = EXAMPLE_FILE.replace("q = 5\n", "");
        match parse_problem_file(&missing).unwrap_err() {
            SddeError::MissingKey(k) => assert_eq!(k, "q"),
            other => panic!("unexpected {other:?}"),
        }

        // The drift value starts at offset 8 + 8 = 16 on its line; the error
        // inside the expression lands at the file offset of the `$`.
        let bad_expr = "name = a\ndrift = x + $\n";
        let err = parse_problem_file(bad_expr).unwrap_err();
        assert_eq!(offset_of(err), bad_expr.find('$').unwrap());

        let no_value = "name = a\ndrift =\n";
        assert!(parse_problem_file(no_value).is_err());

        let no_eq = "name = a\ndrift x\n";
        assert!(parse_problem_file(no_eq).is_err());
    }

    #[test]
    fn invalid_field_values_fail_at_binding() {
        let negative_delay = EXAMPLE_FILE.replace("delay = 1", "delay = -1");
        let file = parse_problem_file(&negative_delay).unwrap();
        assert!(file.into_problem().is_err());

        let bad_q = EXAMPLE_FILE.replace("q = 5", "q = 1");
        assert!(parse_problem_file(&bad_q).unwrap().into_problem().is_err());
    }

    #[test]
    fn comments_and_hex_values_are_accepted() {
        let src = "\
name = hexy # trailing comment
drift = x   # another
diffusion = 0
history = 1
delay = 0x1p0
horizon = 0x1.8p1
q = 2
";
        let file = parse_problem_file(src).unwrap();
        assert_eq!(file.name, "hexy");
        assert_eq!(file.delay, 1.0);
        assert_eq!(file.horizon, 3.0);
    }
}
