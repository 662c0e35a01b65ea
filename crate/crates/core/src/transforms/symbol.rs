use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{FockError, Result};

type Evaluator = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// A symbol `f: ℂ → ℂ` together with what the quadrature needs to know about
/// it: whether it is radial or real valued, and the origin-centred circles
/// `|w| = R` across which it jumps.
#[derive(Clone)]
pub struct SymbolFunction {
    eval: Evaluator,
    name: String,
    radial: bool,
    real_valued: bool,
    jump_circles: Vec<f64>,
}

impl fmt::Debug for SymbolFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolFunction")
            .field("name", &self.name)
            .field("radial", &self.radial)
            .field("real_valued", &self.real_valued)
            .field("jump_circles", &self.jump_circles)
            .finish()
    }
}

impl fmt::Display for SymbolFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

impl SymbolFunction {
    /// A general (non-radial, complex valued) symbol.
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(f),
            name: name.into(),
            radial: false,
            real_valued: false,
            jump_circles: Vec::new(),
        }
    }

    /// A real-valued symbol.
    pub fn real<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(Complex64) -> f64 + Send + Sync + 'static,
    {
        let mut s = Self::new(name, move |z| real(f(z)));
        s.real_valued = true;
        s
    }

    /// A real-valued radial symbol `f(|z|)`.
    pub fn radial<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mut s = Self::real(name, move |z| f(z.norm()));
        s.radial = true;
        s
    }

    pub fn constant(c: f64) -> Self {
        Self::radial(format!("const:{c}"), move |_| c)
    }

    /// `χ_{|w| < R}`.
    pub fn indicator_inside(r: f64) -> Self {
        Self::radial(format!("indicator_inside:{r}"), move |m| if m < r { 1.0 } else { 0.0 }).with_jump(r)
    }

    /// `χ_{|w| ≥ R}`.
    pub fn indicator_outside(r: f64) -> Self {
        Self::radial(format!("indicator_outside:{r}"), move |m| if m >= r { 1.0 } else { 0.0 }).with_jump(r)
    }

    /// Records a jump across the circle `|w| = r`.
    pub fn with_jump(mut self, r: f64) -> Self {
        if r > 0.0 && !self.jump_circles.contains(&r) {
            self.jump_circles.push(r);
            self.jump_circles.sort_by(f64::total_cmp);
        }
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Marks the symbol radial after checking it at 8 angles on 5 radii.
    pub fn assert_radial(mut self) -> Result<Self> {
        if !self.looks_radial() {
            return Err(FockError::SymbolSpec(format!("`{}` is not radial", self.name)));
        }
        self.radial = true;
        Ok(self)
    }

    /// Spot check: `f` agrees at 8 angles on each of 5 radii.
    pub fn looks_radial(&self) -> bool {
        [0.3, 0.9, 1.7, 2.6, 4.1].iter().all(|&r| {
            let base = self.eval(real(r));
            (1..8).all(|j| {
                let v = self.eval(Complex64::from_polar(r, j as f64 * std::f64::consts::PI / 4.0 + 0.1));
                (v - base).norm() <= 1e-12 * (1.0 + base.norm())
            })
        })
    }

    #[inline]
    pub fn eval(&self, z: Complex64) -> Complex64 {
        (self.eval)(z)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_radial(&self) -> bool {
        self.radial
    }

    pub fn is_real_valued(&self) -> bool {
        self.real_valued
    }

    pub fn jump_circles(&self) -> &[f64] {
        &self.jump_circles
    }

    fn merged_jumps(&self, other: &Self) -> Vec<f64> {
        let mut all: Vec<f64> = self.jump_circles.iter().chain(&other.jump_circles).copied().collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }

    pub fn add(&self, other: &Self) -> Self {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Self {
            eval: Arc::new(move |z| a(z) + b(z)),
            name: format!("{}+{}", self.name, other.name),
            radial: self.radial && other.radial,
            real_valued: self.real_valued && other.real_valued,
            jump_circles: self.merged_jumps(other),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Self {
            eval: Arc::new(move |z| a(z) * b(z)),
            name: format!("{}*{}", self.name, other.name),
            radial: self.radial && other.radial,
            real_valued: self.real_valued && other.real_valued,
            jump_circles: self.merged_jumps(other),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let a = self.eval.clone();
        Self {
            eval: Arc::new(move |z| c * a(z)),
            name: format!("{c}*{}", self.name),
            radial: self.radial,
            real_valued: self.real_valued && c.im == 0.0,
            jump_circles: self.jump_circles.clone(),
        }
    }

    /// `z ↦ conj(f(z))`.
    pub fn conj(&self) -> Self {
        let a = self.eval.clone();
        Self {
            eval: Arc::new(move |z| a(z).conj()),
            name: format!("conj({})", self.name),
            ..self.clone()
        }
    }

    /// Radii (about `center`) where the ring integrals cross a jump circle.
    pub fn radial_breaks_about(&self, center: Complex64) -> Vec<f64> {
        let a = center.norm();
        let mut out = Vec::new();
        for &r in &self.jump_circles {
            out.push((r - a).abs());
            out.push(r + a);
        }
        out
    }

    /// Angles in `[0, 2π)` where the ring `|w − center| = s` crosses a jump
    /// circle `|w| = R`: `|center + s e^{iθ}| = R` gives
    /// `cos(θ − arg center) = (R² − a² − s²) / (2as)`.
    pub fn angle_breaks_about(&self, center: Complex64, s: f64) -> Vec<f64> {
        let a = center.norm();
        if a == 0.0 || s == 0.0 {
            return Vec::new();
        }
        let alpha = center.arg();
        let tau = std::f64::consts::TAU;
        let mut out = Vec::new();
        for &r in &self.jump_circles {
            let c = (r * r - a * a - s * s) / (2.0 * a * s);
            if c.abs() < 1.0 {
                let d = c.acos();
                for t in [alpha + d, alpha - d] {
                    out.push(t.rem_euclid(tau));
                }
            }
        }
        out
    }

    /// Parses a symbol expression; see [`parse_symbol`].
    pub fn parse(text: &str) -> Result<Self> {
        parse_symbol(text)
    }
}

fn atom(name: &str, arg: Option<f64>) -> Result<SymbolFunction> {
    let need = |what: &str| -> Result<f64> {
        arg.ok_or_else(|| FockError::SymbolSpec(format!("`{name}` needs a numeric argument ({what})")))
    };
    let no_arg = || -> Result<()> {
        match arg {
            Some(_) => Err(FockError::SymbolSpec(format!("`{name}` takes no argument"))),
            None => Ok(()),
        }
    };
    let s = match name {
        "const" => SymbolFunction::constant(need("the constant")?),
        "indicator_inside" | "indicator_outside" => {
            let r = need("the radius")?;
            if !(r > 0.0) {
                return Err(FockError::SymbolSpec(format!("`{name}` radius must be positive, got {r}")));
            }
            if name == "indicator_inside" {
                SymbolFunction::indicator_inside(r)
            } else {
                SymbolFunction::indicator_outside(r)
            }
        }
        "sin_re" => {
            no_arg()?;
            SymbolFunction::real("sin_re", |z| z.re.sin())
        }
        "sin_re_decay" => {
            no_arg()?;
            SymbolFunction::real("sin_re_decay", |z| z.re.sin() / (1.0 + z.norm()))
        }
        "sin_log_abs" => {
            no_arg()?;
            SymbolFunction::radial("sin_log_abs", |r| r.ln_1p().sin())
        }
        "sin_abs" => {
            no_arg()?;
            SymbolFunction::radial("sin_abs", f64::sin)
        }
        "arctan_re" => {
            no_arg()?;
            SymbolFunction::real("arctan_re", |z| (z.re / (1.0 + z.norm())).atan())
        }
        "abs_sq" => {
            no_arg()?;
            SymbolFunction::radial("abs_sq", |r| r * r)
        }
        "abs" => {
            no_arg()?;
            SymbolFunction::radial("abs", |r| r)
        }
        "re" => {
            no_arg()?;
            SymbolFunction::real("re", |z| z.re)
        }
        "im" => {
            no_arg()?;
            SymbolFunction::real("im", |z| z.im)
        }
        "z" => {
            no_arg()?;
            SymbolFunction::new("z", |z| z)
        }
        "conj_z" => {
            no_arg()?;
            SymbolFunction::new("conj_z", |z| z.conj())
        }
        other => return Err(FockError::SymbolSpec(format!("unknown symbol `{other}`"))),
    };
    Ok(s)
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().find(|c| !c.is_whitespace())
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.text[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn error(&self, msg: &str) -> FockError {
        FockError::SymbolSpec(format!("{msg} at offset {} in `{}`", self.pos, self.text))
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let bytes = rest.as_bytes();
        let mut end = 0;
        if end < bytes.len() && (bytes[end] == b'-' || bytes[end] == b'+') {
            end += 1;
        }
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
            end += 1;
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut k = end + 1;
            if k < bytes.len() && (bytes[k] == b'-' || bytes[k] == b'+') {
                k += 1;
            }
            if k < bytes.len() && bytes[k].is_ascii_digit() {
                while k < bytes.len() && bytes[k].is_ascii_digit() {
                    k += 1;
                }
                end = k;
            }
        }
        let value: f64 = rest[..end].parse().map_err(|_| self.error("expected a number"))?;
        self.pos += end;
        Ok(value)
    }

    fn factor(&mut self) -> Result<SymbolFunction> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == '.' => Ok(SymbolFunction::constant(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let rest = &self.text[self.pos..];
                let len = rest.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(rest.len());
                let name = &rest[..len];
                self.pos += len;
                if name == "file" {
                    return Err(self.error("`file:` must be the whole expression"));
                }
                let arg = if self.text[self.pos..].starts_with(':') {
                    self.pos += 1;
                    Some(self.number()?)
                } else {
                    None
                };
                atom(name, arg)
            }
            _ => Err(self.error("expected a number or a symbol name")),
        }
    }

    fn term(&mut self) -> Result<SymbolFunction> {
        let mut acc = self.factor()?;
        while self.peek() == Some('*') {
            self.skip_ws();
            self.pos += 1;
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn expr(&mut self) -> Result<SymbolFunction> {
        let mut negate = false;
        if self.peek() == Some('-') {
            self.skip_ws();
            self.pos += 1;
            negate = true;
        }
        let mut acc = self.term()?;
        if negate {
            acc = acc.scale(real(-1.0));
        }
        while let Some(op) = self.peek().filter(|c| *c == '+' || *c == '-') {
            self.skip_ws();
            self.pos += 1;
            let t = self.term()?;
            acc = if op == '+' { acc.add(&t) } else { acc.add(&t.scale(real(-1.0))) };
        }
        self.skip_ws();
        if self.pos != self.text.len() {
            return Err(self.error("unexpected trailing input"));
        }
        Ok(acc)
    }
}

/// Parses a symbol expression.
///
/// The grammar is a sum of products of numbers and named atoms, e.g.
/// `2+sin_log_abs`, `0.5*indicator_outside:1 - const:0.25`, `sin_re*sin_abs`.
/// Atoms: `const:c`, `indicator_inside:R`, `indicator_outside:R`, `sin_re`,
/// `sin_re_decay` (`sin(Re w)/(1+|w|)`), `sin_log_abs` (`sin(log(1+|w|))`),
/// `sin_abs`, `arctan_re` (`arctan(Re w/(1+|w|))`), `abs`, `abs_sq`, `re`,
/// `im`, `z`, `conj_z`. `file:<path>` reads the expression from a file.
pub fn parse_symbol(text: &str) -> Result<SymbolFunction> {
    let trimmed = text.trim();
    if let Some(path) = trimmed.strip_prefix("file:") {
        let body = std::fs::read_to_string(Path::new(path.trim()))
            .map_err(|e| FockError::SymbolSpec(format!("cannot read symbol file `{}`: {e}", path.trim())))?;
        if body.trim().starts_with("file:") {
            return Err(FockError::SymbolSpec("symbol files may not reference other files".into()));
        }
        return Ok(parse_symbol(&body)?.renamed(trimmed));
    }
    if trimmed.is_empty() {
        return Err(FockError::SymbolSpec("empty symbol expression".into()));
    }
    let parsed = Parser { text: trimmed, pos: 0 }.expr()?;
    Ok(parsed.renamed(trimmed))
}
