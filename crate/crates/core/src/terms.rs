//! First-order terms over a ranked signature: parsing, matching,
//! substitution, unification and standardization.
//!
//! Node paths in this module are vertex addresses only (sequences of
//! 1-based child indices); edge-tagged positions live in [`crate::geometry`].

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// A vertex address: sequence of 1-based child indices. Empty = root.
pub type Path = Vec<usize>;

/// Renders a path as `eps` or `1.2`.
pub fn format_path(path: &[usize]) -> String {
    if path.is_empty() {
        "eps".to_string()
    } else {
        path.iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(".")
    }
}

/// Parses `eps` or dot-separated 1-based indices such as `1.2`.
pub fn parse_path(text: &str) -> Result<Path, TermError> {
    let text = text.trim();
    if text == "eps" || text.is_empty() {
        return Ok(Vec::new());
    }
    text.split('.')
        .map(|part| {
            part.parse::<usize>()
                .ok()
                .filter(|&i| i >= 1)
                .ok_or_else(|| TermError::BadPath {
                    text: text.to_string(),
                })
        })
        .collect()
}

/// Errors for term construction, parsing and traversal.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("arity mismatch for symbol '{symbol}': declared {expected}, used with {found}")]
    ArityMismatch {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("pattern is not linear: variable '{variable}' occurs more than once")]
    NonLinearPattern { variable: String },
    #[error("term is not linear: variable '{variable}' occurs more than once")]
    NonLinearTerm { variable: String },
    #[error("path {} does not address a node of the term", format_path(.path))]
    PathOutOfRange { path: Path },
    #[error("undeclared variable '{name}': identifiers of the form x<digits> are reserved for variables and must be declared")]
    UndeclaredVariable { name: String },
    #[error("malformed path '{text}'")]
    BadPath { text: String },
}

/// A first-order variable. Standard variables are `x1, x2, …`; names with a
/// trailing decimal index (no leading zero) split into base and index so that
/// standard variables order numerically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable {
    base: String,
    index: Option<u64>,
}

impl Variable {
    /// Builds a variable from its display name, splitting a trailing index.
    pub fn from_name(name: &str) -> Variable {
        let digits = name.len() - name.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        if digits > 0 && digits < name.len() {
            let (base, tail) = name.split_at(name.len() - digits);
            // Leading zeros would not round-trip through display; keep as base.
            if !tail.starts_with('0') {
                if let Ok(index) = tail.parse::<u64>() {
                    return Variable {
                        base: base.to_string(),
                        index: Some(index),
                    };
                }
            }
        }
        Variable {
            base: name.to_string(),
            index: None,
        }
    }

    /// The i-th standard variable `xi` (1-based).
    pub fn standard(i: u64) -> Variable {
        Variable {
            base: "x".to_string(),
            index: Some(i),
        }
    }

    /// Index `i` when this is the standard variable `xi`.
    pub fn standard_index(&self) -> Option<u64> {
        match self.index {
            Some(i) if self.base == "x" => Some(i),
            _ => None,
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn index(&self) -> Option<u64> {
        self.index
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{}{}", self.base, i),
            None => write!(f, "{}", self.base),
        }
    }
}

/// A function symbol with its arity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol {
    pub name: String,
    pub arity: usize,
}

impl Symbol {
    pub fn new(name: impl Into<String>, arity: usize) -> Symbol {
        let name = name.into();
        assert!(!name.is_empty(), "symbol name must be nonempty");
        Symbol { name, arity }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// A signature: each symbol name has exactly one arity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature(BTreeMap<String, usize>);

impl Signature {
    pub fn new() -> Signature {
        Signature(BTreeMap::new())
    }

    /// Records a use of `name` at `arity`; first use fixes the arity.
    pub fn register(&mut self, name: &str, arity: usize) -> Result<Symbol, TermError> {
        match self.0.get(name) {
            Some(&known) if known != arity => Err(TermError::ArityMismatch {
                symbol: name.to_string(),
                expected: known,
                found: arity,
            }),
            Some(_) => Ok(Symbol::new(name, arity)),
            None => {
                self.0.insert(name.to_string(), arity);
                Ok(Symbol::new(name, arity))
            }
        }
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.0.get(name).copied()
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.0.iter().map(|(n, &a)| Symbol::new(n.clone(), a))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A first-order term: a variable, or a symbol applied to as many
/// arguments as its arity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Variable),
    App(Symbol, Vec<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(Variable::from_name(name))
    }

    /// The i-th standard variable `xi` as a term.
    pub fn xvar(i: u64) -> Term {
        Term::Var(Variable::standard(i))
    }

    pub fn app(name: &str, args: Vec<Term>) -> Term {
        Term::App(Symbol::new(name, args.len()), args)
    }

    pub fn constant(name: &str) -> Term {
        Term::App(Symbol::new(name, 0), Vec::new())
    }

    /// Total node count (variables included).
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
        }
    }

    /// Number of function-symbol nodes (variables excluded).
    pub fn symbol_size(&self) -> usize {
        match self {
            Term::Var(_) => 0,
            Term::App(_, args) => 1 + args.iter().map(Term::symbol_size).sum::<usize>(),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Variables in left-to-right occurrence order, with repetitions.
    pub fn variable_occurrences(&self) -> Vec<&Variable> {
        let mut out = Vec::new();
        fn walk<'a>(t: &'a Term, out: &mut Vec<&'a Variable>) {
            match t {
                Term::Var(v) => out.push(v),
                Term::App(_, args) => args.iter().for_each(|a| walk(a, out)),
            }
        }
        walk(self, &mut out);
        out
    }

    /// The set of variables of the term.
    pub fn variables(&self) -> BTreeSet<Variable> {
        self.variable_occurrences().into_iter().cloned().collect()
    }

    pub fn subterm_at(&self, path: &[usize]) -> Result<&Term, TermError> {
        let mut node = self;
        for (depth, &i) in path.iter().enumerate() {
            match node {
                Term::App(_, args) if i >= 1 && i <= args.len() => node = &args[i - 1],
                _ => {
                    return Err(TermError::PathOutOfRange {
                        path: path[..=depth].to_vec(),
                    })
                }
            }
        }
        Ok(node)
    }

    pub fn replace_at(&self, path: &[usize], replacement: Term) -> Result<Term, TermError> {
        if path.is_empty() {
            return Ok(replacement);
        }
        match self {
            Term::App(f, args) if path[0] >= 1 && path[0] <= args.len() => {
                let mut args = args.clone();
                args[path[0] - 1] = args[path[0] - 1].replace_at(&path[1..], replacement)?;
                Ok(Term::App(f.clone(), args))
            }
            _ => Err(TermError::PathOutOfRange {
                path: path.to_vec(),
            }),
        }
    }

    /// Vertex paths of all nodes, in depth-first (outermost-leftmost) order.
    pub fn node_paths(&self) -> Vec<Path> {
        let mut out = Vec::new();
        fn walk(t: &Term, prefix: &mut Path, out: &mut Vec<Path>) {
            out.push(prefix.clone());
            if let Term::App(_, args) = t {
                for (i, arg) in args.iter().enumerate() {
                    prefix.push(i + 1);
                    walk(arg, prefix, out);
                    prefix.pop();
                }
            }
        }
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    /// Vertex paths of non-variable nodes, in depth-first order.
    pub fn function_paths(&self) -> Vec<Path> {
        self.node_paths()
            .into_iter()
            .filter(|p| !matches!(self.subterm_at(p), Ok(Term::Var(_))))
            .collect()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::App(sym, args) => {
                write!(f, "{}", sym.name)?;
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (i, arg) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        write!(f, "{arg}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

/// Checks that every variable occurs at most once.
pub fn is_linear(t: &Term) -> bool {
    first_repeated_variable(t).is_none()
}

fn first_repeated_variable(t: &Term) -> Option<Variable> {
    let mut seen = BTreeSet::new();
    for v in t.variable_occurrences() {
        if !seen.insert(v.clone()) {
            return Some(v.clone());
        }
    }
    None
}

/// A finite map from variables to terms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitution(BTreeMap<Variable, Term>);

impl Substitution {
    pub fn new() -> Substitution {
        Substitution(BTreeMap::new())
    }

    pub fn singleton(v: Variable, t: Term) -> Substitution {
        let mut map = BTreeMap::new();
        map.insert(v, t);
        Substitution(map)
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Variable, Term)>) -> Substitution {
        Substitution(pairs.into_iter().collect())
    }

    pub fn get(&self, v: &Variable) -> Option<&Term> {
        self.0.get(v)
    }

    pub fn insert(&mut self, v: Variable, t: Term) {
        self.0.insert(v, t);
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Term)> {
        self.0.iter()
    }

    pub fn apply(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.0.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::App(f, args) => {
                Term::App(f.clone(), args.iter().map(|a| self.apply(a)).collect())
            }
        }
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (v, t)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v} := {t}")?;
        }
        write!(f, "}}")
    }
}

/// Matches a linear `pattern` against `subject`.
///
/// Returns the substitution over exactly the pattern's variables when the
/// subject is an instance, `None` otherwise. Non-linear patterns are rejected.
pub fn match_pattern(pattern: &Term, subject: &Term) -> Result<Option<Substitution>, TermError> {
    if let Some(v) = first_repeated_variable(pattern) {
        return Err(TermError::NonLinearPattern {
            variable: v.to_string(),
        });
    }
    let mut bindings = Substitution::new();
    fn go(pattern: &Term, subject: &Term, out: &mut Substitution) -> bool {
        match (pattern, subject) {
            (Term::Var(v), _) => {
                out.insert(v.clone(), subject.clone());
                true
            }
            (Term::App(f, pargs), Term::App(g, sargs)) => {
                f == g && pargs.iter().zip(sargs).all(|(p, s)| go(p, s, out))
            }
            _ => false,
        }
    }
    Ok(go(pattern, subject, &mut bindings).then_some(bindings))
}

/// Computes an idempotent most general unifier of `s` and `t`, with occurs
/// check. Variable-variable bindings are oriented so that the smaller
/// variable (base name, then index) is the one mapped.
pub fn unify(s: &Term, t: &Term) -> Option<Substitution> {
    let mut subst = Substitution::new();
    if unify_into(s, t, &mut subst) {
        Some(canonicalize_mgu(subst))
    } else {
        None
    }
}

fn unify_into(s: &Term, t: &Term, subst: &mut Substitution) -> bool {
    let s = subst.apply(s);
    let t = subst.apply(t);
    match (&s, &t) {
        (a, b) if a == b => true,
        (Term::Var(v), other) | (other, Term::Var(v)) => {
            if other.variables().contains(v) {
                return false; // occurs check
            }
            bind(v.clone(), other.clone(), subst);
            true
        }
        (Term::App(f, fargs), Term::App(g, gargs)) => {
            f == g
                && fargs
                    .iter()
                    .zip(gargs)
                    .all(|(a, b)| unify_into(a, b, subst))
        }
    }
}

// Composes {v := t} onto the substitution, keeping it idempotent.
fn bind(v: Variable, t: Term, subst: &mut Substitution) {
    let single = Substitution::singleton(v.clone(), t.clone());
    let updated: Vec<(Variable, Term)> = subst
        .iter()
        .map(|(u, s)| (u.clone(), single.apply(s)))
        .collect();
    *subst = Substitution::from_pairs(updated);
    subst.insert(v, t);
}

// Re-orients variable-variable bindings so that within each class of
// unified variables only the maximal one survives in ranges.
fn canonicalize_mgu(subst: Substitution) -> Substitution {
    let mut map: BTreeMap<Variable, Term> =
        subst.iter().map(|(v, t)| (v.clone(), t.clone())).collect();
    loop {
        // A star: v1.. vk all bound to variable w (w not in the domain).
        let star = map.iter().find_map(|(v, t)| match t {
            Term::Var(w) if w < v => Some((v.clone(), w.clone())),
            _ => None,
        });
        let Some((_, w)) = star else { break };
        let mut class: Vec<Variable> = map
            .iter()
            .filter(|(_, t)| matches!(t, Term::Var(u) if *u == w))
            .map(|(v, _)| v.clone())
            .collect();
        class.push(w.clone());
        let rep = class.iter().max().cloned().expect("class is nonempty");
        if rep == w {
            break;
        }
        // Swap w and rep everywhere, then rebind the class to the new representative.
        for v in &class {
            map.remove(v);
        }
        let swap = |t: &Term| -> Term {
            fn go(t: &Term, w: &Variable, rep: &Variable) -> Term {
                match t {
                    Term::Var(v) if v == w => Term::Var(rep.clone()),
                    Term::Var(v) if v == rep => Term::Var(w.clone()),
                    Term::Var(_) => t.clone(),
                    Term::App(f, args) => {
                        Term::App(f.clone(), args.iter().map(|a| go(a, w, rep)).collect())
                    }
                }
            }
            go(t, &w, &rep)
        };
        let rewritten: Vec<(Variable, Term)> =
            map.iter().map(|(v, t)| (v.clone(), swap(t))).collect();
        map = rewritten.into_iter().collect();
        for v in class {
            if v != rep {
                map.insert(v, Term::Var(rep.clone()));
            }
        }
    }
    Substitution(map)
}

/// Renames the variables of a linear term to `x1, …, xn` in left-to-right
/// order. Returns the standard term and the renaming (a bijection).
pub fn standardize(t: &Term) -> Result<(Term, BTreeMap<Variable, Variable>), TermError> {
    if let Some(v) = first_repeated_variable(t) {
        return Err(TermError::NonLinearTerm {
            variable: v.to_string(),
        });
    }
    let mut renaming = BTreeMap::new();
    for (i, v) in t.variable_occurrences().into_iter().enumerate() {
        renaming.insert(v.clone(), Variable::standard(i as u64 + 1));
    }
    let renamed = rename_variables(t, &renaming);
    Ok((renamed, renaming))
}

/// Applies a variable renaming; variables outside the map are unchanged.
pub fn rename_variables(t: &Term, renaming: &BTreeMap<Variable, Variable>) -> Term {
    match t {
        Term::Var(v) => Term::Var(renaming.get(v).cloned().unwrap_or_else(|| v.clone())),
        Term::App(f, args) => Term::App(
            f.clone(),
            args.iter().map(|a| rename_variables(a, renaming)).collect(),
        ),
    }
}

/// A term is standard when its left-to-right variable vector is `x1, …, xn`.
pub fn is_standard(t: &Term) -> bool {
    t.variable_occurrences()
        .iter()
        .enumerate()
        .all(|(i, v)| v.standard_index() == Some(i as u64 + 1))
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parses `ident` or `ident(t1,…,tn)` where identifiers in `vars` are
/// variables and all other identifiers are function symbols. Arities are
/// recorded in `sig`; the first use of a symbol fixes its arity.
///
/// Identifiers of the form `x<digits>` are reserved for variables and must
/// appear in `vars`.
pub fn parse_term(
    text: &str,
    vars: &BTreeSet<String>,
    sig: &mut Signature,
) -> Result<Term, TermError> {
    let mut parser = TermParser::new(text, vars);
    let term = parser.term(sig)?;
    parser.skip_ws();
    if parser.pos < parser.bytes.len() {
        return Err(parser.err("trailing input after term"));
    }
    Ok(term)
}

pub(crate) struct TermParser<'a> {
    pub(crate) bytes: &'a [u8],
    pub(crate) pos: usize,
    vars: &'a BTreeSet<String>,
}

impl<'a> TermParser<'a> {
    pub(crate) fn new(text: &'a str, vars: &'a BTreeSet<String>) -> TermParser<'a> {
        TermParser {
            bytes: text.as_bytes(),
            pos: 0,
            vars,
        }
    }

    pub(crate) fn err(&self, message: &str) -> TermError {
        TermError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    pub(crate) fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    /// An atom: identifier `[A-Za-z_][A-Za-z0-9_']*` or numeral `[0-9]+`.
    pub(crate) fn atom(&mut self) -> Result<String, TermError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                self.pos += 1;
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == b'_' || c == b'\'' {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
            }
            Some(c) if c.is_ascii_digit() => {
                while let Some(c) = self.peek() {
                    if c.is_ascii_digit() {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
            }
            _ => return Err(self.err("expected an identifier or numeral")),
        }
        Ok(String::from_utf8(self.bytes[start..self.pos].to_vec()).expect("ascii"))
    }

    pub(crate) fn term(&mut self, sig: &mut Signature) -> Result<Term, TermError> {
        let name = self.atom()?;
        if self.vars.contains(&name) {
            return Ok(Term::var(&name));
        }
        let reserved = Variable::from_name(&name);
        if reserved.base() == "x" && reserved.index().is_some() {
            return Err(TermError::UndeclaredVariable { name });
        }
        self.skip_ws();
        let mut args = Vec::new();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            self.skip_ws();
            if self.peek() == Some(b')') {
                self.pos += 1;
            } else {
                loop {
                    args.push(self.term(sig)?);
                    self.skip_ws();
                    match self.peek() {
                        Some(b',') => {
                            self.pos += 1;
                        }
                        Some(b')') => {
                            self.pos += 1;
                            break;
                        }
                        _ => return Err(self.err("expected ',' or ')'")),
                    }
                }
            }
        }
        let symbol = sig.register(&name, args.len())?;
        Ok(Term::App(symbol, args))
    }
}

/// All standard terms with at most `max_symbols` function symbols over the
/// signature, leaves drawn from constants and fresh variables. Deterministic
/// enumeration order; each returned term is standard by construction.
pub fn enumerate_standard_terms(sig: &Signature, max_symbols: usize) -> Vec<Term> {
    // Shapes use a hole marker for variable leaves; numbering the holes
    // left-to-right afterwards yields standard terms directly.
    const HOLE: &str = "\u{0}hole";
    let symbols: Vec<Symbol> = sig.symbols().collect();
    // by_size[n] = shapes with exactly n function symbols
    let mut by_size: Vec<Vec<Term>> = vec![vec![Term::constant(HOLE)]];
    for n in 1..=max_symbols {
        let mut level = Vec::new();
        for sym in &symbols {
            if sym.arity == 0 {
                if n == 1 {
                    level.push(Term::App(sym.clone(), Vec::new()));
                }
                continue;
            }
            // Distribute the remaining n-1 symbols over the arguments.
            fn distribute(
                remaining: usize,
                slots: usize,
                by_size: &[Vec<Term>],
                current: &mut Vec<Term>,
                out: &mut Vec<Vec<Term>>,
            ) {
                if slots == 0 {
                    if remaining == 0 {
                        out.push(current.clone());
                    }
                    return;
                }
                for k in 0..=remaining {
                    if k >= by_size.len() {
                        break;
                    }
                    for shape in &by_size[k] {
                        current.push(shape.clone());
                        distribute(remaining - k, slots - 1, by_size, current, out);
                        current.pop();
                    }
                }
            }
            let mut arg_lists = Vec::new();
            distribute(n - 1, sym.arity, &by_size, &mut Vec::new(), &mut arg_lists);
            for args in arg_lists {
                level.push(Term::App(sym.clone(), args));
            }
        }
        by_size.push(level);
    }
    let mut out = Vec::new();
    for level in &by_size {
        for shape in level {
            out.push(number_holes(shape, HOLE));
        }
    }
    out
}

fn number_holes(shape: &Term, hole: &str) -> Term {
    fn go(t: &Term, hole: &str, next: &mut u64) -> Term {
        match t {
            Term::App(sym, _) if sym.name == hole => {
                let v = Term::xvar(*next);
                *next += 1;
                v
            }
            Term::App(sym, args) => Term::App(
                sym.clone(),
                args.iter().map(|a| go(a, hole, next)).collect(),
            ),
            Term::Var(_) => t.clone(),
        }
    }
    go(shape, hole, &mut 1)
}
