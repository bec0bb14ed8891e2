//! Grammar data model, the text format, and the Parikh map on words.
//!
//! A grammar file holds one rule group per line:
//!
//! ```text
//! %start S          # optional; must come before the first rule
//! S -> a S b |      # the empty alternative is an epsilon rule
//! ```
//!
//! Symbols that occur on some left-hand side are nonterminals, every other
//! symbol is a terminal.

use std::collections::HashMap;
use std::fmt;
use std::ops::Add;

use thiserror::Error;

/// Index of a nonterminal in [`Grammar::nonterminals`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NtId(pub usize);

/// Index of a terminal in [`Grammar::terminals`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermId(pub usize);

/// Index of a rule in [`Grammar::rules`]; ids follow file order.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleId(pub usize);

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Nonterminal(NtId),
    Terminal(TermId),
}

/// A word over the terminal alphabet.
pub type Word = Vec<TermId>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub id: RuleId,
    pub lhs: NtId,
    pub rhs: Vec<Symbol>,
}

impl Rule {
    /// 1 if `symbol` is the left-hand side of this rule, 0 otherwise.
    pub fn lhs_indicator(&self, symbol: Symbol) -> u64 {
        u64::from(symbol == Symbol::Nonterminal(self.lhs))
    }

    /// Number of occurrences of `symbol` in the right-hand side.
    pub fn rhs_count(&self, symbol: Symbol) -> u64 {
        self.rhs.iter().filter(|&&s| s == symbol).count() as u64
    }

    pub fn is_epsilon(&self) -> bool {
        self.rhs.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GrammarError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: `%start {name}` does not name a left-hand side")]
    StartNotLhs {
        line: usize,
        column: usize,
        name: String,
    },
    #[error("{line}:{column}: duplicate `%start` directive")]
    DuplicateStart { line: usize, column: usize },
    #[error("grammar has no rules")]
    Empty,
    #[error("symbol `{0}` is declared as a terminal but has rules")]
    TerminalWithRules(String),
    #[error("invalid symbol name `{0}`")]
    InvalidName(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("`{0}` is not a terminal")]
    NotATerminal(String),
    #[error("vector has {found} components but the grammar has {expected} terminals")]
    DomainMismatch { expected: usize, found: usize },
}

/// A context-free grammar `(N, Σ, P, S)`.
///
/// Immutable after construction. Besides the rules themselves it keeps, for
/// every symbol, the sparse list of rules whose right-hand side mentions it,
/// so formula construction only touches nonzero coefficients.
#[derive(Clone, Debug)]
pub struct Grammar {
    nonterminals: Vec<String>,
    terminals: Vec<String>,
    rules: Vec<Rule>,
    start: NtId,
    rules_by_lhs: Vec<Vec<RuleId>>,
    nt_occurrences: Vec<Vec<(RuleId, u64)>>,
    term_occurrences: Vec<Vec<(RuleId, u64)>>,
    explicit_start: bool,
}

impl PartialEq for Grammar {
    fn eq(&self, other: &Self) -> bool {
        self.nonterminals == other.nonterminals
            && self.terminals == other.terminals
            && self.rules == other.rules
            && self.start == other.start
    }
}

impl Eq for Grammar {}

impl Grammar {
    pub fn nonterminals(&self) -> &[String] {
        &self.nonterminals
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[id.0]
    }

    pub fn start(&self) -> NtId {
        self.start
    }

    pub fn nonterminal_ids(&self) -> impl Iterator<Item = NtId> {
        (0..self.nonterminals.len()).map(NtId)
    }

    pub fn terminal_ids(&self) -> impl Iterator<Item = TermId> {
        (0..self.terminals.len()).map(TermId)
    }

    pub fn nt_name(&self, id: NtId) -> &str {
        &self.nonterminals[id.0]
    }

    pub fn term_name(&self, id: TermId) -> &str {
        &self.terminals[id.0]
    }

    pub fn symbol_name(&self, symbol: Symbol) -> &str {
        match symbol {
            Symbol::Nonterminal(n) => self.nt_name(n),
            Symbol::Terminal(t) => self.term_name(t),
        }
    }

    pub fn nonterminal(&self, name: &str) -> Option<NtId> {
        self.nonterminals.iter().position(|n| n == name).map(NtId)
    }

    pub fn terminal(&self, name: &str) -> Option<TermId> {
        self.terminals.iter().position(|n| n == name).map(TermId)
    }

    pub fn symbol(&self, name: &str) -> Option<Symbol> {
        self.nonterminal(name)
            .map(Symbol::Nonterminal)
            .or_else(|| self.terminal(name).map(Symbol::Terminal))
    }

    pub fn contains_nonterminal(&self, id: NtId) -> bool {
        id.0 < self.nonterminals.len()
    }

    pub fn contains_terminal(&self, id: TermId) -> bool {
        id.0 < self.terminals.len()
    }

    /// Rules with `lhs` on the left, in id order.
    pub fn rules_for(&self, lhs: NtId) -> &[RuleId] {
        &self.rules_by_lhs[lhs.0]
    }

    /// Rules whose right-hand side contains `symbol`, with the number of
    /// occurrences, in id order. Rules with zero occurrences are absent.
    pub fn occurrences(&self, symbol: Symbol) -> &[(RuleId, u64)] {
        match symbol {
            Symbol::Nonterminal(n) => &self.nt_occurrences[n.0],
            Symbol::Terminal(t) => &self.term_occurrences[t.0],
        }
    }

    /// `|N| + |Σ| + Σ_p (1 + |rhs(p)|)`.
    pub fn size(&self) -> usize {
        self.nonterminals.len()
            + self.terminals.len()
            + self.rules.iter().map(|r| 1 + r.rhs.len()).sum::<usize>()
    }

    /// Parikh image of a word. Fails on ids outside the terminal set.
    pub fn parikh_of_word(&self, word: &[TermId]) -> Result<ParikhVector, GrammarError> {
        let mut counts = vec![0u64; self.terminals.len()];
        for &t in word {
            match counts.get_mut(t.0) {
                Some(c) => *c += 1,
                None => return Err(GrammarError::UnknownSymbol(format!("#{}", t.0))),
            }
        }
        Ok(ParikhVector(counts))
    }

    /// Parikh image of a word given by terminal names.
    pub fn parikh_of_names<S: AsRef<str>>(&self, word: &[S]) -> Result<ParikhVector, GrammarError> {
        let ids = word
            .iter()
            .map(|name| {
                let name = name.as_ref();
                match self.symbol(name) {
                    Some(Symbol::Terminal(t)) => Ok(t),
                    Some(Symbol::Nonterminal(_)) => {
                        Err(GrammarError::NotATerminal(name.to_owned()))
                    }
                    None => Err(GrammarError::UnknownSymbol(name.to_owned())),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.parikh_of_word(&ids)
    }

    /// Concatenated terminal names.
    pub fn spell(&self, word: &[TermId]) -> String {
        word.iter().map(|&t| self.term_name(t)).collect()
    }

    /// Checks that `v` has exactly one component per terminal.
    pub fn check_vector(&self, v: &ParikhVector) -> Result<(), GrammarError> {
        if v.len() == self.terminals.len() {
            Ok(())
        } else {
            Err(GrammarError::DomainMismatch {
                expected: self.terminals.len(),
                found: v.len(),
            })
        }
    }

    /// Renders `v` as `a=1,b=0` in terminal order.
    pub fn format_vector(&self, v: &ParikhVector) -> String {
        self.terminal_ids()
            .map(|t| format!("{}={}", self.term_name(t), v.get(t)))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Parses a `letter=count,...` list; omitted letters are 0.
    pub fn parse_vector(&self, spec: &str) -> Result<ParikhVector, GrammarError> {
        let mut counts = vec![0u64; self.terminals.len()];
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, count) = item
                .split_once('=')
                .ok_or_else(|| GrammarError::InvalidName(item.to_owned()))?;
            let name = name.trim();
            let t = match self.symbol(name) {
                Some(Symbol::Terminal(t)) => t,
                Some(Symbol::Nonterminal(_)) => {
                    return Err(GrammarError::NotATerminal(name.to_owned()))
                }
                None => return Err(GrammarError::UnknownSymbol(name.to_owned())),
            };
            let count = count
                .trim()
                .parse::<u64>()
                .map_err(|_| GrammarError::InvalidName(item.to_owned()))?;
            counts[t.0] = count;
        }
        Ok(ParikhVector(counts))
    }
}

/// Parses the grammar text format.
pub fn parse_grammar(text: &str) -> Result<Grammar, GrammarError> {
    let mut builder = GrammarBuilder::new();
    let mut start: Option<(String, usize, usize)> = None;
    let mut seen_rule = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens = tokenize(content);
        let Some(first) = tokens.first() else {
            continue;
        };

        if first.text == "%start" {
            if start.is_some() {
                return Err(GrammarError::DuplicateStart {
                    line,
                    column: first.column,
                });
            }
            if seen_rule {
                return Err(syntax(
                    line,
                    first.column,
                    "`%start` must precede the first rule",
                ));
            }
            match tokens.as_slice() {
                [_, name] if name.kind == TokenKind::Name => {
                    start = Some((name.text.to_owned(), line, name.column));
                }
                [_] => {
                    return Err(syntax(
                        line,
                        first.column + 6,
                        "`%start` needs a symbol name",
                    ))
                }
                [_, bad, ..] => {
                    return Err(syntax(
                        line,
                        bad.column,
                        "expected a single symbol name after `%start`",
                    ))
                }
                [] => unreachable!(),
            }
            continue;
        }

        if first.kind != TokenKind::Name || first.text.starts_with('%') {
            return Err(syntax(
                line,
                first.column,
                &format!("expected a left-hand side, found `{}`", first.text),
            ));
        }
        match tokens.get(1) {
            Some(t) if t.kind == TokenKind::Arrow => {}
            Some(t) => {
                return Err(syntax(
                    line,
                    t.column,
                    &format!("expected `->`, found `{}`", t.text),
                ))
            }
            None => {
                return Err(syntax(
                    line,
                    first.column + first.text.chars().count(),
                    "expected `->`",
                ))
            }
        }

        let lhs = first.text;
        let mut alt: Vec<&str> = Vec::new();
        for tok in &tokens[2..] {
            match tok.kind {
                TokenKind::Name => alt.push(tok.text),
                TokenKind::Bar => builder.push_rule(lhs, std::mem::take(&mut alt)),
                TokenKind::Arrow => {
                    return Err(syntax(
                        line,
                        tok.column,
                        "reserved token `->` in right-hand side",
                    ));
                }
            }
        }
        builder.push_rule(lhs, alt);
        seen_rule = true;
    }

    if let Some((name, line, column)) = start {
        if !builder.has_lhs(&name) {
            return Err(GrammarError::StartNotLhs { line, column, name });
        }
        builder.start(&name);
    }
    builder.build()
}

fn syntax(line: usize, column: usize, message: &str) -> GrammarError {
    GrammarError::Syntax {
        line,
        column,
        message: message.to_owned(),
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum TokenKind {
    Name,
    Arrow,
    Bar,
}

#[derive(Debug)]
struct Token<'a> {
    text: &'a str,
    kind: TokenKind,
    column: usize,
}

/// Splits on spaces/tabs; `->` and `|` are tokens even when glued to names.
fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut name_start: Option<(usize, usize)> = None;
    let chars: Vec<(usize, char)> = line.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (byte, c) = chars[i];
        let column = i + 1;
        let special = if c == ' ' || c == '\t' || c == '\r' {
            Some((None, 1))
        } else if c == '|' {
            Some((Some(TokenKind::Bar), 1))
        } else if c == '-' && chars.get(i + 1).map(|&(_, n)| n) == Some('>') {
            Some((Some(TokenKind::Arrow), 2))
        } else {
            None
        };
        match special {
            Some((kind, width)) => {
                if let Some((start, col)) = name_start.take() {
                    out.push(Token {
                        text: &line[start..byte],
                        kind: TokenKind::Name,
                        column: col,
                    });
                }
                if let Some(kind) = kind {
                    out.push(Token {
                        text: &line[byte..byte + width],
                        kind,
                        column,
                    });
                }
                i += width;
            }
            None => {
                name_start.get_or_insert((byte, column));
                i += 1;
            }
        }
    }
    if let Some((start, col)) = name_start {
        out.push(Token {
            text: &line[start..],
            kind: TokenKind::Name,
            column: col,
        });
    }
    out
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && !name.contains("->")
        && !name.contains(['|', '#'])
        && !name.chars().any(char::is_whitespace)
}

/// Programmatic construction of grammars.
///
/// Symbols on a left-hand side are nonterminals; other right-hand-side
/// symbols are terminals. Symbols may also be declared up front, which is
/// the only way to get a terminal that occurs in no rule or a nonterminal
/// without rules.
#[derive(Clone, Debug, Default)]
pub struct GrammarBuilder {
    declared_nts: Vec<String>,
    declared_terms: Vec<String>,
    rules: Vec<(String, Vec<String>)>,
    start: Option<String>,
}

impl GrammarBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nonterminal(mut self, name: &str) -> Self {
        self.declared_nts.push(name.to_owned());
        self
    }

    pub fn terminal(mut self, name: &str) -> Self {
        self.declared_terms.push(name.to_owned());
        self
    }

    pub fn rule(mut self, lhs: &str, rhs: &[&str]) -> Self {
        self.push_rule(lhs, rhs.to_vec());
        self
    }

    pub fn with_start(mut self, name: &str) -> Self {
        self.start(name);
        self
    }

    fn push_rule(&mut self, lhs: &str, rhs: Vec<&str>) {
        self.rules
            .push((lhs.to_owned(), rhs.into_iter().map(str::to_owned).collect()));
    }

    fn start(&mut self, name: &str) {
        self.start = Some(name.to_owned());
    }

    fn has_lhs(&self, name: &str) -> bool {
        self.rules.iter().any(|(l, _)| l == name)
    }

    pub fn build(self) -> Result<Grammar, GrammarError> {
        let check = |n: &String| {
            if valid_name(n) {
                Ok(())
            } else {
                Err(GrammarError::InvalidName(n.clone()))
            }
        };
        for n in self.declared_nts.iter().chain(&self.declared_terms) {
            check(n)?;
        }
        for (l, r) in &self.rules {
            check(l)?;
            r.iter().try_for_each(check)?;
        }

        let mut nonterminals: Vec<String> = Vec::new();
        let mut nt_index: HashMap<String, usize> = HashMap::new();
        for name in self.rules.iter().map(|(l, _)| l).chain(&self.declared_nts) {
            if !nt_index.contains_key(name) {
                nt_index.insert(name.clone(), nonterminals.len());
                nonterminals.push(name.clone());
            }
        }
        if nonterminals.is_empty() {
            return Err(GrammarError::Empty);
        }
        if let Some(t) = self
            .declared_terms
            .iter()
            .find(|t| nt_index.contains_key(*t))
        {
            return Err(GrammarError::TerminalWithRules(t.clone()));
        }

        let mut terminals: Vec<String> = Vec::new();
        let mut term_index: HashMap<String, usize> = HashMap::new();
        let rhs_names = self.rules.iter().flat_map(|(_, r)| r.iter());
        for name in self.declared_terms.iter().chain(rhs_names) {
            if !nt_index.contains_key(name) && !term_index.contains_key(name) {
                term_index.insert(name.clone(), terminals.len());
                terminals.push(name.clone());
            }
        }

        let rules: Vec<Rule> = self
            .rules
            .iter()
            .enumerate()
            .map(|(i, (l, r))| Rule {
                id: RuleId(i),
                lhs: NtId(nt_index[l]),
                rhs: r
                    .iter()
                    .map(|s| match nt_index.get(s) {
                        Some(&n) => Symbol::Nonterminal(NtId(n)),
                        None => Symbol::Terminal(TermId(term_index[s])),
                    })
                    .collect(),
            })
            .collect();

        let (start, explicit_start) = match &self.start {
            Some(s) => match nt_index.get(s) {
                Some(&n) => (NtId(n), true),
                None => return Err(GrammarError::UnknownSymbol(s.clone())),
            },
            None => (NtId(0), false),
        };

        Ok(Grammar::index(
            nonterminals,
            terminals,
            rules,
            start,
            explicit_start,
        ))
    }
}

impl Grammar {
    fn index(
        nonterminals: Vec<String>,
        terminals: Vec<String>,
        rules: Vec<Rule>,
        start: NtId,
        explicit_start: bool,
    ) -> Grammar {
        let mut rules_by_lhs = vec![Vec::new(); nonterminals.len()];
        let mut nt_occurrences: Vec<Vec<(RuleId, u64)>> = vec![Vec::new(); nonterminals.len()];
        let mut term_occurrences: Vec<Vec<(RuleId, u64)>> = vec![Vec::new(); terminals.len()];
        for rule in &rules {
            rules_by_lhs[rule.lhs.0].push(rule.id);
            for &sym in &rule.rhs {
                let list = match sym {
                    Symbol::Nonterminal(n) => &mut nt_occurrences[n.0],
                    Symbol::Terminal(t) => &mut term_occurrences[t.0],
                };
                match list.last_mut() {
                    Some((id, c)) if *id == rule.id => *c += 1,
                    _ => list.push((rule.id, 1)),
                }
            }
        }
        Grammar {
            nonterminals,
            terminals,
            rules,
            start,
            rules_by_lhs,
            nt_occurrences,
            term_occurrences,
            explicit_start,
        }
    }
}

/// Writes one rule per line, which keeps rule ids stable under re-parsing.
impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let first_lhs = self.rules.first().map(|r| r.lhs);
        if self.explicit_start || first_lhs != Some(self.start) {
            writeln!(f, "%start {}", self.nt_name(self.start))?;
        }
        for rule in &self.rules {
            write!(f, "{} ->", self.nt_name(rule.lhs))?;
            for &s in &rule.rhs {
                write!(f, " {}", self.symbol_name(s))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Letter counts indexed by terminal id.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ParikhVector(pub Vec<u64>);

impl ParikhVector {
    pub fn zero(terminals: usize) -> Self {
        ParikhVector(vec![0; terminals])
    }

    pub fn get(&self, t: TermId) -> u64 {
        self.0.get(t.0).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_norm(&self) -> u64 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn sum_norm(&self) -> u64 {
        self.0.iter().sum()
    }
}

impl Add for &ParikhVector {
    type Output = ParikhVector;

    fn add(self, rhs: &ParikhVector) -> ParikhVector {
        let n = self.len().max(rhs.len());
        ParikhVector(
            (0..n)
                .map(|i| self.get(TermId(i)) + rhs.get(TermId(i)))
                .collect(),
        )
    }
}
