//! Parser consultation wire format.
//!
//! A parser that meets an ambiguous PP sends one s-expression:
//!
//! ```text
//! (:ambig-PP
//!     (PP :prep "with" :det "one" :noun "string")
//!  :possible-attachments
//!     ((V :verb "play")
//!      (NP :det "the" :noun "guitar")))
//! ```
//!
//! and receives one reply:
//!
//! ```text
//! (:attach-to 1 :kind NP :head "guitar" :relation "HasA" :weight 2.8284 :source kb)
//! ```
//!
//! `:attach-to` is a 0-based index into the request's candidate list.
//! Node tags and keywords match case-insensitively; quoted values are kept
//! verbatim. Unrecognized keyword/value pairs are ignored.

use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::kb::ConceptKey;
use crate::resolver::{
    AmbiguityRequest, AttachmentDecision, Candidate, CandidateKind, ScoreSource,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed request at line {line}, column {column}: {message}")]
pub struct MalformedRequest {
    /// Byte offset into the input.
    pub offset: usize,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl MalformedRequest {
    fn at(input: &str, offset: usize, message: impl Into<String>) -> Self {
        let offset = offset.min(input.len());
        let before = &input[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
        MalformedRequest {
            offset,
            line,
            column,
            message: message.into(),
        }
    }
}

/// An s-expression without source positions.
#[derive(Debug, Clone, PartialEq)]
pub enum SExpr {
    /// Bare token, including numbers.
    Symbol(String),
    /// Token starting with `:`; the colon is kept.
    Keyword(String),
    Str(String),
    List(Vec<SExpr>),
}

impl SExpr {
    pub fn symbol(s: impl Into<String>) -> Self {
        SExpr::Symbol(s.into())
    }

    pub fn keyword(s: impl Into<String>) -> Self {
        let s = s.into();
        if s.starts_with(':') {
            SExpr::Keyword(s)
        } else {
            SExpr::Keyword(format!(":{s}"))
        }
    }

    pub fn string(s: impl Into<String>) -> Self {
        SExpr::Str(s.into())
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Symbol(s) | SExpr::Keyword(s) => f.write_str(s),
            SExpr::Str(s) => {
                f.write_char('"')?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => f.write_char(c)?,
                    }
                }
                f.write_char('"')
            }
            SExpr::List(items) => {
                f.write_char('(')?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_char(' ')?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_char(')')
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    pos: usize,
    node: Node,
}

#[derive(Debug, Clone)]
enum Node {
    Atom(SExpr),
    List(Vec<Spanned>),
}

impl Spanned {
    fn strip(&self) -> SExpr {
        match &self.node {
            Node::Atom(a) => a.clone(),
            Node::List(items) => SExpr::List(items.iter().map(Spanned::strip).collect()),
        }
    }

    fn keyword(&self) -> Option<&str> {
        match &self.node {
            Node::Atom(SExpr::Keyword(k)) => Some(k),
            _ => None,
        }
    }

    fn symbol(&self) -> Option<&str> {
        match &self.node {
            Node::Atom(SExpr::Symbol(s)) => Some(s),
            _ => None,
        }
    }

    /// Text of a string atom.
    fn text(&self) -> Option<&str> {
        match &self.node {
            Node::Atom(SExpr::Str(s)) => Some(s),
            _ => None,
        }
    }
}

struct Reader<'a> {
    input: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, offset: usize, message: impl Into<String>) -> MalformedRequest {
        MalformedRequest::at(self.input, offset, message)
    }

    fn peek(&self) -> Option<char> {
        self.input[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => self.pos += c.len_utf8(),
                Some(';') => {
                    let rest = &self.input[self.pos..];
                    self.pos += rest.find('\n').unwrap_or(rest.len());
                }
                _ => break,
            }
        }
    }

    fn read(&mut self) -> Result<Spanned, MalformedRequest> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(self.err(start, "unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.peek() {
                        None => return Err(self.err(start, "unbalanced '(' never closed")),
                        Some(')') => {
                            self.pos += 1;
                            return Ok(Spanned {
                                pos: start,
                                node: Node::List(items),
                            });
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            Some(')') => Err(self.err(start, "unbalanced ')'")),
            Some('"') => {
                self.pos += 1;
                let mut s = String::new();
                loop {
                    let Some(c) = self.peek() else {
                        return Err(self.err(start, "unterminated string"));
                    };
                    self.pos += c.len_utf8();
                    match c {
                        '"' => break,
                        '\\' => {
                            let Some(e) = self.peek() else {
                                return Err(self.err(start, "unterminated string"));
                            };
                            self.pos += e.len_utf8();
                            s.push(match e {
                                'n' => '\n',
                                't' => '\t',
                                other => other,
                            });
                        }
                        c => s.push(c),
                    }
                }
                Ok(Spanned {
                    pos: start,
                    node: Node::Atom(SExpr::Str(s)),
                })
            }
            Some(_) => {
                let rest = &self.input[self.pos..];
                let len = rest
                    .find(|c: char| c.is_whitespace() || matches!(c, '(' | ')' | '"' | ';'))
                    .unwrap_or(rest.len());
                let tok = &rest[..len];
                self.pos += len;
                let atom = if tok.len() > 1 && tok.starts_with(':') {
                    SExpr::Keyword(tok.to_string())
                } else {
                    SExpr::Symbol(tok.to_string())
                };
                Ok(Spanned {
                    pos: start,
                    node: Node::Atom(atom),
                })
            }
        }
    }
}

fn read_one(input: &str) -> Result<Spanned, MalformedRequest> {
    let mut r = Reader { input, pos: 0 };
    let node = r.read()?;
    r.skip_ws();
    if r.pos < input.len() {
        return Err(r.err(r.pos, "trailing input after expression"));
    }
    Ok(node)
}

/// Parse exactly one s-expression.
pub fn parse_sexpr(input: &str) -> Result<SExpr, MalformedRequest> {
    read_one(input).map(|s| s.strip())
}

fn kw_eq(k: &str, want: &str) -> bool {
    k.eq_ignore_ascii_case(want)
}

/// `:key value` pairs following the head of a list.
fn keyword_args<'n>(
    input: &str,
    items: &'n [Spanned],
) -> Result<Vec<(&'n str, &'n Spanned)>, MalformedRequest> {
    let mut out = Vec::new();
    let mut it = items.iter();
    while let Some(k) = it.next() {
        let Some(name) = k.keyword() else {
            return Err(MalformedRequest::at(input, k.pos, "expected a :keyword"));
        };
        let Some(v) = it.next() else {
            return Err(MalformedRequest::at(
                input,
                k.pos,
                format!("{name} has no value"),
            ));
        };
        out.push((name, v));
    }
    Ok(out)
}

struct Fields<'n> {
    args: Vec<(&'n str, &'n Spanned)>,
}

impl<'n> Fields<'n> {
    fn get(&self, key: &str) -> Option<&'n Spanned> {
        self.args
            .iter()
            .find(|(k, _)| kw_eq(k, key))
            .map(|(_, v)| *v)
    }

    fn text(&self, input: &str, key: &str) -> Result<Option<String>, MalformedRequest> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.text().map(|s| Some(s.to_string())).ok_or_else(|| {
                MalformedRequest::at(input, v.pos, format!("{key} must be a string"))
            }),
        }
    }

    fn required(&self, input: &str, key: &str, at: usize) -> Result<String, MalformedRequest> {
        self.text(input, key)?
            .ok_or_else(|| MalformedRequest::at(input, at, format!("missing required field {key}")))
    }
}

fn concept(input: &str, raw: &str, at: usize) -> Result<ConceptKey, MalformedRequest> {
    ConceptKey::new(raw)
        .map_err(|_| MalformedRequest::at(input, at, format!("empty concept {raw:?}")))
}

fn parse_node(input: &str, node: &Spanned) -> Result<Candidate, MalformedRequest> {
    let Node::List(items) = &node.node else {
        return Err(MalformedRequest::at(
            input,
            node.pos,
            "expected a (TAG :field value ...) node",
        ));
    };
    let Some((tag, rest)) = items.split_first() else {
        return Err(MalformedRequest::at(input, node.pos, "empty node"));
    };
    let tag_text = match &tag.node {
        Node::Atom(SExpr::Symbol(s)) => s.as_str(),
        _ => {
            return Err(MalformedRequest::at(
                input,
                tag.pos,
                "node tag must be a symbol",
            ))
        }
    };
    let kind = CandidateKind::from_tag(tag_text).ok_or_else(|| {
        MalformedRequest::at(input, tag.pos, format!("unknown node tag {tag_text:?}"))
    })?;
    let fields = Fields {
        args: keyword_args(input, rest)?,
    };
    let det = fields.text(input, ":det")?;
    Ok(match kind {
        CandidateKind::Verb => {
            let verb = fields.required(input, ":verb", node.pos)?;
            Candidate::verb(concept(input, &verb, node.pos)?)
        }
        CandidateKind::NounPhrase => {
            let noun = fields.required(input, ":noun", node.pos)?;
            Candidate::noun_phrase(concept(input, &noun, node.pos)?, det)
        }
        CandidateKind::PrepPhrase => {
            let prep = fields.required(input, ":prep", node.pos)?;
            let noun = fields.required(input, ":noun", node.pos)?;
            Candidate::prep_phrase(prep, concept(input, &noun, node.pos)?, det)
        }
    })
}

/// Parse an `(:ambig-PP ...)` consultation message.
pub fn parse_request(input: &str) -> Result<AmbiguityRequest, MalformedRequest> {
    let root = read_one(input)?;
    let Node::List(items) = &root.node else {
        return Err(MalformedRequest::at(
            input,
            root.pos,
            "request must be a list",
        ));
    };
    let Some((head, rest)) = items.split_first() else {
        return Err(MalformedRequest::at(input, root.pos, "empty request"));
    };
    if !head.keyword().is_some_and(|k| kw_eq(k, ":ambig-pp")) {
        return Err(MalformedRequest::at(
            input,
            head.pos,
            "request must start with :ambig-PP",
        ));
    }
    let Some((pp, rest)) = rest.split_first() else {
        return Err(MalformedRequest::at(
            input,
            root.pos,
            "missing ambiguous PP node",
        ));
    };
    let pp_node = parse_node(input, pp)?;
    if pp_node.kind() != CandidateKind::PrepPhrase {
        return Err(MalformedRequest::at(
            input,
            pp.pos,
            "ambiguous phrase must be a PP node",
        ));
    }
    let fields = Fields {
        args: keyword_args(input, rest)?,
    };
    let Some(attachments) = fields.get(":possible-attachments") else {
        return Err(MalformedRequest::at(
            input,
            root.pos,
            "missing :possible-attachments",
        ));
    };
    let Node::List(nodes) = &attachments.node else {
        return Err(MalformedRequest::at(
            input,
            attachments.pos,
            ":possible-attachments must be a list",
        ));
    };
    if nodes.is_empty() {
        return Err(MalformedRequest::at(
            input,
            attachments.pos,
            "no possible attachments",
        ));
    }
    let candidates = nodes
        .iter()
        .map(|n| parse_node(input, n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AmbiguityRequest {
        preposition: pp_node.preposition().unwrap_or_default().to_string(),
        pp_noun: pp_node.head().clone(),
        pp_determiner: pp_node.determiner().map(str::to_string),
        candidates,
    })
}

fn candidate_sexpr(c: &Candidate) -> SExpr {
    let mut items = vec![SExpr::symbol(c.kind().tag())];
    if let Some(p) = c.preposition() {
        items.extend([SExpr::keyword(":prep"), SExpr::string(p)]);
    }
    if let Some(d) = c.determiner() {
        items.extend([SExpr::keyword(":det"), SExpr::string(d)]);
    }
    let field = if c.kind() == CandidateKind::Verb {
        ":verb"
    } else {
        ":noun"
    };
    items.extend([SExpr::keyword(field), SExpr::string(c.head().as_str())]);
    SExpr::List(items)
}

pub fn request_sexpr(req: &AmbiguityRequest) -> SExpr {
    let mut pp = vec![
        SExpr::symbol("PP"),
        SExpr::keyword(":prep"),
        SExpr::string(req.preposition.as_str()),
    ];
    if let Some(d) = &req.pp_determiner {
        pp.extend([SExpr::keyword(":det"), SExpr::string(d.as_str())]);
    }
    pp.extend([SExpr::keyword(":noun"), SExpr::string(req.pp_noun.as_str())]);
    SExpr::List(vec![
        SExpr::keyword(":ambig-PP"),
        SExpr::List(pp),
        SExpr::keyword(":possible-attachments"),
        SExpr::List(req.candidates.iter().map(candidate_sexpr).collect()),
    ])
}

/// Print a request in the indented layout parsers emit.
pub fn print_request(req: &AmbiguityRequest) -> String {
    let SExpr::List(parts) = request_sexpr(req) else {
        unreachable!()
    };
    let SExpr::List(cands) = &parts[3] else {
        unreachable!()
    };
    let mut out = format!("(:ambig-PP\n    {}\n :possible-attachments\n", parts[1]);
    for (i, c) in cands.iter().enumerate() {
        out.push_str(if i == 0 { "    ((" } else { "     (" });
        let s = c.to_string();
        out.push_str(&s[1..]);
        if i + 1 == cands.len() {
            out.push_str("))");
        } else {
            out.push('\n');
        }
    }
    out
}

/// Fields carried by a reply message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionReply {
    pub attach_to: usize,
    pub kind: CandidateKind,
    pub head: String,
    pub relation: Option<String>,
    pub weight: Option<f64>,
    pub source: ScoreSource,
}

impl DecisionReply {
    pub fn from_decision(d: &AttachmentDecision) -> Self {
        let score = d.chosen_score();
        let known = !d.defaulted;
        DecisionReply {
            attach_to: d.chosen_index,
            kind: d.chosen.kind(),
            head: d.chosen.head().to_string(),
            relation: score.relation.clone().filter(|_| known),
            weight: score.weight.filter(|_| known),
            source: if known {
                score.source
            } else {
                ScoreSource::None
            },
        }
    }
}

impl fmt::Display for DecisionReply {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(:attach-to {} :kind {} :head {}",
            self.attach_to,
            self.kind.tag(),
            SExpr::string(self.head.as_str())
        )?;
        if let Some(r) = &self.relation {
            write!(f, " :relation {}", SExpr::string(r.as_str()))?;
        }
        if let Some(w) = self.weight {
            // Debug keeps a trailing `.0` and round-trips exactly.
            write!(f, " :weight {w:?}")?;
        }
        write!(f, " :source {})", self.source.as_str())
    }
}

pub fn serialize_decision(d: &AttachmentDecision) -> String {
    DecisionReply::from_decision(d).to_string()
}

pub fn parse_decision(input: &str) -> Result<DecisionReply, MalformedRequest> {
    let root = read_one(input)?;
    let Node::List(items) = &root.node else {
        return Err(MalformedRequest::at(
            input,
            root.pos,
            "reply must be a list",
        ));
    };
    let fields = Fields {
        args: keyword_args(input, items)?,
    };
    let need = |key: &str| {
        fields.get(key).ok_or_else(|| {
            MalformedRequest::at(input, root.pos, format!("missing required field {key}"))
        })
    };
    let number = |node: &Spanned, key: &str| -> Result<String, MalformedRequest> {
        match &node.node {
            Node::Atom(SExpr::Symbol(s)) => Ok(s.clone()),
            _ => Err(MalformedRequest::at(
                input,
                node.pos,
                format!("{key} must be a number"),
            )),
        }
    };

    let at = need(":attach-to")?;
    let attach_to = number(at, ":attach-to")?
        .parse()
        .map_err(|_| MalformedRequest::at(input, at.pos, ":attach-to must be an index"))?;
    let kind_node = need(":kind")?;
    let kind = kind_node
        .symbol()
        .and_then(CandidateKind::from_tag)
        .ok_or_else(|| MalformedRequest::at(input, kind_node.pos, "unknown :kind"))?;
    let head = fields.required(input, ":head", root.pos)?;
    let relation = fields.text(input, ":relation")?;
    let weight = match fields.get(":weight") {
        None => None,
        Some(w) => Some(
            number(w, ":weight")?
                .parse()
                .map_err(|_| MalformedRequest::at(input, w.pos, ":weight must be a number"))?,
        ),
    };
    let src_node = need(":source")?;
    let source = match src_node.symbol().map(str::to_ascii_lowercase).as_deref() {
        Some("kb") => ScoreSource::Kb,
        Some("fallback") => ScoreSource::Fallback,
        Some("none") => ScoreSource::None,
        _ => return Err(MalformedRequest::at(input, src_node.pos, "unknown :source")),
    };
    Ok(DecisionReply {
        attach_to,
        kind,
        head,
        relation,
        weight,
        source,
    })
}

/// A `[subject relation object]` line of parser output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Triple {
    /// Returns `None` if any field is blank.
    pub fn new(subject: &str, relation: &str, object: &str) -> Option<Self> {
        let fields = [subject.trim(), relation.trim(), object.trim()];
        if fields.iter().any(|f| f.is_empty()) {
            return None;
        }
        Some(Triple {
            subject: fields[0].to_string(),
            relation: fields[1].to_string(),
            object: fields[2].to_string(),
        })
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} {} {}]", self.subject, self.relation, self.object)
    }
}

/// A prepositional phrase in sentence order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PpSlot {
    pub preposition: String,
    /// Lemmatized noun.
    pub noun: String,
    pub quantity: Option<String>,
}

impl PpSlot {
    pub fn new(preposition: &str, noun: &str, determiner: Option<&str>) -> Self {
        PpSlot {
            preposition: preposition.to_string(),
            noun: noun.to_string(),
            quantity: determiner.and_then(quantity_of).map(|n| n.to_string()),
        }
    }
}

/// Numeric value of a cardinal determiner (`one` -> 1).
pub fn quantity_of(determiner: &str) -> Option<u32> {
    const WORDS: [&str; 10] = [
        "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    ];
    let d = determiner.trim().to_ascii_lowercase();
    WORDS
        .iter()
        .position(|w| *w == d)
        .map(|i| i as u32 + 1)
        .or_else(|| d.parse().ok())
}

/// The attachment of PP number `pp` (sentence order) to `head`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attachment {
    pub pp: usize,
    pub head: String,
}

/// Render final output: skeleton triples, then one `[head prep noun]` per
/// attachment in decision order, then `[noun has_quantity n]` for each
/// quantified PP in sentence order.
pub fn render_triples(base: &[Triple], pps: &[PpSlot], attachments: &[Attachment]) -> String {
    let mut lines: Vec<String> = base.iter().map(Triple::to_string).collect();
    for a in attachments {
        if let Some(pp) = pps.get(a.pp) {
            lines.push(format!("[{} {} {}]", a.head, pp.preposition, pp.noun));
        }
    }
    for pp in pps {
        if let Some(q) = &pp.quantity {
            lines.push(format!("[{} has_quantity {}]", pp.noun, q));
        }
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}
