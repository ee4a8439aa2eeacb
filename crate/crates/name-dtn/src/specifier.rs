//! The bracketed attribute-value name-specifier language.
//!
//! A name-specifier is a tree of av-pairs: an av-pair only makes sense in
//! the context of its parent, and siblings are orthogonal categories.
//! The text form uses `[` and `]` for nesting and `=` between attribute and
//! value, e.g.
//!
//! ```text
//! [role=general [mission=command]] [location=known [longitude=116 degrees]]
//! ```
//!
//! Whitespace between tokens and brackets is arbitrary. Values may contain
//! internal spaces (`116 degrees`); a value token runs from the `=` to the
//! next bracket and internal whitespace runs are collapsed to single spaces.
//! Canonical form sorts siblings by attribute, so structural equality is
//! order-independent.

use std::fmt;

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SpecifierError {
    #[error("unbalanced brackets")]
    UnbalancedBrackets,
    #[error("group without '=' between attribute and value")]
    MissingEquals,
    #[error("empty attribute or value token")]
    EmptyToken,
    #[error("duplicate sibling attribute {0:?}")]
    DuplicateSiblingAttribute(String),
    #[error("specifier has no av-pairs")]
    EmptySpecifier,
    #[error("invalid attribute token {0:?}")]
    InvalidAttribute(String),
    #[error("unexpected '=' inside value token")]
    UnexpectedEquals,
}

/// One attribute-value pair with its dependent children, in canonical form
/// (children sorted by attribute, values whitespace-normalized).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AvPair {
    attribute: String,
    value: String,
    children: Vec<AvPair>,
}

impl AvPair {
    /// Builds a canonical av-pair. The value is trimmed and internal
    /// whitespace runs are collapsed; children are sorted by attribute.
    pub fn new(
        attribute: impl Into<String>,
        value: impl Into<String>,
        children: Vec<AvPair>,
    ) -> Result<Self, SpecifierError> {
        let attribute = attribute.into();
        validate_attribute(&attribute)?;
        let value = normalize_value(&value.into())?;
        let children = canonicalize_siblings(children)?;
        Ok(AvPair { attribute, value, children })
    }

    /// Leaf av-pair, no children.
    pub fn leaf(
        attribute: impl Into<String>,
        value: impl Into<String>,
    ) -> Result<Self, SpecifierError> {
        AvPair::new(attribute, value, Vec::new())
    }

    pub fn attribute(&self) -> &str {
        &self.attribute
    }

    pub fn value(&self) -> &str {
        &self.value
    }

    pub fn children(&self) -> &[AvPair] {
        &self.children
    }
}

/// A full name-specifier: a non-empty forest of av-pairs with pairwise
/// distinct root attributes, kept in canonical sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NameSpecifier {
    roots: Vec<AvPair>,
}

impl NameSpecifier {
    pub fn new(roots: Vec<AvPair>) -> Result<Self, SpecifierError> {
        if roots.is_empty() {
            return Err(SpecifierError::EmptySpecifier);
        }
        let roots = canonicalize_siblings(roots)?;
        Ok(NameSpecifier { roots })
    }

    pub fn roots(&self) -> &[AvPair] {
        &self.roots
    }

    /// Parses the bracketed text form into a canonical specifier.
    pub fn parse(text: &str) -> Result<Self, SpecifierError> {
        let mut parser = Parser {
            chars: text.char_indices().peekable(),
            text,
        };
        let mut roots = Vec::new();
        loop {
            parser.skip_whitespace();
            match parser.peek() {
                None => break,
                Some('[') => roots.push(parser.parse_group()?),
                Some(']') => return Err(SpecifierError::UnbalancedBrackets),
                Some(_) => return Err(SpecifierError::UnbalancedBrackets),
            }
        }
        NameSpecifier::new(roots)
    }

    /// Canonical text form; `parse(serialize(ns)) == ns`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (i, root) in self.roots.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            serialize_pair(root, &mut out);
        }
        out
    }

    /// Subsumption test: does `self`, read as a query, match the (possibly
    /// more specific) advertised specifier?
    ///
    /// Every root of the query must find an advert root with the same
    /// attribute and exactly equal value, recursively for children. A query
    /// pair with no children matches regardless of the advert pair's
    /// children: omitted attributes mean "don't care".
    pub fn matches(&self, advert: &NameSpecifier) -> bool {
        siblings_match(&self.roots, &advert.roots)
    }
}

impl fmt::Display for NameSpecifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

impl std::str::FromStr for NameSpecifier {
    type Err = SpecifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NameSpecifier::parse(s)
    }
}

fn siblings_match(query: &[AvPair], advert: &[AvPair]) -> bool {
    query.iter().all(|q| {
        advert
            .iter()
            .any(|a| a.attribute == q.attribute && a.value == q.value && siblings_match(&q.children, &a.children))
    })
}

fn serialize_pair(pair: &AvPair, out: &mut String) {
    out.push('[');
    out.push_str(&pair.attribute);
    out.push('=');
    out.push_str(&pair.value);
    for child in &pair.children {
        out.push(' ');
        serialize_pair(child, out);
    }
    out.push(']');
}

fn validate_attribute(attr: &str) -> Result<(), SpecifierError> {
    if attr.is_empty() {
        return Err(SpecifierError::EmptyToken);
    }
    if attr.chars().any(|c| c.is_whitespace() || matches!(c, '[' | ']' | '=')) {
        return Err(SpecifierError::InvalidAttribute(attr.to_string()));
    }
    Ok(())
}

fn normalize_value(raw: &str) -> Result<String, SpecifierError> {
    if raw.chars().any(|c| matches!(c, '[' | ']')) {
        return Err(SpecifierError::UnbalancedBrackets);
    }
    if raw.contains('=') {
        return Err(SpecifierError::UnexpectedEquals);
    }
    let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    if collapsed.is_empty() {
        return Err(SpecifierError::EmptyToken);
    }
    Ok(collapsed)
}

fn canonicalize_siblings(mut pairs: Vec<AvPair>) -> Result<Vec<AvPair>, SpecifierError> {
    pairs.sort_by(|a, b| a.attribute.cmp(&b.attribute));
    for w in pairs.windows(2) {
        if w[0].attribute == w[1].attribute {
            return Err(SpecifierError::DuplicateSiblingAttribute(w[0].attribute.clone()));
        }
    }
    Ok(pairs)
}

struct Parser<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    text: &'a str,
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn bump(&mut self) -> Option<(usize, char)> {
        self.chars.next()
    }

    fn skip_whitespace(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    /// Parses one `[ attribute = value children... ]` group; the opening
    /// bracket is the next character.
    fn parse_group(&mut self) -> Result<AvPair, SpecifierError> {
        let (_, open) = self.bump().ok_or(SpecifierError::UnbalancedBrackets)?;
        debug_assert_eq!(open, '[');

        // Attribute token: everything up to '='.
        let attr_start = match self.chars.peek() {
            Some(&(i, _)) => i,
            None => return Err(SpecifierError::UnbalancedBrackets),
        };
        let attr_end;
        loop {
            match self.peek() {
                Some('=') => {
                    attr_end = self.bump().unwrap().0;
                    break;
                }
                Some('[') | Some(']') | None => return Err(SpecifierError::MissingEquals),
                Some(_) => {
                    self.bump();
                }
            }
        }
        let attribute = self.text[attr_start..attr_end].trim().to_string();
        if attribute.is_empty() {
            return Err(SpecifierError::EmptyToken);
        }
        validate_attribute(&attribute)?;

        // Value token: runs to the next bracket.
        let value_start = match self.chars.peek() {
            Some(&(i, _)) => i,
            None => return Err(SpecifierError::UnbalancedBrackets),
        };
        let value_end;
        loop {
            match self.chars.peek() {
                Some(&(i, '[')) | Some(&(i, ']')) => {
                    value_end = i;
                    break;
                }
                Some(_) => {
                    self.bump();
                }
                None => return Err(SpecifierError::UnbalancedBrackets),
            }
        }
        let value = normalize_value(&self.text[value_start..value_end])?;

        // Children until the closing bracket.
        let mut children = Vec::new();
        loop {
            self.skip_whitespace();
            match self.peek() {
                Some('[') => children.push(self.parse_group()?),
                Some(']') => {
                    self.bump();
                    break;
                }
                None => return Err(SpecifierError::UnbalancedBrackets),
                // Trailing text after the value inside a group.
                Some(_) => return Err(SpecifierError::MissingEquals),
            }
        }

        AvPair::new(attribute, value, children)
    }
}
