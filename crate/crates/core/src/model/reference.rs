//! Textual entity references: `DS_x`, `DS_x:R_y`, `DS_x:latest`,
//! `TR_x:R_y:E_z` and route literals `[a, b, ...]`.
//!
//! The relative suffixes `earliest`, `latest` and `head-k` are keywords in
//! the second position of a pair, so a revision literally named `latest`
//! cannot be addressed through that form.

use std::fmt;

use super::id::{EntityId, RESERVED_CHARS};

/// Relative position of a revision within its dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelativePos {
    Earliest,
    /// `head-k`: the revision k steps back from the newest. `latest` is `Head(0)`.
    Head(u64),
}

impl RelativePos {
    pub const LATEST: RelativePos = RelativePos::Head(0);
}

/// Second segment of a `container:member` pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Member {
    Id(EntityId),
    Relative(RelativePos),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityRef {
    /// A bare identifier of any kind.
    Entity(EntityId),
    /// `dataset:revision`. The same shape is accepted as `transform:execution`
    /// shorthand when resolving against a store.
    Revision { dataset: EntityId, member: Member },
    /// `transform:revision:execution`.
    Execution { transform: EntityId, revision: EntityId, execution: EntityId },
    Route(Vec<EntityRef>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at byte {offset}: {message}")]
pub struct RefSyntaxError {
    pub offset: usize,
    pub message: String,
}

fn is_ident_char(c: char) -> bool {
    !c.is_whitespace() && !RESERVED_CHARS.contains(&c)
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, offset: usize, message: impl Into<String>) -> Result<T, RefSyntaxError> {
        Err(RefSyntaxError { offset, message: message.into() })
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if !is_ident_char(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        (self.pos > start).then(|| &self.text[start..self.pos])
    }

    fn expect_ident(&mut self, after_colon: Option<usize>) -> Result<&'a str, RefSyntaxError> {
        match self.ident() {
            Some(s) => Ok(s),
            None => match (after_colon, self.peek()) {
                (Some(colon), None) => self.err(colon, "trailing ':' without identifier"),
                (_, None) => self.err(self.pos, "expected identifier, found end of input"),
                (_, Some(c)) => self.err(self.pos, format!("expected identifier, found {c:?}")),
            },
        }
    }

    fn path(&mut self) -> Result<EntityRef, RefSyntaxError> {
        let first = self.expect_ident(None)?;
        let mut segments = vec![(first, self.pos - first.len())];
        while self.peek() == Some(':') {
            let colon = self.pos;
            self.pos += 1;
            let seg = self.expect_ident(Some(colon))?;
            segments.push((seg, self.pos - seg.len()));
        }
        match segments.as_slice() {
            [(id, _)] => Ok(EntityRef::Entity(EntityId::from(*id))),
            [(dataset, _), (member, at)] => Ok(EntityRef::Revision {
                dataset: EntityId::from(*dataset),
                member: parse_member(member, *at)?,
            }),
            [(t, _), (r, r_at), (e, e_at)] => {
                for (seg, at) in [(r, r_at), (e, e_at)] {
                    if relative_keyword(seg, *at)?.is_some() {
                        return self.err(*at, format!("relative position `{seg}` is only valid after a dataset"));
                    }
                }
                Ok(EntityRef::Execution {
                    transform: EntityId::from(*t),
                    revision: EntityId::from(*r),
                    execution: EntityId::from(*e),
                })
            }
            [_, _, _, (_, at), ..] => self.err(*at - 1, "too many ':'-separated segments"),
            [] => unreachable!(),
        }
    }

    fn route(&mut self) -> Result<EntityRef, RefSyntaxError> {
        // at '['
        self.pos += 1;
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(']') {
            self.pos += 1;
            return Ok(EntityRef::Route(items));
        }
        loop {
            self.skip_ws();
            if self.peek() == Some('[') {
                return self.err(self.pos, "routes cannot be nested");
            }
            items.push(self.path()?);
            self.skip_ws();
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(']') => {
                    self.pos += 1;
                    return Ok(EntityRef::Route(items));
                }
                Some(c) => return self.err(self.pos, format!("expected ',' or ']', found {c:?}")),
                None => return self.err(self.pos, "unterminated route, expected ']'"),
            }
        }
    }
}

fn relative_keyword(seg: &str, at: usize) -> Result<Option<RelativePos>, RefSyntaxError> {
    Ok(match seg {
        "earliest" => Some(RelativePos::Earliest),
        "latest" => Some(RelativePos::LATEST),
        _ => match seg.strip_prefix("head-") {
            Some(digits) => {
                let k = digits.parse::<u64>().ok().filter(|_| digits.bytes().all(|b| b.is_ascii_digit()));
                match k {
                    Some(k) => Some(RelativePos::Head(k)),
                    None => {
                        return Err(RefSyntaxError {
                            offset: at + "head-".len(),
                            message: format!("`head-` must be followed by a non-negative integer, found {digits:?}"),
                        })
                    }
                }
            }
            None => None,
        },
    })
}

fn parse_member(seg: &str, at: usize) -> Result<Member, RefSyntaxError> {
    Ok(match relative_keyword(seg, at)? {
        Some(rel) => Member::Relative(rel),
        None => Member::Id(EntityId::from(seg)),
    })
}

/// Parses the textual notation into a structured reference.
pub fn parse_entity_ref(text: &str) -> Result<EntityRef, RefSyntaxError> {
    let mut p = Parser { text, pos: 0 };
    p.skip_ws();
    let parsed = match p.peek() {
        None => return p.err(p.pos, "empty reference"),
        Some('[') => p.route()?,
        Some(_) => p.path()?,
    };
    p.skip_ws();
    match p.peek() {
        None => Ok(parsed),
        Some(c) => p.err(p.pos, format!("unexpected {c:?} after reference")),
    }
}

/// Canonical textual form. Inverse of [`parse_entity_ref`].
pub fn format_entity_ref(r: &EntityRef) -> String {
    r.to_string()
}

impl fmt::Display for RelativePos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelativePos::Earliest => f.write_str("earliest"),
            RelativePos::Head(0) => f.write_str("latest"),
            RelativePos::Head(k) => write!(f, "head-{k}"),
        }
    }
}

impl fmt::Display for Member {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Member::Id(id) => id.fmt(f),
            Member::Relative(rel) => rel.fmt(f),
        }
    }
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityRef::Entity(id) => id.fmt(f),
            EntityRef::Revision { dataset, member } => write!(f, "{dataset}:{member}"),
            EntityRef::Execution { transform, revision, execution } => {
                write!(f, "{transform}:{revision}:{execution}")
            }
            EntityRef::Route(items) => {
                f.write_str("[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    item.fmt(f)?;
                }
                f.write_str("]")
            }
        }
    }
}

impl std::str::FromStr for EntityRef {
    type Err = RefSyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_entity_ref(s)
    }
}
