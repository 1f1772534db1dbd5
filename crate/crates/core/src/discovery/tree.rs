use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::log::Activity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operator {
    Sequence,
    Exclusive,
    Parallel,
    /// First child is the do-part, the others are redo-parts.
    Loop,
}

impl Operator {
    fn symbol(self) -> &'static str {
        match self {
            Operator::Sequence => "->",
            Operator::Exclusive => "X",
            Operator::Parallel => "+",
            Operator::Loop => "*",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProcessTree {
    Leaf(Activity),
    Tau,
    Node(Operator, Vec<ProcessTree>),
}

impl ProcessTree {
    pub fn leaf(name: &str) -> Self {
        ProcessTree::Leaf(Activity::new(name))
    }

    pub fn seq(children: Vec<ProcessTree>) -> Self {
        ProcessTree::Node(Operator::Sequence, children)
    }

    pub fn xor(children: Vec<ProcessTree>) -> Self {
        ProcessTree::Node(Operator::Exclusive, children)
    }

    pub fn par(children: Vec<ProcessTree>) -> Self {
        ProcessTree::Node(Operator::Parallel, children)
    }

    pub fn looped(children: Vec<ProcessTree>) -> Self {
        ProcessTree::Node(Operator::Loop, children)
    }

    /// Loop of τ with every activity as a redo child.
    pub fn flower<I: IntoIterator<Item = Activity>>(acts: I) -> Self {
        let mut children = vec![ProcessTree::Tau];
        children.extend(acts.into_iter().map(ProcessTree::Leaf));
        ProcessTree::looped(children)
    }

    pub fn activities(&self) -> BTreeSet<Activity> {
        let mut out = BTreeSet::new();
        self.collect_activities(&mut out);
        out
    }

    fn collect_activities(&self, out: &mut BTreeSet<Activity>) {
        match self {
            ProcessTree::Leaf(a) => {
                out.insert(a.clone());
            }
            ProcessTree::Tau => {}
            ProcessTree::Node(_, ch) => ch.iter().for_each(|c| c.collect_activities(out)),
        }
    }

    /// Every operator has at least two children.
    pub fn is_valid(&self) -> bool {
        match self {
            ProcessTree::Leaf(_) | ProcessTree::Tau => true,
            ProcessTree::Node(_, ch) => ch.len() >= 2 && ch.iter().all(ProcessTree::is_valid),
        }
    }
}

impl fmt::Display for ProcessTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessTree::Leaf(a) => write!(f, "'{a}'"),
            ProcessTree::Tau => f.write_str("tau"),
            ProcessTree::Node(op, ch) => {
                write!(f, "{}(", op.symbol())?;
                for (i, c) in ch.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Parses the notation produced by `Display`, e.g. `->('a', X('b', tau))`.
/// Leaf names are plain activity names (atomic lifecycle).
impl FromStr for ProcessTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = TreeParser { s: s.as_bytes(), i: 0 };
        let t = p.tree()?;
        p.ws();
        if p.i != p.s.len() {
            return Err(p.err("trailing input"));
        }
        Ok(t)
    }
}

struct TreeParser<'a> {
    s: &'a [u8],
    i: usize,
}

impl TreeParser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::InvalidParameter(format!("process tree at byte {}: {msg}", self.i))
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.ws();
        if self.s[self.i..].starts_with(tok.as_bytes()) {
            self.i += tok.len();
            true
        } else {
            false
        }
    }

    fn tree(&mut self) -> Result<ProcessTree> {
        self.ws();
        if self.eat("'") {
            let start = self.i;
            while self.i < self.s.len() && self.s[self.i] != b'\'' {
                self.i += 1;
            }
            if self.i == self.s.len() {
                return Err(self.err("unterminated name"));
            }
            let name = std::str::from_utf8(&self.s[start..self.i])
                .map_err(|_| self.err("invalid UTF-8"))?
                .to_string();
            self.i += 1;
            return Ok(ProcessTree::Leaf(Activity::new(name)));
        }
        if self.eat("tau") {
            return Ok(ProcessTree::Tau);
        }
        let op = if self.eat("->") {
            Operator::Sequence
        } else if self.eat("X") {
            Operator::Exclusive
        } else if self.eat("+") {
            Operator::Parallel
        } else if self.eat("*") {
            Operator::Loop
        } else {
            return Err(self.err("expected leaf, tau or operator"));
        };
        if !self.eat("(") {
            return Err(self.err("expected `(`"));
        }
        let mut children = vec![self.tree()?];
        while self.eat(",") {
            children.push(self.tree()?);
        }
        if !self.eat(")") {
            return Err(self.err("expected `)`"));
        }
        Ok(ProcessTree::Node(op, children))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_parse_round_trip() {
        let t: ProcessTree = "->('a', X('b', tau), *('c', 'd'), +('e', 'f'))".parse().unwrap();
        assert!(t.is_valid());
        assert_eq!(t.to_string().parse::<ProcessTree>().unwrap(), t);
        assert_eq!(t.activities().len(), 6);
    }

    #[test]
    fn rejects_garbage() {
        assert!("->('a'".parse::<ProcessTree>().is_err());
        assert!("foo".parse::<ProcessTree>().is_err());
        assert!(!ProcessTree::seq(vec![ProcessTree::leaf("a")]).is_valid());
    }
}
