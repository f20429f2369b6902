use std::collections::BTreeMap;
use std::fmt;

pub const ROOT_TYPE: &str = "object";

/// A name with its declared type: `?x - disk` or `d1 - disk`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypedName {
    pub name: String,
    pub ty: String,
}

impl TypedName {
    pub fn new(name: impl Into<String>, ty: impl Into<String>) -> Self {
        TypedName { name: name.into(), ty: ty.into() }
    }
}

/// Predicate applied to arguments. Arguments starting with `?` are
/// variables; everything else is an object name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<S: Into<String>>(predicate: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        Atom { predicate: predicate.into(), args: args.into_iter().map(Into::into).collect() }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Predicate {
    pub name: String,
    pub params: Vec<TypedName>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Operator {
    pub name: String,
    pub params: Vec<TypedName>,
    pub pre: Vec<Atom>,
    pub add: Vec<Atom>,
    pub del: Vec<Atom>,
}

/// Declared types with their parents; `object` is the implicit root.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TypeForest {
    parents: BTreeMap<String, String>,
    order: Vec<String>,
}

impl TypeForest {
    pub fn declare(&mut self, name: &str, parent: &str) {
        if name == ROOT_TYPE {
            return;
        }
        if self.parents.insert(name.to_string(), parent.to_string()).is_none() {
            self.order.push(name.to_string());
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        name == ROOT_TYPE || self.parents.contains_key(name)
    }

    /// Declared types in declaration order, paired with their parent.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.order.iter().map(|t| (t.as_str(), self.parents[t].as_str()))
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// True when `ty` equals `ancestor` or descends from it.
    pub fn is_subtype(&self, ty: &str, ancestor: &str) -> bool {
        if ancestor == ROOT_TYPE {
            return true;
        }
        let mut cur = ty;
        // The parent chain is finite unless the file declares a cycle, so
        // bound the walk by the number of declared types.
        for _ in 0..=self.order.len() {
            if cur == ancestor {
                return true;
            }
            match self.parents.get(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
        false
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainModel {
    pub name: String,
    pub requirements: Vec<String>,
    pub types: TypeForest,
    pub predicates: Vec<Predicate>,
    pub operators: Vec<Operator>,
}

impl DomainModel {
    pub fn predicate(&self, name: &str) -> Option<&Predicate> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn operator(&self, name: &str) -> Option<&Operator> {
        self.operators.iter().find(|o| o.name == name)
    }

    /// Predicates that no operator adds or deletes.
    pub fn static_predicates(&self) -> Vec<&str> {
        self.predicates
            .iter()
            .map(|p| p.name.as_str())
            .filter(|name| {
                !self
                    .operators
                    .iter()
                    .any(|o| o.add.iter().chain(&o.del).any(|a| a.predicate == *name))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: String,
    pub objects: Vec<TypedName>,
    pub init: Vec<Atom>,
    pub goal: Vec<Atom>,
    pub candidates: Option<Vec<Vec<Atom>>>,
}

fn write_typed_list(f: &mut fmt::Formatter<'_>, items: &[TypedName]) -> fmt::Result {
    let mut first = true;
    let mut i = 0;
    while i < items.len() {
        let ty = &items[i].ty;
        let mut j = i;
        while j < items.len() && items[j].ty == *ty {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{}", items[j].name)?;
            j += 1;
        }
        write!(f, " - {ty}")?;
        i = j;
    }
    Ok(())
}

fn write_conjunction(f: &mut fmt::Formatter<'_>, atoms: &[Atom], negated: &[Atom]) -> fmt::Result {
    write!(f, "(and")?;
    for a in atoms {
        write!(f, " {a}")?;
    }
    for a in negated {
        write!(f, " (not {a})")?;
    }
    write!(f, ")")
}

impl fmt::Display for DomainModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (domain {})", self.name)?;
        if !self.requirements.is_empty() {
            writeln!(f, "  (:requirements {})", self.requirements.join(" "))?;
        }
        if !self.types.is_empty() {
            write!(f, "  (:types")?;
            for (t, parent) in self.types.iter() {
                write!(f, " {t} - {parent}")?;
            }
            writeln!(f, ")")?;
        }
        write!(f, "  (:predicates")?;
        for p in &self.predicates {
            write!(f, "\n    ({}", p.name)?;
            if !p.params.is_empty() {
                write!(f, " ")?;
                write_typed_list(f, &p.params)?;
            }
            write!(f, ")")?;
        }
        writeln!(f, ")")?;
        for op in &self.operators {
            writeln!(f, "  (:action {}", op.name)?;
            write!(f, "    :parameters (")?;
            write_typed_list(f, &op.params)?;
            writeln!(f, ")")?;
            write!(f, "    :precondition ")?;
            write_conjunction(f, &op.pre, &[])?;
            write!(f, "\n    :effect ")?;
            write_conjunction(f, &op.add, &op.del)?;
            writeln!(f, ")")?;
        }
        writeln!(f, ")")
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (problem {})", self.name)?;
        writeln!(f, "  (:domain {})", self.domain)?;
        write!(f, "  (:objects ")?;
        write_typed_list(f, &self.objects)?;
        writeln!(f, ")")?;
        write!(f, "  (:init")?;
        for a in &self.init {
            write!(f, "\n    {a}")?;
        }
        writeln!(f, ")")?;
        write!(f, "  (:goal ")?;
        write_conjunction(f, &self.goal, &[])?;
        writeln!(f, ")")?;
        if let Some(cands) = &self.candidates {
            write!(f, "  (:candidates")?;
            for c in cands {
                write!(f, "\n    ")?;
                write_conjunction(f, c, &[])?;
            }
            writeln!(f, ")")?;
        }
        writeln!(f, ")")
    }
}
