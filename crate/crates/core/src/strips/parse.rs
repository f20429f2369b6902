use std::collections::{HashMap, HashSet};

use thiserror::Error;

use super::model::{Atom, DomainModel, Operator, Predicate, ProblemSpec, TypeForest, TypedName, ROOT_TYPE};
use super::sexpr::{self, Pos, Sexpr};

pub const SUPPORTED_REQUIREMENTS: &[&str] = &[":strips", ":typing"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PddlError {
    #[error("syntax error at {pos}: expected {expected}, found `{found}`")]
    Syntax { pos: Pos, expected: String, found: String },
    #[error("{pos}: unsupported requirement `{flag}`")]
    UnsupportedRequirement { pos: Pos, flag: String },
    #[error("{pos}: negative preconditions are not supported")]
    NegativePrecondition { pos: Pos },
    #[error("{pos}: undeclared predicate `{name}`")]
    UndeclaredPredicate { pos: Pos, name: String },
    #[error("{pos}: undeclared type `{name}`")]
    UndeclaredType { pos: Pos, name: String },
    #[error("{pos}: unknown object `{name}`")]
    UnknownObject { pos: Pos, name: String },
    #[error("{pos}: variable `{name}` is not a parameter of `{operator}`")]
    UnboundVariable { pos: Pos, name: String, operator: String },
    #[error("{pos}: `{predicate}` takes {expected} arguments, got {found}")]
    Arity { pos: Pos, predicate: String, expected: usize, found: usize },
    #[error("{pos}: argument `{arg}` of `{predicate}` has type `{found}`, expected `{expected}`")]
    TypeMismatch { pos: Pos, predicate: String, arg: String, expected: String, found: String },
    #[error("{pos}: duplicate operator `{name}`")]
    DuplicateOperator { pos: Pos, name: String },
    #[error("{pos}: problem targets domain `{found}`, expected `{expected}`")]
    DomainMismatch { pos: Pos, expected: String, found: String },
}

impl From<sexpr::SexprError> for PddlError {
    fn from(e: sexpr::SexprError) -> Self {
        PddlError::Syntax { pos: e.pos, expected: e.expected, found: e.found }
    }
}

type Result<T> = std::result::Result<T, PddlError>;

fn syntax(at: &Sexpr, expected: &str) -> PddlError {
    PddlError::Syntax { pos: at.pos(), expected: expected.to_string(), found: at.describe() }
}

fn list<'a>(e: &'a Sexpr, expected: &str) -> Result<&'a [Sexpr]> {
    e.as_list().ok_or_else(|| syntax(e, expected))
}

fn symbol<'a>(e: &'a Sexpr, expected: &str) -> Result<&'a str> {
    e.as_atom().ok_or_else(|| syntax(e, expected))
}

fn keyword(e: &Sexpr, kw: &str) -> Result<()> {
    match e.as_atom() {
        Some(s) if s == kw => Ok(()),
        _ => Err(syntax(e, &format!("`{kw}`"))),
    }
}

fn end_of(items: &[Sexpr], parent: &Sexpr) -> Pos {
    items.last().map(Sexpr::pos).unwrap_or(parent.pos())
}

/// Splits `(define (<kind> NAME) sections...)` into name and sections.
fn split_define<'a>(root: &'a Sexpr, kind: &str) -> Result<(&'a str, &'a [Sexpr])> {
    let items = list(root, "`(define ...)`")?;
    let head = items.first().ok_or_else(|| syntax(root, "`define`"))?;
    keyword(head, "define")?;
    let header = items.get(1).ok_or_else(|| PddlError::Syntax {
        pos: end_of(items, root),
        expected: format!("`({kind} NAME)`"),
        found: ")".into(),
    })?;
    let h = list(header, &format!("`({kind} NAME)`"))?;
    if h.len() != 2 {
        return Err(syntax(header, &format!("`({kind} NAME)`")));
    }
    keyword(&h[0], kind)?;
    let name = symbol(&h[1], "a name")?;
    Ok((name, &items[2..]))
}

/// Parses `a b - t c - u d` into typed names; untyped trailing names get `object`.
fn typed_list(items: &[Sexpr], variables: bool) -> Result<Vec<(TypedName, Pos)>> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let s = symbol(&items[i], "a name")?;
        if s == "-" {
            let ty_expr = items.get(i + 1).ok_or_else(|| syntax(&items[i], "a type after `-`"))?;
            let ty = symbol(ty_expr, "a type name")?;
            if pending.is_empty() {
                return Err(syntax(&items[i], "a name before `-`"));
            }
            for (n, p) in pending.drain(..) {
                out.push((TypedName::new(n, ty), p));
            }
            i += 2;
            continue;
        }
        if variables != s.starts_with('?') {
            let what = if variables { "a variable (`?name`)" } else { "an object name" };
            return Err(syntax(&items[i], what));
        }
        pending.push((s.to_string(), items[i].pos()));
        i += 1;
    }
    for (n, p) in pending {
        out.push((TypedName::new(n, ROOT_TYPE), p));
    }
    Ok(out)
}

fn parse_atom(e: &Sexpr) -> Result<(Atom, Pos)> {
    let items = list(e, "an atom `(pred args...)`")?;
    let head = items.first().ok_or_else(|| syntax(e, "an atom `(pred args...)`"))?;
    let pred = symbol(head, "a predicate name")?;
    if pred == "and" || pred == "not" || pred == "-" {
        return Err(syntax(head, "a predicate name"));
    }
    let args = items[1..].iter().map(|a| symbol(a, "an argument").map(str::to_string)).collect::<Result<Vec<_>>>()?;
    Ok((Atom { predicate: pred.to_string(), args }, e.pos()))
}

/// A conjunction: `()`, `(and ...)` or a single atom.
fn conjuncts(e: &Sexpr) -> Result<Vec<&Sexpr>> {
    let items = list(e, "a condition")?;
    match items.first().and_then(Sexpr::as_atom) {
        None if items.is_empty() => Ok(Vec::new()),
        Some("and") => Ok(items[1..].iter().collect()),
        _ => Ok(vec![e]),
    }
}

fn parse_precondition(e: &Sexpr) -> Result<Vec<(Atom, Pos)>> {
    conjuncts(e)?
        .into_iter()
        .map(|c| {
            if let Some(items) = c.as_list() {
                if items.first().and_then(Sexpr::as_atom) == Some("not") {
                    return Err(PddlError::NegativePrecondition { pos: c.pos() });
                }
            }
            parse_atom(c)
        })
        .collect()
}

type EffectLists = (Vec<(Atom, Pos)>, Vec<(Atom, Pos)>);

fn parse_effect(e: &Sexpr) -> Result<EffectLists> {
    let mut add = Vec::new();
    let mut del = Vec::new();
    for c in conjuncts(e)? {
        let items = list(c, "an effect literal")?;
        if items.first().and_then(Sexpr::as_atom) == Some("not") {
            if items.len() != 2 {
                return Err(syntax(c, "`(not (pred args...))`"));
            }
            del.push(parse_atom(&items[1])?);
        } else {
            add.push(parse_atom(c)?);
        }
    }
    Ok((add, del))
}

struct DomainChecker<'a> {
    types: &'a TypeForest,
    predicates: HashMap<&'a str, &'a Predicate>,
}

impl DomainChecker<'_> {
    fn check_type(&self, ty: &str, pos: Pos) -> Result<()> {
        if self.types.contains(ty) {
            Ok(())
        } else {
            Err(PddlError::UndeclaredType { pos, name: ty.to_string() })
        }
    }

    /// Checks predicate existence, arity, and argument types. `type_of`
    /// resolves an argument to its declared type or reports why it cannot.
    fn check_atom(&self, atom: &Atom, pos: Pos, type_of: &dyn Fn(&str) -> Result<String>) -> Result<()> {
        let pred = self
            .predicates
            .get(atom.predicate.as_str())
            .ok_or_else(|| PddlError::UndeclaredPredicate { pos, name: atom.predicate.clone() })?;
        if pred.params.len() != atom.args.len() {
            return Err(PddlError::Arity {
                pos,
                predicate: atom.predicate.clone(),
                expected: pred.params.len(),
                found: atom.args.len(),
            });
        }
        for (arg, param) in atom.args.iter().zip(&pred.params) {
            let ty = type_of(arg)?;
            if !self.types.is_subtype(&ty, &param.ty) {
                return Err(PddlError::TypeMismatch {
                    pos,
                    predicate: atom.predicate.clone(),
                    arg: arg.clone(),
                    expected: param.ty.clone(),
                    found: ty,
                });
            }
        }
        Ok(())
    }
}

/// Parses a domain in the `:strips` + `:typing` subset.
pub fn parse_domain(text: &str) -> Result<DomainModel> {
    let root = sexpr::parse_one(text)?;
    let (name, sections) = split_define(&root, "domain")?;

    let mut requirements = Vec::new();
    let mut types = TypeForest::default();
    let mut type_positions = Vec::new();
    let mut predicates = Vec::new();
    let mut predicate_type_refs = Vec::new();
    let mut raw_ops = Vec::new();

    for section in sections {
        let items = list(section, "a domain section")?;
        let head = items.first().ok_or_else(|| syntax(section, "a section keyword"))?;
        match symbol(head, "a section keyword")? {
            ":requirements" => {
                for r in &items[1..] {
                    let flag = symbol(r, "a requirement flag")?;
                    if !SUPPORTED_REQUIREMENTS.contains(&flag) {
                        return Err(PddlError::UnsupportedRequirement { pos: r.pos(), flag: flag.to_string() });
                    }
                    requirements.push(flag.to_string());
                }
            }
            ":types" => {
                for (t, pos) in typed_list(&items[1..], false)? {
                    types.declare(&t.name, &t.ty);
                    type_positions.push((t.ty, pos));
                }
            }
            ":predicates" => {
                for p in &items[1..] {
                    let parts = list(p, "a predicate declaration")?;
                    let head = parts.first().ok_or_else(|| syntax(p, "a predicate name"))?;
                    let pname = symbol(head, "a predicate name")?;
                    let params = typed_list(&parts[1..], true)?;
                    predicate_type_refs.extend(params.iter().map(|(t, pos)| (t.ty.clone(), *pos)));
                    predicates.push(Predicate {
                        name: pname.to_string(),
                        params: params.into_iter().map(|(t, _)| t).collect(),
                    });
                }
            }
            ":action" => raw_ops.push(parse_action(section, items)?),
            _ => return Err(syntax(head, "`:requirements`, `:types`, `:predicates` or `:action`")),
        }
    }

    let mut model = DomainModel { name: name.to_string(), requirements, types, predicates, operators: Vec::new() };
    let checker = DomainChecker {
        types: &model.types,
        predicates: model.predicates.iter().map(|p| (p.name.as_str(), p)).collect(),
    };
    for (ty, pos) in type_positions.iter().chain(&predicate_type_refs) {
        checker.check_type(ty, *pos)?;
    }

    let mut seen = HashSet::new();
    let mut operators = Vec::new();
    for raw in raw_ops {
        if !seen.insert(raw.name.clone()) {
            return Err(PddlError::DuplicateOperator { pos: raw.pos, name: raw.name });
        }
        for (p, pos) in &raw.params {
            checker.check_type(&p.ty, *pos)?;
        }
        let params: Vec<TypedName> = raw.params.into_iter().map(|(t, _)| t).collect();
        let op_name = raw.name.clone();
        let type_of = |arg: &str| -> Result<String> {
            params.iter().find(|p| p.name == arg).map(|p| p.ty.clone()).ok_or(PddlError::UnboundVariable {
                pos: raw.pos,
                name: arg.to_string(),
                operator: op_name.clone(),
            })
        };
        for (atom, pos) in raw.pre.iter().chain(&raw.add).chain(&raw.del) {
            // Re-tag unbound-variable errors with the atom's own position.
            checker.check_atom(atom, *pos, &type_of).map_err(|e| match e {
                PddlError::UnboundVariable { name, operator, .. } => PddlError::UnboundVariable { pos: *pos, name, operator },
                other => other,
            })?;
        }
        let strip = |v: Vec<(Atom, Pos)>| v.into_iter().map(|(a, _)| a).collect();
        operators.push(Operator { name: raw.name, params, pre: strip(raw.pre), add: strip(raw.add), del: strip(raw.del) });
    }
    model.operators = operators;
    Ok(model)
}

struct RawOperator {
    name: String,
    pos: Pos,
    params: Vec<(TypedName, Pos)>,
    pre: Vec<(Atom, Pos)>,
    add: Vec<(Atom, Pos)>,
    del: Vec<(Atom, Pos)>,
}

fn parse_action(section: &Sexpr, items: &[Sexpr]) -> Result<RawOperator> {
    let name_expr = items.get(1).ok_or_else(|| syntax(section, "an action name"))?;
    let name = symbol(name_expr, "an action name")?.to_string();
    let mut op = RawOperator { name, pos: section.pos(), params: Vec::new(), pre: Vec::new(), add: Vec::new(), del: Vec::new() };
    let mut i = 2;
    while i < items.len() {
        let key = symbol(&items[i], "`:parameters`, `:precondition` or `:effect`")?;
        let value = items.get(i + 1).ok_or_else(|| PddlError::Syntax {
            pos: items[i].pos(),
            expected: format!("a value after `{key}`"),
            found: ")".into(),
        })?;
        match key {
            ":parameters" => op.params = typed_list(list(value, "a parameter list")?, true)?,
            ":precondition" => op.pre = parse_precondition(value)?,
            ":effect" => (op.add, op.del) = parse_effect(value)?,
            _ => return Err(syntax(&items[i], "`:parameters`, `:precondition` or `:effect`")),
        }
        i += 2;
    }
    Ok(op)
}

/// Parses a problem against `dom`. A non-standard `(:candidates ...)` block,
/// one conjunction per candidate goal, is accepted after `:goal`.
pub fn parse_problem(text: &str, dom: &DomainModel) -> Result<ProblemSpec> {
    let root = sexpr::parse_one(text)?;
    let (name, sections) = split_define(&root, "problem")?;
    let checker = DomainChecker {
        types: &dom.types,
        predicates: dom.predicates.iter().map(|p| (p.name.as_str(), p)).collect(),
    };

    let mut spec = ProblemSpec {
        name: name.to_string(),
        domain: String::new(),
        objects: Vec::new(),
        init: Vec::new(),
        goal: Vec::new(),
        candidates: None,
    };
    let mut init = Vec::new();
    let mut goal = Vec::new();
    let mut candidates: Option<Vec<Vec<(Atom, Pos)>>> = None;

    for section in sections {
        let items = list(section, "a problem section")?;
        let head = items.first().ok_or_else(|| syntax(section, "a section keyword"))?;
        match symbol(head, "a section keyword")? {
            ":domain" => {
                let d = items.get(1).ok_or_else(|| syntax(section, "a domain name"))?;
                let dname = symbol(d, "a domain name")?;
                if dname != dom.name {
                    return Err(PddlError::DomainMismatch { pos: d.pos(), expected: dom.name.clone(), found: dname.to_string() });
                }
                spec.domain = dname.to_string();
            }
            ":objects" => {
                for (obj, pos) in typed_list(&items[1..], false)? {
                    checker.check_type(&obj.ty, pos)?;
                    spec.objects.push(obj);
                }
            }
            ":init" => {
                for a in &items[1..] {
                    init.push(parse_atom(a)?);
                }
            }
            ":goal" => {
                let g = items.get(1).ok_or_else(|| syntax(section, "a goal condition"))?;
                goal = parse_precondition(g)?;
            }
            ":candidates" => {
                let mut cs = Vec::new();
                for c in &items[1..] {
                    cs.push(parse_precondition(c)?);
                }
                candidates = Some(cs);
            }
            _ => return Err(syntax(head, "`:domain`, `:objects`, `:init`, `:goal` or `:candidates`")),
        }
    }

    let objects: HashMap<&str, &str> = spec.objects.iter().map(|o| (o.name.as_str(), o.ty.as_str())).collect();
    let all_atoms = init.iter().chain(&goal).chain(candidates.iter().flatten().flatten());
    for (atom, pos) in all_atoms {
        let type_of = |arg: &str| -> Result<String> {
            objects.get(arg).map(|t| t.to_string()).ok_or(PddlError::UnknownObject { pos: *pos, name: arg.to_string() })
        };
        checker.check_atom(atom, *pos, &type_of)?;
    }
    let strip = |v: Vec<(Atom, Pos)>| v.into_iter().map(|(a, _)| a).collect::<Vec<_>>();
    spec.init = strip(init);
    spec.goal = strip(goal);
    spec.candidates = candidates.map(|cs| cs.into_iter().map(strip).collect());
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NOOP: &str = "(define (domain d) (:requirements :strips) (:action noop :precondition () :effect ()))";

    #[test]
    fn minimal_domain() {
        let d = parse_domain(NOOP).unwrap();
        assert_eq!(d.operators.len(), 1);
        assert_eq!(d.predicates.len(), 0);
        assert!(d.operators[0].params.is_empty());
    }

    #[test]
    fn misspelled_keyword_names_the_token() {
        let text = NOOP.replace(":precondition", ":precondtion");
        match parse_domain(&text).unwrap_err() {
            PddlError::Syntax { found, pos, .. } => {
                assert_eq!(found, ":precondtion");
                assert_eq!(pos.line, 1);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn rejects_unsupported_requirement() {
        let text = NOOP.replace(":strips", ":strips :adl");
        assert!(matches!(parse_domain(&text), Err(PddlError::UnsupportedRequirement { flag, .. }) if flag == ":adl"));
    }

    #[test]
    fn rejects_negative_precondition() {
        let text = "(define (domain d) (:predicates (p)) (:action a :precondition (not (p)) :effect (p)))";
        assert!(matches!(parse_domain(text), Err(PddlError::NegativePrecondition { .. })));
    }

    #[test]
    fn rejects_undeclared_predicate_and_type() {
        let text = "(define (domain d) (:predicates (p ?x)) (:action a :parameters (?x) :precondition (q ?x) :effect ()))";
        assert!(matches!(parse_domain(text), Err(PddlError::UndeclaredPredicate { name, .. }) if name == "q"));
        let text = "(define (domain d) (:types a) (:predicates (p ?x - b)))";
        assert!(matches!(parse_domain(text), Err(PddlError::UndeclaredType { name, .. }) if name == "b"));
    }

    #[test]
    fn rejects_free_variable_and_duplicates() {
        let text = "(define (domain d) (:predicates (p ?x)) (:action a :parameters (?x) :precondition (p ?y) :effect ()))";
        assert!(matches!(parse_domain(text), Err(PddlError::UnboundVariable { name, .. }) if name == "?y"));
        let text = "(define (domain d) (:action a :effect ()) (:action a :effect ()))";
        assert!(matches!(parse_domain(text), Err(PddlError::DuplicateOperator { .. })));
    }

    #[test]
    fn problem_type_and_object_errors() {
        let dom = parse_domain(
            "(define (domain d) (:types disk peg) (:predicates (on ?d - disk ?p - peg)) (:action a :effect ()))",
        )
        .unwrap();
        let ok = "(define (problem p) (:domain d) (:objects d1 - disk p1 - peg) (:init (on d1 p1)) (:goal (on d1 p1)))";
        let spec = parse_problem(ok, &dom).unwrap();
        assert_eq!(spec.init, spec.goal);
        assert!(spec.candidates.is_none());

        let unknown = ok.replace("(:goal (on d1 p1))", "(:goal (on d9 p1))");
        assert!(matches!(parse_problem(&unknown, &dom), Err(PddlError::UnknownObject { name, .. }) if name == "d9"));
        let swapped = ok.replace("(:init (on d1 p1))", "(:init (on p1 d1))");
        assert!(matches!(parse_problem(&swapped, &dom), Err(PddlError::TypeMismatch { .. })));
        let arity = ok.replace("(:init (on d1 p1))", "(:init (on d1))");
        assert!(matches!(parse_problem(&arity, &dom), Err(PddlError::Arity { expected: 2, found: 1, .. })));
    }

    #[test]
    fn candidates_block() {
        let dom = parse_domain("(define (domain d) (:predicates (a) (b)) (:action x :effect (a)))").unwrap();
        let text = "(define (problem p) (:domain d) (:objects) (:init) (:goal (a)) (:candidates (and (a)) (b) (and (a) (b))))";
        let spec = parse_problem(text, &dom).unwrap();
        let c = spec.candidates.unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c[2].len(), 2);
    }
}
