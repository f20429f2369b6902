use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use thiserror::Error;

use super::model::{Atom, DomainModel, Operator, ProblemSpec};
use super::parse::PddlError;
use super::state::{FactId, State};

pub type ActionId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StripsError {
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error("state has {found} facts but the task has {expected}")]
    TaskMismatch { expected: usize, found: usize },
    #[error("action `{action}` is not applicable; missing {}", missing.join(", "))]
    Inapplicable { action: String, missing: Vec<String> },
    #[error("atom {0} is not in the fact table")]
    UnknownAtom(String),
    #[error("no ground action named `{0}`")]
    UnknownAction(String),
    #[error("action id {0} out of range")]
    ActionOutOfRange(ActionId),
}

/// Bijection between ground atoms and dense fact ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactTable {
    atoms: Vec<Atom>,
    index: HashMap<Atom, FactId>,
}

impl FactTable {
    pub fn new(atoms: Vec<Atom>) -> Self {
        let index = atoms.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        FactTable { atoms, index }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn id(&self, atom: &Atom) -> Option<FactId> {
        self.index.get(atom).copied()
    }

    pub fn atom(&self, id: FactId) -> &Atom {
        &self.atoms[id]
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAction {
    /// PDDL plan syntax, e.g. `(move d1 p1 p2)`.
    pub name: String,
    pub pre: Vec<FactId>,
    pub add: Vec<FactId>,
    pub del: Vec<FactId>,
    pub cost: u32,
}

/// A grounded STRIPS task. Fact table and actions are shared, so tasks that
/// differ only in initial state or goal are cheap to derive.
#[derive(Debug, Clone)]
pub struct GroundTask {
    facts: Arc<FactTable>,
    actions: Arc<[GroundAction]>,
    action_index: Arc<HashMap<String, ActionId>>,
    init: State,
    goal: Vec<FactId>,
}

impl GroundTask {
    /// Assembles a task from parts. Fact ids in actions, init and goal must
    /// be below `facts.len()`.
    pub fn new(facts: FactTable, actions: Vec<GroundAction>, init: State, goal: Vec<FactId>) -> Self {
        let n = facts.len();
        assert_eq!(init.universe(), n, "init built over a different universe");
        for a in &actions {
            assert!(a.pre.iter().chain(&a.add).chain(&a.del).all(|&f| f < n), "action {} references unknown fact", a.name);
        }
        assert!(goal.iter().all(|&f| f < n));
        let action_index = actions.iter().enumerate().map(|(i, a)| (a.name.clone(), i)).collect();
        GroundTask {
            facts: Arc::new(facts),
            actions: actions.into(),
            action_index: Arc::new(action_index),
            init,
            goal: normalized(goal),
        }
    }

    pub fn facts(&self) -> &FactTable {
        &self.facts
    }

    pub fn num_facts(&self) -> usize {
        self.facts.len()
    }

    pub fn actions(&self) -> &[GroundAction] {
        &self.actions
    }

    pub fn action(&self, id: ActionId) -> &GroundAction {
        &self.actions[id]
    }

    pub fn action_id(&self, name: &str) -> Result<ActionId, StripsError> {
        self.action_index.get(name).copied().ok_or_else(|| StripsError::UnknownAction(name.to_string()))
    }

    pub fn init(&self) -> &State {
        &self.init
    }

    pub fn goal(&self) -> &[FactId] {
        &self.goal
    }

    /// Same facts and actions with a different initial state and goal.
    pub fn with_init_goal(&self, init: State, goal: Vec<FactId>) -> GroundTask {
        assert_eq!(init.universe(), self.num_facts());
        assert!(goal.iter().all(|&f| f < self.num_facts()));
        GroundTask { init, goal: normalized(goal), ..self.clone() }
    }

    pub fn with_goal(&self, goal: Vec<FactId>) -> GroundTask {
        self.with_init_goal(self.init.clone(), goal)
    }

    pub fn shares_actions_with(&self, other: &GroundTask) -> bool {
        Arc::ptr_eq(&self.actions, &other.actions)
    }

    pub fn resolve(&self, atoms: &[Atom]) -> Result<Vec<FactId>, StripsError> {
        let ids = atoms
            .iter()
            .map(|a| self.facts.id(a).ok_or_else(|| StripsError::UnknownAtom(a.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(normalized(ids))
    }

    pub fn state_from_atoms(&self, atoms: &[Atom]) -> Result<State, StripsError> {
        Ok(State::from_facts(self.num_facts(), self.resolve(atoms)?))
    }

    fn check_state(&self, s: &State) -> Result<(), StripsError> {
        if s.universe() != self.num_facts() {
            return Err(StripsError::TaskMismatch { expected: self.num_facts(), found: s.universe() });
        }
        Ok(())
    }

    fn get(&self, a: ActionId) -> Result<&GroundAction, StripsError> {
        self.actions.get(a).ok_or(StripsError::ActionOutOfRange(a))
    }

    /// `pre(a) ⊆ s`.
    pub fn applicable(&self, s: &State, a: ActionId) -> Result<bool, StripsError> {
        self.check_state(s)?;
        Ok(s.satisfies(&self.get(a)?.pre))
    }

    /// `(s ∪ add(a)) \ del(a)`, or the unmet preconditions.
    pub fn apply(&self, s: &State, a: ActionId) -> Result<State, StripsError> {
        self.check_state(s)?;
        let act = self.get(a)?;
        let missing: Vec<String> = act.pre.iter().filter(|&&f| !s.contains(f)).map(|&f| self.facts.atom(f).to_string()).collect();
        if !missing.is_empty() {
            return Err(StripsError::Inapplicable { action: act.name.clone(), missing });
        }
        Ok(self.successor(s, a))
    }

    /// Transition without checks; callers have already tested applicability.
    #[inline]
    pub fn successor(&self, s: &State, a: ActionId) -> State {
        let act = &self.actions[a];
        let mut next = s.clone();
        for &f in &act.add {
            next.insert(f);
        }
        for &f in &act.del {
            next.remove(f);
        }
        next
    }

    pub fn is_goal(&self, s: &State) -> bool {
        s.satisfies(&self.goal)
    }

    pub fn describe_facts(&self, facts: impl IntoIterator<Item = FactId>) -> Vec<String> {
        facts.into_iter().map(|f| self.facts.atom(f).to_string()).collect()
    }
}

fn normalized(mut ids: Vec<FactId>) -> Vec<FactId> {
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Instantiates every operator over the problem's typed objects.
///
/// Static preconditions (predicates no operator changes) are matched against
/// the initial state during enumeration, so bindings that violate them never
/// become actions, and they are dropped from the surviving actions'
/// preconditions. Atoms both added and deleted by one action stay added,
/// following the delete-then-add reading of STRIPS effects.
///
/// Fact ids follow the sorted order of atoms, so two problems over the same
/// objects and static facts get identical fact tables.
pub fn ground(dom: &DomainModel, prob: &ProblemSpec) -> Result<GroundTask, StripsError> {
    let statics: HashSet<&str> = dom.static_predicates().into_iter().collect();
    let mut static_facts: HashMap<&str, Vec<&Atom>> = HashMap::new();
    for a in &prob.init {
        if statics.contains(a.predicate.as_str()) {
            static_facts.entry(a.predicate.as_str()).or_default().push(a);
        }
    }
    let object_types: HashMap<&str, &str> = prob.objects.iter().map(|o| (o.name.as_str(), o.ty.as_str())).collect();

    let mut lifted = Vec::new();
    for op in &dom.operators {
        let ctx = BindingContext { dom, op, statics: &statics, static_facts: &static_facts, prob, object_types: &object_types };
        ctx.enumerate(&mut lifted);
    }

    let mut universe: BTreeSet<Atom> = BTreeSet::new();
    universe.extend(prob.init.iter().cloned());
    universe.extend(prob.goal.iter().cloned());
    for c in prob.candidates.iter().flatten() {
        universe.extend(c.iter().cloned());
    }
    for a in &lifted {
        universe.extend(a.pre.iter().chain(&a.add).chain(&a.del).cloned());
    }
    let facts = FactTable::new(universe.into_iter().collect());
    let id = |a: &Atom| facts.id(a).expect("atom collected above");

    let actions = lifted
        .into_iter()
        .map(|a| {
            let add = normalized(a.add.iter().map(id).collect());
            let del: Vec<FactId> = normalized(a.del.iter().map(id).collect()).into_iter().filter(|f| add.binary_search(f).is_err()).collect();
            GroundAction { name: a.name, pre: normalized(a.pre.iter().map(id).collect()), add, del, cost: 1 }
        })
        .collect();
    let init = State::from_facts(facts.len(), prob.init.iter().map(id));
    let goal = prob.goal.iter().map(id).collect();
    Ok(GroundTask::new(facts, actions, init, goal))
}

struct LiftedInstance {
    name: String,
    pre: Vec<Atom>,
    add: Vec<Atom>,
    del: Vec<Atom>,
}

struct BindingContext<'a> {
    dom: &'a DomainModel,
    op: &'a Operator,
    statics: &'a HashSet<&'a str>,
    static_facts: &'a HashMap<&'a str, Vec<&'a Atom>>,
    prob: &'a ProblemSpec,
    object_types: &'a HashMap<&'a str, &'a str>,
}

impl BindingContext<'_> {
    fn param_index(&self, var: &str) -> usize {
        self.op.params.iter().position(|p| p.name == var).expect("parser checked variables")
    }

    fn fits(&self, param: usize, obj: &str) -> bool {
        self.object_types.get(obj).is_some_and(|t| self.dom.types.is_subtype(t, &self.op.params[param].ty))
    }

    fn enumerate(&self, out: &mut Vec<LiftedInstance>) {
        let static_pre: Vec<&Atom> = self.op.pre.iter().filter(|a| self.statics.contains(a.predicate.as_str())).collect();
        let mut binding: Vec<Option<&str>> = vec![None; self.op.params.len()];
        self.match_statics(&static_pre, 0, &mut binding, out);
    }

    fn match_statics<'b>(&'b self, atoms: &[&'b Atom], i: usize, binding: &mut Vec<Option<&'b str>>, out: &mut Vec<LiftedInstance>) {
        if i == atoms.len() {
            self.fill_free(0, binding, out);
            return;
        }
        let pattern = atoms[i];
        let Some(candidates) = self.static_facts.get(pattern.predicate.as_str()) else {
            return;
        };
        for fact in candidates {
            let mut assigned = Vec::new();
            let mut ok = true;
            for (arg, val) in pattern.args.iter().zip(&fact.args) {
                if arg.starts_with('?') {
                    let p = self.param_index(arg);
                    match binding[p] {
                        Some(b) if b == val => {}
                        Some(_) => ok = false,
                        None if self.fits(p, val) => {
                            binding[p] = Some(val.as_str());
                            assigned.push(p);
                        }
                        None => ok = false,
                    }
                } else if arg != val {
                    ok = false;
                }
                if !ok {
                    break;
                }
            }
            if ok {
                self.match_statics(atoms, i + 1, binding, out);
            }
            for p in assigned {
                binding[p] = None;
            }
        }
    }

    fn fill_free<'b>(&'b self, p: usize, binding: &mut Vec<Option<&'b str>>, out: &mut Vec<LiftedInstance>) {
        if p == binding.len() {
            out.push(self.instantiate(binding));
            return;
        }
        if binding[p].is_some() {
            self.fill_free(p + 1, binding, out);
            return;
        }
        for obj in &self.prob.objects {
            if self.fits(p, &obj.name) {
                binding[p] = Some(obj.name.as_str());
                self.fill_free(p + 1, binding, out);
            }
        }
        binding[p] = None;
    }

    fn instantiate(&self, binding: &[Option<&str>]) -> LiftedInstance {
        let subst = |a: &Atom| Atom {
            predicate: a.predicate.clone(),
            args: a
                .args
                .iter()
                .map(|x| if x.starts_with('?') { binding[self.param_index(x)].unwrap().to_string() } else { x.clone() })
                .collect(),
        };
        let mut name = format!("({}", self.op.name);
        for b in binding {
            name.push(' ');
            name.push_str(b.unwrap());
        }
        name.push(')');
        LiftedInstance {
            name,
            pre: self.op.pre.iter().filter(|a| !self.statics.contains(a.predicate.as_str())).map(subst).collect(),
            add: self.op.add.iter().map(subst).collect(),
            del: self.op.del.iter().map(subst).collect(),
        }
    }
}
