//! STRIPS tasks: a PDDL subset (`:strips`, `:typing`) parser, a grounder,
//! and the state transition function.

mod ground;
mod model;
mod parse;
mod sexpr;
mod state;

pub use ground::{ground, ActionId, FactTable, GroundAction, GroundTask, StripsError};
pub use model::{Atom, DomainModel, Operator, Predicate, ProblemSpec, TypeForest, TypedName, ROOT_TYPE};
pub use parse::{parse_domain, parse_problem, PddlError, SUPPORTED_REQUIREMENTS};
pub use sexpr::Pos;
pub use state::{FactId, State};
