use goalrec_core::domains::{lights_press_mask, DomainKind, DomainTemplate, Puzzle};
use goalrec_core::planner::{self, SearchConfig};
use goalrec_core::strips::Atom;

#[test]
fn hanoi_sizes_and_far_peg_cost() {
    let t = DomainTemplate::new(DomainKind::Hanoi34);
    assert_eq!(t.reachable_from(&Puzzle::Hanoi([0, 0, 0])).len(), 64);
    let task = t.task_for(&Puzzle::Hanoi([0, 0, 0]), &Puzzle::Hanoi([3, 3, 3]));
    let plan = planner::solve(&task, &SearchConfig::optimal()).unwrap().plan().unwrap();
    assert_eq!(plan.cost, 5);
    let bfs = planner::solve(&task, &SearchConfig::bfs()).unwrap().plan().unwrap();
    assert_eq!(bfs.cost, 5);
}

#[test]
fn hanoi_covered_disk_is_stuck() {
    let t = DomainTemplate::new(DomainKind::Hanoi34);
    let task = t.task_for(&Puzzle::Hanoi([0, 0, 0]), &Puzzle::Hanoi([0, 0, 0]));
    let s = task.init();
    let big = task.action_id("(move d3 p1 p2)").unwrap();
    assert!(!task.applicable(s, big).unwrap());
    let small = task.action_id("(move d1 d2 p2)").unwrap();
    assert!(task.applicable(s, small).unwrap());
}

#[test]
fn eight_puzzle_sizes() {
    let t = DomainTemplate::new(DomainKind::EightPuzzle);
    assert_eq!(t.task().actions().len(), 192);
    assert_eq!(t.reachable_from(&Puzzle::eight_puzzle_solved()).len(), 181_440);
}

#[test]
fn lights_out_grounding() {
    let t = DomainTemplate::new(DomainKind::LightsOut4);
    let actions = t.task().actions();
    assert_eq!(actions.len(), 288);
    let pressed: std::collections::BTreeSet<String> =
        actions.iter().map(|a| a.name.split_whitespace().nth(1).unwrap().to_string()).collect();
    assert_eq!(pressed.len(), 16);
    for a in actions {
        assert!(a.add.iter().all(|f| !a.del.contains(f)), "{}", a.name);
    }
    assert_eq!(DomainKind::LightsOut4.state_space_size(), 1 << 16);
}

#[test]
fn lights_out_corner_press() {
    let t = DomainTemplate::new(DomainKind::LightsOut4);
    let succ = t.successors(&Puzzle::LightsOut(0));
    assert_eq!(succ.len(), 16);
    let task = t.task();
    let (id, after) = succ.iter().find(|(id, _)| task.action(*id).name.contains("c00")).unwrap();
    assert!(task.action(*id).name.starts_with("(press-corner"));
    assert_eq!(*after, Puzzle::LightsOut(lights_press_mask(0)));
    let Puzzle::LightsOut(bits) = after else { unreachable!() };
    assert_eq!(bits.count_ones(), 3);
}

#[test]
fn lights_out_reachable_class() {
    let t = DomainTemplate::new(DomainKind::LightsOut4);
    let reach = t.reachable_from(&Puzzle::LightsOut(0));
    assert_eq!(reach.len(), 4096);
    // a single lit corner lies outside the press span
    assert!(!reach.contains(&Puzzle::LightsOut(1)));
}

#[test]
fn bundled_one_step_fixture_solves() {
    let dom = goalrec_core::strips::parse_domain(goalrec_core::domains::EIGHT_PUZZLE_DOMAIN).unwrap();
    let prob = goalrec_core::strips::parse_problem(include_str!("../domains/eight-puzzle-one-step.pddl"), &dom).unwrap();
    let task = goalrec_core::strips::ground(&dom, &prob).unwrap();
    let plan = planner::solve(&task, &SearchConfig::optimal()).unwrap().plan().unwrap();
    assert_eq!(plan.names(&task), vec!["(slide t1 c0 c1)".to_string()]);
    assert_eq!(prob.candidates.as_ref().map(Vec::len), Some(2));
    assert!(task.facts().id(&Atom::new("blank", ["c0"])).is_some());
}

#[test]
fn problem_spec_prints_parseable_pddl() {
    for kind in DomainKind::ALL {
        let t = DomainTemplate::new(kind);
        let init = *t.reachable_from(&match kind {
            DomainKind::Hanoi34 => Puzzle::Hanoi([0, 0, 0]),
            DomainKind::EightPuzzle => Puzzle::eight_puzzle_solved(),
            DomainKind::LightsOut4 => Puzzle::LightsOut(0),
        })
        .last()
        .unwrap();
        let goal = t.successors(&init)[0].1;
        let spec = t.problem_spec("p", &init, &goal, Some(&[goal, init]));
        let text = spec.to_string();
        let parsed = goalrec_core::strips::parse_problem(&text, t.model()).unwrap();
        assert_eq!(parsed, spec);
        let task = goalrec_core::strips::ground(t.model(), &parsed).unwrap();
        let plan = planner::solve(&task, &SearchConfig::optimal()).unwrap().plan().unwrap();
        assert_eq!(plan.cost, 1);
    }
}
