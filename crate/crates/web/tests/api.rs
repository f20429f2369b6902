use goalrec_web::{generate_problem, plan_between, recognize};

#[test]
fn every_domain_generates_a_consistent_problem() {
    for d in ["hanoi34", "eight_puzzle", "lights_out4"] {
        let p = generate_problem(d, 3).unwrap();
        assert_eq!(p.states.len(), p.plan.len() + 1);
        assert_eq!(p.states[0], p.init);
        assert_eq!(p.states.last().unwrap(), &p.candidates[p.goal_index]);
        assert_eq!(p, generate_problem(d, 3).unwrap());
    }
}

#[test]
fn plans_match_generated_lengths() {
    let p = generate_problem("eight_puzzle", 5).unwrap();
    let v = plan_between("eight_puzzle", &p.init.hex, &p.candidates[p.goal_index].hex).unwrap();
    assert_eq!(v.cost as usize, p.plan.len());
    assert_eq!(v.states.len(), v.actions.len() + 1);
    assert!(plan_between("eight_puzzle", &p.init.hex, "zz").is_err());
    let far = plan_between("hanoi34", "000000000", "00000003f").unwrap();
    assert_eq!(far.cost, 5);
}

#[test]
fn full_observation_finds_the_goal() {
    let p = generate_problem("hanoi34", 2).unwrap();
    let v = recognize(&p, 100, 0.0, 1).unwrap();
    assert_eq!(v.observed.len(), p.plan.len());
    assert_eq!(v.guesses.len(), 3);
    assert!(v.guesses.iter().all(|g| g.correct), "{v:?}");
    assert!(recognize(&p, 0, 0.0, 1).is_err());
    assert!(recognize(&p, 50, 120.0, 1).is_err());
}
