use super::*;
use crate::chip::ChipLayout;
use crate::circuit::generators::ghz;
use crate::placement::init_cut_types;
use crate::profiler::para_finding;

struct Fixture {
    circuit: LogicalCircuit,
    dag: GateDag,
    layout: ChipLayout,
    mapping: TileMapping,
    graph: RoutingGraph,
}

fn fixture(model: Model, b: usize, rows: usize, cols: usize, n: usize, pairs: &[(usize, usize)]) -> Fixture {
    let circuit = LogicalCircuit::new(n, pairs.iter().copied()).unwrap();
    let dag = GateDag::build(&circuit);
    let layout = ChipLayout::uniform(model, 3, rows, cols, b);
    let pos = (0..n).map(|q| (q / cols, q % cols)).collect();
    let mapping = TileMapping::new(rows, cols, pos).unwrap();
    let graph = RoutingGraph::build(&layout, &mapping);
    Fixture { circuit, dag, layout, mapping, graph }
}

impl Fixture {
    fn limited(&self, cuts: &[Cut], options: LimitedOptions) -> EncodedSchedule {
        let s = schedule_limited(&self.circuit, &self.dag, &self.graph, &self.layout, &self.mapping, cuts, options)
            .unwrap();
        validate(&s, &self.circuit, &self.graph, &self.mapping).unwrap();
        s
    }
}

fn policy(same_cut: SameCutPolicy) -> LimitedOptions {
    LimitedOptions { order: GateOrder::Priority, same_cut }
}

#[test]
fn opposite_cuts_braid_in_one_cycle() {
    let f = fixture(Model::DoubleDefect, 1, 1, 2, 2, &[(0, 1)]);
    let s = f.limited(&[Cut::X, Cut::Z], LimitedOptions::default());
    assert_eq!(s.delta(), 1);
    assert!(matches!(s.cycles[0][0], Action::Braid { gate: 0, .. }));
}

#[test]
fn same_cuts_on_idle_chip_go_direct() {
    let f = fixture(Model::DoubleDefect, 1, 1, 2, 2, &[(0, 1)]);
    let s = f.limited(&[Cut::X, Cut::X], LimitedOptions::default());
    assert_eq!(s.delta(), 3);
    assert!(s.cycles.iter().all(|c| matches!(c[..], [Action::DirectSameCut { gate: 0, .. }])));
}

#[test]
fn baselines_disagree_on_idle_same_cut() {
    let f = fixture(Model::DoubleDefect, 1, 1, 2, 2, &[(0, 1)]);
    let time = f.limited(&[Cut::X, Cut::X], policy(SameCutPolicy::TimeFirst));
    assert_eq!(time.delta(), 3);
    assert_eq!(time.modifications(), 0);
    let chan = f.limited(&[Cut::X, Cut::X], policy(SameCutPolicy::ChannelFirst));
    assert_eq!(chan.modifications(), 1);
    assert_eq!(chan.delta(), 4);
    assert!(matches!(chan.cycles[3][..], [Action::Braid { gate: 0, .. }]));
}

#[test]
fn idle_tile_is_flipped_in_the_past() {
    // Qubit 2 idles while 0 and 1 braid three times; its flip hides in that gap.
    let f = fixture(Model::DoubleDefect, 1, 1, 3, 3, &[(0, 1), (0, 1), (0, 1), (1, 2)]);
    let s = f.limited(&[Cut::X, Cut::Z, Cut::Z], LimitedOptions::default());
    assert_eq!(s.delta(), 4);
    assert_eq!(s.modifications(), 1);
    let flips: Vec<usize> = (0..3)
        .filter(|&t| s.cycles[t].iter().any(|a| matches!(a, Action::CutModify { qubit: 2, .. })))
        .collect();
    assert_eq!(flips, vec![0, 1, 2]);
}

#[test]
fn ghz_chain_braids_every_cycle() {
    let c = ghz(23);
    let dag = GateDag::build(&c);
    let cuts = init_cut_types(&c, &dag);
    let pairs: Vec<(usize, usize)> = c.gates().iter().map(|g| (g.control, g.target)).collect();
    let f = fixture(Model::DoubleDefect, 1, 5, 5, 23, &pairs);
    let s = f.limited(&cuts, LimitedOptions::default());
    assert_eq!(s.delta(), 22);
    assert_eq!(s.modifications(), 0);
}

#[test]
fn lattice_surgery_uses_bell_actions() {
    let f = fixture(Model::LatticeSurgery, 1, 2, 2, 4, &[(0, 3), (1, 2), (0, 1)]);
    let s = f.limited(&[], LimitedOptions::default());
    assert!(s.cycles.iter().flatten().all(|a| matches!(a, Action::Bell { .. })));
    assert!(s.initial_cuts.is_empty());
    assert!(s.delta() >= 2);
}

#[test]
fn zero_bandwidth_is_reported() {
    let f = fixture(Model::DoubleDefect, 0, 1, 3, 3, &[(0, 2)]);
    let err = schedule_limited(
        &f.circuit,
        &f.dag,
        &f.graph,
        &f.layout,
        &f.mapping,
        &[Cut::X, Cut::X, Cut::Z],
        LimitedOptions::default(),
    )
    .unwrap_err();
    assert_eq!(err, ScheduleError::Unroutable { gate: 0 });
}

#[test]
fn wrong_cut_count_rejected() {
    let f = fixture(Model::DoubleDefect, 1, 1, 2, 2, &[(0, 1)]);
    let err = schedule_limited(&f.circuit, &f.dag, &f.graph, &f.layout, &f.mapping, &[Cut::X], LimitedOptions::default())
        .unwrap_err();
    assert_eq!(err, ScheduleError::CutCount { expected: 2, got: 1 });
}

#[test]
fn m_value_terms() {
    assert_eq!(m_time(0), 1.0);
    assert_eq!(m_time(3), -2.0);
    assert_eq!(m_time(7), -2.0);
    assert_eq!(theta(0, 10, 5), 0.0);
    assert_eq!(theta(3, 0, 5), 0.0);
    assert_eq!(theta(2, 8, 4), 2.0);
    // Gate 0 = (0,1); children on qubit 0: (0,2) and (0,3).
    let c = LogicalCircuit::new(4, [(0, 1), (0, 2), (3, 0)]).unwrap();
    let dag = GateDag::build(&c);
    // Flipping 0 to Z: partner 2 is X (opposite, -1).
    let cuts = [Cut::X, Cut::X, Cut::X, Cut::Z];
    assert_eq!(m_space(&c, &dag, &cuts, 0, 0), -2.0);
    // Only the direct child (0,2) counts; (3,0) follows it.
    assert_eq!(dag.children(0), &[1]);
    let cuts = [Cut::X, Cut::X, Cut::Z, Cut::Z];
    assert_eq!(m_space(&c, &dag, &cuts, 0, 0), 0.0);
}

#[test]
fn decisions_per_policy() {
    let opt = |qubit, credit, value: f64| TileOption { qubit, credit, m: MValue { m_t: value, m_s: 0.0, theta: 0.0 } };
    let both = [opt(0, 1, 0.5), opt(1, 3, -0.5)];
    assert_eq!(decide_same_cut(SameCutPolicy::MValue, &both), SameCutDecision::Modify { qubit: 1 });
    assert_eq!(decide_same_cut(SameCutPolicy::TimeFirst, &both), SameCutDecision::Modify { qubit: 1 });
    let tied = [opt(4, 2, -1.0), opt(5, 2, -1.0)];
    assert_eq!(decide_same_cut(SameCutPolicy::MValue, &tied), SameCutDecision::Modify { qubit: 4 });
    assert_eq!(decide_same_cut(SameCutPolicy::ChannelFirst, &tied), SameCutDecision::Modify { qubit: 4 });
    assert_eq!(decide_same_cut(SameCutPolicy::MValue, &[opt(0, 0, 0.0)]), SameCutDecision::Direct);
    assert_eq!(decide_same_cut(SameCutPolicy::TimeFirst, &[opt(0, 1, -3.0)]), SameCutDecision::Direct);
    assert_eq!(decide_same_cut(SameCutPolicy::ChannelFirst, &[]), SameCutDecision::Direct);
}

#[test]
fn sufficient_two_layers_two_cycles() {
    let f = fixture(Model::DoubleDefect, 1, 2, 2, 4, &[(0, 1), (2, 3), (1, 2), (0, 3)]);
    let layers = para_finding(&f.dag);
    assert_eq!(layers.depth(), 2);
    let s = schedule_sufficient(&f.circuit, &layers, &f.graph, &f.layout, &f.mapping).unwrap();
    assert_eq!(s.delta(), 2);
    validate(&s, &f.circuit, &f.graph, &f.mapping).unwrap();
}

#[test]
fn sufficient_flips_between_segments() {
    // A triangle cannot be two-coloured, so the third layer needs a flip block.
    let f = fixture(Model::DoubleDefect, 1, 2, 2, 3, &[(0, 1), (1, 2), (0, 2)]);
    let layers = para_finding(&f.dag);
    assert_eq!(bipartite_prefix(&f.circuit, &layers, 0).end, 2);
    let s = schedule_sufficient(&f.circuit, &layers, &f.graph, &f.layout, &f.mapping).unwrap();
    assert_eq!(s.delta(), 2 + LONG_OP + 1);
    assert_eq!(s.modifications(), 1);
    validate(&s, &f.circuit, &f.graph, &f.mapping).unwrap();
}

#[test]
fn sufficient_lattice_surgery() {
    let f = fixture(Model::LatticeSurgery, 1, 2, 3, 6, &[(0, 5), (2, 3), (1, 4), (0, 1)]);
    let layers = para_finding(&f.dag);
    let s = schedule_sufficient(&f.circuit, &layers, &f.graph, &f.layout, &f.mapping).unwrap();
    assert_eq!(s.delta(), layers.depth());
    validate(&s, &f.circuit, &f.graph, &f.mapping).unwrap();
}

#[test]
fn sufficient_refuses_small_chip() {
    let f = fixture(Model::DoubleDefect, 0, 2, 3, 6, &[(0, 5), (2, 3), (1, 4)]);
    let layers = para_finding(&f.dag);
    let err = schedule_sufficient(&f.circuit, &layers, &f.graph, &f.layout, &f.mapping).unwrap_err();
    assert_eq!(err, ScheduleError::Insufficient { capacity: None, pm: 3 });
}

#[test]
fn validator_catches_dependency() {
    let f = fixture(Model::DoubleDefect, 1, 1, 3, 3, &[(0, 1), (1, 2)]);
    let mut s = f.limited(&[Cut::X, Cut::Z, Cut::X], LimitedOptions::default());
    assert_eq!(s.delta(), 2);
    s.cycles.swap(0, 1);
    let v = validate(&s, &f.circuit, &f.graph, &f.mapping).unwrap_err();
    assert!(v.contains(&Violation::Dependency { parent: 0, child: 1 }));
}

#[test]
fn validator_catches_capacity_and_cuts() {
    // Diagonal pairs on a 2x2 array both need the centre junction.
    let circuit = LogicalCircuit::new(4, [(0, 1), (2, 3)]).unwrap();
    let layout = ChipLayout::uniform(Model::DoubleDefect, 3, 2, 2, 1);
    let mapping = TileMapping::new(2, 2, vec![(0, 0), (1, 1), (0, 1), (1, 0)]).unwrap();
    let graph = RoutingGraph::build(&layout, &mapping);
    let occ = Occupancy::new(&graph);
    let r0 = graph.find_path(&occ, 0, 1, (0, 0), (1, 1)).unwrap();
    let r1 = graph.find_path(&occ, 0, 1, (0, 1), (1, 0)).unwrap();
    let shared: Vec<usize> = r0.nodes().iter().copied().filter(|v| r1.nodes().contains(v)).collect();
    assert!(!shared.is_empty());
    let s = EncodedSchedule {
        model: Model::DoubleDefect,
        initial_cuts: vec![Cut::X, Cut::Z, Cut::X, Cut::X],
        cycles: vec![vec![Action::Braid { gate: 0, route: r0 }, Action::Braid { gate: 1, route: r1 }]],
    };
    let v = validate(&s, &circuit, &graph, &mapping).unwrap_err();
    assert!(v.iter().any(|x| matches!(x, Violation::OverCapacity { cycle: 0, .. })));
    assert!(v.contains(&Violation::CutMismatch { cycle: 0, gate: 1 }));
}

#[test]
fn validator_catches_missing_and_model() {
    let f = fixture(Model::DoubleDefect, 1, 1, 2, 2, &[(0, 1)]);
    let s = EncodedSchedule { model: Model::DoubleDefect, initial_cuts: vec![Cut::X, Cut::Z], cycles: vec![] };
    assert_eq!(validate(&s, &f.circuit, &f.graph, &f.mapping).unwrap_err(), vec![Violation::Missing { gate: 0 }]);
    let s = EncodedSchedule {
        model: Model::DoubleDefect,
        initial_cuts: vec![Cut::X, Cut::Z],
        cycles: vec![vec![Action::Bell { gate: 0, route: f.graph.find_path(&Occupancy::new(&f.graph), 0, 1, (0, 0), (0, 1)).unwrap() }]],
    };
    let v = validate(&s, &f.circuit, &f.graph, &f.mapping).unwrap_err();
    assert!(v.contains(&Violation::WrongModel { cycle: 0 }));
}

#[test]
fn export_lists_coordinates() {
    let f = fixture(Model::DoubleDefect, 1, 1, 2, 2, &[(0, 1)]);
    let s = f.limited(&[Cut::X, Cut::Z], LimitedOptions::default());
    let doc = s.export(&f.graph);
    assert_eq!(doc.delta, 1);
    let a = &doc.cycles[0].actions[0];
    assert_eq!(a.kind, "braid");
    assert_eq!(a.gate, Some(0));
    assert!(!a.route.is_empty());
    let json = serde_json::to_string(&doc).unwrap();
    assert!(json.contains("\"braid\""));
}
