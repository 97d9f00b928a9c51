import itertools
import random

import pytest

from epispace import logic
from epispace.logic import (
    FALSE,
    TRUE,
    UNKNOWN,
    And,
    Atom,
    Eventually,
    FormulaError,
    Know,
    Not,
    Symbols,
    UnknownAtomError,
    box,
    conj,
    dknow,
    ev,
    eval_at,
    everyone,
    implies,
    know,
    lor,
    parse,
    sp_atom,
    valid,
)
from epispace.machine import EXPLORE_SWEEP, FLOOD_EXPLORE, Capabilities, make_grid_walker
from epispace.runs import build_interpreted_system, enumerate_runs
from epispace.scheduler import FSYNC, SSYNC, gen_schedules
from epispace.space import Grid, all_regions

MYOPIC = Capabilities(visibility="myopic", view_radius=0.01)
FULL = Capabilities()


def sp_valuation(sys, regions):
    """Hand-rolled valuation: sp(U) holds where U is inside the explored set."""
    atoms = {}
    for cells in regions:
        cells = frozenset(cells)
        atoms[("sp", cells)] = frozenset(
            p for p in sys.points if cells <= sys.explored_at(p)
        )
    return atoms


def sweep_system(n_cells=4, cycles=6, regions=None):
    grid = Grid(1, n_cells)
    robot, env = make_grid_walker(grid, MYOPIC, EXPLORE_SWEEP)
    runs = enumerate_runs(robot, env, [[0]], gen_schedules(1, cycles, FSYNC, fairness_bound=1))
    sys = build_interpreted_system(runs, env, robot)
    region_list = regions if regions is not None else [frozenset(range(n_cells))]
    return grid, sys.with_atoms(sp_valuation(sys, region_list))


def flood_system(cycles=8):
    grid = Grid(1, 4)
    robot, env = make_grid_walker(grid, FULL, FLOOD_EXPLORE, n_robots=2,
                                  strips=[(0, 1), (2, 3)])
    runs = enumerate_runs(robot, env, [[0, 2]],
                          gen_schedules(2, cycles, FSYNC, fairness_bound=1))
    sys = build_interpreted_system(runs, env, robot)
    regions = [frozenset(range(4)), frozenset({0, 1}), frozenset({2, 3})]
    return grid, sys.with_atoms(sp_valuation(sys, regions))


def symbols(grid, n_robots=1, regions=None):
    regs = {"UX": frozenset(grid.all_cells())}
    regs.update(regions or {})
    return Symbols(
        robots={f"r{i + 1}": i for i in range(n_robots)},
        regions=regs,
        n_cells=grid.n_cells,
    )


class TestParser:
    def setup_method(self):
        self.sym = symbols(Grid(1, 4), n_robots=2,
                           regions={"U1": frozenset({0, 1}), "U2": frozenset({2, 3})})

    def test_eventually_full_region(self):
        f = parse("<> sp(UX)", self.sym)
        assert f == Eventually(sp_atom(frozenset({0, 1, 2, 3}), "sp(UX)"))

    def test_cooperative_termination_shape(self):
        f = parse("<> E <> E sp(UX)", self.sym)
        inner = everyone([0, 1], sp_atom(frozenset({0, 1, 2, 3}), "sp(UX)"))
        assert f == Eventually(everyone([0, 1], Eventually(inner)))

    def test_nested_knowledge(self):
        f = parse("K[r1] (sp(U1) & !sp(U2))", self.sym)
        assert isinstance(f, Know) and f.robot == 0
        assert isinstance(f.sub, And)
        assert f.sub.right == Not(sp_atom(frozenset({2, 3}), "sp(U2)"))

    def test_distributed_group(self):
        f = parse("D[{r1,r2}] sp(U1)", self.sym)
        assert f == dknow([0, 1], sp_atom(frozenset({0, 1}), "sp(U1)"))

    def test_box_expands_to_not_diamond_not(self):
        f = parse("[] sp(U1)", self.sym)
        u1 = sp_atom(frozenset({0, 1}), "sp(U1)")
        assert f == Not(Eventually(Not(u1)))
        assert f == box(u1)

    def test_implication_and_disjunction(self):
        f = parse("sp(U1) -> (sp(U1) | sp(U2))", self.sym)
        u1 = sp_atom(frozenset({0, 1}), "sp(U1)")
        u2 = sp_atom(frozenset({2, 3}), "sp(U2)")
        assert f == implies(u1, lor(u1, u2))

    def test_positional_atoms(self):
        f = parse("pos[r1](c3) & init_pos[r2](c0) & in(c1, U1)", self.sym)
        assert ("pos", 0, 3) in repr_keys(f)
        assert ("init_pos", 1, 0) in repr_keys(f)
        assert ("in", 1, frozenset({0, 1})) in repr_keys(f)

    def test_unknown_robot_reports_offset(self):
        with pytest.raises(FormulaError, match="unknown robot name 'r9'"):
            parse("K[r9] sp(U1)", self.sym)

    def test_syntax_error_offset(self):
        with pytest.raises(FormulaError) as err:
            parse("sp(U1) &", self.sym)
        assert err.value.offset == 8

    def test_trailing_garbage(self):
        with pytest.raises(FormulaError, match="trailing input"):
            parse("sp(U1) sp(U2)", self.sym)

    def test_cell_out_of_range(self):
        with pytest.raises(FormulaError, match="outside the grid"):
            parse("pos[r1](c9)", self.sym)


def repr_keys(f):
    keys = set()
    stack = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, Atom):
            keys.add(node.key)
        elif isinstance(node, (Not, Eventually)):
            stack.append(node.sub)
        elif isinstance(node, And):
            stack.extend([node.left, node.right])
        elif isinstance(node, (Know,)):
            stack.append(node.sub)
    return keys


class TestEval:
    def test_atom_lookup(self):
        _, sys = sweep_system()
        full = sp_atom(frozenset(range(4)))
        assert eval_at(sys, (0, 0), full).value == FALSE
        assert eval_at(sys, (0, sys.runs[0].horizon), full).value == TRUE

    def test_eventually_full_with_witness(self):
        _, sys = sweep_system()
        verdict = eval_at(sys, (0, 0), ev(sp_atom(frozenset(range(4)))))
        assert verdict.value == TRUE
        # step 12 is the COMPUTE closing sweep cycle index 3 ("within 4 cycles")
        assert verdict.witnesses == ((0, 12),)

    def test_factivity_wherever_known(self):
        _, sys = sweep_system(regions=[frozenset({0, 1})])
        f = sp_atom(frozenset({0, 1}))
        for p in sys.points:
            if eval_at(sys, p, know(0, f)).value == TRUE:
                assert eval_at(sys, p, f).value == TRUE

    def test_point_outside_system_rejected(self):
        _, sys = sweep_system()
        with pytest.raises(ValueError):
            eval_at(sys, (5, 0), sp_atom(frozenset()))

    def test_unknown_atom_kind(self):
        _, sys = sweep_system()
        with pytest.raises(UnknownAtomError):
            eval_at(sys, (0, 0), Atom(("nonsense",), "nonsense"))


class TestValid:
    def test_empty_region_valid_everywhere(self):
        _, sys = sweep_system(regions=[frozenset()])
        assert valid(sys, sp_atom(frozenset())).value == TRUE

    def test_factivity_validity(self):
        _, sys = sweep_system(regions=[frozenset({0, 1})])
        f = sp_atom(frozenset({0, 1}))
        assert valid(sys, implies(know(0, f), f)).value == TRUE

    def test_flooding_distributed_knowledge(self):
        _, sys = flood_system()
        full = sp_atom(frozenset(range(4)))
        assert valid(sys, ev(dknow([0, 1], full))).value == TRUE

    def test_false_collects_witnesses(self):
        _, sys = sweep_system()
        verdict = valid(sys, sp_atom(frozenset(range(4))))
        assert verdict.value == FALSE
        assert (0, 0) in verdict.witnesses


class TestS5:
    def random_formulas(self, sys, grid, count=50, depth=4, seed=7):
        rng = random.Random(seed)
        atoms = [sp_atom(frozenset(c)) for c in [(0,), (0, 1), tuple(range(grid.n_cells)), ()]]
        robots = list(range(sys.n_robots))

        def gen(d):
            if d == 0 or rng.random() < 0.25:
                return rng.choice(atoms)
            kind = rng.choice(["not", "and", "or", "K", "D", "ev", "box"])
            if kind == "not":
                return Not(gen(d - 1))
            if kind == "and":
                return And(gen(d - 1), gen(d - 1))
            if kind == "or":
                return lor(gen(d - 1), gen(d - 1))
            if kind == "K":
                return Know(rng.choice(robots), gen(d - 1))
            if kind == "D":
                return dknow(rng.sample(robots, rng.randint(1, len(robots))), gen(d - 1))
            if kind == "ev":
                return Eventually(gen(d - 1))
            return box(gen(d - 1))

        return [gen(depth) for _ in range(count)]

    def install_all_sp(self, sys_builder):
        grid, sys = sys_builder
        regions = [frozenset(c) for c in [(0,), (0, 1), tuple(range(grid.n_cells)), ()]]
        return grid, sys.with_atoms(sp_valuation(sys, regions))

    @pytest.mark.parametrize("builder", ["sweep", "flood"])
    def test_s5_laws_on_random_battery(self, builder):
        grid, sys = self.install_all_sp(sweep_system() if builder == "sweep" else flood_system())
        for f in self.random_formulas(sys, grid):
            for r in range(sys.n_robots):
                kf = Know(r, f)
                assert valid(sys, implies(kf, f)).value == TRUE
                assert valid(sys, implies(kf, Know(r, kf))).value == TRUE
                assert valid(sys, implies(Not(kf), Know(r, Not(kf)))).value == TRUE

    def test_distributed_singleton_equals_knowledge(self):
        grid, sys = self.install_all_sp(flood_system())
        f = sp_atom(frozenset({0, 1}))
        for p in sys.points:
            assert eval_at(sys, p, know(0, f)).value == eval_at(sys, p, dknow([0], f)).value

    def test_distributed_monotone_in_group(self):
        grid, sys = self.install_all_sp(flood_system())
        f = sp_atom(frozenset({0, 1}))
        assert valid(sys, implies(dknow([0], f), dknow([0, 1], f))).value == TRUE


class TestMonotoneAtoms:
    def test_sp_antitone_in_region_order(self):
        grid = Grid(1, 4)
        _, sys = sweep_system()
        regions = all_regions(grid)
        sys = sys.with_atoms(sp_valuation(sys, [r.cells for r in regions]))
        for u, v in itertools.product(regions, repeat=2):
            if u.cells <= v.cells:
                f = implies(sp_atom(v.cells), sp_atom(u.cells))
                assert valid(sys, f).value == TRUE


class TestBoxDiamondDuality:
    def test_semantic_duality_on_closed_runs(self):
        grid, sys = sweep_system()
        rng = random.Random(3)
        battery = TestS5().random_formulas(sys, grid, count=20, depth=3, seed=11)
        sys = sys.with_atoms(sp_valuation(sys, [frozenset(c) for c in
                                                [(0,), (0, 1), tuple(range(4)), ()]]))
        for f in battery:
            for p in sys.points:
                b = eval_at(sys, p, box(f)).value
                d = eval_at(sys, p, Not(Eventually(Not(f)))).value
                assert b == d


class TestThreeValued:
    def test_open_run_eventually_unknown(self):
        _, sys = sweep_system(cycles=2)  # horizon too short to park
        assert sys.runs[0].is_open
        full = sp_atom(frozenset(range(4)))
        assert eval_at(sys, (0, 0), ev(full)).value == UNKNOWN
        assert eval_at(sys, (0, 0), box(Not(full))).value == UNKNOWN

    def test_decided_verdicts_stable_under_extension(self):
        decided = {}
        for cycles in (6, 9):
            _, sys = sweep_system(cycles=cycles,
                                  regions=[frozenset(range(4)), frozenset({0})])
            full = sp_atom(frozenset(range(4)))
            small = sp_atom(frozenset({0}))
            for label, f in (("ev_full", ev(full)), ("box_not", box(Not(small))),
                             ("ev_small", ev(small))):
                v = eval_at(sys, (0, 0), f).value
                if cycles == 6:
                    decided[label] = v
                elif decided[label] in (TRUE, FALSE):
                    assert v == decided[label]

    def test_conjunction_kleene(self):
        _, sys = sweep_system(cycles=2)
        full = sp_atom(frozenset(range(4)))
        seen0 = sp_atom(frozenset({0}))
        sys = sys.with_atoms(sp_valuation(sys, [frozenset(range(4)), frozenset({0})]))
        # UNKNOWN & FALSE is FALSE; UNKNOWN & TRUE is UNKNOWN
        assert eval_at(sys, (0, 0), And(ev(full), sp_atom(frozenset(range(4))))).value == FALSE
        assert eval_at(sys, (0, 3), And(ev(full), seen0)).value == UNKNOWN
