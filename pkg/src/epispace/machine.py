"""Finite robot and environment state machines for luminous look-compute-move systems.

The environment state is a tuple of (cell, light) per robot; robots read it
only through the environment's observation emitter. Lights are published
during MOVE, read during LOOK, and carry whatever a protocol exposes.
Robot identity is folded into the epistemic state so one machine serves a
homogeneous fleet.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Hashable, Iterable, Iterator

from .space import DIST_TOL, Grid

ENV_STATE_BOUND = 10 ** 6

LOOK = "LOOK"
COMPUTE = "COMPUTE"
MOVE = "MOVE"
WAIT = "WAIT"

EXPLORE_SWEEP = "EXPLORE_SWEEP"
FLOOD_EXPLORE = "FLOOD_EXPLORE"
GATHER_MIN_REGION = "GATHER_MIN_REGION"
GATHER_OSCILLATE = "GATHER_OSCILLATE"

PROTOCOLS = (EXPLORE_SWEEP, FLOOD_EXPLORE, GATHER_MIN_REGION, GATHER_OSCILLATE)


class ModelDefinitionError(ValueError):
    """A machine table is not total or a machine bound is violated."""


@dataclass(frozen=True)
class Capabilities:
    visibility: str = "full"            # full | myopic
    view_radius: float | None = None
    movement: str = "rigid"             # rigid | non-rigid
    min_distance: float | None = None
    memory: str = "luminous"            # luminous | oblivious
    synchrony: str = "FSYNC"
    async_k: int = 1

    def __post_init__(self):
        if self.visibility not in ("full", "myopic"):
            raise ValueError(f"unknown visibility {self.visibility!r}")
        if self.visibility == "myopic" and not (self.view_radius and self.view_radius > 0):
            raise ValueError("myopic visibility needs view_radius > 0")
        if self.movement not in ("rigid", "non-rigid"):
            raise ValueError(f"unknown movement {self.movement!r}")
        if self.movement == "non-rigid":
            if self.min_distance is None or not 0 < self.min_distance <= 1:
                raise ValueError("non-rigid movement needs min_distance in (0,1]")
        if self.memory not in ("luminous", "oblivious"):
            raise ValueError(f"unknown memory {self.memory!r}")


@dataclass(frozen=True)
class StateSpace:
    """A finite state set: always a size, materialized members when tractable."""

    size: int
    members: Callable[[], Iterator[Hashable]] | None = field(default=None, hash=False)

    def enumerable(self) -> bool:
        return self.members is not None


@dataclass(frozen=True)
class RobotMachine:
    epi_space: StateSpace
    obs_space: StateSpace
    action_space: StateSpace
    observe: Callable = field(hash=False)          # raw env emission -> observation
    step: Callable = field(hash=False)             # (epi, obs) -> epi
    control: Callable = field(hash=False)          # epi -> action
    light: Callable = field(hash=False)            # epi -> light value
    initial_epi: Callable = field(hash=False)      # robot id -> epi
    caps: Capabilities = Capabilities()
    name: str = "custom"
    footprint: Callable | None = field(default=None, hash=False)     # (rid, obs) -> frozenset[int]
    known_region: Callable | None = field(default=None, hash=False)  # epi -> frozenset[int]


@dataclass(frozen=True)
class EnvMachine:
    n_robots: int
    env_space: StateSpace
    evolve: Callable = field(hash=False)      # (env, actions per robot, adv) -> env
    emit_obs: Callable = field(hash=False)    # (env, adv) -> tuple of per-robot raw observations
    adversary_choices: tuple = (None,)
    make_initial_env: Callable | None = field(default=None, hash=False)  # cells -> env state
    positions: Callable | None = field(default=None, hash=False)  # env -> tuple[int, ...]
    lights: Callable | None = field(default=None, hash=False)     # env -> tuple


def table_fn(mapping: dict, what: str) -> Callable:
    """Wrap an explicit transition table; missing entries are model errors."""

    def lookup(*key):
        k = key[0] if len(key) == 1 else key
        try:
            return mapping[k]
        except KeyError:
            raise ModelDefinitionError(f"{what} undefined for {k!r}") from None

    lookup.table = mapping  # type: ignore[attr-defined]
    return lookup


def lcm_phase(
    robot: RobotMachine,
    env: EnvMachine,
    phase: str,
    local_state: tuple,
    env_state: Hashable,
    adv_choice=None,
):
    """Apply one phase of the cycle to one robot; returns (local', env')."""
    rid, epi, obs = local_state
    if phase == WAIT:
        return local_state, env_state
    if phase == LOOK:
        raw = env.emit_obs(env_state, adv_choice)[rid]
        return (rid, epi, robot.observe(raw)), env_state
    if phase == COMPUTE:
        return (rid, robot.step(epi, obs), obs), env_state
    if phase == MOVE:
        actions = [None] * env.n_robots
        actions[rid] = robot.control(epi)
        return local_state, env.evolve(env_state, tuple(actions), adv_choice)
    raise ValueError(f"unknown phase {phase!r}")


# ---------------------------------------------------------------------------
# Built-in grid protocols

def _axis_step_toward(grid: Grid, src: int, dst: int):
    """One move along the axis-ordered shortest path, axis 0 first."""
    a, b = grid.cell_coords(src), grid.cell_coords(dst)
    for axis in range(grid.dim):
        if a[axis] != b[axis]:
            return (axis, 1 if b[axis] > a[axis] else -1)
    return None


def _visible(grid: Grid, caps: Capabilities, here: int, there: int) -> bool:
    if caps.visibility == "full":
        return True
    return grid.distance(here, there) <= caps.view_radius + DIST_TOL


def _make_env(grid: Grid, caps: Capabilities, n_robots: int, light_count: int) -> EnvMachine:
    n_cells = grid.n_cells
    declared = (n_cells * max(light_count, 1)) ** n_robots
    if declared > ENV_STATE_BOUND:
        raise ModelDefinitionError(
            f"declared environment state count {declared} exceeds bound {ENV_STATE_BOUND}"
        )

    def evolve(env, actions, adv):
        slots = list(env)
        for rid, action in enumerate(actions):
            if action is None:
                continue
            move, light = action
            cell, _ = slots[rid]
            if adv == ("freeze", rid):
                new_cell = cell  # non-rigid adversary truncates the motion
            elif move is None:
                new_cell = cell
            else:
                axis, delta = move
                coords = list(grid.cell_coords(cell))
                coords[axis] = min(max(coords[axis] + delta, 0), grid.cells_per_axis - 1)
                new_cell = grid.cell_index(coords)
            slots[rid] = (new_cell, light)
        return tuple(slots)

    def emit_obs(env, adv):
        out = []
        for rid in range(n_robots):
            here = env[rid][0]
            slots = tuple(
                env[other] if other == rid or _visible(grid, caps, here, env[other][0]) else None
                for other in range(n_robots)
            )
            out.append(slots)
        return tuple(out)

    adversary: tuple = (None,)
    if caps.movement == "non-rigid":
        adversary = (None,) + tuple(("freeze", rid) for rid in range(n_robots))

    return EnvMachine(
        n_robots=n_robots,
        env_space=StateSpace(declared),
        evolve=evolve,
        emit_obs=emit_obs,
        adversary_choices=adversary,
        positions=lambda env: tuple(slot[0] for slot in env),
        lights=lambda env: tuple(slot[1] for slot in env),
    )


def _default_strips(grid: Grid, n_robots: int) -> list[tuple[int, ...]]:
    cells = list(grid.all_cells())
    chunk = (len(cells) + n_robots - 1) // n_robots
    return [tuple(cells[i * chunk:(i + 1) * chunk]) for i in range(n_robots)]


def _own_cell(rid: int, obs) -> frozenset[int]:
    if obs is None:
        return frozenset()
    return frozenset({obs[rid][0]})


def make_grid_walker(
    grid: Grid,
    caps: Capabilities,
    protocol: str,
    n_robots: int = 1,
    *,
    strips: Iterable[Iterable[int]] | None = None,
    rendezvous: Iterable[Iterable[int]] | None = None,
    broadcast_period: int = 1,
) -> tuple[RobotMachine, EnvMachine]:
    """Build one of the named grid protocols.

    strips: per robot, the cells it is responsible for sweeping (exploration
    protocols); defaults to a contiguous partition of the grid.
    rendezvous: pairwise-disjoint candidate regions (gathering protocols).
    broadcast_period: FLOOD_EXPLORE publishes its known region on every
    broadcast_period-th COMPUTE; 1 is flooding proper.
    """
    if n_robots < 1:
        raise ValueError("n_robots must be >= 1")
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")

    if protocol == EXPLORE_SWEEP:
        return _build_sweep(grid, caps, n_robots, strips, flood=False, period=1)
    if protocol == FLOOD_EXPLORE:
        if broadcast_period < 1:
            raise ValueError("broadcast_period must be >= 1")
        return _build_sweep(grid, caps, n_robots, strips, flood=True, period=broadcast_period)

    if rendezvous is None:
        raise ValueError(f"{protocol} needs rendezvous regions")
    regions = [frozenset(r) for r in rendezvous]
    for i, u in enumerate(regions):
        if not u or not u <= set(grid.all_cells()):
            raise ValueError(f"rendezvous region {i} empty or outside the grid")
        for v in regions[i + 1:]:
            if u & v:
                raise ValueError("rendezvous regions must be pairwise disjoint")
    if protocol == GATHER_MIN_REGION:
        return _build_gather(grid, caps, n_robots, regions, oscillate=False)
    return _build_gather(grid, caps, n_robots, regions, oscillate=True)


def _build_sweep(grid, caps, n_robots, strips, flood, period):
    n_cells = grid.n_cells
    strip_list = (
        [tuple(sorted(s)) for s in strips] if strips is not None else _default_strips(grid, n_robots)
    )
    if len(strip_list) != n_robots:
        raise ValueError("need one strip per robot")
    for s in strip_list:
        if not set(s) <= set(grid.all_cells()):
            raise ValueError("strip contains cells outside the grid")
    oblivious = caps.memory == "oblivious"

    # epi: (rid, pos | None, known region, compute counter mod period, published region)
    def initial_epi(rid):
        return (rid, None, frozenset(), 0, frozenset())

    def step(epi, obs):
        if obs is None:
            return epi
        rid, _, known, ctr, published = epi
        cell = obs[rid][0]
        gained = {cell}
        if flood:
            for slot in obs:
                if slot is not None and isinstance(slot[1], frozenset):
                    gained |= slot[1]
        known2 = frozenset(gained) if oblivious else known | gained
        ctr2 = (ctr + 1) % period
        published2 = published
        if flood and (ctr + 1) % period == 0:
            published2 = known2
        return (rid, cell, known2, ctr2, published2)

    def control(epi):
        rid, pos, known, _, published = epi
        light = published if flood else None
        if pos is None:
            return (None, light)
        target = next((c for c in strip_list[rid] if c not in known), None)
        if target is None:
            return (None, light)
        return (_axis_step_toward(grid, pos, target), light)

    def light(epi):
        return epi[4] if flood else None

    light_count = 2 ** n_cells if flood else 1
    epi_count = n_robots * (n_cells + 1) * (2 ** n_cells) * period * light_count
    obs_count = (n_cells * light_count + 1) ** n_robots

    def epi_members():
        import itertools as it
        subsets = [frozenset(c) for k in range(n_cells + 1)
                   for c in it.combinations(range(n_cells), k)]
        pubs = subsets if flood else [frozenset()]
        for rid in range(n_robots):
            for pos in [None, *range(n_cells)]:
                for known in subsets:
                    for ctr in range(period):
                        for pub in pubs:
                            yield (rid, pos, known, ctr, pub)

    robot = RobotMachine(
        epi_space=StateSpace(epi_count, epi_members if epi_count <= 100_000 else None),
        obs_space=StateSpace(obs_count),
        action_space=StateSpace((2 * grid.dim + 1) * light_count),
        observe=lambda raw: raw,
        step=step,
        control=control,
        light=light,
        initial_epi=initial_epi,
        caps=caps,
        name=FLOOD_EXPLORE if flood else EXPLORE_SWEEP,
        footprint=_own_cell,
        known_region=lambda epi: epi[2],
    )
    env = _finish_env(grid, caps, n_robots, light_count, robot)
    return robot, env


def _build_gather(grid, caps, n_robots, regions, oscillate):
    n_cells = grid.n_cells
    m = len(regions)

    def region_of(cell):
        for i, reg in enumerate(regions):
            if cell in reg:
                return i
        return -1

    def target_cell(pos, reg):
        # deterministic rendezvous point: closest region cell, ties by index
        return min(reg, key=lambda c: (grid.distance(pos, c), c))

    def initial_epi(rid):
        return (rid, None, -1)

    if not oscillate:
        def step(epi, obs):
            if obs is None:
                return epi
            rid, _, chosen = epi
            cell = obs[rid][0]
            candidates = [chosen] if chosen >= 0 else []
            own = region_of(cell)
            if own >= 0:
                candidates.append(own)
            for slot in obs:
                if slot is not None and isinstance(slot[1], int) and slot[1] >= 0:
                    candidates.append(slot[1])
            return (rid, cell, min(candidates) if candidates else -1)
    else:
        def step(epi, obs):
            if obs is None:
                return epi
            rid, _, chosen = epi
            cell = obs[rid][0]
            if chosen < 0:
                return (rid, cell, region_of(cell) if region_of(cell) >= 0 else 0)
            if cell in regions[chosen]:
                return (rid, cell, (chosen + 1) % m)  # arrived: defect to the next region
            return (rid, cell, chosen)

    def control(epi):
        _, pos, chosen = epi
        if pos is None or chosen < 0:
            return (None, chosen)
        if pos in regions[chosen]:
            return (None, chosen)
        return (_axis_step_toward(grid, pos, target_cell(pos, regions[chosen])), chosen)

    def light(epi):
        return epi[2]

    light_count = m + 1
    epi_count = n_robots * (n_cells + 1) * light_count

    def epi_members():
        for rid in range(n_robots):
            for pos in [None, *range(n_cells)]:
                for chosen in range(-1, m):
                    yield (rid, pos, chosen)

    robot = RobotMachine(
        epi_space=StateSpace(epi_count, epi_members),
        obs_space=StateSpace((n_cells * light_count + 1) ** n_robots),
        action_space=StateSpace((2 * grid.dim + 1) * light_count),
        observe=lambda raw: raw,
        step=step,
        control=control,
        light=light,
        initial_epi=initial_epi,
        caps=caps,
        name=GATHER_OSCILLATE if oscillate else GATHER_MIN_REGION,
        footprint=_own_cell,
        known_region=None,
    )
    env = _finish_env(grid, caps, n_robots, light_count, robot)
    return robot, env


def _finish_env(grid, caps, n_robots, light_count, robot) -> EnvMachine:
    env = _make_env(grid, caps, n_robots, light_count)

    def make_initial_env(cells):
        cells = tuple(cells)
        if len(cells) != n_robots:
            raise ValueError(f"need {n_robots} initial cells, got {len(cells)}")
        for c in cells:
            if not 0 <= c < grid.n_cells:
                raise ValueError(f"initial cell {c} outside the grid")
        return tuple((c, robot.light(robot.initial_epi(rid))) for rid, c in enumerate(cells))

    return replace(env, make_initial_env=make_initial_env)


def validate_machine(robot: RobotMachine, env: EnvMachine, *, bound: int = 50_000) -> list[str]:
    """Report totality and consistency violations; empty report = valid."""
    report: list[str] = []
    for name, space in (("epi", robot.epi_space), ("obs", robot.obs_space),
                        ("action", robot.action_space), ("env", env.env_space)):
        if space.size < 1:
            report.append(f"{name} state set is empty")
    if env.env_space.size > ENV_STATE_BOUND:
        report.append(f"env state count {env.env_space.size} exceeds bound {ENV_STATE_BOUND}")

    if robot.epi_space.enumerable():
        epis = list(robot.epi_space.members())
        for e in epis:
            try:
                robot.control(e)
            except ModelDefinitionError as exc:
                report.append(f"control: {exc}")
            try:
                robot.light(e)
            except ModelDefinitionError as exc:
                report.append(f"light: {exc}")
        if robot.obs_space.enumerable():
            obss = list(robot.obs_space.members())
            if len(epis) * len(obss) <= bound:
                for e in epis:
                    for o in obss:
                        try:
                            robot.step(e, o)
                        except ModelDefinitionError as exc:
                            report.append(f"step: {exc}")
        if robot.caps.memory == "oblivious":
            lights = {robot.light(e) for e in epis}
            if len(lights) > 1:
                report.append("oblivious robot has a non-constant light map")
    return report
