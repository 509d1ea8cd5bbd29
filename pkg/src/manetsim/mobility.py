"""Manhattan Grid movement scenarios and the ns-2 movement-script format.

Nodes travel along the lines of a regular street grid, one block at a time,
choosing at every intersection to go straight, left, or right and sometimes
stopping there for a while. Scenarios are stored as per-node waypoint lists
and are exactly representable in the 6-decimal ns-2 ``setdest`` format:
segment speeds, initial coordinates and post-pause departure times are all
kept on the 1e-6 grid, and arrivals are recomputed from them the same way on
import.
"""

from __future__ import annotations

import bisect
import math
import re
from dataclasses import dataclass, field

import numpy as np

QUANTUM = 1e-6


@dataclass(frozen=True)
class GridSpec:
    width: float = 500.0
    height: float = 500.0
    u: int = 6  # vertical streets
    v: int = 6  # horizontal streets

    def __post_init__(self):
        if self.u < 2 or self.v < 2:
            raise ValueError("grid needs at least two streets per axis")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("grid dimensions must be positive")

    @property
    def xs(self) -> list[float]:
        return [i * self.width / (self.u - 1) for i in range(self.u)]

    @property
    def ys(self) -> list[float]:
        return [j * self.height / (self.v - 1) for j in range(self.v)]


@dataclass(frozen=True)
class Waypoint:
    at: float
    x: float
    y: float
    speed_to_next: float = 0.0

    @property
    def pos(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass
class MobilityScenario:
    grid: GridSpec
    duration: float
    traces: list[list[Waypoint]]
    params: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.traces)


def _q(value: float) -> float:
    return round(value, 6)


def _arrival(t0: float, x0: float, y0: float, x1: float, y1: float, speed: float) -> float:
    # Shared by the generator and the importer so both land on the same float.
    return t0 + math.hypot(x1 - x0, y1 - y0) / speed


def generate_manhattan(grid: GridSpec, n_nodes: int, v_min: float, v_max: float, max_pause: float,
                       duration: float, rng, p_straight: float = 0.5, p_left: float = 0.25,
                       p_right: float = 0.25, p_pause: float = 0.5) -> MobilityScenario:
    """Random Manhattan Grid traces for ``n_nodes`` nodes over ``[0, duration]``.

    ``rng`` is any object with ``random()``/``uniform()``/``choices()``
    (normally the "mobility" stream).
    """
    if v_min > v_max:
        raise ValueError(f"v_min ({v_min}) exceeds v_max ({v_max})")
    if v_min <= 0:
        raise ValueError("v_min must be positive")
    if n_nodes < 0 or duration <= 0 or max_pause < 0:
        raise ValueError("n_nodes, duration and max_pause must be non-negative (duration positive)")
    xs, ys = grid.xs, grid.ys
    traces = [
        _manhattan_trace(grid, xs, ys, v_min, v_max, max_pause, duration, rng,
                         (p_straight, p_left, p_right), p_pause)
        for _ in range(n_nodes)
    ]
    params = dict(n_nodes=n_nodes, v_min=v_min, v_max=v_max, max_pause=max_pause,
                  p_pause=p_pause, p_turn=(p_left, p_right), p_straight=p_straight,
                  seed=getattr(rng, "master_seed", None))
    return MobilityScenario(grid, float(duration), traces, params)


def _draw_speed(rng, v_min: float, v_max: float) -> float:
    return min(max(_q(rng.uniform(v_min, v_max)), v_min), v_max)


def _manhattan_trace(grid, xs, ys, v_min, v_max, max_pause, duration, rng, turn_probs, p_pause):
    # Initial point: uniform over the total street length.
    total_v = grid.u * grid.height
    total_h = grid.v * grid.width
    if rng.random() * (total_v + total_h) < total_v:
        i = rng.randrange(grid.u)
        x, y = xs[i], _q(rng.uniform(0.0, grid.height))
        vertical = True
    else:
        j = rng.randrange(grid.v)
        x, y = _q(rng.uniform(0.0, grid.width)), ys[j]
        vertical = False

    # First leg: to one of the bracketing intersections along the street.
    if vertical:
        sign = 1 if rng.random() < 0.5 else -1
        k = bisect.bisect_right(ys, y) if sign > 0 else bisect.bisect_left(ys, y) - 1
        if k >= len(ys):
            sign, k = -1, bisect.bisect_left(ys, y) - 1
        elif k < 0:
            sign, k = 1, bisect.bisect_right(ys, y)
        target = (x, ys[k])
        heading = (0, sign)
    else:
        sign = 1 if rng.random() < 0.5 else -1
        k = bisect.bisect_right(xs, x) if sign > 0 else bisect.bisect_left(xs, x) - 1
        if k >= len(xs):
            sign, k = -1, bisect.bisect_left(xs, x) - 1
        elif k < 0:
            sign, k = 1, bisect.bisect_right(xs, x)
        target = (xs[k], y)
        heading = (sign, 0)

    trace: list[Waypoint] = []
    t = 0.0
    while True:
        speed = _draw_speed(rng, v_min, v_max)
        trace.append(Waypoint(t, x, y, speed))
        t_arr = _arrival(t, x, y, target[0], target[1], speed)
        x, y = target
        if t_arr >= duration:
            trace.append(Waypoint(t_arr, x, y, 0.0))
            break
        t = t_arr
        if max_pause > 0 and rng.random() < p_pause:
            depart = math.floor((t + rng.uniform(0.0, max_pause)) / QUANTUM) * QUANTUM
            depart = _q(depart)
            # Pauses shorter than the print quantum would not survive a round trip.
            if depart - t > QUANTUM:
                trace.append(Waypoint(t, x, y, 0.0))
                if depart >= duration:
                    break
                t = depart
        heading = _turn(grid, xs, ys, x, y, heading, rng, turn_probs)
        ix = xs.index(x) + heading[0]
        iy = ys.index(y) + heading[1]
        target = (xs[ix], ys[iy])
    return trace


def _turn(grid, xs, ys, x, y, heading, rng, turn_probs):
    dx, dy = heading
    options = [(dx, dy), (-dy, dx), (dy, -dx)]  # straight, left, right
    ix, iy = xs.index(x), ys.index(y)
    weights = []
    for (ox, oy), p in zip(options, turn_probs):
        ok = 0 <= ix + ox < grid.u and 0 <= iy + oy < grid.v
        weights.append(p if ok else 0.0)
    if sum(weights) <= 0:
        # Every forward option is closed (only possible with zero-probability turns): reverse.
        return (-dx, -dy)
    return rng.choices(options, weights=weights)[0]


def _segment_index(trace: list[Waypoint], t: float) -> int:
    lo, hi = 0, len(trace) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if trace[mid].at <= t:
            lo = mid
        else:
            hi = mid - 1
    return lo


def _interpolate(a: Waypoint, b: Waypoint | None, t: float) -> tuple[float, float]:
    if b is None or a.speed_to_next == 0.0 or t <= a.at:
        return (a.x, a.y)
    if t >= b.at:
        return (b.x, b.y)
    frac = (t - a.at) / (b.at - a.at)
    return (a.x + (b.x - a.x) * frac, a.y + (b.y - a.y) * frac)


def position_at(scenario: MobilityScenario, node: int, t: float) -> tuple[float, float]:
    if not 0 <= node < len(scenario.traces):
        raise KeyError(f"unknown node {node}")
    if t < 0 or t > scenario.duration:
        raise ValueError(f"t={t} outside [0, {scenario.duration}]")
    trace = scenario.traces[node]
    k = _segment_index(trace, t)
    return _interpolate(trace[k], trace[k + 1] if k + 1 < len(trace) else None, t)


class PositionTracker:
    """Vectorized positions of all nodes for monotonically increasing query times."""

    def __init__(self, scenario: MobilityScenario):
        self.scenario = scenario
        n = scenario.n_nodes
        self._traces = scenario.traces
        self._cursor = [0] * n
        self._t0 = np.zeros(n)
        self._t1 = np.full(n, np.inf)
        self._p0 = np.zeros((n, 2))
        self._p1 = np.zeros((n, 2))
        self._span = np.full(n, np.inf)  # segment duration, infinite while parked
        self._last_t = -1.0
        self._cache = np.zeros((n, 2))
        for i in range(n):
            self._load(i, 0)

    def _load(self, i: int, k: int) -> None:
        trace = self._traces[i]
        self._cursor[i] = k
        a = trace[k]
        self._t0[i] = a.at
        self._p0[i] = (a.x, a.y)
        if k + 1 < len(trace):
            b = trace[k + 1]
            self._t1[i] = b.at
            self._p1[i] = (b.x, b.y)
            self._span[i] = b.at - a.at if a.speed_to_next != 0.0 and b.at > a.at else np.inf
        else:
            self._t1[i] = np.inf
            self._p1[i] = (a.x, a.y)
            self._span[i] = np.inf

    def positions(self, t: float) -> np.ndarray:
        if t == self._last_t:
            return self._cache
        if t < self._last_t:
            raise ValueError("PositionTracker queries must be non-decreasing in time")
        stale = np.nonzero(self._t1 <= t)[0]
        for i in stale:
            trace = self._traces[i]
            k = self._cursor[i]
            while k + 1 < len(trace) and trace[k + 1].at <= t:
                k += 1
            self._load(i, k)
        frac = np.clip((t - self._t0) / self._span, 0.0, 1.0)
        self._cache = self._p0 + (self._p1 - self._p0) * frac[:, None]
        self._last_t = t
        return self._cache


def static_scenario(points, duration: float = 100.0, grid: GridSpec | None = None) -> MobilityScenario:
    """Scenario with every node parked at the given coordinates."""
    traces = [[Waypoint(0.0, float(x), float(y), 0.0)] for x, y in points]
    return MobilityScenario(grid or GridSpec(), float(duration), traces, {"static": True})


def _fmt(value: float) -> str:
    text = f"{value:.6f}"
    return "0.000000" if text == "-0.000000" else text


def export_ns2(scenario: MobilityScenario) -> str:
    lines = []
    for i, trace in enumerate(scenario.traces):
        if not trace:
            continue
        first = trace[0]
        lines.append(f"$node_({i}) set X_ {_fmt(first.x)}")
        lines.append(f"$node_({i}) set Y_ {_fmt(first.y)}")
        lines.append(f"$node_({i}) set Z_ 0.0")
        for a, b in zip(trace, trace[1:]):
            if a.speed_to_next == 0.0:
                continue
            lines.append(f'$ns_ at {_fmt(a.at)} "$node_({i}) setdest {_fmt(b.x)} {_fmt(b.y)} '
                         f'{_fmt(a.speed_to_next)}"')
    return "".join(line + "\n" for line in lines)


class Ns2FormatError(ValueError):
    pass


_NUM = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
_SET_RE = re.compile(r"^\$node_\((\d+)\)\s+set\s+([XYZ])_\s+" + _NUM + r"$")
_DEST_RE = re.compile(r'^\$ns_\s+at\s+' + _NUM + r'\s+"\$node_\((\d+)\)\s+setdest\s+'
                      + _NUM + r"\s+" + _NUM + r"\s+" + _NUM + r'"$')


def import_ns2(text: str, duration: float | None = None, grid: GridSpec | None = None) -> MobilityScenario:
    """Rebuild waypoint traces from an ns-2 movement script.

    A ``setdest`` issued while the previous move is still under way redirects
    the node from its current position, as ns-2 does, except when the issue
    time is the 6-decimal rounding of that move's arrival time: then the move
    counts as completed and the new one starts at the exact arrival.
    """
    start: dict[int, list] = {}
    moves: dict[int, list[tuple[float, float, float, float, int]]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _SET_RE.match(line)
        if m:
            node, axis, val = int(m.group(1)), m.group(2), float(m.group(3))
            slot = start.setdefault(node, [None, None])
            if axis != "Z":
                slot["XY".index(axis)] = val
            continue
        m = _DEST_RE.match(line)
        if m:
            t, node = float(m.group(1)), int(m.group(2))
            x, y, speed = float(m.group(3)), float(m.group(4)), float(m.group(5))
            if t < 0:
                raise Ns2FormatError(f"line {lineno}: negative time {t}")
            moves.setdefault(node, []).append((t, x, y, speed, lineno))
            continue
        raise Ns2FormatError(f"line {lineno}: unrecognised statement {raw!r}")

    n = max(list(start) + list(moves), default=-1) + 1
    traces = []
    horizon = 0.0
    for i in range(n):
        if i not in start or None in start[i]:
            raise Ns2FormatError(f"node {i}: missing initial X_/Y_ position")
        trace, last_t = _replay_moves(start[i][0], start[i][1], sorted(moves.get(i, []), key=lambda mv: mv[0]))
        traces.append(trace)
        horizon = max(horizon, last_t)
    if duration is None:
        duration = horizon
    return MobilityScenario(grid or GridSpec(), float(duration), traces, {"source": "ns2"})


def _replay_moves(x: float, y: float, moves) -> tuple[list[Waypoint], float]:
    tol = 0.5 * QUANTUM + 1e-9
    wps: list[Waypoint] = [Waypoint(0.0, x, y, 0.0)]
    moving = False
    target = (x, y)
    end_t = 0.0
    last_t = 0.0
    for t, tx, ty, speed, lineno in moves:
        if moving and t >= end_t - tol:
            # The previous move finished before (or at the rounded instant of) this command.
            wps.append(Waypoint(end_t, target[0], target[1], 0.0))
            t_start = t if t > end_t + tol else end_t
            px, py = target
        elif moving:
            px, py = _interpolate(wps[-1], Waypoint(end_t, target[0], target[1]), t)
            wps.append(Waypoint(t, px, py, 0.0))
            t_start = t
        else:
            px, py = wps[-1].x, wps[-1].y
            t_start = max(t, wps[-1].at)
        moving = False
        dist = math.hypot(tx - px, ty - py)
        if dist == 0.0:
            continue
        if speed <= 0.0:
            raise Ns2FormatError(f"line {lineno}: non-positive speed {speed} for a move of {dist:.6f} m")
        if wps[-1].at == t_start:
            wps[-1] = Waypoint(t_start, px, py, speed)
        else:
            wps.append(Waypoint(t_start, px, py, speed))
        target = (tx, ty)
        end_t = _arrival(t_start, px, py, tx, ty, speed)
        moving = True
        last_t = end_t
    if moving:
        wps.append(Waypoint(end_t, target[0], target[1], 0.0))
    return wps, last_t
