"""Continuous-time reinforcement dynamics.

Every vertex carries a rate-1 Poisson clock. When vertex ``v`` rings with
mark ``u ~ U[0, 1]``, its incident edges split ``[0, 1]`` into consecutive
intervals of length ``N(e)**alpha / sum(N(e')**alpha)`` (incidence order) and
the edge whose interval holds ``u`` gains one unit of weight.

The |V| clocks are simulated as their superposition: event times form a
rate-|V| Poisson process and each event picks a uniform vertex. Event times,
vertices and marks do not depend on the weights, so they are drawn in fixed
size chunks by :class:`EventStream`; only the edge choice reads the state.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit

from .analysis import SnapshotSeries
from .graph import Graph

__all__ = [
    "WeightState",
    "SimConfig",
    "Event",
    "EventStream",
    "init_state",
    "selection_probabilities",
    "step",
    "run",
    "normalized_weights",
    "dyadic_schedule",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_VERSION",
]

CHUNK_SIZE = 1 << 16
CHECKPOINT_VERSION = 1


@dataclass
class WeightState:
    t: float
    weights: np.ndarray
    event_count: int = 0

    def copy(self) -> "WeightState":
        return WeightState(self.t, self.weights.copy(), self.event_count)


@dataclass
class SimConfig:
    alpha: float
    t_max: float
    seed: int
    snapshot_times: Sequence[float] = ()
    allow_strong: bool = False

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.alpha >= 1 and not self.allow_strong:
            raise ValueError(
                f"alpha={self.alpha} is outside the weak-reinforcement regime (alpha < 1); "
                "pass allow_strong=True to simulate it anyway"
            )
        if not self.t_max >= 0:
            raise ValueError(f"t_max must be >= 0, got {self.t_max}")
        times = [float(s) for s in self.snapshot_times]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot_times must be strictly increasing")
        if times and (times[0] <= 0 or times[-1] > self.t_max):
            raise ValueError("snapshot_times must lie in (0, t_max]")
        self.snapshot_times = tuple(times)


@dataclass(frozen=True)
class Event:
    time: float
    vertex: int
    mark: float
    edge: int  # -1 when the vertex is isolated


def dyadic_schedule(t0: float, t_max: float, ratio: float = 2.0) -> list[float]:
    """Times ``t0 * ratio**j`` below ``t_max``, followed by ``t_max`` itself."""
    if t0 <= 0 or ratio <= 1:
        raise ValueError(f"need t0 > 0 and ratio > 1, got t0={t0}, ratio={ratio}")
    if t_max <= 0:
        return []
    out = []
    j = 0
    while (s := t0 * ratio**j) < t_max:
        out.append(s)
        j += 1
    out.append(float(t_max))
    return out


class EventStream:
    """Reproducible supply of (time, vertex, mark) triples for |V| clocks.

    Draws are generated CHUNK_SIZE at a time from a PCG64 generator. The
    stream state is the generator state at the start of the current chunk,
    the clock value at that point and the read position, which is enough to
    regenerate the chunk and carry on bit-identically after a checkpoint.
    """

    def __init__(self, n_vertices: int, seed: int | None = None, *, chunk_size: int = CHUNK_SIZE):
        if n_vertices < 1:
            raise ValueError("need at least one vertex")
        self.n_vertices = int(n_vertices)
        self.chunk_size = int(chunk_size)
        self._bitgen = np.random.PCG64(seed)
        self._clock = 0.0
        self._fill()

    def _fill(self) -> None:
        self._chunk_state = self._bitgen.state
        self._chunk_clock = self._clock
        gen = np.random.Generator(self._bitgen)
        gaps = gen.exponential(1.0 / self.n_vertices, size=self.chunk_size)
        self.times = self._chunk_clock + np.cumsum(gaps)
        self.vertices = gen.integers(0, self.n_vertices, size=self.chunk_size, dtype=np.int64)
        self.marks = gen.random(self.chunk_size)
        self._clock = float(self.times[-1])
        self.pos = 0

    def peek_time(self) -> float:
        return float(self.times[self.pos])

    def take(self) -> tuple[float, int, float]:
        i = self.pos
        out = float(self.times[i]), int(self.vertices[i]), float(self.marks[i])
        self.advance(i + 1)
        return out

    def advance(self, pos: int) -> None:
        self.pos = pos
        if self.pos >= self.chunk_size:
            self._fill()

    def get_state(self) -> dict:
        return {
            "n_vertices": self.n_vertices,
            "chunk_size": self.chunk_size,
            "bit_generator": self._chunk_state,
            "chunk_clock": self._chunk_clock,
            "pos": self.pos,
        }

    @classmethod
    def from_state(cls, state: dict) -> "EventStream":
        obj = cls.__new__(cls)
        obj.n_vertices = int(state["n_vertices"])
        obj.chunk_size = int(state["chunk_size"])
        obj._bitgen = np.random.PCG64()
        obj._bitgen.state = state["bit_generator"]
        obj._clock = float(state["chunk_clock"])
        obj._fill()
        obj.pos = int(state["pos"])
        return obj


def init_state(g: Graph) -> WeightState:
    return WeightState(t=0.0, weights=np.ones(g.edge_count, dtype=np.int64), event_count=0)


def selection_probabilities(state: WeightState, g: Graph, v: int, alpha: float) -> np.ndarray:
    """Choice law of a firing at ``v``, ordered like ``g.incidence[v]``."""
    inc = g.incidence[v]
    if not inc:
        raise ValueError(f"vertex {v} is isolated; its firings select no edge")
    powered = np.array([float(state.weights[e]) ** alpha for e in inc])
    return powered / powered.sum()


def _choose_edge(weights, inc: Sequence[int], alpha: float, u: float) -> int:
    # Same arithmetic as _advance_kernel, so both paths pick identical edges.
    total = 0.0
    for e in inc:
        total += float(weights[e]) ** alpha
    target = u * total
    acc = 0.0
    for e in inc:
        acc += float(weights[e]) ** alpha
        if target < acc:
            return e
    return inc[-1]


def step(state: WeightState, g: Graph, alpha: float, rng: EventStream) -> Event:
    """Apply the next firing from ``rng`` to ``state`` and return it."""
    if rng.n_vertices != g.vertex_count:
        raise ValueError("event stream was built for a different vertex count")
    time, v, u = rng.take()
    state.t = time
    inc = g.incidence[v]
    if not inc:
        return Event(time, v, u, -1)
    e = _choose_edge(state.weights, inc, alpha, u)
    state.weights[e] += 1
    state.event_count += 1
    return Event(time, v, u, e)


@njit(cache=True)
def _advance_kernel(weights, indptr, indices, alpha, times, vertices, marks, pos, t_stop):
    applied = 0
    n = times.shape[0]
    while pos < n and times[pos] <= t_stop:
        v = vertices[pos]
        lo = indptr[v]
        hi = indptr[v + 1]
        if hi > lo:
            total = 0.0
            for k in range(lo, hi):
                total += float(weights[indices[k]]) ** alpha
            target = marks[pos] * total
            acc = 0.0
            chosen = indices[hi - 1]
            for k in range(lo, hi):
                acc += float(weights[indices[k]]) ** alpha
                if target < acc:
                    chosen = indices[k]
                    break
            weights[chosen] += 1
            applied += 1
        pos += 1
    return pos, applied


def _advance_to(state: WeightState, g: Graph, alpha: float, stream: EventStream, t_stop: float) -> None:
    """Apply every event with time <= t_stop, then set the clock to t_stop."""
    indptr, indices = g.csr
    while True:
        pos, applied = _advance_kernel(
            state.weights, indptr, indices, float(alpha),
            stream.times, stream.vertices, stream.marks, stream.pos, float(t_stop),
        )
        state.event_count += int(applied)
        if pos < stream.chunk_size:
            stream.pos = int(pos)
            break
        stream.advance(int(pos))
    state.t = max(state.t, float(t_stop))


def run(
    state: WeightState,
    g: Graph,
    cfg: SimConfig,
    stream: EventStream | None = None,
    *,
    stop_at: float | None = None,
) -> SnapshotSeries:
    """Evolve ``state`` in place up to ``cfg.t_max`` and record snapshots.

    Snapshots at times already passed by ``state.t`` are skipped, so a run
    resumed from a checkpoint records exactly the remaining schedule. With
    ``stop_at`` the run halts early at that time (for checkpointing).
    """
    if stream is None:
        stream = EventStream(g.vertex_count, cfg.seed)
    if cfg.t_max <= 0:
        return SnapshotSeries.empty(g.edge_count)
    schedule = list(cfg.snapshot_times) or [float(cfg.t_max)]
    horizon = float(cfg.t_max) if stop_at is None else min(float(stop_at), float(cfg.t_max))
    times, weights = [], []
    for s in schedule:
        if s <= state.t:
            continue
        if s > horizon:
            break
        _advance_to(state, g, cfg.alpha, stream, s)
        times.append(s)
        weights.append(state.weights.copy())
    if state.t < horizon:
        _advance_to(state, g, cfg.alpha, stream, horizon)
    if not times:
        return SnapshotSeries.empty(g.edge_count)
    return SnapshotSeries.from_weights(np.array(times), np.array(weights))


def normalized_weights(state: WeightState) -> np.ndarray:
    if state.t <= 0:
        raise ValueError("normalized weights are undefined at t = 0")
    return state.weights / state.t


def save_checkpoint(path, state: WeightState, stream: EventStream, extra: dict | None = None) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "t": state.t,
        "event_count": state.event_count,
        "weights": state.weights.tolist(),
        "stream": stream.get_state(),
    }
    if extra:
        doc["extra"] = extra
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_checkpoint(path) -> tuple[WeightState, EventStream, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    state = WeightState(
        t=float(doc["t"]),
        weights=np.array(doc["weights"], dtype=np.int64),
        event_count=int(doc["event_count"]),
    )
    return state, EventStream.from_state(doc["stream"]), doc.get("extra", {})
