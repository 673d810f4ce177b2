"""Empirical diagnostics for trajectories and bound arithmetic on regular graphs.

liminf/limsup of the normalized weights are not observable in finite time;
everything here works with finite-window estimates of them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph

__all__ = [
    "SnapshotSeries",
    "LimitEstimate",
    "BoundSequence",
    "GUARD",
    "bootstrap_f",
    "bootstrap_sequence",
    "auto_bracket",
    "improvement_check",
    "lower_threshold_check",
    "improvement_grid",
    "lower_threshold_grid",
    "alpha_max_pass",
    "a_kl",
    "estimate_limits",
    "classify_stability",
    "unstable_components",
    "convergence_report",
    "UnionFind",
]

# strict inequalities in the bound checks must clear this margin
GUARD = 1e-12


@dataclass
class SnapshotSeries:
    times: np.ndarray
    x: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim != 2 or self.x.shape[0] != len(self.times):
            raise ValueError("x must have one row per snapshot time")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        if np.any(self.x < 0):
            raise ValueError("normalized weights must be nonnegative")

    @classmethod
    def empty(cls, n_edges: int) -> "SnapshotSeries":
        return cls(np.zeros(0), np.zeros((0, n_edges)), np.zeros((0, n_edges), dtype=np.int64))

    @classmethod
    def from_weights(cls, times, weights) -> "SnapshotSeries":
        times = np.asarray(times, dtype=float)
        weights = np.asarray(weights, dtype=np.int64)
        return cls(times, weights / times[:, None], weights)

    @property
    def n_edges(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return len(self.times)

    def concat(self, other: "SnapshotSeries") -> "SnapshotSeries":
        w = None
        if self.weights is not None and other.weights is not None:
            w = np.concatenate([self.weights, other.weights])
        return SnapshotSeries(
            np.concatenate([self.times, other.times]), np.concatenate([self.x, other.x]), w
        )


@dataclass
class LimitEstimate:
    x_minus: np.ndarray
    x_plus: np.ndarray
    window: tuple[float, float]


@dataclass
class BoundSequence:
    alpha: float
    delta: int
    pairs: list[tuple[float, float]] = field(default_factory=list)
    converged: bool = False
    stalled: bool = False

    @property
    def iterations(self) -> int:
        return len(self.pairs) - 1

    @property
    def ratios(self) -> list[float]:
        return [b / a for a, b in self.pairs]

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "delta": self.delta,
            "a": [a for a, _ in self.pairs],
            "b": [b for _, b in self.pairs],
            "ratio": self.ratios,
            "iterations": self.iterations,
            "converged": self.converged,
            "stalled": self.stalled,
        }


def bootstrap_f(r, s, alpha: float, delta: int):
    """2 r^a / (r^a + (delta - 1) s^a); works elementwise on arrays."""
    if delta < 2:
        raise ValueError(f"bootstrap function needs delta >= 2, got {delta}")
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(r <= 0) or np.any(s <= 0):
        raise ValueError("bootstrap function needs positive arguments")
    ra = r**alpha
    out = 2.0 * ra / (ra + (delta - 1) * s**alpha)
    return float(out) if out.ndim == 0 else out


def auto_bracket(alpha: float) -> tuple[float, float]:
    """Starting bracket (2^{-alpha/(1-alpha)}, 2) used for the line graph."""
    if not 0 <= alpha < 1:
        raise ValueError(f"auto bracket needs 0 <= alpha < 1, got {alpha}")
    return 2.0 ** (-alpha / (1.0 - alpha)), 2.0


def bootstrap_sequence(
    alpha: float, delta: int, a1: float, b1: float, max_iter: int = 1000, tol: float = 1e-8
) -> BoundSequence:
    """Iterate a <- max(a, f(a, b)), b <- min(b, f(b, a)) from (a1, b1).

    Stops when b - a <= tol, when a step changes neither bound, or after
    max_iter steps.
    """
    target = 2.0 / delta
    if not (0 < a1 <= target <= b1):
        raise ValueError(f"need 0 < a1 <= 2/delta <= b1, got a1={a1}, b1={b1}, delta={delta}")
    seq = BoundSequence(alpha=alpha, delta=delta, pairs=[(float(a1), float(b1))])
    a, b = float(a1), float(b1)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        a_next = max(a, bootstrap_f(a, b, alpha, delta))
        b_next = min(b, bootstrap_f(b, a, alpha, delta))
        if a_next == a and b_next == b:
            seq.stalled = True
            break
        a, b = a_next, b_next
        seq.pairs.append((a, b))
    seq.converged = b - a <= tol
    return seq


def improvement_check(a: float, b: float, alpha: float, delta: int) -> bool:
    """True iff f(a, b) > a or f(b, a) < b (strict, beyond GUARD)."""
    if not (0 < a < 2.0 / delta < b < 2):
        raise ValueError(f"need 0 < a < 2/delta < b < 2, got a={a}, b={b}, delta={delta}")
    return bool(
        bootstrap_f(a, b, alpha, delta) - a > GUARD or b - bootstrap_f(b, a, alpha, delta) > GUARD
    )


def lower_threshold_check(a: float, alpha: float, delta: int) -> bool:
    """True iff f(a, 2) > a (strict, beyond GUARD)."""
    if a <= 0:
        raise ValueError(f"need a > 0, got {a}")
    return bool(bootstrap_f(a, 2.0, alpha, delta) - a > GUARD)


def _open_grid(lo: float, hi: float, step: float) -> np.ndarray:
    # multiples of step strictly inside (lo, hi), built from integers to avoid drift
    k_lo = int(np.floor(lo / step + 1e-9)) + 1
    k_hi = int(np.ceil(hi / step - 1e-9)) - 1
    pts = np.arange(k_lo, k_hi + 1) * step
    pts = np.round(pts, 12)
    return pts[(pts > lo) & (pts < hi)]


def improvement_grid(alpha: float, delta: int, step: float = 0.01, max_witnesses: int = 20) -> dict:
    """Run improvement_check over a in (0, 2/delta), b in (2/delta, 2) on a step grid."""
    target = 2.0 / delta
    a_grid = _open_grid(0.0, target, step)
    b_grid = _open_grid(target, 2.0, step)
    A, B = np.meshgrid(a_grid, b_grid, indexing="ij")
    ok = (bootstrap_f(A, B, alpha, delta) - A > GUARD) | (B - bootstrap_f(B, A, alpha, delta) > GUARD)
    bad = np.argwhere(~ok)
    return {
        "alpha": alpha,
        "delta": delta,
        "step": step,
        "n_points": int(ok.size),
        "n_pass": int(ok.sum()),
        "all_pass": bool(ok.all()),
        "witnesses": [[float(a_grid[i]), float(b_grid[j])] for i, j in bad[:max_witnesses]],
    }


def lower_threshold_grid(alpha: float, delta: int, step: float = 0.001) -> dict:
    """Run lower_threshold_check for a on a grid in (0, 2 delta^{-1/(1-alpha)})."""
    threshold = 2.0 * delta ** (-1.0 / (1.0 - alpha))
    a_grid = _open_grid(0.0, threshold, step)
    if a_grid.size == 0:
        a_grid = np.array([threshold / 2])
    ok = bootstrap_f(a_grid, np.full_like(a_grid, 2.0), alpha, delta) - a_grid > GUARD
    return {
        "alpha": alpha,
        "delta": delta,
        "threshold": threshold,
        "n_points": int(ok.size),
        "n_pass": int(ok.sum()),
        "all_pass": bool(ok.all()),
        "witnesses": [float(a) for a in a_grid[~ok][:20]],
    }


def alpha_max_pass(delta: int, alphas, step: float = 0.01) -> dict:
    """Largest alpha in ``alphas`` whose full (a, b) grid passes improvement_check."""
    results = [improvement_grid(float(al), delta, step) for al in sorted(alphas)]
    passing = [r["alpha"] for r in results if r["all_pass"]]
    return {
        "delta": delta,
        "alpha_max_pass": max(passing) if passing else None,
        "results": results,
    }


def a_kl(k: int, l: int, alpha: float, delta: int) -> float:
    """delta^{-1/(1-alpha)} * 2^{k(l-1) - k * sum_{2<=i<=l} alpha^i}."""
    if k < 1 or l < 1:
        raise ValueError(f"need k, l >= 1, got k={k}, l={l}")
    tail = sum(alpha**i for i in range(2, l + 1))
    return delta ** (-1.0 / (1.0 - alpha)) * 2.0 ** (k * (l - 1) - k * tail)


def estimate_limits(series: SnapshotSeries, window_fraction: float = 0.5) -> LimitEstimate:
    """Per-edge min/max of X_t over snapshots with t in [window_fraction * t_end, t_end]."""
    if not 0 < window_fraction < 1:
        raise ValueError(f"window_fraction must be in (0, 1), got {window_fraction}")
    if len(series) == 0:
        raise ValueError("empty snapshot series")
    t_end = series.times[-1]
    t_lo = window_fraction * t_end
    mask = series.times >= t_lo
    if mask.sum() < 2:
        raise ValueError(
            f"window [{t_lo:g}, {t_end:g}] holds {int(mask.sum())} snapshot(s); need at least 2"
        )
    xs = series.x[mask]
    return LimitEstimate(xs.min(axis=0), xs.max(axis=0), (float(series.times[mask][0]), float(t_end)))


def _edge_ratio_min(g: Graph, ratio: np.ndarray) -> np.ndarray:
    # min of ratio over edge_neighborhood(e), for every e at once
    vmin = np.full(g.vertex_count, np.inf)
    u, v = g.endpoints
    np.minimum.at(vmin, u, ratio)
    np.minimum.at(vmin, v, ratio)
    return np.minimum(vmin[u], vmin[v])


def classify_stability(est: LimitEstimate, mu, g: Graph, delta_threshold: float = 0.5) -> set[int]:
    """Edges whose neighbourhood has some x_minus/mu below ``delta_threshold``."""
    mu = np.asarray(getattr(mu, "mu", mu), dtype=float)
    if delta_threshold <= 0:
        raise ValueError("delta_threshold must be positive")
    if len(est.x_minus) != g.edge_count or len(mu) != g.edge_count:
        raise ValueError(
            f"estimate ({len(est.x_minus)}) and mu ({len(mu)}) must cover all {g.edge_count} edges"
        )
    worst = _edge_ratio_min(g, est.x_minus / mu)
    return {int(e) for e in np.flatnonzero(worst < delta_threshold)}


class UnionFind:
    def __init__(self, size: int):
        self.parent = list(range(size))
        self.rank = [0] * size

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1


def unstable_components(g: Graph, unstable) -> list[int]:
    """Sizes (in edges, descending) of the components formed by ``unstable``;
    two edges are joined when they share a vertex."""
    edges = sorted(set(int(e) for e in unstable))
    if not edges:
        return []
    index = {e: i for i, e in enumerate(edges)}
    uf = UnionFind(len(edges))
    first_at: dict[int, int] = {}
    for e in edges:
        for v in g.edges[e]:
            if v in first_at:
                uf.union(index[e], index[first_at[v]])
            else:
                first_at[v] = e
    sizes: dict[int, int] = {}
    for i in range(len(edges)):
        r = uf.find(i)
        sizes[r] = sizes.get(r, 0) + 1
    return sorted(sizes.values(), reverse=True)


def convergence_report(series: SnapshotSeries, mu) -> np.ndarray:
    """D(t_j) = max_e |x(e)/mu(e) - 1| for every snapshot."""
    mu = np.asarray(getattr(mu, "mu", mu), dtype=float)
    if mu.shape != (series.n_edges,):
        raise ValueError(f"mu covers {mu.size} edges, series has {series.n_edges}")
    if np.any(mu == 0):
        raise ValueError("mu has a zero entry")
    if len(series) == 0:
        return np.zeros(0)
    return np.abs(series.x / mu - 1.0).max(axis=1)
