"""Equilibria of the urn network as fixed points of the operator T.

    T(mu)(e) = sum over endpoints v of e of mu(e)^alpha / sum_{e' at v} mu(e')^alpha

T maps the box [2 * Delta^{-1/(1-alpha)}, 2]^E into itself. The solver runs a
damped iteration started inside that box; nothing guarantees contraction,
so non-convergence raises with the full history rather than returning a
half-converged vector.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph

__all__ = [
    "EquilibriumVector",
    "ConvergenceError",
    "apply_T",
    "compact_set_bounds",
    "in_compact_set",
    "solve_fixed_point",
    "verify_equilibrium",
    "multistart",
    "MultiStartResult",
]


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, last_iterate: np.ndarray, residual_history: list[float]):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual_history = residual_history


@dataclass
class EquilibriumVector:
    mu: np.ndarray
    residual: float
    iterations: int = 0
    in_compact_set: bool = True

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        if np.any(self.mu <= 0):
            raise ValueError("equilibrium entries must be positive")


def _check_alpha(alpha: float) -> None:
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")


def apply_T(mu, g: Graph, alpha: float) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (g.edge_count,):
        raise ValueError(f"mu has shape {mu.shape}, graph has {g.edge_count} edges")
    if np.any(mu <= 0):
        raise ValueError("apply_T needs strictly positive entries")
    _check_alpha(alpha)
    u, v = g.endpoints
    p = mu**alpha
    vertex_sum = np.bincount(u, weights=p, minlength=g.vertex_count)
    vertex_sum += np.bincount(v, weights=p, minlength=g.vertex_count)
    return p / vertex_sum[u] + p / vertex_sum[v]


def compact_set_bounds(delta: int, alpha: float) -> tuple[float, float]:
    if delta < 1:
        raise ValueError(f"delta must be >= 1, got {delta}")
    _check_alpha(alpha)
    return 2.0 * float(delta) ** (-1.0 / (1.0 - alpha)), 2.0


def in_compact_set(mu, delta: int, alpha: float, rtol: float = 1e-12) -> bool:
    lo, hi = compact_set_bounds(delta, alpha)
    mu = np.asarray(mu, dtype=float)
    return bool(np.all(mu >= lo * (1 - rtol)) and np.all(mu <= hi * (1 + rtol)))


def verify_equilibrium(mu, g: Graph, alpha: float, tol: float) -> tuple[bool, float]:
    """(sup|mu - T(mu)| <= tol, sup|mu - T(mu)|)."""
    mu = np.asarray(getattr(mu, "mu", mu), dtype=float)
    if mu.size == 0:
        return True, 0.0
    residual = float(np.max(np.abs(mu - apply_T(mu, g, alpha))))
    return residual <= tol, residual


def solve_fixed_point(
    g: Graph,
    alpha: float,
    tol: float = 1e-12,
    max_iter: int = 100_000,
    damping: float = 0.5,
    mu0=None,
) -> EquilibriumVector:
    """Damped iteration mu <- (1 - damping) mu + damping T(mu).

    Starts from the midpoint of the invariant box unless ``mu0`` is given and
    stops once the sup-norm step is <= tol. Raises ConvergenceError after
    ``max_iter`` steps.
    """
    _check_alpha(alpha)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0 < damping <= 1:
        raise ValueError(f"damping must lie in (0, 1], got {damping}")
    if g.edge_count == 0:
        return EquilibriumVector(np.zeros(0), 0.0, 0, True)
    lo, hi = compact_set_bounds(g.max_degree, alpha)
    if mu0 is None:
        mu = np.full(g.edge_count, 0.5 * (lo + hi))
    else:
        mu = np.array(mu0, dtype=float)
    history: list[float] = []
    for it in range(1, max_iter + 1):
        t_mu = apply_T(mu, g, alpha)
        history.append(float(np.max(np.abs(t_mu - mu))))
        new = (1.0 - damping) * mu + damping * t_mu
        change = float(np.max(np.abs(new - mu)))
        mu = new
        if change <= tol:
            break
    else:
        raise ConvergenceError(
            f"no convergence in {max_iter} iterations (residual {history[-1]:.3e})", mu, history
        )
    _, residual = verify_equilibrium(mu, g, alpha, tol)
    inside = in_compact_set(mu, g.max_degree, alpha)
    if not inside:
        raise ConvergenceError("fixed point left the invariant box", mu, history)
    return EquilibriumVector(mu, residual, it, inside)


@dataclass
class MultiStartResult:
    primary: EquilibriumVector
    solutions: list[EquilibriumVector] = field(default_factory=list)
    max_pairwise_distance: float = 0.0

    def agree(self, tol: float) -> bool:
        return self.max_pairwise_distance <= tol


def multistart(
    g: Graph,
    alpha: float,
    restarts: int,
    seed: int = 0,
    **solver_kw,
) -> MultiStartResult:
    """Solve from the box midpoint and from ``restarts`` uniform random points
    of the box; report the largest sup-distance between any two fixed points."""
    primary = solve_fixed_point(g, alpha, **solver_kw)
    sols = [primary]
    if g.edge_count:
        rng = np.random.default_rng(seed)
        lo, hi = compact_set_bounds(g.max_degree, alpha)
        for _ in range(restarts):
            start = rng.uniform(lo, hi, size=g.edge_count)
            sols.append(solve_fixed_point(g, alpha, mu0=start, **solver_kw))
    dist = 0.0
    for s1, s2 in itertools.combinations(sols, 2):
        dist = max(dist, float(np.max(np.abs(s1.mu - s2.mu))) if s1.mu.size else 0.0)
    return MultiStartResult(primary, sols, dist)
