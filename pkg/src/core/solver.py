"""
Average-cost value functions for a single relay under a tax on passivity

For a tax lam and a threshold t (active in states <= t, passive above) the
value function V and gain sigma solve

    V(y) = C*y       - sigma + E_active[V(X') | y],   y active
    V(y) = C*y + lam - sigma + E_passive[V(X') | y],  y passive
    V(0) = 0

The full buffer y = K is the one exception to the threshold shape. There the
active action only lets an arrival replace a departing packet, so it is
nearly free and the optimal action at K does not follow the threshold. Every
policy here therefore carries a separate cap action next to its threshold.

Every row couples V(y) to its two neighbours only, plus the single sigma
column. The bordered system (tridiagonal block, sigma column, V(0) = 0 row)
is factored as one sparse matrix with pivoting, so sigma never has to be
recombined from separate solutions.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .errors import ConvergenceError, DomainError, SolverError
from .model import RelayParams, expected_next, kernel_bands

logger = logging.getLogger(__name__)

Bands = Tuple[np.ndarray, np.ndarray, np.ndarray]

MONOTONE_TOLERANCE = 1e-9
CAP_TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class RelayKernel:
    """Both action kernels of a relay as bands, plus per-state holding cost"""

    params: RelayParams
    active: Bands
    passive: Bands
    cost: np.ndarray


@lru_cache(maxsize=256)
def kernel_for(p: RelayParams) -> RelayKernel:
    active = kernel_bands(p, active=True)
    passive = kernel_bands(p, active=False)
    for band in (*active, *passive):
        band.setflags(write=False)
    cost = p.C * np.arange(p.K + 1, dtype=float)
    cost.setflags(write=False)
    return RelayKernel(p, active, passive, cost)


@dataclass(frozen=True, eq=False)
class ValueSolution:
    V: np.ndarray
    sigma: float
    lam: float
    threshold: int
    monotone: bool = True
    cap_active: bool = False


@dataclass(frozen=True)
class DpeResidual:
    max_abs_residual: float
    argmax_state: int


def active_mask(K: int, threshold: int, cap_active: Optional[bool] = None) -> np.ndarray:
    """
    Which states are active: 0..threshold, and K when cap_active says so

    cap_active=None means the plain threshold reading (K active only when
    threshold == K).
    """
    mask = np.arange(K + 1) <= threshold
    if cap_active is not None:
        mask[K] = cap_active
    return mask


def threshold_bands(kernel: RelayKernel, threshold: int, cap_active: Optional[bool] = None) -> Bands:
    """Kernel of the policy active on [0, threshold] (and at K per cap_active), passive elsewhere"""
    is_active = active_mask(kernel.params.K, threshold, cap_active)
    return tuple(np.where(is_active, a, p) for a, p in zip(kernel.active, kernel.passive))


def _check_threshold(p: RelayParams, threshold: int) -> None:
    if not -1 <= threshold <= p.K:
        raise DomainError(f"Threshold {threshold} outside [-1, {p.K}]")


def solve_bands(bands: Bands, rhs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solves the pinned system for one or more right-hand sides

    rhs has shape (K+1,) or (K+1, m) and holds the per-state constant term.
    Returns (V, sigma) with matching trailing shape.
    """
    down, stay, up = bands
    n = len(stay)
    rhs = np.asarray(rhs, dtype=float)
    squeeze = rhs.ndim == 1
    if squeeze:
        rhs = rhs[:, None]

    # unknowns: V(0..K), then sigma; the last row pins V(0) = 0
    block = scipy.sparse.diags([-down[1:], 1.0 - stay, -up[:-1]], [-1, 0, 1], shape=(n, n))
    sigma_column = scipy.sparse.csc_matrix(np.ones((n, 1)))
    pin_row = scipy.sparse.csc_matrix(([1.0], ([0], [0])), shape=(1, n))
    A = scipy.sparse.bmat([[block, sigma_column], [pin_row, None]], format="csc")
    b = np.vstack([rhs, np.zeros((1, rhs.shape[1]))])

    try:
        z = scipy.sparse.linalg.splu(A).solve(np.ascontiguousarray(b))
    except RuntimeError as e:
        raise SolverError(f"Threshold system is singular: {e}") from e
    if not np.all(np.isfinite(z)):
        raise SolverError("Threshold system produced non-finite values")

    V, sigma = z[:n], z[n]
    V[0] = 0.0
    if squeeze:
        return V[:, 0], sigma[0]
    return V, sigma


def solve_threshold_system(
    p: RelayParams, lam: float, threshold: int, cap_active: Optional[bool] = None
) -> ValueSolution:
    """Value function and gain of the threshold policy at tax lam"""
    _check_threshold(p, threshold)
    kernel = kernel_for(p)
    is_active = active_mask(p.K, threshold, cap_active)
    bands = threshold_bands(kernel, threshold, cap_active)
    V, sigma = solve_bands(bands, kernel.cost + lam * ~is_active)

    monotone = bool(np.all(np.diff(V) >= -MONOTONE_TOLERANCE))
    if not monotone:
        worst = int(np.argmin(np.diff(V)))
        logger.debug(
            "Value function not monotone for %s at lam=%g, threshold=%d (drop at state %d)",
            p, lam, threshold, worst,
        )
    return ValueSolution(
        V=V, sigma=float(sigma), lam=float(lam), threshold=threshold,
        monotone=monotone, cap_active=bool(is_active[-1]),
    )


def solve_optimal_cap(p: RelayParams, lam: float, threshold: int) -> ValueSolution:
    """
    Threshold policy at tax lam with the cap action that the optimality
    equation prefers at K; ties go to the passive action
    """
    if threshold >= p.K:
        return solve_threshold_system(p, lam, threshold)
    sol = solve_threshold_system(p, lam, threshold, cap_active=False)
    active, passive = branch_values(p, sol.V, lam)
    if active[-1] < passive[-1] - CAP_TIE_TOLERANCE * max(1.0, abs(passive[-1])):
        return solve_threshold_system(p, lam, threshold, cap_active=True)
    return sol


def system_residuals(p: RelayParams, sol: ValueSolution) -> np.ndarray:
    """Per-state residual of the defining linear equations, plus V(0) = 0"""
    kernel = kernel_for(p)
    bands = threshold_bands(kernel, sol.threshold, sol.cap_active)
    passive = ~active_mask(p.K, sol.threshold, sol.cap_active)
    rhs = kernel.cost + sol.lam * passive - sol.sigma + expected_next(bands, sol.V)
    residuals = sol.V - rhs
    residuals = np.append(residuals, sol.V[0])
    return residuals


def branch_values(p: RelayParams, V: np.ndarray, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """The two arguments of the minimisation in the optimality equation, per state"""
    kernel = kernel_for(p)
    return expected_next(kernel.active, V), lam + expected_next(kernel.passive, V)


def dpe_residual(p: RelayParams, sol: ValueSolution) -> DpeResidual:
    """How far a solution is from satisfying the average-cost optimality equation"""
    kernel = kernel_for(p)
    active, passive = branch_values(p, sol.V, sol.lam)
    rhs = kernel.cost - sol.sigma + np.minimum(active, passive)
    residual = np.abs(sol.V - rhs)
    state = int(np.argmax(residual))
    return DpeResidual(max_abs_residual=float(residual[state]), argmax_state=state)


def greedy_structure(active: np.ndarray, passive: np.ndarray) -> Tuple[int, bool]:
    """
    (threshold, cap_active) of the greedy policy; ties go to the passive action

    Below the full buffer the greedy policy of an indexable relay is active on
    a prefix of states. If it is not, the prefix is used and the gap is logged.
    """
    is_active = active < passive
    cap_active = bool(is_active[-1])
    below_cap = is_active[:-1]
    if below_cap.all():
        return (len(is_active) - 1 if cap_active else len(below_cap) - 1), cap_active
    first_passive = int(np.argmin(below_cap))
    if below_cap[first_passive:].any():
        logger.warning(
            "Greedy policy is not a threshold policy (active again above state %d)", first_passive
        )
    return first_passive - 1, cap_active


def relative_value_iteration(
    p: RelayParams,
    lam: float,
    tol: float = 1e-10,
    max_iter: int = 1_000_000,
) -> ValueSolution:
    """
    Solves the optimality equation at tax lam by relative value iteration

    Stops when the span of successive differences drops below tol.
    """
    if tol <= 0:
        raise DomainError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise DomainError(f"max_iter must be >= 1, got {max_iter}")

    kernel = kernel_for(p)
    V = np.zeros(p.K + 1)
    span = np.inf
    for iteration in range(1, max_iter + 1):
        active, passive = branch_values(p, V, lam)
        TV = kernel.cost + np.minimum(active, passive)
        diff = TV - V
        span = float(diff.max() - diff.min())
        V = TV - TV[0]
        if span < tol:
            sigma = float(TV[0])
            active, passive = branch_values(p, V, lam)
            threshold, cap_active = greedy_structure(active, passive)
            logger.debug("RVI converged in %d iterations (span %.3e)", iteration, span)
            monotone = bool(np.all(np.diff(V) >= -MONOTONE_TOLERANCE))
            return ValueSolution(
                V=V, sigma=sigma, lam=float(lam), threshold=threshold,
                monotone=monotone, cap_active=cap_active,
            )

    raise ConvergenceError(
        f"Relative value iteration did not converge in {max_iter} iterations (span {span:.3e})",
        last_value=float(V[-1]),
        residual=span,
        iterations=max_iter,
    )


def stationary_distribution(p: RelayParams, threshold: int, cap_active: Optional[bool] = None) -> np.ndarray:
    """Stationary law of the threshold chain, from birth-death balance"""
    _check_threshold(p, threshold)
    down, _, up = threshold_bands(kernel_for(p), threshold, cap_active)
    # pi(y+1) * down[y+1] = pi(y) * up[y]
    ratios = up[:-1] / down[1:]
    weights = np.concatenate([[1.0], np.cumprod(ratios)])
    return weights / weights.sum()
