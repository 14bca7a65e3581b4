"""
Brute-force solve of the unrelaxed problem on the joint queue chain

Exactly one relay is active per slot, the state is the tuple of all queue
lengths. Only small instances fit; this exists to measure how far an index
policy is from optimal.
"""

import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import ConvergenceError, DomainError, StateSpaceTooLargeError
from .model import RelayParams
from .solver import kernel_for

logger = logging.getLogger(__name__)

MAX_JOINT_STATES = 25_000


def _dense(bands) -> np.ndarray:
    down, stay, up = bands
    return np.diag(stay) + np.diag(down[1:], -1) + np.diag(up[:-1], 1)


def _apply_along(matrix: np.ndarray, values: np.ndarray, axis: int) -> np.ndarray:
    out = np.tensordot(matrix, values, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def solve_joint_optimal(
    relays: Sequence[RelayParams],
    tol: float = 1e-9,
    max_iter: int = 1_000_000,
    max_states: int = MAX_JOINT_STATES,
) -> Tuple[float, Dict[Tuple[int, ...], int]]:
    """
    Optimal average cost and a stationary optimal policy of the joint problem

    Returns (sigma_star, policy) where policy maps each tuple of queue lengths
    to the index of the relay that receives the packet. Ties go to the lowest
    relay index.
    """
    relays = list(relays)
    if not relays:
        raise DomainError("At least one relay is required")
    if tol <= 0:
        raise DomainError(f"tol must be positive, got {tol}")

    shape = tuple(r.K + 1 for r in relays)
    n_states = int(np.prod(shape))
    if n_states > max_states:
        raise StateSpaceTooLargeError(
            f"Joint chain has {n_states} states, more than the limit of {max_states}"
        )

    kernels = [kernel_for(r) for r in relays]
    active: List[np.ndarray] = [_dense(k.active) for k in kernels]
    passive: List[np.ndarray] = [_dense(k.passive) for k in kernels]

    cost = np.zeros(shape)
    for axis, kernel in enumerate(kernels):
        index = [None] * len(relays)
        index[axis] = slice(None)
        cost = cost + kernel.cost[tuple(index)]

    M = len(relays)
    origin = (0,) * M
    V = np.zeros(shape)
    span = np.inf
    for iteration in range(1, max_iter + 1):
        Q = np.empty((M,) + shape)
        for chosen in range(M):
            expected = V
            for axis in range(M):
                matrix = active[axis] if axis == chosen else passive[axis]
                expected = _apply_along(matrix, expected, axis)
            Q[chosen] = cost + expected
        TV = Q.min(axis=0)
        diff = TV - V
        span = float(diff.max() - diff.min())
        V = TV - TV[origin]
        if span < tol:
            sigma = float(TV[origin])
            choice = Q.argmin(axis=0)
            policy = {state: int(choice[state]) for state in np.ndindex(*shape)}
            logger.info(
                "Joint optimum over %d states: sigma*=%.6f after %d iterations", n_states, sigma, iteration
            )
            return sigma, policy

    raise ConvergenceError(
        f"Joint value iteration did not converge in {max_iter} iterations (span {span:.3e})",
        last_value=float(V.max()),
        residual=span,
        iterations=max_iter,
    )
