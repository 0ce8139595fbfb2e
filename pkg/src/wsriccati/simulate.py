"""Closed-loop Monte-Carlo simulation and design-robustness studies.

Unlike the solver, which evaluates expectations on one fixed bank,
simulation draws fresh matrices at every step so trajectories follow the
true i.i.d. process. Trial k derives its generator from
(seed, spawn_key=(k,)), so any single trial can be reproduced standalone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import ParameterDistribution, derive_seed, draw_bank, stream_rng
from .errors import ConfigurationError, NumericalError
from .matops import symmetrize
from .riccati import DesignProblem, solve
from .weights import WeightSpec

__all__ = [
    "OVERFLOW_LIMIT",
    "RolloutResult",
    "SimulationSummary",
    "RobustnessSummary",
    "rollout",
    "worst_percent_averages",
    "mc_cost_study",
    "robustness_study",
]

#: State norms beyond this mark the trial as diverged (infinite cost).
OVERFLOW_LIMIT = 1e12

_BLOCK = 2048


@dataclass(frozen=True)
class RolloutResult:
    """One closed-loop trajectory with its accumulated quadratic cost."""

    states: np.ndarray
    cost: float
    diverged_at: int | None = None


@dataclass(frozen=True)
class SimulationSummary:
    """Per-trial costs plus tail statistics over the worst outcomes."""

    trials: int
    horizon: int
    costs: np.ndarray
    mean_cost: float
    tail_averages: tuple[tuple[float, float], ...]
    diverged: int
    trajectories: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        costs = np.asarray(self.costs, dtype=float)
        if np.any(costs < 0.0):
            raise NumericalError("per-trial costs must be nonnegative")
        averages = [avg for _, avg in self.tail_averages]
        for prev, nxt in zip(averages, averages[1:]):
            if nxt > prev + 1e-9 * max(1.0, abs(prev)):
                raise NumericalError(
                    "tail averages must be nonincreasing in the tail fraction"
                )
        costs.setflags(write=False)
        object.__setattr__(self, "costs", costs)


@dataclass(frozen=True)
class RobustnessSummary:
    """Dispersion of repeatedly designed gains across bank seeds."""

    repetitions: int
    gains: np.ndarray
    gain_mean: np.ndarray
    gain_stddev: np.ndarray
    failures: tuple[tuple[int, str], ...] = ()


def _run_trials(
    dist: ParameterDistribution,
    gain: np.ndarray,
    q: np.ndarray,
    r: np.ndarray,
    x0: np.ndarray,
    horizon: int,
    rngs,
    record_states: bool = False,
):
    """Simulate one batch of trials, one fresh draw per trial and step.

    All trials in the batch advance together; each trial's draws come from
    its own generator so results match a standalone single-trial run.
    """
    count = len(rngs)
    n, m = dist.n, dist.m
    lam = np.empty((count, horizon, dist.dim))
    for k, rng in enumerate(rngs):
        lam[k] = dist.draw(rng, horizon)
    a_seq = lam[:, :, : n * n].reshape(count, horizon, n, n, order="F")
    b_seq = lam[:, :, n * n :].reshape(count, horizon, n, m, order="F")
    closed_seq = a_seq - np.einsum("ktij,jl->ktil", b_seq, gain)

    weight_mat = q + gain.T @ r @ gain
    x = np.tile(np.asarray(x0, dtype=float).reshape(1, n), (count, 1))
    cost = np.zeros(count)
    diverged_at = np.full(count, -1, dtype=int)
    states = np.empty((count, horizon + 1, n)) if record_states else None
    if record_states:
        states[:, 0, :] = x

    for t in range(horizon):
        cost = cost + np.einsum("ki,ij,kj->k", x, weight_mat, x)
        x = np.einsum("kij,kj->ki", closed_seq[:, t], x)
        bad = ~np.all(np.isfinite(x), axis=1) | (
            np.linalg.norm(x, axis=1) > OVERFLOW_LIMIT
        )
        newly = bad & (diverged_at < 0)
        if np.any(newly):
            diverged_at[newly] = t + 1
            cost[newly] = np.inf
        x[bad] = 0.0
        if record_states:
            states[:, t + 1, :] = x
    final = np.einsum("ki,ij,kj->k", x, weight_mat, x)
    alive = diverged_at < 0
    cost[alive] = cost[alive] + final[alive]
    return cost, diverged_at, states


def rollout(
    dist: ParameterDistribution,
    gain,
    q,
    r,
    x0,
    horizon: int,
    seed,
) -> RolloutResult:
    """Single closed-loop trajectory under u_t = -L x_t.

    ``seed`` may be an integer or a ready generator. The cost sums
    x_t' Q x_t + u_t' R u_t for t = 0..horizon inclusive; if the state norm
    exceeds ``OVERFLOW_LIMIT`` the trial is reported as diverged with
    infinite cost and the trajectory is truncated at that step.
    """
    if horizon < 0:
        raise ConfigurationError("horizon must be >= 0")
    gain = np.asarray(gain, dtype=float)
    q = symmetrize(q, "Q")
    r = symmetrize(r, "R")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cost, diverged_at, states = _run_trials(
        dist, gain, q, r, x0, horizon, [rng], record_states=True
    )
    stop = int(diverged_at[0])
    if stop < 0:
        return RolloutResult(states=states[0], cost=float(cost[0]), diverged_at=None)
    return RolloutResult(
        states=states[0, : stop + 1], cost=float(cost[0]), diverged_at=stop
    )


def worst_percent_averages(costs, rho_list) -> list[tuple[float, float]]:
    """Mean of the ceil(rho * N / 100) largest costs for each rho."""
    costs = np.asarray(costs, dtype=float)
    trials = costs.size
    if trials < 1:
        raise ConfigurationError("need at least one cost")
    ranked = np.sort(costs)[::-1]
    prefix = np.cumsum(ranked)
    out = []
    for rho in rho_list:
        rho = float(rho)
        if not 0.0 < rho <= 100.0:
            raise ConfigurationError(f"tail fraction {rho} outside (0, 100]")
        k = int(np.ceil(rho * trials / 100.0))
        out.append((rho, float(prefix[k - 1] / k)))
    return out


def mc_cost_study(
    dist: ParameterDistribution,
    gain,
    q,
    r,
    x0,
    horizon: int,
    trials: int,
    rho_list,
    seed: int,
    trajectory_count: int = 0,
) -> SimulationSummary:
    """Independent rollouts with tail statistics over the worst outcomes."""
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    gain = np.asarray(gain, dtype=float)
    q = symmetrize(q, "Q")
    r = symmetrize(r, "R")
    costs = np.empty(trials)
    diverged = 0
    for start in range(0, trials, _BLOCK):
        stop = min(start + _BLOCK, trials)
        rngs = [stream_rng(seed, k) for k in range(start, stop)]
        block_costs, block_div, _ = _run_trials(
            dist, gain, q, r, x0, horizon, rngs
        )
        costs[start:stop] = block_costs
        diverged += int(np.sum(block_div >= 0))

    trajectories: tuple[np.ndarray, ...] = ()
    if trajectory_count > 0:
        keep = min(trajectory_count, trials)
        rngs = [stream_rng(seed, k) for k in range(keep)]
        _, _, states = _run_trials(
            dist, gain, q, r, x0, horizon, rngs, record_states=True
        )
        trajectories = tuple(states[k] for k in range(keep))

    tail = tuple(worst_percent_averages(costs, rho_list))
    return SimulationSummary(
        trials=trials,
        horizon=horizon,
        costs=costs,
        mean_cost=float(costs.mean()),
        tail_averages=tail,
        diverged=diverged,
        trajectories=trajectories,
    )


def robustness_study(
    dist: ParameterDistribution,
    q,
    r,
    weight_spec: WeightSpec,
    repetitions: int,
    bank_size: int,
    base_seed: int,
    method: str = "fixed-point",
    solver_options: dict | None = None,
) -> RobustnessSummary:
    """Redesign the gain across freshly seeded banks and report dispersion.

    Bank k uses the integer sub-seed derive_seed(base_seed, k). Designs
    that fail are recorded and excluded from the statistics; at least two
    must succeed for a standard deviation to exist.
    """
    if repetitions < 2:
        raise ConfigurationError("repetitions must be >= 2")
    solver_options = dict(solver_options or {})
    gains = []
    failures: list[tuple[int, str]] = []
    for k in range(repetitions):
        bank = draw_bank(dist, bank_size, derive_seed(base_seed, k))
        problem = DesignProblem(bank=bank, q=q, r=r, weights=weight_spec)
        try:
            solution = solve(problem, method=method, **solver_options)
        except NumericalError as exc:
            failures.append((k, str(exc)))
            continue
        gains.append(solution.gain)
    if len(gains) < 2:
        raise NumericalError(
            f"robustness study needs >= 2 successful designs, got {len(gains)} "
            f"({len(failures)} failures)"
        )
    stacked = np.stack(gains)
    # Shift by the first design before the moments; identical designs then
    # report exactly zero dispersion instead of one-ulp rounding noise.
    shifted = stacked - stacked[0]
    return RobustnessSummary(
        repetitions=repetitions,
        gains=stacked,
        gain_mean=stacked[0] + shifted.mean(axis=0),
        gain_stddev=shifted.std(axis=0, ddof=1),
        failures=tuple(failures),
    )
