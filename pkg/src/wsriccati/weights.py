"""Policy-dependent weight functions and the weighted expectation.

Three families are supported. With J denoting the predictive per-step cost
of a parameter draw under the candidate policy (gain L, quadratic value
matrix P, reference second moment S):

    J(A, B) = trace(((A - B L)^T P (A - B L) + Q + L^T R L) S)

the un-normalized weights are

    RN    1
    RSL   exp(theta * J)
    RRSL  1 + theta / (1 + exp(-alpha * J + beta * mean(J)))

where mean(J) is the unweighted bank average. Weights are then normalized
by their empirical mean so the weighted expectation of 1 is exactly 1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .ensemble import SampleBank, _evaluate
from .errors import NonFiniteError, NumericalError, WeightOverflowError
from .matops import symmetrize

__all__ = [
    "FAMILY_RN",
    "FAMILY_RSL",
    "FAMILY_RRSL",
    "RSL_MAX_EXPONENT",
    "WeightSpec",
    "WeightedBank",
    "predictive_cost",
    "predictive_costs",
    "raw_weight",
    "normalize_weights",
    "weight_vector",
    "build_weighted_bank",
    "weighted_expect",
    "save_weight_csv",
]

FAMILY_RN = "RN"
FAMILY_RSL = "RSL"
FAMILY_RRSL = "RRSL"
_FAMILIES = (FAMILY_RN, FAMILY_RSL, FAMILY_RRSL)

#: Exponents beyond this raise instead of silently saturating.
RSL_MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class WeightSpec:
    """Weight family selection with its parameters.

    ``sigma`` is the second moment of the reference state; ``None`` means
    the identity. The RN family ignores ``theta`` entirely.
    """

    family: str
    theta: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    sigma: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown weight family {self.family!r}")
        if not np.isfinite(self.theta):
            raise ValueError("theta must be finite")
        if self.sigma is not None:
            sigma = symmetrize(self.sigma, "sigma")
            if np.linalg.eigvalsh(sigma).min() < -1e-12:
                raise ValueError("sigma must be positive semidefinite")
            sigma.setflags(write=False)
            object.__setattr__(self, "sigma", sigma)

    def resolved_sigma(self, n: int) -> np.ndarray:
        if self.sigma is None:
            return np.eye(n)
        if self.sigma.shape != (n, n):
            raise ValueError(
                f"sigma has shape {self.sigma.shape}, expected {(n, n)}"
            )
        return self.sigma


def predictive_cost(a, b, gain, value, sigma, q, r) -> float:
    """Expected one-step cost-plus-value of the transition under one draw."""
    a, b, gain, value, sigma, q, r = (
        np.asarray(x, dtype=float) for x in (a, b, gain, value, sigma, q, r)
    )
    closed = a - b @ gain
    inner = closed.T @ value @ closed + q + gain.T @ r @ gain
    return float(np.trace(inner @ sigma))


def predictive_costs(
    a: np.ndarray, b: np.ndarray, gain, value, sigma, q, r
) -> np.ndarray:
    """Vectorized :func:`predictive_cost` over stacked sample arrays."""
    closed = a - np.matmul(b, gain)
    pm = np.matmul(value, closed)
    quad = np.matmul(closed.transpose(0, 2, 1), pm)
    base = float(np.trace((q + gain.T @ r @ gain) @ sigma))
    return np.einsum("sij,ji->s", quad, sigma) + base


def _raw_from_costs(
    spec: WeightSpec,
    theta: float,
    costs: np.ndarray,
    mean_predictive: float | None,
) -> np.ndarray:
    if spec.family == FAMILY_RN:
        return np.ones_like(costs)
    if spec.family == FAMILY_RSL:
        exponents = theta * costs
        worst = float(np.max(exponents)) if exponents.size else 0.0
        if worst > RSL_MAX_EXPONENT:
            raise WeightOverflowError(
                f"RSL weight overflow: theta * J reaches {worst:.6g}, "
                f"beyond exp({RSL_MAX_EXPONENT:.0f})"
            )
        return np.exp(exponents)
    if mean_predictive is None:
        raise ValueError("RRSL weights need the bank mean of the predictive cost")
    return 1.0 + theta * expit(spec.alpha * costs - spec.beta * mean_predictive)


def raw_weight(
    spec: WeightSpec,
    a,
    b,
    theta: float,
    gain,
    value,
    q,
    r,
    mean_predictive: float | None = None,
) -> float:
    """Un-normalized weight of a single draw at the given policy."""
    sigma = spec.resolved_sigma(np.asarray(a).shape[0])
    cost = predictive_cost(a, b, gain, value, sigma, q, r)
    out = _raw_from_costs(spec, theta, np.asarray([cost]), mean_predictive)
    return float(out[0])


def normalize_weights(raw: np.ndarray) -> np.ndarray:
    """Divide by the empirical mean so the normalized weights average to 1."""
    raw = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(raw)):
        idx = int(np.argmax(~np.isfinite(raw)))
        raise NonFiniteError(f"raw weight non-finite at sample {idx}")
    if np.any(raw < 0.0):
        idx = int(np.argmax(raw < 0.0))
        raise NumericalError(f"raw weight negative at sample {idx}")
    mean = raw.mean()
    if mean <= 0.0:
        raise NumericalError("all raw weights are zero; normalization impossible")
    return raw / mean


def weight_vector(
    bank: SampleBank, spec: WeightSpec, theta: float, gain, value, q, r
) -> np.ndarray:
    """Normalized weights on the bank at policy (theta, gain, value).

    RN and theta = 0 short-circuit to exact ones, matching the defining
    property that zero sensitivity reproduces the unweighted expectation.
    """
    if spec.family == FAMILY_RN or theta == 0.0:
        return np.ones(bank.size)
    sigma = spec.resolved_sigma(bank.n)
    costs = predictive_costs(bank.a, bank.b, gain, value, sigma, q, r)
    mean_predictive = float(costs.mean()) if spec.family == FAMILY_RRSL else None
    return normalize_weights(_raw_from_costs(spec, theta, costs, mean_predictive))


@dataclass(frozen=True)
class WeightedBank:
    """A sample bank with normalized weights frozen at one policy."""

    bank: SampleBank
    weights: np.ndarray
    raw_weights: np.ndarray
    predictive: np.ndarray
    spec: WeightSpec
    theta: float
    gain: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.bank.size,):
            raise ValueError("weight count does not match the bank size")
        if np.any(w < 0.0):
            raise NumericalError("normalized weights must be nonnegative")
        if abs(w.mean() - 1.0) > 1e-12:
            raise NumericalError(
                f"weight normalization off by {abs(w.mean() - 1.0):.3e}"
            )
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.bank.size


def build_weighted_bank(
    bank: SampleBank, spec: WeightSpec, theta: float, gain, value, q, r
) -> WeightedBank:
    """Evaluate and normalize the weights of every sample in the bank."""
    gain = np.asarray(gain, dtype=float)
    value = symmetrize(value, "value matrix")
    sigma = spec.resolved_sigma(bank.n)
    costs = predictive_costs(bank.a, bank.b, gain, value, sigma, q, r)
    if not np.all(np.isfinite(costs)):
        idx = int(np.argmax(~np.isfinite(costs)))
        raise NonFiniteError(f"predictive cost non-finite at sample {idx}")
    mean_predictive = float(costs.mean()) if spec.family == FAMILY_RRSL else None
    raw = _raw_from_costs(spec, theta, costs, mean_predictive)
    weights = normalize_weights(raw)
    return WeightedBank(
        bank=bank,
        weights=weights,
        raw_weights=raw,
        predictive=costs,
        spec=spec,
        theta=theta,
        gain=gain,
        value=value,
    )


def weighted_expect(
    wbank: WeightedBank, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
) -> np.ndarray:
    """Weighted empirical mean (1/N) sum_i w_i fn(A_i, B_i)."""
    values = _evaluate(wbank.bank, fn)
    shape = (wbank.size,) + (1,) * (values.ndim - 1)
    return (values * wbank.weights.reshape(shape)).mean(axis=0)


def save_weight_csv(wbank: WeightedBank, path) -> None:
    """Per-sample table of predictive cost, raw weight, normalized weight."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample", "predictive_cost", "raw_weight", "weight"])
        for idx in range(wbank.size):
            writer.writerow(
                [
                    idx,
                    repr(float(wbank.predictive[idx])),
                    repr(float(wbank.raw_weights[idx])),
                    repr(float(wbank.weights[idx])),
                ]
            )
