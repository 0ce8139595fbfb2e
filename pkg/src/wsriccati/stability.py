"""Second-moment stability checks for a candidate gain.

The closed loop x_{t+1} = (A_t - B_t L) x_t is mean-square stable exactly
when the compressed expected Kronecker matrix

    C(E[(A - B L) kron (A - B L)])

has spectral radius below one. Replacing the plain expectation with a
weighted one gives the weighted mean-square verdict for the policy the
weights encode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import SampleBank
from .matops import compress, spectral_radius
from .weights import WeightedBank

__all__ = ["StabilityReport", "closed_loop_kron_expect", "ms_check", "wms_check"]


@dataclass(frozen=True)
class StabilityReport:
    """Spectral radii and strict less-than-one verdicts for one gain.

    The margin fields hold 1 - radius; callers wanting a guard band apply
    their own threshold on top of the strict test.
    """

    gain: np.ndarray
    radius_plain: float | None = None
    radius_weighted: float | None = None

    @property
    def ms_stable(self) -> bool | None:
        if self.radius_plain is None:
            return None
        return self.radius_plain < 1.0

    @property
    def wms_stable(self) -> bool | None:
        if self.radius_weighted is None:
            return None
        return self.radius_weighted < 1.0

    @property
    def margin_plain(self) -> float | None:
        if self.radius_plain is None:
            return None
        return 1.0 - self.radius_plain

    @property
    def margin_weighted(self) -> float | None:
        if self.radius_weighted is None:
            return None
        return 1.0 - self.radius_weighted


def closed_loop_kron_expect(bank, gain) -> np.ndarray:
    """(Weighted) empirical mean of (A - B L) kron (A - B L).

    Accepts a plain :class:`SampleBank` or a :class:`WeightedBank`.
    """
    if isinstance(bank, WeightedBank):
        weights = bank.weights
        bank = bank.bank
    elif isinstance(bank, SampleBank):
        weights = None
    else:
        raise TypeError(f"expected a sample bank, got {type(bank).__name__}")
    gain = np.asarray(gain, dtype=float)
    closed = bank.a - np.matmul(bank.b, gain)
    n = bank.n
    kron_all = np.einsum("sij,skl->sikjl", closed, closed).reshape(
        bank.size, n * n, n * n
    )
    if weights is None:
        return kron_all.mean(axis=0)
    return (kron_all * weights[:, None, None]).mean(axis=0)


def ms_check(bank: SampleBank, gain) -> StabilityReport:
    """Mean-square stability verdict under the plain empirical distribution."""
    radius = spectral_radius(compress(closed_loop_kron_expect(bank, gain)))
    return StabilityReport(gain=np.asarray(gain, dtype=float), radius_plain=radius)


def wms_check(wbank: WeightedBank, gain) -> StabilityReport:
    """Weighted mean-square verdict under the policy the weights encode."""
    radius = spectral_radius(compress(closed_loop_kron_expect(wbank, gain)))
    return StabilityReport(gain=np.asarray(gain, dtype=float), radius_weighted=radius)
