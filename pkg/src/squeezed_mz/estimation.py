"""Maximum-likelihood inversion, trial simulation and variance formulas.

A single trial succeeds (``x = 1``) when neither detector clicks, which
happens with probability ``P``. With one of ``beta``/``phi_minus`` known, the
other is estimated by solving ``P(estimate) = successes / n`` on the branch
``[0, pi/2]``, where ``P`` is monotone for the nuisance values of interest.
"""

import enum
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import SingularityError
from .protocol import (
    detection_probability_closed,
    eta_tilde,
    probability_complement,
    probability_partials,
)

BRANCH = (0.0, 0.5 * np.pi)
_MAX_BISECTIONS = 200
_SINGULAR_SLOPE = 1e-14

#: ``(master_seed, experiment_index)``; identifies an independent random stream.
StreamId = Tuple[int, int]


class Target(str, enum.Enum):
    BETA = "beta"
    PHI_MINUS = "phi_minus"

    @classmethod
    def parse(cls, value) -> "Target":
        if isinstance(value, cls):
            return value
        return cls(str(value).replace("-", "_"))


class Status(str, enum.Enum):
    INTERIOR = "interior"
    CLAMPED_LOW = "clamped_low"
    CLAMPED_HIGH = "clamped_high"


@dataclass(frozen=True)
class TrialBatch:
    n: int
    successes: int
    seed_label: StreamId = (0, 0)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"trial count must be >= 1, got {self.n}")
        if not 0 <= self.successes <= self.n:
            raise ValueError(f"successes must lie in [0, {self.n}], got {self.successes}")

    @property
    def fraction(self) -> float:
        return self.successes / self.n


@dataclass(frozen=True)
class EstimationResult:
    estimate: float
    observed_fraction: float
    status: Status
    target: Target


def rng_for(stream: StreamId) -> np.random.Generator:
    """Counter-based generator keyed by ``(master_seed, index)``.

    Streams with different indices are independent, and a stream's draws do
    not depend on which other streams were consumed or in what order.
    """
    master_seed, index = stream
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(seq))


def simulate_trials(p: float, n: int, stream: StreamId) -> TrialBatch:
    """Draw the number of no-click outcomes in ``n`` trials with success probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    if n < 1:
        raise ValueError(f"trial count must be >= 1, got {n}")
    successes = int(rng_for(stream).binomial(n, p))
    return TrialBatch(n, successes, tuple(stream))


def _invert(prob, fraction: float, target: Target) -> EstimationResult:
    lo, hi = BRANCH
    p_lo, p_hi = prob(lo), prob(hi)
    if fraction > p_lo:
        return EstimationResult(lo, fraction, Status.CLAMPED_LOW, target)
    if fraction < p_hi:
        return EstimationResult(hi, fraction, Status.CLAMPED_HIGH, target)
    if fraction == p_lo:
        return EstimationResult(lo, fraction, Status.INTERIOR, target)
    # P decreases on the branch: keep prob(lo) > fraction >= prob(hi)
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if prob(mid) > fraction:
            lo = mid
        else:
            hi = mid
    estimate = hi if abs(prob(hi) - fraction) <= abs(prob(lo) - fraction) else lo
    return EstimationResult(estimate, fraction, Status.INTERIOR, target)


def mle_beta(batch: TrialBatch, phi_minus: float, N: float, eta: float = 1.0,
             channel: int = 1) -> EstimationResult:
    """Estimate ``beta`` in ``[0, pi/2]`` with ``phi_minus`` known.

    Fractions above ``P(0)`` map to ``0`` and fractions below ``P(pi/2)`` map to
    ``pi/2``, flagged by the returned status.
    """
    return _invert(
        lambda b: detection_probability_closed(b, phi_minus, N, eta, channel),
        batch.fraction,
        Target.BETA,
    )


def mle_phi_minus(batch: TrialBatch, beta: float, N: float, eta: float = 1.0,
                  channel: int = 1) -> EstimationResult:
    """Estimate ``phi_minus`` in ``[0, pi/2]`` with ``beta`` known."""
    return _invert(
        lambda f: detection_probability_closed(beta, f, N, eta, channel),
        batch.fraction,
        Target.PHI_MINUS,
    )


def variance_error_propagation(beta: float, phi_minus: float, N: float, eta: float,
                               n: int, target="beta", channel: int = 1) -> float:
    """Large-``n`` estimator variance ``P (1 - P) / (n (dP/dtarget)^2)``.

    Raises:
        SingularityError: where the derivative vanishes (at a probability
            extremum or on a line where ``P`` does not depend on the target).
    """
    target = Target.parse(target)
    d_beta, d_phi = probability_partials(beta, phi_minus, N, eta, channel)
    slope = d_beta if target is Target.BETA else d_phi
    if abs(slope) < _SINGULAR_SLOPE:
        raise SingularityError(
            f"variance undefined at probability extremum (dP/d{target.value} = {slope:.3e})"
        )
    p = detection_probability_closed(beta, phi_minus, N, eta, channel)
    q = probability_complement(beta, phi_minus, N, eta, channel)
    return float(p * q / (n * slope**2))


def heisenberg_variance(N: float, eta: float, n: int) -> float:
    """Nominal Heisenberg-limit variance ``1 / (32 et n N^2)`` for ``beta``.

    See :func:`local_variance_limit` for the limit that the error-propagation
    formula actually reaches at the peak.
    """
    return 1.0 / (32.0 * eta_tilde(eta) * n * N**2)


def sql_variance(N: float, eta: float, n: int) -> float:
    """Standard-quantum-limit variance ``1 / (4 et n N)`` for ``phi_minus``."""
    return 1.0 / (4.0 * eta_tilde(eta) * n * N)


def local_variance_limit(N: float, eta: float, n: int, target="beta") -> float:
    """Limit of :func:`variance_error_propagation` approaching the peak along the target axis.

    For ``beta`` this is ``1 / (8 et n N (N + 1))``; for ``phi_minus`` it is
    ``1 / (4 et n N)``.
    """
    target = Target.parse(target)
    if target is Target.BETA:
        return 1.0 / (8.0 * eta_tilde(eta) * n * N * (N + 1.0))
    return sql_variance(N, eta, n)
