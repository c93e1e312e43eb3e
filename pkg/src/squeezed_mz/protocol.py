"""Squeezed-light Mach-Zehnder pipeline and its no-click probability.

The input squeezer acts on mode 1, the interferometer is a balanced
Mach-Zehnder with arm phases ``phi1`` and ``phi2``, and the measurement
anti-squeezes one output mode before projecting both modes on the vacuum
with on-off detectors of efficiency ``eta``. ``P`` is the probability that
neither detector clicks.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DomainError, NumericError
from .phase_space import (
    SqueezeParam,
    apply_network,
    gaussian_overlap,
    single_mode_squeezed_cov,
    unitary_to_symplectic,
)


def eta_tilde(eta):
    """Effective efficiency ``eta * (2 - eta)`` entering all lossy formulas."""
    return eta * (2.0 - eta)


def _check_eta(eta: float) -> None:
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"detector efficiency must lie in (0, 1], got {eta}")


@dataclass(frozen=True)
class ProtocolConfig:
    """Physical parameters of one run of the interferometer."""

    N: float
    theta_in: float = 0.0
    theta_out: float = 0.0
    phi1: float = 0.0
    phi2: float = 0.0
    eta: float = 1.0
    anti_squeeze_channel: int = 1

    def __post_init__(self):
        if not np.isfinite(self.N) or self.N < 0:
            raise ValueError(f"mean photon number must be finite and >= 0, got {self.N}")
        _check_eta(self.eta)
        if self.anti_squeeze_channel not in (1, 2):
            raise ValueError(f"anti_squeeze_channel must be 1 or 2, got {self.anti_squeeze_channel!r}")

    @classmethod
    def from_r(cls, r: float, **kwargs) -> "ProtocolConfig":
        return cls(N=float(np.sinh(r) ** 2), **kwargs)

    @property
    def r(self) -> float:
        return float(np.arcsinh(np.sqrt(self.N)))

    @property
    def phi_plus(self) -> float:
        return 0.5 * (self.phi1 + self.phi2)

    @property
    def phi_minus(self) -> float:
        return 0.5 * (self.phi1 - self.phi2)

    @property
    def beta(self) -> float:
        """Relative angle between the interferometer output and the measurement ellipse."""
        return self.phi_plus + self.theta_in - self.theta_out

    @property
    def eta_tilde(self) -> float:
        return eta_tilde(self.eta)


@dataclass(frozen=True)
class PipelineState:
    sigma_in: np.ndarray
    sigma_mz: np.ndarray
    sigma_out: np.ndarray


def mz_unitary(phi1: float, phi2: float) -> np.ndarray:
    """Mode transformation of a balanced Mach-Zehnder (beam splitter, phases, beam splitter)."""
    bs_out = 0.5 * np.array([[1, -1j], [-1j, 1]])
    bs_in = np.array([[1, 1j], [1j, 1]])
    phases = np.diag([np.exp(1j * phi1), np.exp(1j * phi2)])
    return bs_out @ phases @ bs_in


def mz_symplectic(phi1: float, phi2: float) -> np.ndarray:
    """Orthogonal symplectic action of the Mach-Zehnder on the quadratures.

    Written out in terms of ``phi_plus`` and ``phi_minus``: the diagonal blocks
    are ``cos(phi_minus) R(phi_plus)``, the upper off-diagonal block is
    ``-sin(phi_minus) R(phi_plus)`` and the lower one ``+sin(phi_minus) R(phi_plus)``,
    with ``R`` the counter-clockwise rotation. This coincides with
    ``unitary_to_symplectic(mz_unitary(phi1, phi2))``.
    """
    pp = 0.5 * (phi1 + phi2)
    pm = 0.5 * (phi1 - phi2)
    cp, sp = np.cos(pp), np.sin(pp)
    cm, sm = np.cos(pm), np.sin(pm)
    return np.array(
        [
            [cp * cm, -sp * cm, -cp * sm, sp * sm],
            [sp * cm, cp * cm, -sp * sm, -cp * sm],
            [cp * sm, -sp * sm, cp * cm, -sp * cm],
            [sp * sm, cp * sm, sp * cm, cp * cm],
        ]
    )


def build_pipeline(config: ProtocolConfig) -> PipelineState:
    r = config.r
    sigma_in = single_mode_squeezed_cov(SqueezeParam(r, config.theta_in), 1)
    sigma_mz = apply_network(mz_symplectic(config.phi1, config.phi2), sigma_in)
    sigma_out = single_mode_squeezed_cov(
        SqueezeParam(r, config.theta_out), config.anti_squeeze_channel
    )
    return PipelineState(sigma_in, sigma_mz, sigma_out)


def detection_probability_det(state: PipelineState, eta: float = 1.0) -> float:
    """No-click probability ``det(eta sigma_mz + (2 - eta) sigma_out)^(-1/2)``.

    Raises:
        ValueError: unless ``0 < eta <= 1``.
        NumericError: if the determinant is not positive.
    """
    _check_eta(eta)
    if eta == 1.0:
        return gaussian_overlap(state.sigma_mz, state.sigma_out)
    det = np.linalg.det(eta * state.sigma_mz + (2.0 - eta) * state.sigma_out)
    if not np.isfinite(det) or det <= 0:
        raise NumericError(f"non-positive determinant {det}: invalid covariance")
    return float(det ** -0.5)


def _shifted(phi_minus, channel):
    if channel == 1:
        return phi_minus
    if channel == 2:
        return phi_minus - 0.5 * np.pi
    raise ValueError(f"channel must be 1 or 2, got {channel!r}")


def probability_excess(beta, phi_minus, N, eta, channel=1):
    """``P**-2 - 1`` for the closed-form probability.

    Uses the expansion ``et [2 N s^2 + et N^2 s^4 + 4 N (1 + N) c^2 sin(beta)^2]``
    with ``s, c = sin, cos(phi_minus)``, which is a sum of non-negative terms
    and so keeps full relative precision close to the peaks.
    """
    eta_arr, N_arr = np.asarray(eta), np.asarray(N)
    if np.any(~((eta_arr > 0) & (eta_arr <= 1))):
        raise ValueError(f"detector efficiency must lie in (0, 1], got {eta}")
    if np.any(~(N_arr >= 0)):
        raise ValueError(f"mean photon number must be >= 0, got {N}")
    et = eta_tilde(eta)
    pm = _shifted(phi_minus, channel)
    s2 = np.sin(pm) ** 2
    c2 = np.cos(pm) ** 2
    sb2 = np.sin(beta) ** 2
    return et * (2 * N * s2 + et * N**2 * s2**2 + 4 * N * (1 + N) * c2 * sb2)


def detection_probability_closed(beta, phi_minus, N, eta=1.0, channel=1):
    """Closed-form no-click probability as a function of ``beta`` and ``phi_minus``.

    Channel 2 is the same expression with ``phi_minus`` shifted by ``-pi/2``.
    Accepts scalars or broadcastable arrays.
    """
    p = (1.0 + probability_excess(beta, phi_minus, N, eta, channel)) ** -0.5
    return float(p) if np.ndim(p) == 0 else p


def probability_complement(beta, phi_minus, N, eta=1.0, channel=1):
    """``1 - P`` without cancellation near ``P = 1``."""
    x = probability_excess(beta, phi_minus, N, eta, channel)
    q = np.sqrt(1.0 + x)
    return x / (q * (1.0 + q))


def probability_partials(beta, phi_minus, N, eta=1.0, channel=1):
    """Analytic ``(dP/dbeta, dP/dphi_minus)`` of the closed form."""
    et = eta_tilde(eta)
    pm = _shifted(phi_minus, channel)
    s2 = np.sin(pm) ** 2
    c2 = np.cos(pm) ** 2
    s2pm = np.sin(2 * pm)
    dq_dbeta = et * 4 * N * (1 + N) * c2 * np.sin(2 * beta)
    dq_dphi = et * (
        2 * N * s2pm + 2 * et * N**2 * s2 * s2pm - 4 * N * (1 + N) * np.sin(beta) ** 2 * s2pm
    )
    factor = -0.5 * (1.0 + probability_excess(beta, phi_minus, N, eta, channel)) ** -1.5
    return factor * dq_dbeta, factor * dq_dphi


def level_curve_diameters(P0: float, N: float, eta: float = 1.0) -> Tuple[float, float]:
    """Half-widths of the ``P = P0`` level curve along the ``beta`` and ``phi_minus`` axes.

    Returns ``(beta_star, phi_star)`` with ``P(beta_star, 0) = P(0, phi_star) = P0``
    (channel 1). Along ``phi_minus`` the level equation is a quadratic in
    ``sin(phi)^2`` whose positive root is ``(1 - P0) / (et N P0)``.

    Raises:
        DomainError: if either arcsin argument exceeds one, i.e. the level
            curve does not close within the fundamental domain.
    """
    if not 0.0 < P0 <= 1.0:
        raise ValueError(f"P0 must lie in (0, 1], got {P0}")
    _check_eta(eta)
    if P0 == 1.0:
        return 0.0, 0.0
    et = eta_tilde(eta)
    if N <= 0:
        raise DomainError("level curve exceeds fundamental domain (N must be > 0)")
    beta_arg = (1.0 - P0**2) / (4.0 * et * N * (1.0 + N) * P0**2)
    phi_arg = (1.0 - P0) / (et * N * P0)
    if beta_arg > 1.0 or phi_arg > 1.0:
        raise DomainError(
            f"level curve exceeds fundamental domain "
            f"(sin^2 beta* = {beta_arg:.6g}, sin^2 phi* = {phi_arg:.6g})"
        )
    return float(np.arcsin(np.sqrt(beta_arg))), float(np.arcsin(np.sqrt(phi_arg)))
