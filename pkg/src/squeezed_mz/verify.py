"""Self-consistency checks run by ``squeezed-mz verify``.

Each group compares an implementation path against an independent one and
reports the largest deviation seen together with its tolerance.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np

from .phase_space import (
    attenuator,
    gaussian_overlap,
    marginal,
    overlap_by_quadrature,
    symplectic_defects,
    unitary_to_symplectic,
)
from .protocol import (
    ProtocolConfig,
    build_pipeline,
    detection_probability_closed,
    detection_probability_det,
    mz_symplectic,
    mz_unitary,
    probability_partials,
)


@dataclass(frozen=True)
class GroupResult:
    name: str
    passed: bool
    max_deviation: float
    tolerance: float
    cases: int


def semi_axes(N: float, phi_minus: float, channel: int) -> np.ndarray:
    """Eigenvalues of twice a marginal of the interferometer output, ascending.

    Channel 1 keeps a fraction ``cos(phi_minus)^2`` of the squeezed mode and
    channel 2 the rest, so the eigenvalues are
    ``1 + 2 w (N -+ sqrt(N (1 + N)))`` with ``w`` that fraction; at ``w = 1``
    they reduce to ``exp(-+2 r)``.
    """
    weight = np.cos(phi_minus) ** 2 if channel == 1 else np.sin(phi_minus) ** 2
    root = np.sqrt(N * (1 + N))
    return np.sort([1 + 2 * weight * (N - root), 1 + 2 * weight * (N + root)])


def check_closed_vs_det(seed: int = 0) -> GroupResult:
    """Closed form against the determinant of the assembled pipeline.

    ``beta`` is never passed to the determinant path: the grid is realised
    through the arm phases with ``theta_in = theta_out = 0``.
    """
    tol = 1e-12
    grid = np.linspace(-0.5 * np.pi, 0.5 * np.pi, 21)
    worst, cases = 0.0, 0
    for N in (1.0, 4.0, 20.0):
        for eta in (0.2, 0.6, 1.0):
            for channel in (1, 2):
                for beta in grid:
                    for pm in grid:
                        cfg = ProtocolConfig(N, phi1=beta + pm, phi2=beta - pm, eta=eta,
                                             anti_squeeze_channel=channel)
                        p_det = detection_probability_det(build_pipeline(cfg), eta)
                        p_closed = detection_probability_closed(cfg.beta, cfg.phi_minus, N, eta, channel)
                        worst = max(worst, abs(p_det - p_closed))
                        cases += 1
    return GroupResult("closed-vs-det", bool(worst <= tol), float(worst), tol, cases)


def random_overlap_pairs(count: int, seed: int = 0, r_max: float = 1.0):
    """Pairs of physical states (interferometer output, lossy measurement state) with r <= r_max."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        r = rng.uniform(0.05, r_max)
        theta_in, theta_out, phi1, phi2 = rng.uniform(-np.pi, np.pi, 4)
        eta = rng.uniform(0.3, 1.0)
        channel = int(rng.integers(1, 3))
        cfg = ProtocolConfig.from_r(r, theta_in=theta_in, theta_out=theta_out, phi1=phi1,
                                    phi2=phi2, eta=eta, anti_squeeze_channel=channel)
        state = build_pipeline(cfg)
        yield state.sigma_mz, attenuator(state.sigma_out, eta)


def check_overlap_quadrature(count: int = 20, seed: int = 0) -> GroupResult:
    tol = 1e-3
    worst = 0.0
    for a, b in random_overlap_pairs(count, seed):
        worst = max(worst, abs(gaussian_overlap(a, b) - overlap_by_quadrature(a, b)))
    return GroupResult("overlap-quadrature", bool(worst <= tol), float(worst), tol, count)


def check_symplectic(count: int = 100, seed: int = 0) -> GroupResult:
    tol = 1e-12
    rng = np.random.default_rng(seed)
    worst = 0.0
    for phi1, phi2 in rng.uniform(-2 * np.pi, 2 * np.pi, (count, 2)):
        O = mz_symplectic(phi1, phi2)
        orth, sympl = symplectic_defects(O)
        lifted = np.max(np.abs(O - unitary_to_symplectic(mz_unitary(phi1, phi2))))
        worst = max(worst, orth, sympl, lifted)
    return GroupResult("symplectic", bool(worst <= tol), float(worst), tol, count)


def check_semi_axes(count: int = 200, seed: int = 0) -> GroupResult:
    tol = 1e-9
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        r = rng.uniform(0.0, 2.0)
        theta_in, phi1, phi2 = rng.uniform(-np.pi, np.pi, 3)
        cfg = ProtocolConfig.from_r(r, theta_in=theta_in, phi1=phi1, phi2=phi2)
        sigma_mz = build_pipeline(cfg).sigma_mz
        for channel in (1, 2):
            got = np.linalg.eigvalsh(2 * marginal(sigma_mz, channel))
            expected = semi_axes(cfg.N, cfg.phi_minus, channel)
            worst = max(worst, float(np.max(np.abs(got - expected))))
    return GroupResult("semi-axes", bool(worst <= tol), float(worst), tol, count)


def check_derivatives(seed: int = 0) -> GroupResult:
    """Analytic partials against central differences with step 1e-6 (relative)."""
    tol = 1e-6
    h = 1e-6
    rng = np.random.default_rng(seed)
    worst = 0.0
    cases = 0
    for _ in range(200):
        beta, pm = rng.uniform(0.05, 1.5, 2)
        N = rng.choice([1.0, 4.0, 20.0])
        eta = rng.uniform(0.2, 1.0)
        channel = int(rng.integers(1, 3))
        d_beta, d_phi = probability_partials(beta, pm, N, eta, channel)
        P = lambda b, f: detection_probability_closed(b, f, N, eta, channel)  # noqa: E731
        fd_beta = (P(beta + h, pm) - P(beta - h, pm)) / (2 * h)
        fd_phi = (P(beta, pm + h) - P(beta, pm - h)) / (2 * h)
        for exact, approx in ((d_beta, fd_beta), (d_phi, fd_phi)):
            if abs(exact) < 1e-3:
                continue
            worst = max(worst, abs(exact - approx) / abs(exact))
            cases += 1
    return GroupResult("derivatives", bool(worst <= tol), float(worst), tol, cases)


GROUPS: Dict[str, Callable[[], GroupResult]] = {
    "closed-vs-det": check_closed_vs_det,
    "overlap-quadrature": check_overlap_quadrature,
    "symplectic": check_symplectic,
    "semi-axes": check_semi_axes,
    "derivatives": check_derivatives,
}


def run_groups(names: Optional[Iterable[str]] = None) -> List[GroupResult]:
    selected = list(names) if names else list(GROUPS)
    unknown = [n for n in selected if n not in GROUPS]
    if unknown:
        raise ValueError(f"unknown verification group(s): {', '.join(unknown)}")
    return [GROUPS[name]() for name in selected]


def format_report(results: List[GroupResult]) -> str:
    lines = [f"{'group':<20} {'status':<6} {'max deviation':>14} {'tolerance':>10} {'cases':>6}"]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(
            f"{r.name:<20} {status:<6} {r.max_deviation:>14.3e} {r.tolerance:>10.1e} {r.cases:>6d}"
        )
    return "\n".join(lines)
