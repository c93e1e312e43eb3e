r"""Two-mode Gaussian phase-space algebra.

Quadratures are ordered as :math:`\xi = (x_1, p_1, x_2, p_2)` and the vacuum
has variance 1/2 in every quadrature. All states are zero-mean, so a state is
fully described by its 4x4 covariance matrix. Matrices are plain
``numpy.ndarray`` objects; functions never mutate their inputs.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import NumericError

#: Tolerance for exact algebraic identities in double precision.
EXACT_TOL = 1e-12
#: Tolerance for composed pipelines.
PIPELINE_TOL = 1e-9

_UNITARITY_TOL = 1e-9
_J = np.array([[0.0, -1.0], [1.0, 0.0]])  # == -i * sigma_y


@dataclass(frozen=True)
class SqueezeParam:
    """Complex squeezing parameter ``z = r * exp(i theta)``.

    ``theta`` is stored as given; everything built from it is 2*pi periodic.
    """

    r: float
    theta: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.r) or self.r < 0:
            raise ValueError(f"squeezing magnitude must be finite and >= 0, got {self.r}")
        if not np.isfinite(self.theta):
            raise ValueError(f"squeezing angle must be finite, got {self.theta}")

    @classmethod
    def from_mean_photons(cls, N: float, theta: float = 0.0) -> "SqueezeParam":
        """Squeezed vacuum carrying ``N = sinh(r)**2`` photons on average."""
        if N < 0:
            raise ValueError(f"mean photon number must be >= 0, got {N}")
        return cls(float(np.arcsinh(np.sqrt(N))), theta)

    @property
    def mean_photons(self) -> float:
        return float(np.sinh(self.r) ** 2)


def rotation(angle: float) -> np.ndarray:
    """Counter-clockwise phase-space rotation by ``angle``."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def symplectic_form() -> np.ndarray:
    """Block-diagonal symplectic form for two modes."""
    return np.kron(np.eye(2), _J)


def squeezer_matrix(z: SqueezeParam, inverse: bool = False) -> np.ndarray:
    """Phase-space matrix ``R(theta) diag(e^r, e^-r) R(-theta)`` of a one-mode squeezer.

    With ``inverse=True`` the anti-squeezing matrix (``r -> -r``) is returned,
    which is the matrix inverse of the squeezer.
    """
    r = -z.r if inverse else z.r
    rot = rotation(z.theta)
    return rot @ np.diag([np.exp(r), np.exp(-r)]) @ rot.T


def vacuum_cov() -> np.ndarray:
    return 0.5 * np.eye(4)


def _check_channel(channel: int) -> int:
    if channel not in (1, 2):
        raise ValueError(f"channel must be 1 or 2, got {channel!r}")
    return channel


def _block(channel: int) -> slice:
    return slice(0, 2) if channel == 1 else slice(2, 4)


def single_mode_squeezed_cov(z: SqueezeParam, channel: int = 1) -> np.ndarray:
    """Squeezed vacuum on ``channel`` and vacuum on the other mode."""
    _check_channel(channel)
    sigma = vacuum_cov()
    s = squeezer_matrix(z)
    b = _block(channel)
    sigma[b, b] = 0.5 * s @ s
    return sigma


def unitary_to_symplectic(U: np.ndarray) -> np.ndarray:
    r"""Lift a 2x2 mode unitary to its 4x4 orthogonal symplectic action.

    Each 2x2 block ``(j, k)`` is ``Re(U_jk) I - i Im(U_jk) sigma_y``, i.e. the
    real matrix ``[[Re, -Im], [Im, Re]]``.

    Raises:
        ValueError: if ``U`` is not a 2x2 unitary to within 1e-9.
    """
    U = np.asarray(U, dtype=complex)
    if U.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {U.shape}")
    deviation = np.linalg.norm(U.conj().T @ U - np.eye(2))
    if deviation > _UNITARITY_TOL:
        raise ValueError(f"matrix is not unitary (||U^dag U - I|| = {deviation:.3e})")
    O = np.empty((4, 4))
    for j in range(2):
        for k in range(2):
            u = U[j, k]
            O[2 * j : 2 * j + 2, 2 * k : 2 * k + 2] = u.real * np.eye(2) + u.imag * _J
    return O


def apply_network(O: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Covariance after a linear phase-space map: ``O sigma O^T``."""
    return O @ sigma @ O.T


def attenuator(sigma: np.ndarray, eta: float) -> np.ndarray:
    """Equal loss on every mode: ``eta * sigma + (1 - eta)/2 * I``.

    Raises:
        ValueError: unless ``0 < eta <= 1``.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"transmissivity must lie in (0, 1], got {eta}")
    sigma = np.asarray(sigma, dtype=float)
    return eta * sigma + 0.5 * (1.0 - eta) * np.eye(sigma.shape[0])


def gaussian_overlap(sigma_a: np.ndarray, sigma_b: np.ndarray) -> float:
    """Phase-space overlap ``(2 pi)^2 * int W_a W_b = det(sigma_a + sigma_b)^(-1/2)``.

    For two-mode states this is ``Tr(rho_a rho_b)``.

    Raises:
        NumericError: if the determinant is not finite and positive.
    """
    det = np.linalg.det(np.asarray(sigma_a) + np.asarray(sigma_b))
    if not np.isfinite(det) or det <= 0:
        raise NumericError(f"overlap determinant is not finite and positive: {det}")
    return float(det ** -0.5)


def marginal(sigma: np.ndarray, channel: int) -> np.ndarray:
    """Reduced 2x2 covariance of one mode."""
    _check_channel(channel)
    b = _block(channel)
    return np.array(sigma[b, b])


def mean_photon_number(sigma: np.ndarray) -> float:
    """Total mean photon number ``tr(sigma)/2 - 1`` of a two-mode state."""
    return float(0.5 * np.trace(sigma) - 1.0)


def wigner(sigma: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Zero-mean Gaussian Wigner function evaluated at points ``xi[..., 4]``."""
    sigma = np.asarray(sigma, dtype=float)
    dim = sigma.shape[0]
    inv = np.linalg.inv(sigma)
    quad = np.einsum("...i,ij,...j->...", xi, inv, xi)
    norm = (2 * np.pi) ** (dim // 2) * np.sqrt(np.linalg.det(sigma))
    return np.exp(-0.5 * quad) / norm


def overlap_by_quadrature(
    sigma_a: np.ndarray,
    sigma_b: np.ndarray,
    half_width: float = 6.0,
    points: int = 81,
) -> float:
    """Trapezoid-rule estimate of ``(2 pi)^2 * int W_a W_b d^4 xi``.

    The box ``[-half_width, half_width]^4`` is sampled with ``points`` nodes
    per axis. The product of the two Wigner functions is evaluated directly
    from their individual precision matrices and normalisations; the
    integration runs slice by slice over the first axis to keep memory flat.
    """
    inv_a = np.linalg.inv(sigma_a)
    inv_b = np.linalg.inv(sigma_b)
    norm = (2 * np.pi) ** 4 * np.sqrt(np.linalg.det(sigma_a) * np.linalg.det(sigma_b))
    precision = inv_a + inv_b

    grid, h = np.linspace(-half_width, half_width, points, retstep=True)
    w = np.full(points, h)
    w[0] = w[-1] = h / 2

    g1, g2, g3 = np.meshgrid(grid, grid, grid, indexing="ij")
    rest = np.stack([g1, g2, g3], axis=-1)
    base = np.einsum("...i,ij,...j->...", rest, precision[1:, 1:], rest)
    cross = 2.0 * np.einsum("...i,i->...", rest, precision[0, 1:])
    weights3 = w[:, None, None] * w[None, :, None] * w[None, None, :]

    total = 0.0
    for x0, w0 in zip(grid, w):
        quad = base + x0 * cross + precision[0, 0] * x0 * x0
        total += w0 * np.sum(weights3 * np.exp(-0.5 * quad))
    return float((2 * np.pi) ** 2 * total / norm)


def symmetrize(sigma: np.ndarray) -> np.ndarray:
    return 0.5 * (sigma + sigma.T)


def is_valid_covariance(sigma: np.ndarray, tol: float = EXACT_TOL) -> bool:
    """Symmetric, positive definite and satisfying ``sigma + i/2 Omega >= 0``."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape not in ((2, 2), (4, 4)):
        return False
    scale = max(1.0, float(np.max(np.abs(sigma))))
    if np.max(np.abs(sigma - sigma.T)) > tol * scale:
        return False
    sym = symmetrize(sigma)
    if np.min(np.linalg.eigvalsh(sym)) <= -tol:
        return False
    omega = np.kron(np.eye(sym.shape[0] // 2), _J)
    return bool(np.min(np.linalg.eigvalsh(sym + 0.5j * omega)) >= -tol * scale)


def symplectic_defects(O: np.ndarray) -> Tuple[float, float]:
    """Max-abs deviations of ``O^T O`` from I and of ``O^T Omega O`` from Omega."""
    omega = symplectic_form()
    orth = float(np.max(np.abs(O.T @ O - np.eye(4))))
    sympl = float(np.max(np.abs(O.T @ omega @ O - omega)))
    return orth, sympl
