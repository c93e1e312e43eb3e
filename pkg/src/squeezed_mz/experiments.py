"""Parameter sweeps, scaling studies and Monte Carlo estimation campaigns.

Tables are returned as ``dict`` objects mapping column names to equal-length
numpy arrays (or lists for text columns), in row order.
"""

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError
from .estimation import (
    BRANCH,
    EstimationResult,
    Status,
    Target,
    heisenberg_variance,
    mle_beta,
    mle_phi_minus,
    simulate_trials,
    sql_variance,
    variance_error_propagation,
)
from .protocol import (
    ProtocolConfig,
    detection_probability_closed,
    eta_tilde,
    level_curve_diameters,
    probability_complement,
    probability_partials,
)

Table = Dict[str, np.ndarray]

#: Minimum distance to the true parameter's extremum, in predicted standard deviations.
MIN_OFFSET_SIGMAS = 5.0
#: Fraction of clamped experiments above which a campaign reports a warning.
CLAMP_WARNING_FRACTION = 0.01
#: Nodes this close to a probability peak are flagged instead of evaluated.
SINGULAR_RADIUS = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Rectangular (beta, phi_minus) grid with inclusive endpoints.

    A single node per axis is allowed when that axis' range is degenerate.
    """

    beta_range: Tuple[float, float]
    phi_range: Tuple[float, float]
    n_beta: int
    n_phi: int

    def __post_init__(self):
        for name, (lo, hi), count in (
            ("beta", self.beta_range, self.n_beta),
            ("phi", self.phi_range, self.n_phi),
        ):
            if count == 1 and lo == hi:
                continue
            if count < 2:
                raise ValueError(f"{name} axis needs at least 2 nodes, got {count}")
            if not lo < hi:
                raise ValueError(f"{name} range must satisfy lo < hi, got ({lo}, {hi})")

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        return _axis(*self.beta_range, self.n_beta), _axis(*self.phi_range, self.n_phi)

    def nodes(self) -> Tuple[np.ndarray, np.ndarray]:
        """Flattened node coordinates, beta-major (phi varies fastest)."""
        b, f = self.axes()
        bb, ff = np.meshgrid(b, f, indexing="ij")
        return bb.ravel(), ff.ravel()


def _axis(lo: float, hi: float, count: int) -> np.ndarray:
    # built around the midpoint so that symmetric ranges give exactly mirrored nodes
    if count == 1:
        return np.array([float(lo)])
    i = np.arange(count)
    t = (2 * i - (count - 1)) / (count - 1)
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * t


class DeltaRule(str, enum.Enum):
    C_OVER_N = "c_over_N"
    C_OVER_SQRT_N = "c_over_sqrtN"


@dataclass(frozen=True)
class ScalingStudy:
    N_values: Sequence[float]
    eta: float = 1.0
    P0: float = 0.9
    delta_rule: DeltaRule = DeltaRule.C_OVER_N
    c: float = 0.5

    def __post_init__(self):
        values = np.asarray(self.N_values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("N_values must be a non-empty sequence")
        if np.any(np.diff(values) <= 0):
            raise ValueError("N_values must be strictly increasing")
        if self.c <= 0:
            raise ValueError(f"offset coefficient must be > 0, got {self.c}")

    def delta(self, N: float) -> float:
        if DeltaRule(self.delta_rule) is DeltaRule.C_OVER_N:
            return self.c / N
        return self.c / np.sqrt(N)


def log_spaced(lo_exp: float, hi_exp: float, per_decade: int) -> np.ndarray:
    """``10**k`` for ``k`` from ``lo_exp`` to ``hi_exp`` in steps of ``1/per_decade``."""
    if per_decade < 1 or hi_exp <= lo_exp:
        raise ValueError("need per_decade >= 1 and hi_exp > lo_exp")
    count = int(round((hi_exp - lo_exp) * per_decade)) + 1
    return 10.0 ** np.linspace(lo_exp, hi_exp, count)


def loglog_slope(x, y) -> Dict[str, float]:
    """Ordinary least-squares fit of ``log y = slope * log x + intercept``."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if lx.size < 2:
        raise ValueError("slope fit needs at least two points")
    (slope, intercept), residuals, *_ = np.polyfit(lx, ly, 1, full=True)
    rss = float(residuals[0]) if residuals.size else 0.0
    return {
        "slope": float(slope),
        "intercept": float(intercept),
        "rms_residual": float(np.sqrt(rss / lx.size)),
        "points": int(lx.size),
    }


def probability_surface(grid: GridSpec, N: float, eta: float = 1.0, channel: int = 1) -> Table:
    beta, phi = grid.nodes()
    return {
        "beta": beta,
        "phi_minus": phi,
        "P": np.asarray(detection_probability_closed(beta, phi, N, eta, channel), float).reshape(beta.shape),
    }


def diameter_scaling(study: ScalingStudy) -> Table:
    """Level-curve diameters for each ``N``; rows outside the domain carry an error message."""
    Ns = np.asarray(study.N_values, dtype=float)
    beta_star = np.full(Ns.shape, np.nan)
    phi_star = np.full(Ns.shape, np.nan)
    errors: List[str] = []
    for i, N in enumerate(Ns):
        try:
            beta_star[i], phi_star[i] = level_curve_diameters(study.P0, N, study.eta)
            errors.append("")
        except DomainError as exc:
            errors.append(str(exc))
    return {"N": Ns, "beta_star": beta_star, "phi_star": phi_star, "error": errors}


def diameter_slopes(table: Table) -> Dict[str, Dict[str, float]]:
    """Log-log exponents of both diameters over the valid rows."""
    ok = np.array([not e for e in table["error"]]) & (table["beta_star"] > 0)
    return {
        "beta_star": loglog_slope(table["N"][ok], table["beta_star"][ok]),
        "phi_star": loglog_slope(table["N"][ok], table["phi_star"][ok]),
    }


def rescaled_variance_table(study: ScalingStudy, n: int, target="beta") -> Table:
    """Error-propagation variance along the target axis at offset ``delta(N)``, rescaled.

    ``rescaled`` is ``32 et n N^2 Var`` for ``beta`` and ``4 et n N Var`` for
    ``phi_minus``, so a value of one means the nominal leading term is met.
    """
    target = Target.parse(target)
    Ns = np.asarray(study.N_values, dtype=float)
    var = np.empty_like(Ns)
    ref = np.empty_like(Ns)
    for i, N in enumerate(Ns):
        d = study.delta(N)
        if target is Target.BETA:
            var[i] = variance_error_propagation(d, 0.0, N, study.eta, n, target)
            ref[i] = heisenberg_variance(N, study.eta, n)
        else:
            var[i] = variance_error_propagation(0.0, d, N, study.eta, n, target)
            ref[i] = sql_variance(N, study.eta, n)
    return {"N": Ns, "variance": var, "rescaled": var / ref}


def rescaled_variance_surface(grid: GridSpec, N: float, eta: float, n: int,
                              target="beta", channel: int = 1) -> Table:
    """Rescaled inverse variance ``1/(N^2 Var[beta])`` or ``1/(N Var[phi_minus])`` per node.

    Computed as ``n (dP/dtarget)^2 / (P (1 - P) N^k)``; where ``P`` does not
    depend on the target the value is zero. Nodes within ``SINGULAR_RADIUS``
    of a peak are emitted as NaN with ``singular`` set.
    """
    target = Target.parse(target)
    beta, phi = grid.nodes()
    shift = 0.0 if channel == 1 else 0.5 * np.pi
    near_b = np.abs(beta - np.pi * np.round(beta / np.pi)) < SINGULAR_RADIUS
    pm = phi - shift
    near_f = np.abs(pm - np.pi * np.round(pm / np.pi)) < SINGULAR_RADIUS
    singular = near_b & near_f

    p = np.asarray(detection_probability_closed(beta, phi, N, eta, channel), float)
    q = probability_complement(beta, phi, N, eta, channel)
    d_beta, d_phi = probability_partials(beta, phi, N, eta, channel)
    slope = d_beta if target is Target.BETA else d_phi
    power = 2 if target is Target.BETA else 1
    with np.errstate(divide="ignore", invalid="ignore"):
        value = n * slope**2 / (p * q * N**power)
    value = np.where(singular, np.nan, value)
    return {"beta": beta, "phi_minus": phi, "rescaled_inverse_variance": value, "singular": singular}


@dataclass
class CampaignSummary:
    target: Target
    true_value: float
    n: int
    M: int
    master_seed: int
    estimates: np.ndarray = field(repr=False)
    fractions: np.ndarray = field(repr=False)
    statuses: List[Status] = field(repr=False)
    mean_estimate: float = 0.0
    sample_variance: float = 0.0
    predicted_variance: float = 0.0
    variance_ratio: float = 0.0
    reference_variance: float = 0.0
    reference_ratio: float = 0.0
    clamped_low: int = 0
    clamped_high: int = 0
    loss_factor: float = 1.0
    warning: Optional[str] = None

    @property
    def clamp_count(self) -> int:
        return self.clamped_low + self.clamped_high

    @property
    def standard_error(self) -> float:
        return float(np.sqrt(self.predicted_variance / self.M))

    def to_dict(self) -> dict:
        return {
            "target": self.target.value,
            "true_value": self.true_value,
            "n": self.n,
            "M": self.M,
            "master_seed": self.master_seed,
            "mean_estimate": self.mean_estimate,
            "sample_variance": self.sample_variance,
            "predicted_variance": self.predicted_variance,
            "ratio": self.variance_ratio,
            "reference_variance": self.reference_variance,
            "reference_ratio": self.reference_ratio,
            "clamped_low": self.clamped_low,
            "clamped_high": self.clamped_high,
            "clamp_count": self.clamp_count,
            "loss_factor": self.loss_factor,
            "warning": self.warning,
        }


def campaign_point(config: ProtocolConfig, delta: float, target) -> Tuple[float, float]:
    """True ``(beta, phi_minus)`` of a campaign: the config's value shifted by ``delta`` on the target."""
    target = Target.parse(target)
    beta, phi = config.beta, config.phi_minus
    if target is Target.BETA:
        beta += delta
        value = beta
    else:
        phi += delta
        value = phi
    lo, hi = BRANCH
    if not lo < value < hi:
        raise ValueError(f"true {target.value} = {value} must lie inside the branch ({lo}, {hi})")
    return beta, phi


def check_offset(config: ProtocolConfig, delta: float, n: int, target="beta") -> float:
    """Return the offset in predicted standard deviations; raise if below ``MIN_OFFSET_SIGMAS``."""
    beta, phi = campaign_point(config, delta, target)
    var = variance_error_propagation(beta, phi, config.N, config.eta, n, target,
                                     config.anti_squeeze_channel)
    sigmas = abs(delta) / np.sqrt(var)
    if sigmas < MIN_OFFSET_SIGMAS:
        raise ValueError(
            f"offset {delta} is only {sigmas:.2f} predicted standard deviations from the peak; "
            f"at least {MIN_OFFSET_SIGMAS:g} are needed so that folding at the branch edge "
            f"does not bias the variance"
        )
    return float(sigmas)


def mc_campaign(config: ProtocolConfig, delta: float, n: int, M: int, master_seed: int,
                target="beta", enforce_offset: bool = True, threads: int = 1) -> CampaignSummary:
    """Run ``M`` independent estimation experiments of ``n`` trials each.

    Experiment ``k`` draws from stream ``(master_seed, k)``; results are
    gathered in index order, so the summary does not depend on ``threads``.
    """
    target = Target.parse(target)
    if M < 2:
        raise ValueError(f"need at least 2 experiments, got {M}")
    if enforce_offset:
        check_offset(config, delta, n, target)
    beta, phi = campaign_point(config, delta, target)
    N, eta, ch = config.N, config.eta, config.anti_squeeze_channel
    p_true = detection_probability_closed(beta, phi, N, eta, ch)

    def run(k: int) -> EstimationResult:
        batch = simulate_trials(p_true, n, (master_seed, k))
        if target is Target.BETA:
            return mle_beta(batch, phi, N, eta, ch)
        return mle_phi_minus(batch, beta, N, eta, ch)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(M)))
    else:
        results = [run(k) for k in range(M)]

    estimates = np.array([r.estimate for r in results])
    fractions = np.array([r.observed_fraction for r in results])
    statuses = [r.status for r in results]
    low = sum(s is Status.CLAMPED_LOW for s in statuses)
    high = sum(s is Status.CLAMPED_HIGH for s in statuses)

    predicted = variance_error_propagation(beta, phi, N, eta, n, target, ch)
    reference = (heisenberg_variance if target is Target.BETA else sql_variance)(N, eta, n)
    sample_var = float(np.var(estimates, ddof=1))
    warning = None
    if low + high > CLAMP_WARNING_FRACTION * M:
        warning = f"{low + high} of {M} experiments clamped at the branch boundary"
    return CampaignSummary(
        target=target,
        true_value=beta if target is Target.BETA else phi,
        n=n,
        M=M,
        master_seed=master_seed,
        estimates=estimates,
        fractions=fractions,
        statuses=statuses,
        mean_estimate=float(np.mean(estimates)),
        sample_variance=sample_var,
        predicted_variance=predicted,
        variance_ratio=sample_var / predicted,
        reference_variance=reference,
        reference_ratio=sample_var / reference,
        clamped_low=low,
        clamped_high=high,
        loss_factor=1.0 / eta_tilde(eta),
        warning=warning,
    )


__all__ = [
    "CampaignSummary",
    "DeltaRule",
    "GridSpec",
    "ScalingStudy",
    "campaign_point",
    "check_offset",
    "diameter_scaling",
    "diameter_slopes",
    "log_spaced",
    "loglog_slope",
    "mc_campaign",
    "probability_surface",
    "rescaled_variance_surface",
    "rescaled_variance_table",
]
