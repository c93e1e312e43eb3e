"""Gaussian phase-space simulation of a squeezed-light Mach-Zehnder phase sensor."""

__version__ = "0.1.0"

from .errors import DomainError, NumericError, SingularityError  # noqa: E402
from .protocol import (  # noqa: E402
    ProtocolConfig,
    build_pipeline,
    detection_probability_closed,
    detection_probability_det,
    level_curve_diameters,
)

__all__ = [
    "DomainError",
    "NumericError",
    "ProtocolConfig",
    "SingularityError",
    "build_pipeline",
    "detection_probability_closed",
    "detection_probability_det",
    "level_curve_diameters",
]
