"""Software twin of a centimetre-resolution Raman distributed temperature sensor.

Simulates photon-counting OTDR traces of a fiber routed over a Joule-heated
PCB, calibrates the anti-Stokes/Stokes ratio against thermocouple readings,
inverts whole traces to temperature profiles and reconstructs board
thermograms.
"""

from rdts.errors import (
    ConfigError,
    ConvergenceError,
    DegenerateFit,
    DegenerateStokes,
    DomainError,
    InvalidRatio,
    RangeError,
)
from rdts.raman import (
    CalibrationConstants,
    ChannelCoefficients,
    RamanConstants,
    as_rate,
    invert_temperature,
    ratio_forward,
    s_rate,
    temperature_uncertainty,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationConstants",
    "ChannelCoefficients",
    "ConfigError",
    "ConvergenceError",
    "DegenerateFit",
    "DegenerateStokes",
    "DomainError",
    "InvalidRatio",
    "RamanConstants",
    "RangeError",
    "as_rate",
    "invert_temperature",
    "ratio_forward",
    "s_rate",
    "temperature_uncertainty",
]
