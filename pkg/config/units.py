"""
Unit-suffixed quantities at the config boundary.

Values arrive as numbers (already in the base unit of the quantity) or strings such as
"22.83 kHz", "400 nm" or "1e7 W/cm^2". Each is converted once to SI, with frequencies
turned into angular frequencies (rad/s).
"""

import math
import re
from typing import Dict, Optional, Union

from scipy import constants

from exciton_control.errors import ConfigError

Quantity = Union[int, float, str]

DEBYE = 1e-21 / constants.c                                   # C m
AU_DIPOLE = constants.physical_constants["atomic unit of electric dipole mom."][0]
AU_POLARIZABILITY = constants.physical_constants["atomic unit of electric polarizability"][0]
AU_ENERGY_RAD = constants.physical_constants["Hartree energy"][0] / constants.hbar  # rad/s
AU_FIELD = constants.physical_constants["atomic unit of electric field"][0]

# Conversion factors into the base unit of each quantity kind
UNITS: Dict[str, Dict[str, Optional[float]]] = {
    "frequency": {
        "hz": 2 * math.pi, "khz": 2 * math.pi * 1e3, "mhz": 2 * math.pi * 1e6,
        "ghz": 2 * math.pi * 1e9, "rad/s": 1.0, "au": AU_ENERGY_RAD,
    },
    "length": {"nm": 1e-9, "um": 1e-6, "μm": 1e-6, "mm": 1e-3, "cm": 1e-2, "m": 1.0},
    "time": {"ns": 1e-9, "us": 1e-6, "μs": 1e-6, "ms": 1e-3, "s": 1.0},
    "field": {"v/m": 1.0, "v/cm": 1e2, "kv/cm": 1e5, "au": AU_FIELD},
    "intensity": {"w/m^2": 1.0, "w/m2": 1.0, "w/cm^2": 1e4, "w/cm2": 1e4},
    "angle": {"deg": math.pi / 180.0, "rad": 1.0},
    "dipole": {"d": DEBYE, "debye": DEBYE, "c*m": 1.0, "cm": 1.0, "au": AU_DIPOLE},
    "polarizability": {"c*m^2/v": 1.0, "au": AU_POLARIZABILITY},
    "wavevector": {"1/m": 1.0, "1/a": None},
    "field_gradient": {"v/m": 1.0, "v/cm": 1e2, "kv/cm": 1e5},
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([^\s].*?)?\s*$")


def parse_quantity(value: Quantity, kind: str, key: str = "value",
                   lattice_constant: Optional[float] = None) -> float:
    """
    Convert ``value`` to the SI base of ``kind``. Bare numbers pass through unchanged.
    ``1/a`` wave vectors need the lattice constant.
    """
    if kind not in UNITS:
        raise ConfigError(f"{key}: unknown quantity kind '{kind}'")
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a {kind} quantity, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{key}: expected a number or a '<number> <unit>' string, got {value!r}")
    match = _QUANTITY.match(value)
    if not match:
        raise ConfigError(f"{key}: cannot parse '{value}' as a {kind} quantity")
    number, unit = float(match.group(1)), (match.group(2) or "").strip().lower()
    if not unit:
        return number
    table = UNITS[kind]
    if unit not in table:
        raise ConfigError(f"{key}: unit '{match.group(2)}' is not a {kind} unit "
                          f"(expected one of {', '.join(sorted(table))})")
    factor = table[unit]
    if factor is None:
        if lattice_constant is None:
            raise ConfigError(f"{key}: '{unit}' needs the lattice constant")
        factor = 1.0 / lattice_constant
    return number * factor
