"""Unit-tagged quantity parsing for config files and CLI boundaries.

Bare numbers are taken as SI. Strings carry an explicit unit suffix,
e.g. "3.175 mm", "23 mT", "10 gf", "22.5 deg". Every call site names
the quantity kind, so a length field cannot silently absorb a value
meant as a field strength. Internals are SI throughout; conversion
happens only here.
"""

from __future__ import annotations

import re

import numpy as np

GRAM_FORCE = 9.80665e-3  # N

_SCALES = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6},
    "field": {"T": 1.0, "mT": 1e-3, "uT": 1e-6},
    "force": {"N": 1.0, "mN": 1e-3, "gf": GRAM_FORCE},
    "angle": {"rad": 1.0, "deg": np.pi / 180.0},
    "time": {"s": 1.0, "ms": 1e-3, "min": 60.0},
    "angular_velocity": {"rad/s": 1.0, "deg/s": np.pi / 180.0, "rpm": 2.0 * np.pi / 60.0},
    "pressure": {"Pa": 1.0, "kPa": 1e3, "MPa": 1e6, "GPa": 1e9},
    "mass": {"kg": 1.0, "g": 1e-3},
}

_QUANTITY_RE = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(.*?)\s*$")


def parse_quantity(value, kind):
    """Return the SI value of a number or a "value unit" string.

    kind selects the allowed unit set ("length", "field", "force",
    "angle", "time", "angular_velocity", "pressure", "mass").
    """
    try:
        table = _SCALES[kind]
    except KeyError:
        raise ValueError(f"unknown quantity kind {kind!r}") from None
    if isinstance(value, bool):
        raise ValueError(f"expected a {kind} quantity, got {value!r}")
    if isinstance(value, (int, float, np.integer, np.floating)):
        return float(value)
    if isinstance(value, str):
        m = _QUANTITY_RE.match(value)
        if m:
            number, unit = m.groups()
            if not unit:
                return float(number)
            if unit in table:
                return float(number) * table[unit]
            allowed = ", ".join(sorted(table))
            raise ValueError(
                f"unknown {kind} unit {unit!r} in {value!r} (allowed: {allowed})"
            )
    raise ValueError(f"cannot parse {kind} quantity from {value!r}")


def parse_vector(value, kind, size=3):
    """Parse a sequence of quantities into a float array of length size."""
    if isinstance(value, np.ndarray) and value.shape == (size,):
        return value.astype(float)
    if not isinstance(value, (list, tuple)):
        raise ValueError(f"expected a {size}-vector of {kind} quantities, got {value!r}")
    if len(value) != size:
        raise ValueError(f"expected {size} components, got {len(value)} in {value!r}")
    return np.array([parse_quantity(c, kind) for c in value])


def si_to(value_si, unit):
    """Convert an SI value to the named unit (for display only)."""
    for table in _SCALES.values():
        if unit in table:
            return float(value_si) / table[unit]
    raise ValueError(f"unknown unit {unit!r}")
