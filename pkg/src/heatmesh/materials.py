"""Temperature-dependent thermophysical properties.

Tabulated conductivity/density/heat-capacity curves back the physically
adapted baseline model and the synthetic data generator. Interpolation is
piecewise linear with endpoint clamping, which is how handbook steel
tables are normally consumed.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import DegenerateFitError, InvalidArgumentError

CONDUCTIVITY = "conductivity"  # W/(m*K)
DENSITY = "density"  # kg/m^3
HEAT_CAPACITY = "heat_capacity"  # J/(kg*K)

_KINDS = (CONDUCTIVITY, DENSITY, HEAT_CAPACITY)


@dataclass(frozen=True)
class PropertyTable:
    """Ordered (temperature K, value) samples of one material property."""

    points: Tuple[Tuple[float, float], ...]
    property_kind: str

    def __post_init__(self):
        if self.property_kind not in _KINDS:
            raise InvalidArgumentError(f"unknown property_kind {self.property_kind!r}")
        if len(self.points) < 2:
            raise InvalidArgumentError("property table needs at least 2 points")
        temps = [t for t, _ in self.points]
        if any(b <= a for a, b in zip(temps, temps[1:])):
            raise InvalidArgumentError("table temperatures must be strictly increasing")
        if any(v <= 0 for _, v in self.points):
            raise InvalidArgumentError("table values must be strictly positive")

    @property
    def temperatures(self):
        return np.array([t for t, _ in self.points])

    @property
    def values(self):
        return np.array([v for _, v in self.points])


@dataclass(frozen=True)
class MaterialModel:
    """Bundle of the three property tables for one material."""

    lambda_table: PropertyTable
    rho_table: PropertyTable
    c_table: PropertyTable
    name: str = "unnamed"

    def __post_init__(self):
        expected = (
            (self.lambda_table, CONDUCTIVITY),
            (self.rho_table, DENSITY),
            (self.c_table, HEAT_CAPACITY),
        )
        for table, kind in expected:
            if table.property_kind != kind:
                raise InvalidArgumentError(
                    f"table of kind {table.property_kind!r} used where {kind!r} expected"
                )


def interpolate_property(table: PropertyTable, T: float) -> float:
    """Piecewise-linear interpolation, clamped to endpoint values outside
    the table range."""
    if not (math.isfinite(T) and T > 0):
        raise InvalidArgumentError("T must be finite and positive")
    return float(np.interp(T, table.temperatures, table.values))


def fit_polynomial(points: Sequence[Tuple[float, float]], degree: int):
    """Least-squares polynomial fit; coefficients returned lowest-degree
    first. The classical table-based adaptation baseline uses this."""
    if not 1 <= degree <= 5:
        raise InvalidArgumentError("degree must be in [1, 5]")
    if len(points) <= degree:
        raise InvalidArgumentError("need more points than the polynomial degree")
    t = np.array([p[0] for p in points], dtype=float)
    v = np.array([p[1] for p in points], dtype=float)
    vander = np.vander(t, degree + 1, increasing=True)
    coeffs, _, rank, _ = np.linalg.lstsq(vander, v, rcond=None)
    if rank < degree + 1:
        raise DegenerateFitError("rank-deficient normal system (collapsed abscissae?)")
    return coeffs


def physical_coefficients(material: MaterialModel, T: float):
    """Evaluate the conduction/capacity coefficient pair at temperature T:
    phi = lambda(T), omega = rho(T) * c(T)."""
    phi = interpolate_property(material.lambda_table, T)
    omega = interpolate_property(material.rho_table, T) * interpolate_property(
        material.c_table, T
    )
    return phi, omega


def load_property_table(path, property_kind: str) -> PropertyTable:
    """Read a table from a `T,value` CSV file (temperatures in K, UTF-8)."""
    points = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header.replace(" ", "") != "T,value":
            raise InvalidArgumentError(f"bad property table header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            t_str, v_str = line.split(",")
            points.append((float(t_str), float(v_str)))
    return PropertyTable(points=tuple(points), property_kind=property_kind)


def default_carbon_steel() -> MaterialModel:
    """Built-in smooth, positive, temperature-varying carbon-steel stand-in
    used by the synthetic benchmark. The numbers are handbook-plausible but
    are not tied to any particular grade."""
    lam = PropertyTable(
        points=(
            (300.0, 54.0),
            (500.0, 47.0),
            (700.0, 40.0),
            (900.0, 33.0),
            (1100.0, 29.0),
            (1300.0, 27.0),
            (1500.0, 26.0),
        ),
        property_kind=CONDUCTIVITY,
    )
    rho = PropertyTable(
        points=(
            (300.0, 7870.0),
            (600.0, 7790.0),
            (900.0, 7700.0),
            (1200.0, 7610.0),
            (1500.0, 7520.0),
        ),
        property_kind=DENSITY,
    )
    c = PropertyTable(
        points=(
            (300.0, 450.0),
            (500.0, 520.0),
            (700.0, 590.0),
            (900.0, 650.0),
            (1100.0, 680.0),
            (1300.0, 700.0),
            (1500.0, 710.0),
        ),
        property_kind=HEAT_CAPACITY,
    )
    return MaterialModel(lambda_table=lam, rho_table=rho, c_table=c, name="carbon-steel")
