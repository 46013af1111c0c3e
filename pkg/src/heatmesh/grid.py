"""Uniform spatial and temporal discretizations.

Every other module operates on these two grids: a rectangular node grid
over the billet cross-section and a uniform time axis. Both are immutable
after construction and safe to share between threads.
"""

from dataclasses import dataclass

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform rectangular grid over [0, x_max] x [0, y_max].

    ``nx``/``ny`` count grid *steps* per axis, so there are ``nx + 1``
    nodes along Ox (indices 0..nx) and ``ny + 1`` along Oy.
    """

    hx: float  # step along Ox, m
    hy: float  # step along Oy, m
    nx: int
    ny: int
    x_max: float  # m
    y_max: float  # m

    def __post_init__(self):
        if self.nx < 3:
            raise InvalidArgumentError("nx must be >= 3")
        if self.ny < 3:
            raise InvalidArgumentError("ny must be >= 3")
        if self.hx <= 0:
            raise InvalidArgumentError("hx must be positive")
        if self.hy <= 0:
            raise InvalidArgumentError("hy must be positive")
        if abs(self.hx * self.nx - self.x_max) > 1e-12 * max(self.x_max, 1.0):
            raise InvalidArgumentError("hx * nx must equal x_max")
        if abs(self.hy * self.ny - self.y_max) > 1e-12 * max(self.y_max, 1.0):
            raise InvalidArgumentError("hy * ny must equal y_max")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time axis: n_steps steps of length tau covering [0, t_max]."""

    tau: float  # s
    n_steps: int
    t_max: float  # s

    def __post_init__(self):
        if self.n_steps < 0:
            raise InvalidArgumentError("n_steps must be >= 0")
        if self.tau <= 0:
            raise InvalidArgumentError("tau must be positive")
        if abs(self.tau * self.n_steps - self.t_max) > 1e-12 * max(self.t_max, 1.0):
            raise InvalidArgumentError("tau * n_steps must equal t_max")


def build_grids(x_max, y_max, t_max, nx, ny, n_steps):
    """Build the spatial and temporal grids from domain extents and counts.

    Steps are derived as hx = x_max/nx, hy = y_max/ny, tau = t_max/n_steps,
    so the grids close on the domain exactly.
    """
    for name, value in (("x_max", x_max), ("y_max", y_max), ("t_max", t_max)):
        if not (value > 0):
            raise InvalidArgumentError(f"{name} must be strictly positive")
    for name, value, low in (("nx", nx, 3), ("ny", ny, 3), ("n_steps", n_steps, 1)):
        if value != int(value):
            raise InvalidArgumentError(f"{name} must be an integer")
        if int(value) < low:
            raise InvalidArgumentError(f"{name} must be >= {low}")
    nx, ny, n_steps = int(nx), int(ny), int(n_steps)
    spatial = SpatialGrid(
        hx=x_max / nx, hy=y_max / ny, nx=nx, ny=ny, x_max=x_max, y_max=y_max
    )
    time = TimeGrid(tau=t_max / n_steps, n_steps=n_steps, t_max=t_max)
    return spatial, time
