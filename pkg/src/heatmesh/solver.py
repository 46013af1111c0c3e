"""Forward simulation of the 2D transient temperature field.

The time step is split into two locally-one-dimensional implicit solves:
a tridiagonal sweep along Ox for every row (producing the half layer) and
a sweep along Oy for every column (producing the next whole layer). The
x = 0 and y = y_max faces exchange heat convectively and radiatively with
the ambient fields T1/T2; the opposite faces carry prescribed fluxes
(zero by default). Radiative terms are linearized by lagging them one
layer.

Two coefficient providers are supported: a MaterialModel, re-evaluated
each step at the field's volume-average temperature, and a trainable
ParamTrajectory with independent per-step coefficients for each axis.
"""

import warnings
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from . import _kernels
from .errors import (
    InvalidArgumentError,
    SingularSweepError,
    UnstableClosureError,
)
from .grid import SpatialGrid, TimeGrid
from .materials import MaterialModel, physical_coefficients

STEFAN_BOLTZMANN = 5.67e-8  # W/(m^2 K^4)

# Floor keeping the capacity-role parameter away from zero under training
# updates; scaled by TrainConfig when a different parameter scale is used.
OMEGA_MIN = 1e-12


@dataclass(frozen=True)
class BoundaryConditions:
    """Ambient fields and exchange coefficients for the two active faces.

    T1 drives the x = 0 face, T2 the y = y_max face. q1 enters the Oy sweep
    start (y = 0), q2 the Ox closure (x = x_max); both default to zero.
    """

    T1: float  # K
    T2: float  # K
    kappa1: float = 0.0  # W/(m^2 K)
    kappa2: float = 0.0
    eps1: float = 0.0
    eps2: float = 0.0
    sigma: float = STEFAN_BOLTZMANN
    q1: float = 0.0  # W/m^2
    q2: float = 0.0

    def __post_init__(self):
        if self.T1 <= 0 or self.T2 <= 0:
            raise InvalidArgumentError("ambient temperatures must be positive")
        if self.kappa1 < 0 or self.kappa2 < 0:
            raise InvalidArgumentError("heat-transfer coefficients must be >= 0")
        for name, eps in (("eps1", self.eps1), ("eps2", self.eps2)):
            if not 0.0 <= eps <= 1.0:
                raise InvalidArgumentError(f"{name} must lie in [0, 1]")
        if self.sigma != STEFAN_BOLTZMANN:
            raise InvalidArgumentError("sigma is fixed to the physical constant")


@dataclass
class TemperatureField:
    """Node temperatures on the spatial grid at one time level."""

    values: np.ndarray  # (nx+1, ny+1), K
    step: int = 0
    half: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise InvalidArgumentError("field values must be a 2D matrix")
        if not np.all(np.isfinite(self.values)) or np.any(self.values <= 0):
            raise InvalidArgumentError("field temperatures must be finite and positive")


@dataclass
class ParamTrajectory:
    """Per-step trainable coefficient sequences for both axes.

    phi_* plays the conductivity role, omega_* the volumetric heat
    capacity role. Entries stay positive; omega is clamped at omega_min.
    """

    phi_x: np.ndarray
    omega_x: np.ndarray
    phi_y: np.ndarray
    omega_y: np.ndarray
    omega_min: float = OMEGA_MIN

    def __post_init__(self):
        for name in ("phi_x", "omega_x", "phi_y", "omega_y"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(self.phi_x)
        if any(len(getattr(self, a)) != n for a in ("omega_x", "phi_y", "omega_y")):
            raise InvalidArgumentError("trajectory sequences must share one length")
        if self.omega_min <= 0:
            raise InvalidArgumentError("omega_min must be positive")
        if np.any(self.phi_x <= 0) or np.any(self.phi_y <= 0):
            raise InvalidArgumentError("phi entries must be positive")
        if np.any(self.omega_x < self.omega_min) or np.any(self.omega_y < self.omega_min):
            raise InvalidArgumentError("omega entries must be >= omega_min")

    def __len__(self):
        return len(self.phi_x)

    @classmethod
    def constant(cls, phi, omega, n_steps, omega_min=OMEGA_MIN):
        ones = np.ones(n_steps)
        return cls(phi * ones, omega * ones, phi * ones, omega * ones, omega_min)

    def l1_norm(self):
        return float(
            np.abs(self.phi_x).sum()
            + np.abs(self.omega_x).sum()
            + np.abs(self.phi_y).sum()
            + np.abs(self.omega_y).sum()
        )


@dataclass
class SweepCoefficients:
    """Forward-sweep alpha/beta sequences along one line."""

    alpha: np.ndarray  # dimensionless
    beta: np.ndarray  # K

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        if np.any(np.abs(self.alpha) >= 1.0):
            warnings.warn(
                "sweep alpha left (0,1): diagonal dominance violated",
                RuntimeWarning,
                stacklevel=2,
            )


@dataclass
class StateTape:
    """Per-step quantities cached during a simulation for gradient replay.

    alpha/beta pairs are taken at the probed line's penultimate sweep node
    (the node feeding the boundary closure) for each axis.
    """

    hx: float
    hy: float
    tau: float
    sigma: float
    probe: Tuple[int, int]
    phi_x: np.ndarray
    omega_x: np.ndarray
    phi_y: np.ndarray
    omega_y: np.ndarray
    alpha_x: np.ndarray
    beta_x: np.ndarray
    alpha_y: np.ndarray
    beta_y: np.ndarray
    t_probe: np.ndarray  # probe readout at whole layers, length n_steps+1
    t_half: np.ndarray  # probe readout at half layers, length n_steps
    delta_x: np.ndarray
    delta_y: np.ndarray
    q2: np.ndarray
    t2: np.ndarray
    kappa2: np.ndarray
    eps2: np.ndarray

    @property
    def n_steps(self):
        return len(self.phi_x)


@dataclass
class SimulationResult:
    final: TemperatureField
    tape: Optional[StateTape]
    probe_history: np.ndarray  # probe readout at whole layers, length n_steps+1


def tridiag_row_coeffs(phi, omega, h, tau, T_prev):
    """Tridiagonal row coefficients for one interior node.

    A = C = phi/h^2, B = 2 phi/h^2 + omega/tau, F = -(omega/tau) T_prev;
    B > A + C holds for any positive inputs (strict diagonal dominance).
    """
    if phi <= 0 or omega <= 0 or h <= 0 or tau <= 0:
        raise InvalidArgumentError("phi, omega, h and tau must be positive")
    a = phi / (h * h)
    b = 2.0 * a + omega / tau
    f = -(omega / tau) * T_prev
    return a, b, a, f


def sweep_start_x(phi, omega, bc: BoundaryConditions, hx, tau, T_surface_prev):
    """Initial sweep coefficients on the x = 0 face (convective + radiative
    exchange with T1; radiative term lagged at the previous layer)."""
    den = omega * hx * hx + 2.0 * tau * (phi + bc.kappa1 * hx)
    alpha0 = 2.0 * phi * tau / den
    beta0 = (
        omega * hx * hx * T_surface_prev
        + 2.0 * tau * bc.kappa1 * hx * bc.T1
        + 2.0 * tau * bc.eps1 * bc.sigma * hx * (bc.T1**4 - T_surface_prev**4)
    ) / den
    return alpha0, beta0


def sweep_start_y(phi, omega, bc: BoundaryConditions, hy, tau, T_surface_prev):
    """Initial sweep coefficients on the y = 0 face (prescribed flux q1)."""
    a = phi / omega
    den = hy * hy + 2.0 * a * tau
    alpha0 = 2.0 * a * tau / den
    beta0 = hy * hy * T_surface_prev / den + 2.0 * a * tau * hy * bc.q1 / (phi * den)
    return alpha0, beta0


def forward_sweep(line_prev, start, phi, omega, h, tau) -> SweepCoefficients:
    """Run the forward recursion along one line of previous-layer values.

    Returns alpha/beta for nodes 0..m-1 where m is the closing index.
    """
    line_prev = np.asarray(line_prev, dtype=float)
    m = len(line_prev) - 1
    if m < 2:
        raise InvalidArgumentError("sweep line needs at least 3 nodes")
    alpha = np.empty(m)
    beta = np.empty(m)
    alpha[0], beta[0] = start
    for l in range(1, m):
        a, b, c, f = tridiag_row_coeffs(phi, omega, h, tau, line_prev[l])
        pivot = b - c * alpha[l - 1]
        if abs(pivot) < 1e-300:
            raise SingularSweepError(f"near-zero pivot at node {l}")
        alpha[l] = a / pivot
        beta[l] = (c * beta[l - 1] - f) / pivot
    return SweepCoefficients(alpha=alpha, beta=beta)


def _g1(T_prev, alpha, beta, phi, omega, q2, hx, tau):
    """Closing temperature on the Ox line (half-layer state equation)."""
    a = phi / omega
    den = phi * hx * hx + 2.0 * a * tau * phi * (1.0 - alpha)
    if den <= 0:
        raise UnstableClosureError("non-positive Ox closure denominator")
    return (
        2.0 * a * tau * phi * beta - 2.0 * a * tau * hx * q2 + hx * hx * phi * T_prev
    ) / den


def _g2(T_prev, alpha, beta, phi, omega, kappa2, eps2, sigma, T2, hy, tau):
    """Closing temperature on the Oy line (whole-layer state equation);
    the radiative term is lagged at the incoming layer."""
    den = 2.0 * tau * phi * (1.0 - alpha) + 2.0 * tau * kappa2 * hy + omega * hy * hy
    if den <= 0:
        raise UnstableClosureError("non-positive Oy closure denominator")
    return (
        2.0 * phi * tau * beta
        + 2.0 * tau * kappa2 * hy * T2
        + omega * hy * hy * T_prev
        + 2.0 * tau * eps2 * sigma * hy * (T2**4 - T_prev**4)
    ) / den


def closing_temperature_x(T_node_prev, sweep: SweepCoefficients, phi, omega, bc, hx, tau):
    """Boundary value at the Ox closing node, from the last sweep pair."""
    return _g1(T_node_prev, sweep.alpha[-1], sweep.beta[-1], phi, omega, bc.q2, hx, tau)


def closing_temperature_y(T_node_prev, sweep: SweepCoefficients, phi, omega, bc, hy, tau):
    """Boundary value at the Oy closing node, from the last sweep pair."""
    return _g2(
        T_node_prev,
        sweep.alpha[-1],
        sweep.beta[-1],
        phi,
        omega,
        bc.kappa2,
        bc.eps2,
        bc.sigma,
        bc.T2,
        hy,
        tau,
    )


def back_substitute(sweep: SweepCoefficients, T_closing):
    """Backward recursion T_l = alpha_l T_{l+1} + beta_l from the closing
    node down to index 0."""
    m = len(sweep.alpha)
    out = np.empty(m + 1)
    out[m] = T_closing
    for l in range(m - 1, -1, -1):
        out[l] = sweep.alpha[l] * out[l + 1] + sweep.beta[l]
    return out


def _delta_x(phi, omega, alpha, hx, tau):
    """Per-step multiplicative contribution factor for the Ox system."""
    a = phi / omega
    return hx * hx * phi / (phi * hx * hx + 2.0 * a * tau * phi * (1.0 - alpha))


def _delta_y(phi, omega, alpha, kappa2, eps2, sigma, hy, tau):
    """Per-step multiplicative contribution factor for the Oy system."""
    x = 2.0 * tau * phi * (1.0 - alpha) + 2.0 * tau * kappa2 * hy + omega * hy * hy
    return omega * hy * hy / x - 4.0 * np.sqrt(2.0 * tau * eps2 * sigma * hy / x)


def _step_reference(values, params, bc, spatial, tau, probe):
    """adi step composed from the public per-line operations. Slow; used by
    tests and as the fallback when the compiled kernel is disabled."""
    phi_x, omega_x, phi_y, omega_y = params
    nx, ny = spatial.nx, spatial.ny
    half = np.empty_like(values)
    tape5 = np.empty(5)
    for q in range(ny + 1):
        line = values[:, q]
        start = sweep_start_x(phi_x, omega_x, bc, spatial.hx, tau, line[0])
        sweep = forward_sweep(line, start, phi_x, omega_x, spatial.hx, tau)
        closing = closing_temperature_x(line[nx], sweep, phi_x, omega_x, bc, spatial.hx, tau)
        half[:, q] = back_substitute(sweep, closing)
        if q == probe[1]:
            tape5[0] = sweep.alpha[-1]
            tape5[1] = sweep.beta[-1]
    full = np.empty_like(values)
    for k in range(nx + 1):
        line = half[k, :]
        start = sweep_start_y(phi_y, omega_y, bc, spatial.hy, tau, line[0])
        sweep = forward_sweep(line, start, phi_y, omega_y, spatial.hy, tau)
        closing = closing_temperature_y(line[ny], sweep, phi_y, omega_y, bc, spatial.hy, tau)
        full[k, :] = back_substitute(sweep, closing)
        if k == probe[0]:
            tape5[2] = sweep.alpha[-1]
            tape5[3] = sweep.beta[-1]
    tape5[4] = half[probe[0], probe[1]]
    return half, full, tape5


def _step_fast(values, params, bc, spatial, tau, probe):
    phi_x, omega_x, phi_y, omega_y = params
    half = np.empty_like(values)
    full = np.empty_like(values)
    tape5 = np.empty(5)
    _kernels.adi_step_kernel(
        values,
        spatial.hx,
        spatial.hy,
        tau,
        phi_x,
        omega_x,
        phi_y,
        omega_y,
        bc.T1,
        bc.T2,
        bc.kappa1,
        bc.kappa2,
        bc.eps1,
        bc.eps2,
        bc.sigma,
        bc.q1,
        bc.q2,
        probe[0],
        probe[1],
        half,
        full,
        tape5,
    )
    return half, full, tape5


def default_probe(spatial: SpatialGrid) -> Tuple[int, int]:
    """Center of the y = y_max face (the radiatively heated surface)."""
    return (spatial.nx // 2, spatial.ny)


def probe_readout(field: TemperatureField, probe: Tuple[int, int]) -> float:
    """Temperature at the configured probe node."""
    k, q = probe
    nx, ny = field.values.shape[0] - 1, field.values.shape[1] - 1
    if not (0 <= k <= nx and 0 <= q <= ny):
        raise InvalidArgumentError(f"probe {probe} outside grid {nx}x{ny}")
    return float(field.values[k, q])


def adi_step(
    field: TemperatureField,
    params: Tuple[float, float, float, float],
    bc: BoundaryConditions,
    spatial: SpatialGrid,
    time: TimeGrid,
    use_kernel: bool = True,
) -> TemperatureField:
    """Advance the field one whole time step (Ox sweeps, then Oy sweeps)."""
    probe = default_probe(spatial)
    step_fn = _step_fast if use_kernel else _step_reference
    _, full, _ = step_fn(field.values, params, bc, spatial, time.tau, probe)
    return TemperatureField(values=full, step=field.step + 1, half=False)


def _resolve_params(provider, values, n):
    if isinstance(provider, MaterialModel):
        mean_t = float(values.mean())
        phi, omega = physical_coefficients(provider, mean_t)
        return phi, omega, phi, omega
    return (
        provider.phi_x[n],
        provider.omega_x[n],
        provider.phi_y[n],
        provider.omega_y[n],
    )


def simulate(
    T0: float,
    provider: Union[MaterialModel, ParamTrajectory],
    bc: Union[BoundaryConditions, Sequence[BoundaryConditions]],
    spatial: SpatialGrid,
    time: TimeGrid,
    tape_requested: bool = False,
    probe: Optional[Tuple[int, int]] = None,
    use_kernel: bool = True,
) -> SimulationResult:
    """Run the split-step scheme from a uniform initial field.

    ``bc`` is a single BoundaryConditions or one per step (a schedule).
    In physical mode the coefficients are re-evaluated each step at the
    volume-average field temperature; in parametric mode the trajectory
    must cover at least ``time.n_steps`` entries (extra entries are an
    untouched suffix).
    """
    n_steps = time.n_steps
    if isinstance(provider, ParamTrajectory) and len(provider) < n_steps:
        raise InvalidArgumentError("trajectory shorter than the time horizon")
    if isinstance(bc, BoundaryConditions):
        schedule = [bc] * n_steps
    else:
        schedule = list(bc)
        if len(schedule) < n_steps:
            raise InvalidArgumentError("boundary schedule shorter than the horizon")
    if probe is None:
        probe = default_probe(spatial)
    if not (0 <= probe[0] <= spatial.nx and 0 <= probe[1] <= spatial.ny):
        raise InvalidArgumentError(f"probe {probe} outside the grid")
    if not (T0 > 0 and np.isfinite(T0)):
        raise InvalidArgumentError("T0 must be finite and positive")

    values = np.full((spatial.nx + 1, spatial.ny + 1), float(T0))
    step_fn = _step_fast if use_kernel else _step_reference
    history = np.empty(n_steps + 1)
    history[0] = values[probe[0], probe[1]]

    tape = None
    if tape_requested:
        z = lambda: np.empty(n_steps)
        tape = StateTape(
            hx=spatial.hx,
            hy=spatial.hy,
            tau=time.tau,
            sigma=STEFAN_BOLTZMANN,
            probe=probe,
            phi_x=z(),
            omega_x=z(),
            phi_y=z(),
            omega_y=z(),
            alpha_x=z(),
            beta_x=z(),
            alpha_y=z(),
            beta_y=z(),
            t_probe=history,
            t_half=z(),
            delta_x=z(),
            delta_y=z(),
            q2=z(),
            t2=z(),
            kappa2=z(),
            eps2=z(),
        )

    for n in range(n_steps):
        bc_n = schedule[n]
        params = _resolve_params(provider, values, n)
        _, values, tape5 = step_fn(values, params, bc_n, spatial, time.tau, probe)
        history[n + 1] = values[probe[0], probe[1]]
        if tape is not None:
            tape.phi_x[n], tape.omega_x[n], tape.phi_y[n], tape.omega_y[n] = params
            tape.alpha_x[n], tape.beta_x[n] = tape5[0], tape5[1]
            tape.alpha_y[n], tape.beta_y[n] = tape5[2], tape5[3]
            tape.t_half[n] = tape5[4]
            tape.delta_x[n] = _delta_x(params[0], params[1], tape5[0], spatial.hx, time.tau)
            tape.delta_y[n] = _delta_y(
                params[2],
                params[3],
                tape5[2],
                bc_n.kappa2,
                bc_n.eps2,
                bc_n.sigma,
                spatial.hy,
                time.tau,
            )
            tape.q2[n] = bc_n.q2
            tape.t2[n] = bc_n.T2
            tape.kappa2[n] = bc_n.kappa2
            tape.eps2[n] = bc_n.eps2

    final = TemperatureField(values=values, step=n_steps, half=False)
    return SimulationResult(final=final, tape=tape, probe_history=history)


def save_field(field: TemperatureField, path):
    """Write a field snapshot: one CSV row per y index, columns along x,
    Kelvin, 9 significant digits."""
    values = field.values
    ny = values.shape[1] - 1
    with open(path, "w", encoding="utf-8") as fh:
        for q in range(ny + 1):
            fh.write(",".join(f"{v:.9g}" for v in values[:, q]) + "\n")


def load_field(path) -> TemperatureField:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    return TemperatureField(values=np.array(rows).T)
