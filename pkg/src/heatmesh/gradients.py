"""Analytic derivatives of the boundary-closure state equations and
backpropagation of the terminal probe error through the time chain.

The scalar dynamical system being differentiated is the replay of the
recorded tape: per step, the Ox closure maps the probe state to the half
layer and the Oy closure maps it to the next whole layer, with the sweep
pairs (alpha, beta) frozen at their recorded values. All partials are
closed-form derivatives of those two closure formulas; a central
finite-difference harness doubles as their correctness oracle.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, InvalidTapeError
from .solver import STEFAN_BOLTZMANN, StateTape, _delta_x, _delta_y, _g1, _g2


@dataclass
class GradientSet:
    """Loss-gradient components per time step, for all four sequences."""

    d_phi_x: np.ndarray
    d_omega_x: np.ndarray
    d_phi_y: np.ndarray
    d_omega_y: np.ndarray

    def l2_norm(self):
        return float(
            math.sqrt(
                np.sum(self.d_phi_x**2)
                + np.sum(self.d_omega_x**2)
                + np.sum(self.d_phi_y**2)
                + np.sum(self.d_omega_y**2)
            )
        )


def _dT_x(phi, omega, alpha, hx, tau):
    return hx * hx / (2.0 * (phi * tau * (1.0 - alpha) / omega) + hx * hx)


def _dT_y(T, phi, omega, alpha, kappa2, eps2, sigma, hy, tau):
    x = 2.0 * tau * phi * (1.0 - alpha) + 2.0 * tau * kappa2 * hy + omega * hy * hy
    return hy * (hy * omega - 8.0 * eps2 * sigma * tau * T**3) / x


def _dphi_x(T, phi, omega, alpha, beta, q2, hx, tau):
    s = 2.0 * tau * (1.0 - alpha) / omega
    den = hx * hx + s * phi
    return (
        (2.0 * tau / omega)
        * (hx * hx * (beta - (1.0 - alpha) * T) + (1.0 - alpha) * 2.0 * tau * hx * q2 / omega)
        / (den * den)
    )


def _domega_x(T, phi, omega, alpha, beta, q2, hx, tau):
    den = omega * hx * hx + 2.0 * tau * phi * (1.0 - alpha)
    return (
        2.0
        * tau
        * hx
        * hx
        * (phi * ((1.0 - alpha) * T - beta) + hx * q2)
        / (den * den)
    )


def _dphi_y(T, phi, omega, alpha, beta, kappa2, eps2, sigma, T2, hy, tau):
    x = 2.0 * tau * phi * (1.0 - alpha) + 2.0 * tau * kappa2 * hy + omega * hy * hy
    g = _g2(T, alpha, beta, phi, omega, kappa2, eps2, sigma, T2, hy, tau)
    return (2.0 * tau / x) * (beta - (1.0 - alpha) * g)


def _domega_y(T, phi, omega, alpha, beta, kappa2, eps2, sigma, T2, hy, tau):
    x = 2.0 * tau * phi * (1.0 - alpha) + 2.0 * tau * kappa2 * hy + omega * hy * hy
    g = _g2(T, alpha, beta, phi, omega, kappa2, eps2, sigma, T2, hy, tau)
    return (hy * hy / x) * (T - g)


def dstate_dT(axis, *, phi, omega, alpha, h, tau, T=None, kappa2=0.0, eps2=0.0,
              sigma=STEFAN_BOLTZMANN):
    """Derivative of the closure state equation w.r.t. its own state."""
    if axis == "x":
        return _dT_x(phi, omega, alpha, h, tau)
    if axis == "y":
        if T is None:
            raise InvalidArgumentError("Oy derivative needs the lagged state T")
        return _dT_y(T, phi, omega, alpha, kappa2, eps2, sigma, h, tau)
    raise InvalidArgumentError(f"axis must be 'x' or 'y', got {axis!r}")


def dstate_dphi(axis, *, T, phi, omega, alpha, beta, h, tau, q2=0.0, kappa2=0.0,
                eps2=0.0, sigma=STEFAN_BOLTZMANN, T2=None):
    """Derivative of the closure state equation w.r.t. the conductivity-role
    parameter."""
    if axis == "x":
        return _dphi_x(T, phi, omega, alpha, beta, q2, h, tau)
    if axis == "y":
        if T2 is None:
            raise InvalidArgumentError("Oy derivative needs the ambient T2")
        return _dphi_y(T, phi, omega, alpha, beta, kappa2, eps2, sigma, T2, h, tau)
    raise InvalidArgumentError(f"axis must be 'x' or 'y', got {axis!r}")


def dstate_domega(axis, *, T, phi, omega, alpha, beta, h, tau, q2=0.0, kappa2=0.0,
                  eps2=0.0, sigma=STEFAN_BOLTZMANN, T2=None):
    """Derivative of the closure state equation w.r.t. the capacity-role
    parameter."""
    if axis == "x":
        return _domega_x(T, phi, omega, alpha, beta, q2, h, tau)
    if axis == "y":
        if T2 is None:
            raise InvalidArgumentError("Oy derivative needs the ambient T2")
        return _domega_y(T, phi, omega, alpha, beta, kappa2, eps2, sigma, T2, h, tau)
    raise InvalidArgumentError(f"axis must be 'x' or 'y', got {axis!r}")


def delta_coefficient(axis, *, phi, omega, alpha, h, tau, kappa2=0.0, eps2=0.0,
                      sigma=STEFAN_BOLTZMANN):
    """Per-step multiplicative contribution factor of a state to the next.

    For Ox this coincides with dstate_dT; the Oy form carries an extra
    radiative term (implemented as printed, see the repo notes)."""
    if axis == "x":
        return _delta_x(phi, omega, alpha, h, tau)
    if axis == "y":
        return _delta_y(phi, omega, alpha, kappa2, eps2, sigma, h, tau)
    raise InvalidArgumentError(f"axis must be 'x' or 'y', got {axis!r}")


def _check_tape(tape: StateTape):
    n = tape.n_steps
    arrays = (
        tape.phi_x, tape.omega_x, tape.phi_y, tape.omega_y,
        tape.alpha_x, tape.beta_x, tape.alpha_y, tape.beta_y,
        tape.t_half, tape.q2, tape.t2, tape.kappa2, tape.eps2,
    )
    if any(len(a) != n for a in arrays) or len(tape.t_probe) != n + 1:
        raise InvalidTapeError("tape arrays disagree on the step count")
    if not all(np.all(np.isfinite(a)) for a in arrays + (tape.t_probe,)):
        raise InvalidTapeError("tape contains non-finite entries")


def replay_states(tape: StateTape):
    """Forward replay of the scalar chain from the recorded initial probe
    value. Returns (whole-layer states xi[0..N], half-layer states)."""
    _check_tape(tape)
    n = tape.n_steps
    xi = np.empty(n + 1)
    xi_half = np.empty(n)
    xi[0] = tape.t_probe[0]
    for i in range(n):
        xi_half[i] = _g1(
            xi[i], tape.alpha_x[i], tape.beta_x[i], tape.phi_x[i], tape.omega_x[i],
            tape.q2[i], tape.hx, tape.tau,
        )
        xi[i + 1] = _g2(
            xi_half[i], tape.alpha_y[i], tape.beta_y[i], tape.phi_y[i], tape.omega_y[i],
            tape.kappa2[i], tape.eps2[i], tape.sigma, tape.t2[i], tape.hy, tape.tau,
        )
    return xi, xi_half


def replay_prediction(tape: StateTape) -> float:
    """Terminal probe value of the scalar-chain replay."""
    xi, _ = replay_states(tape)
    return float(xi[-1])


def backprop(tape: StateTape, residual: float) -> GradientSet:
    """Backpropagate the terminal squared-error gradient onto the per-step
    parameters.

    ``residual`` is y - prediction; the returned components are gradients
    of E = (y - prediction)^2 / 2, i.e. -residual times the sensitivity of
    the prediction. Half-layer (Ox) parameters are chained through the Oy
    step of the same index; earlier steps accumulate the product of the
    per-step state derivatives. The L1 term is deliberately not included
    here (the trainer owns it).
    """
    _check_tape(tape)
    n = tape.n_steps
    grads = GradientSet(
        d_phi_x=np.zeros(n),
        d_omega_x=np.zeros(n),
        d_phi_y=np.zeros(n),
        d_omega_y=np.zeros(n),
    )
    if residual == 0.0 or n == 0:
        return grads
    xi, xi_half = replay_states(tape)
    hx, hy, tau = tape.hx, tape.hy, tape.tau
    carry = 1.0  # d prediction / d xi_N
    for i in range(n - 1, -1, -1):
        phix, omx = tape.phi_x[i], tape.omega_x[i]
        phiy, omy = tape.phi_y[i], tape.omega_y[i]
        ax, bx = tape.alpha_x[i], tape.beta_x[i]
        ay, by = tape.alpha_y[i], tape.beta_y[i]
        k2, e2, t2 = tape.kappa2[i], tape.eps2[i], tape.t2[i]
        grads.d_phi_y[i] = -residual * carry * _dphi_y(
            xi_half[i], phiy, omy, ay, by, k2, e2, tape.sigma, t2, hy, tau
        )
        grads.d_omega_y[i] = -residual * carry * _domega_y(
            xi_half[i], phiy, omy, ay, by, k2, e2, tape.sigma, t2, hy, tau
        )
        carry_x = carry * _dT_y(xi_half[i], phiy, omy, ay, k2, e2, tape.sigma, hy, tau)
        grads.d_phi_x[i] = -residual * carry_x * _dphi_x(
            xi[i], phix, omx, ax, bx, tape.q2[i], hx, tau
        )
        grads.d_omega_x[i] = -residual * carry_x * _domega_x(
            xi[i], phix, omx, ax, bx, tape.q2[i], hx, tau
        )
        carry = carry_x * _dT_x(phix, omx, ax, hx, tau)
    return grads


@dataclass
class GradCheckReport:
    target: str
    trials: int
    max_rel_err: float
    worst_point: str
    tolerance: float

    @property
    def passed(self):
        return self.max_rel_err < self.tolerance

    def format_row(self):
        status = "ok" if self.passed else "FAIL"
        return (
            f"{self.target:<14} trials={self.trials:<4d} "
            f"max_rel_err={self.max_rel_err:.3e} tol={self.tolerance:.0e} "
            f"[{status}] worst: {self.worst_point}"
        )


def _rel_err(analytic, numeric):
    scale = max(abs(analytic), abs(numeric), 1e-30)
    return abs(analytic - numeric) / scale


def _central(f, p, rel=1e-6):
    h = rel * max(abs(p), 1.0)
    return (f(p + h) - f(p - h)) / (2.0 * h)


def _sample_point(rng):
    return dict(
        phi=rng.uniform(0.1, 100.0),
        omega=rng.uniform(0.1, 100.0),
        alpha=rng.uniform(0.0, 0.95),
        beta=rng.uniform(100.0, 2000.0),
        T=rng.uniform(300.0, 1600.0),
        h=rng.uniform(0.005, 0.1),
        tau=rng.uniform(0.1, 100.0),
        q2=rng.uniform(-1e4, 1e4),
        kappa2=rng.uniform(0.0, 200.0),
        eps2=rng.uniform(0.0, 1.0),
        T2=rng.uniform(300.0, 1600.0),
    )


def _single_step_check(target, trials, seed):
    rng = np.random.default_rng(seed)
    worst = (0.0, "")
    for _ in range(trials):
        p = _sample_point(rng)
        sig = STEFAN_BOLTZMANN
        cases = []
        if target == "dstate_dT":
            cases.append((
                _dT_x(p["phi"], p["omega"], p["alpha"], p["h"], p["tau"]),
                _central(lambda t: _g1(t, p["alpha"], p["beta"], p["phi"], p["omega"],
                                       p["q2"], p["h"], p["tau"]), p["T"]),
                "x",
            ))
            cases.append((
                _dT_y(p["T"], p["phi"], p["omega"], p["alpha"], p["kappa2"], p["eps2"],
                      sig, p["h"], p["tau"]),
                _central(lambda t: _g2(t, p["alpha"], p["beta"], p["phi"], p["omega"],
                                       p["kappa2"], p["eps2"], sig, p["T2"], p["h"],
                                       p["tau"]), p["T"]),
                "y",
            ))
        elif target == "dstate_dphi":
            cases.append((
                _dphi_x(p["T"], p["phi"], p["omega"], p["alpha"], p["beta"], p["q2"],
                        p["h"], p["tau"]),
                _central(lambda v: _g1(p["T"], p["alpha"], p["beta"], v, p["omega"],
                                       p["q2"], p["h"], p["tau"]), p["phi"]),
                "x",
            ))
            cases.append((
                _dphi_y(p["T"], p["phi"], p["omega"], p["alpha"], p["beta"],
                        p["kappa2"], p["eps2"], sig, p["T2"], p["h"], p["tau"]),
                _central(lambda v: _g2(p["T"], p["alpha"], p["beta"], v, p["omega"],
                                       p["kappa2"], p["eps2"], sig, p["T2"], p["h"],
                                       p["tau"]), p["phi"]),
                "y",
            ))
        elif target == "dstate_domega":
            cases.append((
                _domega_x(p["T"], p["phi"], p["omega"], p["alpha"], p["beta"], p["q2"],
                          p["h"], p["tau"]),
                _central(lambda v: _g1(p["T"], p["alpha"], p["beta"], p["phi"], v,
                                       p["q2"], p["h"], p["tau"]), p["omega"]),
                "x",
            ))
            cases.append((
                _domega_y(p["T"], p["phi"], p["omega"], p["alpha"], p["beta"],
                          p["kappa2"], p["eps2"], sig, p["T2"], p["h"], p["tau"]),
                _central(lambda v: _g2(p["T"], p["alpha"], p["beta"], p["phi"], v,
                                       p["kappa2"], p["eps2"], sig, p["T2"], p["h"],
                                       p["tau"]), p["omega"]),
                "y",
            ))
        for analytic, numeric, axis in cases:
            err = _rel_err(analytic, numeric)
            if err > worst[0]:
                worst = (err, f"axis={axis} {p}")
    return worst


def _backprop_check(trials, seed, nx=6, ny=6, n_steps=3):
    # Local import: the solver provides the forward pass for tape creation.
    from . import solver
    from .grid import build_grids

    rng = np.random.default_rng(seed)
    worst = (0.0, "")
    for trial in range(trials):
        side = rng.uniform(0.05, 0.2)
        spatial, time = build_grids(side, side, rng.uniform(10.0, 500.0), nx, ny, n_steps)
        bc = solver.BoundaryConditions(
            T1=rng.uniform(600.0, 1600.0),
            T2=rng.uniform(600.0, 1600.0),
            kappa1=rng.uniform(5.0, 100.0),
            kappa2=rng.uniform(5.0, 100.0),
            eps1=rng.uniform(0.1, 0.9),
            eps2=rng.uniform(0.1, 0.9),
        )
        params = solver.ParamTrajectory(
            phi_x=rng.uniform(1.0, 50.0, n_steps),
            omega_x=rng.uniform(1e4, 1e6, n_steps),
            phi_y=rng.uniform(1.0, 50.0, n_steps),
            omega_y=rng.uniform(1e4, 1e6, n_steps),
        )
        result = solver.simulate(
            rng.uniform(300.0, 600.0), params, bc, spatial, time, tape_requested=True
        )
        tape = result.tape
        target = replay_prediction(tape) + rng.uniform(-100.0, 100.0)
        residual = target - replay_prediction(tape)
        grads = backprop(tape, residual)
        analytic = {
            "phi_x": grads.d_phi_x, "omega_x": grads.d_omega_x,
            "phi_y": grads.d_phi_y, "omega_y": grads.d_omega_y,
        }
        for name, arr in (("phi_x", tape.phi_x), ("omega_x", tape.omega_x),
                          ("phi_y", tape.phi_y), ("omega_y", tape.omega_y)):
            for i in range(n_steps):
                saved = arr[i]

                def loss_at(v):
                    arr[i] = v
                    try:
                        pred = replay_prediction(tape)
                    finally:
                        arr[i] = saved
                    return 0.5 * (target - pred) ** 2

                numeric = _central(loss_at, saved, rel=1e-6)
                err = _rel_err(analytic[name][i], numeric)
                if err > worst[0]:
                    worst = (err, f"trial={trial} param={name}[{i}]")
    return worst


_TOLERANCES = {
    "dstate_dT": 1e-4,
    "dstate_dphi": 1e-4,
    "dstate_domega": 1e-4,
    "backprop": 1e-3,
}


def finite_difference_check(target: str, trials: int, seed: int = 0) -> GradCheckReport:
    """Compare an analytic derivative against central differences over
    seeded random points; returns the worst relative error found."""
    if trials < 1:
        raise InvalidArgumentError("trials must be >= 1")
    if target not in _TOLERANCES:
        raise InvalidArgumentError(f"unknown gradcheck target {target!r}")
    if target == "backprop":
        err, point = _backprop_check(trials, seed)
    else:
        err, point = _single_step_check(target, trials, seed)
    return GradCheckReport(
        target=target,
        trials=trials,
        max_rel_err=err,
        worst_point=point,
        tolerance=_TOLERANCES[target],
    )
