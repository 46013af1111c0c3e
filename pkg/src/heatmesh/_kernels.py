"""Numba-compiled fast path for the split-step sweep update.

The formulas here mirror solver.py's reference operations one-to-one; the
test suite asserts agreement between both paths on randomized fields.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def adi_step_kernel(
    T,
    hx,
    hy,
    tau,
    phix,
    omx,
    phiy,
    omy,
    T1,
    T2,
    k1,
    k2,
    e1,
    e2,
    sig,
    q1,
    q2,
    probe_k,
    probe_q,
    out_half,
    out_full,
    tape_out,
):
    """One full time step: implicit sweep along Ox into out_half, then along
    Oy into out_full. tape_out receives (alpha_x, beta_x, alpha_y, beta_y,
    T_half_probe) at the probed line's penultimate sweep nodes."""
    nx = T.shape[0] - 1
    ny = T.shape[1] - 1

    # Ox sweeps, one per row q, producing the half layer.
    A = phix / (hx * hx)
    B = 2.0 * A + omx / tau
    den0 = omx * hx * hx + 2.0 * tau * (phix + k1 * hx)
    alpha = np.empty(nx)
    alpha[0] = 2.0 * phix * tau / den0
    for l in range(1, nx):
        alpha[l] = A / (B - A * alpha[l - 1])
    ax = phix / omx
    beta = np.empty(nx)
    for q in range(ny + 1):
        t0 = T[0, q]
        beta[0] = (
            omx * hx * hx * t0
            + 2.0 * tau * k1 * hx * T1
            + 2.0 * tau * e1 * sig * hx * (T1**4 - t0**4)
        ) / den0
        for l in range(1, nx):
            f = -(omx / tau) * T[l, q]
            beta[l] = (A * beta[l - 1] - f) / (B - A * alpha[l - 1])
        tn = T[nx, q]
        out_half[nx, q] = (
            2.0 * ax * tau * phix * beta[nx - 1]
            - 2.0 * ax * tau * hx * q2
            + hx * hx * phix * tn
        ) / (phix * hx * hx + 2.0 * ax * tau * phix * (1.0 - alpha[nx - 1]))
        for l in range(nx - 1, -1, -1):
            out_half[l, q] = alpha[l] * out_half[l + 1, q] + beta[l]
        if q == probe_q:
            tape_out[0] = alpha[nx - 1]
            tape_out[1] = beta[nx - 1]

    # Oy sweeps, one per column k, producing the whole layer.
    Ay = phiy / (hy * hy)
    By = 2.0 * Ay + omy / tau
    ay = phiy / omy
    deny0 = hy * hy + 2.0 * ay * tau
    alphay = np.empty(ny)
    alphay[0] = 2.0 * ay * tau / deny0
    for l in range(1, ny):
        alphay[l] = Ay / (By - Ay * alphay[l - 1])
    betay = np.empty(ny)
    for k in range(nx + 1):
        t0 = out_half[k, 0]
        betay[0] = hy * hy * t0 / deny0 + 2.0 * ay * tau * hy * q1 / (phiy * deny0)
        for l in range(1, ny):
            f = -(omy / tau) * out_half[k, l]
            betay[l] = (Ay * betay[l - 1] - f) / (By - Ay * alphay[l - 1])
        tn = out_half[k, ny]
        out_full[k, ny] = (
            2.0 * phiy * tau * betay[ny - 1]
            + 2.0 * tau * k2 * hy * T2
            + omy * hy * hy * tn
            + 2.0 * tau * e2 * sig * hy * (T2**4 - tn**4)
        ) / (2.0 * tau * phiy * (1.0 - alphay[ny - 1]) + 2.0 * tau * k2 * hy + omy * hy * hy)
        for l in range(ny - 1, -1, -1):
            out_full[k, l] = alphay[l] * out_full[k, l + 1] + betay[l]
        if k == probe_k:
            tape_out[2] = alphay[ny - 1]
            tape_out[3] = betay[ny - 1]

    tape_out[4] = out_half[probe_k, probe_q]
