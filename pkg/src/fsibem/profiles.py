"""Radial weight profiles produced by the space-time Galerkin testing.

Pairing the piecewise-linear time ansatz with box/delta test functions
and the retarded kernel turns every time integral into a radial weight
supported on three consecutive distance shells [t_{k-2}, t_{k+1}].  In
the scaled variable u = r/dt - k the three weights are

  box second difference  P(u) = +1, -2, +1          on the three shells
  hat difference         L(u) = u-1, 1-2(u+1)+1..., piecewise linear
  quadratic spline       B(u) = C^1 bump, B = integral of L

P appears with 1/r kernels, L with 1/r..1/r^3, and dt*B is exactly the
weight obtained from double time integration (value dt/2 at the two
interior knots, zero at the support ends).
"""

from __future__ import annotations

import numpy as np


def quadratic_time_weight(r, k: int, dt: float):
    """Piecewise-quadratic retarded weight of lag k, evaluated at r >= 0.

    Implements the three-shell formula with indicators on E_k, E_{k-1},
    E_{k-2}; shells with negative index are empty, which clamps the
    support at r = 0.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)

    def chi(l):
        if l < 0:
            return np.zeros_like(r, dtype=bool)
        return (r >= l * dt) & (r <= (l + 1) * dt)

    # outer shells: (2 dt)^-1 (r - (k+1) dt)^2 and (2 dt)^-1 (r - (k-2) dt)^2
    m = chi(k)
    out = np.where(m, (r - (k + 1) * dt) ** 2 / (2 * dt), out)
    m = chi(k - 2)
    out = np.where(m, (r - (k - 2) * dt) ** 2 / (2 * dt), out)
    # middle shell: -(2 dt)^-1 (2 r^2 - 2 r (t_{k-1} + t_k) + t_{k-1}^2 + t_k^2 - 2 dt^2)
    m = chi(k - 1)
    mid = (
        -2 * r**2
        + 2 * r * ((k - 1) * dt + k * dt)
        - (((k - 1) * dt) ** 2 + (k * dt) ** 2)
        + 2 * dt**2
    ) / (2 * dt)
    out = np.where(m, mid, out)
    return out if out.ndim else float(out)


def spline_profile(u):
    """Unit quadratic spline B with support [-2, 1]; dt*B(r/dt - k) equals
    :func:`quadratic_time_weight`."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = (u >= 0) & (u <= 1)
    out = np.where(m, 0.5 * (1 - u) ** 2, out)
    m = (u >= -1) & (u < 0)
    out = np.where(m, 0.5 * (-2 * u**2 - 2 * u + 1), out)
    m = (u >= -2) & (u < -1)
    out = np.where(m, 0.5 * (u + 2) ** 2, out)
    return out


def hat_diff_profile(u):
    """Continuous piecewise-linear profile L = B'; knots 0,1,-1,0."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = (u >= 0) & (u <= 1)
    out = np.where(m, u - 1.0, out)
    m = (u >= -1) & (u < 0)
    out = np.where(m, -2.0 * u - 1.0, out)
    m = (u >= -2) & (u < -1)
    out = np.where(m, u + 2.0, out)
    return out


def box_diff_profile(u):
    """Second difference of box indicators: +1, -2, +1 on the three shells."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    out = np.where((u >= 0) & (u <= 1), 1.0, out)
    out = np.where((u >= -1) & (u < 0), -2.0, out)
    out = np.where((u >= -2) & (u < -1), 1.0, out)
    return out


def shell_polynomials(k: int, dt: float):
    """Per-shell polynomial factors of the four operator families.

    For shell E_{k-j}, j = 0,1,2, returns the coefficients of the
    radial polynomials multiplying the base kernels:

      single layer  (on 1/(4 pi r)):        r/dt - (k+1) | (2k-1) - 2r/dt | r/dt - (k-2)
      double layer, hat part (on n.(x-y)/(4 pi r^3)): same three
      double layer, box part (on n.(x-y)/(4 pi r^3)): -r/dt | +2r/dt | -r/dt
      adjoint shell part (on n.(x-y)/(4 pi r^3)):  r((k+1) - r/dt) | r(2r/dt - (2k-1)) | r((k-2) - r/dt)
      hypersingular normal part (on (nx.ny)/(4 pi r)): -1/dt | +2/dt | -1/dt
      time weight piece (on .../(4 pi r^3) or r^-1):  quadratic per shell

    Returned as a dict of lists of np.polynomial.Polynomial.
    """
    from numpy.polynomial import Polynomial as P

    lin = [
        P([-(k + 1), 1 / dt]),
        P([2 * k - 1, -2 / dt]),
        P([-(k - 2), 1 / dt]),
    ]
    box = [P([c / dt]) for c in (1.0, -2.0, 1.0)]
    # Y weight restricted to each shell, as a polynomial in r
    yk = [
        P([(k + 1) ** 2 * dt / 2, -(k + 1), 1 / (2 * dt)]),
        P([dt - ((k - 1) ** 2 + k**2) * dt / 2, (2 * k - 1), -1 / dt]),
        P([(k - 2) ** 2 * dt / 2, -(k - 2), 1 / (2 * dt)]),
    ]
    return {"lin": lin, "box": box, "yweight": yk}
