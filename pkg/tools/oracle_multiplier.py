"""Standalone oracles for the pseudo-sign sweep and the L-matrix bracket.

Pure numpy/scipy; run directly to print the frozen values used in
tests/test_multiplier.py:

    python3 tools/oracle_multiplier.py
"""

import numpy as np
from scipy import integrate


# ---- brute-force pseudo-sign --------------------------------------------


def rho_brute(delta_col, m_col, coords, dt, T):
    """Literal sup over lattice s in [-T, t] for one w-column.

    Shares the sweep's A(s) + B(t) decomposition (max over prefixes is
    associative, so enumerating all s gives the same floats) and the
    exact s = t candidate -m(t).
    """
    n = len(coords)
    i0 = int(np.nonzero(coords >= -T)[0][0])
    ihalf = np.zeros(n)
    ihalf[i0:] = integrate.cumulative_trapezoid(
        m_col[i0:], dx=dt, initial=0.0) / (2.0 * T)
    out = np.empty(n)
    for i in range(i0, n):
        best = -np.inf
        for s in range(i0, i + 1):
            cand = delta_col[s] - ihalf[s] - m_col[s]
            if cand > best:
                best = cand
        out[i] = best - delta_col[i] + ihalf[i]
        if -m_col[i] > out[i]:
            out[i] = -m_col[i]
    out[:i0] = -m_col[:i0]
    return out


def demo_constant_m():
    """delta = 0, m = mu: rho_T(t) = mu (t + T)/2T - mu on [-T, T]."""
    n, dt, T, mu = 16, 0.5, 2.0, 0.3
    coords = (np.arange(n) - n // 2) * dt
    rho = rho_brute(np.zeros(n), np.full(n, mu), coords, dt, T)
    formula = mu * (coords + T) / (2.0 * T) - mu
    win = np.abs(coords) <= T
    print("constant-m column (n=16, dt=0.5, T=2, mu=0.3):")
    print("  max |brute - formula| on window :",
          float(np.max(np.abs(rho[win] - formula[win]))))
    print("  rho(-T) =", float(rho[coords.tolist().index(-2.0)]),
          " rho(0) =", float(rho[n // 2]),
          " rho(T) =", float(rho[coords.tolist().index(2.0)]))
    print("  rho(3.5) beyond window (continuation) =", float(rho[-1]),
          " formula:", float(formula[-1]))


def demo_increasing_delta():
    """delta strictly increasing, m = 0 -> rho identically zero."""
    n, dt, T = 16, 0.5, 2.0
    coords = (np.arange(n) - n // 2) * dt
    delta = np.tanh(coords)
    rho = rho_brute(delta, np.zeros(n), coords, dt, T)
    print("increasing delta, m = 0: max |rho| =", float(np.max(np.abs(rho))))


def demo_discrete_commutator():
    """T d/dt (delta + rho) >= m/2 - eps_grid with eps_grid <= 2 max(m) dt."""
    n, dt, T = 64, 0.125, 2.0
    coords = (np.arange(n) - n // 2) * dt
    delta = np.clip(coords, -2.0, 2.0)
    m = 0.2 + 0.05 * np.abs(delta)
    rho = rho_brute(delta, m, coords, dt, T)
    b = delta + rho
    win = np.nonzero(np.abs(coords) <= T)[0]
    lhs = T * np.diff(b[win]) / dt
    rhs = m[win][:-1] / 2.0 - 2.0 * m.max() * dt
    print("discrete commutator margin (>= 0 wanted):",
          float(np.min(lhs - rhs)))


# ---- finite-difference Poisson bracket -----------------------------------


def fd_1d(vals, axis, spacing, scale=1.0):
    """4th-order first derivative, one-sided at the edges (non-wrapping)."""
    v = np.moveaxis(vals, axis, 0)
    n = v.shape[0]
    out = np.empty_like(v)
    c = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
    for i in range(n):
        if 2 <= i <= n - 3:
            out[i] = sum(ck * v[i + k] for ck, k in zip(c, range(-2, 3)))
        elif i < 2:
            cf = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
            out[i] = sum(ck * v[i + k] for ck, k in zip(cf, range(5)))
        else:
            cb = np.array([25.0, -48.0, 36.0, -16.0, 3.0]) / 12.0
            out[i] = sum(ck * v[i - k] for ck, k in zip(cb, range(5)))
    return np.moveaxis(out, 0, axis) * (scale / spacing)


def demo_bracket_radius():
    """a11 = 1 + x1, a22 = 1: margin = (1 + x1) xi1^2 + xi2^2.

    Ball scan with c1_max = 1: the first violating lattice point is
    x1 = -1.5 (margin (1 - 1.5) * (2 pi)^2 ~ -19.7), so the largest
    feasible ball radius is sqrt(2) with c1 = 0.
    """
    nx, ex = 16, 8.0
    sx = ex / nx
    x = (np.arange(nx) - nx // 2) * sx
    sxi = 2.0 * np.pi / ex
    xi = (np.arange(nx) - nx // 2) * sxi
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    margin_x = np.where(1.0 + X1 >= 0.0, 0.0,
                        (1.0 + X1) * np.max(xi ** 2))
    dist = np.hypot(X1, X2)
    order = np.argsort(dist.ravel(), kind="stable")
    dsort = dist.ravel()[order]
    msort = np.minimum.accumulate(margin_x.ravel()[order])
    radius, c1 = 0.0, 0.0
    for r in np.unique(dsort):
        grp = np.nonzero(dsort <= r)[0][-1]
        if msort[grp] >= -1.0:
            radius, c1 = float(r), max(0.0, -float(msort[grp]))
        else:
            break
    print("ball scan (a11 = 1 + x1): radius =", radius, " c1 =", c1,
          " (sqrt(2) =", float(np.sqrt(2.0)), ")")


def demo_lambda_scale():
    """eps h^{1/2} <L(x - x0), xi>/T at the documented sample point."""
    eps, h, T = 1.0, 0.04, 1.0
    val = eps * np.sqrt(h) * (0.5 * 2.0) / T
    print("lambda arithmetic (eps=1, h=0.04, T=1, (x-x0) xi = 1):", val)


if __name__ == "__main__":
    demo_constant_m()
    demo_increasing_delta()
    demo_discrete_commutator()
    demo_bracket_radius()
    demo_lambda_scale()
