"""Independent oracles for the estimate module, run before implementing it.

Hand-rolled quantities (triple-loop bilinear forms, direct FFT spectral
multipliers, literal inequality chains) computed against the already
tested grid/quantize/weights/multiplier machinery.  Printed values get
frozen into tests/test_estimate.py.
"""
import warnings

import numpy as np

import sys
sys.path.insert(0, "src")

from mlab.phase_grid import SymbolField, build_grid, fd_derivative
from mlab.quantize import (
    TruncationBiasWarning,
    gaussian_regularize,
    weyl_quantize,
    wick_quantize,
)
from mlab.symlang import eval_on_grid
from mlab.weights import compute_H, compute_h1, compute_m, signed_delta
from mlab.multiplier import build_multiplier, compute_rho

warnings.simplefilter("ignore", TruncationBiasWarning)

RNG = np.random.default_rng


def grid_ty(n=16, h=0.1):
    return build_grid({"dims": [["t", n], ["y", n]], "extents": [8.0, 6.0],
                       "h": h, "periodic": [False, False]})


def grid_tx(nx=16, h=0.1):
    return build_grid({"dims": [["t", 8], ["x", nx]], "extents": [4.0, 4.0],
                       "h": h, "periodic": [False, False]})


def norm2(grid, u):
    return float(np.sum(np.abs(u) ** 2) * grid.base_measure)


def inner(grid, a, b):
    return complex(np.sum(a * np.conj(b)) * grid.base_measure)


def bandlimited(grid, count, seed, frac=2.0 / 3.0):
    """Random vectors with FFT support inside |k| <= frac * Nyquist."""
    rng = RNG(seed)
    out = []
    shape = grid.base_shape
    for _ in range(count):
        spec = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        for ax, n in enumerate(shape):
            k = np.fft.fftfreq(n, d=1.0 / n)  # integer indices
            keep = np.abs(k) <= frac * (n // 2)
            sl = [None] * len(shape)
            sl[ax] = slice(None)
            spec = spec * keep[tuple(sl)]
        u = np.fft.ifftn(spec)
        u = u / np.sqrt(norm2(grid, u))
        out.append(u)
    return out


def packets(grid, count, seed, T):
    rng = RNG(seed)
    out = []
    for _ in range(count):
        u = np.ones(grid.base_shape, dtype=complex)
        for ax in range(grid.ndim_base):
            q = grid.axis_coords(ax)
            c = rng.uniform(-T / 2, T / 2)
            ext = grid.dims[ax].extent
            sig = ext / 8.0
            ncyc = grid.dims[ax].count // 2
            freq = rng.integers(-ncyc // 3, ncyc // 3 + 1) * 2 * np.pi / ext
            prof = np.exp(-((q - c) ** 2) / (2 * sig ** 2) + 1j * freq * q)
            shp = [1] * grid.ndim_base
            shp[ax] = len(q)
            u = u * prof.reshape(shp)
        u = u / np.sqrt(norm2(grid, u))
        out.append(u)
    return out


def dual_field(grid, vals):
    return SymbolField.from_values(grid, np.asarray(vals, dtype=complex))


def dx_matrices(grid):
    mats = []
    for i, d in enumerate(grid.base_dims):
        if d.role == "x":
            xi = grid.coord_field(grid.ndim_base + i).astype(complex)
            mats.append(weyl_quantize(dual_field(grid, xi)).matrix)
    return mats


def mu_field(grid):
    s = 1.0
    for i, d in enumerate(grid.base_dims):
        if d.role == "x":
            s = s + grid.coord_field(grid.ndim_base + i) ** 2
    return dual_field(grid, np.sqrt(grid.h) * s * np.ones([1] * grid.ndim))


def psi_matrix(grid):
    r2 = 0.0
    for ax in range(grid.ndim_base, grid.ndim):
        r2 = r2 + grid.coord_field(ax) ** 2
    rmax = np.sqrt(r2.max())
    r = np.sqrt(r2) / rmax
    s = np.clip((r - 2.0 / 3.0) / (1.0 / 6.0), 0.0, 1.0)
    psi = np.where(r >= 5.0 / 6.0, 1.0, np.sin(0.5 * np.pi * s) ** 2)
    psi = np.where(r <= 2.0 / 3.0, 0.0, psi)
    return weyl_quantize(dual_field(grid, psi)).matrix


def chi_cutoff(grid, T, x0=None):
    """Smooth support cutoff: 1 on 3/4 of the window, 0 outside it."""
    t = np.abs(grid.coord_field(grid.t_axis)) / T
    s = np.clip((t - 0.75) / 0.25, 0.0, 1.0)
    chi = np.where(t >= 1.0, 0.0, np.cos(0.5 * np.pi * s) ** 2)
    xs = [i for i, d in enumerate(grid.base_dims) if d.role == "x"]
    if xs:
        x0 = x0 or [0.0] * len(xs)
        d2 = 0.0
        for j, ax in enumerate(xs):
            d2 = d2 + (grid.coord_field(ax) - x0[j]) ** 2
        r = np.sqrt(d2) / T
        s = np.clip((r - 0.75) / 0.25, 0.0, 1.0)
        chi = chi * np.where(r >= 1.0, 0.0, np.cos(0.5 * np.pi * s) ** 2)
    # collapse dual singleton axes -> base-shaped
    return chi.reshape([n for n in chi.shape if n > 1] or [1]) \
        if False else np.broadcast_to(chi, grid.shape[:grid.ndim_base]
                                      + (1,) * grid.ndim_base)[
        (Ellipsis,) + (0,) * grid.ndim_base]


def weight_pipe(f):
    d = signed_delta(f)
    H = compute_H(f, d)
    m = compute_m(d, compute_h1(H))
    return d, H, m


def model(grid, f_expr, T, A_expr=None):
    f = eval_on_grid(f_expr, grid)
    delta, H, m = weight_pipe(f)
    rho = compute_rho(delta, m, T)
    bundle = build_multiplier(delta, rho, m=m)
    tau = dual_field(grid, grid.coord_field(grid.ndim_base
                                            + grid.t_axis).astype(complex))
    herm = tau.values
    if A_expr:
        herm = herm + eval_on_grid(A_expr, grid).values
    sym = SymbolField.from_values(
        grid, np.asarray(herm, dtype=complex)
        + 1j * np.broadcast_to(f.values, np.broadcast_shapes(
            np.shape(herm), f.values.shape)))
    Pstar = weyl_quantize(sym)
    return f, delta, m, bundle, Pstar


def estimate_rows(grid, bundle, Pstar, m, T, tests):
    h = grid.h
    chi = chi_cutoff(grid, T)
    dxs = dx_matrices(grid)
    m_w = wick_quantize(SymbolField.from_values(
        grid, m.values.astype(complex))).matrix
    mu_w = wick_quantize(mu_field(grid)).matrix
    psi = psi_matrix(grid)
    breg = gaussian_regularize(bundle.B_T)
    db = fd_derivative(breg, grid.t_axis).values.real \
        / grid.gsharp_factor(grid.t_axis)
    db_w = weyl_quantize(dual_field(grid, db.astype(complex))).matrix
    b = bundle.b_op.matrix
    P = Pstar.matrix
    dt = grid.dims[grid.t_axis].spacing
    msup = float(np.max(np.abs(m.values)))
    rows = []
    for u0 in tests:
        u = (chi * u0).reshape(-1)
        n2 = norm2(grid, u)
        lhs = h ** 0.5 * (norm2(grid, b @ u) + sum(norm2(grid, D @ u)
                                                   for D in dxs) + n2)
        im = T * complex(inner(grid, P @ u, b @ u)).imag
        mterm = complex(inner(grid, m_w @ u, u)).real
        muterm = complex(inner(grid, mu_w @ u, u)).real
        cut = norm2(grid, psi @ u)
        dbl = 0.5 * complex(inner(grid, db_w @ u, u)).real
        tol = 2.0 * dt * msup * n2
        rows.append((lhs, im, mterm, muterm, cut, dbl, tol, n2))
    return rows


def fit_c0(rows):
    c0 = 0.0
    for lhs, im, _, _, cut, _, _, _ in rows:
        numer = max(lhs - cut, 0.0)
        if numer == 0.0:
            continue
        if im <= 0.0:
            return float("inf")
        c0 = max(c0, numer / im)
    return c0


def main():
    # ---- A. bilinear triple loop on a 4-point lattice -----------------
    g4 = build_grid({"dims": [["t", 4]], "extents": [2.0], "h": 0.25,
                     "periodic": [False]})
    rng = RNG(5)
    M = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    u = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    acc = 0.0 + 0.0j
    for j in range(4):
        for k in range(4):
            acc += M[j, k] * u[k] * np.conj(v[j]) * g4.base_measure
    print("A. bilinear triple-loop value:", repr(acc))

    # ---- B. D_t is the exact spectral derivative ----------------------
    g8 = build_grid({"dims": [["t", 8]], "extents": [4.0], "h": 0.1,
                     "periodic": [False]})
    tau = dual_field(g8, g8.coord_field(1).astype(complex))
    Dt = weyl_quantize(tau).matrix
    t = g8.axis_coords(0)
    errs = []
    for k in range(-3, 4):
        w = 2 * np.pi * k / 4.0
        mode = np.exp(1j * w * t)
        errs.append(np.max(np.abs(Dt @ mode - w * mode)))
    print("B. D_t spectral exactness, max err:", max(errs))

    # ---- C. Hermitian-plus-skew split ---------------------------------
    gxx = build_grid({"dims": [["t", 8], ["x", 8], ["x", 8]],
                      "extents": [4.0, 4.0, 4.0], "h": 0.1,
                      "periodic": [False, False, False]})
    tau = gxx.coord_field(3).astype(complex)
    A = eval_on_grid("xi1^2 - xi2^2", gxx).values
    f = eval_on_grid("t * (1 + cos(x1))", gxx).values
    shape = np.broadcast_shapes(tau.shape, A.shape, f.shape)
    sym = SymbolField.from_values(gxx, np.broadcast_to(tau + A, shape)
                                  + 1j * np.broadcast_to(f, shape))
    P = weyl_quantize(sym).matrix
    herm = 0.5 * (P + P.conj().T)
    skew = 0.5 * (P - P.conj().T)
    ref_h = weyl_quantize(SymbolField.from_values(
        gxx, np.broadcast_to(tau + A, shape).astype(complex))).matrix
    ref_s = 1j * weyl_quantize(SymbolField.from_values(
        gxx, np.broadcast_to(f, shape).astype(complex))).matrix
    print("C. herm split err:", np.max(np.abs(herm - ref_h)),
          " skew split err:", np.max(np.abs(skew - ref_s)))

    # ---- D. mu domination constant ------------------------------------
    gx = grid_tx()
    mu = mu_field(gx)
    mu_w = wick_quantize(mu).matrix
    dxs = dx_matrices(gx)
    h = gx.h
    Ks = []
    for u in bandlimited(gx, 20, 0):
        uf = u.reshape(-1)
        lhs = abs(complex(inner(gx, mu_w @ uf, uf)))
        rhs = h ** 0.5 * (sum(norm2(gx, D @ uf) for D in dxs)
                          + norm2(gx, uf))
        Ks.append(lhs / rhs)
    print("D. mu-domination K: min %.6f max %.6f" % (min(Ks), max(Ks)))
    uc = np.ones(gx.base_shape, dtype=complex).reshape(-1)
    lhs = abs(complex(inner(gx, mu_w @ uc, uc)))
    rhs = h ** 0.5 * (sum(norm2(gx, D @ uc) for D in dxs) + norm2(gx, uc))
    print("   constant-u ratio:", lhs / rhs)

    # ---- E. wick domination -------------------------------------------
    gy = grid_ty()
    f, delta, m, bundle, Pstar = model(gy, "t * (1 + 0.5 * sin(eta1))", 2.0)
    m_w = wick_quantize(SymbolField.from_values(
        gy, m.values.astype(complex))).matrix
    half_w = weyl_quantize(SymbolField.from_values(
        gy, (0.5 * m.values).astype(complex))).matrix
    tests = bandlimited(gy, 20, 0)
    ratios = []
    for u in tests:
        uf = u.reshape(-1)
        den = complex(inner(gy, m_w @ uf, uf)).real
        num = abs(complex(inner(gy, half_w @ uf, uf)))
        ratios.append(num / den)
    print("E. wick domination c=m/2: max ratio", max(ratios))
    phase = eval_on_grid("cos(3*t + 1)", gy).values
    cw = weyl_quantize(SymbolField.from_values(
        gy, (m.values * phase).astype(complex))).matrix
    r2 = [abs(complex(inner(gy, cw @ u.reshape(-1), u.reshape(-1))))
          / complex(inner(gy, m_w @ u.reshape(-1), u.reshape(-1))).real
          for u in tests]
    print("   c=m*cos(3t+1): max ratio", max(r2))

    # ---- F/G. dbest margins + C0 sweep on the compliant |eta| model ---
    for label, expr in (("t*abs(eta1)", "t * abs(eta1)"),):
        for T in (4.0, 2.0, 1.0):
            f, delta, m, bundle, Pstar = model(gy, expr, T)
            tests = bandlimited(gy, 50, 0)
            rows = estimate_rows(gy, bundle, Pstar, m, T, tests)
            dbm = min(r[5] - r[2] / (4 * T) + r[6] for r in rows)
            worst = min(r[5] - r[2] / (4 * T) for r in rows)
            c0 = fit_c0(rows)
            print(f"F/G. {label} T={T}: min dbest margin+tol={dbm:.6g} "
                  f"(raw {worst:.6g}, tol {rows[0][6]:.4g}) C0={c0:.6g}")

    # ---- G2. model with leaf axes and A = xi^2 -------------------------
    fx, deltax, mx, bundlex, Px = model(gx, "t * (1 + 0.5 * cos(x1))", 2.0,
                                        A_expr="xi1^2")
    rows = estimate_rows(gx, bundlex, Px, mx, 2.0, bandlimited(gx, 20, 3))
    print("G2. leaf model C0:", fit_c0(rows),
          " min dbest margin+tol:",
          min(r[5] - r[2] / 8.0 + r[6] for r in rows))

    # ---- H. violating model: failing row search -----------------------
    fv, deltav, mv, bundlev, Pv = model(gy, "-t * abs(eta1)", 2.0)
    pk = packets(gy, 12, 1, 2.0)
    rows = estimate_rows(gy, bundlev, Pv, mv, 2.0, pk)
    bad = [(i, r[0] - r[4], r[1]) for i, r in enumerate(rows)
           if r[1] <= 0.0 and r[0] - r[4] > 0.0]
    print("H. violating model failing rows (idx, lhs-cut, im):",
          bad[:4], " fitted C0:", fit_c0(rows))

    # ---- I. lower-bound ingredient ------------------------------------
    f1w = weyl_quantize(SymbolField.from_values(
        gy, f.values.astype(complex))).matrix  # f from the last gy model
    f, delta, m, bundle, Pstar = model(gy, "t * abs(eta1)", 2.0)
    f1w = weyl_quantize(SymbolField.from_values(
        gy, eval_on_grid("t * abs(eta1)", gy).values.astype(complex))).matrix
    m_w = wick_quantize(SymbolField.from_values(
        gy, m.values.astype(complex))).matrix
    mu_w = wick_quantize(mu_field(gy)).matrix
    comp = bundle.b_op.matrix @ f1w
    Cs = []
    for u in bandlimited(gy, 30, 4):
        uf = u.reshape(-1)
        val = complex(inner(gy, comp @ uf, uf)).real
        den = complex(inner(gy, m_w @ uf, uf)).real \
            + complex(inner(gy, mu_w @ uf, uf)).real
        Cs.append(max(0.0, -val) / den)
    print("I. lower-bound measured C:", max(Cs))

    # ---- J. unit-scalar bitwise invariance ----------------------------
    f, delta, m, bundle, Pstar = model(gy, "t * abs(eta1)", 2.0)
    tests = bandlimited(gy, 3, 9)
    r1 = estimate_rows(gy, bundle, Pstar, m, 2.0, tests)
    r2 = estimate_rows(gy, bundle, Pstar, m, 2.0,
                       [1j * u for u in tests])
    print("J. i-scaling rows bitwise equal:",
          all(a == b for ra, rb in zip(r1, r2) for a, b in zip(ra, rb)))


if __name__ == "__main__":
    main()
