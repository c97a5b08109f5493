"""Multiplier assembly: pseudo-sign sweep, commutator matrix and Wick bundle.

The pseudo-sign rho_T repairs the monotonicity of delta on a time
window [-T, T]: for each w-column

    rho_T(t,w) = sup over lattice s in [-T, t] of
        delta(s,w) - delta(t,w) + (1/2T) int_s^t m dr - m(s,w)

so that delta + rho_T = (running max) + (1/2T) int_0^t m dr is the sum
of a nondecreasing sweep and an explicit ramp, giving the discrete
commutator bound T d/dt(delta + rho_T) >= m/2 up to quadrature error.
The sweep keeps a running maximum per column, which *is* the exhaustive
sup by associativity of max; the s = t candidate is re-added in exact
form so |rho_T| <= m holds to the last bit on monotone input.

The matrix L inverts the quadratic coefficient table of A at a base
point, making the sampled Poisson bracket {A, <L(x - x0), xi>} dominate
|xi|^2 - c1 on a reported lattice ball.  lambda_T is the rescaled pairing
eps h^{1/2} <L(x - x0), xi>/T, tapered to zero over one grid cell outside
|x - x0| <= T and outside the dual ball |xi| <= cap (default 1/h), since
the lattice has no ambient test-function support to lean on.

B_T = delta + rho_T + lambda_T is Wick quantized into a Hermitian
operator whose Weyl symbol decomposes as the Gaussian regularizations
delta_1 + rho_1 plus lambda_T (the pairing is bilinear, hence a fixed
point of the regularization).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ._accel import jit_enabled
from .conditions import _x_axes, _xi_axes
from .phase_grid import PhaseGrid, SymbolField, fd_derivative
from .quantize import DiscreteOperator, gaussian_regularize, wick_quantize
from .weights import WeightField, _check_same_grid

try:
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag instead
    _HAVE_NUMBA = False

#: Default lambda scale; the estimate layer only needs *some* eps in (0, 1].
DEFAULT_EPSILON = 0.1

#: Default cap on the bracket defect when searching the validity ball.
DEFAULT_C1_MAX = 1.0

_HERMITIAN_TOL = 1e-10


# ---- pseudo-sign ---------------------------------------------------------

if _HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _rho_sweep_jit(delta2d, ihalf2d, m2d, out):  # pragma: no cover
        T, W = delta2d.shape
        for w in prange(W):
            run = -np.inf
            for i in range(T):
                g = delta2d[i, w] - ihalf2d[i, w] - m2d[i, w]
                if g > run:
                    run = g
                out[i, w] = run - delta2d[i, w] + ihalf2d[i, w]


def _rho_sweep_numpy(delta2d, ihalf2d, m2d, out):
    g = delta2d - ihalf2d - m2d
    run = np.maximum.accumulate(g, axis=0)
    out[...] = run - delta2d + ihalf2d


def compute_rho(delta: WeightField, m: WeightField, T: float) -> WeightField:
    """Pseudo-sign rho_T from the forward running-max sweep.

    Returns a WeightField (role "rho_T", the window recorded as info
    entry "T") defined on the whole t-lattice: below t = -T the sup has
    no admissible s, so the field takes the degenerate s = t value -m(t)
    (seamless with the sweep, whose first window value is -m up to one
    rounding ulp above); above t = +T the sweep simply continues (the sup
    still ranges over admissible s >= -T), which keeps
    T d/dt(delta + rho_T) >= m/2 valid past the window.  For delta/m
    from the weight pipeline |rho_T| <= m holds pointwise on the whole
    lattice, and the sweep equals the brute-force sup over every
    lattice s bit for bit.
    """
    grid = delta.grid
    _check_same_grid(grid, m.grid)
    if delta.h != m.h:
        raise ValueError("delta and m carry different h parameters")
    T = float(T)
    if T <= 0.0:
        raise ValueError("window half-width T must be positive")
    t_ax = grid.t_axis
    if T > grid.dims[t_ax].extent / 2.0:
        raise ValueError(
            f"window half-width T={T:g} exceeds the t extent "
            f"{grid.dims[t_ax].extent:g}"
        )
    if np.any(m.values < 0.0):
        raise ValueError("m must be nonnegative")

    shape = list(np.broadcast_shapes(delta.values.shape, m.values.shape))
    shape[t_ax] = grid.shape[t_ax]
    dv = np.ascontiguousarray(np.broadcast_to(delta.values, shape))
    mv = np.ascontiguousarray(np.broadcast_to(m.values, shape))
    Tn = shape[t_ax]
    d2 = np.ascontiguousarray(np.moveaxis(dv, t_ax, 0)).reshape(Tn, -1)
    m2 = np.ascontiguousarray(np.moveaxis(mv, t_ax, 0)).reshape(Tn, -1)

    coords = grid.axis_coords(t_ax)
    i0 = int(np.nonzero(coords >= -T)[0][0])
    dt = grid.dims[t_ax].spacing
    iwin = integrate.cumulative_trapezoid(
        m2[i0:], dx=dt, axis=0, initial=0.0) / (2.0 * T)
    dwin = np.ascontiguousarray(d2[i0:])
    mwin = np.ascontiguousarray(m2[i0:])
    iwin = np.ascontiguousarray(iwin)
    owin = np.empty_like(dwin)
    if _HAVE_NUMBA and jit_enabled():
        _rho_sweep_jit(dwin, iwin, mwin, owin)
    else:
        _rho_sweep_numpy(dwin, iwin, mwin, owin)
    np.maximum(owin, -mwin, out=owin)  # the s = t candidate, in exact form

    out = np.empty_like(d2)
    out[i0:] = owin
    out[:i0] = -m2[:i0]
    rest = tuple(shape[:t_ax] + shape[t_ax + 1:])
    vals = np.moveaxis(out.reshape((Tn,) + rest), 0, t_ax)
    return WeightField(grid, np.ascontiguousarray(vals), "rho_T", delta.h,
                       info=(("T", T),))


# ---- commutator matrix ---------------------------------------------------


@dataclass(frozen=True)
class LMatrixReport:
    """Inverse coefficient matrix with its bracket validity ball.

    ``L`` inverts the sampled quadratic coefficients at the snapped base
    point; ``validity_radius`` is the largest lattice ball around the
    leaf coordinates ``x0`` on which the sampled Poisson bracket
    {A, <L(x - x0), xi>} stays >= |xi|^2 - c1_max, and ``c1`` is the
    defect actually measured on that ball (0 when the bracket dominates
    |xi|^2 outright).
    """

    L: np.ndarray
    x0: tuple[float, ...]
    validity_radius: float
    c1: float
    c1_max: float

    def __post_init__(self):
        L = np.asarray(self.L, dtype=np.float64)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError("L must be a square matrix")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))

    @property
    def d(self) -> int:
        return self.L.shape[0]


def _snap_base_point(grid: PhaseGrid, w0) -> list[int]:
    names = grid.axis_names[:grid.ndim_base]
    if w0:
        for name in w0:
            if name not in names:
                raise ValueError(f"unknown base axis {name!r} in the base point")
    idx = []
    for ax in range(grid.ndim_base):
        target = float(w0.get(names[ax], 0.0)) if w0 else 0.0
        idx.append(int(np.argmin(np.abs(grid.axis_coords(ax) - target))))
    return idx


def compute_L_matrix(a_coeffs, w0=None, *,
                     c1_max: float = DEFAULT_C1_MAX) -> LMatrixReport:
    """Invert the quadratic coefficient table and scan its validity ball.

    ``a_coeffs`` is a d x d table of real, xi-independent SymbolFields
    on one grid (d = number of leaf axes), the coefficients of
    A = sum a_jk xi_j xi_k.  ``w0`` maps base-axis names to coordinates
    and is snapped to the nearest lattice point (omitted axes snap to 0).
    The bracket uses analytic xi-derivatives of the symmetrized table and
    lattice derivatives of the coefficients in x, so constant tables are
    handled exactly.
    """
    rows = [list(r) for r in a_coeffs]
    d = len(rows)
    if d == 0 or any(len(r) != d for r in rows):
        raise ValueError("coefficient table must be square")
    grid = rows[0][0].grid
    xax = _x_axes(grid)
    xiax = _xi_axes(grid)
    if len(xax) == 0:
        raise ValueError("grid has no leaf (x-role) axes")
    if len(xax) != d:
        raise ValueError(
            f"{d}x{d} coefficient table but the grid has {len(xax)} leaf axes")
    for r in rows:
        for fld in r:
            _check_same_grid(grid, fld.grid)
            if not fld.is_real(0.0):
                raise ValueError("coefficients must be real-valued")
            if any(fld.values.shape[ax] != 1
                   for ax in range(grid.ndim_base, grid.ndim)):
                raise ValueError(
                    "coefficients must not depend on the dual variables")

    idx = _snap_base_point(grid, w0)
    x0 = tuple(float(grid.axis_coords(ax)[idx[ax]]) for ax in xax)

    C = np.empty((d, d))
    for j in range(d):
        for k in range(d):
            v = rows[j][k].values
            sel = tuple(idx[ax] if v.shape[ax] > 1 else 0
                        for ax in range(grid.ndim_base))
            C[j, k] = v[sel + (0,) * grid.ndim_base].real
    scale = max(1.0, float(np.abs(C).max()))
    if float(np.abs(C - C.T).max()) > 1e-9 * scale:
        raise ValueError("coefficient matrix is not symmetric at the base point")
    try:
        L = np.linalg.inv(C)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "singular coefficient matrix at the base point") from exc
    if not np.isfinite(L).all() or np.linalg.cond(C) > 1e12:
        raise ValueError("singular coefficient matrix at the base point")

    # sampled bracket {A, <L(x - x0), xi>} - |xi|^2 on the full lattice
    sym = [[0.5 * (rows[j][k].values.real + rows[k][j].values.real)
            for k in range(d)] for j in range(d)]
    XI = [grid.coord_field(xiax[k]) for k in range(d)]
    xrel = [grid.coord_field(xax[k]) - x0[k] for k in range(d)]
    margin = -sum(XI[k] ** 2 for k in range(d))
    for j in range(d):
        dA_dxi_j = 2.0 * sum(sym[j][k] * XI[k] for k in range(d))
        margin = margin + sum(L[j, k] * XI[k] for k in range(d)) * dA_dxi_j
    for j in range(d):
        # fd_derivative is g-sharp normalized; undo the frame factor so the
        # bracket pairs coordinate-unit derivatives with coordinate xi.
        unscale = 1.0 / grid.gsharp_factor(xax[j])
        dA_dx_j = 0.0
        for k in range(d):
            for l in range(d):
                cf = SymbolField.from_values(
                    grid, sym[k][l].astype(np.complex128))
                dA_dx_j = dA_dx_j + (fd_derivative(cf, xax[j]).values.real
                                     * unscale * XI[k] * XI[l])
        margin = margin - sum(L[j, k] * xrel[k] for k in range(d)) * dA_dx_j

    other = tuple(ax for ax in range(grid.ndim) if ax not in xax)
    marg_x = np.broadcast_to(margin, grid.shape).min(axis=other)
    mesh = np.meshgrid(*[grid.axis_coords(ax) for ax in xax], indexing="ij")
    dist = np.sqrt(sum((mg - x0[k]) ** 2 for k, mg in enumerate(mesh)))
    order = np.argsort(dist.ravel(), kind="stable")
    runmin = np.minimum.accumulate(marg_x.ravel()[order])
    dsort = dist.ravel()[order]
    uniq = np.unique(dsort)
    lasts = np.searchsorted(dsort, uniq, side="right") - 1
    feas = runmin[lasts] >= -float(c1_max)
    if bool(feas[0]):
        k = len(uniq) - 1 if feas.all() else int(np.argmin(feas)) - 1
    else:
        k = 0  # report the center ball even when it already violates the cap
    return LMatrixReport(L, x0, float(uniq[k]),
                         float(max(0.0, -runmin[lasts[k]])), float(c1_max))


# ---- lambda term ----------------------------------------------------------


def _one_cell_taper(dist: np.ndarray, radius: float, cell: float) -> np.ndarray:
    """1 inside ``radius``, cosine-squared down to an exact 0 one cell out."""
    t = np.clip((dist - radius) / cell, 0.0, 1.0)
    return np.where(t >= 1.0, 0.0, np.cos(0.5 * np.pi * t) ** 2)


def compute_lambda(L, epsilon: float, T: float, h: float | None,
                   grid: PhaseGrid, *, x0=None,
                   xi_cap: float | None = None) -> SymbolField:
    """The commutator term eps h^{1/2} <L(x - x0), xi>/T as a SymbolField.

    The pairing runs over the leaf axes and their duals.  The symbol is
    exactly zero on the plane x = x0 and is tapered to zero over one
    grid cell outside the marked region |x - x0| <= T and outside the
    dual ball |xi| <= xi_cap (default 1/h); inside both it is the plain
    bilinear pairing.
    """
    epsilon = float(epsilon)
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon:g}")
    T = float(T)
    if T <= 0.0:
        raise ValueError("window half-width T must be positive")
    h = grid.h if h is None else float(h)
    if h <= 0.0:
        raise ValueError("h must be positive")
    xax = _x_axes(grid)
    xiax = _xi_axes(grid)
    d = len(xax)
    if d == 0:
        raise ValueError("grid has no leaf (x-role) axes")
    L = np.asarray(L, dtype=np.float64)
    if L.shape != (d, d):
        raise ValueError(f"L must be {d}x{d} for this grid, got {L.shape}")

    names = grid.axis_names
    if x0 is None:
        x0v = [0.0] * d
    elif hasattr(x0, "get"):
        for name in x0:
            if name not in [names[ax] for ax in xax]:
                raise ValueError(f"unknown leaf axis {name!r} in x0")
        x0v = [float(x0.get(names[ax], 0.0)) for ax in xax]
    else:
        x0v = [float(v) for v in x0]
        if len(x0v) != d:
            raise ValueError(f"x0 must supply {d} leaf coordinates")

    XI = [grid.coord_field(xiax[k]) for k in range(d)]
    xrel = [grid.coord_field(xax[k]) - x0v[k] for k in range(d)]
    pair = sum(sum(L[j, k] * xrel[k] for k in range(d)) * XI[j]
               for j in range(d))
    vals = (epsilon * np.sqrt(h) / T) * pair

    cap = (1.0 / h) if xi_cap is None else float(xi_cap)
    cell_x = max(grid.dims[ax].spacing for ax in xax)
    cell_xi = max(grid.dims[ax].spacing for ax in xiax)
    vals = vals * _one_cell_taper(np.sqrt(sum(r ** 2 for r in xrel)), T, cell_x)
    vals = vals * _one_cell_taper(np.sqrt(sum(q ** 2 for q in XI)), cap, cell_xi)
    return SymbolField.from_values(grid, vals.astype(np.complex128))


# ---- the bundle -----------------------------------------------------------


@dataclass(frozen=True)
class MultiplierBundle:
    """Immutable record of one multiplier construction.

    Carries the window T, the lambda scale epsilon, the component fields
    rho_T and lambda_T, the full symbol B_T with its Wick operator, the
    L-matrix report (when a lambda term was built) and the Gaussian
    regularizations delta_1, rho_1 of the Wick--Weyl decomposition
    b = delta_1 + rho_1 + lambda.
    """

    grid: PhaseGrid
    T: float
    epsilon: float | None
    rho_T: WeightField
    lambda_T: SymbolField
    B_T: SymbolField
    b_op: DiscreteOperator
    l_report: LMatrixReport | None = None
    delta1: SymbolField | None = None
    rho1: SymbolField | None = None

    def __post_init__(self):
        if self.T <= 0.0:
            raise ValueError("window half-width T must be positive")
        if self.epsilon is not None and not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in (0, 1]")
        for fld in (self.rho_T, self.lambda_T, self.B_T):
            _check_same_grid(self.grid, fld.grid)
        _check_same_grid(self.grid, self.b_op.grid)
        bv = self.B_T.values
        if float(np.max(np.abs(bv.imag))) > 1e-12 * (1.0 + float(np.max(np.abs(bv.real)))):
            raise ValueError("multiplier symbol must be real-valued")
        if not self.b_op.is_hermitian(_HERMITIAN_TOL):
            raise ValueError("Wick multiplier operator failed the Hermitian check")

    @property
    def L(self) -> np.ndarray | None:
        return None if self.l_report is None else self.l_report.L

    @property
    def x0(self) -> tuple[float, ...] | None:
        return None if self.l_report is None else self.l_report.x0

    @property
    def validity_radius(self) -> float | None:
        return None if self.l_report is None else self.l_report.validity_radius

    def summary(self, include_norms: bool = True) -> dict:
        """JSON-serializable digest (window, scales, L, norm diagnostics)."""
        grid = self.grid
        out = {
            "T": self.T,
            "epsilon": self.epsilon,
            "L": None if self.L is None else self.L.tolist(),
            "x0": None if self.x0 is None else list(self.x0),
            "validity_radius": self.validity_radius,
            "c1": None if self.l_report is None else self.l_report.c1,
            "sup_B": float(np.max(np.abs(self.B_T.values.real))),
            "sup_rho": float(np.max(np.abs(self.rho_T.values))),
            "sup_lambda": float(np.max(np.abs(self.lambda_T.values.real))),
            "n_points": self.b_op.n_total,
            "grid": {
                "roles": [dim.role for dim in grid.base_dims],
                "counts": [dim.count for dim in grid.base_dims],
                "extents": [dim.extent for dim in grid.base_dims],
                "h": grid.h,
                "frame": grid.frame,
            },
        }
        if include_norms:
            mat = self.b_op.matrix
            out["op_norm"] = self.b_op.op_norm()
            out["hermitian_defect"] = float(np.linalg.norm(mat - mat.conj().T))
        return out


def build_multiplier(delta: WeightField, rho: WeightField,
                     lam: SymbolField | WeightField | None = None,
                     grid: PhaseGrid | None = None, *,
                     epsilon: float | None = None,
                     l_report: LMatrixReport | None = None,
                     m: WeightField | None = None,
                     T: float | None = None) -> MultiplierBundle:
    """Assemble B_T = delta + rho_T + lambda_T and Wick quantize it.

    ``T`` defaults to the window recorded on the rho field.  Passing the
    weight ``m`` re-checks |rho_T| <= m on the window before quantizing.
    ``lam`` may be omitted for models without leaf axes; the bundle then
    stores a zero lambda field and no L-report.
    """
    if grid is None:
        grid = delta.grid
    _check_same_grid(grid, delta.grid)
    _check_same_grid(grid, rho.grid)
    if T is None:
        T = rho.info_dict.get("T")
        if T is None:
            raise ValueError(
                "rho field does not record a window half-width; pass T=")
    T = float(T)

    if lam is None:
        lam_sf = SymbolField.constant(grid, 0.0)
    elif isinstance(lam, SymbolField):
        _check_same_grid(grid, lam.grid)
        lam_sf = lam
    else:
        _check_same_grid(grid, lam.grid)
        lam_sf = SymbolField.from_values(
            grid, np.asarray(lam.values, dtype=np.complex128))

    if m is not None:
        _check_same_grid(grid, m.grid)
        bad = np.abs(rho.values) > m.values
        t_ax = grid.t_axis
        if bad.shape[t_ax] == grid.shape[t_ax]:
            win = np.nonzero(np.abs(grid.axis_coords(t_ax)) <= T)[0]
            bad = np.take(bad, win, axis=t_ax)
        if bool(np.any(bad)):
            raise ValueError("pseudo-sign exceeds m inside the window")

    bvals = delta.values + rho.values + lam_sf.values
    B_T = SymbolField.from_values(grid, np.asarray(bvals, dtype=np.complex128))
    b_op = wick_quantize(B_T, provenance="multiplier")
    delta1 = gaussian_regularize(SymbolField.from_values(
        grid, delta.values.astype(np.complex128)))
    rho1 = gaussian_regularize(SymbolField.from_values(
        grid, rho.values.astype(np.complex128)))
    return MultiplierBundle(grid, T, epsilon, rho, lam_sf, B_T, b_op,
                            l_report=l_report, delta1=delta1, rho1=rho1)


def bundle_to_json(bundle: MultiplierBundle, path, *,
                   include_norms: bool = True) -> None:
    """Write the bundle summary as deterministic, sorted JSON."""
    with open(path, "w") as fh:
        json.dump(bundle.summary(include_norms=include_norms), fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
