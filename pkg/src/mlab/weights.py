"""Phase-space weight pipeline: sign sets, signed distance, H, M and m.

Everything here lives on the sub-lattice (t, tau, y, eta) obtained by
reducing over the x-role axes; the weights H and M additionally vary
over x.  Symbols must be real and restricted to the characteristic
slice (no xi dependence).  All derivative inputs are g_sharp-normalized
through :func:`mlab.phase_grid.fd_derivative`, so the formulas below are
frame independent; mixing fields from different frames is rejected.

The signed distance uses the lattice sign sets

    X+ = { (t,w) : exists s <= t with max_x f(s,.,w) > 0 }
    X- = { (t,w) : exists s >= t with min_x f(s,.,w) < 0 }

and the convention that the sign is 0 on X0 = complement(X+ or X-) and
on the overlap X+ and X- (which is empty exactly when f satisfies the
one-way sign condition).  Zeroing the overlap keeps delta*f >= 0 exact
for arbitrary input fields.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ._accel import jit_enabled
from .conditions import VERDICT_PASS, _x_axes, _xi_axes, check_subr_psi
from .phase_grid import FRAMES, PhaseGrid, SymbolField, fd_derivative

try:
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag instead
    _HAVE_NUMBA = False

logger = logging.getLogger(__name__)

DEFAULT_KAPPA1 = 0.05
_DELTA_RTOL = 1e-12


class SignConditionWarning(UserWarning):
    """The symbol fed to the weight pipeline violates the sign condition."""


# ---- containers --------------------------------------------------------


@dataclass(frozen=True)
class WeightField:
    """A real scalar field on (a sub-lattice of) a PhaseGrid.

    ``values`` follows the SymbolField storage convention: one axis per
    grid axis, with axes the field is constant along compressed to
    length 1.  ``role`` names the quantity ("delta", "d", "H^{-1/2}",
    "H1^{-1/2}", "M", "m", "alpha", ...) and ``h`` snapshots the Planck
    parameter the field was built with.  ``info`` carries recorded
    scalars such as the gradient rescale factor or the measured C3.
    """

    grid: PhaseGrid
    values: np.ndarray
    role: str
    h: float
    info: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if np.iscomplexobj(self.values):
            raise ValueError("weight fields are real-valued")
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        if vals.ndim != self.grid.ndim:
            raise ValueError(
                f"field has {vals.ndim} axes but grid has {self.grid.ndim}"
            )
        for ax, n in enumerate(vals.shape):
            if n not in (1, self.grid.shape[ax]):
                raise ValueError(
                    f"axis {ax}: shape {n} inconsistent with grid count "
                    f"{self.grid.shape[ax]}"
                )
        if np.isnan(vals).any():
            raise ValueError("weight field contains NaN")

    @property
    def info_dict(self) -> dict:
        return dict(self.info)

    def full_values(self) -> np.ndarray:
        return np.broadcast_to(self.values, self.grid.shape)

    def constant_in(self, axis: int) -> bool:
        return self.values.shape[axis] == 1

    def __abs__(self) -> np.ndarray:
        return np.abs(self.values)


@dataclass(frozen=True)
class XSets:
    """Boolean sign-set masks on the (t, tau, y, eta) sub-lattice."""

    grid: PhaseGrid
    x_plus: np.ndarray
    x_minus: np.ndarray
    x_zero: np.ndarray

    def __post_init__(self):
        if not (self.x_plus.shape == self.x_minus.shape == self.x_zero.shape):
            raise ValueError("sign-set masks must share one shape")

    @property
    def overlap(self) -> np.ndarray:
        """Cells in both X+ and X-; empty iff the sign condition holds."""
        return self.x_plus & self.x_minus


# ---- validation helpers -------------------------------------------------


def _require_weight_input(f: SymbolField) -> np.ndarray:
    if np.max(np.abs(f.values.imag), initial=0.0) != 0.0:
        raise ValueError("weight pipeline needs a real-valued symbol")
    for ax in _xi_axes(f.grid):
        if f.depends_on(ax):
            raise ValueError(
                "weight fields live on the characteristic slice; restrict "
                "the symbol to xi = 0 first (no xi dependence allowed)"
            )
    return f.values.real


def _check_same_grid(a: PhaseGrid, b: PhaseGrid) -> None:
    if a is b or a == b:
        return
    if a.frame != b.frame and a.frame in FRAMES and b.frame in FRAMES:
        raise ValueError(
            f"frame mismatch: cannot mix {a.frame!r} and {b.frame!r} fields"
        )
    raise ValueError("fields live on different grids")


# ---- sign sets and signed distance --------------------------------------


def compute_x_sets(f: SymbolField) -> XSets:
    """Cumulative-in-t sign sets of a real symbol.

    X+ collects the leaves whose maximum has been strictly positive at
    some lattice time s <= t, X- those whose minimum goes strictly
    negative at some s >= t; X0 is the complement of the union.  The
    comparisons are exact (no tolerance): a leaf value of 0.0 is a zero.
    """
    grid = f.grid
    vals = _require_weight_input(f)
    xax = _x_axes(grid)
    if xax:
        mx = vals.max(axis=xax, keepdims=True)
        mn = vals.min(axis=xax, keepdims=True)
    else:
        mx = mn = vals
    t_ax = grid.t_axis
    x_plus = np.logical_or.accumulate(mx > 0.0, axis=t_ax)
    neg = np.flip(mn < 0.0, axis=t_ax)
    x_minus = np.flip(np.logical_or.accumulate(neg, axis=t_ax), axis=t_ax)
    return XSets(grid, x_plus, x_minus, ~(x_plus | x_minus))


def lattice_distance(xsets: XSets) -> WeightField:
    """g_sharp Euclidean distance to the nearest X0 lattice cell.

    Exact Euclidean distance transform with per-axis sampling equal to
    the g_sharp length of one lattice cell; +inf everywhere when X0 is
    empty.  Singleton (constant) axes of the masks contribute nothing,
    which agrees with the full-lattice distance because the mask is
    translation invariant along them.
    """
    grid = xsets.grid
    x0 = xsets.x_zero
    if not x0.any():
        d = np.full(x0.shape, np.inf)
    elif x0.all():
        d = np.zeros(x0.shape)
    else:
        sampling = [
            grid.dims[ax].spacing / grid.gsharp_factor(ax)
            for ax in range(grid.ndim)
        ]
        d = ndimage.distance_transform_edt(~x0, sampling=sampling)
    return WeightField(grid, d, "d", grid.h)


def signed_delta(f: SymbolField, h: float | None = None, *,
                 xsets: XSets | None = None, warn: bool = True) -> WeightField:
    """Signed, clamped distance delta = sgn(f) min(d, h^{-1/2}).

    The sign is the sign-set membership (+1 on X+ only, -1 on X- only,
    0 on X0 and on any X+/X- overlap), which is constant on leaves and
    guarantees delta*f >= 0 pointwise for any input.  When X0 is empty
    the distance is +inf and |delta| saturates at h^{-1/2}.

    A warning (not an error) is emitted when f violates the one-way
    sign condition, since every estimate downstream assumes it.
    """
    grid = f.grid
    h = grid.h if h is None else float(h)
    if xsets is None:
        xsets = compute_x_sets(f)
    if warn:
        report = check_subr_psi(f, orientation="Psi-bar")
        if report.verdict != VERDICT_PASS:
            warnings.warn(
                f"symbol violates the one-way sign condition "
                f"({report.verdict}); delta is still well defined but the "
                f"weight estimates lose their meaning",
                SignConditionWarning,
                stacklevel=2,
            )
    d = lattice_distance(xsets).values
    sign = np.zeros(xsets.x_plus.shape, dtype=np.float64)
    sign[xsets.x_plus & ~xsets.x_minus] = 1.0
    sign[xsets.x_minus & ~xsets.x_plus] = -1.0
    delta = sign * np.minimum(d, h ** -0.5)
    return WeightField(grid, delta, "delta", h)


# ---- derivative seminorm fields -----------------------------------------


def gradient_norm(f: SymbolField) -> WeightField:
    """Pointwise g_sharp norm of the first differential, |f'|."""
    grid = f.grid
    _require_weight_input(f)
    acc = np.zeros((1,) * grid.ndim)
    for ax in range(grid.ndim):
        if not f.depends_on(ax):
            continue
        g = fd_derivative(f, ax).values.real
        acc = acc + g * g
    return WeightField(grid, np.sqrt(acc), "|f'|", grid.h)


def hessian_norm(f: SymbolField) -> WeightField:
    """Pointwise Frobenius norm of the second differential, |f''|."""
    grid = f.grid
    _require_weight_input(f)
    deps = [ax for ax in range(grid.ndim) if f.depends_on(ax)]
    acc = np.zeros((1,) * grid.ndim)
    for pos, i in enumerate(deps):
        hii = fd_derivative(f, i, order=2).values.real
        acc = acc + hii * hii
        gi = fd_derivative(f, i)
        for j in deps[pos + 1:]:
            hij = fd_derivative(gi, j).values.real
            acc = acc + 2.0 * hij * hij
    return WeightField(grid, np.sqrt(acc), "|f''|", grid.h)


# ---- H, M, H1 ------------------------------------------------------------


def compute_H(f: SymbolField, delta: WeightField,
              h: float | None = None) -> WeightField:
    """Metric factor H^{-1/2} = 1 + |delta| + |f'|/(|f''| + h^{1/4}|f'|^{1/2} + h^{1/2}).

    The gradient bound |f'| <= h^{-1/2} is enforced by rescaling the
    symbol's derivative fields when necessary; the factor is logged and
    recorded under ``info["rescale"]`` so downstream weights stay
    consistent.  With the bound in force, 1 <= H^{-1/2} <= 3 h^{-1/2}
    holds exactly for h <= 1.
    """
    grid = f.grid
    _check_same_grid(grid, delta.grid)
    h = grid.h if h is None else float(h)
    fp = gradient_norm(f).values
    sup = float(fp.max())
    scale = 1.0
    if sup > h ** -0.5:
        scale = h ** -0.5 / sup
        logger.info("gradient sup %.6g exceeds h^(-1/2); rescaling symbol by %.6g",
                    sup, scale)
    fp = fp * scale
    fpp = hessian_norm(f).values * scale
    hm12 = 1.0 + np.abs(delta.values) + fp / (
        fpp + h ** 0.25 * np.sqrt(fp) + h ** 0.5)
    return WeightField(grid, hm12, "H^{-1/2}", h, info=(("rescale", scale),))


def compute_M(f: SymbolField, H: WeightField,
              h: float | None = None) -> WeightField:
    """Weight M = |f| + |f'| H^{-1/2} + |f''| H^{-1} + h^{1/2} H^{-3/2}.

    Applies the same rescale factor that was recorded when H was built,
    so M is the weight of the normalized symbol.  The measured constant
    C3 = h sup M of the upper bound M <= C3 h^{-1} is recorded in
    ``info``; the lower bound h^{1/2} <= M holds by construction.
    """
    grid = f.grid
    _check_same_grid(grid, H.grid)
    h = grid.h if h is None else float(h)
    scale = H.info_dict.get("rescale", 1.0)
    hm12 = H.values
    fv = np.abs(f.values.real) * scale
    fp = gradient_norm(f).values * scale
    fpp = hessian_norm(f).values * scale
    m_vals = fv + fp * hm12 + fpp * hm12 ** 2 + h ** 0.5 * hm12 ** 3
    c3 = float(m_vals.max() * h)
    return WeightField(grid, m_vals, "M", h,
                       info=(("C3", c3), ("rescale", scale)))


def compute_h1(H: WeightField) -> WeightField:
    """Leaf weight H1^{-1/2}(t,w) = max_x H^{-1/2}(t,x,w)."""
    xax = _x_axes(H.grid)
    vals = H.values.max(axis=xax, keepdims=True) if xax else H.values
    return WeightField(H.grid, vals, "H1^{-1/2}", H.h, info=H.info)


# ---- the weight m: exhaustive pair scan ----------------------------------

if _HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _m_scan_jit(delta2d, s2d, out):  # pragma: no cover - parity-tested
        T, W = delta2d.shape
        for w in prange(W):
            for t1 in range(T):
                g = np.inf
                for t2 in range(T - 1, t1 - 1, -1):
                    v = (delta2d[t2, w] - delta2d[t1, w]
                         + 0.5 * max(s2d[t1, w], s2d[t2, w]))
                    if v < g:
                        g = v
                    if g < out[t2, w]:
                        out[t2, w] = g


def _m_scan_numpy(delta2d, s2d, out):
    T = delta2d.shape[0]
    for t1 in range(T):
        row = delta2d[t1:] - delta2d[t1] + 0.5 * np.maximum(s2d[t1:], s2d[t1])
        g = np.minimum.accumulate(row[::-1], axis=0)[::-1]
        np.minimum(out[t1:], g, out=out[t1:])


def compute_m(delta: WeightField, h1: WeightField,
              t_window: float | None = None) -> WeightField:
    """Leaf weight m(t,w) from the exhaustive lattice pair scan.

    m(t,w) is the minimum over lattice pairs t1 <= t <= t2 of

        delta(t2,w) - delta(t1,w)
            + max(H1^{1/2}(t1) <delta(t1)>^2, H1^{1/2}(t2) <delta(t2)>^2)/2

    with <delta> = 1 + |delta|.  The scan enumerates every admissible
    pair in O(T^2) per w-column via a suffix-minimum sweep; there is no
    monotone-envelope shortcut, so the result *is* the brute force.
    When ``t_window`` is given, off-diagonal pairs are restricted to
    lattice times |t| <= t_window; the diagonal pair t1 = t2 = t stays
    admissible everywhere so m is defined on the whole lattice.

    Raises on the bracket precondition <delta> > H1^{-1/2} ("bound
    violation"): the diagonal bound m <= <delta>/2 needs it.
    """
    grid = delta.grid
    _check_same_grid(grid, h1.grid)
    wd = 1.0 + np.abs(delta.values)
    if np.any((wd - h1.values) > 0):
        raise ValueError(
            "bound violation: <delta> = 1 + |delta| exceeds H1^{-1/2}; "
            "delta and H1 are inconsistent"
        )
    s = wd ** 2 / h1.values  # H1^{1/2} <delta>^2
    dv, sv = np.broadcast_arrays(delta.values, s)
    shape = dv.shape
    t_ax = grid.t_axis
    T = shape[t_ax]
    d2 = np.moveaxis(dv, t_ax, 0).reshape(T, -1).copy()
    s2 = np.moveaxis(sv, t_ax, 0).reshape(T, -1).copy()
    out = 0.5 * s2.copy()

    if t_window is None or T == 1:
        lo, hi = 0, T - 1
    else:
        coords = grid.axis_coords(t_ax) if T == grid.shape[t_ax] else np.zeros(T)
        inside = np.nonzero(np.abs(coords) <= float(t_window))[0]
        if inside.size == 0:
            lo, hi = 0, -1  # diagonal-only
        else:
            lo, hi = int(inside[0]), int(inside[-1])
    if hi >= lo:
        dwin = np.ascontiguousarray(d2[lo:hi + 1])
        swin = np.ascontiguousarray(s2[lo:hi + 1])
        owin = out[lo:hi + 1].copy()
        if _HAVE_NUMBA and jit_enabled():
            _m_scan_jit(dwin, swin, owin)
        else:
            _m_scan_numpy(dwin, swin, owin)
        np.minimum(out[lo:hi + 1], owin, out=out[lo:hi + 1])

    rest = shape[:t_ax] + shape[t_ax + 1:]
    m_vals = np.moveaxis(out.reshape((T,) + rest), 0, t_ax)
    info = () if t_window is None else (("t_window", float(t_window)),)
    return WeightField(grid, np.ascontiguousarray(m_vals), "m", delta.h, info=info)


# ---- the factorization f = alpha * delta ---------------------------------


@dataclass(frozen=True)
class FactorizationReport:
    """Result of factorize_alpha: the factor, where it is trusted, and
    the measured comparison against M H^{1/2}."""

    alpha: WeightField
    mask: np.ndarray
    min_ratio: float
    kappa1: float

    @property
    def n_mask(self) -> int:
        return int(np.count_nonzero(self.mask))


def factorize_alpha(f: SymbolField, delta: WeightField, H: WeightField,
                    M: WeightField,
                    kappa1: float = DEFAULT_KAPPA1) -> FactorizationReport:
    """Factor the (normalized) symbol as f = alpha * delta near X0.

    The validity mask is {<delta> <= kappa1 H^{-1/2}}; inside it alpha
    is the pointwise quotient f/delta where |delta| is resolvable and
    the gradient norm |f'| on the sliver where delta vanishes (the
    limiting quotient).  Reports min alpha/(M H^{1/2}) over the mask.
    """
    grid = f.grid
    _check_same_grid(grid, delta.grid)
    _check_same_grid(grid, H.grid)
    _check_same_grid(grid, M.grid)
    wd = 1.0 + np.abs(delta.values)
    mask = np.broadcast_to(wd <= kappa1 * H.values,
                           np.broadcast_shapes(wd.shape, H.values.shape,
                                               M.values.shape, f.values.shape))
    if not mask.any():
        raise ValueError(
            f"empty validity mask: <delta> <= {kappa1} H^(-1/2) holds "
            f"nowhere on this lattice (informational; enlarge kappa1 or "
            f"decrease h)"
        )
    scale = H.info_dict.get("rescale", 1.0)
    fs = f.values.real * scale
    fp = gradient_norm(f).values * scale
    thr = _DELTA_RTOL * delta.h ** -0.5
    dv = delta.values
    safe = np.where(np.abs(dv) > thr, dv, 1.0)
    alpha_vals = np.where(np.abs(dv) > thr, fs / safe, fp)
    ratio = alpha_vals * H.values / M.values
    min_ratio = float(np.broadcast_to(ratio, mask.shape)[mask].min())
    alpha = WeightField(grid, alpha_vals, "alpha", delta.h,
                        info=(("kappa1", float(kappa1)),))
    return FactorizationReport(alpha, np.ascontiguousarray(mask),
                               min_ratio, float(kappa1))


# ---- export -------------------------------------------------------------


def weight_fields_to_npz(path, fields) -> None:
    """Write weight fields plus their common grid to a binary container."""
    fields = list(fields)
    if not fields:
        raise ValueError("nothing to export")
    grid = fields[0].grid
    for fld in fields[1:]:
        _check_same_grid(grid, fld.grid)
    payload = {
        "n_fields": np.asarray(len(fields)),
        "base_roles": np.asarray([d.role for d in grid.base_dims]),
        "base_counts": np.asarray([d.count for d in grid.base_dims]),
        "base_extents": np.asarray([d.extent for d in grid.base_dims]),
        "dual_extents": np.asarray([d.extent for d in grid.dual_dims]),
        "h": np.asarray(grid.h),
        "periodic": np.asarray(grid.periodic),
        "frame": np.asarray(grid.frame),
    }
    for k, fld in enumerate(fields):
        payload[f"field{k}_values"] = fld.values
        payload[f"field{k}_role"] = np.asarray(fld.role)
        payload[f"field{k}_h"] = np.asarray(fld.h)
        payload[f"field{k}_info_keys"] = np.asarray([k_ for k_, _ in fld.info])
        payload[f"field{k}_info_vals"] = np.asarray([v for _, v in fld.info])
    np.savez(path, **payload)


def weight_fields_from_npz(path) -> list[WeightField]:
    """Rebuild exported weight fields, grid included."""
    from .phase_grid import DUAL_OF, GridDim

    with np.load(path) as data:
        roles = [str(r) for r in data["base_roles"]]
        counts = [int(c) for c in data["base_counts"]]
        base = tuple(GridDim(role, count, float(ext)) for role, count, ext
                     in zip(roles, counts, data["base_extents"]))
        dual = tuple(GridDim(DUAL_OF[role], count, float(ext)) for role, count, ext
                     in zip(roles, counts, data["dual_extents"]))
        grid = PhaseGrid(base, dual, float(data["h"]),
                         tuple(bool(p) for p in data["periodic"]),
                         str(data["frame"]))
        out = []
        for k in range(int(data["n_fields"])):
            info = tuple(
                (str(key), float(val))
                for key, val in zip(data[f"field{k}_info_keys"],
                                    data[f"field{k}_info_vals"])
            )
            out.append(WeightField(grid, data[f"field{k}_values"],
                                   str(data[f"field{k}_role"]),
                                   float(data[f"field{k}_h"]), info=info))
        return out


def weight_csv_slice(fld: WeightField, path, pins: dict | None = None) -> None:
    """Write a <= 2-dimensional slice of a weight field as CSV plot data.

    ``pins`` maps axis names to lattice indices; every non-singleton
    axis not pinned is a free plot axis, and at most two are allowed.
    Columns are the free-axis coordinates followed by the field value.
    """
    grid = fld.grid
    pins = dict(pins or {})
    names = list(grid.axis_names)
    index = [slice(None)] * grid.ndim
    for name, idx in pins.items():
        if name not in names:
            raise ValueError(f"unknown axis {name!r}")
        ax = names.index(name)
        index[ax] = 0 if fld.values.shape[ax] == 1 else int(idx)
    free = [ax for ax in range(grid.ndim)
            if index[ax] == slice(None) and fld.values.shape[ax] > 1]
    if len(free) > 2:
        raise ValueError(
            f"{len(free)} free axes ({[names[a] for a in free]}); pin all "
            f"but two"
        )
    sliced = fld.values[tuple(index)]
    sliced = sliced.reshape([fld.values.shape[a] for a in free] or [1])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join([names[a] for a in free] + [fld.role]) + "\n")
        coords = [grid.axis_coords(a) for a in free]
        for multi in np.ndindex(*sliced.shape):
            cols = [f"{coords[k][i]:.17g}" for k, i in enumerate(multi)]
            fh.write(",".join(cols + [f"{sliced[multi]:.17g}"]) + "\n")
