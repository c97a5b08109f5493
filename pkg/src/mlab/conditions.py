"""Leaf-sign tables and solvability-condition checks on the characteristic set.

The reduced operators live on a lattice whose characteristic manifold is
the zero section of the x-duals, ``{xi = 0}`` (always a lattice slice,
since the dual lattices contain 0).  Its leaves are the x-planes at
frozen (t, y, tau, eta).  This module computes

* the invariant lower-order part of a symbol (mixed-derivative
  correction of the first-order term),
* the xi-Hessian on the characteristic slice with a nondegeneracy
  verdict,
* the limit Hamilton fields spanned by the Hessian and the xi-linear
  part of the lower-order symbol,
* per-leaf sign tables, and
* the directed sign-transition check along increasing t that decides
  the solvability verdict.

Orientation ``"Psi"`` forbids a leaf sign changing from - to + as t
increases; ``"Psi-bar"`` forbids + to -.  Leaves with exact sign 0 do
not reset the scan: a pattern -, 0, 0, + still violates ``"Psi"`` at
the final step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._accel import jit_enabled, njit, prange
from .phase_grid import PhaseGrid, SymbolField, fd_derivative

ORIENTATIONS = ("Psi", "Psi-bar")
VERDICT_PASS = "pass"
VERDICT_LEAF_SIGN = "fail-leaf-sign"
VERDICT_MONOTONICITY = "fail-monotonicity"
VERDICTS = (VERDICT_PASS, VERDICT_LEAF_SIGN, VERDICT_MONOTONICITY)

#: Relative zero threshold for leaf signs, with an absolute floor.
SIGN_RTOL = 1e-12
SIGN_FLOOR = 1e-300

#: Eigenvalues of the characteristic Hessian below this count as zero.
HESSIAN_EIG_TOL = 1e-6

#: Relative tolerance for the second-order vanishing precondition.
VANISH_RTOL = 1e-8

#: Recorded witnesses are capped at this count (totals are still exact).
MAX_WITNESSES = 32


def _x_axes(grid: PhaseGrid) -> tuple[int, ...]:
    return tuple(i for i, d in enumerate(grid.base_dims) if d.role == "x")


def _xi_axes(grid: PhaseGrid) -> tuple[int, ...]:
    nb = grid.ndim_base
    return tuple(i + nb for i, d in enumerate(grid.base_dims) if d.role == "x")


def _index_axes(grid: PhaseGrid) -> tuple[int, ...]:
    skip = set(_x_axes(grid)) | set(_xi_axes(grid))
    return tuple(ax for ax in range(grid.ndim) if ax not in skip)


def _char_slicer(vals: np.ndarray, grid: PhaseGrid,
                 axes: tuple[int, ...]) -> tuple:
    """Index tuple selecting xi = 0 (singleton axes select their only entry)."""
    idx: list = [slice(None)] * vals.ndim
    for ax in axes:
        idx[ax] = 0 if vals.shape[ax] == 1 else grid.dims[ax].count // 2
    return tuple(idx)


def _plain_derivative(field: SymbolField, axis: int) -> SymbolField:
    """Coordinate (frame-independent) first derivative along one axis."""
    return fd_derivative(field, axis, order=1) * (1.0 / field.grid.gsharp_factor(axis))


# ---------------------------------------------------------------------------
# lower-order symbol bookkeeping


def subprincipal_symbol(p: SymbolField, p_lower: SymbolField) -> SymbolField:
    """Invariant first-order symbol of an operator with parts (p, p_lower).

    Parameters
    ----------
    p : SymbolField
        Leading symbol.
    p_lower : SymbolField
        First-order part of the full symbol.

    Returns
    -------
    SymbolField
        ``p_lower + (i/2) sum_j d_{x_j} d_{xi_j} p`` over all base/dual
        axis pairs; the two g-sharp scalings of each derivative pair
        cancel, so the sum is frame independent.
    """
    if p.grid != p_lower.grid:
        raise ValueError("symbol parts are sampled on different grids")
    grid = p.grid
    nb = grid.ndim_base
    out = p_lower
    for pb in range(nb):
        if not (p.depends_on(pb) and p.depends_on(pb + nb)):
            continue
        mixed = fd_derivative(fd_derivative(p, pb, order=1), pb + nb, order=1)
        out = out + mixed * 0.5j
    return out


def refined_symbol(p: SymbolField, p_s: SymbolField) -> SymbolField:
    """Leading symbol sharpened by its invariant first-order part: p + p_s."""
    if p.grid != p_s.grid:
        raise ValueError("symbol parts are sampled on different grids")
    return p + p_s


# ---------------------------------------------------------------------------
# characteristic Hessian


@dataclass(frozen=True)
class HessianReport:
    """xi-Hessian of a symbol on the characteristic slice xi = 0.

    ``matrices``, ``eigenvalues``, ``ranks`` and ``signatures`` are
    indexed by the non-xi axes of the grid in their original order
    (broadcast over axes the symbol does not depend on).  Eigenvalues
    are ascending; an eigenvalue counts as zero when its magnitude is
    at most ``HESSIAN_EIG_TOL``.
    """

    grid: PhaseGrid
    xi_axes: tuple[int, ...]
    matrices: np.ndarray
    eigenvalues: np.ndarray
    nondegenerate: bool
    min_abs_eigenvalue: float
    ranks: np.ndarray
    signatures: np.ndarray

    @property
    def rank(self) -> int:
        vals = np.unique(self.ranks)
        if vals.size != 1:
            raise ValueError("rank is not constant over the characteristic slice")
        return int(vals[0])

    @property
    def signature(self) -> int:
        vals = np.unique(self.signatures)
        if vals.size != 1:
            raise ValueError("signature is not constant over the characteristic slice")
        return int(vals[0])


def _check_second_order_vanishing(p: SymbolField, xi_axes: tuple[int, ...],
                                  tol: float) -> None:
    grid = p.grid
    keep = [ax for ax in range(grid.ndim) if ax not in xi_axes]
    slice_shape = tuple(grid.shape[ax] for ax in keep)

    def worst(vals: np.ndarray, what: str) -> None:
        mag = np.abs(np.broadcast_to(vals, slice_shape))
        if mag.max() <= tol:
            return
        at = np.unravel_index(int(mag.argmax()), slice_shape)
        full = [0] * grid.ndim
        for c, ax in zip(at, keep):
            full[ax] = int(c)
        for ax in xi_axes:
            full[ax] = grid.dims[ax].count // 2
        raise ValueError(
            f"symbol does not vanish to second order on the characteristic "
            f"slice: |{what}| = {mag.max():.3e} > {tol:.3e} at lattice point "
            f"{tuple(full)}")

    worst(p.values[_char_slicer(p.values, grid, xi_axes)], "p")
    for ax in range(grid.ndim):
        if not p.depends_on(ax):
            continue
        g = _plain_derivative(p, ax)
        worst(g.values[_char_slicer(g.values, grid, xi_axes)],
              f"d p / d {grid.axis_names[ax]}")


def hessian_at_sigma2(p: SymbolField) -> HessianReport:
    """Second xi-derivatives of ``p`` on the slice xi = 0.

    The symbol must vanish to second order there: ``|p|`` and the
    plain gradient of ``p`` are checked against
    ``VANISH_RTOL * max(1, sup|p|)`` on the slice, and the offending
    lattice point is named on failure.  Entries are plain coordinate
    derivatives (g-sharp factors divided out), so the eigenvalues do
    not depend on the frame.  Only the real part of ``p`` enters.
    """
    grid = p.grid
    xi_axes = _xi_axes(grid)
    if not xi_axes:
        raise ValueError("grid has no x-role axes, so there is no xi-Hessian")
    tol = VANISH_RTOL * max(1.0, p.sup_norm())
    _check_second_order_vanishing(p, xi_axes, tol)

    d = len(xi_axes)
    blocks: list[list[np.ndarray]] = [[None] * d for _ in range(d)]
    for i in range(d):
        gi = fd_derivative(p, xi_axes[i], order=1)
        for j in range(i, d):
            gij = fd_derivative(gi, xi_axes[j], order=1)
            plain = 1.0 / (grid.gsharp_factor(xi_axes[i])
                           * grid.gsharp_factor(xi_axes[j]))
            vals = gij.values[_char_slicer(gij.values, grid, xi_axes)]
            blocks[i][j] = blocks[j][i] = vals.real * plain
    flat = np.broadcast_arrays(*[blocks[i][j] for i in range(d) for j in range(d)])
    mats = np.stack(flat, axis=-1).reshape(flat[0].shape + (d, d))
    mats = 0.5 * (mats + np.swapaxes(mats, -1, -2))

    eigs = np.linalg.eigvalsh(mats)
    small = np.abs(eigs) <= HESSIAN_EIG_TOL
    ranks = (~small).sum(axis=-1)
    signatures = (eigs > HESSIAN_EIG_TOL).sum(axis=-1) \
        - (eigs < -HESSIAN_EIG_TOL).sum(axis=-1)
    min_abs = float(np.abs(eigs).min()) if eigs.size else 0.0

    keep = [ax for ax in range(grid.ndim) if ax not in xi_axes]
    slice_shape = tuple(grid.shape[ax] for ax in keep)
    return HessianReport(
        grid=grid,
        xi_axes=xi_axes,
        matrices=np.broadcast_to(mats, slice_shape + (d, d)),
        eigenvalues=np.broadcast_to(eigs, slice_shape + (d,)),
        nondegenerate=bool(not small.any()),
        min_abs_eigenvalue=min_abs,
        ranks=np.broadcast_to(ranks, slice_shape),
        signatures=np.broadcast_to(signatures, slice_shape),
    )


# ---------------------------------------------------------------------------
# limit Hamilton fields


@dataclass(frozen=True)
class LimitHamiltonField:
    """Coefficients of the Hamilton field of the real refined symbol at xi = 0.

    The field is ``2 sum_jk a_jk xi_j d/dx_k + d/dt + Re C . d/dx`` with
    ``a`` half the characteristic Hessian and ``C`` the xi-linear part of
    the first-order symbol.  :meth:`coefficients` evaluates the
    x-directional coefficients at a frozen xi-direction theta; theta = 0
    gives the subprincipal bicharacteristic direction d/dt + Re C . d/dx.
    Arrays are indexed like :class:`HessianReport` fields.
    """

    grid: PhaseGrid
    x_axes: tuple[int, ...]
    xi_axes: tuple[int, ...]
    a: np.ndarray
    re_c: np.ndarray
    hessian: HessianReport

    #: Coefficient of d/dt, fixed by the normal form.
    t_component: float = 1.0

    def coefficients(self, theta) -> np.ndarray:
        """x-directional coefficients ``2 a theta + Re C`` at direction theta."""
        theta = np.asarray(theta, dtype=float)
        d = len(self.x_axes)
        if theta.shape != (d,):
            raise ValueError(f"theta must have shape ({d},), got {theta.shape}")
        return 2.0 * (self.a @ theta) + self.re_c


def limit_hamilton_field(p: SymbolField, p_s: SymbolField) -> LimitHamiltonField:
    """Limit Hamilton field data of the pair (leading p, first-order p_s).

    Requires the characteristic Hessian of ``p`` to be nondegenerate.
    The xi-linear coefficients C are read off ``p_s`` by plain first
    differences at xi = 0.
    """
    if p.grid != p_s.grid:
        raise ValueError("symbol parts are sampled on different grids")
    grid = p.grid
    hess = hessian_at_sigma2(p)
    if not hess.nondegenerate:
        raise ValueError(
            f"characteristic Hessian is degenerate (min |eigenvalue| = "
            f"{hess.min_abs_eigenvalue:.3e} <= {HESSIAN_EIG_TOL:g})")
    x_axes = _x_axes(grid)
    xi_axes = hess.xi_axes
    d = len(xi_axes)

    cols = []
    for ax in xi_axes:
        g = _plain_derivative(p_s, ax)
        cols.append(g.values[_char_slicer(g.values, grid, xi_axes)].real)
    cols = np.broadcast_arrays(*cols)
    re_c = np.stack(cols, axis=-1)

    keep = [ax for ax in range(grid.ndim) if ax not in xi_axes]
    slice_shape = tuple(grid.shape[ax] for ax in keep)
    return LimitHamiltonField(
        grid=grid,
        x_axes=x_axes,
        xi_axes=xi_axes,
        a=0.5 * np.asarray(hess.matrices),
        re_c=np.broadcast_to(re_c, slice_shape + (d,)),
        hessian=hess,
    )


# ---------------------------------------------------------------------------
# leaf signs


@dataclass(frozen=True)
class LeafSignTable:
    """Per-leaf sign data of a real field.

    Leaves are the x-planes at frozen (t, y, tau, eta); ``signs``,
    ``mixed`` and ``witnesses`` are indexed by the non-x, non-xi axes in
    their original order.  ``signs`` holds -1/0/+1 with 0 exactly when
    the leaf maximum of |f| is at most ``zero_threshold``; on a
    mixed-sign leaf (both signs beyond the threshold occur) the sign of
    the dominant value is recorded and ``mixed`` is set.  ``witnesses``
    holds the x-lattice coordinates of the dominant point of each leaf.
    """

    grid: PhaseGrid
    signs: np.ndarray
    mixed: np.ndarray
    witnesses: np.ndarray
    leaf_axes: tuple[int, ...]
    index_axes: tuple[int, ...]
    zero_threshold: float

    @property
    def n_mixed(self) -> int:
        return int(self.mixed.sum())


@njit(cache=True, parallel=True)
def _leaf_reduce_jit(rows):  # pragma: no cover - exercised via dispatch
    n, m = rows.shape
    mx = np.empty(n, dtype=rows.dtype)
    mn = np.empty(n, dtype=rows.dtype)
    arg = np.zeros(n, dtype=np.int64)
    for i in prange(n):
        hi = rows[i, 0]
        lo = rows[i, 0]
        best = abs(rows[i, 0])
        k = 0
        for j in range(1, m):
            v = rows[i, j]
            if v > hi:
                hi = v
            if v < lo:
                lo = v
            a = abs(v)
            if a > best:
                best = a
                k = j
        mx[i] = hi
        mn[i] = lo
        arg[i] = k
    return mx, mn, arg


def _leaf_reduce_numpy(rows):
    return rows.max(axis=1), rows.min(axis=1), np.abs(rows).argmax(axis=1)


def leaf_sign(f: SymbolField) -> LeafSignTable:
    """Tabulate the sign of a real field on every characteristic leaf.

    The zero threshold is ``SIGN_RTOL * sup|f|`` with an absolute floor
    of ``SIGN_FLOOR``.  The field must not depend on the xi axes;
    restrict to the characteristic slice first if it does.
    """
    grid = f.grid
    if f.values.imag.any():
        raise ValueError("leaf signs are defined for real-valued fields")
    leaf_axes = _x_axes(grid)
    xi_axes = _xi_axes(grid)
    index_axes = _index_axes(grid)
    for ax in xi_axes:
        if f.depends_on(ax):
            raise ValueError(
                f"field depends on dual axis {grid.axis_names[ax]!r}; "
                f"restrict to the characteristic slice (xi = 0) before "
                f"taking leaf signs")

    vals = f.values.real
    order = index_axes + leaf_axes
    moved = np.transpose(vals, order + xi_axes)
    idx_shape = moved.shape[:len(index_axes)]
    leaf_size = int(np.prod(moved.shape[len(index_axes):], dtype=np.int64))
    rows = np.ascontiguousarray(moved.reshape(-1, leaf_size))

    kernel = _leaf_reduce_jit if jit_enabled() else _leaf_reduce_numpy
    mx, mn, arg = kernel(rows)

    thr = max(SIGN_FLOOR, SIGN_RTOL * f.sup_norm())
    dominant = np.take_along_axis(rows, arg[:, None], axis=1)[:, 0]
    zero = np.maximum(np.abs(mx), np.abs(mn)) <= thr
    signs = np.where(zero, 0, np.where(dominant > 0.0, 1, -1)).astype(np.int8)
    mixed = (mx > thr) & (mn < -thr)

    k = len(leaf_axes)
    if k:
        compact_leaf = moved.shape[len(index_axes):len(index_axes) + k]
        wit = np.stack(np.unravel_index(arg, compact_leaf), axis=-1)
    else:
        wit = np.zeros((rows.shape[0], 0), dtype=np.int64)

    full_idx_shape = tuple(grid.shape[ax] for ax in index_axes)
    return LeafSignTable(
        grid=grid,
        signs=np.broadcast_to(signs.reshape(idx_shape), full_idx_shape),
        mixed=np.broadcast_to(mixed.reshape(idx_shape), full_idx_shape),
        witnesses=np.broadcast_to(wit.reshape(idx_shape + (k,)),
                                  full_idx_shape + (k,)),
        leaf_axes=leaf_axes,
        index_axes=index_axes,
        zero_threshold=thr,
    )


# ---------------------------------------------------------------------------
# directed sign-transition check


@dataclass(frozen=True)
class ConditionReport:
    """Verdict of the directed leaf-sign check, with located witnesses.

    ``violations`` holds full lattice multi-indices (xi axes pinned to
    the characteristic slice), capped at ``MAX_WITNESSES`` entries;
    ``n_violations`` is the exact total.
    """

    verdict: str
    orientation: str
    axis_names: tuple[str, ...]
    violations: tuple[tuple[int, ...], ...]
    n_violations: int
    zero_threshold: float

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if self.verdict != VERDICT_PASS and not self.violations:
            raise ValueError("fail verdicts must carry at least one witness")

    def to_json(self) -> str:
        return json.dumps(
            {
                "verdict": self.verdict,
                "orientation": self.orientation,
                "axes": list(self.axis_names),
                "violations": [list(v) for v in self.violations],
                "n_violations": self.n_violations,
                "zero_threshold": self.zero_threshold,
            },
            indent=2, sort_keys=True)


def _full_lattice_index(grid: PhaseGrid, table: LeafSignTable,
                        idx_coords: tuple[int, ...]) -> tuple[int, ...]:
    full = [0] * grid.ndim
    for c, ax in zip(idx_coords, table.index_axes):
        full[ax] = int(c)
    wit = table.witnesses[tuple(idx_coords)]
    for c, ax in zip(wit, table.leaf_axes):
        full[ax] = int(c)
    for ax in _xi_axes(grid):
        full[ax] = grid.dims[ax].count // 2
    return tuple(full)


def check_subr_psi(f: SymbolField, orientation: str = "Psi") -> ConditionReport:
    """Directed sign check of a real field along increasing t.

    First the per-leaf sign table is computed; any mixed-sign leaf gives
    the verdict ``fail-leaf-sign``.  Otherwise every t-line of leaves at
    frozen (y, tau, eta) is scanned in increasing t: ``"Psi"`` forbids a
    completed - ... + pattern (zeros in between do not reset), and
    ``"Psi-bar"`` forbids + ... -.  Every dual slice is scanned
    independently and any single violation fails.
    """
    if orientation not in ORIENTATIONS:
        raise ValueError(
            f"unknown orientation {orientation!r}; expected one of {ORIENTATIONS}")
    grid = f.grid
    table = leaf_sign(f)

    if table.mixed.any():
        where = np.argwhere(table.mixed)
        witnesses = tuple(
            _full_lattice_index(grid, table, tuple(idx))
            for idx in where[:MAX_WITNESSES])
        return ConditionReport(
            verdict=VERDICT_LEAF_SIGN,
            orientation=orientation,
            axis_names=grid.axis_names,
            violations=witnesses,
            n_violations=int(where.shape[0]),
            zero_threshold=table.zero_threshold,
        )

    t_pos = table.index_axes.index(grid.t_axis)
    nt = grid.base_dims[grid.t_axis].count
    lines = np.moveaxis(table.signs, t_pos, -1)
    rest_shape = lines.shape[:-1]
    lines = lines.reshape(-1, nt)

    forbidden_from, forbidden_to = (-1, 1) if orientation == "Psi" else (1, -1)
    last = np.zeros(lines.shape[0], dtype=np.int8)
    hits: list[tuple[int, int]] = []
    for k in range(nt):
        cur = lines[:, k]
        bad = (last == forbidden_from) & (cur == forbidden_to)
        if bad.any():
            hits.extend((int(line), k) for line in np.nonzero(bad)[0])
        nz = cur != 0
        last[nz] = cur[nz]

    if not hits:
        return ConditionReport(
            verdict=VERDICT_PASS,
            orientation=orientation,
            axis_names=grid.axis_names,
            violations=(),
            n_violations=0,
            zero_threshold=table.zero_threshold,
        )

    witnesses = []
    for line, k in hits[:MAX_WITNESSES]:
        rest_idx = np.unravel_index(line, rest_shape) if rest_shape else ()
        idx_coords = list(int(c) for c in rest_idx)
        idx_coords.insert(t_pos, k)
        witnesses.append(_full_lattice_index(grid, table, tuple(idx_coords)))
    return ConditionReport(
        verdict=VERDICT_MONOTONICITY,
        orientation=orientation,
        axis_names=grid.axis_names,
        violations=tuple(witnesses),
        n_violations=len(hits),
        zero_threshold=table.zero_threshold,
    )
