"""Discrete Weyl, Kohn-Nirenberg, and Wick quantizations on a phase grid.

A symbol sampled on a :class:`~mlab.phase_grid.PhaseGrid` becomes a dense
complex matrix acting on lattice functions (row-major over the base axes).
The Weyl kernel

    K(x, y) = (2 pi)^(-n) sum_xi exp(i <x - y, xi>) a((x + y) / 2, xi) dxi

is discretized with the dual sums done by FFT -- the dual lattice is the
set of FFT frequencies of the base lattice, so the exponential sum is an
exact inverse transform in the index difference -- and with the midpoint
(x + y) / 2 evaluated by trigonometric interpolation of the symbol in
position (split-Nyquist convention, which keeps real symbols' operators
Hermitian to rounding).  Matrix entries carry the base quadrature measure,
so ``a = 1`` gives the identity matrix exactly.

Kohn-Nirenberg quantization replaces the midpoint with the left point x;
``kn_to_weyl`` applies the leading-order correction between the two.  Wick
quantization is the Weyl quantization of the Gaussian regularization of
the symbol, which is what buys positivity.

Composition and conversion checks sweep the semiclassical parameter by
evaluating symbol expressions in the chart (x, h * xi) on a fixed lattice,
i.e. the operator realized for a pair (a, h) is a(x, hD).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from ._accel import jit_enabled, njit, prange
from .phase_grid import FRAME_STANDARD, PhaseGrid, SymbolField, fd_derivative
from .symlang import SymbolExpr, eval_on_grid

QUANTIZATIONS = ("weyl", "kn", "wick")

#: Hard cap on the operator dimension; spectral checks downstream need
#: full eigendecompositions, which stop being cheap past this size.
MAX_TOTAL_POINTS = 4096

#: Default truncation radius of the unit Gaussian window, in g-sharp
#: units.  The discarded relative tail weight is erfc(6) ~ 2e-17, far
#: below the 1e-7 budget the regularization error analysis assumes.
TRUNCATION_RADIUS = 6.0

H_SWEEP = (0.1, 0.05, 0.025)


class TruncationBiasWarning(UserWarning):
    """Grid shorter than the Gaussian window; regularization is biased."""


# ---- operator container ----------------------------------------------


@dataclass(frozen=True)
class DiscreteOperator:
    """Dense matrix realization of a quantized symbol.

    The matrix acts on functions of the base lattice flattened in C
    (row-major) order; ``apply`` accepts either the flat vector or the
    base-shaped array.
    """

    grid: PhaseGrid
    matrix: np.ndarray
    quantization: str
    symbol_provenance: str | None = None

    def __post_init__(self):
        if self.quantization not in QUANTIZATIONS:
            raise ValueError(f"unknown quantization {self.quantization!r}; "
                             f"expected one of {QUANTIZATIONS}")
        m = np.asarray(self.matrix, dtype=np.complex128)
        n_total = int(np.prod(self.grid.base_shape))
        if m.shape != (n_total, n_total):
            raise ValueError(f"matrix shape {m.shape} does not match the "
                             f"{n_total} base lattice points")
        object.__setattr__(self, "matrix", m)

    @property
    def n_total(self) -> int:
        return self.matrix.shape[0]

    def apply(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec, dtype=np.complex128)
        shaped = vec.shape == self.grid.base_shape
        out = self.matrix @ vec.reshape(-1)
        return out.reshape(self.grid.base_shape) if shaped else out

    def adjoint(self) -> "DiscreteOperator":
        return DiscreteOperator(self.grid, self.matrix.conj().T.copy(),
                                self.quantization, self.symbol_provenance)

    def op_norm(self) -> float:
        """Operator norm (largest singular value)."""
        return float(np.linalg.norm(self.matrix, 2))

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        """Relative Frobenius-norm test of self-adjointness."""
        scale = np.linalg.norm(self.matrix)
        if scale == 0.0:
            return True
        defect = np.linalg.norm(self.matrix - self.matrix.conj().T)
        return bool(defect <= tol * scale)


# ---- symbol preparation ----------------------------------------------


def _trig_upsample(values: np.ndarray, axis: int) -> np.ndarray:
    """Trigonometric interpolation onto the half-spaced doubled lattice.

    The Nyquist coefficient is split evenly between +N/2 and -N/2, the
    unique choice that keeps real data real at the new half-integer
    points.  Even output indices reproduce the input samples exactly.
    """
    n = values.shape[axis]
    spec = np.moveaxis(np.fft.fft(values, axis=axis), axis, 0)
    half = n // 2
    out = np.zeros((2 * n,) + spec.shape[1:], dtype=np.complex128)
    out[:half] = spec[:half]
    out[half] = 0.5 * spec[half]
    out[-half] = 0.5 * spec[half]
    out[-half + 1:] = spec[half + 1:]
    return np.fft.ifft(np.moveaxis(out, 0, axis), axis=axis) * 2.0


def _prepare(a: SymbolField, midpoint: bool) -> np.ndarray:
    """Upsample dependent base axes, inverse-transform dependent duals.

    After this step the kernel value at row j, column l is a pure gather:
    index j+l (midpoint) or j (left point) along each base axis, index
    (j - l) mod N along each dual axis the symbol depends on; dual axes
    the symbol is independent of contribute an exact Kronecker delta.
    """
    vals = a.values
    nb = a.grid.ndim_base
    if midpoint:
        for ax in range(nb):
            if vals.shape[ax] > 1:
                vals = _trig_upsample(vals, ax)
    for ax in range(nb, 2 * nb):
        if vals.shape[ax] > 1:
            vals = np.fft.ifft(np.fft.ifftshift(vals, axes=ax), axis=ax)
    return np.ascontiguousarray(vals, dtype=np.complex128)


# ---- matrix assembly --------------------------------------------------


@njit(cache=True, parallel=True)
def _gather_rows_jit(flat, rows_dec, gtab, allow, out):  # pragma: no cover
    n_total = rows_dec.shape[1]
    n_pairs = rows_dec.shape[0]
    for j in prange(n_total):
        for l in range(n_total):
            idx = 0
            ok = True
            for ax in range(n_pairs):
                ja = rows_dec[ax, j]
                la = rows_dec[ax, l]
                if not allow[ax, ja, la]:
                    ok = False
                    break
                idx += gtab[ax, ja, la]
            out[j, l] = flat[idx] if ok else 0.0


def _gather_rows_numpy(flat, rows_dec, gtab, allow, out):
    n_total = rows_dec.shape[1]
    block = max(1, (1 << 21) // n_total)
    for start in range(0, n_total, block):
        stop = min(start + block, n_total)
        idx = np.zeros((stop - start, n_total), dtype=np.int64)
        ok = np.ones((stop - start, n_total), dtype=bool)
        for ax in range(rows_dec.shape[0]):
            jj = rows_dec[ax, start:stop][:, None]
            ll = rows_dec[ax][None, :]
            idx += gtab[ax, jj, ll]
            ok &= allow[ax, jj, ll]
        vals = flat[idx]
        vals[~ok] = 0.0
        out[start:stop] = vals


def _assemble(prepared: np.ndarray, grid: PhaseGrid, midpoint: bool) -> np.ndarray:
    """Gather the prepared array into the dense matrix, row-parallel.

    The gather index is separable over base/dual axis pairs, so each pair
    contributes one small stride-scaled lookup table; rows are filled in
    parallel blocks.
    """
    nb = grid.ndim_base
    base_shape = grid.base_shape
    n_total = int(np.prod(base_shape))

    strides = np.ones(prepared.ndim, dtype=np.int64)
    for ax in reversed(range(prepared.ndim - 1)):
        strides[ax] = strides[ax + 1] * prepared.shape[ax + 1]
    flat = prepared.reshape(-1)

    max_n = max(base_shape)
    gtab = np.zeros((nb, max_n, max_n), dtype=np.int64)
    allow = np.ones((nb, max_n, max_n), dtype=np.bool_)
    for pb in range(nb):
        n_ax = base_shape[pb]
        j = np.arange(n_ax, dtype=np.int64)[:, None]
        l = np.arange(n_ax, dtype=np.int64)[None, :]
        contrib = np.zeros((n_ax, n_ax), dtype=np.int64)
        if prepared.shape[pb] > 1:
            contrib += strides[pb] * (j + l if midpoint
                                      else np.broadcast_to(j, (n_ax, n_ax)))
        if prepared.shape[pb + nb] > 1:
            contrib += strides[pb + nb] * np.mod(j - l, n_ax)
        else:
            allow[pb, :n_ax, :n_ax] = j == l
        gtab[pb, :n_ax, :n_ax] = contrib

    rows_dec = np.indices(base_shape).reshape(nb, n_total).astype(np.int64)
    out = np.empty((n_total, n_total), dtype=np.complex128)
    kernel = _gather_rows_jit if jit_enabled() else _gather_rows_numpy
    kernel(flat, rows_dec, gtab, allow, out)
    return out


def _check_quantizable(a: SymbolField, grid: PhaseGrid | None) -> PhaseGrid:
    if grid is not None and grid != a.grid:
        raise ValueError("field is sampled on a different grid than the one "
                         "passed in")
    grid = a.grid
    if grid.frame != FRAME_STANDARD:
        raise ValueError(f"frame mismatch: quantization needs the "
                         f"{FRAME_STANDARD!r} frame, got {grid.frame!r}")
    n_total = int(np.prod(grid.base_shape))
    if n_total > MAX_TOTAL_POINTS:
        raise ValueError(f"operator dimension {n_total} exceeds the dense "
                         f"cap of {MAX_TOTAL_POINTS}")
    return grid


# ---- quantizations ----------------------------------------------------


def weyl_quantize(a: SymbolField, grid: PhaseGrid | None = None, *,
                  provenance: str | None = None) -> DiscreteOperator:
    """Weyl (symmetric) quantization of a sampled symbol.

    The symbol at the midpoint (x + y) / 2 is taken from the split-Nyquist
    trigonometric interpolant in the base variables, and the dual sum is
    an exact FFT in the index difference.  Real symbols therefore map to
    Hermitian matrices up to rounding; ``a = 1`` maps to the identity and
    x-independent symbols to Fourier multipliers, both exactly.
    """
    grid = _check_quantizable(a, grid)
    matrix = _assemble(_prepare(a, midpoint=True), grid, midpoint=True)
    return DiscreteOperator(grid, matrix, "weyl", provenance)


def kn_quantize(a: SymbolField, grid: PhaseGrid | None = None, *,
                provenance: str | None = None) -> DiscreteOperator:
    """Kohn-Nirenberg (left point) quantization of a sampled symbol."""
    grid = _check_quantizable(a, grid)
    matrix = _assemble(_prepare(a, midpoint=False), grid, midpoint=False)
    return DiscreteOperator(grid, matrix, "kn", provenance)


def kn_to_weyl(a: SymbolField) -> SymbolField:
    """Weyl symbol matching a Kohn-Nirenberg symbol to leading order.

    Returns ``a + (i/2) sum_j d/dx_j d/dxi_j a`` with the mixed derivative
    taken by centered finite differences; the two g-sharp normalization
    factors of the derivative pair cancel, so the correction is frame
    independent.  The difference kn(a) - weyl(kn_to_weyl(a)) decays at
    second order in the semiclassical sweep, versus first order without
    the corrector.
    """
    grid = a.grid
    nb = grid.ndim_base
    out = a
    for pb in range(nb):
        if not (a.depends_on(pb) and a.depends_on(pb + nb)):
            continue
        mixed = fd_derivative(fd_derivative(a, pb, order=1), pb + nb, order=1)
        out = out + mixed * 0.5j
    return out


def gaussian_regularize(a: SymbolField,
                        truncation_radius: float = TRUNCATION_RADIUS) -> SymbolField:
    """Convolve with the unit Gaussian of the g-sharp metric.

    Separable per axis: the window weight at offset z is exp(-(z/s)^2)
    with s the axis' g-sharp unit length, truncated at
    ``truncation_radius`` g-sharp units and renormalized to unit mass.
    Periodic base axes fold the window around the lattice; non-periodic
    base axes and all dual axes shrink it symmetrically toward the edges
    (radius min(p, n-1-p, R) at point p), which keeps the weights
    nonnegative with vanishing odd moments -- so sup-norm and positivity
    are preserved everywhere and affine symbols are reproduced exactly,
    while second moments are only trusted at points at least
    ``truncation_radius`` g-sharp units away from every non-wrapped edge.

    A grid extent below ``2 * truncation_radius`` g-sharp units along any
    axis leaves no trusted interior there; that raises
    :class:`TruncationBiasWarning` and the computation proceeds.
    """
    grid = a.grid
    short = [grid.axis_names[ax] for ax in range(grid.ndim)
             if grid.dims[ax].extent < 2.0 * truncation_radius * grid.gsharp_factor(ax)]
    if short:
        warnings.warn(TruncationBiasWarning(
            f"grid extent below {2.0 * truncation_radius:g} g-sharp units "
            f"along {', '.join(short)}: Gaussian regularization is "
            f"truncation-biased there"), stacklevel=2)

    vals = a.values
    for ax in range(grid.ndim):
        if vals.shape[ax] == 1:
            continue
        window = _window_matrix(vals.shape[ax], grid.dims[ax].spacing,
                                grid.gsharp_factor(ax), truncation_radius,
                                grid.axis_periodic(ax))
        vals = np.moveaxis(
            np.tensordot(window, np.moveaxis(vals, ax, 0), axes=(1, 0)), 0, ax)
    return SymbolField(grid, np.ascontiguousarray(vals, dtype=np.complex128),
                       a.independence_mask)


def _window_matrix(n: int, spacing: float, width: float, radius: float,
                   periodic: bool) -> np.ndarray:
    """One axis' Gaussian averaging matrix (rows sum to one)."""
    r = int(np.floor(radius * width / spacing))
    offs = np.arange(-r, r + 1)
    g = np.exp(-((offs * spacing) / width) ** 2)
    w = np.zeros((n, n))
    if periodic:
        g = g / g.sum()
        rows = np.arange(n)
        for m, gm in zip(offs, g):
            w[rows, (rows + m) % n] += gm
    else:
        for p in range(n):
            rp = min(p, n - 1 - p, r)
            sub = offs[np.abs(offs) <= rp]
            gp = np.exp(-((sub * spacing) / width) ** 2)
            w[p, p + sub] = gp / gp.sum()
    return w


def wick_quantize(a: SymbolField, grid: PhaseGrid | None = None, *,
                  truncation_radius: float = TRUNCATION_RADIUS,
                  provenance: str | None = None) -> DiscreteOperator:
    """Wick quantization: Weyl quantization of the Gaussian regularization.

    The averaging makes the operator of a nonnegative symbol positive
    semidefinite up to rounding and bounds its norm by the symbol's sup
    norm; symbols affine in position and momentum are fixed points of the
    regularization, for which Wick and Weyl quantization coincide.
    """
    op = weyl_quantize(gaussian_regularize(a, truncation_radius), grid,
                       provenance=provenance)
    return DiscreteOperator(op.grid, op.matrix, "wick", op.symbol_provenance)


# ---- leading-order composition ----------------------------------------


@dataclass(frozen=True)
class CompositionReport:
    """Residual sweep of Op(a) Op(b) - Op(ab) over the h values."""

    symbol_a: str
    symbol_b: str
    h_values: tuple[float, ...]
    residuals: tuple[float, ...]
    ratios: tuple[float, ...]

    def as_dict(self) -> dict:
        return {
            "symbol_a": self.symbol_a,
            "symbol_b": self.symbol_b,
            "h_values": list(self.h_values),
            "residuals": list(self.residuals),
            "ratios": list(self.ratios),
        }


def compose_leading_check(a: str | SymbolExpr, b: str | SymbolExpr,
                          grid: PhaseGrid,
                          h_values: tuple[float, ...] = H_SWEEP) -> CompositionReport:
    """Measure ||Op(a) Op(b) - Op(ab)||_2 across a semiclassical sweep.

    For each h the expressions are sampled in the chart (x, h * xi) on the
    fixed lattice, Weyl-quantized, and the operator norm of the leading
    composition defect recorded; consecutive ratios should track h itself
    (first-order decay).  Pointwise products of Fourier multipliers
    compose exactly, so x-independent pairs report residuals at rounding
    level for every h.
    """
    if isinstance(a, SymbolField) or isinstance(b, SymbolField):
        raise TypeError("compose_leading_check sweeps h, so it needs symbol "
                        "expressions (str or SymbolExpr), not sampled fields")
    residuals = []
    for h in h_values:
        grid_h = replace(grid, h=float(h))
        fa = eval_on_grid(a, grid_h, dual_scale=float(h))
        fb = eval_on_grid(b, grid_h, dual_scale=float(h))
        op_a = weyl_quantize(fa)
        op_b = weyl_quantize(fb)
        op_ab = weyl_quantize(fa * fb)
        residuals.append(float(np.linalg.norm(
            op_a.matrix @ op_b.matrix - op_ab.matrix, 2)))
    ratios = tuple(residuals[i + 1] / residuals[i] if residuals[i] > 0.0
                   else float("nan") for i in range(len(residuals) - 1))
    return CompositionReport(
        symbol_a=a if isinstance(a, str) else repr(a),
        symbol_b=b if isinstance(b, str) else repr(b),
        h_values=tuple(float(h) for h in h_values),
        residuals=tuple(residuals), ratios=ratios)


# ---- export ------------------------------------------------------------


def operator_to_npz(op: DiscreteOperator, path) -> None:
    """Write the operator and its grid to a binary container."""
    grid = op.grid
    np.savez(
        path,
        matrix=op.matrix,
        quantization=np.asarray(op.quantization),
        provenance=np.asarray(op.symbol_provenance or ""),
        base_roles=np.asarray([d.role for d in grid.base_dims]),
        base_counts=np.asarray([d.count for d in grid.base_dims]),
        base_extents=np.asarray([d.extent for d in grid.base_dims]),
        dual_extents=np.asarray([d.extent for d in grid.dual_dims]),
        h=np.asarray(grid.h),
        periodic=np.asarray(grid.periodic),
        frame=np.asarray(grid.frame),
    )


def operator_from_npz(path) -> DiscreteOperator:
    """Rebuild an exported operator, grid included."""
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
        provenance = str(data["provenance"]) or None
        return DiscreteOperator(grid, data["matrix"],
                                str(data["quantization"]), provenance)


def operator_to_csv(op: DiscreteOperator, path) -> None:
    """Write the matrix row-major, each entry as a real,imag pair."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in op.matrix:
            fh.write(",".join(f"{z.real:.17g},{z.imag:.17g}" for z in row))
            fh.write("\n")
