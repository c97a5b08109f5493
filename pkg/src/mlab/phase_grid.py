"""Discretized phase space with coordinate roles, derivatives and seminorms.

A :class:`PhaseGrid` is a tensor lattice over base coordinates (one ``t``
axis, optional ``x`` and ``y`` axes) together with their dual coordinates
(``tau``, ``xi``, ``eta``).  The dual lattice of every axis is the FFT
frequency lattice of its base axis, so quantization of lattice symbols is
exact on the grid: spacing_base * spacing_dual = 2*pi / count.

Two coordinate frames are supported.  In the ``gsharp-orthonormal`` frame
the coordinates are already orthonormal for the phase-space metric

    g_sharp = (|d base|^2) / h + h (|d dual|^2)

and derivatives need no scaling.  In the ``standard`` frame a unit
g_sharp base vector has coordinate length h^(1/2) and a unit dual vector
h^(-1/2), so g_sharp-normalized derivatives carry factors h^(1/2) (base)
and h^(-1/2) (dual) per differentiation.  The weight pipeline always
works in the gsharp-orthonormal frame; quantization works in the
standard frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

BASE_ROLES = ("t", "x", "y")
DUAL_OF = {"t": "tau", "x": "xi", "y": "eta"}
FRAME_STANDARD = "standard"
FRAME_GSHARP = "gsharp-orthonormal"
FRAMES = (FRAME_STANDARD, FRAME_GSHARP)


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridDim:
    """One lattice axis: coordinate role, point count and extent."""

    role: str
    count: int
    extent: float

    @property
    def spacing(self) -> float:
        return self.extent / self.count


@dataclass(frozen=True)
class PhaseGrid:
    """Immutable tensor-product phase-space lattice.

    Axes are ordered base-first: (t, x1, ..., y1, ...) then the matching
    duals (tau, xi1, ..., eta1, ...).  Coordinates along every axis are
    stored in increasing order and centered at zero; dual coordinates are
    the (monotonically ordered) FFT frequencies 2*pi*k/extent for
    k = -N/2 .. N/2-1.
    """

    base_dims: tuple[GridDim, ...]
    dual_dims: tuple[GridDim, ...]
    h: float
    periodic: tuple[bool, ...]
    frame: str = FRAME_STANDARD

    def __post_init__(self):
        if not (0.0 < self.h <= 1.0):
            raise ValueError(f"h must lie in (0, 1], got {self.h}")
        if self.frame not in FRAMES:
            raise ValueError(f"unknown frame {self.frame!r}; expected one of {FRAMES}")
        if len(self.base_dims) != len(self.dual_dims):
            raise ValueError("base and dual dimension lists must have equal length")
        if len(self.periodic) != len(self.base_dims):
            raise ValueError("periodic flags must match the number of base dimensions")
        n_t = sum(1 for d in self.base_dims if d.role == "t")
        if n_t == 0:
            raise ValueError("grid must have a t-role dimension")
        if n_t > 1:
            raise ValueError(f"grid must have exactly one t-role dimension, got {n_t}")
        for base, dual in zip(self.base_dims, self.dual_dims):
            if base.role not in BASE_ROLES:
                raise ValueError(f"unknown base role {base.role!r}")
            if dual.role != DUAL_OF[base.role]:
                raise ValueError(
                    f"dual role {dual.role!r} does not match base role {base.role!r}"
                )
            if base.count != dual.count:
                raise ValueError("every base dimension needs a dual of matching length")
            if base.count < 4 or not _is_power_of_two(base.count):
                raise ValueError(
                    f"point counts must be powers of two >= 4, got {base.count}"
                )

    # ---- structure ---------------------------------------------------

    @property
    def ndim_base(self) -> int:
        return len(self.base_dims)

    @property
    def base_shape(self) -> tuple[int, ...]:
        return tuple(d.count for d in self.base_dims)

    @property
    def dual_shape(self) -> tuple[int, ...]:
        return tuple(d.count for d in self.dual_dims)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.base_shape + self.dual_shape

    @property
    def ndim(self) -> int:
        return 2 * len(self.base_dims)

    @property
    def dims(self) -> tuple[GridDim, ...]:
        return self.base_dims + self.dual_dims

    @property
    def axis_names(self) -> tuple[str, ...]:
        names = []
        for dims in (self.base_dims, self.dual_dims):
            counters = {}
            for d in dims:
                if d.role in ("t", "tau"):
                    names.append(d.role)
                else:
                    counters[d.role] = counters.get(d.role, 0) + 1
                    names.append(f"{d.role}{counters[d.role]}")
        return tuple(names)

    def axis_index(self, name: str) -> int:
        try:
            return self.axis_names.index(name)
        except ValueError:
            raise KeyError(f"grid has no axis named {name!r}") from None

    def is_dual_axis(self, axis: int) -> bool:
        return axis >= self.ndim_base

    @property
    def t_axis(self) -> int:
        return next(i for i, d in enumerate(self.base_dims) if d.role == "t")

    def axis_coords(self, axis: int) -> np.ndarray:
        """Monotone coordinate values along one axis (1-d array)."""
        d = self.dims[axis]
        n = d.count
        return (np.arange(n) - n // 2) * d.spacing

    def coord_field(self, axis: int) -> np.ndarray:
        """Axis coordinates shaped for broadcasting over the full lattice."""
        shape = [1] * self.ndim
        shape[axis] = self.dims[axis].count
        return self.axis_coords(axis).reshape(shape)

    @property
    def base_measure(self) -> float:
        """Lattice measure of one base cell (product of base spacings)."""
        return float(np.prod([d.spacing for d in self.base_dims]))

    def gsharp_factor(self, axis: int) -> float:
        """Coordinate length of a unit g_sharp vector along ``axis``."""
        if self.frame == FRAME_GSHARP:
            return 1.0
        return self.h ** 0.5 if not self.is_dual_axis(axis) else self.h ** -0.5

    def with_frame(self, frame: str) -> "PhaseGrid":
        """Relabel the lattice in the other coordinate frame.

        The samples of any field carry over unchanged; only the coordinate
        values (extents) are rescaled, base extents by h^(1/2) going from
        gsharp-orthonormal to standard and dual extents by h^(-1/2), which
        preserves the FFT pairing of base and dual lattices.
        """
        if frame not in FRAMES:
            raise ValueError(f"unknown frame {frame!r}")
        if frame == self.frame:
            return self
        s = self.h ** 0.5 if frame == FRAME_STANDARD else self.h ** -0.5
        base = tuple(GridDim(d.role, d.count, d.extent * s) for d in self.base_dims)
        dual = tuple(GridDim(d.role, d.count, d.extent / s) for d in self.dual_dims)
        return PhaseGrid(base, dual, self.h, self.periodic, frame)

    def axis_periodic(self, axis: int) -> bool:
        """Base axes inherit the configured flag; dual axes never wrap."""
        if self.is_dual_axis(axis):
            return False
        return self.periodic[axis]


def build_grid(config: dict) -> PhaseGrid:
    """Build a PhaseGrid from a JSON-style configuration dict.

    Keys: ``dims`` (list of [role, count] pairs), ``extents`` (base
    extents, same length), ``h``, optional ``periodic`` (defaults to all
    True) and optional ``frame`` (defaults to "standard").  Dual extents
    are derived from the FFT pairing 2*pi*count/extent.
    """
    if not isinstance(config, dict):
        raise ValueError("grid configuration must be a mapping")
    for key in ("dims", "extents", "h"):
        if key not in config:
            raise ValueError(f"grid configuration missing key {key!r}")
    dims_cfg = config["dims"]
    extents = config["extents"]
    if len(dims_cfg) != len(extents):
        raise ValueError("dims and extents must have the same length")
    h = float(config["h"])
    if not (0.0 < h <= 1.0):
        raise ValueError(f"h must lie in (0, 1], got {h}")
    periodic = config.get("periodic", [True] * len(dims_cfg))
    if len(periodic) != len(dims_cfg):
        raise ValueError("periodic flags must match dims")
    frame = config.get("frame", FRAME_STANDARD)

    base = []
    dual = []
    for (role, count), extent in zip(dims_cfg, extents):
        count = int(count)
        extent = float(extent)
        if role not in BASE_ROLES:
            raise ValueError(f"unknown dimension role {role!r}")
        if count < 4 or not _is_power_of_two(count):
            raise ValueError(f"point counts must be powers of two >= 4, got {count}")
        if extent <= 0:
            raise ValueError(f"extents must be positive, got {extent}")
        base.append(GridDim(role, count, extent))
        dual.append(GridDim(DUAL_OF[role], count, 2.0 * np.pi * count / extent))
    return PhaseGrid(tuple(base), tuple(dual), h, tuple(bool(p) for p in periodic), frame)


@dataclass(frozen=True)
class SymbolField:
    """Complex samples of a symbol on a PhaseGrid.

    ``values`` has one axis per grid axis; axes the symbol does not
    depend on are compressed to length 1 and flagged in
    ``independence_mask`` (True = the symbol ignores that coordinate).
    """

    grid: PhaseGrid
    values: np.ndarray
    independence_mask: tuple[bool, ...]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        object.__setattr__(self, "values", vals)
        if vals.ndim != self.grid.ndim:
            raise ValueError(
                f"field has {vals.ndim} axes but grid has {self.grid.ndim}"
            )
        if len(self.independence_mask) != self.grid.ndim:
            raise ValueError("independence mask must cover every grid axis")
        for ax, (n, indep) in enumerate(zip(vals.shape, self.independence_mask)):
            want = 1 if indep else self.grid.shape[ax]
            if n != want:
                raise ValueError(
                    f"axis {ax}: shape {n} inconsistent with grid count "
                    f"{self.grid.shape[ax]} and independence flag {indep}"
                )

    @classmethod
    def from_values(cls, grid: PhaseGrid, values: np.ndarray) -> "SymbolField":
        values = np.asarray(values, dtype=np.complex128)
        if values.ndim != grid.ndim:
            raise ValueError("value array must have one axis per grid axis")
        mask = tuple(n == 1 for n in values.shape)
        return cls(grid, values, mask)

    @classmethod
    def constant(cls, grid: PhaseGrid, value: complex) -> "SymbolField":
        shape = (1,) * grid.ndim
        return cls(grid, np.full(shape, value, dtype=np.complex128),
                   (True,) * grid.ndim)

    def full_values(self) -> np.ndarray:
        return np.broadcast_to(self.values, self.grid.shape)

    def real_part(self) -> "SymbolField":
        return SymbolField(self.grid, self.values.real.astype(np.complex128),
                           self.independence_mask)

    def imag_part(self) -> "SymbolField":
        return SymbolField(self.grid, self.values.imag.astype(np.complex128),
                           self.independence_mask)

    def conj(self) -> "SymbolField":
        return SymbolField(self.grid, np.conj(self.values), self.independence_mask)

    def is_real(self, tol: float = 0.0) -> bool:
        return bool(np.max(np.abs(self.values.imag), initial=0.0) <= tol)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def depends_on(self, axis: int) -> bool:
        return not self.independence_mask[axis]

    def _binary(self, other, op) -> "SymbolField":
        if isinstance(other, SymbolField):
            if other.grid is not self.grid and other.grid != self.grid:
                raise ValueError("fields live on different grids")
            vals = op(self.values, other.values)
            mask = tuple(n == 1 for n in vals.shape)
            return SymbolField(self.grid, vals, mask)
        return SymbolField(self.grid, op(self.values, other), self.independence_mask)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __radd__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: np.subtract(b, a))

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    def __rmul__(self, other):
        return self._binary(other, np.multiply)

    def __neg__(self):
        return SymbolField(self.grid, -self.values, self.independence_mask)


# ---- finite differences ----------------------------------------------

# 4th-order first- and second-derivative stencils on 5 to 6 points.  Rows
# are offset patterns; non-central patterns are used at non-periodic edges.
_STENCILS_CACHE: dict = {}


def _stencil(offsets: tuple[int, ...], order: int) -> np.ndarray:
    """Finite-difference weights for the given integer offsets (spacing 1)."""
    key = (offsets, order)
    if key not in _STENCILS_CACHE:
        pts = np.asarray(offsets, dtype=float)
        n = len(pts)
        vander = np.vander(pts, n, increasing=True).T
        rhs = np.zeros(n)
        rhs[order] = float(math.factorial(order))
        _STENCILS_CACHE[key] = np.linalg.solve(vander, rhs)
    return _STENCILS_CACHE[key]


def _central_offsets(order: int) -> tuple[int, ...]:
    # 5-point central stencils are 4th-order accurate for both orders.
    return (-2, -1, 0, 1, 2)


def _edge_offsets(order: int, pos: int, n: int) -> tuple[int, ...]:
    """One-sided/biased offsets for point ``pos`` on an n-point axis."""
    width = 5 if order == 1 else 6
    lo = max(0, min(pos - 2, n - width))
    return tuple(range(lo - pos, lo - pos + width))


def fd_derivative(field: SymbolField, coordinate: int, order: int = 1) -> SymbolField:
    """g_sharp-normalized finite-difference derivative along one axis.

    Central 4th-order stencil with periodic wrap on periodic base axes;
    one-sided (biased) stencils of matching order at non-periodic edges.
    In the standard frame the result carries h^(order/2) for base axes
    and h^(-order/2) for dual axes so that it is g_sharp-normalized; the
    gsharp-orthonormal frame needs no scaling.
    """
    if order not in (1, 2):
        raise ValueError(f"derivative order must be 1 or 2, got {order}")
    grid = field.grid
    if not (0 <= coordinate < grid.ndim):
        raise ValueError(f"coordinate index {coordinate} out of range")
    scale = grid.gsharp_factor(coordinate) ** order
    if not field.depends_on(coordinate):
        return SymbolField(grid, np.zeros_like(field.values), field.independence_mask)

    vals = field.values
    n = vals.shape[coordinate]
    d = grid.dims[coordinate].spacing
    out = np.zeros_like(vals)
    if grid.axis_periodic(coordinate):
        w = _stencil(_central_offsets(order), order)
        for off, c in zip(_central_offsets(order), w):
            if c != 0.0:
                out += c * np.roll(vals, -off, axis=coordinate)
    else:
        moved = np.moveaxis(vals, coordinate, 0)
        res = np.zeros_like(moved)
        central = _stencil(_central_offsets(order), order)
        for i in range(n):
            if 2 <= i <= n - 3:
                offs, w = _central_offsets(order), central
            else:
                offs = _edge_offsets(order, i, n)
                w = _stencil(offs, order)
            for off, c in zip(offs, w):
                if c != 0.0:
                    res[i] += c * moved[i + off]
        out = np.moveaxis(res, 0, coordinate)
    out *= scale / d ** order
    return SymbolField(grid, out, field.independence_mask)


def seminorm(field: SymbolField, k: int) -> float:
    """Sup over the lattice of the g_sharp-normalized k-th derivative.

    The maximum is taken over all coordinate combinations of length k
    (with repetition), each evaluated as repeated first derivatives.
    """
    if k < 0 or k > 3:
        raise ValueError(f"seminorm order must satisfy 0 <= k <= 3, got {k}")
    if k == 0:
        return field.sup_norm()
    grid = field.grid
    best = 0.0
    for combo in combinations_with_replacement(range(grid.ndim), k):
        if any(not field.depends_on(ax) for ax in combo):
            continue
        g = field
        for ax in combo:
            g = fd_derivative(g, ax, 1)
        best = max(best, g.sup_norm())
    return best
