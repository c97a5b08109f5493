import json
import warnings

import numpy as np
import pytest
from scipy import integrate

from mlab.multiplier import (
    DEFAULT_EPSILON,
    LMatrixReport,
    MultiplierBundle,
    build_multiplier,
    bundle_to_json,
    compute_L_matrix,
    compute_lambda,
    compute_rho,
)
from mlab.phase_grid import SymbolField, build_grid, fd_derivative
from mlab.quantize import TruncationBiasWarning, weyl_quantize, wick_quantize
from mlab.symlang import eval_on_grid
from mlab.weights import (
    WeightField,
    compute_H,
    compute_h1,
    compute_m,
    signed_delta,
)

# Frozen oracle values (tools/oracle_multiplier.py):
#   constant-m column (dt=0.5, T=2, mu=0.3): rho at t = -T, 0, +T and the
#   continuation value one point past the lattice window; the largest
#   feasible bracket ball for a11 = 1 + x1 (first violator at x1 = -1.5).
RHO_CONST_AT_MINUS_T = -0.3
RHO_CONST_AT_ZERO = -0.15
RHO_CONST_AT_T = 0.0
RHO_CONST_BEYOND = 0.11249999999999993
L_LINEAR_RADIUS = np.sqrt(2.0)


def t_grid(n=16, extent=8.0, h=0.25, **overrides):
    cfg = {"dims": [["t", n]], "extents": [extent], "h": h,
           "periodic": [False]}
    cfg.update(overrides)
    return build_grid(cfg)


def ty_grid(**overrides):
    cfg = {"dims": [["t", 16], ["y", 16]], "extents": [8.0, 6.0], "h": 0.1,
           "periodic": [False, False]}
    cfg.update(overrides)
    return build_grid(cfg)


def txx_grid(**overrides):
    cfg = {"dims": [["t", 8], ["x", 16], ["x", 16]],
           "extents": [4.0, 8.0, 8.0], "h": 0.1,
           "periodic": [False, False, False]}
    cfg.update(overrides)
    return build_grid(cfg)


def tx_grid(**overrides):
    cfg = {"dims": [["t", 8], ["x", 8]], "extents": [4.0, 4.0], "h": 0.1,
           "periodic": [False, False]}
    cfg.update(overrides)
    return build_grid(cfg)


def rho_brute(delta_col, m_col, coords, dt, T):
    """Literal sup over lattice s in [-T, t] for one column.

    Enumerates every s; shares the sweep's A(s) + B(t) decomposition
    (max over prefixes is associative) and its exact s = t candidate,
    so agreement is expected bit for bit.
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


def weight_pipeline(f, t_window=None):
    d = signed_delta(f)
    H = compute_H(f, d)
    m = compute_m(d, compute_h1(H), t_window)
    return d, H, m


def quiet_bundle(*args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationBiasWarning)
        return build_multiplier(*args, **kwargs)


class TestComputeRho:
    def test_constant_m_formula(self):
        g = t_grid()
        mu = 0.3
        delta = WeightField(g, np.zeros((16, 1)), "delta", g.h)
        m = WeightField(g, np.full((16, 1), mu), "m", g.h)
        rho = compute_rho(delta, m, 2.0)
        coords = g.axis_coords(0)
        onwin = np.abs(coords) <= 2.0
        formula = mu * (coords + 2.0) / 4.0 - mu
        np.testing.assert_allclose(rho.values[onwin, 0], formula[onwin],
                                   rtol=0, atol=1e-15)
        assert rho.values[coords.tolist().index(-2.0), 0] == RHO_CONST_AT_MINUS_T
        assert rho.values[8, 0] == RHO_CONST_AT_ZERO
        assert rho.values[coords.tolist().index(2.0), 0] == RHO_CONST_AT_T
        assert rho.values[-1, 0] == RHO_CONST_BEYOND

    def test_increasing_delta_zero_m_gives_zero(self):
        g = t_grid()
        delta = WeightField(g, np.tanh(g.axis_coords(0))[:, None], "delta", g.h)
        m = WeightField(g, np.zeros((1, 1)), "m", g.h)
        rho = compute_rho(delta, m, 2.0)
        assert np.array_equal(rho.values, np.zeros((16, 1)))

    def test_matches_brute_force_bitwise(self):
        g = ty_grid()
        rng = np.random.default_rng(7)
        shape = (16, 16, 1, 16)
        dvals = np.cumsum(rng.uniform(0.0, 0.4, size=shape), axis=0)
        mvals = rng.uniform(0.05, 1.0, size=shape)
        delta = WeightField(g, dvals, "delta", g.h)
        m = WeightField(g, mvals, "m", g.h)
        T = 3.0
        rho = compute_rho(delta, m, T)
        coords = g.axis_coords(0)
        dt = g.dims[0].spacing
        d2 = dvals.reshape(16, -1)
        m2 = mvals.reshape(16, -1)
        r2 = rho.values.reshape(16, -1)
        for w in range(d2.shape[1]):
            expect = rho_brute(d2[:, w], m2[:, w], coords, dt, T)
            assert np.array_equal(r2[:, w], expect)

    def test_pipeline_rho_bounded_by_m_exactly(self):
        g = ty_grid()
        f = eval_on_grid("t * (1 + 0.5 * sin(eta1))", g)
        delta, _, m = weight_pipeline(f)
        rho = compute_rho(delta, m, 2.0)
        full = np.broadcast_to(m.values, rho.values.shape)
        assert np.all(np.abs(rho.values) <= full)

    def test_discrete_commutator_bound(self):
        g = ty_grid()
        f = eval_on_grid("t * (1 + 0.5 * sin(eta1))", g)
        delta, _, m = weight_pipeline(f)
        T = 2.0
        rho = compute_rho(delta, m, T)
        b = delta.values + rho.values
        dt = g.dims[0].spacing
        coords = g.axis_coords(0)
        pair = (np.abs(coords[:-1]) <= T) & (np.abs(coords[1:]) <= T)
        lhs = T * np.diff(b, axis=0) / dt
        mfull = np.broadcast_to(m.values, b.shape)
        slack = lhs[pair] - (mfull[:-1][pair] / 2.0
                             - 2.0 * mfull.max() * dt)
        assert np.min(slack) >= 0.0

    def test_left_of_window_is_minus_m(self):
        # no admissible s below -T: the field takes the degenerate
        # s = t value -m(t), matching the sweep's first window value.
        g = t_grid()
        rng = np.random.default_rng(3)
        delta = WeightField(g, np.cumsum(rng.uniform(size=(16, 1)), axis=0),
                            "delta", g.h)
        m = WeightField(g, rng.uniform(0.1, 0.5, size=(16, 1)), "m", g.h)
        rho = compute_rho(delta, m, 1.0)
        coords = g.axis_coords(0)
        i0 = int(np.nonzero(coords >= -1.0)[0][0])
        assert i0 > 0
        assert np.array_equal(rho.values[:i0], -m.values[:i0])
        # at i0 itself the sweep's only candidate is s = t, so the value
        # agrees with -m to an ulp (the clamp pins the downward side)
        assert rho.values[i0, 0] == pytest.approx(-m.values[i0, 0], rel=1e-15)
        assert rho.values[i0, 0] >= -m.values[i0, 0]

    def test_separation_lower_bound(self):
        # |delta| >= eps H^{-1/2} and H^{1/2} <= eps/3 force
        # |delta + rho_T| >= eps H^{-1/2}/3.
        g = t_grid(n=64, extent=32.0, h=0.01)
        f = eval_on_grid("t", g)
        delta, H, m = weight_pipeline(f)
        rho = compute_rho(delta, m, 8.0)
        eps = 0.5
        hm12 = np.broadcast_to(H.values, rho.values.shape)
        dv = np.broadcast_to(delta.values, rho.values.shape)
        mask = (np.abs(dv) >= eps * hm12) & (1.0 / hm12 <= eps / 3.0)
        assert mask.sum() > 10
        lhs = np.abs(dv + rho.values)[mask]
        assert np.all(lhs >= (eps / 3.0) * hm12[mask] * (1.0 - 1e-12))

    def test_role_and_window_info(self):
        g = t_grid()
        delta = WeightField(g, np.zeros((16, 1)), "delta", g.h)
        m = WeightField(g, np.full((16, 1), 0.1), "m", g.h)
        rho = compute_rho(delta, m, 1.5)
        assert rho.role == "rho_T"
        assert rho.info_dict == {"T": 1.5}
        assert rho.h == delta.h

    def test_window_errors(self):
        g = t_grid()
        delta = WeightField(g, np.zeros((16, 1)), "delta", g.h)
        m = WeightField(g, np.full((16, 1), 0.1), "m", g.h)
        with pytest.raises(ValueError, match="exceeds the t extent"):
            compute_rho(delta, m, 4.5)
        with pytest.raises(ValueError, match="positive"):
            compute_rho(delta, m, 0.0)
        with pytest.raises(ValueError, match="nonnegative"):
            compute_rho(delta, WeightField(g, np.full((16, 1), -0.1), "m", g.h),
                        1.0)

    def test_mismatched_inputs(self):
        ga, gb = t_grid(), t_grid(extent=16.0)
        delta = WeightField(ga, np.zeros((16, 1)), "delta", ga.h)
        m_other = WeightField(gb, np.full((16, 1), 0.1), "m", gb.h)
        with pytest.raises(ValueError, match="different grids"):
            compute_rho(delta, m_other, 1.0)
        m_h = WeightField(ga, np.full((16, 1), 0.1), "m", 0.5)
        with pytest.raises(ValueError, match="different h"):
            compute_rho(delta, m_h, 1.0)


class TestComputeLMatrix:
    def test_identity_table(self):
        g = txx_grid()
        one, zero = eval_on_grid("1", g), eval_on_grid("0", g)
        rep = compute_L_matrix([[one, zero], [zero, one]])
        assert np.array_equal(rep.L, np.eye(2))
        assert rep.x0 == (0.0, 0.0)
        # bracket = 2|xi|^2 >= |xi|^2 on the whole lattice
        assert rep.validity_radius == np.sqrt(32.0)
        assert rep.c1 == 0.0

    def test_hyperbolic_table(self):
        g = txx_grid()
        one, zero = eval_on_grid("1", g), eval_on_grid("0", g)
        mone = eval_on_grid("-1", g)
        rep = compute_L_matrix([[one, zero], [zero, mone]])
        assert np.array_equal(rep.L, np.diag([1.0, -1.0]))
        assert rep.validity_radius == np.sqrt(32.0)
        assert rep.c1 == 0.0

    def test_fd_poisson_bracket_oracle(self):
        # full finite-difference bracket of A = xi1^2 - xi2^2 against the
        # analytic 2|xi|^2 (one-sided stencils are exact on quadratics).
        g = txx_grid()
        XI1, XI2 = g.coord_field(4), g.coord_field(5)
        X1, X2 = g.coord_field(1), g.coord_field(2)
        A = SymbolField.from_values(g, (XI1 ** 2 - XI2 ** 2).astype(complex))
        G = SymbolField.from_values(g, (X1 * XI1 - X2 * XI2).astype(complex))
        bracket = 0.0
        for xj, xij in ((1, 4), (2, 5)):
            fx, fxi = g.gsharp_factor(xj), g.gsharp_factor(xij)
            bracket = (bracket
                       + (fd_derivative(A, xij).values.real / fxi)
                       * (fd_derivative(G, xj).values.real / fx)
                       - (fd_derivative(A, xj).values.real / fx)
                       * (fd_derivative(G, xij).values.real / fxi))
        expect = 2.0 * (XI1 ** 2 + XI2 ** 2)
        assert np.max(np.abs(bracket - expect)) <= 1e-10 * expect.max()

    def test_linear_coefficient_ball(self):
        g = txx_grid()
        one, zero = eval_on_grid("1", g), eval_on_grid("0", g)
        a11 = eval_on_grid("1 + x1", g)
        rep = compute_L_matrix([[a11, zero], [zero, one]])
        assert np.array_equal(rep.L, np.eye(2))
        assert rep.validity_radius == L_LINEAR_RADIUS
        assert rep.c1 == pytest.approx(0.0, abs=1e-12)
        assert rep.c1_max == 1.0

    def test_frame_independent_ball(self):
        cfg = {"frame": "gsharp-orthonormal"}
        g = txx_grid(**cfg)
        one, zero = eval_on_grid("1", g), eval_on_grid("0", g)
        a11 = eval_on_grid("1 + x1", g)
        rep = compute_L_matrix([[a11, zero], [zero, one]])
        assert rep.validity_radius == L_LINEAR_RADIUS

    def test_base_point_snapping(self):
        g = tx_grid()
        a11 = eval_on_grid("1 + x1", g)
        rep = compute_L_matrix([[a11]], {"x1": 0.77})
        assert rep.x0 == (1.0,)
        assert rep.L[0, 0] == 0.5

    def test_singular_raises(self):
        g = txx_grid()
        one = eval_on_grid("1", g)
        with pytest.raises(ValueError, match="singular"):
            compute_L_matrix([[one, one], [one, one]])

    def test_asymmetric_raises(self):
        g = txx_grid()
        one, zero = eval_on_grid("1", g), eval_on_grid("0", g)
        two = eval_on_grid("2", g)
        with pytest.raises(ValueError, match="not symmetric"):
            compute_L_matrix([[one, two], [zero, one]])

    def test_xi_dependent_coefficient_raises(self):
        g = tx_grid()
        with pytest.raises(ValueError, match="dual variables"):
            compute_L_matrix([[eval_on_grid("1 + xi1^2", g)]])

    def test_table_shape_errors(self):
        g = txx_grid()
        one = eval_on_grid("1", g)
        with pytest.raises(ValueError, match="square"):
            compute_L_matrix([[one, one]])
        with pytest.raises(ValueError, match="leaf axes"):
            compute_L_matrix([[one]])

    def test_unknown_base_point_axis(self):
        g = tx_grid()
        with pytest.raises(ValueError, match="unknown base axis"):
            compute_L_matrix([[eval_on_grid("1", g)]], {"q3": 0.0})


class TestComputeLambda:
    def test_elementwise_formula(self):
        g = tx_grid()
        lam = compute_lambda(np.eye(1), 1.0, 1.0, 0.04, g)
        x1 = g.axis_coords(1)
        xi1 = g.axis_coords(3)
        inside = np.abs(x1) <= 1.0
        expect = 0.2 * x1[inside, None] * xi1[None, :]
        got = lam.values[0, inside, 0, :].real
        np.testing.assert_allclose(got, expect, rtol=1e-15, atol=0)

    def test_documented_scale(self):
        # eps = 1, h = 0.04, T = 1: the prefactor is h^{1/2} = 0.2, so a
        # point with (x - x0) xi = 1 carries the value 0.2.
        g = tx_grid()
        lam = compute_lambda(np.eye(1), 1.0, 1.0, 0.04, g)
        x1 = g.axis_coords(1)
        xi1 = g.axis_coords(3)
        ix = x1.tolist().index(0.5)
        vals = lam.values[0, ix, 0, :].real
        np.testing.assert_allclose(vals, 0.2 * 0.5 * xi1, rtol=1e-15)

    def test_zero_on_base_plane(self):
        g = txx_grid()
        lam = compute_lambda(np.eye(2), 0.5, 1.0, None, g)
        assert not np.any(lam.values[:, 8, 8])

    def test_taper_vanishes_one_cell_out(self):
        g = tx_grid()
        lam = compute_lambda(np.eye(1), 1.0, 1.0, 0.1, g)
        x1 = g.axis_coords(1)
        outside = np.abs(x1) >= 1.0 + g.dims[1].spacing
        assert not np.any(lam.values[:, outside])

    def test_taper_ramp_value(self):
        g = tx_grid()
        T = 1.2
        lam = compute_lambda(np.eye(1), 1.0, T, 0.04, g)
        x1 = g.axis_coords(1)
        xi1 = g.axis_coords(3)
        ix = x1.tolist().index(1.5)  # mid-ramp: (1.5 - 1.2)/0.5 = 0.6
        w = np.cos(0.5 * np.pi * 0.6) ** 2
        expect = (0.2 / T) * 1.5 * xi1 * w
        np.testing.assert_allclose(lam.values[0, ix, 0, :].real, expect,
                                   rtol=1e-12)

    def test_xi_cap_zeroes_high_frequencies(self):
        g = tx_grid()
        cap = 2.0
        lam = compute_lambda(np.eye(1), 1.0, 1.0, 0.1, g, xi_cap=cap)
        xi1 = g.axis_coords(3)
        far = np.abs(xi1) >= cap + g.dims[3].spacing
        assert far.any()
        assert not np.any(lam.values[..., far])

    def test_epsilon_bounds(self):
        g = tx_grid()
        with pytest.raises(ValueError, match="epsilon"):
            compute_lambda(np.eye(1), 0.0, 1.0, 0.1, g)
        with pytest.raises(ValueError, match="epsilon"):
            compute_lambda(np.eye(1), 1.5, 1.0, 0.1, g)

    def test_L_shape_mismatch(self):
        g = txx_grid()
        with pytest.raises(ValueError, match="2x2"):
            compute_lambda(np.eye(3), 0.5, 1.0, 0.1, g)


class TestBuildMultiplier:
    def test_zero_components_zero_operator(self):
        g = tx_grid()
        z = WeightField(g, np.zeros((1, 1, 1, 1)), "delta", g.h)
        zr = WeightField(g, np.zeros((1, 1, 1, 1)), "rho_T", g.h,
                         info=(("T", 1.0),))
        bundle = quiet_bundle(z, zr)
        assert not np.any(bundle.b_op.matrix)
        assert bundle.T == 1.0
        assert bundle.L is None and bundle.x0 is None

    def test_affine_lambda_wick_equals_weyl(self):
        g = tx_grid()
        lam = compute_lambda(np.eye(1), 1.0, 50.0, 0.04, g, xi_cap=1e9)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationBiasWarning)
            wk = wick_quantize(lam)
            wy = weyl_quantize(lam)
        scale = np.max(np.abs(wy.matrix))
        assert np.max(np.abs(wk.matrix - wy.matrix)) <= 1e-13 * scale

    def test_model_bundle_invariants(self):
        g = ty_grid()
        f = eval_on_grid("t * abs(eta1)", g)
        delta, _, m = weight_pipeline(f)
        rho = compute_rho(delta, m, 2.0)
        bundle = quiet_bundle(delta, rho, m=m, epsilon=DEFAULT_EPSILON)
        assert bundle.b_op.is_hermitian(1e-10)
        assert bundle.b_op.quantization == "wick"
        sup_b = float(np.max(np.abs(bundle.B_T.values.real)))
        assert bundle.b_op.op_norm() <= 1.05 * sup_b
        assert bundle.delta1 is not None and bundle.rho1 is not None
        assert bundle.delta1.is_real(1e-12)

    def test_rho_above_m_rejected(self):
        g = t_grid()
        delta = WeightField(g, np.zeros((16, 1)), "delta", g.h)
        m = WeightField(g, np.full((16, 1), 0.1), "m", g.h)
        too_big = WeightField(g, np.full((16, 1), 0.2), "rho_T", g.h,
                              info=(("T", 1.0),))
        with pytest.raises(ValueError, match="exceeds m"):
            quiet_bundle(delta, too_big, m=m)

    def test_missing_window_raises(self):
        g = t_grid()
        delta = WeightField(g, np.zeros((16, 1)), "delta", g.h)
        bare = WeightField(g, np.zeros((16, 1)), "rho_T", g.h)
        with pytest.raises(ValueError, match="window half-width"):
            quiet_bundle(delta, bare)

    def test_complex_symbol_rejected(self):
        g = tx_grid()
        z = WeightField(g, np.zeros((1, 1, 1, 1)), "delta", g.h)
        zr = WeightField(g, np.zeros((1, 1, 1, 1)), "rho_T", g.h,
                         info=(("T", 1.0),))
        lam = SymbolField.constant(g, 1.0j)
        with pytest.raises(ValueError, match="real-valued"):
            quiet_bundle(z, zr, lam)

    def test_summary_and_json(self, tmp_path):
        g = tx_grid()
        f = eval_on_grid("t", g)
        delta, _, m = weight_pipeline(f)
        rho = compute_rho(delta, m, 1.0)
        lam = compute_lambda(np.eye(1), 0.1, 1.0, None, g)
        rep = compute_L_matrix([[eval_on_grid("1", g)]])
        bundle = quiet_bundle(delta, rho, lam, epsilon=0.1, l_report=rep,
                              m=m)
        s = bundle.summary()
        assert s["T"] == 1.0
        assert s["epsilon"] == 0.1
        assert s["L"] == [[1.0]]
        assert s["validity_radius"] == 2.0
        assert s["grid"]["h"] == 0.1
        assert s["hermitian_defect"] <= 1e-12
        path = tmp_path / "bundle.json"
        bundle_to_json(bundle, path)
        first = path.read_bytes()
        bundle_to_json(bundle, path)
        assert path.read_bytes() == first
        parsed = json.loads(first)
        assert parsed["sup_B"] == s["sup_B"]


class TestAccelParity:
    def test_rho_sweep_matches_numpy(self, monkeypatch):
        g = ty_grid()
        rng = np.random.default_rng(11)
        shape = (16, 16, 1, 16)
        delta = WeightField(g, np.cumsum(rng.uniform(0, 0.3, shape), axis=0),
                            "delta", g.h)
        m = WeightField(g, rng.uniform(0.01, 0.8, shape), "m", g.h)
        fast = compute_rho(delta, m, 2.5)
        monkeypatch.setenv("MLAB_NUMBA", "0")
        slow = compute_rho(delta, m, 2.5)
        assert np.array_equal(fast.values, slow.values)
