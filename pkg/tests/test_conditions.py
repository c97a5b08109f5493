import json

import numpy as np
import pytest

from mlab.conditions import (
    ConditionReport,
    check_subr_psi,
    hessian_at_sigma2,
    leaf_sign,
    limit_hamilton_field,
    refined_symbol,
    subprincipal_symbol,
)
from mlab.phase_grid import SymbolField, build_grid
from mlab.symlang import eval_on_grid


def tx_grid(**overrides):
    cfg = {"dims": [["t", 8], ["x", 16]], "extents": [4.0, 4.0], "h": 0.5,
           "periodic": [False, False]}
    cfg.update(overrides)
    return build_grid(cfg)


def txx_grid(**overrides):
    cfg = {"dims": [["t", 4], ["x", 8], ["x", 8]],
           "extents": [2.0, 4.0, 4.0], "h": 0.5,
           "periodic": [False, False, False]}
    cfg.update(overrides)
    return build_grid(cfg)


class TestSubprincipalSymbol:
    def test_constant_coefficient_quadratic_passes_through(self):
        g = tx_grid()
        p = eval_on_grid("xi1^2 + 2*xi1*tau - tau^2", g)
        p_lower = eval_on_grid("sin(t) + i*x1", g)
        ps = subprincipal_symbol(p, p_lower)
        assert np.abs(ps.full_values() - p_lower.full_values()).max() == 0.0

    def test_product_of_two_duals_passes_through(self):
        g = txx_grid()
        p = eval_on_grid("xi1*xi2", g)
        p_lower = eval_on_grid("t", g)
        ps = subprincipal_symbol(p, p_lower)
        assert np.abs(ps.full_values() - p_lower.full_values()).max() == 0.0

    def test_mixed_term_gains_i_xi(self):
        g = tx_grid()
        ps = subprincipal_symbol(eval_on_grid("x1*xi1^2", g),
                                 eval_on_grid("sin(t)", g))
        expect = eval_on_grid("sin(t) + i*xi1", g)
        assert np.abs(ps.full_values() - expect.full_values()).max() <= 1e-10

    def test_base_only_and_dual_only_terms_are_killed(self):
        g = tx_grid()
        p = eval_on_grid("x1*xi1^2", g)
        p_lower = eval_on_grid("sin(t)", g)
        base = subprincipal_symbol(p, p_lower)
        shifted = subprincipal_symbol(
            p + eval_on_grid("t*x1^2", g) + eval_on_grid("tau^2*xi1", g),
            p_lower)
        assert np.abs(shifted.full_values() - base.full_values()).max() <= 1e-10

    def test_grid_mismatch_is_rejected(self):
        p = eval_on_grid("xi1^2", tx_grid())
        p_lower = eval_on_grid("t", tx_grid(extents=[4.0, 5.0]))
        with pytest.raises(ValueError, match="different grids"):
            subprincipal_symbol(p, p_lower)


class TestRefinedSymbol:
    def test_zero_correction_passes_through(self):
        g = tx_grid()
        p = eval_on_grid("xi1^2", g)
        pr = refined_symbol(p, eval_on_grid("0", g))
        assert np.abs(pr.full_values() - p.full_values()).max() == 0.0

    def test_schroedinger_pair_sum(self):
        g = tx_grid()
        pr = refined_symbol(eval_on_grid("(1+t^2)*xi1^2", g),
                            eval_on_grid("(1+i*t)*tau", g))
        expect = eval_on_grid("(1+t^2)*xi1^2 + (1+i*t)*tau", g)
        assert np.abs(pr.full_values() - expect.full_values()).max() == 0.0

    def test_grid_mismatch_is_rejected(self):
        with pytest.raises(ValueError, match="different grids"):
            refined_symbol(eval_on_grid("xi1^2", tx_grid()),
                           eval_on_grid("tau", tx_grid(extents=[4.0, 5.0])))


class TestHessianAtSigma2:
    def test_hyperbolic_quadratic(self):
        g = txx_grid()
        rep = hessian_at_sigma2(eval_on_grid("xi1^2 - xi2^2", g))
        assert rep.nondegenerate
        assert rep.rank == 2
        assert rep.signature == 0
        assert rep.min_abs_eigenvalue == pytest.approx(2.0, rel=1e-8)
        at_origin = rep.matrices[0, 0, 0, 0]
        assert np.allclose(at_origin, np.diag([2.0, -2.0]), atol=1e-8)

    def test_rank_deficient_quadratic_is_degenerate(self):
        g = txx_grid()
        rep = hessian_at_sigma2(eval_on_grid("xi1^2", g))
        assert not rep.nondegenerate
        assert rep.rank == 1
        assert rep.signature == 1

    def test_first_order_symbol_is_rejected(self):
        g = txx_grid()
        with pytest.raises(ValueError, match="vanish to second order"):
            hessian_at_sigma2(eval_on_grid("xi1", g))

    def test_error_names_a_lattice_point(self):
        g = txx_grid()
        with pytest.raises(ValueError, match=r"at lattice point \("):
            hessian_at_sigma2(eval_on_grid("xi1", g))

    def test_nonvanishing_symbol_is_rejected(self):
        g = txx_grid()
        with pytest.raises(ValueError, match=r"\|p\|"):
            hessian_at_sigma2(eval_on_grid("1 + xi1^2", g))

    def test_grid_without_x_axes_is_rejected(self):
        g = build_grid({"dims": [["t", 8]], "extents": [4.0], "h": 0.5})
        with pytest.raises(ValueError, match="no x-role axes"):
            hessian_at_sigma2(eval_on_grid("tau^2", g))

    def test_x_dependent_coefficients_are_evaluated_pointwise(self):
        g = tx_grid()
        rep = hessian_at_sigma2(eval_on_grid("(2+sin(x1))*xi1^2", g))
        want = 2.0 * (2.0 + np.sin(g.axis_coords(1)))
        got = rep.matrices[0, :, 0, 0, 0]
        assert np.abs(got - want).max() <= 1e-6


class TestLimitHamiltonField:
    def test_identity_hessian_unit_direction(self):
        g = txx_grid()
        fld = limit_hamilton_field(eval_on_grid("xi1^2 + xi2^2", g),
                                   eval_on_grid("tau", g))
        coeff = fld.coefficients(np.array([1.0, 0.0]))
        assert np.allclose(coeff[0, 0, 0, 0], [2.0, 0.0], atol=1e-8)
        assert fld.t_component == 1.0

    def test_zero_direction_gives_subprincipal_drift(self):
        g = txx_grid()
        fld = limit_hamilton_field(
            eval_on_grid("xi1^2 + xi2^2", g),
            eval_on_grid("tau + (2+3*i)*xi1 + t*xi2", g))
        coeff = fld.coefficients(np.zeros(2))
        tcoords = g.axis_coords(0)
        assert np.abs(coeff[..., 0] - 2.0).max() <= 1e-8
        assert np.abs(coeff[:, 0, 0, 0, 1] - tcoords).max() <= 1e-8

    def test_indefinite_hessian_direction(self):
        g = txx_grid()
        fld = limit_hamilton_field(eval_on_grid("xi1^2 - xi2^2", g),
                                   eval_on_grid("tau", g))
        theta = np.array([1.0, 1.0]) / np.sqrt(2.0)
        coeff = fld.coefficients(theta)[0, 0, 0, 0]
        assert np.allclose(coeff, [np.sqrt(2.0), -np.sqrt(2.0)], atol=1e-8)

    def test_degenerate_hessian_is_rejected(self):
        g = txx_grid()
        with pytest.raises(ValueError, match="degenerate"):
            limit_hamilton_field(eval_on_grid("xi1^2", g),
                                 eval_on_grid("tau", g))

    def test_bad_theta_shape_is_rejected(self):
        g = txx_grid()
        fld = limit_hamilton_field(eval_on_grid("xi1^2 + xi2^2", g),
                                   eval_on_grid("tau", g))
        with pytest.raises(ValueError, match="theta"):
            fld.coefficients(np.zeros(3))


def checkerboard_field(grid, n1, n2, square=2):
    i1, i2 = np.meshgrid(np.arange(n1) // square, np.arange(n2) // square,
                         indexing="ij")
    board = np.where((i1 % 2 == 0) & (i2 % 2 == 0), 1.0,
                     np.where((i1 % 2 == 1) & (i2 % 2 == 1), -1.0, 0.0))
    vals = board[None, :, :, None, None, None].astype(complex)
    return SymbolField.from_values(grid, vals)


class TestLeafSign:
    def test_zero_field_has_all_zero_signs(self):
        g = txx_grid()
        table = leaf_sign(eval_on_grid("0", g))
        assert np.all(table.signs == 0)
        assert table.n_mixed == 0

    def test_x_independent_field_gives_pointwise_sign(self):
        g = tx_grid()
        table = leaf_sign(eval_on_grid("t", g))
        tcoords = g.axis_coords(0)
        assert np.array_equal(table.signs[:, 0],
                              np.sign(tcoords).astype(np.int8))

    def test_checkerboard_marks_every_leaf_mixed(self):
        g = txx_grid(periodic=[True, True, True])
        table = leaf_sign(checkerboard_field(g, 8, 8))
        assert bool(table.mixed.all())
        assert np.all(table.signs != 0)

    def test_below_threshold_values_count_as_zero(self):
        g = tx_grid()
        vals = np.zeros((8, 1, 1, 1), dtype=complex)
        vals[0] = 1.0
        vals[4] = 1e-20
        vals[7] = -1.0
        table = leaf_sign(SymbolField.from_values(g, vals))
        assert table.signs[0, 0] == 1
        assert table.signs[4, 0] == 0
        assert table.signs[7, 0] == -1

    def test_witness_points_attain_the_leaf_maximum(self):
        g = tx_grid()
        rng = np.random.default_rng(5)
        vals = rng.standard_normal((8, 16, 8, 1)).astype(complex)
        f = SymbolField.from_values(g, vals)
        table = leaf_sign(f)
        full = np.abs(f.full_values().real)
        for it in range(8):
            for itau in range(8):
                w = table.witnesses[it, itau]
                leaf = full[it, :, itau, 0]
                assert leaf[w[0]] == leaf.max()

    def test_matches_brute_force_scan(self):
        g = tx_grid()
        rng = np.random.default_rng(42)
        for _ in range(20):
            vals = rng.integers(-1, 2, size=(8, 16, 8, 1)).astype(complex)
            f = SymbolField.from_values(g, vals)
            table = leaf_sign(f)
            full = f.full_values().real
            thr = table.zero_threshold
            for it in range(8):
                for itau in range(8):
                    leaf = full[it, :, itau, 0]
                    pos, neg = leaf.max() > thr, leaf.min() < -thr
                    expect_mixed = pos and neg
                    expect_zero = np.abs(leaf).max() <= thr
                    assert bool(table.mixed[it, itau]) == expect_mixed
                    assert (table.signs[it, itau] == 0) == expect_zero

    def test_complex_field_is_rejected(self):
        g = tx_grid()
        with pytest.raises(ValueError, match="real-valued"):
            leaf_sign(eval_on_grid("t + i*x1", g))

    def test_xi_dependent_field_is_rejected(self):
        g = tx_grid()
        with pytest.raises(ValueError, match="characteristic slice"):
            leaf_sign(eval_on_grid("t*xi1", g))

    def test_numpy_path_matches_jit_path(self, monkeypatch):
        g = tx_grid()
        rng = np.random.default_rng(9)
        vals = rng.standard_normal((8, 16, 8, 1)).astype(complex)
        f = SymbolField.from_values(g, vals)
        t1 = leaf_sign(f)
        monkeypatch.setenv("MLAB_NUMBA", "0")
        t2 = leaf_sign(f)
        assert np.array_equal(t1.signs, t2.signs)
        assert np.array_equal(t1.mixed, t2.mixed)
        assert np.array_equal(t1.witnesses, t2.witnesses)


class TestCheckSubrPsi:
    def lattice_field(self, grid, t_profile, extra_shape=(1, 1, 1)):
        vals = np.asarray(t_profile, dtype=complex).reshape(
            (-1,) + extra_shape)
        return SymbolField.from_values(grid, vals)

    def test_increasing_sign_fails_psi_and_passes_psi_bar(self):
        g = tx_grid()
        f = eval_on_grid("t*(2+sin(tau))", g)
        assert check_subr_psi(f, "Psi").verdict == "fail-monotonicity"
        assert check_subr_psi(f, "Psi-bar").verdict == "pass"

    def test_decreasing_sign_fails_psi_bar_with_witness_after_zero(self):
        g = tx_grid()
        f = eval_on_grid("0 - t*(2+sin(tau))", g)
        rep = check_subr_psi(f, "Psi-bar")
        assert rep.verdict == "fail-monotonicity"
        assert rep.n_violations >= 1
        t_indices = {v[0] for v in rep.violations}
        assert t_indices == {5}  # first negative leaf just after t = 0
        assert check_subr_psi(f, "Psi").verdict == "pass"

    def test_zero_field_passes_both_orientations(self):
        g = tx_grid()
        for orientation in ("Psi", "Psi-bar"):
            rep = check_subr_psi(eval_on_grid("0", g), orientation)
            assert rep.verdict == "pass"
            assert rep.violations == ()

    def test_zero_leaves_do_not_reset_the_scan(self):
        g = tx_grid()
        f = self.lattice_field(g, [-1, 0, 0, 0, 0, 0, 0, 1])
        rep = check_subr_psi(f, "Psi")
        assert rep.verdict == "fail-monotonicity"
        assert rep.violations[0][0] == 7
        assert check_subr_psi(f, "Psi-bar").verdict == "pass"

    def test_checkerboard_fails_leaf_sign(self):
        g = txx_grid(periodic=[True, True, True])
        f = checkerboard_field(g, 8, 8)
        rep = check_subr_psi(f, "Psi")
        assert rep.verdict == "fail-leaf-sign"
        assert rep.n_violations >= 1
        assert len(rep.violations) >= 1

    def test_single_dual_slice_violation_fails(self):
        g = tx_grid()
        vals = np.zeros((8, 1, 8, 1), dtype=complex)
        vals[:, 0, 1, 0] = g.axis_coords(0)
        rep = check_subr_psi(SymbolField.from_values(g, vals), "Psi")
        assert rep.verdict == "fail-monotonicity"
        assert all(v[2] == 1 for v in rep.violations)

    def test_time_reversal_negation_symmetry(self):
        g = tx_grid()
        rng = np.random.default_rng(17)
        for _ in range(30):
            vals = rng.integers(-1, 2, size=(8, 1, 8, 1)).astype(complex)
            f = SymbolField.from_values(g, vals)
            mirrored = SymbolField.from_values(g, -np.flip(vals, axis=0))
            for orientation in ("Psi", "Psi-bar"):
                assert (check_subr_psi(f, orientation).verdict
                        == check_subr_psi(mirrored, orientation).verdict)

    def test_positive_x_independent_factor_preserves_verdicts(self):
        g = tx_grid()
        rng = np.random.default_rng(23)
        factor = SymbolField.from_values(
            g, rng.uniform(0.5, 2.0, size=(1, 1, 8, 1)).astype(complex))
        for _ in range(20):
            vals = rng.integers(-1, 2, size=(8, 16, 8, 1)).astype(complex)
            f = SymbolField.from_values(g, vals)
            scaled = f * factor
            for orientation in ("Psi", "Psi-bar"):
                assert (check_subr_psi(f, orientation).verdict
                        == check_subr_psi(scaled, orientation).verdict)

    def test_unknown_orientation_is_rejected(self):
        g = tx_grid()
        with pytest.raises(ValueError, match="orientation"):
            check_subr_psi(eval_on_grid("t", g), "psi-minus")


class TestConditionReport:
    def test_fail_without_witness_is_rejected(self):
        with pytest.raises(ValueError, match="witness"):
            ConditionReport(verdict="fail-monotonicity", orientation="Psi",
                            axis_names=("t", "tau"), violations=(),
                            n_violations=0, zero_threshold=1e-12)

    def test_unknown_verdict_is_rejected(self):
        with pytest.raises(ValueError, match="verdict"):
            ConditionReport(verdict="maybe", orientation="Psi",
                            axis_names=("t", "tau"), violations=(),
                            n_violations=0, zero_threshold=1e-12)

    def test_json_round_trip_is_deterministic(self):
        g = tx_grid()
        f = eval_on_grid("t*(2+sin(tau))", g)
        r1 = check_subr_psi(f, "Psi").to_json()
        r2 = check_subr_psi(f, "Psi").to_json()
        assert r1 == r2
        payload = json.loads(r1)
        assert payload["verdict"] == "fail-monotonicity"
        assert payload["orientation"] == "Psi"
        assert payload["n_violations"] == len(payload["violations"])
        assert payload["axes"] == ["t", "x1", "tau", "xi1"]
