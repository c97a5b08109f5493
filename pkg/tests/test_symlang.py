import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlab.phase_grid import build_grid
from mlab.symlang import (
    BinOp,
    Call,
    Num,
    SymLangError,
    Unary,
    Var,
    eval_on_grid,
    parse_expr,
    variables,
)


def direct_eval(node, point):
    """Independent recursive scalar evaluator used as the test oracle."""
    if isinstance(node, Num):
        return complex(node.value)
    if isinstance(node, Var):
        return complex(point[node.name])
    if isinstance(node, Unary):
        return -direct_eval(node.arg, point)
    if isinstance(node, BinOp):
        a = direct_eval(node.left, point)
        b = direct_eval(node.right, point)
        if node.op == "^":
            if b.imag == 0.0 and b.real == int(b.real):
                return a ** int(b.real)
            return a ** b
        return {"+": a + b, "-": a - b, "*": a * b,
                "/": a / b if abs(b) >= 1e-14 else None}[node.op]
    if isinstance(node, Call):
        args = [direct_eval(a, point) for a in node.args]
        if node.func == "sin":
            return cmath.sin(args[0])
        if node.func == "cos":
            return cmath.cos(args[0])
        if node.func == "exp":
            return cmath.exp(args[0])
        if node.func == "sqrt":
            return cmath.sqrt(args[0])
        if node.func == "abs":
            return complex(abs(args[0]))
        if node.func == "sq":
            return args[0] * args[0]
        if node.func == "sign":
            r = args[0].real
            return complex(0.0 if abs(r) < 1e-14 else (1.0 if r > 0 else -1.0))
        if node.func == "min":
            return complex(min(args[0].real, args[1].real))
        if node.func == "max":
            return complex(max(args[0].real, args[1].real))
    raise AssertionError(f"unhandled node {node!r}")


class TestParse:
    def test_model_symbol_ast(self):
        e = parse_expr("(1 + t^2)*xi1^2 + tau + i*t*tau")
        want = BinOp(
            "+",
            BinOp(
                "+",
                BinOp("*",
                      BinOp("+", Num(1.0), BinOp("^", Var("t"), Num(2.0))),
                      BinOp("^", Var("xi1"), Num(2.0))),
                Var("tau"),
            ),
            BinOp("*", BinOp("*", Var("i"), Var("t")), Var("tau")),
        )
        assert e == want

    def test_empty_is_syntax_error(self):
        with pytest.raises(SymLangError):
            parse_expr("")

    def test_min_node(self):
        e = parse_expr("min(t, 0)")
        assert e == Call("min", (Var("t"), Num(0.0)))

    def test_whitespace_insensitive(self):
        assert parse_expr("t+tau*2") == parse_expr("  t +  tau * 2 ")

    def test_power_right_associative(self):
        assert parse_expr("2^3^2") == BinOp("^", Num(2.0),
                                            BinOp("^", Num(3.0), Num(2.0)))

    def test_power_binds_tighter_than_unary_minus(self):
        assert parse_expr("-t^2") == Unary("-", BinOp("^", Var("t"), Num(2.0)))

    def test_mul_binds_tighter_than_add(self):
        assert parse_expr("1+2*3") == BinOp("+", Num(1.0),
                                            BinOp("*", Num(2.0), Num(3.0)))

    def test_unknown_identifier_offset(self):
        with pytest.raises(SymLangError, match="offset 4"):
            parse_expr("t + bogus")

    def test_unknown_function(self):
        with pytest.raises(SymLangError, match="unknown function"):
            parse_expr("frob(t)")

    def test_dangling_operator(self):
        with pytest.raises(SymLangError):
            parse_expr("t +")

    def test_unbalanced_paren(self):
        with pytest.raises(SymLangError):
            parse_expr("(t + 1")

    def test_wrong_arity(self):
        with pytest.raises(SymLangError, match="argument"):
            parse_expr("min(t)")

    def test_stray_character(self):
        with pytest.raises(SymLangError, match="offset"):
            parse_expr("t + $")


# Strategy for random well-formed ASTs (parser printer round-trip).
_numbers = st.floats(min_value=0.0, max_value=1e6, allow_nan=False,
                     allow_infinity=False).map(Num)
_vars = st.sampled_from(["t", "tau", "x1", "xi1", "y1", "eta1", "h", "i"]).map(Var)


def _exprs(children):
    unary = st.builds(Unary, st.just("-"), children)
    binop = st.builds(BinOp, st.sampled_from(list("+-*/^")), children, children)
    call1 = st.builds(
        Call,
        st.sampled_from(["sin", "cos", "exp", "abs", "sqrt", "sign", "sq"]),
        st.tuples(children))
    call2 = st.builds(Call, st.sampled_from(["min", "max"]),
                      st.tuples(children, children))
    return st.one_of(unary, binop, call1, call2)


ast_strategy = st.recursive(st.one_of(_numbers, _vars), _exprs, max_leaves=25)


class TestRoundTrip:
    @given(ast_strategy)
    @settings(max_examples=200, deadline=None)
    def test_parse_print_parse_identity(self, expr):
        assert parse_expr(expr.to_string()) == expr

    def test_example_round_trip(self):
        e = parse_expr("(1 + t^2)*xi1^2 + tau + i*t*tau")
        assert parse_expr(e.to_string()) == e


class TestEval:
    def grid(self):
        return build_grid({
            "dims": [["t", 8], ["x", 8], ["y", 8]],
            "extents": [4.0, 4.0, 4.0],
            "h": 0.5,
        })

    def test_constant_one(self):
        g = self.grid()
        f = eval_on_grid("1", g)
        assert all(f.independence_mask)
        assert np.all(f.values == 1.0)

    def test_hyperbolic_quadratic(self):
        g = self.grid()
        f = eval_on_grid("xi1^2 - eta1^2", g)
        xi = g.coord_field(g.axis_index("xi1"))
        eta = g.coord_field(g.axis_index("eta1"))
        assert np.allclose(f.full_values(), xi ** 2 - eta ** 2)
        assert f.independence_mask[g.axis_index("t")]
        assert not f.independence_mask[g.axis_index("xi1")]

    def test_t_eta_point_value(self):
        # t*eta1 at (t, eta1) = (0.5, 2) is 1.0 by direct arithmetic; the
        # sampled field agrees with the oracle at every lattice point.
        expr = parse_expr("t*eta1")
        assert direct_eval(expr, {"t": 0.5, "eta1": 2.0}) == 1.0
        g = build_grid({"dims": [["t", 8], ["y", 8]],
                        "extents": [8.0, 8.0], "h": 1.0})
        f = eval_on_grid(expr, g).full_values()
        t = g.axis_coords(0)
        eta = g.axis_coords(3)
        for it in range(8):
            for ie in range(8):
                want = direct_eval(expr, {"t": t[it], "eta1": eta[ie]})
                assert f[it, 0, 0, ie] == want

    def test_unresolved_variable(self):
        g = build_grid({"dims": [["t", 8]], "extents": [2.0], "h": 0.5})
        with pytest.raises(SymLangError, match="resolve"):
            eval_on_grid("y1 + t", g)

    def test_division_guard(self):
        g = self.grid()  # t-lattice contains 0
        with pytest.raises(SymLangError, match="guard"):
            eval_on_grid("1/t", g)

    def test_division_ok_away_from_zero(self):
        g = self.grid()
        f = eval_on_grid("1/(2 + sq(t))", g)
        t = g.coord_field(0)
        assert np.allclose(f.values, (1.0 / (2.0 + t * t))[:, :1, :1, :1, :1, :1])

    def test_sign_threshold(self):
        g = self.grid()
        f = eval_on_grid("sign(t)", g)
        t = g.axis_coords(0)
        expect = np.where(np.abs(t) < 1e-14, 0.0, np.sign(t))
        assert np.array_equal(f.values.ravel().real, expect)

    def test_h_and_i_resolve(self):
        g = self.grid()
        f = eval_on_grid("i*h", g)
        assert f.values.ravel()[0] == pytest.approx(0.5j)

    def test_pointwise_against_direct_oracle(self):
        exprs = [
            "(1 + t^2)*xi1^2 + tau + i*t*tau",
            "sin(t)*cos(x1) + exp(-sq(eta1)/4)",
            "min(t, 0) + max(y1, eta1) * sign(t - 1)",
            "sqrt(abs(xi1) + 1) - h*tau^3",
            "(t - i*eta1)^2 / (4 + sq(x1))",
        ]
        g = self.grid()
        rng = np.random.default_rng(42)
        names = g.axis_names
        coords = [g.axis_coords(a) for a in range(g.ndim)]
        for text in exprs:
            expr = parse_expr(text)
            field = eval_on_grid(expr, g).full_values()
            for _ in range(100):
                idx = tuple(rng.integers(0, n) for n in g.shape)
                point = {nm: coords[a][idx[a]] for a, nm in enumerate(names)}
                point["h"] = g.h
                point["i"] = 1j
                want = direct_eval(expr, point)
                assert field[idx] == pytest.approx(want, rel=1e-12, abs=1e-12)

    def test_variables_helper(self):
        e = parse_expr("t*eta1 + i*h")
        assert variables(e) == {"t", "eta1"}
