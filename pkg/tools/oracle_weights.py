"""Stand-alone oracles for the weight pipeline, hand-rolled in plain numpy.

Run:  python3 tools/oracle_weights.py

Everything here is computed without importing mlab so the numbers frozen
into tests/test_weights.py come from an independent route:

  * X-set membership by literal scan over (s <= t) / (s >= t);
  * lattice distance to X_0 by exhaustive O(P^2) minimisation;
  * the H^{-1/2} / M formula values for f = t at t = 0, h = 0.01;
  * m by the literal triple loop over (t1 <= t <= t2) pairs;
  * the quasi-convexity and bracket bounds on a random monotone suite.
"""

import numpy as np


# ---- literal X sets and distance for f = t ---------------------------

def x_sets_scan(leaf_max, leaf_min, t_axis=0):
    """Literal existential scan: no cumulative trick, just loops."""
    T = leaf_max.shape[t_axis]
    xp = np.zeros_like(leaf_max, dtype=bool)
    xm = np.zeros_like(leaf_max, dtype=bool)
    for t in range(T):
        for s in range(T):
            if s <= t:
                xp[t] |= leaf_max[s] > 0.0
            if s >= t:
                xm[t] |= leaf_min[s] < 0.0
    return xp, xm, ~(xp | xm)


def brute_distance(x0_mask, samplings):
    """O(P^2) Euclidean distance to the nearest True cell of x0_mask."""
    pts = np.argwhere(np.ones_like(x0_mask, dtype=bool)).astype(float)
    srcs = np.argwhere(x0_mask).astype(float)
    w = np.asarray(samplings, dtype=float)
    out = np.full(x0_mask.shape, np.inf)
    if srcs.size == 0:
        return out
    for p in pts:
        d2 = np.sum(((srcs - p) * w) ** 2, axis=1)
        out[tuple(p.astype(int))] = np.sqrt(d2.min())
    return out


def demo_f_equals_t():
    n = 16
    spacing = 8.0 / n
    t = (np.arange(n) - n // 2) * spacing       # -4 .. 3.5
    leaf = t.copy()
    xp, xm, x0 = x_sets_scan(leaf[:, None], leaf[:, None])
    assert np.array_equal(xp[:, 0], t > 0)
    assert np.array_equal(xm[:, 0], t < 0)
    assert np.array_equal(x0[:, 0], t == 0)
    d = brute_distance(x0, [spacing])[:, 0]
    assert np.allclose(d, np.abs(t))
    h = 0.25
    delta = np.sign(t) * np.minimum(d, h ** -0.5)
    print("f=t delta (h=0.25):", delta)
    assert np.array_equal(delta, np.clip(t, -2.0, 2.0))


def demo_two_axis():
    """f = t*eta^2 on an anisotropic (t, eta) lattice, brute distance."""
    nt, ne = 8, 8
    st, se = 4.0 / nt, 6.0 / ne
    t = (np.arange(nt) - nt // 2) * st
    eta = (np.arange(ne) - ne // 2) * se
    f = t[:, None] * eta[None, :] ** 2
    xp, xm, x0 = x_sets_scan(f, f)
    # X0 = {t = 0} union {eta = 0}
    assert np.array_equal(x0, (t[:, None] == 0) | (eta[None, :] == 0))
    d = brute_distance(x0, [st, se])
    expect = np.minimum(np.abs(t)[:, None], np.abs(eta)[None, :])
    assert np.allclose(d, expect)
    print("two-axis distance matches min(|t|, |eta|) on the product set")


# ---- H and M formula values ------------------------------------------

def h_formula(delta, fp, fpp, h):
    return 1.0 + np.abs(delta) + np.abs(fp) / (
        np.abs(fpp) + h ** 0.25 * np.abs(fp) ** 0.5 + h ** 0.5)


def m_formula(f, fp, fpp, hm12, h):
    return (np.abs(f) + np.abs(fp) * hm12 + np.abs(fpp) * hm12 ** 2
            + h ** 0.5 * hm12 ** 3)


def demo_h_m_values():
    h = 0.01
    hm12 = h_formula(0.0, 1.0, 0.0, h)     # f = t at t = 0
    big_m = m_formula(0.0, 1.0, 0.0, hm12, h)
    print(f"H^(-1/2)(f=t, t=0, h=0.01) = {hm12!r}")
    print(f"M(f=t, t=0, h=0.01)       = {big_m!r}")
    assert abs(hm12 - 3.40) < 5e-3
    # f == 1: delta = h^{-1/2}, derivatives vanish
    assert h_formula(h ** -0.5, 0.0, 0.0, h) == 1.0 + h ** -0.5
    assert m_formula(1.0, 0.0, 0.0, 1.0, h) == 1.0 + h ** 0.5


# ---- m: literal triple loop ------------------------------------------

def m_triple_loop(delta, hs):
    """m(t) = min over t1 <= t <= t2 of the bracket; literal loops."""
    T = delta.shape[0]
    bracket = lambda t1, t2: (delta[t2] - delta[t1]
                              + max(hs[t1] * (1 + abs(delta[t1])) ** 2,
                                    hs[t2] * (1 + abs(delta[t2])) ** 2) * 0.5)
    out = np.empty(T)
    for t in range(T):
        best = np.inf
        for t1 in range(t + 1):
            for t2 in range(t, T):
                best = min(best, bracket(t1, t2))
        out[t] = best
    return out


def demo_step_m():
    T = 8
    spacing = 0.5
    t = (np.arange(T) - T // 2) * spacing
    delta = np.where(t < 0, -1.0, 1.0)
    hs = np.full(T, 0.3)
    m = m_triple_loop(delta, hs)
    print("step-delta m:", m)
    assert np.array_equal(m, np.full(T, 0.6))
    # constant case: m = H1^{1/2} <delta>^2 / 2 from the diagonal pair
    const = m_triple_loop(np.full(T, 0.7), np.full(T, 0.2))
    assert np.allclose(const, 0.2 * 1.7 ** 2 / 2)
    print("constant-delta m:", const[0])


def demo_random_monotone_suite():
    rng = np.random.default_rng(20260818)
    h = 0.1
    for trial in range(200):
        T = int(rng.integers(4, 12))
        delta = np.sort(rng.uniform(-2.0, 2.0, T))        # nondecreasing
        hs = rng.uniform(h ** 0.5 / 3.0, 1.0 / (1 + np.abs(delta)) ** 2)
        m = m_triple_loop(delta, hs)
        wd2 = (1 + np.abs(delta)) ** 2
        # hhhest bracket: h^{1/2} <d>^2 / 6 <= m <= <d>/2 needs hs >= h^{1/2}/3
        assert np.all(m >= h ** 0.5 * wd2 / 6 - 1e-12), trial
        assert np.all(m <= (1 + np.abs(delta)) / 2 + 1e-12), trial
        # quasi-convexity, every pair
        for t1 in range(T):
            run = -np.inf
            for t2 in range(t1, T):
                run = max(run, m[t2])
                assert run <= delta[t2] - delta[t1] + m[t1] + m[t2] + 1e-12
    print("random monotone suite: hhhest + quasi-convexity hold on 200 draws")


# ---- alpha factorization ---------------------------------------------

def demo_alpha():
    n = 64
    spacing = 2.0 / n
    t = (np.arange(n) - n // 2) * spacing
    f = t + t ** 3
    delta = t                                   # unclamped for small h
    alpha = np.where(np.abs(delta) > 0, f / np.where(delta == 0, 1, delta),
                     np.abs(1 + 3 * t ** 2))    # |f'| at the zero
    assert np.allclose(alpha, 1 + t ** 2, atol=1e-12)
    print("alpha(f = t + t^3) == 1 + t^2 pointwise")


if __name__ == "__main__":
    demo_f_equals_t()
    demo_two_axis()
    demo_h_m_values()
    demo_step_m()
    demo_random_monotone_suite()
    demo_alpha()
    print("all weight oracles passed")
