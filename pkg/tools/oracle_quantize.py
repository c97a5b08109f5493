#!/usr/bin/env python3
"""Slow direct-quadrature oracles for the quantization layer.

Everything here is computed from the defining sums with explicit
coordinates and explicit trigonometric-interpolation coefficients --
no shared code with the package. Run this script to print the
reference numbers that the quantization tests freeze.
"""
from __future__ import annotations

import numpy as np

# --------------------------------------------------------------------------
# trigonometric interpolation with split Nyquist coefficient


def centered_coeffs(vals):
    """Return (modes, coeffs) with modes -N/2 .. N/2, Nyquist split in half."""
    n = len(vals)
    c = np.fft.fft(np.asarray(vals, dtype=complex)) / n
    # vals_j = sum_k c_k exp(+2i pi k j / n); map positions to modes
    # 0..n/2-1, -n/2, -n/2+1..-1 and add a +n/2 entry carrying half the
    # Nyquist coefficient (the two halves agree on integer lattice points
    # and keep real data real at half-integer points).
    modes = np.where(np.arange(n) < n // 2, np.arange(n), np.arange(n) - n).astype(float)
    out_modes = np.append(modes, n / 2.0)
    out_coeffs = np.append(c, c[n // 2] / 2.0)
    out_coeffs[n // 2] = c[n // 2] / 2.0
    return out_modes, out_coeffs


def trig_interp(vals, t):
    """Evaluate the split-Nyquist trig interpolant at fractional indices t."""
    n = len(vals)
    modes, coeffs = centered_coeffs(vals)
    t = np.asarray(t, dtype=float)
    phases = np.exp(2j * np.pi * np.outer(t, modes) / n)
    out = phases @ coeffs
    return out


# --------------------------------------------------------------------------
# direct quadrature quantizers (one base axis, one dual axis)


def direct_weyl(sample, x, xi):
    """K[j,l] = (2 pi)^-1 sum_k a((x_j+x_l)/2, xi_k) e^{i(x_j-x_l)xi_k} dxi dx."""
    n = len(x)
    dx = x[1] - x[0]
    dxi = xi[1] - xi[0]
    # interpolated symbol at all half indices m/2, m = 0..2n-2, per xi column
    half = np.arange(2 * n - 1) / 2.0
    s_half = np.empty((2 * n - 1, len(xi)), dtype=complex)
    for k in range(len(xi)):
        s_half[:, k] = trig_interp(sample[:, k], half)
    jj, ll = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    phase = np.exp(1j * np.subtract.outer(x, x)[:, :, None] * xi[None, None, :])
    mid_vals = s_half[jj + ll]  # (n, n, n_xi)
    kern = (mid_vals * phase).sum(axis=2) * dxi / (2.0 * np.pi)
    return kern * dx


def direct_kn(sample, x, xi):
    """Left-point quantization: a(x_j, xi_k) in place of the midpoint."""
    n = len(x)
    dx = x[1] - x[0]
    dxi = xi[1] - xi[0]
    phase = np.exp(1j * np.subtract.outer(x, x)[:, :, None] * xi[None, None, :])
    kern = (sample[:, None, :] * phase).sum(axis=2) * dxi / (2.0 * np.pi)
    return kern * dx


def lattice(n, extent):
    delta = extent / n
    x = (np.arange(n) - n // 2) * delta
    dxi = 2.0 * np.pi / (n * delta)
    xi = (np.arange(n) - n // 2) * dxi
    return x, xi


def fft_diff_matrix(n, extent, xi):
    """Columns of u -> ifft(omega * fft(u)) with FFT-ordered multipliers."""
    omega = np.fft.ifftshift(xi)
    cols = []
    for l in range(n):
        e = np.zeros(n)
        e[l] = 1.0
        cols.append(np.fft.ifft(omega * np.fft.fft(e)))
    return np.array(cols).T


def opnorm(m):
    return np.linalg.norm(m, 2)


# --------------------------------------------------------------------------
# symmetric-truncated Gaussian windows (edge handling oracle)


def truncated_window_matrix(n, delta, width, radius):
    """Row p: renormalized Gaussian over offsets |m| <= min(p, n-1-p, R)."""
    r_full = int(np.floor(radius * width / delta))
    w = np.zeros((n, n))
    for p in range(n):
        r = min(p, n - 1 - p, r_full)
        offs = np.arange(-r, r + 1)
        g = np.exp(-((offs * delta / width) ** 2))
        g = g / g.sum()
        w[p, p + offs] = g
    return w


def main():
    rng = np.random.default_rng(20260818)
    print("=== direct-quadrature Weyl/KN oracles (N=8, extent 4) ===")
    n = 8
    x, xi = lattice(n, 4.0)
    ones = np.ones((n, n))
    m_id = direct_weyl(ones, x, xi)
    print(f"||weyl(1) - I||_max              = {np.abs(m_id - np.eye(n)).max():.3e}")

    sample_xi = np.tile(xi, (n, 1))
    m_xi = direct_weyl(sample_xi, x, xi)
    d_fft = fft_diff_matrix(n, 4.0, xi)
    print(f"||weyl(xi) - fft diff matrix||_2 = {opnorm(m_xi - d_fft):.3e}")

    sample_xxi = np.outer(x, xi)
    m_xxi = direct_weyl(sample_xxi, x, xi)
    xmat = np.diag(x)
    sym = 0.5 * (xmat @ d_fft + d_fft @ xmat)
    diff = m_xxi - sym
    print(f"||weyl(x xi)||_2                  = {opnorm(m_xxi):.6e}")
    print(f"||(XD+DX)/2||_2                   = {opnorm(sym):.6e}")
    print(f"||weyl(x xi) - (XD+DX)/2||_2      = {opnorm(diff):.6e}")
    print(f"   relative                        = {opnorm(diff) / opnorm(sym):.6e}")
    me = np.zeros_like(diff)
    jj, ll = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    even = (jj + ll) % 2 == 0
    print(f"   max |diff| on even j+l           = {np.abs(diff[even]).max():.3e}")
    print(f"   max |diff| on odd j+l            = {np.abs(diff[~even]).max():.3e}")
    herm = np.abs(m_xxi - m_xxi.conj().T).max()
    print(f"   hermiticity defect of weyl(x xi) = {herm:.3e}")

    m_kn = direct_kn(sample_xxi, x, xi)
    print(f"||kn(x xi) - XD||_2               = {opnorm(m_kn - xmat @ d_fft):.3e}")

    a_rand = np.real(np.fft.ifft2(rng.standard_normal((n, n)) * (np.abs(np.fft.fftfreq(n)[:, None]) < 0.3) * (np.abs(np.fft.fftfreq(n)[None, :]) < 0.3)))
    m_rand = direct_weyl(a_rand, x, xi)
    print(f"hermiticity defect, random real   = {np.abs(m_rand - m_rand.conj().T).max():.3e}")

    print()
    print("=== symmetric-truncated Gaussian windows (1D, N=32, extent 16) ===")
    n1 = 32
    delta = 0.5
    wmat = truncated_window_matrix(n1, delta, 1.0, 6.0)
    u = (np.arange(n1) - n1 // 2) * delta
    aff = 3.0 - 2.0 * u
    print(f"max |W@affine - affine|           = {np.abs(wmat @ aff - aff).max():.3e}")
    const = np.full(n1, 7.25)
    print(f"max |W@const - const|             = {np.abs(wmat @ const - const).max():.3e}")
    quad = u * u
    out = wmat @ quad
    expect = quad + 0.5
    r_full = int(np.floor(6.0 / delta))
    inner = slice(r_full, n1 - r_full)
    print(f"max |W@u^2 - (u^2+1/2)| trusted   = {np.abs(out - expect)[inner].max():.3e}")
    print(f"max |W@u^2 - (u^2+1/2)| global    = {np.abs(out - expect).max():.3e}")
    # periodic wrap comparison for the same kernel (full window, folded)
    offs = np.arange(-r_full, r_full + 1)
    g = np.exp(-((offs * delta) ** 2))
    g = g / g.sum()
    moment = (g * (offs * delta) ** 2).sum()
    print(f"full-window second moment - 1/2   = {moment - 0.5:+.3e}")

    print()
    print("=== composition sweep: a = sin x, b = xi on chart (x, h xi) ===")
    n2 = 32
    x2, xi2 = lattice(n2, 2.0 * np.pi)
    for h in (0.1, 0.05, 0.025):
        samp_a = np.tile(np.sin(x2)[:, None], (1, n2))
        samp_b = np.tile((h * xi2)[None, :], (n2, 1))
        samp_ab = np.sin(x2)[:, None] * (h * xi2)[None, :]
        ma = direct_weyl(samp_a, x2, xi2)
        mb = direct_weyl(samp_b, x2, xi2)
        mab = direct_weyl(samp_ab, x2, xi2)
        resid = opnorm(ma @ mb - mab)
        print(f"h = {h:<6} residual = {resid:.9e}   residual/h = {resid / h:.6f}")

    print()
    print("=== x-independent pair on chart: a = sin(h xi), b = cos(h xi) ===")
    for h in (0.1, 0.05, 0.025):
        sa = np.tile(np.sin(h * xi2)[None, :], (n2, 1))
        sb = np.tile(np.cos(h * xi2)[None, :], (n2, 1))
        ma = direct_weyl(sa, x2, xi2)
        mb = direct_weyl(sb, x2, xi2)
        mab = direct_weyl(sa * sb, x2, xi2)
        print(f"h = {h:<6} residual = {opnorm(ma @ mb - mab):.3e}")

    print()
    print("=== kn vs weyl(kn_to_weyl) sweep: a = sin 2x sin(w h xi) ===")
    # dual frequency chosen so the sampled symbol is wrap-periodic across the
    # xi lattice for every h in the sweep (period = smallest chart window);
    # even x-mode: on even lattices odd x-modes carry an O(h) Nyquist
    # half-shift obstruction that no lattice Weyl symbol can absorb
    n3 = 64
    x3, xi3 = lattice(n3, 2.0 * np.pi)
    w0 = 2.0 * np.pi / (n3 * 0.025)
    prev_c = prev_r = None
    for h in (0.1, 0.05, 0.025):
        samp = np.sin(2 * x3)[:, None] * np.sin(w0 * h * xi3)[None, :]
        mixed = 2 * w0 * h * np.cos(2 * x3)[:, None] * np.cos(w0 * h * xi3)[None, :]
        mkn = direct_kn(samp, x3, xi3)
        mw_corr = direct_weyl(samp + 0.5j * mixed, x3, xi3)
        mw_raw = direct_weyl(samp, x3, xi3)
        d_corr = opnorm(mkn - mw_corr)
        d_raw = opnorm(mkn - mw_raw)
        rc = "" if prev_c is None else f"   ratios: corr {d_corr / prev_c:.4f} raw {d_raw / prev_r:.4f}"
        print(f"h = {h:<6} corrected = {d_corr:.6e}   raw = {d_raw:.6e}{rc}")
        prev_c, prev_r = d_corr, d_raw


if __name__ == "__main__":
    main()
