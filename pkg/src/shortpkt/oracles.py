"""Independent reference computations used to validate the fast kernels.

Everything here is deliberately written from the definitions: the decoding
metric density uses the literal 4-point constellation log-sum-exp, and the
expectations are Gauss-Hermite quadratures over the joint Gaussian law of
(output sample, channel estimate) for a single-data-symbol block. None of
this code shares a computational path with the optimized implementations
it checks.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial.hermite import hermgauss


def qpsk_points(rho: float) -> np.ndarray:
    """The four constellation points sqrt(rho) * exp(i*pi*(2m+1)/4)."""
    m = np.arange(4)
    return np.sqrt(rho) * np.exp(1j * np.pi * (2 * m + 1) / 4.0)


def density_direct(x: np.ndarray, y: np.ndarray, h_hat: complex,
                   s: float, rho: float) -> float:
    """Generalized information density of one block, from the definition.

    Per data symbol: -s|y - h_hat x|^2 minus the log of the exact 4-point
    average of exp(-s|y - h_hat c|^2) over the scaled QPSK constellation,
    evaluated with a plain log-sum-exp. Inputs are 1-D arrays of the
    block's candidate symbols and outputs.
    """
    x = np.asarray(x, dtype=complex).ravel()
    y = np.asarray(y, dtype=complex).ravel()
    const = qpsk_points(rho)
    total = 0.0
    for xi, yi in zip(x, y):
        lead = -s * abs(yi - h_hat * xi) ** 2
        expo = -s * np.abs(yi - h_hat * const) ** 2
        mx = float(np.max(expo))
        lse = mx + math.log(np.mean(np.exp(expo - mx)))
        total += lead - lse
    return total


def _gh_integrate(fn, rho: float, n_p: int, x: complex, n_nodes: int) -> float:
    """4-D Gauss-Hermite integral of fn(y, h_hat) for one data symbol.

    Given symbol x, the pair (y, h_hat) is zero-mean jointly circularly
    symmetric Gaussian with E|y|^2 = rho + 1, E|h_hat|^2 = 1 + 1/(n_p rho)
    and E[y conj(h_hat)] = x; the grid is built from its Cholesky factor.
    The outermost node axis is looped to keep memory bounded.
    """
    var_err = 1.0 / (n_p * rho)
    c_yy = rho + 1.0
    c_hh = 1.0 + var_err
    l11 = math.sqrt(c_yy)
    l21 = np.conj(x) / l11
    l22 = math.sqrt(c_hh - abs(x) ** 2 / c_yy)

    t, w = hermgauss(n_nodes)
    # Real/imag parts of a unit CN variable have variance 1/2, matching the
    # exp(-t^2) weight after dividing by sqrt(pi) per axis.
    wn = w / math.sqrt(math.pi)
    g2 = (t[:, None] + 1j * t[None, :]).ravel()
    w2 = (wn[:, None] * wn[None, :]).ravel()

    total = 0.0
    for i in range(n_nodes):
        g1 = t[i] + 1j * t                       # (n,)
        w1 = wn[i] * wn                          # (n,)
        y = (l11 * g1)[:, None]                  # (n, 1)
        h_hat = l21 * g1[:, None] + l22 * g2[None, :]  # (n, n^2)
        vals = fn(y, h_hat)
        total += float(np.sum((w1[:, None] * w2[None, :]) * vals))
    return total


def gh_mean_density(rho: float, n_p: int, s: float,
                    n_nodes: int = 48) -> float:
    """Quadrature value of E[i_s] for a single-data-symbol block.

    Averages over the four transmitted constellation points and integrates
    the joint (y, h_hat) Gaussian law on a 4-D Gauss-Hermite grid.
    """
    const = qpsk_points(rho)

    def make_fn(x):
        def fn(y, h_hat):
            lead = -s * np.abs(y - h_hat * x) ** 2
            expo = np.stack([-s * np.abs(y - h_hat * c) ** 2 for c in const])
            mx = expo.max(axis=0)
            lse = mx + np.log(np.mean(np.exp(expo - mx), axis=0))
            return lead - lse
        return fn

    return sum(_gh_integrate(make_fn(x), rho, n_p, x, n_nodes)
               for x in const) / 4.0


def gh_kappa(rho: float, n_p: int, s: float, beta: float,
             n_nodes: int = 48) -> float:
    """Quadrature value of kappa(beta) for n_d = 1, L = 1.

    kappa(beta) = log E[ E[q^{beta s} | y] / E[q^s | y]^beta ] with the
    inner expectations taken exactly over the 4-point constellation and
    the outer one over the joint (y, h_hat) law under an independently
    transmitted codeword.
    """
    const = qpsk_points(rho)

    def make_fn(x):
        def fn(y, h_hat):
            expo = np.stack([np.abs(y - h_hat * c) ** 2 for c in const])

            def log_inner(scale):
                e = -scale * expo
                mx = e.max(axis=0)
                return mx + np.log(np.mean(np.exp(e - mx), axis=0))

            return np.exp(log_inner(beta * s) - beta * log_inner(s))
        return fn

    total = sum(_gh_integrate(make_fn(x), rho, n_p, x, n_nodes)
                for x in const) / 4.0
    return math.log(total)
