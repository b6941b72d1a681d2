"""Shared test oracles: independent constructions kept deliberately dumb."""

import numpy as np


def householder_orthogonal(dim, rng):
    """Random orthogonal matrix as a product of dim Householder reflections."""
    a = np.eye(dim)
    for _ in range(dim):
        v = rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        a = (np.eye(dim) - 2.0 * np.outer(v, v)) @ a
    return a


def random_psd(dim, rng, scale=1.0):
    """PSD matrix from an orthogonal conjugation of a nonnegative diagonal."""
    q = householder_orthogonal(dim, rng)
    d = scale * rng.random(dim)
    return (q * d) @ q.T


def gram_loop(x):
    """Entrywise brute-force Gram matrix via an explicit double sum."""
    rows, cols = x.shape
    out = np.zeros((cols, cols))
    for k in range(cols):
        for l in range(cols):
            acc = 0.0
            for i in range(rows):
                acc += x[i, k] * x[i, l]
            out[k, l] = acc
    return out


def frobenius_loop(x, y):
    """Sequential row-major accumulation of sum_ij x_ij y_ij."""
    acc = 0.0
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            acc += x[i, j] * y[i, j]
    return acc


def kron_loop(a, b):
    """Definition-level Kronecker product via explicit index arithmetic."""
    m, n = a.shape
    p, q = b.shape
    out = np.zeros((m * p, n * q))
    for i in range(m):
        for j in range(n):
            for k in range(p):
                for l in range(q):
                    out[i * p + k, j * q + l] = a[i, j] * b[k, l]
    return out
