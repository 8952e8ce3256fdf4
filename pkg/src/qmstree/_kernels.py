"""Hot loops of the diagonal (classical) and factorized paths.

Every kernel has a numba ``@njit`` version and a pure-numpy version with the
same signature.  The numba path is used when numba imports and the
environment variable ``QMS_DISABLE_NUMBA`` is unset (or ``0``); call
:func:`set_backend` to switch at runtime.

Conventions shared by all kernels: sites are numbered in breadth-first
order (the canonical order of a ball), so the children of site ``p`` are
``k*p+1 .. k*p+k``; a configuration index is the mixed-radix number whose
most significant digit is site 0.  ``Q`` holds one flattened
``d**(k+1)`` weight vector per parent (parent-major digit order), or a
single row shared by all parents.
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_disabled = os.environ.get("QMS_DISABLE_NUMBA", "0").lower() not in ("", "0", "false", "no")
BACKEND = "numba" if HAVE_NUMBA and not _disabled else "numpy"


def set_backend(name: str) -> None:
    global BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not available")
    BACKEND = name


# ---------------------------------------------------------------- numpy ----


def _xlogx_sum_np(w):
    w = w[w > 0.0]
    return -math.fsum(w * np.log(w))


def _diag_weights_np(root_w, Q, leaf_w, n_sites, k, d):
    n_parents = (n_sites - 1) // k
    t = np.asarray(root_w, dtype=float)
    shared = Q.shape[0] == 1
    for p in range(n_parents):
        m = t.ndim
        q = Q[0 if shared else p].reshape((d,) * (k + 1))
        t = np.einsum(t, list(range(m)), q, [p] + list(range(m, m + k)),
                      list(range(m + k)))
    if leaf_w is not None:
        for i in range(n_parents, n_sites):
            lw = leaf_w[0 if leaf_w.shape[0] == 1 else i - n_parents]
            shape = [1] * n_sites
            shape[i] = d
            t = t * lw.reshape(shape)
    return t.reshape(-1)


def _site_marginals_np(root_w, Q, n_sites, k, d):
    n_parents = (n_sites - 1) // k
    mu = np.zeros((n_sites, d))
    mu[0] = root_w
    Qr = Q.reshape((Q.shape[0],) + (d,) * (k + 1))
    # per-child transition matrices, shape (rows, k, d, d)
    trans = np.stack(
        [Qr.sum(axis=tuple(a for a in range(2, k + 2) if a != j + 2)) for j in range(k)],
        axis=1,
    )
    p = 0
    while p < n_parents:
        # one tree level at a time: parents p .. hi-1
        hi = min(n_parents, k * p + 1)
        rows = trans[0:1] if Q.shape[0] == 1 else trans[p:hi]
        child = np.einsum("ps,pjsc->pjc", mu[p:hi], np.broadcast_to(rows, (hi - p, k, d, d)))
        mu[k * p + 1: k * (hi - 1) + k + 1] = child.reshape(-1, d)
        p = hi
    return mu


def _conditional_entropy_sum_np(mu, Q, n_parents, k, d):
    Qr = Q.reshape(Q.shape[0], d, d**k)
    safe = np.where(Qr > 0, Qr, 1.0)
    h_rows = -(Qr * np.log(safe)).sum(axis=2)  # (rows, d)
    if Q.shape[0] == 1:
        return float((mu[:n_parents] @ h_rows[0]).sum())
    return float((mu[:n_parents] * h_rows[:n_parents]).sum())


# ---------------------------------------------------------------- numba ----

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _xlogx_sum_nb(w):
        # Neumaier-compensated, large tables otherwise drift by ~1e-11
        s = 0.0
        c = 0.0
        for x in w:
            if x > 0.0:
                t = -x * np.log(x)
                u = s + t
                if abs(s) >= abs(t):
                    c += (s - u) + t
                else:
                    c += (t - u) + s
                s = u
        return s + c

    @numba.njit(cache=True)
    def _diag_weights_core(root_w, Q, leaf_w, has_leaf, n_sites, k, d):
        n_parents = (n_sites - 1) // k
        total = d**n_sites
        out = np.empty(total)
        digits = np.empty(n_sites, dtype=np.int64)
        shared = Q.shape[0] == 1
        leaf_shared = leaf_w.shape[0] == 1
        for c in range(total):
            r = c
            for i in range(n_sites - 1, -1, -1):
                digits[i] = r % d
                r //= d
            w = root_w[digits[0]]
            for p in range(n_parents):
                idx = digits[p]
                for j in range(1, k + 1):
                    idx = idx * d + digits[k * p + j]
                w *= Q[0 if shared else p, idx]
                if w == 0.0:
                    break
            if has_leaf and w != 0.0:
                for i in range(n_parents, n_sites):
                    w *= leaf_w[0 if leaf_shared else i - n_parents, digits[i]]
            out[c] = w
        return out

    @numba.njit(cache=True)
    def _site_marginals_core(root_w, Q, n_sites, k, d):
        n_parents = (n_sites - 1) // k
        mu = np.zeros((n_sites, d))
        mu[0] = root_w
        shared = Q.shape[0] == 1
        width = d**k
        for p in range(n_parents):
            row = 0 if shared else p
            for s in range(d):
                if mu[p, s] == 0.0:
                    continue
                for ch in range(width):
                    q = Q[row, s * width + ch]
                    if q == 0.0:
                        continue
                    r = ch
                    for j in range(k, 0, -1):
                        mu[k * p + j, r % d] += mu[p, s] * q
                        r //= d
        return mu

    @numba.njit(cache=True)
    def _conditional_entropy_sum_nb(mu, Q, n_parents, k, d):
        width = d**k
        shared = Q.shape[0] == 1
        total = 0.0
        for p in range(n_parents):
            row = 0 if shared else p
            for s in range(d):
                h = 0.0
                for ch in range(width):
                    q = Q[row, s * width + ch]
                    if q > 0.0:
                        h -= q * np.log(q)
                total += mu[p, s] * h
        return total


# --------------------------------------------------------------- public ----


def xlogx_sum(w: np.ndarray) -> float:
    """-sum w log w over a non-negative vector with 0 log 0 = 0."""
    w = np.ascontiguousarray(w, dtype=float).reshape(-1)
    if BACKEND == "numba":
        return float(_xlogx_sum_nb(w))
    return _xlogx_sum_np(w)


def diag_weights(root_w, Q, leaf_w, n_sites: int, k: int, d: int) -> np.ndarray:
    """Weights of all configurations of a ball with ``n_sites`` sites.

    weight(s) = root_w[s_0] * prod_p Q_p[s_p, s_children(p)] * prod_leaves leaf_w[s_leaf]
    """
    root_w = np.ascontiguousarray(root_w, dtype=float)
    Q = np.ascontiguousarray(np.atleast_2d(Q), dtype=float)
    if leaf_w is not None:
        leaf_w = np.ascontiguousarray(np.atleast_2d(leaf_w), dtype=float)
    if BACKEND == "numba":
        has_leaf = leaf_w is not None
        lw = leaf_w if has_leaf else np.ones((1, d))
        return _diag_weights_core(root_w, Q, lw, has_leaf, n_sites, k, d)
    return _diag_weights_np(root_w, Q, leaf_w, n_sites, k, d)


def site_marginals(root_w, Q, n_sites: int, k: int, d: int) -> np.ndarray:
    """Single-site marginals (n_sites, d) of a tree chain with row-stochastic Q."""
    root_w = np.ascontiguousarray(root_w, dtype=float)
    Q = np.ascontiguousarray(np.atleast_2d(Q), dtype=float)
    if BACKEND == "numba":
        return _site_marginals_core(root_w, Q, n_sites, k, d)
    return _site_marginals_np(root_w, Q, n_sites, k, d)


def conditional_entropy_sum(mu, Q, n_parents: int, k: int, d: int) -> float:
    """sum over parents p of sum_s mu_p(s) H(Q_p[s, .])."""
    mu = np.ascontiguousarray(mu, dtype=float)
    Q = np.ascontiguousarray(np.atleast_2d(Q), dtype=float)
    if BACKEND == "numba":
        return float(_conditional_entropy_sum_nb(mu, Q, n_parents, k, d))
    return _conditional_entropy_sum_np(mu, Q, n_parents, k, d)
