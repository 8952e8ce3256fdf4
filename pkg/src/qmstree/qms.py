"""Finite-volume quantum Markov states built from localized transition rules.

Three evaluation paths produce level states:

``dense``
    full matrices on the ball, via ``D_{n+1} = K_[n,n+1] (D_n x 1) K_[n,n+1]^*``;
``diagonal``
    the diagonal of the same densities as a weight table, for models whose
    amplitude, boundary and root weight are all diagonal;
``factorized``
    entropies and single-site marginals of diagonal unital models without
    any table (see :mod:`qmstree.entropy`).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import (
    InvalidDensity,
    LostPositivity,
    NoConvergence,
    RegionTooLarge,
)
from .linalg import (
    DENSE_CAP,
    Operator,
    _permute_factors,
    embed,
    partial_trace,
    raw_entropy,
)
from .model import BoundaryFamily, ModelSpec, TransitionRule, trace_children
from .tree import ROOT, SiteSet, TreeShape, ball, canonical, level_set, slab

log = logging.getLogger(__name__)

DIAGONAL_CAP = 2**15


@dataclass(frozen=True)
class FiniteState:
    """Level-n state on the ball; exactly one of ``matrix``/``weights`` is set."""

    level: int
    support: SiteSet
    d: int
    path: str
    trace: float
    matrix: Optional[np.ndarray] = field(default=None, repr=False)
    weights: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def operator(self) -> Operator:
        if self.matrix is None:
            return Operator(self.support, self.d, np.diag(self.weights).astype(complex))
        return Operator(self.support, self.d, self.matrix)

    def marginal(self, keep) -> "FiniteState":
        keep = canonical(keep)
        if self.matrix is not None:
            m = partial_trace(self.operator, keep).matrix
            return FiniteState(self.level, keep, self.d, self.path, self.trace, matrix=m)
        w = marginal_weights(self.weights, self.support, keep, self.d)
        return FiniteState(self.level, keep, self.d, self.path, self.trace, weights=w)

    def entropy(self, tol: float = 1e-10) -> float:
        """-Tr(D log D); the von Neumann entropy when the trace is one."""
        if self.matrix is not None:
            return raw_entropy(self.matrix, tol)
        return _kernels.xlogx_sum(np.clip(self.weights, 0.0, None))

    def normalized(self) -> "FiniteState":
        if self.matrix is not None:
            return FiniteState(self.level, self.support, self.d, self.path, 1.0,
                               matrix=self.matrix / self.trace)
        return FiniteState(self.level, self.support, self.d, self.path, 1.0,
                           weights=self.weights / self.trace)

    def expect(self, a: Operator) -> complex:
        """Tr(D a) with ``a`` supported inside the state's region."""
        if self.matrix is not None:
            return complex(np.trace(self.matrix @ embed(a, self.support).matrix))
        diag = np.diag(a.matrix)
        if np.abs(a.matrix - np.diag(diag)).max(initial=0.0) > 0:
            sub = self.marginal(a.support)
            return complex(np.trace(np.diag(sub.weights) @ a.matrix))
        sub = self.marginal(a.support)
        return complex(sub.weights @ diag)


def marginal_weights(w: np.ndarray, support: SiteSet, keep: SiteSet, d: int) -> np.ndarray:
    pos = {v: i for i, v in enumerate(support)}
    kept = [pos[v] for v in keep]
    drop = tuple(i for i in range(len(support)) if i not in set(kept))
    t = w.reshape((d,) * len(support))
    return t.sum(axis=drop).reshape(-1) if drop else w


def diag_embed(a_diag: np.ndarray, support: SiteSet, region: SiteSet, d: int) -> np.ndarray:
    """Diagonal of (a x 1) over ``region`` for a diagonal ``a`` on ``support``."""
    pos = [region.index(v) for v in support]
    shape = [1] * len(region)
    t = np.asarray(a_diag).reshape((d,) * len(support))
    # support is canonical and so is region, hence pos is increasing
    for i, p in enumerate(pos):
        shape[p] = d
    return np.broadcast_to(t.reshape(shape), (d,) * len(region)).reshape(-1)


# ------------------------------------------------------------ amplitudes ----


def level_amplitude(model: ModelSpec, n: int, raw: bool = False) -> Operator:
    """K_[n,n+1] = product over x in W_n of the per-triple amplitudes, on W_n u W_{n+1}."""
    if n < 0:
        raise ValueError("level must be non-negative")
    shape = model.shape
    region = slab(n, shape)
    if shape.d ** len(region) > DENSE_CAP:
        raise RegionTooLarge(f"slab at level {n} has {len(region)} sites")
    sites: list = []
    m = np.ones((1, 1), dtype=complex)
    for x in level_set(n, shape.k):
        K = model.raw_rule.amplitude if raw else model.rule_at(x).amplitude
        m = np.kron(m, K)
        sites.extend([x] + [x + (i,) for i in range(1, shape.k + 1)])
    return Operator.on_sites(m, sites, shape.d)


def _embed_on_ball(K_slab: Operator, n: int, shape: TreeShape) -> np.ndarray:
    """1_{Lambda_{n-1}} x K_slab; the slab is the tail of Lambda_{n+1}."""
    lower = shape.d ** (shape.ball_size(n - 1) if n >= 1 else 0)
    return np.kron(np.eye(lower), K_slab.matrix)


# --------------------------------------------------------------- states ----


def initial_state(model: ModelSpec) -> FiniteState:
    D0 = np.asarray(model.initial_density, dtype=complex)
    return FiniteState(0, (ROOT,), model.d, "dense", float(np.trace(D0).real), matrix=D0)


def advance_density(state: FiniteState, model: ModelSpec, raw: bool = False) -> FiniteState:
    """One step of D_{n+1} = K_[n,n+1] (D_n x 1) K_[n,n+1]^* on the dense path.

    The trace of the result is reported, never silently renormalized; set
    ``model.normalize`` to divide it out.
    """
    if state.matrix is None:
        raise ValueError("advance_density needs a dense state")
    shape = model.shape
    n = state.level
    target = ball(n + 1, shape)
    if shape.d ** len(target) > DENSE_CAP:
        raise RegionTooLarge(f"Lambda_{n + 1} exceeds the dense cap")
    K = _embed_on_ball(level_amplitude(model, n, raw=raw), n, shape)
    D = np.kron(state.matrix, np.eye(shape.d ** shape.level_size(n + 1)))
    out = K @ D @ K.conj().T
    out = (out + out.conj().T) / 2
    tr = float(np.trace(out).real)
    if model.normalize and tr > 0:
        out = out / tr
        tr = 1.0
    elif abs(tr - 1.0) > model.tol:
        log.info("level %d density has trace %.12g", n + 1, tr)
    return FiniteState(n + 1, target, shape.d, "dense", tr, matrix=out)


@lru_cache(maxsize=64)
def _dense_chain(model: ModelSpec, n: int, raw: bool) -> FiniteState:
    if n == 0:
        if raw:
            w0 = np.asarray(model.boundary.omega0, dtype=complex)
            return FiniteState(0, (ROOT,), model.d, "dense", float(np.trace(w0).real), matrix=w0)
        s = initial_state(model)
        if model.normalize and s.trace > 0:
            s = s.normalized()
        return s
    return advance_density(_dense_chain(model, n - 1, raw), model, raw=raw)


def dense_state(model: ModelSpec, n: int) -> FiniteState:
    return _dense_chain(model, n, False)


def _diagonal_inputs(model: ModelSpec, n: int, raw: bool):
    shape = model.shape
    parents = ball(n - 1, shape) if n >= 1 else ()
    if model.boundary.translation_invariant:
        rule = model.raw_rule if raw else model.rule
        Q = rule.weights()[None, :]
    else:
        Q = np.stack([(model.raw_rule if raw else model.rule_at(x)).weights() for x in parents])
    return Q


@lru_cache(maxsize=64)
def diagonal_state(model: ModelSpec, n: int) -> FiniteState:
    """Diagonal of D_n as a weight table over configurations of Lambda_n."""
    if not model.diagonal:
        raise RegionTooLarge("diagonal path needs a diagonal model")
    shape = model.shape
    region = ball(n, shape)
    if shape.d ** len(region) > DIAGONAL_CAP:
        raise RegionTooLarge(f"Lambda_{n} has {len(region)} sites; table too large")
    root_w = np.diag(model.initial_density).real
    Q = _diagonal_inputs(model, n, raw=False)
    w = _kernels.diag_weights(root_w, Q, None, len(region), shape.k, shape.d)
    tr = float(w.sum())
    if model.normalize and tr > 0:
        w, tr = w / tr, 1.0
    return FiniteState(n, region, shape.d, "diagonal", tr, weights=w)


def level_state(model: ModelSpec, n: int, path: str = "auto") -> FiniteState:
    path = model.path if path == "auto" else path
    if path in ("auto", "factorized"):
        shape = model.shape
        if shape.d ** shape.ball_size(n) <= 2**10 or not model.diagonal:
            return dense_state(model, n)
        return diagonal_state(model, n)
    if path == "dense":
        return dense_state(model, n)
    if path == "diagonal":
        return diagonal_state(model, n)
    raise ValueError(f"unknown path {path!r}")


# ------------------------------------------------- boundary functional ----


def _boundary_superop(A: np.ndarray, h_children: Sequence[np.ndarray], d: int) -> np.ndarray:
    """Matrix of r -> Tr_children(A (r x 1) A^* (1 x h x .. x h)) on vec(r)."""
    big = np.eye(d)
    for h in h_children:
        big = np.kron(big, h)
    rest = A.shape[0] // d
    cols = []
    for idx in range(d * d):
        e = np.zeros(d * d, dtype=complex)
        e[idx] = 1.0
        r = np.kron(e.reshape(d, d), np.eye(rest))
        cols.append(trace_children(A @ r @ A.conj().T @ big, d).reshape(-1))
    return np.array(cols).T


def _apply_site_map(m: np.ndarray, d: int, n_sites: int, site: int, S: np.ndarray) -> np.ndarray:
    perm = [i for i in range(n_sites) if i != site] + [site]
    t = _permute_factors(m, d, perm)
    rest = d ** (n_sites - 1)
    t = t.reshape(rest, d, rest, d).transpose(0, 2, 1, 3).reshape(rest * rest, d * d)
    t = (t @ S.T).reshape(rest, rest, d, d).transpose(0, 2, 1, 3).reshape(rest * d, rest * d)
    inv = [perm.index(i) for i in range(n_sites)]
    return _permute_factors(t, d, inv)


def functional_density(model: ModelSpec, n: int, path: str = "auto") -> FiniteState:
    """Density of the boundary-conditioned functional phi^(n) on Lambda_n.

    phi^(n)(a) = phi_0 E_0 ... E_n (h^(1/2) a h^(1/2)) with the raw amplitude A,
    boundary h on W_{n+1} and root weight omega_0; the trace is phi^(n)(1).
    """
    shape = model.shape
    b = model.boundary
    use_diag = model.diagonal and (path == "diagonal" or (
        path == "auto" and shape.d ** shape.ball_size(n) > 2**10))
    if use_diag:
        region = ball(n, shape)
        if shape.d ** len(region) > DIAGONAL_CAP:
            raise RegionTooLarge(f"Lambda_{n} too large for the diagonal path")
        Araw = np.abs(np.diag(model.amplitude)) ** 2
        width = shape.d**shape.k
        # leaf factor: sum over children of |A|^2(s, ch) * prod h(ch)
        leaves = level_set(n, shape.k)
        leaf_w = []
        for y in leaves:
            hv = np.ones(1)
            for i in range(1, shape.k + 1):
                hv = np.kron(hv, np.diag(b.h_at(y + (i,))).real)
            leaf_w.append(Araw.reshape(shape.d, width) @ hv)
        w = _kernels.diag_weights(np.diag(b.omega0).real, Araw[None, :],
                                  np.array(leaf_w), len(region), shape.k, shape.d)
        return FiniteState(n, region, shape.d, "diagonal", float(w.sum()), weights=w)
    R = _dense_chain(model, n, True)
    m = R.matrix
    region = R.support
    A = np.asarray(model.amplitude, dtype=complex)
    offset = shape.ball_size(n - 1) if n >= 1 else 0
    for j, y in enumerate(level_set(n, shape.k)):
        S = _boundary_superop(A, [b.h_at(y + (i,)) for i in range(1, shape.k + 1)], shape.d)
        m = _apply_site_map(m, shape.d, len(region), offset + j, S)
    m = (m + m.conj().T) / 2
    return FiniteState(n, region, shape.d, "dense", float(np.trace(m).real), matrix=m)


def finite_functional(model: ModelSpec, n: int, a: Operator, path: str = "auto") -> complex:
    """phi^(n)(a) for ``a`` supported inside Lambda_n."""
    region = ball(n, model.shape)
    if not set(a.support) <= set(region):
        raise ValueError("observable is not supported inside Lambda_n")
    return functional_density(model, n, path).expect(a)


# --------------------------------------------------- compatibility check ----


def quasi_conditional(model: ModelSpec, n: int, a: Operator) -> Operator:
    """E_{Lambda_n}(a) = Tr_{W_{n+1}}(K* a K) for ``a`` on Lambda_{n+1}."""
    shape = model.shape
    big = ball(n + 1, shape)
    K = _embed_on_ball(level_amplitude(model, n), n, shape)
    A = embed(a, big).matrix
    return partial_trace(Operator(big, shape.d, K.conj().T @ A @ K), ball(n, shape))


def probe_observables(region: SiteSet, d: int, seed: int, count: int = 200):
    """Matrix units when dim <= 64, otherwise ``count`` seeded random Hermitians."""
    dim = d ** len(region)
    if dim <= 64:
        for i in range(dim):
            for j in range(dim):
                m = np.zeros((dim, dim), dtype=complex)
                m[i, j] = 1.0
                yield Operator(region, d, m)
        return
    rng = np.random.default_rng(seed)
    for _ in range(count):
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        yield Operator(region, d, (g + g.conj().T) / 2)


@dataclass
class CompatibilityReport:
    """Per-level defects.

    ``functional_defect``: max |phi^(n)(E(a)) - phi^(n+1)(a)| over the test
    observables; ``marginal_defect``: max |Tr_{W_{n+1}} D_{n+1} - D_n|;
    ``functional_marginal_defect``: the same for the functional densities.
    """

    levels: list = field(default_factory=list)
    functional_defect: list = field(default_factory=list)
    marginal_defect: list = field(default_factory=list)
    functional_marginal_defect: list = field(default_factory=list)
    normalization: list = field(default_factory=list)  # phi^(n)(1) per level

    def max_defect(self) -> float:
        vals = self.functional_defect + self.marginal_defect
        return max(vals) if vals else 0.0

    def passed(self, tol: float) -> bool:
        return self.max_defect() < tol

    def rows(self):
        for i, n in enumerate(self.levels):
            yield {"n": n, "functional_defect": self.functional_defect[i],
                   "marginal_defect": self.marginal_defect[i],
                   "functional_marginal_defect": self.functional_marginal_defect[i],
                   "phi_n_of_1": self.normalization[i]}


def check_compatibility(model: ModelSpec, n_max: int) -> CompatibilityReport:
    """Defects of phi^(n) o E_{Lambda_n} = phi^(n+1) for n < n_max."""
    rep = CompatibilityReport()
    shape = model.shape
    for n in range(n_max):
        try:
            rho_n = functional_density(model, n, "dense")
            rho_n1 = functional_density(model, n + 1, "dense")
            D_n, D_n1 = dense_state(model, n), dense_state(model, n + 1)
        except RegionTooLarge as exc:
            log.warning("compatibility check stops at n=%d: %s", n, exc)
            break
        region = ball(n + 1, shape)
        worst = 0.0
        for a in probe_observables(region, shape.d, model.seed):
            lhs = rho_n.expect(quasi_conditional(model, n, a))
            rhs = rho_n1.expect(a)
            worst = max(worst, abs(lhs - rhs))
        marg = D_n1.marginal(ball(n, shape)).matrix - D_n.matrix
        fmarg = rho_n1.marginal(ball(n, shape)).matrix - rho_n.matrix
        rep.levels.append(n)
        rep.functional_defect.append(float(worst))
        rep.marginal_defect.append(float(np.abs(marg).max()))
        rep.functional_marginal_defect.append(float(np.abs(fmarg).max()))
        rep.normalization.append(rho_n.trace)
    return rep


# ------------------------------------------------------- boundary solver ----


def boundary_map(A: np.ndarray, h: np.ndarray, shape: TreeShape) -> np.ndarray:
    """h -> Tr_children(A* (1 x h x ... x h) A)."""
    big = np.eye(shape.d)
    for _ in range(shape.k):
        big = np.kron(big, h)
    return trace_children(A.conj().T @ big @ A, shape.d)


def scale_fixed_point(A: np.ndarray, direction: np.ndarray, shape: TreeShape) -> np.ndarray:
    """Scale an eigen-direction F(h) = lam h of the degree-k map to a fixed point."""
    F = boundary_map(A, direction, shape)
    lam = np.trace(F).real / np.trace(direction).real
    if shape.k == 1:
        if abs(lam - 1.0) > 1e-9:
            raise NoConvergence(f"linear boundary map has eigenvalue {lam:.6g}, not 1")
        return direction
    return direction * lam ** (-1.0 / (shape.k - 1))


def solve_boundary(A: np.ndarray, h0: np.ndarray, shape: TreeShape = TreeShape(),
                   damping: float = 0.0, tol: float = 1e-12,
                   max_iter: int = 10_000) -> BoundaryFamily:
    """Translation-invariant solution h of Tr_children(A*(1 x h x h)A) = h.

    The direction of h is iterated (trace-normalized, optionally damped) and
    the scale is then fixed exactly using the degree-k homogeneity of the map.
    """
    A = np.asarray(A, dtype=complex)
    h = np.asarray(h0, dtype=complex)
    h = h / np.trace(h).real
    for it in range(max_iter):
        F = boundary_map(A, h, shape)
        F = (F + F.conj().T) / 2
        tr = np.trace(F).real
        if tr <= 0:
            raise LostPositivity("boundary map lost positivity")
        new = (1.0 - damping) * F / tr + damping * h
        step = float(np.abs(new - h).max())
        h = new
        if np.linalg.eigvalsh(h)[0] <= 0:
            raise LostPositivity(f"iterate {it} is not strictly positive")
        if step < tol:
            break
    else:
        raise NoConvergence(f"no convergence after {max_iter} iterations (last step {step:.3e})")
    h = scale_fixed_point(A, h, shape)
    return BoundaryFamily.consistent(h)
