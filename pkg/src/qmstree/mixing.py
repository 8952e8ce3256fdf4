"""Finite checks of the strong-mixing mechanism for localized rules.

For a unital rule E on (parent, children) and a child index j the induced map
is ``P_j(b) = E(1 x .. x b_(j) x .. x 1)``.  On an abelian range algebra
spanned by projections p_1..p_r it acts on coefficient vectors through the
matrix ``pi[i, i'] = rho_ii'(p_i x p_i')`` defined by

    E(p_i x p_i'_(j) x 1) = pi[i, i'] p_i.

A strictly positive pi forces a simple peripheral eigenvalue 1
(Perron-Frobenius), which is what drives correlation decay.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidChildIndex, NotCentral
from .linalg import Operator
from .model import ModelSpec, TransitionRule, is_diagonal
from .qms import level_state
from .tree import ROOT


@dataclass(frozen=True, eq=False)
class RangeAlgebraDescription:
    projections: tuple

    def __post_init__(self):
        ps = [np.asarray(p) for p in self.projections]
        d = ps[0].shape[0]
        if np.abs(sum(ps) - np.eye(d)).max() > 1e-10:
            raise ValueError("projections must sum to the identity")
        for i, p in enumerate(ps):
            if np.abs(p @ p - p).max() > 1e-10 or np.abs(p - p.conj().T).max() > 1e-10:
                raise ValueError(f"p_{i} is not an orthogonal projection")
            for q in ps[i + 1:]:
                if np.abs(p @ q).max() > 1e-10:
                    raise ValueError("projections must be mutually orthogonal")

    @property
    def r(self) -> int:
        return len(self.projections)

    @property
    def block_dims(self) -> list:
        return [int(round(np.trace(p).real)) for p in self.projections]


def basis_projections(d: int) -> RangeAlgebraDescription:
    out = []
    for i in range(d):
        p = np.zeros((d, d), dtype=complex)
        p[i, i] = 1.0
        out.append(p)
    return RangeAlgebraDescription(tuple(out))


def trivial_projections(d: int) -> RangeAlgebraDescription:
    return RangeAlgebraDescription((np.eye(d, dtype=complex),))


def default_projections(rule: TransitionRule) -> RangeAlgebraDescription:
    """Computational-basis projections for diagonal non-scalar rules, else {1}."""
    K = rule.amplitude
    d = rule.shape.d
    if is_diagonal(K) and np.ptp(np.abs(np.diag(K))) > 1e-12:
        return basis_projections(d)
    return trivial_projections(d)


def _child_operator(b: np.ndarray, parent_op: np.ndarray, j: int, k: int, d: int) -> np.ndarray:
    factors = [parent_op] + [np.eye(d)] * k
    factors[j] = b
    out = factors[0]
    for f in factors[1:]:
        out = np.kron(out, f)
    return out


def _check_child(j: int, k: int) -> None:
    if not 1 <= j <= k:
        raise InvalidChildIndex(f"child index {j} outside 1..{k}")


@dataclass
class InducedMap:
    matrix: np.ndarray
    basis: list = field(repr=False)
    residual: float = 0.0


def induced_map(rule: TransitionRule, j: int, basis: Optional[Sequence[np.ndarray]] = None) -> InducedMap:
    """Matrix of b -> E(1 x b_(j) x 1) in ``basis`` (default: matrix units of M_d).

    Column c holds the coefficients of P_j(basis[c]); the least-squares
    residual measures how far the span of ``basis`` is from invariant.
    """
    k, d = rule.shape.k, rule.shape.d
    _check_child(j, k)
    if basis is None:
        basis = []
        for a in range(d):
            for c in range(d):
                e = np.zeros((d, d), dtype=complex)
                e[a, c] = 1.0
                basis.append(e)
    B = np.array([np.asarray(b).reshape(-1) for b in basis]).T
    images = np.array([
        rule.expectation(_child_operator(np.asarray(b), np.eye(d), j, k, d)).reshape(-1)
        for b in basis
    ]).T
    coef, *_ = np.linalg.lstsq(B, images, rcond=None)
    res = float(np.abs(B @ coef - images).max()) if images.size else 0.0
    return InducedMap(coef, list(basis), res)


@dataclass
class PiMatrix:
    entries: np.ndarray
    relation_defect: float

    @property
    def min_entry(self) -> float:
        return float(self.entries.min())

    @property
    def strictly_positive(self) -> bool:
        return bool(self.min_entry > 0)


def pi_matrix(rule: TransitionRule, j: int, projections: RangeAlgebraDescription,
              tol: float = 1e-10) -> PiMatrix:
    """pi[i, i'] from E(p_i x p_i'_(j) x 1) = pi[i, i'] p_i; NotCentral if that fails."""
    k, d = rule.shape.k, rule.shape.d
    _check_child(j, k)
    ps = [np.asarray(p) for p in projections.projections]
    r = len(ps)
    pi = np.zeros((r, r))
    worst = 0.0
    for i, pa in enumerate(ps):
        for i2, pb in enumerate(ps):
            X = rule.expectation(_child_operator(pb, pa, j, k, d))
            val = np.trace(X).real / np.trace(pa).real
            pi[i, i2] = val
            worst = max(worst, float(np.abs(X - val * pa).max()))
    if worst > tol:
        raise NotCentral(f"defining relation fails by {worst:.3e}")
    return PiMatrix(pi, worst)


@dataclass
class PeripheralReport:
    eigenvalues: np.ndarray
    peripheral: np.ndarray
    tol: float

    @property
    def simple(self) -> bool:
        return len(self.peripheral) == 1 and abs(self.peripheral[0] - 1.0) < self.tol

    @property
    def second_modulus(self) -> float:
        mods = np.sort(np.abs(self.eigenvalues))[::-1]
        return float(mods[1]) if len(mods) > 1 else 0.0

    @property
    def gap(self) -> float:
        return 1.0 - self.second_modulus


def peripheral_spectrum(matrix: np.ndarray, tol: float = 1e-9) -> PeripheralReport:
    """Eigenvalues of modulus >= 1 - tol of a unital positive map's matrix."""
    w = np.linalg.eigvals(np.asarray(matrix))
    w = w[np.argsort(-np.abs(w), kind="stable")]
    return PeripheralReport(w, w[np.abs(w) >= 1 - tol], tol)


def stationary_vector(pi: np.ndarray) -> np.ndarray:
    """Left Perron vector of a row-stochastic pi, normalized to sum 1."""
    w, v = np.linalg.eig(pi.T)
    i = int(np.argmin(np.abs(w - 1.0)))
    s = np.real(v[:, i])
    return s / s.sum()


def single_site_marginal(model: ModelSpec, projections: RangeAlgebraDescription) -> np.ndarray:
    st = level_state(model, 0)
    D = st.operator.matrix / st.trace
    return np.array([np.trace(D @ p).real for p in projections.projections])


def ray(depth: int):
    return (1,) * depth


def correlation_decay(model: ModelSpec, a: np.ndarray, b: np.ndarray, g_max: int,
                      rate: Optional[float] = None) -> list:
    """|phi(a alpha_g(b)) - phi(a) phi(b)| along the ray g = (1, .., 1).

    ``a`` sits at the root and ``b`` at g.  The ``bound`` column is the
    distance-1 value propagated with ``rate`` (|second eigenvalue| of P_1).
    """
    d = model.d
    rows = []
    first = None
    for m in range(1, g_max + 1):
        st = level_state(model, m)
        g = ray(m)
        pair = st.marginal([ROOT, g])
        D = (pair.operator.matrix if pair.matrix is not None else np.diag(pair.weights)) / st.trace
        root = st.marginal([ROOT])
        Dr = (root.operator.matrix if root.matrix is not None else np.diag(root.weights)) / st.trace
        joint = np.trace(D @ np.kron(a, b))
        corr = abs(joint - np.trace(Dr @ a) * np.trace(Dr @ b))
        if first is None:
            first = corr
        bound = first * rate ** (m - 1) if rate is not None else float("nan")
        rows.append({"distance": m, "correlation": float(corr), "bound": float(bound)})
    return rows


def degenerate_amplitude(kind: str = "copy", k: int = 2, d: int = 2) -> np.ndarray:
    """Unital diagonal amplitude whose children copy (or flip) the parent.

    Its pi matrix has zero entries, so the peripheral spectrum is not simple.
    """
    diag = np.zeros(d ** (k + 1))
    for s in range(d):
        c = s if kind == "copy" else (s + 1) % d
        idx = s
        for _ in range(k):
            idx = idx * d + c
        diag[idx] = 1.0
    return np.diag(diag).astype(complex)
