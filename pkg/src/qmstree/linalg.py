"""Dense complex linear algebra over site-labelled tensor products.

An :class:`Operator` is a dense ``d**N x d**N`` matrix whose tensor factors
are the sites of ``support`` in canonical order, the first site being the
most significant digit of the row/column index (the ``np.kron`` convention).
Functional calculus is restricted to Hermitian inputs and goes through
``numpy.linalg.eigh``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import (
    InvalidDensity,
    KeepNotSubset,
    NonPositiveSpectrum,
    NotHermitian,
    NotNormalized,
    OverlappingSupport,
    RegionTooLarge,
)
from .tree import SiteSet, canonical

DENSE_CAP = 2**14
DEFAULT_TOL = 1e-10


def _check_dim(d: int, n_sites: int) -> None:
    if d**n_sites > DENSE_CAP:
        raise RegionTooLarge(
            f"dense path refuses dimension {d}**{n_sites} > {DENSE_CAP}"
        )


def _permute_factors(matrix: np.ndarray, d: int, perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: new factor j is old factor ``perm[j]``."""
    n = len(perm)
    if list(perm) == list(range(n)):
        return matrix
    t = matrix.reshape((d,) * (2 * n))
    axes = list(perm) + [n + p for p in perm]
    return t.transpose(axes).reshape(d**n, d**n)


@dataclass(frozen=True)
class Operator:
    support: SiteSet
    d: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = len(self.support)
        if self.matrix.shape != (self.d**n, self.d**n):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match "
                f"{n} sites of dimension {self.d}"
            )

    @classmethod
    def on_sites(cls, matrix, sites: Sequence, d: int) -> "Operator":
        """Wrap ``matrix`` whose factors follow ``sites`` (any order)."""
        sites = tuple(tuple(s) for s in sites)
        if len(set(sites)) != len(sites):
            raise OverlappingSupport("repeated site in support")
        order = canonical(sites)
        _check_dim(d, len(order))
        perm = [sites.index(v) for v in order]
        m = _permute_factors(np.asarray(matrix, dtype=complex), d, perm)
        return cls(order, d, m)

    @classmethod
    def identity(cls, support: Iterable, d: int) -> "Operator":
        support = canonical(support)
        _check_dim(d, len(support))
        return cls(support, d, np.eye(d ** len(support), dtype=complex))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dagger(self) -> "Operator":
        return Operator(self.support, self.d, self.matrix.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def is_hermitian(self, tol: float = DEFAULT_TOL) -> bool:
        return bool(np.abs(self.matrix - self.matrix.conj().T).max(initial=0.0) <= tol)

    def _same(self, other: "Operator") -> None:
        if other.support != self.support or other.d != self.d:
            raise ValueError("operators act on different supports")

    def __matmul__(self, other: "Operator") -> "Operator":
        self._same(other)
        return Operator(self.support, self.d, self.matrix @ other.matrix)

    def __add__(self, other: "Operator") -> "Operator":
        self._same(other)
        return Operator(self.support, self.d, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._same(other)
        return Operator(self.support, self.d, self.matrix - other.matrix)

    def __mul__(self, c) -> "Operator":
        return Operator(self.support, self.d, self.matrix * c)

    __rmul__ = __mul__


def kron(a: Operator, b: Operator) -> Operator:
    """Tensor product with factors permuted into canonical order."""
    if a.d != b.d:
        raise ValueError("local dimensions differ")
    if set(a.support) & set(b.support):
        raise OverlappingSupport("supports must be disjoint")
    return Operator.on_sites(np.kron(a.matrix, b.matrix), a.support + b.support, a.d)


def embed(a: Operator, support: Iterable) -> Operator:
    """``a`` tensored with the identity on ``support`` minus its own support."""
    support = canonical(support)
    extra = [v for v in support if v not in set(a.support)]
    if len(extra) + len(a.support) != len(support):
        raise KeepNotSubset("operator support is not inside the target region")
    if not extra:
        return a
    return kron(a, Operator.identity(extra, a.d))


def partial_trace(a: Operator, keep: Iterable) -> Operator:
    """Trace out every site of ``a.support`` not in ``keep``."""
    keep = canonical(keep)
    pos = {v: i for i, v in enumerate(a.support)}
    if any(v not in pos for v in keep):
        raise KeepNotSubset("keep must be a subset of the support")
    kept = [pos[v] for v in keep]
    traced = [i for i in range(len(a.support)) if i not in set(kept)]
    if not traced:
        return a
    d = a.d
    m = _permute_factors(a.matrix, d, kept + traced)
    dk, dt = d ** len(kept), d ** len(traced)
    m = np.trace(m.reshape(dk, dt, dk, dt), axis1=1, axis2=3)
    return Operator(keep, d, m)


def conditional_trace(a: Operator, keep: Iterable) -> Operator:
    """T^Y_X: partial trace onto ``keep`` followed by re-embedding on ``a.support``.

    Unnormalized; maps A_Y into its subalgebra A_X (x) 1.
    """
    return embed(partial_trace(a, keep), a.support)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def _as_matrix(a) -> np.ndarray:
    return a.matrix if isinstance(a, Operator) else np.asarray(a)


def herm_eig(a, tol: float = DEFAULT_TOL) -> Spectrum:
    m = _as_matrix(a)
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if np.abs(m - m.conj().T).max(initial=0.0) > tol * scale:
        raise NotHermitian("matrix is not Hermitian within tolerance")
    w, u = np.linalg.eigh((m + m.conj().T) / 2)
    return Spectrum(w[::-1].copy(), u[:, ::-1].copy())


def herm_func(a, f: Callable[[np.ndarray], np.ndarray], tol: float = DEFAULT_TOL):
    """Apply ``f`` to the spectrum of a Hermitian operator or matrix."""
    spec = herm_eig(a, tol)
    u = spec.eigenvectors
    m = (u * f(spec.eigenvalues)) @ u.conj().T
    if isinstance(a, Operator):
        return Operator(a.support, a.d, m)
    return m


def herm_exp(a, tol: float = DEFAULT_TOL):
    return herm_func(a, np.exp, tol)


def herm_log(a, tol: float = DEFAULT_TOL, floor: float = 0.0):
    spec = herm_eig(a, tol)
    if spec.eigenvalues[-1] <= floor:
        raise NonPositiveSpectrum(
            f"smallest eigenvalue {spec.eigenvalues[-1]:.3e} <= {floor}"
        )
    return herm_func(a, np.log, tol)


def herm_sqrt(a, tol: float = DEFAULT_TOL):
    return herm_func(a, lambda w: np.sqrt(np.clip(w, 0.0, None)), tol)


@dataclass(frozen=True)
class DensityMatrix:
    op: Operator
    tolerance: float = DEFAULT_TOL

    def __post_init__(self):
        validate_density(self.op.matrix, self.tolerance)


def validate_density(m: np.ndarray, tol: float = DEFAULT_TOL, unit_trace: bool = True):
    """Raise InvalidDensity unless ``m`` is Hermitian PSD (and unit trace)."""
    if np.abs(m - m.conj().T).max(initial=0.0) > tol:
        raise InvalidDensity("density is not Hermitian")
    w = np.linalg.eigvalsh((m + m.conj().T) / 2)
    if w[0] < -tol:
        raise InvalidDensity(f"negative eigenvalue {w[0]:.3e}")
    if unit_trace and abs(np.trace(m).real - 1.0) > tol:
        raise InvalidDensity(f"trace {np.trace(m).real!r} != 1")
    return w


def spectral_entropy(eigenvalues: np.ndarray, tol: float = DEFAULT_TOL) -> float:
    """-sum l log l with eigenvalues in [-tol, 0) clipped to zero."""
    w = np.asarray(eigenvalues, dtype=float)
    if w.size and w.min() < -tol:
        raise InvalidDensity(f"negative eigenvalue {w.min():.3e}")
    return _kernels.xlogx_sum(np.clip(w, 0.0, None))


def von_neumann_entropy(rho, tol: float = DEFAULT_TOL) -> float:
    """Entropy in nats of a unit-trace density (Operator, DensityMatrix or array)."""
    if isinstance(rho, DensityMatrix):
        rho, tol = rho.op, rho.tolerance
    w = validate_density(_as_matrix(rho), tol)
    return spectral_entropy(w, tol)


def raw_entropy(a, tol: float = DEFAULT_TOL) -> float:
    """-Tr(A log A) for a PSD operator of arbitrary trace.

    Coincides with the von Neumann entropy on unit-trace input; used only
    where un-renormalized finite-volume operators are reported as-is.
    """
    w = validate_density(_as_matrix(a), tol * max(1.0, abs(np.trace(_as_matrix(a)))),
                         unit_trace=False)
    return spectral_entropy(w, tol)


def diag_fast_entropy(weights, tol: float = DEFAULT_TOL) -> float:
    w = np.asarray(weights, dtype=float)
    if abs(w.sum() - 1.0) > tol:
        raise NotNormalized(f"weights sum to {w.sum()!r}")
    if w.size and w.min() < -tol:
        raise NotNormalized("negative weight")
    return _kernels.xlogx_sum(np.clip(w, 0.0, None))


def commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a @ b - b @ a).max(initial=0.0))
