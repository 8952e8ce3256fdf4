"""Model data: transition rules, boundary families and the ModelSpec bundle."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping, Optional, Union

import numpy as np

from .linalg import DEFAULT_TOL, herm_eig, herm_func, herm_sqrt
from .tree import ROOT, TreeShape, Vertex

PATHS = ("auto", "dense", "diagonal", "factorized")
KINDS = ("ising", "trace_state", "custom_amplitude")


def trace_children(m: np.ndarray, d: int) -> np.ndarray:
    """Partial trace of a (parent, children) matrix down to the parent."""
    rest = m.shape[0] // d
    return np.trace(m.reshape(d, rest, d, rest), axis1=1, axis2=3)


def is_diagonal(m: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    off = m - np.diag(np.diag(m))
    return bool(np.abs(off).max(initial=0.0) <= tol)


@dataclass(frozen=True, eq=False)
class TransitionRule:
    """Density amplitude K on a parent and its k children.

    The induced transition expectation is ``E(a) = Tr_children(K* a K)``.
    """

    amplitude: np.ndarray = field(repr=False)
    shape: TreeShape = TreeShape()

    def __post_init__(self):
        n = self.shape.d ** (self.shape.k + 1)
        if self.amplitude.shape != (n, n):
            raise ValueError(f"amplitude must be {n}x{n}, got {self.amplitude.shape}")

    def expectation(self, a: np.ndarray) -> np.ndarray:
        K = self.amplitude
        return trace_children(K.conj().T @ a @ K, self.shape.d)

    def unitality_defect(self) -> float:
        e1 = self.expectation(np.eye(self.amplitude.shape[0]))
        return float(np.abs(e1 - np.eye(self.shape.d)).max())

    def is_unital(self, tol: float = DEFAULT_TOL) -> bool:
        return self.unitality_defect() < tol

    @cached_property
    def diagonal(self) -> bool:
        return is_diagonal(self.amplitude)

    def weights(self) -> np.ndarray:
        """|K|^2 as a flattened weight vector (diagonal rules only)."""
        if not self.diagonal:
            raise ValueError("rule is not diagonal")
        return np.abs(np.diag(self.amplitude)) ** 2

    @classmethod
    def normalized(cls, amplitude: np.ndarray, shape: TreeShape) -> "TransitionRule":
        """Right-multiply by E(1)^(-1/2) on the parent to make the rule unital."""
        e1 = trace_children(amplitude.conj().T @ amplitude, shape.d)
        inv_sqrt = herm_func(e1, lambda w: 1.0 / np.sqrt(w))
        fix = np.kron(inv_sqrt, np.eye(shape.d**shape.k))
        return cls(amplitude @ fix, shape)


@dataclass(frozen=True, eq=False)
class BoundaryFamily:
    """Boundary operators h (shared or per vertex) and the root weight omega_0."""

    h: Union[np.ndarray, Mapping[Vertex, np.ndarray]] = field(repr=False)
    omega0: np.ndarray = field(repr=False)

    def h_at(self, v: Vertex) -> np.ndarray:
        if isinstance(self.h, Mapping):
            return np.asarray(self.h[tuple(v)])
        return np.asarray(self.h)

    @property
    def translation_invariant(self) -> bool:
        return not isinstance(self.h, Mapping)

    def eq1_defect(self) -> float:
        return abs(np.trace(self.omega0 @ self.h_at(ROOT)) - 1.0)

    @classmethod
    def consistent(cls, h, omega_seed: Optional[np.ndarray] = None) -> "BoundaryFamily":
        """Scale ``omega_seed`` (default identity) so that Tr(omega0 h_root) = 1."""
        h0 = np.asarray(h[ROOT] if isinstance(h, Mapping) else h)
        seed = np.eye(h0.shape[0]) if omega_seed is None else np.asarray(omega_seed)
        z = np.trace(seed @ h0).real
        if z <= 0:
            raise ValueError("Tr(omega h) must be positive")
        return cls(h, seed / z)


def conditioned_amplitude(A: np.ndarray, h_parent, h_children, d: int) -> np.ndarray:
    """(1 x h_c^(1/2) x ...) A (h_x^(-1/2) x 1 ...).

    Unital exactly when Tr_children(A* (1 x h x ... x h) A) = h_x.
    """
    inv_sqrt = herm_func(np.asarray(h_parent), lambda w: 1.0 / np.sqrt(w))
    left = np.eye(d)
    for hc in h_children:
        left = np.kron(left, herm_sqrt(np.asarray(hc)))
    right = np.kron(inv_sqrt, np.eye(A.shape[0] // d))
    return left @ A @ right


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Everything needed to build the finite-volume states of one model.

    ``amplitude`` is the raw per-triple amplitude A of the boundary-conditioned
    construction; the transition rule actually used for densities is A
    conditioned on the boundary family (see :func:`conditioned_amplitude`).
    """

    kind: str
    shape: TreeShape
    amplitude: np.ndarray = field(repr=False)
    boundary: BoundaryFamily = field(repr=False)
    beta: Optional[float] = None
    J: Optional[float] = None
    branch: Optional[str] = None
    path: str = "auto"
    n_max: int = 2
    tol: float = 1e-9
    seed: int = 42
    normalize: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.path not in PATHS:
            raise ValueError(f"unknown path {self.path!r}")

    @property
    def k(self) -> int:
        return self.shape.k

    @property
    def d(self) -> int:
        return self.shape.d

    def with_(self, **changes) -> "ModelSpec":
        return replace(self, **changes)

    def rule_at(self, x: Vertex) -> TransitionRule:
        if self.boundary.translation_invariant:
            return self.rule
        b = self.boundary
        ch = [tuple(x) + (i,) for i in range(1, self.k + 1)]
        K = conditioned_amplitude(self.amplitude, b.h_at(x), [b.h_at(c) for c in ch], self.d)
        return TransitionRule(K, self.shape)

    @cached_property
    def rule(self) -> TransitionRule:
        if not self.boundary.translation_invariant:
            raise ValueError("per-vertex boundary: use rule_at(x)")
        h = self.boundary.h_at(ROOT)
        K = conditioned_amplitude(self.amplitude, h, [h] * self.k, self.d)
        return TransitionRule(K, self.shape)

    @cached_property
    def raw_rule(self) -> TransitionRule:
        return TransitionRule(np.asarray(self.amplitude, dtype=complex), self.shape)

    @cached_property
    def initial_density(self) -> np.ndarray:
        """D_0 = h_0^(1/2) omega_0 h_0^(1/2); unit trace iff Tr(omega0 h0) = 1."""
        s = herm_sqrt(self.boundary.h_at(ROOT))
        return s @ self.boundary.omega0 @ s

    @cached_property
    def diagonal(self) -> bool:
        b = self.boundary
        hs = list(b.h.values()) if isinstance(b.h, Mapping) else [b.h]
        return (
            is_diagonal(np.asarray(self.amplitude))
            and is_diagonal(np.asarray(b.omega0))
            and all(is_diagonal(np.asarray(h)) for h in hs)
        )

    def eq2_residual(self, x: Vertex = ROOT) -> float:
        """max |Tr_children(A* (1 x h x h) A) - h_x|."""
        b = self.boundary
        big = np.eye(self.d)
        for i in range(1, self.k + 1):
            big = np.kron(big, b.h_at(tuple(x) + (i,)))
        A = self.amplitude
        lhs = trace_children(A.conj().T @ big @ A, self.d)
        return float(np.abs(lhs - b.h_at(x)).max())

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "k": self.k,
            "d": self.d,
            "beta": self.beta,
            "J": self.J,
            "branch": self.branch,
            "path": self.path,
            "n_max": self.n_max,
            "tol": self.tol,
            "seed": self.seed,
            "normalize": self.normalize,
        }


def trace_state_model(k: int = 2, d: int = 2, **kw) -> ModelSpec:
    """K = d^(-k/2) I, h = I, omega_0 = I/d: the product trace state."""
    shape = TreeShape(k, d)
    A = np.eye(d ** (k + 1), dtype=complex) * d ** (-k / 2)
    return ModelSpec("trace_state", shape, A, BoundaryFamily.consistent(np.eye(d)), **kw)


def custom_model(amplitude: np.ndarray, k: int, d: int, omega0: Optional[np.ndarray] = None,
                 h: Optional[np.ndarray] = None, **kw) -> ModelSpec:
    """Model from a user amplitude; default boundary h = I, omega_0 = I/d."""
    shape = TreeShape(k, d)
    h = np.eye(d) if h is None else np.asarray(h)
    b = BoundaryFamily.consistent(h, omega0)
    return ModelSpec("custom_amplitude", shape, np.asarray(amplitude, dtype=complex), b, **kw)


def random_unital_amplitude(k: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """A generic non-diagonal amplitude normalized to be unital."""
    n = d ** (k + 1)
    G = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return TransitionRule.normalized(G, TreeShape(k, d)).amplitude


def spectrum_min(m: np.ndarray) -> float:
    return float(herm_eig(m).eigenvalues[-1])
