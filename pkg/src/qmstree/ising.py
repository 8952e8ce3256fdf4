"""Ising-type quantum Markov states on the order-2 Cayley tree.

Each parent-children triple ``(x, (x,1), (x,2))`` carries

    A = K<x,(x,1)> K<x,(x,2)> L>(x,1),(x,2)<,
    K = exp(beta H),  L = exp(J beta H),  H = (1 x 1 + sz x sz) / 2,

all diagonal in the sz basis.  Basis order is sz-up before sz-down, and
triple configurations are enumerated parent-major.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import BranchNotFound
from .linalg import Operator, herm_exp, kron
from .model import BoundaryFamily, ModelSpec
from .qms import boundary_map, diagonal_state, scale_fixed_point
from .tree import ROOT, TreeShape

BRANCHES = ("h1", "h2", "h_alpha")

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)

SHAPE = TreeShape(2, 2)


@dataclass(frozen=True)
class IsingParams:
    beta: float
    J: float
    branch: str = "h_alpha"

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.J > 0:
            raise ValueError(f"J must be > 0, got {self.J}")
        if self.branch not in BRANCHES:
            raise ValueError(f"unknown branch {self.branch!r}; choose from {BRANCHES}")


def bond_hamiltonian() -> np.ndarray:
    return 0.5 * (np.kron(I2, I2) + np.kron(SZ, SZ))


def build_amplitudes(p: IsingParams):
    """Return (K_edge, L_edge, A_triple) as 4x4, 4x4 and 8x8 matrices."""
    H = bond_hamiltonian()
    K_edge = herm_exp(p.beta * H)
    L_edge = herm_exp(p.J * p.beta * H)
    x, c1, c2 = ROOT, (1,), (2,)
    K1 = Operator.on_sites(K_edge, [x, c1], 2)
    K2 = Operator.on_sites(K_edge, [x, c2], 2)
    L = Operator.on_sites(L_edge, [c1, c2], 2)
    ident = lambda v: Operator.identity([v], 2)  # noqa: E731
    A = kron(K1, ident(c2)) @ kron(K2, ident(c1)) @ kron(L, ident(x))
    return K_edge, L_edge, A.matrix


def alpha_of(p: IsingParams) -> float:
    b, J = p.beta, p.J
    return 4.0 / (np.exp(2 * J * b) * (np.exp(4 * b) + 1) + 2 * np.exp(2 * b))


def doubled_exponents(p: IsingParams) -> np.ndarray:
    """The eight exponents mu_i with exp(mu_i) = |A|^2 on the diagonal."""
    b, J = p.beta, p.J
    return 2 * np.array([b * (J + 2), b, b, b * J, b * J, b, b, b * (J + 2)])


def triple_hamiltonian(p: IsingParams) -> np.ndarray:
    """Diagonal of H_alpha = ln(alpha) + mu."""
    return np.log(alpha_of(p)) + doubled_exponents(p)


def printed_bracket(p: IsingParams) -> float:
    """alpha((ln a + 2b(J+2))e^{2b(J+2)} + 2(ln a + 2b)e^{2b} + (ln a + 2bJ)e^{2bJ}).

    Equals tr(H_alpha exp H_alpha) / 2.  It is the raw closed-form expression
    for the mean entropy of phi_alpha as it appears in the literature; it is
    *not* the mean entropy (see :func:`ising_closed_form`).
    """
    b, J = p.beta, p.J
    a = alpha_of(p)
    la = np.log(a)
    return a * ((la + 2 * b * (J + 2)) * np.exp(2 * b * (J + 2))
                + 2 * (la + 2 * b) * np.exp(2 * b)
                + (la + 2 * b * J) * np.exp(2 * b * J))


def printed_closed_form_variants(beta: float, J: float) -> dict:
    """Both signed readings of the raw expression, +bracket and -bracket."""
    v = printed_bracket(IsingParams(beta, J))
    return {"plus": v, "minus": -v}


def ising_closed_form(beta: float, J: float) -> float:
    """Mean entropy of phi_alpha in nats.

    The per-triple weights alpha e^{mu_i} sum to 8, so the triple marginal is
    p_i = alpha e^{mu_i} / 8 and the conditional law of the children given the
    parent is 2 p_i.  Normalizing the raw expression accordingly gives
    s = -(1/2) sum_i p_i log(2 p_i) = ln 2 - bracket / 8, which is the
    non-negative of the two normalized signed variants.
    """
    return float(np.log(2.0) - printed_bracket(IsingParams(beta, J)) / 8.0)


def ising_closed_form_from_weights(beta: float, J: float) -> float:
    """Same quantity computed directly as a conditional entropy per child."""
    p = IsingParams(beta, J)
    w = alpha_of(p) * np.exp(doubled_exponents(p)) / 8.0
    return float(-0.5 * np.sum(w * np.log(2.0 * w)))


# --------------------------------------------------------- boundaries -----


def _direction_map(A: np.ndarray, t: float) -> float:
    """Up-component of the trace-normalized image of diag(t, 1-t)."""
    F = boundary_map(A, np.diag([t, 1.0 - t]).astype(complex), SHAPE).real
    return F[0, 0] / (F[0, 0] + F[1, 1])


def scan_fixed_points(A: np.ndarray, grid: int = 2001) -> list:
    """All t in (0, 1) with G(t) = t for the diagonal direction map G."""
    ts = np.linspace(1e-9, 1 - 1e-9, grid)
    g = np.array([_direction_map(A, t) - t for t in ts])
    roots = []
    for i in range(len(ts) - 1):
        if g[i] == 0.0:
            roots.append(ts[i])
        elif g[i] * g[i + 1] < 0:
            roots.append(brentq(lambda t: _direction_map(A, t) - t, ts[i], ts[i + 1],
                                xtol=1e-15, rtol=1e-15))
    # the symmetric point is exact; do not rely on the grid hitting it
    roots = [r for r in roots if abs(r - 0.5) > 1e-6] + [0.5]
    return sorted(roots)


def boundary_presets(p: IsingParams, residual_tol: float = 1e-10) -> dict:
    """Fixed points h_1, h_2, h_alpha of the boundary equation.

    h_alpha is the symmetric solution (alpha/4) I; h_1 (up-favouring) and
    h_2 (its spin-flip mirror) exist only in the ordered regime.  Raises
    BranchNotFound when the scan does not isolate three solutions.
    """
    _, _, A = build_amplitudes(p)
    roots = scan_fixed_points(A)
    out = {"h_alpha": scale_fixed_point(A, np.diag([0.5, 0.5]).astype(complex), SHAPE)}
    up = [t for t in roots if t > 0.5 + 1e-6]
    if len(roots) == 3 and len(up) == 1:
        t = up[0]
        out["h1"] = scale_fixed_point(A, np.diag([t, 1 - t]).astype(complex), SHAPE)
        out["h2"] = scale_fixed_point(A, np.diag([1 - t, t]).astype(complex), SHAPE)
    for name, h in out.items():
        res = np.abs(boundary_map(A, h, SHAPE) - h).max()
        if res > residual_tol:
            raise BranchNotFound(f"{name} residual {res:.3e} exceeds {residual_tol}")
    if len(out) != 3:
        raise BranchNotFound(
            f"found {len(roots)} diagonal fixed point(s) at beta={p.beta}, J={p.J}; "
            "h1/h2 exist only in the ordered regime"
        )
    return out


def ising_model(beta: float, J: float, branch: str = "h_alpha", h=None, **kw) -> ModelSpec:
    """ModelSpec for the Ising example; ``h`` overrides the branch boundary."""
    p = IsingParams(beta, J, branch)
    _, _, A = build_amplitudes(p)
    if h is None:
        if branch == "h_alpha":
            h = scale_fixed_point(A, np.diag([0.5, 0.5]).astype(complex), SHAPE)
        else:
            h = boundary_presets(p)[branch]
    return ModelSpec("ising", SHAPE, A, BoundaryFamily.consistent(np.asarray(h)),
                     beta=beta, J=J, branch=branch, **kw)


def classical_weights(p: IsingParams, n: int, model: ModelSpec = None):
    """Normalized diagonal of the level-n density and its raw trace."""
    model = model or ising_model(p.beta, p.J, p.branch)
    st = diagonal_state(model, n)
    return st.weights / st.trace, st.trace
