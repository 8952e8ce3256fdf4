"""Level entropies, the entropy identity, increments and mean-entropy estimators.

All entropies are in nats.  Densities are used as produced by
:mod:`qmstree.qms`: if a model's boundary does not solve the compatibility
equation the level densities do not have unit trace, and ``-Tr(D log D)`` of
the raw operator is reported together with the trace.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import HypothesisViolated, RegionTooLarge, StrategyInapplicable
from .linalg import DENSE_CAP, herm_func
from .model import ModelSpec
from .qms import (
    DIAGONAL_CAP,
    _embed_on_ball,
    dense_state,
    diagonal_state,
    level_amplitude,
)
from .tree import ball, level_set, shift, slab

log = logging.getLogger(__name__)

STRATEGIES = ("direct_ratio", "increment_ratio", "closed_form")


# ---------------------------------------------------------------- paths ----


def applicable_paths(model: ModelSpec, n: int) -> list:
    shape = model.shape
    size = shape.ball_size(n)
    out = []
    if shape.d**size <= DENSE_CAP:
        out.append("dense")
    if model.diagonal and shape.d**size <= DIAGONAL_CAP:
        out.append("diagonal")
    if factorized_applicable(model):
        out.append("factorized")
    return out


def factorized_applicable(model: ModelSpec) -> bool:
    """Diagonal model whose rule is unital and whose root density has unit trace."""
    if not model.diagonal:
        return False
    D0 = model.initial_density
    if abs(np.trace(D0).real - 1.0) > model.tol:
        return False
    if model.boundary.translation_invariant:
        return model.rule.is_unital(model.tol)
    return True


def _pick_path(model: ModelSpec, n: int, path: str) -> str:
    path = model.path if path == "auto" else path
    avail = applicable_paths(model, n)
    if path != "auto":
        if path not in avail:
            raise RegionTooLarge(f"path {path!r} not applicable at n={n} (have {avail})")
        return path
    # cheapest first; the dense path is the reference only where nothing else applies
    for p in ("factorized", "diagonal", "dense"):
        if p in avail:
            return p
    raise RegionTooLarge(f"no evaluation path can handle Lambda_{n}")


def _state(model: ModelSpec, n: int, path: str):
    if path == "dense":
        return dense_state(model, n)
    if path == "diagonal":
        return diagonal_state(model, n)
    raise ValueError(f"path {path!r} has no explicit state")


def _factorized_Q(model: ModelSpec, n: int) -> np.ndarray:
    if model.boundary.translation_invariant:
        return model.rule.weights()[None, :]
    return np.stack([model.rule_at(x).weights() for x in ball(n - 1, model.shape)])


def site_marginals(model: ModelSpec, n: int) -> np.ndarray:
    """Single-site marginals (|Lambda_n|, d) of a factorizable model."""
    if not factorized_applicable(model):
        raise RegionTooLarge("factorized path needs a diagonal unital model")
    shape = model.shape
    root_w = np.diag(model.initial_density).real
    return _kernels.site_marginals(root_w, _factorized_Q(model, max(n, 1)),
                                   shape.ball_size(n), shape.k, shape.d)


def factorized_entropy(model: ModelSpec, n: int) -> float:
    """S_n = H(root) + sum over parents x in Lambda_{n-1} of H(children | x)."""
    shape = model.shape
    mu = site_marginals(model, n)
    s0 = _kernels.xlogx_sum(mu[0])
    if n == 0:
        return s0
    n_parents = shape.ball_size(n - 1)
    return s0 + _kernels.conditional_entropy_sum(mu, _factorized_Q(model, n), n_parents,
                                                 shape.k, shape.d)


def level_entropy(model: ModelSpec, n: int, path: str = "auto") -> float:
    """S(phi restricted to Lambda_n)."""
    p = _pick_path(model, n, path)
    if p == "factorized":
        return factorized_entropy(model, n)
    return _state(model, n, p).entropy()


def level_entropies_by_path(model: ModelSpec, n: int) -> dict:
    return {p: level_entropy(model, n, p) for p in applicable_paths(model, n)}


# ------------------------------------------------------ entropy identity ----


def _explicit_path(model: ModelSpec, n: int, path: str) -> str:
    path = model.path if path == "auto" else path
    if path in ("auto", "factorized"):
        avail = applicable_paths(model, n)
        for p in ("diagonal", "dense"):
            if p in avail:
                return p
        raise RegionTooLarge(f"no explicit state for Lambda_{n}")
    return path


def entropy_terms(model: ModelSpec, n: int, path: str = "auto") -> dict:
    """The four entropies in S(L_{n+1}) + S(W_n) = S(L_n) + S(W_n u W_{n+1})."""
    p = _explicit_path(model, n + 1, path)
    shape = model.shape
    lower = _state(model, n, p)
    upper = _state(model, n + 1, p)
    return {
        "S_ball_n": lower.entropy(),
        "S_level_n": lower.marginal(level_set(n, shape.k)).entropy(),
        "S_ball_n1": upper.entropy(),
        "S_slab": upper.marginal(slab(n, shape)).entropy(),
        "trace_n": lower.trace,
        "trace_n1": upper.trace,
        "path": p,
    }


def entropy_identity_defect(model: ModelSpec, n: int, path: str = "auto") -> float:
    t = entropy_terms(model, n, path)
    return abs(t["S_ball_n1"] + t["S_level_n"] - t["S_ball_n"] - t["S_slab"])


# ------------------------------------------------------ increment formula ----


def commutator_defect(model: ModelSpec, n: int, path: str = "auto") -> float:
    """max |[K_[n,n+1], D_n x 1]| on Lambda_{n+1}."""
    p = _explicit_path(model, n + 1, path)
    if p == "diagonal":
        return 0.0  # both factors are diagonal in the product basis
    shape = model.shape
    K = _embed_on_ball(level_amplitude(model, n), n, shape)
    D = np.kron(dense_state(model, n).matrix, np.eye(shape.d ** shape.level_size(n + 1)))
    return float(np.abs(K @ D - D @ K).max())


def _log_abs(K: np.ndarray) -> np.ndarray:
    """log |K| = (1/2) log(K K^*)."""
    return herm_func(K @ K.conj().T, lambda w: 0.5 * np.log(w))


def increment_via_amplitude(model: ModelSpec, n: int, path: str = "auto",
                            commute_tol: float = 1e-10) -> float:
    """-2 sum_{x in W_n} phi(log|K_x|), valid when K_[n,n+1] commutes with D_n."""
    p = _explicit_path(model, n + 1, path)
    c = commutator_defect(model, n, p)
    if c >= commute_tol:
        raise HypothesisViolated(f"||[K, D_n]||_max = {c:.3e} >= {commute_tol}")
    upper = _state(model, n + 1, p)
    total = 0.0
    for x in level_set(n, model.k):
        K = model.rule_at(x).amplitude
        triple = (x,) + tuple(x + (i,) for i in range(1, model.k + 1))
        rho = upper.marginal(triple)
        L = _log_abs(K)
        if rho.matrix is not None:
            total += np.trace(rho.matrix @ L).real
        else:
            total += float(rho.weights @ np.diag(L).real)
    return -2.0 * total


def direct_increment(model: ModelSpec, n: int, path: str = "auto") -> float:
    return level_entropy(model, n + 1, path) - level_entropy(model, n, path)


# ----------------------------------------------------- translation check ----


def translation_defect(model: ModelSpec, n: int, path: str = "auto") -> float:
    """max_j max_a |phi_{Lambda_n}(alpha_j(a)) - phi_{Lambda_{n-1}}(a)|, a on Lambda_{n-1}.

    Uses matrix units on Lambda_{n-1} (or their diagonal part on the
    diagonal path).
    """
    if n < 1:
        raise ValueError("need n >= 1")
    p = _explicit_path(model, n, path)
    shape = model.shape
    upper, lower = _state(model, n, p), _state(model, n - 1, p)
    region = ball(n - 1, shape)
    worst = 0.0
    for j in range(1, shape.k + 1):
        image = tuple(shift((j,), v) for v in region)
        sub = upper.marginal(image)
        if sub.matrix is not None:
            # shifting preserves canonical order, so factors line up
            worst = max(worst, float(np.abs(sub.matrix - lower.matrix).max()))
        else:
            worst = max(worst, float(np.abs(sub.weights - lower.weights).max()))
    return worst


# ------------------------------------------------------- mean entropy ----


def aitken(seq) -> float:
    x0, x1, x2 = seq[-3:]
    den = x2 - 2 * x1 + x0
    if den == 0:
        return x2
    return x2 - (x2 - x1) ** 2 / den


def telescoping_coefficients(n: int, k: int):
    """(c1, c0) with dS_n / (|L_{n+1}| - |L_n|) = c1 S_{n+1}/|L_{n+1}| - c0 S_n/|L_n|."""
    if k == 1:
        return Fraction(n + 2), Fraction(n + 1)
    c1 = Fraction(k ** (n + 2) - 1, (k - 1) * k ** (n + 1))
    c0 = Fraction(k ** (n + 1) - 1, (k - 1) * k ** (n + 1))
    return c1, c0


@dataclass
class MeanEntropyResult:
    strategy: str
    value: float
    table: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def mean_entropy(model: ModelSpec, strategy: str, n_max: int = None,
                 path: str = "auto") -> MeanEntropyResult:
    if strategy not in STRATEGIES:
        raise StrategyInapplicable(f"unknown strategy {strategy!r}")
    n_max = model.n_max if n_max is None else n_max
    shape = model.shape
    if strategy == "closed_form":
        if not model.boundary.translation_invariant:
            raise StrategyInapplicable("closed form needs a translation-invariant model")
        tdef = translation_defect(model, 1, path)
        if tdef > 1e-9:
            raise StrategyInapplicable(f"state is not translation invariant (defect {tdef:.3e})")
        try:
            cdef = commutator_defect(model, 0, path)
        except RegionTooLarge:
            cdef = np.inf
        if cdef >= 1e-10:
            raise StrategyInapplicable(f"commutation hypothesis fails ({cdef:.3e})")
        S0, S1 = level_entropy(model, 0, path), level_entropy(model, 1, path)
        v = (S1 - S0) / shape.k
        return MeanEntropyResult(strategy, v, [{"n": 0, "S_0": S0, "S_1": S1, "value": v}])
    S = [level_entropy(model, n, path) for n in range(n_max + 1)]
    if strategy == "direct_ratio":
        ratios = [S[n] / shape.ball_size(n) for n in range(n_max + 1)]
        table = [{"n": n, "ratio": r} for n, r in enumerate(ratios)]
        res = MeanEntropyResult(strategy, ratios[-1], table)
        if len(ratios) >= 3:
            res.notes.append(f"aitken={aitken(ratios)!r}")
            res.table[-1]["aitken"] = aitken(ratios)
        return res
    incs = [(S[n + 1] - S[n]) / shape.level_size(n + 1) for n in range(n_max)]
    if not incs:
        raise StrategyInapplicable("increment ratio needs n_max >= 1")
    table = [{"n": n, "increment_ratio": v} for n, v in enumerate(incs)]
    res = MeanEntropyResult(strategy, incs[-1], table)
    res.notes.append(f"spread={max(incs) - min(incs)!r}")
    return res


# ------------------------------------------------------------- ledger ----


@dataclass
class EntropyLedger:
    rows: list
    estimates: dict
    config: dict

    COLUMNS = ("n", "ball_size", "S_n", "dS_n", "dS_n_per_boundary", "direct_ratio",
               "estimator", "path", "S_level_n", "S_slab_n", "identity_defect",
               "increment_formula", "trace")

    def csv_rows(self):
        for r in self.rows:
            yield [r.get(c, "") for c in self.COLUMNS]


def build_ledger(model: ModelSpec, n_max: int = None, path: str = "auto") -> EntropyLedger:
    """Per-level entropies, increments, identity defects and estimator values."""
    n_max = model.n_max if n_max is None else n_max
    shape = model.shape
    rows = []
    S = []
    for n in range(n_max + 1):
        p = _pick_path(model, n, path)
        S.append(level_entropy(model, n, p))
        rows.append({"n": n, "ball_size": shape.ball_size(n), "S_n": S[-1],
                     "direct_ratio": S[-1] / shape.ball_size(n), "path": p})
    for n in range(n_max):
        r = rows[n]
        r["dS_n"] = S[n + 1] - S[n]
        r["dS_n_per_boundary"] = r["dS_n"] / shape.level_size(n + 1)
        r["estimator"] = "increment_ratio"
        try:
            t = entropy_terms(model, n, path)
            r["S_level_n"] = t["S_level_n"]
            r["S_slab_n"] = t["S_slab"]
            r["identity_defect"] = abs(t["S_ball_n1"] + t["S_level_n"] - t["S_ball_n"]
                                       - t["S_slab"])
            r["trace"] = t["trace_n"]
        except RegionTooLarge:
            pass
        try:
            r["increment_formula"] = increment_via_amplitude(model, n, path)
        except (HypothesisViolated, RegionTooLarge, ValueError) as exc:
            log.info("increment formula skipped at n=%d: %s", n, exc)
    estimates = {}
    for strat in STRATEGIES:
        try:
            res = mean_entropy(model, strat, n_max, path)
            estimates[strat] = res.value
            if strat == "direct_ratio" and len(res.table) >= 3:
                estimates["direct_ratio_aitken"] = res.table[-1]["aitken"]
        except (StrategyInapplicable, RegionTooLarge) as exc:
            log.info("strategy %s skipped: %s", strat, exc)
    return EntropyLedger(rows, estimates, model.describe())
