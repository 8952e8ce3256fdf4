"""Command line interface: ``qmstree {entropy,verify,mixing,sweep}``.

Settings come from (lowest to highest priority) built-in defaults, an INI
file given with ``--config`` (section ``[qms]``), and command line flags.
Outputs go to ``--out-dir`` (default ``$QMS_OUT_DIR`` or ``./qms_out``).

Exit codes: 0 success, 1 a check failed (outputs are still written),
2 configuration error.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .entropy import applicable_paths, build_ledger, mean_entropy
from .errors import BranchNotFound, NotCentral, QMSError, RegionTooLarge
from .ising import BRANCHES, SZ, IsingParams, alpha_of, ising_closed_form, ising_model
from .mixing import (
    correlation_decay,
    default_projections,
    induced_map,
    peripheral_spectrum,
    pi_matrix,
    single_site_marginal,
    stationary_vector,
)
from .model import KINDS, PATHS, TransitionRule, custom_model, trace_state_model
from .qms import check_compatibility, level_state
from .tree import TreeShape

log = logging.getLogger("qmstree")

MAX_GRID = 10_000

# key -> converter; shared by flags and the INI file
SETTINGS = {
    "model": str,
    "k": int,
    "d": int,
    "beta": float,
    "J": float,
    "branch": str,
    "amplitude": str,
    "h": str,
    "path": str,
    "n_max": int,
    "tol": float,
    "seed": int,
    "normalize": None,  # bool, parsed separately
    "out_dir": str,
    "bits": None,
    "beta_grid": str,
    "J_grid": str,
}

COMMAND_DEFAULTS = {
    "entropy": {"n_max": 2, "tol": 1e-8},
    "verify": {"n_max": 2, "tol": 1e-9},
    "mixing": {"n_max": 3, "tol": 1e-9},
    "sweep": {"n_max": 12, "tol": 1e-3, "model": "ising", "branch": "h_alpha",
              "beta_grid": "0.1:1:10", "J_grid": "0.1:1:10"},
}


class ConfigError(ValueError):
    pass


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _read_config(path) -> dict:
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep "J" upper case
    if not cp.read(path):
        raise ConfigError(f"cannot read config file {path}")
    if not cp.has_section("qms"):
        raise ConfigError(f"{path}: missing [qms] section")
    out = {}
    for key, raw in cp.items("qms"):
        key = key.replace("-", "_")
        if key not in SETTINGS:
            raise ConfigError(f"{path}: unknown key {key!r}")
        conv = SETTINGS[key]
        try:
            out[key] = _bool(raw) if conv is None else conv(raw)
        except ValueError as exc:
            raise ConfigError(f"{path}: bad value for {key}: {exc}") from exc
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Merge command defaults, config file and flags; flags win."""
    cfg = {"command": args.command, "path": "auto", "seed": 42, "normalize": False,
           "bits": False}
    cfg.update(COMMAND_DEFAULTS[args.command])
    if args.config:
        cfg.update(_read_config(args.config))
    for key in SETTINGS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if not cfg.get("out_dir"):
        cfg["out_dir"] = os.environ.get("QMS_OUT_DIR", "qms_out")
    return cfg


def _parse_h(text: str, d: int) -> np.ndarray:
    """``I`` or comma-separated diagonal entries."""
    if text.strip().lower() in ("i", "identity", "eye"):
        return np.eye(d)
    vals = [float(t) for t in text.split(",")]
    if len(vals) != d:
        raise ConfigError(f"--h needs {d} diagonal entries, got {len(vals)}")
    if min(vals) <= 0:
        raise ConfigError("--h entries must be positive")
    return np.diag(vals)


def build_model(cfg: dict):
    """ModelSpec from a resolved config; raises ConfigError on bad input."""
    kind = cfg.get("model")
    if kind is None:
        raise ConfigError("--model is required")
    if kind not in KINDS:
        raise ConfigError(f"--model must be one of {KINDS}")
    if cfg["path"] not in PATHS:
        raise ConfigError(f"--path must be one of {PATHS}")
    if cfg["n_max"] < 0:
        raise ConfigError("--n-max must be >= 0")
    common = dict(path=cfg["path"], n_max=cfg["n_max"], tol=cfg["tol"], seed=cfg["seed"],
                  normalize=cfg["normalize"])
    if kind == "ising":
        if cfg.get("k", 2) != 2 or cfg.get("d", 2) != 2:
            raise ConfigError("the ising model is defined for k=2, d=2 only")
        cfg["k"], cfg["d"] = 2, 2
        if cfg.get("branch") is None:
            raise ConfigError(f"--branch is required for the ising model {BRANCHES}")
        for key in ("beta", "J"):
            if cfg.get(key) is None:
                raise ConfigError(f"--{key} is required for the ising model")
        try:
            IsingParams(cfg["beta"], cfg["J"], cfg["branch"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        h = _parse_h(cfg["h"], 2) if cfg.get("h") else None
        try:
            return ising_model(cfg["beta"], cfg["J"], cfg["branch"], h=h, **common)
        except BranchNotFound as exc:
            raise ConfigError(str(exc)) from exc
    if kind == "trace_state":
        k, d = cfg.setdefault("k", 2), cfg.setdefault("d", 2)
        if k < 1 or d < 2:
            raise ConfigError("need k >= 1 and d >= 2")
        m = trace_state_model(k, d, **common)
        if cfg.get("h"):
            m = m.with_(boundary=type(m.boundary).consistent(_parse_h(cfg["h"], d)))
        return m
    src = cfg.get("amplitude")
    if not src:
        raise ConfigError("--amplitude FILE is required for custom_amplitude")
    try:
        A, k, d = io.read_amplitude(src)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    for key, val in (("k", k), ("d", d)):
        if cfg.get(key) not in (None, val):
            raise ConfigError(f"--{key}={cfg[key]} disagrees with the amplitude file ({val})")
    cfg["k"], cfg["d"] = k, d
    if k < 1 or d < 2:
        raise ConfigError("need k >= 1 and d >= 2")
    h = _parse_h(cfg["h"], d) if cfg.get("h") else None
    if h is None:
        rule = TransitionRule(A, TreeShape(k, d))
        defect = rule.unitality_defect()
        if defect > 1e-8:
            raise ConfigError(f"amplitude is not unital (defect {defect:.3e})")
    return custom_model(A, k, d, h=h, **common)


def _check_path_caps(model, cfg):
    if cfg["path"] == "auto":
        return
    ok = applicable_paths(model, cfg["n_max"])
    if cfg["path"] not in ok:
        raise ConfigError(f"path {cfg['path']!r} cannot reach n={cfg['n_max']} "
                          f"(applicable: {ok or 'none'})")


def _out(cfg, name) -> Path:
    return Path(cfg["out_dir"]) / name


def _public(cfg):
    return {k: v for k, v in sorted(cfg.items()) if v is not None}


# ------------------------------------------------------------ commands ----

ENTROPY_COLS = ("S_n", "dS_n", "dS_n_per_boundary", "direct_ratio", "S_level_n", "S_slab_n",
                "identity_defect", "increment_formula")


def cmd_entropy(cfg: dict) -> int:
    model = build_model(cfg)
    _check_path_caps(model, cfg)
    ledger = build_ledger(model, cfg["n_max"], cfg["path"])
    tol = cfg["tol"]
    failures = []
    for r in ledger.rows:
        if "identity_defect" in r and not r["identity_defect"] < tol:
            failures.append(f"n={r['n']}: entropy identity defect {r['identity_defect']:.3e}")
        if "increment_formula" in r and not abs(r["increment_formula"] - r["dS_n"]) < tol:
            failures.append(f"n={r['n']}: increment formula off by "
                            f"{abs(r['increment_formula'] - r['dS_n']):.3e}")
    scale = 1.0 / math.log(2) if cfg["bits"] else 1.0
    rows = [{k: (v * scale if k in ENTROPY_COLS else v) for k, v in r.items()}
            for r in ledger.rows]
    est = {k: v * scale for k, v in ledger.estimates.items()}
    unit = "bits" if cfg["bits"] else "nats"
    conf = _public(cfg)
    io.write_csv(_out(cfg, "entropy_ledger.csv"), ledger.COLUMNS, rows, conf, unit=unit,
                 estimates=est)
    io.write_json(_out(cfg, "entropy_ledger.json"),
                  {"rows": rows, "estimates": est, "unit": unit, "failures": failures}, conf)
    if model.diagonal and "diagonal" in applicable_paths(model, cfg["n_max"]):
        _write_weights(model, cfg, conf)
    for f in failures:
        print("FAIL", f, file=sys.stderr)
    for name, v in est.items():
        print(f"{name}: {v:.12g} {unit}")
    return 1 if failures else 0


def _write_weights(model, cfg, conf):
    n = cfg["n_max"]
    st = level_state(model, n, "diagonal")
    d = model.d
    width = len(st.support)
    rows = []
    for idx, w in enumerate(st.weights / st.trace):
        digits = np.base_repr(idx, base=d).zfill(width)
        rows.append({"configuration": digits, "weight": float(w)})
    io.write_csv(_out(cfg, f"weights_n{n}.csv"), ("configuration", "weight"), rows, conf,
                 raw_trace=st.trace, sites=[list(v) for v in st.support])


def cmd_verify(cfg: dict) -> int:
    model = build_model(cfg)
    tol = cfg["tol"]
    rep = check_compatibility(model, cfg["n_max"])
    rows = list(rep.rows())
    for r in rows:
        try:
            st = level_state(model, r["n"] + 1, "dense")
            r["trace_defect"] = abs(st.trace - 1.0)
        except RegionTooLarge:
            r["trace_defect"] = float("nan")
    summary = {
        "max_defect": rep.max_defect(),
        "eq_boundary_residual": model.eq2_residual() if model.boundary.translation_invariant
        else None,
        "unitality_defect": model.rule.unitality_defect()
        if model.boundary.translation_invariant else None,
        "levels_checked": rep.levels,
    }
    passed = bool(rows) and rep.passed(tol) and all(
        not r["trace_defect"] > tol for r in rows)
    summary["passed"] = passed
    conf = _public(cfg)
    cols = ("n", "functional_defect", "marginal_defect", "functional_marginal_defect",
            "phi_n_of_1", "trace_defect")
    io.write_csv(_out(cfg, "verify.csv"), cols, rows, conf)
    io.write_json(_out(cfg, "verify.json"), {"levels": rows, "summary": summary}, conf)
    for r in rows:
        print(f"n={r['n']} functional={r['functional_defect']:.3e} "
              f"marginal={r['marginal_defect']:.3e} trace={r['trace_defect']:.3e}")
    print("PASS" if passed else "FAIL", f"max defect {rep.max_defect():.3e} (tol {tol:g})")
    return 0 if passed else 1


def _centered_diag(d: int) -> np.ndarray:
    if d == 2:
        return SZ
    v = np.arange(d, dtype=float)
    return np.diag(v - v.mean()).astype(complex)


def cmd_mixing(cfg: dict) -> int:
    model = build_model(cfg)
    tol = cfg["tol"]
    rule = model.rule
    projs = default_projections(rule)
    report = {"r": projs.r, "block_dims": projs.block_dims, "children": []}
    ok = True
    rate = None
    for j in range(1, model.k + 1):
        entry = {"j": j}
        full = induced_map(rule, j)
        entry["full_map_eigenvalues"] = peripheral_spectrum(full.matrix, tol).eigenvalues
        try:
            pi = pi_matrix(rule, j, projs, tol=max(tol, 1e-10))
        except NotCentral as exc:
            entry["error"] = str(exc)
            ok = False
            report["children"].append(entry)
            continue
        spec = peripheral_spectrum(pi.entries, tol)
        entry.update(pi=pi.entries, pi_min=pi.min_entry, strictly_positive=pi.strictly_positive,
                     eigenvalues=spec.eigenvalues, peripheral=spec.peripheral,
                     simple=spec.simple, second_modulus=spec.second_modulus)
        if projs.r > 1 and spec.simple:
            entry["stationary"] = stationary_vector(pi.entries)
            entry["root_marginal"] = single_site_marginal(model, projs)
        ok = ok and pi.strictly_positive and spec.simple
        if j == 1:
            rate = spec.second_modulus
        report["children"].append(entry)
    report["passed"] = ok
    obs = _centered_diag(model.d)
    try:
        decay = correlation_decay(model, obs, obs, cfg["n_max"], rate)
    except RegionTooLarge as exc:
        log.warning("correlation table truncated: %s", exc)
        decay = []
    conf = _public(cfg)
    io.write_json(_out(cfg, "mixing.json"), report, conf)
    io.write_csv(_out(cfg, "decay.csv"), ("distance", "correlation", "bound"), decay, conf)
    for e in report["children"]:
        if "error" in e:
            print(f"j={e['j']}: {e['error']}")
        else:
            print(f"j={e['j']}: pi min {e['pi_min']:.6g}, peripheral "
                  f"{np.round(e['peripheral'], 12).tolist()}, simple={e['simple']}")
    print("PASS" if ok else "FAIL (peripheral spectrum not trivial or pi not positive)")
    return 0 if ok else 1


def parse_grid(text: str, name: str) -> list:
    """``lo:hi:n`` (inclusive linspace) or a comma-separated list; values must be > 0."""
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            vals = np.linspace(float(lo), float(hi), int(n)).tolist()
        else:
            vals = [float(t) for t in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad {name} grid {text!r}") from exc
    if not vals:
        raise ConfigError(f"empty {name} grid")
    if min(vals) <= 0:
        raise ConfigError(f"{name} grid must be > 0 (got {min(vals)})")
    return vals


def cmd_sweep(cfg: dict) -> int:
    betas = parse_grid(cfg["beta_grid"], "beta")
    Js = parse_grid(cfg["J_grid"], "J")
    if len(betas) * len(Js) > MAX_GRID:
        raise ConfigError(f"grid has {len(betas) * len(Js)} points (max {MAX_GRID})")
    if cfg.get("model", "ising") != "ising":
        raise ConfigError("sweep is defined for the ising model")
    n_max, tol = cfg["n_max"], cfg["tol"]
    rows = []
    worst = 0.0
    for b in betas:
        for J in Js:
            model = ising_model(b, J, "h_alpha", path=cfg["path"], n_max=n_max, seed=cfg["seed"])
            s = ising_closed_form(b, J)
            res = mean_entropy(model, "direct_ratio", n_max, cfg["path"])
            disc = abs(res.value - s) / s
            worst = max(worst, disc)
            rows.append({"beta": b, "J": J, "alpha": alpha_of(IsingParams(b, J)),
                         "s_closed_form": s, "direct_ratio": res.value, "n_max": n_max,
                         "aitken": res.table[-1].get("aitken", ""), "discrepancy": disc})
    conf = _public(cfg)
    cols = ("beta", "J", "alpha", "s_closed_form", "direct_ratio", "n_max", "aitken",
            "discrepancy")
    io.write_csv(_out(cfg, "sweep.csv"), cols, rows, conf)
    ok = worst < tol
    print(f"{len(rows)} points, worst relative discrepancy {worst:.3e} (tol {tol:g})")
    return 0 if ok else 1


COMMANDS = {"entropy": cmd_entropy, "verify": cmd_verify, "mixing": cmd_mixing,
            "sweep": cmd_sweep}


def _add_common(p: argparse.ArgumentParser):
    g = p.add_argument_group("model")
    g.add_argument("--config", help="INI file with a [qms] section; flags override it")
    g.add_argument("--model", choices=KINDS)
    g.add_argument("--k", type=int)
    g.add_argument("--d", type=int)
    g.add_argument("--beta", type=float)
    g.add_argument("--J", type=float)
    g.add_argument("--branch", choices=BRANCHES)
    g.add_argument("--amplitude", help="custom amplitude text file ('# k= d=' header)")
    g.add_argument("--h", help="boundary override: 'I' or comma-separated diagonal")
    r = p.add_argument_group("run")
    r.add_argument("--path", choices=PATHS)
    r.add_argument("--n-max", dest="n_max", type=int)
    r.add_argument("--tol", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--normalize", action="store_true", default=None,
                   help="renormalize densities to unit trace at every level")
    r.add_argument("--out-dir", dest="out_dir", help="output directory (default $QMS_OUT_DIR)")
    r.add_argument("--bits", action="store_true", default=None,
                   help="report entropies in bits instead of nats")
    r.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmstree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "entropy": "entropy ledger, identity and increment checks",
        "verify": "compatibility defects per level",
        "mixing": "pi matrix, peripheral spectrum and correlation decay",
        "sweep": "closed form vs direct ratio over a (beta, J) grid",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        _add_common(sp)
        if name == "sweep":
            sp.add_argument("--beta-grid", dest="beta_grid", help="lo:hi:n or a,b,c")
            sp.add_argument("--J-grid", dest="J_grid", help="lo:hi:n or a,b,c")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        sub.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except RegionTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except QMSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
