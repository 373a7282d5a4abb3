"""Command-line front end: ``fsdiffusion {simulate,estimate,diagnose,moments}``.

Every command resolves a configuration from built-in defaults, an optional
JSON document (``--config``) and command-line flags, in increasing priority.
Unknown keys are rejected. Outputs carry a provenance block with the tool
version and the full resolved configuration.

Exit codes: 0 success, 1 I/O or parse error, 2 domain or window validation,
3 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys

import numpy as np

from . import __version__
from .core import Parameters, theoretical_moment
from .diagnostics import (autocorrelation_fit, clt_check, lln_report, tv_decay_curve,
                          weighted_tv_decay_curve)
from .errors import DomainError, DriftConditionFailure, NumericalDegeneracyError
from .estimate import estimate_params_fs, estimate_params_general
from .lyapunov import WeightSpec, check_drift_condition, check_modified_drift_condition
from .observations import CsvParseError, Mode, path_envelope, path_to_csv, read_csv_series
from .simulate import InitialLaw, Scheme, ensemble_digest, simulate_ensemble

EXIT_OK, EXIT_IO, EXIT_DOMAIN, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(DomainError):
    """Invalid configuration; the message starts with the offending field path."""


_PARAMS = {"theta": 1.0, "kappa": 2.0, "alpha": 6.0, "beta": 10.0}
_WEIGHT = {"gamma": 0.0, "delta": 0.0, "left_knots": [0.5, 1.0], "right_knots": [1.0, 2.0]}

DEFAULTS = {
    "simulate": {
        "params": _PARAMS, "init": {"kind": "stationary"}, "scheme": "MilsteinRetry",
        "dt": 0.01, "T": 100.0, "seed": 0, "n_paths": 1, "threads": None, "out": "path",
    },
    "estimate": {
        "input": None, "mode": "continuous", "lag": None, "truncation": None,
        "variant": "general", "out": None,
    },
    "diagnose": {
        "kind": "tv-decay", "params": _PARAMS, "init": {"kind": "dirac", "x0": 50.0},
        "scheme": "MilsteinRetry", "dt": 0.01, "seed": 0, "threads": None,
        "times": [0.5 * k for k in range(1, 17)], "n_paths": 20000, "bins": 64,
        "weight": _WEIGHT, "weight_prime": None, "epsilon": None,
        "upsilon": 1.0, "horizons": [500.0, 2000.0, 8000.0], "n_replicates": 20,
        "T": 2000.0, "mode": "continuous", "block": None, "truncation": None, "surrogate": False,
        "input": None, "max_lag": 10.0, "out": "diagnostic",
    },
    "moments": {"params": _PARAMS, "upsilons": [-1.0, 0.5, 1.0, 2.0], "out": None},
}

_NESTED = {"params": set(_PARAMS), "weight": set(_WEIGHT), "weight_prime": set(_WEIGHT)}
_DIAGNOSTICS = ("tv-decay", "weighted-tv", "lln", "clt", "acf", "drift")


def _merge(command, file_cfg, overrides):
    cfg = copy.deepcopy(DEFAULTS[command])
    for source in (file_cfg or {}, overrides):
        for key, value in source.items():
            if key not in cfg:
                raise ConfigError(f"{key}: unknown key for '{command}'")
            if key in _NESTED and isinstance(value, dict):
                extra = set(value) - _NESTED[key]
                if extra:
                    raise ConfigError(f"{key}.{sorted(extra)[0]}: unknown key")
                base = cfg[key] if isinstance(cfg[key], dict) else dict(_WEIGHT)
                cfg[key] = {**base, **value}
            else:
                cfg[key] = value
    return cfg


def _params(cfg):
    try:
        return Parameters(**{k: float(v) for k, v in cfg["params"].items()})
    except DomainError as exc:
        raise ConfigError(f"params: {exc}") from None


def _weight(d, field="weight"):
    try:
        return WeightSpec(float(d["gamma"]), float(d["delta"]), tuple(d["left_knots"]),
                          tuple(d["right_knots"]))
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(f"{field}: {exc}") from None


def _init(cfg):
    try:
        return InitialLaw.from_dict(cfg["init"])
    except (DomainError, TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"init: {exc}") from None


def _threads(cfg):
    t = cfg.get("threads")
    if t is None:
        return None
    if int(t) < 1:
        raise ConfigError("threads: must be a positive integer")
    return int(t)


def _provenance(command, cfg):
    seeds = {"seed": cfg["seed"]} if "seed" in cfg else {}
    return {"tool": "fsdiffusion", "version": __version__, "command": command,
            "config": cfg, "seeds": seeds}


def _finite(obj):
    if isinstance(obj, np.ndarray):
        return _finite(obj.tolist())
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _dump(obj):
    """Canonical JSON; non-finite floats become ``null``."""
    return json.dumps(_finite(obj), indent=2, sort_keys=True, default=_json_default,
                      allow_nan=False) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, (Mode, Scheme)):
        return o.value
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _emit(doc, out):
    text = _dump(doc)
    if out:
        _write(out, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg):
    p = _params(cfg)
    init = _init(cfg)
    n = int(cfg["n_paths"])
    if n < 1:
        raise ConfigError("n_paths: must be at least 1")
    scheme = Scheme.parse(cfg["scheme"])
    paths = simulate_ensemble(p, init, float(cfg["dt"]), float(cfg["T"]), scheme, n,
                              int(cfg["seed"]), _threads(cfg))
    prov = _provenance("simulate", cfg)
    out = cfg["out"]
    if n == 1:
        _write(f"{out}.csv", path_to_csv(paths[0].times, paths[0].values))
        _write(f"{out}.json", _dump({"provenance": prov, "path": path_envelope(paths[0])}))
        return [f"{out}.csv", f"{out}.json"]
    width = max(4, len(str(n - 1)))
    files = []
    for path in paths:
        name = f"{out}_{path.path_index:0{width}d}.csv"
        _write(name, path_to_csv(path.times, path.values))
        files.append(name)
    manifest = {"provenance": prov, "digest": ensemble_digest(paths),
                "paths": [dict(path_envelope(pth), file=os.path.basename(f))
                          for pth, f in zip(paths, files)]}
    _write(f"{out}_manifest.json", _dump(manifest))
    return files + [f"{out}_manifest.json"]


def cmd_estimate(cfg):
    if not cfg["input"]:
        raise ConfigError("input: an observation CSV is required")
    obs = read_csv_series(cfg["input"], Mode.parse(cfg["mode"]))
    lag = None if cfg["lag"] is None else float(cfg["lag"])
    trunc = cfg["truncation"]
    variant = str(cfg["variant"]).lower()
    if variant == "general":
        rep = estimate_params_general(obs, lag=lag, truncation=trunc)
    else:
        rep = estimate_params_fs(obs, lag=lag, variant=variant, truncation=trunc)
    doc = rep.to_dict()
    doc["provenance"] = _provenance("estimate", cfg)
    _emit(doc, cfg["out"])
    return doc


def _diag_kwargs(cfg):
    return dict(dt=float(cfg["dt"]), scheme=Scheme.parse(cfg["scheme"]), base_seed=int(cfg["seed"]),
                threads=_threads(cfg))


def cmd_diagnose(cfg):
    kind = cfg["kind"]
    if kind not in _DIAGNOSTICS:
        raise ConfigError(f"kind: expected one of {', '.join(_DIAGNOSTICS)}, got {kind!r}")
    prov = _provenance("diagnose", cfg)
    out = cfg["out"]
    csv_text = None
    if kind == "acf":
        if not cfg["input"]:
            raise ConfigError("input: the acf diagnostic needs an observation CSV")
        obs = read_csv_series(cfg["input"], Mode.parse(cfg["mode"]))
        theta_hat, r2 = autocorrelation_fit(obs, float(cfg["max_lag"]))
        result = {"theta_hat": theta_hat, "r_squared": r2}
    elif kind == "drift":
        p = _params(cfg)
        w = _weight(cfg["weight"])
        try:
            if cfg["weight_prime"] is None:
                result = {"holds": True, "certificate": check_drift_condition(p, w).to_dict()}
            else:
                wp = _weight(cfg["weight_prime"], "weight_prime")
                cert = check_modified_drift_condition(p, w, wp, epsilon=cfg["epsilon"])
                result = {"holds": True, "certificate": cert.to_dict()}
        except DriftConditionFailure as exc:
            result = {"holds": False, "tail": exc.tail, "message": str(exc)}
    else:
        p = _params(cfg)
        kw = _diag_kwargs(cfg)
        if kind == "tv-decay":
            res = tv_decay_curve(p, _init(cfg), cfg["times"], int(cfg["n_paths"]), int(cfg["bins"]), **kw)
        elif kind == "weighted-tv":
            res = weighted_tv_decay_curve(p, _init(cfg), _weight(cfg["weight"]), cfg["times"],
                                          int(cfg["n_paths"]), int(cfg["bins"]), **kw)
        elif kind == "lln":
            res = lln_report(p, _init(cfg), float(cfg["upsilon"]), cfg["horizons"],
                             int(cfg["n_replicates"]), block=cfg["block"] or 1.0, **kw)
        else:
            res = clt_check(p, float(cfg["upsilon"]), float(cfg["T"]), int(cfg["n_replicates"]),
                            cfg["mode"], block=cfg["block"] or 0.05, truncation=cfg["truncation"],
                            surrogate=bool(cfg["surrogate"]), **kw)
        result = res.to_dict()
        csv_text = res.to_csv()
    _write(f"{out}.json", _dump({"provenance": prov, "kind": kind, "result": result}))
    files = [f"{out}.json"]
    if csv_text is not None:
        _write(f"{out}.csv", csv_text)
        files.append(f"{out}.csv")
    return files


def cmd_moments(cfg):
    p = _params(cfg)
    rows = []
    for u in cfg["upsilons"]:
        try:
            rows.append({"upsilon": float(u), "moment": theoretical_moment(p, float(u))})
        except DomainError as exc:
            rows.append({"upsilon": float(u), "moment": None, "error": str(exc)})
    doc = {"provenance": _provenance("moments", cfg), "moments": rows}
    if cfg["out"]:
        _write(cfg["out"], _dump(doc))
    else:
        for r in rows:
            value = "diverges" if r["moment"] is None else repr(r["moment"])
            sys.stdout.write(f"{r['upsilon']!r}\t{value}\n")
    return doc


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "diagnose": cmd_diagnose,
            "moments": cmd_moments}


# ---------------------------------------------------------------------------
# argument parsing


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _add_params(sp):
    for name in _PARAMS:
        sp.add_argument(f"--{name}", type=float, dest=f"params.{name}")


def _add_run(sp):
    sp.add_argument("--scheme")
    sp.add_argument("--dt", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int, help="worker threads (default: $FS_DIFFUSION_THREADS)")
    sp.add_argument("--init", type=json.loads, help='JSON, e.g. \'{"kind": "dirac", "x0": 50}\'')


def build_parser():
    ap = argparse.ArgumentParser(prog="fsdiffusion", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="simulate paths to CSV")
    sp.add_argument("--config")
    _add_params(sp)
    _add_run(sp)
    sp.add_argument("--T", type=float, dest="T")
    sp.add_argument("--n-paths", type=int, dest="n_paths")
    sp.add_argument("--out", help="output prefix")

    sp = sub.add_parser("estimate", help="method-of-moments estimates from a CSV series")
    sp.add_argument("--config")
    sp.add_argument("input", nargs="?")
    sp.add_argument("--mode", choices=[m.value for m in Mode])
    sp.add_argument("--lag", type=float)
    sp.add_argument("--truncation", type=float)
    sp.add_argument("--variant", choices=["general", "fs-positive", "fs-inverse"])
    sp.add_argument("--out")

    sp = sub.add_parser("diagnose", help="ergodicity, LLN, CLT and drift diagnostics")
    sp.add_argument("--config")
    sp.add_argument("kind", nargs="?", choices=_DIAGNOSTICS)
    _add_params(sp)
    _add_run(sp)
    sp.add_argument("--times", type=_floats)
    sp.add_argument("--horizons", type=_floats)
    sp.add_argument("--n-paths", type=int, dest="n_paths")
    sp.add_argument("--bins", type=int)
    sp.add_argument("--gamma", type=float, dest="weight.gamma")
    sp.add_argument("--delta", type=float, dest="weight.delta")
    sp.add_argument("--upsilon", type=float)
    sp.add_argument("--n-replicates", type=int, dest="n_replicates")
    sp.add_argument("--T", type=float, dest="T")
    sp.add_argument("--mode", choices=[m.value for m in Mode])
    sp.add_argument("--block", type=float)
    sp.add_argument("--truncation", type=float)
    sp.add_argument("--surrogate", action="store_true", default=None)
    sp.add_argument("--input")
    sp.add_argument("--max-lag", type=float, dest="max_lag")
    sp.add_argument("--out", help="output prefix")

    sp = sub.add_parser("moments", help="print stationary moments")
    sp.add_argument("--config")
    _add_params(sp)
    sp.add_argument("--upsilons", type=_floats)
    sp.add_argument("--out")
    return ap


def _overrides(ns):
    out = {}
    for key, value in vars(ns).items():
        if key in ("command", "config") or value is None:
            continue
        if "." in key:
            head, tail = key.split(".", 1)
            out.setdefault(head, {})[tail] = value
        else:
            out[key] = value
    return out


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be a JSON object")
    return doc


def main(argv=None):
    ns = build_parser().parse_args(argv)
    try:
        cfg = _merge(ns.command, _load_config(ns.config), _overrides(ns))
        COMMANDS[ns.command](cfg)
    except (OSError, CsvParseError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NumericalDegeneracyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TypeError, ValueError, KeyError) as exc:
        print(f"error: invalid configuration value: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
