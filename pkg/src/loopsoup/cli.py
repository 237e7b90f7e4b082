"""Command-line entry point: one subcommand per run mode.

A run config is a YAML or JSON mapping::

    mode: verify                 # optional, must match the subcommand
    fixture: two-vertex          # optional preset, overridden by the keys below
    model: {graph: torus, L: 4, d: 1, N: 2, lambda: 0.5}
    potential: {family: delta, alpha: 0.1}
    weight: {family: hard, R: 2}
    mcmc: {seed: 1, chains: 2, steps: 10000, thermalization: 2000, thinning: 10}
    output: {directory: out, formats: [json, csv]}
    checks: [equivalence, observables, partition-bound]

``model.graph`` is ``two-vertex`` or ``torus``; ``lambda`` may be a string
such as ``"7/10"`` for exact rational arithmetic.  The environment variables
``LOOPSOUP_OUTPUT_DIR`` and ``LOOPSOUP_THREADS`` override the output
directory and the worker count.

Exit codes: 0 when every enabled check passes, 1 on a failed check, 2 on a
config error.  Diagnostics go to stderr as one JSON line.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .lattice import build_torus, extend_torus, two_vertex_graph
from .params import (Potential, WeightFn, general_graph_condition, goodness, periodize, potential_matrix,
                     temperedness)

SCHEMA_VERSION = 1
MODES = ("enumerate", "verify", "sample", "twopoint", "fourier", "potential-check", "bose-check",
         "spin-check")
CHECKS = ("equivalence", "observables", "partition-bound", "mcmc-exactness", "reflection", "expansion")

FIXTURES = {
    "two-vertex": {
        "description": "two vertices joined by one edge",
        "model": {"graph": "two-vertex", "N": 2, "lambda": "7/10"},
        "weight": {"family": "hard", "R": 2},
    },
    "four-cycle": {
        "description": "cycle of length four (the d=1, L=4 torus)",
        "model": {"graph": "torus", "L": 4, "d": 1, "N": 2, "lambda": "1/2"},
        "weight": {"family": "hard", "R": 2},
    },
    "torus-2x2": {
        "description": "2x2 torus; parallel edges collapse so it coincides with the four-cycle",
        "model": {"graph": "torus", "L": 2, "d": 2, "N": 2, "lambda": "1/2"},
        "weight": {"family": "hard", "R": 2},
    },
    "torus-4x4x4": {
        "description": "4^3 torus for sampling runs",
        "model": {"graph": "torus", "L": 4, "d": 3, "N": 2, "lambda": 1.0},
        "weight": {"family": "hard", "R": 3},
        "mcmc": {"seed": 1, "chains": 1, "steps": 2000, "thermalization": 20000, "thinning": 50},
    },
    "ext-two-vertex": {
        "description": "two-vertex graph with a virtual copy of each vertex",
        "model": {"graph": "two-vertex", "N": 2, "lambda": 0.7, "extended": True},
        "weight": {"family": "hard", "R": 2},
        "checks": ["reflection", "expansion"],
    },
    "ext-four-cycle": {
        "description": "four-cycle with a virtual copy of each vertex",
        "model": {"graph": "torus", "L": 4, "d": 1, "N": 2, "lambda": 0.5, "extended": True},
        "weight": {"family": "hard", "R": 1},
        "checks": ["reflection"],
    },
}

DEFAULTS = {
    "model": {"graph": "torus", "L": 4, "d": 1, "N": 2, "lambda": 0.5, "extended": False},
    "potential": {"family": "zero"},
    "weight": {"family": "hard", "R": 2},
    "mcmc": {"seed": 0, "chains": 1, "steps": 10000, "thermalization": 10000, "thinning": 10},
    "output": {"directory": "loopsoup-out", "formats": ["json", "csv"]},
    "checks": ["equivalence", "observables", "partition-bound"],
    "options": {},
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config_file(path: str) -> dict:
    text = Path(path).read_text()
    if path.endswith((".yaml", ".yml")):
        import yaml

        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse YAML: {exc}") from exc
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return data


def resolve_config(raw: dict, mode: str) -> dict:
    """Fill defaults and a fixture preset, then validate every parameter domain."""
    raw = dict(raw)
    if raw.get("mode", mode) != mode:
        raise ConfigError(f"config mode {raw['mode']!r} does not match subcommand {mode!r}")
    cfg = copy.deepcopy(DEFAULTS)
    fx = raw.pop("fixture", None)
    if fx is not None:
        if fx not in FIXTURES:
            raise ConfigError(f"unknown fixture {fx!r}")
        preset = {k: v for k, v in FIXTURES[fx].items() if k != "description"}
        cfg = _merge(cfg, preset)
        cfg["fixture"] = fx
    unknown = set(raw) - set(DEFAULTS) - {"mode"}
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    cfg = _merge(cfg, raw)
    cfg["mode"] = mode
    env_dir = os.environ.get("LOOPSOUP_OUTPUT_DIR")
    if env_dir:
        cfg["output"]["directory"] = env_dir
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    m = cfg["model"]
    if m.get("graph") not in ("two-vertex", "torus"):
        raise ConfigError(f"model.graph must be 'two-vertex' or 'torus', got {m.get('graph')!r}")
    if m["graph"] == "torus":
        for k in ("L", "d"):
            if not isinstance(m.get(k), int) or m[k] < 1:
                raise ConfigError(f"model.{k} must be a positive integer")
        if m["L"] % 2:
            raise ConfigError("model.L must be even")
    if not isinstance(m.get("N"), int) or m["N"] < 1:
        raise ConfigError("model.N must be a positive integer")
    lam = parse_lambda(m.get("lambda"))
    if not lam > 0:
        raise ConfigError("model.lambda must be positive")
    mc = cfg["mcmc"]
    for k in ("chains", "steps", "thinning"):
        if not isinstance(mc.get(k), int) or mc[k] < 1:
            raise ConfigError(f"mcmc.{k} must be a positive integer")
    for k in ("seed", "thermalization"):
        if not isinstance(mc.get(k), int) or mc[k] < 0:
            raise ConfigError(f"mcmc.{k} must be a nonnegative integer")
    bad = set(cfg["checks"]) - set(CHECKS)
    if bad:
        raise ConfigError(f"unknown checks {sorted(bad)}")
    bad = set(cfg["output"]["formats"]) - {"json", "csv"}
    if bad:
        raise ConfigError(f"unknown output formats {sorted(bad)}")
    # constructing these raises on domain violations
    build_potential(cfg["potential"], model_dim(cfg))
    build_weight(cfg["weight"])


def parse_lambda(val):
    if isinstance(val, str):
        try:
            return Fraction(val)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"cannot parse lambda {val!r}") from exc
    if isinstance(val, (int, float)) and not isinstance(val, bool) and math.isfinite(val):
        return val
    raise ConfigError(f"model.lambda must be a number, got {val!r}")


def model_dim(cfg: dict) -> int:
    m = cfg["model"]
    return 1 if m["graph"] == "two-vertex" else m["d"]


def build_graph(cfg: dict):
    m = cfg["model"]
    if m["graph"] == "two-vertex":
        return two_vertex_graph()
    return build_torus(m["L"], m["d"])


def build_potential(spec: dict, d: int) -> Potential:
    spec = dict(spec)
    fam = spec.pop("family", None)
    spec.pop("d", None)
    try:
        if fam == "zero":
            return Potential.zero(d)
        if fam == "delta":
            return Potential.delta(float(spec["alpha"]), d)
        if fam == "exp":
            return Potential.exp_family(float(spec["alpha"]), float(spec["beta"]), float(spec["iota"]), d)
        if fam == "power":
            return Potential.power_family(float(spec["alpha"]), float(spec["beta"]), float(spec["s"]), d)
        if fam == "table":
            return Potential.table({tuple(k): float(v) for k, v in spec["entries"]}, d)
    except KeyError as exc:
        raise ConfigError(f"potential family {fam!r} needs parameter {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown potential family {fam!r}")


def build_weight(spec: dict) -> WeightFn:
    fam = spec.get("family")
    try:
        if fam == "bose":
            return WeightFn.bose()
        if fam == "spin":
            return WeightFn.spin(spec["N"], spec.get("convention", "definition"))
        if fam == "hard":
            return WeightFn.hard_range(int(spec["R"]))
        if fam == "table":
            return WeightFn.table([float(u) for u in spec["values"]])
    except KeyError as exc:
        raise ConfigError(f"weight family {fam!r} needs parameter {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown weight family {fam!r}")


def _potential_or_none(cfg: dict):
    v = build_potential(cfg["potential"], model_dim(cfg))
    return None if v.kind == "zero" else v


def _exact_lambda(cfg: dict):
    lam = parse_lambda(cfg["model"]["lambda"])
    return lam if _potential_or_none(cfg) is None else float(lam)


def _threads() -> int:
    val = os.environ.get("LOOPSOUP_THREADS")
    if not val:
        return 1
    try:
        n = int(val)
    except ValueError as exc:
        raise ConfigError(f"LOOPSOUP_THREADS must be an integer, got {val!r}") from exc
    if n < 1:
        raise ConfigError("LOOPSOUP_THREADS must be positive")
    return n


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return float(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def write_atomic(path: Path, data: str) -> str:
    """Write through a temporary file in the same directory and rename; returns the sha256."""
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(raw).hexdigest()


def csv_text(header: list, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(c)) if isinstance(c, (float, np.floating, Fraction)) else c for c in r])
    return buf.getvalue()


class Writer:
    """Single owner of every artifact of a run."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.dir = Path(cfg["output"]["directory"])
        self.formats = set(cfg["output"]["formats"])
        self.artifacts = []

    def json(self, name: str, obj) -> None:
        if "json" in self.formats:
            text = json.dumps(_jsonable({"schemaVersion": SCHEMA_VERSION, **obj}), indent=2, sort_keys=True)
            self._put(name, text + "\n")

    def csv(self, name: str, header: list, rows) -> None:
        if "csv" in self.formats:
            self._put(name, csv_text(header, rows))

    def _put(self, name: str, text: str) -> None:
        digest = write_atomic(self.dir / name, text)
        self.artifacts.append({"path": name, "sha256": digest})

    def manifest(self, passed: bool) -> None:
        man = {"schemaVersion": SCHEMA_VERSION, "version": __version__, "mode": self.cfg["mode"],
               "config": self.cfg, "artifacts": self.artifacts, "pass": passed}
        write_atomic(self.dir / "manifest.json", json.dumps(_jsonable(man), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------


def _closed_moments(g, N, U, lam, vmat):
    from .rpm import colour_count_sum

    e = 0
    t = colour_count_sum(g, N, U, lam, vmat, observables={
        "n_o": lambda mc, n: n[g.origin],
        "m1m2": lambda mc, n: int(mc[e, 0] * mc[e, 1]) if N >= 2 else 0,
        "m_e_2": lambda mc, n: int(mc[e].sum() == 2),
    })
    Z = t["Z"]
    return {"Z": Z, **{k: t[k] / Z for k in ("n_o", "m1m2", "m_e_2")}}


def run_enumerate(cfg: dict, out: Writer) -> bool:
    from .observables import two_point_table_exact

    g = build_graph(cfg)
    N, U = cfg["model"]["N"], build_weight(cfg["weight"])
    v = _potential_or_none(cfg)
    lam = _exact_lambda(cfg)
    mom = _closed_moments(g, N, U, lam, potential_matrix(v, g))
    res = {"check": "enumerate", "instance": _instance(cfg), **mom}
    if N >= 2:
        diag = cfg["options"].get("diagonal", "literal")
        tab = two_point_table_exact(g, N, U, lam, v, diagonal=diag)
        res["twoPoint"] = tab.values
        out.csv("two_point.csv", [f"x{i + 1}" for i in range(g.d)] + ["G"],
                [list(g.coord(x)) + [float(tab.values[x])] for x in g.vertices])
    out.json("enumerate.json", res)
    return True


def run_verify(cfg: dict, out: Writer) -> bool:
    g = build_graph(cfg)
    N, U = cfg["model"]["N"], build_weight(cfg["weight"])
    v = _potential_or_none(cfg)
    lam = _exact_lambda(cfg)
    vmat = potential_matrix(v, g)
    opts = cfg["options"]
    reports = []
    if cfg["model"].get("extended"):
        reports += _verify_extended(cfg, g, N, U, lam, v)
    else:
        if "equivalence" in cfg["checks"]:
            from .equivalence import verify_weight_identity

            rep = verify_weight_identity(g, U, N, lam, v, opts.get("max_steps"))
            reports.append(rep.as_dict())
        if "observables" in cfg["checks"]:
            from .equivalence import builtin_pairs, verify_observable

            pairs = builtin_pairs(g)
            for name in ("N_xy", "n_x", "f1", "f3"):
                pair = pairs[name]
                reports.append(verify_observable(pair, g, U, N, lam, v, opts.get("max_steps")).as_dict())
        if "partition-bound" in cfg["checks"]:
            from .rpm import partition_bound_check

            for r in partition_bound_check(g, N, U, lam, vmat):
                reports.append(r.as_dict())
        if "mcmc-exactness" in cfg["checks"]:
            from .mcmc import exactness_test

            reports.append(exactness_test(g, N, U, float(lam), v).as_dict())
    passed = all(r["pass"] for r in reports)
    for r in reports:
        r.setdefault("instance", _instance(cfg))
    out.json("verify.json", {"reports": reports, "pass": passed})
    out.csv("verify.csv", ["check", "pass", "maxViolation", "tolerance"],
            [[r["check"], r["pass"], r.get("maxViolation", r.get("maxRelErr", r.get("relErr", ""))),
              r.get("tolerance", "")] for r in reports])
    return passed


def _verify_extended(cfg, g, N, U, lam, v):
    from .spectral import (CentralQuantity, all_configs, chessboard_probe, expansion_check,
                           reflection_positivity_probe)
    from .rpm import rpm_weight

    ext = extend_torus(g)
    opts = cfg["options"]
    reports = []
    if "reflection" in cfg["checks"]:
        cap = opts.get("edge_cap", 2 if g.n_vertices <= 2 else 1)
        configs = all_configs(ext.graph, N, U, ext=ext, edge_cap=cap)
        vmat = potential_matrix(v, g)
        from .params import extended_matrix

        evm = extended_matrix(vmat, ext)
        w = np.array([float(rpm_weight(ext.graph, c, evm, U, float(lam))) for c in configs])
        probes = opts.get("probes", 50)
        seed = cfg["mcmc"]["seed"]
        reports.append(reflection_positivity_probe(ext, configs, w, probes=probes, seed=seed).as_dict())
        reports.append(chessboard_probe(ext, configs, w, probes=probes, seed=seed))
    if "expansion" in cfg["checks"]:
        cq = CentralQuantity(ext, N, U, Fraction(lam) if not isinstance(lam, float) else lam, v)
        rng = np.random.default_rng(cfg["mcmc"]["seed"])
        for _ in range(opts.get("directions", 10)):
            h = [Fraction(int(z), 8) for z in rng.integers(-8, 9, size=ext.graph.n_vertices)]
            reports.append(expansion_check(cq, h, diagonal=opts.get("diagonal", "balanced")).as_dict())
    return reports


def _sample_worker(args):
    cfg, chain = args
    from .mcmc import Sampler, run_chain, standard_observables

    g = build_graph(cfg)
    N, U = cfg["model"]["N"], build_weight(cfg["weight"])
    sampler = Sampler(g, N, U, float(parse_lambda(cfg["model"]["lambda"])), _potential_or_none(cfg))
    obs = standard_observables(sampler, two_point=bool(cfg["options"].get("two_point", False)))
    mc = cfg["mcmc"]
    res = run_chain(sampler, seed=mc["seed"], chain=chain, samples=mc["steps"],
                    thermalization=mc["thermalization"], thinning=mc["thinning"], observables=obs)
    return res


def run_sample(cfg: dict, out: Writer) -> bool:
    from .mcmc import series_stats

    chains = cfg["mcmc"]["chains"]
    jobs = [(cfg, c) for c in range(chains)]
    workers = min(_threads(), chains)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_sample_worker, jobs))
    else:
        results = [_sample_worker(j) for j in jobs]
    scalar = [k for k, v in results[0].series.items() if np.asarray(v).ndim == 1]
    rows = []
    for c, res in enumerate(results):
        cols = [np.asarray(res.series[k], dtype=float) for k in scalar]
        for i in range(len(cols[0])):
            rows.append([c, i] + [float(col[i]) for col in cols])
    out.csv("samples.csv", ["chain", "index"] + scalar, rows)
    pooled = {k: series_stats(np.concatenate([np.asarray(r.series[k], dtype=float) for r in results])).as_dict()
              for k in scalar}
    summary = {"check": "sample", "instance": _instance(cfg), "chains": [r.summary() for r in results],
               "pooled": pooled}
    if "G" in results[0].series:
        G = np.concatenate([np.asarray(r.series["G"]) for r in results])
        summary["twoPoint"] = {"mean": G.mean(axis=0), "stderr": [series_stats(G[:, j]).stderr
                                                                  for j in range(G.shape[1])]}
    out.json("sample.json", summary)
    return True


def _two_point_values(cfg: dict):
    from .observables import two_point_table_exact

    g = build_graph(cfg)
    N, U = cfg["model"]["N"], build_weight(cfg["weight"])
    if N < 2:
        raise ConfigError("two-point modes need N >= 2")
    tab = two_point_table_exact(g, N, U, _exact_lambda(cfg), _potential_or_none(cfg),
                                diagonal=cfg["options"].get("diagonal", "literal"))
    return g, N, U, tab


def run_twopoint(cfg: dict, out: Writer) -> bool:
    from .spectral import cesaro_identity_check

    g, N, U, tab = _two_point_values(cfg)
    out.csv("two_point.csv", [f"x{i + 1}" for i in range(g.d)] + ["G"],
            [list(g.coord(x)) + [float(tab.values[x])] for x in g.vertices])
    reports = []
    if g.kind == "torus":
        reports.append(cesaro_identity_check(g, tab.values).as_dict())
    passed = all(r["pass"] for r in reports)
    out.json("twopoint.json", {"instance": _instance(cfg), "values": tab.values,
                               "cesaroMean": float(np.mean(tab.values)), "reports": reports, "pass": passed})
    return passed


def run_fourier(cfg: dict, out: Writer) -> bool:
    from .observables import mean_link_colour
    from .spectral import (c_limit, c_sequence, fourier_table, infrared_check, inverse_fourier,
                           key_inequality_check, test_vectors, two_point_matrix)

    opts = cfg["options"]
    reports = []
    res = {"instance": _instance(cfg)}
    if not opts.get("c_only", False):
        g, N, U, tab = _two_point_values(cfg)
        if g.kind != "torus":
            raise ConfigError("fourier mode needs a torus")
        ft = fourier_table(g, tab.values)
        back = inverse_fourier(g, ft.values)
        rt = float(np.max(np.abs(back - tab.values)))
        reports.append({"check": "fourier_round_trip", "maxViolation": rt, "tolerance": 1e-10,
                        "pass": rt <= 1e-10})
        m1 = float(mean_link_colour(g, N, U, _exact_lambda(cfg), v=_potential_or_none(cfg)))
        reports.append(infrared_check(g, tab.values, m1).as_dict())
        reports.append(key_inequality_check(g, two_point_matrix(g, tab.values), m1,
                                            test_vectors(g, seed=cfg["mcmc"]["seed"])).as_dict())
        out.csv("fourier.csv", [f"k{i + 1}" for i in range(g.d)] + ["Ghat"],
                [list(k) + [float(val)] for k, val in zip(ft.momenta, ft.values)])
    d = opts.get("c_dimension", model_dim(cfg))
    Ls = opts.get("c_sizes", [4, 8, 16, 32] if d == 3 else [])
    if Ls:
        seq = [c_sequence(L, d) for L in Ls]
        lim = c_limit(d)
        mono = all(b >= a for a, b in zip(seq, seq[1:]))
        gap = abs(seq[-1] - lim)
        reports.append({"check": "c_sequence", "L": Ls, "values": seq, "limit": lim, "monotone": mono,
                        "maxViolation": gap, "tolerance": 0.01, "pass": mono and gap < 0.01})
        out.csv("c_sequence.csv", ["L", "C"], [[L, c] for L, c in zip(Ls, seq)])
    passed = all(r["pass"] for r in reports)
    res.update(reports=reports, **{"pass": passed})
    out.json("fourier.json", res)
    return passed


def run_potential_check(cfg: dict, out: Writer) -> bool:
    d = model_dim(cfg)
    v = build_potential(cfg["potential"], d)
    U = build_weight(cfg["weight"])
    t = temperedness(v)
    good = goodness(U, t.v_bar)
    res = {"check": "potential", "potential": v.spec(), "separable": v.separable,
           "tempered": t.is_tempered, "vBar": t.v_bar, "absSum": t.abs_sum, "tailBound": t.tail_bound,
           "weight": U.spec(), "good": good.is_good, "M": good.M, "method": good.method,
           "diagnostic": good.diagnostic}
    if cfg["model"]["graph"] == "torus" or cfg["model"]["graph"] == "two-vertex":
        g = build_graph(cfg)
        cond = general_graph_condition(potential_matrix(v, g), U, n_vertices=g.n_vertices)
        res["graph"] = {"ok": cond.ok, "vBar": cond.v_bar, "M": cond.M, "diagnostic": cond.diagnostic}
        if g.kind == "torus" and v.kind != "zero":
            res["tailBound"] = periodize(v, g.L).tail_bound
    passed = t.is_tempered and good.is_good
    res["pass"] = passed
    out.json("potential_check.json", res)
    return passed


def run_bose_check(cfg: dict, out: Writer) -> bool:
    from .observables import bose_correspondence_check

    g = build_graph(cfg)
    opts = cfg["options"]
    rep = bose_correspondence_check(g, float(opts.get("mu", -0.5)), _potential_or_none(cfg),
                                    int(opts.get("n_max", 4)), float(opts.get("tolerance", 1e-10)))
    res = {**rep.as_dict(), "instance": _instance(cfg)}
    out.json("bose_check.json", res)
    return rep.ok


def run_spin_check(cfg: dict, out: Writer) -> bool:
    from .observables import spin_crosscheck

    if cfg["model"]["graph"] != "two-vertex":
        raise ConfigError("spin-check needs the two-vertex graph")
    g = build_graph(cfg)
    opts = cfg["options"]
    rep = spin_crosscheck(g, cfg["model"]["N"], float(opts.get("beta", parse_lambda(cfg["model"]["lambda"]))),
                          tolerance=float(opts.get("tolerance", 1e-4)))
    out.json("spin_check.json", {**rep.as_dict(), "instance": _instance(cfg)})
    return rep.ok


RUNNERS = {
    "enumerate": run_enumerate,
    "verify": run_verify,
    "sample": run_sample,
    "twopoint": run_twopoint,
    "fourier": run_fourier,
    "potential-check": run_potential_check,
    "bose-check": run_bose_check,
    "spin-check": run_spin_check,
}


def _instance(cfg: dict) -> dict:
    return {"model": cfg["model"], "weight": cfg["weight"], "potential": cfg["potential"],
            "fixture": cfg.get("fixture")}


def run(cfg: dict) -> int:
    out = Writer(cfg)
    passed = RUNNERS[cfg["mode"]](cfg, out)
    out.manifest(passed)
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loopsoup", description="Loop soup and random path model runs.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--list-fixtures", action="store_true", help="print the built-in fixtures as JSON")
    sub = p.add_subparsers(dest="mode")
    for mode in MODES:
        sp = sub.add_parser(mode)
        sp.add_argument("config", nargs="?", help="YAML or JSON run config")
        sp.add_argument("--fixture", help="start from a built-in fixture")
        sp.add_argument("--output", help="output directory")
        sp.add_argument("--seed", type=int, help="override mcmc.seed")
    return p


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.list_fixtures:
        print(json.dumps(FIXTURES, indent=2))
        return 0
    if args.mode is None:
        return _fail("config", "no subcommand given", 2)
    try:
        raw = load_config_file(args.config) if args.config else {}
        if args.fixture:
            raw["fixture"] = args.fixture
        if args.output:
            raw.setdefault("output", {})["directory"] = args.output
        if args.seed is not None:
            raw.setdefault("mcmc", {})["seed"] = args.seed
        cfg = resolve_config(raw, args.mode)
        if args.output:
            cfg["output"]["directory"] = args.output
        return run(cfg)
    except ValueError as exc:
        # ConfigError and domain errors raised while building the run
        return _fail("config", str(exc), 2)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail("config", f"cannot read config: {exc}", 2)


if __name__ == "__main__":
    sys.exit(main())
