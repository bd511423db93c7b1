"""Command-line experiment runner.

    andersonlab run EXPERIMENT [--config PATH] [--seed U64] [--out PATH]
                    [--format {csv,jsonl}] [--threads N] [--paper-mode] [key=value ...]
    andersonlab report RESULTS.jsonl --out FIGURE.png

Configs are flat ``key=value`` text with ``#`` comments. Each output file
starts with ``#@ key=value`` header lines holding the resolved config, so an
output file can be passed back as ``--config`` to replay the run.
Exit status is 0 on completion, 2 when every verdict is vacuous and 1 on error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

HEADER_TAG = "#@"
FORMAT_LINE = "andersonlab-output v1"
REQUIRED = object()


class ConfigError(ValueError):
    pass


# typed values -----------------------------------------------------------------------------

def format_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _split_list(s: str) -> list[str]:
    s = s.strip()
    if s[:1] in "[(" and s[-1:] in "])":
        s = s[1:-1]
    return [p.strip() for p in s.split(",") if p.strip()]


def _parse_site(s: str) -> tuple[int, int, int]:
    parts = [int(p) for p in _split_list(s)]
    if len(parts) != 3:
        raise ValueError(f"a site needs three integers: {s!r}")
    return parts[0], parts[1], parts[2]


PARSERS: dict[str, Callable[[str], Any]] = {
    "int": int,
    "real": float,
    "bool": _parse_bool,
    "str": str.strip,
    "site": _parse_site,
    "ints": lambda s: [int(p) for p in _split_list(s)],
    "reals": lambda s: [float(p) for p in _split_list(s)],
}


def format_value(kind: str, v: Any) -> str:
    if kind == "real":
        return format_float(float(v))
    if kind == "bool":
        return "true" if v else "false"
    if kind == "site":
        return "(" + ",".join(str(int(x)) for x in v) + ")"
    if kind == "ints":
        return "[" + ",".join(str(int(x)) for x in v) + "]"
    if kind == "reals":
        return "[" + ",".join(format_float(float(x)) for x in v) + "]"
    return str(v)


@dataclass(frozen=True)
class Param:
    kind: str
    default: Any = REQUIRED
    choices: tuple[str, ...] = ()


# config -----------------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    experiment: str
    params: dict[str, Any]
    seed: int = 0
    out: str | None = None
    format: str = "jsonl"
    threads: int = 1
    paper_mode: bool = False

    def header_lines(self) -> list[str]:
        schema = SCHEMAS[self.experiment]
        lines = [f"{HEADER_TAG} {FORMAT_LINE}",
                 f"{HEADER_TAG} experiment={self.experiment}",
                 f"{HEADER_TAG} seed={self.seed}",
                 f"{HEADER_TAG} format={self.format}",
                 f"{HEADER_TAG} paper_mode={format_value('bool', self.paper_mode)}"]
        for k in sorted(self.params):
            lines.append(f"{HEADER_TAG} {k}={format_value(schema[k].kind, self.params[k])}")
        return lines


GLOBAL_KEYS = {"experiment", "seed", "format", "paper_mode", "out", "threads"}


def read_pairs(text: str) -> dict[str, str]:
    """key=value pairs from config text or from the header of an output file."""
    lines = text.splitlines()
    replay = bool(lines) and lines[0].strip() == f"{HEADER_TAG} {FORMAT_LINE}"
    pairs: dict[str, str] = {}
    for n, raw in enumerate(lines, 1):
        line = raw.strip()
        if replay:
            # output file: only the header carries config, data rows are ignored
            if not line.startswith(HEADER_TAG) or n == 1:
                continue
            line = line[len(HEADER_TAG):].strip()
        else:
            line = line.split("#", 1)[0].strip()   # comments, whole-line or trailing
            if not line:
                continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {n}: empty key")
        pairs[key] = value.strip()
    return pairs


def resolve(experiment: str | None, pairs: Mapping[str, str], *, seed: int | None = None,
            fmt: str | None = None, paper_mode: bool | None = None, out: str | None = None,
            threads: int | None = None) -> ExperimentConfig:
    """Typed config from raw pairs; command-line flags override file values."""
    pairs = dict(pairs)
    name = experiment or pairs.pop("experiment", None)
    pairs.pop("experiment", None)
    if name is None:
        raise ConfigError("no experiment given")
    if name not in SCHEMAS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(sorted(SCHEMAS))}")
    schema = SCHEMAS[name]
    try:
        cfg = ExperimentConfig(
            name, {},
            seed=seed if seed is not None else int(pairs.pop("seed", "0")),
            format=fmt or pairs.pop("format", "jsonl"),
            paper_mode=paper_mode if paper_mode else _parse_bool(pairs.pop("paper_mode", "false")),
            out=out or pairs.pop("out", None),
            threads=threads if threads is not None else int(pairs.pop("threads", "1")),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for k in ("seed", "format", "paper_mode", "out", "threads"):
        pairs.pop(k, None)
    if not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg.format not in ("jsonl", "csv"):
        raise ConfigError(f"format must be csv or jsonl, got {cfg.format!r}")
    unknown = sorted(set(pairs) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) for {name}: {', '.join(unknown)}")
    for key, p in schema.items():
        if key in pairs:
            try:
                val = PARSERS[p.kind](pairs[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from exc
            if p.choices and val not in p.choices:
                raise ConfigError(f"{key} must be one of {', '.join(p.choices)}")
            cfg.params[key] = val
        elif p.default is REQUIRED:
            raise ConfigError(f"missing required key: {key}")
        else:
            cfg.params[key] = p.default
    return cfg


# records ----------------------------------------------------------------------------------

def _plain(x: Any) -> Any:
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, Mapping):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_plain(v) for v in x]
    return x


def _json(x: Any) -> str:
    """JSON with floats at 17 significant digits and sorted keys."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        s = format_float(x)
        return s if s not in ("nan", "inf", "-inf") else json.dumps(s)
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    if isinstance(x, Mapping):
        return "{" + ",".join(f"{json.dumps(k)}:{_json(x[k])}" for k in sorted(x)) + "}"
    return "[" + ",".join(_json(v) for v in x) + "]"


@dataclass
class Recorder:
    cfg: ExperimentConfig
    records: list[dict[str, Any]] = field(default_factory=list)

    def emit(self, trial: int, params: Mapping[str, Any], outcome: Mapping[str, Any], verdict: str) -> None:
        self.records.append({"experiment": self.cfg.experiment, "seed": self.cfg.seed, "trial": trial,
                             "params": _plain(params), "outcome": _plain(outcome), "verdict": verdict})

    def render(self) -> str:
        head = "\n".join(self.cfg.header_lines()) + "\n"
        recs = sorted(self.records, key=lambda r: r["trial"])
        if self.cfg.format == "jsonl":
            return head + "".join(_json(r) + "\n" for r in recs)
        cols, rows = _flatten(recs)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([r.get(c, "") for c in cols])
        return head + buf.getvalue()


def _flatten(recs: Sequence[Mapping[str, Any]]) -> tuple[list[str], list[dict[str, str]]]:
    base = ["experiment", "seed", "trial", "verdict"]
    extra: list[str] = []
    rows = []
    for r in recs:
        row = {k: _cell(r[k]) for k in base}
        for group in ("params", "outcome"):
            for k, v in r[group].items():
                col = f"{group}.{k}"
                if col not in extra:
                    extra.append(col)
                row[col] = _cell(v)
        rows.append(row)
    return base + extra, rows


def _cell(v: Any) -> str:
    if isinstance(v, (dict, list)):
        return _json(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def _pmap(fn: Callable[[int], Any], n: int, threads: int) -> list[Any]:
    """fn over 0..n-1, results in index order regardless of thread count."""
    if threads <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(n)))


# experiments ------------------------------------------------------------------------------

def _field_instance(kind: str, n: int, seed: int, trial: int):
    from .fields_operator import LatticeField, bernoulli_potential, cauchy_solution, sharp_example
    from .lattice_core import Cube
    from .probes import trial_seed

    Q = Cube((0, 0, 0), n)
    if kind == "sharp":
        return sharp_example(Cube((0, 0, 0), n + 1)), LatticeField.constant(Q, 0.0), Q
    s = trial_seed(seed, trial)
    V = bernoulli_potential(Q, s)
    return cauchy_solution(Q, V, s), V, Q


def run_duc_scan(cfg: ExperimentConfig, rec: Recorder) -> None:
    from .duc_engine import duc_count, fit_exponent

    p = cfg.params
    counts = []
    for i, n in enumerate(p["ns"]):
        u, V, Q = _field_instance(p["field"], n, cfg.seed, 0)
        c = duc_count(u, Q, p["rate"], p["mode"], V=V)
        counts.append(c.count)
        rec.emit(i, {"n": n, "rate": p["rate"], "field": p["field"]},
                 {"count": c.count, "log_threshold": c.log_threshold}, "pass")
    if len(counts) >= 2:
        rec.emit(len(counts), {"ns": p["ns"]}, {"exponent": fit_exponent(p["ns"], counts)}, "pass")


def run_theta(cfg: ExperimentConfig, rec: Recorder) -> None:
    from .duc_engine import theta_construct, verify_theta

    p = cfg.params

    def one(t: int):
        u, V, Q = _field_instance(p["field"], p["n"], cfg.seed, t)
        th = theta_construct(u, V, Q, p["m"], p["K"], p["N0"], paper_mode=cfg.paper_mode)
        r = verify_theta(th, u, Q)
        return t, th, r

    for t, th, r in _pmap(one, p["trials"], cfg.threads):
        rec.emit(t, {"n": p["n"], "m": p["m"], "N0": p["N0"], "field": p["field"]},
                 {"size": len(th.points), "ratio": th.ratio(), "magnitude_ok": r.magnitude_ok,
                  "disjoint_ok": r.disjoint_ok, "contained_ok": r.contained_ok,
                  "worst_log_margin": r.worst_margin, "points": [list(b) for b in th.points]},
                 "pass" if r.ok else "fail")


def run_tri_audit(cfg: ExperimentConfig, rec: Recorder) -> None:
    from .tri_lattice import Trapezoid, check_decomposition, construct_v, polynomial_structure_holds

    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    for t in range(p["trials"]):
        m = int(rng.integers(1, p["m_max"] + 1))
        ell = int(rng.integers(0, min(p["ell_max"], m) + 1))
        P = Trapezoid((0, 0), m, ell)
        pts = P.sites() + [(s - 1, tt) for s, tt in P.sites()] + [(s, tt + 1) for s, tt in P.sites()]
        u = {q: int(rng.integers(-p["amplitude"], p["amplitude"] + 1)) for q in sorted(set(pts))}
        d = construct_v(u, P)
        r = check_decomposition(u, d)
        poly = polynomial_structure_holds(d)
        ok = r.left_leg_zero and r.upper_edge_match and r.sums_match and r.bound_ok and poly
        rec.emit(t, {"m": m, "ell": ell},
                 {"left_leg_zero": r.left_leg_zero, "upper_edge_match": r.upper_edge_match,
                  "sums_match": r.sums_match, "bound_ok": r.bound_ok,
                  "w_homogeneous": r.w_homogeneous, "polynomial": poly}, "pass" if ok else "fail")


def run_pyramid_audit(cfg: ExperimentConfig, rec: Recorder) -> None:
    from .pyramid_geom import (
        BOUNDARY, INTERIOR, TetraFrame, bilipschitz_ratios, boundary_sites, classify_array,
        gamma_free_inside, pyramid_build, _box,
    )

    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    fr = TetraFrame(tuple(p["a"]), p["r"])
    pts = [q for q in fr.lattice_points() if q != fr.a and not _on_open_basement(fr, q)]
    lo, hi = fr.bounding_box(1)
    X = _box(lo, hi)
    for t in range(p["trials"]):
        k = int(rng.integers(0, min(p["gamma_size"], len(pts)) + 1))
        extra = [pts[i] for i in sorted(rng.choice(len(pts), k, replace=False))] if k else []
        gamma = [fr.a] + extra
        P = pyramid_build(fr, gamma)
        lab = classify_array(P, X)
        lo_r, hi_r = bilipschitz_ratios(P)
        ok = gamma_free_inside(P, gamma) and lo_r >= 0.1 - 1e-12 and hi_r <= 1 + 1e-12
        rec.emit(t, {"r": p["r"], "gamma": [list(g) for g in gamma]},
                 {"levels": [list(x) for x in P.levels], "interior": int((lab == INTERIOR).sum()),
                  "boundary": int((lab == BOUNDARY).sum()), "boundary_sites": len(boundary_sites(P)),
                  "lipschitz_min": lo_r, "lipschitz_max": hi_r}, "pass" if ok else "fail")


def _on_open_basement(fr, q) -> bool:
    from .pyramid_geom import _open_basement

    return _open_basement(fr, q)


def run_green(cfg: ExperimentConfig, rec: Recorder) -> None:
    from .green_base import green_table, neg_laplacian_G

    p = cfg.params
    T = green_table(p["cap"], p["resolution"])
    for i, line in enumerate(sorted(T.values.items())):
        (x, y, z), g = line
        out = {"x": x, "y": y, "z": z, "G": g}
        if max(x, y, z) < p["cap"]:
            out["neg_laplacian"] = neg_laplacian_G(T, (x, y, z))
        rec.emit(i, {"resolution": p["resolution"]}, out, "pass")


def run_lifshitz(cfg: ExperimentConfig, rec: Recorder) -> None:
    from .fields_operator import periodic_impurities
    from .green_base import green_table, lifshitz_test_function, min_max_check, principal_eigenvalue_bounds
    from .lattice_core import Cube

    p = cfg.params
    for t, R in enumerate(p["R"]):
        per = max(1, math.ceil(R))
        Q = Cube((0, 0, 0), p["n"])
        b = principal_eigenvalue_bounds(Q, periodic_impurities(Q, per), R, seed=cfg.seed)
        out = {"lambda0": b.lam0, "rayleigh": b.rayleigh, "upper_bound": b.upper_bound,
               "scaled": b.scaled}
        if p["test_function"]:
            cap = math.ceil(3 * R) + 1
            T = green_table(max(cap, p["domain"] + 2), p["resolution"])
            reach = Cube((0, 0, 0), p["domain"] + math.ceil(3 * R) + per)
            L = lifshitz_test_function(T, R, p["eps_d"], Cube((0, 0, 0), p["domain"]),
                                       periodic_impurities(reach, per))
            outer, inner = min_max_check(L.u, R)
            out.update({"residual": L.residual, "u0_bounds_ok": L.bounds_ok,
                        "min_outer": outer, "max_inner": inner})
        rec.emit(t, {"R": R, "n": p["n"], "period": per}, out, "pass" if b.ok else "fail")


def run_base_case(cfg: ExperimentConfig, rec: Recorder) -> None:
    from .green_base import base_case_trial

    p = cfg.params
    if not 0 < p["delta"] < 0.1:
        raise ConfigError("delta must lie in (0, 1/10)")
    res = _pmap(lambda t: base_case_trial(p["n"], p["delta"], p["eps"], p["lambda"], cfg.seed, t,
                                          p["columns"], p["random_fills"]), p["trials"], cfg.threads)
    for r in res:
        rec.emit(r.trial, {"n": p["n"], "delta": p["delta"], "eps": p["eps"], "lambda": p["lambda"]},
                 {"fills": list(r.fills), "norm": r.norm, "norm_bound": r.norm_bound,
                  "worst_entry_margin": r.worst_entry_margin}, "pass" if r.passed else "fail")


def run_good_cube(cfg: ExperimentConfig, rec: Recorder) -> None:
    from .lattice_core import is_power_of_two
    from .probes import good_cube_trial

    p = cfg.params
    if not (is_power_of_two(p["L"]) and p["L"] <= 32):
        raise ConfigError("L must be dyadic and at most 32")
    res = _pmap(lambda t: good_cube_trial(p["L"], p["lambda"], p["lambda_star"], cfg.seed, t),
                p["trials"], cfg.threads)
    failures = sum("error" in r.outcome for r in res)
    if failures > p["max_failures"]:
        raise RuntimeError(f"solver failure budget exceeded: {failures} > {p['max_failures']}")
    for r in res:
        rec.emit(r.trial, r.params, r.outcome, r.verdict)


def run_wegner(cfg: ExperimentConfig, rec: Recorder) -> None:
    from .fields_operator import assemble, bernoulli_potential, eigvals_all
    from .lattice_core import Cube
    from .probes import trial_seed

    p = cfg.params
    Q = Cube((0, 0, 0), p["L"] // 2)

    def one(t: int) -> float:
        H = assemble(Q, bernoulli_potential(Q, trial_seed(cfg.seed, t)))
        return float(np.min(np.abs(eigvals_all(H) - p["lambda_bar"])))

    for t, d in enumerate(_pmap(one, p["trials"], cfg.threads)):
        rec.emit(t, {"L": p["L"], "lambda_bar": p["lambda_bar"]},
                 {"distance": d, "log_norm": -math.log(d) if d > 0 else math.inf,
                  "tail": {format_float(sv): d < math.exp(-sv) for sv in p["s_values"]}}, "pass")


def run_eigdecay(cfg: ExperimentConfig, rec: Recorder) -> None:
    from .fields_operator import assemble, bernoulli_potential, eig_extremal
    from .lattice_core import Cube
    from .probes import decay_slope, trial_seed

    p = cfg.params
    Q = Cube((0, 0, 0), p["L"] // 2)

    def one(t: int):
        H = assemble(Q, bernoulli_potential(Q, trial_seed(cfg.seed, t)))
        w, v = eig_extremal(H, 1, "smallest", seed=t)
        inside = p["window_lo"] <= w[0] <= p["window_hi"]
        return float(w[0]), (decay_slope(Q, v[:, 0]) if inside else None)

    for t, (lam, slope) in enumerate(_pmap(one, p["trials"], cfg.threads)):
        if slope is None:
            rec.emit(t, {"L": p["L"]}, {"eigenvalue": lam, "skipped": True}, "vacuous")
        else:
            rec.emit(t, {"L": p["L"], "threshold": p["threshold"], "threshold_kind": "calibrated"},
                     {"eigenvalue": lam, "slope": slope, "localized": slope < p["threshold"]}, "pass")


def run_probes(cfg: ExperimentConfig, rec: Recorder) -> None:
    from . import probes as pr
    from .fields_operator import assemble, bernoulli_potential
    from .lattice_core import Cube

    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    t = 0
    for _ in range(p["trials"]):
        A, k, r, i, j = pr.variation_instance(p["matrix_size"], rng, p["c"])
        res = pr.eig_variation_check(A, k, r, i, j, p["c"])
        rec.emit(t, {"check": "eigenvalue-variation", "k": k, "i": i, "j": j, "r": list(r)},
                 {"failed_hypothesis": res.failed_hypothesis, **res.detail}, res.verdict)
        t += 1
    for _ in range(p["trials"]):
        n = int(rng.integers(2, 16))
        m = int(rng.integers(max(1, n - 3), n + 4))
        res = pr.almost_orth_bound(pr.near_orthonormal_family(n, m, float(rng.uniform(0, 0.3)), rng))
        rec.emit(t, {"check": "almost-orthonormal", "n": n, "m": m},
                 {"failed_hypothesis": res.failed_hypothesis, **res.detail}, res.verdict)
        t += 1
    for _ in range(p["trials"]):
        n = int(rng.integers(2, 13))
        fam, rho = pr.random_sperner_family(n, rng, int(rng.integers(1, 60)))
        res = pr.sperner_check(fam, n, rho=rho) if rho > 0 else pr.CheckResult("vacuous", "rho")
        rec.emit(t, {"check": "sperner", "n": n, "rho": rho},
                 {"failed_hypothesis": res.failed_hypothesis, **res.detail}, res.verdict)
        t += 1
    for n in range(1, p["middle_layer_max"] + 1):
        rec.emit(t, {"check": "sperner-middle-layer", "n": n},
                 {"size": math.comb(n, n // 2), "bound": 2.0 ** n * n ** -0.5},
                 "pass" if pr.middle_layer_check(n) else "fail")
        t += 1
    Q = Cube((0, 0, 0), 1)
    for s in range(p["trials"]):
        H = assemble(Q, bernoulli_potential(Q, pr.trial_seed(cfg.seed, s)))
        alpha, beta = pr.decay_pair(H, -1.0)
        edge = -1.0 + 0.5 / H.dim * math.exp(-alpha)
        res = pr.resolvent_continuity_check(H, -1.0, alpha, beta, edge)
        rec.emit(t, {"check": "resolvent-continuity", "alpha": alpha, "beta": beta},
                 {"failed_hypothesis": res.failed_hypothesis, **res.detail}, res.verdict)
        t += 1


SCHEMAS: dict[str, dict[str, Param]] = {
    "duc-scan": {"field": Param("str", "sharp", ("sharp", "cauchy")),
                 "ns": Param("ints", [8, 16, 32, 64]), "rate": Param("real", 1.0),
                 "mode": Param("str", "linear", ("linear", "cubic"))},
    "theta": {"field": Param("str", "cauchy", ("sharp", "cauchy")), "n": Param("int", 48),
              "m": Param("int", 3), "N0": Param("int", 4), "K": Param("real", 1.0),
              "trials": Param("int", 1)},
    "tri-audit": {"trials": Param("int", 20), "m_max": Param("int", 60), "ell_max": Param("int", 6),
                  "amplitude": Param("int", 5)},
    "pyramid-audit": {"r": Param("int", 3), "a": Param("site", (0, 0, 0)), "trials": Param("int", 10),
                      "gamma_size": Param("int", 2)},
    "green": {"resolution": Param("int", 64), "cap": Param("int", 10)},
    "lifshitz": {"R": Param("reals"), "n": Param("int", 24), "eps_d": Param("real", 1e-3),
                 "test_function": Param("bool", False), "domain": Param("int", 4),
                 "resolution": Param("int", 128)},
    "base-case": {"n": Param("int"), "trials": Param("int", 200), "delta": Param("real", 0.09),
                  "eps": Param("real", 1.0), "lambda": Param("real", 0.0), "columns": Param("int", 8),
                  "random_fills": Param("int", 8)},
    "good-cube": {"L": Param("int"), "lambda": Param("real", 1e-3), "lambda_star": Param("real", 0.05),
                  "trials": Param("int", 100), "max_failures": Param("int", 0)},
    "wegner": {"L": Param("int"), "lambda_bar": Param("real", 0.0), "trials": Param("int", 200),
               "s_values": Param("reals", [5.0, 10.0, 20.0])},
    "eigdecay": {"L": Param("int"), "window_lo": Param("real", 0.0), "window_hi": Param("real", 0.5),
                 "trials": Param("int", 50), "threshold": Param("real", -0.05)},
    "probes": {"trials": Param("int", 50), "matrix_size": Param("int", 12), "c": Param("real", 1e-2),
               "middle_layer_max": Param("int", 20)},
}

RUNNERS: dict[str, Callable[[ExperimentConfig, Recorder], None]] = {
    "duc-scan": run_duc_scan, "theta": run_theta, "tri-audit": run_tri_audit,
    "pyramid-audit": run_pyramid_audit, "green": run_green, "lifshitz": run_lifshitz,
    "base-case": run_base_case, "good-cube": run_good_cube, "wegner": run_wegner,
    "eigdecay": run_eigdecay, "probes": run_probes,
}


def execute(cfg: ExperimentConfig) -> tuple[str, int]:
    """Run an experiment; returns the rendered output and the exit status."""
    rec = Recorder(cfg)
    RUNNERS[cfg.experiment](cfg, rec)
    verdicts = {r["verdict"] for r in rec.records}
    status = 2 if verdicts == {"vacuous"} else 0
    return rec.render(), status


# report -----------------------------------------------------------------------------------

def load_records(path: str) -> list[dict[str, Any]]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip() and not line.startswith("#")]


def render_report(records: Sequence[Mapping[str, Any]], out: str) -> list[str]:
    """Scatter every numeric outcome against the trial index; returns the keys drawn."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    keys = sorted({k for r in records for k, v in r["outcome"].items()
                   if isinstance(v, (int, float)) and not isinstance(v, bool)})[:6]
    fig, axes = plt.subplots(len(keys) or 1, 1, figsize=(6, 2.2 * max(len(keys), 1)), squeeze=False)
    for ax, k in zip(axes[:, 0], keys):
        pts = [(r["trial"], r["outcome"][k]) for r in records if isinstance(r["outcome"].get(k), (int, float))]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], ".", ms=3)
        ax.set_ylabel(k)
    axes[-1, 0].set_xlabel("trial")
    if records:
        axes[0, 0].set_title(str(records[0]["experiment"]))
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)
    return keys


# entry point ------------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    # usage errors exit 1; status 2 is reserved for vacuous-only runs
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="andersonlab", description="Reproducible lattice experiments.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("experiment", nargs="?", help=", ".join(sorted(SCHEMAS)))
    run.add_argument("overrides", nargs="*", metavar="key=value")
    run.add_argument("--config")
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--format", choices=("csv", "jsonl"))
    run.add_argument("--threads", type=int)
    run.add_argument("--paper-mode", action="store_true")
    rep = sub.add_parser("report", help="plot a JSONL result file (needs matplotlib)")
    rep.add_argument("results")
    rep.add_argument("--out", required=True)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args, extra = ap.parse_known_args(argv)
    # overrides may also follow the flags
    bad = [x for x in extra if x.startswith("-") or args.command != "run"]
    if bad:
        ap.error(f"unrecognized arguments: {' '.join(bad)}")
    try:
        if args.command == "report":
            try:
                render_report(load_records(args.results), args.out)
            except ImportError:
                raise ConfigError("report needs matplotlib: pip install 'artifact[plot]'")
            return 0
        pairs: dict[str, str] = {}
        if args.config:
            with open(args.config) as fh:
                pairs.update(read_pairs(fh.read()))
        experiment = args.experiment
        overrides = list(args.overrides) + extra
        if experiment and "=" in experiment:
            overrides.insert(0, experiment)
            experiment = None
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"expected key=value, got {item!r}")
            k, _, v = item.partition("=")
            pairs[k.strip()] = v.strip()
        cfg = resolve(experiment, pairs, seed=args.seed, fmt=args.format, paper_mode=args.paper_mode,
                      out=args.out, threads=args.threads)
        text, status = execute(cfg)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # solver or hypothesis failures surface as exit 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
