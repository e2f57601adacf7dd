"""Configuration-driven experiment runner.

Usage::

    bergstat run CONFIG.json [--out REPORT.json] [--threads K]
    bergstat suite {smoke,paper} [--out DIR] [--threads K]

A config is one JSON object::

    {
      "name": "fisher-disc",
      "kind": "fisher",
      "seed": 7,
      "n": 1000000,
      "cases": [{"domain": {"kind": "disc"}, "points": ["0.5"]}]
    }

Top-level fields other than ``name``, ``kind``, ``description`` and
``cases`` are defaults for every case.  A case without its own ``seed``
uses ``derive_seed(seed, case_index)``.  Points are numbers, ``"a+bj"``
strings or ``[re, im]`` pairs; points in dimension ``n > 1`` are lists of
``n`` of those.  See ``configs/SCHEMA.md`` for the per-kind fields.

Exit codes: 0 when every record passes, 1 when some record fails, 2 on a
configuration error, 130 on interrupt (a partial report is still written).
"""

import argparse
import concurrent.futures
import json
import math
import os
import re
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import derive_seed, make_rng
from ._validation import parse_complex
from .domains import Domain, bergman_kernel, bergman_kernel_series, series_truncation, uniform_box_sample
from .estimation import CLT_RTOL, KS_LEVEL, MAX_FAILURE_RATE, clt_experiment, consistency_experiment
from .exceptions import BergstatError, ConfigError
from .geometry import bergman_metric, diastasis, holo_sectional_curvature, holo_sectional_curvature_fd
from .infogeo import (IDENTITIES, alpha_divergence_mc, curvature_mc, fisher_metric_mc, identity_suite,
                      joint_agree, kl_divergence_mc)
from .maps import (ProperMap, bell_rule_check, diagram_gap, k_inequality_check, lower_bound_check,
                   pullback_fisher_mc, pullback_relation_mc)
from .sampling import _jsonable

THREADS_ENV = "BERGSTAT_THREADS"
MAX_N = 10 ** 8
MAX_R_REP = 10 ** 5
SMOKE_N = 10 ** 4
SMOKE_R_REP = 100
_META = {"name", "kind", "description", "cases"}


# -- config parsing -------------------------------------------------------------

class _Case:
    """Typed access to one case, with field paths in error messages."""

    def __init__(self, data, path):
        self.data = data
        self.path = path

    def where(self, key):
        return f"{self.path}.{key}"

    def has(self, key):
        return key in self.data

    def raw(self, key, default=...):
        if key not in self.data:
            if default is ...:
                raise ConfigError(f"{self.where(key)}: required field is missing")
            return default
        return self.data[key]

    def integer(self, key, default=..., minimum=1, maximum=None):
        val = self.raw(key, default)
        if isinstance(val, float) and val.is_integer():
            val = int(val)
        if not isinstance(val, int) or isinstance(val, bool) or val < minimum:
            raise ConfigError(f"{self.where(key)}: expected an integer >= {minimum}, got {val!r}")
        if maximum is not None and val > maximum:
            raise ConfigError(f"{self.where(key)}: {val} exceeds the limit {maximum}")
        return val

    def number(self, key, default=..., lo=-math.inf, hi=math.inf):
        val = self.raw(key, default)
        if not isinstance(val, (int, float)) or isinstance(val, bool) or not lo <= val <= hi:
            raise ConfigError(f"{self.where(key)}: expected a number in [{lo}, {hi}], got {val!r}")
        return float(val)

    def boolean(self, key, default=...):
        val = self.raw(key, default)
        if not isinstance(val, bool):
            raise ConfigError(f"{self.where(key)}: expected true or false, got {val!r}")
        return val

    def choice(self, key, options, default=...):
        val = self.raw(key, default)
        if val not in options:
            raise ConfigError(f"{self.where(key)}: expected one of {list(options)}, got {val!r}")
        return val

    def domain(self):
        spec = self.raw("domain")
        if isinstance(spec, str):
            m = re.fullmatch(r"\s*(disc|polydisc|ball)\s*(?:\(\s*(\d+)\s*\))?\s*", spec)
            if m is None:
                raise ConfigError(f"{self.where('domain')}: cannot parse domain {spec!r}")
            spec = {"kind": m.group(1), "n": int(m.group(2) or 1)}
        try:
            return Domain.from_config(spec)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{self.where('domain')}: {exc}") from None

    def point(self, value, domain, where):
        try:
            if domain.n == 1 and not (isinstance(value, list) and len(value) == 1):
                z = np.array([parse_complex(value)])
            else:
                if not isinstance(value, list) or len(value) != domain.n:
                    raise TypeError(f"expected a list of {domain.n} coordinates")
                z = np.array([parse_complex(v) for v in value])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: {exc}") from None
        if not domain.contains(z[None, :])[0]:
            raise ConfigError(f"{where}: point {value!r} is not inside the {domain}")
        return z

    def points(self, key, domain, rng_seed):
        """Explicit ``key`` list, a single ``point``, or ``random_<key>: {"count": k, "radius": r}``."""
        if key == "points" and not self.has(key) and self.has("point"):
            return [self.point(self.raw("point"), domain, self.where("point"))]
        if self.has(key):
            vals = self.raw(key)
            if not isinstance(vals, list) or not vals:
                raise ConfigError(f"{self.where(key)}: expected a non-empty list")
            return [self.point(v, domain, f"{self.where(key)}[{i}]") for i, v in enumerate(vals)]
        rk = f"random_{key}"
        if self.has(rk):
            spec = _Case(self.raw(rk), self.where(rk))
            count = spec.integer("count")
            radius = spec.number("radius", lo=0.0, hi=0.95)
            return list(radius * uniform_box_sample(domain, derive_seed(rng_seed, 101), count))
        raise ConfigError(f"{self.where(key)}: required field is missing (or give {rk})")


def _budget(case, key, default=..., maximum=MAX_N, minimum=2):
    return case.integer(key, default, minimum=minimum, maximum=maximum)


# -- experiment kinds -------------------------------------------------------------
# Each kind is (prepare, run): prepare validates a case into parameters,
# run(params, seed) returns a list of JSON-ready records with a "pass" field.

def _prep_kernel_oracle(c):
    return {"domain": c.domain(), "pairs": c.integer("pairs", 1000),
            "radius": c.number("radius", 0.9, lo=0.0, hi=0.95), "rtol": c.number("rtol", 1e-8, lo=0.0)}


def _run_kernel_oracle(p, seed):
    d = p["domain"]
    rng = make_rng(seed)
    z = p["radius"] * uniform_box_sample(d, rng, p["pairs"])
    w = p["radius"] * uniform_box_sample(d, rng, p["pairs"])
    trunc = series_truncation(d, p["radius"] ** 2, rtol=p["rtol"] * 1e-3)
    t0 = time.perf_counter()
    closed = bergman_kernel(d, z, w)
    series = bergman_kernel_series(d, z, w, trunc)
    rel = np.abs(closed - series) / np.abs(closed)
    herm = np.abs(closed - np.conj(bergman_kernel(d, w, z))) / np.abs(closed)
    return [{
        "domain": d.to_config(), "pairs": p["pairs"], "radius": p["radius"], "truncation": trunc,
        "max_rel_error": float(rel.max()), "max_hermitian_error": float(herm.max()),
        "tolerance": p["rtol"], "seconds": time.perf_counter() - t0,
        "pass": bool(rel.max() < p["rtol"] and herm.max() < 1e-12),
    }]


def _prep_fisher(c):
    d = c.domain()
    return {"domain": d, "points": c.points("points", d, c.seed), "n": _budget(c, "n"),
            "max_rel_stderr": c.number("max_rel_stderr", None) if c.has("max_rel_stderr") else None}


def _run_fisher(p, seed):
    out = []
    for k, z in enumerate(p["points"]):
        s = derive_seed(seed, k)
        est = fisher_metric_mc(p["domain"], z, p["n"], s)
        g = bergman_metric(p["domain"], z)
        rec = {"domain": p["domain"].to_config(), "point": _jsonable(z), "n": p["n"], "seed": s,
               "estimate": est.to_dict(), "target": _jsonable(g), "z_score": est.z_score(g)}
        ok = est.within(g)
        if p["max_rel_stderr"] is not None:
            rel = float(np.max(np.diag(est.stderr) / np.abs(np.diag(g))))
            rec["rel_stderr"] = rel
            ok = ok and rel < p["max_rel_stderr"]
        rec["pass"] = bool(ok)
        out.append(rec)
    return out


def _prep_identities(c):
    d = c.domain()
    ids = c.raw("identities", list(IDENTITIES))
    unknown = [i for i in ids if i not in IDENTITIES] if isinstance(ids, list) else ids
    if unknown:
        raise ConfigError(f"{c.where('identities')}: unknown identity ids {unknown!r}")
    return {"domain": d, "points": c.points("points", d, c.seed), "n": _budget(c, "n"),
            "identities": ids, "indices": c.raw("indices", None), "retry": c.boolean("retry", True)}


def _run_identities(p, seed):
    reps = identity_suite(p["domain"], p["points"], p["n"], seed, identity_ids=p["identities"],
                          indices=p["indices"], retry=p["retry"])
    return [dict(r.to_dict(), domain=p["domain"].to_config()) for r in reps]


def _prep_curvature(c):
    d = c.domain()
    alpha = c.integer("alpha", 1, maximum=d.n)
    return {"domain": d, "points": c.points("points", d, c.seed), "n": _budget(c, "n"), "alpha": alpha}


def _run_curvature(p, seed):
    out = []
    for k, z in enumerate(p["points"]):
        s = derive_seed(seed, k)
        d = p["domain"]
        exact = holo_sectional_curvature(d, z, p["alpha"])
        oracle = holo_sectional_curvature_fd(d, z, p["alpha"])
        est = curvature_mc(d, z, p["n"], s, alpha=p["alpha"])
        out.append({
            "domain": d.to_config(), "point": _jsonable(z), "alpha": p["alpha"], "n": p["n"], "seed": s,
            "analytic": exact, "finite_difference": oracle, "estimate": est.to_dict(),
            "z_score": est.z_score(exact),
            "below_two": bool(est.mean <= 2.0 + 3.0 * est.stderr),
            "pass": bool(est.within(exact) and est.mean <= 2.0 + 3.0 * est.stderr
                         and abs(exact - oracle) < 1e-6 * max(1.0, abs(exact))),
        })
    return out


def _prep_divergence(c):
    d = c.domain()
    mode = c.choice("mode", ("kl", "alpha-invariance"), "kl")
    p = {"domain": d, "mode": mode, "n": _budget(c, "n")}
    if mode == "kl":
        if c.has("pairs"):
            pairs = c.raw("pairs")
            if not isinstance(pairs, list) or not pairs:
                raise ConfigError(f"{c.where('pairs')}: expected a non-empty list of [z, w] pairs")
            p["pairs"] = [(c.point(a, d, f"{c.where('pairs')}[{i}][0]"), c.point(b, d, f"{c.where('pairs')}[{i}][1]"))
                          for i, (a, b) in enumerate(pairs)]
        else:
            spec = _Case(c.raw("random_pairs"), c.where("random_pairs"))
            count = spec.integer("count")
            radius = spec.number("radius", lo=0.0, hi=0.95)
            pts = radius * uniform_box_sample(d, derive_seed(c.seed, 101), 2 * count)
            p["pairs"] = [(pts[2 * i], pts[2 * i + 1]) for i in range(count)]
    else:
        if d.kind != "disc":
            raise ConfigError(f"{c.where('domain')}: alpha-invariance uses a disc automorphism")
        p["z"] = c.point(c.raw("z"), d, c.where("z"))
        p["w"] = c.point(c.raw("w"), d, c.where("w"))
        alphas = c.raw("alphas")
        if not isinstance(alphas, list) or not all(isinstance(a, (int, float)) for a in alphas):
            raise ConfigError(f"{c.where('alphas')}: expected a list of numbers")
        p["alphas"] = [float(a) for a in alphas]
        a = c.point(c.raw("automorphism", 0.3), d, c.where("automorphism"))[0]
        p["a"] = a
    return p


def _mobius(a):
    return lambda x: (x - a) / (1.0 - np.conj(a) * x)


def _run_divergence(p, seed):
    d = p["domain"]
    out = []
    if p["mode"] == "kl":
        for k, (z, w) in enumerate(p["pairs"]):
            s = derive_seed(seed, k)
            est = kl_divergence_mc(d, z, w, p["n"], s)
            target = diastasis(d, z, w)
            out.append({"domain": d.to_config(), "z": _jsonable(z), "w": _jsonable(w), "n": p["n"], "seed": s,
                        "estimate": est.to_dict(), "target": target, "z_score": est.z_score(target),
                        "pass": est.within(target)})
        return out
    f = _mobius(p["a"])
    for k, alpha in enumerate(p["alphas"]):
        s1, s2 = derive_seed(seed, 2 * k), derive_seed(seed, 2 * k + 1)
        before = alpha_divergence_mc(d, p["z"], p["w"], alpha, p["n"], s1)
        after = alpha_divergence_mc(d, f(p["z"]), f(p["w"]), alpha, p["n"], s2)
        out.append({"domain": d.to_config(), "alpha": alpha, "z": _jsonable(p["z"]), "w": _jsonable(p["w"]),
                    "automorphism": _jsonable(p["a"]), "n": p["n"], "seeds": [s1, s2],
                    "before": before.to_dict(), "after": after.to_dict(),
                    "joint_stderr": float(np.hypot(before.stderr, after.stderr)),
                    "pass": joint_agree(before, after)})
    return out


def _prep_maps(c):
    d = c.domain()
    check = c.choice("check", ("pullback", "bell", "k-inequality", "lower-bound", "diagram"))
    maps = c.raw("maps", None)
    if maps is None:
        maps = [c.raw("map")]
    try:
        pmaps = [ProperMap.from_config(m) for m in maps]
        for m in pmaps:
            m.check_domain(d)
    except (ValueError, TypeError, BergstatError) as exc:
        raise ConfigError(f"{c.where('map')}: {exc}") from None
    p = {"domain": d, "check": check, "maps": pmaps}
    if check == "pullback":
        p["points"] = c.points("points", d, c.seed)
        p["n"] = _budget(c, "n")
        p["expect"] = c.choice("expect", ("equal", "strict", "monotone"), "monotone")
        p["report_relation"] = c.boolean("report_relation", False)
    else:
        p["pairs"] = _grid(c, d)
        p["tolerance"] = c.number("tolerance", 1e-10, lo=0.0)
    return p


def _grid(c, d):
    """``(z, zeta)`` pairs: explicit ``pairs`` or ``random_grid: {"count", "radius"}``."""
    if c.has("pairs"):
        return [(c.point(a, d, f"{c.where('pairs')}[{i}][0]"), c.point(b, d, f"{c.where('pairs')}[{i}][1]"))
                for i, (a, b) in enumerate(c.raw("pairs"))]
    spec = _Case(c.raw("random_grid"), c.where("random_grid"))
    count = spec.integer("count")
    radius = spec.number("radius", lo=0.0, hi=0.95)
    pts = radius * uniform_box_sample(d, derive_seed(c.seed, 101), 2 * count)
    return [(pts[2 * i], pts[2 * i + 1]) for i in range(count)]


def _run_maps(p, seed):
    d = p["domain"]
    out = []
    for mi, pmap in enumerate(p["maps"]):
        if p["check"] == "pullback":
            for k, z in enumerate(p["points"]):
                s = derive_seed(seed, mi * 1000 + k)
                est = pullback_fisher_mc(pmap, d, z, p["n"], s)
                g = bergman_metric(d, z)
                diag, se, gd = np.diag(est.mean).real, np.diag(est.stderr), np.diag(g).real
                monotone = bool(np.all(diag <= gd + 3 * se + 1e-12))
                if p["expect"] == "equal":
                    ok = est.within(g)
                elif p["expect"] == "strict":
                    ok = bool(np.all(gd - diag > 3 * se))
                else:
                    ok = True
                rec = {"domain": d.to_config(), "map": pmap.to_config(), "point": _jsonable(z), "n": p["n"],
                       "seed": s, "expect": p["expect"], "estimate": est.to_dict(), "target": _jsonable(g),
                       "gap": _jsonable(gd - diag), "monotone": monotone, "pass": bool(ok and monotone)}
                if p["report_relation"]:
                    rel = pullback_relation_mc(pmap, d, z, p["n"], derive_seed(s, 1))
                    rec["relation"] = rel.to_dict()
                out.append(rec)
            continue
        vals = []
        for z, zeta in p["pairs"]:
            if p["check"] == "bell":
                vals.append(bell_rule_check(pmap, d, d, z, zeta))
            elif p["check"] == "k-inequality":
                r = k_inequality_check(pmap, d, z, zeta)
                vals.append((r.lhs - r.rhs) / max(r.rhs, 1e-300))
            elif p["check"] == "lower-bound":
                dens, bound = lower_bound_check(pmap, d, z, zeta)
                vals.append(float((bound[0] - dens[0]) / dens[0]))
            else:
                vals.append(float(diagram_gap(pmap, d, z, zeta)[0]))
        vals = np.array(vals)
        if p["check"] == "bell":
            ok, stat = bool(vals.max() < p["tolerance"]), float(vals.max())
        elif p["check"] == "diagram":
            stat = float(vals.max())
            ok = stat < p["tolerance"] if pmap.kind == "identity" else stat > p["tolerance"]
        else:
            # inequality checks: signed relative excess must not be positive
            stat = float(vals.max())
            ok = stat <= p["tolerance"]
        out.append({"domain": d.to_config(), "map": pmap.to_config(), "check": p["check"],
                    "grid_size": len(vals), "statistic": stat, "values": vals.tolist(),
                    "tolerance": p["tolerance"], "pass": bool(ok)})
    return out


def _prep_consistency(c):
    d = c.domain()
    sched = c.raw("m_schedule")
    if not isinstance(sched, list) or len(sched) < 2 or not all(isinstance(m, int) and m >= 2 for m in sched) \
            or any(b <= a for a, b in zip(sched, sched[1:])):
        raise ConfigError(f"{c.where('m_schedule')}: expected an increasing list of integers >= 2")
    ratio = c.raw("ratio_range", None)
    return {"domain": d, "z0": c.point(c.raw("z0"), d, c.where("z0")), "m_schedule": sched,
            "R_rep": _budget(c, "R_rep", maximum=MAX_R_REP), "ratio_range": ratio}


def _run_consistency(p, seed):
    tab = consistency_experiment(p["domain"], p["z0"], p["m_schedule"], p["R_rep"], seed)
    rec = dict(tab.to_dict(), domain=p["domain"].to_config())
    ok = tab.strictly_decreasing() and tab.failure_rate < MAX_FAILURE_RATE
    if p["ratio_range"]:
        lo, hi = p["ratio_range"]
        errs = [r.mean_abs_error for r in tab.rows]
        ratios = [b / a for a, b in zip(errs, errs[1:])]
        rec["ratios"] = ratios
        ok = ok and all(lo < r < hi for r in ratios)
    rec["pass"] = bool(ok)
    return [rec]


def _prep_clt(c):
    d = c.domain()
    z0 = c.point(c.raw("z0"), d, c.where("z0"))
    if np.max(d.block_norms(z0)) > 0.9:
        raise ConfigError(f"{c.where('z0')}: the CLT experiment needs |z0| <= 0.9")
    return {"domain": d, "z0": z0, "m": _budget(c, "m", minimum=100),
            "R_rep": _budget(c, "R_rep", maximum=MAX_R_REP),
            "rtol": c.number("rtol", CLT_RTOL, lo=0.0), "ks_level": c.number("ks_level", KS_LEVEL, lo=0.0, hi=1.0),
            "check_relation": c.boolean("check_relation", False), "csv": c.raw("csv", None)}


def _run_clt(p, seed):
    rep = clt_experiment(p["domain"], p["z0"], p["m"], p["R_rep"], seed)
    if p["csv"]:
        rep.to_csv(p["csv"])
    kw = {"rtol": p["rtol"], "ks_level": p["ks_level"], "check_relation": p["check_relation"]}
    rec = dict(rep.to_dict(**kw), domain=p["domain"].to_config())
    rec["pass"] = rep.passed(**kw)
    return [rec]


def _prep_determinism(c):
    names = c.raw("configs")
    if not isinstance(names, list) or not names:
        raise ConfigError(f"{c.where('configs')}: expected a non-empty list of config names")
    for nm in names:
        if nm not in _paper_config_names():
            raise ConfigError(f"{c.where('configs')}: no shipped config named {nm!r}")
    return {"configs": names}


def _run_determinism(p, seed, previous=None):
    out = []
    for nm in p["configs"]:
        cfg = load_config(_paper_config_path(nm))
        first = previous.get(nm) if previous else None
        if first is None:
            first = run_config(cfg)
        second = run_config(cfg)
        same = numeric_content(first) == numeric_content(second)
        out.append({"config": nm, "identical": same, "pass": same})
    return out


KINDS = {
    "kernel-oracle": (_prep_kernel_oracle, _run_kernel_oracle),
    "fisher": (_prep_fisher, _run_fisher),
    "identities": (_prep_identities, _run_identities),
    "curvature": (_prep_curvature, _run_curvature),
    "divergence": (_prep_divergence, _run_divergence),
    "maps": (_prep_maps, _run_maps),
    "consistency": (_prep_consistency, _run_consistency),
    "clt": (_prep_clt, _run_clt),
    "determinism": (_prep_determinism, _run_determinism),
}


# -- loading and running --------------------------------------------------------------

def load_config(path):
    """Read a config file; raises :class:`ConfigError` on any problem."""
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config: expected a JSON object")
    return cfg


def prepare(cfg):
    """Validate a config; returns ``[(case_path, run_fn, params, seed)]``."""
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind: expected one of {sorted(KINDS)}, got {kind!r}")
    base = _Case(cfg, "config")
    seed = base.integer("seed", minimum=0, maximum=2 ** 64 - 1)
    defaults = {k: v for k, v in cfg.items() if k not in _META}
    cases = cfg.get("cases", [{}])
    if not isinstance(cases, list) or not cases:
        raise ConfigError("cases: expected a non-empty list")
    prep, run = KINDS[kind]
    jobs = []
    for i, case in enumerate(cases):
        if not isinstance(case, dict):
            raise ConfigError(f"cases[{i}]: expected an object")
        merged = dict(defaults, **case)
        c = _Case(merged, f"cases[{i}]")
        c.seed = c.integer("seed", minimum=0, maximum=2 ** 64 - 1) if "seed" in case else derive_seed(seed, i)
        jobs.append((c.path, run, prep(c), c.seed))
    return jobs


def run_config(cfg, threads=1, previous=None, on_record=None):
    """Run a config and return its report dict (raises ConfigError before running anything)."""
    jobs = prepare(cfg)
    t0 = time.perf_counter()
    report = {
        "name": cfg.get("name", cfg["kind"]),
        "kind": cfg["kind"],
        "library_version": __version__,
        "seed": cfg["seed"],
        "config": cfg,
        "cases": [],
        "interrupted": False,
    }

    def execute(job):
        path, run, params, seed = job
        if cfg["kind"] == "determinism":
            records = run(params, seed, previous=previous)
        else:
            records = run(params, seed)
        return {"case": path, "seed": seed, "records": records}

    try:
        if threads > 1 and len(jobs) > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
                for res in pool.map(execute, jobs):
                    report["cases"].append(res)
                    if on_record:
                        on_record(report)
        else:
            for job in jobs:
                report["cases"].append(execute(job))
                if on_record:
                    on_record(report)
    except KeyboardInterrupt:
        report["interrupted"] = True
    report["pass"] = bool(not report["interrupted"]
                          and all(r["pass"] for case in report["cases"] for r in case["records"]))
    report["wall_clock_seconds"] = time.perf_counter() - t0
    return report


def numeric_content(report):
    """The report without its wall-clock fields, as canonical JSON (for determinism checks)."""
    def strip(obj):
        if isinstance(obj, dict):
            return {k: strip(v) for k, v in obj.items() if k not in ("wall_clock_seconds", "seconds")}
        if isinstance(obj, list):
            return [strip(v) for v in obj]
        return obj
    return dumps(strip(report))


def _default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _jsonable(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(report):
    return json.dumps(report, sort_keys=True, indent=2, default=_default, ensure_ascii=False)


def write_report(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(dumps(report) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def summary_lines(report):
    """One table per report: a row per record with its key statistic and verdict."""
    lines = [f"== {report['name']} ({report['kind']}) -> {'PASS' if report['pass'] else 'FAIL'}"
             f"  [{report.get('wall_clock_seconds', 0.0):.1f} s]"]
    lines.append(f"   {'case':<10} {'item':<44} {'statistic':>14}  verdict")
    for case in report["cases"]:
        for r in case["records"]:
            item, stat = _describe(report["kind"], r)
            lines.append(f"   {case['case']:<10} {item:<44.44} {stat:>14}  {'ok' if r['pass'] else 'FAIL'}")
    if report.get("interrupted"):
        lines.append("   (interrupted: partial report)")
    return lines


def _fmt(x):
    return "-" if x is None else f"{x:.4g}"


def _pt(x):
    """Compact text for a point stored by ``_jsonable``."""
    if isinstance(x, dict):
        vals = [complex(a, b) for a, b in zip(x["re"], x["im"])]
    else:
        vals = [complex(v) for v in np.atleast_1d(x)]
    txt = ",".join(f"{v.real:.3g}" if not v.imag else f"{v.imag:.3g}j" if not v.real
                   else f"{v.real:.3g}{v.imag:+.3g}j" for v in vals)
    return f"({txt})"


def _describe(kind, r):
    dom = Domain.from_config(r["domain"]) if "domain" in r else None
    if kind == "kernel-oracle":
        return str(dom), _fmt(r["max_rel_error"])
    if kind in ("fisher", "curvature", "divergence") and "z_score" in r:
        where = _pt(r["point"]) if "point" in r else f"{_pt(r['z'])} {_pt(r['w'])}"
        return f"{dom} {where}", f"z={_fmt(r['z_score'])}"
    if kind == "divergence":
        diff = abs(r["before"]["mean"] - r["after"]["mean"])
        return f"alpha={r['alpha']}", f"z={_fmt(diff / r['joint_stderr'])}"
    if kind == "identities":
        return f"{dom} {_pt(r['point'])} {r['identity_id']}{tuple(r['indices'])}", f"z={_fmt(r['z_score'])}"
    if kind == "maps":
        if "check" in r:
            return f"{r['map']['kind']}{r['map'].get('k', '')} {r['check']}", _fmt(r["statistic"])
        return f"{r['map']['kind']}{r['map'].get('k', '')} {_pt(r['point'])} {r['expect']}", _fmt(max(r["gap"]))
    if kind == "consistency":
        return f"{dom} z0={_pt(r['z0'])}", " ".join(f"{row['mean_abs_error']:.3g}" for row in r["rows"])
    if kind == "clt":
        return f"{dom} z0={_pt(r['z0'])}", f"rel={_fmt(r['gamma_rel_error'])}"
    if kind == "determinism":
        return r["config"], str(r["identical"])
    return "", ""


# -- suites -------------------------------------------------------------------------------

def _paper_dir():
    return resources.files("bergstat") / "configs" / "paper"


def _paper_config_names():
    return sorted(p.name[:-5] for p in _paper_dir().iterdir() if p.name.endswith(".json"))


def _paper_config_path(name):
    return _paper_dir() / f"{name}.json"


def smoke_config(cfg):
    """Shrink budgets to ``n <= 1e4`` and ``R_rep <= 100``; CLT tolerance scales as ``1/sqrt(R_rep)``."""
    cfg = json.loads(json.dumps(cfg))

    def shrink(d):
        if "n" in d:
            d["n"] = min(int(d["n"]), SMOKE_N)
        if "R_rep" in d:
            old = int(d["R_rep"])
            d["R_rep"] = min(old, SMOKE_R_REP)
            if cfg["kind"] == "clt":
                d["rtol"] = float(d.get("rtol", CLT_RTOL)) * math.sqrt(old / d["R_rep"])

    shrink(cfg)
    for case in cfg.get("cases", []):
        shrink(case)
    if cfg["kind"] == "clt":
        cfg.setdefault("rtol", CLT_RTOL * math.sqrt(2000 / SMOKE_R_REP))
    return cfg


def run_suite(name, out_dir, threads=1, echo=print):
    """Run every shipped config; returns the exit code."""
    if name not in ("smoke", "paper"):
        raise ConfigError(f"suite: expected 'smoke' or 'paper', got {name!r}")
    names = _paper_config_names()
    configs = {nm: load_config(_paper_config_path(nm)) for nm in names}
    if name == "smoke":
        configs = {nm: smoke_config(c) for nm, c in configs.items() if c["kind"] != "determinism"}
    for cfg in configs.values():
        prepare(cfg)
    out_dir = Path(out_dir)
    reports, ok = {}, True
    for nm, cfg in configs.items():
        path = out_dir / f"{nm}.json"
        rep = run_config(cfg, threads=threads, previous=reports,
                         on_record=lambda r, path=path: write_report(r, path))
        write_report(rep, path)
        reports[nm] = rep
        for line in summary_lines(rep):
            echo(line)
        ok = ok and rep["pass"]
        if rep["interrupted"]:
            raise KeyboardInterrupt
    return 0 if ok else 1


# -- entry point -------------------------------------------------------------------------

def _threads(value):
    if value is None:
        value = os.environ.get(THREADS_ENV, "1")
    try:
        k = int(value)
    except ValueError:
        raise ConfigError(f"--threads / {THREADS_ENV}: expected a positive integer, got {value!r}") from None
    if k < 1:
        raise ConfigError(f"--threads / {THREADS_ENV}: expected a positive integer, got {value!r}")
    return k


def build_parser():
    parser = argparse.ArgumentParser(prog="bergstat", description="Bergman-kernel statistical experiments")
    parser.add_argument("--version", action="version", version=f"bergstat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("config")
    run.add_argument("--out", help="report path (default: reports/<config name>.json)")
    run.add_argument("--threads", help=f"worker threads (default: ${THREADS_ENV} or 1)")
    suite = sub.add_parser("suite", help="run a bundled suite")
    suite.add_argument("suite")
    suite.add_argument("--out", help="report directory (default: reports/<suite>)")
    suite.add_argument("--threads", help=f"worker threads (default: ${THREADS_ENV} or 1)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        threads = _threads(args.threads)
        if args.command == "suite":
            return run_suite(args.suite, args.out or Path("reports") / args.suite, threads=threads)
        cfg = load_config(args.config)
        prepare(cfg)
        out = Path(args.out) if args.out else Path("reports") / f"{Path(args.config).stem}.json"
        report = run_config(cfg, threads=threads, on_record=lambda r: write_report(r, out))
        write_report(report, out)
        for line in summary_lines(report):
            print(line)
        if report["interrupted"]:
            return 130
        return 0 if report["pass"] else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("interrupted; partial reports were written", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
