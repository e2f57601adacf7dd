"""Acceptance suite: the eleven shipped configs at full budget.

Each criterion runs its config in-process and prints one PASS/FAIL line
(collected in the terminal summary).  Criterion 11 reruns every config and
compares all numerical fields with the first run.
"""

import numpy as np
import pytest

from bergstat import cli

from conftest import ACCEPTANCE_LINES

_REPORTS = {}


def report(name):
    if name not in _REPORTS:
        _REPORTS[name] = cli.run_config(cli.load_config(cli._paper_config_path(name)))
    return _REPORTS[name]


def records(rep):
    return [r for case in rep["cases"] for r in case["records"]]


def verdict(number, title, ok, detail):
    ACCEPTANCE_LINES.append(f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
    assert ok, detail


def test_criterion_01_kernel_oracle():
    rep = report("c01-kernel-oracle")
    recs = records(rep)
    worst = max(r["max_rel_error"] for r in recs)
    kinds = sorted(r["domain"]["kind"] for r in recs)
    ok = (rep["pass"] and kinds == ["ball", "disc", "polydisc"] and all(r["pairs"] == 1000 for r in recs)
          and rep["wall_clock_seconds"] < 10)
    verdict(1, "closed-form vs series kernel", ok,
            f"max rel error {worst:.2e} (tol 1e-8), {rep['wall_clock_seconds']:.1f} s")


def test_criterion_02_fisher_metric():
    rep = report("c02-fisher")
    recs = records(rep)
    center = next(r for r in recs if r["domain"]["kind"] == "disc" and r["point"] == [0.0])
    per_kind = {k: sum(r["domain"]["kind"] == k for r in recs) for k in ("disc", "polydisc", "ball")}
    ok = (rep["pass"] and all(v == 5 for v in per_kind.values()) and all(r["n"] == 10 ** 6 for r in recs)
          and center["rel_stderr"] < 0.01 and rep["wall_clock_seconds"] < 300)
    verdict(2, "Fisher metric equals Bergman metric", ok,
            f"{sum(r['pass'] for r in recs)}/{len(recs)} points within 3 se, max z {max(r['z_score'] for r in recs):.2f},"
            f" center rel se {center['rel_stderr']:.2e}, {rep['wall_clock_seconds']:.0f} s")


def test_criterion_03_identities():
    rep = report("c03-identities")
    recs = records(rep)
    ids = {r["identity_id"] for r in recs}
    retried = sum(r["attempts"] > 1 for r in recs)
    ok = rep["pass"] and len(ids) == 16 and len(recs) == 16 * 9 and rep["wall_clock_seconds"] < 1200
    verdict(3, "expectation identities", ok,
            f"{sum(r['pass'] for r in recs)}/{len(recs)} pass ({retried} retried),"
            f" max z {max(r['z_score'] for r in recs):.2f}, {rep['wall_clock_seconds']:.0f} s")


def test_criterion_04_curvature():
    rep = report("c04-curvature")
    recs = records(rep)
    ok = rep["pass"] and len(recs) == 2 and all(r["below_two"] for r in recs)
    detail = ", ".join(f"{r['domain']['kind']}: {r['estimate']['mean']:.4f} vs {r['analytic']:.4f}" for r in recs)
    verdict(4, "holomorphic sectional curvature", ok, detail)


def test_criterion_05_kl_divergence():
    rep = report("c05-kl")
    recs = records(rep)
    counts = {k: sum(r["domain"]["kind"] == k for r in recs) for k in ("disc", "ball")}
    ok = rep["pass"] and counts == {"disc": 10, "ball": 5}
    verdict(5, "KL divergence equals diastasis", ok,
            f"{sum(r['pass'] for r in recs)}/{len(recs)} pairs, max z {max(r['z_score'] for r in recs):.2f}")


def test_criterion_06_alpha_invariance():
    rep = report("c06-alpha-invariance")
    recs = records(rep)
    ok = rep["pass"] and sorted(r["alpha"] for r in recs) == [-1.0, 0.0, 0.5, 1.0]
    zs = [abs(r["before"]["mean"] - r["after"]["mean"]) / r["joint_stderr"] for r in recs]
    verdict(6, "alpha-divergence automorphism invariance", ok, f"max joint z {max(zs):.2f} over 4 alphas")


def test_criterion_07_pullback():
    rep = report("c07-pullback")
    recs = records(rep)
    equal = [r for r in recs if r["expect"] == "equal"]
    strict = [r for r in recs if r["expect"] == "strict"]
    ok = (rep["pass"] and equal and all(r["map"]["kind"] == "identity" for r in equal)
          and sorted(r["point"][0] for r in strict) == [0.0, 0.5])
    gaps = ", ".join(f"z={r['point'][0]}: gap {r['gap'][0]:.3f}" for r in strict)
    verdict(7, "pullback monotonicity and strictness", ok, f"identity equal; power(2) {gaps}")


def test_criterion_08_bell_rule():
    rep = report("c08-bell")
    recs = records(rep)
    ok = rep["pass"] and sorted(r["map"]["k"] for r in recs) == [2, 3] and all(r["grid_size"] == 20 for r in recs)
    verdict(8, "kernel transformation rule", ok, f"max residual {max(r['statistic'] for r in recs):.2e} (tol 1e-10)")


def test_criterion_09_consistency():
    rep = report("c09-consistency")
    recs = records(rep)
    ok = rep["pass"] and all([row["m"] for row in r["rows"]] == [50, 200, 800] and r["R_rep"] == 200 for r in recs)
    detail = "; ".join(f"z0={r['z0'][0]}: " + " > ".join(f"{row['mean_abs_error']:.4f}" for row in r["rows"])
                       + f" (fail rate {r['failure_rate']:.3f})" for r in recs)
    verdict(9, "estimator consistency", ok, detail)


def test_criterion_10_clt():
    rep = report("c10-clt")
    recs = records(rep)
    ok = rep["pass"] and all(r["m"] == 200 and r["R_rep"] == 2000 for r in recs) and rep["wall_clock_seconds"] < 1800
    ok = ok and "relation" in recs[0]["checks"]
    detail = "; ".join(f"{r['domain']['kind']} z0={r['z0']}: rel {r['gamma_rel_error']:.3f},"
                       f" min KS p {min(r['ks_pvalues']):.3f}" for r in recs)
    verdict(10, "asymptotic normality", ok, detail)


def test_criterion_11_determinism():
    cfg = cli.load_config(cli._paper_config_path("c11-determinism"))
    names = cfg["configs"]
    first = {nm: report(nm) for nm in names}
    rep = cli.run_config(cfg, previous=first)
    recs = records(rep)
    ok = rep["pass"] and [r["config"] for r in recs] == names
    same = sum(r["identical"] for r in recs)
    verdict(11, "bit-exact rerun of the paper suite", ok, f"{same}/{len(recs)} reports identical apart from wall-clock")
    assert np.all([r["identical"] for r in recs])
