"""Acceptance criteria, each at its stated tolerance.

Every test prints one PASS/FAIL line; the lines are repeated in the
terminal summary. Criteria 1 and 2 are full-length reproductions and take
tens of minutes together.
"""

import math

import numpy as np
import pytest

from herdlab.experiments import (
    Fig1Settings,
    Fig3Settings,
    check_jump_vs_detailed_balance,
    decomposition_stats,
    estimator_stats,
    jump_vs_sde_distance,
    offdiag_ratio,
    run_reproduce_fig1,
    run_reproduce_fig3,
    xi_oracle_vs_sde_distance,
)

FIG1_EPS2 = (0.5, 1.0, 1.5, 2.0, 3.0)


@pytest.mark.slow
def test_criterion_1_exponent_sweep(tmp_path, report):
    s = Fig1Settings(eps2_values=FIG1_EPS2)
    rows = run_reproduce_fig1(tmp_path, s)["rows"]
    parts, ok = [], True
    for r in rows:
        # the density comes from a time-weighted occupation histogram updated
        # at every integration step, so steps count as effective samples
        samples = min(r["pdf_steps"], r["psd_samples"])
        good = (r["lambda_error"] <= 0.2 and r["beta_error"] <= 0.2 and r["beta_fit_decades"] >= 1.5
                and samples >= 1e7)
        ok &= good
        parts.append(f"eps2={r['eps2']:g} lambda {r['lambda_hat']:.3f}/{r['lambda_theory']:.2f} "
                     f"beta {r['beta_hat']:.3f}/{r['beta_theory']:.2f}{'' if good else ' (out)'}")
    report(1, ok, "; ".join(parts) + " [tol 0.2]")
    assert ok


@pytest.mark.slow
def test_criterion_2_fractured_spectrum(tmp_path, report):
    summary = run_reproduce_fig3(tmp_path, Fig3Settings())
    p = summary["primary"]
    fr = p.get("fracture", {})
    lam = p.get("lambda_hat", math.nan)
    b1, b2 = fr.get("beta1", math.nan), fr.get("beta2", math.nan)
    gain = fr.get("improvement", math.nan)
    lo, hi = fr.get("fit_range", (math.nan, math.nan))
    fb = fr.get("f_break", math.nan)
    ok = (abs(lam - 3.67) <= 0.35 and abs(b1 - 1.42) <= 0.25 and abs(b2 - 0.41) <= 0.25
          and gain >= 0.2 and lo < fb < hi and summary["seconds"] <= 1800)
    report(2, ok, f"lambda {lam:.3f} (3.67+-0.35), beta1 {b1:.3f} (1.42+-0.25), beta2 {b2:.3f} "
                  f"(0.41+-0.25), f_break {fb:.3g}, two-slope gain {gain:.1%} (>=20%), "
                  f"{summary['seconds']:.0f} s")
    assert ok


@pytest.mark.slow
def test_criterion_3_micro_macro(report):
    d = jump_vs_sde_distance(1000, 2000.0)
    tv = check_jump_vs_detailed_balance("full")
    ok = d["ks"] < 0.05 and tv.passed
    report(3, ok, f"N=1000 jump vs SDE KS {d['ks']:.4f} (<0.05); N=20 jump vs detailed balance "
                  f"TV {tv.value:.4f} (<0.02)")
    assert ok


def test_criterion_4_three_state_oracle(report):
    d = xi_oracle_vs_sde_distance(60, 200.0)
    ok = d["ks"] < 0.07
    report(4, ok, f"N=60 xi marginal vs SDE KS {d['ks']:.4f} (<0.07)")
    assert ok


def test_criterion_5_decomposition(report):
    d = decomposition_stats(1000)
    ratio = d["max_offdiag_ratio"]
    shrink = offdiag_ratio(1e4, 0.2) / ratio
    ok = d["max_residual"] <= 1e-12 and ratio <= 0.15
    report(5, ok, f"max residual {d['max_residual']:.2e} (<=1e-12) over 1000 cases; off-diagonal ratio "
                  f"{ratio:.3f} (<=0.15) at H=100 for fractions >= 0.2; H=1e4 shrinks it x{shrink:.3f}")
    assert ok
    assert shrink == pytest.approx(0.1, rel=0.3)


def test_criterion_6_estimators(report):
    d = estimator_stats()
    ok = (abs(d["white_beta"]) < 0.05 and abs(d["powerlaw_lambda"] - 3.0) <= 0.05
          and abs(d["beta1"] - 1.4) <= 0.05 and abs(d["beta2"] - 0.4) <= 0.05
          and 0.5 <= d["f_break"] / 1e-2 <= 2.0)
    report(6, ok, f"white beta {d['white_beta']:.4f}, lambda {d['powerlaw_lambda']:.4f}, "
                  f"beta1 {d['beta1']:.4f}, beta2 {d['beta2']:.4f}, f_break {d['f_break']:.3g} (true 0.01)")
    assert ok
