"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The default verify suite runs once per session (about three minutes on one
core); every test reads the claims that belong to its criterion and checks
them against the criterion's own thresholds. The determinism criterion
runs the whole suite a second time.
"""

import pytest

from eseplab import verify as vf


@pytest.fixture(scope="module")
def reports():
    return {r.claim_id: r for r in vf.run_suite(vf.default_suite(vf.MASTER_SEED))}


def check(label, items):
    """items: (claim_id or description, observed, threshold, ok). Prints one line per item and a verdict."""
    ok_all = True
    for name, observed, threshold, ok in items:
        print(f"  {'ok  ' if ok else 'MISS'} {name}: observed={observed:.6g} threshold={threshold:.6g}")
        ok_all &= bool(ok)
    print(f"{'PASS' if ok_all else 'FAIL'} {label}")
    return ok_all


def below(reports, cid, thr, strict=True):
    x = reports[cid].observed
    return cid, x, thr, (x < thr) if strict else (x <= thr)


def above(reports, cid, thr):
    x = reports[cid].observed
    return cid, x, thr, x > thr


def test_ac01_steady_state_law(reports):
    r = reports["esep-steady-negbin"]
    assert check("AC1 steady-state negative binomial", [
        below(reports, "esep-steady-negbin", 0.02),
        ("esep-steady-negbin runtime [s]", r.runtime, 60.0, r.runtime < 60.0),
    ])


def test_ac02_mean_equality_and_variance_order(reports):
    assert check("AC2 mean equality and variance ordering", [
        below(reports, "esep-hawkes-mean-equality", 3.0),
        below(reports, "esep-hawkes-variance-order", 3.0, strict=False),
        below(reports, "moment-ode-mean-equality", 1e-8, strict=False),
        below(reports, "moment-ode-variance-order", 1e-8, strict=False),
    ])


def test_ac03_transient_transforms(reports):
    assert check("AC3 transient transforms", [
        below(reports, cid, 3.0, strict=False)
        for cid in ("transient-intensity-mgf", "transient-counting-pgf", "transient-joint-pgf")
    ])


def test_ac04_matrix_pmf(reports):
    assert check("AC4 matrix PMF", [
        below(reports, "matrix-pmf-simulation", 3.0, strict=False),
        below(reports, "matrix-pmf-series", 1e-6, strict=False),
    ])


def test_ac05_branching_laws(reports):
    items = []
    for m in ("esep", "hawkes"):
        items += [above(reports, f"progeny-{m}-chi2", 0.01), above(reports, f"generations-{m}-chi2", 0.01),
                  below(reports, f"progeny-{m}-mean", 3.0, strict=False)]
    assert check("AC5 branching laws", items)


def test_ac06_family_decomposition(reports):
    assert check("AC6 family decomposition", [below(reports, "family-decomposition", 1e-10, strict=False)])


def test_ac07_sis_convergence(reports):
    assert check("AC7 SIS convergence", [
        below(reports, "sis-tv-monotone", 2.0, strict=False),
        below(reports, "sis-tv-largest", 0.02),
    ])


def test_ac08_batch_scaling(reports):
    # set 1 is expected to miss: the n-GESEP intensity keeps an atom at the
    # baseline (mass P(Q = 0), about 0.17 at n = 8) that the continuous Hawkes
    # intensity lacks, so the KS distance cannot fall below it at n = 8
    assert check("AC8 batch scaling", [
        below(reports, "batch-scaling-improves-set1", 0.0),
        below(reports, "batch-scaling-ks8-set1", 0.05, strict=False),
        below(reports, "batch-scaling-improves-set2", 0.0),
        below(reports, "batch-scaling-ks8-set2", 0.05, strict=False),
    ])


def test_ac09_hesep_sandwich_and_renewal(reports):
    assert check("AC9 HESEP sandwich and renewal", [
        below(reports, "hesep-sandwich", 3.0, strict=False),
        below(reports, "hesep-renewal", 0.01),
    ])


def test_ac10_diffusion_bracket(reports):
    assert check("AC10 diffusion bracket", [
        below(reports, "diffusion-bracket-100", 0.0, strict=False),
        below(reports, "diffusion-bracket-1000", 0.0, strict=False),
        below(reports, "diffusion-ratio-gamma-1000", 0.10, strict=False),
    ])


def test_ac11_blocking(reports):
    assert check("AC11 blocking", [
        below(reports, "blocking-pmf-grid", 1e-10, strict=False),
        below(reports, "blocked-fraction", 3.0, strict=False),
        below(reports, "pasta-ratio-monotone", 0.0),
        below(reports, "pasta-ratio-limit", 0.05),
    ])


def test_ac12_determinism(reports):
    again = {r.claim_id: r for r in vf.run_suite(vf.default_suite(vf.MASTER_SEED))}
    items = []
    for cid, r in reports.items():
        same = again[cid].observed == r.observed or (r.observed != r.observed and again[cid].observed != again[cid].observed)
        items.append((f"{cid} rerun difference", again[cid].observed - r.observed if same else float("inf"), 0.0, same))
    assert check("AC12 bit-identical rerun", items)
