"""The eight acceptance criteria, each at its stated tolerance.

Every check records a PASS/FAIL line (printed, and summarised at the end of
the run).  Checks that cannot hold at desk scale are strict xfails: they still
run at the stated tolerance and would turn the suite red if they started to
pass unnoticed.
"""

import json
import math
import time
from fractions import Fraction as F

import numpy as np
import pytest

from torus_ci import blocks as B
from torus_ci import cli, hardy, nash
from torus_ci import step as S
from torus_ci.spectral import random_band_limited

EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# 1. exponent table


def _display(alpha):
    return {
        "R_lin1": [F(-9), F(-17, 2), -(alpha + 11), F(-1), -(alpha + F(13, 2))],
        "R_lin2": [F(-5), F(-9, 2), -(alpha + 7), F(-1)],
        "R_lin3": [F(-10), F(-9), -2 * (alpha + 7), F(-2)],
        "R_Y": [-(alpha + 3)],
        "R_Q": [F(-1)],
        "R_g": [F(-1)],
        "R_time": [-2 * alpha - F(7, 2), F(-1, 2)],
    }


@pytest.mark.parametrize("alpha, s", [(F(20), F(21, 20)), (F(31, 3), F(11, 10))])
def test_criterion_1_exponent_table(accept, tmp_path, alpha, s):
    out = tmp_path / "exp.json"
    argv = ["exponents", "--set", "p=1/2", "--set", "sigma=1/2", "--set", f"alpha={alpha}", "--set", f"s={s}", "--out", str(out)]
    t0 = time.perf_counter()
    cli.main(argv)
    elapsed = time.perf_counter() - t0
    terms = json.loads(out.read_text())["ledger"]["terms"]
    got = {k: [F(e["exponent"]) for e in v] for k, v in terms.items()}
    p = F(1, 2)
    ok = all(got[k] == v for k, v in _display(alpha).items())
    ok &= (-5 + (5 + 2 * alpha) * (1 - 1 / s)) in got["R_delta"]
    ok &= (2 * alpha * (1 - 1 / p) + F(25, 2)) in got["grad_hp"]
    ok &= elapsed < 1.0
    accept(1, f"alpha={alpha}", ok, f"exact match, {elapsed:.3f} s")
    assert ok


# ---------------------------------------------------------------------------
# 2. building-block identities


@pytest.fixture(scope="module")
def block_suite_desk():
    t0 = time.perf_counter()
    suite = B.block_suite(B.BlockParams(4, 2, 4, 16), 256)
    return suite, time.perf_counter() - t0


def test_criterion_2_identities(accept, block_suite_desk):
    suite, elapsed = block_suite_desk
    c = suite["checks"]
    tol = {"flux_identity": 1e-6, "mean_WW": 1e-4, "mean_W": 1e-8, "mean_q": 1e-6}
    ok = all(c[k]["residual"] <= v for k, v in tol.items()) and elapsed < 30
    rel_q = max(suite["raw"]["mean_q"])
    detail = ", ".join(f"{k} {c[k]['residual']:.2g}" for k in tol) + f" (|int q - 1/omega| absolute; relative {rel_q:.2g}), {elapsed:.1f} s"
    accept(2, "identities", ok, detail)
    assert ok


@pytest.mark.xfail(strict=True, reason="shifted bumps overlap at mu1 = 2; disjoint only from mu1 = 8 on")
def test_criterion_2_support_disjoint(accept, block_suite_desk):
    suite, _ = block_suite_desk
    nodes = suite["checks"]["support_disjoint"]["overlap_nodes"]
    accept(2, "support disjointness", nodes == 0, f"{nodes} overlapping grid nodes")
    assert nodes == 0


# ---------------------------------------------------------------------------
# 3. scaling regression

SWEEPS = [
    ("lam", [1, 2, 4, 8], B.BlockParams(1, 2, 4, 16)),
    ("mu1", [1, 2, 4, 8], B.BlockParams(2, 1, 8, 16)),
    ("mu2", [4, 8, 16, 32], B.BlockParams(1, 2, 4, 16)),
]


def test_criterion_3_scaling(accept):
    prof = B.make_phi(B.ProfileSpec())
    t0 = time.perf_counter()
    worst = 0.0
    for s in (1.0, 2.0):
        for name, vals, base in SWEEPS:
            rows = B.measure_scaling(prof, base, name, vals, 512, 0, s, t=0.1)["rows"]
            assert {r["quantity"] for r in rows} == set(B.QUANTITIES)
            worst = max(worst, max(r["error"] for r in rows))
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.05 and elapsed < 300
    accept(3, "slopes", ok, f"max |fitted - theory| {worst:.3g} over 6 quantities x 3 sweeps x s in (1, 2), n=512, {elapsed:.0f} s")
    assert ok


# ---------------------------------------------------------------------------
# 4. time profile


def test_criterion_4_time_profile(accept):
    tp = B.TimeProfile()
    exact = all(tp.int_g2_kappa(k) == 1 and isinstance(tp.int_g2_kappa(k), F) for k in (4, 16, 64))
    worst = 0.0
    for p in (1.0, 1.5, 2.0, 3.0):
        base = B.lp_norm_gauss(tp.g, [0.0, 1.0], p)
        for k in (4, 16, 64):
            got = B.lp_norm_gauss(lambda t: tp.g_kappa(k, 1, t), tp.bump_breakpoints(k, 1), p)
            worst = max(worst, abs(got / (k ** (0.5 - 1 / p) * base) - 1))
    t = np.linspace(0, 1, 257)
    periodic = max(float(np.max(np.abs(tp.h_kappa(k, 1, t + 1) - tp.h_kappa(k, 1, t)))) for k in (4, 16, 64))
    bound = max(float(np.max(np.abs(tp.h_kappa(k, 1, t)))) for k in (4, 16, 64))
    ok = exact and worst <= 1e-8 and periodic <= 1e-12 and bound <= 1.0
    accept(4, "profile", ok, f"int g^2 exact; L^p scaling rel err {worst:.2g}; periodicity {periodic:.2g}; sup |h| {bound:.3f}")
    assert ok


# ---------------------------------------------------------------------------
# 5. one desk step


@pytest.fixture(scope="module")
def desk_steps():
    sc = S.initial_scenario()
    ring = S.ring_l1(sc, 512)
    out = {}
    t0 = time.perf_counter()
    for lam in (4, 8, 16):
        out[lam] = S.step(sc, S.StepParams.desk(lam), S.StepConfig(n=512), R0_ring_l1=ring)
    return out, time.perf_counter() - t0


def test_criterion_5_cross_check(accept, desk_steps):
    steps, _ = desk_steps
    rep = steps[4][1]
    ok = rep.cross_check_max <= 1e-4
    accept(5, "NSR cross-check", ok, f"relative residual {rep.cross_check_max:.2g} at lambda=4, n=512")
    assert ok


def test_criterion_5_l2_bound(accept, desk_steps):
    steps, _ = desk_steps
    rep = steps[4][1]
    ok = rep.u_diff_l2 <= 8 * math.sqrt(10) * math.sqrt(rep.R0_ring_l1) + rep.delta
    accept(5, "L2 bound", ok, f"{rep.u_diff_l2:.3g} <= {rep.l2_bound:.3g}")
    assert ok


def test_criterion_5_frozen_window(accept, desk_steps):
    steps, _ = desk_steps
    st, rep = steps[4]
    ok = all(f["w_zero"] and f["R_zero"] for f in rep.support_flags.values())
    for t in np.linspace(0.0, 0.1875, 7):
        c = st.components(float(t), 512, pressure=False)
        ok &= not np.any(c["w"]) and not np.any(c["R"])
    accept(5, "frozen window", ok, "w and R1 identically zero for t <= t0 - tau")
    assert ok


def test_criterion_5_lambda_trend(accept, desk_steps):
    steps, elapsed = desk_steps
    norms = [steps[lam][1].R1_l1 for lam in (4, 8, 16)]
    ok = norms[0] > norms[1] > norms[2] and elapsed < 600
    accept(5, "lambda trend", ok, "||R1||_L1 = " + ", ".join(f"{x:.3g}" for x in norms) + f" for lambda 4, 8, 16; {elapsed:.0f} s")
    assert ok


# ---------------------------------------------------------------------------
# 6. Hardy suite


def test_criterion_6_hardy(accept):
    t0 = time.perf_counter()
    suite = hardy.hardy_suite(hardy.HardySuiteConfig(n=256))
    elapsed = time.perf_counter() - t0
    c = suite["checks"]
    ok = suite["passed"] and elapsed < 300
    detail = (
        f"unit {c['unit_constant']['max_deviation']:.1g}; atoms {c['atom_bound']['max_ratio']:.3g} <= {c['atom_bound']['constant']}; "
        f"log R^2 {c['log_growth']['r2']:.3f}; Leray {c['leray']['max_relative']:.3g} cap {c['leray']['cap']} drift {c['leray']['drift']:.2g}; {elapsed:.0f} s"
    )
    accept(6, "suite", ok, detail)
    assert ok


# ---------------------------------------------------------------------------
# 7. Nash and amplitudes


def test_criterion_7_gamma(accept):
    rng = np.random.default_rng(2024)
    d = rng.uniform(-0.125, 0.125, (3, 40_000))
    keep = np.sqrt(d[0] ** 2 + d[1] ** 2 + 2 * d[2] ** 2) < 0.125
    d = d[:, keep][:, :10_000]
    A = np.array([[1 + d[0], d[2]], [d[2], 1 + d[1]]])
    err = float(np.max(np.abs(nash.gamma(A).reconstruct() - A)))
    ok = d.shape[1] == 10_000 and err <= 4 * EPS
    accept(7, "gamma", ok, f"max reconstruction error {err:.2g} on 10^4 matrices")
    assert ok


def test_criterion_7_amplitudes(accept):
    worst = 0.0
    for seed in range(5):
        R = random_band_limited(128, 6, seed, (2, 2))
        R, _ = nash.trace_split(0.5 * (R + np.swapaxes(R, 0, 1)))
        a = nash.amplitudes(R, 0.05)
        worst = max(worst, nash.reconstruction_residual(a, R, 0.05))
    sc = S.initial_scenario()
    R0 = nash.trace_split(sc.slice(0.5, 256).R)[0]
    eps = S.ring_l1(sc, 128)
    worst = max(worst, nash.reconstruction_residual(nash.amplitudes(R0, eps), R0, eps))
    ok = worst <= 1e-10
    accept(7, "amplitudes", ok, f"max pointwise residual {worst:.2g}")
    assert ok


# ---------------------------------------------------------------------------
# 8. iteration


@pytest.fixture(scope="module")
def iteration(tmp_path_factory):
    out = tmp_path_factory.mktemp("iter") / "iterate.json"
    t0 = time.perf_counter()
    code = cli.main(["iterate", "--set", "steps=2", "--set", "n0=256", "--set", "n_max=512", "--out", str(out)])
    return code, json.loads(out.read_text()), time.perf_counter() - t0


@pytest.mark.xfail(strict=True, reason="step 2 amplifies the error at desk scale; see the decisions ledger")
def test_criterion_8_delta_schedule(accept, iteration):
    _, rep, _ = iteration
    pairs = [(r["R1_l1"], r["delta"]) for r in rep["reports"]]
    ok = all(a <= b for a, b in pairs)
    accept(8, "delta schedule", ok, "; ".join(f"||R_{i + 1}|| {a:.3g} vs delta {b:.3g}" for i, (a, b) in enumerate(pairs)))
    assert ok


def test_criterion_8_frozen_window(accept, iteration):
    _, rep, elapsed = iteration
    d = rep["frozen_window_defect"]
    ok = d <= 1e-12 and elapsed < 1800
    accept(8, "frozen window", ok, f"max spectral difference {d:.2g} for t <= 1/8; {elapsed:.0f} s")
    assert ok


def test_criterion_8_nonvanishing(accept, iteration):
    _, rep, _ = iteration
    nv = rep["nonvanishing"]
    ok = nv["ok"] and nv["u_sup"] >= 0.9 * nv["f_sup"]
    # the margin is large only because step 2 blows up, so it is not evidence of convergence
    accept(8, "nonvanishing", ok, f"ratio {nv['ratio']:.3g} (inflated by the step-2 blow-up)")
    assert ok


@pytest.mark.xfail(strict=True, reason="monotone ||R_n|| across desk steps fails; see the decisions ledger")
def test_iterate_monotone_error(iteration):
    code, rep, _ = iteration
    print("iterate ||R_n||_L1:", rep["R_l1"])
    assert rep["monotone"]
    assert code == 0
