"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run directly (``python3 tests/test_acceptance.py``) for just the summary lines.
"""

import math
import time

import numpy as np
import pytest

from advcal.calibration import check_adversarial_calibration
from advcal.finite_instance import (
    adversarial_bayes_risk,
    brute_force_bayes_risk,
    optimal_attack,
    random_instance,
    standard_bayes_risk,
)
from advcal.grid_world import (
    BallIndex,
    GridClassifier,
    adv_surrogate_risk,
    adv_zero_one_risk,
    auto_axes,
    cover_classifier,
    risk_under_distribution,
)
from advcal.losses import ZERO_ONE_LEQ, get_loss, make_loss
from advcal.scenarios import SCENARIOS, build, zero_one_leq_optimum
from advcal.training import (
    TrainConfig,
    adv_surrogate_subgradient,
    pathological_sequence,
    train,
    verify_pseudo_consistency,
    verify_realizable_consistency,
)

LOG2 = math.log(2.0)


def _timed(fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    return ok, detail, time.perf_counter() - t0


def criterion_1():
    expected = {
        "hinge": (True, False),
        "logistic": (True, False),
        "square": (True, False),
        "exponential": (True, False),
        "sigmoid": (True, False),
        "ramp": (True, False),
        "shifted_sigmoid": (True, True),
        "shifted_ramp": (True, True),
    }
    params = {"shifted_sigmoid": {"tau": 1.0}, "shifted_ramp": {"tau": 0.5}}
    bad = []
    for kind, (std, adv) in expected.items():
        verdict, rep = check_adversarial_calibration(make_loss(kind, **params.get(kind, {})))
        if not (rep.standard_calibrated is std and verdict is adv):
            bad.append((kind, rep.standard_calibrated, verdict))
    return not bad, f"mismatches={bad}"


def criterion_2():
    inst = build("three_point", {"eps": 1.0, "a": 1.5})
    bayes = adversarial_bayes_risk(inst).value
    path = {n: adv_zero_one_risk(pathological_sequence(inst, n), inst) for n in (1, 10, 10_000)}
    sur = adv_surrogate_risk(pathological_sequence(inst, 10_000), get_loss("logistic"), inst)
    ok = bayes == 0.5 and all(v == 0.75 for v in path.values()) and abs(sur - LOG2) <= 1e-4
    return ok, f"bayes={bayes} adv01={path} |surrogate-log2|={abs(sur - LOG2):.3g}"


def criterion_3():
    rng = np.random.default_rng(2024)
    combos = [(d, m) for d in (1, 2) for m in ("euclidean", "chebyshev")]
    worst = 0.0
    for k in range(100):
        dim, metric = combos[k % 4]
        eps = (0.3, 0.6, 1.0)[k % 3]
        inst = random_instance(rng, n_max=8, dim=dim, metric=metric, epsilon=eps)
        vals = (
            adversarial_bayes_risk(inst).value,
            brute_force_bayes_risk(inst).value,
            standard_bayes_risk(optimal_attack(inst)),
        )
        worst = max(worst, max(vals) - min(vals))
    return worst <= 1e-9, f"max spread={worst:.3g} over 100 instances"


def criterion_4():
    sig = get_loss("sigmoid")
    out = {}
    ok = True
    for name in SCENARIOS:
        inst = build(name)
        r_star = adversarial_bayes_risk(inst).value
        covers = brute_force_bayes_risk(inst).witness if r_star > 0 else [frozenset()]
        axes = auto_axes(inst)
        best = min(adv_surrogate_risk(cover_classifier(inst, c, 20.0, axes=axes), sig, inst) for c in covers)
        out[name] = best - r_star
        ok &= r_star - 1e-9 <= best <= r_star + 1e-5
    return ok, "risk - R* = " + ", ".join(f"{k}:{v:.3g}" for k, v in out.items())


def criterion_5():
    inst = build("three_point")
    res = train(TrainConfig(get_loss("logistic"), inst, init="pathological", init_param=10,
                            schedule="inv_sqrt", step=1.0, iterations=10_000))
    tr = res.trajectory
    rep = verify_pseudo_consistency(tr, inst)
    sur_gap = abs(tr.surrogate_risk[-1] - LOG2)
    ok = sur_gap <= 1e-3 and abs(rep.qstar_risk - 0.5) <= 0.01 and tr.adv01_risk[-1] == 0.75
    return ok, f"|surrogate-log2|={sur_gap:.3g} R_Q*={rep.qstar_risk} R_eps={tr.adv01_risk[-1]}"


def criterion_6():
    inst = build("realizable_pair")
    parts = []
    ok = True
    for name in ("logistic", "hinge"):
        rep = verify_realizable_consistency(inst, get_loss(name))
        ok &= rep.adv01_risk <= 0.01 and rep.surrogate_risk <= rep.loss_infimum + 0.01
        parts.append(f"{name}: adv01={rep.adv01_risk} surrogate={rep.surrogate_risk:.3g} inf={rep.loss_infimum:.3g}")
    return ok, "; ".join(parts)


def criterion_7():
    inst = build("coincident_pair")
    f0 = GridClassifier.constant(auto_axes(inst), 0.0)
    risk = risk_under_distribution(f0, inst, ZERO_ONE_LEQ)
    best = zero_one_leq_optimum()
    return risk == 1.0 and best == 0.5, f"R_leq(0)={risk} R*_leq={best}"


def _fd(f, loss, inst, bi, h=1e-5):
    v = f.values.ravel()
    g = np.empty_like(v)
    for k in range(v.size):
        up, dn = v.copy(), v.copy()
        up[k] += h
        dn[k] -= h
        g[k] = (adv_surrogate_risk(f.with_values(up), loss, inst, bi)
                - adv_surrogate_risk(f.with_values(dn), loss, inst, bi)) / (2 * h)
    return g


def _near_tie(f, loss, bi, tol=1e-6):
    for row, y in zip(bi.rows, bi.labels):
        vals = np.sort(loss(y * f.values.ravel()[row]))
        if vals.size > 1 and vals[-1] - vals[-2] < tol:
            return True
    return False


def criterion_8():
    rng = np.random.default_rng(99)
    worst, done, skipped = 0.0, 0, 0
    for scen in ("three_point", "realizable_pair"):
        inst = build(scen)
        axes = auto_axes(inst, width=0.5)
        for loss_name in ("logistic", "sigmoid", "shifted_sigmoid"):
            loss = get_loss(loss_name)
            count = 0
            while count < 10:
                f = GridClassifier(axes, rng.normal(size=axes[0].n_faces), -1.0)
                bi = BallIndex(f, inst)
                if _near_tie(f, loss, bi):
                    skipped += 1
                    continue
                g = adv_surrogate_subgradient(f, loss, inst, bi)
                worst = max(worst, float(np.abs(g - _fd(f, loss, inst, bi)).max()))
                count += 1
                done += 1
    return worst <= 1e-4, f"max |analytic - fd|={worst:.3g} over {done} classifiers ({skipped} near-ties skipped)"


CRITERIA = [
    (1, "calibration audit table", criterion_1, 1.0),
    (2, "three-point Bayes risk and pathological sequence", criterion_2, 1.0),
    (3, "strong-duality fuzz", criterion_3, 10.0),
    (4, "cover classifier attains R* under sigmoid", criterion_4, 5.0),
    (5, "pseudo-consistency without consistency", criterion_5, 60.0),
    (6, "realizable consistency", criterion_6, 30.0),
    (7, "l_<= counterexample", criterion_7, 1.0),
    (8, "subgradient vs finite differences", criterion_8, 10.0),
]


def _line(num, title, ok, detail, runtime, budget):
    status = "PASS" if ok and runtime < budget else "FAIL"
    return f"[{status}] criterion {num}: {title} ({detail}; {runtime:.2f}s < {budget:g}s)"


@pytest.mark.parametrize("num,title,fn,budget", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(num, title, fn, budget, capsys):
    ok, detail, runtime = _timed(fn)
    with capsys.disabled():
        print("\n" + _line(num, title, ok, detail, runtime, budget))
    assert ok, detail
    assert runtime < budget, f"took {runtime:.2f}s, budget {budget}s"


if __name__ == "__main__":
    for num, title, fn, budget in CRITERIA:
        ok, detail, runtime = _timed(fn)
        print(_line(num, title, ok, detail, runtime, budget))
