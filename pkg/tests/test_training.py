import math

import numpy as np
import pytest

from advcal.errors import ConfigurationError, DivergenceError, PreconditionError
from advcal.finite_instance import optimal_attack
from advcal.grid_world import BallIndex, GridClassifier, adv_surrogate_risk, adv_zero_one_risk, auto_axes, risk_under_distribution
from advcal.losses import ZERO_ONE, get_loss
from advcal.scenarios import three_point
from advcal.training import (
    TrainConfig,
    adv_surrogate_subgradient,
    pathological_sequence,
    train,
    verify_pseudo_consistency,
    verify_realizable_consistency,
)

LOG2 = math.log(2)


def inner_gap(f, loss, inst):
    """Smallest gap between the top two face losses over all atoms."""
    bi = BallIndex(f, inst)
    gaps = []
    for row, y in zip(bi.rows, bi.labels):
        vals = np.sort(loss(y * f.values.ravel()[row]))[::-1]
        gaps.append(vals[0] - vals[1] if vals.size > 1 else np.inf)
    return min(gaps)


def fd_gradient(f, loss, inst, h=1e-5):
    v = f.values.ravel()
    g = np.zeros_like(v)
    for k in range(v.size):
        up, dn = v.copy(), v.copy()
        up[k] += h
        dn[k] -= h
        g[k] = (adv_surrogate_risk(f.with_values(up.reshape(f.values.shape)), loss, inst)
                - adv_surrogate_risk(f.with_values(dn.reshape(f.values.shape)), loss, inst)) / (2 * h)
    return g.reshape(f.values.shape)


@pytest.mark.parametrize("n", [1, 10, 10_000])
def test_pathological_adv01(tp, n):
    assert adv_zero_one_risk(pathological_sequence(tp, n), tp) == 0.75


@pytest.mark.parametrize("n", [1, 3, 10, 100, 1e4, 1e6])
def test_pathological_surrogate_exact_value(tp, n):
    lg = get_loss("logistic")
    exact = 0.75 * float(lg(-1 / n)) + 0.25 * float(lg(1 / n))
    got = adv_surrogate_risk(pathological_sequence(tp, n), lg, tp)
    assert got == pytest.approx(exact, abs=1e-14)
    assert 0 < got - LOG2 <= 1 / n


def test_pathological_under_attack(tp):
    plan = optimal_attack(tp)
    assert risk_under_distribution(pathological_sequence(tp, 1), plan, ZERO_ONE) == 0.5


def test_pathological_preconditions():
    with pytest.raises(PreconditionError):
        three_point(eps=1.0, a=2.5)
    from advcal.scenarios import coincident_pair

    with pytest.raises(PreconditionError):
        pathological_sequence(coincident_pair(), 1)
    with pytest.raises(PreconditionError):
        pathological_sequence(three_point(), 0)


@pytest.mark.parametrize("loss_name", ["logistic", "sigmoid", "shifted_sigmoid"])
@pytest.mark.parametrize("scenario", ["three_point", "realizable_pair"])
def test_subgradient_matches_finite_differences(loss_name, scenario):
    from advcal.scenarios import build

    inst = build(scenario)
    loss = get_loss(loss_name)
    rng = np.random.default_rng(7)
    axes = auto_axes(inst, width=0.5)
    checked = 0
    while checked < 3:
        f = GridClassifier(axes, rng.normal(size=axes[0].n_faces), -1.0)
        if inner_gap(f, loss, inst) < 1e-6:
            continue
        np.testing.assert_allclose(adv_surrogate_subgradient(f, loss, inst), fd_gradient(f, loss, inst), atol=1e-4)
        checked += 1


def test_tie_split_keeps_zones_equal(tp):
    f = pathological_sequence(tp, 10)
    g = adv_surrogate_subgradient(f, get_loss("logistic"), tp)
    assert g[2] == g[3] == g[4]
    assert g[6] == g[7] == g[8]
    low = adv_surrogate_subgradient(f, get_loss("logistic"), tp, tie_break="lowest")
    assert low[2] != low[3]
    assert g.sum() == pytest.approx(low.sum())


def test_config_validation(tp):
    lg = get_loss("logistic")
    with pytest.raises(ConfigurationError):
        TrainConfig(lg, tp, schedule="cosine")
    with pytest.raises(ConfigurationError):
        TrainConfig(lg, tp, step=0)
    with pytest.raises(ConfigurationError):
        TrainConfig(lg, tp, iterations=0)
    with pytest.raises(ConfigurationError):
        TrainConfig(lg, tp, tie_break="random")


def test_logging_cadence(rp):
    res = train(TrainConfig(get_loss("logistic"), rp, iterations=1000))
    tr = res.trajectory
    assert tr.iteration[:3] == [0, 5, 10]
    assert tr.iteration[-1] == 1000
    assert tr.to_csv().splitlines()[0] == "iteration,surrogate_risk,adv01_risk,qstar_risk,max_update"


def test_clamp(rp):
    res = train(TrainConfig(get_loss("hinge"), rp, iterations=2000, step=5.0, clamp=3.0))
    assert np.abs(res.classifier.values).max() <= 3.0


def test_pathological_training_keeps_gap(tp):
    res = train(TrainConfig(get_loss("logistic"), tp, init="pathological", init_param=10,
                            schedule="inv_sqrt", step=1.0, iterations=10_000))
    tr = res.trajectory
    assert abs(tr.surrogate_risk[-1] - LOG2) < 1e-3
    assert set(tr.adv01_risk) == {0.75}
    rep = verify_pseudo_consistency(tr, tp)
    assert rep.status == "pass"
    assert rep.consistency_gap == pytest.approx(0.25)


def test_best_so_far_nonincreasing_inv_sqrt(tp):
    res = train(TrainConfig(get_loss("logistic"), tp, init="random", init_param=3,
                            schedule="inv_sqrt", step=0.5, iterations=3000))
    best = np.minimum.accumulate(res.trajectory.surrogate_risk)
    assert np.all(np.diff(best) <= 0)


def test_lower_bound_chain(tp):
    # R_phi_eps(f) >= R_Q*(f, phi) >= R*_eps for the 0/1-like sigmoid
    res = train(TrainConfig(get_loss("sigmoid"), tp, init="random", init_param=1, iterations=2000, step=0.5))
    tr = res.trajectory
    for sur, qsur in zip(tr.surrogate_risk, tr.qstar_surrogate):
        assert sur >= qsur - 1e-12
        assert qsur >= tr.bayes_risk - 1e-12


def test_shifted_sigmoid_from_zeros(tp):
    res = train(TrainConfig(get_loss("shifted_sigmoid"), tp, step=0.5, iterations=50_000))
    assert res.trajectory.adv01_risk[-1] == 0.5
    assert verify_pseudo_consistency(res.trajectory, tp).status == "pass"


@pytest.mark.parametrize("name", ["logistic", "hinge", "shifted_sigmoid"])
def test_realizable(rp, name):
    rep = verify_realizable_consistency(rp, get_loss(name))
    assert rep.passed, rep.to_dict()


def test_realizable_precondition(tp):
    with pytest.raises(PreconditionError):
        verify_realizable_consistency(tp, get_loss("logistic"), iterations=10)


def test_inconclusive_when_not_converged(tp):
    res = train(TrainConfig(get_loss("logistic"), tp, init="random", iterations=50, step=5.0))
    tr = res.trajectory
    tr.surrogate_risk[-1] = min(tr.surrogate_risk) + 1.0
    assert verify_pseudo_consistency(tr, tp).status == "inconclusive"


def test_divergence_detected(tp):
    # the square loss overshoots wildly with a huge step and no effective clamp
    with pytest.raises(DivergenceError) as exc:
        train(TrainConfig(get_loss("square"), tp, init="zeros", step=50.0, iterations=200, clamp=1e9, log_every=1))
    assert exc.value.trajectory is not None


def test_cover_init_starts_at_bayes(tp):
    res = train(TrainConfig(get_loss("sigmoid"), tp, init="cover", iterations=10))
    assert res.trajectory.adv01_risk[0] == 0.5
