"""Loss functions against closed forms, quadrature, and finite differences."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy import special as sps

from evifuse.losses import (
    LossBreakdown,
    LossConfig,
    ace_loss,
    acc_loss,
    annealing_coefficient,
    batch_loss_and_grads,
    consistency_loss,
    grad_acc_loss,
    grad_consistency_loss,
    kl_loss,
    total_loss,
)
from evifuse.opinions import Evidence, evidence_to_opinion
from evifuse.special import digamma, trigamma

CFG = LossConfig()


def _ops_from_alphas(alphas):
    return [evidence_to_opinion(Evidence(e=np.asarray(a) - 1.0)) for a in alphas]


def _kl_quadrature(a1: float, a2: float) -> float:
    """KL[Beta(a1,a2) || Beta(1,1)] by adaptive quadrature on (0,1).

    The uniform reference has density 1, so the divergence is the entropy
    integral of f ln f.
    """

    def integrand(p):
        logf = (a1 - 1.0) * math.log(p) + (a2 - 1.0) * math.log1p(-p) - sps.betaln(a1, a2)
        return math.exp(logf) * logf

    value, err = integrate.quad(integrand, 0.0, 1.0, limit=200)
    assert err < 1e-8
    return value


# ----------------------------------------------------------------------
# ace_loss
# ----------------------------------------------------------------------


def _assert_ulps(got: float, target: float, max_ulps: int = 2) -> None:
    # float targets carry their own rounding, so bit-equality between two
    # independently rounded expressions is not well defined; 2 ulp is the
    # tightest meaningful match
    assert abs(got - target) <= max_ulps * math.ulp(target), (got, target)


def test_ace_digamma_recurrence_examples_exact():
    _assert_ulps(ace_loss([1.0, 1.0], [1.0, 0.0]), 1.0)
    _assert_ulps(ace_loss([3.0, 1.0], [1.0, 0.0]), 1.0 / 3.0)
    _assert_ulps(ace_loss([5.0, 1.0, 1.0], [1.0, 0.0, 0.0]), 1.0 / 5.0 + 1.0 / 6.0)


@given(
    st.integers(min_value=2, max_value=8).flatmap(
        lambda k: st.tuples(
            st.lists(st.floats(min_value=1.0, max_value=80.0), min_size=k, max_size=k),
            st.integers(min_value=0, max_value=k - 1),
        )
    )
)
@settings(max_examples=200, deadline=None)
def test_ace_is_nonnegative(case):
    alpha, label = case
    y = np.zeros(len(alpha))
    y[label] = 1.0
    assert ace_loss(alpha, y) >= 0.0


def test_ace_decreases_with_true_class_evidence():
    y = [1.0, 0.0, 0.0]
    values = [ace_loss([a, 2.0, 3.0], y) for a in range(1, 51)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_ace_rejects_bad_one_hot():
    with pytest.raises(ValueError):
        ace_loss([2.0, 2.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        ace_loss([2.0, 2.0], [1.0, 0.0, 0.0])


# ----------------------------------------------------------------------
# kl_loss
# ----------------------------------------------------------------------


def test_kl_zero_when_only_true_class_has_evidence():
    # alpha~ collapses to all-ones
    assert kl_loss([7.5, 1.0, 1.0], [1.0, 0.0, 0.0]) == 0.0


def test_kl_closed_form_example():
    # alpha=(1,2), y=(1,0): alpha~=(1,2), KL = ln 2 + psi(2) - psi(3) = ln 2 - 1/2
    expect = math.log(2.0) + float(digamma(2.0)) - float(digamma(3.0))
    assert expect == pytest.approx(math.log(2.0) - 0.5, abs=1e-12)
    assert kl_loss([1.0, 2.0], [1.0, 0.0]) == pytest.approx(expect, abs=1e-12)


@pytest.mark.parametrize(
    "alpha,y",
    [
        ([1.0, 2.0], [1.0, 0.0]),
        ([3.5, 1.0], [0.0, 1.0]),
        ([10.0, 4.0], [1.0, 0.0]),
        ([1.0, 1.0], [1.0, 0.0]),
        ([25.0, 60.0], [0.0, 1.0]),
        ([1.2, 7.7], [1.0, 0.0]),
    ],
)
def test_kl_matches_quadrature_for_two_classes(alpha, y):
    # alpha~ = y + (1-y)*alpha, and the true-class component is 1
    tilde = [y[0] + (1.0 - y[0]) * alpha[0], y[1] + (1.0 - y[1]) * alpha[1]]
    oracle = _kl_quadrature(tilde[0], tilde[1])
    assert kl_loss(alpha, y) == pytest.approx(oracle, abs=1e-6)


@given(
    st.integers(min_value=2, max_value=8).flatmap(
        lambda k: st.tuples(
            st.lists(st.floats(min_value=1.0, max_value=80.0), min_size=k, max_size=k),
            st.integers(min_value=0, max_value=k - 1),
        )
    )
)
@settings(max_examples=200, deadline=None)
def test_kl_is_nonnegative(case):
    alpha, label = case
    y = np.zeros(len(alpha))
    y[label] = 1.0
    assert kl_loss(alpha, y) >= 0.0


# ----------------------------------------------------------------------
# annealing and acc_loss
# ----------------------------------------------------------------------


def test_annealing_ramp():
    assert annealing_coefficient(0, 10) == 0.0
    assert annealing_coefficient(10, 10) == 1.0
    assert annealing_coefficient(5, 10) == 0.5
    assert annealing_coefficient(25, 10) == 1.0


def test_annealing_rejects_bad_arguments():
    with pytest.raises(ValueError):
        annealing_coefficient(-1, 10)
    with pytest.raises(ValueError):
        annealing_coefficient(0, 0)


def test_acc_is_ace_at_epoch_zero():
    alpha, y = [4.0, 2.0], [0.0, 1.0]
    assert acc_loss(alpha, y, 0, CFG) == ace_loss(alpha, y)


def test_acc_is_ace_plus_kl_after_horizon():
    alpha, y = [3.0, 1.0], [1.0, 0.0]
    expect = 1.0 / 3.0 + kl_loss(alpha, y)
    assert acc_loss(alpha, y, CFG.T, CFG) == pytest.approx(expect, abs=1e-12)
    assert acc_loss(alpha, y, CFG.T * 3, CFG) == pytest.approx(expect, abs=1e-12)


# ----------------------------------------------------------------------
# consistency_loss
# ----------------------------------------------------------------------


def test_consistency_zero_for_identical_views():
    ops = _ops_from_alphas([[3.0, 2.0], [3.0, 2.0], [3.0, 2.0]])
    assert consistency_loss(ops) == 0.0


def test_consistency_double_counts_each_pair():
    ops = _ops_from_alphas([[9.0, 1.0], [1.0, 9.0]])
    # pair conflict is 0.512; both orderings of the pair are summed
    assert consistency_loss(ops) == pytest.approx(1.024, abs=1e-12)


def test_consistency_single_view_is_zero():
    assert consistency_loss(_ops_from_alphas([[5.0, 2.0]])) == 0.0


def test_vacuous_view_contributes_nothing():
    ops = _ops_from_alphas([[1.0, 1.0], [21.0, 1.0]])
    assert consistency_loss(ops) == 0.0


# ----------------------------------------------------------------------
# total_loss
# ----------------------------------------------------------------------


def test_total_reduces_to_fused_acc_without_weights():
    alphas = [[4.0, 1.0, 2.0], [2.0, 2.0, 2.0]]
    fused = np.mean(alphas, axis=0)
    y = [1.0, 0.0, 0.0]
    cfg = LossConfig(T=10, beta=0.0, gamma=0.0)
    out = total_loss(fused, alphas, _ops_from_alphas(alphas), y, 4, cfg)
    assert out.total == pytest.approx(acc_loss(fused, y, 4, cfg), abs=1e-12)
    assert out.acc == out.ace + annealing_coefficient(4, 10) * out.kl


def test_total_single_view_degenerate():
    alpha = [6.0, 1.0]
    y = [1.0, 0.0]
    cfg = LossConfig(T=10, beta=1.0, gamma=0.0)
    out = total_loss(alpha, [alpha], _ops_from_alphas([alpha]), y, 10, cfg)
    expect = acc_loss(alpha, y, 10, cfg) * 2.0
    assert out.total == pytest.approx(expect, abs=1e-12)
    assert out.consistency == 0.0


def test_total_composes_component_oracles():
    alphas = [[4.0, 1.0], [1.0, 6.0]]
    fused = np.mean(alphas, axis=0)
    y = [0.0, 1.0]
    t = 3
    out = total_loss(fused, alphas, _ops_from_alphas(alphas), y, t, CFG)
    expect = (
        acc_loss(fused, y, t, CFG)
        + CFG.beta * sum(acc_loss(a, y, t, CFG) for a in alphas)
        + CFG.gamma * consistency_loss(_ops_from_alphas(alphas))
    )
    assert out.total == pytest.approx(expect, abs=1e-12)


def test_total_rejects_view_count_mismatch():
    alphas = [[2.0, 2.0], [3.0, 3.0]]
    with pytest.raises(ValueError):
        total_loss([2.5, 2.5], alphas, _ops_from_alphas([alphas[0]]), [1.0, 0.0], 0, CFG)


def test_breakdown_dict_keys():
    out = total_loss([2.0, 2.0], [[2.0, 2.0]], _ops_from_alphas([[2.0, 2.0]]), [1.0, 0.0], 0, CFG)
    assert isinstance(out, LossBreakdown)
    assert set(out.to_dict()) == {"ace", "kl", "acc", "consistency", "total"}


def test_loss_config_validation():
    with pytest.raises(ValueError):
        LossConfig(T=0)
    with pytest.raises(ValueError):
        LossConfig(beta=-0.1)
    with pytest.raises(ValueError):
        LossConfig(gamma=-1.0)


# ----------------------------------------------------------------------
# Analytic gradients vs finite differences
# ----------------------------------------------------------------------


def _fd_grad(fn, x, h=1e-5):
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        up = x.copy()
        dn = x.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (fn(up) - fn(dn)) / (2.0 * h)
    return grad


def _rel_err(analytic, numeric):
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / scale))


def test_grad_acc_closed_form_at_flat_alpha():
    got = grad_acc_loss([1.0, 1.0], [1.0, 0.0], 0, CFG)
    expect = np.array([trigamma(2.0) - trigamma(1.0), trigamma(2.0)])
    np.testing.assert_allclose(got, expect, atol=1e-12)


def test_grad_acc_symmetry_off_label():
    grad = grad_acc_loss([2.0, 3.0, 3.0], [1.0, 0.0, 0.0], 7, CFG)
    assert grad[1] == grad[2]


@pytest.mark.parametrize("t", [0, 5, 10])
@pytest.mark.parametrize(
    "alpha,label",
    [
        # components sit above 1 so central steps stay inside the domain
        ([1.01, 1.01, 1.01], 0),
        ([4.0, 2.5, 1.01], 1),
        ([30.0, 1.01, 3.0], 2),
        ([1.5, 80.0], 0),
    ],
)
def test_grad_acc_matches_finite_differences(alpha, label, t):
    y = np.zeros(len(alpha))
    y[label] = 1.0
    analytic = grad_acc_loss(alpha, y, t, CFG)
    numeric = _fd_grad(lambda a: acc_loss(a, y, t, CFG), alpha)
    assert _rel_err(analytic, numeric) <= 1e-5


def test_grad_consistency_zero_at_identical_views():
    alphas = [[4.0, 2.0, 1.0]] * 3
    grads = grad_consistency_loss(_ops_from_alphas(alphas), alphas)
    for g in grads:
        assert np.array_equal(g, np.zeros(3))


def test_grad_consistency_single_view_is_zero():
    grads = grad_consistency_loss(_ops_from_alphas([[3.0, 2.0]]), [[3.0, 2.0]])
    assert len(grads) == 1
    assert np.array_equal(grads[0], np.zeros(2))


@pytest.mark.parametrize(
    "alphas",
    [
        [[9.0, 1.01], [1.01, 9.0]],
        [[5.0, 2.0, 1.01], [1.01, 7.0, 2.0], [2.0, 2.0, 6.0]],
        [[12.0, 3.0], [4.0, 8.0], [1.5, 1.2]],
    ],
)
def test_grad_consistency_matches_finite_differences(alphas):
    # instances chosen away from the |p_i - p_j| kinks
    alphas = [np.asarray(a) for a in alphas]
    ops = _ops_from_alphas(alphas)
    grads = grad_consistency_loss(ops, alphas)
    for v in range(len(alphas)):

        def value_with(view_alpha):
            mod = [a.copy() for a in alphas]
            mod[v] = view_alpha
            return consistency_loss(_ops_from_alphas(mod))

        numeric = _fd_grad(value_with, alphas[v])
        assert _rel_err(grads[v], numeric) <= 1e-5


def test_grad_consistency_vacuous_pair_is_zero():
    # both views vacuous: c_c = 0 with zero inner derivative at u = 1
    alphas = [[1.0, 1.0], [1.0, 1.0]]
    grads = grad_consistency_loss(_ops_from_alphas(alphas), alphas)
    for g in grads:
        np.testing.assert_allclose(g, 0.0, atol=1e-15)


# ----------------------------------------------------------------------
# Batch core
# ----------------------------------------------------------------------


def test_batch_mean_composes_single_instance_ops():
    rng = np.random.default_rng(42)
    v, n, k = 3, 5, 4
    view_alphas = 1.0 + rng.uniform(0.0, 9.0, (v, n, k))
    labels = rng.integers(0, k, n)
    y = np.eye(k)[labels]
    t = 4
    breakdown, grads = batch_loss_and_grads(view_alphas, y, t, CFG)
    totals = []
    for i in range(n):
        alphas_i = [view_alphas[vv, i] for vv in range(v)]
        fused_i = view_alphas[:, i].mean(axis=0)
        out = total_loss(fused_i, alphas_i, _ops_from_alphas(alphas_i), y[i], t, CFG)
        totals.append(out.total)
    assert breakdown.total == pytest.approx(float(np.mean(totals)), abs=1e-10)
    assert grads.shape == (v, n, k)


def test_batch_grads_match_finite_differences():
    rng = np.random.default_rng(3)
    v, n, k = 2, 4, 3
    view_alphas = 1.0 + rng.uniform(0.0, 6.0, (v, n, k))
    labels = rng.integers(0, k, n)
    y = np.eye(k)[labels]
    t = 7
    _, grads = batch_loss_and_grads(view_alphas, y, t, CFG)
    h = 1e-5
    worst = 0.0
    for vv in range(v):
        for i in range(n):
            for j in range(k):
                up = view_alphas.copy()
                dn = view_alphas.copy()
                up[vv, i, j] += h
                dn[vv, i, j] -= h
                fd = (
                    batch_loss_and_grads(up, y, t, CFG)[0].total
                    - batch_loss_and_grads(dn, y, t, CFG)[0].total
                ) / (2.0 * h)
                scale = max(abs(grads[vv, i, j]), abs(fd), 1e-6)
                worst = max(worst, abs(grads[vv, i, j] - fd) / scale)
    assert worst <= 1e-4


def test_batch_rejects_bad_shapes():
    with pytest.raises(ValueError):
        batch_loss_and_grads(np.ones((2, 3)), np.eye(3), 0, CFG)
    with pytest.raises(ValueError):
        batch_loss_and_grads(1.0 + np.ones((2, 3, 4)), np.eye(4)[:3][:, :3], 0, CFG)
