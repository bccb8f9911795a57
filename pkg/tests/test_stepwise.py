import numpy as np
import pytest

from oracles import incoherent_dictionary, random_dictionary, residual_sq
from suites import backward_suite, forward_suite, superset_suite
from sparse_pursuit import (
    ActiveModel,
    Dictionary,
    NotDetermined,
    StopRule,
    babel,
    backward_regression,
    foba,
    forward_regression,
    ls_solve,
    omp,
    rmp0,
)
from sparse_pursuit.experiments import gen_correlated_dictionary


def sparse_instance(rng, d, k):
    S = np.sort(rng.choice(d.m, k, replace=False))
    x = np.zeros(d.m)
    x[S] = rng.choice([-1.0, 1.0], k) * rng.uniform(1, 2, k)
    return S, x, d.data @ x


def orthonormal(rng, n):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Dictionary(q, normalized=True)


# ---------------------------------------------------------------- StopRule


@pytest.mark.parametrize("kind,value", [("bogus", 1), ("residual", -0.1), ("sparsity", 2.5)])
def test_stop_rule_rejects_bad_input(kind, value):
    with pytest.raises(ValueError):
        StopRule(kind, value)


# ---------------------------------------------------------------- forward algorithms


@pytest.mark.parametrize("solver", [forward_regression, omp])
def test_orthonormal_exact_recovery(rng, solver):
    d = orthonormal(rng, 12)
    S, _, y = sparse_instance(rng, d, 4)
    path = solver(d, y, StopRule.sparsity(4))
    assert path.final_support == tuple(S)
    assert path.iterations == 4
    assert path.residual_norm < 1e-10


def test_first_step_is_largest_correlation(rng):
    d = random_dictionary(rng, 10, 25)
    y = rng.standard_normal(10)
    expected = int(np.argmax(np.abs(d.data.T @ y)))
    for solver in (forward_regression, omp):
        assert solver(d, y, StopRule.sparsity(1)).steps[0].index == expected


@pytest.mark.parametrize("log2n,m,k", [(4, 32, 1), (6, 96, 3)])
def test_forward_regression_incoherent_noiseless(rng, log2n, m, k):
    d = incoherent_dictionary(rng, log2n, m)
    assert babel(d, k) < 0.5
    for _ in range(20):
        S, _, y = sparse_instance(rng, d, k)
        assert forward_regression(d, y, StopRule.sparsity(k)).final_support == tuple(S)


def test_residual_stop_rule(rng):
    d = random_dictionary(rng, 20, 40)
    y = rng.standard_normal(20)
    delta = 0.5 * np.linalg.norm(y)
    path = forward_regression(d, y, StopRule.residual(delta))
    assert path.residual_norm <= delta
    # one step earlier the threshold was not yet met
    assert path.steps[-2].residual_norm > delta if len(path.steps) > 1 else True


def test_forward_cap_at_n_columns(rng):
    d = random_dictionary(rng, 6, 15)
    path = forward_regression(d, rng.standard_normal(6), StopRule.sparsity(10))
    assert len(path.final_support) == 6
    assert path.residual_norm < 1e-8


def test_omp_and_fr_diverge_on_a_coherent_dictionary():
    witness = None
    for seed in range(200):
        rng = np.random.default_rng(seed)
        d = gen_correlated_dictionary(8, 12, seed=seed)
        y = d.data @ rng.standard_normal(12)
        a = omp(d, y, StopRule.sparsity(4))
        b = forward_regression(d, y, StopRule.sparsity(4))
        if a.steps[0].index == b.steps[0].index and a.actions() != b.actions():
            witness = (seed, a.actions(), b.actions())
            break
    assert witness is not None
    _, a_steps, b_steps = witness
    assert a_steps[0] == b_steps[0]


def test_forward_path_strictly_decreasing(rng):
    d = random_dictionary(rng, 16, 32)
    path = forward_regression(d, rng.standard_normal(16), StopRule.sparsity(12))
    norms = [s.residual_norm for s in path.steps]
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_selection_equivalence_with_fresh_solves():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(6, 16))
        m = int(rng.integers(n, 2 * n))
        d = random_dictionary(rng, n, m)
        y = rng.standard_normal(n)
        model = ActiveModel(d, y)
        for _ in range(int(rng.integers(1, n - 1))):
            free = [i for i in range(m) if i not in model.active]
            fresh = [residual_sq(d.data, model.active + [i], y) for i in free]
            via_dec = free[int(np.argmax(model.decreases()[free]))]
            assert via_dec == free[int(np.argmin(fresh))]
            model.add(via_dec)
        fresh = [residual_sq(d.data, [j for j in model.active if j != i], y) for i in model.active]
        assert int(np.argmin(model.increases())) == int(np.argmin(fresh))


def test_path_replay_and_residuals(rng):
    d = random_dictionary(rng, 16, 32)
    S, x, y = sparse_instance(rng, d, 4)
    y = y + 0.3 * rng.standard_normal(16)
    for path in (rmp0(d, y, 0.3, iterate_outer=True), foba(d, y, 0.3), forward_regression(d, y, StopRule.sparsity(6))):
        assert path.replay() == path.final_support
        support = set()
        for action, i, norm in path.steps:
            (support.add if action == "add" else support.discard)(i)
            _, r = ls_solve(d, sorted(support), y)
            assert abs(norm - np.linalg.norm(r)) <= 1e-8 * max(1.0, np.linalg.norm(y))


def test_forward_certified_recovery():
    assert forward_suite(100, seed=11) == []


# ---------------------------------------------------------------- backward regression


def test_backward_noiseless_exact(rng):
    for _ in range(20):
        d = random_dictionary(rng, 20, 16)
        S, _, y = sparse_instance(rng, d, 5)
        path = backward_regression(d, y, StopRule.sparsity(5))
        assert path.final_support == tuple(S)
        assert path.iterations == 11


def test_backward_dense_signal_keeps_everything(rng):
    d = random_dictionary(rng, 10, 8)
    y = d.data @ rng.standard_normal(8)
    path = backward_regression(d, y, StopRule.sparsity(8))
    assert path.final_support == tuple(range(8)) and path.iterations == 0


def test_backward_underdetermined_rejected(rng):
    with pytest.raises(NotDetermined):
        backward_regression(random_dictionary(rng, 5, 7), rng.standard_normal(5), StopRule.sparsity(2))


def test_backward_improvement_rule_threshold(rng):
    d = random_dictionary(rng, 24, 16)
    S, _, y = sparse_instance(rng, d, 4)
    y = y + 1e-3 * rng.standard_normal(24)
    path = backward_regression(d, y, StopRule.improvement(0.05))
    assert path.final_support == tuple(S)


def test_backward_path_weakly_increasing(rng):
    d = random_dictionary(rng, 16, 16)
    path = backward_regression(d, rng.standard_normal(16), StopRule.sparsity(0))
    norms = [s.residual_norm for s in path.steps]
    assert all(b >= a - 1e-12 for a, b in zip(norms, norms[1:]))


def test_backward_certified_recovery():
    assert backward_suite(100, seed=12) == []


def test_backward_from_superset_certified():
    assert superset_suite(100, seed=13) == []


# ---------------------------------------------------------------- RMP_0 and FoBa


def test_rmp0_zero_delta_incoherent(rng):
    d = incoherent_dictionary(rng, 5, 48)
    for _ in range(10):
        S, _, y = sparse_instance(rng, d, 3)
        path = rmp0(d, y, 0.0)
        assert path.final_support == tuple(S)
        assert not [a for a, _ in path.actions() if a == "remove"]


def test_rmp0_large_delta_gives_empty_support(rng):
    d = random_dictionary(rng, 10, 20)
    y = rng.standard_normal(10)
    path = rmp0(d, y, 2 * np.linalg.norm(y))
    assert path.final_support == () and path.iterations == 0


def test_rmp0_determined_system_zero_residual(rng):
    d = random_dictionary(rng, 12, 12)
    y = rng.standard_normal(12)
    path = rmp0(d, y, 0.0)
    assert path.residual_norm <= 1e-8 * np.linalg.norm(y)


def test_rmp0_plus_stabilizes(rng):
    d = random_dictionary(rng, 32, 64)
    S, _, y = sparse_instance(rng, d, 8)
    y = y + 0.05 * rng.standard_normal(32)
    path = rmp0(d, y, 0.2, iterate_outer=True)
    assert path.converged
    assert path.outer_iterations <= 100
    again = rmp0(d, y, 0.2, iterate_outer=True)
    assert again.final_support == path.final_support


def test_rmp0_negative_delta_rejected(rng):
    with pytest.raises(ValueError):
        rmp0(random_dictionary(rng, 4, 4), np.ones(4), -1.0)


def test_foba_matches_forward_on_incoherent(rng):
    d = incoherent_dictionary(rng, 5, 48)
    for _ in range(10):
        S, _, y = sparse_instance(rng, d, 3)
        a = foba(d, y, 1e-6)
        b = forward_regression(d, y, StopRule.sparsity(3))
        assert a.final_support == b.final_support == tuple(S)


def test_foba_deletion_matches_rmp0_threshold_on_a_single_step(rng):
    """With nu = 1 a column is dropped exactly when its increase is at most
    the last forward gain, which is RMP_0's rule at delta^2 = that gain."""
    d = random_dictionary(rng, 12, 20)
    y = rng.standard_normal(12)
    model = ActiveModel(d, y, [0, 1, 2, 3])
    gain = float(model.decreases().max())
    inc = model.increases()
    foba_drops = inc <= 1.0 * gain
    rmp_drops = inc <= np.sqrt(gain) ** 2
    assert np.array_equal(foba_drops, rmp_drops)


def test_foba_rejects_bad_nu(rng):
    with pytest.raises(ValueError):
        foba(random_dictionary(rng, 4, 4), np.ones(4), 0.1, nu=0.0)
