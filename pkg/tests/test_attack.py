"""Attack machinery: Sinkhorn invariants, noise net, objective pieces,
and hardening."""
import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from tppattack import autodiff as ad
from tppattack.attack import (
    AttackParams, adv_event_quantities, adv_nll, apply_soft_perm,
    attack_forward, attack_loss, constraint_matrices, distance_soft,
    emit_adversarial, eps_forward, greedy_harden, gs_forward, hinge_penalty,
    pairwise_scores, sinkhorn,
)
from tppattack.autodiff import Tape, Tensor, backward, grad_check
from tppattack.ctes import Sequence
from tppattack.mtpp import MtppParams, lift, nll_clean, onehot
from tppattack.mtpp.predict import encode_np

NUM_MARKS = 3
DIM = 4


def make_attack(seed=0, **hyper):
    return AttackParams.init(NUM_MARKS, DIM, hidden=6, seed=seed, **hyper)


def make_model(seed=0):
    return MtppParams.init(NUM_MARKS, DIM, seed=seed)


def make_seq(seed=0, n=5):
    rng = np.random.default_rng(seed)
    return Sequence(np.cumsum(rng.exponential(0.8, size=n)),
                    rng.integers(0, NUM_MARKS, size=n))


# ------------------------------------------------------------------- sinkhorn

@pytest.mark.parametrize("tau", [0.1, 1.0, 5.0])
def test_sinkhorn_is_doubly_stochastic(tau):
    # score scale 0.1 keeps |S/tau| <= ~3 at the coldest temperature; 20
    # row+column sweeps then converge well past 1e-6 (convergence is linear
    # with a rate that degrades as |S/tau| grows -- see the test below)
    rng = np.random.default_rng(int(tau * 10))
    for _ in range(5):
        scores = Tensor(0.1 * rng.normal(size=(6, 6)))
        p = sinkhorn(scores, tau=tau, n_iter=20).values
        assert np.all(p >= 0)
        assert np.max(np.abs(p.sum(axis=1) - 1.0)) < 1e-6
        assert np.max(np.abs(p.sum(axis=0) - 1.0)) < 1e-6


def test_sinkhorn_deviation_shrinks_monotonically_with_iterations():
    # cold temperature on unit-scale scores converges slowly but steadily
    rng = np.random.default_rng(8)
    scores = Tensor(rng.normal(size=(6, 6)))
    devs = []
    for n_iter in (10, 40, 160):
        p = sinkhorn(scores, tau=0.1, n_iter=n_iter).values
        devs.append(np.max(np.abs(p.sum(axis=1) - 1.0)))
    assert devs[0] > devs[1] > devs[2]


def test_sinkhorn_identity_fixed_point():
    # a strongly diagonal score matrix stays essentially the identity
    scores = Tensor(10.0 * np.eye(4))
    p = sinkhorn(scores, tau=0.1, n_iter=50).values
    assert np.max(np.abs(p - np.eye(4))) < 1e-6


def test_sinkhorn_matches_hungarian_at_low_temperature():
    rng = np.random.default_rng(42)
    for _ in range(10):
        s = rng.normal(size=(5, 5))
        p = sinkhorn(Tensor(s), tau=0.01, n_iter=200).values
        pi = greedy_harden(p)
        _, oracle = linear_sum_assignment(-s)      # maximize total score
        assert np.array_equal(pi, oracle)


def test_sinkhorn_rejects_bad_tau():
    with pytest.raises(ValueError):
        sinkhorn(Tensor(np.eye(3)), tau=0.0, n_iter=5)


def test_sinkhorn_pins_padded_rows_to_identity():
    rng = np.random.default_rng(3)
    scores = Tensor(rng.normal(size=(5, 5)))
    mask = np.array([True, True, True, False, False])
    p = sinkhorn(scores, tau=0.5, n_iter=30, mask=mask).values
    assert np.allclose(p[3:, :], np.eye(5)[3:, :], atol=1e-9)
    assert np.allclose(p[:, 3:], np.eye(5)[:, 3:], atol=1e-9)
    assert np.max(np.abs(p[:3, :3].sum(axis=1) - 1.0)) < 1e-6


def test_sinkhorn_gradcheck():
    def f(x):
        return ad.sum_(sinkhorn(ad.reshape(x, (3, 3)), tau=0.7, n_iter=15) ** 2)

    rng = np.random.default_rng(4)
    passed, err = grad_check(f, rng.normal(size=9), h=1e-5, tol=1e-4)
    assert passed, f"max rel err {err:.2e}"


def test_pairwise_scores_shape_and_grad():
    attack = make_attack(5)
    rng = np.random.default_rng(6)
    h = rng.normal(size=(4, DIM))
    a = lift(attack.values)
    s = pairwise_scores(a, Tensor(h))
    assert s.shape == (4, 4)

    passed, err = grad_check(
        lambda x: ad.sum_(pairwise_scores(
            {**{k: Tensor(v) for k, v in attack.values.items()}, "gs_w1": x},
            Tensor(h)) ** 2),
        attack.values["gs_w1"], h=1e-5, tol=1e-4)
    assert passed, f"max rel err {err:.2e}"


def test_apply_soft_perm_hard_case():
    t = Tensor(np.array([[1.0], [2.0], [3.0]]))
    marks = Tensor(onehot([0, 1, 2], NUM_MARKS + 1))
    perm = Tensor(np.eye(3)[[2, 0, 1]])
    tp, mp = apply_soft_perm(perm, t, marks)
    assert np.allclose(tp.values.ravel(), [3.0, 1.0, 2.0])
    assert np.array_equal(np.argmax(mp.values, axis=1), [2, 0, 1])


# ------------------------------------------------------------------ noise net

def test_eps_forward_shape_and_constant_head():
    attack = make_attack(7)
    for name in attack.values:
        attack.values[name] = np.zeros_like(attack.values[name])
    attack.values["out_b"] = np.array(0.25)
    a = lift(attack.values)
    seq = make_seq(8, n=4)
    eps = eps_forward(a, Tensor(seq.times.reshape(-1, 1)),
                      Tensor(onehot(seq.marks, NUM_MARKS + 1)))
    assert eps.shape == (4, 1)
    assert np.allclose(eps.values, 0.25)     # zero weights: bias only


def test_eps_forward_is_causal():
    attack = make_attack(9)
    a = lift(attack.values)
    seq = make_seq(10, n=6)
    marks = Tensor(onehot(seq.marks, NUM_MARKS + 1))
    base = eps_forward(a, Tensor(seq.times.reshape(-1, 1)), marks).values
    bumped = seq.times.copy()
    bumped[4] += 0.2
    pert = eps_forward(a, Tensor(bumped.reshape(-1, 1)), marks).values
    assert np.array_equal(base[:4], pert[:4])
    assert not np.allclose(base[4:], pert[4:])


def test_eps_forward_mask_zeroes_padding():
    attack = make_attack(11)
    a = lift(attack.values)
    seq = make_seq(12, n=5)
    mask = np.array([True, True, True, False, False])
    eps = eps_forward(a, Tensor(seq.times.reshape(-1, 1)),
                      Tensor(onehot(seq.marks, NUM_MARKS + 1)), mask).values
    assert np.all(eps[3:] == 0.0)


def test_eps_forward_gradcheck():
    attack = make_attack(13)
    seq = make_seq(14, n=4)
    marks = onehot(seq.marks, NUM_MARKS + 1)

    for name in ("attn_q", "w_t", "out_w", "out_b"):
        passed, err = grad_check(
            lambda x, name=name: ad.sum_(eps_forward(
                {**{k: Tensor(v) for k, v in attack.values.items()}, name: x},
                Tensor(seq.times.reshape(-1, 1)), Tensor(marks)) ** 2),
            attack.values[name], h=1e-5, tol=1e-4)
        assert passed, f"{name}: max rel err {err:.2e}"


# ------------------------------------------------------------------ objective

def test_constraint_matrices_match_hand_written():
    a, b = constraint_matrices(3)
    assert np.array_equal(a, [[1, -1, 0], [0, 1, -1], [-1, 0, 0]])
    assert np.array_equal(b, [[-1, 1, 0], [0, -1, 1], [1, 0, 0]])


def test_hinge_zero_for_order_preserving_noise():
    t = Tensor(np.array([[1.0], [2.0], [4.0]]))
    perm = Tensor(np.eye(3))
    eps = Tensor(np.array([[0.1], [0.3], [0.2]]))   # keeps order, start >= 0
    h = hinge_penalty(perm, eps, t)
    assert h.item() == pytest.approx(0.0, abs=1e-12)


def test_hinge_matches_manual_computation():
    rng = np.random.default_rng(15)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        t = np.sort(rng.uniform(0, 5, size=n))
        perm_idx = rng.permutation(n)
        perm = np.eye(n)[perm_idx]
        eps = rng.normal(scale=1.0, size=(n, 1))
        a, b = constraint_matrices(n)
        expected = np.sum(np.maximum(a @ eps - b @ (perm @ t.reshape(-1, 1)), 0))
        got = hinge_penalty(Tensor(perm), Tensor(eps),
                            Tensor(t.reshape(-1, 1))).item()
        assert got == pytest.approx(expected, abs=1e-12)


def test_hinge_scales_linearly_with_violation():
    t = Tensor(np.array([[1.0], [2.0]]))
    perm = Tensor(np.eye(2))

    def h(v):
        # first perturbed time exceeds the second by v
        return hinge_penalty(perm, Tensor(np.array([[1.0 + v], [0.0]])), t).item()

    assert h(1.0) - h(0.5) == pytest.approx(0.5, abs=1e-12)


def test_adv_nll_equals_clean_nll_at_identity():
    model = make_model(16)
    seq = make_seq(17, n=5)
    p = lift(model.values)
    nll = adv_nll(p, seq.times, seq.marks, NUM_MARKS,
                  Tensor(seq.times.reshape(-1, 1)),
                  Tensor(onehot(seq.marks, NUM_MARKS + 1))).item()
    assert nll == pytest.approx(nll_clean(model, seq), abs=1e-10)


def test_adv_nll_gradcheck_wrt_perturbed_times():
    model = make_model(18)
    seq = make_seq(19, n=4)
    p = lift(model.values)
    marks = Tensor(onehot(seq.marks, NUM_MARKS + 1))

    passed, err = grad_check(
        lambda x: adv_nll(p, seq.times, seq.marks, NUM_MARKS,
                          ad.reshape(x, (4, 1)), marks),
        seq.times + 0.05, h=1e-5, tol=1e-4)
    assert passed, f"max rel err {err:.2e}"


def test_distance_soft_matches_numpy_oracle():
    model = make_model(20)
    seq = make_seq(21, n=5)
    rng = np.random.default_rng(22)
    t_pert = seq.times + rng.normal(scale=0.3, size=5)
    p = lift(model.values)
    _, p_true = adv_event_quantities(
        model=p, clean_times=seq.times, clean_marks=seq.marks,
        num_marks=NUM_MARKS, t_pert=Tensor(t_pert.reshape(-1, 1)),
        marks_pert=Tensor(onehot(seq.marks, NUM_MARKS + 1)))
    rho_c = 1.7
    got = distance_soft(Tensor(t_pert.reshape(-1, 1)), seq.times,
                        p_true, rho_c).item()
    expected = np.sum(np.abs(t_pert - seq.times)) \
        + rho_c * np.sum(1.0 - p_true.values)
    assert got == pytest.approx(expected, abs=1e-12)


def test_attack_forward_pin_identity_recovers_clean_likelihood():
    model = make_model(23)
    attack = make_attack(24)
    seq = make_seq(25, n=5)
    out = attack_forward(lift(model.values), lift(attack.values), seq.times,
                         seq.marks, NUM_MARKS, None, tau=1.0, n_iter=10,
                         rho_d=1.0, rho_ab=10.0, rho_c=1.0, pin_identity=True)
    assert -out["loglik"].item() == pytest.approx(nll_clean(model, seq), abs=1e-10)
    assert out["hinge"].item() == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(out["t_pert"].values.ravel(), seq.times)


def test_attack_forward_hard_perm_freezes_the_permutation():
    model = make_model(40)
    attack = make_attack(41)
    seq = make_seq(42, n=5)
    h_emb = encode_np(model, seq.times, seq.marks)
    m = lift(model.values)

    tape = Tape()
    a = {k: tape.leaf(v) for k, v in attack.values.items()}
    out = attack_forward(m, a, seq.times, seq.marks, NUM_MARKS, h_emb,
                         tau=0.5, n_iter=20, rho_d=1.0, rho_ab=10.0,
                         rho_c=1.0, hard_perm=True)
    perm = out["perm"].values
    # the permutation is exactly hard and matches greedy hardening of the
    # soft matrix computed separately
    assert np.all(np.isin(perm, (0.0, 1.0)))
    assert np.all(perm.sum(axis=0) == 1) and np.all(perm.sum(axis=1) == 1)
    soft = gs_forward(lift(attack.values), ad.Tensor(h_emb), 0.5, 20).values
    assert np.array_equal(np.argmax(perm, axis=1), greedy_harden(soft))
    # no gradient reaches the permutation generator; the noise net still gets one
    grads = backward(tape, out["loss"])
    assert a["gs_w1"].node not in grads
    assert np.any(grads[a["out_w"].node] != 0)


def test_attack_loss_penalty_weights_are_knobs():
    model = make_model(26)
    attack = make_attack(27)
    seq = make_seq(28, n=5)
    h_emb = encode_np(model, seq.times, seq.marks)
    m, a = lift(model.values), lift(attack.values)

    def loss(rho_d, rho_ab):
        return attack_loss(m, a, seq.times, seq.marks, NUM_MARKS, h_emb,
                           tau=1.0, n_iter=10, rho_d=rho_d, rho_ab=rho_ab,
                           rho_c=1.0).item()

    out = attack_forward(m, a, seq.times, seq.marks, NUM_MARKS, h_emb,
                         tau=1.0, n_iter=10, rho_d=1.0, rho_ab=10.0, rho_c=1.0)
    dist, hinge = out["dist"].item(), out["hinge"].item()
    assert loss(2.0, 10.0) - loss(1.0, 10.0) == pytest.approx(dist, rel=1e-9)
    if hinge > 1e-12:
        assert loss(1.0, 20.0) - loss(1.0, 10.0) == pytest.approx(
            10.0 * hinge, rel=1e-9)


def test_attack_loss_end_to_end_gradcheck():
    """Finite differences on the full two-stage objective.

    The probe step is 1e-3: several coordinates have true gradients around
    1e-9 while the loss itself is O(10), so a 1e-5 step leaves the central
    difference dominated by roundoff.
    """
    model = make_model(29)
    seq = make_seq(30, n=4)
    h_emb = encode_np(model, seq.times, seq.marks)
    m = lift(model.values)
    attack = make_attack(31)

    for name in ("gs_w1", "w_t", "attn_v", "out_w"):
        passed, err = grad_check(
            lambda x, name=name: attack_loss(
                m, {**{k: Tensor(v) for k, v in attack.values.items()}, name: x},
                seq.times, seq.marks, NUM_MARKS, h_emb, tau=1.0, n_iter=10,
                rho_d=1.0, rho_ab=10.0, rho_c=1.0),
            attack.values[name], h=1e-3, tol=1e-3)
        assert passed, f"{name}: max rel err {err:.2e}"


# ------------------------------------------------------------------ hardening

def test_greedy_harden_is_a_permutation():
    rng = np.random.default_rng(32)
    for _ in range(20):
        p = rng.uniform(size=(6, 6))
        pi = greedy_harden(p)
        assert sorted(pi) == list(range(6))


def test_greedy_harden_matches_hungarian_on_near_hard_matrices():
    rng = np.random.default_rng(33)
    for _ in range(10):
        perm = rng.permutation(5)
        p = np.eye(5)[perm] * 0.9 + rng.uniform(size=(5, 5)) * 0.05
        pi = greedy_harden(p)
        _, oracle = linear_sum_assignment(-p)
        assert np.array_equal(pi, oracle)
        assert np.array_equal(pi, perm)


def test_emit_adversarial_is_valid_and_reported():
    model = make_model(34)
    attack = make_attack(35)
    for seed in range(10):
        seq = make_seq(seed, n=int(np.random.default_rng(seed).integers(2, 9)))
        out, report = emit_adversarial(seq, attack, model)
        assert len(out) == len(seq)
        assert np.all(np.diff(out.times) > 0)
        assert out.times[0] >= 0
        assert sorted(report["perm"]) == list(range(len(seq)))
        assert report["distance"] >= 0
        assert report["hinge"] >= 0
        # emitted marks are the clean marks routed through the permutation
        assert np.array_equal(out.marks, seq.marks[np.array(report["perm"])])


def test_attack_params_validation():
    with pytest.raises(ValueError):
        make_attack(tau=0.0)
    with pytest.raises(ValueError):
        make_attack(n_iter=0)
    with pytest.raises(ValueError):
        make_attack(rho_d=-1.0)


def test_gs_forward_gradient_reaches_all_generator_weights():
    model = make_model(36)
    attack = make_attack(37)
    seq = make_seq(38, n=4)
    h_emb = encode_np(model, seq.times, seq.marks)
    tape = Tape()
    a = {k: tape.leaf(v) for k, v in attack.values.items()}
    loss = attack_loss(lift(model.values), a, seq.times, seq.marks, NUM_MARKS,
                       h_emb, tau=1.0, n_iter=10, rho_d=1.0, rho_ab=10.0,
                       rho_c=1.0)
    grads = backward(tape, loss)
    for name, t in a.items():
        assert t.node in grads, f"no gradient reached {name}"
        if name == "gs_b2":
            # a constant added to every score cancels in the very first row
            # normalization, so the score bias is provably gradient-free
            # (up to float roundoff of the cancellation)
            assert np.all(np.abs(grads[t.node]) < 1e-12)
        else:
            assert np.any(grads[t.node] != 0.0), f"zero gradient at {name}"
