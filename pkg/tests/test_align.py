import math

import numpy as np
import pytest

from mmfnd import align
from mmfnd import tensor as T
from mmfnd.errors import ConfigError
from mmfnd.gradcheck import finite_diff_check
from mmfnd.rng import Rng


def _unit_rows(gen, n, d):
    e = gen.normal(size=(n, d))
    return e / np.linalg.norm(e, axis=1, keepdims=True)


def test_shared_encode_identity_345():
    w = T.Param("w", np.eye(4))
    b = T.Param("b", np.zeros(4))
    out = align.shared_encode(T.Tensor(np.array([3.0, 4.0, 0.0, 0.0])), w, b)
    np.testing.assert_allclose(out.data, [0.6, 0.8, 0.0, 0.0])


def test_shared_encode_unit_norm_everywhere():
    gen = Rng(31).stream("shared-norm")
    w = T.Param("w", gen.normal(size=(6, 6)))
    b = T.Param("b", gen.normal(size=6))
    for _ in range(1000):
        out = align.shared_encode(T.Tensor(gen.normal(size=6)), w, b)
        assert abs(np.linalg.norm(out.data) - 1.0) < 1e-9


def test_shared_encode_gradcheck():
    gen = Rng(32).stream("shared-grad")
    w = T.Param("w", gen.normal(size=(5, 5)))
    b = T.Param("b", gen.normal(size=5))
    r = gen.normal(size=5)
    weights = gen.normal(size=5)

    def f():
        return T.tsum(T.mul(align.shared_encode(T.Tensor(r), w, b), T.Tensor(weights)))

    assert finite_diff_check(f, [w, b]).max_rel_err < 1e-4


def test_similarity_singleton():
    e = T.Tensor(np.array([[1.0, 0.0]]))
    p = align.similarity_matrix(e, e, tau=1.0)
    np.testing.assert_allclose(p.data, [[1.0]])


def test_similarity_orthogonal_pair_matches_analytic_value():
    e = T.Tensor(np.array([[1.0, 0.0], [0.0, 1.0]]))
    p = align.similarity_matrix(e, e, tau=1.0)
    diag = math.e / (math.e + 1.0)  # about 0.73106
    np.testing.assert_allclose(p.data, [[diag, 1 - diag], [1 - diag, diag]], atol=1e-12)


def test_similarity_identical_embeddings_uniform():
    row = np.array([0.6, 0.8])
    e = T.Tensor(np.tile(row, (4, 1)))
    p = align.similarity_matrix(e, e, tau=0.5)
    np.testing.assert_allclose(p.data, np.full((4, 4), 0.25), atol=1e-12)


def test_similarity_rejects_bad_temperature():
    e = T.Tensor(np.eye(2))
    with pytest.raises(ConfigError):
        align.similarity_matrix(e, e, tau=0.0)
    with pytest.raises(ConfigError):
        align.similarity_matrix(e, e, tau=-1.0)


def test_similarity_rows_are_distributions():
    gen = Rng(33).stream("sim-rows")
    for _ in range(50):
        n = int(gen.integers(1, 6))
        e_a = T.Tensor(_unit_rows(gen, n, 8))
        e_b = T.Tensor(_unit_rows(gen, n, 8))
        p = align.similarity_matrix(e_a, e_b, tau=0.07).data
        assert np.all(p >= 0)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)


def _oracle_infonce(e_v, e_t, tau):
    # plain-python bidirectional InfoNCE over matched pairs
    n, d = len(e_v), len(e_v[0])

    def direction(a, b):
        total = 0.0
        for i in range(n):
            logits = [sum(a[i][k] * b[j][k] for k in range(d)) / tau for j in range(n)]
            mx = max(logits)
            denom = sum(math.exp(v - mx) for v in logits)
            p_ii = math.exp(logits[i] - mx) / denom
            total += -math.log(p_ii)
        return total / n

    return 0.5 * (direction(e_v, e_t) + direction(e_t, e_v))


def test_contrastive_loss_singleton_is_zero():
    p = T.Tensor(np.array([[1.0]]))
    loss = align.contrastive_loss(p, p)
    assert loss.item() == pytest.approx(0.0, abs=1e-12)


def test_contrastive_loss_pinned_orthogonal_case():
    e = T.Tensor(np.array([[1.0, 0.0], [0.0, 1.0]]))
    p_vt = align.similarity_matrix(e, e, tau=1.0)
    p_tv = align.similarity_matrix(e, e, tau=1.0)
    loss = align.contrastive_loss(p_vt, p_tv)
    expected = -math.log(math.e / (math.e + 1.0))  # about 0.31326
    assert loss.item() == pytest.approx(expected, abs=1e-12)
    assert loss.item() == pytest.approx(0.31326, abs=5e-6)


def test_contrastive_loss_matches_brute_force_oracle():
    gen = Rng(34).stream("infonce-oracle")
    for _ in range(10):
        n = int(gen.integers(2, 5))
        e_v = _unit_rows(gen, n, 6)
        e_t = _unit_rows(gen, n, 6)
        tau = float(gen.uniform(0.05, 2.0))
        p_vt = align.similarity_matrix(T.Tensor(e_v), T.Tensor(e_t), tau)
        p_tv = align.similarity_matrix(T.Tensor(e_t), T.Tensor(e_v), tau)
        loss = align.contrastive_loss(p_vt, p_tv).item()
        expected = _oracle_infonce(e_v.tolist(), e_t.tolist(), tau)
        assert loss == pytest.approx(expected, abs=1e-10)


def test_contrastive_loss_swap_symmetry():
    gen = Rng(35).stream("infonce-swap")
    e_v = T.Tensor(_unit_rows(gen, 4, 6))
    e_t = T.Tensor(_unit_rows(gen, 4, 6))
    p_vt = align.similarity_matrix(e_v, e_t, 0.5)
    p_tv = align.similarity_matrix(e_t, e_v, 0.5)
    assert align.contrastive_loss(p_vt, p_tv).item() == align.contrastive_loss(p_tv, p_vt).item()


def test_identical_embedding_sets_make_directions_equal():
    gen = Rng(36).stream("infonce-ident")
    e = _unit_rows(gen, 3, 5)
    p_vt = align.similarity_matrix(T.Tensor(e), T.Tensor(e), 0.2)
    p_tv = align.similarity_matrix(T.Tensor(e), T.Tensor(e), 0.2)
    np.testing.assert_array_equal(p_vt.data, p_tv.data)


def test_temperature_limit_reaches_log_n():
    gen = Rng(37).stream("infonce-temp")
    for n in (2, 4, 8):
        e_v = T.Tensor(_unit_rows(gen, n, 8))
        e_t = T.Tensor(_unit_rows(gen, n, 8))
        p_vt = align.similarity_matrix(e_v, e_t, tau=1e6)
        p_tv = align.similarity_matrix(e_t, e_v, tau=1e6)
        loss = align.contrastive_loss(p_vt, p_tv).item()
        assert loss == pytest.approx(math.log(n), abs=1e-3)


def test_raising_positive_pair_logit_lowers_loss():
    gen = Rng(38).stream("infonce-mono")
    for _ in range(20):
        n = 4
        logits = gen.normal(size=(n, n))
        base = align.contrastive_loss(
            T.softmax_rows(T.Tensor(logits)), T.softmax_rows(T.Tensor(logits.T.copy()))
        ).item()
        i = int(gen.integers(0, n))
        bumped = logits.copy()
        bumped[i, i] += float(gen.uniform(0.05, 1.0))
        after = align.contrastive_loss(
            T.softmax_rows(T.Tensor(bumped)), T.softmax_rows(T.Tensor(bumped.T.copy()))
        ).item()
        assert after < base


def test_clamp_events_are_reported():
    p = np.array([[1e-15, 1.0 - 1e-15], [0.5, 0.5]])
    diagnostics = {}
    align.contrastive_loss(T.Tensor(p), T.Tensor(p), diagnostics)
    assert diagnostics["clamped_log_events"] == 2
    assert math.isfinite(align.contrastive_loss(T.Tensor(p), T.Tensor(p)).item())


def test_full_contrastive_gradcheck():
    gen = Rng(39).stream("infonce-grad")
    n, d = 3, 4
    w_st = T.Param("w_st", gen.normal(size=(d, d)))
    b_st = T.Param("b_st", gen.normal(size=d) * 0.1)
    w_sv = T.Param("w_sv", gen.normal(size=(d, d)))
    b_sv = T.Param("b_sv", gen.normal(size=d) * 0.1)
    r_ts = gen.normal(size=(n, d))
    r_vs = gen.normal(size=(n, d))

    def f():
        e_t = T.stack_rows([align.shared_encode(T.Tensor(r), w_st, b_st) for r in r_ts])
        e_v = T.stack_rows([align.shared_encode(T.Tensor(r), w_sv, b_sv) for r in r_vs])
        p_vt = align.similarity_matrix(e_v, e_t, tau=0.5)
        p_tv = align.similarity_matrix(e_t, e_v, tau=0.5)
        return align.contrastive_loss(p_vt, p_tv)

    assert finite_diff_check(f, [w_st, b_st, w_sv, b_sv]).max_rel_err < 1e-4
