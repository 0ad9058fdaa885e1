"""Match-vector composition, the ReLU head, and the bounded score map."""

import math

import numpy as np
import pytest

from regmapr.corpus import TaskKind
from regmapr.encoder import RegularizationConfig
from regmapr.matcher import (
    HeadParams,
    compose,
    compose_backward,
    compose_width,
    head_backward,
    head_forward,
    init_head_params,
    relatedness_score,
    relatedness_score_backward,
)


def compose_oracle(h1, h2, task):
    """Element-by-element loop per the block layout."""
    out = []
    if task is not TaskKind.RELATEDNESS:
        out.extend(h1)
        out.extend(h2)
    for a, b in zip(h1, h2):
        out.append(abs(a - b))
    for a, b in zip(h1, h2):
        out.append(a * b)
    return np.array(out)


class TestCompose:
    def test_entailment_example(self):
        v, _ = compose(np.array([[1.0, 2.0]]), np.array([[3.0, 1.0]]), TaskKind.ENTAILMENT3)
        np.testing.assert_array_equal(v[0], [1, 2, 3, 1, 2, 1, 3, 2])

    def test_identical_inputs_relatedness(self):
        h = np.array([[0.5, -1.5, 2.0]])
        v, _ = compose(h, h, TaskKind.RELATEDNESS)
        np.testing.assert_array_equal(v[0, :3], np.zeros(3))
        np.testing.assert_array_equal(v[0, 3:], h[0] * h[0])

    def test_widths(self):
        assert compose_width(TaskKind.ENTAILMENT3, 600) == 4800
        assert compose_width(TaskKind.PARAPHRASE2, 600) == 4800
        assert compose_width(TaskKind.RELATEDNESS, 600) == 2400

    @pytest.mark.parametrize("task", list(TaskKind))
    def test_matches_scalar_oracle(self, task):
        rng = np.random.default_rng(0)
        for _ in range(10):
            h1 = rng.normal(size=(3, 6))
            h2 = rng.normal(size=(3, 6))
            v, _ = compose(h1, h2, task)
            assert v.shape[1] == compose_width(task, 3)
            for b in range(3):
                np.testing.assert_allclose(v[b], compose_oracle(h1[b], h2[b], task), atol=1e-15)

    def test_abs_block_nonnegative(self):
        rng = np.random.default_rng(1)
        h1 = rng.normal(size=(4, 5))
        h2 = rng.normal(size=(4, 5))
        v, _ = compose(h1, h2, TaskKind.ENTAILMENT3)
        assert np.all(v[:, 10:15] >= 0)

    def test_relatedness_swap_invariant(self):
        rng = np.random.default_rng(2)
        h1 = rng.normal(size=(2, 4))
        h2 = rng.normal(size=(2, 4))
        a, _ = compose(h1, h2, TaskKind.RELATEDNESS)
        b, _ = compose(h2, h1, TaskKind.RELATEDNESS)
        np.testing.assert_array_equal(a, b)

    def test_asymmetric_swap_swaps_identity_blocks(self):
        rng = np.random.default_rng(3)
        h1 = rng.normal(size=(1, 4))
        h2 = rng.normal(size=(1, 4))
        a, _ = compose(h1, h2, TaskKind.ENTAILMENT3)
        b, _ = compose(h2, h1, TaskKind.ENTAILMENT3)
        np.testing.assert_array_equal(a[:, :4], b[:, 4:8])
        np.testing.assert_array_equal(a[:, 4:8], b[:, :4])
        np.testing.assert_array_equal(a[:, 8:], b[:, 8:])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            compose(np.zeros((1, 4)), np.zeros((1, 5)), TaskKind.ENTAILMENT3)
        with pytest.raises(ValueError):
            compose(np.zeros(4), np.zeros(4), TaskKind.ENTAILMENT3)


class TestComposeBackward:
    @pytest.mark.parametrize("task", list(TaskKind))
    def test_matches_fd(self, task):
        rng = np.random.default_rng(4)
        h1 = rng.normal(size=(2, 5))
        h2 = rng.normal(size=(2, 5))
        # Keep probes away from the |.| kink at h1 == h2.
        close = np.abs(h1 - h2) < 1e-3
        h1[close] += 0.1
        width = 2 * 5 if task is TaskKind.RELATEDNESS else 4 * 5
        U = rng.normal(size=(2, width))

        def loss():
            v, _ = compose(h1, h2, task)
            return float((v * U).sum())

        v, cache = compose(h1, h2, task)
        dh1, dh2 = compose_backward(cache, U)
        step = 1e-6
        for arr, grad in ((h1, dh1), (h2, dh2)):
            for _ in range(8):
                b = int(rng.integers(2))
                j = int(rng.integers(5))
                orig = arr[b, j]
                arr[b, j] = orig + step
                hi = loss()
                arr[b, j] = orig - step
                lo = loss()
                arr[b, j] = orig
                fd = (hi - lo) / (2 * step)
                assert abs(grad[b, j] - fd) < 1e-6, (task, fd, grad[b, j])

    def test_sign_zero_convention(self):
        # At h1 == h2 the |.| block contributes nothing to either side.
        h = np.ones((1, 3))
        _, cache = compose(h, h.copy(), TaskKind.RELATEDNESS)
        dv = np.zeros((1, 6))
        dv[0, :3] = 5.0  # gradient only on the |diff| block
        dh1, dh2 = compose_backward(cache, dv)
        np.testing.assert_array_equal(dh1, np.zeros((1, 3)))
        np.testing.assert_array_equal(dh2, np.zeros((1, 3)))


class TestHead:
    def test_zero_params_relatedness_score_one(self):
        hp = HeadParams.zeros(in_width=4, hidden=3, out_width=1)
        z, _ = head_forward(np.ones((1, 4)), hp)
        assert z[0, 0] == 0.0
        assert relatedness_score(z)[0, 0] == 1.0

    def test_score_examples(self):
        assert relatedness_score(np.array(-math.log(2.0))) == pytest.approx(0.5, abs=1e-15)
        assert relatedness_score(np.array(2.0)) == 1.0
        assert relatedness_score(np.array(0.0)) == 1.0

    def test_score_bounded(self):
        rng = np.random.default_rng(5)
        z = rng.normal(0, 50, size=1000)
        for kind in ("clamp", "neg-abs"):
            s = relatedness_score(z, kind)
            assert np.all(s >= 0.0) and np.all(s <= 1.0)

    def test_neg_abs_peak(self):
        assert relatedness_score(np.array(0.0), "neg-abs") == 1.0
        assert relatedness_score(np.array(3.0), "neg-abs") == pytest.approx(math.exp(-3))
        assert relatedness_score(np.array(-3.0), "neg-abs") == pytest.approx(math.exp(-3))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            relatedness_score(np.array(0.0), "sigmoid")
        with pytest.raises(ValueError):
            relatedness_score_backward(np.array(0.0), "sigmoid")

    def test_score_backward_matches_fd(self):
        rng = np.random.default_rng(6)
        step = 1e-7
        for kind in ("clamp", "neg-abs"):
            z = rng.normal(0, 2, size=50)
            z = z[np.abs(z) > 1e-3]  # stay off the kink at 0
            grad = relatedness_score_backward(z, kind)
            fd = (relatedness_score(z + step, kind) - relatedness_score(z - step, kind)) / (2 * step)
            np.testing.assert_allclose(grad, fd, atol=1e-6)

    def test_clamped_region_zero_grad(self):
        z = np.array([0.5, 3.0])
        np.testing.assert_array_equal(relatedness_score_backward(z), [0.0, 0.0])

    def test_eval_ignores_dropout(self):
        rng = np.random.default_rng(7)
        hp = init_head_params(rng, in_width=6, hidden=4, out_width=3)
        v = rng.normal(size=(2, 6))
        reg = RegularizationConfig(head_dropout=0.6)
        a, cache = head_forward(v, hp, reg, mode="eval", rng=np.random.default_rng(0))
        b, _ = head_forward(v, hp, reg, mode="eval", rng=np.random.default_rng(42))
        c, _ = head_forward(v, hp)
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(a, c)
        assert cache.mask is None

    def test_train_dropout_scales_survivors(self):
        rng = np.random.default_rng(8)
        hp = init_head_params(rng, in_width=6, hidden=50, out_width=2)
        v = rng.normal(size=(3, 6))
        reg = RegularizationConfig(head_dropout=0.5)
        _, cache = head_forward(v, hp, reg, mode="train", rng=rng)
        assert cache.mask is not None
        ratio = cache.dropped[cache.relu > 0] / cache.relu[cache.relu > 0]
        assert set(np.round(ratio, 12)) <= {0.0, 2.0}

    def test_explicit_mask_reused(self):
        rng = np.random.default_rng(9)
        hp = init_head_params(rng, in_width=4, hidden=3, out_width=2)
        v = rng.normal(size=(2, 4))
        mask = np.array([[2.0, 0.0, 2.0], [0.0, 2.0, 2.0]])
        z1, _ = head_forward(v, hp, RegularizationConfig(head_dropout=0.5), "train", mask=mask)
        z2, _ = head_forward(v, hp, RegularizationConfig(head_dropout=0.5), "train", mask=mask)
        np.testing.assert_array_equal(z1, z2)

    def test_width_mismatch(self):
        hp = HeadParams.zeros(in_width=4, hidden=3, out_width=2)
        with pytest.raises(ValueError):
            head_forward(np.zeros((1, 5)), hp)

    def test_head_backward_zero_upstream(self):
        rng = np.random.default_rng(10)
        hp = init_head_params(rng, in_width=4, hidden=3, out_width=2)
        _, cache = head_forward(rng.normal(size=(2, 4)), hp)
        grads, dv = head_backward(cache, np.zeros((2, 2)))
        for arr in grads.named_arrays().values():
            assert not arr.any()
        assert not dv.any()

    def test_head_backward_shape_mismatch(self):
        hp = HeadParams.zeros(in_width=4, hidden=3, out_width=2)
        _, cache = head_forward(np.zeros((2, 4)), hp)
        with pytest.raises(ValueError):
            head_backward(cache, np.zeros((2, 3)))

    @pytest.mark.parametrize("train", [False, True])
    def test_head_grads_match_fd(self, train):
        rng = np.random.default_rng(11)
        hp = init_head_params(rng, in_width=5, hidden=4, out_width=3)
        v = rng.normal(size=(2, 5))
        if train:
            reg = RegularizationConfig(head_dropout=0.4)
            _, cache0 = head_forward(v, hp, reg, "train", rng=rng)
            mask = cache0.mask
            fwd = lambda: head_forward(v, hp, reg, "train", mask=mask)
        else:
            fwd = lambda: head_forward(v, hp)
        U = rng.normal(size=(2, 3))

        def loss():
            z, cache = fwd()
            # Valid FD neighborhood: no pre-activation near the ReLU kink.
            a = cache.v @ cache.params.W1.T + cache.params.b1
            return float((z * U).sum()), bool(np.all(np.abs(a) > 1e-3))

        base, cache = fwd()
        grads, dv = head_backward(cache, U)
        named = dict(grads.named_arrays())
        named["v"] = dv
        params = dict(hp.named_arrays())
        params["v"] = v
        step = 1e-6
        for name, arr in params.items():
            g = named[name]
            for _ in range(6):
                idx = tuple(int(rng.integers(s)) for s in arr.shape)
                orig = arr[idx]
                arr[idx] = orig + step
                hi, ok_hi = loss()
                arr[idx] = orig - step
                lo, ok_lo = loss()
                arr[idx] = orig
                if not (ok_hi and ok_lo):
                    continue
                fd = (hi - lo) / (2 * step)
                assert abs(g[idx] - fd) / max(abs(fd) + abs(g[idx]), 1e-8) < 1e-4, name


class TestInitHead:
    def test_bounds_per_layer(self):
        rng = np.random.default_rng(12)
        hp = init_head_params(rng, in_width=100, hidden=25, out_width=3)
        assert np.abs(hp.W1).max() <= 0.1
        assert np.abs(hp.W2).max() <= 0.2
        assert not hp.b1.any() and not hp.b2.any()

    def test_named_arrays(self):
        hp = HeadParams.zeros(4, 3, 2)
        assert set(hp.named_arrays()) == {"head.W1", "head.b1", "head.W2", "head.b2"}
