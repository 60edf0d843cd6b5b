import numpy as np
import pytest

from tacstack.errors import NumericsError
from tacstack.numerics import (
    AdamW,
    ParameterSet,
    Rng,
    Tensor,
    bilinear_interp,
    clip,
    concat,
    conv2d,
    conv3d,
    conv_init,
    grad_check,
    linear,
    load_params,
    pad_replicate,
    relu,
    save_params,
    sigmoid,
    softmax_pair,
    tanh,
    tmax,
    tmean,
    tsum,
)


def naive_conv3d_causal(x, k, stride):
    """Seven-nested-loop oracle: window for output t ends at t*st + st - 1."""
    t_in, h, w, cin = x.shape
    kt, kh, kw, _, cout = k.shape
    st, sh, sw = stride
    ph0, ph1 = _same_pad(h, kh, sh)
    pw0, pw1 = _same_pad(w, kw, sw)
    xp = np.zeros((t_in + kt - st, h + ph0 + ph1, w + pw0 + pw1, cin))
    xp[kt - st:, ph0: ph0 + h, pw0: pw0 + w] = x
    to = t_in // st
    ho = (h + ph0 + ph1 - kh) // sh + 1
    wo = (w + pw0 + pw1 - kw) // sw + 1
    out = np.zeros((to, ho, wo, cout))
    for t in range(to):
        for i in range(ho):
            for j in range(wo):
                for a in range(kt):
                    for b in range(kh):
                        for c in range(kw):
                            for ci in range(cin):
                                out[t, i, j] += (
                                    xp[t * st + a, i * sh + b, j * sw + c, ci]
                                    * k[a, b, c, ci]
                                )
    return out


def _same_pad(n, k, s):
    o = -(-n // s)
    total = max((o - 1) * s + k - n, 0)
    return total // 2, total - total // 2


class TestConv3d:
    def test_identity_kernel(self):
        rng = Rng(0)
        x = Tensor(rng.normal((1, 4, 3, 3, 2)))
        k = np.zeros((1, 1, 1, 2, 2))
        k[0, 0, 0, 0, 0] = 1.0
        k[0, 0, 0, 1, 1] = 1.0
        out = conv3d(x, Tensor(k))
        assert np.allclose(out.data, x.data)

    def test_causality_by_construction(self):
        rng = Rng(1)
        x = rng.normal((1, 6, 4, 4, 2))
        k = Tensor(rng.normal((2, 3, 3, 2, 3)))
        base = conv3d(Tensor(x), k).data
        x2 = x.copy()
        x2[:, 5] += rng.normal((1, 4, 4, 2))
        pert = conv3d(Tensor(x2), k).data
        assert np.allclose(base[:, :5], pert[:, :5])
        assert not np.allclose(base[:, 5], pert[:, 5])

    def test_matches_loop_oracle(self):
        rng = Rng(2)
        x = rng.normal((4, 4, 3, 2))
        k = rng.normal((2, 2, 2, 2, 2))
        fast = conv3d(Tensor(x[None]), Tensor(k), stride=(1, 1, 1)).data[0]
        slow = naive_conv3d_causal(x, k, (1, 1, 1))
        assert np.max(np.abs(fast - slow)) < 1e-12

    def test_strided_matches_loop_oracle(self):
        rng = Rng(3)
        x = rng.normal((8, 6, 4, 3))
        k = rng.normal((3, 3, 3, 3, 5))
        fast = conv3d(Tensor(x[None]), Tensor(k), stride=(2, 2, 2)).data[0]
        slow = naive_conv3d_causal(x, k, (2, 2, 2))
        assert np.max(np.abs(fast - slow)) < 1e-12

    def test_zero_length_time_axis_rejected(self):
        with pytest.raises(NumericsError):
            conv3d(Tensor(np.zeros((1, 0, 3, 3, 1))), Tensor(np.zeros((1, 1, 1, 1, 1))))

    def test_channel_mismatch_rejected(self):
        with pytest.raises(NumericsError):
            conv3d(Tensor(np.zeros((1, 2, 3, 3, 2))), Tensor(np.zeros((1, 1, 1, 3, 1))))


class TestBackward:
    def test_linear_map_grad(self):
        x = np.array([1.0, 2.0, 3.0])
        w = Tensor(np.array([4.0, 5.0, 6.0]), requires_grad=True)
        loss = tsum(w * x)
        loss.backward()
        assert np.allclose(w.grad, x)

    def test_hand_chain_rule(self):
        w = Tensor(np.array(2.0), requires_grad=True)
        x, y = 3.0, 5.0
        loss = tsum((w * x - y) ** 2.0)
        loss.backward()
        assert np.isclose(w.grad, 6.0)

    def test_grad_accumulates_without_reset(self):
        w = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        for _ in range(2):
            tsum(w * w).backward()
        assert np.allclose(w.grad, 2 * 2 * w.data)

    def test_non_scalar_loss_rejected(self):
        w = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(NumericsError):
            (w * 2.0).backward()

    def test_disconnected_param_zero_grad(self):
        params = ParameterSet()
        a = params.add("a", np.ones(2))
        params.add("b", np.ones(2))
        err = grad_check(lambda: tsum(a * a), params)
        assert err < 1e-8

    def test_two_layer_network_finite_differences(self):
        rng = Rng(7)
        params = ParameterSet()
        w1 = params.add("w1", rng.normal((4, 8), 0.5))
        b1 = params.add("b1", rng.normal((8,), 0.1))
        w2 = params.add("w2", rng.normal((8, 2), 0.5))
        x = rng.normal((5, 4))
        y = rng.normal((5, 2))

        def f():
            h = tanh(linear(Tensor(x), w1, b1))
            out = linear(h, w2)
            return tsum((out - Tensor(y)) ** 2.0)

        assert grad_check(f, params, eps=1e-5) < 1e-4


class TestGradCheck:
    def test_constant_function(self):
        params = ParameterSet()
        params.add("w", np.ones(3))
        assert grad_check(lambda: Tensor(np.array(0.0)), params) == 0.0

    def test_quadratic_near_exact(self):
        params = ParameterSet()
        w = params.add("w", np.array([1.5, -2.0]))
        err = grad_check(lambda: tsum(w * w * 3.0), params, eps=1e-5)
        assert err < 1e-8


class TestOps:
    def test_mixed_op_gradients(self):
        rng = Rng(11)
        params = ParameterSet()
        w = params.add("w", rng.normal((3, 4, 2)))

        def f():
            a = relu(w) + sigmoid(w) * tanh(w)
            b = clip(a, -0.5, 0.8)
            c = concat([b, b * 2.0], axis=2)
            d = tmax(c.reshape(3, -1), axis=1)
            return tmean(d * d)

        assert grad_check(f, params, eps=1e-6) < 1e-4

    def test_pad_replicate_gradients(self):
        rng = Rng(12)
        params = ParameterSet()
        w = params.add("w", rng.normal((2, 3, 4)))

        def f():
            p = pad_replicate(w, axis=1, before=2, after=1)
            return tsum(p * p * 0.5)

        assert grad_check(f, params, eps=1e-6) < 1e-6

    def test_conv2d_gradients(self):
        rng = Rng(13)
        params = ParameterSet()
        k = params.add("k", conv_init(rng, (3, 3, 2, 3)))
        x = rng.normal((2, 5, 4, 2))

        def f():
            return tsum(conv2d(Tensor(x), k, stride=(2, 2)) ** 2.0)

        assert grad_check(f, params, eps=1e-6) < 1e-4

    def test_bilinear_interp_cell_center_and_midpoint(self):
        grid = np.arange(12, dtype=float).reshape(3, 2, 2)
        t = Tensor(grid)
        at_cell = bilinear_interp(t, np.array([[0.5, 0.0]]))
        assert np.allclose(at_cell.data[0], grid[1, 0])
        mid = bilinear_interp(t, np.array([[0.25, 0.0]]))
        assert np.allclose(mid.data[0], 0.5 * (grid[0, 0] + grid[1, 0]))

    def test_bilinear_interp_matches_scalar_oracle(self):
        rng = Rng(14)
        grid = rng.normal((5, 3, 4))
        pts = rng.uniform((20, 2))
        out = bilinear_interp(Tensor(grid), pts).data
        for n, (u, v) in enumerate(pts):
            r, q = u * 4, v * 2
            r0, q0 = min(int(r), 3), min(int(q), 1)
            fr, fq = r - r0, q - q0
            ref = (
                grid[r0, q0] * (1 - fr) * (1 - fq)
                + grid[r0, q0 + 1] * (1 - fr) * fq
                + grid[r0 + 1, q0] * fr * (1 - fq)
                + grid[r0 + 1, q0 + 1] * fr * fq
            )
            assert np.allclose(out[n], ref)

    def test_bilinear_interp_gradients(self):
        rng = Rng(15)
        params = ParameterSet()
        g = params.add("g", rng.normal((4, 3, 2)))
        pts = rng.uniform((7, 2))

        def f():
            return tsum(bilinear_interp(g, pts) ** 2.0)

        assert grad_check(f, params, eps=1e-6) < 1e-6

    def test_softmax_pair_sums_to_one(self):
        rng = Rng(16)
        x = Tensor(rng.normal((10, 2, 6)))
        s = softmax_pair(x, axis=1)
        assert np.allclose(s.data.sum(axis=1), 1.0, atol=1e-12)


class TestAdamW:
    def test_zero_lr_no_change(self):
        params = ParameterSet()
        w = params.add("w", np.array([1.0, -2.0]))
        tsum(w * w).backward()
        AdamW(params, lr=0.0).step()
        assert np.allclose(w.data, [1.0, -2.0])

    def test_pure_decay_with_zero_grad(self):
        params = ParameterSet()
        w = params.add("w", np.array([2.0]))
        w.grad = np.zeros(1)
        AdamW(params, lr=0.1, weight_decay=0.01).step()
        assert np.allclose(w.data, 2.0 * (1 - 0.1 * 0.01))

    def test_first_step_matches_hand_reference(self):
        # hand-stepped: m=0.1*1, v=0.001*1, mhat=1, vhat=1,
        # update = -lr * mhat/(sqrt(vhat)+eps)
        params = ParameterSet()
        w = params.add("w", np.array([0.5]))
        w.grad = np.ones(1)
        lr, eps = 1e-4, 1e-8
        AdamW(params, lr=lr, betas=(0.9, 0.999), eps=eps).step()
        expected = 0.5 - lr * 1.0 / (1.0 + eps)
        assert np.allclose(w.data, expected, atol=1e-15)

    def test_missing_grad_raises(self):
        params = ParameterSet()
        params.add("w", np.ones(1))
        with pytest.raises(NumericsError):
            AdamW(params).step()


class TestDeterminism:
    def _train(self, seed):
        rng = Rng(seed)
        params = ParameterSet()
        w1 = params.add("w1", rng.normal((3, 5), 0.3))
        w2 = params.add("w2", rng.normal((5, 1), 0.3))
        opt = AdamW(params, lr=1e-3)
        data_rng = Rng(seed, stream=1)
        for _ in range(100):
            x = data_rng.normal((4, 3))
            y = data_rng.normal((4, 1))
            params.zero_grad()
            loss = tmean((linear(tanh(linear(Tensor(x), w1)), w2) - Tensor(y)) ** 2.0)
            loss.backward()
            opt.step()
        return {n: t.data.copy() for n, t in params.items()}

    def test_bit_identical_hundred_steps(self):
        a = self._train(123)
        b = self._train(123)
        for n in a:
            assert np.array_equal(a[n], b[n])

    def test_rng_streams_independent_and_reproducible(self):
        assert np.array_equal(Rng(9, 4).normal((5,)), Rng(9, 4).normal((5,)))
        assert not np.array_equal(Rng(9, 4).normal((5,)), Rng(9, 5).normal((5,)))


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = Rng(21)
        params = ParameterSet()
        params.add("enc.w", rng.normal((3, 4)))
        params.add("enc.b", rng.normal((4,)))
        saved = {n: t.data.copy() for n, t in params.items()}
        path = tmp_path / "ck.tkpt"
        save_params(path, params, extra={"step": 7})
        for _, t in params.items():
            t.data = t.data * 0
        extra = load_params(path, params)
        for n, t in params.items():
            assert np.array_equal(t.data, saved[n])
        assert extra["step"] == 7

    def test_nan_barrier(self):
        t = Tensor(np.array([1.0, np.nan]))
        with pytest.raises(NumericsError):
            t.check_finite("x")
