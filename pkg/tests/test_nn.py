import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from helpers import KINK_MARGIN, kink_distance, max_relative_error, numeric_grads, random_problem
from noise_eval.errors import ConfigError, NumericError, ShapeError
from noise_eval.nn import (
    Arch,
    Network,
    NetworkConfig,
    forward,
    init_network,
    load_network,
    loss_and_grad,
    read_metadata,
    save_network,
)


def zero_net(d, arch=Arch.MLP):
    net = init_network(NetworkConfig(input_dim=d, arch=arch))
    return Network(net.config, [np.zeros_like(p) for p in net.params])


class TestConfig:
    def test_hidden_width_small_input(self):
        cfg = NetworkConfig(input_dim=10)
        assert cfg.hidden_dim == 64
        assert cfg.layer_shapes() == [(10, 64), (64, 64), (64, 64), (64, 10)]

    def test_hidden_width_large_input(self):
        assert NetworkConfig(input_dim=100).hidden_dim == 256
        assert NetworkConfig(input_dim=64).hidden_dim == 64
        assert NetworkConfig(input_dim=65).hidden_dim == 256

    def test_resmlp_shapes(self):
        cfg = NetworkConfig(input_dim=3, arch="resmlp", hidden_dim=8)
        assert cfg.depth == 5
        assert cfg.layer_shapes() == [(3, 8)] + [(8, 8)] * 10 + [(8, 3)]

    def test_depth_one_is_single_linear_map(self):
        assert NetworkConfig(input_dim=4, depth=1).layer_shapes() == [(4, 4)]

    @pytest.mark.parametrize(
        "kwargs, field",
        [
            ({"input_dim": 0}, "net.input_dim"),
            ({"input_dim": 3, "depth": 0}, "net.depth"),
            ({"input_dim": 3, "hidden_dim": 0}, "net.hidden_dim"),
            ({"input_dim": 3, "init": "xavier"}, "net.init"),
        ],
    )
    def test_invalid_config_names_field(self, kwargs, field):
        with pytest.raises(ConfigError, match=field):
            NetworkConfig(**kwargs)

    def test_unknown_arch(self):
        with pytest.raises(ValueError):
            NetworkConfig(input_dim=3, arch="transformer")


class TestForward:
    @pytest.mark.parametrize("arch", list(Arch))
    def test_zero_network_outputs_zero(self, arch, rng):
        out, _ = forward(zero_net(5, arch), rng.standard_normal((7, 5)))
        assert out.shape == (7, 5)
        assert np.all(out == 0)

    def test_hand_built_relu(self):
        # d=1: identity, ReLU, identity
        cfg = NetworkConfig(input_dim=1, hidden_dim=1, depth=2, dtype="float64")
        one, zero = np.ones((1, 1)), np.zeros(1)
        net = Network(cfg, [one, zero, one, zero])
        out, _ = forward(net, np.array([[3.0], [-3.0]]))
        assert out[:, 0].tolist() == [3.0, 0.0]

    @pytest.mark.parametrize("arch", list(Arch))
    def test_duplicate_rows_give_identical_outputs(self, arch, rng):
        net = init_network(NetworkConfig(input_dim=4, arch=arch, seed=3))
        x = rng.standard_normal((1, 4))
        out, _ = forward(net, np.vstack([x, x]))
        assert np.array_equal(out[0], out[1])

    def test_deterministic(self, rng):
        x = rng.standard_normal((6, 5))
        a, _ = forward(init_network(NetworkConfig(input_dim=5, seed=9)), x)
        b, _ = forward(init_network(NetworkConfig(input_dim=5, seed=9)), x)
        assert np.array_equal(a, b)

    def test_seed_changes_weights(self):
        a = init_network(NetworkConfig(input_dim=5, seed=1))
        b = init_network(NetworkConfig(input_dim=5, seed=2))
        assert not np.array_equal(a.params[0], b.params[0])

    def test_float32_by_default(self, rng):
        net = init_network(NetworkConfig(input_dim=3))
        assert all(p.dtype == np.float32 for p in net.params)
        out, _ = forward(net, rng.standard_normal((2, 3)))
        assert out.dtype == np.float32

    def test_he_init_has_zero_bias(self):
        net = init_network(NetworkConfig(input_dim=6, init="he"))
        assert all(np.all(b == 0) for b in net.params[1::2])

    def test_uniform_init_bounds(self):
        net = init_network(NetworkConfig(input_dim=6, hidden_dim=20))
        for w, b in zip(net.params[::2], net.params[1::2]):
            bound = 1 / np.sqrt(w.shape[0])
            assert np.all(np.abs(w) <= bound) and np.all(np.abs(b) <= bound)

    def test_wrong_width(self, rng):
        net = init_network(NetworkConfig(input_dim=3))
        with pytest.raises(ShapeError):
            forward(net, rng.standard_normal((2, 4)))

    def test_non_finite_input(self):
        net = init_network(NetworkConfig(input_dim=2))
        with pytest.raises(NumericError):
            forward(net, np.array([[0.0, np.nan]]))

    @given(seed=st.integers(0, 2**31), b=st.integers(1, 8), arch=st.sampled_from(list(Arch)))
    def test_permuting_rows_permutes_outputs(self, seed, b, arch):
        gen = np.random.default_rng(seed)
        net = init_network(NetworkConfig(input_dim=3, hidden_dim=8, arch=arch, seed=seed % 1000))
        x = gen.standard_normal((b, 3))
        perm = gen.permutation(b)
        out, _ = forward(net, x)
        out_p, _ = forward(net, x[perm])
        np.testing.assert_allclose(out_p, out[perm], rtol=1e-6, atol=1e-6)


class TestLoss:
    def test_zero_net_loss_is_mean_squared_target(self, rng):
        net = zero_net(4)
        clean = rng.standard_normal((3, 4))
        t = np.abs(rng.standard_normal((3, 4)))
        loss, _ = loss_and_grad(net, clean, [clean + t], [t])
        assert loss == pytest.approx(np.sum(t**2) / 6, rel=1e-6)

    def test_perfect_fit_has_zero_loss_and_gradient(self):
        # output = relu(x): zero on non-positive clean rows, equal to target on noised rows
        cfg = NetworkConfig(input_dim=1, hidden_dim=1, depth=2, dtype="float64")
        one, zero = np.ones((1, 1)), np.zeros(1)
        net = Network(cfg, [one, zero, one, zero])
        clean = np.array([[-1.0], [-2.0]])
        noised = np.array([[0.5], [3.0]])
        loss, grads = loss_and_grad(net, clean, [noised], [noised])
        assert loss == 0.0
        assert all(np.all(g == 0) for g in grads)

    def test_gradient_matches_finite_differences_d5_b3(self):
        gen = np.random.default_rng(7)
        cfg = NetworkConfig(input_dim=5, hidden_dim=16, seed=7, dtype="float64")
        net = init_network(cfg)
        clean = gen.standard_normal((3, 5))
        noised = [clean + gen.standard_normal((3, 5)) for _ in range(3)]
        targets = [np.abs(x - clean) for x in noised]
        _, analytic = loss_and_grad(net, clean, noised, targets)
        assert max_relative_error(analytic, numeric_grads(net, clean, noised, targets)) < 1e-4

    @given(seed=st.integers(0, 2**31))
    def test_gradient_matches_finite_differences_random(self, seed):
        net, clean, noised, targets = random_problem(np.random.default_rng(seed), max_d=4, max_b=3)
        assume(kink_distance(net, clean, noised) > KINK_MARGIN)
        _, analytic = loss_and_grad(net, clean, noised, targets)
        assert max_relative_error(analytic, numeric_grads(net, clean, noised, targets)) < 1e-4

    @given(seed=st.integers(0, 2**31))
    def test_loss_non_negative(self, seed):
        net, clean, noised, targets = random_problem(np.random.default_rng(seed))
        loss, grads = loss_and_grad(net, clean, noised, targets)
        assert loss >= 0
        assert [g.shape for g in grads] == [p.shape for p in net.params]

    def test_mismatched_lists(self, rng):
        net = zero_net(2)
        x = rng.standard_normal((2, 2))
        with pytest.raises(ShapeError):
            loss_and_grad(net, x, [x, x], [np.abs(x)])

    def test_mismatched_shapes(self, rng):
        net = zero_net(2)
        x = rng.standard_normal((2, 2))
        with pytest.raises(ShapeError):
            loss_and_grad(net, x, [x[:1]], [np.abs(x[:1])])

    def test_negative_target(self, rng):
        net = zero_net(2)
        x = rng.standard_normal((2, 2))
        with pytest.raises(ValueError):
            loss_and_grad(net, x, [x], [-np.ones((2, 2))])

    def test_non_finite_target(self, rng):
        net = zero_net(2)
        x = rng.standard_normal((2, 2))
        with pytest.raises(NumericError):
            loss_and_grad(net, x, [x], [np.full((2, 2), np.inf)])


class TestSerialization:
    @pytest.mark.parametrize("arch", list(Arch))
    def test_round_trip_is_bit_exact(self, arch, tmp_path):
        net = init_network(NetworkConfig(input_dim=7, arch=arch, seed=5))
        path = save_network(net, tmp_path / "m.npz", seed=5, note="x")
        back = load_network(path)
        assert back.config == net.config
        assert all(a.tobytes() == b.tobytes() and a.dtype == b.dtype
                   for a, b in zip(net.params, back.params))
        assert read_metadata(path) == {"seed": 5, "note": "x"}

    def test_rejects_other_format_version(self, tmp_path):
        import json

        net = init_network(NetworkConfig(input_dim=2))
        path = tmp_path / "m.npz"
        header = {"format_version": 99, "config": net.config.to_dict(), "metadata": {}}
        np.savez(path, header=np.array(json.dumps(header)),
                 **{f"p{i}": p for i, p in enumerate(net.params)})
        with pytest.raises(ValueError, match="format version"):
            load_network(path)
