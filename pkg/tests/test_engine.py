import math
from dataclasses import replace

import numpy as np
import pytest

from fastrp import engine
from fastrp.engine import (
    FastRpConfig,
    compute_normalizer,
    compute_power_embeddings,
    dense_oracle_embed,
    fastrp_embed,
    merge_weighted,
    normalized_similarity_dense,
    sweep,
    sweep_grid,
)
from fastrp.errors import NumericError, ShapeError
from fastrp.graph import apply_transition, from_pairs, generate_erdos_renyi, transition_power_dense
from fastrp.projection import sample


def rel_fro(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class TestNormalizer:
    def test_beta_zero_is_identity(self, k3):
        assert compute_normalizer(k3, 0.0).tolist() == [1.0, 1.0, 1.0]

    def test_triangle_beta_minus_one(self, k3):
        np.testing.assert_allclose(compute_normalizer(k3, -1.0), [3.0, 3.0, 3.0])

    def test_path_beta_minus_half(self, p3):
        np.testing.assert_allclose(compute_normalizer(p3, -0.5), [2.0, math.sqrt(2), 2.0])

    def test_isolated_node_gets_zero(self):
        g = from_pairs([(0, 1)], n=3)
        np.testing.assert_allclose(compute_normalizer(g, -0.5), [math.sqrt(2), math.sqrt(2), 0.0])

    def test_edgeless_graph_rejected(self):
        with pytest.raises(ValueError):
            compute_normalizer(from_pairs([], n=2), 0.0)


class TestConfig:
    def test_defaults(self):
        cfg = FastRpConfig()
        assert (cfg.d, cfg.k, cfg.weights[:3]) == (512, 4, (0.0, 0.0, 1.0))
        assert cfg.sparsity(10000) == 100.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(k=2, weights=(1.0,)),
            dict(k=2, weights=(0.0, 0.0)),
            dict(d=0),
            dict(k=1, weights=(-1.0,)),
            dict(s=0.5),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            FastRpConfig(**kwargs)

    def test_dict_round_trip(self):
        cfg = FastRpConfig(d=8, k=2, beta=-0.3, weights=(0.5, 1), kind="gaussian", seed=9)
        assert FastRpConfig.from_dict(cfg.to_dict()) == cfg


class TestPowerEmbeddings:
    def test_single_step_reduction(self, er64):
        cfg = FastRpConfig(d=16, k=1, beta=0.0, weights=(1.0,), kind="gaussian", seed=2)
        powers = compute_power_embeddings(er64, cfg)
        r32 = powers.projection.dense.astype(np.float32)
        np.testing.assert_array_equal(powers.matrices[0], apply_transition(er64, r32))

    def test_triangle_rows_average_the_other_two(self, k3):
        cfg = FastRpConfig(d=6, k=1, beta=-0.7, weights=(1.0,), s=2.0, seed=4)
        powers = compute_power_embeddings(k3, cfg)
        lr = powers.projection.scaled_rows(compute_normalizer(k3, -0.7)).astype(np.float64)
        n1 = powers.matrices[0]
        for u, v, w in [(0, 1, 2), (1, 0, 2), (2, 0, 1)]:
            np.testing.assert_allclose(n1[u], 0.5 * (lr[v] + lr[w]), rtol=1e-6)

    @pytest.mark.parametrize("kind", ["very-sparse", "gaussian"])
    def test_each_power_matches_dense(self, er64, kind):
        cfg = FastRpConfig(d=24, k=4, beta=-0.5, weights=(0, 0, 1, 1), kind=kind, seed=8)
        powers = compute_power_embeddings(er64, cfg)
        r = powers.projection.to_dense()
        lmat = np.diag(compute_normalizer(er64, -0.5))
        for i, mat in enumerate(powers.matrices, start=1):
            expected = transition_power_dense(er64, i) @ lmat @ r
            assert rel_fro(mat, expected) < 1e-4

    def test_overflow_names_stage(self, er64):
        cfg = FastRpConfig(d=4, k=2, beta=-40.0, weights=(1, 1), seed=1)
        with pytest.raises(NumericError, match="L @ R"):
            compute_power_embeddings(er64, cfg)

    def test_projection_shape_checked(self, er64):
        cfg = FastRpConfig(d=4, k=1, weights=(1,))
        other = sample(replace(cfg, d=5).projection_spec(64))
        with pytest.raises(ShapeError):
            compute_power_embeddings(er64, cfg, other)


class TestMerge:
    @pytest.fixture
    def powers(self, er64):
        return compute_power_embeddings(er64, FastRpConfig(d=16, k=4, beta=-0.5, seed=3))

    def test_selector(self, powers):
        np.testing.assert_array_equal(merge_weighted(powers, (1, 0, 0, 0)), powers.matrices[0])

    def test_default_shape(self, powers):
        expected = powers.matrices[2] + np.float32(0.5) * powers.matrices[3]
        np.testing.assert_array_equal(merge_weighted(powers, (0, 0, 1, 0.5)), expected)

    def test_length_mismatch(self, powers):
        with pytest.raises(ShapeError):
            merge_weighted(powers, (1, 1))

    def test_streaming_embed_is_bit_identical(self, er64, powers):
        cfg = FastRpConfig(d=16, k=4, beta=-0.5, weights=(0.3, 0, 1, 2.5), seed=3)
        np.testing.assert_array_equal(fastrp_embed(er64, cfg), merge_weighted(powers, cfg.weights))


class TestFastRp:
    def test_randne_order_one_baseline(self, er64):
        cfg = FastRpConfig(d=8, k=1, beta=0.0, weights=(1,), kind="gaussian", seed=1)
        r = sample(cfg.projection_spec(64)).dense
        np.testing.assert_allclose(fastrp_embed(er64, cfg), transition_power_dense(er64, 1) @ r, rtol=1e-5, atol=1e-7)

    def test_default_config_matches_oracle(self, er64):
        cfg = FastRpConfig(seed=5)
        r = sample(cfg.projection_spec(64))
        assert rel_fro(fastrp_embed(er64, cfg, r), dense_oracle_embed(er64, cfg, r.to_dense())) < 1e-4

    def test_beta_zero_neutrality(self, er64):
        cfg = FastRpConfig(d=16, beta=0.0, seed=2)
        r = sample(cfg.projection_spec(64))
        plain = np.zeros((64, 16), np.float32)
        x = r.to_dense().astype(np.float32)
        for w in cfg.weights:
            x = apply_transition(er64, x)
            if w:
                plain += np.float32(w) * x
        np.testing.assert_array_equal(fastrp_embed(er64, cfg, r), plain)

    def test_linearity(self, er64):
        a = FastRpConfig(d=16, weights=(0, 0.5, 1, 0), seed=6)
        b = replace(a, weights=(0.25, 0, 2, 3))
        ab = replace(a, weights=(0.25, 0.5, 3, 3))
        lhs = fastrp_embed(er64, ab)
        rhs = fastrp_embed(er64, a) + fastrp_embed(er64, b)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-5, atol=1e-6 * np.abs(lhs).max())

    @pytest.mark.parametrize("c", [0.5, 2.0, 8.0])
    def test_scale_equivariance(self, er64, c):
        cfg = FastRpConfig(d=16, weights=(0, 1, 1, 3), seed=6)
        scaled = replace(cfg, weights=tuple(c * w for w in cfg.weights))
        np.testing.assert_array_equal(fastrp_embed(er64, scaled), c * fastrp_embed(er64, cfg))

    def test_isolated_nodes_embed_to_zero(self):
        g = from_pairs([(0, 1), (1, 2), (2, 0), (2, 3)], n=6)
        emb = fastrp_embed(g, FastRpConfig(d=8, seed=1))
        assert np.all(emb[4:] == 0) and np.all(np.isfinite(emb))

    def test_normalize_rows_flag(self, er64):
        emb = fastrp_embed(er64, FastRpConfig(d=16, seed=1, normalize_rows=True))
        np.testing.assert_allclose(np.linalg.norm(emb, axis=1), 1.0, rtol=1e-5)

    def test_deterministic(self, er64):
        cfg = FastRpConfig(d=32, seed=77)
        assert fastrp_embed(er64, cfg).tobytes() == fastrp_embed(er64, cfg).tobytes()


class TestDenseOracle:
    def test_triangle_second_power(self, k3):
        cfg = FastRpConfig(d=2, k=2, beta=0.0, weights=(0, 1))
        r = np.array([[1.0, -2.0], [0.5, 0.0], [3.0, 1.0]])
        a2 = np.full((3, 3), 0.25) + 0.25 * np.eye(3)
        np.testing.assert_allclose(dense_oracle_embed(k3, cfg, r), a2 @ r, atol=1e-15)

    def test_k1_beta0(self, er64):
        cfg = FastRpConfig(d=3, k=1, beta=0.0, weights=(1,))
        r = np.random.default_rng(0).standard_normal((64, 3))
        np.testing.assert_allclose(dense_oracle_embed(er64, cfg, r), transition_power_dense(er64, 1) @ r)

    def test_refuses_large(self):
        g = generate_erdos_renyi(600, 1000, 0)
        with pytest.raises(ValueError, match="refused"):
            dense_oracle_embed(g, FastRpConfig(d=2), np.zeros((600, 2)))

    def test_similarity_matrix_projects_to_oracle(self, er64):
        cfg = FastRpConfig(d=8, seed=3)
        r = sample(cfg.projection_spec(64)).to_dense()
        np.testing.assert_allclose(normalized_similarity_dense(er64, cfg) @ r, dense_oracle_embed(er64, cfg, r))

    def test_cross_check_many_seeds(self, er64):
        worst = 0.0
        for seed in range(50):
            cfg = FastRpConfig(d=16, beta=-0.5, weights=(0.2, 0.1, 1, 2), seed=seed)
            r = sample(cfg.projection_spec(64))
            worst = max(worst, rel_fro(fastrp_embed(er64, cfg, r), dense_oracle_embed(er64, cfg, r.to_dense())))
        assert worst < 1e-4


class TestSweep:
    @pytest.fixture
    def counter(self, monkeypatch):
        calls = {"n": 0}
        real = engine.apply_transition

        def spy(*args, **kwargs):
            calls["n"] += 1
            return real(*args, **kwargs)

        monkeypatch.setattr(engine, "apply_transition", spy)
        return calls

    def test_reweighting_needs_no_propagation(self, er64, counter):
        powers = compute_power_embeddings(er64, FastRpConfig(d=8, seed=1))
        counter["n"] = 0
        grid = [(0, 0, 1, w) for w in (0.25, 1, 4)]
        res = sweep(powers, grid, lambda emb: float(emb[:, 0].sum()))
        assert counter["n"] == 0
        assert res.merges == 3 and len(res.table) == 3

    def test_loop_structure(self, er64, counter):
        betas = np.linspace(-1, 0, 5)
        grid = [(0, 0, 1, 2.0**e) for e in range(-3, 5)]
        res = sweep_grid(er64, FastRpConfig(d=8, seed=1), betas, grid, lambda emb: -float(np.abs(emb).mean()))
        assert res.power_computations == 5
        assert res.merges == 40
        assert counter["n"] == 5 * 4
        assert len(res.table) == 40

    def test_argmax(self, er64):
        powers = compute_power_embeddings(er64, FastRpConfig(d=8, seed=1))
        grid = [(0, 0, 1, w) for w in (0.125, 1, 8, 64)]
        res = sweep(powers, grid, lambda emb: -abs(float(np.linalg.norm(emb)) - 1e9))
        assert res.best_weights == (0, 0, 1, 64)

    def test_empty_grid(self, er64):
        powers = compute_power_embeddings(er64, FastRpConfig(d=8, seed=1))
        with pytest.raises(ValueError):
            sweep(powers, [], lambda emb: 0.0)
        with pytest.raises(ValueError):
            sweep_grid(er64, FastRpConfig(d=8), [], [(0, 0, 1, 1)], lambda emb: 0.0)
