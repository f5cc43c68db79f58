import numpy as np
import pytest

from pointkit import (
    EncoderConfig,
    InvalidConfig,
    ParseError,
    PointCloud,
    RepresentationBundle,
    SeededStream,
    WeightBank,
    ape,
    assemble,
    bundle_from_cloud,
    dump_weights,
    encode,
    fps,
    knn_group,
    load_weights,
    masked_token_indices,
    point_mlp_embed,
    project,
    tokens_from_neighborhoods,
)


@pytest.fixture(scope="module")
def cfg():
    return EncoderConfig(variant="S", prompt_length=4, d_llm=64)


@pytest.fixture(scope="module")
def bank(cfg):
    return WeightBank.generate(cfg, seed=0)


@pytest.fixture(scope="module")
def tokens(bank):
    gen = np.random.default_rng(99)
    return 0.5 * gen.standard_normal((24, 384))


class TestConfig:
    @pytest.mark.parametrize(
        "variant,expect",
        [("S", (12, 384, 1536, 6)), ("B", (12, 768, 3072, 12)), ("L", (24, 1024, 4096, 16))],
    )
    def test_variant_table(self, variant, expect):
        cfg = EncoderConfig(variant=variant)
        assert (cfg.layers, cfg.hidden_size, cfg.mlp_size, cfg.heads) == expect

    def test_explicit_fields_must_match_variant(self):
        EncoderConfig(variant="S", hidden_size=384)
        with pytest.raises(InvalidConfig):
            EncoderConfig(variant="S", hidden_size=512)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"variant": "XL"},
            {"mask_mode": "sometimes"},
            {"mask_ratio": 1.0},
            {"mask_ratio": -0.01},
            {"num_image_queries": 0},
            {"prompt_length": -1},
            {"d_llm": 0},
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(InvalidConfig):
            EncoderConfig(**kwargs)

    def test_query_count(self):
        assert EncoderConfig(num_image_queries=4).n_queries == 5
        assert EncoderConfig(num_image_queries=4, include_text_query=False).n_queries == 4


class TestBank:
    def test_tensor_count_and_order(self, bank):
        names = list(bank.tensors)
        assert len(names) == 243
        assert names[:6] == ["token_mlp.w1", "token_mlp.b1", "token_mlp.w2", "token_mlp.b2", "ape.w", "ape.b"]
        assert names[-1] == "projector.global.b3"

    def test_storage_is_readonly_float32(self, bank):
        w = bank.tensors["token_mlp.w1"]
        assert w.dtype == np.float32 and not w.flags.writeable
        assert bank.get("token_mlp.w1").dtype == np.float64

    def test_get_shape_check(self, bank):
        bank.get("ape.w", (3, 384))
        with pytest.raises(InvalidConfig):
            bank.get("ape.w", (384, 3))
        with pytest.raises(InvalidConfig):
            bank.get("no.such.tensor")

    def test_deterministic_across_calls(self, cfg, bank):
        again = WeightBank.generate(cfg, seed=0)
        for name in ("token_mlp.w1", "block0.attn.wq", "prompts.ape", "projector.global.w3"):
            assert np.array_equal(bank.tensors[name], again.tensors[name])
        other = WeightBank.generate(cfg, seed=1)
        assert not np.array_equal(bank.tensors["token_mlp.w1"], other.tensors["token_mlp.w1"])

    def test_constant_initializers(self, bank):
        assert np.all(bank.tensors["token_mlp.b1"] == 0.0)
        assert np.all(bank.tensors["block3.mlp.b2"] == 0.0)
        assert np.all(bank.tensors["block0.attn_norm.gamma"] == 1.0)
        assert np.all(bank.tensors["final_norm.gamma"] == 1.0)

    def test_linear_draws_skip_constant_tensors(self, bank):
        # w1 consumes the first 384 uniforms; b1 (zeros) consumes none, so
        # w2 continues directly after
        stream = SeededStream(0)
        w1 = (2.0 * stream.uniform(3 * 128) - 1.0) / np.sqrt(3.0)
        w2 = (2.0 * stream.uniform(128 * 384) - 1.0) / np.sqrt(128.0)
        assert np.array_equal(bank.tensors["token_mlp.w1"], w1.reshape(3, 128).astype(np.float32))
        assert np.array_equal(bank.tensors["token_mlp.w2"], w2.reshape(128, 384).astype(np.float32))

    def test_prompt_scale(self, bank):
        flat = bank.tensors["prompts.local"].ravel()
        assert 0.01 < float(np.std(flat.astype(np.float64))) < 0.03


class TestWB01:
    def test_roundtrip_preserves_bytes_and_order(self, bank, tmp_path):
        path = tmp_path / "bank.wb"
        dump_weights(bank, path)
        loaded = load_weights(path)
        assert list(loaded.tensors) == list(bank.tensors)
        for name, t in bank.tensors.items():
            assert t.dtype == loaded.tensors[name].dtype
            assert np.array_equal(t, loaded.tensors[name])

    def test_loaded_bank_encodes_identically(self, cfg, bank, tokens, tmp_path):
        path = tmp_path / "bank.wb"
        dump_weights(bank, path)
        loaded = load_weights(path)
        a_local, a_global = encode(tokens, bank, cfg)
        b_local, b_global = encode(tokens, loaded, cfg)
        assert np.array_equal(a_local, b_local)
        assert np.array_equal(a_global, b_global)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.wb"
        path.write_bytes(b"XX01" + b"\x00" * 16)
        with pytest.raises(ParseError):
            load_weights(path)

    def test_truncated(self, bank, tmp_path):
        path = tmp_path / "bank.wb"
        dump_weights(bank, path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(ParseError):
            load_weights(path)

    def test_trailing_bytes(self, bank, tmp_path):
        path = tmp_path / "bank.wb"
        dump_weights(bank, path)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(ParseError):
            load_weights(path)


class TestForward:
    def test_shapes(self, cfg, bank, tokens):
        e_local, e_global = encode(tokens, bank, cfg)
        assert e_local.shape == (24, 384)
        assert e_global.shape == (cfg.n_queries, 384)

    def test_attention_is_a_distribution(self, cfg, bank, tokens):
        _, _, attns = encode(tokens, bank, cfg, collect_attention=True)
        assert len(attns) == cfg.layers + 1  # cross block appended last
        assert attns[0].shape == (6, 24, 24)
        assert attns[-1].shape == (6, cfg.n_queries, 24)
        for a in attns:
            assert np.all(a >= 0.0)
            assert np.max(np.abs(a.sum(axis=-1) - 1.0)) < 1e-12

    def test_causal_mask_blocks_later_tokens(self, cfg, bank, tokens):
        causal = EncoderConfig(variant="S", prompt_length=4, d_llm=64, mask_mode="causal")
        base_local, _ = encode(tokens, bank, causal)
        gen = np.random.default_rng(5)
        bumped = tokens.copy()
        j = 15
        bumped[j] += gen.standard_normal(384)
        new_local, _ = encode(bumped, bank, causal)
        assert np.array_equal(base_local[:j], new_local[:j])
        assert not np.array_equal(base_local[j:], new_local[j:])

    def test_random_mask_hides_tokens_from_every_row(self, bank, tokens):
        cfg = EncoderConfig(variant="S", prompt_length=4, d_llm=64, mask_mode="random", mask_seed=3)
        hidden = masked_token_indices(cfg, 24)
        assert hidden.size == int(np.floor(0.6 * 24))
        _, _, attns = encode(tokens, bank, cfg, collect_attention=True)
        for a in attns[:-1]:  # self-attention layers only
            assert np.all(a[:, :, hidden] == 0.0)

    def test_masked_token_is_invisible_to_other_rows(self, bank, tokens):
        cfg = EncoderConfig(variant="S", prompt_length=4, d_llm=64, mask_mode="random", mask_seed=3)
        hidden = masked_token_indices(cfg, 24)
        t = int(hidden[0])
        bumped = tokens.copy()
        bumped[t] += np.random.default_rng(6).standard_normal(384)
        base_local, _ = encode(tokens, bank, cfg)
        new_local, _ = encode(bumped, bank, cfg)
        others = [i for i in range(24) if i != t]
        assert np.array_equal(base_local[others], new_local[others])
        assert not np.array_equal(base_local[t], new_local[t])

    def test_masked_indices_metadata(self):
        cfg = EncoderConfig(variant="S", mask_mode="random", mask_ratio=0.5, mask_seed=1)
        idx = masked_token_indices(cfg, 50)
        assert idx.size == 25 and np.all(np.diff(idx) > 0)
        assert masked_token_indices(EncoderConfig(variant="S"), 50).size == 0
        other = masked_token_indices(
            EncoderConfig(variant="S", mask_mode="random", mask_ratio=0.5, mask_seed=2), 50
        )
        assert not np.array_equal(idx, other)

    def test_input_validation(self, cfg, bank):
        with pytest.raises(InvalidConfig):
            encode(np.zeros((4, 100)), bank, cfg)
        bad = np.zeros((4, 384))
        bad[0, 0] = np.nan
        with pytest.raises(InvalidConfig):
            encode(bad, bank, cfg)


class TestTokens:
    def test_single_member_neighborhood_embeds_to_zero(self, bank, unit_cloud):
        seeds = fps(unit_cloud, 4)
        nb = knn_group(unit_cloud, seeds, 1)[0]
        assert np.all(point_mlp_embed(nb, bank) == 0.0)

    def test_member_order_invariance(self, bank, unit_cloud, rng):
        seeds = fps(unit_cloud, 2)
        nb = knn_group(unit_cloud, seeds, 16)[0]

        class Shuffled:
            relative = nb.relative[rng.permutation(16)]

        assert np.array_equal(point_mlp_embed(nb, bank), point_mlp_embed(Shuffled, bank))

    def test_batch_equals_stack(self, bank, unit_cloud):
        seeds = fps(unit_cloud, 4)
        nbs = knn_group(unit_cloud, seeds, 8)
        batch = tokens_from_neighborhoods(nbs, bank)
        assert batch.shape == (4, 384)
        for i, nb in enumerate(nbs):
            assert np.array_equal(batch[i], point_mlp_embed(nb, bank))

    def test_origin_seed_has_zero_position_code(self, bank):
        coords = np.array([[0.0, 0.0, 0.0], [0.25, -0.5, 1.0]])
        out = ape(coords, bank)
        assert out.shape == (2, 64)
        assert np.all(out[0] == 0.0)
        assert not np.all(out[1] == 0.0)

    def test_projector_routes(self, bank, rng):
        e = rng.standard_normal((3, 384))
        outs = [project(e, which, bank) for which in ("ape", "local", "global")]
        assert all(o.shape == (3, 64) for o in outs)
        assert not np.array_equal(outs[0], outs[1])
        with pytest.raises(InvalidConfig):
            project(e, "text", bank)


class TestBundle:
    def test_assembly_order_and_length(self):
        q, n, g, d = 3, 5, 2, 7
        blocks = [np.full((rows, d), float(v)) for v, rows in
                  [(1, q), (2, n), (3, q), (4, n), (5, q), (6, g)]]
        bundle = RepresentationBundle(
            e_ape=blocks[1], e_local=blocks[3], e_global=blocks[5],
            prompt_ape=blocks[0], prompt_local=blocks[2], prompt_global=blocks[4],
        )
        seq = assemble(bundle)
        assert seq.shape == (3 * q + 2 * n + g, d)
        offsets = np.cumsum([0, q, n, q, n, q])
        for off, block in zip(offsets, blocks):
            assert np.array_equal(seq[off : off + block.shape[0]], block)

    def test_assembly_validation(self):
        good = dict(
            e_ape=np.zeros((5, 7)), e_local=np.zeros((5, 7)), e_global=np.zeros((2, 7)),
            prompt_ape=np.zeros((3, 7)), prompt_local=np.zeros((3, 7)), prompt_global=np.zeros((3, 7)),
        )
        assemble(RepresentationBundle(**good))
        for key, bad in [
            ("e_local", np.zeros((4, 7))),
            ("prompt_local", np.zeros((2, 7))),
            ("e_global", np.zeros((2, 6))),
            ("e_ape", np.full((5, 7), np.inf)),
        ]:
            with pytest.raises(InvalidConfig):
                assemble(RepresentationBundle(**{**good, key: bad}))

    def test_full_pipeline_shapes_and_determinism(self, cfg, bank, unit_cloud):
        bundle, seeds, nbs = bundle_from_cloud(unit_cloud, bank, cfg, n_seeds=16, k=8)
        assert len(seeds.indices) == 16 and len(nbs) == 16
        seq = assemble(bundle)
        assert seq.shape == (3 * 4 + 2 * 16 + cfg.n_queries, 64)
        again, _, _ = bundle_from_cloud(unit_cloud, bank, cfg, n_seeds=16, k=8)
        assert np.array_equal(seq, assemble(again))
