"""Toy-scale encoder forward pass with deterministic, seed-generated weights.

The stack is a standard pre-norm transformer over the point tokens followed
by one cross-attention block in which a small set of learned global queries
pools the token outputs. Three independent 3-layer projectors (one each for
the position path, the token path and the pooled path) lift hidden vectors to
the downstream width, and learned prompt banks are concatenated in a fixed
order by :func:`assemble`.

Weights are float32, generated from a single SplitMix64 stream in a canonical
tensor order (the same order ``dump_weights`` writes): linear weights uniform
in (-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero, norm scales one, prompts
and queries normal(0, 0.02). Forward math runs in float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cloud import Neighborhood, PointCloud, SeedSet, fps, knn_group
from .errors import InvalidConfig, ParseError
from .rng import SeededStream

_VARIANTS = {
    "S": (12, 384, 1536, 6),
    "B": (12, 768, 3072, 12),
    "L": (24, 1024, 4096, 16),
}
_TOKEN_MLP_WIDTH = 128
_PROJ_WIDTHS = (1024, 2048)
_LN_EPS = 1e-5
_MAGIC = b"WB01"


@dataclass(frozen=True)
class EncoderConfig:
    variant: str = "B"
    layers: int | None = None
    hidden_size: int | None = None
    mlp_size: int | None = None
    heads: int | None = None
    mask_mode: str = "none"  # none | random | causal
    mask_ratio: float = 0.6  # used by random masking only
    mask_seed: int = 0
    num_image_queries: int = 4
    prompt_length: int = 32
    d_llm: int = 4096
    include_text_query: bool = True

    def __post_init__(self) -> None:
        if self.variant not in _VARIANTS:
            raise InvalidConfig(f"variant must be one of {sorted(_VARIANTS)}, got {self.variant!r}")
        table = _VARIANTS[self.variant]
        for name, given, fixed in zip(("layers", "hidden_size", "mlp_size", "heads"), (self.layers, self.hidden_size, self.mlp_size, self.heads), table):
            if given is None:
                object.__setattr__(self, name, fixed)
            elif given != fixed:
                raise InvalidConfig(f"{name}={given} contradicts variant {self.variant} ({fixed})")
        if self.hidden_size % self.heads != 0:
            raise InvalidConfig("hidden size must divide evenly across heads")
        if self.mask_mode not in ("none", "random", "causal"):
            raise InvalidConfig(f"unknown mask_mode {self.mask_mode!r}")
        if not 0.0 <= self.mask_ratio < 1.0:
            raise InvalidConfig(f"mask_ratio must be within [0, 1), got {self.mask_ratio}")
        if self.num_image_queries < 1:
            raise InvalidConfig("num_image_queries must be >= 1")
        if self.prompt_length < 0:
            raise InvalidConfig("prompt_length must be >= 0")
        if self.d_llm < 1:
            raise InvalidConfig("d_llm must be >= 1")

    @property
    def n_queries(self) -> int:
        return self.num_image_queries + (1 if self.include_text_query else 0)


def _tensor_plan(cfg: EncoderConfig) -> list[tuple[str, tuple[int, ...], str]]:
    """Canonical (name, shape, init) list; defines both the stream draw order
    and the dump order. init is one of linear/zeros/ones/normal."""
    h, m = cfg.hidden_size, cfg.mlp_size
    plan: list[tuple[str, tuple[int, ...], str]] = [
        ("token_mlp.w1", (3, _TOKEN_MLP_WIDTH), "linear"),
        ("token_mlp.b1", (_TOKEN_MLP_WIDTH,), "zeros"),
        ("token_mlp.w2", (_TOKEN_MLP_WIDTH, h), "linear"),
        ("token_mlp.b2", (h,), "zeros"),
        ("ape.w", (3, h), "linear"),
        ("ape.b", (h,), "zeros"),
    ]
    def attn(prefix: str) -> list[tuple[str, tuple[int, ...], str]]:
        out = []
        for part in ("wq", "wk", "wv", "wo"):
            out.append((f"{prefix}.{part}", (h, h), "linear"))
            out.append((f"{prefix}.{part[1]}b", (h,), "zeros"))
        return out
    def norm(prefix: str) -> list[tuple[str, tuple[int, ...], str]]:
        return [(f"{prefix}.gamma", (h,), "ones"), (f"{prefix}.beta", (h,), "zeros")]
    for i in range(cfg.layers):
        plan += norm(f"block{i}.attn_norm")
        plan += attn(f"block{i}.attn")
        plan += norm(f"block{i}.mlp_norm")
        plan += [
            (f"block{i}.mlp.w1", (h, m), "linear"),
            (f"block{i}.mlp.b1", (m,), "zeros"),
            (f"block{i}.mlp.w2", (m, h), "linear"),
            (f"block{i}.mlp.b2", (h,), "zeros"),
        ]
    plan += norm("final_norm")
    plan += norm("cross.query_norm")
    plan += norm("cross.kv_norm")
    plan += attn("cross.attn")
    plan += norm("cross.mlp_norm")
    plan += [
        ("cross.mlp.w1", (h, m), "linear"),
        ("cross.mlp.b1", (m,), "zeros"),
        ("cross.mlp.w2", (m, h), "linear"),
        ("cross.mlp.b2", (h,), "zeros"),
    ]
    plan += norm("cross.out_norm")
    plan += [
        ("queries.image", (cfg.num_image_queries, h), "normal"),
        ("queries.text", (1, h), "normal"),
        ("prompts.ape", (cfg.prompt_length, cfg.d_llm), "normal"),
        ("prompts.local", (cfg.prompt_length, cfg.d_llm), "normal"),
        ("prompts.global", (cfg.prompt_length, cfg.d_llm), "normal"),
    ]
    for which in ("ape", "local", "global"):
        w1, w2 = _PROJ_WIDTHS
        plan += [
            (f"projector.{which}.w1", (h, w1), "linear"),
            (f"projector.{which}.b1", (w1,), "zeros"),
            (f"projector.{which}.w2", (w1, w2), "linear"),
            (f"projector.{which}.b2", (w2,), "zeros"),
            (f"projector.{which}.w3", (w2, cfg.d_llm), "linear"),
            (f"projector.{which}.b3", (cfg.d_llm,), "zeros"),
        ]
    return plan


@dataclass(frozen=True)
class WeightBank:
    """Immutable name -> float32 tensor map in canonical order."""

    tensors: dict[str, np.ndarray]
    seed: int | None = None

    def __post_init__(self) -> None:
        for t in self.tensors.values():
            t.setflags(write=False)

    @classmethod
    def generate(cls, config: EncoderConfig, seed: int) -> "WeightBank":
        stream = SeededStream(seed)
        tensors: dict[str, np.ndarray] = {}
        for name, shape, init in _tensor_plan(config):
            n = int(np.prod(shape, dtype=np.int64)) if shape else 1
            if init == "linear":
                bound = 1.0 / np.sqrt(shape[0])
                vals = bound * (2.0 * stream.uniform(n) - 1.0)
            elif init == "normal":
                vals = 0.02 * stream.normal(n)
            elif init == "ones":
                vals = np.ones(n)
            else:
                vals = np.zeros(n)
            tensors[name] = np.ascontiguousarray(vals.reshape(shape), dtype=np.float32)
        return cls(tensors, seed)

    def get(self, name: str, shape: tuple[int, ...] | None = None) -> np.ndarray:
        if name not in self.tensors:
            raise InvalidConfig(f"weight bank is missing tensor {name!r}")
        t = self.tensors[name]
        if shape is not None and t.shape != shape:
            raise InvalidConfig(f"tensor {name!r} has shape {t.shape}, expected {shape}")
        return t.astype(np.float64)


def dump_weights(bank: WeightBank, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(bank.tensors)))
        for name, t in bank.tensors.items():
            nameb = name.encode("utf-8")
            fh.write(struct.pack("B", len(nameb)))
            fh.write(nameb)
            fh.write(struct.pack("<I", t.ndim))
            fh.write(struct.pack(f"<{t.ndim}I", *t.shape))
            fh.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def load_weights(path: str | Path) -> WeightBank:
    blob = Path(path).read_bytes()
    if blob[:4] != _MAGIC:
        raise ParseError(f"{path}: not a WB01 file")
    pos = 4
    try:
        (count,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            name_len = blob[pos]
            pos += 1
            name = blob[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}I", blob, pos)
            pos += 4 * rank
            n = int(np.prod(dims, dtype=np.int64)) if rank else 1
            data = np.frombuffer(blob, dtype="<f4", count=n, offset=pos).reshape(dims)
            pos += 4 * n
            tensors[name] = data.copy()
    except (struct.error, ValueError) as exc:
        raise ParseError(f"{path}: truncated or corrupt WB01 data ({exc})") from None
    if pos != len(blob):
        raise ParseError(f"{path}: {len(blob) - pos} trailing bytes")
    return WeightBank(tensors, None)


def _gelu(x: np.ndarray) -> np.ndarray:
    # tanh-form gaussian error linear unit
    return 0.5 * x * (1.0 + np.tanh(0.7978845608028654 * (x + 0.044715 * x**3)))


def _layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = np.mean((x - mu) ** 2, axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + _LN_EPS) * gamma + beta


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    n, h = x.shape
    return x.reshape(n, heads, h // heads).transpose(1, 0, 2)


def _attention(bank, prefix, q_in, kv_in, heads, mask):
    h = q_in.shape[1]
    q = q_in @ bank.get(f"{prefix}.wq", (h, h)) + bank.get(f"{prefix}.qb", (h,))
    k = kv_in @ bank.get(f"{prefix}.wk", (h, h)) + bank.get(f"{prefix}.kb", (h,))
    v = kv_in @ bank.get(f"{prefix}.wv", (h, h)) + bank.get(f"{prefix}.vb", (h,))
    qh, kh, vh = (_split_heads(t, heads) for t in (q, k, v))
    scores = qh @ kh.transpose(0, 2, 1) / np.sqrt(qh.shape[-1])
    if mask is not None:
        scores = scores + mask  # additive: blocked entries are -inf, exp -> exactly 0
    attn = _softmax_rows(scores)
    ctx = attn @ vh
    merged = ctx.transpose(1, 0, 2).reshape(q_in.shape[0], h)
    out = merged @ bank.get(f"{prefix}.wo", (h, h)) + bank.get(f"{prefix}.ob", (h,))
    return out, attn


def _build_mask(config: EncoderConfig, n: int) -> np.ndarray | None:
    if config.mask_mode == "none":
        return None
    mask = np.zeros((n, n))
    if config.mask_mode == "causal":
        mask[np.triu_indices(n, k=1)] = -np.inf
        return mask
    n_masked = int(np.floor(config.mask_ratio * n))
    if n_masked == 0:
        return None
    scores = SeededStream(config.mask_seed).uniform(n)
    hidden_tokens = np.argsort(scores, kind="stable")[:n_masked]
    mask[:, hidden_tokens] = -np.inf  # invisible to every row, their own included
    return mask


def masked_token_indices(config: EncoderConfig, n: int) -> np.ndarray:
    """Which token indices random masking hides for this config and count."""
    if config.mask_mode != "random":
        return np.empty(0, dtype=np.int64)
    n_masked = int(np.floor(config.mask_ratio * n))
    scores = SeededStream(config.mask_seed).uniform(n)
    return np.sort(np.argsort(scores, kind="stable")[:n_masked])


def encode(
    tokens: np.ndarray,
    weights: WeightBank,
    config: EncoderConfig,
    collect_attention: bool = False,
):
    """Run the transformer stack and the query pooling.

    Returns (e_local, e_global) at hidden width, plus a list of per-layer
    attention tensors (heads x queries x keys) when collect_attention is set.
    """
    x = np.asarray(tokens, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] != config.hidden_size:
        raise InvalidConfig(f"tokens must be (N, {config.hidden_size}), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidConfig("tokens must be finite")
    n = x.shape[0]
    mask = _build_mask(config, n)
    attentions = []
    for i in range(config.layers):
        p = f"block{i}"
        normed = _layer_norm(x, weights.get(f"{p}.attn_norm.gamma"), weights.get(f"{p}.attn_norm.beta"))
        attn_out, attn = _attention(weights, f"{p}.attn", normed, normed, config.heads, mask)
        if collect_attention:
            attentions.append(attn)
        x = x + attn_out
        normed = _layer_norm(x, weights.get(f"{p}.mlp_norm.gamma"), weights.get(f"{p}.mlp_norm.beta"))
        h1 = _gelu(normed @ weights.get(f"{p}.mlp.w1") + weights.get(f"{p}.mlp.b1"))
        x = x + h1 @ weights.get(f"{p}.mlp.w2") + weights.get(f"{p}.mlp.b2")
    e_local = _layer_norm(x, weights.get("final_norm.gamma"), weights.get("final_norm.beta"))

    queries = weights.get("queries.image", (config.num_image_queries, config.hidden_size))
    if config.include_text_query:
        queries = np.vstack([queries, weights.get("queries.text", (1, config.hidden_size))])
    qn = _layer_norm(queries, weights.get("cross.query_norm.gamma"), weights.get("cross.query_norm.beta"))
    kvn = _layer_norm(e_local, weights.get("cross.kv_norm.gamma"), weights.get("cross.kv_norm.beta"))
    cross_out, cross_attn = _attention(weights, "cross.attn", qn, kvn, config.heads, None)
    if collect_attention:
        attentions.append(cross_attn)
    y = queries + cross_out
    normed = _layer_norm(y, weights.get("cross.mlp_norm.gamma"), weights.get("cross.mlp_norm.beta"))
    h1 = _gelu(normed @ weights.get("cross.mlp.w1") + weights.get("cross.mlp.b1"))
    y = y + h1 @ weights.get("cross.mlp.w2") + weights.get("cross.mlp.b2")
    e_global = _layer_norm(y, weights.get("cross.out_norm.gamma"), weights.get("cross.out_norm.beta"))
    if collect_attention:
        return e_local, e_global, attentions
    return e_local, e_global


def _token_mlp(xi: np.ndarray, weights: WeightBank) -> np.ndarray:
    h1 = _gelu(xi @ weights.get("token_mlp.w1") + weights.get("token_mlp.b1"))
    return h1 @ weights.get("token_mlp.w2") + weights.get("token_mlp.b2")


def point_mlp_embed(neighborhood: Neighborhood, weights: WeightBank) -> np.ndarray:
    """Coordinate-wise max over the per-point MLP outputs of the centered
    offsets; exactly invariant to member order."""
    return _token_mlp(np.asarray(neighborhood.relative, dtype=np.float64), weights).max(axis=0)


def tokens_from_neighborhoods(neighborhoods: list[Neighborhood], weights: WeightBank) -> np.ndarray:
    """All token vectors at once. Equal to stacking point_mlp_embed results."""
    if not neighborhoods:
        raise InvalidConfig("need at least one neighborhood")
    return np.stack([point_mlp_embed(nb, weights) for nb in neighborhoods])


def ape(seed_coords: np.ndarray, weights: WeightBank) -> np.ndarray:
    """Absolute-position path: linear lift of raw seed coordinates, then the
    position projector. Row i depends only on seed i."""
    coords = np.asarray(seed_coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != 3:
        raise InvalidConfig(f"seed_coords must be (N, 3), got {coords.shape}")
    lifted = coords @ weights.get("ape.w") + weights.get("ape.b")
    return project(lifted, "ape", weights)


def project(e: np.ndarray, which: str, weights: WeightBank) -> np.ndarray:
    """Independent 3-layer MLP (hidden -> 1024 -> 2048 -> d_llm) per path."""
    if which not in ("ape", "local", "global"):
        raise InvalidConfig(f"which must be ape|local|global, got {which!r}")
    x = np.asarray(e, dtype=np.float64)
    p = f"projector.{which}"
    h1 = _gelu(x @ weights.get(f"{p}.w1") + weights.get(f"{p}.b1"))
    h2 = _gelu(h1 @ weights.get(f"{p}.w2") + weights.get(f"{p}.b2"))
    return h2 @ weights.get(f"{p}.w3") + weights.get(f"{p}.b3")


@dataclass(frozen=True)
class RepresentationBundle:
    """Projected sequences plus prompt banks, ready for assembly."""

    e_ape: np.ndarray
    e_local: np.ndarray
    e_global: np.ndarray
    prompt_ape: np.ndarray
    prompt_local: np.ndarray
    prompt_global: np.ndarray

    def __post_init__(self) -> None:
        for name in self.__dataclass_fields__:
            a = np.asarray(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)


def assemble(bundle: RepresentationBundle) -> np.ndarray:
    """Concatenate [prompt_ape, e_ape, prompt_local, e_local, prompt_global,
    e_global]; total rows 3Q + 2N_s + n_queries."""
    parts = (
        bundle.prompt_ape,
        bundle.e_ape,
        bundle.prompt_local,
        bundle.e_local,
        bundle.prompt_global,
        bundle.e_global,
    )
    widths = {p.shape[1] if p.ndim == 2 else -1 for p in parts}
    if len(widths) != 1 or -1 in widths:
        raise InvalidConfig("bundle parts must be 2-D with one shared width")
    q_shapes = {bundle.prompt_ape.shape, bundle.prompt_local.shape, bundle.prompt_global.shape}
    if len(q_shapes) != 1:
        raise InvalidConfig("prompt banks must share one (Q, d) shape")
    if bundle.e_ape.shape != bundle.e_local.shape:
        raise InvalidConfig("position and token sequences must share one (N_s, d) shape")
    if not all(np.all(np.isfinite(p)) for p in parts):
        raise InvalidConfig("bundle values must be finite")
    return np.vstack(parts)


def bundle_from_cloud(
    cloud: PointCloud,
    weights: WeightBank,
    config: EncoderConfig,
    n_seeds: int,
    k: int,
    start_index: int = 0,
) -> tuple[RepresentationBundle, SeedSet, list[Neighborhood]]:
    """Full pipeline: sample seeds, group, embed, encode, project, bundle."""
    seeds = fps(cloud, n_seeds, start_index)
    neighborhoods = knn_group(cloud, seeds, k)
    tokens = tokens_from_neighborhoods(neighborhoods, weights)
    e_local_h, e_global_h = encode(tokens, weights, config)
    seed_coords = cloud.points[list(seeds.indices)]
    bundle = RepresentationBundle(
        e_ape=ape(seed_coords, weights),
        e_local=project(e_local_h, "local", weights),
        e_global=project(e_global_h, "global", weights),
        prompt_ape=weights.get("prompts.ape", (config.prompt_length, config.d_llm)),
        prompt_local=weights.get("prompts.local", (config.prompt_length, config.d_llm)),
        prompt_global=weights.get("prompts.global", (config.prompt_length, config.d_llm)),
    )
    return bundle, seeds, neighborhoods
