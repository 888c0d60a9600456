"""End-to-end detection model: parameter registry, forward pass, batch loss.

The model assembles the encoder, enrichment, alignment, interaction and
fusion stages. Ablation variants rewire the graph: ``no_E`` drops the
description channel, ``no_M`` drops the contrastive loss and the
interaction feature (the classifier then fuses two channels), ``no_A``
fixes every fusion gate at one.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import align, enrich, fuse, interact
from . import encoders as enc
from . import tensor as T
from .errors import ConfigError
from .rng import Rng

ABLATIONS = ("none", "no_A", "no_M", "no_E")


@dataclass
class ModelConfig:
    d: int = 64
    d_raw: int = 128
    tau: float = 0.07
    lambda_c: float = 1.0
    max_len: int = 64
    ablation: str = "none"

    def validate(self) -> None:
        if self.d <= 0 or self.d_raw <= 0 or self.max_len <= 0:
            raise ConfigError("model dimensions must be positive")
        if self.tau <= 0:
            raise ConfigError(f"temperature must be positive, got {self.tau}")
        if self.lambda_c < 0:
            raise ConfigError(f"contrastive weight must be non-negative, got {self.lambda_c}")
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"unknown ablation {self.ablation!r}, expected one of {ABLATIONS}")

    @property
    def uses_enhancement(self) -> bool:
        return self.ablation != "no_E"

    @property
    def uses_interaction(self) -> bool:
        return self.ablation != "no_M"

    @property
    def uses_gates(self) -> bool:
        return self.ablation != "no_A"

    @property
    def n_channels(self) -> int:
        return 3 if self.uses_interaction else 2


@dataclass
class ItemFeatures:
    """Numeric inputs for one item, ready for the forward pass."""

    item_id: str
    label: int
    image: np.ndarray
    text_seq: enc.TokenSequence | None = None
    text_vec: np.ndarray | None = None
    desc_seqs: list[enc.TokenSequence] = field(default_factory=list)
    desc_vecs: list[np.ndarray] = field(default_factory=list)


@dataclass
class ItemTrace:
    """Intermediate tensors of one forward pass (kept for tests and export)."""

    r_t: T.Tensor
    r_v: T.Tensor
    m_d: T.Tensor | None
    r_t_enh: T.Tensor
    e_t: T.Tensor | None
    e_v: T.Tensor | None
    r_f: T.Tensor | None
    features: list[T.Tensor]
    gates: T.Tensor | None
    fused: T.Tensor
    probs: T.Tensor
    label: int


class Model:
    """All trainable state plus the wiring between pipeline stages."""

    def __init__(self, config: ModelConfig, vocab: enc.Vocabulary, rng: Rng):
        config.validate()
        self.config = config
        self.vocab = vocab
        self.params = T.ParamRegistry()
        d, d_raw, k = config.d, config.d_raw, config.n_channels

        def init(name, shape, fan_in):
            data = rng.stream("init", name).normal(size=shape) / math.sqrt(fan_in)
            return self.params.register(name, data)

        def zeros(name, shape):
            return self.params.register(name, np.zeros(shape))

        self.emb = self.params.register("emb", rng.stream("init", "emb").normal(size=(len(vocab), d)))
        self.w_tf = init("w_tf", (d, d), d)
        self.w_vf = init("w_vf", (d, d_raw), d_raw)
        self.w_t = init("w_t", (d, d), d)
        if config.uses_enhancement:
            self.w_df = init("w_df", (d, d), d)
            self.w_d = init("w_d", (d, d), d)
        if config.uses_interaction:
            self.w_st = init("w_st", (d, d), d)
            self.b_st = zeros("b_st", d)
            self.w_sv = init("w_sv", (d, d), d)
            self.b_sv = zeros("b_sv", d)
            self.w_i1 = init("w_i1", (d, d), d)
            self.b_i1 = zeros("b_i1", d)
            self.w_i2 = init("w_i2", (d, d), d)
            self.b_i2 = zeros("b_i2", d)
        if config.uses_gates:
            self.w_g = init("w_g", (k, d), d)
            self.b_g = zeros("b_g", k)
        self.w_c1 = init("w_c1", (d, k * d), k * d)
        self.b_c1 = zeros("b_c1", d)
        self.w_c2 = init("w_c2", (2, d), d)
        self.b_c2 = zeros("b_c2", 2)

    # -- input preparation --------------------------------------------------

    def featurize(self, item, precomputed: dict | None = None) -> ItemFeatures:
        """Tokenize (or look up precomputed vectors for) one news item.

        Description inputs are prepared only when the enhancement channel
        is active; the ``no_E`` variant never reads them.
        """
        pre = precomputed.get(item.id) if precomputed else None
        image = pre.image_vec if pre is not None else np.asarray(item.image, dtype=np.float64)
        feats = ItemFeatures(item_id=item.id, label=item.label, image=image)
        if pre is not None and pre.text_vec is not None:
            feats.text_vec = pre.text_vec
        else:
            feats.text_seq = self.vocab.encode(item.text, self.config.max_len)
        if self.config.uses_enhancement:
            if pre is not None and pre.desc_vecs:
                feats.desc_vecs = list(pre.desc_vecs)
            else:
                feats.desc_seqs = [
                    self.vocab.encode(s, self.config.max_len) for s in item.descriptions
                ]
        return feats

    # -- forward ------------------------------------------------------------

    def forward(self, feats: ItemFeatures) -> ItemTrace:
        cfg = self.config
        if feats.text_vec is not None:
            r_cls = T.Tensor(feats.text_vec)
        else:
            r_cls = enc.pooled_embedding(self.emb, feats.text_seq)
        r_t = T.matvec(self.w_tf, r_cls)
        r_v = enc.encode_image(self.w_vf, T.Tensor(feats.image))

        m_d = None
        if cfg.uses_enhancement:
            rows = [T.matvec(self.w_df, T.Tensor(v)) for v in feats.desc_vecs]
            rows += [
                enc.encode_description(self.emb, self.w_df, seq) for seq in feats.desc_seqs
            ]
            if rows:
                m_d = T.stack_rows(rows)
            r_t_enh = enrich.enhance(r_t, m_d, self.w_t, self.w_d)
        else:
            r_t_enh = T.matvec(self.w_t, r_t)

        e_t = e_v = r_f = None
        if cfg.uses_interaction:
            e_t = align.shared_encode(r_t, self.w_st, self.b_st)
            e_v = align.shared_encode(r_v, self.w_sv, self.b_sv)
            f_tv, f_vt = interact.cross_attention(e_t, e_v)
            m_f_v, m_f_t = interact.modality_update(f_tv, f_vt, e_v, e_t)
            r_f = interact.interaction_feature(
                m_f_v, m_f_t, self.w_i1, self.b_i1, self.w_i2, self.b_i2
            )

        features = [r_t_enh, r_v] + ([r_f] if r_f is not None else [])
        gates = fuse.adaptive_weights(features, self.w_g, self.b_g) if cfg.uses_gates else None
        fused = fuse.fuse(features, gates)
        probs, label = fuse.classify(fused, self.w_c1, self.b_c1, self.w_c2, self.b_c2)
        return ItemTrace(
            r_t=r_t, r_v=r_v, m_d=m_d, r_t_enh=r_t_enh, e_t=e_t, e_v=e_v, r_f=r_f,
            features=features, gates=gates, fused=fused, probs=probs, label=label,
        )

    def batch_loss(
        self, batch: list[ItemFeatures], diagnostics: dict | None = None
    ) -> tuple[T.Tensor, dict]:
        """Total objective over a batch: mean detection loss plus the
        batch-level contrastive loss (when the interaction module is on)."""
        if not batch:
            raise ConfigError("batch_loss over an empty batch")
        traces = [self.forward(f) for f in batch]
        l_d = T.mean_scalars(
            [fuse.detection_loss(tr.probs, f.label) for tr, f in zip(traces, batch)]
        )
        parts = {"detection": float(l_d.data)}
        if self.config.uses_interaction:
            e_t = T.stack_rows([tr.e_t for tr in traces])
            e_v = T.stack_rows([tr.e_v for tr in traces])
            p_vt = align.similarity_matrix(e_v, e_t, self.config.tau)
            p_tv = align.similarity_matrix(e_t, e_v, self.config.tau)
            l_c = align.contrastive_loss(p_vt, p_tv, diagnostics)
            parts["contrastive"] = float(l_c.data)
            loss = fuse.total_loss(l_c, l_d, self.config.lambda_c)
        else:
            parts["contrastive"] = 0.0
            loss = l_d
        parts["total"] = float(loss.data)
        return loss, parts

    # -- inference ----------------------------------------------------------

    def predict(self, feats: ItemFeatures) -> fuse.Prediction:
        trace = self.forward(feats)
        gates = tuple(float(g) for g in trace.gates.data) if trace.gates is not None else None
        return fuse.Prediction(probs=trace.probs.data.copy(), label=trace.label, gates=gates)

    def fused_vector(self, feats: ItemFeatures) -> np.ndarray:
        """Pre-classifier representation used for the projection export."""
        return self.forward(feats).fused.data.copy()

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        meta = {"config": asdict(self.config), "vocab": self.vocab.tokens}
        arrays = {f"param/{name}": self.params[name].data for name in self.params.names()}
        np.savez(path, __meta__=json.dumps(meta), **arrays)

    @classmethod
    def load(cls, path) -> "Model":
        with np.load(path, allow_pickle=False) as archive:
            meta = json.loads(str(archive["__meta__"]))
            model = cls(ModelConfig(**meta["config"]), enc.Vocabulary(meta["vocab"]), Rng(0))
            for name in model.params.names():
                stored = archive[f"param/{name}"]
                if stored.shape != model.params[name].data.shape:
                    raise ConfigError(
                        f"stored parameter {name} has shape {stored.shape}, expected {model.params[name].data.shape}"
                    )
                model.params[name].data[...] = stored
        return model


def build_gradcheck_problem(
    d: int = 8, n_items: int = 4, n_desc: int = 2, seed: int = 7, ablation: str = "none"
) -> tuple[Model, list[ItemFeatures]]:
    """A tiny deterministic model plus batch for gradient verification."""
    rng = Rng(seed)
    vocab = enc.Vocabulary([f"tok{i}" for i in range(12)])
    model = Model(ModelConfig(d=d, d_raw=d, max_len=8, tau=0.5, ablation=ablation), vocab, rng)
    feats = []
    for i in range(n_items):
        gen = rng.stream("item", i)
        n_tok = int(gen.integers(3, 7))
        text_seq = enc.TokenSequence(
            ids=[int(t) for t in gen.integers(0, len(vocab), size=n_tok)], mask=[True] * n_tok
        )
        desc_seqs = []
        for j in range(n_desc):
            m = int(gen.integers(2, 5))
            desc_seqs.append(
                enc.TokenSequence(
                    ids=[int(t) for t in gen.integers(0, len(vocab), size=m)], mask=[True] * m
                )
            )
        feats.append(
            ItemFeatures(
                item_id=f"probe-{i}",
                label=int(gen.integers(0, 2)),
                image=gen.normal(size=d),
                text_seq=text_seq,
                desc_seqs=desc_seqs if model.config.uses_enhancement else [],
            )
        )
    return model, feats
