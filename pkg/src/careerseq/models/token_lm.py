"""Decoder-only transformer language model over the byte-merge vocabulary.

Pre-norm blocks (causal multi-head attention, then a GELU feed-forward),
learned positional embeddings, and a zero-initialized output projection so a
fresh model predicts the uniform distribution. Parameters are stored in
float32 (the checkpoint tensor format); all computation runs in float64, so
scoring is a deterministic function of the stored parameters and
save/load/score round-trips bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import autograd as ag
from ..tokenizer import Vocabulary
from .checkpoint import load_checkpoint, save_checkpoint


class ContextOverflowError(ValueError):
    pass


@dataclass(frozen=True)
class TokenLmConfig:
    vocab_size: int
    d_model: int = 128
    n_layers: int = 4
    n_heads: int = 4
    context: int = 512
    init_scale: float = 0.02


class TokenLM:
    def __init__(self, config: TokenLmConfig, seed: int = 0, dtype=np.float32):
        if config.d_model % config.n_heads:
            raise ValueError("d_model must divide evenly into heads")
        self.config = config
        self.dtype = dtype
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x70CE]))
        c = config
        s = c.init_scale

        def normal(*shape):
            return rng.normal(0.0, s, size=shape).astype(dtype)

        p: dict[str, np.ndarray] = {
            "tok_emb": normal(c.vocab_size, c.d_model),
            "pos_emb": normal(c.context, c.d_model),
            "ln_f_g": np.ones(c.d_model, dtype=dtype),
            "ln_f_b": np.zeros(c.d_model, dtype=dtype),
            "w_out": np.zeros((c.d_model, c.vocab_size), dtype=dtype),
        }
        for i in range(c.n_layers):
            p[f"l{i}.ln1_g"] = np.ones(c.d_model, dtype=dtype)
            p[f"l{i}.ln1_b"] = np.zeros(c.d_model, dtype=dtype)
            p[f"l{i}.wq"] = normal(c.d_model, c.d_model)
            p[f"l{i}.wk"] = normal(c.d_model, c.d_model)
            p[f"l{i}.wv"] = normal(c.d_model, c.d_model)
            p[f"l{i}.wo"] = normal(c.d_model, c.d_model)
            p[f"l{i}.ln2_g"] = np.ones(c.d_model, dtype=dtype)
            p[f"l{i}.ln2_b"] = np.zeros(c.d_model, dtype=dtype)
            p[f"l{i}.w1"] = normal(c.d_model, 4 * c.d_model)
            p[f"l{i}.b1"] = np.zeros(4 * c.d_model, dtype=dtype)
            p[f"l{i}.w2"] = normal(4 * c.d_model, c.d_model)
            p[f"l{i}.b2"] = np.zeros(c.d_model, dtype=dtype)
        self.params = p

    def astype(self, dtype) -> "TokenLM":
        clone = TokenLM(self.config, seed=0, dtype=dtype)
        clone.params = {k: v.astype(dtype) for k, v in self.params.items()}
        return clone

    # ------------------------------------------------------------- forward

    def forward(self, ids: np.ndarray, train: bool = False) -> tuple[ag.Tensor, ag.Tensor, dict[str, ag.Tensor]]:
        """Run the network over ``ids`` (B, T) or (T,).

        Returns (logits over the vocabulary, final normed hidden state,
        parameter leaves). With ``train=False`` no backward graph is built.
        """
        ids = np.asarray(ids)
        if ids.ndim == 1:
            ids = ids[None, :]
        b, t = ids.shape
        c = self.config
        if t > c.context:
            raise ContextOverflowError(f"sequence length {t} exceeds context cap {c.context}")
        leaves = {k: ag.Tensor(v, requires_grad=train) for k, v in self.params.items()}
        x = ag.add(ag.gather_rows(leaves["tok_emb"], ids), ag.gather_rows(leaves["pos_emb"], np.arange(t)))
        h = c.d_model // c.n_heads
        causal = np.triu(np.full((t, t), -1e30), k=1)[None, None, :, :]
        for i in range(c.n_layers):
            ln1 = ag.layer_norm(x, leaves[f"l{i}.ln1_g"], leaves[f"l{i}.ln1_b"])

            def heads(m):
                return ag.transpose(ag.reshape(m, (b, t, c.n_heads, h)), (0, 2, 1, 3))

            q = heads(ag.matmul(ln1, leaves[f"l{i}.wq"]))
            k = heads(ag.matmul(ln1, leaves[f"l{i}.wk"]))
            v = heads(ag.matmul(ln1, leaves[f"l{i}.wv"]))
            scores = ag.mul(ag.matmul(q, ag.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(h))
            att = ag.masked_softmax(scores, causal, axis=-1)
            ctx = ag.reshape(ag.transpose(ag.matmul(att, v), (0, 2, 1, 3)), (b, t, c.d_model))
            x = ag.add(x, ag.matmul(ctx, leaves[f"l{i}.wo"]))
            ln2 = ag.layer_norm(x, leaves[f"l{i}.ln2_g"], leaves[f"l{i}.ln2_b"])
            ff = ag.add(
                ag.matmul(ag.gelu(ag.add(ag.matmul(ln2, leaves[f"l{i}.w1"]), leaves[f"l{i}.b1"])), leaves[f"l{i}.w2"]),
                leaves[f"l{i}.b2"],
            )
            x = ag.add(x, ff)
        final = ag.layer_norm(x, leaves["ln_f_g"], leaves["ln_f_b"])
        logits = ag.matmul(final, leaves["w_out"])
        return logits, final, leaves

    # ------------------------------------------------------------- scoring

    def next_token_distribution(self, context_ids: Sequence[int]) -> np.ndarray:
        """Proper distribution over the next token after ``context_ids``."""
        ids = list(context_ids)
        if not ids:
            raise ValueError("context must contain at least one token (BOS)")
        logits, _, _ = self.forward(np.asarray(ids, dtype=np.int64))
        row = logits.data[0, -1]
        row = row - row.max()
        p = np.exp(row)
        return p / p.sum()

    def sequence_log_probs(self, ids: Sequence[int], from_position: int) -> np.ndarray:
        """Log-probabilities of ``ids[from_position:]`` under teacher forcing,
        each conditioned on all earlier tokens, in one forward pass."""
        arr = np.asarray(ids, dtype=np.int64)
        logits, _, _ = self.forward(arr)
        lp = _log_softmax_np(logits.data[0])
        positions = np.arange(from_position - 1, arr.size - 1)
        return lp[positions, arr[from_position:]]

    def batched_log_probs(self, sequences: list[np.ndarray], read_from: list[int], pad_id: int) -> list[np.ndarray]:
        """Batched :meth:`sequence_log_probs` over ragged sequences."""
        if not sequences:
            return []
        t = max(len(s) for s in sequences)
        ids = np.full((len(sequences), t), pad_id, dtype=np.int64)
        for i, s in enumerate(sequences):
            ids[i, : len(s)] = s
        logits, _, _ = self.forward(ids)
        out = []
        for i, s in enumerate(sequences):
            lp = _log_softmax_np(logits.data[i])
            positions = np.arange(read_from[i] - 1, len(s) - 1)
            out.append(lp[positions, np.asarray(s[read_from[i]:])])
        return out

    def final_hidden(self, ids: Sequence[int]) -> np.ndarray:
        """Final-layer hidden state at the last position (the representation
        used as an embedding by feature-based models)."""
        _, final, _ = self.forward(np.asarray(ids, dtype=np.int64))
        return final.data[0, -1].copy()

    # ------------------------------------------------------------ training

    def loss_and_grads(self, batch: dict) -> tuple[float, dict[str, np.ndarray]]:
        loss_t, leaves = self._loss_graph(batch, train=True)
        loss_t.backward()
        grads = {k: leaf.grad for k, leaf in leaves.items() if leaf.grad is not None}
        return float(loss_t.data), grads

    def loss(self, batch: dict) -> float:
        loss_t, _ = self._loss_graph(batch, train=False)
        return float(loss_t.data)

    def _loss_graph(self, batch: dict, train: bool) -> tuple[ag.Tensor, dict[str, ag.Tensor]]:
        ids: np.ndarray = batch["ids"]  # (B, T), already padded
        mask: np.ndarray = batch["mask"]  # (B, T-1) marks real next-token targets
        logits, _, leaves = self.forward(ids, train=train)
        lp = ag.log_softmax(logits, axis=-1)
        picked = ag.pick_last(_slice_time(lp, 0, ids.shape[1] - 1), ids[:, 1:])
        loss = ag.mul(ag.tsum(ag.mul(picked, mask)), -1.0 / mask.sum())
        return loss, leaves


def _slice_time(t: ag.Tensor, start: int, stop: int) -> ag.Tensor:
    data = t.data[:, start:stop]
    span = (start, stop)

    def backward(grad):
        if t.requires_grad:
            g = np.zeros_like(t.data)
            g[:, span[0]: span[1]] = grad
            t._accumulate(g)

    return ag._node(data, (t,), backward)


def _log_softmax_np(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def collate_token_batch(token_lists: list[list[int]], pad_id: int) -> dict:
    """Pad ragged token sequences and mark valid next-token positions."""
    t = max(len(s) for s in token_lists)
    ids = np.full((len(token_lists), t), pad_id, dtype=np.int64)
    mask = np.zeros((len(token_lists), t - 1))
    for i, s in enumerate(token_lists):
        ids[i, : len(s)] = s
        mask[i, : len(s) - 1] = 1.0
    return {"ids": ids, "mask": mask}


# ----------------------------------------------------------------------- IO


def save_token_lm(model: TokenLM, vocab: Vocabulary, path) -> None:
    save_checkpoint(path, kind="token_lm", params=model.params, config=asdict(model.config))
    vocab.dump_text(Path(path) / "vocab.txt")


def load_token_lm(path) -> tuple[TokenLM, Vocabulary]:
    kind, params, config = load_checkpoint(path)
    if kind != "token_lm":
        raise ValueError(f"checkpoint kind {kind!r} is not a token LM")
    model = TokenLM(TokenLmConfig(**config), seed=0)
    model.params = {k: v.astype(np.float32) for k, v in params.items()}
    vocab = Vocabulary.load_text(Path(path) / "vocab.txt")
    return model, vocab
