"""Occupation-sequence transformer with a two-stage stay/move head.

The first-layer state at transition t sums embeddings of the previous
occupation (a learned null embedding at t=1), static covariates, dynamic
covariates (education and calendar-year bucket of the record being
predicted), and the transition index. Each subsequent layer applies bilinear
attention over positions t' <= t, a residual add, and a two-layer GELU
feed-forward that produces the next layer's state.

The head first gates stay vs move with a logistic score, then softmaxes
movers over every occupation except the previous one; the previous
occupation receives exactly the stay probability. At t=1 the gate is forced
open and the softmax runs over the whole taxonomy.

Heads split the embedding channels; with one head the attention reduces to a
single bilinear form over the full state.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .. import autograd as ag
from ..corpus import CareerHistory, Education, Ethnicity, Gender, Region
from ..taxonomy import OccupationTaxonomy
from .checkpoint import load_checkpoint, save_checkpoint

_EDU_LIST = list(Education)
_GENDER_LIST = list(Gender)
_ETH_LIST = list(Ethnicity)
_REGION_LIST = list(Region)

_YEAR_BUCKET_SPAN = 5
_NEG = -1e30


@dataclass(frozen=True)
class CareerConfig:
    taxonomy_size: int
    d_model: int = 64
    n_layers: int = 4
    n_heads: int = 2
    d_ff: int = 256
    max_positions: int = 40
    year_range: tuple[int, int] = (1979, 2022)
    init_scale: float = 0.1


def paper_preset(taxonomy_size: int, year_range: tuple[int, int] = (1979, 2022)) -> CareerConfig:
    """Production-scale configuration (12 layers, 192 dims, 3 heads, 768 FFN)."""
    return CareerConfig(
        taxonomy_size=taxonomy_size,
        d_model=192,
        n_layers=12,
        n_heads=3,
        d_ff=768,
        max_positions=64,
        year_range=year_range,
    )


class CareerModel:
    def __init__(self, config: CareerConfig, taxonomy: OccupationTaxonomy, seed: int = 0, dtype=np.float32):
        if config.taxonomy_size != taxonomy.size:
            raise ValueError("config taxonomy_size differs from taxonomy")
        if config.d_model % config.n_heads:
            raise ValueError("d_model must divide evenly into heads")
        self.config = config
        self.taxonomy = taxonomy
        self.dtype = dtype
        c = config
        k = c.taxonomy_size
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xCA4EE4]))
        s = c.init_scale
        n_buckets = max(1, -(-(c.year_range[1] - c.year_range[0]) // _YEAR_BUCKET_SPAN))
        self._n_year_buckets = n_buckets

        def normal(*shape, scale=s):
            return rng.normal(0.0, scale, size=shape).astype(dtype)

        p: dict[str, np.ndarray] = {
            "occ_emb": normal(k + 1, c.d_model),  # last row: null occupation at t=1
            "gender_emb": normal(len(_GENDER_LIST), c.d_model),
            "eth_emb": normal(len(_ETH_LIST), c.d_model),
            "region_emb": normal(len(_REGION_LIST), c.d_model),
            "edu_emb": normal(len(_EDU_LIST), c.d_model),
            "year_emb": normal(n_buckets, c.d_model),
            "time_emb": normal(c.max_positions, c.d_model),
            "eta": np.zeros(c.d_model, dtype=dtype),
            "beta": normal(k, c.d_model, scale=0.02),
        }
        h = c.d_model // c.n_heads
        for i in range(c.n_layers):
            p[f"l{i}.w"] = normal(c.n_heads, h, h, scale=0.02)
            # each layer's state is the feed-forward OUTPUT (no outer
            # residual), so initialize the FFN near the identity: with
            # w1 @ w2 = 2I and gelu'(0) = 1/2, FFN(x) is approximately x at
            # small x, keeping early layers information-preserving
            if c.d_ff < c.d_model:
                raise ValueError("d_ff must be at least d_model")
            basis, _ = np.linalg.qr(rng.normal(size=(c.d_ff, c.d_model)))
            p[f"l{i}.w1"] = (basis.T + rng.normal(0.0, 0.02, size=(c.d_model, c.d_ff))).astype(dtype)
            p[f"l{i}.b1"] = np.zeros(c.d_ff, dtype=dtype)
            p[f"l{i}.w2"] = (2.0 * basis + rng.normal(0.0, 0.02, size=(c.d_ff, c.d_model))).astype(dtype)
            p[f"l{i}.b2"] = np.zeros(c.d_model, dtype=dtype)
        self.params = p

    def astype(self, dtype) -> "CareerModel":
        clone = CareerModel(self.config, self.taxonomy, seed=0, dtype=dtype)
        clone.params = {k: v.astype(dtype) for k, v in self.params.items()}
        return clone

    @property
    def null_index(self) -> int:
        return self.config.taxonomy_size

    def year_bucket(self, year: int) -> int:
        b = (year - self.config.year_range[0]) // _YEAR_BUCKET_SPAN
        return int(np.clip(b, 0, self._n_year_buckets - 1))

    # ------------------------------------------------------------- batching

    def build_batch(self, histories: Sequence[CareerHistory]) -> dict:
        """Pack histories into padded index arrays for the forward pass."""
        b = len(histories)
        t_max = max(len(h) for h in histories)
        if t_max > self.config.max_positions:
            raise ValueError(
                f"history length {t_max} exceeds positional table {self.config.max_positions}"
            )
        idx = self.taxonomy.index_of
        prev = np.full((b, t_max), self.null_index, dtype=np.int64)
        target = np.zeros((b, t_max), dtype=np.int64)
        edu = np.zeros((b, t_max), dtype=np.int64)
        year = np.zeros((b, t_max), dtype=np.int64)
        valid = np.zeros((b, t_max))
        gender = np.zeros(b, dtype=np.int64)
        eth = np.zeros(b, dtype=np.int64)
        region = np.zeros(b, dtype=np.int64)
        for i, h in enumerate(histories):
            gender[i] = _GENDER_LIST.index(h.static.gender)
            eth[i] = _ETH_LIST.index(h.static.ethnicity)
            region[i] = _REGION_LIST.index(h.static.region)
            for j, rec in enumerate(h.records):
                if j > 0:
                    prev[i, j] = idx(h.records[j - 1].occupation)
                target[i, j] = idx(rec.occupation)
                edu[i, j] = _EDU_LIST.index(rec.education)
                year[i, j] = self.year_bucket(rec.year)
                valid[i, j] = 1.0
        return {
            "prev": prev,
            "target": target,
            "edu": edu,
            "year_bucket": year,
            "valid": valid,
            "gender": gender,
            "ethnicity": eth,
            "region": region,
        }

    # -------------------------------------------------------------- forward

    def _forward_graph(self, batch: dict, train: bool, collect_att: Optional[list] = None):
        c = self.config
        prev = batch["prev"]
        b, t = prev.shape
        leaves = {k: ag.Tensor(v, requires_grad=train) for k, v in self.params.items()}
        x = ag.gather_rows(leaves["occ_emb"], prev)
        x = ag.add(x, ag.reshape(ag.gather_rows(leaves["gender_emb"], batch["gender"]), (b, 1, c.d_model)))
        x = ag.add(x, ag.reshape(ag.gather_rows(leaves["eth_emb"], batch["ethnicity"]), (b, 1, c.d_model)))
        x = ag.add(x, ag.reshape(ag.gather_rows(leaves["region_emb"], batch["region"]), (b, 1, c.d_model)))
        x = ag.add(x, ag.gather_rows(leaves["edu_emb"], batch["edu"]))
        x = ag.add(x, ag.gather_rows(leaves["year_emb"], batch["year_bucket"]))
        x = ag.add(x, ag.gather_rows(leaves["time_emb"], np.arange(t)))
        h = c.d_model // c.n_heads
        causal = np.triu(np.full((t, t), _NEG), k=1)[None, None, :, :]
        for i in range(c.n_layers):
            hh = ag.transpose(ag.reshape(x, (b, t, c.n_heads, h)), (0, 2, 1, 3))
            q = ag.matmul(hh, leaves[f"l{i}.w"])  # h_t^T W applied per head slice
            scores = ag.matmul(q, ag.transpose(hh, (0, 1, 3, 2)))
            att = ag.masked_softmax(scores, causal, axis=-1)
            if collect_att is not None:
                collect_att.append(att.data.copy())
            ctx = ag.reshape(ag.transpose(ag.matmul(att, hh), (0, 2, 1, 3)), (b, t, c.d_model))
            mixed = ag.add(x, ctx)
            x = ag.add(
                ag.matmul(ag.gelu(ag.add(ag.matmul(mixed, leaves[f"l{i}.w1"]), leaves[f"l{i}.b1"])), leaves[f"l{i}.w2"]),
                leaves[f"l{i}.b2"],
            )
        return x, leaves

    def forward_history(self, history: CareerHistory, t: int) -> np.ndarray:
        """Final-layer state h^(L) for transition ``t`` of one history."""
        if not (1 <= t <= len(history)):
            raise ValueError(f"transition index {t} out of range 1..{len(history)}")
        batch = self.build_batch([history])
        x, _ = self._forward_graph(batch, train=False)
        return x.data[0, t - 1].copy()

    def attention_maps(self, history: CareerHistory) -> list[np.ndarray]:
        """Per-layer attention weights (heads, T, T), rows summing to one."""
        maps: list[np.ndarray] = []
        self._forward_graph(self.build_batch([history]), train=False, collect_att=maps)
        return [m[0] for m in maps]

    # ------------------------------------------------------------ predicting

    def _two_stage_rows(self, h: np.ndarray, prev: np.ndarray) -> np.ndarray:
        """Distributions for each row of ``h`` (n, d) given prev indices (n,)."""
        eta = self.params["eta"].astype(np.float64)
        beta = self.params["beta"].astype(np.float64)
        k = self.config.taxonomy_size
        out = np.zeros((h.shape[0], k))
        occ_logits = h @ beta.T
        move_logit = h @ eta
        for i in range(h.shape[0]):
            if prev[i] == self.null_index:
                out[i] = _softmax_np(occ_logits[i])
            else:
                p_move = 1.0 / (1.0 + np.exp(-move_logit[i]))
                row = occ_logits[i].copy()
                row[prev[i]] = _NEG
                mover = _softmax_np(row)
                out[i] = p_move * mover
                out[i, prev[i]] = 1.0 - p_move
        return out

    def predict_all(self, history: CareerHistory) -> list[np.ndarray]:
        batch = self.build_batch([history])
        x, _ = self._forward_graph(batch, train=False)
        rows = self._two_stage_rows(x.data[0], batch["prev"][0])
        return [rows[j] for j in range(len(history))]

    def predict(self, history: CareerHistory, t: int) -> np.ndarray:
        if not (1 <= t <= len(history)):
            raise ValueError(f"transition index {t} out of range 1..{len(history)}")
        return self.predict_all(history)[t - 1]

    def log_prob(self, history: CareerHistory, t: int, code: int) -> float:
        return float(np.log(self.predict(history, t)[self.taxonomy.index_of(code)]))

    # ------------------------------------------------------------- training

    def _loss_graph(self, batch: dict, train: bool):
        x, leaves = self._forward_graph(batch, train=train)
        prev = batch["prev"]
        target = batch["target"]
        valid = batch["valid"]
        b, t = prev.shape
        k = self.config.taxonomy_size
        move_logit = ag.tsum(ag.mul(x, ag.reshape(leaves["eta"], (1, 1, -1))), axis=-1)
        occ_logits = ag.matmul(x, ag.transpose(leaves["beta"], (1, 0)))
        is_first = prev == self.null_index
        is_stay = (target == prev) & ~is_first
        is_move = ~is_first & ~is_stay
        # mover softmax excludes the previous occupation (only at t > 1)
        excl = np.zeros((b, t, k))
        rows, cols = np.nonzero(~is_first)
        excl[rows, cols, prev[rows, cols]] = _NEG
        lp_all = ag.pick_last(ag.log_softmax(occ_logits, axis=-1), target)
        lp_mover = ag.pick_last(ag.log_softmax(ag.add(occ_logits, excl), axis=-1), target)
        lp_stay = ag.log_sigmoid(ag.mul(move_logit, -1.0))
        lp_move_gate = ag.log_sigmoid(move_logit)
        picked = ag.add(
            ag.add(ag.mul(lp_all, is_first * valid), ag.mul(lp_stay, is_stay * valid)),
            ag.mul(ag.add(lp_move_gate, lp_mover), is_move * valid),
        )
        loss = ag.mul(ag.tsum(picked), -1.0 / valid.sum())
        return loss, leaves

    def loss_and_grads(self, batch: dict) -> tuple[float, dict[str, np.ndarray]]:
        loss_t, leaves = self._loss_graph(batch, train=True)
        loss_t.backward()
        grads = {k: leaf.grad for k, leaf in leaves.items() if leaf.grad is not None}
        return float(loss_t.data), grads

    def loss(self, batch: dict) -> float:
        loss_t, _ = self._loss_graph(batch, train=False)
        return float(loss_t.data)

    # ------------------------------------------------------------------- IO

    def save(self, path) -> None:
        cfg = asdict(self.config)
        cfg["year_range"] = list(self.config.year_range)
        save_checkpoint(path, kind="career", params=self.params, config=cfg)

    @classmethod
    def load(cls, path, taxonomy: OccupationTaxonomy) -> "CareerModel":
        kind, params, config = load_checkpoint(path)
        if kind != "career":
            raise ValueError(f"checkpoint kind {kind!r} is not a career model")
        config["year_range"] = tuple(config["year_range"])
        model = cls(CareerConfig(**config), taxonomy, seed=0)
        model.params = {k: v.astype(np.float32) for k, v in params.items()}
        return model


def _softmax_np(row: np.ndarray) -> np.ndarray:
    shifted = row - row.max()
    e = np.exp(shifted)
    return e / e.sum()
