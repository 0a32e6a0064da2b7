"""Multinomial logistic regression over hand-built or embedding features.

The featurizer turns (history, t) into a fixed-length vector; the model
softmaxes one coefficient row per occupation on top. With previous-occupation
one-hot features and no regularization, the maximum-likelihood solution
reproduces normalized empirical transition frequencies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..corpus import CareerHistory, Education, Ethnicity, Gender, Region
from ..taxonomy import OccupationTaxonomy
from .checkpoint import load_checkpoint, save_checkpoint

_EDU_LIST = list(Education)
_GENDER_LIST = list(Gender)
_ETH_LIST = list(Ethnicity)
_REGION_LIST = list(Region)


class Featurizer:
    name: str = "base"
    dim: int = 0

    def transform(self, history: CareerHistory, t: int) -> np.ndarray:
        raise NotImplementedError


class PrevOccupationFeaturizer(Featurizer):
    """One-hot of the previous occupation, with a slot for the null state at t=1."""

    def __init__(self, taxonomy: OccupationTaxonomy):
        self.taxonomy = taxonomy
        self.name = "prev_onehot"
        self.dim = taxonomy.size + 1

    def transform(self, history: CareerHistory, t: int) -> np.ndarray:
        x = np.zeros(self.dim)
        if t == 1:
            x[-1] = 1.0
        else:
            x[self.taxonomy.index_of(history.records[t - 2].occupation)] = 1.0
        return x


class PrevCovariatesFeaturizer(Featurizer):
    """Previous-occupation one-hot plus static covariates, education, and a
    scaled calendar-year column."""

    def __init__(self, taxonomy: OccupationTaxonomy, year_range: tuple[int, int] = (1979, 2022)):
        self.taxonomy = taxonomy
        self.year_range = year_range
        self.name = "prev_covariates"
        self.dim = (taxonomy.size + 1) + len(_GENDER_LIST) + len(_ETH_LIST) + len(_REGION_LIST) + len(_EDU_LIST) + 1

    def transform(self, history: CareerHistory, t: int) -> np.ndarray:
        k = self.taxonomy.size
        x = np.zeros(self.dim)
        if t == 1:
            x[k] = 1.0
        else:
            x[self.taxonomy.index_of(history.records[t - 2].occupation)] = 1.0
        off = k + 1
        x[off + _GENDER_LIST.index(history.static.gender)] = 1.0
        off += len(_GENDER_LIST)
        x[off + _ETH_LIST.index(history.static.ethnicity)] = 1.0
        off += len(_ETH_LIST)
        x[off + _REGION_LIST.index(history.static.region)] = 1.0
        off += len(_REGION_LIST)
        rec = history.records[t - 1]
        x[off + _EDU_LIST.index(rec.education)] = 1.0
        off += len(_EDU_LIST)
        y0, y1 = self.year_range
        x[off] = (rec.year - y0) / max(y1 - y0, 1)
        return x


class EmbeddingFeaturizer(Featurizer):
    """Wraps an external embedding function (e.g. a language model's final
    hidden state over the rendered prompt)."""

    def __init__(self, fn: Callable[[CareerHistory, int], np.ndarray], dim: int, add_intercept: bool = True):
        self.fn = fn
        self.add_intercept = add_intercept
        self.name = "embedding"
        self.dim = dim + (1 if add_intercept else 0)

    def transform(self, history: CareerHistory, t: int) -> np.ndarray:
        v = np.asarray(self.fn(history, t), dtype=np.float64)
        if self.add_intercept:
            v = np.concatenate([v, [1.0]])
        return v


@dataclass
class MnlFitConfig:
    lr: float = 0.1
    max_iters: int = 2000
    tol: float = 1e-7  # on gradient max-norm
    seed: int = 0


class MnlModel:
    def __init__(self, featurizer: Featurizer, taxonomy: OccupationTaxonomy, reg: float = 0.0):
        self.featurizer = featurizer
        self.taxonomy = taxonomy
        self.reg = reg
        self.params = {"weights": np.zeros((featurizer.dim, taxonomy.size))}

    @property
    def weights(self) -> np.ndarray:
        return self.params["weights"]

    @weights.setter
    def weights(self, value: np.ndarray) -> None:
        self.params["weights"] = value

    # -------------------------------------------------------------- fitting

    def design_matrix(self, histories: Sequence[CareerHistory]) -> tuple[np.ndarray, np.ndarray]:
        rows, ys = [], []
        for h in histories:
            for t in range(1, len(h) + 1):
                rows.append(self.featurizer.transform(h, t))
                ys.append(self.taxonomy.index_of(h.records[t - 1].occupation))
        return np.asarray(rows), np.asarray(ys, dtype=np.int64)

    def loss_and_grads(self, batch: tuple[np.ndarray, np.ndarray]) -> tuple[float, dict[str, np.ndarray]]:
        x, y = batch
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite features")
        logits = x @ self.weights
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        n = x.shape[0]
        nll = -np.log(p[np.arange(n), y]).mean()
        loss = nll + 0.5 * self.reg * float((self.weights**2).sum())
        delta = p
        delta[np.arange(n), y] -= 1.0
        grad = x.T @ delta / n + self.reg * self.weights
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError("non-finite gradient in MNL fit")
        return float(loss), {"weights": grad}

    def loss(self, batch) -> float:
        return self.loss_and_grads(batch)[0]

    def fit(self, histories: Sequence[CareerHistory], cfg: MnlFitConfig = MnlFitConfig()) -> "MnlModel":
        from ..training import AdamState  # local import to avoid a cycle

        x, y = self.design_matrix(histories)
        adam = AdamState(like=self.params)
        for step in range(1, cfg.max_iters + 1):
            _, grads = self.loss_and_grads((x, y))
            if np.abs(grads["weights"]).max() < cfg.tol:
                break
            adam.update(self.params, grads, lr=cfg.lr, betas=(0.9, 0.999), weight_decay=0.0, step=step)
        return self

    # ------------------------------------------------------------ predicting

    def predict(self, history: CareerHistory, t: int) -> np.ndarray:
        z = self.featurizer.transform(history, t) @ self.weights
        z -= z.max()
        p = np.exp(z)
        return p / p.sum()

    def log_prob(self, history: CareerHistory, t: int, code: int) -> float:
        return float(np.log(self.predict(history, t)[self.taxonomy.index_of(code)]))

    # ------------------------------------------------------------------- IO

    def save(self, path) -> None:
        save_checkpoint(
            path,
            kind="mnl",
            params={"weights": self.weights.astype(np.float32)},
            config={
                "taxonomy_size": self.taxonomy.size,
                "featurizer": self.featurizer.name,
                "feature_dim": self.featurizer.dim,
                "reg": self.reg,
            },
        )

    @classmethod
    def load(cls, path, featurizer: Featurizer, taxonomy: OccupationTaxonomy) -> "MnlModel":
        kind, params, config = load_checkpoint(path)
        if kind != "mnl":
            raise ValueError(f"checkpoint kind {kind!r} is not an MNL model")
        if config["featurizer"] != featurizer.name or config["feature_dim"] != featurizer.dim:
            raise ValueError("featurizer mismatch with checkpoint")
        model = cls(featurizer, taxonomy, reg=config["reg"])
        model.weights = params["weights"].astype(np.float64)
        return model
