"""Adapts a token language model into an occupation model.

A job's score is the probability the LM assigns to its title as the
continuation of the rendered career prompt, expanded token by token with the
chain rule. The prompt ends at the record line's colon, so the scored
continuation carries the intervening space. Raw scores live in (0, 1] and
need not sum to one over the taxonomy (mass leaks to strings that are not
job titles); the normalized variant rescales by the taxonomy total at the
cost of one scoring pass per occupation.

Two scoring paths exist on purpose: ``job_probability`` appends title tokens
one at a time (one forward pass per token), while ``joint_log_probability``
reads every stepwise conditional from a single forward pass over the
concatenated sequence. They agree to floating-point accuracy and are checked
against each other in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..corpus import CareerHistory
from ..template import TemplateCodec
from ..tokenizer import Vocabulary, title_prefix_match
from .token_lm import ContextOverflowError, TokenLM


@dataclass(frozen=True)
class GenerationConfig:
    temperature: float = 1.0
    top_k: int = 50
    top_p: float = 0.6
    max_new: int = 20
    stop: Optional[str] = "\n"
    seed: int = 0


class LmOccupationAdapter:
    def __init__(self, lm: TokenLM, vocab: Vocabulary, codec: TemplateCodec):
        self.lm = lm
        self.vocab = vocab
        self.codec = codec
        self.taxonomy = codec.taxonomy
        self.forward_calls = 0
        self._cont_cache: dict[int, list[int]] = {}

    # ------------------------------------------------------------- helpers

    def prompt_ids(self, history: CareerHistory, t: int) -> list[int]:
        return [self.vocab.bos_id] + self.vocab.encode(self.codec.render_prompt(history, t))

    def continuation_ids(self, code: int) -> list[int]:
        ids = self._cont_cache.get(code)
        if ids is None:
            ids = self.vocab.encode(self.codec.title_continuation(code))
            self._cont_cache[code] = ids
        return ids

    def _check_fits(self, n_tokens: int) -> None:
        if n_tokens > self.lm.config.context:
            raise ContextOverflowError(
                f"prompt plus title spans {n_tokens} tokens, over the {self.lm.config.context} cap"
            )

    # ------------------------------------------------------------- scoring

    def job_probability(self, history: CareerHistory, t: int, code: int) -> float:
        """Chain-rule product, one forward pass per title token."""
        prompt = self.prompt_ids(history, t)
        cont = self.continuation_ids(code)
        self._check_fits(len(prompt) + len(cont))
        logp = 0.0
        context = list(prompt)
        for tok in cont:
            dist = self.lm.next_token_distribution(context)
            self.forward_calls += 1
            logp += float(np.log(dist[tok]))
            context.append(tok)
        return float(np.exp(logp))

    def joint_log_probability(self, history: CareerHistory, t: int, code: int) -> float:
        """Independent joint scorer: one forward pass over prompt + title."""
        prompt = self.prompt_ids(history, t)
        cont = self.continuation_ids(code)
        self._check_fits(len(prompt) + len(cont))
        self.forward_calls += 1
        lps = self.lm.sequence_log_probs(prompt + cont, from_position=len(prompt))
        return float(lps.sum())

    def job_distribution(self, history: CareerHistory, t: int, normalized: bool = False) -> np.ndarray:
        """Raw (default) or normalized scores over the taxonomy."""
        prompt = np.asarray(self.prompt_ids(history, t), dtype=np.int64)
        seqs, read_from = [], []
        for code in self.taxonomy.codes():
            cont = self.continuation_ids(code)
            self._check_fits(len(prompt) + len(cont))
            seqs.append(np.concatenate([prompt, np.asarray(cont, dtype=np.int64)]))
            read_from.append(len(prompt))
        raw = np.zeros(self.taxonomy.size)
        for start in range(0, len(seqs), 16):
            chunk = seqs[start : start + 16]
            lps = self.lm.batched_log_probs(chunk, read_from[start : start + 16], pad_id=self.vocab.eos_id)
            self.forward_calls += len(chunk)
            for j, lp in enumerate(lps):
                raw[start + j] = np.exp(lp.sum())
        if not normalized:
            return raw
        return raw / raw.sum()

    def predict(self, history: CareerHistory, t: int) -> np.ndarray:
        return self.job_distribution(history, t, normalized=False)

    def log_prob(self, history: CareerHistory, t: int, code: int) -> float:
        return self.joint_log_probability(history, t, code)

    def stay_probability(self, history: CareerHistory, t: int) -> float:
        """Raw score of the previous occupation's title (undefined at t=1)."""
        if t == 1:
            return float("nan")
        prev = history.records[t - 2].occupation
        return float(np.exp(self.joint_log_probability(history, t, prev)))

    def score_transitions(
        self,
        items: Sequence[tuple[CareerHistory, int]],
        include_stay: bool = True,
        batch_size: int = 16,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Batched (log P(realized occupation), raw P(previous occupation))
        for many (history, t) pairs; the stay column is NaN at t=1."""
        seqs: list[np.ndarray] = []
        read_from: list[int] = []
        owners: list[tuple[int, int]] = []  # (item index, 0=true 1=stay)
        for i, (h, t) in enumerate(items):
            prompt = np.asarray(self.prompt_ids(h, t), dtype=np.int64)
            cont = self.continuation_ids(h.records[t - 1].occupation)
            self._check_fits(len(prompt) + len(cont))
            seqs.append(np.concatenate([prompt, np.asarray(cont, dtype=np.int64)]))
            read_from.append(len(prompt))
            owners.append((i, 0))
            if include_stay and t > 1:
                cont = self.continuation_ids(h.records[t - 2].occupation)
                self._check_fits(len(prompt) + len(cont))
                seqs.append(np.concatenate([prompt, np.asarray(cont, dtype=np.int64)]))
                read_from.append(len(prompt))
                owners.append((i, 1))
        logp_true = np.full(len(items), np.nan)
        p_stay = np.full(len(items), np.nan)
        order = sorted(range(len(seqs)), key=lambda j: len(seqs[j]))
        for start in range(0, len(order), batch_size):
            chunk_idx = order[start : start + batch_size]
            lps = self.lm.batched_log_probs(
                [seqs[j] for j in chunk_idx], [read_from[j] for j in chunk_idx], pad_id=self.vocab.eos_id
            )
            self.forward_calls += len(chunk_idx)
            for j, lp in zip(chunk_idx, lps):
                item, which = owners[j]
                if which == 0:
                    logp_true[item] = lp.sum()
                else:
                    p_stay[item] = np.exp(lp.sum())
        return logp_true, p_stay

    # ---------------------------------------------------------- generation

    def generate(self, prompt: str, cfg: GenerationConfig = GenerationConfig()) -> str:
        """Seeded ancestral sampling with top-k / nucleus filtering; returns
        only the continuation text, cut at the stop string if it appears."""
        ids = [self.vocab.bos_id] + self.vocab.encode(prompt)
        self._check_fits(len(ids) + 1)
        rng = np.random.default_rng(cfg.seed)
        new_ids: list[int] = []
        for _ in range(cfg.max_new):
            if len(ids) >= self.lm.config.context:
                break
            dist = self.lm.next_token_distribution(ids)
            self.forward_calls += 1
            tok = _sample(dist, rng, cfg.temperature, cfg.top_k, cfg.top_p)
            if tok == self.vocab.eos_id:
                break
            ids.append(tok)
            new_ids.append(tok)
            if cfg.stop:
                text = self.vocab.decode(new_ids)
                if cfg.stop in text:
                    return text[: text.index(cfg.stop)]
        return self.vocab.decode(new_ids)

    def valid_title_rate(
        self,
        prompts: Sequence[str],
        cfg: GenerationConfig = GenerationConfig(),
        titles: Optional[dict[str, int]] = None,
    ) -> float:
        """Share of prompts whose sampled continuation starts with an exact
        taxonomy title."""
        if not prompts:
            raise ValueError("no prompts")
        hits = 0
        for i, prompt in enumerate(prompts):
            text = self.generate(prompt, GenerationConfig(**{**cfg.__dict__, "seed": cfg.seed + i}))
            if title_prefix_match(self.taxonomy, text, titles=titles) is not None:
                hits += 1
        return hits / len(prompts)

    # ---------------------------------------------------------- embeddings

    def extract_embedding(self, history: CareerHistory, t: int) -> np.ndarray:
        """Final-layer hidden state at the last prompt position."""
        ids = self.prompt_ids(history, t)
        self._check_fits(len(ids))
        self.forward_calls += 1
        return self.lm.final_hidden(ids)


def _sample(dist: np.ndarray, rng: np.random.Generator, temperature: float, top_k: int, top_p: float) -> int:
    if temperature <= 1e-8:
        return int(np.argmax(dist))
    p = np.power(dist, 1.0 / temperature)
    p /= p.sum()
    if top_k and top_k < p.size:
        cutoff = np.partition(p, -top_k)[-top_k]
        p = np.where(p >= cutoff, p, 0.0)
    if 0.0 < top_p < 1.0:
        order = np.argsort(-p)
        csum = np.cumsum(p[order]) / p.sum()
        keep_n = int(np.searchsorted(csum, top_p) + 1)
        mask = np.zeros_like(p)
        mask[order[:keep_n]] = 1.0
        p = p * mask
    p /= p.sum()
    return int(rng.choice(p.size, p=p))
