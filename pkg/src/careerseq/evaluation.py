"""Metrics and uncertainty quantification.

Scoring walks a model over every transition of a split and records the log
probability of the realized occupation plus the model's mass on the previous
occupation (the stay score). Everything downstream -- perplexity, mover
conditionals via Bayes' rule, move/stay AUC, decile calibration, bootstrap
standard errors -- consumes those per-transition rows.

Bootstrap resampling is at the individual level: all transitions of a drawn
individual travel together, and replicate seeds derive from (root seed,
replicate index) so runs are reproducible and paired comparisons can share
replicate index sets.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace as dc_replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .corpus import (
    TRANSITION_FIRST,
    TRANSITION_MOVE,
    CareerHistory,
    CareerRecord,
    transition_type,
)
from .taxonomy import FORMAT_HEADER, OccupationTaxonomy
from .training import derive_seed


class EvalError(ValueError):
    pass


@dataclass
class TransitionScores:
    individual_ids: np.ndarray  # object array of ids
    t_index: np.ndarray
    ttype: np.ndarray  # object array: first | move | stay
    logp_true: np.ndarray
    p_stay: np.ndarray  # NaN at first observations
    weight: np.ndarray
    subgroups: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.logp_true)):
            raise EvalError("non-finite log-probabilities in scores")

    def __len__(self) -> int:
        return len(self.logp_true)

    def select(self, mask: np.ndarray) -> "TransitionScores":
        return TransitionScores(
            individual_ids=self.individual_ids[mask],
            t_index=self.t_index[mask],
            ttype=self.ttype[mask],
            logp_true=self.logp_true[mask],
            p_stay=self.p_stay[mask],
            weight=self.weight[mask],
            subgroups={k: v[mask] for k, v in self.subgroups.items()},
        )

    def mask(
        self,
        ttype: Optional[str] = None,
        subgroup: Optional[tuple[str, object]] = None,
        t_range: Optional[tuple[int, int]] = None,
    ) -> np.ndarray:
        m = np.ones(len(self), dtype=bool)
        if ttype is not None:
            m &= self.ttype == ttype
        if subgroup is not None:
            key, value = subgroup
            m &= self.subgroups[key] == value
        if t_range is not None:
            lo, hi = t_range
            m &= (self.t_index > lo) & (self.t_index <= hi)
        return m


def score_model(
    model,
    histories: Sequence[CareerHistory],
    taxonomy: OccupationTaxonomy,
    transitions: Optional[Sequence[tuple[CareerHistory, int]]] = None,
) -> TransitionScores:
    """Score every transition of ``histories`` (or an explicit transition
    list). Uses the model's batched paths when it offers them."""
    if transitions is None:
        transitions = [(h, t) for h in histories for t in range(1, len(h) + 1)]
    items = list(transitions)
    n = len(items)
    logp = np.zeros(n)
    p_stay = np.full(n, np.nan)
    if hasattr(model, "score_transitions"):
        logp, p_stay = model.score_transitions(items)
    elif hasattr(model, "predict_all") and transitions is not None:
        cache: dict[str, list[np.ndarray]] = {}
        for i, (h, t) in enumerate(items):
            if h.individual_id not in cache:
                cache[h.individual_id] = model.predict_all(h)
            dist = cache[h.individual_id][t - 1]
            logp[i] = np.log(dist[taxonomy.index_of(h.records[t - 1].occupation)])
            if t > 1:
                p_stay[i] = dist[taxonomy.index_of(h.records[t - 2].occupation)]
    else:
        for i, (h, t) in enumerate(items):
            dist = model.predict(h, t)
            logp[i] = np.log(dist[taxonomy.index_of(h.records[t - 1].occupation)])
            if t > 1:
                p_stay[i] = dist[taxonomy.index_of(h.records[t - 2].occupation)]
    ids = np.array([h.individual_id for h, _ in items], dtype=object)
    t_idx = np.array([t for _, t in items], dtype=np.int64)
    ttype = np.array([transition_type(h, t) for h, t in items], dtype=object)
    subgroups = {
        "education": np.array([h.records[t - 1].education.value for h, t in items], dtype=object),
        "gender": np.array([h.static.gender.value for h, t in items], dtype=object),
        "ethnicity": np.array([h.static.ethnicity.value for h, t in items], dtype=object),
        "region": np.array([h.static.region.value for h, t in items], dtype=object),
        "year": np.array([h.records[t - 1].year for h, t in items], dtype=np.int64),
    }
    return TransitionScores(
        individual_ids=ids,
        t_index=t_idx,
        ttype=ttype,
        logp_true=logp,
        p_stay=p_stay,
        weight=np.ones(n),
        subgroups=subgroups,
    )


# --------------------------------------------------------------------------
# Point metrics
# --------------------------------------------------------------------------


def perplexity(scores: TransitionScores, where: Optional[np.ndarray] = None) -> float:
    """exp of the weighted mean negative log-likelihood."""
    s = scores if where is None else scores.select(where)
    if len(s) == 0:
        raise EvalError("no transitions selected")
    return float(np.exp(-(s.weight * s.logp_true).sum() / s.weight.sum()))


@dataclass
class MoverPerplexity:
    value: float
    n_used: int
    n_excluded: int  # mover transitions where the stay score was exactly 1


def mover_perplexity(scores: TransitionScores) -> MoverPerplexity:
    """Perplexity over moves, conditioning each prediction on moving:
    P(y | move) = P(y) / (1 - P(previous))."""
    movers = scores.select(scores.mask(ttype=TRANSITION_MOVE))
    if len(movers) == 0:
        raise EvalError("no mover transitions")
    denom = 1.0 - movers.p_stay
    bad = denom <= 0.0
    usable = movers.select(~bad)
    if len(usable) == 0:
        raise EvalError("all mover transitions have degenerate stay probability")
    cond = usable.logp_true - np.log(1.0 - usable.p_stay)
    value = float(np.exp(-(usable.weight * cond).sum() / usable.weight.sum()))
    return MoverPerplexity(value=value, n_used=len(usable), n_excluded=int(bad.sum()))


def move_auc(scores: TransitionScores) -> float:
    """Rank-based AUC (midrank tie handling) for predicting moves among
    non-first transitions, scoring by 1 - P(previous occupation)."""
    s = scores.select(scores.ttype != TRANSITION_FIRST)
    labels = s.ttype == TRANSITION_MOVE
    if labels.all() or (~labels).all():
        raise EvalError("need both movers and stayers for AUC")
    pred = 1.0 - s.p_stay
    ranks = _midranks(pred)
    n1 = int(labels.sum())
    n0 = len(labels) - n1
    u = ranks[labels].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


@dataclass
class CalibrationBin:
    bin: int
    mean_pred: float
    emp_rate: float
    count: int


@dataclass
class CalibrationReport:
    bins: list[CalibrationBin]
    error: float
    per_bin_mean: bool

    def recompute_error(self) -> float:
        terms = []
        for b in self.bins:
            gap = b.emp_rate * b.count - b.mean_pred * b.count
            if self.per_bin_mean:
                gap /= b.count
            terms.append(gap**2)
        return float(np.sqrt(np.mean(terms)))


def calibration(scores: TransitionScores, n_bins: int = 10, per_bin_mean: bool = False) -> CalibrationReport:
    """Decile calibration of P(move) among non-first transitions.

    The error statistic squares per-bin sums of (indicator - predicted), as
    defined for the headline calibration figure; ``per_bin_mean`` divides
    each gap by the bin count first, giving a size-independent variant.
    Quantile edges that coincide are merged, so degenerate predictors yield
    fewer, larger bins.
    """
    s = scores.select(scores.ttype != TRANSITION_FIRST)
    if len(s) < n_bins:
        raise EvalError(f"need at least {n_bins} non-first transitions")
    pred = 1.0 - s.p_stay
    moved = (s.ttype == TRANSITION_MOVE).astype(np.float64)
    edges = np.unique(np.quantile(pred, np.linspace(0, 1, n_bins + 1)[1:-1]))
    assignment = np.searchsorted(edges, pred, side="right")
    bins = []
    terms = []
    for b in range(assignment.max() + 1):
        in_bin = assignment == b
        count = int(in_bin.sum())
        if count == 0:
            continue
        mean_pred = float(pred[in_bin].mean())
        emp_rate = float(moved[in_bin].mean())
        bins.append(CalibrationBin(bin=len(bins), mean_pred=mean_pred, emp_rate=emp_rate, count=count))
        gap = moved[in_bin].sum() - pred[in_bin].sum()
        if per_bin_mean:
            gap /= count
        terms.append(gap**2)
    return CalibrationReport(bins=bins, error=float(np.sqrt(np.mean(terms))), per_bin_mean=per_bin_mean)


# --------------------------------------------------------------------------
# Bootstrap
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapConfig:
    b: int = 100
    seed: int = 0
    level: str = "test_set"  # test_set | train_set

    def __post_init__(self):
        if self.b < 2:
            raise EvalError("need at least 2 bootstrap replicates")


@dataclass
class BootstrapResult:
    point: float
    se: float
    values: np.ndarray


def _individual_groups(scores: TransitionScores) -> tuple[list[str], list[np.ndarray]]:
    order: dict[str, int] = {}
    for i in scores.individual_ids:
        if i not in order:
            order[i] = len(order)
    groups: list[list[int]] = [[] for _ in order]
    for row, ind in enumerate(scores.individual_ids):
        groups[order[ind]].append(row)
    return list(order), [np.asarray(g, dtype=np.int64) for g in groups]


def _replicate_rows(groups: list[np.ndarray], rng: np.random.Generator) -> np.ndarray:
    n = len(groups)
    chosen = rng.integers(0, n, size=n)
    return np.concatenate([groups[i] for i in chosen])


def bootstrap_metric(
    metric_fn: Callable[[TransitionScores], float],
    scores: TransitionScores,
    cfg: BootstrapConfig = BootstrapConfig(),
    threads: int = 1,
) -> BootstrapResult:
    """Test-set bootstrap: resample individuals with replacement, keeping all
    transitions of a drawn individual, and take the sample standard deviation
    of the replicate metrics.

    Replicate seeds derive from (seed, replicate index), so results are
    identical whether replicates run serially or on a thread pool."""
    ids, groups = _individual_groups(scores)
    if len(groups) < 2:
        raise EvalError("need at least 2 individuals for a bootstrap")

    def one(r: int) -> float:
        rng = np.random.default_rng(derive_seed(cfg.seed, "bootstrap", r))
        return metric_fn(scores.select(_replicate_rows(groups, rng)))

    values = np.asarray(_run_replicates(one, cfg.b, threads))
    return BootstrapResult(point=metric_fn(scores), se=float(values.std(ddof=1)), values=values)


def _run_replicates(fn: Callable[[int], object], b: int, threads: int) -> list:
    if threads <= 1:
        return [fn(r) for r in range(b)]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(b)))


@dataclass
class PairedBootstrapResult:
    point_a: float
    point_b: float
    diff: float
    se_diff: float
    values_a: np.ndarray
    values_b: np.ndarray


def bootstrap_pair(
    metric_fn: Callable[[TransitionScores], float],
    scores_a: TransitionScores,
    scores_b: TransitionScores,
    cfg: BootstrapConfig = BootstrapConfig(),
    threads: int = 1,
) -> PairedBootstrapResult:
    """Paired differences on shared replicate index sets: each replicate
    draws one set of individuals and evaluates both models on it."""
    if not np.array_equal(scores_a.individual_ids, scores_b.individual_ids) or not np.array_equal(
        scores_a.t_index, scores_b.t_index
    ):
        raise EvalError("paired bootstrap requires both models scored on identical transitions")
    _, groups = _individual_groups(scores_a)
    if len(groups) < 2:
        raise EvalError("need at least 2 individuals for a bootstrap")

    def one(r: int) -> tuple[float, float]:
        rng = np.random.default_rng(derive_seed(cfg.seed, "bootstrap", r))
        rows = _replicate_rows(groups, rng)
        return metric_fn(scores_a.select(rows)), metric_fn(scores_b.select(rows))

    pairs = _run_replicates(one, cfg.b, threads)
    va = np.array([p[0] for p in pairs])
    vb = np.array([p[1] for p in pairs])
    return PairedBootstrapResult(
        point_a=metric_fn(scores_a),
        point_b=metric_fn(scores_b),
        diff=metric_fn(scores_a) - metric_fn(scores_b),
        se_diff=float((va - vb).std(ddof=1)),
        values_a=va,
        values_b=vb,
    )


@dataclass
class TrainSetBootstrapResult:
    point: float
    se: float
    values: np.ndarray
    n_failed: int


def train_set_bootstrap(
    trainer: Callable[[list[CareerHistory], int], object],
    train: Sequence[CareerHistory],
    test: Sequence[CareerHistory],
    taxonomy: OccupationTaxonomy,
    metric_fn: Callable[[TransitionScores], float],
    cfg: BootstrapConfig = BootstrapConfig(b=12, level="train_set"),
) -> TrainSetBootstrapResult:
    """Refit the model on individual-resampled training sets and evaluate
    each refit on the complete, fixed test split. Replicates whose training
    fails are dropped with a warning."""
    train = list(train)
    values = []
    n_failed = 0
    for r in range(cfg.b):
        rng = np.random.default_rng(derive_seed(cfg.seed, "train-bootstrap", r))
        sample = [train[i] for i in rng.integers(0, len(train), size=len(train))]
        sample = _dedupe_ids(sample)
        try:
            model = trainer(sample, derive_seed(cfg.seed, "train-bootstrap-fit", r))
            scores = score_model(model, list(test), taxonomy)
            values.append(metric_fn(scores))
        except Exception as exc:  # noqa: BLE001 - replicate isolation is the point
            n_failed += 1
            warnings.warn(f"training-set bootstrap replicate {r} failed: {exc}")
    if len(values) < 2:
        raise EvalError("fewer than 2 successful training-set bootstrap replicates")
    arr = np.asarray(values)
    baseline = trainer(train, derive_seed(cfg.seed, "train-bootstrap-fit", "full"))
    point = metric_fn(score_model(baseline, list(test), taxonomy))
    return TrainSetBootstrapResult(point=point, se=float(arr.std(ddof=1)), values=arr, n_failed=n_failed)


def _dedupe_ids(histories: list[CareerHistory]) -> list[CareerHistory]:
    """Resampled individuals appear multiple times; give copies unique ids so
    dataset invariants hold."""
    seen: dict[str, int] = {}
    out = []
    for h in histories:
        k = seen.get(h.individual_id, 0)
        seen[h.individual_id] = k + 1
        out.append(h if k == 0 else dc_replace(h, individual_id=f"{h.individual_id}#dup{k}"))
    return out


# --------------------------------------------------------------------------
# Model differences and gap-year checks
# --------------------------------------------------------------------------


@dataclass
class LoglikDifference:
    delta: np.ndarray  # log P_a - log P_b per transition
    mean: float
    by_subgroup: dict[str, dict[object, float]]
    quintiles: list[tuple[int, float, int]]  # (quintile, mean delta, count)


def loglik_difference(scores_a: TransitionScores, scores_b: TransitionScores, mover_conditional: bool = False) -> LoglikDifference:
    if not np.array_equal(scores_a.individual_ids, scores_b.individual_ids) or not np.array_equal(
        scores_a.t_index, scores_b.t_index
    ):
        raise EvalError("log-likelihood difference requires aligned transitions")
    if mover_conditional:
        keep = (scores_a.ttype == TRANSITION_MOVE) & (1.0 - scores_a.p_stay > 0) & (1.0 - scores_b.p_stay > 0)
        a = scores_a.select(keep)
        b = scores_b.select(keep)
        delta = (a.logp_true - np.log(1 - a.p_stay)) - (b.logp_true - np.log(1 - b.p_stay))
        base = a
    else:
        delta = scores_a.logp_true - scores_b.logp_true
        base = scores_a
    by_subgroup: dict[str, dict[object, float]] = {}
    for key, arr in base.subgroups.items():
        by_subgroup[key] = {v: float(delta[arr == v].mean()) for v in sorted(set(arr.tolist()), key=str)}
    order = np.argsort(delta, kind="mergesort")
    quintiles = []
    for q in range(5):
        lo = (len(delta) * q) // 5
        hi = (len(delta) * (q + 1)) // 5
        rows = order[lo:hi]
        if len(rows):
            quintiles.append((q + 1, float(delta[rows].mean()), len(rows)))
    return LoglikDifference(delta=delta, mean=float(delta.mean()), by_subgroup=by_subgroup, quintiles=quintiles)


def gap_year_compare(model, taxonomy: OccupationTaxonomy, history: CareerHistory, t: int) -> tuple[float, float]:
    """Direct vs compound probability of the realized occupation at a
    two-year gap: compound marginalizes over the unobserved intermediate
    year by inserting each candidate occupation as a pseudo-record."""
    if t < 2 or t > len(history):
        raise EvalError("gap-year comparison needs a transition with a predecessor")
    rec = history.records[t - 1]
    prev = history.records[t - 2]
    if rec.year != prev.year + 2:
        raise EvalError(f"transition {t} has gap {rec.year - prev.year}, expected 2")
    y_idx = taxonomy.index_of(rec.occupation)
    direct = float(model.predict(history, t)[y_idx])
    inter_year = rec.year - 1
    probe = dc_replace(
        history,
        records=history.records[: t - 1] + (CareerRecord(inter_year, prev.education, prev.occupation),),
    )
    inter_dist = model.predict(probe, t)
    compound = 0.0
    for code in taxonomy.codes():
        extended = dc_replace(
            history,
            records=history.records[: t - 1]
            + (CareerRecord(inter_year, prev.education, code),)
            + history.records[t - 1 :],
        )
        compound += float(model.predict(extended, t + 1)[y_idx]) * float(inter_dist[taxonomy.index_of(code)])
    return direct, compound


# --------------------------------------------------------------------------
# Metrics CSV
# --------------------------------------------------------------------------

METRICS_COLUMNS = ["dataset", "split", "model", "metric", "filter", "value", "se", "B", "seed"]


def write_metrics_csv(path, rows: Iterable[dict], provenance: dict) -> None:
    """Rows with METRICS_COLUMNS keys; provenance lands in header comments so
    downstream reporting can refuse mixing incompatible runs."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(FORMAT_HEADER + "\n")
        for key in sorted(provenance):
            fh.write(f"# {key}={provenance[key]}\n")
        writer = csv.DictWriter(fh, fieldnames=METRICS_COLUMNS)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            for col in ("value", "se"):
                if isinstance(out.get(col), float):
                    out[col] = f"{out[col]:.12g}"
            writer.writerow(out)


def read_metrics_csv(path) -> tuple[list[dict], dict]:
    provenance: dict[str, str] = {}
    rows: list[dict] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != FORMAT_HEADER:
            raise EvalError(f"missing {FORMAT_HEADER} header in {path}")
        pos = fh.tell()
        line = fh.readline()
        while line.startswith("# "):
            key, _, value = line[2:].rstrip("\n").partition("=")
            provenance[key] = value
            pos = fh.tell()
            line = fh.readline()
        fh.seek(pos)
        for row in csv.DictReader(fh):
            rows.append(row)
    return rows, provenance


def write_calibration_csv(path, report: CalibrationReport, provenance: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(FORMAT_HEADER + "\n")
        for key in sorted(provenance):
            fh.write(f"# {key}={provenance[key]}\n")
        writer = csv.writer(fh)
        writer.writerow(["bin", "mean_pred", "emp_rate", "count"])
        for b in report.bins:
            writer.writerow([b.bin, f"{b.mean_pred:.12g}", f"{b.emp_rate:.12g}", b.count])
