"""Semi-supervised imputation of missing larval indices.

Co-training regression (COREG): two kNN regressors with different Minkowski
distance orders teach each other. Each iteration both regressors scan a
seeded random pool of unlabeled points, self-label them, and the point whose
tentative addition most reduces local squared error (largest positive delta)
is transferred, with its predicted label, into the peer's training set. On
termination every originally-unlabeled point gets the mean of the two
regressors' predictions.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import dataprep
from .errors import EmptyTrain, ValidationError
from .nn_core import make_rng


@dataclass
class LabeledExample:
    x: np.ndarray
    y: float


@dataclass(frozen=True)
class KnnRegressorCfg:
    k: int = 3
    p: float = 2.0

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.p < 1:
            raise ValidationError(f"Minkowski order must be >= 1, got {self.p}")


@dataclass(frozen=True)
class CoregCfg:
    cfg1: KnnRegressorCfg = KnnRegressorCfg(k=3, p=2.0)
    cfg2: KnnRegressorCfg = KnnRegressorCfg(k=3, p=5.0)
    max_iters: int = 100
    pool_size: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.cfg1.p == self.cfg2.p:
            raise ValidationError(
                "the two regressors must use different Minkowski orders"
            )
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.pool_size < 1:
            raise ValidationError(f"pool_size must be >= 1, got {self.pool_size}")


@dataclass
class PickInfo:
    index: int  # position in the original unlabeled list
    label: float
    delta: float


@dataclass
class IterationEntry:
    iteration: int
    picks: tuple[PickInfo | None, PickInfo | None]
    train_sizes: tuple[int, int]

    def line(self):
        parts = [f"iter={self.iteration}"]
        for j, pick in enumerate(self.picks, start=1):
            if pick is None:
                parts.append(f"r{j}=none")
            else:
                parts.append(
                    f"r{j}=(idx={pick.index}, y={pick.label!r}, delta={pick.delta!r})"
                )
        parts.append(f"sizes={self.train_sizes[0]}/{self.train_sizes[1]}")
        return " ".join(parts)


# ---------------------------------------------------------------------------
# kNN core. Internal helpers work on stacked arrays; the public ops accept
# LabeledExample lists.


def _minkowski(xs, x, p):
    d = np.abs(xs - x)
    if p == 2.0:
        return np.sqrt(np.sum(d * d, axis=1))
    return np.sum(d**p, axis=1) ** (1.0 / p)


def _knn_mean(xs, ys, x, k, p):
    dist = _minkowski(xs, x, p)
    order = np.argsort(dist, kind="stable")  # ties -> earlier training index
    return float(np.mean(ys[order[: min(k, len(ys))]]))


def _stack(train):
    if not train:
        raise EmptyTrain("kNN regressor has no training examples")
    xs = np.stack([np.asarray(ex.x, dtype=np.float64) for ex in train])
    ys = np.array([ex.y for ex in train], dtype=np.float64)
    return xs, ys


def knn_predict(train, x, cfg):
    """Mean label of the k nearest neighbors under Minkowski-p distance.

    Distance ties are broken by earlier training-set index; k larger than
    the training set falls back to all examples.
    """
    xs, ys = _stack(train)
    return _knn_mean(xs, ys, np.asarray(x, dtype=np.float64), cfg.k, cfg.p)


def _confidence(xs, ys, cand_x, cand_y, k, p):
    """Delta in local squared error from tentatively adding (cand_x, cand_y).

    Positive means the neighborhood of the candidate is predicted better
    after the addition.
    """
    dist = _minkowski(xs, cand_x, p)
    order = np.argsort(dist, kind="stable")
    omega = order[: min(k, len(ys))]
    xs_aug = np.vstack([xs, cand_x[None, :]])
    ys_aug = np.append(ys, cand_y)
    delta = 0.0
    for i in omega:
        before = ys[i] - _knn_mean(xs, ys, xs[i], k, p)
        after = ys_aug[i] - _knn_mean(xs_aug, ys_aug, xs[i], k, p)
        delta += before * before - after * after
    return float(delta)


def coreg_confidence(regressor_train, candidate_x, candidate_y, cfg):
    """Confidence of labeling candidate_x as candidate_y, per local error change."""
    xs, ys = _stack(regressor_train)
    return _confidence(
        xs, ys, np.asarray(candidate_x, dtype=np.float64), candidate_y, cfg.k, cfg.p
    )


# ---------------------------------------------------------------------------
# the co-training loop


def _best_candidate(xs, ys, unlabeled, pool, taken, k, p):
    """Scan the pool and return the best positive-delta pick, or None.

    Selection maximizes delta; exact ties go to the smaller unlabeled index.
    """
    best = None
    for u in pool:
        if u in taken:
            continue
        x_u = unlabeled[u]
        y_hat = _knn_mean(xs, ys, x_u, k, p)
        delta = _confidence(xs, ys, x_u, y_hat, k, p)
        if delta <= 0.0:
            continue
        if best is None or delta > best.delta or (delta == best.delta and u < best.index):
            best = PickInfo(index=u, label=y_hat, delta=delta)
    return best


def coreg_impute(labeled, unlabeled, cfg):
    """Run the co-training loop and impute every unlabeled point.

    labeled: list of LabeledExample; unlabeled: list of feature vectors.
    Returns (mapping from unlabeled index to imputed value, iteration log).
    Transferred pseudo-labeled points leave the pool permanently; the final
    imputed value is always the mean of the two finished regressors.
    """
    if not labeled:
        raise EmptyTrain("cannot co-train with zero labeled examples")
    log = []
    if not unlabeled:
        return {}, log

    xs0, ys0 = _stack(labeled)
    unlabeled = [np.asarray(x, dtype=np.float64) for x in unlabeled]
    sides = [
        {"xs": xs0.copy(), "ys": ys0.copy(), "cfg": cfg.cfg1},
        {"xs": xs0.copy(), "ys": ys0.copy(), "cfg": cfg.cfg2},
    ]
    remaining = list(range(len(unlabeled)))
    rng = make_rng(cfg.seed)

    for iteration in range(1, cfg.max_iters + 1):
        if not remaining:
            break
        pool_size = min(cfg.pool_size, len(remaining))
        pool_positions = rng.choice(len(remaining), size=pool_size, replace=False)
        pool = sorted(remaining[i] for i in pool_positions)

        picks = []
        taken = set()
        for side in sides:
            pick = _best_candidate(
                side["xs"], side["ys"], unlabeled, pool, taken,
                side["cfg"].k, side["cfg"].p,
            )
            picks.append(pick)
            if pick is not None:
                taken.add(pick.index)
        # each chosen point joins the PEER regressor's training set
        for j, pick in enumerate(picks):
            if pick is None:
                continue
            peer = sides[1 - j]
            peer["xs"] = np.vstack([peer["xs"], unlabeled[pick.index][None, :]])
            peer["ys"] = np.append(peer["ys"], pick.label)
            remaining.remove(pick.index)
        log.append(
            IterationEntry(
                iteration=iteration,
                picks=(picks[0], picks[1]),
                train_sizes=(len(sides[0]["ys"]), len(sides[1]["ys"])),
            )
        )
        if picks[0] is None and picks[1] is None:
            break

    imputed = {}
    for i, x in enumerate(unlabeled):
        y1 = _knn_mean(sides[0]["xs"], sides[0]["ys"], x, cfg.cfg1.k, cfg.cfg1.p)
        y2 = _knn_mean(sides[1]["xs"], sides[1]["ys"], x, cfg.cfg2.k, cfg.cfg2.p)
        imputed[i] = 0.5 * (y1 + y2)
    return imputed, log


# ---------------------------------------------------------------------------
# record-level wiring


def imputation_features(records):
    """Feature matrix for imputation: scaled climate + month-of-year encoding.

    The larval index is seasonal, so each row gets min-max scaled climate
    features plus sine/cosine of the calendar month.
    """
    scaler = dataprep.fit_scaler(records, dataprep.CLIMATE_FEATURES)
    rows = []
    for r in records:
        angle = 2.0 * math.pi * (r.month[1] - 1) / 12.0
        rows.append(
            [
                scaler.transform_value("temp_mean", r.temp_mean),
                scaler.transform_value("rh_mean", r.rh_mean),
                scaler.transform_value("rain_total", r.rain_total),
                math.sin(angle),
                math.cos(angle),
            ]
        )
    return np.array(rows, dtype=np.float64)


def impute_larval(records, cfg):
    """Fill missing larval_index values in assembled records via co-training.

    Returns (records with larval filled, provenance list of "observed" or
    "imputed" per record, iteration log).
    """
    feats = imputation_features(records)
    labeled = []
    unlabeled_positions = []
    for i, r in enumerate(records):
        if r.larval_index is not None:
            labeled.append(LabeledExample(x=feats[i], y=float(r.larval_index)))
        else:
            unlabeled_positions.append(i)
    if not labeled:
        raise EmptyTrain("no observed larval indices; cannot co-train")

    unlabeled = [feats[i] for i in unlabeled_positions]
    imputed, log = coreg_impute(labeled, unlabeled, cfg)

    out = []
    provenance = []
    fill = {unlabeled_positions[j]: v for j, v in imputed.items()}
    for i, r in enumerate(records):
        if i in fill:
            # kNN means stay inside the labeled range, but clamp defensively
            value = min(3.0, max(1.0, fill[i]))
            out.append(dataclasses.replace(r, larval_index=value))
            provenance.append("imputed")
        else:
            out.append(r)
            provenance.append("observed")
    return out, provenance, log
