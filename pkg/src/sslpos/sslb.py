"""Semi-supervised positioning with a biased teacher and confidence weights.

The pipeline pairs every sample with its nearest labeled neighbor in raw
CIR Frobenius distance and trains a two-head network on the concatenated
(measured, reference) features: one head predicts the position l, the
other the position bias dl = l_ref - l. For unlabeled samples the trained
teacher supplies pseudo-positions l* and predicted bias norms
d = ||dl*||; a Gaussian kernel density estimate over the d values turns
typicality into per-sample confidence weights w* with mean one, and a
student is retrained on labeled plus pseudo-labeled data with the
weighted objective.

Scheme tags:

    SL    supervised only; the reference is the sample itself and the
          bias target is (0, 0)
    SLR   supervised only, nearest-neighbor reference pairs
    SSLR  SLR teacher, pseudo-labels, scalar pseudo weight (default 1)
    SSLB  SLR teacher, pseudo-labels, per-sample KDE confidence weights

Loss forms, with N labeled and N* pseudo samples:

    supervised         (1/N) sum ||l_hat - l||
    teacher            (1/N) sum ||l_hat - l|| + (1/N) sum ||dl_hat - dl||
    scalar weighted    (1/(N+N*)) ( sum sqrt(w ||r||^2) + sum sqrt(w* ||r*||^2) )
    student            (1/(N+N*)) ( sum ||r|| + sum sqrt(w*_j ||r*_j||^2) )

All reduce to the pooled supervised mean at unit weights.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import neural_net
from .dataset import Dataset, featurize_batch
from .neural_net import (
    MlpParams,
    NetworkSpec,
    TrainConfig,
    TrainedModel,
    TrainingData,
    init_params,
)
from .reports import EvalReport, accuracy_at_quantile

SCHEMES = ("SL", "SLR", "SSLR", "SSLB")

_INIT_STREAM = 11
_TEACHER_STREAM = 17
_STUDENT_STREAM = 19


def _derive_seed(seed: int, tag: int) -> int:
    return int(np.random.SeedSequence([seed, tag]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ReferencePair:
    """Nearest labeled neighbor of a query CIR."""

    ref_index: int
    ref_cir: np.ndarray
    ref_position: np.ndarray
    distance: float
    bias_target: np.ndarray | None = None   # ref_position - own position


def _flat_real(cirs: np.ndarray) -> np.ndarray:
    """(n, 2m) float64 view-equivalent of complex tensors, for distances."""
    arr = np.ascontiguousarray(cirs, dtype=np.complex128)
    return arr.view(np.float64).reshape(arr.shape[0], -1)


def pairwise_sq_dists(queries: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """Squared Frobenius distances between raw CIR stacks, (nq, nr)."""
    q = _flat_real(queries)
    r = _flat_real(refs)
    qq = np.einsum("ij,ij->i", q, q)
    rr = np.einsum("ij,ij->i", r, r)
    d2 = qq[:, None] + rr[None, :] - 2.0 * (q @ r.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def nearest_reference_indices(
    queries: np.ndarray, labeled_cirs: np.ndarray, exclude_diagonal: bool = False
) -> np.ndarray:
    """Argmin of Frobenius distance per query; ties go to the lowest index.

    exclude_diagonal removes the i == j pair, for querying a labeled set
    against itself.
    """
    d2 = pairwise_sq_dists(queries, labeled_cirs)
    if exclude_diagonal:
        if d2.shape[0] != d2.shape[1]:
            raise ValueError("diagonal exclusion needs a square distance matrix")
        np.fill_diagonal(d2, np.inf)
    return np.argmin(d2, axis=1)


def knn_reference(
    query_cir: np.ndarray,
    labeled_set: Dataset,
    exclude_index: int | None = None,
    own_position: np.ndarray | None = None,
) -> ReferencePair:
    """Nearest labeled sample by raw-CIR Frobenius distance."""
    if not labeled_set.labeled:
        raise ValueError("reference search needs a labeled set")
    n = len(labeled_set)
    if n < 2 and exclude_index is not None:
        raise ValueError("self-exclusion needs at least two labeled samples")
    d2 = pairwise_sq_dists(query_cir[None], labeled_set.cirs)[0]
    if exclude_index is not None:
        d2[exclude_index] = np.inf
    j = int(np.argmin(d2))
    ref_pos = labeled_set.positions[j]
    return ReferencePair(
        ref_index=j,
        ref_cir=labeled_set.cirs[j],
        ref_position=ref_pos,
        distance=float(math.sqrt(d2[j])),
        bias_target=None if own_position is None else ref_pos - own_position,
    )


def build_teacher_targets(labeled_set: Dataset) -> TrainingData:
    """Teacher training set: features (H, H_ref), targets (l, l_ref - l).

    Each sample's reference is its nearest labeled neighbor with itself
    excluded.
    """
    if not labeled_set.labeled:
        raise ValueError("teacher targets need a labeled set")
    if len(labeled_set) < 2:
        raise ValueError("teacher targets need at least two samples")
    idx = nearest_reference_indices(labeled_set.cirs, labeled_set.cirs,
                                    exclude_diagonal=True)
    refs = labeled_set.cirs[idx]
    feats = featurize_batch(labeled_set.cirs, refs)
    pos = labeled_set.positions
    bias = labeled_set.positions[idx] - pos
    n = len(labeled_set)
    return TrainingData(
        features=feats,
        pos_targets=pos.copy(),
        pos_coeff=np.ones(n),
        bias_targets=bias,
        bias_coeff=np.ones(n),
    )


# ---------------------------------------------------------------------------
# loss forms (reference evaluators; training uses neural_net coefficients)

def supervised_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean Euclidean position error."""
    r = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return float(np.mean(np.sqrt(np.einsum("ij,ij->i", r, r))))


def teacher_loss(
    pred_pos: np.ndarray, target_pos: np.ndarray,
    pred_bias: np.ndarray, target_bias: np.ndarray,
) -> float:
    """Position term plus bias term, each a plain mean of norms."""
    return supervised_loss(pred_pos, target_pos) + supervised_loss(pred_bias, target_bias)


def _norms(pred, target):
    r = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return np.sqrt(np.einsum("ij,ij->i", r, r))


def sslr_weighted_loss(
    pred_l: np.ndarray, target_l: np.ndarray,
    pred_ls: np.ndarray, target_ls: np.ndarray,
    w: float = 1.0, w_star: float = 1.0,
) -> float:
    """Scalar-weight pseudo-label objective over labeled + pseudo batches."""
    n = np.asarray(pred_l).shape[0]
    n_star = np.asarray(pred_ls).shape[0]
    if n + n_star == 0:
        raise ValueError("empty loss")
    total = 0.0
    if n:
        total += np.sqrt(w * _norms(pred_l, target_l) ** 2).sum()
    if n_star:
        total += np.sqrt(w_star * _norms(pred_ls, target_ls) ** 2).sum()
    return float(total / (n + n_star))


def student_loss(
    pred_l: np.ndarray, target_l: np.ndarray,
    pred_ls: np.ndarray, target_ls: np.ndarray,
    weights: np.ndarray,
) -> float:
    """Unweighted labeled term plus per-sample weighted pseudo term."""
    n = np.asarray(pred_l).shape[0]
    n_star = np.asarray(pred_ls).shape[0]
    if n + n_star == 0:
        raise ValueError("empty loss")
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape[0] != n_star:
        raise ValueError("one weight per pseudo sample")
    if np.any(weights < 0):
        raise ValueError("weights must be non-negative")
    total = 0.0
    if n:
        total += _norms(pred_l, target_l).sum()
    if n_star:
        total += np.sqrt(weights * _norms(pred_ls, target_ls) ** 2).sum()
    return float(total / (n + n_star))


def scale_weights(weights: np.ndarray, alpha: float) -> np.ndarray:
    """Uniform rescale of pseudo-label weights."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return np.asarray(weights, dtype=np.float64) * alpha


# ---------------------------------------------------------------------------
# confidence

@dataclass(frozen=True)
class KdeModel:
    """Gaussian kernel density over 1-d points with a fixed bandwidth."""

    points: np.ndarray
    bandwidth: float


BANDWIDTH_FLOOR = 1e-6   # meters; keeps degenerate samples finite


def silverman_bandwidth(values: np.ndarray) -> float:
    """0.9 * min(std, IQR / 1.34) * n^(-1/5), floored at 1e-6."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n < 2:
        raise ValueError("bandwidth needs at least 2 values")
    sd = float(values.std(ddof=1))
    q75, q25 = np.percentile(values, [75.0, 25.0])
    iqr = float(q75 - q25)
    h = 0.9 * min(sd, iqr / 1.34) * n ** (-0.2)
    return max(h, BANDWIDTH_FLOOR)


def fit_kde(values: np.ndarray, bandwidth: float | None = None) -> KdeModel:
    values = np.asarray(values, dtype=np.float64)
    if bandwidth is None:
        bandwidth = silverman_bandwidth(values)
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    return KdeModel(points=values.copy(), bandwidth=float(bandwidth))


def kde_eval(model: KdeModel, queries: np.ndarray) -> np.ndarray:
    """Density (1/(N h)) sum_i K((x - d_i)/h) with the Gaussian kernel."""
    q = np.atleast_1d(np.asarray(queries, dtype=np.float64))
    h = model.bandwidth
    n = model.points.size
    z = (q[:, None] - model.points[None, :]) / h
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (n * h * math.sqrt(2.0 * math.pi))
    return dens


def confidence_weights(d_values: np.ndarray) -> np.ndarray:
    """KDE density of each d among all d values, normalized to mean one."""
    d = np.asarray(d_values, dtype=np.float64)
    if d.size < 2:
        raise ValueError("confidence weights need at least 2 values")
    model = fit_kde(d)
    dens = kde_eval(model, d)
    return dens / dens.mean()


def linear_confidence(d_values: np.ndarray) -> np.ndarray:
    """Range-normalized, reversed, mean-one weights; constant d is an error."""
    d = np.asarray(d_values, dtype=np.float64)
    if d.size < 2:
        raise ValueError("linear confidence needs at least 2 values")
    span = float(d.max() - d.min())
    if span <= 0.0:
        raise ValueError("linear confidence is undefined for constant values")
    w = 1.0 - (d - d.min()) / span
    return w / w.mean()


# ---------------------------------------------------------------------------
# pseudo-labeling and schemes

@dataclass
class PseudoLabelSet:
    """Teacher outputs over an unlabeled set, plus the features used."""

    features: np.ndarray        # (n*, input_dim)
    positions: np.ndarray       # (n*, 2) pseudo-positions l*
    biases: np.ndarray          # (n*, 2) predicted biases dl*
    d: np.ndarray               # (n*,) predicted bias norms
    ref_indices: np.ndarray     # (n*,) labeled reference row used

    def __len__(self) -> int:
        return self.positions.shape[0]


def pseudo_label(
    teacher: TrainedModel, unlabeled_set: Dataset, labeled_set: Dataset
) -> PseudoLabelSet:
    """Run the teacher over unlabeled samples paired with labeled refs."""
    idx = nearest_reference_indices(unlabeled_set.cirs, labeled_set.cirs)
    feats = featurize_batch(unlabeled_set.cirs, labeled_set.cirs[idx])
    pos, bias = neural_net.forward(teacher.params, feats)
    return PseudoLabelSet(
        features=feats,
        positions=pos,
        biases=bias,
        d=np.sqrt(np.einsum("ij,ij->i", bias, bias)),
        ref_indices=idx,
    )


def write_pseudo_jsonl(pseudo: PseudoLabelSet, weights: np.ndarray, path: str) -> None:
    """One JSON record per pseudo-labeled sample."""
    with open(path, "w") as f:
        for i in range(len(pseudo)):
            rec = {
                "index": i,
                "position": [float(v) for v in pseudo.positions[i]],
                "bias": [float(v) for v in pseudo.biases[i]],
                "d": float(pseudo.d[i]),
                "weight": float(weights[i]),
            }
            f.write(json.dumps(rec) + "\n")


def _self_paired_data(labeled_set: Dataset) -> TrainingData:
    """SL inputs: the sample is its own reference, bias target zero."""
    feats = featurize_batch(labeled_set.cirs, labeled_set.cirs)
    n = len(labeled_set)
    return TrainingData(
        features=feats,
        pos_targets=labeled_set.positions.copy(),
        pos_coeff=np.ones(n),
        bias_targets=np.zeros((n, 2)),
        bias_coeff=np.ones(n),
    )


def train_teacher(
    labeled_set: Dataset,
    spec: NetworkSpec,
    config: TrainConfig,
    self_paired: bool = False,
) -> TrainedModel:
    """Fit the two-head network on labeled data.

    self_paired trains the SL variant (own reference, zero bias targets);
    otherwise nearest-neighbor reference pairs and real bias targets.
    """
    data = _self_paired_data(labeled_set) if self_paired else build_teacher_targets(labeled_set)
    params = init_params(spec, _derive_seed(config.seed, _INIT_STREAM))
    return neural_net.train(params, data, config, spec)


def train_student(
    labeled_set: Dataset,
    pseudo: PseudoLabelSet | None,
    weights: np.ndarray | None,
    spec: NetworkSpec,
    config: TrainConfig,
    scalar_weights: tuple[float, float] | None = None,
    epoch_callback=None,
) -> TrainedModel:
    """Fit the student on labeled plus weighted pseudo-labeled data.

    Labeled samples keep their nearest-neighbor reference features and
    unit coefficients; pseudo samples carry sqrt(w*) coefficients on the
    position term. scalar_weights (w, w*) reproduces the scalar-weight
    objective instead (both coefficient groups constant). The bias head is
    left out of the student loss. An empty pseudo set reduces to plain
    supervised training on the labeled reference-pair features.
    """
    teacher_data = build_teacher_targets(labeled_set)
    n = teacher_data.features.shape[0]
    if pseudo is None or len(pseudo) == 0:
        feats = teacher_data.features
        pos = teacher_data.pos_targets
        coeff = np.ones(n)
        if scalar_weights is not None:
            coeff *= math.sqrt(scalar_weights[0])
    else:
        if scalar_weights is not None:
            w_lab, w_ps = scalar_weights
            lab_coeff = np.full(n, math.sqrt(w_lab))
            ps_coeff = np.full(len(pseudo), math.sqrt(w_ps))
        else:
            if weights is None:
                raise ValueError("per-sample weights required without scalar_weights")
            weights = np.asarray(weights, dtype=np.float64)
            if weights.shape[0] != len(pseudo):
                raise ValueError("one weight per pseudo sample")
            lab_coeff = np.ones(n)
            ps_coeff = np.sqrt(weights)
        feats = np.concatenate([teacher_data.features, pseudo.features])
        pos = np.concatenate([teacher_data.pos_targets, pseudo.positions])
        coeff = np.concatenate([lab_coeff, ps_coeff])
    data = TrainingData(features=feats, pos_targets=pos, pos_coeff=coeff)
    params = init_params(spec, _derive_seed(config.seed, _INIT_STREAM))
    return neural_net.train(params, data, config, spec, epoch_callback=epoch_callback)


def scheme_position_errors(
    model: TrainedModel, test_set: Dataset, labeled_set: Dataset | None
) -> np.ndarray:
    """Per-sample position errors with scheme-appropriate inputs.

    SL models see (H, H); every other scheme pairs each test sample with
    its nearest neighbor in the labeled training set.
    """
    if not test_set.labeled:
        raise ValueError("evaluation needs ground-truth positions")
    if model.scheme == "SL":
        feats = featurize_batch(test_set.cirs, test_set.cirs)
    else:
        if labeled_set is None:
            raise ValueError(f"{model.scheme or 'reference-pair'} evaluation needs the labeled set")
        idx = nearest_reference_indices(test_set.cirs, labeled_set.cirs)
        feats = featurize_batch(test_set.cirs, labeled_set.cirs[idx])
    pred, _ = neural_net.forward(model.params, feats)
    return _norms(pred, test_set.positions)


def _make_report(model: TrainedModel, errors: np.ndarray, seed: int,
                 config_hash: str, wall_time: float) -> EvalReport:
    return EvalReport(
        scheme=model.scheme,
        errors=errors,
        err_at_90=accuracy_at_quantile(errors, 0.9),
        mean_err=float(errors.mean()),
        seed=seed,
        config_hash=config_hash,
        wall_time=wall_time,
    )


def train_scheme_model(
    scheme: str,
    labeled_set: Dataset,
    unlabeled_set: Dataset | None,
    spec: NetworkSpec,
    config: TrainConfig,
    alpha: float = 1.0,
    confidence: str = "kde",
    epoch_eval=None,
) -> tuple[TrainedModel, PseudoLabelSet | None, np.ndarray | None]:
    """Train one scheme; returns (model, pseudo set, pseudo weights).

    confidence picks the pseudo-label weighting for SSLB-style runs:
    "kde" (density weights), "linear" (range-reversed), or "none" (all
    ones, the SSLR behavior). alpha rescales pseudo weights uniformly.
    SSLR keeps unit weights before the alpha scale. epoch_eval, when
    given, is a read-only callback run after every epoch of the final
    (student or supervised) training stage.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    pseudo = None
    weights = None
    if scheme == "SL":
        data = _self_paired_data(labeled_set)
        params = init_params(spec, _derive_seed(config.seed, _INIT_STREAM))
        model = neural_net.train(params, data, config, spec, epoch_callback=epoch_eval)
    elif scheme == "SLR":
        data = build_teacher_targets(labeled_set)
        params = init_params(spec, _derive_seed(config.seed, _INIT_STREAM))
        model = neural_net.train(params, data, config, spec, epoch_callback=epoch_eval)
    else:
        if unlabeled_set is None:
            raise ValueError(f"{scheme} needs an unlabeled set")
        teacher_cfg = _stage_config(config, _TEACHER_STREAM)
        teacher = train_teacher(labeled_set, spec, teacher_cfg, self_paired=False)
        pseudo = pseudo_label(teacher, unlabeled_set, labeled_set)
        if scheme == "SSLR" or confidence == "none":
            weights = np.ones(len(pseudo))
        elif confidence == "kde":
            weights = confidence_weights(pseudo.d)
        elif confidence == "linear":
            weights = linear_confidence(pseudo.d)
        else:
            raise ValueError(f"unknown confidence {confidence!r}")
        weights = scale_weights(weights, alpha)
        student_cfg = _stage_config(config, _STUDENT_STREAM)
        model = train_student(
            labeled_set, pseudo, weights, spec, student_cfg, epoch_callback=epoch_eval
        )
    model.scheme = scheme
    model.seed = config.seed
    return model, pseudo, weights


def run_scheme(
    scheme: str,
    labeled_set: Dataset,
    unlabeled_set: Dataset | None,
    test_set: Dataset,
    spec: NetworkSpec,
    config: TrainConfig,
    alpha: float = 1.0,
    confidence: str = "kde",
    config_hash: str = "",
    epoch_eval=None,
) -> tuple[TrainedModel, EvalReport]:
    """Train one scheme end to end and evaluate it on test_set."""
    import time as _time

    t0 = _time.perf_counter()
    model, _, _ = train_scheme_model(
        scheme, labeled_set, unlabeled_set, spec, config,
        alpha=alpha, confidence=confidence, epoch_eval=epoch_eval,
    )
    model.config_hash = config_hash
    wall = _time.perf_counter() - t0
    model.wall_time = wall
    errors = scheme_position_errors(model, test_set, labeled_set)
    report = _make_report(model, errors, config.seed, config_hash, wall)
    return model, report


def _stage_config(config: TrainConfig, tag: int) -> TrainConfig:
    """Distinct but deterministic seed per pipeline stage."""
    from dataclasses import replace

    return replace(config, seed=_derive_seed(config.seed, tag))
