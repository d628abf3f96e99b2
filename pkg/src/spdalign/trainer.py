"""Small MLP trained with cross-entropy plus a batch-wise covariance alignment loss.

The alignment term compares covariances of the last hidden layer computed on
the source and the target half of each mini-batch. Gradients of the
alignment term flow into both halves.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .core import FeatureBatch, batch_covariance
from .errors import DimensionError, NumericalError, ValidationError
from .grad import grad_cov_wrt_features, loss_coral_and_grads, loss_log_and_grads

MODES = ("baseline", "coral", "log")
TRACE_HEADER = ("step", "epoch", "loss_class", "loss_align_weighted", "lr")


@dataclass
class TrainConfig:
    mode: str = "log"
    alpha: float = 1.0
    lambda_: float = 0.1
    gamma: float = 1e-5
    base_lr: float = 1e-3
    lr_decay: float = 0.95
    batch_size: int = 128
    epochs: int = 10
    seed: int = 0
    hidden_dims: tuple[int, ...] = (64, 16)

    def __post_init__(self):
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.alpha < 0 or self.lambda_ < 0:
            raise ValidationError("alpha and lambda must be nonnegative")
        if self.gamma < 0:
            raise ValidationError("gamma must be nonnegative")
        if self.base_lr <= 0:
            raise ValidationError("base_lr must be positive")
        if not 0 < self.lr_decay <= 1:
            raise ValidationError("lr_decay must lie in (0, 1]")
        if self.batch_size < 4 or self.batch_size % 2:
            raise ValidationError("batch_size must be an even integer >= 4")
        if self.epochs < 0:
            raise ValidationError("epochs must be nonnegative")
        if not self.hidden_dims or min(self.hidden_dims) < 1:
            raise ValidationError("hidden_dims must list at least one positive width")

    @property
    def align_weight(self) -> float:
        """Weight of the alignment term that is actually backpropagated."""
        if self.mode == "log":
            return self.alpha
        if self.mode == "coral":
            return self.lambda_
        return 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        d["hidden_dims"] = list(self.hidden_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        d = dict(d)
        if "lambda" in d:
            d["lambda_"] = d.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> TrainConfig:
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed config JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ValidationError("config JSON must be an object")
        try:
            return cls.from_dict(d)
        except TypeError as exc:
            raise ValidationError(str(exc)) from exc


@dataclass
class MlpParams:
    """Weights ``(fan_in, fan_out)`` and biases of each layer; ReLU between layers."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValidationError("need matching, nonempty weight and bias lists")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise DimensionError(f"layer {k}: weight {w.shape} and bias {b.shape} disagree")
            if k and self.weights[k - 1].shape[1] != w.shape[0]:
                raise DimensionError(f"layer {k} fan-in {w.shape[0]} does not chain")

    @classmethod
    def init(cls, sizes, rng: np.random.Generator) -> MlpParams:
        """Uniform ``+-sqrt(6 / fan_in)`` weights and zero biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def copy(self) -> MlpParams:
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def flat(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def save(self, path):
        arrays = {f"w{k}": w for k, w in enumerate(self.weights)}
        arrays.update({f"b{k}": b for k, b in enumerate(self.biases)})
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path) -> MlpParams:
        with np.load(path) as data:
            n = sum(1 for k in data.files if k.startswith("w"))
            return cls([data[f"w{k}"] for k in range(n)], [data[f"b{k}"] for k in range(n)])


@dataclass(frozen=True)
class StepRecord:
    step: int
    epoch: int
    loss_class: float
    loss_align_weighted: float
    lr: float
    # unweighted values of both alignment losses, whatever the mode
    loss_log: float = float("nan")
    loss_coral: float = float("nan")


@dataclass
class LossTrace:
    records: list[StepRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def append(self, rec: StepRecord):
        if self.records and rec.step <= self.records[-1].step:
            raise ValidationError("trace step indices must increase")
        self.records.append(rec)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    def epoch_mean(self, name: str, epoch: int) -> float:
        vals = [getattr(r, name) for r in self.records if r.epoch == epoch]
        if not vals:
            raise ValidationError(f"no records for epoch {epoch}")
        return float(np.mean(vals))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for r in self.records:
            writer.writerow(
                [r.step, r.epoch, repr(r.loss_class), repr(r.loss_align_weighted), repr(r.lr)]
            )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> LossTrace:
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if tuple(header or ()) != TRACE_HEADER:
            raise ValidationError(f"unexpected trace header {header}")
        trace = cls()
        for row in reader:
            trace.append(
                StepRecord(int(row[0]), int(row[1]), float(row[2]), float(row[3]), float(row[4]))
            )
        return trace


def _relu(x):
    return np.maximum(x, 0.0)


def _forward_cache(params: MlpParams, x: np.ndarray):
    if x.shape[1] != params.weights[0].shape[0]:
        raise DimensionError(
            f"input dim {x.shape[1]} does not match fan-in {params.weights[0].shape[0]}"
        )
    acts = [x]
    h = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = _relu(h @ w + b)
        acts.append(h)
    logits = h @ params.weights[-1] + params.biases[-1]
    if not np.all(np.isfinite(logits)):
        raise NumericalError("non-finite activations in forward pass")
    return acts, logits


def forward(params: MlpParams, batch) -> tuple[FeatureBatch, np.ndarray]:
    """Return last-hidden-layer features and logits.

    With a single layer there is no hidden layer and the inputs are returned
    as features.
    """
    rows = batch.rows if isinstance(batch, FeatureBatch) else np.asarray(batch, dtype=np.float64)
    labels = batch.labels if isinstance(batch, FeatureBatch) else None
    acts, logits = _forward_cache(params, rows)
    return FeatureBatch(acts[-1], labels), logits


def _backward(params: MlpParams, acts, d_logits, d_hidden):
    """Backprop through the MLP given gradients at the logits and at the last hidden layer."""
    n_layers = len(params.weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    gw[-1] = acts[-1].T @ d_logits
    gb[-1] = d_logits.sum(axis=0)
    delta = d_logits @ params.weights[-1].T + d_hidden
    for k in range(n_layers - 2, -1, -1):
        delta = delta * (acts[k + 1] > 0)
        gw[k] = acts[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k:
            delta = delta @ params.weights[k].T
    return gw, gb


def _cross_entropy(logits: np.ndarray, labels: np.ndarray):
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = logits.shape[0]
    loss = -float(logp[np.arange(n), labels].mean())
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def loss_and_grads(params: MlpParams, source: FeatureBatch, target: FeatureBatch, cfg: TrainConfig):
    """Total loss, its parameter gradients, and the step record fields.

    Returns ``(total, (grad_weights, grad_biases), parts)`` where ``parts``
    holds ``loss_class``, ``loss_log``, ``loss_coral`` and ``loss_align_weighted``.
    """
    if source.labels is None:
        raise ValidationError("source batch must be labeled")
    n_classes = params.weights[-1].shape[1]
    if source.labels.max() >= n_classes:
        raise ValidationError(f"label {source.labels.max()} out of range for {n_classes} classes")
    xs, xt = source.rows, target.rows
    ns = xs.shape[0]
    acts, logits = _forward_cache(params, np.vstack([xs, xt]))
    hidden = acts[-1]
    h_s, h_t = hidden[:ns], hidden[ns:]
    l_class, d_logits_s = _cross_entropy(logits[:ns], source.labels)

    c_s = batch_covariance(h_s, cfg.gamma)
    c_t = batch_covariance(h_t, cfg.gamma)
    l_log, g_log_s, g_log_t = loss_log_and_grads(c_s, c_t)
    l_coral, g_cor_s, g_cor_t = loss_coral_and_grads(c_s, c_t)

    if cfg.mode == "coral":
        recorded = cfg.lambda_ * l_coral.value
    else:
        recorded = cfg.alpha * l_log.value

    d_logits = np.zeros_like(logits)
    d_logits[:ns] = d_logits_s
    d_hidden = np.zeros_like(hidden)
    weight = cfg.align_weight
    total = l_class
    if weight != 0.0:
        g_s, g_t = (g_log_s, g_log_t) if cfg.mode == "log" else (g_cor_s, g_cor_t)
        d_hidden[:ns] = weight * grad_cov_wrt_features(h_s, g_s)
        d_hidden[ns:] = weight * grad_cov_wrt_features(h_t, g_t)
        total = l_class + recorded
    grads = _backward(params, acts, d_logits, d_hidden)
    parts = {
        "loss_class": l_class,
        "loss_align_weighted": recorded,
        "loss_log": l_log.value,
        "loss_coral": l_coral.value,
    }
    return total, grads, parts


class TrainingDivergedError(NumericalError):
    """Training produced a non-finite loss; ``record`` holds the offending step."""

    def __init__(self, message, record: StepRecord):
        super().__init__(message)
        self.record = record


def joint_step(
    params: MlpParams,
    source: FeatureBatch,
    target: FeatureBatch,
    cfg: TrainConfig,
    lr: float | None = None,
    step: int = 0,
    epoch: int = 0,
) -> tuple[MlpParams, StepRecord]:
    """One SGD update on ``L_class + weight * L_align``; returns new params and the record."""
    lr = cfg.base_lr if lr is None else lr
    _, (gw, gb), parts = loss_and_grads(params, source, target, cfg)
    rec = StepRecord(step, epoch, parts["loss_class"], parts["loss_align_weighted"], lr,
                     parts["loss_log"], parts["loss_coral"])
    if not all(math.isfinite(v) for v in parts.values()):
        raise TrainingDivergedError(f"non-finite loss at step {step}: {parts}", rec)
    new = MlpParams(
        [w - lr * g for w, g in zip(params.weights, gw)],
        [b - lr * g for b, g in zip(params.biases, gb)],
    )
    return new, rec


def _rngs(seed: int):
    init_seq, shuffle_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_seq), np.random.default_rng(shuffle_seq)


def init_params(cfg: TrainConfig, input_dim: int, n_classes: int) -> MlpParams:
    """Initial parameters for ``cfg``; the same ones :func:`train` starts from."""
    init_rng, _ = _rngs(cfg.seed)
    return MlpParams.init((input_dim, *cfg.hidden_dims, n_classes), init_rng)


def steps_per_epoch(cfg: TrainConfig, n_source: int, n_target: int) -> int:
    return min(n_source, n_target) // (cfg.batch_size // 2)


def train(
    cfg: TrainConfig,
    source_set: FeatureBatch,
    target_set: FeatureBatch,
    n_classes: int | None = None,
    params: MlpParams | None = None,
) -> tuple[MlpParams, LossTrace]:
    """Mini-batch SGD over ``cfg.epochs`` epochs with half-source, half-target batches.

    The learning rate in epoch ``e`` is ``base_lr * lr_decay**e``. Shuffling
    and initialization are seeded from ``cfg.seed`` so runs are reproducible.
    """
    if source_set.labels is None:
        raise ValidationError("source set must be labeled")
    if source_set.dim != target_set.dim:
        raise DimensionError(f"source dim {source_set.dim} != target dim {target_set.dim}")
    if n_classes is None:
        n_classes = int(source_set.labels.max()) + 1
    init_rng, shuffle_rng = _rngs(cfg.seed)
    if params is None:
        params = MlpParams.init((source_set.dim, *cfg.hidden_dims, n_classes), init_rng)
    half = cfg.batch_size // 2
    n_steps = steps_per_epoch(cfg, source_set.n_samples, target_set.n_samples)
    if cfg.epochs and n_steps == 0:
        raise ValidationError(
            f"batch_size {cfg.batch_size} too large for sets of size "
            f"{source_set.n_samples} and {target_set.n_samples}"
        )
    trace = LossTrace()
    step = 0
    for epoch in range(cfg.epochs):
        lr = cfg.base_lr * cfg.lr_decay**epoch
        perm_s = shuffle_rng.permutation(source_set.n_samples)
        perm_t = shuffle_rng.permutation(target_set.n_samples)
        for k in range(n_steps):
            src = source_set.take(perm_s[k * half:(k + 1) * half])
            tgt = target_set.take(perm_t[k * half:(k + 1) * half])
            params, rec = joint_step(params, src, tgt, cfg, lr, step, epoch)
            trace.append(rec)
            step += 1
    return params, trace


def predict(params: MlpParams, batch) -> np.ndarray:
    """Class predictions; ties go to the lowest class index."""
    _, logits = forward(params, batch)
    return np.argmax(logits, axis=1)


def evaluate(params: MlpParams, test: FeatureBatch) -> float:
    """Fraction of correctly classified rows."""
    if test.labels is None:
        raise ValidationError("evaluation needs a labeled set")
    if test.n_samples == 0:
        raise ValidationError("evaluation set is empty")
    return float(np.mean(predict(params, test) == test.labels))
