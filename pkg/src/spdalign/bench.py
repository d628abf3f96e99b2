"""Synthetic domain-shift benchmark and the baseline / coral / log experiment runner."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.linalg

from .coral import REPORT_METRICS
from .core import FeatureBatch, batch_covariance
from .errors import SpdAlignError, ValidationError
from .trainer import MODES, LossTrace, TrainConfig, evaluate, train


def rotation_scale_transform(
    dim: int, max_scale: float, seed: int, angle: float = 0.6
) -> np.ndarray:
    """Anisotropic scaling in ``[1/max_scale, max_scale]`` followed by a rotation.

    The rotation is ``expm(S)`` for a random skew-symmetric ``S`` whose
    largest rotation angle is ``angle`` radians.
    """
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim))
    skew = g - g.T
    skew *= angle / np.abs(np.linalg.eigvals(skew)).max()
    rot = np.real(scipy.linalg.expm(skew))
    scales = np.exp(rng.uniform(-np.log(max_scale), np.log(max_scale), size=dim))
    return rot * scales


@dataclass
class ShiftSpec:
    """Gaussian class clusters; the target domain is pushed through ``x -> M x + t``."""

    num_classes: int = 5
    samples_per_class: int = 200
    input_dim: int = 16
    mean_spread: float = 1.5
    transform: np.ndarray | None = None
    translation: np.ndarray | None = None
    noise_source: float = 1.0
    noise_target: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValidationError("num_classes must be at least 2")
        if self.input_dim < 2:
            raise ValidationError("input_dim must be at least 2")
        if self.samples_per_class < 4:
            raise ValidationError("samples_per_class must be at least 4")
        if self.noise_source < 0 or self.noise_target < 0 or self.mean_spread < 0:
            raise ValidationError("noise scales and mean spread must be nonnegative")
        d = self.input_dim
        m = np.eye(d) if self.transform is None else np.asarray(self.transform, dtype=np.float64)
        if m.shape != (d, d):
            raise ValidationError(f"transform must be {d}x{d}, got {m.shape}")
        if abs(np.linalg.det(m)) <= 1e-6:
            raise ValidationError("transform is not invertible")
        t = np.zeros(d) if self.translation is None else np.asarray(self.translation, dtype=np.float64)
        if t.shape != (d,):
            raise ValidationError(f"translation must have length {d}, got {t.shape}")
        self.transform, self.translation = m, t

    @classmethod
    def strong_shift(
        cls, seed: int = 0, max_scale: float = 3.0, angle: float = 0.6, **kw
    ) -> ShiftSpec:
        """Default benchmark: anisotropic scale plus rotation, no translation."""
        d = kw.get("input_dim", 16)
        m = rotation_scale_transform(d, max_scale, seed + 1, angle)
        return cls(transform=m, seed=seed, **kw)

    @classmethod
    def no_shift(cls, seed: int = 0, **kw) -> ShiftSpec:
        """Target drawn from the source distribution."""
        kw.setdefault("noise_target", 0.0)
        return cls(transform=None, translation=None, seed=seed, **kw)

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "samples_per_class": self.samples_per_class,
            "input_dim": self.input_dim,
            "mean_spread": self.mean_spread,
            "transform": self.transform.tolist(),
            "translation": self.translation.tolist(),
            "noise_source": self.noise_source,
            "noise_target": self.noise_target,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ShiftSpec:
        """Build from a JSON-style dict.

        ``transform`` may be a nested list, ``"identity"``, or
        ``{"rotation_scale": max_scale, "angle": radians}``; when absent the strong-shift
        default is used.
        """
        d = dict(d)
        dim = int(d.get("input_dim", 16))
        seed = int(d.get("seed", 0))
        tr = d.pop("transform", {"rotation_scale": 3.0})
        if tr == "identity":
            tr = None
        elif isinstance(tr, dict):
            if not set(tr) <= {"rotation_scale", "angle"} or "rotation_scale" not in tr:
                raise ValidationError(f"unknown transform spec {tr}")
            tr = rotation_scale_transform(
                dim, float(tr["rotation_scale"]), seed + 1, float(tr.get("angle", 0.6))
            )
        try:
            return cls(transform=tr, **d)
        except TypeError as exc:
            raise ValidationError(str(exc)) from exc


def gen_synthetic_shift(spec: ShiftSpec) -> tuple[FeatureBatch, FeatureBatch, FeatureBatch]:
    """Draw ``(source, target_train, target_test)``.

    The target set is shuffled and split in half: the first half is returned
    without labels for training, the second half keeps its labels for testing.
    """
    rng = np.random.default_rng(spec.seed)
    k, n, d = spec.num_classes, spec.samples_per_class, spec.input_dim
    means = spec.mean_spread * rng.standard_normal((k, d))
    labels = np.repeat(np.arange(k), n)

    source = means[labels] + spec.noise_source * rng.standard_normal((k * n, d))
    clean = means[labels] + spec.noise_source * rng.standard_normal((k * n, d))
    target = clean @ spec.transform.T + spec.translation
    target = target + spec.noise_target * rng.standard_normal((k * n, d))

    perm = rng.permutation(k * n)
    half = (k * n) // 2
    train_idx, test_idx = perm[:half], perm[half:]
    return (
        FeatureBatch(source, labels),
        FeatureBatch(target[train_idx]),
        FeatureBatch(target[test_idx], labels[test_idx]),
    )


def default_configs(alpha: float = 1.0, lambda_: float = 0.1, **kw) -> dict[str, TrainConfig]:
    """One config per mode, sharing everything but the mode."""
    base = dict(
        alpha=alpha, lambda_=lambda_, base_lr=0.05, lr_decay=0.97,
        batch_size=128, epochs=60, seed=0,
    )
    base.update(kw)
    return {mode: TrainConfig(mode=mode, **base) for mode in MODES}


@dataclass
class ModeResult:
    target_accuracy: float
    source_accuracy: float
    final_align_weighted: float
    final_loss_class: float
    trace: LossTrace = field(default_factory=LossTrace, compare=False)


@dataclass
class ExperimentReport:
    results: dict[str, ModeResult]
    before: dict[str, float]
    noise_ratio: float

    def gains(self) -> dict[str, float]:
        base = self.results["baseline"].target_accuracy
        return {m: r.target_accuracy - base for m, r in self.results.items()}

    def to_dict(self) -> dict:
        return {
            "modes": {
                m: {
                    "target_accuracy": r.target_accuracy,
                    "source_accuracy": r.source_accuracy,
                    "final_align_weighted": r.final_align_weighted,
                    "final_loss_class": r.final_loss_class,
                    "trace_file": f"trace_{m}.csv",
                    "trace_length": len(r.trace),
                }
                for m, r in self.results.items()
            },
            "before": dict(self.before),
            "noise_ratio_coral_over_log": self.noise_ratio,
        }

    @classmethod
    def from_dict(cls, d: dict, traces: dict[str, LossTrace] | None = None) -> ExperimentReport:
        traces = traces or {}
        results = {
            m: ModeResult(
                v["target_accuracy"], v["source_accuracy"],
                v["final_align_weighted"], v["final_loss_class"],
                traces.get(m, LossTrace()),
            )
            for m, v in d["modes"].items()
        }
        return cls(results, dict(d["before"]), d["noise_ratio_coral_over_log"])

    def table(self) -> str:
        """Plain-text accuracy table with gains over the baseline, in percent."""
        lines = [f"{'method':<10}{'target acc':>12}{'gain':>10}"]
        gains = self.gains()
        for m, r in self.results.items():
            lines.append(f"{m:<10}{100 * r.target_accuracy:>12.2f}{100 * gains[m]:>+10.2f}")
        return "\n".join(lines)


def _step_noise(x: np.ndarray) -> float:
    return float(np.std(np.diff(x))) if x.size > 2 else float("nan")


def _final_epoch_mean(trace: LossTrace, name: str) -> float:
    if not len(trace):
        return float("nan")
    return trace.epoch_mean(name, trace.records[-1].epoch)


def run_experiment(spec: ShiftSpec, cfgs: dict[str, TrainConfig] | None = None) -> ExperimentReport:
    """Train every mode on the same data and evaluate on the labeled target half."""
    cfgs = default_configs() if cfgs is None else cfgs
    missing = set(MODES) - set(cfgs)
    if missing:
        raise ValidationError(f"missing configs for modes {sorted(missing)}")
    source, target_train, target_test = gen_synthetic_shift(spec)
    gamma = cfgs["baseline"].gamma
    c_s = batch_covariance(source, gamma)
    c_t = batch_covariance(target_train, gamma)
    before = {name: fn(c_s, c_t) for name, fn in REPORT_METRICS.items()}

    results = {}
    for mode in MODES:
        cfg = cfgs[mode]
        if cfg.mode != mode:
            cfg = replace(cfg, mode=mode)
        params, trace = train(cfg, source, target_train, n_classes=spec.num_classes)
        results[mode] = ModeResult(
            target_accuracy=evaluate(params, target_test),
            source_accuracy=evaluate(params, source),
            final_align_weighted=_final_epoch_mean(trace, "loss_align_weighted"),
            final_loss_class=_final_epoch_mean(trace, "loss_class"),
            trace=trace,
        )
    base_trace = results["baseline"].trace
    base_cfg = cfgs["baseline"]
    noise_coral = _step_noise(base_cfg.lambda_ * base_trace.column("loss_coral"))
    noise_log = _step_noise(base_cfg.alpha * base_trace.column("loss_log"))
    ratio = noise_coral / noise_log if noise_log > 0 else float("nan")
    return ExperimentReport(results, before, ratio)


def emit_report(report: ExperimentReport, path) -> list[Path]:
    """Write ``report.json`` and one ``trace_<mode>.csv`` per mode into ``path``."""
    out = Path(path)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        target = out / "report.json"
        target.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
        written.append(target)
        for mode, r in report.results.items():
            target = out / f"trace_{mode}.csv"
            target.write_text(r.trace.to_csv(), encoding="utf-8")
            written.append(target)
    except OSError as exc:
        raise ReportIOError(f"cannot write report to {out}: {exc}") from exc
    return written


def load_report(path) -> ExperimentReport:
    """Read back a report directory written by :func:`emit_report`."""
    out = Path(path)
    d = json.loads((out / "report.json").read_text(encoding="utf-8"))
    traces = {
        m: LossTrace.from_csv((out / v["trace_file"]).read_text(encoding="utf-8"))
        for m, v in d["modes"].items()
    }
    return ExperimentReport.from_dict(d, traces)


class ReportIOError(SpdAlignError, OSError):
    """Failure writing benchmark outputs."""
