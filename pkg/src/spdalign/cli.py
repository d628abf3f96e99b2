"""Command-line front end: ``spd-align {dist,align,grad-check,train,bench}``.

Exit codes: 0 success, 1 validation error, 2 numerical error, 3 I/O error.
``SPD_ALIGN_THREADS`` caps BLAS threads (default 1, for bit-reproducibility).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import bench as _bench
from .coral import apply_alignment, coral_transform, verify_alignment
from .core import FeatureBatch, SYMMETRY_RTOL, batch_covariance, check_spd
from .errors import NumericalError, ValidationError
from .grad import GRAD_CHECK_THRESHOLDS, run_grad_check
from .io import parse_csv, read_feature_csv, write_feature_csv
from .metrics import METRICS
from .trainer import TrainConfig, init_params, train

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _fmt(v: float) -> str:
    return f"{v:.12f}"


def _read_text(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_spd_or_cov(path, gamma: float) -> np.ndarray:
    """Square symmetric unlabeled CSV is taken as a matrix, anything else as feature rows."""
    data, labels = parse_csv(_read_text(path))
    n, m = data.shape
    if labels is None and n == m:
        tol = SYMMETRY_RTOL * np.maximum(1.0, np.abs(data))
        if np.all(np.abs(data - data.T) <= tol):
            return check_spd(data, str(path))
    return batch_covariance(FeatureBatch(data, labels), gamma)


def cmd_dist(args) -> int:
    a = _load_spd_or_cov(args.a, args.gamma)
    b = _load_spd_or_cov(args.b, args.gamma)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    names = list(METRICS) if args.metric == "all" else [args.metric]
    for name in names:
        print(f"{name},{_fmt(METRICS[name](a, b))}")
    return EXIT_OK


def cmd_align(args) -> int:
    source = read_feature_csv(args.source)
    target = read_feature_csv(args.target)
    if source.dim != target.dim:
        raise ValidationError(f"feature dims differ: {source.dim} vs {target.dim}")
    c_s = batch_covariance(source, args.gamma)
    c_t = batch_covariance(target, args.gamma)
    t = coral_transform(c_s, c_t, args.gamma)
    report = verify_alignment(c_s, c_t, t)
    report["gamma"] = args.gamma
    write_feature_csv(apply_alignment(t, source), args.out)
    Path(args.report).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    for key in ("before", "after"):
        print(key + ": " + ", ".join(f"{k}={_fmt(v)}" for k, v in report[key].items()))
    return EXIT_OK


def cmd_grad_check(args) -> int:
    err = run_grad_check(args.loss, args.dim, args.trials, args.seed)
    print(f"max_rel_err={err:.6e}")
    if not err < GRAD_CHECK_THRESHOLDS[args.loss]:
        print(
            f"gradient check failed: {err:.3e} >= {GRAD_CHECK_THRESHOLDS[args.loss]:.0e}",
            file=sys.stderr,
        )
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = TrainConfig.from_json(_read_text(args.config))
    source = read_feature_csv(args.source)
    target = read_feature_csv(args.target)
    if source.labels is None:
        raise ValidationError("source CSV needs a 'label' column")
    target = FeatureBatch(target.rows)
    n_classes = int(source.labels.max()) + 1
    params0 = init_params(cfg, source.dim, n_classes)
    params, trace = train(cfg, source, target, n_classes=n_classes, params=params0)
    Path(args.trace).write_text(trace.to_csv(), encoding="utf-8")
    params.save(args.params_out)
    if len(trace):
        last = trace.records[-1]
        print(f"final loss_class={_fmt(last.loss_class)}")
        print(f"final loss_align_weighted={_fmt(last.loss_align_weighted)}")
    else:
        print("no training steps")
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        doc = json.loads(_read_text(args.spec))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed spec JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("spec JSON must be an object")
    train_kw = doc.pop("train", {})
    if not isinstance(train_kw, dict):
        raise ValidationError("'train' must be an object")
    spec = _bench.ShiftSpec.from_dict(doc)
    train_kw = dict(train_kw)
    if "lambda" in train_kw:
        train_kw["lambda_"] = train_kw.pop("lambda")
    train_kw.pop("mode", None)
    try:
        cfgs = _bench.default_configs(**train_kw)
    except TypeError as exc:
        raise ValidationError(str(exc)) from exc
    report = _bench.run_experiment(spec, cfgs)
    _bench.emit_report(report, args.out_dir)
    print(report.table())
    print(f"noise ratio (lambda*L_coral / alpha*L_log step std): {report.noise_ratio:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spd-align", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("dist", help="dissimilarities between two SPD matrices or datasets")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--metric", choices=[*METRICS, "all"], default="all")
    p.add_argument("--gamma", type=float, default=1e-5)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("align", help="closed-form CORAL alignment of a source CSV")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--gamma", type=float, default=1e-5)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("grad-check", help="finite-difference check of the loss gradients")
    p.add_argument("--loss", choices=["coral", "log"], default="log")
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("train", help="train the MLP with an alignment loss")
    p.add_argument("--config", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--params-out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="run the synthetic domain-shift benchmark")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_bench)
    return parser


def _thread_cap() -> int:
    raw = os.environ.get("SPD_ALIGN_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ValidationError(f"SPD_ALIGN_THREADS must be a positive integer, got {raw!r}")
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with threadpool_limits(limits=_thread_cap()):
            return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
