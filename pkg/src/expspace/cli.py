"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 data/model error.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .attribution import MethodConfig, METHODS, compute
from .data import SynthSpec, load_ucr_tsv, save_ucr_tsv, synth_dataset
from .errors import ExpSpaceError, InvalidParamsError
from .metrics import SparsityConfig, sparsity
from .net import TrainConfig, load_model, train, wrap
from .plots import emit_attribution_plot
from .runner import (
    ExperimentConfig,
    emit_report,
    render_report,
    report_from_csv,
    run_experiment,
)
from .spaces import make_space


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def parse_space_spec(spec: str, input_len: int):
    """'kind' or 'kind:key=value,key=value' -> Space."""
    kind, _, rest = spec.partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            key, _, value = item.partition("=")
            if not value:
                raise InvalidParamsError(f"bad space param {item!r}")
            params[key.strip()] = int(value)
    return make_space(kind.strip(), input_len, **params)


def _cmd_synth(args) -> int:
    spec = SynthSpec(
        kind=args.kind,
        n_samples=args.n_samples,
        length=args.length,
        noise_sigma=args.noise,
        seed=args.seed,
        params=json.loads(args.params) if args.params else {},
    )
    train_set, test_set = synth_dataset(spec)
    save_ucr_tsv(train_set, f"{args.out}_TRAIN.tsv")
    save_ucr_tsv(test_set, f"{args.out}_TEST.tsv")
    print(f"wrote {args.out}_TRAIN.tsv ({len(train_set)} samples) and "
          f"{args.out}_TEST.tsv ({len(test_set)} samples)")
    return 0


def _cmd_train(args) -> int:
    data = load_ucr_tsv(args.data)
    val = load_ucr_tsv(args.val) if args.val else None
    cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
        optimizer=args.optimizer,
    )
    result = train(data, args.arch, cfg, val=val)
    result.model.save(args.out)
    msg = f"train accuracy {result.train_accuracy:.3f}"
    if result.val_accuracy is not None:
        msg += f", val accuracy {result.val_accuracy:.3f}"
    print(f"saved {args.out}; {msg}")
    return 0


def _cmd_explain(args) -> int:
    model = load_model(args.model)
    data = load_ucr_tsv(args.data)
    if not 0 <= args.sample_index < len(data):
        raise ExpSpaceError(f"sample index {args.sample_index} out of range")
    sample = data[args.sample_index]
    space = parse_space_spec(args.space, model.input_len)
    wrapped = wrap(model, space)
    z = space.forward(sample.values)
    target = args.target_class
    if target is None:
        target = int(np.argmax(wrapped.predict(z)))
    att = compute(args.method, wrapped, z, target, MethodConfig(seed=args.seed))
    labels = space.bin_labels()
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("sample_id,space,method,coordinate,label,score\n")
        for j, score in enumerate(att.scores):
            fh.write(f"{args.sample_index},{space.kind},{args.method},"
                     f"{j},{labels[j]},{score!r}\n")
    print(f"wrote {args.out} (target class {target}, "
          f"sparsity {sparsity(att, SparsityConfig()):.3f})")
    if args.plot:
        emit_attribution_plot(sample, space, att, args.plot)
        print(f"wrote {args.plot}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    run_experiment(cfg, out_dir=args.out_dir)
    print(f"wrote {args.out_dir}/report.csv and {args.out_dir}/report.md")
    return 0


def _cmd_report(args) -> int:
    report = report_from_csv(args.infile)
    if args.out:
        emit_report(report, args.format, args.out)
        print(f"wrote {args.out}")
    else:
        print(render_report(report, args.format), end="")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="expspace",
                     description="explanation spaces for time-series classifiers")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--kind", required=True, choices=SynthSpec.VALID_KINDS)
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-samples", type=int, default=200)
    p.add_argument("--length", type=int, default=128)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--params", help="kind-specific params as JSON")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a classifier on the time domain")
    p.add_argument("--data", required=True)
    p.add_argument("--arch", default="cnn")
    p.add_argument("--out", required=True)
    p.add_argument("--val")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--optimizer", default="adam", choices=("adam", "sgd"))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("explain", help="attribute one sample in a space")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--space", default="time",
                   help="e.g. frequency or decomposition:window=16,components=3")
    p.add_argument("--method", required=True, choices=sorted(METHODS))
    p.add_argument("--out", required=True)
    p.add_argument("--sample-index", type=int, default=0)
    p.add_argument("--target-class", type=int)
    p.add_argument("--plot")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("evaluate", help="run a full experiment from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="re-render a report CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", default="markdown", choices=("csv", "markdown"))
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ExpSpaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
