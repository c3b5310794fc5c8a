"""Command-line harness: one subcommand per experiment, CSV on output.

Exit codes: 0 success, 1 usage error, 2 data or file-format error,
3 numerical failure.

Settings resolve as command-line flags, then a ``--config`` file of
``key = value`` lines, then built-in defaults. The effective settings are
echoed as the first CSV line, ``# key=value ...``.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor

from . import __version__, datasets, experiments
from .baselines import Method
from .errors import FormatError, InvalidInputError, NumericalFailureError, ParameterError, PSDViolationError, TrainingError
from .estimator import EstimatorConfig

log = logging.getLogger("logdet")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

# excluded from the echoed header so output does not depend on where it goes or how many workers ran
_NOT_ECHOED = {"command", "out", "jobs", "config", "handler", "verbose"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# flag value types

def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return v


def _list_of(item):
    def parse(text):
        parts = [p for p in str(text).replace(" ", "").split(",") if p]
        if not parts:
            raise argparse.ArgumentTypeError("expected a comma-separated list")
        return [item(p) for p in parts]

    parse.__name__ = "list"
    return parse


def _estimators(text):
    tags = _list_of(str)(text.lower())
    bad = [t for t in tags if t not in {m.value for m in Method}]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown estimator(s) {', '.join(bad)}; choose from "
                                         f"{', '.join(m.value for m in Method)}")
    return tags


def _beta(text):
    if str(text).strip().lower() == "auto":
        return None
    return _positive_float(text)


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text}")


# parser

def _common(p):
    g = p.add_argument_group("common")
    g.add_argument("--seed", type=_nonneg_int, default=0)
    g.add_argument("--out", default="-", help="output CSV path, '-' for stdout")
    g.add_argument("--jobs", type=_positive_int, default=1, help="worker processes for grid points")
    g.add_argument("--epsilon", type=_positive_float, default=0.1, help="beta = d / epsilon^2")
    g.add_argument("--beta", type=_beta, default=None, help="fixed beta overriding --epsilon, or 'auto'")
    g.add_argument("--config", default=None, help="file of 'key = value' lines")
    g.add_argument("-v", "--verbose", action="store_true")


def _dataset_flags(p):
    p.add_argument("--mnist-dir", default=None, help="directory with the four MNIST IDX files")
    p.add_argument("--cifar-dir", default=None, help="CIFAR-10 binary batch file or directory")


def build_parser():
    parser = _Parser(prog="logdet", description="LogDet entropy experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--selftest", action="store_true", help="run the built-in invariant suite and exit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    parser.subcommands = sub.choices

    # beta defaults to 1 here; '--beta auto' restores the epsilon rule
    p = sub.add_parser("mi-sweep", help="LogDet MI of correlated Gaussian pairs over rho in [-1, 1]")
    _common(p)
    p.add_argument("--dims", type=_list_of(_positive_int), default=[3, 100, 1000])
    p.add_argument("--samples", type=_list_of(_positive_int), default=[128])
    p.add_argument("--points", type=_positive_int, default=41)
    p.set_defaults(handler=cmd_mi_sweep, beta=1.0)

    for name, helptext, handler in (
        ("saturation-test", "entropy of N(0, var I) as var grows from 0 to 1", cmd_saturation_test),
        ("precision-test", "entropy of equicorrelated Gaussians as correlation falls from 1 to 0",
         cmd_precision_test),
    ):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--dims", type=_list_of(_positive_int), default=[3, 15, 50, 200])
        p.add_argument("--samples", type=_positive_int, default=1000)
        p.add_argument("--points", type=_positive_int, default=21)
        p.add_argument("--estimators", type=_estimators, default=[m.value for m in Method])
        p.set_defaults(handler=handler)

    p = sub.add_parser("activation-test", help="MI between input and a weight-scaled random layer")
    _common(p)
    p.add_argument("--dims", type=_list_of(_positive_int), default=[10, 100, 1000])
    p.add_argument("--samples", type=_positive_int, default=3000)
    p.add_argument("--weights", type=_list_of(_nonneg_float), default=list(experiments.WEIGHT_GRID))
    p.add_argument("--activations", type=_list_of(str), default=["tanh", "relu"])
    p.set_defaults(handler=cmd_activation_test)

    p = sub.add_parser("benchmark-entropy", help="entropy along class-substitution series of images")
    _common(p)
    _dataset_flags(p)
    p.add_argument("--dataset", choices=["mnist", "cifar10"], default="mnist")
    p.add_argument("--split", choices=["train", "test"], default="train")
    p.add_argument("--estimators", type=_estimators, default=[m.value for m in Method])
    p.add_argument("--samples", type=_positive_int, default=1000)
    p.add_argument("--steps", type=_positive_int, default=11)
    p.add_argument("--noise", type=_list_of(_nonneg_float), default=[0.0, 0.2, 0.6, 0.8, 1.0])
    p.add_argument("--noise-mode", choices=["std", "variance"], default="std")
    p.add_argument("--classes", type=_list_of(_nonneg_int), default=None)
    p.set_defaults(handler=cmd_benchmark_entropy)

    p = sub.add_parser("ib-train", help="train a probe network and track I(X;T), I(T;Y) and LTC")
    _common(p)
    _dataset_flags(p)
    p.add_argument("--task", choices=["synthetic", "mnist", "cifar10"], default="synthetic")
    p.add_argument("--arch", type=_list_of(_positive_int), default=None,
                   help="layer widths including input and output (default 64,32,20,20,10)")
    p.add_argument("--activation", choices=["tanh", "relu", "linear"], default="tanh")
    p.add_argument("--epochs", type=_nonneg_int, default=100)
    p.add_argument("--sample-epochs", type=_positive_int, default=100, help="number of epochs to record")
    p.add_argument("--freeze-prefix", type=_nonneg_int, default=0)
    p.add_argument("--lr", type=_nonneg_float, default=0.05)
    p.add_argument("--batch", type=_positive_int, default=64)
    p.add_argument("--samples", type=_positive_int, default=3000, help="training samples")
    p.add_argument("--probe-samples", type=_positive_int, default=3000)
    p.set_defaults(handler=cmd_ib_train)

    p = sub.add_parser("sample-limit", help="activation test at fixed n over d and at fixed d over n")
    _common(p)
    p.add_argument("--dims", type=_list_of(_positive_int), default=[10, 100, 500, 1000])
    p.add_argument("--samples", type=_list_of(_positive_int), default=[500, 1000, 2000])
    p.add_argument("--fixed-n", type=_positive_int, default=500)
    p.add_argument("--fixed-d", type=_positive_int, default=1000)
    p.add_argument("--weights", type=_list_of(_nonneg_float), default=list(experiments.WEIGHT_GRID))
    p.add_argument("--estimators", type=_estimators, default=["logdet", "renyi"])
    p.add_argument("--renyi-gamma", type=_positive_float, default=1.0,
                   help="Renyi kernel width as a multiple of the median pairwise distance")
    p.set_defaults(handler=cmd_sample_limit)

    p = sub.add_parser("selftest", help="run the built-in invariant suite")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(handler=None)
    return parser


# config file

def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment. Keys may use ``-`` or ``_``."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from exc
    values = {}
    for no, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{no}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _apply_config(subparser, values, path):
    actions = {a.dest: a for a in subparser._actions if a.dest not in ("help", "config")}
    converted = {}
    for key, text in values.items():
        action = actions.get(key)
        if action is None:
            raise UsageError(f"{path}: unknown setting {key!r} for {subparser.prog}")
        try:
            if isinstance(action, argparse._StoreTrueAction):
                converted[key] = _bool(text)
            elif action.type is not None:
                converted[key] = action.type(text)
            else:
                converted[key] = text
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"{path}: bad value for {key}: {exc}") from exc
        if action.choices is not None and converted[key] not in action.choices:
            raise UsageError(f"{path}: {key} must be one of {', '.join(map(str, action.choices))}")
    subparser.set_defaults(**converted)


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command and getattr(args, "config", None):
        subparser = parser.subcommands[args.command]
        _apply_config(subparser, read_config(args.config), args.config)
        args = parser.parse_args(argv)
    return args


# output

def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "item"):
        return _cell(v.item())
    return str(v)


def _echo_value(v):
    if isinstance(v, (list, tuple)):
        return ",".join(_cell(x) for x in v)
    return _cell(v)


def effective_config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED and k != "selftest"}


def write_csv(rows, args, stream):
    settings = effective_config(args)
    stream.write("# " + " ".join(f"{k}={_echo_value(v)}" for k, v in {"command": args.command, **settings}.items())
                 + "\n")
    if not rows:
        return
    writer = csv.DictWriter(stream, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(v) for k, v in row.items()})


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
        return
    buf = io.StringIO()
    yield buf
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise FormatError(f"cannot write output: {exc.strerror}", path) from exc


@contextlib.contextmanager
def _mapper(jobs, initializer=None, initargs=()):
    """Builtin ``map`` for one job, else an order-preserving process pool map."""
    if jobs <= 1:
        if initializer is not None:
            initializer(*initargs)
        yield map
        return
    with ProcessPoolExecutor(max_workers=jobs, initializer=initializer, initargs=initargs) as pool:
        yield pool.map


def _estimator_config(args):
    return EstimatorConfig(epsilon=args.epsilon, beta_override=args.beta)


# subcommands

def cmd_mi_sweep(args):
    with _mapper(args.jobs) as mapper:
        return experiments.mi_sweep(args.dims, args.samples, args.points, _estimator_config(args), args.seed, mapper)


def cmd_saturation_test(args):
    kinds = experiments.default_kinds(args.estimators)
    with _mapper(args.jobs) as mapper:
        return experiments.saturation_test(args.dims, args.samples, args.points, kinds, _estimator_config(args),
                                           args.seed, mapper)


def cmd_precision_test(args):
    kinds = experiments.default_kinds(args.estimators)
    with _mapper(args.jobs) as mapper:
        return experiments.precision_test(args.dims, args.samples, args.points, kinds, _estimator_config(args),
                                          args.seed, mapper)


def cmd_activation_test(args):
    with _mapper(args.jobs) as mapper:
        return experiments.activation_test(args.dims, args.samples, args.weights, args.activations,
                                           _estimator_config(args), args.seed, mapper)


def _load_images(args):
    if args.dataset == "mnist":
        if not args.mnist_dir:
            raise UsageError("benchmark-entropy --dataset mnist needs --mnist-dir (directory with the IDX files "
                             f"{', '.join(datasets.MNIST_FILES[args.split])})")
        return datasets.load_mnist(args.mnist_dir, args.split)
    if not args.cifar_dir:
        raise UsageError("benchmark-entropy --dataset cifar10 needs --cifar-dir (CIFAR-10 binary batches, "
                         "3073-byte records)")
    return datasets.load_cifar10(args.cifar_dir, args.split)


def cmd_benchmark_entropy(args):
    if args.steps < 2:
        raise UsageError("--steps must be at least 2")
    images = _load_images(args)
    kinds = experiments.default_kinds(args.estimators, image_data=True)
    with _mapper(args.jobs, experiments.share, (images,)) as mapper:
        return experiments.benchmark_entropy(images, args.dataset, kinds, args.noise, args.classes, args.samples,
                                             args.steps, args.noise_mode, _estimator_config(args), args.seed,
                                             mapper)


def cmd_ib_train(args):
    arch = args.arch
    if arch is None:
        arch = {"synthetic": list(experiments.DESK_ARCH), "mnist": [784, 1024, 20, 20, 10],
                "cifar10": [3072, 1024, 20, 20, 10]}[args.task]
    if len(arch) < 2:
        raise UsageError("--arch needs at least input and output widths")
    return experiments.ib_train(arch, args.task, args.epochs, args.sample_epochs, args.freeze_prefix, args.lr,
                                args.batch, args.activation, args.samples, args.probe_samples,
                                _estimator_config(args), args.seed, args.mnist_dir, args.cifar_dir)


def cmd_sample_limit(args):
    with _mapper(args.jobs) as mapper:
        return experiments.sample_limit(args.dims, args.fixed_n, args.fixed_d, args.samples, args.weights,
                                        args.estimators, "tanh", _estimator_config(args), args.seed,
                                        args.renyi_gamma, mapper)


def run_selftest(stream=None):
    from .selftest import run_all

    stream = sys.stdout if stream is None else stream
    results = run_all()
    for name, ok, detail in results:
        stream.write(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail and not ok else "") + "\n")
    failed = sum(not ok for _, ok, _ in results)
    stream.write(f"{len(results) - failed}/{len(results)} checks passed\n")
    return EXIT_OK if failed == 0 else EXIT_NUMERIC


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.selftest or args.command == "selftest":
            return run_selftest()
        if args.command is None:
            raise UsageError("logdet: a subcommand is required (see --help)")
        rows = args.handler(args)
        with _output(args.out) as stream:
            write_csv(rows, args, stream)
        return EXIT_OK
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ParameterError, InvalidInputError) as exc:
        print(f"logdet: invalid parameter: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, FileNotFoundError) as exc:
        print(f"logdet: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"logdet: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalFailureError, PSDViolationError, TrainingError, ArithmeticError) as exc:
        print(f"logdet: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
