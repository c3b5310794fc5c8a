"""Sweep drivers behind the CLI subcommands.

Each driver builds a list of independent grid tasks, evaluates them through
a caller-supplied ``mapper`` (the builtin ``map`` or an executor's ``map``),
and returns rows as dicts in grid order. Tasks are module-level callables on
plain tuples so they pickle into worker processes.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.stats import spearmanr

from . import baselines, datasets, ib_analysis, nn_probe
from .baselines import EstimatorKind, Method
from .errors import LogDetError, ParameterError
from .estimator import DEFAULT_CONFIG, EstimatorConfig, mutual_information

log = logging.getLogger(__name__)

MI_SWEEP_CONFIG = EstimatorConfig(beta_override=1.0)
WEIGHT_GRID = tuple(2.0**k for k in range(8))
ALL_METHODS = tuple(Method)


def rho_grid(points=41, start=-1.0, stop=1.0):
    return np.linspace(start, stop, points)


def gaussian_mi_theory(d, rho):
    """``-(d/2) ln(1 - rho^2)`` for the paired construction; ``inf`` at ``|rho| = 1``."""
    if abs(rho) >= 1.0:
        return math.inf
    return -0.5 * d * math.log1p(-rho * rho)


def normalize_curve(values):
    """Min-max scale to ``[0, 1]``; ``None`` entries are kept; a flat curve maps to 0."""
    finite = [v for v in values if v is not None and math.isfinite(v)]
    if not finite:
        return [None] * len(values)
    lo, hi = min(finite), max(finite)
    span = hi - lo
    out = []
    for v in values:
        if v is None or not math.isfinite(v):
            out.append(None)
        elif span == 0.0:
            out.append(0.0)
        else:
            out.append((v - lo) / span)
    return out


def default_kinds(methods=ALL_METHODS, image_data=False, renyi_gamma=1.0):
    """Estimator kinds with their default parameters; BIN covers ``[0, 1]`` for images."""
    kinds = []
    for m in methods:
        m = Method(m)
        if m is Method.BIN:
            params = {"bins": 30, "lo": 0.0, "hi": 1.0} if image_data else {"bins": 30, "lo": -1.0, "hi": 1.0}
        elif m is Method.RENYI:
            params = {"alpha": 1.01, "gamma": renyi_gamma}
        else:
            params = {}
        kinds.append(EstimatorKind(m, params))
    return kinds


def _safe_estimate(kind, X, cfg):
    try:
        return baselines.estimate_entropy(kind, X, cfg if kind.tag is Method.LOGDET else None).value
    except (LogDetError, ValueError, ArithmeticError) as exc:
        log.warning("%s failed: %s", kind.tag.value, exc)
        return None


# mi-sweep

def _mi_sweep_task(task):
    d, n, rho, seed, cfg = task
    X, Y = datasets.sample_gaussian(datasets.GaussianSpec(d, n, "paired", rho, seed))
    return mutual_information(X, Y, cfg)


def mi_sweep(dims=(3, 100, 1000), samples=(128,), points=41, cfg=MI_SWEEP_CONFIG, seed=0, mapper=map):
    """Rows ``(d, n, rho, I_D, I_theory)`` over a symmetric correlation grid."""
    grid = rho_grid(points)
    tasks = [(d, n, float(r), seed, cfg) for d in dims for n in samples for r in grid]
    values = list(mapper(_mi_sweep_task, tasks))
    return [{"d": d, "n": n, "rho": r, "I_D": v, "I_theory": gaussian_mi_theory(d, r)}
            for (d, n, r, _, _), v in zip(tasks, values)]


# saturation and precision

def _gaussian_entropy_task(task):
    kind, spec, cfg = task
    return _safe_estimate(kind, datasets.sample_gaussian(spec), cfg)


def _comparison(gauss_kind, param_name, grid, dims, n, kinds, cfg, seed, mapper):
    tasks = [(k, datasets.GaussianSpec(d, n, gauss_kind, float(p), seed), cfg)
             for d in dims for k in kinds for p in grid]
    values = list(mapper(_gaussian_entropy_task, tasks))
    rows = []
    per_curve = len(grid)
    for start in range(0, len(tasks), per_curve):
        chunk = values[start:start + per_curve]
        norm = normalize_curve(chunk)
        for (kind, spec, _), raw, nv in zip(tasks[start:start + per_curve], chunk, norm):
            rows.append({"d": spec.d, "n": spec.n, "estimator": kind.tag.value, param_name: spec.param,
                         "raw": raw, "normalized": nv, "unit": kind.unit})
    return rows


def saturation_test(dims=(3, 15, 50, 200), n=1000, points=21, kinds=None, cfg=DEFAULT_CONFIG, seed=0, mapper=map):
    """Isotropic ``N(0, var I)`` with ``var`` from 0 to 1."""
    kinds = default_kinds() if kinds is None else kinds
    return _comparison("independent", "variance", np.linspace(0.0, 1.0, points), dims, n, kinds, cfg, seed, mapper)


def precision_test(dims=(3, 15, 50, 200), n=1000, points=21, kinds=None, cfg=DEFAULT_CONFIG, seed=0, mapper=map):
    """Unit-variance equicorrelated Gaussians with correlation from 1 to 0."""
    kinds = default_kinds() if kinds is None else kinds
    return _comparison("equicorrelated", "rho", np.linspace(1.0, 0.0, points), dims, n, kinds, cfg, seed, mapper)


def saturated_fraction(normalized, level=0.99):
    """Share of grid points whose normalized value is at or above ``level``."""
    vals = [v for v in normalized if v is not None]
    if not vals:
        return 0.0
    return sum(v >= level for v in vals) / len(vals)


def is_saturating(normalized, level=0.99):
    """A curve saturates when it sits at its ceiling over at least half its grid."""
    return saturated_fraction(normalized, level) >= 0.5


# activation test and its sample-limit variant

def _layer_mi_task(task):
    method, d, n, w, activation, seed, cfg, gamma = task
    X, T = nn_probe.scaled_single_layer(d, w, activation, n, seed)
    if method is Method.RENYI:
        return baselines.renyi_mutual_information(X, T, gamma=gamma)
    return mutual_information(X, T, cfg)


def activation_test(dims=(10, 100, 1000), n=3000, weights=WEIGHT_GRID, activations=("tanh", "relu"),
                    cfg=DEFAULT_CONFIG, seed=0, mapper=map):
    """Rows ``(d, activation, w, I_D)`` for a single random layer scaled by ``w``."""
    tasks = [(Method.LOGDET, d, n, float(w), a, seed, cfg, 1.0) for d in dims for a in activations for w in weights]
    values = list(mapper(_layer_mi_task, tasks))
    return [{"d": t[1], "n": t[2], "activation": t[4], "w": t[3], "I_D": v} for t, v in zip(tasks, values)]


def tanh_drop(curve):
    """Signed decrease from the smallest to the largest weight scale."""
    return curve[0] - curve[-1]


def curve_range(curve):
    return max(curve) - min(curve)


def sample_limit(dims=(10, 100, 500, 1000), fixed_n=500, fixed_d=1000, samples=(500, 1000, 2000),
                 weights=WEIGHT_GRID, methods=(Method.LOGDET, Method.RENYI), activation="tanh",
                 cfg=DEFAULT_CONFIG, seed=0, renyi_gamma=1.0, mapper=map):
    """Panel ``fixed_n``: fixed ``n`` over growing ``d``. Panel ``fixed_d``: fixed ``d`` over growing ``n``.

    RENYI values are in bits, LOGDET in nats.
    """
    grid = [("fixed_n", d, fixed_n) for d in dims] + [("fixed_d", fixed_d, n) for n in samples]
    tasks, labels = [], []
    for m in methods:
        m = Method(m)
        for panel, d, n in grid:
            for w in weights:
                tasks.append((m, d, n, float(w), activation, seed, cfg, renyi_gamma))
                labels.append(panel)
    values = list(mapper(_layer_mi_task, tasks))
    return [{"panel": p, "estimator": t[0].value, "d": t[1], "n": t[2], "activation": t[4], "w": t[3], "MI": v}
            for p, t, v in zip(labels, tasks, values)]


# image benchmark

_SHARED = {}


def share(images):
    """Make ``images`` visible to benchmark tasks; also used as a worker-pool initializer."""
    _SHARED["images"] = images


def _series_task(task):
    kinds, target, n_total, steps, noise, seed, noise_mode, cfg = task
    series = datasets.class_substitution_series(_SHARED["images"], target, n_total, steps, noise, seed, noise_mode)
    raw = [[_safe_estimate(k, S, cfg) for S in series.sets] for k in kinds]
    return raw, series.fractions, series.meta


def benchmark_entropy(images, dataset="mnist", kinds=None, noises=(0.0, 0.2, 0.6, 0.8, 1.0), classes=None,
                      n_total=1000, steps=11, noise_mode="std", cfg=DEFAULT_CONFIG, seed=0, mapper=map):
    """Entropy along class-substitution series, per class and averaged over classes.

    Averaged rows carry ``class="avg"``; their raw value is the mean over the
    classes that produced a value at that step. A parallel ``mapper`` must run
    :func:`share` with the same images in each worker.
    """
    kinds = default_kinds(image_data=True) if kinds is None else kinds
    classes = sorted(set(int(c) for c in np.unique(images.labels))) if classes is None else list(classes)
    share(images)
    tasks = [(kinds, c, n_total, steps, float(s), seed, noise_mode, cfg) for s in noises for c in classes]
    results = dict(zip([(t[4], t[1]) for t in tasks], mapper(_series_task, tasks)))
    fallback = sorted({c for (_, c), (_, _, meta) in results.items() if meta["with_replacement"]})
    if fallback:
        log.warning("classes %s had fewer than %d samples; drew them with replacement", fallback, n_total)
    rows = []
    for ki, kind in enumerate(kinds):
        for s in noises:
            per_class = []
            for c in classes:
                raw_all, fractions, _ = results[(float(s), c)]
                raw = raw_all[ki]
                per_class.append(raw)
                for f, r, nv in zip(fractions, raw, normalize_curve(raw)):
                    rows.append({"dataset": dataset, "estimator": kind.tag.value, "noise": float(s), "class": c,
                                 "step_fraction": f, "raw": r, "normalized": nv})
            avg = []
            for t in range(steps):
                vals = [r[t] for r in per_class if r[t] is not None]
                avg.append(float(np.mean(vals)) if vals else None)
            for f, r, nv in zip(fractions, avg, normalize_curve(avg)):
                rows.append({"dataset": dataset, "estimator": kind.tag.value, "noise": float(s), "class": "avg",
                             "step_fraction": f, "raw": r, "normalized": nv})
    return rows


def spearman(x, y):
    """Spearman rank correlation with average ranks for ties."""
    return float(spearmanr(x, y).statistic)


# information-plane training

DESK_ARCH = (64, 32, 20, 20, 10)


def ib_task_data(task="synthetic", dims=DESK_ARCH, train_samples=3000, probe_samples=3000, seed=0,
                 mnist_dir=None, cifar_dir=None):
    """``(train, probe)`` pairs of ``(X, labels)``; the probe set is held out."""
    if task == "synthetic":
        X, y = datasets.synthetic_task(train_samples + probe_samples, dims[0], dims[-1], seed)
        return (X[:train_samples], y[:train_samples]), (X[train_samples:], y[train_samples:])
    if task == "mnist":
        if mnist_dir is None:
            raise ParameterError("the mnist task needs --mnist-dir")
        train, probe = datasets.load_mnist(mnist_dir, "train"), datasets.load_mnist(mnist_dir, "test")
    elif task == "cifar10":
        if cifar_dir is None:
            raise ParameterError("the cifar10 task needs --cifar-dir")
        train, probe = datasets.load_cifar10(cifar_dir, "train"), datasets.load_cifar10(cifar_dir, "test")
    else:
        raise ParameterError(f"unknown task {task!r}")
    if train.images.shape[1] != dims[0]:
        raise ParameterError(f"architecture input width {dims[0]} does not match {task} ({train.images.shape[1]})")
    g = datasets.rng(seed)
    tr = g.permutation(len(train))[:train_samples]
    pr = g.permutation(len(probe))[:probe_samples]
    return (train.images[tr], train.labels[tr]), (probe.images[pr], probe.labels[pr])


def ib_train(dims=DESK_ARCH, task="synthetic", epochs=100, sample_epochs=100, freeze_prefix=0, lr=0.05,
             batch=64, activation="tanh", train_samples=3000, probe_samples=3000, cfg=DEFAULT_CONFIG, seed=0,
             mnist_dir=None, cifar_dir=None):
    """Train a probe network and return one row per (sampled epoch, layer)."""
    train, probe = ib_task_data(task, dims, train_samples, probe_samples, seed, mnist_dir, cifar_dir)
    records = ib_analysis.run_ib_experiment(list(dims), train, probe, epochs, sample_epochs, freeze_prefix, cfg,
                                            seed, activation, lr, batch)
    return [row for rec in records for row in rec.rows()]
