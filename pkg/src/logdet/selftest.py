"""Built-in invariant suite, run by ``logdet selftest`` or ``logdet --selftest``.

Each check is small and seeded, so the whole suite finishes in a few
seconds. A check returns ``(ok, detail)``; exceptions count as failures.
"""

from __future__ import annotations

import math
import os
import tempfile

import numpy as np

from . import baselines, datasets, ib_analysis, matkit, nn_probe
from .estimator import (
    EstimatorConfig,
    entropy,
    entropy_at_beta,
    exact_covariance_mutual_information,
    joint_entropy,
    mutual_information,
)

_CHECKS = []


def check(fn):
    _CHECKS.append(fn)
    return fn


def _rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


@check
def eigensolver_backends_agree():
    g = _rng(1)
    worst = 0.0
    for m in (1, 2, 5, 17, 40):
        B = g.standard_normal((m, m))
        A = B + B.T
        ref = np.linalg.eigvalsh(A)[::-1]
        for backend in ("native", "python"):
            if backend == "native" and matkit._kernels_native is None:
                continue
            w = matkit.eigenvalues_sym(A, psd_tol=0.0, backend=backend).eigenvalues
            worst = max(worst, float(np.max(np.abs(w - ref))) / max(1.0, float(np.max(np.abs(ref)))))
    return worst < 1e-12, f"max relative deviation {worst:.2e}"


@check
def eigenvectors_reconstruct():
    g = _rng(2)
    B = g.standard_normal((12, 12))
    A = B @ B.T
    w, V = matkit.eigh_sym(A)
    err = float(np.max(np.abs(V @ np.diag(w) @ V.T - A)))
    return err < 1e-10, f"reconstruction error {err:.2e}"


@check
def covariance_and_gram_routes_agree():
    g = _rng(3)
    worst = 0.0
    for n, d in ((6, 15), (25, 4), (10, 10)):
        X = g.standard_normal((n, d))
        a = entropy(X, route="covariance").value
        b = entropy(X, route="gram").value
        worst = max(worst, abs(a - b))
    return worst < 1e-8, f"max gap {worst:.2e}"


@check
def subadditivity_and_max_bound():
    g = _rng(4)
    for _ in range(50):
        n = int(g.integers(2, 30))
        X1 = g.standard_normal((n, int(g.integers(1, 6))))
        X2 = g.standard_normal((n, int(g.integers(1, 6))))
        beta = 100.0 * (X1.shape[1] + X2.shape[1])
        h1, h2 = entropy_at_beta(X1, beta), entropy_at_beta(X2, beta)
        h12 = entropy_at_beta([X1, X2], beta)
        if h12 > h1 + h2 + 1e-8 or h12 < max(h1, h2) - 1e-8:
            return False, f"violated at n={n}: H12={h12}, H1={h1}, H2={h2}"
    return True, ""


@check
def mutual_information_symmetric_nonnegative():
    g = _rng(5)
    X = g.standard_normal((40, 3))
    Y = X @ g.standard_normal((3, 2)) + 0.1 * g.standard_normal((40, 2))
    a, b = mutual_information(X, Y), mutual_information(Y, X)
    return abs(a - b) < 1e-9 and a > -1e-9, f"I(X;Y)={a}, I(Y;X)={b}"


@check
def duplicate_signal_increment():
    g = _rng(6)
    X = g.standard_normal((30, 4))
    cfg = EstimatorConfig(beta_override=1e8)
    inc = joint_entropy([X, X], cfg).value - entropy(X, cfg).value
    target = 0.5 * 4 * math.log(2.0)
    return abs(inc - target) <= 1e-3 * target, f"increment {inc}, expected {target}"


@check
def gaussian_mi_limit():
    rho = 0.6
    Sigma = np.array([[1.0, rho], [rho, 1.0]])
    est = exact_covariance_mutual_information(Sigma, 1, 1e6)
    true = -0.5 * math.log(1.0 - rho * rho)
    return abs(est - true) < 1e-3, f"{est} vs {true}"


@check
def baselines_permutation_invariant():
    g = _rng(7)
    X = g.uniform(-1, 1, (60, 3))
    P = X[g.permutation(60)]
    pairs = [
        (baselines.renyi_entropy(X), baselines.renyi_entropy(P)),
        (baselines.knn_entropy(X), baselines.knn_entropy(P)),
        (baselines.kde_entropy(X), baselines.kde_entropy(P)),
        (baselines.bin_entropy(X), baselines.bin_entropy(P)),
        (entropy(X).value, entropy(P).value),
    ]
    bad = [i for i, (a, b) in enumerate(pairs) if a != b]
    return not bad, f"unequal for estimators {bad}"


@check
def baseline_bounds():
    g = _rng(8)
    X = g.standard_normal((80, 4))
    h_bin = baselines.bin_entropy(X, bins=5)
    h_kde = baselines.kde_entropy(X, 0.7)
    floor = 0.5 * 4 * math.log(2 * math.pi * 0.7**2)
    ok = h_bin <= math.log(80) + 1e-12 and h_bin <= 4 * math.log(5) + 1e-12 and h_kde >= floor - 1e-12
    return ok, f"bin {h_bin}, kde {h_kde} (floor {floor})"


@check
def idx_and_cifar_round_trip():
    g = _rng(9)
    imgs = g.integers(0, 256, (7, 784), dtype=np.uint8)
    labels = g.integers(0, 10, 7, dtype=np.uint8)
    with tempfile.TemporaryDirectory() as tmp:
        ip, lp = os.path.join(tmp, "img"), os.path.join(tmp, "lab")
        datasets.write_idx_images(ip, imgs)
        datasets.write_idx_labels(lp, labels)
        ok = np.array_equal(datasets.read_idx_images(ip), imgs) and np.array_equal(datasets.read_idx_labels(lp), labels)
        cp = os.path.join(tmp, "batch.bin")
        pix = g.integers(0, 256, (3, 3072), dtype=np.uint8)
        datasets.write_cifar_batch(cp, pix, labels[:3])
        p2, l2 = datasets.read_cifar_batch(cp)
        ok = ok and np.array_equal(p2, pix) and np.array_equal(l2, labels[:3])
    return ok, "round trip changed the data"


@check
def network_gradients_match_finite_differences():
    g = _rng(10)
    net = nn_probe.init_network([3, 4, 3], "tanh", seed=3)
    X = g.standard_normal((5, 3))
    y = np.array([0, 1, 2, 1, 0])
    _, grads = nn_probe.loss_and_gradients(net, X, y)
    worst = 0.0
    h = 1e-4
    for li, (dW, db) in enumerate(grads):
        for P, G in ((net.weights[li], dW), (net.biases[li], db)):
            for idx in np.ndindex(P.shape):
                old = P[idx]
                P[idx] = old + h
                lp = nn_probe.cross_entropy(nn_probe.forward(net, X).output, y)
                P[idx] = old - h
                lm = nn_probe.cross_entropy(nn_probe.forward(net, X).output, y)
                P[idx] = old
                num = (lp - lm) / (2 * h)
                worst = max(worst, abs(num - G[idx]) / max(abs(num), abs(G[idx]), 1e-8))
    return worst < 1e-5, f"max relative error {worst:.2e}"


@check
def frozen_layer_and_snapshot():
    X, y = datasets.synthetic_task(120, 6, 3, seed=1)
    net = nn_probe.init_network([6, 5, 3], "tanh", seed=1)
    net.freeze(1)
    W0 = net.weights[0].copy()
    nn_probe.train_epoch(net, X, y, lr=0.1, batch=16, seed=1)
    ok = np.array_equal(W0, net.weights[0])
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "net.bin")
        nn_probe.save_network(net, path)
        back = nn_probe.load_network(path)
    ok = ok and all(np.array_equal(a, b) for a, b in zip(net.parameters(), back.parameters()))
    ok = ok and back.frozen == net.frozen
    return ok, "frozen weights moved or snapshot differs"


@check
def information_plane_trivial_cases():
    g = _rng(11)
    X = g.standard_normal((50, 4))
    trace = nn_probe.ActivationTrace(X, [np.ones((50, 3))], nn_probe.one_hot(np.zeros(50, dtype=int), 3))
    (ixt, ity), = ib_analysis.information_plane(trace)
    (ltc,) = ib_analysis.layer_transmission_capacity(trace)
    return max(abs(ixt), abs(ity), abs(ltc)) < 1e-9, f"{ixt}, {ity}, {ltc}"


def run_all():
    """Run every check; returns ``[(name, ok, detail), ...]``."""
    results = []
    for fn in _CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, reported with its cause
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((fn.__name__, bool(ok), detail))
    return results
