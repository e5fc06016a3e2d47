"""SELD and teacher-student loss kernels with analytic gradients.

Every kernel returns ``(value, gradient)`` where the gradient is taken
with respect to the student/model output only; teacher outputs and
ground truth are constants. Means run over all K frames x N classes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS_P = 1e-7


@dataclass(frozen=True)
class SeldTargets:
    """activity: (K, N) in {0, 1}; doa: (K, N, 3) Cartesian."""

    activity: np.ndarray
    doa: np.ndarray


@dataclass(frozen=True)
class SeldPredictions:
    """activity: (K, N) probabilities; doa: (K, N, 3) Cartesian."""

    activity: np.ndarray
    doa: np.ndarray


@dataclass(frozen=True)
class LossWeights:
    beta1: float = 0.1
    beta2: float = 1.0
    gamma1: float = 1.0
    gamma2: float = 0.5

    def __post_init__(self):
        if min(self.beta1, self.beta2, self.gamma1, self.gamma2) < 0:
            raise ValueError("loss weights must be non-negative")


def _check(a, b, what):
    if np.shape(a) != np.shape(b):
        raise ValueError(f"{what} shapes differ: {np.shape(a)} vs {np.shape(b)}")


def clamp_prob(p):
    return np.clip(np.asarray(p, dtype=float), EPS_P, 1.0 - EPS_P)


def sed_bce(pred, target):
    y_hat = clamp_prob(pred.activity)
    y = np.asarray(target.activity, dtype=float)
    _check(y_hat, y, "activity")
    kn = y.size
    value = -np.sum(y * np.log(y_hat) + (1 - y) * np.log(1 - y_hat)) / kn
    grad = -(y / y_hat - (1 - y) / (1 - y_hat)) / kn
    return float(value), grad


def _masked_sq(diff, mask):
    """Sum over (k, n) of ||diff * mask||^2 and its gradient w.r.t. diff."""
    m2 = (np.asarray(mask, dtype=float) ** 2)[..., None]
    return np.sum(m2 * diff ** 2), 2.0 * m2 * diff


def doa_masked_mse(pred, target):
    o_hat, o = np.asarray(pred.doa, dtype=float), np.asarray(target.doa, dtype=float)
    _check(o_hat, o, "doa")
    _check(o_hat.shape[:-1], np.shape(target.activity), "doa/activity")
    kn = o.shape[0] * o.shape[1]
    total, grad = _masked_sq(o_hat - o, target.activity)
    return float(total / kn), grad / kn


def seld_loss(pred, target, w: LossWeights = LossWeights()) -> float:
    return w.beta1 * sed_bce(pred, target)[0] + w.beta2 * doa_masked_mse(pred, target)[0]


def tsl_sed_kl(teacher, student):
    """Bernoulli KL(teacher || student) per entry, averaged."""
    p_t, p_s = clamp_prob(teacher.activity), clamp_prob(student.activity)
    _check(p_t, p_s, "activity")
    kn = p_t.size
    value = np.sum(p_t * np.log(p_t / p_s) + (1 - p_t) * np.log((1 - p_t) / (1 - p_s))) / kn
    grad = (-(p_t / p_s) + (1 - p_t) / (1 - p_s)) / kn
    return float(value), grad


def tsl_doa(teacher, student):
    o_s, o_t = np.asarray(student.doa, dtype=float), np.asarray(teacher.doa, dtype=float)
    _check(o_s, o_t, "doa")
    kn = o_s.shape[0] * o_s.shape[1]
    total, grad = _masked_sq(o_s - o_t, teacher.activity)
    return float(total / kn), grad / kn


def total_tsl_loss(pred_s, target, pred_t, w: LossWeights = LossWeights()) -> float:
    student = seld_loss(pred_s, target, w)
    regularizer = w.beta1 * tsl_sed_kl(pred_t, pred_s)[0] + w.beta2 * tsl_doa(pred_t, pred_s)[0]
    return w.gamma1 * student + w.gamma2 * regularizer


def total_tsl_gradients(pred_s, target, pred_t, w: LossWeights = LossWeights()):
    """Gradients of :func:`total_tsl_loss` w.r.t. student activity and DOA."""
    g_act = w.gamma1 * w.beta1 * sed_bce(pred_s, target)[1] + w.gamma2 * w.beta1 * tsl_sed_kl(pred_t, pred_s)[1]
    g_doa = w.gamma1 * w.beta2 * doa_masked_mse(pred_s, target)[1] + w.gamma2 * w.beta2 * tsl_doa(pred_t, pred_s)[1]
    return g_act, g_doa


def finite_difference(fn, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``fn`` at every entry of ``x``."""
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = fn(x)
        flat[i] = orig - step
        lo = fn(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * step)
    return grad


def _random_instance(rng: np.random.Generator, k: int = 4, n: int = 3):
    def doa():
        v = rng.standard_normal((k, n, 3))
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    target = SeldTargets((rng.random((k, n)) < 0.5).astype(float), doa())
    student = SeldPredictions(rng.uniform(0.05, 0.95, (k, n)), doa())
    teacher = SeldPredictions(rng.uniform(0.05, 0.95, (k, n)), doa())
    return student, target, teacher


def _rel_err(a, b) -> float:
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12))


def gradient_check_suite(n_instances: int = 100, seed: int = 0, step: float = 1e-5,
                         tol: float = 1e-4) -> list[dict]:
    """Compare every analytic gradient with central differences on random instances."""
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {}

    def record(name, analytic, fn, x):
        err = _rel_err(analytic, finite_difference(fn, x, step))
        worst[name] = max(worst.get(name, 0.0), err)

    for _ in range(n_instances):
        s, y, t = _random_instance(rng)
        with_act = lambda a: SeldPredictions(a, s.doa)  # noqa: E731
        with_doa = lambda d: SeldPredictions(s.activity, d)  # noqa: E731
        record("sed_bce", sed_bce(s, y)[1], lambda a: sed_bce(with_act(a), y)[0], s.activity)
        record("doa_masked_mse", doa_masked_mse(s, y)[1], lambda d: doa_masked_mse(with_doa(d), y)[0], s.doa)
        record("tsl_sed_kl", tsl_sed_kl(t, s)[1], lambda a: tsl_sed_kl(t, with_act(a))[0], s.activity)
        record("tsl_doa", tsl_doa(t, s)[1], lambda d: tsl_doa(t, with_doa(d))[0], s.doa)
        g_act, g_doa = total_tsl_gradients(s, y, t)
        record("total_tsl.activity", g_act, lambda a: total_tsl_loss(with_act(a), y, t), s.activity)
        record("total_tsl.doa", g_doa, lambda d: total_tsl_loss(with_doa(d), y, t), s.doa)
    return [{"loss": name, "max_rel_err": err, "passed": err <= tol} for name, err in worst.items()]
