"""Unlearning methods: two perfect, four published approximations, the
retrain control, and a differentially-private inference wrapper.

Determinism contract (mirrors the methods' published behavior): knn-delete,
linreg-downdate, amnesiac, ssd, and newton-removal are pure functions of
their inputs; bad-teacher, retrain, and dp-oracle consume a random stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datasets import Dataset, retain_ids as compute_retain_ids
from .errors import (
    BudgetExhausted,
    EmptyForget,
    NotConvexScheme,
    NotParametric,
    TranscriptMismatch,
    UnknownId,
)
from .numerics import RngStream, sherman_morrison_downdate, softmax, solve_spd
from .schemes import (
    SCHEME_KNN,
    SCHEME_LINREG,
    SCHEME_LOGREG,
    SCHEME_MLP,
    Architecture,
    CostMeter,
    KnnStore,
    ModelState,
    SchemeConfig,
    TrainingTranscript,
    _backward,
    _forward,
    _per_example_sq_grads,
    infer,
    infer_batch,
    init,
    learn,
    logits_batch,
    param_count,
)

KNN_DELETE = "knn-delete"
LINREG_DOWNDATE = "linreg-downdate"
AMNESIAC = "amnesiac"
BAD_TEACHER = "bad-teacher"
SSD = "ssd"
NEWTON_REMOVAL = "newton-removal"
RETRAIN = "retrain"
DP_ORACLE = "dp-oracle"

RANDOMIZED_METHODS = frozenset({BAD_TEACHER, RETRAIN, DP_ORACLE})

# Logits are clamped to this range before the DP Laplace noise; the range
# width is the per-query sensitivity.
DP_LOGIT_CLAMP = 10.0

BAD_TEACHER_RETAIN_SAMPLE = 256


@dataclass(frozen=True)
class UnlearnerConfig:
    method: str = AMNESIAC
    ssd_alpha: float = 100.0        # selection weighting
    ssd_lambda: float = 1.0         # dampening constant
    bad_teacher_steps: int = 30
    bad_teacher_lr: float = 0.05
    newton_ridge: float = 0.5
    dp_epsilon: float = 1.0
    dp_delta: float = 1e-9

    @property
    def randomized(self) -> bool:
        return self.method in RANDOMIZED_METHODS


def _parametric_classifier(state: ModelState):
    if state.scheme_id not in (SCHEME_LOGREG, SCHEME_MLP):
        raise NotParametric(f"scheme {state.scheme_id!r} has no flat classifier parameters")


def unlearn_knn_delete(state: ModelState, forget_ids: np.ndarray) -> ModelState:
    """Drop the forgotten rows from the instance store."""
    if state.scheme_id != SCHEME_KNN:
        raise NotParametric("knn-delete needs an instance store")
    store = state.store
    forget_ids = np.asarray(forget_ids, dtype=np.int64)
    missing = np.setdiff1d(forget_ids, store.ids)
    if len(missing):
        raise UnknownId(f"ids not in store: {missing[:5].tolist()}")
    keep = ~np.isin(store.ids, forget_ids)
    return ModelState(SCHEME_KNN, state.arch, store=KnnStore(
        features=store.features[keep].copy(),
        labels=store.labels[keep].copy(),
        ids=store.ids[keep].copy()), k=state.k)


def unlearn_linreg_downdate(state: ModelState, data: Dataset,
                            forget_ids: np.ndarray) -> ModelState:
    """Exact removal of regression rows via sequential rank-one downdates
    of the cached Gram inverse, O(n^2) per forgotten row."""
    if state.scheme_id != SCHEME_LINREG or state.gram_inv is None:
        raise NotParametric("linreg-downdate needs a Gram-inverse cache")
    forget_ids = np.asarray(forget_ids, dtype=np.int64)
    if len(forget_ids) == 0:
        return ModelState(SCHEME_LINREG, state.arch, params=state.params,
                          gram_inv=state.gram_inv, xty=state.xty)
    rows = data.rows_for(forget_ids)
    gram_inv = state.gram_inv
    xty = state.xty.copy()
    for r in rows:
        x_r = data.features[r]
        gram_inv = sherman_morrison_downdate(gram_inv, x_r)
        xty -= data.labels[r] * x_r
    coef = gram_inv @ xty
    return ModelState(SCHEME_LINREG, state.arch, params=coef,
                      gram_inv=gram_inv, xty=xty)


def unlearn_amnesiac(state: ModelState, transcript: TrainingTranscript,
                     forget_ids: np.ndarray) -> ModelState:
    """Undo every batch update whose batch touched the forget set.

    Implemented by replaying the unaffected updates from the recorded
    initial parameters, which keeps the two boundary cases exact: an
    untouched transcript reproduces the model bit for bit, and forgetting
    everything returns the initial parameters bit for bit.
    """
    _parametric_classifier(state)
    if not np.array_equal(transcript.replay(), state.params):
        raise TranscriptMismatch("transcript does not replay to the model parameters")
    forget_ids = np.asarray(forget_ids, dtype=np.int64)
    params = transcript.initial_params.copy()
    replayed = 0
    for ids, delta in zip(transcript.batch_ids, transcript.deltas):
        if not np.isin(ids, forget_ids, assume_unique=True).any():
            params = params + delta
            replayed += 1
    out = ModelState(state.scheme_id, state.arch, params=params)
    return out


def unlearn_ssd(state: ModelState, data, forget_ids: np.ndarray,
                alpha: float, lambda_d: float) -> ModelState:
    """Selective synaptic dampening via the diagonal empirical Fisher.

    Parameters whose forget-set Fisher exceeds alpha times the full-data
    Fisher are scaled by min(lambda_d * F_full / F_forget, 1).
    """
    _parametric_classifier(state)
    if alpha <= 0 or lambda_d <= 0:
        raise ValueError("ssd alpha and lambda must be positive")
    forget_ids = np.asarray(forget_ids, dtype=np.int64)
    if len(forget_ids) == 0:
        return ModelState(state.scheme_id, state.arch, params=state.params.copy())
    if data.size == 0:
        raise EmptyForget("no data to estimate the Fisher information from")
    f_full = _diag_fisher(state, data.features, data.labels)
    forget = data.base.view(forget_ids) if hasattr(data, "base") else data.view(forget_ids)
    f_forget = _diag_fisher(state, forget.features, forget.labels)
    selected = f_forget > alpha * f_full
    params = state.params.copy()
    if selected.any():
        factor = np.minimum(lambda_d * f_full[selected] / f_forget[selected], 1.0)
        params[selected] *= factor
    return ModelState(state.scheme_id, state.arch, params=params)


def _diag_fisher(state: ModelState, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    probs = softmax(logits_batch(state, x))
    dlogits = probs - np.eye(state.arch.num_classes)[y]
    sq = _per_example_sq_grads(state.arch, state.params, x, dlogits)
    return sq / len(x)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - np.max(z, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def unlearn_bad_teacher(state: ModelState, data, forget_ids: np.ndarray,
                        retain_pool: np.ndarray, cfg: UnlearnerConfig,
                        scheme_cfg: SchemeConfig, rng: RngStream) -> ModelState:
    """Teach the model to mimic a freshly initialized net on the forget set
    while staying close to its old self on a retain sample.

    The fresh "bad teacher" init is the method's randomness.
    """
    del scheme_cfg
    _parametric_classifier(state)
    forget_ids = np.asarray(forget_ids, dtype=np.int64)
    retain_pool = np.asarray(retain_pool, dtype=np.int64)
    base = data.base if hasattr(data, "base") else data
    bad = init(state.scheme_id, state.arch, 0, rng.child("bad-teacher-init"))
    n_sample = min(len(retain_pool), BAD_TEACHER_RETAIN_SAMPLE)
    sample_ids = np.sort(rng.child("retain-sample").gen.choice(
        retain_pool, size=n_sample, replace=False))
    student = state.params.copy()
    x_f = base.view(forget_ids).features if len(forget_ids) else None
    x_r = base.view(sample_ids).features if n_sample else None
    log_q_f = _log_softmax(logits_batch(bad, x_f)) if x_f is not None else None
    log_q_r = _log_softmax(logits_batch(state, x_r)) if x_r is not None else None
    for _ in range(cfg.bad_teacher_steps):
        grad = np.zeros_like(student)
        for x, log_q in ((x_f, log_q_f), (x_r, log_q_r)):
            if x is None:
                continue
            acts, logits = _forward(state.arch, student, x)
            log_p = _log_softmax(logits)
            p = np.exp(log_p)
            gap = log_p - log_q
            kl = np.sum(p * gap, axis=1, keepdims=True)
            dlogits = p * (gap - kl) / len(x)
            grad += _backward(state.arch, student, acts, dlogits)
        student = student - cfg.bad_teacher_lr * grad
    return ModelState(state.scheme_id, state.arch, params=student)


def unlearn_newton_removal(state: ModelState, data, forget_ids: np.ndarray,
                           newton_ridge: float,
                           removal_noise: np.ndarray | None = None) -> ModelState:
    """One Newton step on the retain objective, cancelling the forgotten
    points' gradient: theta + H_retain^-1 sum_f grad(loss_i), plus the
    training-time certified-removal noise when one was recorded.

    Deterministic given its inputs; the noise vector is an input, drawn
    and fixed when the model was trained. Convex schemes only. For the
    quadratic loss (linear regression recast) the noise-free step is exact
    and reproduces the rank-one downdate result.
    """
    from .numerics import solve_spd

    forget_ids = np.asarray(forget_ids, dtype=np.int64)
    if state.scheme_id == SCHEME_LINREG:
        if len(forget_ids) == 0:
            return ModelState(state.scheme_id, state.arch, params=state.params.copy())
        base = data.base if hasattr(data, "base") else data
        train_ids = data.example_ids if hasattr(data, "example_ids") else base.example_ids
        keep = np.setdiff1d(np.asarray(train_ids, dtype=np.int64), forget_ids)
        retain, forget = base.view(keep), base.view(forget_ids)
        xr, xf = retain.features, forget.features
        h = xr.T @ xr + newton_ridge * np.eye(xr.shape[1])
        g = xf.T @ (xf @ state.params - forget.labels)
        return ModelState(state.scheme_id, state.arch,
                          params=state.params + solve_spd(h, g))
    if state.scheme_id != SCHEME_LOGREG or state.arch.hidden:
        raise NotConvexScheme("newton removal needs a convex scheme")
    if len(forget_ids) == 0:
        return ModelState(state.scheme_id, state.arch, params=state.params.copy())
    base = data.base if hasattr(data, "base") else data
    train_ids = data.example_ids if hasattr(data, "example_ids") else base.example_ids
    keep = np.setdiff1d(np.asarray(train_ids, dtype=np.int64), forget_ids)
    retain = base.view(keep)
    forget = base.view(forget_ids)
    c = state.arch.num_classes

    def with_bias(x):
        return np.concatenate([x, np.ones((len(x), 1))], axis=1)

    xr = with_bias(retain.features)
    pr = softmax(logits_batch(state, retain.features))
    # Hessian of the summed cross-entropy over the retain set, in the
    # [W; b] layout (bias folded in as a constant feature).
    a = pr[:, :, None] * np.eye(c)[None] - pr[:, :, None] * pr[:, None, :]
    h = np.einsum("bj,bk,bcd->jckd", xr, xr, a, optimize=True)
    p = xr.shape[1] * c
    h = h.reshape(p, p) + newton_ridge * np.eye(p)
    xf = with_bias(forget.features)
    pf = softmax(logits_batch(state, forget.features))
    g = (xf.T @ (pf - np.eye(c)[forget.labels])).ravel()
    step = solve_spd(h, g)
    params = state.params + step
    if removal_noise is not None:
        params = params + removal_noise
    return ModelState(state.scheme_id, state.arch, params=params)


def unlearn_retrain(scheme_id: str, arch: Architecture, lam: int, data: Dataset,
                    retain: np.ndarray, cfg: SchemeConfig,
                    rng: RngStream) -> tuple[ModelState, TrainingTranscript, CostMeter]:
    """Full learn on the retain set with a fresh init stream; both the
    control-model generator and the excluded trivial 'unlearner'."""
    state0 = init(scheme_id, arch, lam, rng.child("init"), k=cfg.k)
    return learn(state0, data.view(np.asarray(retain, dtype=np.int64)),
                 cfg, rng.child("learn"))


class InferenceOracle:
    """Query-counted black-box access to a model, optionally answering with
    Laplace output perturbation (per-query epsilon = epsilon / budget)."""

    def __init__(self, state: ModelState, budget: int,
                 epsilon: float | None = None, delta: float = 0.0,
                 rng: RngStream | None = None):
        self.state = state
        self.budget = budget
        self.counter = 0
        self.epsilon = epsilon
        self.delta = delta
        self._rng = rng
        if epsilon is not None:
            if epsilon <= 0:
                raise ValueError("epsilon must be positive")
            self.noise_scale = (2 * DP_LOGIT_CLAMP) / (epsilon / budget)
        else:
            self.noise_scale = 0.0

    @property
    def arch(self) -> Architecture:
        return self.state.arch

    def _charge(self, n: int):
        if self.counter + n > self.budget:
            raise BudgetExhausted(
                f"{self.counter} + {n} queries exceeds budget {self.budget}")
        self.counter += n

    def infer(self, x: np.ndarray) -> np.ndarray:
        self._charge(1)
        if self.epsilon is None:
            return infer(self.state, x)
        logits = np.clip(logits_batch(self.state, np.asarray(x)[None, :])[0],
                         -DP_LOGIT_CLAMP, DP_LOGIT_CLAMP)
        noise = self._rng.gen.laplace(0.0, self.noise_scale, size=logits.shape)
        return softmax(logits + noise)

    def infer_batch(self, x: np.ndarray) -> np.ndarray:
        self._charge(len(x))
        if self.epsilon is None:
            return infer_batch(self.state, x)
        logits = np.clip(logits_batch(self.state, x),
                         -DP_LOGIT_CLAMP, DP_LOGIT_CLAMP)
        noise = self._rng.gen.laplace(0.0, self.noise_scale, size=logits.shape)
        return softmax(logits + noise)


def wrap_dp_oracle(state: ModelState, epsilon: float, delta: float,
                   budget: int, rng: RngStream) -> InferenceOracle:
    """Differentially private inference oracle over a trained classifier."""
    _parametric_classifier(state)
    return InferenceOracle(state, budget=budget, epsilon=epsilon, delta=delta,
                           rng=rng)


@dataclass
class Unlearner:
    """A method bound to one trial's context (data, forget set, transcript),
    with the cost accounting the game's anti-trivial constraint checks use."""

    cfg: UnlearnerConfig
    scheme_id: str
    arch: Architecture
    scheme_cfg: SchemeConfig
    lam: int
    data: Dataset
    train_ids: np.ndarray
    forget_ids: np.ndarray
    transcript: TrainingTranscript | None = None

    @property
    def randomized(self) -> bool:
        return self.cfg.randomized

    @property
    def retain(self) -> np.ndarray:
        return compute_retain_ids(self.train_ids, self.forget_ids)

    def apply(self, state: ModelState,
              rng: RngStream | None) -> tuple[ModelState, CostMeter]:
        method = self.cfg.method
        k = len(self.forget_ids)
        n_params = param_count(self.arch) if self.arch.num_classes else self.arch.feature_dim
        if method == KNN_DELETE:
            return unlearn_knn_delete(state, self.forget_ids), CostMeter(units=max(k, 1))
        if method == LINREG_DOWNDATE:
            out = unlearn_linreg_downdate(state, self.data, self.forget_ids)
            n = self.arch.feature_dim
            return out, CostMeter.from_flops(3.0 * k * n * n + n * n, n)
        if method == AMNESIAC:
            out = unlearn_amnesiac(state, self.transcript, self.forget_ids)
            replays = len(self.transcript.deltas)
            return out, CostMeter(units=math.ceil(replays / 2) + 1)
        if method == SSD:
            train = self.data.view(self.train_ids)
            out = unlearn_ssd(state, train, self.forget_ids,
                              self.cfg.ssd_alpha, self.cfg.ssd_lambda)
            return out, CostMeter(units=len(self.train_ids) + k)
        if method == BAD_TEACHER:
            out = unlearn_bad_teacher(state, self.data.view(self.train_ids),
                                      self.forget_ids, self.retain, self.cfg,
                                      self.scheme_cfg, rng)
            sample = min(len(self.retain), BAD_TEACHER_RETAIN_SAMPLE)
            return out, CostMeter(units=self.cfg.bad_teacher_steps * (k + sample))
        if method == NEWTON_REMOVAL:
            train = self.data.view(self.train_ids)
            noise = self.transcript.removal_noise if self.transcript else None
            out = unlearn_newton_removal(state, train, self.forget_ids,
                                         self.cfg.newton_ridge, noise)
            p = (self.arch.feature_dim + 1) * self.arch.num_classes
            flops = len(self.retain) * p * p + p ** 3 / 3.0
            return out, CostMeter.from_flops(flops, n_params)
        if method == RETRAIN:
            out, _, cost = unlearn_retrain(self.scheme_id, self.arch, self.lam,
                                           self.data, self.retain,
                                           self.scheme_cfg, rng)
            return out, cost
        if method == DP_ORACLE:
            # The model is untouched; privacy noise lives in the oracle.
            return ModelState(state.scheme_id, state.arch,
                              params=None if state.params is None else state.params.copy(),
                              store=state.store, gram_inv=state.gram_inv,
                              xty=state.xty, k=state.k), CostMeter(units=1)
        raise ValueError(f"unknown unlearning method: {method!r}")
