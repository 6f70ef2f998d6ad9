"""Adversary scoring and decision rules.

Three distinguishers: divergence from the original model on perturbed
forget points (kld), shadow-model membership inference (mia), and
bitwise replay of deterministic unlearners (exact-match). Decision
directions are calibrated by self-simulation, never hard-coded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import DatasetView
from .errors import DimensionMismatch, InsufficientPopulation
from .numerics import RngStream, gaussian_vector
from .schemes import (
    ModelState,
    SchemeConfig,
    infer_batch,
    init,
    learn,
    states_equal,
)
from .unlearners import InferenceOracle, Unlearner

KLD = "kld"
MIA = "mia"
EXACT_MATCH = "exact-match"

LOWER_IS_UNLEARNED = "lower-is-unlearned"
HIGHER_IS_UNLEARNED = "higher-is-unlearned"
THRESHOLD = "threshold"

DEFAULT_NOISE_VARIANCE = 0.1


@dataclass(frozen=True)
class ScorePair:
    first: float
    second: float
    kind: str


@dataclass(frozen=True)
class DecisionRule:
    kind: str
    threshold: float = 0.0
    median_unlearned: float = 0.0
    median_control: float = 0.0
    sample_count: int = 0
    degenerate: bool = False


@dataclass(frozen=True)
class AttackModel:
    """Logistic membership attack over per-example output features:
    sorted confidence vector, cross-entropy loss, correctness bit."""

    weights: np.ndarray
    bias: float
    feature_mean: np.ndarray
    feature_std: np.ndarray
    shadow_count: int
    holdout_accuracy: float

    def membership_probability(self, features: np.ndarray) -> np.ndarray:
        z = (features - self.feature_mean) / self.feature_std
        logits = z @ self.weights + self.bias
        return 1.0 / (1.0 + np.exp(-logits))


def _candidate_probs(model, x: np.ndarray) -> np.ndarray:
    if isinstance(model, InferenceOracle):
        return model.infer_batch(x)
    return infer_batch(model, x)


def _kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    # Same formula as numerics.kl_divergence; both sides share the 1e-12
    # clamp so identical models score exactly zero even where softmax
    # outputs underflow past the clamp.
    pc = np.maximum(p, 1e-12)
    qc = np.maximum(q, 1e-12)
    return np.sum(p * np.log(pc / qc), axis=1)


def perturbed_forget_inputs(forget: DatasetView, noise_variance: float,
                            noise_base: RngStream) -> np.ndarray:
    """One Gaussian perturbation per forget example, keyed by example id so
    every candidate (and every calibration model) sees the same inputs."""
    x = forget.features.copy()
    for row, ex_id in enumerate(forget.example_ids):
        x[row] += gaussian_vector(noise_base.child(int(ex_id)), x.shape[1],
                                  0.0, noise_variance)
    return x


def kld_score(m_orig: ModelState, m, forget: DatasetView,
              noise_variance: float, noise_base: RngStream) -> float:
    """Sum over forget points of KL(candidate(x~) || original(x~))."""
    if m_orig.arch.feature_dim != forget.dims:
        raise DimensionMismatch("forget view does not match the model inputs")
    x = perturbed_forget_inputs(forget, noise_variance, noise_base)
    p = _candidate_probs(m, x)
    q = infer_batch(m_orig, x)
    return float(np.sum(_kl_rows(p, q)))


def make_kld_scorer(m_orig: ModelState, forget: DatasetView,
                    noise_variance: float, noise_base: RngStream):
    """kld_score with the perturbed inputs and the original model's outputs
    computed once; every candidate in a trial sees identical inputs."""
    if m_orig.arch.feature_dim != forget.dims:
        raise DimensionMismatch("forget view does not match the model inputs")
    x = perturbed_forget_inputs(forget, noise_variance, noise_base)
    q = infer_batch(m_orig, x)

    def score(m) -> float:
        return float(np.sum(_kl_rows(_candidate_probs(m, x), q)))

    return score


def _attack_features(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    conf = np.sort(probs, axis=1)[:, ::-1]
    p_label = np.maximum(probs[np.arange(len(labels)), labels], 1e-12)
    loss = -np.log(p_label)
    correct = (np.argmax(probs, axis=1) == labels).astype(np.float64)
    return np.concatenate([conf, loss[:, None], correct[:, None]], axis=1)


def train_attack_model(scheme_id: str, arch, scheme_cfg: SchemeConfig,
                       population: DatasetView, shadow_count: int,
                       rng: RngStream) -> AttackModel:
    """Shokri-style attack: shadow models on random halves of the
    population, then a logistic fit on (features, member) pairs."""
    n = population.size
    if n < 8 or shadow_count < 1:
        raise InsufficientPopulation(f"population of {n} cannot host shadow splits")
    feats, labels = [], []
    for j in range(shadow_count):
        stream = rng.child(("shadow", j))
        perm = stream.child("split").gen.permutation(n)
        members = np.zeros(n, dtype=bool)
        members[perm[: n // 2]] = True
        member_ids = population.example_ids[members]
        shadow0 = init(scheme_id, arch, 0, stream.child("init"), k=scheme_cfg.k)
        shadow, _, _ = learn(shadow0, population.base.view(member_ids),
                             scheme_cfg, stream.child("learn"))
        probs = infer_batch(shadow, population.features)
        feats.append(_attack_features(probs, population.labels))
        labels.append(members.astype(np.float64))
    x = np.concatenate(feats)
    y = np.concatenate(labels)
    order = rng.child("attack-shuffle").gen.permutation(len(x))
    x, y = x[order], y[order]
    n_holdout = max(1, len(x) // 5)
    x_tr, y_tr = x[n_holdout:], y[n_holdout:]
    x_ho, y_ho = x[:n_holdout], y[:n_holdout]
    mean = x_tr.mean(axis=0)
    std = np.maximum(x_tr.std(axis=0), 1e-9)
    z = (x_tr - mean) / std
    w = np.zeros(x.shape[1])
    b = 0.0
    lr = 0.5
    for _ in range(300):
        logits = z @ w + b
        p = 1.0 / (1.0 + np.exp(-logits))
        err = (p - y_tr) / len(z)
        w -= lr * (z.T @ err)
        b -= lr * float(err.sum())
    attack = AttackModel(weights=w, bias=b, feature_mean=mean, feature_std=std,
                         shadow_count=shadow_count, holdout_accuracy=0.0)
    pred = attack.membership_probability(x_ho) >= 0.5
    acc = float(np.mean(pred == (y_ho > 0.5)))
    return AttackModel(weights=w, bias=b, feature_mean=mean, feature_std=std,
                       shadow_count=shadow_count, holdout_accuracy=acc)


def mia_score(m, forget: DatasetView, attack: AttackModel) -> float:
    """Mean attack membership probability over the forget examples."""
    probs = _candidate_probs(m, forget.features)
    feats = _attack_features(probs, forget.labels)
    return float(np.mean(attack.membership_probability(feats)))


def exact_match_guess(m_orig: ModelState, candidates, unlearner: Unlearner):
    """Replay the unlearner locally; guess the candidate that matches bit
    for bit. Returns the guessed bit, or None to abstain (randomized
    method, or zero/two matches)."""
    if unlearner.randomized:
        return None
    replayed, _ = unlearner.apply(m_orig, None)
    match_first = states_equal(replayed, candidates[0])
    match_second = states_equal(replayed, candidates[1])
    if match_first == match_second:
        return None
    # Bit convention: b = 1 presents [unlearned, control].
    return 1 if match_first else 0


def calibrate_rule(score_fn, m_orig: ModelState, unlearner: Unlearner,
                   control_fn, calibration_trials: int,
                   rng: RngStream) -> DecisionRule:
    """Self-simulate the challenger: score home-grown unlearned models and
    retrained controls, then point the rule at the gap between medians."""
    if calibration_trials < 8:
        raise ValueError("need at least 8 calibration trials")
    unlearned_scores, control_scores = [], []
    for j in range(calibration_trials):
        u_stream = rng.child(("cal-unlearn", j)) if unlearner.randomized else None
        u_model, _ = unlearner.apply(m_orig, u_stream)
        c_model = control_fn(rng.child(("cal-control", j)))
        unlearned_scores.append(score_fn(u_model))
        control_scores.append(score_fn(c_model))
    med_u = float(np.median(unlearned_scores))
    med_c = float(np.median(control_scores))
    threshold = (med_u + med_c) / 2.0
    if abs(med_c - med_u) <= 1e-12:
        return DecisionRule(kind=LOWER_IS_UNLEARNED, threshold=threshold,
                            median_unlearned=med_u, median_control=med_c,
                            sample_count=calibration_trials, degenerate=True)
    kind = LOWER_IS_UNLEARNED if med_u < med_c else HIGHER_IS_UNLEARNED
    return DecisionRule(kind=kind, threshold=threshold,
                        median_unlearned=med_u, median_control=med_c,
                        sample_count=calibration_trials)


def decide(rule: DecisionRule, scores: ScorePair) -> int:
    """Map a score pair to the guessed bit (1 = first position unlearned).

    Ties break to the first position, which preserves the 50% null under
    exchangeable candidates.
    """
    s1, s2 = scores.first, scores.second
    if not (np.isfinite(s1) and np.isfinite(s2)):
        raise ValueError("scores must be finite")
    if rule.kind == THRESHOLD:
        below = (s1 < rule.threshold, s2 < rule.threshold)
        if below[0] != below[1]:
            return 1 if below[0] else 0
        return 1 if s1 <= s2 else 0
    if rule.kind == LOWER_IS_UNLEARNED:
        return 1 if s1 <= s2 else 0
    if rule.kind == HIGHER_IS_UNLEARNED:
        return 1 if s1 >= s2 else 0
    raise ValueError(f"unknown rule kind: {rule.kind!r}")
