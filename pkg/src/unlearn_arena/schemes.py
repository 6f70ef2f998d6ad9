"""Learning schemes: init / learn / infer plus utility, cost, transcripts.

Four schemes share one interface:

  knn     instance store, deterministic learn (ignores the stream)
  linreg  ridge-regularized least squares with a cached Gram inverse,
          deterministic learn
  logreg  softmax regression (no hidden layers, convex), SGD-trained
  mlp     ReLU MLP, SGD-trained

SGD schemes are entropic: their output depends on the init and shuffle
streams. Every learn records the exact per-batch parameter updates so the
transcript replays to the final parameters bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .datasets import REGRESSION, DatasetView
from .errors import DegenerateGram, DimensionMismatch, EmptyData
from .numerics import RngStream, invert_spd, softmax, solve_spd

SCHEME_KNN = "knn"
SCHEME_LINREG = "linreg"
SCHEME_LOGREG = "logreg"
SCHEME_MLP = "mlp"

MOMENTUM = 0.9


@dataclass(frozen=True)
class Architecture:
    feature_dim: int
    num_classes: int = 0            # 0 for regression
    hidden: tuple[int, ...] = ()


@dataclass(frozen=True)
class SchemeConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.05
    weight_decay: float = 5e-4
    k: int = 1                      # k-NN only
    ridge: float = 0.0              # linreg only
    sigma: float = 0.0              # objective-perturbation noise (logreg training)


@dataclass
class KnnStore:
    features: np.ndarray
    labels: np.ndarray
    ids: np.ndarray


@dataclass
class ModelState:
    scheme_id: str
    arch: Architecture
    params: np.ndarray | None = None
    store: KnnStore | None = None
    gram_inv: np.ndarray | None = None
    xty: np.ndarray | None = None
    k: int = 1


@dataclass
class TrainingTranscript:
    initial_params: np.ndarray
    batch_ids: list = field(default_factory=list)     # per batch: id array
    deltas: list = field(default_factory=list)        # per batch: applied update
    removal_noise: np.ndarray | None = None           # seeded sigma * N(0, I)

    def replay(self) -> np.ndarray:
        """Re-apply the recorded updates in order; bitwise equals training."""
        params = self.initial_params.copy()
        for delta in self.deltas:
            params = params + delta
        return params


@dataclass
class CostMeter:
    """Work units: one unit is one example-gradient evaluation.

    Linear-algebra work is billed at ceil(flops / (2 * paramcount)).
    """

    units: int = 0

    def add(self, units: int) -> "CostMeter":
        self.units += int(units)
        return self

    @staticmethod
    def from_flops(flops: float, paramcount: int) -> "CostMeter":
        return CostMeter(units=math.ceil(flops / (2.0 * max(paramcount, 1))))


# -- parameter packing for the SGD schemes ------------------------------------

def layer_shapes(arch: Architecture) -> list[tuple[int, int]]:
    dims = [arch.feature_dim, *arch.hidden, arch.num_classes]
    return list(zip(dims[:-1], dims[1:]))


def param_count(arch: Architecture) -> int:
    return sum(fi * fo + fo for fi, fo in layer_shapes(arch))


def unpack_params(arch: Architecture, flat: np.ndarray):
    """Views (no copies) of the weight matrices and bias vectors."""
    weights, biases, off = [], [], 0
    for fi, fo in layer_shapes(arch):
        weights.append(flat[off: off + fi * fo].reshape(fi, fo))
        off += fi * fo
        biases.append(flat[off: off + fo])
        off += fo
    return weights, biases


def _forward(arch: Architecture, flat: np.ndarray, x: np.ndarray):
    """Batch forward pass; returns (activations per layer, logits)."""
    weights, biases = unpack_params(arch, flat)
    acts = [x]
    h = x
    for li, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w + b
        if li < len(weights) - 1:
            h = np.maximum(z, 0.0)
            acts.append(h)
        else:
            return acts, z
    raise AssertionError("unreachable")


def _backward(arch: Architecture, flat: np.ndarray, acts, dlogits: np.ndarray) -> np.ndarray:
    """Flat gradient of a scalar loss given d(loss)/d(logits)."""
    weights, _ = unpack_params(arch, flat)
    grad = np.zeros_like(flat)
    gw, gb = unpack_params(arch, grad)
    dz = dlogits
    for li in range(len(weights) - 1, -1, -1):
        gw[li][...] = acts[li].T @ dz
        gb[li][...] = dz.sum(axis=0)
        if li > 0:
            dz = (dz @ weights[li].T) * (acts[li] > 0.0)
    return grad


def logits_batch(state: ModelState, x: np.ndarray) -> np.ndarray:
    _, z = _forward(state.arch, state.params, x)
    return z


def _per_example_sq_grads(arch: Architecture, flat: np.ndarray, x: np.ndarray,
                          dlogits: np.ndarray) -> np.ndarray:
    """Sum over examples of squared per-example gradients, without forming them.

    For a dense layer the per-example gradient of example i is
    a_i^T dz_i, so the squared sum is (a^2)^T (dz^2) entrywise.
    """
    weights, _ = unpack_params(arch, flat)
    acts, _ = _forward(arch, flat, x)
    out = np.zeros_like(flat)
    ow, ob = unpack_params(arch, out)
    dz = dlogits
    for li in range(len(weights) - 1, -1, -1):
        ow[li][...] = (acts[li] ** 2).T @ (dz ** 2)
        ob[li][...] = (dz ** 2).sum(axis=0)
        if li > 0:
            dz = (dz @ weights[li].T) * (acts[li] > 0.0)
    return out


# -- scheme operations --------------------------------------------------------

def init(scheme_id: str, arch: Architecture, security_parameter: int,
         rng: RngStream, k: int = 1) -> ModelState:
    """Fresh model: N(0, 1/fan-in) weights for parametric schemes, empty
    store for k-NN. The security parameter is recorded by the game report,
    not by the state."""
    del security_parameter
    if scheme_id == SCHEME_KNN:
        return ModelState(scheme_id, arch, store=KnnStore(
            features=np.empty((0, arch.feature_dim)),
            labels=np.empty(0, dtype=np.int64),
            ids=np.empty(0, dtype=np.int64)), k=k)
    if scheme_id == SCHEME_LINREG:
        return ModelState(scheme_id, arch, params=np.zeros(arch.feature_dim))
    if scheme_id in (SCHEME_LOGREG, SCHEME_MLP):
        if scheme_id == SCHEME_LOGREG and arch.hidden:
            raise ValueError("logreg scheme must have no hidden layers")
        g = rng.gen
        flat = np.zeros(param_count(arch))
        weights, _ = unpack_params(arch, flat)
        for w in weights:
            w[...] = g.standard_normal(w.shape) / math.sqrt(w.shape[0])
        return ModelState(scheme_id, arch, params=flat)
    raise ValueError(f"unknown scheme: {scheme_id!r}")


def learn(state: ModelState, data: DatasetView, cfg: SchemeConfig,
          rng: RngStream) -> tuple[ModelState, TrainingTranscript, CostMeter]:
    if data.size == 0:
        raise EmptyData("cannot learn from an empty dataset")
    if state.scheme_id == SCHEME_KNN:
        new = ModelState(SCHEME_KNN, state.arch, store=KnnStore(
            features=data.features.copy(), labels=data.labels.copy(),
            ids=data.example_ids.copy()), k=cfg.k)
        return new, TrainingTranscript(np.empty(0)), CostMeter(units=data.size)
    if state.scheme_id == SCHEME_LINREG:
        return _learn_linreg(state, data, cfg)
    if state.scheme_id in (SCHEME_LOGREG, SCHEME_MLP):
        return _learn_sgd(state, data, cfg, rng)
    raise ValueError(f"unknown scheme: {state.scheme_id!r}")


def _learn_linreg(state: ModelState, data: DatasetView, cfg: SchemeConfig):
    x, y = data.features, data.labels
    m, n = x.shape
    if m <= n and cfg.ridge == 0.0:
        raise DegenerateGram(f"m={m} <= n={n} with ridge 0")
    gram = x.T @ x + cfg.ridge * np.eye(n)
    xty = x.T @ y
    coef = solve_spd(gram, xty)
    gram_inv = invert_spd(gram)
    new = ModelState(SCHEME_LINREG, state.arch, params=coef,
                     gram_inv=gram_inv, xty=xty)
    cost = CostMeter.from_flops(m * n * n + 2.0 * n ** 3 + m * n, n)
    return new, TrainingTranscript(np.empty(0)), cost


def _learn_sgd(state: ModelState, data: DatasetView, cfg: SchemeConfig,
               rng: RngStream):
    arch = state.arch
    params = state.params.copy()
    transcript = TrainingTranscript(initial_params=params.copy())
    g = rng.gen
    # Certified-removal noise: drawn once at training time with magnitude
    # sigma and recorded for the removal update to consume later.
    if cfg.sigma > 0.0:
        transcript.removal_noise = cfg.sigma * g.standard_normal(params.shape)
    x_all, y_all = data.features, data.labels
    ids_all = data.example_ids
    onehot = np.eye(arch.num_classes)[y_all]
    velocity = np.zeros_like(params)
    m = data.size
    for _ in range(cfg.epochs):
        order = g.permutation(m)
        for start in range(0, m, cfg.batch_size):
            sel = order[start: start + cfg.batch_size]
            xb, yb = x_all[sel], onehot[sel]
            acts, logits = _forward(arch, params, xb)
            probs = softmax(logits)
            dlogits = (probs - yb) / len(sel)
            grad = _backward(arch, params, acts, dlogits)
            grad += cfg.weight_decay * params
            velocity *= MOMENTUM
            velocity -= cfg.learning_rate * grad
            transcript.batch_ids.append(ids_all[sel].copy())
            transcript.deltas.append(velocity.copy())
            params += velocity
    new = ModelState(state.scheme_id, arch, params=params)
    return new, transcript, CostMeter(units=cfg.epochs * m)


def infer(state: ModelState, x: np.ndarray) -> np.ndarray | float:
    """Single-example inference: probability vector or regression scalar."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != state.arch.feature_dim:
        raise DimensionMismatch(
            f"query dim {x.shape} vs feature dim {state.arch.feature_dim}")
    if state.scheme_id == SCHEME_LINREG:
        return float(x @ state.params)
    if state.scheme_id == SCHEME_KNN:
        return _knn_vote(state, x)
    return softmax(logits_batch(state, x[None, :])[0])


def infer_batch(state: ModelState, x: np.ndarray) -> np.ndarray:
    """Batched inference; rows are probability vectors (or predictions)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != state.arch.feature_dim:
        raise DimensionMismatch(
            f"batch shape {x.shape} vs feature dim {state.arch.feature_dim}")
    if state.scheme_id == SCHEME_LINREG:
        return x @ state.params
    if state.scheme_id == SCHEME_KNN:
        return _knn_vote_batch(state, x)
    return softmax(logits_batch(state, x))


def _knn_vote_batch(state: ModelState, x: np.ndarray) -> np.ndarray:
    store = state.store
    if store.features.shape[0] == 0:
        raise EmptyData("k-NN store is empty")
    d2 = (np.sum(x ** 2, axis=1)[:, None]
          - 2.0 * x @ store.features.T
          + np.sum(store.features ** 2, axis=1)[None, :])
    # Ties on distance break toward the smaller example id.
    if state.k == 1:
        tie = d2 <= d2.min(axis=1, keepdims=True)
        masked_ids = np.where(tie, store.ids[None, :], np.iinfo(np.int64).max)
        best = masked_ids.argmin(axis=1)
        return np.eye(state.arch.num_classes)[store.labels[best]]
    ids = np.broadcast_to(store.ids, d2.shape)
    order = np.lexsort((ids, d2), axis=1)
    k = min(state.k, order.shape[1])
    nearest_labels = store.labels[order[:, :k]]
    votes = np.zeros((len(x), state.arch.num_classes))
    np.add.at(votes, (np.arange(len(x))[:, None], nearest_labels), 1.0)
    return votes / votes.sum(axis=1, keepdims=True)


def _knn_vote(state: ModelState, x: np.ndarray) -> np.ndarray:
    return _knn_vote_batch(state, x[None, :])[0]


def utility(state: ModelState, test: DatasetView) -> float:
    """Accuracy for classifiers; 1 / (1 + MSE) for regression."""
    if test.size == 0:
        raise EmptyData("utility needs a non-empty test set")
    if test.task_kind == REGRESSION:
        pred = infer_batch(state, test.features)
        mse = float(np.mean((pred - test.labels) ** 2))
        return 1.0 / (1.0 + mse)
    probs = infer_batch(state, test.features)
    return float(np.mean(np.argmax(probs, axis=1) == test.labels))


# -- serialization (round-trip must be bitwise exact) -------------------------

def _vec_hex(v: np.ndarray) -> list[str]:
    return [float(e).hex() for e in np.asarray(v, dtype=np.float64).ravel()]


def _vec_unhex(entries: list[str], shape=None) -> np.ndarray:
    out = np.array([float.fromhex(e) for e in entries], dtype=np.float64)
    return out.reshape(shape) if shape is not None else out


def to_blob(state: ModelState) -> str:
    doc = {
        "scheme_id": state.scheme_id,
        "arch": [state.arch.feature_dim, state.arch.num_classes,
                 list(state.arch.hidden)],
        "k": state.k,
    }
    if state.params is not None:
        doc["params"] = _vec_hex(state.params)
    if state.store is not None:
        doc["store"] = {
            "shape": list(state.store.features.shape),
            "features": _vec_hex(state.store.features),
            "labels": state.store.labels.tolist(),
            "ids": state.store.ids.tolist(),
        }
    if state.gram_inv is not None:
        doc["gram_inv"] = {"shape": list(state.gram_inv.shape),
                           "entries": _vec_hex(state.gram_inv)}
    if state.xty is not None:
        doc["xty"] = _vec_hex(state.xty)
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def from_blob(blob: str) -> ModelState:
    doc = json.loads(blob)
    arch = Architecture(doc["arch"][0], doc["arch"][1], tuple(doc["arch"][2]))
    state = ModelState(doc["scheme_id"], arch, k=doc["k"])
    if "params" in doc:
        state.params = _vec_unhex(doc["params"])
    if "store" in doc:
        s = doc["store"]
        state.store = KnnStore(
            features=_vec_unhex(s["features"], tuple(s["shape"])),
            labels=np.array(s["labels"], dtype=np.int64),
            ids=np.array(s["ids"], dtype=np.int64),
        )
    if "gram_inv" in doc:
        state.gram_inv = _vec_unhex(doc["gram_inv"]["entries"],
                                    tuple(doc["gram_inv"]["shape"]))
    if "xty" in doc:
        state.xty = _vec_unhex(doc["xty"])
    return state


def states_equal(a: ModelState, b: ModelState) -> bool:
    """Bitwise model equality, the relation the replay distinguisher tests."""
    if a.scheme_id != b.scheme_id or a.arch != b.arch or a.k != b.k:
        return False
    if (a.params is None) != (b.params is None):
        return False
    if a.params is not None and not np.array_equal(a.params, b.params):
        return False
    if (a.store is None) != (b.store is None):
        return False
    if a.store is not None:
        if not (np.array_equal(a.store.features, b.store.features)
                and np.array_equal(a.store.labels, b.store.labels)
                and np.array_equal(a.store.ids, b.store.ids)):
            return False
    return True
