"""Query-to-score prediction.

A single model maps query text to one predicted score per tool. Features are
hashed word and character n-grams; each tool gets a linear head squashed
through a logistic link, trained with mini-batch SGD on mean squared error
against the labeled scores.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from hashlib import blake2b
from typing import Optional, Sequence

import numpy as np

from .core import LabeledQuery, ScoreMatrix, ToolRegistry, label_matrix, validate_dataset
from .errors import DataError, EmptyDatasetError, InvalidConfigError, TrainingDivergedError
from .labeling import normalize, tokenize

_MODEL_MAGIC = b"TRMODEL1"
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class FeatureConfig:
    """Hashed n-gram feature space. ``dimension`` must be a power of two so
    hashes can be masked instead of reduced modulo."""

    dimension: int = 2 ** 18
    word_ngrams: tuple[int, ...] = (1, 2)
    char_ngrams: tuple[int, int] = (3, 5)
    signed_hashing: bool = True
    hash_seed: int = 0

    def __post_init__(self):
        d = self.dimension
        if d < 2 ** 10 or (d & (d - 1)) != 0:
            raise InvalidConfigError("dimension must be a power of two >= 1024")
        object.__setattr__(self, "word_ngrams", tuple(sorted(set(self.word_ngrams))))
        if not self.word_ngrams or any(n < 1 for n in self.word_ngrams):
            raise InvalidConfigError("word_ngrams must be a nonempty set of positive sizes")
        lo, hi = self.char_ngrams
        if not (1 <= lo <= hi):
            raise InvalidConfigError("char_ngrams must satisfy 1 <= lo <= hi")

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "word_ngrams": list(self.word_ngrams),
            "char_ngrams": list(self.char_ngrams),
            "signed_hashing": self.signed_hashing,
            "hash_seed": self.hash_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        return cls(
            dimension=int(d["dimension"]),
            word_ngrams=tuple(d["word_ngrams"]),
            char_ngrams=tuple(d["char_ngrams"]),
            signed_hashing=bool(d["signed_hashing"]),
            hash_seed=int(d["hash_seed"]),
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 16
    learning_rate: float = 0.1
    seed: int = 42
    dev_fraction: float = 0.15

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidConfigError("epochs and batch_size must be positive")
        if not (self.learning_rate > 0):
            raise InvalidConfigError("learning_rate must be positive")
        if not (0.0 < self.dev_fraction < 1.0):
            raise InvalidConfigError("dev_fraction must be in (0,1)")


@dataclass(frozen=True)
class TrainMeta:
    seed: int
    epochs: int
    learning_rate: float
    final_train_mse: float


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_mse: float
    dev_mse: Optional[float]


@dataclass(frozen=True)
class TrainReport:
    initial_train_mse: float
    epochs: tuple[EpochStats, ...]
    n_train: int
    n_dev: int

    @property
    def final_train_mse(self) -> float:
        return self.epochs[-1].train_mse if self.epochs else self.initial_train_mse

    def to_dict(self) -> dict:
        return {
            "initial_train_mse": self.initial_train_mse,
            "final_train_mse": self.final_train_mse,
            "n_train": self.n_train,
            "n_dev": self.n_dev,
            "epochs": [
                {"epoch": e.epoch, "train_mse": e.train_mse, "dev_mse": e.dev_mse}
                for e in self.epochs
            ],
        }


@dataclass(frozen=True, eq=False)
class RouterModel:
    """Trained predictor: one weight vector and bias per tool, plus the
    feature configuration needed to reproduce its inputs."""

    feature_config: FeatureConfig
    tool_ids: tuple[str, ...]
    weights: np.ndarray  # (M, dimension), read-only
    biases: np.ndarray   # (M,), read-only
    train_meta: TrainMeta

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        b = np.ascontiguousarray(np.asarray(self.biases, dtype=np.float64))
        m = len(self.tool_ids)
        if w.shape != (m, self.feature_config.dimension) or b.shape != (m,):
            raise DataError("weight shapes do not match tool count and dimension")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise DataError("model weights must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "tool_ids", tuple(self.tool_ids))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)


def _hash_feature(key: str, seed_bytes: bytes, mask: int, signed: bool) -> tuple[int, float]:
    d = blake2b(key.encode("utf-8"), digest_size=9, key=seed_bytes).digest()
    idx = int.from_bytes(d[:8], "little") & mask
    sign = -1.0 if (signed and d[8] & 1) else 1.0
    return idx, sign


def featurize(query: str, config: FeatureConfig = FeatureConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Hash a query into a sparse unit vector: (indices, values).

    Indices are unique; values are the signed n-gram counts, L2-normalized
    when nonzero. Depends only on the query text and the config.
    """
    text = normalize(query)
    tokens = tokenize(text)
    seed_bytes = (config.hash_seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    mask = config.dimension - 1
    acc: dict[int, float] = {}

    for n in config.word_ngrams:
        for i in range(len(tokens) - n + 1):
            key = f"w{n}:" + " ".join(tokens[i : i + n])
            idx, sign = _hash_feature(key, seed_bytes, mask, config.signed_hashing)
            acc[idx] = acc.get(idx, 0.0) + sign
    lo, hi = config.char_ngrams
    for n in range(lo, hi + 1):
        for i in range(len(text) - n + 1):
            key = f"c{n}:" + text[i : i + n]
            idx, sign = _hash_feature(key, seed_bytes, mask, config.signed_hashing)
            acc[idx] = acc.get(idx, 0.0) + sign

    items = [(i, v) for i, v in acc.items() if v != 0.0]
    if not items:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    idxs = np.array([i for i, _ in items], dtype=np.int64)
    vals = np.array([v for _, v in items], dtype=np.float64)
    vals /= np.sqrt(np.sum(vals * vals))
    return idxs, vals


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward(weights: np.ndarray, biases: np.ndarray, feat: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    idx, vals = feat
    if idx.size == 0:
        return _sigmoid(biases.copy())
    return _sigmoid(weights[:, idx] @ vals + biases)


def _dloss_dz(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    # d/dz of (sigmoid(z) - y)^2
    return 2.0 * (p - y) * p * (1.0 - p)


def dataset_mse(
    weights: np.ndarray,
    biases: np.ndarray,
    feats: Sequence[tuple[np.ndarray, np.ndarray]],
    labels: np.ndarray,
) -> float:
    """Mean over examples of the summed-over-tools squared error."""
    if len(feats) == 0:
        return 0.0
    total = 0.0
    for i, feat in enumerate(feats):
        p = _forward(weights, biases, feat)
        d = p - labels[i]
        total += float(np.sum(d * d))
    return total / len(feats)


def mse_loss_and_grad(
    weights: np.ndarray,
    biases: np.ndarray,
    feats: Sequence[tuple[np.ndarray, np.ndarray]],
    labels: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss plus dense analytic gradients for the full dataset.

    Used by the finite-difference checks; the SGD loop applies the same
    per-example terms sparsely.
    """
    n = len(feats)
    grad_w = np.zeros_like(weights)
    grad_b = np.zeros_like(biases)
    total = 0.0
    for i, (idx, vals) in enumerate(feats):
        p = _forward(weights, biases, (idx, vals))
        d = p - labels[i]
        total += float(np.sum(d * d))
        g = _dloss_dz(p, labels[i]) / n
        if idx.size:
            grad_w[:, idx] += np.outer(g, vals)
        grad_b += g
    return total / n, grad_w, grad_b


def train(
    dataset: Sequence[LabeledQuery],
    registry: ToolRegistry,
    feature_config: FeatureConfig = FeatureConfig(),
    train_config: TrainConfig = TrainConfig(),
) -> tuple[RouterModel, TrainReport]:
    """Fit the per-tool heads by mini-batch SGD on the squared-error loss.

    Deterministic given (dataset order, configs): the dev split and every
    per-epoch shuffle derive from ``train_config.seed``. The report carries
    per-epoch train and dev MSE; dev is skipped when the dev side of the
    split would be empty.
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot train on an empty dataset")
    report = validate_dataset(dataset, registry)
    if not report.ok:
        raise DataError(f"dataset invalid: {report.summary()}")

    labels = label_matrix(dataset, registry).scores  # (N, M)
    feats = [featurize(q.query, feature_config) for q in dataset]
    n = len(dataset)
    m = len(registry)

    perm = np.random.default_rng(train_config.seed).permutation(n)
    k = int(round(n * (1.0 - train_config.dev_fraction)))
    k = max(1, min(n, k))
    train_idx = perm[:k]
    dev_idx = perm[k:]
    train_feats = [feats[i] for i in train_idx]
    train_labels = labels[train_idx]
    dev_feats = [feats[i] for i in dev_idx]
    dev_labels = labels[dev_idx]

    weights = np.zeros((m, feature_config.dimension), dtype=np.float64)
    biases = np.zeros(m, dtype=np.float64)
    lr = train_config.learning_rate
    bs = train_config.batch_size

    initial_mse = dataset_mse(weights, biases, train_feats, train_labels)
    epoch_rng = np.random.default_rng(train_config.seed)
    stats: list[EpochStats] = []
    for epoch in range(1, train_config.epochs + 1):
        order = epoch_rng.permutation(len(train_feats))
        for start in range(0, len(order), bs):
            batch = order[start : start + bs]
            # forward the whole batch against the current weights, then apply
            # the averaged update in one sweep
            grads = []
            for i in batch:
                p = _forward(weights, biases, train_feats[i])
                grads.append(_dloss_dz(p, train_labels[i]) / len(batch))
            for g, i in zip(grads, batch):
                idx, vals = train_feats[i]
                if idx.size:
                    weights[:, idx] -= lr * np.outer(g, vals)
                biases -= lr * g
        train_mse = dataset_mse(weights, biases, train_feats, train_labels)
        if not np.isfinite(train_mse):
            raise TrainingDivergedError(f"training loss became non-finite at epoch {epoch}")
        dev_mse = (
            dataset_mse(weights, biases, dev_feats, dev_labels) if len(dev_feats) else None
        )
        stats.append(EpochStats(epoch, train_mse, dev_mse))

    final_mse = stats[-1].train_mse if stats else initial_mse
    model = RouterModel(
        feature_config=feature_config,
        tool_ids=registry.ids,
        weights=weights,
        biases=biases,
        train_meta=TrainMeta(
            seed=train_config.seed,
            epochs=train_config.epochs,
            learning_rate=lr,
            final_train_mse=final_mse,
        ),
    )
    return model, TrainReport(
        initial_train_mse=initial_mse,
        epochs=tuple(stats),
        n_train=len(train_feats),
        n_dev=len(dev_feats),
    )


def predict(model: RouterModel, query: str) -> list[float]:
    """Predicted score per tool for one query, in model.tool_ids order."""
    p = _forward(model.weights, model.biases, featurize(query, model.feature_config))
    return [float(x) for x in p]


def score_matrix(model: RouterModel, queries: Sequence[tuple[str, str]]) -> ScoreMatrix:
    """Predict scores for a batch of (id, query) pairs."""
    arr = np.empty((len(queries), len(model.tool_ids)), dtype=np.float64)
    for i, (_, qtext) in enumerate(queries):
        arr[i] = _forward(model.weights, model.biases, featurize(qtext, model.feature_config))
    return ScoreMatrix(tuple(qid for qid, _ in queries), model.tool_ids, arr)


def save_model(model: RouterModel, path) -> None:
    """Write the model as magic + JSON header + raw little-endian weights.

    Byte-for-byte deterministic for identical models.
    """
    header = {
        "format_version": _FORMAT_VERSION,
        "feature_config": model.feature_config.to_dict(),
        "tool_ids": list(model.tool_ids),
        "train_meta": {
            "seed": model.train_meta.seed,
            "epochs": model.train_meta.epochs,
            "learning_rate": model.train_meta.learning_rate,
            "final_train_mse": model.train_meta.final_train_mse,
        },
    }
    blob = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(len(blob).to_bytes(4, "little"))
        fh.write(blob)
        fh.write(np.ascontiguousarray(model.weights, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.biases, dtype="<f8").tobytes())


def load_model(path) -> RouterModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[: len(_MODEL_MAGIC)] != _MODEL_MAGIC:
        raise DataError(f"{path}: not a model file")
    off = len(_MODEL_MAGIC)
    hlen = int.from_bytes(raw[off : off + 4], "little")
    off += 4
    try:
        header = json.loads(raw[off : off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: corrupt model header: {exc}") from exc
    off += hlen
    if header.get("format_version") != _FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model format {header.get('format_version')!r}")
    fc = FeatureConfig.from_dict(header["feature_config"])
    tool_ids = tuple(header["tool_ids"])
    m = len(tool_ids)
    wbytes = m * fc.dimension * 8
    expected = off + wbytes + m * 8
    if len(raw) != expected:
        raise DataError(f"{path}: truncated model file ({len(raw)} bytes, expected {expected})")
    weights = np.frombuffer(raw, dtype="<f8", count=m * fc.dimension, offset=off).reshape(
        m, fc.dimension
    ).copy()
    biases = np.frombuffer(raw, dtype="<f8", count=m, offset=off + wbytes).copy()
    tm = header["train_meta"]
    return RouterModel(
        feature_config=fc,
        tool_ids=tool_ids,
        weights=weights,
        biases=biases,
        train_meta=TrainMeta(
            seed=int(tm["seed"]),
            epochs=int(tm["epochs"]),
            learning_rate=float(tm["learning_rate"]),
            final_train_mse=float(tm["final_train_mse"]),
        ),
    )
