"""One-vs-rest linear max-margin classifier over sparse feature vectors.

Each tag gets a binary separator minimizing the L2-regularized squared hinge
loss ``lambda/2 |w|^2 + mean(max(0, 1 - y w.x)^2)`` with ``lambda = 1/(C n)``.
The bias is an extra constant feature and is regularized with the weights.
The solver is dual coordinate descent over examples visited in a seeded
random order each epoch; the primal objective is evaluated at every epoch
boundary and the best iterate seen per tag is kept.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .corpus import DialectTag
from .errors import ConfigurationError, DataFormatError, InsufficientDataError
from .features import FeatureConfig, FeatureSpace, SparseFeatureVector

MAGIC = "gcr-dialect-model"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainSettings:
    regularization_c: float = 1.0
    epochs: int = 50
    seed: int = 0
    shuffle_each_epoch: bool = True
    tolerance: float = 1e-3

    def __post_init__(self):
        if not self.regularization_c > 0:
            raise ConfigurationError("regularization_c must be positive")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.tolerance < 0:
            raise ConfigurationError("tolerance must be >= 0")


@dataclass
class TrainingLog:
    """Per-epoch objective values, shape ``(epochs, n_tags)``.

    ``iterate`` is the primal objective of the current weights, ``best`` the
    running minimum (the model returned), and ``dual`` the dual objective in
    the same units, which coordinate descent never decreases.
    """

    iterate: np.ndarray
    best: np.ndarray
    dual: np.ndarray


@dataclass
class LinearModel:
    tag_set: tuple[DialectTag, ...]
    weights: np.ndarray  # (n_tags, n_features)
    bias: np.ndarray  # (n_tags,)
    space: FeatureSpace
    config: FeatureConfig
    log: TrainingLog | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        self.tag_set = tuple(self.tag_set)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.shape != (len(self.tag_set), len(self.space)):
            raise ValueError(f"weights have shape {self.weights.shape}, expected "
                             f"{(len(self.tag_set), len(self.space))}")
        if self.bias.shape != (len(self.tag_set),):
            raise ValueError("one bias per tag required")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ValueError("weights and biases must be finite")

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]


def to_matrix(vectors, n_features: int) -> sp.csr_matrix:
    """Stack sparse vectors into a CSR matrix, rejecting out-of-range indices."""
    indptr = [0]
    indices = []
    data = []
    for v in vectors:
        if v.indices and (v.indices[-1] >= n_features or v.indices[0] < 0):
            raise ValueError(f"feature index {v.indices[-1]} outside space of size {n_features}")
        indices.extend(v.indices)
        data.extend(v.values)
        indptr.append(len(indices))
    return sp.csr_matrix((np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64),
                          np.asarray(indptr, dtype=np.int64)), shape=(len(indptr) - 1, n_features))


def _objective(X: sp.csr_matrix, Y: np.ndarray, W: np.ndarray, lam: float) -> np.ndarray:
    margins = np.asarray(X @ W.T)
    loss = np.maximum(0.0, 1.0 - Y * margins) ** 2
    return 0.5 * lam * np.einsum("kf,kf->k", W, W) + loss.mean(axis=0)


def train(
    train_vectors,
    settings: TrainSettings = TrainSettings(),
    *,
    space: FeatureSpace,
    config: FeatureConfig,
    tag_set=None,
) -> LinearModel:
    """Fit one binary separator per tag (that tag against the rest).

    ``train_vectors`` is a sequence of ``(SparseFeatureVector, DialectTag)``.
    Training stops after ``settings.epochs`` passes or once the largest
    projected-gradient violation in a pass drops below ``settings.tolerance``.
    """
    data = list(train_vectors)
    labels = [tag for _, tag in data]
    present = set(labels)
    if tag_set is None:
        tag_set = sorted(present, key=lambda t: t.id)
    tag_set = tuple(t for t in tag_set if t in present)
    if len(tag_set) < 2:
        raise InsufficientDataError("training data must contain at least two distinct tags")
    n = len(data)
    n_feat = len(space)
    X = to_matrix([v for v, _ in data], n_feat)
    X = sp.hstack([X, np.ones((n, 1))], format="csr")
    col = {t: k for k, t in enumerate(tag_set)}
    Y = -np.ones((n, len(tag_set)))
    Y[np.arange(n), [col[t] for t in labels]] = 1.0

    K, D = len(tag_set), n_feat + 1
    C = settings.regularization_c
    lam = 1.0 / (C * n)
    diag = 0.5 / C  # squared hinge adds 1/(2C) to the dual Hessian diagonal
    rows = [(X.indices[X.indptr[i]:X.indptr[i + 1]], X.data[X.indptr[i]:X.indptr[i + 1]]) for i in range(n)]
    q_diag = np.asarray(X.multiply(X).sum(axis=1)).ravel() + diag
    W = np.zeros((K, D))
    alpha = np.zeros((n, K))
    best_W = np.zeros((K, D))
    best_obj = np.full(K, np.inf)
    iterate_trace, best_trace, dual_trace = [], [], []
    rng = np.random.default_rng(settings.seed)
    order = np.arange(n)
    for _ in range(settings.epochs):
        if settings.shuffle_each_epoch:
            order = rng.permutation(n)
        violation = 0.0
        for i in order:
            idx, vals = rows[i]
            y = Y[i]
            a = alpha[i]
            block = W[:, idx]
            grad = y * (block @ vals) - 1.0 + diag * a
            proj = np.where(a > 0.0, grad, np.minimum(grad, 0.0))
            violation = max(violation, float(np.abs(proj).max()))
            new_a = np.maximum(a - grad / q_diag[i], 0.0)
            step = (new_a - a) * y
            alpha[i] = new_a
            W[:, idx] = block + np.outer(step, vals)
        obj = _objective(X, Y, W, lam)
        improved = obj < best_obj
        best_obj[improved] = obj[improved]
        best_W[improved] = W[improved]
        iterate_trace.append(obj)
        best_trace.append(best_obj.copy())
        dual = alpha.sum(axis=0) - 0.5 * np.einsum("kf,kf->k", W, W) - 0.5 * diag * (alpha ** 2).sum(axis=0)
        dual_trace.append(dual / (C * n))
        if violation < settings.tolerance:
            break
    log = TrainingLog(np.array(iterate_trace), np.array(best_trace), np.array(dual_trace))
    return LinearModel(tag_set, best_W[:, :-1].copy(), best_W[:, -1].copy(), space, config, log)


def decision_scores(model: LinearModel, vector: SparseFeatureVector) -> np.ndarray:
    """``w_t . x + b_t`` for every tag, in tag-set order."""
    if vector.indices and vector.indices[-1] >= model.n_features:
        raise ValueError(f"feature index {vector.indices[-1]} outside model space of size {model.n_features}")
    idx = np.asarray(vector.indices, dtype=np.int64)
    vals = np.asarray(vector.values, dtype=np.float64)
    return model.weights[:, idx] @ vals + model.bias


def decision_matrix(model: LinearModel, vectors) -> np.ndarray:
    X = to_matrix(vectors, model.n_features)
    return np.asarray(X @ model.weights.T) + model.bias


def predict(model: LinearModel, vector: SparseFeatureVector) -> DialectTag:
    # np.argmax returns the first maximum, i.e. the lowest tag index on ties
    return model.tag_set[int(np.argmax(decision_scores(model, vector)))]


def predict_many(model: LinearModel, vectors) -> list[DialectTag]:
    if not vectors:
        return []
    return [model.tag_set[k] for k in np.argmax(decision_matrix(model, vectors), axis=1)]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps(model: LinearModel) -> str:
    lines = [f"{MAGIC} v{FORMAT_VERSION}",
             "tags\t" + "\t".join(t.id for t in model.tag_set),
             "names\t" + json.dumps([t.display_name for t in model.tag_set], ensure_ascii=False),
             "config\t" + json.dumps(model.config.to_dict(), sort_keys=True),
             f"space\t{len(model.space)}"]
    for key in model.space.keys:
        if any(c in key for c in "\t\n\r"):
            raise ValueError(f"feature key contains a tab or newline: {key!r}")
        lines.append(key)
    lines.append("weights")
    for k, tag in enumerate(model.tag_set):
        lines.append(f"{tag.id}\t{_fmt(model.bias[k])}\t" + " ".join(_fmt(w) for w in model.weights[k]))
    lines.append("end")
    return "\n".join(lines) + "\n"


def save(model: LinearModel, path: str | Path) -> None:
    """Write the versioned UTF-8 text format (17 significant digits per weight)."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(dumps(model))


def loads(text: str, source: str = "<string>") -> LinearModel:
    lines = text.split("\n")
    pos = 0

    def take(prefix=None):
        nonlocal pos
        if pos >= len(lines) or (pos == len(lines) - 1 and lines[pos] == ""):
            raise DataFormatError("truncated model file", path=source, line=pos + 1)
        line = lines[pos]
        pos += 1
        if prefix is not None:
            head, sep, rest = line.partition("\t")
            if head != prefix or not sep:
                raise DataFormatError(f"expected '{prefix}' record", path=source, line=pos)
            return rest
        return line

    def finite(s):
        try:
            x = float(s)
        except ValueError:
            raise DataFormatError(f"bad number {s!r}", path=source, line=pos) from None
        if not math.isfinite(x):
            raise DataFormatError("non-finite value", path=source, line=pos)
        return x

    header = take()
    magic, _, version = header.partition(" ")
    if magic != MAGIC:
        raise DataFormatError("not a model file", path=source, line=1)
    if version != f"v{FORMAT_VERSION}":
        raise DataFormatError(f"unsupported model version {version!r} (expected v{FORMAT_VERSION})",
                              path=source, line=1)
    ids = take("tags").split("\t")
    try:
        names = json.loads(take("names"))
        config = FeatureConfig.from_dict(json.loads(take("config")))
        tags = tuple(DialectTag(i, nm) for i, nm in zip(ids, names, strict=True))
    except (ValueError, ConfigurationError) as exc:
        raise DataFormatError(f"bad header: {exc}", path=source, line=pos) from None
    try:
        size = int(take("space"))
    except ValueError:
        raise DataFormatError("bad space size", path=source, line=pos) from None
    keys = [take() for _ in range(size)]
    if len(set(keys)) != size:
        raise DataFormatError("duplicate feature keys", path=source, line=pos)
    space = FeatureSpace(keys, frozen=True)
    if take() != "weights":
        raise DataFormatError("expected 'weights' record", path=source, line=pos)
    weights = np.zeros((len(tags), size))
    bias = np.zeros(len(tags))
    for k, tag in enumerate(tags):
        rest = take(tag.id)
        b, _, ws = rest.partition("\t")
        bias[k] = finite(b)
        values = ws.split(" ") if ws else []
        if len(values) != size:
            raise DataFormatError(f"expected {size} weights, found {len(values)}", path=source, line=pos)
        weights[k] = [finite(v) for v in values]
    if take() != "end":
        raise DataFormatError("missing end marker", path=source, line=pos)
    return LinearModel(tags, weights, bias, space, config)


def load(path: str | Path) -> LinearModel:
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except UnicodeDecodeError:
        raise DataFormatError("invalid UTF-8", path=str(path)) from None
    return loads(text, str(path))
