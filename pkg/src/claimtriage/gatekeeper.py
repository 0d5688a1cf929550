"""Hashed-feature softmax classifier over the six outcome classes.

Features are lowercase unigrams and space-joined bigrams of the claim-set
text, hashed into a fixed-width space with blake2b, weighted 1 + ln(tf) and
L2-normalized per row.  The model is a log-linear softmax trained by
full-batch gradient descent from zero init, so training is deterministic and
row-order invariant up to float summation.

Persistence is JSON with one entry per feature row that carries any nonzero
weight; files are byte-stable across runs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import sparse

from .claims import CLASS_ORDER, DatasetRecord, tokenize
from .errors import DimensionMismatch, EmptyTrainingSet, InvalidInput

DEFAULT_DIM = 2 ** 18
N_CLASSES = len(CLASS_ORDER)

MODEL_FORMAT = "gatekeeper-model/1"


@dataclass(frozen=True)
class TrainConfig:
    dim: int = DEFAULT_DIM
    epochs: int = 50
    step: float = 0.5
    l2: float = 1e-4
    seed: int = 0


@dataclass
class Model:
    dim: int
    classes: tuple[str, ...]
    weights: np.ndarray   # (dim, n_classes)
    bias: np.ndarray      # (n_classes,)
    meta: dict = field(default_factory=dict)


def hash_feature(feature: str, dim: int) -> int:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


def _features(text: str) -> list[str]:
    words = [w for w, _ in tokenize(text)]
    return words + [f"{a} {b}" for a, b in zip(words, words[1:])]


def featurize(texts: Sequence[str], dim: int = DEFAULT_DIM) -> sparse.csr_matrix:
    """Hashed sublinear-tf rows, L2-normalized; shape (len(texts), dim)."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for text in texts:
        counts: dict[int, int] = {}
        for feat in _features(text):
            col = hash_feature(feat, dim)
            counts[col] = counts.get(col, 0) + 1
        cols = sorted(counts)
        vals = np.array([1.0 + math.log(counts[c]) for c in cols])
        norm = math.sqrt(float(np.dot(vals, vals)))
        if norm > 0:
            vals /= norm
        indices.extend(cols)
        data.extend(vals.tolist())
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(texts), dim),
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def loss_and_grads(
    X: sparse.csr_matrix,
    y: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy with L2 on the weights (bias unregularized)."""
    n = X.shape[0]
    probs = softmax(X @ weights + bias)
    nll = -float(np.mean(np.log(probs[np.arange(n), y] + 0.0)))
    loss = nll + 0.5 * l2 * float(np.sum(weights * weights))
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    grad_w = (X.T @ delta) / n + l2 * weights
    grad_b = delta.mean(axis=0)
    return loss, np.asarray(grad_w), grad_b


def train_arrays(X: sparse.csr_matrix, y: np.ndarray, config: TrainConfig) -> Model:
    n = X.shape[0]
    if n == 0:
        raise EmptyTrainingSet("no training samples")
    if X.shape[1] != config.dim:
        raise DimensionMismatch(f"features have width {X.shape[1]}, config says {config.dim}")
    weights = np.zeros((config.dim, N_CLASSES))
    bias = np.zeros(N_CLASSES)
    for _ in range(config.epochs):
        _, grad_w, grad_b = loss_and_grads(X, y, weights, bias, config.l2)
        weights -= config.step * grad_w
        bias -= config.step * grad_b
    meta = {
        "epochs": config.epochs,
        "step": config.step,
        "l2": config.l2,
        "seed": config.seed,
        "n_train": int(n),
        "degenerate_labels": bool(len(np.unique(y)) < 2),
    }
    return Model(config.dim, CLASS_ORDER, weights, bias, meta)


def train(records: Sequence[DatasetRecord], config: TrainConfig = TrainConfig()) -> Model:
    X = featurize([r.text for r in records], config.dim)
    y = np.array([r.label.class_index for r in records], dtype=np.int64)
    return train_arrays(X, y, config)


def predict_from_features(model: Model, X: sparse.csr_matrix) -> np.ndarray:
    if X.shape[1] != model.dim:
        raise DimensionMismatch(
            f"features have width {X.shape[1]}, model expects {model.dim}"
        )
    return softmax(X @ model.weights + model.bias)


def predict_dist(model: Model, texts: Sequence[str]) -> np.ndarray:
    """Class distributions, shape (len(texts), n_classes); rows sum to 1."""
    return predict_from_features(model, featurize(texts, model.dim))


# --- persistence ---

def save_model(model: Model, path: str) -> None:
    rows = []
    nonzero = np.flatnonzero(np.any(model.weights != 0.0, axis=1))
    for idx in nonzero.tolist():
        rows.append([idx, [float(v) for v in model.weights[idx]]])
    doc = {
        "format": MODEL_FORMAT,
        "dim": model.dim,
        "classes": list(model.classes),
        "bias": [float(v) for v in model.bias],
        "weights": rows,
        "meta": model.meta,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def load_model(path: str) -> Model:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise InvalidInput(f"unrecognized model format in {path}")
    dim = int(doc["dim"])
    weights = np.zeros((dim, len(doc["classes"])))
    for idx, row in doc["weights"]:
        weights[int(idx)] = row
    return Model(dim, tuple(doc["classes"]), weights,
                 np.array(doc["bias"], dtype=float), dict(doc.get("meta", {})))


# --- external score files: CSV of id plus one probability per class ---

def write_scores(path: str, ids: Sequence[str], dists: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", *CLASS_ORDER])
        for rid, row in zip(ids, dists):
            writer.writerow([rid, *[repr(float(v)) for v in row]])


def load_scores(path: str) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "id" or tuple(header[1:]) != CLASS_ORDER:
            raise InvalidInput(f"unrecognized score header in {path}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 1 + N_CLASSES:
                raise InvalidInput(f"{path}:{lineno}: expected {1 + N_CLASSES} fields")
            try:
                probs = np.array([float(v) for v in row[1:]])
            except ValueError as exc:
                raise InvalidInput(f"{path}:{lineno}: {exc}") from exc
            if np.any(probs < 0) or not math.isclose(float(probs.sum()), 1.0, abs_tol=1e-6):
                raise InvalidInput(f"{path}:{lineno}: probabilities must be a distribution")
            out[row[0]] = probs
    return out


def align_scores(scores: Mapping[str, np.ndarray], ids: Sequence[str]) -> np.ndarray:
    missing = [rid for rid in ids if rid not in scores]
    if missing:
        raise InvalidInput(f"scores missing for {len(missing)} ids (first: {missing[0]})")
    return np.stack([scores[rid] for rid in ids]) if ids else np.zeros((0, N_CLASSES))
