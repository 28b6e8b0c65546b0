# sntool/data_io.py
"""
LibSVM text format, preprocessing and synthetic problems.

A data line is `<label> (<idx>:<val> )*` with 1-based, strictly increasing
indices; `#` starts a comment that runs to the end of the line. The loader
never rescales features: whatever file is supplied is used as is.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, List, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import DataError
from .model import GlmProblem, Loss, Regularizer
from .rng import make_rng

logger = logging.getLogger(__name__)


@dataclass
class RawDataset:
    """Rows as lists of (1-based index, value), labels as floats."""
    rows: List[List[Tuple[int, float]]] = field(default_factory=list)
    labels: List[float] = field(default_factory=list)
    max_index: int = 0

    @property
    def n(self) -> int:
        return len(self.labels)


@dataclass
class PreprocessOptions:
    add_intercept: bool = True
    map_labels: bool = True


# ---------------------------
# Parsing / serialization
# ---------------------------

def _parse_float(token: str, line_no: int, col: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise DataError(f"malformed number {token!r}", line=line_no, column=col) from None


def parse_libsvm(stream: IO[str] | Iterable[str]) -> RawDataset:
    """Parse LibSVM text. Errors report the 1-based line and column."""
    raw = RawDataset()
    for line_no, line in enumerate(stream, start=1):
        body = line.split("#", 1)[0]
        if not body.strip():
            continue

        # walk tokens keeping their column positions
        tokens = []
        pos = 0
        for token in body.split():
            pos = body.index(token, pos)
            tokens.append((token, pos + 1))
            pos += len(token)

        label_tok, label_col = tokens[0]
        if ":" in label_tok:
            raise DataError(f"expected a label, found {label_tok!r}", line=line_no, column=label_col)
        label = _parse_float(label_tok, line_no, label_col)

        row: List[Tuple[int, float]] = []
        last = 0
        for token, col in tokens[1:]:
            idx_str, sep, val_str = token.partition(":")
            if not sep or not idx_str or not val_str:
                raise DataError(f"malformed feature token {token!r}", line=line_no, column=col)
            try:
                idx = int(idx_str)
            except ValueError:
                raise DataError(f"malformed feature index {idx_str!r}", line=line_no, column=col) from None
            if idx < 1:
                raise DataError(f"feature index {idx} is below 1", line=line_no, column=col)
            if idx <= last:
                raise DataError(
                    f"feature indices must be strictly increasing ({idx} after {last})",
                    line=line_no, column=col,
                )
            value = _parse_float(val_str, line_no, col + len(idx_str) + 1)
            row.append((idx, value))
            last = idx

        raw.rows.append(row)
        raw.labels.append(label)
        raw.max_index = max(raw.max_index, last)

    logger.info("Parsed %d rows, max feature index %d", raw.n, raw.max_index)
    return raw


def _format_number(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def serialize_libsvm(raw: RawDataset, stream: IO[str]) -> None:
    """Write canonical LibSVM text (shortest round-trip float formatting)."""
    for label, row in zip(raw.labels, raw.rows):
        parts = [_format_number(label)]
        parts.extend(f"{idx}:{_format_number(val)}" for idx, val in row)
        stream.write(" ".join(parts) + "\n")


# ---------------------------
# Preprocessing
# ---------------------------

def preprocess(raw: RawDataset, opts: PreprocessOptions | None = None) -> Tuple[sp.csr_matrix, np.ndarray, int]:
    """
    Convert to 0-based CSR rows. With add_intercept the last coordinate of
    every row is 1.0; with map_labels the smallest label maps to -1 and the
    largest to +1.
    """
    opts = opts or PreprocessOptions()
    labels = np.asarray(raw.labels, dtype=float)

    if opts.map_labels:
        distinct = np.unique(labels)
        if distinct.size != 2:
            raise DataError(f"expected exactly two distinct labels, found {distinct.size}")
        labels = np.where(labels == distinct[0], -1.0, 1.0)

    d = raw.max_index + (1 if opts.add_intercept else 0)
    if d == 0:
        raise DataError("dataset has no features")
    indptr = [0]
    indices: List[int] = []
    data: List[float] = []
    for row in raw.rows:
        for idx, val in row:
            indices.append(idx - 1)
            data.append(val)
        if opts.add_intercept:
            indices.append(d - 1)
            data.append(1.0)
        indptr.append(len(indices))

    rows = sp.csr_matrix(
        (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(raw.n, d),
    )
    return rows, labels, d


def load_problem(
    path: str,
    loss: Loss | None = None,
    reg_kind: str = "l2",
    lam: float | None = None,
    delta: float = 1.0,
    opts: PreprocessOptions | None = None,
) -> GlmProblem:
    """Read a LibSVM file and build a GLM; lam defaults to 1/n."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = parse_libsvm(fh)
    except FileNotFoundError:
        raise DataError(f"dataset file not found: {path}") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from None
    rows, labels, _ = preprocess(raw, opts)
    n = rows.shape[0]
    if n == 0:
        raise DataError(f"dataset {path} has no rows")
    reg = Regularizer(reg_kind, 1.0 / n if lam is None else lam, delta)
    return GlmProblem(rows, labels, loss or Loss("logistic"), reg)


# ---------------------------
# Synthetic problems
# ---------------------------

LABEL_FLIP_RATE = 0.05


def synth_logistic(n: int, d: int, seed: int, margin_scale: float = 1.0) -> GlmProblem:
    """
    Planted logistic problem: rows ~ N(0, 1) * margin_scale / sqrt(d), labels
    sign(<a_i, w_star>) with 5% flipped, L2 regularization with lam = 1/n.
    """
    if n < 2 or d < 1:
        raise DataError(f"synthetic problem needs n >= 2 and d >= 1, got n={n}, d={d}")
    rng = make_rng(seed)
    A = rng.standard_normal((n, d)) * (margin_scale / np.sqrt(d))
    w_star = rng.standard_normal(d)
    y = np.where(A @ w_star >= 0.0, 1.0, -1.0)
    flips = rng.random(n) < LABEL_FLIP_RATE
    y[flips] = -y[flips]
    return GlmProblem(sp.csr_matrix(A), y, Loss("logistic"), Regularizer("l2", 1.0 / n))


def synth_least_squares(n: int, d: int, seed: int, lam: float = 0.0, noise: float = 0.1) -> GlmProblem:
    """Squared-loss problem with Gaussian rows and a noisy planted response."""
    rng = make_rng(seed)
    A = rng.standard_normal((n, d)) / np.sqrt(d)
    w_star = rng.standard_normal(d)
    y = A @ w_star + noise * rng.standard_normal(n)
    return GlmProblem(sp.csr_matrix(A), y, Loss("squared"), Regularizer("l2", lam))
