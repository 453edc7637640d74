"""Reader and writer for the LIBSVM sparse text format."""
from __future__ import annotations

import numpy as np

from .design import SparseDesignMatrix


class LibsvmFormatError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _parse_label(tok: str, lineno: int) -> float:
    try:
        y = float(tok)
    except ValueError:
        raise LibsvmFormatError(lineno, f"bad label {tok!r}") from None
    if y == 0.0:
        return -1.0
    if y in (1.0, -1.0):
        return y
    raise LibsvmFormatError(lineno, f"label {tok!r} outside {{-1, 0, +1}}")


def _parse_target(tok: str, lineno: int) -> float:
    try:
        y = float(tok)
    except ValueError:
        raise LibsvmFormatError(lineno, f"bad target {tok!r}") from None
    if not np.isfinite(y):
        raise LibsvmFormatError(lineno, f"non-finite target {tok!r}")
    return y


def parse_libsvm(path, n_features: int | None = None, binary: bool = True):
    """Read ``label idx:val ...`` lines into a design matrix and labels.

    Indices are 1-based in the file and 0-based in the result.  Blank lines
    and lines starting with ``#`` are skipped.  With ``binary=True`` labels
    must be -1, 0 or +1 and 0 maps to -1; otherwise any finite real target
    is accepted (least-squares data).

    Returns
    -------
    A : SparseDesignMatrix
    b : ndarray
    """
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    labels: list[float] = []
    max_col = -1
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            toks = line.split()
            labels.append(_parse_label(toks[0], lineno) if binary else _parse_target(toks[0], lineno))
            prev = -1
            for tok in toks[1:]:
                idx, sep, val = tok.partition(":")
                if not sep:
                    raise LibsvmFormatError(lineno, f"expected idx:val, got {tok!r}")
                try:
                    col = int(idx) - 1
                    v = float(val)
                except ValueError:
                    raise LibsvmFormatError(lineno, f"bad feature {tok!r}") from None
                if col < 0:
                    raise LibsvmFormatError(lineno, f"feature index {idx} must be >= 1")
                if col <= prev:
                    raise LibsvmFormatError(lineno, "feature indices must be strictly increasing")
                if not np.isfinite(v):
                    raise LibsvmFormatError(lineno, f"non-finite value {val!r}")
                prev = col
                indices.append(col)
                data.append(v)
            max_col = max(max_col, prev)
            indptr.append(len(indices))
    if not labels:
        raise ValueError(f"{path}: no samples")
    N = max_col + 1 if n_features is None else int(n_features)
    if N < max_col + 1:
        raise ValueError(f"n_features={N} smaller than largest index {max_col + 1}")
    A = SparseDesignMatrix(indptr, indices, data, (len(labels), max(N, 1)))
    return A, np.array(labels)


def write_libsvm(path, A: SparseDesignMatrix, b) -> None:
    """Write rows of ``A`` with labels ``b`` (values kept at full precision)."""
    csr = A.csr
    b = np.asarray(b, dtype=float)
    with open(path, "w") as fh:
        for i in range(A.shape[0]):
            lo, hi = csr.indptr[i], csr.indptr[i + 1]
            label = f"{b[i]:+g}" if b[i] in (1.0, -1.0) else repr(float(b[i]))
            feats = " ".join(f"{j + 1}:{float(v)!r}" for j, v in zip(csr.indices[lo:hi], csr.data[lo:hi]))
            fh.write(f"{label} {feats}\n" if feats else f"{label}\n")
