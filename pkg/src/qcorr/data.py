"""Datasets of fixed-length categorical sequences.

Parsers for the three benchmark formats plus a generic CSV, a seeded
train/test split, deterministic mini-batching and synthetic data drawn
from trained models.  A dataset is an immutable ``(K, n)`` integer array
with symbols ``0..M-1`` and a free-form provenance string.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Union

import numpy as np

PathLike = Union[str, Path]

BIOFAM_POSITIONS = 16
BIOFAM_STATES = 8
SPECT_COLUMNS = 23
PROMOTER_LENGTH = 57
NUCLEOTIDES = "acgt"


class DataFormatError(ValueError):
    """Malformed input; ``line`` is 1-based (0 when not tied to a line)."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    M: int
    n: int
    sequences: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        seqs = np.array(self.sequences, dtype=np.int64)
        if seqs.ndim != 2:
            raise ValueError(f"sequences must be 2-d, got shape {seqs.shape}")
        if seqs.shape[1] != self.n:
            raise ValueError(f"sequences have length {seqs.shape[1]}, expected {self.n}")
        if self.M < 1 or self.n < 1:
            raise ValueError("M and n must be positive")
        if seqs.size and (seqs.min() < 0 or seqs.max() >= self.M):
            raise ValueError(f"symbols must lie in [0, {self.M})")
        seqs.setflags(write=False)
        object.__setattr__(self, "sequences", seqs)

    @property
    def K(self) -> int:
        return self.sequences.shape[0]

    def __len__(self) -> int:
        return self.K


def as_sequences(data) -> np.ndarray:
    """``(K, n)`` int64 view of a :class:`Dataset` or array-like."""
    if isinstance(data, Dataset):
        return data.sequences
    seqs = np.asarray(data)
    if seqs.ndim == 1:
        seqs = seqs[None, :]
    if seqs.ndim != 2:
        raise ValueError(f"expected a 2-d array of sequences, got shape {seqs.shape}")
    if seqs.size and not np.issubdtype(seqs.dtype, np.integer):
        if not np.all(seqs == np.round(seqs)):
            raise ValueError("sequences must hold integer symbols")
    return seqs.astype(np.int64, copy=False)


def _read_lines(path: PathLike) -> list[str]:
    return Path(path).read_text().splitlines()


def _int_row(fields: list[str], lineno: int) -> list[int]:
    try:
        return [int(f.strip()) for f in fields]
    except ValueError:
        raise DataFormatError(f"non-integer field in {fields!r}", lineno) from None


def _looks_like_header(fields: list[str]) -> bool:
    return any(f.strip() and not f.strip().lstrip("-").isdigit() for f in fields)


def load_csv(path: PathLike, M: int | None = None, name: str | None = None) -> Dataset:
    """Generic format: one sequence per line, comma-separated integer symbols.

    Lines starting with ``#`` are comments; a comment of the form
    ``# M=4 n=10`` declares the alphabet size and the length.  Without a
    declaration ``M`` defaults to ``max + 1``.
    """
    declared: dict[str, int] = {}
    rows = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        text = line.strip()
        if not text:
            continue
        if text.startswith("#"):
            for tok in text[1:].split():
                key, sep, val = tok.partition("=")
                if sep and key in ("M", "n") and val.isdigit():
                    declared[key] = int(val)
            continue
        row = _int_row(text.split(","), lineno)
        if rows and len(row) != len(rows[0]):
            raise DataFormatError(f"expected {len(rows[0])} symbols, got {len(row)}", lineno)
        if "n" in declared and len(row) != declared["n"]:
            raise DataFormatError(f"expected {declared['n']} symbols, got {len(row)}", lineno)
        if min(row) < 0:
            raise DataFormatError("negative symbol", lineno)
        rows.append(row)
    if not rows:
        raise DataFormatError("no sequences found")
    seqs = np.array(rows, dtype=np.int64)
    M = M if M is not None else declared.get("M", int(seqs.max()) + 1)
    if seqs.max() >= M:
        bad = int(np.argmax(seqs.max(axis=1) >= M))
        raise DataFormatError(f"symbol {int(seqs[bad].max())} outside alphabet of size {M}")
    return Dataset(name or Path(path).stem, int(M), seqs.shape[1], seqs, f"csv:{path}")


def load_biofam(path: PathLike) -> Dataset:
    """Family life-course states: 16 yearly states (ages 15-30), values 0-7.

    Expected layout is one individual per line with 16 comma-separated
    integer columns, an optional header line being skipped.  From R::

        library(TraMineR); data(biofam)
        write.csv(biofam[, paste0("a", 15:30)], "biofam.csv", row.names = FALSE)
    """
    rows = []
    for lineno, fields in enumerate(csv.reader(io.StringIO(Path(path).read_text())), start=1):
        if not fields or not "".join(fields).strip():
            continue
        if lineno == 1 and _looks_like_header(fields):
            continue
        if len(fields) != BIOFAM_POSITIONS:
            raise DataFormatError(f"expected {BIOFAM_POSITIONS} columns, got {len(fields)}", lineno)
        row = _int_row(fields, lineno)
        if min(row) < 0 or max(row) >= BIOFAM_STATES:
            raise DataFormatError(f"state outside 0..{BIOFAM_STATES - 1}", lineno)
        rows.append(row)
    if not rows:
        raise DataFormatError("no sequences found")
    return Dataset("biofam", BIOFAM_STATES, BIOFAM_POSITIONS, np.array(rows), f"biofam:{path}")


def load_spect(paths) -> Dataset:
    """SPECT heart data: 23 binary columns (diagnosis first) per line.

    Accepts one path or several (the train and test files are usually
    concatenated).  The diagnosis is kept as the first symbol.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    rows = []
    for path in paths:
        for lineno, line in enumerate(_read_lines(path), start=1):
            if not line.strip():
                continue
            fields = line.strip().split(",")
            if len(fields) != SPECT_COLUMNS:
                raise DataFormatError(f"{path}: expected {SPECT_COLUMNS} columns, got {len(fields)}", lineno)
            row = _int_row(fields, lineno)
            if any(v not in (0, 1) for v in row):
                raise DataFormatError(f"{path}: non-binary value", lineno)
            rows.append(row)
    if not rows:
        raise DataFormatError("no sequences found")
    prov = "spect:" + ",".join(str(p) for p in paths)
    return Dataset("spect", 2, SPECT_COLUMNS, np.array(rows), prov)


def load_promoter(path: PathLike) -> Dataset:
    """E. coli promoter sequences: ``class,name,sequence`` with 57 nucleotides.

    The sequence field is lower-cased and stripped of whitespace (tabs
    included); ``a, c, g, t`` map to ``0..3``.  The class label is dropped.
    """
    table = {c: i for i, c in enumerate(NUCLEOTIDES)}
    rows = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 3:
            raise DataFormatError(f"expected 3 fields, got {len(fields)}", lineno)
        seq = "".join(fields[2].split()).lower()
        if len(seq) != PROMOTER_LENGTH:
            raise DataFormatError(f"expected {PROMOTER_LENGTH} nucleotides, got {len(seq)}", lineno)
        try:
            rows.append([table[c] for c in seq])
        except KeyError as exc:
            raise DataFormatError(f"unknown nucleotide {exc.args[0]!r}", lineno) from None
    if not rows:
        raise DataFormatError("no sequences found")
    return Dataset("promoter", 4, PROMOTER_LENGTH, np.array(rows), f"promoter:{path}")


LOADERS = {
    "generic-csv": load_csv,
    "biofam": load_biofam,
    "spect": load_spect,
    "promoter": load_promoter,
}


def load_sequences(path, format: str = "generic-csv") -> Dataset:
    try:
        loader = LOADERS[format]
    except KeyError:
        raise ValueError(f"unknown dataset format {format!r}; choose from {sorted(LOADERS)}") from None
    return loader(path)


def save_csv(ds: Dataset, path: PathLike, comment: str | None = None) -> None:
    """Write in the generic format, declaring ``M`` and ``n`` in a header."""
    lines = []
    if comment:
        lines.extend("# " + c for c in comment.splitlines())
    lines.append(f"# M={ds.M} n={ds.n}")
    lines.extend(",".join(map(str, row)) for row in ds.sequences.tolist())
    Path(path).write_text("\n".join(lines) + "\n")


def split(ds: Dataset, test_frac: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded random partition; the test side gets ``round(test_frac * K)`` rows."""
    if not 0.0 < test_frac < 1.0:
        raise ValueError("test_frac must lie strictly between 0 and 1")
    if ds.K == 0:
        raise ValueError("cannot split an empty dataset")
    perm = np.random.default_rng(seed).permutation(ds.K)
    n_test = int(round(test_frac * ds.K))
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    prov = f"{ds.provenance}|split(frac={test_frac},seed={seed})"
    return (
        Dataset(ds.name, ds.M, ds.n, ds.sequences[train_idx], prov + ":train"),
        Dataset(ds.name, ds.M, ds.n, ds.sequences[test_idx], prov + ":test"),
    )


def minibatches(data, batch_size: int, seed: int, epoch: int) -> Iterator[np.ndarray]:
    """Shuffled batches for one epoch; the order depends only on ``(seed, epoch)``.

    The last batch is short when ``batch_size`` does not divide ``K``.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    seqs = as_sequences(data)
    perm = np.random.default_rng([seed, epoch]).permutation(seqs.shape[0])
    for start in range(0, len(perm), batch_size):
        yield seqs[perm[start : start + batch_size]]


def synth_from_model(model, K: int, n: int, seed: int, name: str = "synthetic") -> Dataset:
    """Draw ``K`` sequences of length ``n`` from an HMM or BBQC model.

    The provenance records the model kind, the sha256 of its JSON
    checkpoint and the seed, which is everything needed to regenerate it.
    """
    from qcorr import bbqc, hmm

    if K < 1 or n < 1:
        raise ValueError("K and n must be positive")
    rng = np.random.default_rng(seed)
    if isinstance(model, hmm.Hmm):
        seqs = hmm.sample_hmm_batch(model, K, n, rng)
        doc = model.to_json()
        kind = "hmm"
    elif isinstance(model, bbqc.BbqcModel):
        seqs = bbqc.sample_bbqc_batch(model, K, n, rng)
        doc = model.to_json()
        kind = "bbqc"
    else:
        raise TypeError(f"cannot sample from {type(model).__name__}")
    digest = hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()
    prov = f"synth:{kind}:sha256={digest}:seed={seed}"
    return Dataset(name, model.M, n, seqs, prov)
