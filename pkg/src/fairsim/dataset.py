"""LETOR-format ingestion and synthetic dataset generation.

Queries hold graded items in file order; that order is the canonical item
identity used for tie-breaking everywhere downstream. Feature vectors are
parsed and retained for format fidelity but no ranking policy consumes them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PARTITIONS = ("train", "valid", "test")


class LetorParseError(ValueError):
    """Malformed LETOR input; carries the 1-indexed offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class ItemRecord:
    item_id: str
    grade: int
    features: tuple[float, ...] | None = None


@dataclass(frozen=True)
class QueryInstance:
    query_id: str
    items: tuple[ItemRecord, ...]
    partition: str

    def __post_init__(self):
        if not self.items:
            raise ValueError(f"query {self.query_id} has no items")
        ids = [it.item_id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate item ids in query {self.query_id}")
        if self.partition not in PARTITIONS:
            raise ValueError(f"unknown partition {self.partition!r}")

    @property
    def n(self) -> int:
        return len(self.items)

    def grades(self) -> np.ndarray:
        return np.array([it.grade for it in self.items], dtype=int)


@dataclass(frozen=True)
class Dataset:
    queries: dict[str, QueryInstance]
    y_max: int
    name: str = "dataset"

    def __post_init__(self):
        for q in self.queries.values():
            for it in q.items:
                if it.grade < 0 or it.grade > self.y_max:
                    raise ValueError(
                        f"grade {it.grade} outside [0, {self.y_max}] in query {q.query_id}"
                    )

    def partition_ids(self, partition: str) -> list[str]:
        if partition not in PARTITIONS:
            raise ValueError(f"unknown partition {partition!r}")
        return [qid for qid, q in self.queries.items() if q.partition == partition]


def split_counts(n_queries: int) -> tuple[int, int, int]:
    """Train/valid/test sizes under the 60/20/20 scheme (test takes the remainder)."""
    n_train = int(n_queries * 0.6)
    n_valid = int(n_queries * 0.2)
    return n_train, n_valid, n_queries - n_train - n_valid


def _partition_of(index: int, n_queries: int) -> str:
    n_train, n_valid, _ = split_counts(n_queries)
    if index < n_train:
        return "train"
    if index < n_train + n_valid:
        return "valid"
    return "test"


def parse_letor(
    source,
    y_max: int | None = None,
    name: str = "letor",
    partition: str | None = None,
) -> Dataset:
    """Parse LETOR/SVMlight-style text into a Dataset.

    Each non-empty line reads `<grade> qid:<id> [<fid>:<val>]... [# comment]`.
    Items keep file order within their query; item ids are positional (`d0`,
    `d1`, ...). Feature vectors are dense over the observed feature ids with
    zero fill. When `partition` is None queries are split 60/20/20 in order of
    first appearance, otherwise every query lands in the given partition.

    `source` may be bytes, text, or a readable file object (UTF-8, LF or CRLF).
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    elif hasattr(source, "read"):
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    else:
        raise TypeError(f"unsupported source type {type(source)!r}")

    per_query: dict[str, list[tuple[int, dict[int, float]]]] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        tokens = body.split()
        if len(tokens) < 2:
            raise LetorParseError(line_no, f"expected '<grade> qid:<id> ...', got {line!r}")
        try:
            grade = int(tokens[0])
        except ValueError:
            raise LetorParseError(line_no, f"bad grade {tokens[0]!r}") from None
        if grade < 0:
            raise LetorParseError(line_no, f"negative grade {grade}")
        if y_max is not None and grade > y_max:
            raise LetorParseError(line_no, f"grade {grade} exceeds declared y_max {y_max}")
        if not tokens[1].startswith("qid:") or len(tokens[1]) <= 4:
            raise LetorParseError(line_no, f"expected qid:<id>, got {tokens[1]!r}")
        qid = tokens[1][4:]
        feats: dict[int, float] = {}
        for tok in tokens[2:]:
            fid_s, _, val_s = tok.partition(":")
            try:
                fid = int(fid_s)
                val = float(val_s)
            except ValueError:
                raise LetorParseError(line_no, f"bad feature token {tok!r}") from None
            if fid < 1:
                raise LetorParseError(line_no, f"feature ids start at 1, got {fid}")
            feats[fid] = val
        per_query.setdefault(qid, []).append((grade, feats))

    n_features = max((fid for rows in per_query.values() for _, f in rows for fid in f), default=0)
    queries: dict[str, QueryInstance] = {}
    for idx, (qid, rows) in enumerate(per_query.items()):
        items = []
        for pos, (grade, feats) in enumerate(rows):
            vec = None
            if n_features:
                vec = tuple(feats.get(fid, 0.0) for fid in range(1, n_features + 1))
            items.append(ItemRecord(item_id=f"d{pos}", grade=grade, features=vec))
        part = partition if partition is not None else _partition_of(idx, len(per_query))
        queries[qid] = QueryInstance(query_id=qid, items=tuple(items), partition=part)

    if y_max is None:
        y_max = max((it.grade for q in queries.values() for it in q.items), default=0)
        y_max = max(y_max, 1)
    return Dataset(queries=queries, y_max=y_max, name=name)


def dump_letor(dataset: Dataset) -> str:
    """Serialize a Dataset back to LETOR text (inverse of parse_letor on content)."""
    lines = []
    for qid, query in dataset.queries.items():
        for item in query.items:
            parts = [str(item.grade), f"qid:{qid}"]
            if item.features:
                parts.extend(f"{fid}:{val!r}" for fid, val in enumerate(item.features, start=1))
            lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def generate_synthetic(
    n_queries: int,
    docs_per_query: int,
    y_max: int,
    seed: int,
) -> Dataset:
    """Generate a synthetic dataset with uniform grades and a 60/20/20 split.

    Deterministic given the seed; grades are drawn uniformly from [0, y_max].
    """
    if n_queries < 1 or docs_per_query < 1:
        raise ValueError("n_queries and docs_per_query must be >= 1")
    if y_max < 1:
        raise ValueError(f"y_max must be >= 1, got {y_max}")
    rng = np.random.default_rng(seed)
    grades = rng.integers(0, y_max + 1, size=(n_queries, docs_per_query))
    queries: dict[str, QueryInstance] = {}
    for i in range(n_queries):
        items = tuple(
            ItemRecord(item_id=f"d{j}", grade=int(grades[i, j])) for j in range(docs_per_query)
        )
        qid = f"q{i}"
        queries[qid] = QueryInstance(
            query_id=qid, items=items, partition=_partition_of(i, n_queries)
        )
    return Dataset(
        queries=queries,
        y_max=y_max,
        name=f"synthetic-{n_queries}x{docs_per_query}-y{y_max}-s{seed}",
    )
