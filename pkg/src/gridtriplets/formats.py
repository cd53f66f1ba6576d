"""Shared on-disk formats: triplet CSV and embedding CSV.

Triplets: UTF-8 CSV, header ``probe,near,far``, one zero-based triplet
per row.  Embeddings: header ``id,x0,...,x{d-1}`` with ids dense from 0.
Floats are written with repr() so a round trip is bit-exact; all files
use "\\n" line endings so byte-level comparisons are stable.
"""

from __future__ import annotations

import csv
import io
from typing import Iterable

import numpy as np

from .embedding import Embedding, Triplet
from .errors import ParseError

TRIPLET_HEADER = ["probe", "near", "far"]


def triplets_csv_text(triplets: Iterable[Triplet]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRIPLET_HEADER)
    for t in triplets:
        writer.writerow([t.probe, t.near, t.far])
    return buf.getvalue()


def write_triplets_csv(triplets: Iterable[Triplet], path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(triplets_csv_text(triplets))


def read_triplets_csv(path) -> list[Triplet]:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_triplets_csv(fh)


def parse_triplets_csv(fh) -> list[Triplet]:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty triplet file", line=1) from None
    if header != TRIPLET_HEADER:
        raise ParseError(f"expected header {','.join(TRIPLET_HEADER)}, got {header!r}", line=1)
    out = []
    for line_no, row in enumerate(reader, start=2):
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", line=line_no)
        try:
            probe, near, far = (int(v) for v in row)
        except ValueError:
            raise ParseError(f"non-integer triplet row {row!r}", line=line_no) from None
        if len({probe, near, far}) != 3 or min(probe, near, far) < 0:
            raise ParseError(f"invalid triplet {row!r}", line=line_no)
        out.append(Triplet(probe, near, far))
    return out


def write_embedding_csv(emb: Embedding, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id"] + [f"x{j}" for j in range(emb.dim)])
        for i, row in enumerate(emb.coords):
            writer.writerow([i] + [repr(float(v)) for v in row])


def read_embedding_csv(path) -> Embedding:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty embedding file", line=1) from None
        if len(header) < 2 or header[0] != "id":
            raise ParseError(f"expected header id,x0,..., got {header!r}", line=1)
        dim = len(header) - 1
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != dim + 1:
                raise ParseError(f"expected {dim + 1} fields, got {len(row)}", line=line_no)
            if int(row[0]) != len(rows):
                raise ParseError(f"ids must be dense from 0, got {row[0]}", line=line_no)
            rows.append([float(v) for v in row[1:]])
    if not rows:
        raise ParseError("embedding file has no rows", line=2)
    return Embedding(np.array(rows))
