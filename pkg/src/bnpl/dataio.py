"""Rankings ingestion and trace persistence.

Rankings travel as UTF-8 CSV with header ``list_id,rank,item``, one row per
choice, ranks contiguous from 1 within each list.  Traces are
newline-delimited JSON: a header record followed by one record per retained
iteration, each carrying a CRC-32 checksum so truncation or corruption is
detected on read.
"""

from __future__ import annotations

import csv
import json
import zlib
from typing import Sequence

import numpy as np

from .errors import DataError
from .plackett_luce import PartialRanking, RankingDataset
from .crm import ItemRegistry
from .summaries import McmcTrace

TRACE_VERSION = 1


def parse_rankings(path) -> RankingDataset:
    """Read a rankings CSV into a dataset.

    Lists and items are registered in first-appearance order.  Raises
    DataError with a line number for duplicate (list, rank) rows, duplicate
    items within a list, non-contiguous ranks, or an empty file.
    """
    lists: dict = {}
    order: list = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open rankings file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        if [h.strip() for h in header] != ["list_id", "rank", "item"]:
            raise DataError(f"{path}:1: expected header 'list_id,rank,item', "
                            f"got {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            list_id, rank_s, item = (f.strip() for f in row)
            try:
                rank = int(rank_s)
            except ValueError:
                raise DataError(f"{path}:{lineno}: rank {rank_s!r} is not an "
                                "integer") from None
            if rank < 1:
                raise DataError(f"{path}:{lineno}: rank must be >= 1, got {rank}")
            if list_id not in lists:
                lists[list_id] = {}
                order.append(list_id)
            if rank in lists[list_id]:
                raise DataError(f"{path}:{lineno}: duplicate rank {rank} in "
                                f"list {list_id!r}")
            lists[list_id][rank] = item
    if not lists:
        raise DataError(f"{path}: no ranking rows")

    registry = ItemRegistry()
    rankings = []
    for list_id in order:
        ranks = lists[list_id]
        m = len(ranks)
        missing = [i for i in range(1, m + 1) if i not in ranks]
        if missing:
            raise DataError(f"{path}: list {list_id!r} has {m} rows but is "
                            f"missing rank(s) {missing}: ranks must be "
                            "contiguous from 1")
        items = [ranks[i] for i in range(1, m + 1)]
        if len(set(items)) != len(items):
            raise DataError(f"{path}: list {list_id!r} ranks the same item twice")
        rankings.append(PartialRanking(tuple(registry.add(x) for x in items)))
    return RankingDataset(rankings, registry)


def write_rankings(dataset: RankingDataset, path, list_ids: Sequence | None = None):
    """Write a dataset back to the CSV schema (round-trips with
    ``parse_rankings``)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["list_id", "rank", "item"])
        for i, ranking in enumerate(dataset.rankings):
            list_id = list_ids[i] if list_ids is not None else f"l{i}"
            for rank, item in enumerate(ranking, start=1):
                writer.writerow([list_id, rank, dataset.registry.label_of(item)])


def _canonical(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def _with_crc(record: dict) -> str:
    payload = _canonical(record)
    return _canonical({**record, "crc": zlib.crc32(payload.encode())})


class TraceWriter:
    """Incremental newline-delimited trace writer (crash-safe appends:
    every record is flushed as one line)."""

    def __init__(self, path, model: str, seed: int, config_sha: str,
                 config: dict, item_labels: Sequence | None = None):
        self._fh = open(path, "w", encoding="utf-8")
        header = {"version": TRACE_VERSION, "model": model, "seed": int(seed),
                  "config_sha": config_sha, "config": config,
                  "items": list(item_labels) if item_labels is not None else None}
        self._fh.write(_with_crc(header) + "\n")
        self._fh.flush()

    def write(self, record: dict):
        self._fh.write(_with_crc(record) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def read_trace_records(path) -> tuple[dict, list[dict]]:
    """Read and checksum-verify a trace file; returns (header, records)."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: corrupt trace record "
                                f"(bad JSON: {exc})") from None
            crc = rec.pop("crc", None)
            if crc != zlib.crc32(_canonical(rec).encode()):
                raise DataError(f"{path}:{lineno}: trace checksum mismatch")
            records.append(rec)
    if not records:
        raise DataError(f"{path}: empty trace")
    header, body = records[0], records[1:]
    if header.get("version") != TRACE_VERSION:
        raise DataError(f"{path}: unsupported trace version {header.get('version')!r}")
    return header, body


def read_trace(path) -> McmcTrace:
    """Load a persisted trace into an McmcTrace."""
    header, body = read_trace_records(path)
    if not body:
        raise DataError(f"{path}: trace has a header but no iteration records")
    iters = np.array([r["iter"] for r in body])
    model = header["model"]
    kwargs = dict(iterations=iters, model=model, seed=header["seed"],
                  config=header.get("config") or {},
                  item_labels=header.get("items") or [])
    if model == "mixture":
        kwargs["assignments"] = np.array([r["c"] for r in body], dtype=np.int64)
        kwargs["n_clusters"] = np.array([r["J"] for r in body])
        kwargs["phi"] = np.array([r["phi"] for r in body])
        kwargs["gamma_dp"] = np.array([r["gamma"] for r in body])
        kwargs["alpha"] = np.array([r["alpha"] for r in body])
    else:
        kwargs["alpha"] = np.array([r["alpha"] for r in body])
        kwargs["weights"] = np.array([r["weights"] for r in body])
        kwargs["residuals"] = np.array([r["residual"] for r in body])
    return McmcTrace(**kwargs)
