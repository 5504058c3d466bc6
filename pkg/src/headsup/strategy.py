"""Strategy tables and their versioned on-disk format.

A table maps infoset keys to action labels and a probability vector.  The
file layout is: magic ``HUS1``, then a JSON header (spec hash, abstraction
hash, iteration count, variant, seed), then records sorted by key.  Numeric
payloads are little-endian float64.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

MAGIC = b"HUS1"


class StrategyFormatError(ValueError):
    """Raised on malformed or mismatched strategy files."""


@dataclass
class StrategyTable:
    """Infoset key -> (action labels, probabilities)."""

    entries: dict[str, tuple[tuple[str, ...], list[float]]] = field(default_factory=dict)
    spec_hash: str = ""
    abstraction_hash: str = ""
    iterations: int = 0
    variant: str = ""
    seed: int | None = None

    def probs(self, key: str) -> list[float]:
        try:
            return self.entries[key][1]
        except KeyError:
            raise KeyError(f"strategy table has no infoset {key!r}") from None

    def labels(self, key: str) -> tuple[str, ...]:
        try:
            return self.entries[key][0]
        except KeyError:
            raise KeyError(f"strategy table has no infoset {key!r}") from None

    def prob(self, key: str, label: str) -> float:
        labels, probs = self.entries[key]
        try:
            return probs[labels.index(label)]
        except ValueError:
            raise KeyError(f"infoset {key!r} has no action {label!r}") from None

    def set(self, key: str, labels: tuple[str, ...], probs: list[float]) -> None:
        self.entries[key] = (labels, list(probs))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: str) -> bool:
        return key in self.entries


def save_strategy(table: StrategyTable, path: str | Path) -> None:
    buf = io.BytesIO()
    buf.write(MAGIC)
    header = json.dumps(
        {
            "spec_hash": table.spec_hash,
            "abstraction_hash": table.abstraction_hash,
            "iterations": table.iterations,
            "variant": table.variant,
            "seed": table.seed,
            "entries": len(table.entries),
        },
        sort_keys=True,
    ).encode()
    buf.write(struct.pack("<I", len(header)))
    buf.write(header)
    for key in sorted(table.entries):
        labels, probs = table.entries[key]
        kb = key.encode()
        buf.write(struct.pack("<H", len(kb)))
        buf.write(kb)
        buf.write(struct.pack("<B", len(labels)))
        for lbl in labels:
            lb = lbl.encode()
            buf.write(struct.pack("<B", len(lb)))
            buf.write(lb)
        buf.write(struct.pack(f"<{len(probs)}d", *probs))
    Path(path).write_bytes(buf.getvalue())


def load_strategy(path: str | Path) -> StrategyTable:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise StrategyFormatError(f"bad magic in {path}")
    off = 4
    (hlen,) = struct.unpack_from("<I", data, off)
    off += 4
    header = json.loads(data[off : off + hlen].decode())
    off += hlen
    table = StrategyTable(
        spec_hash=header["spec_hash"],
        abstraction_hash=header["abstraction_hash"],
        iterations=header["iterations"],
        variant=header.get("variant", ""),
        seed=header.get("seed"),
    )
    for _ in range(header["entries"]):
        (klen,) = struct.unpack_from("<H", data, off)
        off += 2
        key = data[off : off + klen].decode()
        off += klen
        (n,) = struct.unpack_from("<B", data, off)
        off += 1
        labels = []
        for _ in range(n):
            (llen,) = struct.unpack_from("<B", data, off)
            off += 1
            labels.append(data[off : off + llen].decode())
            off += llen
        probs = list(struct.unpack_from(f"<{n}d", data, off))
        off += 8 * n
        table.entries[key] = (tuple(labels), probs)
    if off != len(data):
        raise StrategyFormatError(f"trailing bytes in {path}")
    return table


def uniform_table_for(infosets: dict) -> StrategyTable:
    """Uniform policy over a tree's infoset records (testing convenience)."""
    table = StrategyTable(variant="uniform")
    for key, rec in infosets.items():
        n = len(rec.labels)
        table.set(key, rec.labels, [1.0 / n] * n)
    return table
