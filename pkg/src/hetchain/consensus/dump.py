"""Chain dump files.

Layout::

    magic b"HETCHAIN-DUMP\\0" | version u32 (=1) | blob(meta JSON)
    | n_blocks u32 | (blob(block) | blob(verdict JSON))*

``meta`` holds the protocol parameters, the premine allocations (address
bytes in hex) and, for the test signature scheme, the key registry.  Each
verdict entry is the recording observer's ``[[height, status, rule], ...]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from ..codec import DecodeError, Reader, Writer
from ..ledger import Address
from .block import Block
from .rules import Params

MAGIC = b"HETCHAIN-DUMP\x00"
VERSION = 1


@dataclass
class Dump:
    params: Params
    premine: list[tuple[Address, int]]
    blocks: list[Block]
    verdicts: list[list] = field(default_factory=list)
    registry: dict[bytes, bytes] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def encode_dump(dump: Dump) -> bytes:
    meta = dict(dump.meta)
    meta["params"] = dump.params.to_dict()
    meta["premine"] = [{"address": a.to_bytes().hex(), "amount": n} for a, n in dump.premine]
    meta["registry"] = {k.hex(): v.hex() for k, v in sorted(dump.registry.items())}
    w = Writer().raw(MAGIC).u32(VERSION)
    w.blob(json.dumps(meta, sort_keys=True).encode())
    w.u32(len(dump.blocks))
    for i, block in enumerate(dump.blocks):
        w.blob(block.to_bytes())
        v = dump.verdicts[i] if i < len(dump.verdicts) else []
        w.blob(json.dumps(v).encode())
    return w.getvalue()


def decode_dump(data: bytes) -> Dump:
    r = Reader(data)
    if r.raw(len(MAGIC)) != MAGIC:
        raise DecodeError("not a chain dump")
    if r.u32() != VERSION:
        raise DecodeError("unsupported dump version")
    meta = json.loads(r.blob())
    params = Params(**meta.pop("params"))
    premine = []
    for entry in meta.pop("premine"):
        ar = Reader(bytes.fromhex(entry["address"]))
        premine.append((Address.decode(ar), entry["amount"]))
    registry = {bytes.fromhex(k): bytes.fromhex(v) for k, v in meta.pop("registry", {}).items()}
    blocks, verdicts = [], []
    for _ in range(r.u32()):
        raw = r.blob()
        try:
            blocks.append(Block.from_bytes(raw))
        except (DecodeError, ValueError) as exc:
            raise DecodeError(f"block {len(blocks)}: {exc}") from exc
        verdicts.append(json.loads(r.blob()))
    r.expect_done()
    return Dump(params, premine, blocks, verdicts, registry, meta)


def write_dump(path: Path | str, dump: Dump) -> None:
    Path(path).write_bytes(encode_dump(dump))


def read_dump(path: Path | str) -> Dump:
    return decode_dump(Path(path).read_bytes())
