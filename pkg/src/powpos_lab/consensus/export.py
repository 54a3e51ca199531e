"""Chain export as newline-delimited JSON, one block per line, genesis first."""

from __future__ import annotations

import json
from collections.abc import Iterable
from pathlib import Path
from typing import TextIO

from powpos_lab.chain.serialize import block_from_dict, block_to_dict
from powpos_lab.chain.types import Block
from powpos_lab.consensus.index import ChainIndex
from powpos_lab.hashing import HashAlgo


def chain_lines(blocks: Iterable[Block], algo: HashAlgo) -> Iterable[str]:
    for block in blocks:
        yield json.dumps(block_to_dict(block, algo), separators=(",", ":"))


def write_chain(index: ChainIndex, out: Path | TextIO) -> int:
    """Write the best chain; returns the number of blocks written."""
    blocks = index.blocks(index.best_chain())
    lines = chain_lines(blocks, index.params.hash_algo)
    if isinstance(out, Path):
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w", encoding="utf-8") as f:
            for line in lines:
                f.write(line + "\n")
    else:
        for line in lines:
            out.write(line + "\n")
    return len(blocks)


def read_chain(source: Path | Iterable[str]) -> list[Block]:
    if isinstance(source, Path):
        source = source.read_text(encoding="utf-8").splitlines()
    return [block_from_dict(json.loads(line)) for line in source if line.strip()]
