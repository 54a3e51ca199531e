from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

from powpos_lab.chain.types import StakeEntry, Vote


@dataclass(frozen=True, slots=True)
class Ballot:
    votes: tuple[Vote, ...]
    missed: tuple[str, ...]


def cast_votes(
    selected: Sequence[StakeEntry],
    candidate: bytes,
    online: Mapping[str, bool],
) -> Ballot:
    """Collect approve-votes from the selected entries whose owner or delegate is online.

    Entries with nobody online to sign are reported as missed; the ledger moves
    them to MISSED when the block is applied.
    """
    votes: list[Vote] = []
    missed: list[str] = []
    for entry in selected:
        if online.get(entry.owner, False):
            votes.append(Vote(entry_id=entry.id, voter=entry.owner, candidate=candidate))
        elif entry.delegate is not None and online.get(entry.delegate, False):
            votes.append(
                Vote(entry_id=entry.id, voter=entry.delegate, candidate=candidate)
            )
        else:
            missed.append(entry.id)
    return Ballot(votes=tuple(votes), missed=tuple(missed))
