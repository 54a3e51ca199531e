"""Typed simulation trace events, serialised one JSON object per line."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from enum import Enum
from typing import Any

EventType = Enum(
    "EventType",
    ["BLOCK_FOUND", "BLOCK_ACCEPTED", "DELIVERED", "REORG", "ATTACK", "STALL", "RETARGET"],
)

AttackPhase = Enum(
    "AttackPhase",
    [
        "STARTED",
        "GOODS_RELEASED",
        "FORK_RELEASED",
        "SUCCEEDED",
        "GAVE_UP",
        "QUIT",
        "POOL_OFFLINE",
    ],
)


@dataclass
class BaseEvent:
    time: float
    event_type: EventType

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            data[f.name] = value.name if isinstance(value, Enum) else value
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


@dataclass
class BlockFoundEvent(BaseEvent):
    node: str
    height: int
    block_hash: str
    parent_hash: str
    votes: int
    missed: int
    private: bool

    @classmethod
    def from_dict(cls, data: dict) -> BlockFoundEvent:
        return cls(
            time=data["time"],
            event_type=EventType.BLOCK_FOUND,
            node=data["node"],
            height=data["height"],
            block_hash=data["block_hash"],
            parent_hash=data["parent_hash"],
            votes=data["votes"],
            missed=data["missed"],
            private=data["private"],
        )


@dataclass
class BlockAcceptedEvent(BaseEvent):
    height: int
    block_hash: str

    @classmethod
    def from_dict(cls, data: dict) -> BlockAcceptedEvent:
        return cls(
            time=data["time"],
            event_type=EventType.BLOCK_ACCEPTED,
            height=data["height"],
            block_hash=data["block_hash"],
        )


@dataclass
class DeliveredEvent(BaseEvent):
    node: str
    block_hash: str

    @classmethod
    def from_dict(cls, data: dict) -> DeliveredEvent:
        return cls(
            time=data["time"],
            event_type=EventType.DELIVERED,
            node=data["node"],
            block_hash=data["block_hash"],
        )


@dataclass
class ReorgEvent(BaseEvent):
    depth: int
    fork_height: int
    old_tip: str
    new_tip: str

    @classmethod
    def from_dict(cls, data: dict) -> ReorgEvent:
        return cls(
            time=data["time"],
            event_type=EventType.REORG,
            depth=data["depth"],
            fork_height=data["fork_height"],
            old_tip=data["old_tip"],
            new_tip=data["new_tip"],
        )


@dataclass
class AttackEvent(BaseEvent):
    phase: AttackPhase
    height: int
    detail: str = ""

    @classmethod
    def from_dict(cls, data: dict) -> AttackEvent:
        return cls(
            time=data["time"],
            event_type=EventType.ATTACK,
            phase=AttackPhase[data["phase"]],
            height=data["height"],
            detail=data.get("detail", ""),
        )


@dataclass
class StallEvent(BaseEvent):
    height: int
    since: float
    aborted: bool

    @classmethod
    def from_dict(cls, data: dict) -> StallEvent:
        return cls(
            time=data["time"],
            event_type=EventType.STALL,
            height=data["height"],
            since=data["since"],
            aborted=data["aborted"],
        )


@dataclass
class RetargetEvent(BaseEvent):
    height: int
    old_target: str
    new_target: str

    @classmethod
    def from_dict(cls, data: dict) -> RetargetEvent:
        return cls(
            time=data["time"],
            event_type=EventType.RETARGET,
            height=data["height"],
            old_target=data["old_target"],
            new_target=data["new_target"],
        )


def parse_event(json_str: str) -> BaseEvent:
    data = json.loads(json_str)
    event_type = EventType[data["event_type"]]
    match event_type:
        case EventType.BLOCK_FOUND:
            return BlockFoundEvent.from_dict(data)
        case EventType.BLOCK_ACCEPTED:
            return BlockAcceptedEvent.from_dict(data)
        case EventType.DELIVERED:
            return DeliveredEvent.from_dict(data)
        case EventType.REORG:
            return ReorgEvent.from_dict(data)
        case EventType.ATTACK:
            return AttackEvent.from_dict(data)
        case EventType.STALL:
            return StallEvent.from_dict(data)
        case EventType.RETARGET:
            return RetargetEvent.from_dict(data)
        case _:
            raise ValueError(f"Unknown event type: {data['event_type']}")
