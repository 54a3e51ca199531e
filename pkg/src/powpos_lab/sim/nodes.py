from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

from powpos_lab.chain.types import StakeEntry
from powpos_lab.sim.config import (
    ConfigError,
    ScenarioConfig,
    ScenarioKind,
    NodeSpec,
    Strategy,
)

ATTACKER = "attacker"
MERCHANT = "merchant"
VAULT = "attacker-vault"
STAKEPOOL = "stakepool"


@dataclass(slots=True)
class SimNode:
    """Runtime state of one node. Only miners keep a view of the block tree."""

    spec: NodeSpec
    known: set[bytes] = field(default_factory=set)
    waiting: dict[bytes, list[bytes]] = field(default_factory=dict)
    base: bytes | None = None
    base_work: int = -1
    job: int = 0
    produced: int = 0
    stake_counter: int = 0
    # Mining into the private branch instead of the public tree
    private: bool = False
    active: bool = True

    @property
    def id(self) -> str:
        return self.spec.id

    def next_stake_id(self) -> str:
        self.stake_counter += 1
        return f"{self.id}:stake:{self.stake_counter}"


@dataclass(frozen=True, slots=True)
class Population:
    nodes: tuple[NodeSpec, ...]
    stakes: tuple[StakeEntry, ...]
    allocations: Mapping[str, int]

    @property
    def honest_hashpower(self) -> float:
        return sum(n.hashpower for n in self.nodes if n.miner and not n.adversarial)


def _split(total: int, parts: int) -> list[int]:
    if parts <= 0:
        return []
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def build_population(config: ScenarioConfig) -> Population:
    """Generated honest network plus the scenario's adversary and explicit nodes."""
    net = config.network
    knobs = config.attack
    kind = config.kind
    nodes: list[NodeSpec] = []
    tickets: dict[str, int] = {}

    attacker_tickets = 0
    if kind in (ScenarioKind.DOUBLE_SPEND, ScenarioKind.NOTHING_AT_STAKE):
        attacker_tickets = round(knobs.stake_share * net.tickets)
    pool_tickets = 0
    if kind is ScenarioKind.STAKEPOOL_FAILURE:
        pool_tickets = round(knobs.pool_share * net.tickets)
    honest_tickets = net.tickets - attacker_tickets - pool_tickets

    per_miner = net.honest_hashpower / net.honest_miners if net.honest_miners else 0.0
    for i in range(net.honest_miners):
        nodes.append(NodeSpec(id=f"miner-{i}", miner=True, hashpower=per_miner))

    greedy = round(knobs.greedy_fraction * net.stakers)
    for i, count in enumerate(_split(honest_tickets, net.stakers)):
        node = NodeSpec(
            id=f"staker-{i}",
            staker=True,
            online=net.online,
            strategy=Strategy.NOTHING_AT_STAKE if i < greedy else Strategy.HONEST,
            balance=net.spare_balance,
        )
        nodes.append(node)
        tickets[node.id] = count

    honest_hash = net.honest_hashpower if net.honest_miners else 0.0
    match kind:
        case ScenarioKind.DOUBLE_SPEND:
            nodes.append(
                NodeSpec(
                    id=ATTACKER,
                    miner=True,
                    staker=attacker_tickets > 0,
                    hashpower=knobs.hash_multiplier * honest_hash,
                    balance=knobs.amount,
                    adversarial=True,
                    strategy=Strategy.PRIVATE_FORK_DOUBLE_SPEND,
                )
            )
            tickets[ATTACKER] = attacker_tickets
            nodes.append(NodeSpec(id=MERCHANT))
        case ScenarioKind.STRIP_MINE:
            nodes.append(
                NodeSpec(
                    id=ATTACKER,
                    miner=True,
                    hashpower=knobs.hash_multiplier * honest_hash,
                    adversarial=True,
                    strategy=Strategy.STRIP_MINE,
                )
            )
        case ScenarioKind.NOTHING_AT_STAKE:
            nodes.append(
                NodeSpec(
                    id=ATTACKER,
                    miner=knobs.hash_multiplier > 0,
                    staker=attacker_tickets > 0,
                    hashpower=knobs.hash_multiplier * honest_hash,
                    adversarial=True,
                    strategy=Strategy.NOTHING_AT_STAKE,
                )
            )
            tickets[ATTACKER] = attacker_tickets
        case ScenarioKind.STAKEPOOL_FAILURE:
            nodes.append(NodeSpec(id=STAKEPOOL, stakepool=True))
            for i, count in enumerate(_split(pool_tickets, max(1, net.stakers))):
                node = NodeSpec(
                    id=f"delegator-{i}",
                    staker=True,
                    online=0.0,
                    delegate=STAKEPOOL,
                )
                nodes.append(node)
                tickets[node.id] = count

    for spec in config.nodes:
        nodes.append(spec)
        tickets[spec.id] = tickets.get(spec.id, 0) + spec.stake // net.ticket_price

    ids = [n.id for n in nodes]
    if len(set(ids)) != len(ids):
        raise ConfigError("explicit node id clashes with a generated node", "nodes.id")
    known = set(ids)
    for n in nodes:
        if n.delegate is not None and n.delegate not in known:
            raise ConfigError(
                f"node {n.id} delegates to unknown node {n.delegate}", "nodes.delegate"
            )

    by_id = {n.id: n for n in nodes}
    stakes: list[StakeEntry] = []
    for owner, count in tickets.items():
        delegate = by_id[owner].delegate
        for k in range(count):
            stakes.append(
                StakeEntry(
                    id=f"{owner}:genesis:{k}",
                    owner=owner,
                    amount=net.ticket_price,
                    fee=0,
                    invoice_height=0,
                    window_start=0,
                    delegate=delegate,
                )
            )
    allocations = {n.id: n.balance for n in nodes if n.balance}
    return Population(nodes=tuple(nodes), stakes=tuple(stakes), allocations=allocations)


def willing(
    signer: SimNode,
    builder: SimNode,
    *,
    hidden: bool,
    withholding: bool,
) -> bool:
    """Whether `signer` signs an approve-vote for a candidate built by `builder`.

    Hidden candidates are only shown to their builder. Honest voters refuse
    candidates extending a fork branch unless they vote greedily on every
    fork. A withholding adversary signs only its own candidates.
    """
    if hidden:
        return signer.id == builder.id
    if signer.spec.adversarial:
        return signer.id == builder.id or not (withholding or builder.private)
    if builder.private:
        return signer.spec.greedy
    return True
