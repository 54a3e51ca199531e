"""Deterministic discrete-event simulator of a hybrid PoW/PoS network.

One run is single threaded. Events are ordered by (time, sequence number) and
every random draw comes from one of four numpy streams spawned from the
configured seed, so a config and seed fully determine the event trace.
"""

from __future__ import annotations

import dataclasses
import heapq
from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np

from powpos_lab.chain.ledger import LedgerState, genesis_state
from powpos_lab.chain.serialize import block_hash as hash_block
from powpos_lab.chain.types import Block, StakeEntry, Transaction, TxKind
from powpos_lab.consensus import (
    ChainIndex,
    IndexEntry,
    ReorgReport,
    assemble_block,
    candidate_for,
    make_genesis,
)
from powpos_lab.hashing import MAX_TARGET
from powpos_lab.logs import logger
from powpos_lab.pos import cast_votes
from powpos_lab.pos.voting import Ballot
from powpos_lab.pow import (
    MiningBackend,
    RealBackend,
    StochasticBackend,
    initial_target,
    is_retarget_height,
    sample_block_time,
)
from powpos_lab.sim.config import ConsensusMode, MiningMode, NodeSpec, ScenarioConfig
from powpos_lab.sim.events import (
    AttackEvent,
    AttackPhase,
    BaseEvent,
    BlockAcceptedEvent,
    BlockFoundEvent,
    DeliveredEvent,
    EventType,
    ReorgEvent,
    RetargetEvent,
    StallEvent,
)
from powpos_lab.sim.nodes import SimNode, build_population, willing
from powpos_lab.sim.report import BlockRecord, Outcome, ScenarioReport

if TYPE_CHECKING:
    from powpos_lab.sim.adversary import Controller

_FOUND = 0
_DELIVER = 1
_SLOT = 2

SNAPSHOT_DEPTH = 128


@dataclass(frozen=True, slots=True)
class Roster:
    """Voters selected for children of one block, with who was reachable."""

    entries: tuple[StakeEntry, ...]
    online: dict[str, bool]


@dataclass(frozen=True)
class SimulationResult:
    report: ScenarioReport
    trace: list[BaseEvent]
    index: ChainIndex


class Simulation:
    def __init__(self, config: ScenarioConfig, controller: Controller | None = None):
        from powpos_lab.sim.adversary import controller_for

        self.config = config
        self.params = config.params
        self.pure_pos = config.mode is ConsensusMode.PURE_POS
        self.block_time = float(self.params.target_block_time)

        mining_ss, latency_ss, online_ss, misc_ss = np.random.SeedSequence(config.seed).spawn(4)
        self.rng_mining = np.random.default_rng(mining_ss)
        self.rng_latency = np.random.default_rng(latency_ss)
        self.rng_online = np.random.default_rng(online_ss)
        self.rng_misc = np.random.default_rng(misc_ss)

        population = build_population(config)
        self.nodes: dict[str, SimNode] = {spec.id: SimNode(spec) for spec in population.nodes}
        state = genesis_state(self.params, population.allocations, population.stakes)

        real = config.mining is MiningMode.REAL
        # Real hashes per simulated hash; the honest network grinds real_work per block
        self.hash_scale = 1.0
        if self.pure_pos:
            target = MAX_TARGET
        else:
            hashpower = population.honest_hashpower or sum(n.hashpower for n in population.nodes)
            if real and hashpower > 0:
                self.hash_scale = config.real_work / (hashpower * self.block_time)
            target = (
                initial_target(hashpower * self.hash_scale, self.params)
                if hashpower > 0
                else MAX_TARGET
            )
        self.backend: MiningBackend = (
            RealBackend(self.params.hash_algo) if real else StochasticBackend(self.params.hash_algo)
        )
        genesis = make_genesis(self.params, target)
        self.index = ChainIndex(
            genesis,
            state,
            self.params,
            check_work=self.backend.checks_work and not self.pure_pos,
            fixed_target=MAX_TARGET if self.pure_pos else None,
            snapshot_depth=SNAPSHOT_DEPTH,
            checkpoint_interval=SNAPSHOT_DEPTH,
        )
        self.private: ChainIndex | None = None
        self.controller = controller or controller_for(config)

        self.now = 0.0
        self.trace: list[BaseEvent] = []
        self.mempool: list[Transaction] = []
        self.withholding = False
        self.offline_from: dict[str, int] = {}
        self.outcome = Outcome.COMPLETED
        self.metrics: dict[str, Any] = {}
        self.reorg_depths: Counter[int] = Counter()
        self.stall_episodes = 0

        self._heap: list[tuple[float, int, int, tuple]] = []
        self._seq = 0
        self._done = False
        self._rosters: dict[bytes, Roster | None] = {}
        self._quorum: dict[tuple[bytes, str, bool, bool], bool] = {}
        self._pruned_at = 0
        self.found_at: dict[bytes, float] = {self.index.genesis_hash: 0.0}
        self._live_at: dict[bytes, int] = {self.index.genesis_hash: len(state.pool)}
        self._last_best = self.index.best_tip
        self._progress_height = 0
        self._last_progress = 0.0
        self._pending_stakers: set[str] = set()
        # Honest proposer view in pure-PoS mode; sees every public block at once
        self.network_view = SimNode(NodeSpec(id="network"))
        self.network_view.base = self.index.genesis_hash
        self.network_view.base_work = self.index.best.work
        self.network_view.known.add(self.index.genesis_hash)

    # Event queue

    def push(self, at: float, kind: int, payload: tuple) -> None:
        heapq.heappush(self._heap, (at, self._seq, kind, payload))
        self._seq += 1

    def record(self, event: BaseEvent) -> None:
        self.trace.append(event)

    def finish(self, outcome: Outcome) -> None:
        if not self._done:
            self.outcome = outcome
            self._done = True

    @property
    def done(self) -> bool:
        return self._done

    # Nodes, rosters and voting

    def node(self, node_id: str) -> SimNode:
        return self.nodes[node_id]

    def miners(self) -> list[SimNode]:
        return [n for n in self.nodes.values() if n.spec.miner]

    def index_for(self, node: SimNode) -> ChainIndex:
        if node.private:
            assert self.private is not None
            return self.private
        return self.index

    def roster(self, index: ChainIndex, block_hash: bytes) -> Roster | None:
        if block_hash in self._rosters:
            return self._rosters[block_hash]
        view = index.parent_view(block_hash)
        if not view.can_vote:
            roster = None
        else:
            child_height = view.child_height
            online: dict[str, bool] = {}
            for entry in view.roster:
                if entry.owner not in online:
                    online[entry.owner] = self._draw_online(entry.owner, child_height)
                delegate = entry.delegate
                if not online[entry.owner] and delegate is not None and delegate not in online:
                    online[delegate] = self._draw_online(delegate, child_height)
            roster = Roster(entries=view.roster, online=online)
        self._rosters[block_hash] = roster
        return roster

    def _draw_online(self, account: str, height: int) -> bool:
        node = self.nodes.get(account)
        if node is None:
            return False
        cutoff = self.offline_from.get(account)
        if cutoff is not None and height >= cutoff:
            return False
        p = node.spec.online
        return p >= 1.0 or (p > 0.0 and bool(self.rng_online.random() < p))

    def _signers(self, roster: Roster, builder: SimNode) -> dict[str, bool]:
        hidden = builder.private and self.withholding
        return {
            account: is_online
            and willing(self.nodes[account], builder, hidden=hidden, withholding=self.withholding)
            for account, is_online in roster.online.items()
        }

    def ballot(self, roster: Roster, builder: SimNode, candidate: bytes) -> Ballot:
        return cast_votes(roster.entries, candidate, self._signers(roster, builder))

    def extendable(self, index: ChainIndex, block_hash: bytes, builder: SimNode) -> bool:
        """Whether `builder` can gather a quorum for a child of `block_hash`."""
        private = builder.private
        key_builder = builder.id if builder.spec.adversarial else "honest"
        key = (block_hash, key_builder, private, self.withholding)
        cached = self._quorum.get(key)
        if cached is not None:
            return cached
        roster = self.roster(index, block_hash)
        if roster is None:
            ok = False
        else:
            signers = self._signers(roster, builder)
            count = 0
            for entry in roster.entries:
                if signers.get(entry.owner) or (
                    entry.delegate is not None and signers.get(entry.delegate)
                ):
                    count += 1
            ok = count >= self.params.n_quorum
        self._quorum[key] = ok
        return ok

    # Block production

    def _select_transactions(
        self, state: LedgerState, pool: list[Transaction]
    ) -> list[Transaction]:
        chosen: list[Transaction] = []
        spent: dict[str, int] = {}
        ids: set[str] = set()
        for tx in pool:
            if len(chosen) >= self.config.mempool_max:
                break
            if tx.id in ids or tx.id in state.applied_tx_ids:
                continue
            available = state.balance(tx.sender) - spent.get(tx.sender, 0)
            if tx.debit > available:
                continue
            spent[tx.sender] = spent.get(tx.sender, 0) + tx.debit
            ids.add(tx.id)
            chosen.append(tx)
        return chosen

    def build_block(
        self,
        index: ChainIndex,
        base: bytes,
        builder: SimNode,
        transactions: list[Transaction] | None = None,
    ) -> Block | None:
        """Assemble, vote and seal a child of `base`; None if no quorum or no nonce."""
        roster = self.roster(index, base)
        if roster is None:
            return None
        view = index.parent_view(base)
        pool = self.mempool if transactions is None else transactions
        txs = self._select_transactions(view.state, pool)
        candidate = candidate_for(view, builder.id, txs)
        ballot = self.ballot(roster, builder, candidate)
        if len(ballot.votes) < self.params.n_quorum:
            return None
        block = assemble_block(view, builder.id, txs, ballot, int(self.now))
        sealed = self.backend.seal(block.header, self.rng_mining)
        if sealed is None:
            return None
        return dataclasses.replace(block, header=sealed)

    def produce(
        self,
        builder: SimNode,
        base: bytes,
        transactions: list[Transaction] | None = None,
    ) -> bytes | None:
        """Build on `base` in the builder's index, insert and publish if public."""
        index = self.index_for(builder)
        block = self.build_block(index, base, builder, transactions)
        if block is None:
            return None
        private = builder.private
        report = index.extend_chain(block)
        block_hash = hash_block(block.header, self.params.hash_algo)
        builder.produced += 1
        self.found_at[block_hash] = self.now
        self._live_at[block_hash] = len(index.state_of(block_hash).pool)
        self.record(
            BlockFoundEvent(
                time=self.now,
                event_type=EventType.BLOCK_FOUND,
                node=builder.id,
                height=block.height,
                block_hash=block_hash.hex(),
                parent_hash=base.hex(),
                votes=len(block.votes),
                missed=len(block.missed),
                private=private,
            )
        )
        logger.debug(
            f"{builder.id} found block {block.height} {block_hash.hex()[:12]} "
            f"({len(block.votes)}/{self.params.m_voters} votes)"
        )
        self.controller.on_block(self, block_hash, builder)
        if private:
            self._consider(builder, block_hash)
            self.controller.on_private_block(self, block_hash)
        else:
            self._after_public_insert(report)
            self.publish(block_hash, origin=builder)
        return block_hash

    def release(self, hashes: list[bytes]) -> None:
        """Feed blocks from the private index into the public one."""
        assert self.private is not None
        for block_hash in hashes:
            block = self.private.entry(block_hash).block
            report = self.index.extend_chain(block)
            self._after_public_insert(report)
            self.publish(block_hash, origin=None)

    def publish(self, block_hash: bytes, origin: SimNode | None) -> None:
        if self.pure_pos:
            self._receive(self.network_view, block_hash)
        for node in self.miners():
            if node.private:
                continue
            if origin is not None and node.id == origin.id:
                self._receive(node, block_hash)
            else:
                delay = self.config.latency.sample(self.rng_latency)
                self.push(self.now + delay, _DELIVER, (node.id, block_hash))

    # Node views

    def _receive(self, node: SimNode, block_hash: bytes) -> None:
        if node.private or block_hash in node.known:
            return
        parent = self.index.entry(block_hash).block.header.parent_hash
        if parent not in node.known:
            node.waiting.setdefault(parent, []).append(block_hash)
            return
        old_base = node.base
        queue = [block_hash]
        while queue:
            current = queue.pop()
            node.known.add(current)
            if self.config.trace_deliveries and node is not self.network_view:
                self.record(
                    DeliveredEvent(
                        time=self.now,
                        event_type=EventType.DELIVERED,
                        node=node.id,
                        block_hash=current.hex(),
                    )
                )
            self._consider(node, current)
            queue.extend(node.waiting.pop(current, []))
        if node.base != old_base and node is not self.network_view:
            self.restart_mining(node)

    def _consider(self, node: SimNode, block_hash: bytes) -> None:
        index = self.index_for(node)
        work = index.entry(block_hash).work
        if work > node.base_work and self.extendable(index, block_hash, node):
            node.base = block_hash
            node.base_work = work

    def refresh_base(self, node: SimNode) -> None:
        """Move the node to its heaviest extendable known block."""
        index = self.index_for(node)
        node.base = None
        node.base_work = -1
        if node.private:
            candidates = [index.entry(h) for h in reversed(index.best_chain())]
        else:
            candidates = sorted(
                (index.entry(h) for h in node.known), key=lambda e: (-e.work, e.seen)
            )
        for entry in candidates:
            if self.extendable(index, entry.hash, node):
                node.base = entry.hash
                node.base_work = entry.work
                return

    def resync(self, node: SimNode) -> None:
        """Give a node returning to the public network the full public tree."""
        node.known = {entry.hash for entry in self.index}
        node.waiting.clear()
        self.refresh_base(node)
        self.restart_mining(node)

    def restart_mining(self, node: SimNode) -> None:
        node.job += 1
        if not node.active or node.base is None or node.spec.hashpower <= 0 or self.pure_pos:
            return
        target = self.index_for(node).next_target(node.base)
        delay = sample_block_time(
            node.spec.hashpower * self.hash_scale, target, self.rng_mining
        )
        self.push(self.now + delay, _FOUND, (node.id, node.job))

    # Public chain bookkeeping

    def _after_public_insert(self, report: ReorgReport | None) -> None:
        index = self.index
        if report is not None:
            self.reorg_depths[report.depth] += 1
            self.record(
                ReorgEvent(
                    time=self.now,
                    event_type=EventType.REORG,
                    depth=report.depth,
                    fork_height=index.entry(report.fork_point).height,
                    old_tip=report.old_tip.hex(),
                    new_tip=report.new_tip.hex(),
                )
            )
        if index.best_tip == self._last_best:
            return
        previous = index.entry(self._last_best)
        self._last_best = index.best_tip
        best = index.best
        applied = report.applied if report is not None else (best.hash,)
        for block_hash in applied:
            self._note_retarget(index.entry(block_hash))
        self.record(
            BlockAcceptedEvent(
                time=self.now,
                event_type=EventType.BLOCK_ACCEPTED,
                height=best.height,
                block_hash=best.hash.hex(),
            )
        )
        if best.height > self._progress_height:
            self._note_progress(best.height)
            self._prune_caches(best.height)
        if best.height < previous.height:
            logger.log(f"Best height fell from {previous.height} to {best.height}")

        state = index.state_of(best.hash)
        if report is not None:
            self._requeue(report.rolled_back)
        self._refresh_mempool(state)
        self.controller.on_best_change(self)
        if not self._done and best.height >= self.config.run_blocks:
            self.controller.on_run_end(self)
            self.finish(self.outcome)

    def _height_of(self, block_hash: bytes) -> int:
        for index in (self.index, self.private):
            if index is not None and block_hash in index:
                return index.entry(block_hash).height
        return -1

    def _prune_caches(self, height: int) -> None:
        """Forget rosters and quorum answers for blocks far below the best tip."""
        if height - self._pruned_at < SNAPSHOT_DEPTH:
            return
        self._pruned_at = height
        floor = height - SNAPSHOT_DEPTH
        stale = {h for h in self._rosters if self._height_of(h) < floor}
        if not stale:
            return
        for block_hash in stale:
            del self._rosters[block_hash]
        self._quorum = {key: ok for key, ok in self._quorum.items() if key[0] not in stale}
        logger.debug(f"Pruned {len(stale)} cached rosters below height {floor}")

    def _note_retarget(self, entry: IndexEntry) -> None:
        parent = entry.parent
        if parent is None or self.pure_pos or not is_retarget_height(entry.height, self.params):
            return
        old, new = parent.block.header.target, entry.block.header.target
        if old != new:
            self.record(
                RetargetEvent(
                    time=self.now,
                    event_type=EventType.RETARGET,
                    height=entry.height,
                    old_target=f"{old:064x}",
                    new_target=f"{new:064x}",
                )
            )

    def _note_progress(self, height: int) -> None:
        gap = self.now - self._last_progress
        if gap > self.config.stall_horizon * self.block_time:
            self.stall_episodes += 1
            self.record(
                StallEvent(
                    time=self.now,
                    event_type=EventType.STALL,
                    height=self._progress_height,
                    since=self._last_progress,
                    aborted=False,
                )
            )
            logger.warning(
                f"Chain stalled at height {self._progress_height} for {gap:.0f}s"
            )
        self._progress_height = height
        self._last_progress = self.now

    def _requeue(self, rolled_back: tuple[bytes, ...]) -> None:
        """Put transfers from blocks a reorg dropped back into the mempool."""
        pending = {tx.id for tx in self.mempool}
        for block_hash in rolled_back:
            for tx in self.index.entry(block_hash).block.transactions:
                if tx.kind is TxKind.TRANSFER and tx.id not in pending:
                    self.mempool.append(tx)
                    pending.add(tx.id)

    def _refresh_mempool(self, state: LedgerState) -> None:
        self.mempool = [tx for tx in self.mempool if tx.id not in state.applied_tx_ids]
        self._pending_stakers = {
            tx.sender for tx in self.mempool if tx.kind is TxKind.STAKE_SUBMISSION
        }
        price = self.config.network.ticket_price
        cost = price + self.config.staking_fee
        for node in self.nodes.values():
            spec = node.spec
            if not spec.staker or spec.adversarial or node.id in self._pending_stakers:
                continue
            count = min(state.balance(node.id) // cost, 16)
            for _ in range(count):
                self.mempool.append(
                    Transaction(
                        id=node.next_stake_id(),
                        kind=TxKind.STAKE_SUBMISSION,
                        sender=node.id,
                        amount=price,
                        fee=self.config.staking_fee,
                        delegate=spec.delegate,
                    )
                )
            if count:
                self._pending_stakers.add(node.id)

    def attack_event(self, phase: AttackPhase, detail: str = "") -> None:
        self.record(
            AttackEvent(
                time=self.now,
                event_type=EventType.ATTACK,
                phase=phase,
                height=self.index.height,
                detail=detail,
            )
        )
        message = f"[{self.config.seed}] {phase.name.lower()} at height {self.index.height}"
        logger.status(f"{message} {detail}".rstrip())

    # Main loop

    def run(self) -> SimulationResult:
        logger.log(
            f"Simulating {self.config.kind.name.lower()} seed={self.config.seed} "
            f"mode={self.config.mode.name.lower()} nodes={len(self.nodes)}"
        )
        genesis = self.index.genesis_hash
        for node in self.miners():
            node.known.add(genesis)
        self.controller.start(self)
        for node in self.miners():
            if not node.private:
                self._consider(node, genesis)
                self.restart_mining(node)
        if self.pure_pos:
            self.push(self.block_time, _SLOT, ())

        abort_after = self.config.stall_abort * self.block_time
        while self._heap and not self._done:
            at, _, kind, payload = heapq.heappop(self._heap)
            if at - self._last_progress > abort_after:
                self.now = self._last_progress + abort_after
                self._stall_abort()
                break
            self.now = at
            if kind == _FOUND:
                self._on_found(*payload)
            elif kind == _DELIVER:
                node_id, block_hash = payload
                self._receive(self.nodes[node_id], block_hash)
            else:
                self._on_slot()
        if not self._done:
            if self.index.height < self.config.run_blocks:
                self._stall_abort()
            else:
                self.finish(self.outcome)

        self.controller.finish(self)
        return SimulationResult(report=self._report(), trace=self.trace, index=self.index)

    def _stall_abort(self) -> None:
        self.stall_episodes += 1
        self.record(
            StallEvent(
                time=self.now,
                event_type=EventType.STALL,
                height=self.index.height,
                since=self._last_progress,
                aborted=True,
            )
        )
        logger.warning(
            f"[{self.config.seed}] stalled at height {self.index.height}; no progress since "
            f"t={self._last_progress:.0f}s"
        )
        self.finish(Outcome.STALLED)

    def _on_found(self, node_id: str, job: int) -> None:
        node = self.nodes[node_id]
        if job != node.job or node.base is None:
            return
        produced = self.produce(node, node.base, self.controller.transactions_for(self, node))
        if produced is None:
            self.refresh_base(node)
        if not self._done:
            self.restart_mining(node)

    def _on_slot(self) -> None:
        proposers = [
            n for n in self.nodes.values() if n.spec.staker and not n.spec.adversarial
        ]
        view = self.network_view
        if proposers and view.base is not None:
            proposer = proposers[int(self.rng_misc.integers(len(proposers)))]
            self.produce(proposer, view.base)
        if not self._done:
            self.controller.on_slot(self)
        if not self._done:
            self.push(self.now + self.block_time, _SLOT, ())

    # Report

    def _report(self) -> ScenarioReport:
        index = self.index
        chain = index.best_chain()
        records: list[BlockRecord] = []
        best_blocks: Counter[str] = Counter()
        votes_total = missed_total = 0
        previous_time = 0.0
        for block_hash in chain[1:]:
            block = index.entry(block_hash).block
            found = self.found_at.get(block_hash, float(block.header.timestamp))
            votes, missed = len(block.votes), len(block.missed)
            votes_total += votes
            missed_total += missed
            if block.miner is not None:
                best_blocks[block.miner] += 1
            records.append(
                BlockRecord(
                    height=block.height,
                    time=found,
                    interval=found - previous_time,
                    votes=votes,
                    missed=missed,
                    participation=votes / self.params.m_voters,
                    live_tickets=self._live_at.get(block_hash, 0),
                )
            )
            previous_time = found

        window = self.params.retarget_interval
        window_intervals = []
        for start in range(0, len(records), window):
            chunk = records[start : start + window]
            window_intervals.append(sum(r.interval for r in chunk) / len(chunk))
        selected = votes_total + missed_total
        return ScenarioReport(
            scenario=self.config.kind.name,
            seed=self.config.seed,
            outcome=self.outcome,
            best_height=index.height,
            end_time=self.now,
            blocks_found={n.id: n.produced for n in self.nodes.values() if n.produced},
            best_chain_blocks=dict(sorted(best_blocks.items())),
            reorg_depths=dict(sorted(self.reorg_depths.items())),
            window_intervals=window_intervals,
            mean_interval=(previous_time / len(records)) if records else 0.0,
            missed_vote_rate=missed_total / selected if selected else 0.0,
            stall_episodes=self.stall_episodes,
            metrics=dict(self.metrics),
            blocks=tuple(records),
        )


def run(config: ScenarioConfig) -> SimulationResult:
    """Run one scenario to completion."""
    return Simulation(config).run()
