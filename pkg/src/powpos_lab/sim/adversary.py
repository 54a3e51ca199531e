"""Scenario controllers driving the adversary inside a running simulation.

The engine calls the hooks of exactly one controller; every hook is a no-op on
the honest baseline.
"""

from __future__ import annotations

from statistics import fmean
from typing import TYPE_CHECKING

from powpos_lab.chain.types import Transaction, TxKind
from powpos_lab.sim.config import ScenarioConfig, ScenarioKind
from powpos_lab.sim.events import AttackPhase
from powpos_lab.sim.nodes import ATTACKER, MERCHANT, STAKEPOOL, VAULT, SimNode
from powpos_lab.sim.report import Outcome

if TYPE_CHECKING:
    from powpos_lab.sim.engine import Simulation

PAYMENT_TX_ID = "double-spend"


def _is_payment(tx: Transaction) -> bool:
    return tx.id == PAYMENT_TX_ID and tx.recipient == MERCHANT


class Controller:
    def start(self, sim: Simulation) -> None:
        pass

    def on_best_change(self, sim: Simulation) -> None:
        pass

    def on_block(self, sim: Simulation, block_hash: bytes, builder: SimNode) -> None:
        pass

    def on_private_block(self, sim: Simulation, block_hash: bytes) -> None:
        pass

    def on_slot(self, sim: Simulation) -> None:
        pass

    def on_run_end(self, sim: Simulation) -> None:
        pass

    def finish(self, sim: Simulation) -> None:
        pass

    def transactions_for(self, sim: Simulation, node: SimNode) -> list[Transaction] | None:
        """Transactions `node` mines instead of the public mempool; None for the mempool."""
        return None


class HonestController(Controller):
    pass


def _fork_base(sim: Simulation, attacker: SimNode, start: bytes, max_depth: int) -> bytes | None:
    """Deepest block at most `max_depth` below `start` the attacker can extend alone."""
    cursor = sim.index.entry(start)
    for _ in range(max_depth + 1):
        if sim.extendable(sim.index, cursor.hash, attacker):
            return cursor.hash
        if cursor.parent is None:
            break
        cursor = cursor.parent
    return None


def _start_fork(sim: Simulation, attacker: SimNode, fork_point: bytes) -> None:
    sim.private = sim.index.branch_from(fork_point)
    attacker.private = True
    attacker.known = set()
    attacker.waiting.clear()
    attacker.base = None
    attacker.base_work = -1
    sim.refresh_base(attacker)
    sim.restart_mining(attacker)
    for node in sim.miners():
        if node is attacker or node.base is None:
            continue
        if not sim.extendable(sim.index, node.base, node):
            sim.refresh_base(node)
            sim.restart_mining(node)


class DoubleSpendController(Controller):
    """Pay a merchant on the public chain while mining a conflicting private fork.

    The fork is released once the merchant has shipped the goods and the
    private branch carries more work than the public one. The attack succeeds
    when the block holding the payment falls off the best chain.
    """

    def __init__(self, config: ScenarioConfig):
        knobs = config.attack
        self.attack_height = knobs.attack_height
        self.amount = knobs.amount
        self.give_up_deficit = knobs.give_up_deficit
        self.n_conf = config.n_conf
        self.forked = False
        self.released = False
        self.goods_released = False
        self.fork_height: int | None = None
        self.pay_block: bytes | None = None
        self.pay_height: int | None = None
        self.paid_at = 0.0
        self.max_deficit = 0
        self.private_txs: list[Transaction] = []

    def _attacker(self, sim: Simulation) -> SimNode:
        return sim.node(ATTACKER)

    def on_best_change(self, sim: Simulation) -> None:
        if not self.forked:
            if sim.index.height >= self.attack_height - 1:
                self._fork(sim)
            return
        if self.released or sim.done:
            return
        self._track_payment(sim)
        self._check(sim)

    def on_private_block(self, sim: Simulation, block_hash: bytes) -> None:
        if not self.released and not sim.done:
            self._check(sim)

    def transactions_for(self, sim: Simulation, node: SimNode) -> list[Transaction] | None:
        return self.private_txs if node.private else None

    def _fork(self, sim: Simulation) -> None:
        attacker = self._attacker(sim)
        self.forked = True
        sim.withholding = True
        attacker.private = True
        tip = sim.index.best_tip
        fork_point = _fork_base(sim, attacker, tip, self.give_up_deficit) or tip
        self.fork_height = sim.index.entry(fork_point).height
        payment = Transaction(
            id=PAYMENT_TX_ID,
            kind=TxKind.TRANSFER,
            sender=ATTACKER,
            recipient=MERCHANT,
            amount=self.amount,
        )
        conflict = Transaction(
            id=PAYMENT_TX_ID,
            kind=TxKind.TRANSFER,
            sender=ATTACKER,
            recipient=VAULT,
            amount=self.amount,
        )
        sim.mempool.append(payment)
        self.paid_at = sim.now
        self.private_txs = [conflict]
        _start_fork(sim, attacker, fork_point)
        sim.attack_event(AttackPhase.STARTED, f"fork at {self.fork_height}")

    def _track_payment(self, sim: Simulation) -> None:
        index = sim.index
        if self.pay_block is not None and index.is_on_best_chain(self.pay_block):
            return
        self.pay_block = self.pay_height = None
        # Honest miners may resume below the fork point, so the payment can sit
        # at any height found after it was submitted.
        found = sim.found_at
        for block_hash in reversed(index.best_chain()):
            if found.get(block_hash, 0.0) < self.paid_at:
                break
            block = index.entry(block_hash).block
            if any(_is_payment(tx) for tx in block.transactions):
                self.pay_block = block_hash
                self.pay_height = block.height
                break

    def _check(self, sim: Simulation) -> None:
        assert sim.private is not None
        public, private = sim.index.best, sim.private.best
        deficit = public.height - private.height
        self.max_deficit = max(self.max_deficit, deficit)

        if self.pay_height is not None and not self.goods_released:
            confirmations = public.height - self.pay_height + 1
            if confirmations >= self.n_conf:
                self.goods_released = True
                sim.attack_event(AttackPhase.GOODS_RELEASED, f"{confirmations} confirmations")

        if self.goods_released and private.work > public.work:
            self._release(sim)
        elif deficit > self.give_up_deficit:
            sim.attack_event(AttackPhase.GAVE_UP, f"{deficit} blocks behind")
            sim.finish(Outcome.FAILED)

    def _release(self, sim: Simulation) -> None:
        assert sim.private is not None
        self.released = True
        hidden = [h for h in sim.private.best_chain() if h not in sim.index]
        sim.attack_event(AttackPhase.FORK_RELEASED, f"{len(hidden)} blocks")
        sim.release(hidden)
        attacker = self._attacker(sim)
        attacker.private = False
        sim.withholding = False
        sim.resync(attacker)
        if self.pay_block is not None and not sim.index.is_on_best_chain(self.pay_block):
            sim.attack_event(AttackPhase.SUCCEEDED)
            sim.finish(Outcome.SUCCEEDED)
        else:
            sim.finish(Outcome.FAILED)

    def on_run_end(self, sim: Simulation) -> None:
        sim.finish(Outcome.FAILED)

    def finish(self, sim: Simulation) -> None:
        sim.metrics.update(
            {
                "fork_height": self.fork_height,
                "pay_height": self.pay_height,
                "goods_released": self.goods_released,
                "fork_released": self.released,
                "private_height": sim.private.height if sim.private is not None else None,
                "max_deficit": self.max_deficit,
            }
        )


def _mean_interval(sim: Simulation, first: int, last: int) -> float | None:
    """Mean found-time gap of best-chain blocks with heights in [first, last]."""
    chain = sim.index.best_chain()
    found = sim.found_at
    gaps = [
        found[chain[h]] - found[chain[h - 1]]
        for h in range(max(first, 1), min(last, len(chain) - 1) + 1)
        if chain[h] in found and chain[h - 1] in found
    ]
    return fmean(gaps) if gaps else None


class StripMineController(Controller):
    """Mine openly with extra hashpower, then quit right after a retarget."""

    def __init__(self, config: ScenarioConfig):
        params = config.params
        quit_height = config.attack.quit_height
        self.quit_height = quit_height if quit_height is not None else params.retarget_interval
        self.window = params.retarget_interval
        self.quit_at: float | None = None

    def on_best_change(self, sim: Simulation) -> None:
        if self.quit_at is None and sim.index.height >= self.quit_height:
            attacker = sim.node(ATTACKER)
            attacker.active = False
            sim.restart_mining(attacker)
            self.quit_at = sim.now
            sim.attack_event(AttackPhase.QUIT)

    def finish(self, sim: Simulation) -> None:
        q = self.quit_height
        sim.metrics.update(
            {
                "quit_height": q,
                "quit_time": self.quit_at,
                "pre_quit_mean_interval": _mean_interval(sim, 1, q),
                "post_quit_mean_interval": _mean_interval(sim, q + 1, q + self.window - 1),
            }
        )


class NothingAtStakeController(Controller):
    """Grow a public fork from the parent of the tip with greedy multi-fork votes."""

    def __init__(self, config: ScenarioConfig):
        self.attack_height = config.attack.attack_height
        self.give_up_deficit = config.attack.give_up_deficit
        self.n_conf = config.n_conf
        self.greedy_fraction = config.attack.greedy_fraction
        self.forked = False
        self.fork_height: int | None = None
        self.depth = 0
        self.multi_fork_votes = 0

    def on_best_change(self, sim: Simulation) -> None:
        if self.forked or sim.index.height < self.attack_height:
            return
        attacker = sim.node(ATTACKER)
        best = sim.index.best
        start = best.parent.hash if best.parent is not None else best.hash
        attacker.private = True
        fork_point = _fork_base(sim, attacker, start, self.give_up_deficit) or start
        self.forked = True
        self.fork_height = sim.index.entry(fork_point).height
        _start_fork(sim, attacker, fork_point)
        sim.attack_event(AttackPhase.STARTED, f"fork at {self.fork_height}")

    def on_block(self, sim: Simulation, block_hash: bytes, builder: SimNode) -> None:
        if not builder.private:
            return
        assert sim.private is not None
        block = sim.private.entry(block_hash).block
        self.multi_fork_votes += sum(
            1 for vote in block.votes if not sim.node(vote.voter).spec.adversarial
        )

    def on_private_block(self, sim: Simulation, block_hash: bytes) -> None:
        assert sim.private is not None and self.fork_height is not None
        sim.release([block_hash])
        self.depth = max(self.depth, sim.private.height - self.fork_height)
        if not sim.done and self.depth >= self.n_conf:
            sim.attack_event(AttackPhase.SUCCEEDED, f"fork depth {self.depth}")
            sim.finish(Outcome.SUCCEEDED)

    def on_slot(self, sim: Simulation) -> None:
        attacker = sim.node(ATTACKER)
        if attacker.private and attacker.base is not None:
            sim.produce(attacker, attacker.base)

    def on_run_end(self, sim: Simulation) -> None:
        sim.finish(Outcome.FAILED)

    def finish(self, sim: Simulation) -> None:
        sim.metrics.update(
            {
                "fork_height": self.fork_height,
                "fork_depth": self.depth,
                "multi_fork_votes": self.multi_fork_votes,
                "greedy_fraction": self.greedy_fraction,
            }
        )


class StakepoolController(Controller):
    """Take a stakepool and every vote delegated to it offline at a given height."""

    def __init__(self, config: ScenarioConfig):
        self.offline_height = config.attack.offline_height
        self.announced = False

    def start(self, sim: Simulation) -> None:
        if self.offline_height is not None:
            sim.offline_from[STAKEPOOL] = self.offline_height

    def on_best_change(self, sim: Simulation) -> None:
        if (
            not self.announced
            and self.offline_height is not None
            and sim.index.height + 1 >= self.offline_height
        ):
            self.announced = True
            sim.attack_event(AttackPhase.POOL_OFFLINE)

    def finish(self, sim: Simulation) -> None:
        cutoff = self.offline_height if self.offline_height is not None else sim.index.height + 1
        before = [0, 0]
        after = [0, 0]
        index = sim.index
        for block_hash in index.best_chain()[1:]:
            block = index.entry(block_hash).block
            bucket = before if block.height < cutoff else after
            bucket[0] += len(block.missed)
            bucket[1] += len(block.missed) + len(block.votes)
        sim.metrics.update(
            {
                "offline_height": self.offline_height,
                "missed_rate_before": before[0] / before[1] if before[1] else 0.0,
                "missed_rate_after": after[0] / after[1] if after[1] else 0.0,
                "blocks_after": sum(
                    1 for h in index.best_chain() if index.entry(h).height >= cutoff
                ),
            }
        )


def controller_for(config: ScenarioConfig) -> Controller:
    match config.kind:
        case ScenarioKind.DOUBLE_SPEND:
            return DoubleSpendController(config)
        case ScenarioKind.STRIP_MINE:
            return StripMineController(config)
        case ScenarioKind.NOTHING_AT_STAKE:
            return NothingAtStakeController(config)
        case ScenarioKind.STAKEPOOL_FAILURE:
            return StakepoolController(config)
        case _:
            return HonestController()
