from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass

from powpos_lab.chain.ledger import LedgerState, apply_block
from powpos_lab.chain.params import ChainParams
from powpos_lab.chain.serialize import block_hash
from powpos_lab.chain.types import Block
from powpos_lab.consensus.validation import ParentView, ValidationError, validate_block
from powpos_lab.logs import logger
from powpos_lab.pow.difficulty import DifficultyState

WORK_NUMERATOR = 1 << 256


def block_work(target: int) -> int:
    return WORK_NUMERATOR // target


class UnknownParentError(LookupError):
    def __init__(self, block_hash: bytes, parent_hash: bytes):
        super().__init__(
            f"Block {block_hash.hex()[:12]} has unknown parent {parent_hash.hex()[:12]}"
        )
        self.block_hash = block_hash
        self.parent_hash = parent_hash


@dataclass(slots=True, eq=False)
class IndexEntry:
    block: Block
    hash: bytes
    parent: IndexEntry | None
    work: int
    seen: int
    difficulty: DifficultyState
    # None once pruned; ChainIndex.state_of rebuilds it from an older snapshot
    state: LedgerState | None

    @property
    def height(self) -> int:
        return self.block.height


@dataclass(frozen=True, slots=True)
class ReorgReport:
    old_tip: bytes
    new_tip: bytes
    fork_point: bytes
    rolled_back: tuple[bytes, ...]
    applied: tuple[bytes, ...]

    @property
    def depth(self) -> int:
        return len(self.rolled_back)


class ChainIndex:
    """Block tree with cumulative work, ledger snapshots and the best tip.

    The best tip has the greatest cumulative work among validated blocks; on a
    tie the block seen first keeps the tip. Only validated blocks are ever
    inserted, so an invalid block can never become part of the best chain.

    Ledger snapshots older than `snapshot_depth` below the best tip are dropped
    except every `checkpoint_interval` heights; `state_of` replays from the
    nearest kept snapshot when an old state is needed again.
    """

    def __init__(
        self,
        genesis: Block,
        genesis_state: LedgerState,
        params: ChainParams,
        *,
        check_work: bool = True,
        fixed_target: int | None = None,
        snapshot_depth: int = 512,
        checkpoint_interval: int = 256,
    ) -> None:
        if snapshot_depth < 1 or checkpoint_interval < 1:
            raise ValueError("snapshot_depth and checkpoint_interval must be >= 1")
        self.params = params
        self.check_work = check_work
        self.fixed_target = fixed_target
        self.snapshot_depth = snapshot_depth
        self.checkpoint_interval = checkpoint_interval

        root_hash = block_hash(genesis.header, params.hash_algo)
        root = IndexEntry(
            block=genesis,
            hash=root_hash,
            parent=None,
            work=block_work(genesis.header.target),
            seen=0,
            difficulty=DifficultyState(
                genesis.header.target, genesis.header.timestamp, params
            ),
            state=genesis_state,
        )
        self.genesis_hash = root_hash
        self._entries: dict[bytes, IndexEntry] = {root_hash: root}
        self._best = root
        self._best_chain: list[bytes] = [root_hash]
        self._by_height: dict[int, list[bytes]] = {0: [root_hash]}
        self._orphans: dict[bytes, list[Block]] = {}
        self._views: dict[bytes, ParentView] = {}
        self._child_difficulty: dict[bytes, DifficultyState] = {}
        self._pruned_to = 1
        self._seen = 1

    def __contains__(self, block_hash_: object) -> bool:
        return block_hash_ in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[IndexEntry]:
        return iter(self._entries.values())

    @property
    def best(self) -> IndexEntry:
        return self._best

    @property
    def best_tip(self) -> bytes:
        return self._best.hash

    @property
    def height(self) -> int:
        return self._best.height

    @property
    def orphan_count(self) -> int:
        return sum(len(v) for v in self._orphans.values())

    def get(self, block_hash_: bytes) -> IndexEntry | None:
        return self._entries.get(block_hash_)

    def entry(self, block_hash_: bytes) -> IndexEntry:
        try:
            return self._entries[block_hash_]
        except KeyError:
            raise KeyError(f"Unknown block {block_hash_.hex()[:12]}") from None

    def best_chain(self) -> list[bytes]:
        """Hashes of the best chain, genesis first."""
        return list(self._best_chain)

    def is_on_best_chain(self, block_hash_: bytes) -> bool:
        entry = self._entries.get(block_hash_)
        return entry is not None and self._on_best(entry)

    def _on_best(self, entry: IndexEntry) -> bool:
        h = entry.height
        return h < len(self._best_chain) and self._best_chain[h] == entry.hash

    def _ancestor(self, entry: IndexEntry, height: int) -> IndexEntry:
        if height > entry.height or height < 0:
            raise ValueError(f"No ancestor at height {height} below {entry.height}")
        node = entry
        while node.height > height:
            if self._on_best(node):
                return self._entries[self._best_chain[height]]
            assert node.parent is not None
            node = node.parent
        return node

    def state_of(self, block_hash_: bytes) -> LedgerState:
        """Ledger after the given block."""
        node = self.entry(block_hash_)
        replay: list[IndexEntry] = []
        while node.state is None:
            replay.append(node)
            assert node.parent is not None
            node = node.parent
        state = node.state
        for item in reversed(replay):
            state = apply_block(state, item.block, self.params)
        return state

    def _difficulty_for_child(self, parent: IndexEntry) -> DifficultyState:
        cached = self._child_difficulty.get(parent.hash)
        if cached is not None:
            return cached
        if self.fixed_target is not None:
            difficulty = DifficultyState(
                self.fixed_target, parent.difficulty.boundary_timestamp, self.params
            )
        else:
            difficulty = parent.difficulty.for_child(
                parent.height + 1,
                lambda h: self._ancestor(parent, h).block.header.timestamp,
            )
        self._child_difficulty[parent.hash] = difficulty
        return difficulty

    def next_target(self, parent_hash: bytes) -> int:
        """Target a child of `parent_hash` must carry."""
        return self._difficulty_for_child(self.entry(parent_hash)).target

    def parent_view(self, parent_hash: bytes) -> ParentView:
        view = self._views.get(parent_hash)
        if view is None:
            parent = self.entry(parent_hash)
            view = ParentView(
                hash=parent.hash,
                height=parent.height,
                state=self.state_of(parent_hash),
                expected_target=self._difficulty_for_child(parent).target,
                params=self.params,
            )
            self._views[parent_hash] = view
        return view

    def extend_chain(self, block: Block) -> ReorgReport | None:
        """Validate and insert `block`, then any orphans waiting on it.

        Returns a ReorgReport when the best tip moved off its previous branch.
        Raises ValidationError for an invalid block and UnknownParentError when
        the parent is unknown (the block is buffered until the parent arrives).
        """
        new_hash = block_hash(block.header, self.params.hash_algo)
        if new_hash in self._entries:
            return None
        parent = self._entries.get(block.header.parent_hash)
        if parent is None:
            self._orphans.setdefault(block.header.parent_hash, []).append(block)
            logger.debug(f"Buffered orphan {new_hash.hex()[:12]}")
            raise UnknownParentError(new_hash, block.header.parent_hash)

        old_best = self._best
        self._insert(block, new_hash, parent)
        self._connect_orphans(new_hash)
        return self._reorg_report(old_best)

    def _insert(self, block: Block, new_hash: bytes, parent: IndexEntry) -> IndexEntry:
        view = self.parent_view(parent.hash)
        state = validate_block(block, view, self.params, check_work=self.check_work)
        entry = IndexEntry(
            block=block,
            hash=new_hash,
            parent=parent,
            work=parent.work + block_work(block.header.target),
            seen=self._seen,
            difficulty=self._difficulty_for_child(parent),
            state=state,
        )
        self._seen += 1
        self._entries[new_hash] = entry
        self._by_height.setdefault(entry.height, []).append(new_hash)
        if entry.work > self._best.work:
            self._switch_best(entry)
        return entry

    def _connect_orphans(self, root_hash: bytes) -> None:
        pending = [root_hash]
        while pending:
            parent = self._entries[pending.pop()]
            for child in self._orphans.pop(parent.hash, []):
                child_hash = block_hash(child.header, self.params.hash_algo)
                if child_hash in self._entries:
                    continue
                try:
                    self._insert(child, child_hash, parent)
                except ValidationError as exc:
                    logger.warning(f"Dropped orphan {child_hash.hex()[:12]}: {exc}")
                    continue
                pending.append(child_hash)

    def _switch_best(self, new_best: IndexEntry) -> None:
        branch: list[bytes] = []
        node = new_best
        while not self._on_best(node):
            branch.append(node.hash)
            assert node.parent is not None
            node = node.parent
        del self._best_chain[node.height + 1 :]
        self._best_chain.extend(reversed(branch))
        self._best = new_best
        self._prune()

    def _reorg_report(self, old_best: IndexEntry) -> ReorgReport | None:
        if self._on_best(old_best):
            return None
        rolled_back: list[bytes] = []
        node = old_best
        while not self._on_best(node):
            rolled_back.append(node.hash)
            assert node.parent is not None
            node = node.parent
        report = ReorgReport(
            old_tip=old_best.hash,
            new_tip=self._best.hash,
            fork_point=node.hash,
            rolled_back=tuple(rolled_back),
            applied=tuple(self._best_chain[node.height + 1 :]),
        )
        logger.debug(
            f"Reorg at height {node.height}: -{report.depth} +{len(report.applied)}"
        )
        return report

    def _prune(self) -> None:
        limit = self._best.height - self.snapshot_depth
        for height in range(self._pruned_to, limit + 1):
            if height % self.checkpoint_interval == 0:
                continue
            for h in self._by_height.get(height, ()):
                self._entries[h].state = None
                self._views.pop(h, None)
        self._pruned_to = max(self._pruned_to, limit + 1)

    def branch_from(self, tip: bytes) -> ChainIndex:
        """Private index holding only `tip` and its ancestors, with `tip` as best.

        Entries are shared with this index; blocks added to the branch stay
        invisible here until they are fed to `extend_chain`.
        """
        node = self.entry(tip)
        path: list[IndexEntry] = []
        cursor: IndexEntry | None = node
        while cursor is not None:
            path.append(cursor)
            cursor = cursor.parent
        path.reverse()

        branch = object.__new__(ChainIndex)
        branch.params = self.params
        branch.check_work = self.check_work
        branch.fixed_target = self.fixed_target
        branch.snapshot_depth = self.snapshot_depth
        branch.checkpoint_interval = self.checkpoint_interval
        branch.genesis_hash = self.genesis_hash
        branch._entries = {e.hash: e for e in path}
        branch._best = node
        branch._best_chain = [e.hash for e in path]
        branch._by_height = {e.height: [e.hash] for e in path}
        branch._orphans = {}
        branch._views = {}
        branch._child_difficulty = {}
        branch._pruned_to = self._pruned_to
        branch._seen = self._seen
        return branch

    def blocks(self, hashes: list[bytes] | tuple[bytes, ...]) -> list[Block]:
        return [self.entry(h).block for h in hashes]
