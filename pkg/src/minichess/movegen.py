"""Attack-set generation: geometry-parameterized magic bitboards plus a
naive ray-scan backend used both as construction oracle and fallback.

Tables are built once per geometry, cached for the process lifetime, and are
immutable afterwards, so they can be shared freely across search threads.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass

from .geometry import Geometry, iter_bits, popcount
from .pieces import BLACK, WHITE, PieceKind
from .variant import VariantConfig

ROOK_DIRS = ((1, 0), (-1, 0), (0, 1), (0, -1))
BISHOP_DIRS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
KNIGHT_OFFSETS = ((2, 1), (1, 2), (-1, 2), (-2, 1), (-2, -1), (-1, -2), (1, -2), (2, -1))
KING_OFFSETS = ROOK_DIRS + BISHOP_DIRS

_U64 = 0xFFFFFFFFFFFFFFFF

# Default per-square retry budget for the magic search; generous relative to
# what 8x8 needs so exotic geometries fail loudly instead of silently.
MAGIC_ATTEMPT_BUDGET = 10_000_000


class MagicSearchExhausted(RuntimeError):
    """No magic multiplier found within the attempt budget for some square."""


def _leap_attacks(geometry: Geometry, sq: int, offsets) -> int:
    rank, file = geometry.rank_of(sq), geometry.file_of(sq)
    bb = 0
    for dr, df in offsets:
        r, f = rank + dr, file + df
        if geometry.in_bounds(r, f):
            bb |= 1 << geometry.square(r, f)
    return bb


def _pawn_attacks(geometry: Geometry, sq: int, side: int) -> int:
    forward = 1 if side == WHITE else -1
    return _leap_attacks(geometry, sq, ((forward, 1), (forward, -1)))


def ray_scan_attacks(geometry: Geometry, sq: int, kind: PieceKind, occupancy: int) -> int:
    """Reference sliding-attack semantics: walk each ray until blocker or edge.

    Blocker squares are included in the attack set; legality filtering
    (own-piece occupancy) happens in the position layer.
    """
    if kind == PieceKind.ROOK:
        dirs = ROOK_DIRS
    elif kind == PieceKind.BISHOP:
        dirs = BISHOP_DIRS
    elif kind == PieceKind.QUEEN:
        dirs = ROOK_DIRS + BISHOP_DIRS
    else:
        raise ValueError(f"{kind} is not a sliding piece")
    rank, file = geometry.rank_of(sq), geometry.file_of(sq)
    attacks = 0
    for dr, df in dirs:
        r, f = rank + dr, file + df
        while geometry.in_bounds(r, f):
            bit = 1 << geometry.square(r, f)
            attacks |= bit
            if occupancy & bit:
                break
            r, f = r + dr, f + df
    return attacks


def relevant_mask(geometry: Geometry, sq: int, kind: PieceKind) -> int:
    """Relevant-blocker mask: every ray square except the last before the edge."""
    dirs = ROOK_DIRS if kind == PieceKind.ROOK else BISHOP_DIRS
    rank, file = geometry.rank_of(sq), geometry.file_of(sq)
    mask = 0
    for dr, df in dirs:
        r, f = rank + dr, file + df
        while geometry.in_bounds(r + dr, f + df):
            mask |= 1 << geometry.square(r, f)
            r, f = r + dr, f + df
    return mask


def blocker_subsets(mask: int):
    """Enumerate all subsets of a mask (Carry-Rippler)."""
    subset = 0
    while True:
        yield subset
        subset = (subset - mask) & mask
        if subset == 0:
            return


@dataclass(frozen=True)
class MagicEntry:
    mask: int
    magic: int
    shift: int
    table_offset: int

    def index(self, occupancy: int) -> int:
        return self.table_offset + ((((occupancy & self.mask) * self.magic) & _U64) >> self.shift)


def _find_magic(geometry: Geometry, sq: int, kind: PieceKind, rng: random.Random,
                budget: int) -> tuple[int, list[int]]:
    mask = relevant_mask(geometry, sq, kind)
    bits = popcount(mask)
    size = 1 << bits
    shift = 64 - bits
    subsets = list(blocker_subsets(mask))
    references = [ray_scan_attacks(geometry, sq, kind, s) for s in subsets]
    for _ in range(budget):
        # Sparse candidates (few set bits) succeed far more often.
        magic = rng.getrandbits(64) & rng.getrandbits(64) & rng.getrandbits(64)
        table: list[int] = [-1] * size
        ok = True
        for subset, reference in zip(subsets, references):
            idx = ((subset * magic) & _U64) >> shift
            if table[idx] < 0:
                table[idx] = reference
            elif table[idx] != reference:
                ok = False
                break
        if ok:
            return magic, [t if t >= 0 else 0 for t in table]
    raise MagicSearchExhausted(
        f"no magic for {kind.name} on square {sq} of {geometry.width}x{geometry.height} "
        f"within {budget} attempts"
    )


class AttackTables:
    """Per-geometry attack maps: leapers by lookup, sliders by magic or ray scan."""

    def __init__(self, geometry: Geometry, seed: int = 0, *, use_magic: bool = True,
                 attempt_budget: int = MAGIC_ATTEMPT_BUDGET):
        self.geometry = geometry
        self.use_magic = use_magic
        n = geometry.num_squares
        self.knight = [_leap_attacks(geometry, sq, KNIGHT_OFFSETS) for sq in range(n)]
        self.king = [_leap_attacks(geometry, sq, KING_OFFSETS) for sq in range(n)]
        self.pawn = (
            [_pawn_attacks(geometry, sq, WHITE) for sq in range(n)],
            [_pawn_attacks(geometry, sq, BLACK) for sq in range(n)],
        )
        self.rook_entries: list[MagicEntry] = []
        self.bishop_entries: list[MagicEntry] = []
        self.table: list[int] = []
        if use_magic:
            rng = random.Random(seed)
            for kind, entries in ((PieceKind.ROOK, self.rook_entries),
                                  (PieceKind.BISHOP, self.bishop_entries)):
                for sq in range(n):
                    mask = relevant_mask(geometry, sq, kind)
                    magic, local = _find_magic(geometry, sq, kind, rng, attempt_budget)
                    entries.append(MagicEntry(mask=mask, magic=magic,
                                              shift=64 - popcount(mask),
                                              table_offset=len(self.table)))
                    self.table.extend(local)

    def rook_attacks(self, sq: int, occupancy: int) -> int:
        if self.use_magic:
            return self.table[self.rook_entries[sq].index(occupancy)]
        return ray_scan_attacks(self.geometry, sq, PieceKind.ROOK, occupancy)

    def bishop_attacks(self, sq: int, occupancy: int) -> int:
        if self.use_magic:
            return self.table[self.bishop_entries[sq].index(occupancy)]
        return ray_scan_attacks(self.geometry, sq, PieceKind.BISHOP, occupancy)

    def queen_attacks(self, sq: int, occupancy: int) -> int:
        return self.rook_attacks(sq, occupancy) | self.bishop_attacks(sq, occupancy)


def sliding_attacks(tables: AttackTables, sq: int, kind: PieceKind, occupancy: int) -> int:
    if kind == PieceKind.ROOK:
        return tables.rook_attacks(sq, occupancy)
    if kind == PieceKind.BISHOP:
        return tables.bishop_attacks(sq, occupancy)
    if kind == PieceKind.QUEEN:
        return tables.queen_attacks(sq, occupancy)
    raise ValueError(f"{kind} is not a sliding piece")


def build_tables(geometry: Geometry, seed: int = 0, *, use_magic: bool = True,
                 attempt_budget: int = MAGIC_ATTEMPT_BUDGET) -> AttackTables:
    return AttackTables(geometry, seed, use_magic=use_magic, attempt_budget=attempt_budget)


_CACHE: dict[tuple[int, int, bool], AttackTables] = {}
_CACHE_LOCK = threading.Lock()


def tables_for(geometry: Geometry, *, use_magic: bool = True) -> AttackTables:
    """Process-lifetime table cache; construction seed is fixed so cached
    tables are identical across runs."""
    key = (geometry.width, geometry.height, use_magic)
    tables = _CACHE.get(key)
    if tables is None:
        with _CACHE_LOCK:
            tables = _CACHE.get(key)
            if tables is None:
                tables = build_tables(geometry, seed=0, use_magic=use_magic)
                _CACHE[key] = tables
    return tables


def perft(config: VariantConfig, depth: int, *, use_magic: bool = True) -> int:
    """Count leaf nodes of the legal-move tree at exactly `depth` plies."""
    from .position import initial_position, legal_moves

    tables = tables_for(config.geometry, use_magic=use_magic)

    def walk(pos, d: int) -> int:
        if d == 0:
            return 1
        moves = legal_moves(pos, tables=tables)
        if d == 1:
            return len(moves)
        total = 0
        for move in moves:
            total += walk(pos.apply(move, tables=tables), d - 1)
        return total

    return walk(initial_position(config), depth)
