"""Immutable variant-chess positions: state transition, legality, termination.

A Position is a value object: every field is fixed at construction, so
positions can be shared freely between search threads.  The Zobrist key is
maintained incrementally by ``apply`` and doubles as the repetition-detection
and transposition identity.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum, IntEnum

from .geometry import Geometry, iter_bits
from .movegen import AttackTables, tables_for
from .pieces import BLACK, WHITE, PieceKind, piece_letter, kind_from_letter
from .variant import (
    CASTLE_BK,
    CASTLE_BQ,
    CASTLE_WK,
    CASTLE_WQ,
    VariantConfig,
    parse_board_field,
)


class IllegalMove(ValueError):
    pass


class FenError(ValueError):
    pass


class MoveFlag(IntEnum):
    QUIET = 0
    CAPTURE = 1
    DOUBLE_PUSH = 2
    EN_PASSANT = 3
    CASTLE_KING = 4
    CASTLE_QUEEN = 5


@dataclass(frozen=True)
class Move:
    from_sq: int
    to_sq: int
    promotion: PieceKind | None = None
    flags: MoveFlag = MoveFlag.QUIET

    def sort_key(self) -> tuple[int, int, int]:
        return (self.from_sq, self.to_sq, -1 if self.promotion is None else int(self.promotion))

    def coord(self, geometry: Geometry) -> str:
        """Coordinate notation, e.g. ``b1a3`` or ``b4b5n``."""
        text = geometry.square_name(self.from_sq) + geometry.square_name(self.to_sq)
        if self.promotion is not None:
            text += piece_letter(self.promotion, BLACK)
        return text

    @property
    def is_capture(self) -> bool:
        return self.flags in (MoveFlag.CAPTURE, MoveFlag.EN_PASSANT)


class DrawReason(Enum):
    STALEMATE = "stalemate"
    REPETITION = "repetition"
    HALFMOVE_LIMIT = "halfmove_limit"
    INSUFFICIENT_MATERIAL = "insufficient_material"


@dataclass(frozen=True)
class GameOutcome:
    kind: str  # "ongoing" | "win" | "draw"
    winner: int | None = None
    reason: DrawReason | None = None

    @property
    def is_ongoing(self) -> bool:
        return self.kind == "ongoing"

    @staticmethod
    def ongoing() -> "GameOutcome":
        return GameOutcome("ongoing")

    @staticmethod
    def win(side: int) -> "GameOutcome":
        return GameOutcome("win", winner=side)

    @staticmethod
    def draw(reason: DrawReason) -> "GameOutcome":
        return GameOutcome("draw", reason=reason)


# Zobrist keys are geometry-independent (64 squares max) and fixed forever so
# hashes, checkpoints and dataset files stay comparable across processes.
_rng = random.Random(0x5EEDC0DE)
_PIECE_KEYS = [[_rng.getrandbits(64) for _ in range(64)] for _ in range(12)]
_CASTLE_KEYS = [_rng.getrandbits(64) for _ in range(4)]
_EP_FILE_KEYS = [_rng.getrandbits(64) for _ in range(8)]
_SIDE_KEY = _rng.getrandbits(64)
del _rng

_CORNER_RIGHTS: dict[tuple[int, bool], int] = {
    (WHITE, True): CASTLE_WK, (WHITE, False): CASTLE_WQ,
    (BLACK, True): CASTLE_BK, (BLACK, False): CASTLE_BQ,
}


def compute_key(boards: tuple[int, ...], side_to_move: int, castling: int,
                ep_square: int, geometry: Geometry) -> int:
    """From-scratch Zobrist key; ``apply`` maintains the same value incrementally."""
    key = 0
    for idx in range(12):
        for sq in iter_bits(boards[idx]):
            key ^= _PIECE_KEYS[idx][sq]
    for bit in range(4):
        if castling & (1 << bit):
            key ^= _CASTLE_KEYS[bit]
    if ep_square >= 0:
        key ^= _EP_FILE_KEYS[geometry.file_of(ep_square)]
    if side_to_move == BLACK:
        key ^= _SIDE_KEY
    return key


class Position:
    """Full game state. Immutable; equality is semantic state identity
    (boards, side, rights, en-passant, clocks) excluding the repetition stack,
    which is path metadata."""

    __slots__ = ("config", "boards", "side_to_move", "castling", "ep_square",
                 "halfmove_clock", "fullmove_number", "repetition_stack", "key",
                 "occupied", "occupied_side", "_moves", "_moves_tables")

    def __init__(self, config: VariantConfig, boards: tuple[int, ...], side_to_move: int,
                 castling: int, ep_square: int, halfmove_clock: int, fullmove_number: int,
                 repetition_stack: tuple[int, ...] | None = None, key: int | None = None):
        self.config = config
        self.boards = boards
        self.side_to_move = side_to_move
        self.castling = castling
        self.ep_square = ep_square
        self.halfmove_clock = halfmove_clock
        self.fullmove_number = fullmove_number
        if key is None:
            key = compute_key(boards, side_to_move, castling, ep_square, config.geometry)
        self.key = key
        if repetition_stack is None:
            repetition_stack = (key,)
        self.repetition_stack = repetition_stack
        white = 0
        black = 0
        for idx in range(6):
            white |= boards[idx]
            black |= boards[6 + idx]
        self.occupied_side = (white, black)
        self.occupied = white | black
        self._moves: list[Move] | None = None
        self._moves_tables: AttackTables | None = None

    @property
    def geometry(self) -> Geometry:
        return self.config.geometry

    def piece_bb(self, side: int, kind: PieceKind) -> int:
        return self.boards[side * 6 + kind]

    def king_square(self, side: int) -> int:
        return self.boards[side * 6 + PieceKind.KING].bit_length() - 1

    def piece_at(self, sq: int) -> tuple[int, PieceKind] | None:
        bit = 1 << sq
        if not self.occupied & bit:
            return None
        side = WHITE if self.occupied_side[WHITE] & bit else BLACK
        for kind in PieceKind:
            if self.boards[side * 6 + kind] & bit:
                return side, kind
        raise AssertionError("occupancy out of sync")

    def repetition_count(self) -> int:
        return self.repetition_stack.count(self.key)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Position):
            return NotImplemented
        return (self.boards == other.boards and self.side_to_move == other.side_to_move
                and self.castling == other.castling and self.ep_square == other.ep_square
                and self.halfmove_clock == other.halfmove_clock
                and self.fullmove_number == other.fullmove_number)

    def __hash__(self) -> int:
        return self.key

    def __repr__(self) -> str:
        return f"Position({serialize_fen(self)!r})"

    def pretty(self) -> str:
        geom = self.geometry
        rows = []
        for rank in range(geom.height - 1, -1, -1):
            cells = []
            for file in range(geom.width):
                piece = self.piece_at(geom.square(rank, file))
                cells.append(piece_letter(piece[1], piece[0]) if piece else ".")
            rows.append(f"{rank + 1} " + " ".join(cells))
        rows.append("  " + " ".join("abcdefgh"[: geom.width]))
        return "\n".join(rows)

    # -- state transition -------------------------------------------------

    def apply(self, move: Move, *, tables: AttackTables | None = None,
              check_legal: bool = False) -> "Position":
        config = self.config
        geom = config.geometry
        side = self.side_to_move
        enemy = 1 - side
        from_bit = 1 << move.from_sq
        to_bit = 1 << move.to_sq

        piece = self.piece_at(move.from_sq)
        if piece is None or piece[0] != side:
            raise IllegalMove(f"no {['white', 'black'][side]} piece on {geom.square_name(move.from_sq)}")
        kind = piece[1]
        last_rank = geom.height - 1 if side == WHITE else 0
        if kind == PieceKind.PAWN and geom.rank_of(move.to_sq) == last_rank:
            if move.promotion is None:
                raise IllegalMove("pawn reaching last rank must promote")
            if move.promotion not in config.allowed_promotions:
                raise IllegalMove(f"promotion to {move.promotion.name} not allowed in this variant")
        elif move.promotion is not None:
            raise IllegalMove("promotion field set on a non-promoting move")
        if check_legal and move not in set(legal_moves(self, tables=tables)):
            raise IllegalMove(f"{move.coord(geom)} is not legal here")

        boards = list(self.boards)
        key = self.key
        if self.ep_square >= 0:
            key ^= _EP_FILE_KEYS[geom.file_of(self.ep_square)]

        moving_idx = side * 6 + kind
        boards[moving_idx] ^= from_bit
        key ^= _PIECE_KEYS[moving_idx][move.from_sq]

        captured_kind: PieceKind | None = None
        if move.flags == MoveFlag.EN_PASSANT:
            forward = geom.width if side == WHITE else -geom.width
            captured_sq = move.to_sq - forward
            captured_idx = enemy * 6 + PieceKind.PAWN
            boards[captured_idx] ^= 1 << captured_sq
            key ^= _PIECE_KEYS[captured_idx][captured_sq]
            captured_kind = PieceKind.PAWN
        elif self.occupied_side[enemy] & to_bit:
            target = self.piece_at(move.to_sq)
            assert target is not None
            captured_kind = target[1]
            captured_idx = enemy * 6 + captured_kind
            boards[captured_idx] ^= to_bit
            key ^= _PIECE_KEYS[captured_idx][move.to_sq]

        placed_kind = move.promotion if move.promotion is not None else kind
        placed_idx = side * 6 + placed_kind
        boards[placed_idx] ^= to_bit
        key ^= _PIECE_KEYS[placed_idx][move.to_sq]

        if move.flags in (MoveFlag.CASTLE_KING, MoveFlag.CASTLE_QUEEN):
            back = 0 if side == WHITE else geom.height - 1
            if move.flags == MoveFlag.CASTLE_KING:
                rook_from = geom.square(back, geom.width - 1)
                rook_to = move.to_sq - 1
            else:
                rook_from = geom.square(back, 0)
                rook_to = move.to_sq + 1
            rook_idx = side * 6 + PieceKind.ROOK
            boards[rook_idx] ^= (1 << rook_from) | (1 << rook_to)
            key ^= _PIECE_KEYS[rook_idx][rook_from] ^ _PIECE_KEYS[rook_idx][rook_to]

        castling = self.castling
        if castling:
            if kind == PieceKind.KING:
                clear = (CASTLE_WK | CASTLE_WQ) if side == WHITE else (CASTLE_BK | CASTLE_BQ)
                castling &= ~clear
            elif kind == PieceKind.ROOK:
                castling &= ~_corner_right(geom, side, move.from_sq)
            if captured_kind == PieceKind.ROOK and move.flags != MoveFlag.EN_PASSANT:
                castling &= ~_corner_right(geom, enemy, move.to_sq)
            for bit in range(4):
                mask = 1 << bit
                if (self.castling & mask) and not (castling & mask):
                    key ^= _CASTLE_KEYS[bit]

        ep_square = -1
        if move.flags == MoveFlag.DOUBLE_PUSH and config.en_passant:
            mid = (move.from_sq + move.to_sq) // 2
            if tables is None:
                tables = tables_for(geom)
            # Record the target only when an enemy pawn stands ready to take it;
            # keeps equal-looking states hashing equal on transpositions.
            if tables.pawn[side][mid] & boards[enemy * 6 + PieceKind.PAWN]:
                ep_square = mid
                key ^= _EP_FILE_KEYS[geom.file_of(mid)]

        key ^= _SIDE_KEY

        irreversible = kind == PieceKind.PAWN or captured_kind is not None
        halfmove = 0 if irreversible else self.halfmove_clock + 1
        stack = () if irreversible else self.repetition_stack
        return Position(
            config=config,
            boards=tuple(boards),
            side_to_move=enemy,
            castling=castling,
            ep_square=ep_square,
            halfmove_clock=halfmove,
            fullmove_number=self.fullmove_number + (1 if side == BLACK else 0),
            repetition_stack=stack + (key,),
            key=key,
        )


def _corner_right(geom: Geometry, side: int, sq: int) -> int:
    back = 0 if side == WHITE else geom.height - 1
    if sq == geom.square(back, 0):
        return _CORNER_RIGHTS[(side, False)]
    if sq == geom.square(back, geom.width - 1):
        return _CORNER_RIGHTS[(side, True)]
    return 0


def initial_position(config: VariantConfig) -> Position:
    boards = [0] * 12
    for sq, side, kind in parse_board_field(config.board, config.geometry):
        boards[side * 6 + kind] |= 1 << sq
    return Position(
        config=config,
        boards=tuple(boards),
        side_to_move=WHITE,
        castling=_validated_rights(config, tuple(boards)),
        ep_square=-1,
        halfmove_clock=0,
        fullmove_number=1,
    )


def _validated_rights(config: VariantConfig, boards: tuple[int, ...], rights: int | None = None) -> int:
    """Drop rights bits whose rook is missing from its corner."""
    geom = config.geometry
    if rights is None:
        rights = config.castling_rights
    kept = 0
    for side in (WHITE, BLACK):
        back = 0 if side == WHITE else geom.height - 1
        rooks = boards[side * 6 + PieceKind.ROOK]
        for kingside, corner_file in ((False, 0), (True, geom.width - 1)):
            flag = _CORNER_RIGHTS[(side, kingside)]
            if rights & flag and rooks & (1 << geom.square(back, corner_file)):
                kept |= flag
    return kept


# -- attack queries --------------------------------------------------------

def attacked_by(position: Position, sq: int, side: int, tables: AttackTables | None = None) -> bool:
    """True iff any piece of `side` attacks `sq`."""
    if tables is None:
        tables = tables_for(position.geometry)
    boards = position.boards
    base = side * 6
    if tables.knight[sq] & boards[base + PieceKind.KNIGHT]:
        return True
    if tables.king[sq] & boards[base + PieceKind.KING]:
        return True
    # A square is hit by `side` pawns sitting on the reverse-attack squares.
    if tables.pawn[1 - side][sq] & boards[base + PieceKind.PAWN]:
        return True
    occ = position.occupied
    queens = boards[base + PieceKind.QUEEN]
    if tables.rook_attacks(sq, occ) & (boards[base + PieceKind.ROOK] | queens):
        return True
    if tables.bishop_attacks(sq, occ) & (boards[base + PieceKind.BISHOP] | queens):
        return True
    return False


def is_in_check(position: Position, side: int, tables: AttackTables | None = None) -> bool:
    return attacked_by(position, position.king_square(side), 1 - side, tables)


# -- move generation --------------------------------------------------------

def _pseudo_moves(position: Position, tables: AttackTables) -> list[Move]:
    config = position.config
    geom = config.geometry
    side = position.side_to_move
    own = position.occupied_side[side]
    enemy_occ = position.occupied_side[1 - side]
    occ = position.occupied
    base = side * 6
    moves: list[Move] = []
    width = geom.width
    forward = width if side == WHITE else -width
    last_rank = geom.height - 1 if side == WHITE else 0
    start_rank = 1 if side == WHITE else geom.height - 2
    promo_kinds = sorted(config.allowed_promotions)

    def add_pawn_move(from_sq: int, to_sq: int, flags: MoveFlag) -> None:
        if geom.rank_of(to_sq) == last_rank:
            for kind in promo_kinds:
                moves.append(Move(from_sq, to_sq, promotion=kind, flags=flags))
        else:
            moves.append(Move(from_sq, to_sq, flags=flags))

    for from_sq in iter_bits(position.boards[base + PieceKind.PAWN]):
        to_sq = from_sq + forward
        if not occ & (1 << to_sq):
            add_pawn_move(from_sq, to_sq, MoveFlag.QUIET)
            if (config.pawn_double_step and geom.rank_of(from_sq) == start_rank
                    and not occ & (1 << (to_sq + forward))):
                moves.append(Move(from_sq, to_sq + forward, flags=MoveFlag.DOUBLE_PUSH))
        attacks = tables.pawn[side][from_sq]
        for to_sq in iter_bits(attacks & enemy_occ):
            add_pawn_move(from_sq, to_sq, MoveFlag.CAPTURE)
        if position.ep_square >= 0 and attacks & (1 << position.ep_square):
            moves.append(Move(from_sq, position.ep_square, flags=MoveFlag.EN_PASSANT))

    for kind, attack_fn in (
        (PieceKind.KNIGHT, lambda sq: tables.knight[sq]),
        (PieceKind.KING, lambda sq: tables.king[sq]),
        (PieceKind.BISHOP, lambda sq: tables.bishop_attacks(sq, occ)),
        (PieceKind.ROOK, lambda sq: tables.rook_attacks(sq, occ)),
        (PieceKind.QUEEN, lambda sq: tables.queen_attacks(sq, occ)),
    ):
        for from_sq in iter_bits(position.boards[base + kind]):
            for to_sq in iter_bits(attack_fn(from_sq) & ~own):
                flags = MoveFlag.CAPTURE if enemy_occ & (1 << to_sq) else MoveFlag.QUIET
                moves.append(Move(from_sq, to_sq, flags=flags))

    if position.castling and config.castling_enabled(side):
        moves.extend(_castle_moves(position, tables))
    return moves


def _castle_moves(position: Position, tables: AttackTables) -> list[Move]:
    geom = position.geometry
    side = position.side_to_move
    enemy = 1 - side
    king_sq = position.king_square(side)
    back = 0 if side == WHITE else geom.height - 1
    if geom.rank_of(king_sq) != back:
        return []
    occ = position.occupied
    moves = []
    for kingside, flag_name in ((True, MoveFlag.CASTLE_KING), (False, MoveFlag.CASTLE_QUEEN)):
        right = _CORNER_RIGHTS[(side, kingside)]
        if not position.castling & right:
            continue
        corner = geom.square(back, geom.width - 1 if kingside else 0)
        if not position.boards[side * 6 + PieceKind.ROOK] & (1 << corner):
            continue
        step = 1 if kingside else -1
        dest = king_sq + 2 * step
        if geom.rank_of(dest) != back or not (0 <= dest < geom.num_squares):
            continue
        between = 0
        sq = king_sq + step
        while sq != corner:
            between |= 1 << sq
            sq += step
        if occ & between:
            continue
        if any(attacked_by(position, s, enemy, tables)
               for s in (king_sq, king_sq + step, dest)):
            continue
        moves.append(Move(king_sq, dest, flags=flag_name))
    return moves


def legal_moves(position: Position, tables: AttackTables | None = None) -> list[Move]:
    """Moves that leave the mover's king safe, ordered by (from, to, promotion)."""
    if tables is None:
        tables = tables_for(position.geometry)
    if position._moves is not None and position._moves_tables is tables:
        return position._moves
    side = position.side_to_move
    moves = []
    for move in _pseudo_moves(position, tables):
        child = position.apply(move, tables=tables)
        if not is_in_check(child, side, tables):
            moves.append(move)
    moves.sort(key=Move.sort_key)
    position._moves = moves
    position._moves_tables = tables
    return moves


def apply_move(position: Position, move: Move, *, check_legal: bool = False) -> Position:
    return position.apply(move, check_legal=check_legal)


def move_from_coord(position: Position, text: str, tables: AttackTables | None = None) -> Move:
    """Find the legal move matching coordinate notation (e.g. for record replay)."""
    for move in legal_moves(position, tables=tables):
        if move.coord(position.geometry) == text:
            return move
    raise IllegalMove(f"{text!r} not legal in {serialize_fen(position)!r}")


# -- termination -------------------------------------------------------------

def game_outcome(position: Position, tables: AttackTables | None = None,
                 moves: list[Move] | None = None) -> GameOutcome:
    if moves is None:
        moves = legal_moves(position, tables=tables)
    side = position.side_to_move
    if not moves:
        if is_in_check(position, side, tables):
            return GameOutcome.win(1 - side)
        return GameOutcome.draw(DrawReason.STALEMATE)
    if position.repetition_count() >= position.config.repetition_limit:
        return GameOutcome.draw(DrawReason.REPETITION)
    if position.halfmove_clock >= position.config.halfmove_limit:
        return GameOutcome.draw(DrawReason.HALFMOVE_LIMIT)
    if position.occupied == (position.boards[PieceKind.KING] | position.boards[6 + PieceKind.KING]):
        return GameOutcome.draw(DrawReason.INSUFFICIENT_MATERIAL)
    return GameOutcome.ongoing()


def position_hash(position: Position) -> int:
    return position.key


# -- FEN ----------------------------------------------------------------------

def serialize_fen(position: Position) -> str:
    geom = position.geometry
    rows = []
    for rank in range(geom.height - 1, -1, -1):
        row = ""
        empties = 0
        for file in range(geom.width):
            piece = position.piece_at(geom.square(rank, file))
            if piece is None:
                empties += 1
            else:
                if empties:
                    row += str(empties)
                    empties = 0
                row += piece_letter(piece[1], piece[0])
        if empties:
            row += str(empties)
        rows.append(row)
    board = "/".join(rows)
    side = "w" if position.side_to_move == WHITE else "b"
    castling = ""
    for letter, flag in (("K", CASTLE_WK), ("Q", CASTLE_WQ), ("k", CASTLE_BK), ("q", CASTLE_BQ)):
        if position.castling & flag:
            castling += letter
    ep = geom.square_name(position.ep_square) if position.ep_square >= 0 else "-"
    return (f"{board} {side} {castling or '-'} {ep} "
            f"{position.halfmove_clock} {position.fullmove_number}")


def parse_fen(text: str, config: VariantConfig) -> Position:
    fields = text.split()
    if len(fields) != 6:
        raise FenError(f"expected 6 FEN fields, got {len(fields)}")
    board_field, side_field, castle_field, ep_field, half_field, full_field = fields
    geom = config.geometry

    try:
        placements = parse_board_field(board_field, geom)
    except ValueError as exc:
        raise FenError(str(exc)) from None
    boards = [0] * 12
    for sq, side, kind in placements:
        bit = 1 << sq
        if (boards[side * 6 + kind] | sum(boards)) & bit:
            raise FenError(f"square {geom.square_name(sq)} occupied twice")
        boards[side * 6 + kind] |= bit

    for side in (WHITE, BLACK):
        if boards[side * 6 + PieceKind.KING].bit_count() != 1:
            raise FenError(f"{['white', 'black'][side]} needs exactly one king")
        pawns = boards[side * 6 + PieceKind.PAWN]
        for sq in iter_bits(pawns):
            if geom.rank_of(sq) in (0, geom.height - 1):
                raise FenError("pawn on first or last rank")

    if side_field not in ("w", "b"):
        raise FenError(f"side field must be 'w' or 'b', got {side_field!r}")
    side_to_move = WHITE if side_field == "w" else BLACK

    castling = 0
    if castle_field != "-":
        for ch in castle_field:
            flag = {"K": CASTLE_WK, "Q": CASTLE_WQ, "k": CASTLE_BK, "q": CASTLE_BQ}.get(ch)
            if flag is None:
                raise FenError(f"bad castling letter {ch!r}")
            castling |= flag
    castling = _validated_rights(config, tuple(boards), castling)

    ep_square = -1
    if ep_field != "-":
        try:
            ep_square = geom.parse_square(ep_field)
        except (ValueError, IndexError):
            raise FenError(f"bad en-passant square {ep_field!r}") from None

    try:
        halfmove = int(half_field)
        fullmove = int(full_field)
    except ValueError:
        raise FenError("clock fields must be integers") from None
    if halfmove < 0 or fullmove < 1:
        raise FenError("clock fields out of range")

    position = Position(
        config=config,
        boards=tuple(boards),
        side_to_move=side_to_move,
        castling=castling,
        ep_square=ep_square,
        halfmove_clock=halfmove,
        fullmove_number=fullmove,
    )
    if is_in_check(position, 1 - side_to_move):
        raise FenError("side not to move is in check")
    return position
