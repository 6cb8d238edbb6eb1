"""Piece kinds and side constants shared across the engine."""

from __future__ import annotations

from enum import IntEnum

WHITE = 0
BLACK = 1

SIDE_NAMES = ("white", "black")


class PieceKind(IntEnum):
    PAWN = 0
    KNIGHT = 1
    BISHOP = 2
    ROOK = 3
    QUEEN = 4
    KING = 5


PIECE_LETTERS = "pnbrqk"

# Standard point values; kings carry no material value.
PIECE_VALUES = {
    PieceKind.PAWN: 1,
    PieceKind.KNIGHT: 3,
    PieceKind.BISHOP: 3,
    PieceKind.ROOK: 5,
    PieceKind.QUEEN: 9,
    PieceKind.KING: 0,
}


def piece_letter(kind: PieceKind, side: int) -> str:
    letter = PIECE_LETTERS[kind]
    return letter.upper() if side == WHITE else letter


def kind_from_letter(letter: str) -> PieceKind:
    idx = PIECE_LETTERS.find(letter.lower())
    if idx < 0:
        raise ValueError(f"unknown piece letter {letter!r}")
    return PieceKind(idx)
