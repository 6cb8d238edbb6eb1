"""Board geometry and bitboard primitives.

Squares are indexed rank-major, little-endian: ``square = rank * width + file``
with rank 0 at White's back rank and file 0 on the a-file.  All boards fit in
one 64-bit word (width * height <= 64), so a bitboard is a plain Python int
whose bits outside the active region are always zero.
"""

from __future__ import annotations

from dataclasses import dataclass

FILE_NAMES = "abcdefgh"


class GeometryError(ValueError):
    """Board dimensions outside the supported 64-square envelope."""


@dataclass(frozen=True)
class Geometry:
    width: int
    height: int

    def __post_init__(self) -> None:
        if not (1 <= self.width <= 8 and 1 <= self.height <= 8):
            raise GeometryError(f"files and ranks must be 1..8, got {self.width}x{self.height}")
        if self.width * self.height > 64:
            raise GeometryError(f"{self.width}x{self.height} exceeds 64 squares")

    @property
    def num_squares(self) -> int:
        return self.width * self.height

    @property
    def full_mask(self) -> int:
        return (1 << self.num_squares) - 1

    def square(self, rank: int, file: int) -> int:
        return rank * self.width + file

    def rank_of(self, sq: int) -> int:
        return sq // self.width

    def file_of(self, sq: int) -> int:
        return sq % self.width

    def in_bounds(self, rank: int, file: int) -> bool:
        return 0 <= rank < self.height and 0 <= file < self.width

    def mirror_square(self, sq: int) -> int:
        """Reflect ranks (file unchanged); used for side-to-move orientation."""
        return (self.height - 1 - self.rank_of(sq)) * self.width + self.file_of(sq)

    def square_name(self, sq: int) -> str:
        return f"{FILE_NAMES[self.file_of(sq)]}{self.rank_of(sq) + 1}"

    def parse_square(self, name: str) -> int:
        file = FILE_NAMES.index(name[0])
        rank = int(name[1:]) - 1
        if not self.in_bounds(rank, file):
            raise ValueError(f"square {name!r} outside {self.width}x{self.height} board")
        return self.square(rank, file)


def iter_bits(bb: int):
    """Yield square indices of set bits, lowest first."""
    while bb:
        lsb = bb & -bb
        yield lsb.bit_length() - 1
        bb ^= lsb


def popcount(bb: int) -> int:
    return bb.bit_count()
