"""Variant configuration: board geometry, starting array, and rule toggles.

Variants are described by a plain-text key/value document (one ``key = value``
per line, ``#`` comments).  The grammar is documented in docs/formats.md.
Three presets ship with the package: ``silverman4x5``, ``losalamos6x6`` and
``standard8x8``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

from .geometry import Geometry, GeometryError
from .pieces import BLACK, WHITE, PieceKind, kind_from_letter

PRESET_NAMES = ("silverman4x5", "losalamos6x6", "standard8x8")

# Castling-rights bit layout, also used by Position.
CASTLE_WK = 1
CASTLE_WQ = 2
CASTLE_BK = 4
CASTLE_BQ = 8

_CASTLE_LETTERS = {"K": CASTLE_WK, "Q": CASTLE_WQ, "k": CASTLE_BK, "q": CASTLE_BQ}


class VariantError(ValueError):
    """Malformed variant document or illegal starting array."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        prefix = []
        if line is not None:
            prefix.append(f"line {line}")
        if key is not None:
            prefix.append(f"field {key!r}")
        super().__init__((": ".join(prefix) + ": " if prefix else "") + message)
        self.line = line
        self.key = key


@dataclass(frozen=True)
class VariantConfig:
    name: str
    geometry: Geometry
    board: str  # FEN board field, ranks from top (last rank) to bottom
    castling_rights: int  # initial rights mask, 0 when castling disabled
    pawn_double_step: bool
    en_passant: bool
    halfmove_limit: int
    repetition_limit: int
    allowed_promotions: frozenset[PieceKind] = field(
        default_factory=lambda: frozenset(
            {PieceKind.KNIGHT, PieceKind.BISHOP, PieceKind.ROOK, PieceKind.QUEEN}
        )
    )

    def castling_enabled(self, side: int) -> bool:
        mask = (CASTLE_WK | CASTLE_WQ) if side == WHITE else (CASTLE_BK | CASTLE_BQ)
        return bool(self.castling_rights & mask)


def parse_board_field(board: str, geometry: Geometry) -> list[tuple[int, int, PieceKind]]:
    """Expand a FEN board field into (square, side, kind) placements."""
    rows = board.split("/")
    if len(rows) != geometry.height:
        raise VariantError(
            f"board field has {len(rows)} ranks, geometry wants {geometry.height}", key="board"
        )
    placements = []
    for row_idx, row in enumerate(rows):
        rank = geometry.height - 1 - row_idx  # FEN lists top rank first
        file = 0
        for ch in row:
            if ch.isdigit():
                file += int(ch)
            else:
                if file >= geometry.width:
                    raise VariantError(f"rank {rank + 1} overflows {geometry.width} files", key="board")
                side = WHITE if ch.isupper() else BLACK
                kind = kind_from_letter(ch)
                placements.append((geometry.square(rank, file), side, kind))
                file += 1
        if file != geometry.width:
            raise VariantError(f"rank {rank + 1} covers {file} files, expected {geometry.width}", key="board")
    return placements


def validate_starting_array(config: VariantConfig) -> None:
    placements = parse_board_field(config.board, config.geometry)
    kings = {WHITE: 0, BLACK: 0}
    last_rank = {WHITE: config.geometry.height - 1, BLACK: 0}
    for sq, side, kind in placements:
        if kind == PieceKind.KING:
            kings[side] += 1
        if kind == PieceKind.PAWN:
            rank = config.geometry.rank_of(sq)
            if rank == last_rank[side] or rank == last_rank[1 - side]:
                raise VariantError("pawn on a promotion or back rank", key="board")
    for side, count in kings.items():
        if count != 1:
            raise VariantError(f"side needs exactly one king, found {count}", key="board")


def _parse_bool(value: str, line: int, key: str) -> bool:
    lowered = value.lower()
    if lowered in ("on", "true", "yes", "1"):
        return True
    if lowered in ("off", "false", "no", "0"):
        return False
    raise VariantError(f"expected on/off, got {value!r}", line=line, key=key)


def _parse_int(value: str, line: int, key: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise VariantError(f"expected integer, got {value!r}", line=line, key=key) from None


def parse_variant(text: str) -> VariantConfig:
    """Parse a variant document, or resolve a bundled preset by name."""
    stripped = text.strip()
    if stripped in PRESET_NAMES:
        return load_preset(stripped)

    values: dict[str, str] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise VariantError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in values:
            raise VariantError("duplicate key", line=lineno, key=key)
        values[key] = value
        lines[key] = lineno

    def require(key: str) -> str:
        if key not in values:
            raise VariantError("missing required field", key=key)
        return values[key]

    geom_text = require("geometry")
    try:
        w_text, h_text = geom_text.lower().split("x")
        geometry = Geometry(int(w_text), int(h_text))
    except GeometryError as exc:
        raise VariantError(str(exc), line=lines.get("geometry"), key="geometry") from None
    except ValueError:
        raise VariantError(
            f"expected WIDTHxHEIGHT, got {geom_text!r}", line=lines.get("geometry"), key="geometry"
        ) from None

    board = require("board")

    castling_text = values.get("castling", "-")
    castling_rights = 0
    if castling_text != "-":
        for ch in castling_text:
            if ch not in _CASTLE_LETTERS:
                raise VariantError(
                    f"castling letters must be from KQkq, got {ch!r}",
                    line=lines.get("castling"), key="castling",
                )
            castling_rights |= _CASTLE_LETTERS[ch]

    pawn_double_step = _parse_bool(values.get("pawn_double_step", "off"),
                                   lines.get("pawn_double_step", 0), "pawn_double_step")
    en_passant = _parse_bool(values.get("en_passant", "off"),
                             lines.get("en_passant", 0), "en_passant")
    if en_passant and not pawn_double_step:
        raise VariantError("en_passant requires pawn_double_step", key="en_passant")

    halfmove_limit = _parse_int(values.get("halfmove_limit", "100"),
                                lines.get("halfmove_limit", 0), "halfmove_limit")
    repetition_limit = _parse_int(values.get("repetition_limit", "3"),
                                  lines.get("repetition_limit", 0), "repetition_limit")
    if halfmove_limit <= 0 or repetition_limit <= 0:
        raise VariantError("limits must be positive", key="halfmove_limit")

    promo_text = values.get("promotions", "NBRQ")
    promotions = set()
    for ch in promo_text:
        kind = kind_from_letter(ch)
        if kind in (PieceKind.PAWN, PieceKind.KING):
            raise VariantError("promotions limited to NBRQ", line=lines.get("promotions"), key="promotions")
        promotions.add(kind)
    if not promotions:
        raise VariantError("at least one promotion piece required", key="promotions")

    known = {"geometry", "board", "castling", "pawn_double_step", "en_passant",
             "halfmove_limit", "repetition_limit", "promotions", "name"}
    for key in values:
        if key not in known:
            raise VariantError("unknown field", line=lines[key], key=key)

    config = VariantConfig(
        name=values.get("name", f"custom{geometry.width}x{geometry.height}"),
        geometry=geometry,
        board=board,
        castling_rights=castling_rights,
        pawn_double_step=pawn_double_step,
        en_passant=en_passant,
        halfmove_limit=halfmove_limit,
        repetition_limit=repetition_limit,
        allowed_promotions=frozenset(promotions),
    )
    validate_starting_array(config)
    return config


def load_preset(name: str) -> VariantConfig:
    if name not in PRESET_NAMES:
        raise VariantError(f"unknown preset {name!r}; valid presets: {', '.join(PRESET_NAMES)}")
    text = resources.files("minichess.presets").joinpath(f"{name}.cfg").read_text()
    return parse_variant(text)


def load_variant(name_or_path: str) -> VariantConfig:
    """Resolve a preset name, a path to a variant document, or inline text."""
    if name_or_path in PRESET_NAMES:
        return load_preset(name_or_path)
    from pathlib import Path

    path = Path(name_or_path)
    if path.exists():
        return parse_variant(path.read_text())
    if "=" in name_or_path:
        return parse_variant(name_or_path)
    raise VariantError(
        f"unknown variant {name_or_path!r}; valid presets: {', '.join(PRESET_NAMES)}"
    )
