import json
from dataclasses import dataclass, field
from enum import Enum
from functools import singledispatch
from typing import Any

from errors import SchemaError, ValidationError
from problems import Cell

FORMAT_VERSION = "gbhard-level/1"


# -----------------------------------------------
# Donkey Kong
# -----------------------------------------------
class DkTile(Enum):
    """Donkey Kongのタイル種別(値はレベルJSONと描画で使う1文字)"""

    EMPTY = "."
    SWITCH = "S"
    SLIDE_BOARD_TOP = "T"
    SLIDE_BOARD_BODY = "|"
    BRICK_FLOOR = "="
    BLOCK = "#"


class Polarity(Enum):
    """スライドボードが開く条件"""

    OPEN_WHEN_ON = "open_when_on"
    OPEN_WHEN_OFF = "open_when_off"


@dataclass(frozen=True)
class SlideBoard:
    """
    スイッチに配線されたスライドボード

    Notes:
        cellsは上から下へ縦に連続するマス。先頭がSlideBoardTop、残りがSlideBoardBody
    """

    cells: tuple[Cell, ...]
    switch: int
    polarity: Polarity

    def is_open(self, switch_on: bool) -> bool:
        return switch_on == (self.polarity is Polarity.OPEN_WHEN_ON)


@dataclass(frozen=True)
class DonkeyKongRoom:
    """
    Donkey KongのGame Room

    Notes:
        tilesは行(row)ごとのタプル。row 0 が最上段で、下方向にrowが増える
        Marioはタイルとして持たず、startのマスに置かれる
        全スイッチの初期状態はOff
        boardsは構築順によらず上端マスの位置順に並べ直す
    """

    width: int
    height: int
    tiles: tuple[tuple[DkTile, ...], ...]
    switches: tuple[Cell, ...]
    boards: tuple[SlideBoard, ...]
    start: Cell
    win: Cell

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.boards, key=lambda b: b.cells[:1]))
        object.__setattr__(self, "boards", ordered)

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def tile(self, cell: Cell) -> DkTile:
        return self.tiles[cell[1]][cell[0]]

    def count_tiles(self, kind: DkTile) -> int:
        return sum(row.count(kind) for row in self.tiles)


# -----------------------------------------------
# Wario Land
# -----------------------------------------------
class DoorState(Enum):
    OPEN = "open"
    CLOSED = "closed"


@dataclass(frozen=True)
class WarioRoom:
    treasure: bool = True
    key: bool = False


@dataclass(frozen=True)
class WarioDoor:
    """src から dst へ一方通行のスカルドア"""

    src: int
    dst: int
    state: DoorState = DoorState.CLOSED


@dataclass(frozen=True)
class WarioLevel:
    """
    Wario LandのGame Level

    Notes:
        一方通行のGame Transitionはドア自体の性質として表す
    """

    rooms: tuple[WarioRoom, ...]
    doors: tuple[WarioDoor, ...]
    start_room: int = 0


# -----------------------------------------------
# Harvest Moon GB
# -----------------------------------------------
@dataclass(frozen=True)
class Crop:
    """使い切りの作物(何度でも植え直せる)"""

    grow_days: int
    sale_price: int


@dataclass(frozen=True)
class HarvestMoonInstance:
    num_tiles: int
    days: int
    target_revenue: int
    crops: tuple[Crop, ...] = ()


# -----------------------------------------------
# Mole Mania
# -----------------------------------------------
class FloorKind(Enum):
    HARD = "H"
    SOFT = "S"


@dataclass(frozen=True)
class MoleManiaRoom:
    """
    Mole ManiaのGame Room(地上と地下の2層)

    Notes:
        Weightは押せるが引けない。Muddyはstartのマスに置かれる
    """

    width: int
    height: int
    floor: tuple[tuple[FloorKind, ...], ...]
    weights: frozenset[Cell] = field(default_factory=frozenset)
    start: Cell = (0, 0)
    win: Cell = (0, 0)

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def floor_at(self, cell: Cell) -> FloorKind:
        return self.floor[cell[1]][cell[0]]


Level = DonkeyKongRoom | WarioLevel | HarvestMoonInstance | MoleManiaRoom

GAME_NAMES: dict[type, str] = {
    DonkeyKongRoom: "donkey_kong",
    WarioLevel: "wario_land",
    HarvestMoonInstance: "harvest_moon",
    MoleManiaRoom: "mole_mania",
}


def game_name(level: Level) -> str:
    return GAME_NAMES[type(level)]


# -----------------------------------------------
# 検証
# -----------------------------------------------
@singledispatch
def validate(level: Any) -> list[str]:
    """
    レベルの不変条件違反を列挙する

    Args:
        level (Level): 4種類いずれかのレベル

    Returns:
        list[str]: 違反の説明(空なら有効)
    """
    raise TypeError(f"レベルではありません: {type(level).__name__}")


def _grid_shape_violations(
    name: str, grid: tuple[tuple[Any, ...], ...], width: int, height: int
) -> list[str]:
    if width < 1 or height < 1:
        return [f"大きさが不正です: {width}x{height}"]
    if len(grid) != height:
        return [f"{name} の行数 {len(grid)} が height={height} と一致しません"]
    return [
        f"{name}[{r}] の長さ {len(row)} が width={width} と一致しません"
        for r, row in enumerate(grid)
        if len(row) != width
    ]


@validate.register
def _(level: DonkeyKongRoom) -> list[str]:
    violations = _grid_shape_violations(
        "tiles", level.tiles, level.width, level.height
    )
    if violations:
        return violations

    for i, cell in enumerate(level.switches):
        if not level.in_bounds(cell):
            violations.append(f"switches[{i}] {cell} が部屋の外です")
        elif level.tile(cell) is not DkTile.SWITCH:
            violations.append(f"switches[{i}] {cell} のタイルがSwitchではありません")
    listed = set(level.switches)
    if len(listed) != len(level.switches):
        violations.append("switches に重複があります")

    board_cells: set[Cell] = set()
    for b, board in enumerate(level.boards):
        if not board.cells:
            violations.append(f"boards[{b}] にマスがありません")
            continue
        if not 0 <= board.switch < len(level.switches):
            violations.append(
                f"boards[{b}] のスイッチ番号 {board.switch} が範囲外です"
            )
        col, top = board.cells[0]
        expected = tuple((col, top + k) for k in range(len(board.cells)))
        if board.cells != expected:
            violations.append(f"boards[{b}] のマスが縦に連続していません")
            continue
        for k, cell in enumerate(board.cells):
            if not level.in_bounds(cell):
                violations.append(f"boards[{b}] のマス {cell} が部屋の外です")
                continue
            want = DkTile.SLIDE_BOARD_TOP if k == 0 else DkTile.SLIDE_BOARD_BODY
            if level.tile(cell) is not want:
                violations.append(
                    f"boards[{b}] のマス {cell} のタイルが {want.name} ではありません"
                )
            if cell in board_cells:
                violations.append(f"boards[{b}] のマス {cell} が他のボードと重なっています")
            board_cells.add(cell)

    for r, row in enumerate(level.tiles):
        for c, kind in enumerate(row):
            if kind is DkTile.SWITCH and (c, r) not in listed:
                violations.append(f"({c}, {r}) のSwitchが switches にありません")
            if (
                kind in (DkTile.SLIDE_BOARD_TOP, DkTile.SLIDE_BOARD_BODY)
                and (c, r) not in board_cells
            ):
                violations.append(f"({c}, {r}) のスライドボードがどのボードにも属していません")

    for name, cell in (("start", level.start), ("win", level.win)):
        if not level.in_bounds(cell):
            violations.append(f"{name} {cell} が部屋の外です")
            continue
        if level.tile(cell) is not DkTile.EMPTY:
            violations.append(f"{name} {cell} がEmptyのマスではありません")
        below = (cell[0], cell[1] + 1)
        # 最下段の下は部屋の境界(床)とみなす
        if level.in_bounds(below) and level.tile(below) is not DkTile.BRICK_FLOOR:
            violations.append(f"{name} {cell} の真下がBrickFloorではありません")
    return violations


@validate.register
def _(level: WarioLevel) -> list[str]:
    violations = []
    if not level.rooms:
        violations.append("部屋がありません")
    if not 0 <= level.start_room < len(level.rooms):
        violations.append(f"start_room {level.start_room} が範囲外です")
    for d, door in enumerate(level.doors):
        for name, room in (("src", door.src), ("dst", door.dst)):
            if not 0 <= room < len(level.rooms):
                violations.append(f"doors[{d}].{name} {room} が範囲外です")
        if door.src == door.dst:
            violations.append(f"doors[{d}] が同じ部屋 {door.src} を結んでいます")
    return violations


@validate.register
def _(level: HarvestMoonInstance) -> list[str]:
    violations = []
    if level.num_tiles < 1:
        violations.append(f"num_tiles は1以上が必要です: {level.num_tiles}")
    if level.days < 0:
        violations.append(f"days は0以上が必要です: {level.days}")
    if level.target_revenue < 0:
        violations.append(f"target_revenue は0以上が必要です: {level.target_revenue}")
    for i, crop in enumerate(level.crops):
        if crop.grow_days < 1:
            violations.append(f"crops[{i}].grow_days は1以上が必要です: {crop.grow_days}")
        if crop.sale_price < 0:
            violations.append(f"crops[{i}].sale_price は0以上が必要です: {crop.sale_price}")
    return violations


@validate.register
def _(level: MoleManiaRoom) -> list[str]:
    violations = _grid_shape_violations(
        "floor", level.floor, level.width, level.height
    )
    if violations:
        return violations
    for name, cell in (("start", level.start), ("win", level.win)):
        if not level.in_bounds(cell):
            violations.append(f"{name} {cell} が部屋の外です")
    for cell in sorted(level.weights):
        if not level.in_bounds(cell):
            violations.append(f"weight {cell} が部屋の外です")
    if level.start in level.weights:
        violations.append(f"start {level.start} がWeightと重なっています")
    return violations


def ensure_valid(level: Level) -> None:
    """違反があればValidationErrorを送出する"""
    violations = validate(level)
    if violations:
        raise ValidationError(violations)


# -----------------------------------------------
# シリアライズ(正規化JSON)
# -----------------------------------------------
def _cell_json(cell: Cell) -> list[int]:
    return [cell[0], cell[1]]


def _level_body(level: Level) -> dict[str, Any]:
    if isinstance(level, DonkeyKongRoom):
        return {
            "width": level.width,
            "height": level.height,
            "tiles": ["".join(t.value for t in row) for row in level.tiles],
            "switches": [_cell_json(c) for c in level.switches],
            "boards": [
                {
                    "cells": [_cell_json(c) for c in board.cells],
                    "switch": board.switch,
                    "polarity": board.polarity.value,
                }
                for board in level.boards
            ],
            "start": _cell_json(level.start),
            "win": _cell_json(level.win),
        }
    if isinstance(level, WarioLevel):
        return {
            "rooms": [{"treasure": r.treasure, "key": r.key} for r in level.rooms],
            "doors": [
                {"from": d.src, "to": d.dst, "state": d.state.value}
                for d in level.doors
            ],
            "start_room": level.start_room,
        }
    if isinstance(level, HarvestMoonInstance):
        return {
            "num_tiles": level.num_tiles,
            "days": level.days,
            "target_revenue": level.target_revenue,
            "crops": [
                {"grow_days": c.grow_days, "sale_price": c.sale_price}
                for c in level.crops
            ],
        }
    if isinstance(level, MoleManiaRoom):
        return {
            "width": level.width,
            "height": level.height,
            "floor": ["".join(f.value for f in row) for row in level.floor],
            "weights": [_cell_json(c) for c in sorted(level.weights)],
            "start": _cell_json(level.start),
            "win": _cell_json(level.win),
        }
    raise TypeError(f"レベルではありません: {type(level).__name__}")


def serialize(level: Level) -> str:
    """
    レベルを正規化したJSONテキストにする

    Args:
        level (Level): レベル

    Returns:
        str: キー順固定・セルのリストはソート済みのJSON(末尾改行付き)

    Notes:
        等しいレベルからは必ずバイト単位で同じテキストが出る
    """
    document = {"format": FORMAT_VERSION, "game": game_name(level)}
    document.update(_level_body(level))
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


class _Reader:
    """JSONの値をパス付きで取り出すヘルパー"""

    def __init__(self, data: dict[str, Any], path: str = "$"):
        if not isinstance(data, dict):
            raise SchemaError(path, "オブジェクトが必要です")
        self.data = data
        self.path = path

    def _get(self, key: str) -> Any:
        if key not in self.data:
            raise SchemaError(f"{self.path}.{key}", "必須フィールドがありません")
        return self.data[key]

    def get_int(self, key: str, minimum: int | None = None) -> int:
        value = self._get(key)
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError(f"{self.path}.{key}", "整数が必要です")
        if minimum is not None and value < minimum:
            raise SchemaError(f"{self.path}.{key}", f"{minimum}以上が必要です")
        return value

    def get_bool(self, key: str) -> bool:
        value = self._get(key)
        if not isinstance(value, bool):
            raise SchemaError(f"{self.path}.{key}", "真偽値が必要です")
        return value

    def get_list(self, key: str) -> list[Any]:
        value = self._get(key)
        if not isinstance(value, list):
            raise SchemaError(f"{self.path}.{key}", "配列が必要です")
        return value

    def get_str(self, key: str) -> str:
        value = self._get(key)
        if not isinstance(value, str):
            raise SchemaError(f"{self.path}.{key}", "文字列が必要です")
        return value

    def get_cell(self, key: str) -> Cell:
        return _read_cell(self._get(key), f"{self.path}.{key}")

    def child(self, key: str, index: int, item: Any) -> "_Reader":
        return _Reader(item, f"{self.path}.{key}[{index}]")


def _read_cell(value: Any, path: str) -> Cell:
    if (
        not isinstance(value, list)
        or len(value) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        raise SchemaError(path, "[col, row] の形式が必要です")
    return (value[0], value[1])


def _read_enum(enum_cls: type[Enum], raw: Any, path: str, label: str) -> Any:
    try:
        return enum_cls(raw)
    except ValueError:
        raise SchemaError(path, f"未知の{label} {raw!r}") from None


def _read_grid(
    reader: _Reader, key: str, enum_cls: type[Enum], label: str
) -> tuple[tuple[Any, ...], ...]:
    rows = []
    for r, line in enumerate(reader.get_list(key)):
        path = f"{reader.path}.{key}[{r}]"
        if not isinstance(line, str):
            raise SchemaError(path, "文字列が必要です")
        rows.append(tuple(_read_enum(enum_cls, ch, path, label) for ch in line))
    return tuple(rows)


def _read_weights(reader: _Reader) -> frozenset[Cell]:
    weights: set[Cell] = set()
    for i, raw in enumerate(reader.get_list("weights")):
        path = f"{reader.path}.weights[{i}]"
        cell = _read_cell(raw, path)
        if cell in weights:
            raise SchemaError(path, f"Weightのマス {list(cell)} が重複しています")
        weights.add(cell)
    return frozenset(weights)


def deserialize(text: str) -> Level:
    """
    レベルJSONを読み込む

    Args:
        text (str): serializeが出力した形式のJSON

    Returns:
        Level: レベル

    Raises:
        SchemaError: JSONとして読めない、formatやgameが不正、フィールドの型が違う
            Weightのマスが重複している場合も同じ
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError("$", f"JSONとして読めません: {e.msg} (line {e.lineno})") from None
    reader = _Reader(data)
    if reader.get_str("format") != FORMAT_VERSION:
        raise SchemaError("$.format", f"未対応の形式です: {data['format']!r}")
    game = reader.get_str("game")

    if game == "donkey_kong":
        boards = []
        for b, item in enumerate(reader.get_list("boards")):
            board = reader.child("boards", b, item)
            boards.append(
                SlideBoard(
                    cells=tuple(
                        _read_cell(c, f"{board.path}.cells[{k}]")
                        for k, c in enumerate(board.get_list("cells"))
                    ),
                    switch=board.get_int("switch"),
                    polarity=_read_enum(
                        Polarity, board.get_str("polarity"), f"{board.path}.polarity", "極性"
                    ),
                )
            )
        return DonkeyKongRoom(
            width=reader.get_int("width", 1),
            height=reader.get_int("height", 1),
            tiles=_read_grid(reader, "tiles", DkTile, "タイル種別"),
            switches=tuple(
                _read_cell(c, f"$.switches[{i}]")
                for i, c in enumerate(reader.get_list("switches"))
            ),
            boards=tuple(boards),
            start=reader.get_cell("start"),
            win=reader.get_cell("win"),
        )

    if game == "wario_land":
        rooms = []
        for i, item in enumerate(reader.get_list("rooms")):
            room = reader.child("rooms", i, item)
            rooms.append(WarioRoom(treasure=room.get_bool("treasure"), key=room.get_bool("key")))
        doors = []
        for d, item in enumerate(reader.get_list("doors")):
            door = reader.child("doors", d, item)
            doors.append(
                WarioDoor(
                    src=door.get_int("from", 0),
                    dst=door.get_int("to", 0),
                    state=_read_enum(
                        DoorState, door.get_str("state"), f"{door.path}.state", "ドア状態"
                    ),
                )
            )
        return WarioLevel(tuple(rooms), tuple(doors), reader.get_int("start_room", 0))

    if game == "harvest_moon":
        crops = []
        for i, item in enumerate(reader.get_list("crops")):
            crop = reader.child("crops", i, item)
            crops.append(Crop(crop.get_int("grow_days", 1), crop.get_int("sale_price", 0)))
        return HarvestMoonInstance(
            num_tiles=reader.get_int("num_tiles", 1),
            days=reader.get_int("days", 0),
            target_revenue=reader.get_int("target_revenue", 0),
            crops=tuple(crops),
        )

    if game == "mole_mania":
        return MoleManiaRoom(
            width=reader.get_int("width", 1),
            height=reader.get_int("height", 1),
            floor=_read_grid(reader, "floor", FloorKind, "床の種別"),
            weights=_read_weights(reader),
            start=reader.get_cell("start"),
            win=reader.get_cell("win"),
        )

    raise SchemaError("$.game", f"未知のゲーム {game!r}")


# -----------------------------------------------
# ASCII描画
# -----------------------------------------------
DK_LEGEND = (
    "legend: M=start *=win X=start+win S=switch T=board top |=board body "
    "==brick floor #=block .=empty"
)
MOLE_LEGEND = "legend: M=start *=win X=start+win #=weight Y=weight+win .=hard ~=soft"
WARIO_LEGEND = "legend: T=treasure K=key >=start room, doors are one-way"
HARVEST_LEGEND = "legend: crop <index>: <grow days>d -> <sale price>"

MOLE_FLOOR_GLYPHS = {FloorKind.HARD: ".", FloorKind.SOFT: "~"}


def _marker(cell: Cell, start: Cell, win: Cell) -> str | None:
    if cell == start and cell == win:
        return "X"
    if cell == start:
        return "M"
    if cell == win:
        return "*"
    return None


def render_ascii(level: Level) -> str:
    """
    レベルをASCII図にする(最後に凡例の行が付く)

    Args:
        level (Level): 有効なレベル

    Returns:
        str: 描画結果

    Raises:
        ValidationError: レベルが不変条件を満たさない場合
    """
    ensure_valid(level)
    lines: list[str] = []

    if isinstance(level, DonkeyKongRoom):
        for r, row in enumerate(level.tiles):
            lines.append(
                "".join(
                    _marker((c, r), level.start, level.win) or kind.value
                    for c, kind in enumerate(row)
                )
            )
        lines.append(DK_LEGEND)

    elif isinstance(level, MoleManiaRoom):
        for r, row in enumerate(level.floor):
            chars = []
            for c, kind in enumerate(row):
                marker = _marker((c, r), level.start, level.win)
                on_weight = (c, r) in level.weights
                if marker == "*" and on_weight:
                    chars.append("Y")
                elif marker is not None:
                    chars.append(marker)
                elif on_weight:
                    chars.append("#")
                else:
                    chars.append(MOLE_FLOOR_GLYPHS[kind])
            lines.append("".join(chars))
        lines.append(MOLE_LEGEND)

    elif isinstance(level, WarioLevel):
        for i, room in enumerate(level.rooms):
            flags = ("T" if room.treasure else "-") + ("K" if room.key else "-")
            lead = ">" if i == level.start_room else " "
            lines.append(f"{lead}room {i} [{flags}]")
        for d, door in enumerate(level.doors):
            lines.append(f" door {d}: {door.src} -> {door.dst} ({door.state.value})")
        lines.append(WARIO_LEGEND)

    else:
        lines.append(
            f"tiles={level.num_tiles} days={level.days} target={level.target_revenue}"
        )
        for i, crop in enumerate(level.crops):
            lines.append(f" crop {i}: {crop.grow_days}d -> {crop.sale_price}")
        lines.append(HARVEST_LEGEND)

    return "\n".join(lines) + "\n"
