import json

import pytest

from errors import SchemaError, ValidationError
from levels import (
    DK_LEGEND,
    FORMAT_VERSION,
    MOLE_LEGEND,
    Crop,
    DkTile,
    DonkeyKongRoom,
    DoorState,
    FloorKind,
    HarvestMoonInstance,
    MoleManiaRoom,
    Polarity,
    SlideBoard,
    WarioDoor,
    WarioLevel,
    WarioRoom,
    deserialize,
    ensure_valid,
    game_name,
    render_ascii,
    serialize,
    validate,
)
from problems import CnfFormula
from reductions import reduce_3cnf_to_dk

T = {kind.value: kind for kind in DkTile}


def dk_room(rows, start, win, switches=(), boards=()):
    """文字列の行からDonkeyKongRoomを作る"""
    return DonkeyKongRoom(
        width=len(rows[0]),
        height=len(rows),
        tiles=tuple(tuple(T[ch] for ch in row) for row in rows),
        switches=tuple(switches),
        boards=tuple(boards),
        start=start,
        win=win,
    )


def mole_room(rows, start, win, weights=()):
    kinds = {"H": FloorKind.HARD, "S": FloorKind.SOFT}
    return MoleManiaRoom(
        width=len(rows[0]),
        height=len(rows),
        floor=tuple(tuple(kinds[ch] for ch in row) for row in rows),
        weights=frozenset(weights),
        start=start,
        win=win,
    )


@pytest.fixture
def wired_room():
    """スイッチ1個とボード1枚の部屋"""
    board = SlideBoard(((3, 0), (3, 1)), 0, Polarity.OPEN_WHEN_ON)
    return dk_room(
        ["S..T.", "===|.", "====="],
        start=(1, 0),
        win=(4, 1),
        switches=[(0, 0)],
        boards=[board],
    )


def sample_levels():
    return [
        dk_room(["...", "==="], (0, 0), (2, 0)),
        WarioLevel(
            (WarioRoom(True, True), WarioRoom(True, False)),
            (WarioDoor(0, 1, DoorState.CLOSED), WarioDoor(1, 0, DoorState.OPEN)),
            start_room=1,
        ),
        HarvestMoonInstance(2, 10, 7, (Crop(3, 4), Crop(5, 9))),
        mole_room(["HSH", "SSS"], (0, 0), (2, 1), weights=[(1, 0)]),
    ]


# -----------------------------------------------
# 検証
# -----------------------------------------------
def test_validate_wario_two_rooms():
    """2部屋のWarioレベルは有効"""
    assert validate(sample_levels()[1]) == []


def test_validate_all_samples(wired_room):
    for level in sample_levels() + [wired_room]:
        assert validate(level) == []


def test_validate_dk_floating_win():
    """Winの下がEmptyなら違反1個"""
    room = dk_room(["...", "==."], (0, 0), (2, 0))
    violations = validate(room)
    assert len(violations) == 1
    assert "BrickFloor" in violations[0]


def test_validate_dk_bottom_row_counts_as_floor():
    """1x1の部屋は部屋の下端を床とみなす"""
    assert validate(dk_room(["."], (0, 0), (0, 0))) == []


def test_validate_dk_unwired_switch_and_board():
    room = dk_room(["S.T", "==|"], (1, 0), (1, 0))
    violations = validate(room)
    assert any("Switch" in v for v in violations)
    assert sum("スライドボード" in v for v in violations) == 2


def test_validate_dk_board_not_contiguous():
    board = SlideBoard(((1, 0), (1, 2)), 0, Polarity.OPEN_WHEN_ON)
    room = dk_room(["ST.", "===", ".|."], (0, 0), (2, 0), [(0, 0)], [board])
    assert any("連続" in v for v in validate(room))


def test_validate_mole_start_on_weight():
    """startがWeightと重なると違反1個"""
    room = mole_room(["HHH"], (0, 0), (2, 0), weights=[(0, 0)])
    assert len(validate(room)) == 1


def test_validate_wario_bad_door():
    level = WarioLevel((WarioRoom(),), (WarioDoor(0, 0), WarioDoor(0, 3)), 0)
    assert len(validate(level)) == 2


def test_validate_harvest_negative_fields():
    inst = HarvestMoonInstance(0, -1, -1, (Crop(0, -1),))
    assert len(validate(inst)) == 5


def test_ensure_valid_raises():
    with pytest.raises(ValidationError) as e:
        ensure_valid(mole_room(["HH"], (0, 0), (1, 0), weights=[(0, 0)]))
    assert len(e.value.violations) == 1


def test_validate_rejects_non_level():
    with pytest.raises(TypeError):
        validate("not a level")


def test_boards_sorted_by_position():
    """ボードは上端マスの位置順に並べ直される"""
    low = SlideBoard(((1, 2), (1, 3)), 0, Polarity.OPEN_WHEN_ON)
    high = SlideBoard(((1, 0), (1, 1)), 0, Polarity.OPEN_WHEN_OFF)
    room = dk_room(["ST..", "=|..", ".T..", ".|.."], (0, 0), (0, 0), [(0, 0)], [low, high])
    assert room.boards == (high, low)


def test_slide_board_is_open():
    on = SlideBoard(((0, 0),), 0, Polarity.OPEN_WHEN_ON)
    off = SlideBoard(((0, 0),), 0, Polarity.OPEN_WHEN_OFF)
    assert on.is_open(True) and not on.is_open(False)
    assert off.is_open(False) and not off.is_open(True)


# -----------------------------------------------
# シリアライズ
# -----------------------------------------------
@pytest.mark.parametrize("index", range(4))
def test_serialize_round_trip(index):
    """読み戻すと同じレベル"""
    level = sample_levels()[index]
    assert deserialize(serialize(level)) == level


def test_serialize_round_trip_boards(wired_room):
    assert deserialize(serialize(wired_room)) == wired_room


def test_serialize_is_canonical():
    """等しいレベルはバイト単位で同じ"""
    a = mole_room(["HHH", "HHH"], (0, 0), (2, 1), weights=[(1, 0), (0, 1), (2, 0)])
    b = mole_room(["HHH", "HHH"], (0, 0), (2, 1), weights=[(2, 0), (1, 0), (0, 1)])
    assert serialize(a) == serialize(b)
    data = json.loads(serialize(a))
    assert data["format"] == FORMAT_VERSION
    assert data["game"] == "mole_mania"
    assert data["weights"] == [[0, 1], [1, 0], [2, 0]]


def test_game_name():
    assert [game_name(level) for level in sample_levels()] == [
        "donkey_kong",
        "wario_land",
        "harvest_moon",
        "mole_mania",
    ]


def test_deserialize_unknown_tile():
    """未知のタイル種別は種別を含むエラー"""
    data = json.loads(serialize(sample_levels()[0]))
    data["tiles"][0] = ".?."
    with pytest.raises(SchemaError) as e:
        deserialize(json.dumps(data))
    assert "'?'" in str(e.value)
    assert e.value.path == "$.tiles[0]"


@pytest.mark.parametrize(
    "mutate, path",
    [
        (lambda d: d.pop("width"), "$.width"),
        (lambda d: d.update(start=[0]), "$.start"),
        (lambda d: d.update(game="tetris"), "$.game"),
        (lambda d: d.update(format="other/9"), "$.format"),
    ],
)
def test_deserialize_schema_errors(mutate, path):
    data = json.loads(serialize(sample_levels()[0]))
    mutate(data)
    with pytest.raises(SchemaError) as e:
        deserialize(json.dumps(data))
    assert e.value.path == path


def test_deserialize_duplicate_weights():
    """同じマスのWeightが2つあれば黙ってまとめずにエラー"""
    data = json.loads(serialize(sample_levels()[3]))
    data["weights"] = [[1, 0], [2, 0], [1, 0]]
    with pytest.raises(SchemaError) as e:
        deserialize(json.dumps(data))
    assert e.value.path == "$.weights[2]"


def test_deserialize_not_json():
    with pytest.raises(SchemaError):
        deserialize("{not json")
    with pytest.raises(SchemaError):
        deserialize("[1, 2]")


# -----------------------------------------------
# ASCII描画
# -----------------------------------------------
def test_render_mole_row():
    """1x3、真ん中にWeight"""
    room = mole_room(["HHH"], (0, 0), (2, 0), weights=[(1, 0)])
    assert render_ascii(room) == "M#*\n" + MOLE_LEGEND + "\n"


def test_render_mole_weight_on_win():
    """勝利マスに乗ったWeightは Y で描く"""
    room = mole_room(["HHH"], (0, 0), (2, 0), weights=[(2, 0)])
    assert render_ascii(room).splitlines()[0] == "M.Y"
    assert "Y=weight+win" in MOLE_LEGEND


def test_render_soft_floor():
    room = mole_room(["SHS"], (1, 0), (1, 0))
    assert render_ascii(room).splitlines()[0] == "~X~"


def test_render_single_cell_dk():
    """start==win の1x1の部屋"""
    assert render_ascii(dk_room(["."], (0, 0), (0, 0))) == "X\n" + DK_LEGEND + "\n"


def test_render_reduced_dk_has_three_stacked_boards():
    """1節の論理式の還元結果にはボード上端が縦に3つ並ぶ"""
    room = reduce_3cnf_to_dk(CnfFormula.from_ints(3, [[1, 2, 3]]))
    grid = render_ascii(room).splitlines()[: room.height]
    tops = [(c, r) for r, line in enumerate(grid) for c, ch in enumerate(line) if ch == "T"]
    assert len(tops) == 3
    assert len({c for c, _ in tops}) == 1


def test_render_wario_and_harvest():
    wario, harvest = sample_levels()[1], sample_levels()[2]
    text = render_ascii(wario)
    assert ">room 1 [T-]" in text
    assert " door 0: 0 -> 1 (closed)" in text
    assert " crop 1: 5d -> 9" in render_ascii(harvest)


def test_render_invalid_level():
    with pytest.raises(ValidationError):
        render_ascii(dk_room(["...", "..."], (0, 0), (2, 0)))
