import json
import logging
import time
from collections.abc import Callable
from dataclasses import asdict, dataclass
from typing import Any

from errors import ReductionError
from levels import (
    Crop,
    DkTile,
    DonkeyKongRoom,
    DoorState,
    FloorKind,
    HarvestMoonInstance,
    Level,
    MoleManiaRoom,
    Polarity,
    SlideBoard,
    WarioDoor,
    WarioLevel,
    WarioRoom,
    validate,
)
from problems import (
    CnfFormula,
    DirectedGraph,
    KnapsackInstance,
    Push1Instance,
    find_pivot_vertex,
    format_dimacs,
    format_graph,
    format_knapsack,
    format_push1,
    is_three_cnf,
    parse_dimacs,
    parse_graph,
    parse_knapsack,
    parse_push1,
    validate_formula,
    validate_graph,
    validate_knapsack,
    validate_push1,
    validate_skull_door_graph,
)

logger = logging.getLogger(__name__)


# -----------------------------------------------
# Donkey Kong の部屋の寸法
# -----------------------------------------------
# 行は上から 0..7。最下段(7)は全面BrickFloor
DK_HEIGHT = 8
DK_BASELINE = DK_HEIGHT - 1
DK_PLATFORM_ROW = DK_BASELINE - 3  # スイッチ列の立ち位置(2段の落下で戻れない)
DK_GADGET_WIDTH = 6  # 梯子2列 + 通路左 + ボード列 + 通路右 + 縦穴
# DKの出力マス数は DK_SIZE_CONSTANT * (n + m) 以下
DK_SIZE_CONSTANT = 48


def _dk_corridor_row(level: int) -> int:
    """下から level 番目(0始まり)の通路の立ち位置の行"""
    return DK_BASELINE - 2 - 2 * level


def reduce_3cnf_to_dk(f: CnfFormula) -> DonkeyKongRoom:
    """
    3-CNF論理式からDonkey Kongの部屋を作る

    Args:
        f (CnfFormula): 全ての節が3リテラルの論理式

    Returns:
        DonkeyKongRoom: 幅 n + 3 + 6m、高さ8の部屋

    Raises:
        ReductionError: 3-CNFでない、または変数番号が範囲外の場合

    Notes:
        左から右へ次の順に並べる
        1. Start(高さ3の足場の左端)
        2. 変数ごとのスイッチ n 個(初期状態Off)
        3. 高さ2の落下。ここから先はスイッチ列に戻れないので割り当てが固定される
        4. 節ごとのガジェット
           - 2列のジグザグ梯子(1段ずつ登れる)で3本の通路の入口に行ける
           - 通路は下から l3, l2, l1 の順。各通路を1枚のボードが塞ぐ
           - 3枚のボードは1本の列に縦に並び、l_t = x_i ならスイッチiがOnのとき開く
           - 通路の右側は縦穴に落ちて床に戻る(どれか1本通れれば次へ進める)
        5. 最下段の右端の床の上にWin
    """
    violations = validate_formula(f)
    if violations:
        raise ReductionError("; ".join(violations))
    if not is_three_cnf(f):
        raise ReductionError("3-CNFではありません(3リテラルでない節があります)")

    n, m = f.num_vars, f.num_clauses
    width = n + 3 + DK_GADGET_WIDTH * m
    grid = [[DkTile.EMPTY] * width for _ in range(DK_HEIGHT)]

    def put(col: int, row: int, kind: DkTile) -> None:
        grid[row][col] = kind

    for col in range(width):
        put(col, DK_BASELINE, DkTile.BRICK_FLOOR)

    # 足場とスイッチ列
    for col in range(n + 1):
        put(col, DK_PLATFORM_ROW + 1, DkTile.BRICK_FLOOR)
        put(col, DK_PLATFORM_ROW + 2, DkTile.BLOCK)
    switches = []
    for i in range(n):
        put(1 + i, DK_PLATFORM_ROW, DkTile.SWITCH)
        switches.append((1 + i, DK_PLATFORM_ROW))

    boards = []
    for j, clause in enumerate(f.clauses):
        x = n + 2 + DK_GADGET_WIDTH * j
        ladder_a, ladder_b = x, x + 1
        left, board_col, right = x + 2, x + 3, x + 4

        # 梯子: A列は偶数段、B列は奇数段に足場
        for level in range(2):
            put(ladder_a, DK_BASELINE - 2 - 2 * level, DkTile.BLOCK)
        for level in range(3):
            put(ladder_b, DK_BASELINE - 1 - 2 * level, DkTile.BLOCK)

        # 通路の床と天井
        for col in (left, right):
            for level in range(3):
                put(col, _dk_corridor_row(level) + 1, DkTile.BRICK_FLOOR)
            put(col, _dk_corridor_row(2) - 1, DkTile.BRICK_FLOOR)
        put(board_col, _dk_corridor_row(2) - 1, DkTile.BRICK_FLOOR)

        # 上の通路から l1, l2, l3
        for t, lit in enumerate(clause):
            row = _dk_corridor_row(2 - t)
            put(board_col, row, DkTile.SLIDE_BOARD_TOP)
            put(board_col, row + 1, DkTile.SLIDE_BOARD_BODY)
            boards.append(
                SlideBoard(
                    cells=((board_col, row), (board_col, row + 1)),
                    switch=lit.var - 1,
                    polarity=Polarity.OPEN_WHEN_OFF if lit.negated else Polarity.OPEN_WHEN_ON,
                )
            )

    return DonkeyKongRoom(
        width=width,
        height=DK_HEIGHT,
        tiles=tuple(tuple(row) for row in grid),
        switches=tuple(switches),
        boards=tuple(boards),
        start=(0, DK_PLATFORM_ROW),
        win=(width - 1, DK_BASELINE - 1),
    )


# -----------------------------------------------
# Wario Land
# -----------------------------------------------
def reduce_hamcycle_to_wario(g: DirectedGraph) -> WarioLevel:
    """
    Skull Door GraphからWario Landのレベルを作る

    Args:
        g (DirectedGraph): 空でないSkull Door Graph

    Returns:
        WarioLevel: 頂点ごとの部屋 + 新しい部屋u。開始はピボット頂点vの部屋

    Raises:
        ReductionError: Skull Door Graphでない、または空の場合

    Notes:
        全ての部屋に宝、u以外の部屋に鍵を1つ置く
        辺 (i, j) は閉じた一方通行ドア r_i -> r_j(辺の順)
        最後に v -> u の開いたドアを足す。uから出るドアは無い
    """
    violations = validate_graph(g)
    if violations:
        raise ReductionError("; ".join(violations))
    report = validate_skull_door_graph(g)
    if not report.is_valid:
        raise ReductionError(
            f"Skull Door Graphではありません(違反頂点 {len(report.violations)} 個)"
        )
    if g.num_vertices == 0:
        raise ReductionError("空のグラフは還元できません")

    pivot = find_pivot_vertex(g)
    u = g.num_vertices
    rooms = [WarioRoom(treasure=True, key=True) for _ in range(g.num_vertices)]
    rooms.append(WarioRoom(treasure=True, key=False))
    doors = [WarioDoor(src, dst, DoorState.CLOSED) for src, dst in g.edges]
    doors.append(WarioDoor(pivot, u, DoorState.OPEN))
    return WarioLevel(tuple(rooms), tuple(doors), start_room=pivot)


# -----------------------------------------------
# Harvest Moon GB
# -----------------------------------------------
def reduce_knapsack_to_harvest(k: KnapsackInstance) -> HarvestMoonInstance:
    """タイル1枚、W日、目標V、品目ごとに (w_i日で育ちv_iで売れる) 作物"""
    violations = validate_knapsack(k)
    if violations:
        raise ReductionError("; ".join(violations))
    return HarvestMoonInstance(
        num_tiles=1,
        days=k.capacity,
        target_revenue=k.target,
        crops=tuple(Crop(item.weight, item.value) for item in k.items),
    )


# -----------------------------------------------
# Mole Mania
# -----------------------------------------------
def reduce_push1_to_mole(p: Push1Instance) -> MoleManiaRoom:
    """全面Hardの床、ブロックと同じ位置にWeight、ロボットの位置がstart"""
    violations = validate_push1(p)
    if violations:
        raise ReductionError("; ".join(violations))
    return MoleManiaRoom(
        width=p.width,
        height=p.height,
        floor=tuple((FloorKind.HARD,) * p.width for _ in range(p.height)),
        weights=frozenset(p.blocks),
        start=p.robot,
        win=p.win,
    )


# -----------------------------------------------
# 還元の実行と統計
# -----------------------------------------------
@dataclass(frozen=True)
class ReductionStats:
    """
    1回の還元の大きさと時間

    Notes:
        source_size: 3cnf は n+m、hamcycle は |V|+|E|、knapsack は品目数、push1 はマス数
        output_size: DK はマス数、Wario は部屋数+ドア数、Harvest は作物数、Mole はマス数
    """

    source: str
    source_size: int
    output_size: int
    wall_clock_ms: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class SourceKind:
    """入力問題の種類ごとの部品(パーサー、還元、サイズの定義)"""

    name: str
    game: str
    parse: Callable[..., Any]
    format: Callable[[Any], str]
    reduce: Callable[[Any], Level]
    source_size: Callable[[Any], int]


SOURCES: dict[str, SourceKind] = {
    "3cnf": SourceKind(
        "3cnf",
        "donkey_kong",
        parse_dimacs,
        format_dimacs,
        reduce_3cnf_to_dk,
        lambda f: f.num_vars + f.num_clauses,
    ),
    "hamcycle": SourceKind(
        "hamcycle",
        "wario_land",
        parse_graph,
        format_graph,
        reduce_hamcycle_to_wario,
        lambda g: g.num_vertices + len(g.edges),
    ),
    "knapsack": SourceKind(
        "knapsack",
        "harvest_moon",
        parse_knapsack,
        format_knapsack,
        reduce_knapsack_to_harvest,
        lambda k: len(k.items),
    ),
    "push1": SourceKind(
        "push1",
        "mole_mania",
        parse_push1,
        format_push1,
        reduce_push1_to_mole,
        lambda p: p.width * p.height,
    ),
}


def output_size(level: Level) -> int:
    if isinstance(level, DonkeyKongRoom):
        return level.width * level.height
    if isinstance(level, WarioLevel):
        return len(level.rooms) + len(level.doors)
    if isinstance(level, HarvestMoonInstance):
        return len(level.crops)
    return level.width * level.height


def check_size_bounds(source: str, instance: Any, level: Level) -> None:
    """
    還元の出力サイズが決められた上限・等式を満たすか確認する

    Raises:
        ReductionError: 満たさない場合
    """
    problems: list[str] = []
    if source == "3cnf":
        limit = DK_SIZE_CONSTANT * (instance.num_vars + instance.num_clauses)
        if output_size(level) > limit:
            problems.append(f"DKのマス数 {output_size(level)} が上限 {limit} を超えました")
    elif source == "hamcycle":
        if len(level.rooms) != instance.num_vertices + 1:
            problems.append(f"部屋数 {len(level.rooms)} が |V|+1 と一致しません")
        if len(level.doors) != len(instance.edges) + 1:
            problems.append(f"ドア数 {len(level.doors)} が |E|+1 と一致しません")
    elif source == "knapsack":
        if (level.days, level.target_revenue, level.num_tiles) != (
            instance.capacity,
            instance.target,
            1,
        ):
            problems.append("W, V, タイル数 が入力と一致しません")
        if [(c.grow_days, c.sale_price) for c in level.crops] != [
            tuple(item) for item in instance.items
        ]:
            problems.append("作物が品目と一致しません")
    elif source == "push1":
        if (level.width, level.height) != (instance.width, instance.height):
            problems.append("盤面の大きさが入力と一致しません")
        if len(level.weights) != len(instance.blocks):
            problems.append("Weightの数がブロック数と一致しません")
    violations = validate(level)
    if violations:
        problems.append("出力レベルが不正です: " + "; ".join(violations))
    if problems:
        raise ReductionError("; ".join(problems))


def run_reduction(
    source: str,
    instance: Any,
    reducer: Callable[[Any], Level] | None = None,
    check_bounds: bool = True,
) -> tuple[Level, ReductionStats]:
    """
    還元を実行し、サイズの上限を確認して統計と一緒に返す

    Args:
        source (str): "3cnf" / "hamcycle" / "knapsack" / "push1"
        instance (Any): 入力インスタンス
        reducer (Callable | None): 差し替える還元関数(テスト用。Noneなら標準)
        check_bounds (bool): Falseならサイズの上限・等式の確認を省く(出力の検証は常に行う)

    Returns:
        tuple[Level, ReductionStats]: 出力レベルと統計

    Raises:
        ReductionError: 前提条件違反、または出力サイズの上限違反
    """
    kind = SOURCES.get(source)
    if kind is None:
        raise ReductionError(f"未知の入力問題です: {source!r}")
    started = time.perf_counter()
    level = (reducer or kind.reduce)(instance)
    elapsed = (time.perf_counter() - started) * 1000.0
    if check_bounds:
        check_size_bounds(source, instance, level)
    else:
        violations = validate(level)
        if violations:
            raise ReductionError("出力レベルが不正です: " + "; ".join(violations))
    stats = ReductionStats(source, kind.source_size(instance), output_size(level), elapsed)
    logger.debug("run_reduction: %s", stats)
    return level, stats
