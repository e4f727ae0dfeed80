import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

from config import get_settings
from errors import CapExceededError, ParseError, ValidationError

logger = logging.getLogger(__name__)

Cell = tuple[int, int]  # (col, row) 0始まり

DIRECTIONS: dict[str, Cell] = {"U": (0, -1), "D": (0, 1), "L": (-1, 0), "R": (1, 0)}


# -----------------------------------------------
# 3-CNF-SAT
# -----------------------------------------------
class CnfLiteral(NamedTuple):
    """リテラル x_i または ¬x_i"""

    var: int
    negated: bool = False

    def __str__(self) -> str:
        return f"-{self.var}" if self.negated else str(self.var)


@dataclass(frozen=True)
class CnfFormula:
    """
    CNF論理式

    Notes:
        clausesは節のタプル、各節はCnfLiteralのタプル
        構築時には検証しない(validate_formulaで検証する)
    """

    num_vars: int
    clauses: tuple[tuple[CnfLiteral, ...], ...] = ()

    @classmethod
    def from_ints(cls, num_vars: int, clauses: list[list[int]]) -> "CnfFormula":
        """DIMACS風の符号付き整数リストから論理式を作る"""
        return cls(
            num_vars,
            tuple(
                tuple(CnfLiteral(abs(lit), lit < 0) for lit in clause)
                for clause in clauses
            ),
        )

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)


def validate_formula(f: CnfFormula) -> list[str]:
    """論理式の不変条件違反を列挙する"""
    violations = []
    if f.num_vars < 1:
        violations.append(f"num_vars は1以上が必要です: {f.num_vars}")
    for j, clause in enumerate(f.clauses):
        if not clause:
            violations.append(f"clauses[{j}] が空です")
        for lit in clause:
            if not 1 <= lit.var <= f.num_vars:
                violations.append(
                    f"clauses[{j}] の変数 {lit.var} が範囲 1..{f.num_vars} の外です"
                )
    return violations


def is_three_cnf(f: CnfFormula) -> bool:
    """全ての節がちょうど3リテラルならTrue(節が無ければ真)"""
    return all(len(clause) == 3 for clause in f.clauses)


def parse_dimacs(text: str, source: str | None = None) -> CnfFormula:
    """
    DIMACS CNF形式のテキストを読み込む

    Args:
        text (str): DIMACS CNFテキスト
        source (str | None): エラー表示用のファイル名

    Returns:
        CnfFormula: 読み込んだ論理式

    Raises:
        ParseError: ヘッダー不正、節数の不一致、リテラルが0または範囲外

    Notes:
        節は複数行にまたがってもよく、0で終端する
        SATLIB形式の末尾 "%" 行以降は無視する
    """
    header: tuple[int, int] | None = None
    clauses: list[list[int]] = []
    current: list[int] = []
    current_line = 0
    header_line = 0

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            if header is not None:
                raise ParseError("pヘッダーが2回あります", lineno, source)
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ParseError(f"不正なヘッダーです: {line!r}", lineno, source)
            try:
                num_vars, num_clauses = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError(f"不正なヘッダーです: {line!r}", lineno, source) from None
            if num_vars < 1 or num_clauses < 0:
                raise ParseError(f"不正なヘッダーです: {line!r}", lineno, source)
            header = (num_vars, num_clauses)
            header_line = lineno
            continue

        if header is None:
            raise ParseError("pヘッダーより前に節があります", lineno, source)
        for token in line.split():
            try:
                lit = int(token)
            except ValueError:
                raise ParseError(f"整数ではありません: {token!r}", lineno, source) from None
            if lit == 0:
                if not current:
                    raise ParseError("空の節があります", lineno, source)
                clauses.append(current)
                current = []
                continue
            if abs(lit) > header[0]:
                raise ParseError(
                    f"リテラル {lit} が範囲 1..{header[0]} の外です", lineno, source
                )
            if not current:
                current_line = lineno
            current.append(lit)

    if header is None:
        raise ParseError("pヘッダーがありません", None, source)
    if current:
        raise ParseError("節が0で終端されていません", current_line, source)
    if len(clauses) != header[1]:
        raise ParseError(
            f"節の数がヘッダーと一致しません (header={header[1]}, actual={len(clauses)})",
            header_line,
            source,
        )
    return CnfFormula.from_ints(header[0], clauses)


def format_dimacs(f: CnfFormula) -> str:
    """論理式をDIMACS CNFテキストにする"""
    lines = [f"p cnf {f.num_vars} {f.num_clauses}"]
    for clause in f.clauses:
        lines.append(" ".join(str(lit) for lit in clause) + " 0")
    return "\n".join(lines) + "\n"


def evaluate_formula(f: CnfFormula, assignment: tuple[bool, ...]) -> bool:
    """assignment[i-1] を x_i の値として論理式を評価する"""
    return all(
        any(assignment[lit.var - 1] != lit.negated for lit in clause)
        for clause in f.clauses
    )


def find_satisfying_assignment(
    f: CnfFormula, max_vars: int | None = None
) -> tuple[bool, ...] | None:
    """
    2^n 通りの割り当てを全列挙して充足割り当てを探す

    Args:
        f (CnfFormula): 論理式
        max_vars (int | None): 変数の数の上限(Noneなら設定値)

    Returns:
        tuple[bool, ...] | None: 最初に見つかった充足割り当て(無ければNone)

    Raises:
        CapExceededError: 変数の数が上限を超える場合
    """
    cap = get_settings().sat_max_vars if max_vars is None else max_vars
    if f.num_vars > cap:
        raise CapExceededError("sat_max_vars", cap, f.num_vars)
    # x1 が最上位ビットになる順(False側から)で列挙する
    for assignment in itertools.product((False, True), repeat=f.num_vars):
        if evaluate_formula(f, assignment):
            return assignment
    return None


def sat_oracle(f: CnfFormula, max_vars: int | None = None) -> bool:
    """
    全列挙による充足可能性判定

    Returns:
        bool: 充足可能ならTrue

    Notes:
        見つかった割り当ては節ごとに評価し直してから返す
    """
    witness = find_satisfying_assignment(f, max_vars)
    if witness is None:
        return False
    for j, clause in enumerate(f.clauses):
        if not any(witness[lit.var - 1] != lit.negated for lit in clause):
            raise AssertionError(f"充足割り当てが節 {j} を満たしていません")
    return True


# -----------------------------------------------
# 有向グラフ(Skull Door Graph)
# -----------------------------------------------
@dataclass(frozen=True)
class DirectedGraph:
    """
    有向多重グラフ(自己ループ不可、多重辺は可)

    Notes:
        辺の順序は保持する(還元の出力順が辺の順序で決まるため)
    """

    num_vertices: int
    edges: tuple[tuple[int, int], ...] = ()

    def in_degrees(self) -> list[int]:
        degrees = [0] * self.num_vertices
        for _, dst in self.edges:
            degrees[dst] += 1
        return degrees

    def out_degrees(self) -> list[int]:
        degrees = [0] * self.num_vertices
        for src, _ in self.edges:
            degrees[src] += 1
        return degrees


@dataclass(frozen=True)
class SkullDoorReport:
    """Skull Door Graphの判定結果"""

    is_valid: bool
    alpha: int
    beta: int
    violations: tuple[tuple[int, int, int], ...] = ()  # (頂点, 入次数, 出次数)


def validate_graph(g: DirectedGraph) -> list[str]:
    """グラフの不変条件違反(範囲外の頂点、自己ループ)を列挙する"""
    violations = []
    if g.num_vertices < 0:
        violations.append(f"num_vertices が負です: {g.num_vertices}")
    for k, (src, dst) in enumerate(g.edges):
        if not (0 <= src < g.num_vertices and 0 <= dst < g.num_vertices):
            violations.append(f"edges[{k}] = ({src}, {dst}) に範囲外の頂点があります")
        elif src == dst:
            violations.append(f"edges[{k}] = ({src}, {dst}) は自己ループです")
    return violations


def parse_graph(text: str, source: str | None = None) -> DirectedGraph:
    """
    辺リスト形式のグラフを読み込む

    Args:
        text (str): 1行目に "<頂点数> <辺数>"、以降1行に1辺 "<src> <dst>"(0始まり)
        source (str | None): エラー表示用のファイル名

    Returns:
        DirectedGraph: 読み込んだグラフ

    Raises:
        ParseError: 範囲外の頂点、自己ループ、辺数の不一致
    """
    rows = [
        (lineno, line.split())
        for lineno, line in enumerate(text.splitlines(), start=1)
        if line.strip()
    ]
    if not rows:
        raise ParseError("ヘッダー行がありません", None, source)

    def ints(lineno: int, parts: list[str]) -> tuple[int, int]:
        if len(parts) != 2:
            raise ParseError(f"整数2つが必要です: {' '.join(parts)!r}", lineno, source)
        try:
            return int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(
                f"整数2つが必要です: {' '.join(parts)!r}", lineno, source
            ) from None

    header_line, header = rows[0]
    num_vertices, num_edges = ints(header_line, header)
    if num_vertices < 0 or num_edges < 0:
        raise ParseError("頂点数と辺数は0以上です", header_line, source)

    edges = []
    for lineno, parts in rows[1:]:
        src, dst = ints(lineno, parts)
        if not (0 <= src < num_vertices and 0 <= dst < num_vertices):
            raise ParseError(
                f"頂点番号が範囲 0..{num_vertices - 1} の外です: {src} {dst}",
                lineno,
                source,
            )
        if src == dst:
            raise ParseError(f"自己ループは使えません: {src} {dst}", lineno, source)
        edges.append((src, dst))

    if len(edges) != num_edges:
        raise ParseError(
            f"辺の数がヘッダーと一致しません (header={num_edges}, actual={len(edges)})",
            None,
            source,
        )
    return DirectedGraph(num_vertices, tuple(edges))


def format_graph(g: DirectedGraph) -> str:
    """グラフを辺リスト形式のテキストにする"""
    lines = [f"{g.num_vertices} {len(g.edges)}"]
    lines.extend(f"{src} {dst}" for src, dst in g.edges)
    return "\n".join(lines) + "\n"


def validate_skull_door_graph(g: DirectedGraph) -> SkullDoorReport:
    """
    全頂点の次数が (入1, 出2) か (入2, 出1) かを判定する

    Args:
        g (DirectedGraph): グラフ

    Returns:
        SkullDoorReport: alpha は (1,2) の頂点数、beta は (2,1) の頂点数

    Notes:
        有効なグラフなら入次数の総和と出次数の総和が等しいので alpha == beta になる
        平面性は検査しない
    """
    ins, outs = g.in_degrees(), g.out_degrees()
    alpha = beta = 0
    violations = []
    for v in range(g.num_vertices):
        profile = (ins[v], outs[v])
        if profile == (1, 2):
            alpha += 1
        elif profile == (2, 1):
            beta += 1
        else:
            violations.append((v, ins[v], outs[v]))
    return SkullDoorReport(not violations, alpha, beta, tuple(violations))


def find_pivot_vertex(g: DirectedGraph) -> int:
    """
    入次数2・出次数1の頂点のうち番号が最小のものを返す

    Raises:
        ValidationError: Skull Door Graphでない、または頂点が無い場合
    """
    report = validate_skull_door_graph(g)
    if not report.is_valid:
        raise ValidationError(
            [f"頂点 {v} の次数が (in={i}, out={o}) です" for v, i, o in report.violations]
        )
    if g.num_vertices == 0:
        raise ValidationError(["頂点の無いグラフにはピボットがありません"])
    ins, outs = g.in_degrees(), g.out_degrees()
    return next(v for v in range(g.num_vertices) if ins[v] == 2 and outs[v] == 1)


def ham_cycle_oracle(g: DirectedGraph, max_vertices: int | None = None) -> bool:
    """
    ハミルトン閉路の有無をバックトラックで判定する

    Args:
        g (DirectedGraph): グラフ
        max_vertices (int | None): 頂点数の上限(Noneなら設定値)

    Returns:
        bool: 全頂点をちょうど1回ずつ通る有向閉路があればTrue

    Raises:
        CapExceededError: 頂点数が上限を超える場合

    Notes:
        閉路は頂点0から始める。自己ループは無いので頂点1個のグラフは常にFalse
    """
    cap = get_settings().ham_max_vertices if max_vertices is None else max_vertices
    n = g.num_vertices
    if n > cap:
        raise CapExceededError("ham_max_vertices", cap, n)
    if n == 0:
        return False

    successors: list[set[int]] = [set() for _ in range(n)]
    for src, dst in g.edges:
        if src != dst:
            successors[src].add(dst)

    visited = [False] * n
    visited[0] = True

    def extend(v: int, depth: int) -> bool:
        if depth == n:
            return 0 in successors[v]
        for w in sorted(successors[v]):
            if not visited[w]:
                visited[w] = True
                if extend(w, depth + 1):
                    return True
                visited[w] = False
        return False

    return extend(0, 1)


# -----------------------------------------------
# ナップサック(個数制限なし)
# -----------------------------------------------
class KnapsackItem(NamedTuple):
    weight: int
    value: int


@dataclass(frozen=True)
class KnapsackInstance:
    """
    個数制限なしナップサックの判定問題

    Notes:
        容量 capacity 以内で価値の合計を target 以上にできるか
    """

    capacity: int
    target: int
    items: tuple[KnapsackItem, ...] = ()


def validate_knapsack(k: KnapsackInstance) -> list[str]:
    violations = []
    if k.capacity < 0:
        violations.append(f"capacity は0以上が必要です: {k.capacity}")
    if k.target < 0:
        violations.append(f"target は0以上が必要です: {k.target}")
    for i, item in enumerate(k.items):
        if item.weight < 1:
            violations.append(f"items[{i}].weight は1以上が必要です: {item.weight}")
        if item.value < 0:
            violations.append(f"items[{i}].value は0以上が必要です: {item.value}")
    return violations


def parse_knapsack(text: str, source: str | None = None) -> KnapsackInstance:
    """
    ナップサックのテキスト形式を読み込む

    Args:
        text (str): 1行目 "W V n"、続くn行に "w_i v_i"
        source (str | None): エラー表示用のファイル名

    Returns:
        KnapsackInstance: 読み込んだインスタンス

    Raises:
        ParseError: 書式違反、品目数の不一致、重さが1未満など
    """
    rows = [
        (lineno, line.split())
        for lineno, line in enumerate(text.splitlines(), start=1)
        if line.strip()
    ]
    if not rows:
        raise ParseError("ヘッダー行がありません", None, source)

    def numbers(lineno: int, parts: list[str], count: int) -> list[int]:
        if len(parts) != count:
            raise ParseError(f"整数{count}個が必要です: {' '.join(parts)!r}", lineno, source)
        try:
            values = [int(p) for p in parts]
        except ValueError:
            raise ParseError(
                f"整数{count}個が必要です: {' '.join(parts)!r}", lineno, source
            ) from None
        if any(v < 0 for v in values):
            raise ParseError("負の値は使えません", lineno, source)
        return values

    header_line, header = rows[0]
    capacity, target, count = numbers(header_line, header, 3)
    items = []
    for lineno, parts in rows[1:]:
        weight, value = numbers(lineno, parts, 2)
        if weight < 1:
            raise ParseError("重さは1以上が必要です", lineno, source)
        items.append(KnapsackItem(weight, value))
    if len(items) != count:
        raise ParseError(
            f"品目数がヘッダーと一致しません (header={count}, actual={len(items)})",
            None,
            source,
        )
    return KnapsackInstance(capacity, target, tuple(items))


def format_knapsack(k: KnapsackInstance) -> str:
    lines = [f"{k.capacity} {k.target} {len(k.items)}"]
    lines.extend(f"{item.weight} {item.value}" for item in k.items)
    return "\n".join(lines) + "\n"


def knapsack_oracle(k: KnapsackInstance, max_capacity: int | None = None) -> bool:
    """
    個数制限なしナップサックの動的計画法

    Args:
        k (KnapsackInstance): インスタンス
        max_capacity (int | None): 容量の上限(Noneなら設定値)

    Returns:
        bool: 重さの合計 ≤ W で価値の合計 ≥ V にできればTrue

    Raises:
        CapExceededError: 容量が上限を超える場合
    """
    cap = get_settings().knapsack_max_capacity if max_capacity is None else max_capacity
    if k.capacity > cap:
        raise CapExceededError("knapsack_max_capacity", cap, k.capacity)
    best = [0] * (k.capacity + 1)
    for c in range(1, k.capacity + 1):
        best[c] = best[c - 1]
        for item in k.items:
            if item.weight <= c:
                best[c] = max(best[c], best[c - item.weight] + item.value)
    return best[k.capacity] >= k.target


# -----------------------------------------------
# Push-1
# -----------------------------------------------
PUSH1_EMPTY = "."
PUSH1_BLOCK = "B"
PUSH1_ROBOT = "R"
PUSH1_WIN = "W"
PUSH1_ROBOT_ON_WIN = "X"
PUSH1_BLOCK_ON_WIN = "Y"


@dataclass(frozen=True)
class Push1Instance:
    """
    2次元Push-1の盤面

    Notes:
        ブロックが勝利マスに乗った状態で始まってもよい
        ロボットが最初から勝利マスにいてもよい
    """

    width: int
    height: int
    blocks: frozenset[Cell]
    robot: Cell
    win: Cell

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height


def validate_push1(p: Push1Instance) -> list[str]:
    violations = []
    if p.width < 1 or p.height < 1:
        violations.append(f"盤面の大きさが不正です: {p.width}x{p.height}")
        return violations
    if not p.in_bounds(p.robot):
        violations.append(f"robot {p.robot} が盤面の外です")
    if not p.in_bounds(p.win):
        violations.append(f"win {p.win} が盤面の外です")
    for cell in sorted(p.blocks):
        if not p.in_bounds(cell):
            violations.append(f"block {cell} が盤面の外です")
    if p.robot in p.blocks:
        violations.append(f"robot {p.robot} がブロックと重なっています")
    return violations


def parse_push1(text: str, source: str | None = None) -> Push1Instance:
    """
    Push-1のASCII盤面を読み込む

    Args:
        text (str): "." 空き, "B" ブロック, "R" ロボット, "W" 勝利マス,
            "X" 勝利マス上のロボット, "Y" 勝利マス上のブロック
        source (str | None): エラー表示用のファイル名

    Returns:
        Push1Instance: 盤面

    Raises:
        ParseError: 行の長さが揃っていない、ロボット・勝利マスが0個または複数
    """
    rows = [
        (lineno, line.strip())
        for lineno, line in enumerate(text.splitlines(), start=1)
        if line.strip()
    ]
    if not rows:
        raise ParseError("盤面がありません", None, source)
    width = len(rows[0][1])
    blocks = set()
    robot: Cell | None = None
    win: Cell | None = None

    for row, (lineno, line) in enumerate(rows):
        if len(line) != width:
            raise ParseError(
                f"行の長さが揃っていません (expected={width}, actual={len(line)})",
                lineno,
                source,
            )
        for col, ch in enumerate(line):
            cell = (col, row)
            if ch not in ".BRWXY":
                raise ParseError(f"未知の文字です: {ch!r}", lineno, source)
            if ch in (PUSH1_ROBOT, PUSH1_ROBOT_ON_WIN):
                if robot is not None:
                    raise ParseError("ロボットが2つあります", lineno, source)
                robot = cell
            if ch in (PUSH1_WIN, PUSH1_ROBOT_ON_WIN, PUSH1_BLOCK_ON_WIN):
                if win is not None:
                    raise ParseError("勝利マスが2つあります", lineno, source)
                win = cell
            if ch in (PUSH1_BLOCK, PUSH1_BLOCK_ON_WIN):
                blocks.add(cell)

    if robot is None:
        raise ParseError("ロボットがありません", None, source)
    if win is None:
        raise ParseError("勝利マスがありません", None, source)
    return Push1Instance(width, len(rows), frozenset(blocks), robot, win)


def format_push1(p: Push1Instance) -> str:
    lines = []
    for row in range(p.height):
        chars = []
        for col in range(p.width):
            cell = (col, row)
            if cell == p.robot:
                chars.append(PUSH1_ROBOT_ON_WIN if cell == p.win else PUSH1_ROBOT)
            elif cell in p.blocks:
                chars.append(PUSH1_BLOCK_ON_WIN if cell == p.win else PUSH1_BLOCK)
            elif cell == p.win:
                chars.append(PUSH1_WIN)
            else:
                chars.append(PUSH1_EMPTY)
        lines.append("".join(chars))
    return "\n".join(lines) + "\n"


def push1_state_bound(p: Push1Instance) -> int:
    """状態数の上界: マス数 × C(マス数, ブロック数)"""
    cells = p.width * p.height
    return cells * math.comb(cells, len(p.blocks))


def push1_oracle(p: Push1Instance, max_states: int | None = None) -> bool:
    """
    (ロボットの位置, ブロックの集合) を状態とした幅優先探索

    Args:
        p (Push1Instance): 盤面
        max_states (int | None): 状態数上界の上限(Noneなら設定値)

    Returns:
        bool: ロボットが勝利マスに立てればTrue

    Raises:
        CapExceededError: 状態数の上界が上限を超える場合

    Notes:
        押せるのは押した先のマスが盤面内かつ空のときだけ
        ロボットがブロックのマスに立つことは無い
    """
    cap = get_settings().push1_max_states if max_states is None else max_states
    bound = push1_state_bound(p)
    if bound > cap:
        raise CapExceededError("push1_max_states", cap, bound)

    start = (p.robot, p.blocks)
    seen = {start}
    queue = deque([start])
    while queue:
        robot, blocks = queue.popleft()
        if robot == p.win:
            logger.debug("push1_oracle: %d 状態で到達", len(seen))
            return True
        for dx, dy in DIRECTIONS.values():
            target = (robot[0] + dx, robot[1] + dy)
            if not p.in_bounds(target):
                continue
            if target in blocks:
                beyond = (target[0] + dx, target[1] + dy)
                if not p.in_bounds(beyond) or beyond in blocks:
                    continue
                state = (target, (blocks - {target}) | {beyond})
            else:
                state = (target, blocks)
            if state not in seen:
                seen.add(state)
                queue.append(state)
    logger.debug("push1_oracle: %d 状態を探索して未到達", len(seen))
    return False
