import logging
from collections import deque
from collections.abc import Callable, Hashable, Iterable, Iterator
from dataclasses import dataclass
from functools import singledispatch
from typing import Any, TypeVar

from config import get_settings
from errors import CapExceededError
from levels import (
    DkTile,
    DonkeyKongRoom,
    DoorState,
    FloorKind,
    HarvestMoonInstance,
    Level,
    MoleManiaRoom,
    WarioLevel,
    ensure_valid,
)
from problems import DIRECTIONS, Cell

logger = logging.getLogger(__name__)

State = TypeVar("State", bound=Hashable)


@dataclass(frozen=True)
class Decision:
    """
    ソルバーの判定結果

    Notes:
        solvableのときwitnessは開始状態から勝利条件までの行動列
        countersはゲーム固有の探索統計(Mole Maniaの地下状態数など)
    """

    solvable: bool
    states_explored: int
    witness: tuple[str, ...] | None = None
    counters: tuple[tuple[str, int], ...] = ()

    def counter(self, name: str) -> int:
        return dict(self.counters).get(name, 0)


@dataclass(frozen=True)
class DkMovementRules:
    """
    Donkey Kongの抽象化した移動ルール(レベル形式のバージョンと一体)

    Notes:
        1段までの段差は登れる。落下は何段でも安全だが2段以上は戻れない
        横方向のジャンプは無い。スイッチはMarioが同じマスに立って切り替える
        部屋の最下段の下は床とみなす
    """

    step_up_max: int = 1
    safe_fall: int | None = None
    jump_gap: int = 0
    toggle_reach: int = 0


DK_RULES = DkMovementRules()


def format_witness(witness: Iterable[str] | None) -> str:
    return " ".join(witness or ())


def _bfs(
    start: State,
    is_goal: Callable[[State], bool],
    successors: Callable[[State], Iterator[tuple[str, State]]],
    cap: int,
    cap_name: str,
) -> tuple[State | None, dict[State, tuple[State, str] | None]]:
    """
    幅優先探索の共通部分

    Returns:
        tuple: (到達したゴール状態またはNone, 親へのリンク)

    Raises:
        CapExceededError: 探索した状態数が上限を超えた場合
    """
    parents: dict[State, tuple[State, str] | None] = {start: None}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        if is_goal(state):
            return state, parents
        for action, nxt in successors(state):
            if nxt not in parents:
                parents[nxt] = (state, action)
                if len(parents) > cap:
                    raise CapExceededError(cap_name, cap, len(parents))
                queue.append(nxt)
    return None, parents


def _trace(parents: dict[State, tuple[State, str] | None], goal: State) -> tuple[str, ...]:
    actions = []
    link = parents[goal]
    while link is not None:
        state, action = link
        actions.append(action)
        link = parents[state]
    return tuple(reversed(actions))


# -----------------------------------------------
# Donkey Kong
# -----------------------------------------------
DkState = tuple[Cell, int]  # (Marioのマス, スイッチ状態のビット列)


class _DkPhysics:
    """DonkeyKongRoomに対する移動ルールの実装(探索とリプレイで共有)"""

    def __init__(self, room: DonkeyKongRoom):
        self.room = room
        self.static_solid = {
            (c, r)
            for r, row in enumerate(room.tiles)
            for c, kind in enumerate(row)
            if kind in (DkTile.BRICK_FLOOR, DkTile.BLOCK)
        }
        self.switch_index = {cell: i for i, cell in enumerate(room.switches)}
        self._closed_cache: dict[int, frozenset[Cell]] = {}

    def closed_boards(self, mask: int) -> frozenset[Cell]:
        """スイッチ状態maskで閉じている(固体の)ボードのマス"""
        closed = self._closed_cache.get(mask)
        if closed is None:
            closed = frozenset(
                cell
                for board in self.room.boards
                if not board.is_open(bool(mask >> board.switch & 1))
                for cell in board.cells
            )
            self._closed_cache[mask] = closed
        return closed

    def solid(self, cell: Cell, mask: int) -> bool:
        if cell[1] >= self.room.height:
            return True
        if not self.room.in_bounds(cell):
            return True
        return cell in self.static_solid or cell in self.closed_boards(mask)

    def passable(self, cell: Cell, mask: int) -> bool:
        return self.room.in_bounds(cell) and not self.solid(cell, mask)

    def settle(self, cell: Cell, mask: int) -> Cell:
        col, row = cell
        while not self.solid((col, row + 1), mask):
            row += 1
        return (col, row)

    def step(self, state: DkState, action: str) -> DkState | None:
        """行動を1つ適用した次の状態(行えない行動ならNone)"""
        cell, mask = state
        if action == "T":
            index = self.switch_index.get(cell)
            if index is None:
                return None
            mask ^= 1 << index
            return self.settle(cell, mask), mask
        dx = {"L": -1, "R": 1}.get(action)
        if dx is None:
            return None
        side = (cell[0] + dx, cell[1])
        if self.passable(side, mask):
            return self.settle(side, mask), mask
        if not self.room.in_bounds(side):
            return None
        # 横が固体なら1段だけ登る
        up = (side[0], side[1] - DK_RULES.step_up_max)
        if self.passable(up, mask):
            return up, mask
        return None

    def successors(self, state: DkState) -> Iterator[tuple[str, DkState]]:
        for action in ("L", "R", "T"):
            nxt = self.step(state, action)
            if nxt is not None and nxt != state:
                yield action, nxt

    def initial(self) -> DkState:
        return self.settle(self.room.start, 0), 0


def solve_donkey_kong(room: DonkeyKongRoom, max_states: int | None = None) -> Decision:
    """
    (Marioのマス, スイッチ状態) の幅優先探索でWinに届くか判定する

    Args:
        room (DonkeyKongRoom): 有効な部屋
        max_states (int | None): 状態数の上限(Noneなら設定値)

    Returns:
        Decision: 届くならsolvable。witnessは L / R / T の列

    Raises:
        ValidationError: 部屋が不変条件を満たさない場合
        CapExceededError: 状態数が上限を超えた場合

    Notes:
        ボードは「スイッチ状態が極性と食い違うとき」固体になる
    """
    ensure_valid(room)
    cap = get_settings().dk_max_states if max_states is None else max_states
    physics = _DkPhysics(room)
    goal, parents = _bfs(
        physics.initial(),
        lambda s: s[0] == room.win,
        physics.successors,
        cap,
        "dk_max_states",
    )
    logger.debug("solve_donkey_kong: %d 状態", len(parents))
    if goal is None:
        return Decision(False, len(parents))
    return Decision(True, len(parents), _trace(parents, goal))


def replay_donkey_kong(room: DonkeyKongRoom, witness: Iterable[str]) -> bool:
    """witnessを同じルールで再生し、最後にWinに立っていればTrue"""
    physics = _DkPhysics(room)
    state = physics.initial()
    for action in witness:
        nxt = physics.step(state, action)
        if nxt is None:
            return False
        state = nxt
    return state[0] == room.win


# -----------------------------------------------
# Wario Land
# -----------------------------------------------
WarioState = tuple[int, int, int, int]  # (部屋, 残っている鍵, 開いたドア, 集めた宝)


def _wario_initial(level: WarioLevel) -> WarioState:
    keys = sum(1 << i for i, room in enumerate(level.rooms) if room.key)
    opened = sum(1 << d for d, door in enumerate(level.doors) if door.state is DoorState.OPEN)
    start = level.start_room
    collected = (1 << start) if level.rooms[start].treasure else 0
    return start, keys, opened, collected


def _wario_all_treasure(level: WarioLevel) -> int:
    return sum(1 << i for i, room in enumerate(level.rooms) if room.treasure)


def _wario_step(level: WarioLevel, state: WarioState, action: str) -> WarioState | None:
    kind, _, raw = action.partition(":")
    if not raw.isdigit() or int(raw) >= len(level.doors):
        return None
    d = int(raw)
    room, keys, opened, collected = state
    door = level.doors[d]
    if door.src != room:
        return None
    if kind == "open":
        # 鍵は部屋に置かれたまま扱い、その部屋から出るドアにだけ使える
        if opened >> d & 1 or not keys >> room & 1:
            return None
        return room, keys & ~(1 << room), opened | (1 << d), collected
    if kind == "go":
        if not opened >> d & 1:
            return None
        if level.rooms[door.dst].treasure:
            collected |= 1 << door.dst
        return door.dst, keys, opened, collected
    return None


def solve_wario(level: WarioLevel, max_states: int | None = None) -> Decision:
    """
    鍵とスカルドアの状態を含めた幅優先探索で全ての宝を集められるか判定する

    Args:
        level (WarioLevel): 有効なレベル
        max_states (int | None): 状態数の上限(Noneなら設定値)

    Returns:
        Decision: witnessは open:D / go:D の列(Dはドア番号)

    Notes:
        鍵はその部屋から出るドアにしか使えず、使うと消える
        開いたドアは開いたまま
    """
    ensure_valid(level)
    cap = get_settings().wario_max_states if max_states is None else max_states
    everything = _wario_all_treasure(level)
    outgoing: list[list[int]] = [[] for _ in level.rooms]
    for d, door in enumerate(level.doors):
        outgoing[door.src].append(d)

    def successors(state: WarioState) -> Iterator[tuple[str, WarioState]]:
        for d in outgoing[state[0]]:
            for kind in ("open", "go"):
                action = f"{kind}:{d}"
                nxt = _wario_step(level, state, action)
                if nxt is not None:
                    yield action, nxt

    goal, parents = _bfs(
        _wario_initial(level),
        lambda s: s[3] == everything,
        successors,
        cap,
        "wario_max_states",
    )
    logger.debug("solve_wario: %d 状態", len(parents))
    if goal is None:
        return Decision(False, len(parents))
    return Decision(True, len(parents), _trace(parents, goal))


def replay_wario(level: WarioLevel, witness: Iterable[str]) -> bool:
    state = _wario_initial(level)
    for action in witness:
        nxt = _wario_step(level, state, action)
        if nxt is None:
            return False
        state = nxt
    return state[3] == _wario_all_treasure(level)


# -----------------------------------------------
# Harvest Moon GB
# -----------------------------------------------
def solve_harvest(inst: HarvestMoonInstance, max_work: int | None = None) -> Decision:
    """
    1タイルの残り日数を状態としたメモ化深さ優先探索で最大収入を求める

    Args:
        inst (HarvestMoonInstance): 有効なインスタンス
        max_work (int | None): タイル数 × 日数 の上限(Noneなら設定値)

    Returns:
        Decision: 最大収入が目標以上ならsolvable。witnessは "day:tile:crop" の列

    Raises:
        CapExceededError: タイル数 × 日数 が上限を超える場合

    Notes:
        作物iを植えるとそのタイルの残り日数がw_i減り、収穫時にv_iを得る
        タイルどうしは独立で同じ条件なので、最大収入は 1タイルの最大収入 × タイル数
        状態数は日数+1以下
    """
    ensure_valid(inst)
    cap = get_settings().harvest_max_work if max_work is None else max_work
    work = inst.num_tiles * inst.days
    if work > cap:
        raise CapExceededError("harvest_max_work", cap, work)

    def options(left: int) -> list[tuple[int | None, int, int]]:
        """(作物番号 or None(以後使わない), 収入, 次の残り日数)"""
        result: list[tuple[int | None, int, int]] = [(None, 0, 0)]
        for i, crop in enumerate(inst.crops):
            if crop.grow_days <= left:
                result.append((i, crop.sale_price, left - crop.grow_days))
        return result

    best: dict[int, int] = {0: 0}
    choice: dict[int, tuple[int | None, int]] = {0: (None, 0)}
    stack = [inst.days]
    while stack:
        left = stack[-1]
        if left in best:
            stack.pop()
            continue
        moves = options(left)
        pending = [nxt for _, _, nxt in moves if nxt not in best]
        if pending:
            stack.extend(pending)
            continue
        value, crop, nxt = max(
            ((gain + best[nxt], crop, nxt) for crop, gain, nxt in moves),
            key=lambda t: t[0],
        )
        best[left] = value
        choice[left] = (crop, nxt)
        stack.pop()

    revenue = best[inst.days] * inst.num_tiles
    logger.debug("solve_harvest: 最大収入 %d (%d 状態)", revenue, len(best))
    counters = (("max_revenue", revenue),)
    if revenue < inst.target_revenue:
        return Decision(False, len(best), None, counters)

    # 1タイル分の計画を辿り、全タイルで同じ計画を使う
    plan = []
    left = inst.days
    while True:
        crop, nxt = choice[left]
        if crop is None:
            break
        plan.append((inst.days - left, crop))
        left = nxt
    witness = tuple(
        f"{day}:{tile}:{crop}" for tile in range(inst.num_tiles) for day, crop in plan
    )
    return Decision(True, len(best), witness, counters)


def replay_harvest(inst: HarvestMoonInstance, witness: Iterable[str]) -> bool:
    """
    植え付け計画を再生して収入が目標以上になるか確認する

    Notes:
        同じタイルでは前の作物の収穫日以降にしか植えられない(収穫当日は可)
    """
    free_from = [0] * inst.num_tiles
    revenue = 0
    for token in witness:
        try:
            day, tile, crop = (int(part) for part in token.split(":"))
        except ValueError:
            return False
        if not (0 <= tile < inst.num_tiles and 0 <= crop < len(inst.crops)):
            return False
        grow = inst.crops[crop].grow_days
        if day < free_from[tile] or day + grow > inst.days:
            return False
        free_from[tile] = day + grow
        revenue += inst.crops[crop].sale_price
    return revenue >= inst.target_revenue


# -----------------------------------------------
# Mole Mania
# -----------------------------------------------
MoleState = tuple[Cell, bool, frozenset[Cell]]  # (Muddyのマス, 地下にいるか, Weightの集合)


def _mole_step(room: MoleManiaRoom, state: MoleState, action: str) -> MoleState | None:
    cell, below, weights = state
    if action == "Dig":
        if below or room.floor_at(cell) is not FloorKind.SOFT:
            return None
        return cell, True, weights
    if action == "Surface":
        if not below or room.floor_at(cell) is not FloorKind.SOFT or cell in weights:
            return None
        return cell, False, weights
    delta = DIRECTIONS.get(action)
    if delta is None:
        return None
    target = (cell[0] + delta[0], cell[1] + delta[1])
    if not room.in_bounds(target):
        return None
    if below or target not in weights:
        return target, below, weights
    beyond = (target[0] + delta[0], target[1] + delta[1])
    if not room.in_bounds(beyond) or beyond in weights:
        return None
    return target, below, (weights - {target}) | {beyond}


def solve_mole(room: MoleManiaRoom, max_states: int | None = None) -> Decision:
    """
    (Muddyのマス, 層, Weightの集合) の幅優先探索で地上のWinに立てるか判定する

    Args:
        room (MoleManiaRoom): 有効な部屋
        max_states (int | None): 状態数の上限(Noneなら設定値)

    Returns:
        Decision: witnessは U/D/L/R と Dig / Surface の列。countersに地下の状態数

    Notes:
        地上ではWeightを押せるのは押した先が部屋の中かつ空のときだけ
        地下は部屋の範囲内を自由に動ける。地上に出られるのはWeightの無いSoftの下だけ
    """
    ensure_valid(room)
    cap = get_settings().mole_max_states if max_states is None else max_states

    def successors(state: MoleState) -> Iterator[tuple[str, MoleState]]:
        for action in ("U", "D", "L", "R", "Dig", "Surface"):
            nxt = _mole_step(room, state, action)
            if nxt is not None:
                yield action, nxt

    goal, parents = _bfs(
        (room.start, False, room.weights),
        lambda s: not s[1] and s[0] == room.win,
        successors,
        cap,
        "mole_max_states",
    )
    below = sum(1 for state in parents if state[1])
    counters = (("below_states", below),)
    logger.debug("solve_mole: %d 状態 (地下 %d)", len(parents), below)
    if goal is None:
        return Decision(False, len(parents), None, counters)
    return Decision(True, len(parents), _trace(parents, goal), counters)


def replay_mole(room: MoleManiaRoom, witness: Iterable[str]) -> bool:
    state: MoleState = (room.start, False, room.weights)
    for action in witness:
        nxt = _mole_step(room, state, action)
        if nxt is None:
            return False
        state = nxt
    return not state[1] and state[0] == room.win


# -----------------------------------------------
# ディスパッチ
# -----------------------------------------------
@singledispatch
def solve(level: Any) -> Decision:
    """レベルの種類に応じたソルバーを呼ぶ"""
    raise TypeError(f"レベルではありません: {type(level).__name__}")


solve.register(DonkeyKongRoom, solve_donkey_kong)
solve.register(WarioLevel, solve_wario)
solve.register(HarvestMoonInstance, solve_harvest)
solve.register(MoleManiaRoom, solve_mole)


_REPLAYERS: dict[type, Callable[[Any, Iterable[str]], bool]] = {
    DonkeyKongRoom: replay_donkey_kong,
    WarioLevel: replay_wario,
    HarvestMoonInstance: replay_harvest,
    MoleManiaRoom: replay_mole,
}


def replay(level: Level, witness: Iterable[str]) -> bool:
    """witnessをレベルの種類に応じて再生する"""
    return _REPLAYERS[type(level)](level, witness)
