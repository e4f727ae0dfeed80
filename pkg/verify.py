import json
import logging
import math
import time
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Any

import pandas as pd

from config import get_settings
from errors import CapExceededError, GbHardError, ReductionError, ValidationError
from levels import Level
from problems import (
    CnfFormula,
    CnfLiteral,
    DirectedGraph,
    KnapsackInstance,
    KnapsackItem,
    Push1Instance,
    ham_cycle_oracle,
    knapsack_oracle,
    push1_oracle,
    sat_oracle,
)
from reductions import SOURCES, run_reduction
from simulators import replay, solve

logger = logging.getLogger(__name__)


# -----------------------------------------------
# 乱数生成器
# -----------------------------------------------
MASK64 = (1 << 64) - 1


class SplitMix64:
    """
    SplitMix64 (Steele, Lea, Flood 2014) の64ビット乱数列

    Notes:
        state += 0x9E3779B97F4A7C15
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        return z ^ (z >> 31)
        すべて mod 2^64。範囲 [0, bound) の整数は (x * bound) >> 64 で作る
    """

    GAMMA = 0x9E3779B97F4A7C15
    MIX1 = 0xBF58476D1CE4E5B9
    MIX2 = 0x94D049BB133111EB

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + self.GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * self.MIX1) & MASK64
        z = ((z ^ (z >> 27)) * self.MIX2) & MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """[0, bound) の整数"""
        return (self.next_u64() * bound) >> 64

    def between(self, low: int, high: int) -> int:
        """[low, high] の整数"""
        return low + self.below(high - low + 1)

    def shuffle(self, items: list[Any]) -> None:
        """Fisher-Yatesでその場で並べ替える"""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


# -----------------------------------------------
# ランダムインスタンス生成
# -----------------------------------------------
SKULL_GRAPH_MAX_ATTEMPTS = 1000


def gen_random_3cnf(seed: int, n: int, m: int) -> CnfFormula:
    """変数n個の上に一様に選んだ3リテラルの節をm個並べる"""
    if n < 1:
        raise ValidationError([f"n は1以上が必要です: {n}"])
    rng = SplitMix64(seed)
    clauses = tuple(
        tuple(CnfLiteral(1 + rng.below(n), rng.below(2) == 1) for _ in range(3))
        for _ in range(m)
    )
    return CnfFormula(n, clauses)


def gen_random_skull_graph(seed: int, pairs: int) -> DirectedGraph:
    """
    (入1, 出2) の頂点と (入2, 出1) の頂点をpairs個ずつ持つSkull Door Graphを作る

    Args:
        seed (int): 乱数の種
        pairs (int): 次数の組の数(頂点数は 2 * pairs)

    Returns:
        DirectedGraph: 辺を整列したグラフ

    Raises:
        ValidationError: pairs < 1 の場合
        GbHardError: 自己ループの無い組み合わせが試行上限内に見つからない場合

    Notes:
        出る側の枝と入る側の枝をランダムに対応付け、自己ループがあればやり直す
        平面性は保証しない
    """
    if pairs < 1:
        raise ValidationError([f"pairs は1以上が必要です: {pairs}"])
    rng = SplitMix64(seed)
    labels = list(range(2 * pairs))
    rng.shuffle(labels)
    splitters, joiners = labels[:pairs], labels[pairs:]
    out_stubs = sorted([v for v in splitters for _ in range(2)] + joiners)
    in_stubs = sorted(splitters + [v for v in joiners for _ in range(2)])
    for attempt in range(SKULL_GRAPH_MAX_ATTEMPTS):
        rng.shuffle(in_stubs)
        edges = list(zip(out_stubs, in_stubs))
        if all(src != dst for src, dst in edges):
            if attempt:
                logger.debug("gen_random_skull_graph: %d 回目で成功", attempt + 1)
            return DirectedGraph(2 * pairs, tuple(sorted(edges)))
    raise GbHardError(
        f"自己ループの無いグラフを {SKULL_GRAPH_MAX_ATTEMPTS} 回の試行で作れませんでした"
    )


def greedy_knapsack_value(capacity: int, items: tuple[KnapsackItem, ...]) -> int:
    """価値密度の高い順に詰められるだけ詰めた価値(最適値の下界)"""
    total, room = 0, capacity
    for item in sorted(items, key=lambda it: (-it.value / it.weight, it.weight)):
        count = room // item.weight
        total += count * item.value
        room -= count * item.weight
    return total


def gen_random_knapsack(seed: int, bounds: dict[str, int]) -> KnapsackInstance:
    """
    範囲内で一様に選んだナップサック

    Notes:
        目標Vは貪欲法の値に [0, max_v] の乱数を足す
        最適値は貪欲法以上なので、YESもNOも出る
    """
    rng = SplitMix64(seed)
    capacity = rng.between(1, bounds["max_W"])
    items = tuple(
        KnapsackItem(rng.between(1, bounds["max_w"]), rng.between(0, bounds["max_v"]))
        for _ in range(rng.between(1, bounds["max_items"]))
    )
    target = greedy_knapsack_value(capacity, items) + rng.between(0, bounds["max_v"])
    return KnapsackInstance(capacity, target, items)


def gen_random_push1(seed: int, bounds: dict[str, int]) -> Push1Instance:
    """ロボットとブロックは重ならない位置に、勝利マスは任意のマスに置く"""
    rng = SplitMix64(seed)
    width = rng.between(1, bounds["max_grid"])
    height = rng.between(1, bounds["max_grid"])
    cells = [(x, y) for y in range(height) for x in range(width)]
    rng.shuffle(cells)
    num_blocks = rng.between(0, min(bounds["max_blocks"], len(cells) - 1))
    robot = cells[0]
    blocks = frozenset(cells[1 : 1 + num_blocks])
    win = cells[rng.below(len(cells))]
    return Push1Instance(width, height, blocks, robot, win)


# -----------------------------------------------
# 検証キャンペーン
# -----------------------------------------------
@dataclass(frozen=True)
class CampaignPair:
    """入力問題とオラクル、インスタンス生成の組"""

    name: str
    source: str
    size_defaults: dict[str, int]
    generate: Callable[[int, dict[str, int]], Any]
    oracle: Callable[[Any], bool]


def _gen_cnf(seed: int, params: dict[str, int]) -> CnfFormula:
    rng = SplitMix64(seed)
    n = rng.between(1, params["max_vars"])
    m = rng.between(1, params["max_clauses"])
    return gen_random_3cnf(rng.next_u64(), n, m)


def _gen_ham(seed: int, params: dict[str, int]) -> DirectedGraph:
    rng = SplitMix64(seed)
    return gen_random_skull_graph(rng.next_u64(), rng.between(1, params["max_pairs"]))


PAIRS: dict[str, CampaignPair] = {
    "cnf-dk": CampaignPair(
        "cnf-dk", "3cnf", {"max_vars": 8, "max_clauses": 10}, _gen_cnf, sat_oracle
    ),
    "ham-wario": CampaignPair(
        "ham-wario", "hamcycle", {"max_pairs": 5}, _gen_ham, ham_cycle_oracle
    ),
    "knap-harvest": CampaignPair(
        "knap-harvest",
        "knapsack",
        {"max_W": 30, "max_items": 6, "max_w": 10, "max_v": 20},
        gen_random_knapsack,
        knapsack_oracle,
    ),
    "push1-mole": CampaignPair(
        "push1-mole",
        "push1",
        {"max_grid": 4, "max_blocks": 3},
        gen_random_push1,
        push1_oracle,
    ),
}


@dataclass(frozen=True)
class CampaignSpec:
    """
    検証キャンペーンの指定

    Args:
        pair (str): "cnf-dk" / "ham-wario" / "knap-harvest" / "push1-mole"
        count (int): インスタンス数
        seed (int): 64ビットの乱数の種。i番目のインスタンスは seed ^ i から作る
        size_params (dict[str, int]): 大きさの上限(省略した項目は既定値)
    """

    pair: str
    count: int
    seed: int
    size_params: dict[str, int] = field(default_factory=dict)

    def params(self) -> dict[str, int]:
        """既定値を補った大きさの上限"""
        return {**PAIRS[self.pair].size_defaults, **self.size_params}

    def validate(self) -> list[str]:
        """指定の違反を列挙する(上限値はオラクル・ソルバーの上限以内であること)"""
        if self.pair not in PAIRS:
            return [f"未知のpairです: {self.pair!r} (候補: {', '.join(PAIRS)})"]
        violations = []
        if self.count < 0:
            violations.append(f"count は0以上が必要です: {self.count}")
        if not 0 <= self.seed <= MASK64:
            violations.append(f"seed は64ビットの非負整数が必要です: {self.seed}")
        defaults = PAIRS[self.pair].size_defaults
        for key in self.size_params:
            if key not in defaults:
                violations.append(f"{self.pair} に {key} は指定できません")
        params = self.params()
        for key, value in params.items():
            minimum = 0 if key in ("max_blocks", "max_v") else 1
            if value < minimum:
                violations.append(f"{key} は{minimum}以上が必要です: {value}")
        if violations:
            return violations

        settings = get_settings()
        if self.pair == "cnf-dk" and params["max_vars"] > settings.sat_max_vars:
            violations.append(f"max_vars が上限 {settings.sat_max_vars} を超えています")
        elif self.pair == "ham-wario" and 2 * params["max_pairs"] > settings.ham_max_vertices:
            violations.append(
                f"2 * max_pairs が上限 {settings.ham_max_vertices} を超えています"
            )
        elif self.pair == "knap-harvest":
            if params["max_W"] > settings.knapsack_max_capacity:
                violations.append(
                    f"max_W が上限 {settings.knapsack_max_capacity} を超えています"
                )
            if params["max_W"] > settings.harvest_max_work:
                violations.append(f"max_W が上限 {settings.harvest_max_work} を超えています")
        elif self.pair == "push1-mole":
            side = params["max_grid"]
            blocks = min(params["max_blocks"], side * side - 1)
            # push1_state_bound と同じ式で最大の盤面を見積もる
            worst = side * side * math.comb(side * side, blocks)
            if worst > settings.push1_max_states:
                violations.append(
                    f"盤面 {side}x{side}・ブロック {blocks} 個は上限 "
                    f"{settings.push1_max_states} を超えます"
                )
        return violations


@dataclass(frozen=True)
class Disagreement:
    """オラクルとソルバーの判定が食い違ったインスタンス(seed ^ index で再現できる)"""

    index: int
    instance_text: str
    oracle: bool | None
    solver: bool | None
    note: str = ""


@dataclass(frozen=True)
class InstanceOutcome:
    """1インスタンスの評価結果"""

    index: int
    oracle: bool | None = None
    solver: bool | None = None
    instance_text: str = ""
    source_size: int = 0
    output_size: int = 0
    skipped: str | None = None
    note: str = ""

    @property
    def agreed(self) -> bool:
        return self.skipped is None and not self.note and self.oracle == self.solver


@dataclass(frozen=True)
class CampaignReport:
    """
    検証キャンペーンの結果

    Notes:
        agreements + disagreements == total
        上限超過で評価できなかったインスタンスは total に含めず skipped に入れる
        実行時間は含めない(同じ指定なら同じバイト列になる)
    """

    pair: str
    count: int
    seed: int
    size_params: dict[str, int]
    total: int = 0
    agreements: int = 0
    disagreements: int = 0
    positives: int = 0
    disagreement_list: tuple[Disagreement, ...] = ()
    skipped: tuple[tuple[int, str], ...] = ()
    stats: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.disagreements == 0

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["disagreement_list"] = [asdict(d) for d in self.disagreement_list]
        data["skipped"] = [list(s) for s in self.skipped]
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_frame(self) -> pd.DataFrame:
        """指標ごとに1行のDataFrame"""
        rows = [
            ("pair", self.pair),
            ("seed", self.seed),
            ("count", self.count),
            ("total", self.total),
            ("agreements", self.agreements),
            ("disagreements", self.disagreements),
            ("positives", self.positives),
            ("skipped", len(self.skipped)),
        ]
        rows.extend((f"stats.{key}", value) for key, value in sorted(self.stats.items()))
        return pd.DataFrame(rows, columns=["metric", "value"])


def format_report_table(report: CampaignReport) -> str:
    """レポートを人が読む表にする"""
    lines = [report.to_frame().to_string(index=False)]
    if report.disagreement_list:
        frame = pd.DataFrame(
            [
                (d.index, d.oracle, d.solver, d.note or "-")
                for d in report.disagreement_list
            ],
            columns=["index", "oracle", "solver", "note"],
        )
        lines.append("")
        lines.append("disagreements:")
        lines.append(frame.to_string(index=False))
    if report.skipped:
        lines.append("")
        lines.append("skipped: " + ", ".join(f"{i} ({why})" for i, why in report.skipped))
    return "\n".join(lines) + "\n"


def evaluate_instance(
    pair_name: str,
    seed: int,
    params: dict[str, int],
    index: int,
    reducer: Callable[[Any], Level] | None = None,
    check_bounds: bool = True,
) -> InstanceOutcome:
    """
    i番目のインスタンスを生成し、オラクルと「還元してソルバー」の判定を比べる

    Notes:
        ソルバーがsolvableと答えたときはwitnessの再生も確認する
        還元の失敗(前提条件・サイズの上限違反)は食い違いとして記録する
    """
    pair = PAIRS[pair_name]
    kind = SOURCES[pair.source]
    instance = pair.generate(seed ^ index, params)
    text = kind.format(instance)
    try:
        expected = pair.oracle(instance)
    except CapExceededError as e:
        return InstanceOutcome(index, instance_text=text, skipped=f"oracle: {e}")
    try:
        level, stats = run_reduction(pair.source, instance, reducer, check_bounds)
    except ReductionError as e:
        return InstanceOutcome(index, expected, None, text, note=f"reduction: {e}")
    try:
        decision = solve(level)
    except CapExceededError as e:
        return InstanceOutcome(index, expected, instance_text=text, skipped=f"solver: {e}")
    note = ""
    if decision.solvable and not replay(level, decision.witness or ()):
        note = "witness replay failed"
    return InstanceOutcome(
        index,
        expected,
        decision.solvable,
        text,
        stats.source_size,
        stats.output_size,
        note=note,
    )


def assemble_report(spec: CampaignSpec, outcomes: list[InstanceOutcome]) -> CampaignReport:
    """添字順に並んだ評価結果をレポートにまとめる"""
    evaluated = [o for o in outcomes if o.skipped is None]
    disagreements = tuple(
        Disagreement(o.index, o.instance_text, o.oracle, o.solver, o.note)
        for o in evaluated
        if not o.agreed
    )
    stats = {
        "source_size_total": sum(o.source_size for o in evaluated),
        "output_size_total": sum(o.output_size for o in evaluated),
        "output_size_max": max((o.output_size for o in evaluated), default=0),
    }
    return CampaignReport(
        pair=spec.pair,
        count=spec.count,
        seed=spec.seed,
        size_params=spec.params(),
        total=len(evaluated),
        agreements=len(evaluated) - len(disagreements),
        disagreements=len(disagreements),
        positives=sum(1 for o in evaluated if o.oracle),
        disagreement_list=disagreements,
        skipped=tuple((o.index, o.skipped) for o in outcomes if o.skipped is not None),
        stats=stats,
    )


def run_campaign(
    spec: CampaignSpec,
    reducer: Callable[[Any], Level] | None = None,
    workers: int = 1,
    check_bounds: bool = True,
) -> CampaignReport:
    """
    キャンペーンを実行してレポートを返す

    Args:
        spec (CampaignSpec): キャンペーンの指定
        reducer (Callable | None): 差し替える還元関数(変異テスト用)
        workers (int): 2以上ならプロセスプールで並列に評価する
        check_bounds (bool): 還元のサイズ確認を行うか

    Returns:
        CampaignReport: 添字順に組み立てたレポート

    Raises:
        ValidationError: 指定が不正な場合
    """
    violations = spec.validate()
    if violations:
        raise ValidationError(violations)

    task = partial(
        evaluate_instance,
        spec.pair,
        spec.seed,
        spec.params(),
        reducer=reducer,
        check_bounds=check_bounds,
    )
    started = time.perf_counter()
    indices = range(spec.count)
    if workers > 1 and spec.count > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(task, indices, chunksize=max(1, spec.count // (4 * workers))))
    else:
        outcomes = [task(i) for i in indices]
    report = assemble_report(spec, outcomes)

    logger.info(
        "run_campaign: pair=%s count=%d agreements=%d disagreements=%d skipped=%d (%.2fs)",
        spec.pair,
        spec.count,
        report.agreements,
        report.disagreements,
        len(report.skipped),
        time.perf_counter() - started,
    )
    return report
