import json
from collections import Counter
from dataclasses import replace

import pandas as pd
import pytest

from errors import ValidationError
from levels import Polarity, WarioRoom
from problems import (
    KnapsackItem,
    find_pivot_vertex,
    is_three_cnf,
    knapsack_oracle,
    parse_push1,
    push1_oracle,
    validate_formula,
    validate_push1,
    validate_skull_door_graph,
)
from reductions import (
    reduce_3cnf_to_dk,
    reduce_hamcycle_to_wario,
    reduce_knapsack_to_harvest,
    reduce_push1_to_mole,
)
from simulators import solve
from verify import (
    MASK64,
    PAIRS,
    CampaignReport,
    CampaignSpec,
    SplitMix64,
    format_report_table,
    gen_random_3cnf,
    gen_random_knapsack,
    gen_random_push1,
    gen_random_skull_graph,
    greedy_knapsack_value,
    run_campaign,
)


# -----------------------------------------------
# わざと壊した還元(ハーネスが食い違いを見つけられることの確認用)
# -----------------------------------------------
def flip_first_clause(f):
    """先頭の節のボードの極性を全部反転する"""
    room = reduce_3cnf_to_dk(f)
    if not room.boards:
        return room
    first_col = min(b.cells[0][0] for b in room.boards)
    flipped = {
        Polarity.OPEN_WHEN_ON: Polarity.OPEN_WHEN_OFF,
        Polarity.OPEN_WHEN_OFF: Polarity.OPEN_WHEN_ON,
    }
    boards = tuple(
        replace(b, polarity=flipped[b.polarity]) if b.cells[0][0] == first_col else b
        for b in room.boards
    )
    return replace(room, boards=boards)


def drop_start_key(g):
    """開始部屋の鍵を置き忘れる"""
    level = reduce_hamcycle_to_wario(g)
    rooms = list(level.rooms)
    rooms[level.start_room] = WarioRoom(treasure=rooms[level.start_room].treasure, key=False)
    return replace(level, rooms=tuple(rooms))


def one_day_short(k):
    inst = reduce_knapsack_to_harvest(k)
    return replace(inst, days=max(inst.days - 1, 0))


def shift_first_weight(p):
    """一番小さい位置のWeightを空いている隣のマスへ1つずらす(右、下、左、上の順)"""
    room = reduce_push1_to_mole(p)
    if not room.weights:
        return room
    x, y = min(room.weights)
    for dx, dy in ((1, 0), (0, 1), (-1, 0), (0, -1)):
        cell = (x + dx, y + dy)
        if room.in_bounds(cell) and cell != room.start and cell not in room.weights:
            return replace(room, weights=(room.weights - {(x, y)}) | {cell})
    return room


# -----------------------------------------------
# 乱数生成器
# -----------------------------------------------
def test_splitmix64_known_values():
    """種0の最初の2つの出力"""
    rng = SplitMix64(0)
    assert rng.next_u64() == 0xE220A8397B1DCDAF
    assert rng.next_u64() == 0x6E789E6AA1B965F4


def test_splitmix64_deterministic():
    a, b = SplitMix64(42), SplitMix64(42)
    assert [a.next_u64() for _ in range(5)] == [b.next_u64() for _ in range(5)]
    assert SplitMix64(1).next_u64() != SplitMix64(2).next_u64()


def test_splitmix64_ranges():
    rng = SplitMix64(7)
    values = [rng.below(6) for _ in range(600)]
    assert set(values) == set(range(6))
    assert all(3 <= rng.between(3, 5) <= 5 for _ in range(100))
    assert all(0 <= rng.next_u64() <= MASK64 for _ in range(100))


def test_splitmix64_shuffle_is_permutation():
    items = list(range(20))
    SplitMix64(3).shuffle(items)
    assert sorted(items) == list(range(20))


def test_splitmix64_seed_wraps():
    """64ビットを超える種は下位64ビットだけ使う"""
    assert SplitMix64(1 << 64).next_u64() == SplitMix64(0).next_u64()


# -----------------------------------------------
# インスタンス生成
# -----------------------------------------------
def test_gen_random_3cnf():
    f = gen_random_3cnf(5, 4, 7)
    assert f.num_vars == 4
    assert f.num_clauses == 7
    assert is_three_cnf(f)
    assert validate_formula(f) == []
    assert gen_random_3cnf(5, 4, 7) == f


def test_gen_random_3cnf_needs_variables():
    with pytest.raises(ValidationError):
        gen_random_3cnf(0, 0, 3)


@pytest.mark.parametrize("seed", range(30))
def test_gen_random_skull_graph_degrees(seed):
    """(1,2)と(2,1)の頂点がpairs個ずつ、ピボットは(2,1)"""
    pairs = 1 + seed % 5
    g = gen_random_skull_graph(seed, pairs)
    report = validate_skull_door_graph(g)
    assert report.is_valid
    assert report.alpha == report.beta == pairs
    assert list(g.edges) == sorted(g.edges)
    pivot = find_pivot_vertex(g)
    ins = sum(1 for _, dst in g.edges if dst == pivot)
    outs = sum(1 for src, _ in g.edges if src == pivot)
    assert (ins, outs) == (2, 1)


def test_skull_graph_degree_balance_1000():
    """1000個のグラフ全部で alpha == beta、ピボットは入2出1"""
    for seed in range(1000):
        g = gen_random_skull_graph(seed, 1 + seed % 5)
        report = validate_skull_door_graph(g)
        assert report.is_valid and report.alpha == report.beta
        pivot = find_pivot_vertex(g)
        assert sum(1 for _, dst in g.edges if dst == pivot) == 2
        assert sum(1 for src, _ in g.edges if src == pivot) == 1


def test_gen_random_skull_graph_single_pair():
    """pairs=1 なら {a→b ×2, b→a} しかない"""
    for seed in range(10):
        g = gen_random_skull_graph(seed, 1)
        counts = Counter(g.edges)
        assert sorted(counts.values()) == [1, 2]
        (a, b), _ = counts.most_common(1)[0]
        assert counts[(b, a)] == 1


def test_gen_random_skull_graph_needs_pairs():
    with pytest.raises(ValidationError):
        gen_random_skull_graph(0, 0)


def test_greedy_knapsack_value():
    """価値密度の高い (6,8) から詰めて8(最適値の10には届かない)"""
    items = (KnapsackItem(6, 8), KnapsackItem(5, 5))
    assert greedy_knapsack_value(10, items) == 8
    assert greedy_knapsack_value(0, items) == 0


def test_gen_random_knapsack_both_outcomes():
    """500件の中にYESもNOもある"""
    bounds = PAIRS["knap-harvest"].size_defaults
    verdicts = {knapsack_oracle(gen_random_knapsack(seed, bounds)) for seed in range(500)}
    assert verdicts == {True, False}


def test_gen_random_knapsack_bounds():
    bounds = {"max_W": 5, "max_items": 2, "max_w": 3, "max_v": 4}
    for seed in range(50):
        k = gen_random_knapsack(seed, bounds)
        assert 1 <= k.capacity <= 5
        assert 1 <= len(k.items) <= 2
        assert all(1 <= it.weight <= 3 and 0 <= it.value <= 4 for it in k.items)


def test_gen_random_push1_valid():
    bounds = PAIRS["push1-mole"].size_defaults
    for seed in range(100):
        p = gen_random_push1(seed, bounds)
        assert validate_push1(p) == []
        assert len(p.blocks) <= bounds["max_blocks"]
        assert 1 <= p.width <= 4 and 1 <= p.height <= 4


# -----------------------------------------------
# 壊した還元そのものの確認
# -----------------------------------------------
def test_flip_first_clause_changes_verdict(x1_both_polarities):
    """矛盾した論理式が、先頭の節の反転で解けるようになる"""
    assert not solve(reduce_3cnf_to_dk(x1_both_polarities)).solvable
    assert solve(flip_first_clause(x1_both_polarities)).solvable


def test_drop_start_key_changes_verdict(skull_pair):
    assert solve(reduce_hamcycle_to_wario(skull_pair)).solvable
    assert not solve(drop_start_key(skull_pair)).solvable


def test_one_day_short_changes_verdict(knapsack_10):
    assert solve(reduce_knapsack_to_harvest(knapsack_10)).solvable
    assert not solve(one_day_short(knapsack_10)).solvable


def test_shift_first_weight_changes_verdict():
    """RBW/... のWeightが右にずれて勝利マスに乗ると押し出せない"""
    p = parse_push1("RBW\n...")
    assert push1_oracle(p)
    mutated = shift_first_weight(p)
    assert mutated.weights == frozenset({(2, 0)})
    assert not solve(mutated).solvable


# -----------------------------------------------
# キャンペーン
# -----------------------------------------------
def test_campaign_zero_count():
    report = run_campaign(CampaignSpec("cnf-dk", 0, 42))
    assert (report.total, report.agreements, report.disagreements) == (0, 0, 0)
    assert report.ok
    assert report.disagreement_list == ()


def test_campaign_is_deterministic():
    """同じ指定ならバイト単位で同じレポート"""
    spec = CampaignSpec("knap-harvest", 20, 0xDEADBEEF)
    assert run_campaign(spec).to_json() == run_campaign(spec).to_json()


def test_campaign_report_json_fields():
    report = run_campaign(CampaignSpec("push1-mole", 5, 1))
    data = json.loads(report.to_json())
    assert data["pair"] == "push1-mole"
    assert data["size_params"] == {"max_blocks": 3, "max_grid": 4}
    assert data["total"] == data["agreements"] + data["disagreements"]
    assert "wall_clock_ms" not in report.to_json()
    assert report.to_json().endswith("}\n")


@pytest.mark.parametrize(
    "pair, count",
    [
        ("cnf-dk", 20),
        ("ham-wario", 20),
        ("knap-harvest", 50),
        ("push1-mole", 30),
    ],
)
def test_campaign_agrees(pair, count):
    """件数を減らした受け入れ用キャンペーン"""
    report = run_campaign(CampaignSpec(pair, count, 42))
    assert report.disagreement_list == ()
    assert report.agreements == report.total == count
    assert report.skipped == ()


@pytest.mark.slow
@pytest.mark.parametrize(
    "pair, count, seed",
    [
        ("cnf-dk", 200, 42),
        ("ham-wario", 100, 42),
        ("knap-harvest", 500, 42),
        ("push1-mole", 200, 42),
        ("push1-mole", 200, 7),
    ],
)
def test_campaign_agrees_full(pair, count, seed):
    report = run_campaign(CampaignSpec(pair, count, seed))
    assert report.agreements == count
    assert 0 < report.positives < report.total


@pytest.mark.parametrize(
    "pair, reducer, check_bounds",
    [
        ("cnf-dk", flip_first_clause, True),
        ("ham-wario", drop_start_key, True),
        ("knap-harvest", one_day_short, False),
        ("push1-mole", shift_first_weight, True),
    ],
)
def test_campaign_detects_broken_reduction(pair, reducer, check_bounds):
    """壊した還元は100件のうち少なくとも1件で食い違う"""
    report = run_campaign(
        CampaignSpec(pair, 100, 42), reducer=reducer, check_bounds=check_bounds
    )
    assert report.disagreements >= 1
    assert not report.ok
    assert all(d.solver is not None for d in report.disagreement_list)


def test_campaign_size_check_catches_short_harvest():
    """サイズ確認を有効にすると、日数の違いは還元の失敗として記録される"""
    report = run_campaign(CampaignSpec("knap-harvest", 10, 42), reducer=one_day_short)
    assert report.disagreements == 10
    assert all(d.note.startswith("reduction:") for d in report.disagreement_list)
    assert all(d.solver is None for d in report.disagreement_list)


def test_campaign_skips_over_cap(monkeypatch):
    """ソルバーの上限を超えたインスタンスは total に数えない"""
    monkeypatch.setenv("GBHARD_DK_MAX_STATES", "1")
    report = run_campaign(CampaignSpec("cnf-dk", 5, 42))
    assert report.total == 0
    assert [index for index, _ in report.skipped] == [0, 1, 2, 3, 4]
    assert all(why.startswith("solver:") for _, why in report.skipped)


def test_campaign_workers_give_same_report():
    spec = CampaignSpec("knap-harvest", 12, 9)
    assert run_campaign(spec, workers=2).to_json() == run_campaign(spec).to_json()


def test_disagreement_is_reproducible():
    """食い違いの添字から seed ^ index で同じインスタンスを作り直せる"""
    spec = CampaignSpec("knap-harvest", 10, 42)
    report = run_campaign(spec, reducer=one_day_short, check_bounds=False)
    pair = PAIRS["knap-harvest"]
    for d in report.disagreement_list:
        instance = pair.generate(spec.seed ^ d.index, spec.params())
        assert d.oracle == knapsack_oracle(instance)


# -----------------------------------------------
# 指定の検証
# -----------------------------------------------
@pytest.mark.parametrize(
    "spec",
    [
        CampaignSpec("tsp-tetris", 1, 0),
        CampaignSpec("cnf-dk", -1, 0),
        CampaignSpec("cnf-dk", 1, -5),
        CampaignSpec("cnf-dk", 1, MASK64 + 1),
        CampaignSpec("cnf-dk", 1, 0, {"max_W": 3}),
        CampaignSpec("cnf-dk", 1, 0, {"max_vars": 0}),
        CampaignSpec("push1-mole", 1, 0, {"max_grid": 20}),
    ],
)
def test_campaign_spec_violations(spec):
    assert spec.validate() != []
    with pytest.raises(ValidationError):
        run_campaign(spec)


def test_campaign_spec_respects_oracle_cap(monkeypatch):
    monkeypatch.setenv("GBHARD_SAT_MAX_VARS", "4")
    assert CampaignSpec("cnf-dk", 1, 0).validate() != []
    assert CampaignSpec("cnf-dk", 1, 0, {"max_vars": 4}).validate() == []


def test_campaign_spec_params_fill_defaults():
    spec = CampaignSpec("knap-harvest", 1, 0, {"max_W": 12})
    assert spec.params() == {"max_W": 12, "max_items": 6, "max_w": 10, "max_v": 20}


# -----------------------------------------------
# 表示
# -----------------------------------------------
def test_report_to_frame():
    report = CampaignReport("cnf-dk", 3, 42, {"max_vars": 8}, 3, 3, 0, 2)
    df = report.to_frame()
    assert isinstance(df, pd.DataFrame)
    assert list(df.columns) == ["metric", "value"]
    values = dict(zip(df["metric"], df["value"]))
    assert values["agreements"] == 3
    assert values["positives"] == 2


def test_format_report_table_lists_disagreements():
    report = run_campaign(
        CampaignSpec("knap-harvest", 10, 42), reducer=one_day_short, check_bounds=False
    )
    text = format_report_table(report)
    assert "agreements" in text
    if report.disagreement_list:
        assert "disagreements:" in text


def test_format_report_table_lists_skipped():
    report = CampaignReport("cnf-dk", 1, 0, {}, skipped=((0, "solver: cap"),))
    assert "skipped: 0 (solver: cap)" in format_report_table(report)
