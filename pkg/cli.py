import argparse
import json
import logging
import sys
from collections.abc import Callable
from typing import Any

from config import get_settings
from errors import GbHardError, ParseError, SchemaError
from levels import deserialize, render_ascii, serialize
from problems import (
    format_dimacs,
    format_graph,
    format_knapsack,
    format_push1,
    ham_cycle_oracle,
    knapsack_oracle,
    parse_dimacs,
    parse_graph,
    parse_knapsack,
    parse_push1,
    push1_oracle,
    sat_oracle,
    validate_skull_door_graph,
)
from reductions import SOURCES, run_reduction
from simulators import format_witness, solve
from verify import PAIRS, CampaignSpec, format_report_table, run_campaign

logger = logging.getLogger(__name__)

# 終了コード(0 = yes/一致、1 = no、2 = エラー)
EXIT_YES = 0
EXIT_NO = 1
EXIT_ERROR = 2

PROG = "gbhard"


class CliError(GbHardError):
    """入出力など、コマンド実行時のエラー"""


# -----------------------------------------------
# 入力問題ごとの部品
# -----------------------------------------------
PROBLEMS: dict[str, tuple[Callable[..., Any], Callable[[Any], str], Callable[[Any], bool]]] = {
    "sat": (parse_dimacs, format_dimacs, sat_oracle),
    "hamcycle": (parse_graph, format_graph, ham_cycle_oracle),
    "knapsack": (parse_knapsack, format_knapsack, knapsack_oracle),
    "push1": (parse_push1, format_push1, push1_oracle),
}

# verifyの大きさ指定 (フラグ, キー, 説明)
SIZE_FLAGS = (
    ("--max-vars", "max_vars", "cnf-dk: 変数の数の上限"),
    ("--max-clauses", "max_clauses", "cnf-dk: 節の数の上限"),
    ("--max-pairs", "max_pairs", "ham-wario: 次数の組の数の上限"),
    ("--max-W", "max_W", "knap-harvest: 容量の上限"),
    ("--max-items", "max_items", "knap-harvest: 品目数の上限"),
    ("--max-w", "max_w", "knap-harvest: 重さの上限"),
    ("--max-v", "max_v", "knap-harvest: 価値の上限"),
    ("--max-grid", "max_grid", "push1-mole: 盤面の一辺の上限"),
    ("--max-blocks", "max_blocks", "push1-mole: ブロック数の上限"),
)


# -----------------------------------------------
# 入出力
# -----------------------------------------------
def _display_name(path: str) -> str:
    return "<stdin>" if path == "-" else path


def read_text(path: str) -> str:
    """ファイル(- なら標準入力)をUTF-8で読む"""
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except (OSError, UnicodeDecodeError) as e:
        raise CliError(f"{path}: 読み込めません: {e}") from e


def write_text(path: str | None, text: str) -> None:
    """ファイル(None か - なら標準出力)に書く"""
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    except OSError as e:
        raise CliError(f"{path}: 書き込めません: {e}") from e


def _read_level(path: str) -> Any:
    try:
        return deserialize(read_text(path))
    except SchemaError as e:
        raise CliError(f"{_display_name(path)}: {e}") from e


def _parse_source(parse: Callable[..., Any], path: str) -> Any:
    return parse(read_text(path), source=_display_name(path))


# -----------------------------------------------
# サブコマンド
# -----------------------------------------------
def cmd_reduce(args: argparse.Namespace) -> int:
    kind = SOURCES[args.source]
    instance = _parse_source(kind.parse, args.input)
    level, stats = run_reduction(args.source, instance)
    write_text(args.output, serialize(level))
    if args.stats:
        print(stats.to_json(), file=sys.stderr)
    return EXIT_YES


def cmd_solve(args: argparse.Namespace) -> int:
    level = _read_level(args.input)
    decision = solve(level)
    if args.stats:
        print(json.dumps({"states_explored": decision.states_explored}), file=sys.stderr)
    if not decision.solvable:
        print("UNSOLVABLE")
        return EXIT_NO
    print("SOLVABLE")
    if args.witness:
        print(f"witness: {format_witness(decision.witness)}")
    return EXIT_YES


def cmd_oracle(args: argparse.Namespace) -> int:
    parse, _, oracle = PROBLEMS[args.problem]
    instance = _parse_source(parse, args.input)
    if oracle(instance):
        print("YES")
        return EXIT_YES
    print("NO")
    return EXIT_NO


def cmd_parse(args: argparse.Namespace) -> int:
    parse, fmt, _ = PROBLEMS[args.problem]
    instance = _parse_source(parse, args.input)
    write_text(args.output, fmt(instance))
    if args.problem == "hamcycle":
        report = validate_skull_door_graph(instance)
        # 標準出力はグラフのまま読み直せるようにする
        print(f"valid: {'true' if report.is_valid else 'false'}", file=sys.stderr)
        print(f"alpha: {report.alpha}", file=sys.stderr)
        print(f"beta: {report.beta}", file=sys.stderr)
        for v, ins, outs in report.violations:
            print(f"violation: vertex {v} in={ins} out={outs}", file=sys.stderr)
    return EXIT_YES


def cmd_render(args: argparse.Namespace) -> int:
    write_text(args.output, render_ascii(_read_level(args.input)))
    return EXIT_YES


def cmd_verify(args: argparse.Namespace) -> int:
    size_params = {
        key: getattr(args, key)
        for _, key, _ in SIZE_FLAGS
        if getattr(args, key) is not None
    }
    spec = CampaignSpec(args.pair, args.count, args.seed, size_params)
    report = run_campaign(spec, workers=args.workers)
    text = format_report_table(report) if args.table else report.to_json()
    write_text(args.output, text)
    if args.save:
        from database import get_store

        run_id = get_store().save_report(report)
        print(f"saved: run_id={run_id}", file=sys.stderr)
    return EXIT_YES if report.ok else EXIT_NO


def cmd_history(args: argparse.Namespace) -> int:
    from database import get_store

    store = get_store()
    if args.show is not None:
        report = store.get_report_json(args.show)
        if report is None:
            raise CliError(f"run_id={args.show} は見つかりません")
        sys.stdout.write(report)
        return EXIT_YES
    df = store.load_runs(args.pair, args.limit)
    if df.empty:
        print("(保存された実行はありません)")
    else:
        print(df.to_string(index=False))
    return EXIT_YES


# -----------------------------------------------
# 引数の定義
# -----------------------------------------------
def _seed(raw: str) -> int:
    """10進数か 0x 付き16進数の種"""
    try:
        return int(raw, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"整数ではありません: {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Game BoyのゲームへのNP困難性還元を実行・検証するツール",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="ログを詳しくする(-v でINFO、-vv でDEBUG)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reduce", help="入力問題をゲームのレベルに還元する")
    p.add_argument("--from", dest="source", required=True, choices=sorted(SOURCES))
    p.add_argument("-i", "--input", required=True, help="入力ファイル(- で標準入力)")
    p.add_argument("-o", "--output", help="出力ファイル(省略で標準出力)")
    p.add_argument("--stats", action="store_true", help="還元の統計を標準エラーに出す")
    p.set_defaults(handler=cmd_reduce)

    p = sub.add_parser("solve", help="レベルを解く")
    p.add_argument("-i", "--input", required=True, help="レベルファイル(- で標準入力)")
    p.add_argument("--witness", action="store_true", help="解ける場合に行動列も出す")
    p.add_argument("--stats", action="store_true", help="探索した状態数を標準エラーに出す")
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("oracle", help="入力問題を総当たりで判定する")
    p.add_argument("--problem", required=True, choices=sorted(PROBLEMS))
    p.add_argument("-i", "--input", required=True)
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("parse", help="入力問題を読み込んで正規形で出す")
    p.add_argument("--problem", required=True, choices=sorted(PROBLEMS))
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(handler=cmd_parse)

    p = sub.add_parser("render", help="レベルをASCIIの図にする")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(handler=cmd_render)

    p = sub.add_parser("verify", help="ランダムなインスタンスで還元の正しさを確かめる")
    p.add_argument("--pair", required=True, choices=sorted(PAIRS))
    p.add_argument("--count", required=True, type=int)
    p.add_argument("--seed", required=True, type=_seed)
    for flag, key, help_text in SIZE_FLAGS:
        p.add_argument(flag, dest=key, type=int, help=help_text)
    p.add_argument("--workers", type=int, default=1, help="並列に評価するプロセス数")
    p.add_argument("--table", action="store_true", help="JSONの代わりに表で出す")
    p.add_argument("--save", action="store_true", help="結果をデータベースに保存する")
    p.add_argument("-o", "--output")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("history", help="保存したverifyの結果を表示する")
    p.add_argument("--pair", choices=sorted(PAIRS))
    p.add_argument("--limit", type=int, default=20)
    p.add_argument("--show", type=int, metavar="RUN_ID", help="1件のレポートをJSONで出す")
    p.set_defaults(handler=cmd_history)

    return parser


def setup_logging(verbose: int) -> None:
    """ログの出力先は標準エラー。レベルは -v の数か設定値(LOG_LEVEL)"""
    if verbose >= 2:
        level: int | str = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = get_settings().log_level.upper()
    logging.basicConfig(
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


# -----------------------------------------------
# エントリーポイント
# -----------------------------------------------
def main(argv: list[str] | None = None) -> int:
    """
    コマンドラインを実行して終了コードを返す

    Args:
        argv (list[str] | None): 引数(Noneならsys.argv[1:])

    Returns:
        int: 0 = yes/一致、1 = no/不一致、2 = エラー
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparseは使い方の誤りで2、--helpで0を投げる
        return e.code if isinstance(e.code, int) else EXIT_ERROR

    try:
        setup_logging(args.verbose)
        return args.handler(args)
    except ParseError as e:
        print(f"{PROG}: {e}", file=sys.stderr)
    except GbHardError as e:
        source = getattr(args, "input", None)
        prefix = "" if isinstance(e, CliError) or source is None else f"{_display_name(source)}: "
        print(f"{PROG}: {prefix}{e}", file=sys.stderr)
    return EXIT_ERROR
