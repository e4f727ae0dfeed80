"""gbhard全体で使う例外クラス"""


class GbHardError(Exception):
    """gbhardの例外の基底クラス"""


class ConfigError(GbHardError):
    """環境変数などの設定が不正"""


class ParseError(GbHardError):
    """
    テキスト形式の入力が読めない

    Args:
        message (str): エラー内容
        line (int | None): 1始まりの行番号(行に紐づかない場合はNone)
        source (str | None): ファイル名など
    """

    def __init__(
        self, message: str, line: int | None = None, source: str | None = None
    ):
        self.message = message
        self.line = line
        self.source = source
        super().__init__(str(self))

    def __str__(self) -> str:
        where = self.source or "<input>"
        if self.line is not None:
            return f"{where}:{self.line}: {self.message}"
        return f"{where}: {self.message}"

    def with_source(self, source: str) -> "ParseError":
        """ファイル名を付け直したコピーを返す"""
        return ParseError(self.message, self.line, source)


class ValidationError(GbHardError):
    """インスタンスやレベルが不変条件を満たしていない"""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SchemaError(GbHardError):
    """レベルJSONのスキーマ違反(pathはフィールドの位置)"""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class CapExceededError(GbHardError):
    """
    オラクル・ソルバーの上限を超えた

    Args:
        cap (str): 上限の名前
        limit (int): 上限値
        size (int): 実際の大きさ(探索途中で超えた場合は到達時点の値)
    """

    def __init__(self, cap: str, limit: int, size: int):
        self.cap = cap
        self.limit = limit
        self.size = size
        super().__init__(f"{cap} の上限 {limit} を超えました (size={size})")


class ReductionError(GbHardError):
    """還元の前提条件違反、または出力サイズの上限違反"""
