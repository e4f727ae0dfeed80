import os
from dataclasses import dataclass
from functools import lru_cache

from dotenv import load_dotenv

from errors import ConfigError

load_dotenv()


# -----------------------------------------------
# 既定値
# -----------------------------------------------
DEFAULT_DATABASE_URL = "sqlite:///gbhard.db"


def _int_env(name: str, default: int) -> int:
    """環境変数を整数として読む(未設定なら既定値)"""
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{name} は整数で指定してください: {raw!r}") from None
    if value < 0:
        raise ConfigError(f"{name} は0以上で指定してください: {value}")
    return value


LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _log_level_env(name: str, default: str) -> str:
    raw = os.getenv(name, default).strip().upper() or default
    if raw not in LOG_LEVELS:
        raise ConfigError(f"{name} は {'/'.join(LOG_LEVELS)} のどれかで指定してください: {raw!r}")
    return raw


@dataclass(frozen=True)
class Settings:
    """
    オラクルとソルバーの上限値、DB接続先、ログレベルをまとめた設定

    Notes:
        上限を超える入力は黙ってタイムアウトさせず、CapExceededErrorで拒否する
    """

    sat_max_vars: int = 20
    ham_max_vertices: int = 12
    knapsack_max_capacity: int = 10**6
    push1_max_states: int = 2_000_000
    dk_max_states: int = 2**22
    wario_max_states: int = 2**24
    mole_max_states: int = 2_000_000
    harvest_max_work: int = 100_000
    database_url: str = DEFAULT_DATABASE_URL
    log_level: str = "WARNING"

    @classmethod
    def from_env(cls) -> "Settings":
        """
        環境変数(.env含む)から設定を組み立てる

        Returns:
            Settings: 設定

        Raises:
            ConfigError: 数値の環境変数が不正な場合
        """
        base = cls()
        return cls(
            sat_max_vars=_int_env("GBHARD_SAT_MAX_VARS", base.sat_max_vars),
            ham_max_vertices=_int_env(
                "GBHARD_HAM_MAX_VERTICES", base.ham_max_vertices
            ),
            knapsack_max_capacity=_int_env(
                "GBHARD_KNAPSACK_MAX_CAPACITY", base.knapsack_max_capacity
            ),
            push1_max_states=_int_env(
                "GBHARD_PUSH1_MAX_STATES", base.push1_max_states
            ),
            dk_max_states=_int_env("GBHARD_DK_MAX_STATES", base.dk_max_states),
            wario_max_states=_int_env(
                "GBHARD_WARIO_MAX_STATES", base.wario_max_states
            ),
            mole_max_states=_int_env("GBHARD_MOLE_MAX_STATES", base.mole_max_states),
            harvest_max_work=_int_env(
                "GBHARD_HARVEST_MAX_WORK", base.harvest_max_work
            ),
            database_url=os.getenv("GBHARD_DATABASE_URL", DEFAULT_DATABASE_URL),
            log_level=_log_level_env("GBHARD_LOG_LEVEL", base.log_level),
        )


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """プロセス全体で一つだけのSettingsを返す"""
    return Settings.from_env()
