import os
import sys

import pytest
from sqlalchemy import create_engine
from sqlalchemy.pool import StaticPool

sys.path.append(os.path.abspath(os.path.dirname(os.path.dirname(__file__))))

from config import get_settings
from database import CampaignStore
from problems import CnfFormula, DirectedGraph, KnapsackInstance, KnapsackItem

# テスト用のインメモリDB
TEST_DATABASE_URL = "sqlite:///:memory:"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 件数を減らさない受け入れ用のキャンペーン")


@pytest.fixture(autouse=True)
def fresh_settings():
    """テストごとに設定のキャッシュを捨てる(monkeypatchした環境変数を反映させる)"""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture(scope="function")
def engine():
    """テストごと使い捨てのインメモリDBエンジンを作成する"""
    engine = create_engine(
        TEST_DATABASE_URL,
        connect_args={"check_same_thread": False},
        poolclass=StaticPool,
    )
    yield engine
    engine.dispose()


@pytest.fixture
def store(engine):
    """インメモリDBにつないだCampaignStore"""
    return CampaignStore(engine)


# -----------------------------------------------
# 小さなサンプルインスタンス
# -----------------------------------------------
@pytest.fixture
def skull_pair():
    """{0→1 ×2, 1→0}: 頂点0が(1,2)、頂点1が(2,1)"""
    return DirectedGraph(2, ((0, 1), (0, 1), (1, 0)))


@pytest.fixture
def triangle():
    return DirectedGraph(3, ((0, 1), (1, 2), (2, 0)))


@pytest.fixture
def knapsack_10():
    """W=10, V=10, 品目 (6,8), (5,5)"""
    return KnapsackInstance(10, 10, (KnapsackItem(6, 8), KnapsackItem(5, 5)))


@pytest.fixture
def x1_both_polarities():
    """(x1∨x1∨x1) ∧ (¬x1∨¬x1∨¬x1)"""
    return CnfFormula.from_ints(1, [[1, 1, 1], [-1, -1, -1]])
