import json
import logging
from datetime import datetime
from functools import lru_cache
from typing import Any

import pandas as pd
from sqlalchemy import (
    Column,
    DateTime,
    ForeignKey,
    Integer,
    String,
    Text,
    create_engine,
    select,
)
from sqlalchemy.engine import Engine
from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import declarative_base, relationship, sessionmaker

from config import get_settings
from verify import CampaignReport

logger = logging.getLogger(__name__)

# 親クラス
Base: Any = declarative_base()


# -----------------------------------------------
# モデル定義(テーブルの設計図)
# -----------------------------------------------
class CampaignRunModel(Base):
    """campaign_runsテーブルのモデル"""

    __tablename__ = "campaign_runs"

    id = Column(Integer, primary_key=True)
    pair = Column(String, nullable=False, index=True)
    seed = Column(String, nullable=False)  # 64ビット符号なしはINTEGERに収まらないので文字列
    count = Column(Integer, nullable=False)
    size_params = Column(Text, nullable=False)
    total = Column(Integer, nullable=False)
    agreements = Column(Integer, nullable=False)
    disagreements = Column(Integer, nullable=False)
    positives = Column(Integer, nullable=False)
    skipped = Column(Integer, nullable=False)
    report = Column(Text, nullable=False)
    created_at = Column(DateTime, default=datetime.now)

    disagreement_rows = relationship(
        "DisagreementModel",
        cascade="all, delete-orphan",
        order_by="DisagreementModel.instance_index",
    )


class DisagreementModel(Base):
    """disagreementsテーブルのモデル"""

    __tablename__ = "disagreements"

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey("campaign_runs.id", ondelete="CASCADE"))
    instance_index = Column(Integer, nullable=False)
    instance_text = Column(Text, nullable=False)


# -----------------------------------------------
# CampaignStoreクラス
# -----------------------------------------------
class CampaignStore:
    """
    検証キャンペーンの履歴を保存・参照するクラス

    Args:
        engine (Engine | None): 接続先。Noneなら設定のdatabase_urlから作る
    """

    def __init__(self, engine: Engine | None = None):
        self.engine = engine or create_engine(get_settings().database_url)
        self.SessionLocal = sessionmaker(
            autocommit=False, autoflush=False, bind=self.engine
        )
        # テーブルが存在しない場合は作成する
        Base.metadata.create_all(bind=self.engine)

    def get_db(self):
        """セッションを作成して返す"""
        return self.SessionLocal()

    def save_report(self, report: CampaignReport) -> int:
        """
        レポートを保存する

        Args:
            report (CampaignReport): キャンペーンの結果

        Returns:
            int: 保存した実行のID

        Raises:
            SQLAlchemyError: 保存に失敗した場合(ロールバック済み)
        """
        db = self.get_db()
        try:
            run = CampaignRunModel(
                pair=report.pair,
                seed=str(report.seed),
                count=report.count,
                size_params=json.dumps(report.size_params, sort_keys=True),
                total=report.total,
                agreements=report.agreements,
                disagreements=report.disagreements,
                positives=report.positives,
                skipped=len(report.skipped),
                report=report.to_json(),
            )
            run.disagreement_rows = [
                DisagreementModel(instance_index=d.index, instance_text=d.instance_text)
                for d in report.disagreement_list
            ]
            db.add(run)
            db.commit()
            logger.info("save_report: run_id=%d pair=%s", run.id, run.pair)
            return int(run.id)
        except SQLAlchemyError:
            db.rollback()
            logger.exception("レポートの保存に失敗しました")
            raise
        finally:
            db.close()

    def load_runs(self, pair: str | None = None, limit: int = 20) -> pd.DataFrame:
        """
        保存した実行を新しい順にデータフレームで取得する

        Args:
            pair (str | None): 絞り込むpair(Noneなら全部)
            limit (int): 最大件数

        Returns:
            pd.DataFrame: id, pair, seed, count, total, agreements,
                disagreements, positives, skipped, created_at
        """
        query = select(
            CampaignRunModel.id,
            CampaignRunModel.pair,
            CampaignRunModel.seed,
            CampaignRunModel.count,
            CampaignRunModel.total,
            CampaignRunModel.agreements,
            CampaignRunModel.disagreements,
            CampaignRunModel.positives,
            CampaignRunModel.skipped,
            CampaignRunModel.created_at,
        )
        if pair:
            query = query.where(CampaignRunModel.pair == pair)
        query = query.order_by(CampaignRunModel.id.desc()).limit(limit)

        with self.engine.connect() as conn:
            df = pd.read_sql(query, conn)
        return df

    def get_report_json(self, run_id: int) -> str | None:
        """保存したレポートのJSON(無ければNone)"""
        db = self.get_db()
        try:
            run = db.get(CampaignRunModel, run_id)
            return str(run.report) if run else None
        finally:
            db.close()

    def get_disagreements(self, run_id: int) -> list[tuple[int, str]]:
        """食い違ったインスタンスの (添字, テキスト) を添字順に返す"""
        db = self.get_db()
        try:
            rows = (
                db.query(DisagreementModel)
                .filter(DisagreementModel.run_id == run_id)
                .order_by(DisagreementModel.instance_index)
                .all()
            )
            return [(int(row.instance_index), str(row.instance_text)) for row in rows]
        finally:
            db.close()

    def delete_run(self, run_id: int) -> bool:
        """
        実行を削除する

        Returns:
            bool: 削除できたらTrue(存在しなければFalse)

        Notes:
            食い違いの行も連鎖して削除される
        """
        db = self.get_db()
        try:
            run = db.get(CampaignRunModel, run_id)
            if run is None:
                return False
            db.delete(run)
            db.commit()
            return True
        except SQLAlchemyError:
            db.rollback()
            logger.exception("run_id=%d の削除に失敗しました", run_id)
            return False
        finally:
            db.close()


# -----------------------------------------------
# シングルトン(一つだけ作る)管理用関数
# -----------------------------------------------
@lru_cache(maxsize=1)
def get_store() -> CampaignStore:
    """プロセス全体で一つだけのCampaignStoreインスタンスを返す"""
    return CampaignStore()
