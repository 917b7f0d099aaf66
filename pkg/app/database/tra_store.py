"""
TRA 状态导出与加载
"""
import logging
from typing import Optional

from sqlalchemy.orm import Session

from app.crypto.clpa import RealIdentity, SystemParams, TraState
from app.crypto.group_core import decode_element, encode_element, get_curve
from app.models import IssuedPseudonym, RosterEntry, TraRecord

# 设置日志
logger = logging.getLogger(__name__)


def export_tra_state(db: Session, tra: TraState, params: SystemParams) -> None:
    """覆盖写入 TRA 主私钥、名册与签发记录"""
    db.query(IssuedPseudonym).delete()
    db.query(RosterEntry).delete()
    db.query(TraRecord).delete()
    db.add(
        TraRecord(
            curve=tra.curve.name,
            alpha_hex=format(tra.alpha, "x"),
            t_pub_hex=encode_element(tra.t_pub).hex(),
            freshness_window=params.freshness_window,
            pseudonym_lifetime=params.pseudonym_lifetime,
        )
    )
    for rid in sorted(tra.roster, key=lambda r: r.bits):
        db.add(RosterEntry(rid=rid.name))
    for aid_bytes, (rid, t_issue) in tra.issued.items():
        db.add(IssuedPseudonym(aid_hex=aid_bytes.hex(), rid=rid.name, t_issue=t_issue))
    db.commit()
    logger.info(f"已导出TRA状态: 名册 {len(tra.roster)} 条, 签发记录 {len(tra.issued)} 条")


def load_tra_state(db: Session) -> Optional[TraState]:
    """从数据库恢复 TraState；没有记录时返回 None"""
    record = db.query(TraRecord).first()
    if record is None:
        return None
    curve = get_curve(record.curve)
    tra = TraState(
        curve=curve,
        alpha=int(record.alpha_hex, 16),
        t_pub=decode_element(curve, bytes.fromhex(record.t_pub_hex)),
    )
    tra.register(RealIdentity.from_name(entry.rid) for entry in db.query(RosterEntry).all())
    for issued in db.query(IssuedPseudonym).all():
        tra.issued[bytes.fromhex(issued.aid_hex)] = (RealIdentity.from_name(issued.rid), issued.t_issue)
    return tra
