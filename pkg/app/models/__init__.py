"""
数据模型初始化文件
"""

from app.models.tra_record import TraRecord
from app.models.roster_entry import RosterEntry
from app.models.issued_pseudonym import IssuedPseudonym

__all__ = ["TraRecord", "RosterEntry", "IssuedPseudonym"]
