from sqlalchemy import Column, Integer, String

from app.database.database import Base

class RosterEntry(Base):
    __tablename__ = "roster_entry"

    id = Column(Integer, primary_key=True, index=True)
    rid = Column(String, unique=True, index=True)  # 已注册的真实身份
