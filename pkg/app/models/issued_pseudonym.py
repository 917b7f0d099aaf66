from sqlalchemy import Column, Integer, String, Text

from app.database.database import Base

class IssuedPseudonym(Base):
    __tablename__ = "issued_pseudonym"

    id = Column(Integer, primary_key=True, index=True)
    aid_hex = Column(Text, unique=True, index=True)  # AID_1 || AID_2 || T_i 的十六进制
    rid = Column(String, index=True)  # 签发对象的真实身份
    t_issue = Column(Integer)  # 签发时间戳 T_i（仿真秒）
