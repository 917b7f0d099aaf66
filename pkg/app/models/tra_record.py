from sqlalchemy import Column, Integer, String, Text

from app.database.database import Base

class TraRecord(Base):
    __tablename__ = "tra_record"

    id = Column(Integer, primary_key=True, index=True)
    curve = Column(String, nullable=False)  # 曲线名称 toy/prod
    alpha_hex = Column(Text, nullable=False)  # TRA 主私钥 alpha
    t_pub_hex = Column(Text, nullable=False)  # T_pub 的规范编码
    freshness_window = Column(Integer, nullable=False)
    pseudonym_lifetime = Column(Integer, nullable=False)
