from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker
import os
import logging
from dotenv import load_dotenv

# 设置日志
logger = logging.getLogger(__name__)

# 加载环境变量
load_dotenv()

# 从环境变量中获取数据库URL，如果没有则使用SQLite
SQLALCHEMY_DATABASE_URL = os.getenv(
    "DATABASE_URL", "sqlite:///./catfl_state.db"
)

# 创建模型基类
Base = declarative_base()


def create_session_factory(url: str):
    """为指定URL创建引擎与会话工厂，并确保表结构存在"""
    connect_args = {"check_same_thread": False} if url.startswith("sqlite") else {}
    engine = create_engine(url, connect_args=connect_args)
    # 导入模型以注册表
    import app.models  # noqa: F401
    Base.metadata.create_all(bind=engine)
    return sessionmaker(autocommit=False, autoflush=False, bind=engine)


# 默认会话（延迟创建，避免导入时生成数据库文件）
_default_factory = None


def get_db():
    """依赖项，用于获取数据库会话"""
    global _default_factory
    if _default_factory is None:
        _default_factory = create_session_factory(SQLALCHEMY_DATABASE_URL)
    db = _default_factory()
    try:
        yield db
    finally:
        db.close()
