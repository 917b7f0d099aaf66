"""
CATFL 配置模块
"""
import os
import logging
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import ValidationError

from app.exceptions import ConfigError
from app.schemas.schemas import SimConfig

# 加载环境变量
load_dotenv()

# 日志配置
logging.basicConfig(
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    level=logging.INFO
)
logger = logging.getLogger(__name__)

# 配置文件键 -> SimConfig 中的位置
_SIM_KEYS = {
    "pairs", "poisson_lambda", "round_interval", "seed", "curve",
    "freshness_window", "pseudonym_lifetime", "pseudonym_batch", "u2u_payload_bytes",
}
_FL_KEYS = {
    "rounds", "total_clients", "participation", "local_epochs", "learning_rate",
    "dimension", "data_seed", "points_per_client", "test_points", "noise_sigma", "non_uniform",
}
_SCENARIO_KEYS = {
    "scenario": "kind",
    "target_round": "target_round",
    "target_entity": "target_entity",
    "attempts_per_round": "attempts_per_round",
}


class CatflConfig:
    """运行环境配置类"""

    def __init__(self):
        """初始化配置"""
        self.reload_config()

    def reload_config(self):
        """重新加载配置"""
        # 曲线：toy 或 prod
        self.curve = os.getenv("CATFL_CURVE", "prod")

        # 默认随机种子
        self.seed = int(os.getenv("CATFL_SEED", "1"))

        # 输出目录
        self.out_dir = Path(os.getenv("CATFL_OUT_DIR", "./out"))

        # 信封新鲜性窗口(仿真秒)
        self.freshness_window = int(os.getenv("CATFL_FRESHNESS_WINDOW", "300"))

        # 假名有效期(仿真秒)
        self.pseudonym_lifetime = int(os.getenv("CATFL_PSEUDONYM_LIFETIME", str(24 * 3600)))

        # 基准测试迭代次数与预热次数
        self.bench_iterations = int(os.getenv("CATFL_BENCH_ITERS", "200"))
        self.bench_warmup = int(os.getenv("CATFL_BENCH_WARMUP", "10"))

        # TRA 状态数据库
        self.database_url = os.getenv("DATABASE_URL", "sqlite:///./catfl_state.db")

        # 检查配置有效性
        self._check_config()

    def _check_config(self):
        """检查配置是否有效"""
        self.config_valid = True

        if self.curve not in ("toy", "prod"):
            logger.error(f"CATFL_CURVE 无效: {self.curve}")
            self.config_valid = False

        if self.freshness_window <= 0 or self.pseudonym_lifetime <= 0:
            logger.error("时间窗口必须为正")
            self.config_valid = False

        if self.bench_iterations < 100:
            logger.warning("CATFL_BENCH_ITERS 小于100，bench 命令将拒绝运行")

        if self.curve == "toy":
            logger.warning("当前使用玩具曲线，仅适用于测试")

    def sim_defaults(self) -> Dict[str, object]:
        """仿真配置的环境默认值，配置文件中的同名键优先"""
        return {
            "seed": self.seed,
            "curve": self.curve,
            "freshness_window": self.freshness_window,
            "pseudonym_lifetime": self.pseudonym_lifetime,
        }

    def log_config_info(self):
        """记录配置信息"""
        # 数据库URL可能包含口令
        masked_url = self.database_url.split("@")[-1] if "@" in self.database_url else self.database_url
        logger.info("============= 配置信息 =============")
        logger.info(f"曲线: {self.curve}")
        logger.info(f"随机种子: {self.seed}")
        logger.info(f"输出目录: {self.out_dir}")
        logger.info(f"新鲜性窗口: {self.freshness_window}s, 假名有效期: {self.pseudonym_lifetime}s")
        logger.info(f"TRA状态库: {masked_url}")
        logger.info("====================================")


def _coerce(raw: str) -> Union[str, bool]:
    lowered = raw.lower()
    if lowered in ("true", "yes"):
        return True
    if lowered in ("false", "no"):
        return False
    return raw


def parse_config_lines(lines: Iterable[str]) -> Tuple[Dict[str, object], Dict[str, int]]:
    """解析 key=value 文本；返回取值与每个键所在行号"""
    values: Dict[str, object] = {}
    line_of: Dict[str, int] = {}
    known = _SIM_KEYS | _FL_KEYS | set(_SCENARIO_KEYS)
    for number, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"缺少 '=': {stripped!r}", line=number)
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in known:
            raise ConfigError(f"未知配置项 {key!r}", line=number)
        if key in values:
            raise ConfigError(f"重复的配置项 {key!r}", line=number)
        if not raw:
            raise ConfigError(f"配置项 {key!r} 没有值", line=number)
        values[key] = _coerce(raw)
        line_of[key] = number
    return values, line_of


def build_sim_config(
    values: Dict[str, object], line_of: Optional[Dict[str, int]] = None, defaults: Optional[Dict[str, object]] = None
) -> SimConfig:
    """由扁平键值构造 SimConfig；defaults 垫在文件取值之下；校验失败时报告出错键所在行"""
    line_of = line_of or {}
    values = {**(defaults or {}), **values}
    sim = {key: value for key, value in values.items() if key in _SIM_KEYS}
    fl = {key: value for key, value in values.items() if key in _FL_KEYS}
    scenario = {_SCENARIO_KEYS[key]: value for key, value in values.items() if key in _SCENARIO_KEYS}
    pairs = int(sim.get("pairs", SimConfig.model_fields["pairs"].default))
    fl.setdefault("total_clients", 2 * pairs)
    try:
        return SimConfig(**sim, fl=fl, scenario=scenario)
    except ValidationError as e:
        first = e.errors()[0]
        loc = [str(part) for part in first["loc"]]
        key = next((part for part in reversed(loc) if part in line_of), None)
        if key is None and "kind" in loc:
            key = "scenario"
        raise ConfigError(f"{'.'.join(loc) or 'config'}: {first['msg']}", line=line_of.get(key)) from None


def load_sim_config(path: Union[str, Path]) -> SimConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"配置文件不存在: {path}")
    with path.open("r", encoding="utf-8") as handle:
        values, line_of = parse_config_lines(handle)
    config = build_sim_config(values, line_of, defaults=catfl_config.sim_defaults())
    logger.info(f"已加载仿真配置: {path}")
    return config


# 创建全局配置实例
catfl_config = CatflConfig()

# 导出实例
__all__ = ["catfl_config", "CatflConfig", "load_sim_config", "parse_config_lines", "build_sim_config"]
