"""
联邦学习基础模块

合成线性回归任务、本地梯度下降训练、模型更新的规范编码（被签名的 m）
以及 FedAvg 聚合。
"""
import logging
import struct
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from app.exceptions import AggregationError, TrainingError, UpdateFormatError
from app.schemas.schemas import FLConfig

# 设置日志
logger = logging.getLogger(__name__)

# 更新编码头：4字节轮次 + 4字节长度（小端）
_HEADER = struct.Struct("<II")
_WEIGHT_DTYPE = np.dtype("<f8")


@dataclass(frozen=True)
class ModelVector:
    """全局或本地模型权重"""

    weights: np.ndarray
    round: int = 0

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.ndim != 1:
            raise ValueError("权重必须是一维向量")
        if not np.all(np.isfinite(weights)):
            raise ValueError("权重中存在 NaN/Inf")
        if self.round < 0:
            raise ValueError("轮次不能为负")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @property
    def dimension(self) -> int:
        return int(self.weights.shape[0])

    @classmethod
    def zeros(cls, dimension: int) -> "ModelVector":
        return cls(np.zeros(dimension), 0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModelVector):
            return NotImplemented
        return self.round == other.round and np.array_equal(self.weights, other.weights)

    def __hash__(self) -> int:
        return hash((self.round, self.weights.tobytes()))


@dataclass(frozen=True)
class DataShard:
    """单个客户端的私有数据"""

    features: np.ndarray
    targets: np.ndarray
    client_index: int

    def __post_init__(self):
        if self.features.ndim != 2 or self.targets.ndim != 1:
            raise ValueError("特征必须为二维、目标必须为一维")
        if self.features.shape[0] != self.targets.shape[0] or self.targets.shape[0] < 1:
            raise ValueError("特征与目标数量必须相同且至少为1")

    def __len__(self) -> int:
        return int(self.targets.shape[0])


@dataclass(frozen=True)
class TestSet:
    features: np.ndarray
    targets: np.ndarray


def make_task(config: FLConfig, rng: np.random.Generator) -> Tuple[List[DataShard], TestSet, np.ndarray]:
    """生成 y = w*·x + noise 的合成任务并按客户端切分"""
    d = config.dimension
    true_weights = rng.normal(0.0, 1.0, size=d)
    shards = []
    for index in range(config.total_clients):
        # 非均匀模式下每个客户端的特征分布有不同的均值与尺度
        if config.non_uniform:
            loc = rng.normal(0.0, 1.0, size=d)
            scale = rng.uniform(0.5, 1.5, size=d)
        else:
            loc, scale = np.zeros(d), np.ones(d)
        features = rng.normal(loc, scale, size=(config.points_per_client, d))
        noise = rng.normal(0.0, config.noise_sigma, size=config.points_per_client) if config.noise_sigma else 0.0
        shards.append(DataShard(features, features @ true_weights + noise, index))
    test_features = rng.normal(0.0, 1.0, size=(config.test_points, d))
    test_noise = rng.normal(0.0, config.noise_sigma, size=config.test_points) if config.noise_sigma else 0.0
    test = TestSet(test_features, test_features @ true_weights + test_noise)
    logger.info(f"已生成合成任务: {config.total_clients} 个客户端 × {config.points_per_client} 条, 维度 {d}")
    return shards, test, true_weights


def loss(weights: np.ndarray, shard: DataShard) -> float:
    """平方损失的均值"""
    residual = shard.features @ weights - shard.targets
    return float(np.mean(residual ** 2))


def gradient(weights: np.ndarray, shard: DataShard) -> np.ndarray:
    """均方损失梯度 2/n · X^T (Xw - y)"""
    residual = shard.features @ weights - shard.targets
    return 2.0 * shard.features.T @ residual / len(shard)


def local_train(model: ModelVector, shard: DataShard, epochs: int, lr: float) -> ModelVector:
    """全批量梯度下降 epochs 步，轮次加一"""
    weights = np.array(model.weights, dtype=np.float64)
    for _ in range(epochs):
        weights = weights - lr * gradient(weights, shard)
        if not np.all(np.isfinite(weights)):
            logger.error(f"客户端 {shard.client_index} 本地训练发散 (lr={lr})")
            raise TrainingError(f"客户端 {shard.client_index} 的权重出现非有限值")
    return ModelVector(weights, model.round + 1)


def encode_update(model: ModelVector) -> bytes:
    """4字节轮次、4字节长度，随后每个权重为小端 IEEE-754 float64"""
    return _HEADER.pack(model.round, model.dimension) + model.weights.astype(_WEIGHT_DTYPE).tobytes()


def decode_update(data: bytes) -> ModelVector:
    if len(data) < _HEADER.size:
        raise UpdateFormatError("更新编码短于头部")
    round_index, length = _HEADER.unpack_from(data)
    body = data[_HEADER.size:]
    if len(body) != length * _WEIGHT_DTYPE.itemsize:
        raise UpdateFormatError(f"声明长度 {length} 与实际字节数 {len(body)} 不符")
    try:
        return ModelVector(np.frombuffer(body, dtype=_WEIGHT_DTYPE).astype(np.float64), round_index)
    except ValueError as e:
        raise UpdateFormatError(str(e)) from None


def aggregate(updates: Sequence[ModelVector], weights: Sequence[float]) -> ModelVector:
    """加权算术平均，轮次保持不变"""
    if not updates:
        raise AggregationError("没有可聚合的更新")
    if len(updates) != len(weights):
        raise AggregationError("更新与权重数量不一致")
    dimension, round_index = updates[0].dimension, updates[0].round
    for update in updates:
        if update.dimension != dimension:
            raise AggregationError(f"维度不一致: {update.dimension} != {dimension}")
        if update.round != round_index:
            raise AggregationError(f"轮次不一致: {update.round} != {round_index}")
    coeffs = np.asarray(weights, dtype=np.float64)
    if np.any(coeffs < 0) or not np.all(np.isfinite(coeffs)) or coeffs.sum() == 0:
        raise AggregationError("聚合权重必须非负且不全为0")
    stacked = np.stack([update.weights for update in updates])
    return ModelVector(coeffs @ stacked / coeffs.sum(), round_index)


def evaluate(model: ModelVector, test: TestSet) -> float:
    """测试集上的均方误差"""
    if test.features.shape[1] != model.dimension:
        raise ValueError("模型维度与测试集不一致")
    residual = test.features @ model.weights - test.targets
    return float(np.mean(residual ** 2))


def pooled_least_squares(shards: Sequence[DataShard]) -> np.ndarray:
    """合并全部数据后通过正规方程求解最小二乘"""
    features = np.vstack([shard.features for shard in shards])
    targets = np.concatenate([shard.targets for shard in shards])
    return np.linalg.solve(features.T @ features, features.T @ targets)
