"""
泊松等待时延
"""
import math
import random

# exp(-lam) 在 lam 约 745 以上下溢为 0，逐块抽样
POISSON_CHUNK = 500.0


def _sample_poisson_chunk(rng: random.Random, lam: float) -> int:
    u = rng.random()
    k = 0
    prob = math.exp(-lam)
    cumulative = prob
    while u > cumulative and prob > 0.0:
        k += 1
        prob *= lam / k
        cumulative += prob
    return k


def sample_poisson(rng: random.Random, lam: float) -> int:
    """逆变换法抽样 Poisson(lam)；大 lam 拆成若干独立泊松之和"""
    if lam < 0:
        raise ValueError("lambda 必须非负")
    total = 0
    remaining = lam
    while remaining > 0:
        chunk = min(remaining, POISSON_CHUNK)
        total += _sample_poisson_chunk(rng, chunk)
        remaining -= chunk
    return total


def monte_carlo_waiting(rng: random.Random, lam: float, samples: int) -> float:
    """抽样估计平均等待时延"""
    if samples <= 0:
        raise ValueError("样本数必须为正")
    return sum(sample_poisson(rng, lam) for _ in range(samples)) / samples
