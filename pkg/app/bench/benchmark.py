"""
签名/验证时延测量

对固定长度负载分别计时 CATFL 与PKI基线的签名和验证，丢弃预热调用，
报告中位数与四分位距（微秒）。单线程顺序执行。
"""
import csv
import logging
import random
import time
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Union

import numpy as np

from app.crypto import baseline, clpa
from app.crypto.group_core import get_curve
from app.exceptions import ConfigError
from app.schemas.schemas import BenchRow

# 设置日志
logger = logging.getLogger(__name__)

MIN_ITERATIONS = 100
DEFAULT_WARMUP = 10
BENCH_PAYLOAD_BYTES = 40

BENCH_COLUMNS = list(BenchRow.model_fields)


def _summarize(scheme: str, operation: str, curve: str, samples: Sequence[float]) -> BenchRow:
    values = np.asarray(samples, dtype=np.float64) * 1e6
    q1, median, q3 = np.percentile(values, [25, 50, 75])
    return BenchRow(
        scheme=scheme,
        operation=operation,
        curve=curve,
        iterations=len(samples),
        median_us=float(median),
        q1_us=float(q1),
        q3_us=float(q3),
        iqr_us=float(q3 - q1),
    )


def _time_calls(calls: Sequence[Callable[[], object]], warmup: int) -> List[float]:
    """calls 的前 warmup 个只执行不计时"""
    samples = []
    for index, call in enumerate(calls):
        start = time.perf_counter()
        call()
        elapsed = time.perf_counter() - start
        if index >= warmup:
            samples.append(elapsed)
    return samples


def run_benchmark(
    curve_name: str, iterations: int, warmup: int = DEFAULT_WARMUP, seed: int = 0
) -> Dict[str, BenchRow]:
    """返回 {"catfl/sign": row, "catfl/verify": row, "pki-baseline/sign": ..., ...}"""
    if iterations < MIN_ITERATIONS:
        raise ConfigError(f"迭代次数至少为 {MIN_ITERATIONS}，当前为 {iterations}")
    curve = get_curve(curve_name)
    rng = random.Random(f"bench:{seed}")
    payload = bytes(rng.getrandbits(8) for _ in range(BENCH_PAYLOAD_BYTES))
    total = iterations + warmup

    params, tra, kgc = clpa.setup(curve, rng)
    rid = clpa.RealIdentity.from_name("bench")
    tra.register([rid])
    (aid, psk), = clpa.replenish_pseudonyms(tra, kgc, params, rid, 1, rng, 0)
    keypair = clpa.extract_usk(params, aid, psk, rng)

    envelopes = []
    catfl_sign = _time_calls(
        [lambda t=t: envelopes.append(clpa.sign(params, aid, keypair, payload, t, rng)) for t in range(total)],
        warmup,
    )
    # 不使用重放缓存，只计时验证本身
    catfl_verify = _time_calls([lambda env=env: clpa.verify(params, env, env.t) for env in envelopes], warmup)
    rejected = sum(1 for env in envelopes if not clpa.verify(params, env, env.t).accepted)
    if rejected:
        logger.error(f"基准测试中有 {rejected} 条 CATFL 信封未通过验证")

    ca = baseline.CertificateAuthority(curve, rng)
    holder = baseline.baseline_enroll(ca, "bench", rng, 0, params.pseudonym_lifetime)
    messages = []
    baseline_sign = _time_calls(
        [lambda t=t: messages.append(baseline.baseline_sign(holder, payload, t, rng)) for t in range(total)],
        warmup,
    )
    baseline_verify = _time_calls(
        [
            lambda msg=msg: baseline.baseline_verify(ca.public_key, msg, msg.t, params.freshness_window)
            for msg in messages
        ],
        warmup,
    )

    rows = {
        "catfl/sign": _summarize("catfl", "sign", curve.name, catfl_sign),
        "catfl/verify": _summarize("catfl", "verify", curve.name, catfl_verify),
        "pki-baseline/sign": _summarize("pki-baseline", "sign", curve.name, baseline_sign),
        "pki-baseline/verify": _summarize("pki-baseline", "verify", curve.name, baseline_verify),
    }
    for key, row in rows.items():
        logger.info(f"{key}: 中位数 {row.median_us:.1f}us, IQR {row.iqr_us:.1f}us")
    return rows


def write_bench_csv(rows: Dict[str, BenchRow], path: Union[str, Path]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=BENCH_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows.values():
            writer.writerow(row.model_dump())
    logger.info(f"已写入 {path}")
