"""
通信成本模型

训练成本 = N·(T_sign + T_veri)，消息成本 = M·(T_sign + T_veri)，
期望等待时延加项 = N·λ。每条消息的字节数取自两种方案的实际线格式。
"""
import csv
import logging
import random
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Tuple, Union

from app.crypto import baseline, clpa
from app.crypto.group_core import get_curve
from app.schemas.schemas import CostModelInput, CostReport, CostReportRow

# 设置日志
logger = logging.getLogger(__name__)

SCHEME_CATFL = "catfl"
SCHEME_BASELINE = "pki-baseline"

# CATFL 每条消息：1 次签名，1 次多项等式验证
CATFL_SIGN_OPS = 1
CATFL_VERIFY_OPS = 1

COST_REPORT_COLUMNS = list(CostReportRow.model_fields)

_SECONDS_TO_US = 1_000_000


@lru_cache(maxsize=None)
def message_sizes(curve_name: str, payload_bytes: int) -> Tuple[int, int]:
    """同一负载下 (CATFL信封字节数, 基线消息+证书字节数)"""
    curve = get_curve(curve_name)
    rng = random.Random(f"sizes:{curve_name}:{payload_bytes}")
    payload = bytes(payload_bytes)

    params, tra, kgc = clpa.setup(curve, rng)
    rid = clpa.RealIdentity.from_name("sizing")
    tra.register([rid])
    (aid, psk), = clpa.replenish_pseudonyms(tra, kgc, params, rid, 1, rng, 0)
    keypair = clpa.extract_usk(params, aid, psk, rng)
    envelope = clpa.sign(params, aid, keypair, payload, 0, rng)

    ca = baseline.CertificateAuthority(curve, rng)
    holder = baseline.baseline_enroll(ca, "sizing", rng, 0, params.pseudonym_lifetime)
    message = baseline.baseline_sign(holder, payload, 0, rng)
    return len(envelope.to_wire()), len(message.to_wire())


def _row(
    scheme: str, data: CostModelInput, t_sign: float, t_veri: float, size: int, sign_ops: int, verify_ops: int
) -> CostReportRow:
    per_message = t_sign + t_veri
    training = data.rounds * per_message
    messaging = data.messages * per_message
    waiting_us = data.rounds * data.poisson_lambda * _SECONDS_TO_US
    clients = 2 * data.pairs
    return CostReportRow(
        scheme=scheme,
        pairs=data.pairs,
        entities=clients + 1,
        bytes_per_message=size,
        sign_ops_per_message=sign_ops,
        verify_ops_per_message=verify_ops,
        t_sign_us=t_sign,
        t_veri_us=t_veri,
        training_cost_us=training,
        messaging_cost_us=messaging,
        total_latency_us=training + messaging + waiting_us,
        # 每轮所有客户端 (2P) 各签名、验证一次
        per_round_all_clients_us=clients * per_message,
        per_round_bytes=clients * size,
        mean_waiting_latency_s=data.poisson_lambda,
    )


def cost_model(data: CostModelInput) -> CostReport:
    """
    为 CATFL 与PKI基线各生成一行。
    基线时延未测量时按操作次数由 CATFL 的时延外推。
    """
    catfl_size, baseline_size = message_sizes(data.curve, data.payload_bytes)
    baseline_t_sign = data.baseline_t_sign
    if baseline_t_sign is None:
        baseline_t_sign = data.t_sign * baseline.SIGN_OPS_PER_MESSAGE / CATFL_SIGN_OPS
    baseline_t_veri = data.baseline_t_veri
    if baseline_t_veri is None:
        baseline_t_veri = data.t_veri * baseline.VERIFY_OPS_PER_MESSAGE / CATFL_VERIFY_OPS
    return CostReport(
        rows=[
            _row(SCHEME_CATFL, data, data.t_sign, data.t_veri, catfl_size, CATFL_SIGN_OPS, CATFL_VERIFY_OPS),
            _row(
                SCHEME_BASELINE,
                data,
                baseline_t_sign,
                baseline_t_veri,
                baseline_size,
                baseline.SIGN_OPS_PER_MESSAGE,
                baseline.VERIFY_OPS_PER_MESSAGE,
            ),
        ]
    )


def cost_sweep(data: CostModelInput, pairs_values: Iterable[int]) -> CostReport:
    """对每个用户对数 P 各算一组行，其余输入不变"""
    rows = []
    for pairs in pairs_values:
        rows.extend(cost_model(CostModelInput(**{**data.model_dump(), "pairs": pairs})).rows)
    return CostReport(rows=rows)


def write_cost_report_csv(report: CostReport, path: Union[str, Path]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=COST_REPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in report.rows:
            writer.writerow(row.model_dump())
    logger.info(f"已写入 {path}")
