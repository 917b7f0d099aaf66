#!/usr/bin/env python3
"""
CATFL 命令行入口

使用方法:
1. 安装依赖：pip install -r requirements.txt
2. 可选：在.env文件中设置 CATFL_CURVE、CATFL_SEED、CATFL_OUT_DIR 等变量
3. 运行：python catfl_cli.py <子命令> [参数]

子命令:
  run     按配置文件运行仿真，输出 metrics.csv、transcript.jsonl、summary.json、tra_state.db
  bench   测量 CATFL 与PKI基线的签名/验证时延，输出 bench.csv
  cost    计算成本模型并输出 cost_report.csv
  trace   用导出的TRA状态追踪 transcript 中的假名
  attack  在多个种子上扫描攻击场景，输出 attack_report.csv
  serve   启动HTTP追踪/成本接口

退出码: 0 成功, 1 断言或查找失败, 2 用法或配置错误
"""
import argparse
import csv
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Tuple

from dotenv import load_dotenv

# 设置日志
logging.basicConfig(
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    level=logging.INFO,
    stream=sys.stdout,
)
logger = logging.getLogger("catfl-cli")

load_dotenv()

from app.bench import benchmark
from app.bench.cost_model import cost_sweep, write_cost_report_csv
from app.config.catfl_config import catfl_config, load_sim_config
from app.crypto import clpa
from app.crypto.clpa import Pseudonym
from app.database.database import create_session_factory
from app.database.tra_store import export_tra_state, load_tra_state
from app.exceptions import BuildError, CatflError, ConfigError, CurveError, DecodeError
from app.schemas.schemas import AttackKind, AttackReportRow, CostModelInput, FLConfig, MetricsSummary, SimConfig
from app.sim import harness
from app.sim.metrics import metrics, read_transcript_jsonl, write_metrics_csv, write_transcript_jsonl

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def pairs_list(text: str) -> List[int]:
    """解析逗号分隔的用户对数"""
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"无效的用户对数: {text!r}") from None
    if not values or any(value <= 0 for value in values):
        raise argparse.ArgumentTypeError(f"用户对数必须为正整数: {text!r}")
    return values


def simulate(config: SimConfig) -> Tuple[harness.SimState, MetricsSummary]:
    """构建、注入攻击者并运行全部轮次"""
    state = harness.build(config)
    harness.inject(state, config.scenario)
    harness.run_rounds(state, config.fl.rounds)
    final_mse = state.round_metrics[-1].mse if state.round_metrics else None
    summary = metrics(
        state.transcript,
        tra=state.tra,
        protocol_entities=config.protocol_entities,
        total_entities=config.total_entities,
        final_mse=final_mse,
    )
    return state, summary


def scenario_holds(config: SimConfig, state: harness.SimState, summary: MetricsSummary) -> bool:
    """诚实场景零拒绝；攻击场景检测率为1；任何场景下被拒绝的信封都不影响聚合"""
    if not harness.check_safety(state):
        return False
    if config.scenario.kind == AttackKind.NONE:
        if summary.rejected:
            logger.error(f"诚实场景出现 {summary.rejected} 次拒绝: {summary.rejects_by_reason}")
            return False
        return True
    if summary.detection_rate is None:
        logger.error("攻击场景没有产生任何攻击信封")
        return False
    if summary.detection_rate != 1.0:
        logger.error(f"检测率 {summary.detection_rate:.4f} < 1.0")
        return False
    return True


def cmd_run(args) -> int:
    # 先加载配置，失败时不产生任何输出文件
    config = load_sim_config(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.curve is not None:
        updates["curve"] = args.curve
    config = config.model_copy(update=updates)

    state, summary = simulate(config)

    out = Path(args.out or catfl_config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(state.round_metrics, out / "metrics.csv")
    write_transcript_jsonl(state.transcript, out / "transcript.jsonl")
    (out / "summary.json").write_text(summary.model_dump_json(indent=2), encoding="utf-8")
    db_path = out / "tra_state.db"
    session = create_session_factory(f"sqlite:///{db_path}")()
    try:
        export_tra_state(session, state.tra, state.params)
    finally:
        session.close()

    logger.info(
        f"接受 {summary.accepted}, 拒绝 {summary.rejected} {summary.rejects_by_reason}, "
        f"检测率 {summary.detection_rate}, 最终MSE {summary.final_mse}"
    )
    for aid, rid in summary.traced.items():
        logger.info(f"追踪 {aid[:16]}... -> {rid}")
    return EXIT_OK if scenario_holds(config, state, summary) else EXIT_FAILURE


def cmd_bench(args) -> int:
    curve = args.curve or catfl_config.curve
    iterations = args.iters or catfl_config.bench_iterations
    try:
        rows = benchmark.run_benchmark(curve, iterations, warmup=catfl_config.bench_warmup)
    except CurveError as e:
        raise ConfigError(str(e)) from None
    out = Path(args.out or catfl_config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    benchmark.write_bench_csv(rows, out / "bench.csv")
    return EXIT_OK


def cmd_cost(args) -> int:
    curve = args.curve or catfl_config.curve
    baseline_sign = baseline_veri = None
    if args.t_sign is None or args.t_veri is None:
        # 未给出时延时先实测
        rows = benchmark.run_benchmark(curve, args.iters or catfl_config.bench_iterations, catfl_config.bench_warmup)
        t_sign = rows["catfl/sign"].median_us
        t_veri = rows["catfl/verify"].median_us
        baseline_sign = rows["pki-baseline/sign"].median_us
        baseline_veri = rows["pki-baseline/verify"].median_us
    else:
        t_sign, t_veri = args.t_sign, args.t_veri
    report = cost_sweep(
        CostModelInput(
            rounds=args.rounds,
            messages=args.messages,
            t_sign=t_sign,
            t_veri=t_veri,
            poisson_lambda=args.poisson_lambda,
            baseline_t_sign=baseline_sign,
            baseline_t_veri=baseline_veri,
            payload_bytes=args.payload_bytes,
            curve=curve,
        ),
        args.pairs,
    )
    out = Path(args.out or catfl_config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_cost_report_csv(report, out / "cost_report.csv")
    for row in report.rows:
        logger.info(
            f"{row.scheme} P={row.pairs} K={row.entities}: {row.bytes_per_message} 字节/消息, "
            f"每轮 {row.per_round_bytes} 字节, 总时延 {row.total_latency_us:.1f}us"
        )
    return EXIT_OK


def cmd_trace(args) -> int:
    transcript_path = Path(args.transcript)
    if not transcript_path.is_file():
        raise ConfigError(f"transcript 文件不存在: {transcript_path}")
    db_path = Path(args.db) if args.db else transcript_path.parent / "tra_state.db"
    if not db_path.is_file():
        raise ConfigError(f"TRA 状态文件不存在: {db_path}")
    session = create_session_factory(f"sqlite:///{db_path}")()
    try:
        tra = load_tra_state(session)
    finally:
        session.close()
    if tra is None:
        raise ConfigError(f"{db_path} 中没有TRA状态")

    try:
        aid = Pseudonym.from_hex(tra.curve, args.aid)
    except (DecodeError, ValueError) as e:
        raise ConfigError(f"无法解析AID: {e}") from None
    if not any(event.aid == aid.hex for event in read_transcript_jsonl(transcript_path)):
        logger.error(f"AID 不在 transcript 中: {aid.hex[:16]}...")
        print("not-found")
        return EXIT_FAILURE
    result = clpa.trace(tra, aid)
    print(str(result))
    return EXIT_OK


def cmd_attack(args) -> int:
    if args.config:
        base = load_sim_config(args.config)
    else:
        defaults = catfl_config.sim_defaults()
        if args.curve:
            defaults["curve"] = args.curve
        base = SimConfig(
            **defaults,
            pairs=2,
            fl=FLConfig(rounds=args.rounds, total_clients=4, participation=2),
        )
    kind = AttackKind(args.scenario)
    scenario = base.scenario.model_copy(update={"kind": kind})
    first_seed = args.seed if args.seed is not None else base.seed

    rows: List[AttackReportRow] = []
    for seed in range(first_seed, first_seed + args.seeds):
        config = base.model_copy(update={"seed": seed, "scenario": scenario})
        _, summary = simulate(config)
        honest_rejected = summary.rejected - summary.adversarial_rejected
        rows.append(
            AttackReportRow(
                scenario=kind.value,
                seed=seed,
                adversarial_total=summary.adversarial_total,
                adversarial_rejected=summary.adversarial_rejected,
                detection_rate=summary.detection_rate,
                honest_rejected=honest_rejected,
            )
        )
        logger.info(f"seed={seed}: 检测率 {summary.detection_rate}")

    out = Path(args.out or catfl_config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "attack_report.csv").open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(AttackReportRow.model_fields), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.model_dump())
    if kind == AttackKind.NONE:
        return EXIT_OK if all(row.adversarial_total == 0 and row.honest_rejected == 0 for row in rows) else EXIT_FAILURE
    return EXIT_OK if all(row.detection_rate == 1.0 for row in rows) else EXIT_FAILURE


def cmd_serve(args) -> int:
    import uvicorn

    logger.info(f"正在启动HTTP服务 {args.host}:{args.port}")
    uvicorn.run("app.main:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="CATFL 无证书认证联邦学习仿真与基准")
    parser.add_argument("--debug", action="store_true", help="启用调试模式")
    parser.add_argument("--env", help="指定自定义.env文件路径", default=".env")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="运行仿真")
    run.add_argument("--config", required=True, help="key=value 配置文件")
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--curve", choices=["toy", "prod"])
    run.set_defaults(handler=cmd_run)

    bench = sub.add_parser("bench", help="测量签名/验证时延")
    bench.add_argument("--iters", type=int)
    bench.add_argument("--curve", help="toy、prod 或曲线参数文件路径")
    bench.add_argument("--out")
    bench.set_defaults(handler=cmd_bench)

    cost = sub.add_parser("cost", help="计算成本模型")
    cost.add_argument("--rounds", type=int, default=50)
    cost.add_argument("--messages", type=int, default=100)
    cost.add_argument("--t-sign", type=float, help="签名时延(微秒)，缺省时实测")
    cost.add_argument("--t-veri", type=float, help="验证时延(微秒)，缺省时实测")
    cost.add_argument("--lambda", dest="poisson_lambda", type=float, default=4.0)
    cost.add_argument("--pairs", type=pairs_list, default=[5], help="用户对数，逗号分隔可扫描多个值，如 1,5,10")
    cost.add_argument("--payload-bytes", type=int, default=benchmark.BENCH_PAYLOAD_BYTES)
    cost.add_argument("--iters", type=int)
    cost.add_argument("--curve", choices=["toy", "prod"])
    cost.add_argument("--out")
    cost.set_defaults(handler=cmd_cost)

    trace = sub.add_parser("trace", help="追踪假名对应的真实身份")
    trace.add_argument("--transcript", required=True)
    trace.add_argument("--aid", required=True)
    trace.add_argument("--db", help="TRA 状态库，默认与 transcript 同目录的 tra_state.db")
    trace.set_defaults(handler=cmd_trace)

    attack = sub.add_parser("attack", help="在多个种子上扫描攻击场景")
    attack.add_argument("--scenario", required=True, choices=[kind.value for kind in AttackKind])
    attack.add_argument("--seeds", type=int, default=100)
    attack.add_argument("--seed", type=int, help="起始种子")
    attack.add_argument("--rounds", type=int, default=3, help="未给出 --config 时的轮数")
    attack.add_argument("--config")
    attack.add_argument("--curve", choices=["toy", "prod"])
    attack.add_argument("--out")
    attack.set_defaults(handler=cmd_attack)

    serve = sub.add_parser("serve", help="启动HTTP接口")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(handler=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """主函数"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    # 设置日志级别
    if args.debug:
        logging.getLogger().setLevel(logging.DEBUG)
        logger.debug("已启用调试模式")

    # 如果指定了自定义.env文件，则加载它
    if args.env != ".env" and os.path.exists(args.env):
        load_dotenv(dotenv_path=args.env, override=True)
        catfl_config.reload_config()
        logger.info(f"已加载自定义配置文件: {args.env}")

    if not catfl_config.config_valid:
        logger.error("配置检查失败，请检查环境变量")
        return EXIT_USAGE
    catfl_config.log_config_info()

    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error(f"配置错误: {e}")
        return EXIT_USAGE
    except BuildError as e:
        logger.error(f"仿真构建失败: {e}")
        return EXIT_FAILURE
    except CatflError as e:
        logger.error(f"运行失败: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    try:
        sys.exit(main())
    except Exception as e:
        logger.critical(f"程序异常退出: {str(e)}")
        sys.exit(1)
