import csv

import pytest

from app.bench import benchmark
from app.exceptions import ConfigError


def test_rejects_too_few_iterations():
    with pytest.raises(ConfigError):
        benchmark.run_benchmark("toy", benchmark.MIN_ITERATIONS - 1)


def test_benchmark_rows(tmp_path):
    rows = benchmark.run_benchmark("toy", 100, warmup=5)
    assert sorted(rows) == ["catfl/sign", "catfl/verify", "pki-baseline/sign", "pki-baseline/verify"]
    for row in rows.values():
        assert row.iterations == 100
        assert row.curve == "toy"
        assert 0 <= row.q1_us <= row.median_us <= row.q3_us
        assert row.iqr_us == pytest.approx(row.q3_us - row.q1_us)

    path = tmp_path / "bench.csv"
    benchmark.write_bench_csv(rows, path)
    with path.open(encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        assert reader.fieldnames == benchmark.BENCH_COLUMNS
        assert [(r["scheme"], r["operation"]) for r in reader] == [
            ("catfl", "sign"),
            ("catfl", "verify"),
            ("pki-baseline", "sign"),
            ("pki-baseline", "verify"),
        ]
