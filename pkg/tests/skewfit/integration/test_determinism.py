import pytest

from src.skewfit.cli import main


@pytest.mark.slow
def test_worker_count_does_not_change_reports(tmp_path):
    data = tmp_path / "data.csv"
    assert main(["simulate", "--model", "st", "--n", "150", "--seed", "3", "--out", str(data)]) == 0

    reports = []
    for workers in ("1", "4"):
        out = tmp_path / f"compare_{workers}.json"
        code = main(["compare", "--input", str(data), "--seed", "21", "--particles", "3000", "--iterations", "3", "--workers", workers, "--out", str(out)])
        assert code == 0
        reports.append(out.read_bytes())
    assert reports[0] == reports[1]
