import io
import json

import pytest

from deltaspec.cli import main
from deltaspec.constants import EXIT_CONFIG_ERROR
from tests.helpers import *

SINGLE_CENTER = {
    "geometry": {"kind": "FlatSpace", "dimension": 3},
    "model": {"kind": "nonrelativistic", "centers": [[0, 0, 0]], "mu": [1.0]},
    "task": {"window": [-10, -0.01]},
}


def write_config(tmp_path, document) -> str:
    path = tmp_path / "run.json"
    path.write_text(json.dumps(document, indent=2), encoding="utf-8")
    return str(path)


def run(*argv):
    stdout, stderr = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=stdout, stderr=stderr)
    return code, stdout.getvalue(), stderr.getvalue()


@pytest.fixture
def runner():
    with TestRunner() as test_runner:
        yield test_runner


def test_spectrum_single_center(runner, tmp_path):
    code, out, _ = run("spectrum", "--config", write_config(tmp_path, SINGLE_CENTER))
    assert code == EXIT_OK
    document = json.loads(out)
    assert document['task'] == 'spectrum'
    assert document['model'] == 'nonrelativistic'
    assert len(document['table']) == 1
    assert document['table'][0]['energy']['value'] == pytest.approx(-1.0, rel=1e-8)
    assert document['exit_code'] == EXIT_OK


def test_spectrum_without_root(runner, tmp_path):
    config = dict(SINGLE_CENTER, task={"window": [-0.5, -0.01]})
    code, out, _ = run("spectrum", "--config", write_config(tmp_path, config))
    assert code == EXIT_NO_ROOT
    assert json.loads(out)['table'] == []


def test_csv_to_file(runner, tmp_path):
    target = tmp_path / "spectrum.csv"
    code, out, _ = run("spectrum", "--config", write_config(tmp_path, SINGLE_CENTER), "--format", "csv",
                       "--output", str(target))
    assert code == EXIT_OK
    assert out == ""
    lines = target.read_text().splitlines()
    assert lines[0].startswith("energy,energy_tolerance,residual")
    assert float(lines[1].split(",")[0]) == pytest.approx(-1.0, rel=1e-8)


def test_missing_config_file(runner, tmp_path):
    code, out, err = run("spectrum", "--config", str(tmp_path / "missing.json"))
    assert code == EXIT_CONFIG_ERROR
    assert out == ""
    assert err.startswith("deltaspec: ")


def test_invalid_config_names_the_entry(runner, tmp_path):
    config = dict(SINGLE_CENTER, model={"kind": "nonrelativistic", "centers": [[0, 0, 0]], "mu": [-1.0]})
    code, _, err = run("spectrum", "--config", write_config(tmp_path, config))
    assert code == EXIT_CONFIG_ERROR
    assert "model.mu" in err


def test_wrong_model_for_task(runner, tmp_path):
    code, _, err = run("check-decay", "--config", write_config(tmp_path, SINGLE_CENTER))
    assert code == EXIT_CONFIG_ERROR
    assert "model.kind" in err


def test_failed_computation(runner):
    @task(runner=runner)
    def explode(config):
        raise ArithmeticError("series did not converge")

    code, _, err = run("explode")
    assert code == EXIT_CONFIG_ERROR
    assert "Task Error in explode" in err


def test_violated_check(runner):
    @task(runner=runner)
    def always_violated(config):
        report = BoundReport('fake', 'nonrelativistic', 'g', 'E', (-1.0,), measured([2.0]), measured([1.0]),
                             verdict=Verdict.VIOLATED)
        return TaskOutput('always-violated', 'g', 'nonrelativistic', reports=[report])

    code, out, _ = run("always-violated")
    assert code == EXIT_VIOLATED
    assert json.loads(out)['verdict'] == 'violated'


def test_flags_override_the_file(runner, tmp_path):
    code, out, _ = run("check-symmetry", "--config", write_config(tmp_path, SINGLE_CENTER), "--threads", "2",
                       "--seed", "5", "--log-level", "warning")
    assert code == EXIT_OK
    document = json.loads(out)
    assert document['config']['threads'] == 2
    assert document['config']['task']['seed'] == 5
    assert document['config']['log_level'] == 'WARNING'
    assert document['verdict'] == 'holds'


def test_plot_data_flag(runner, tmp_path):
    config = dict(SINGLE_CENTER, task={"checks": ["alpha_scaling"]})
    target = tmp_path / "bounds.json"
    code, _, _ = run("check-bounds", "--config", write_config(tmp_path, config), "--output", str(target),
                     "--plot-data")
    assert code in (EXIT_OK, EXIT_VIOLATED)
    assert (tmp_path / "check_bounds_alpha_scaling.dat").exists()


def test_unknown_subcommand(runner):
    with pytest.raises(SystemExit):
        run("frobnicate")
