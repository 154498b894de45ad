import json

import pytest

from tests.helpers import *


def violated_report() -> BoundReport:
    return BoundReport('fake', 'nonrelativistic', 'FlatSpace(D=3)', 'E', (-1.0, -2.0), measured([1.0, 2.0]),
                       measured([0.5, 0.5]), None, Verdict.VIOLATED, details="grid point 0 exceeds its bound")


def passing_report() -> BoundReport:
    return BoundReport('pairs', 'relativistic', 'm=1', '(s, lambda)', ((0.5, 1.0),), measured([1e-12]),
                       verdict=Verdict.HOLDS)


@pytest.fixture
def runner():
    with TestRunner() as test_runner:
        yield test_runner


def test_add_task_rejects_duplicates(runner):
    assert 'spectrum' in runner.tasks
    with pytest.raises(ValueError):
        runner.add_task('spectrum', lambda config: None)


def test_task_decorator_names(runner):
    @task(runner=runner)
    def my_custom_task(config):
        return TaskOutput('my-custom-task', 'g', 'lee')

    @task('renamed', runner=runner)
    def another_task(config):
        return TaskOutput('renamed', 'g', 'lee')

    assert runner.tasks['my-custom-task'] is my_custom_task
    assert runner.tasks['renamed'] is another_task
    assert repr(runner) == "TEST_RUNNER"


def test_update_config_ignores_unknown_keys(runner):
    runner.update_config(threads=3, verbose=True)
    assert runner.configuration.threads == 3
    assert not hasattr(runner.configuration, 'verbose')


def test_unknown_task(runner):
    with pytest.raises(ConfigurationError) as failure:
        runner.run_task('frobnicate')
    assert failure.value.location == "task"


def test_invalid_configuration_is_reported(runner):
    runner.update_config(threads=0)
    with pytest.raises(ConfigurationError):
        runner.run_task('spectrum')


def test_failing_task_raises_task_failure(runner):
    @task(runner=runner)
    def boom(config):
        raise RuntimeError("no convergence")

    with pytest.raises(TaskFailure) as failure:
        runner.run_task('boom')
    assert "Task Error in boom: no convergence" in str(failure.value)
    assert "RuntimeError" in str(failure.value)


def test_exit_codes():
    assert TaskOutput('spectrum', 'g', 'lee', table=[1], expects_rows=True).exit_code == EXIT_OK
    assert TaskOutput('spectrum', 'g', 'lee', expects_rows=True).exit_code == EXIT_NO_ROOT
    assert TaskOutput('check-bounds', 'g', 'lee').exit_code == EXIT_OK
    assert TaskOutput('check-bounds', 'g', 'lee', reports=[violated_report()]).exit_code == EXIT_VIOLATED


def test_render_json_is_deterministic(runner):
    output = TaskOutput('check-bounds', 'FlatSpace(D=3)', 'nonrelativistic',
                        reports=[violated_report(), passing_report()])
    text = runner.render(output)
    assert text == runner.render(output)
    document = json.loads(text)
    assert text == json.dumps(document, sort_keys=True, indent=2) + "\n"
    assert document['schema_version'] == SCHEMA_VERSION
    assert document['verdict'] == 'violated'
    assert document['exit_code'] == EXIT_VIOLATED
    assert document['reports'][1]['grid'] == [[0.5, 1.0]]
    assert document['config']['threads'] == runner.configuration.threads


def test_render_json_without_reports(runner):
    document = json.loads(runner.render(TaskOutput('spectrum', 'g', 'nonrelativistic', expects_rows=True)))
    assert document['verdict'] is None
    assert document['table'] == []
    assert document['exit_code'] == EXIT_NO_ROOT


def test_render_csv_table():
    rows = [BoundStateRow(Measurement(-1.0, 1e-12, True, 'closed form'), Measurement(0.0), (1.0, 0.0)),
            BoundStateRow(Measurement(-0.25, 1e-12, True, 'closed form'), Measurement(1e-15), (0.0, 1.0), 2)]
    text = render_csv(TaskOutput('spectrum', 'g', 'nonrelativistic', table=rows))
    lines = text.splitlines()
    assert lines[0] == "energy,energy_tolerance,residual,residual_tolerance,vector,sector"
    assert lines[1] == "-1.0,1e-12,0.0,0.0,1.0 0.0,"
    assert lines[2].endswith(",0.0 1.0,2")


def test_render_csv_reports():
    text = render_csv(TaskOutput('check-bounds', 'g', 'nonrelativistic', reports=[violated_report()]))
    lines = text.splitlines()
    assert lines[0] == "check,model,geometry,variable,grid,value,tolerance,bound,verdict"
    assert len(lines) == 3
    assert lines[1].endswith(",-1.0,1.0,0.0,0.5,violated")


def test_render_csv_complex_values():
    report = BoundReport('symmetry', 'nonrelativistic', 'g', 'z', (1.0,), measured([1 + 2j]), verdict=Verdict.HOLDS)
    text = render_csv(TaskOutput('check-symmetry', 'g', 'nonrelativistic', reports=[report]))
    assert "1.0+2.0j" in text


def test_render_csv_empty():
    assert render_csv(TaskOutput('spectrum', 'g', 'nonrelativistic')) == ""


def test_plot_data_files(tmp_path):
    output = TaskOutput('check-bounds', 'g', 'nonrelativistic', reports=[violated_report(), passing_report()])
    written = write_plot_data(output, str(tmp_path / "plots"))
    assert [path.rsplit('/', 1)[-1] for path in written] == ["check_bounds_fake.dat"]
    lines = (tmp_path / "plots" / "check_bounds_fake.dat").read_text().splitlines()
    assert lines[0] == "# fake on FlatSpace(D=3) (nonrelativistic)"
    assert lines[1] == "# verdict: violated"
    assert lines[3:] == ["-1.0\t1.0", "-2.0\t2.0"]


def test_plot_columns_skip_tuple_grids():
    assert plot_columns(passing_report()) is None


def test_write_to_path(runner, tmp_path):
    path = tmp_path / "result.json"
    runner.update_config(output=OutputConfig(format='json', path=str(path), plot_data=True))
    output = TaskOutput('check-bounds', 'g', 'nonrelativistic', reports=[violated_report()])
    assert runner.write(output) is None
    assert json.loads(path.read_text())['task'] == 'check-bounds'
    assert (tmp_path / "check_bounds_fake.dat").exists()


def test_main_runner_is_restored():
    previous = get_main_runner()
    with TestRunner() as runner:
        assert get_main_runner() is runner
    assert get_main_runner() is previous
