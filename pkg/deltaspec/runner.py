import csv
import io
import json
import os
import re
import traceback
from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from deltaspec.configuration import RunConfig, validate_config
from deltaspec.constants import EXIT_NO_ROOT, EXIT_OK, EXIT_VIOLATED, SCHEMA_VERSION
from deltaspec.errors import ConfigurationError
from deltaspec.reports import BoundReport, Verdict, report_rows, worst_verdict
from deltaspec.serialization import dehydrate_json
from deltaspec.setup import logger


@dataclass
class TaskOutput:
    """
    What a task hands back to the runner.

    :ivar task: The task name.
    :ivar geometry: Description of the geometry.
    :ivar model: The model kind.
    :ivar table: Result rows (dataclasses) of table-producing tasks.
    :ivar reports: Check reports.
    :ivar expects_rows: Whether an empty ``table`` means nothing was found.
    """
    task: str
    geometry: str
    model: str
    table: List[Any] = field(default_factory=list)
    reports: List[BoundReport] = field(default_factory=list)
    expects_rows: bool = False

    @property
    def exit_code(self) -> int:
        if any(report.verdict == Verdict.VIOLATED for report in self.reports):
            return EXIT_VIOLATED
        if self.expects_rows and not self.table:
            return EXIT_NO_ROOT
        return EXIT_OK


class Runner:
    """
    Holds the registered tasks and the active configuration, runs one task at
    a time and writes its output from a single place.

    :ivar tasks: Task names mapped to functions of a :class:`RunConfig`.
    :ivar configuration: The active configuration.
    """
    _custom_name = None

    def __init__(self, _custom_name: Union[str, None] = None, **kwargs: Any) -> None:
        self.tasks: Dict[str, Callable[[RunConfig], TaskOutput]] = {}
        self.configuration = RunConfig(**kwargs)
        self._custom_name = _custom_name

    def __repr__(self) -> str:
        if self._custom_name:
            return self._custom_name
        return f"Runner({self.configuration!r})"

    def clear_tasks(self) -> None:
        self.tasks.clear()

    def add_task(self, name: str, func: Callable[[RunConfig], TaskOutput]) -> None:
        """
        :raises ValueError: If ``name`` is already registered.
        """
        if name in self.tasks:
            raise ValueError(f"Task `{name}` already exists for an existing task function: `{func.__name__}`")
        self.tasks[name] = func

    def update_config(self, **kwargs: Any) -> None:
        """
        Replaces top-level configuration entries. Only keys that match
        :class:`RunConfig` fields are applied.
        """
        safe_key_names = {f.name for f in fields(RunConfig)}
        safe_kwargs: dict[str, Any] = {key: value for key, value in kwargs.items() if key in safe_key_names}
        self.configuration = replace(self.configuration, **safe_kwargs)

    def run_task(self, name: str) -> TaskOutput:
        """
        Validates the active configuration and runs one task with it.

        :raises ConfigurationError: If the task is unknown or the configuration invalid.
        :raises TaskFailure: If the computation itself failed.
        """
        if name not in self.tasks:
            raise ConfigurationError(f"unknown task {name!r}; expected one of {', '.join(sorted(self.tasks))}",
                                     "task")
        config = validate_config(self.configuration)
        task = self.tasks[name]
        logger.info(f"Running {name} on {config.geometry.kind} with the {config.model.kind} model")
        try:
            return task(config)
        except ConfigurationError:
            raise
        except Exception as error:
            raise TaskFailure("Task Error", error, task, self)

    def render(self, output: TaskOutput) -> str:
        """The output document in the configured format."""
        if self.configuration.output.format == 'csv':
            return render_csv(output)
        return render_json(output, self.configuration)

    def write(self, output: TaskOutput) -> Optional[str]:
        """
        Writes the rendered output to the configured path, plus plot-data files
        when asked for.

        :return: The rendered text when no path is configured.
        """
        text = self.render(output)
        settings = self.configuration.output
        if settings.plot_data:
            directory = settings.plot_directory or os.path.dirname(os.path.abspath(settings.path or 'output'))
            for path in write_plot_data(output, directory):
                logger.info(f"Wrote plot data to {path}")
        if settings.path is None:
            return text
        with open(settings.path, 'w', encoding='utf-8', newline='') as output_file:
            output_file.write(text)
        return None


@dataclass
class TaskFailure(BaseException):
    """
    A task raised while computing. Carries the traceback of the failure so the
    command line can print a complete report.

    :param title: A brief, descriptive title for the failure.
    :param error: The original exception.
    :param task: The task function or its name.
    :param runner: The runner that was executing it.
    :param additional_details: Optional additional context.
    """
    title: str
    error: Exception
    task: Union[Callable[..., Any], str]
    runner: Runner
    additional_details: str = ""

    def __post_init__(self) -> None:
        self.tb = traceback.format_exc()

    def __str__(self) -> str:
        task_name = self.task.__name__ if callable(self.task) else self.task
        message = (f"{self.title} in {task_name}: {self.error}\n\n"
                   f"{self.tb}")
        if self.additional_details:
            message += f"\n\nAdditional Details:\n{self.additional_details}"
        return message


# Rendering --------------------------------------------------------------------------------

def render_json(output: TaskOutput, config: RunConfig) -> str:
    document = {
        'schema_version': SCHEMA_VERSION,
        'task': output.task,
        'geometry': output.geometry,
        'model': output.model,
        'config': config,
        'table': output.table,
        'reports': output.reports,
        'verdict': worst_verdict(report.verdict for report in output.reports).value if output.reports else None,
        'exit_code': output.exit_code,
    }
    return json.dumps(dehydrate_json(document), sort_keys=True, indent=2) + "\n"


def _flat_row(row: Any) -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for name, value in dehydrate_json(row).items():
        if isinstance(value, dict) and 'value' in value:
            flat[name] = value['value']
            flat[f"{name}_tolerance"] = value['tolerance']
        elif isinstance(value, list):
            flat[name] = " ".join(str(entry) for entry in value)
        else:
            flat[name] = value
    return flat


def render_csv(output: TaskOutput) -> str:
    """
    One CSV block: the table rows when the task produced a table, otherwise
    one row per grid point of every report.
    """
    if output.table:
        rows = [_flat_row(row) for row in output.table]
    else:
        rows = [dehydrate_json(row) for report in output.reports for row in report_rows(report)]
    if not rows:
        return ""
    buffer = io.StringIO()
    names: List[str] = []
    for row in rows:
        names.extend(name for name in row if name not in names)
    writer = csv.DictWriter(buffer, fieldnames=names, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({name: _csv_value(row.get(name)) for name in names})
    return buffer.getvalue()


def _csv_value(value: Any) -> Any:
    if isinstance(value, dict):
        return f"{value.get('re')}{value.get('im'):+}j"
    return "" if value is None else value


def plot_columns(report: BoundReport) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """
    The ``(grid, |value|)`` columns of a sweep, or ``None`` if the grid is not numeric.
    """
    try:
        grid = np.asarray(report.grid, dtype=float)
    except (TypeError, ValueError):
        return None
    if grid.ndim != 1 or grid.size == 0 or grid.size != len(report.values):
        return None
    values = np.abs(report.value_array().astype(complex))
    return grid, values


def write_plot_data(output: TaskOutput, directory: str) -> List[str]:
    """
    Writes one two-column file per numeric sweep, named ``<task>_<check>.dat``.

    :return: The paths written.
    """
    written = []
    os.makedirs(directory, exist_ok=True)
    for report in output.reports:
        columns = plot_columns(report)
        if columns is None:
            continue
        name = re.sub(r"[^A-Za-z0-9_]+", "_", f"{output.task}_{report.check}")
        path = os.path.join(directory, f"{name}.dat")
        with open(path, 'w', encoding='utf-8') as plot_file:
            plot_file.write(f"# {report.check} on {report.geometry} ({report.model})\n")
            plot_file.write(f"# verdict: {report.verdict.value}\n")
            plot_file.write(f"# {report.variable}\t|value|\n")
            for x, y in zip(*columns):
                plot_file.write(f"{float(x)!r}\t{float(y)!r}\n")
        written.append(path)
    return written


MAIN_RUNNER = Runner(_custom_name="MAIN_RUNNER")


def set_main_runner(runner: Runner) -> None:
    """
    Sets the main runner to the given runner. This is useful for testing purposes.
    """
    global MAIN_RUNNER
    MAIN_RUNNER = runner


def get_main_runner() -> Runner:
    return MAIN_RUNNER
