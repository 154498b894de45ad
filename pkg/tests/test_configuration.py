import json
import math
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np
import pytest

from tests.helpers import *


CONFIG_TEXT = """{
  "schema_version": 1,
  "geometry": {"kind": "FlatSpace", "dimension": 3},
  "model": {
    "kind": "nonrelativistic",
    "centers": [[0, 0, 0], [1.5, 0, 0]],
    "mu": [1.0]
  },
  "task": {"window": [-10, -0.01]}
}
"""


def test_defaults_are_valid():
    config = load_config(None)
    assert config.schema_version == SCHEMA_VERSION
    system = config.build_system()
    assert isinstance(system, PointSystem)
    assert system.manifold.kind == ManifoldKind.FLAT_TORUS
    assert system.manifold.sizes == (2 * math.pi, 2 * math.pi)
    assert system.manifold.kappa == 0.5
    assert config.quadrature() is None


def test_empty_text_gives_defaults():
    assert parse_config("") == load_config(None)
    assert parse_config("{}") == load_config(None)


def test_parse_config():
    config = parse_config(CONFIG_TEXT)
    system = config.build_system()
    assert system.centers.count == 2
    assert system.centers.mu == (1.0, 1.0)
    assert system.manifold.kind == ManifoldKind.FLAT_SPACE
    assert config.task.window == [-10.0, -0.01]


def test_load_config_from_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(CONFIG_TEXT, encoding="utf-8")
    assert load_config(str(path)) == parse_config(CONFIG_TEXT)
    with pytest.raises(ConfigurationError):
        load_config(str(tmp_path / "missing.json"))


def test_invalid_json_names_the_position():
    with pytest.raises(ConfigurationError) as failure:
        parse_config('{\n  "model": {\n    "mass": 1.0,\n  }\n}', "run.json")
    assert "run.json line 4" in str(failure.value)


def test_unknown_key_names_the_line():
    text = CONFIG_TEXT.replace('"dimension": 3', '"dimension": 3, "radius": 2')
    with pytest.raises(ConfigurationError) as failure:
        parse_config(text, "run.json")
    assert "unknown key(s) radius" in str(failure.value)
    assert "run.json line 3" in str(failure.value)


def test_unknown_top_level_key():
    with pytest.raises(ConfigurationError) as failure:
        parse_config('{"verbose": true}')
    assert failure.value.location == "config"


def test_wrong_type_names_the_entry():
    with pytest.raises(ConfigurationError) as failure:
        parse_config('{\n  "model": {\n    "mass": "heavy"\n  }\n}', "run.json")
    assert "expected a number" in str(failure.value)
    assert "line 3" in str(failure.value)


@pytest.mark.parametrize("change, location", [
    ({'schema_version': 2}, "schema_version"),
    ({'threads': 0}, "threads"),
    ({'log_level': 'LOUD'}, "log_level"),
])
def test_top_level_validation(change, location):
    with pytest.raises(ConfigurationError) as failure:
        validate_config(replace(RunConfig(), **change))
    assert failure.value.location == location


@pytest.mark.parametrize("model, location", [
    (ModelConfig(kind='quantum'), "model.kind"),
    (ModelConfig(mass=-1.0), "model.mass"),
    (ModelConfig(centers=[]), "model.centers"),
    (ModelConfig(mu=[1.0, -1.0], centers=[[0, 0], [1, 1]]), "model.mu"),
    (ModelConfig(mu=[1.0, 2.0, 3.0], centers=[[0, 0], [1, 1]]), "model.mu"),
    (ModelConfig(kind='lee', sector=3), "model"),
    (ModelConfig(centers=[[0, 0, 0]]), "model.centers[0]"),
    (ModelConfig(kind='relativistic', mu=[1.5]), "model"),
])
def test_model_validation(model, location):
    with pytest.raises(ConfigurationError) as failure:
        validate_config(RunConfig(model=model)).build_system()
    assert failure.value.location == location


def test_geometry_validation():
    with pytest.raises(ConfigurationError) as failure:
        validate_config(RunConfig(geometry=GeometryConfig(kind='Klein')))
    assert failure.value.location == "geometry.kind"
    with pytest.raises(ConfigurationError) as failure:
        validate_config(RunConfig(geometry=GeometryConfig(sizes=[1.0, -1.0])))
    assert failure.value.location == "geometry"


@pytest.mark.parametrize("task, location", [
    (TaskConfig(route='series'), "task.route"),
    (TaskConfig(pair=[-1.0]), "task.pair"),
    (TaskConfig(complex_energy=[1.0, 2.0, 3.0]), "task.complex_energy"),
    (TaskConfig(k_max=0), "task.k_max"),
    (TaskConfig(scan_points=1), "task.scan_points"),
    (TaskConfig(test_functions=['gaussian', 'square']), "task.test_functions"),
    (TaskConfig(window=[-1.0, -2.0]), "task.window"),
    (TaskConfig(window=[-1.0, 0.5]), "task.window"),
])
def test_task_validation(task, location):
    with pytest.raises(ConfigurationError) as failure:
        validate_config(RunConfig(task=task))
    assert failure.value.location == location


def test_window_limit_follows_the_model():
    relativistic = RunConfig(model=ModelConfig(kind='relativistic', mu=[0.5]), task=TaskConfig(window=[-2.0, 0.9]))
    assert validate_config(relativistic).build_system().mass == 1.0
    with pytest.raises(ConfigurationError):
        validate_config(replace(relativistic, task=TaskConfig(window=[-2.0, 1.1])))
    lee = RunConfig(model=ModelConfig(kind='lee', mu=[0.5], modes=4), task=TaskConfig(window=[-2.0, 1.4]))
    assert admissible_upper(lee, lee.build_system()) == 1.5
    validate_config(lee)


def test_relativistic_geometry_uses_unit_kappa():
    config = RunConfig(model=ModelConfig(kind='relativistic', mu=[0.5], mass=2.0))
    assert config.manifold().kappa == 1.0
    assert RunConfig(model=ModelConfig(mass=2.0)).manifold().kappa == 0.25


def test_lee_system_from_config():
    config = RunConfig(model=ModelConfig(kind='lee', mu=[0.5], modes=9, max_bosons=2, sector=2, coupling=0.3))
    system = validate_config(config).build_system()
    assert isinstance(system, LeeSystem)
    assert system.bosons == 2
    assert system.basis.mode_count == 9
    assert system.spec.coupling == 0.3


def test_sphere_points_use_angles():
    config = RunConfig(geometry=GeometryConfig(kind='Sphere2', sizes=[2.0]), model=ModelConfig(centers=[[0.0, 0.0]]))
    system = validate_config(config).build_system()
    np.testing.assert_allclose(system.centers.positions[0], [0.0, 0.0, 1.0], atol=1e-15)


def test_custom_tolerance():
    config = RunConfig(task=TaskConfig(relative_tolerance=1e-8))
    assert config.quadrature().relative_tolerance == 1e-8
    with pytest.raises(ConfigurationError):
        RunConfig(task=TaskConfig(relative_tolerance=0.5)).quadrature()


# Serialization ------------------------------------------------------------------------------------

@dataclass
class Inner:
    value: float = 1.0
    tags: List[str] = None


@dataclass
class Outer:
    inner: Inner
    label: Optional[str] = None


def test_dehydrate_values():
    data = dehydrate_json({'complex': 1 + 2j, 'real_complex': complex(3.0, 0.0), 'nan': math.nan,
                           'array': np.array([1.0, 2.0]), 'scalar': np.float64(0.5), 'verdict': Verdict.HOLDS,
                           'report': Inner(2.0, ['a'])})
    assert data == {'complex': {'re': 1.0, 'im': 2.0}, 'real_complex': 3.0, 'nan': 'nan', 'array': [1.0, 2.0],
                    'scalar': 0.5, 'verdict': 'holds', 'report': {'value': 2.0, 'tags': ['a']}}
    json.dumps(data)


def test_dehydrate_circular():
    looped = []
    looped.append(looped)
    with pytest.raises(ValueError):
        dehydrate_json(looped)


def test_dehydrate_unsupported():
    with pytest.raises(ValueError):
        dehydrate_json(object())


def test_rehydrate_dataclass():
    value = rehydrate_json({'inner': {'value': 3, 'tags': ['x']}, 'label': None}, Outer)
    assert value == Outer(Inner(3.0, ['x']), None)
    assert isinstance(value.inner.value, float)


def test_rehydrate_errors():
    with pytest.raises(ConfigurationError) as failure:
        rehydrate_json({'label': 'x'}, Outer)
    assert "missing required key 'inner'" in str(failure.value)
    with pytest.raises(ConfigurationError) as failure:
        rehydrate_json({'inner': {'value': True}}, Outer)
    assert failure.value.location == "config.inner.value"
    with pytest.raises(ConfigurationError) as failure:
        rehydrate_json({'inner': {'tags': 'x'}}, Outer)
    assert failure.value.location == "config.inner.tags"
