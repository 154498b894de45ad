import math

import numpy as np

from deltaspec import *


def torus2(side: float = 2 * math.pi, mass: float = 1.0) -> ManifoldSpec:
    return ManifoldSpec.torus((side, side), kappa=1 / (2 * mass))


def flat(dimension: int, mass: float = 1.0) -> ManifoldSpec:
    return ManifoldSpec.flat(dimension, kappa=1 / (2 * mass))


def single_center(manifold: ManifoldSpec, mu: float = 1.0, mass: float = 1.0) -> CenterSet:
    return CenterSet.build([np.zeros(manifold.point_size) if manifold.kind != ManifoldKind.SPHERE2
                            else make_point(manifold, 0.0, 0.0)], mu, mass)


def point_system(manifold: ManifoldSpec, positions, mu, mass: float = 1.0, modes: int = 256) -> PointSystem:
    return PointSystem(manifold, CenterSet.build(positions, mu, mass), modes)


def relativistic_torus(mu=0.5, mass: float = 1.0, positions=None) -> RelativisticModel:
    manifold = ManifoldSpec.torus((2 * math.pi, 2 * math.pi), kappa=1.0)
    positions = positions if positions is not None else [np.zeros(2)]
    return RelativisticModel.build(manifold, positions, mass, mu)


def lee_system(coupling: float = 0.5, mu: float = 0.5, modes: int = 9, max_bosons: int = 2,
               bosons: int = 1) -> LeeSystem:
    spec = LeeModelSpec.default(coupling, mu)
    return LeeSystem(spec, fock_basis(spec.manifold, modes, max_bosons), bosons)


class TestRunner:
    """
    A runner carrying every registered task, installed as the main runner for
    the duration of a ``with`` block.
    """
    __test__ = False

    def __init__(self, custom_name: str = "TEST_RUNNER", **config):
        self.previous = get_main_runner()
        self.runner = Runner(_custom_name=custom_name, **config)
        self.runner.tasks.update(self.previous.tasks)

    def __enter__(self) -> Runner:
        set_main_runner(self.runner)
        return self.runner

    def __exit__(self, exc_type, exc_val, exc_tb):
        set_main_runner(self.previous)
