import numpy as np
import pytest

from lipgpr.robot import (PRISMATIC, REVOLUTE, DhLink, InertialParams,
                          RobotModel, load_robot)


def random_robot(rng, kinds, gravity=(0.0, 0.0, -9.81)):
    """Random serial chain with valid inertial parameters."""
    links = []
    for kind in kinds:
        diag = rng.uniform(0.02, 0.2, size=3)
        coupling = rng.uniform(-0.2, 0.2, size=3)
        inertia = np.diag(diag)
        inertia[0, 1] = inertia[1, 0] = coupling[0] * min(diag[0], diag[1])
        inertia[0, 2] = inertia[2, 0] = coupling[1] * min(diag[0], diag[2])
        inertia[1, 2] = inertia[2, 1] = coupling[2] * min(diag[1], diag[2])
        links.append((
            DhLink(a=rng.uniform(-0.6, 0.6), alpha=rng.uniform(-np.pi, np.pi),
                   d=rng.uniform(-0.4, 0.4), theta=rng.uniform(-np.pi, np.pi),
                   kind=kind),
            InertialParams(mass=rng.uniform(0.3, 3.0),
                           com=rng.uniform(-0.3, 0.3, size=3),
                           inertia=inertia,
                           fv=rng.uniform(0.0, 0.3),
                           fc=rng.uniform(0.0, 0.2)),
        ))
    return RobotModel(links=tuple(links), gravity=np.asarray(gravity, dtype=float))


def random_states(rng, n, count, q=2.5, qd=2.2, qdd=10.0):
    from lipgpr.robot import StateBatch
    return StateBatch(rng.uniform(-q, q, size=(count, n)),
                      rng.uniform(-qd, qd, size=(count, n)),
                      rng.uniform(-qdd, qdd, size=(count, n)))


@pytest.fixture
def pendulum():
    return load_robot("pendulum_point")


@pytest.fixture
def planar_2r():
    return load_robot("planar_2r")


@pytest.fixture
def rpr_3dof():
    return load_robot("rpr_3dof")


KIND_SETS = {
    1: (REVOLUTE,),
    2: (REVOLUTE, REVOLUTE),
    3: (REVOLUTE, PRISMATIC, REVOLUTE),
}
