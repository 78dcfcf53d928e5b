import numpy as np
import pytest

from molt.chemdata import Molecule


def methane():
    a = 0.629
    pos = [[0, 0, 0], [a, a, a], [-a, -a, a], [-a, a, -a], [a, -a, -a]]
    return Molecule("methane", [6, 1, 1, 1, 1], np.array(pos, dtype=float))


def water():
    return Molecule("water", [8, 1, 1], np.array([[0, 0, 0.1173], [0, 0.7572, -0.4692], [0, -0.7572, -0.4692]]))


def thiophene():
    z = [16, 6, 6, 6, 6, 1, 1, 1, 1]
    pos = [
        [0.0000, 1.2050, 0.0],
        [1.2380, 0.0100, 0.0],
        [0.7140, -1.2480, 0.0],
        [-0.7140, -1.2480, 0.0],
        [-1.2380, 0.0100, 0.0],
        [2.2650, 0.3470, 0.0],
        [1.3160, -2.1450, 0.0],
        [-1.3160, -2.1450, 0.0],
        [-2.2650, 0.3470, 0.0],
    ]
    return Molecule("thiophene", z, np.array(pos))


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def transform(mol, rng):
    """Random rotation, translation and atom permutation of ``mol``."""
    R = random_rotation(rng)
    t = rng.normal(scale=3.0, size=3)
    perm = rng.permutation(len(mol))
    return Molecule(mol.id, mol.atomic_numbers[perm], mol.positions[perm] @ R.T + t), R, perm


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_molecules():
    return [methane(), water(), thiophene()]
