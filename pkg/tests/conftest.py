import math
import os
import sys

_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, _ROOT)

import numpy as np
import pytest

from abstraction.builder import build_common_abstraction, build_dwell_abstraction
from abstraction.lattice import Region
from dynamics.switched_system import SwitchedSystem, boost_converter
from lyapunov.certificates import QuadraticCertificateSet

BOOST_M = [[1.0224, 0.0084], [0.0084, 1.0031]]
BOOST_KAPPA = 0.014
BOOST_KEEP = Region(np.array([1.3, 5.7]), np.array([1.7, 5.8]))
BOOST_COARSE_ETA = 1.0 / (40.0 * math.sqrt(2.0))
BOOST_FINE_ETA = 1.0 / (4000.0 * math.sqrt(2.0))

SPIRAL_A = [[[-0.25, 1.0], [-2.0, -0.25]], [[-0.25, 2.0], [-1.0, -0.25]]]
SPIRAL_B = [[-0.25, -2.0], [0.25, 1.0]]
SPIRAL_M = [[[2.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 2.0]]]
SPIRAL_KAPPA = 0.25

# two modes contracting radially to the origin, V = |x - y| works for both with kappa = 0.5
CONTRACTING_A = [[[-0.5, 0.0], [0.0, -0.5]], [[-1.0, 0.0], [0.0, -1.0]]]
CONTRACTING_B = [[0.0, 0.0], [0.0, 0.0]]
UNIT_BOX = Region(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))


@pytest.fixture
def boost_system() -> SwitchedSystem:
    return boost_converter()


@pytest.fixture
def boost_cert() -> QuadraticCertificateSet:
    return QuadraticCertificateSet(M=[BOOST_M], kappa=BOOST_KAPPA)


@pytest.fixture
def spiral_system() -> SwitchedSystem:
    return SwitchedSystem.from_matrices(SPIRAL_A, SPIRAL_B)


@pytest.fixture
def spiral_cert() -> QuadraticCertificateSet:
    return QuadraticCertificateSet(M=SPIRAL_M, kappa=SPIRAL_KAPPA)


@pytest.fixture
def contracting_system() -> SwitchedSystem:
    return SwitchedSystem.from_matrices(CONTRACTING_A, CONTRACTING_B)


@pytest.fixture
def contracting_cert() -> QuadraticCertificateSet:
    return QuadraticCertificateSet(M=[np.eye(2)], kappa=0.5)


@pytest.fixture(scope="session")
def coarse_boost_model():
    return build_common_abstraction(boost_converter(), 0.5, BOOST_COARSE_ETA, BOOST_KEEP)


@pytest.fixture(scope="session")
def contracting_common_model():
    system = SwitchedSystem.from_matrices(CONTRACTING_A, CONTRACTING_B)
    return build_common_abstraction(system, 0.5, 0.05, UNIT_BOX)


@pytest.fixture(scope="session")
def contracting_dwell_model():
    system = SwitchedSystem.from_matrices(CONTRACTING_A, CONTRACTING_B)
    return build_dwell_abstraction(system, 0.5, 2, 0.05, UNIT_BOX)


SPIRAL_COARSE_ETA = 1.0 / (10.0 * math.sqrt(2.0))
SPIRAL_REGION = Region(np.array([-6.0, -4.0]), np.array([6.0, 4.0]))
SPIRAL_AVOID = Region(np.array([-1.5, -1.0]), np.array([1.5, 1.0]))


@pytest.fixture(scope="session")
def spiral_dwell_model():
    system = SwitchedSystem.from_matrices(SPIRAL_A, SPIRAL_B)
    return build_dwell_abstraction(system, 0.5, 4, SPIRAL_COARSE_ETA, SPIRAL_REGION)
