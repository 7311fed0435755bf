import numpy as np
import pytest

from hsgfd.matern import MaternParams, PreBasis
from hsgfd.quadrature import box_quadrature
from hsgfd.risks import HeatRisk, HjbRisk


@pytest.fixture(scope="session")
def heat_small():
    risk = HeatRisk(n_interior=1024, n_boundary=256)
    pb = PreBasis(MaternParams(2.5, 2.0), risk.domain, 2, quad=box_quadrature(risk.domain, 2048))
    pb.ensure(12)
    return risk, pb


@pytest.fixture(scope="session")
def hjb_small():
    risk = HjbRisk(n_interior=1024, n_boundary=256)
    pb = PreBasis(MaternParams(1.5, 2.0), risk.domain, 1, quad=box_quadrature(risk.domain, 2048))
    pb.ensure(12)
    return risk, pb


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
