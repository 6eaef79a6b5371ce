import os
import sys
from importlib import resources

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from varcalc.theory import theory_from_text  # noqa: E402

_cache = {}


def load_theory(name):
    if name not in _cache:
        text = resources.files("varcalc.theories").joinpath(
            name + ".thy").read_text(encoding="utf-8")
        _cache[name] = theory_from_text(text)
    return _cache[name]


@pytest.fixture(scope="session")
def maxwell():
    return load_theory("maxwell")


@pytest.fixture(scope="session")
def maxwell_sourced():
    return load_theory("maxwell_sourced")


@pytest.fixture(scope="session")
def point_particle():
    return load_theory("point_particle")


@pytest.fixture(scope="session")
def scalar_field():
    return load_theory("scalar_field")


@pytest.fixture(scope="session")
def yang_mills():
    return load_theory("yang_mills_su2")


@pytest.fixture(scope="session")
def chern_simons():
    return load_theory("chern_simons_su2")


@pytest.fixture(scope="session")
def bf4():
    return load_theory("bf_abelian_4d")


@pytest.fixture(scope="session")
def first_order_maxwell():
    return load_theory("maxwell_first_order")


@pytest.fixture(scope="session")
def scalar_null():
    return load_theory("scalar_field_null")
