import pytest

from monosync import Box, JOrder, make_family


@pytest.fixture
def order1():
    return JOrder(1, frozenset([1]))


@pytest.fixture
def order2_first():
    return JOrder(2, frozenset([1]))


@pytest.fixture
def cantor1d():
    return make_family("cantor1d")


@pytest.fixture
def cantor2d():
    return make_family("cantor2d")


@pytest.fixture
def exp1d():
    return make_family("exp1d")


@pytest.fixture
def rot2d():
    return make_family("rot2d")


@pytest.fixture
def const_family():
    # every map sends everything to 0.7
    return make_family(
        "affine-general",
        params={"mats": [[[0.0]], [[0.0]]], "offs": [[0.7], [0.7]]},
        domain=Box([0.0], [1.0]),
    )


@pytest.fixture
def identity_family():
    return make_family(
        "affine-general",
        params={"mats": [[[1.0]], [[1.0]]], "offs": [[0.0], [0.0]]},
        domain=Box([0.0], [1.0]),
    )
