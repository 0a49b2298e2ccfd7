import pytest

from faultline import keys


@pytest.fixture(scope="session", autouse=True)
def warm_key_pool():
    # First pool access loads PEMs from package data; do it once up front
    # so individual test timings stay honest.
    keys.pool_rsa_key(0)
    keys.pool_ec_key(0)


@pytest.fixture()
def simple_tree():
    from faultline import cabuild
    return cabuild.simple_tree(roas=1)
