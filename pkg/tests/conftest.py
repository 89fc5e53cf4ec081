import pytest


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # pay the jit compile/load cost once, up front, not inside a timed test
    from probfwd._kernels import warm

    warm()
