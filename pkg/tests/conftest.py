import pytest

import _corpus


@pytest.fixture(scope="session")
def fig1():
    return _corpus.fig1()


@pytest.fixture(scope="session")
def fig1_parsed():
    return _corpus.load("fig1.pip")


@pytest.fixture(scope="session")
def fig2_parsed():
    return _corpus.load("fig2.pip")


@pytest.fixture(scope="session")
def fig1_refined(fig1):
    """(pruned refinement result, invariants of the refined program)."""
    from pcfr.refine import refine_and_prune

    return refine_and_prune(fig1, ["t1a", "t1b", "t2", "t3"], _corpus.paper_layers(fig1))


@pytest.fixture(scope="session")
def fig2(fig1_refined):
    return fig1_refined[0].program
