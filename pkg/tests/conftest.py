import pytest

from markov_interdict import gen_fig1_instance


@pytest.fixture
def fig1():
    return gen_fig1_instance()


@pytest.fixture
def fig1_graph(fig1):
    return fig1[0]
