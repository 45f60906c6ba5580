import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqrgm.bench import (
    CSV_FIELDS,
    ChainSpec,
    ExperimentRow,
    chain_graph,
    chance_precision,
    edge_precision,
    relative_likelihood,
    rows_to_csv,
    run_chain_experiment,
)
from sqrgm.errors import NotNegativeDefiniteError
from sqrgm.model import Normalizability, check_normalizable
from sqrgm.sampling import GibbsConfig


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_chain_graph_structure(k):
    m = chain_graph(ChainSpec(p=30, k=k))
    off = m.phi_off
    assert np.all(m.phi_diag == -1.0)
    assert np.count_nonzero(np.triu(off)) == 30 * k
    assert np.allclose(off[off != 0], 0.9 / (2 * k))
    assert off[0, k] > 0 and off[0, 30 - k] > 0 and off[0, k + 1] == 0
    assert check_normalizable(m).status is Normalizability.CERTIFIED


def test_chain_graph_rejects_bad_specs():
    with pytest.raises(NotNegativeDefiniteError):
        chain_graph(ChainSpec(p=10, k=1, weight=0.6))
    with pytest.raises(ValueError):
        chain_graph(ChainSpec(p=4, k=2))


def test_edge_precision_basics():
    truth = chain_graph(ChainSpec(p=8, k=1)).phi
    assert edge_precision(truth, truth) == 1.0
    # all tied: top 8 are (0,1)..(0,7), (1,2); true among them (0,1), (0,7), (1,2)
    assert edge_precision(truth, np.zeros_like(truth)) == pytest.approx(3 / 8)
    assert chance_precision(30, 30) == pytest.approx(30 / 435)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_edge_precision_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    truth = chain_graph(ChainSpec(p=9, k=2)).phi
    est = rng.normal(size=(9, 9))
    est = est + est.T
    perm = rng.permutation(9)
    ix = np.ix_(perm, perm)
    assert edge_precision(truth[ix], est[ix]) == edge_precision(truth, est)


def test_relative_likelihood():
    assert relative_likelihood(-10.0, -10.0, 5) == 1.0
    assert relative_likelihood(3.0, 0.0, 3) == pytest.approx(math.e)
    with pytest.raises(ValueError):
        relative_likelihood(0.0, 0.0, 0)


def test_small_experiment_table_and_determinism():
    kw = dict(p=8, lam=1e-3, ks=(1, 2), ns=(60, 120), seeds=(3,), gibbs=GibbsConfig(sweeps=10))
    rows = run_chain_experiment(**kw)
    assert [(r.k, r.n) for r in rows] == [(1, 60), (1, 120), (2, 60), (2, 120)]
    again = run_chain_experiment(**kw)
    assert [r.precision for r in rows] == [r.precision for r in again]
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == ",".join(CSV_FIELDS)
    assert len(text.splitlines()) == 5


def test_rows_to_csv_precision_round_trips():
    r = ExperimentRow(1, 100, 0, 2 / 3, 1.23456)
    line = rows_to_csv([r]).splitlines()[1].split(",")
    assert float(line[3]) == 2 / 3 and line[4] == "1.235"
