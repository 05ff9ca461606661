from fractions import Fraction

import numpy as np
import pytest

from partialid.distribution import DiscreteDistribution, DistributionError, load_distribution, read_csv, read_json
from partialid.graph import Variable

AB = (Variable("A"), Variable("B"))


def test_validation():
    with pytest.raises(DistributionError):
        DiscreteDistribution(AB, np.full((2, 2), 0.3))
    with pytest.raises(DistributionError):
        DiscreteDistribution(AB, np.array([[1.2, -0.2], [0, 0]]))
    with pytest.raises(DistributionError):
        DiscreteDistribution(AB, np.full((2, 3), 1 / 6))


def test_prob_marginal_conditional():
    d = DiscreteDistribution.from_mapping(AB, {(0, 0): 0.1, (0, 1): 0.2, (1, 0): 0.3, (1, 1): 0.4})
    assert d.prob({"A": "1"}) == pytest.approx(0.7)
    assert d.prob() == pytest.approx(1.0)
    assert d.conditional({"B": "1"}, {"A": "0"}) == pytest.approx(2 / 3)
    np.testing.assert_allclose(d.marginal(["B", "A"]), [[0.1, 0.3], [0.2, 0.4]])
    assert d.reorder(["B", "A"]).prob({"A": "0", "B": "1"}) == pytest.approx(0.2)
    with pytest.raises(ZeroDivisionError):
        DiscreteDistribution.from_mapping(AB, {(0, 0): 1}).conditional({"B": "0"}, {"A": "1"})


def test_exact_mode():
    d = DiscreteDistribution.uniform(AB, exact=True)
    assert d.exact
    assert d.prob({"A": "0"}) == Fraction(1, 2)
    with pytest.raises(DistributionError):
        DiscreteDistribution.from_mapping(AB, {(0, 0): Fraction(1, 3)}, exact=True)


def test_csv_round_trip(tmp_path):
    d = DiscreteDistribution.from_mapping(AB, {(0, 0): 0.1, (0, 1): 0.2, (1, 0): 0.3, (1, 1): 0.4})
    p = tmp_path / "d.csv"
    d.to_csv(p)
    back = load_distribution(p)
    np.testing.assert_allclose(back.table, d.table)


def test_csv_counts_normalized():
    d = read_csv("A,B,count\n0,0,1\n0,1,1\n1,0,2\n1,1,4\n")
    assert d.prob({"A": "1", "B": "1"}) == pytest.approx(0.5)


def test_csv_domains_from_graph(iv):
    d = read_csv("Y,A,Z,prob\n1,1,1,1\n", iv)
    assert d.names == ("Z", "A", "Y")
    assert d.table.shape == (2, 2, 2)


def test_csv_errors():
    with pytest.raises(DistributionError):
        read_csv("A,B\n0,1\n")
    with pytest.raises(DistributionError):
        read_csv("A,prob\n0,0.5\n1,0.6\n")


def test_json_round_trip(tmp_path):
    d = DiscreteDistribution.uniform(AB, exact=True)
    import json

    p = tmp_path / "d.json"
    p.write_text(json.dumps(d.to_json()))
    back = read_json(p, exact=True)
    assert back.exact and back.prob({"A": "0", "B": "0"}) == Fraction(1, 4)
    assert read_json(json.dumps(d.to_json())).prob({"A": "1"}) == pytest.approx(0.5)
