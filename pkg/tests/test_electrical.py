import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etmg.electrical import (
    ElectricalModelError,
    ElectricalNetwork,
    PowerBalanceError,
    assemble_ptdf,
    check_balance,
    ess_step,
    line_flows,
)
from etmg.graphs import DirectedGraph, build_incidence

from test_graphs import connected_graphs


def laplacian_flows(graph, a, p):
    """Reference flows: ground the last node, solve for angles, f = a (theta_src - theta_dst)."""
    F = build_incidence(graph)
    L = F @ np.diag(a) @ F.T
    theta = np.zeros(graph.node_count)
    theta[:-1] = np.linalg.solve(L[:-1, :-1], p[:-1])
    return -np.diag(a) @ F.T @ theta


def network(graph, a=None):
    a = np.ones(graph.edge_count) if a is None else a
    roles = ["pcc"] + ["load"] * (graph.node_count - 1)
    return ElectricalNetwork(graph, tuple(a), tuple(roles))


def test_two_node_line():
    ptdf = assemble_ptdf(network(DirectedGraph(2, [(0, 1)]), [3.7]))
    np.testing.assert_allclose(line_flows(ptdf, np.array([0.8, -0.8])), [0.8], atol=1e-14)


def test_triangle_split():
    ptdf = assemble_ptdf(network(DirectedGraph(3, [(0, 1), (1, 2), (0, 2)])))
    flows = line_flows(ptdf, np.array([1.0, -1.0, 0.0]))
    np.testing.assert_allclose(flows, [2 / 3, -1 / 3, 1 / 3], atol=1e-14)


def test_star_leaf_lines_carry_leaf_injection():
    graph = DirectedGraph(5, [(0, 1), (0, 2), (0, 3), (0, 4)])
    p = np.array([1.0, -0.1, -0.2, -0.3, -0.4])
    ptdf = assemble_ptdf(network(graph, [0.5, 1.0, 2.0, 4.0]))
    np.testing.assert_allclose(line_flows(ptdf, p), -p[1:], atol=1e-14)


def test_zero_injection_gives_zero_flow():
    ptdf = assemble_ptdf(network(DirectedGraph(3, [(0, 1), (1, 2), (0, 2)])))
    np.testing.assert_array_equal(line_flows(ptdf, np.zeros(3)), 0.0)


def test_balance_examples():
    assert check_balance(np.array([1.0, -0.4, -0.6])) == pytest.approx(0.0, abs=1e-15)
    assert check_balance(np.array([1.0, -0.4])) == pytest.approx(0.6)


def test_unbalanced_injection_rejected():
    ptdf = assemble_ptdf(network(DirectedGraph(2, [(0, 1)])))
    with pytest.raises(PowerBalanceError) as info:
        line_flows(ptdf, np.array([1.0, -0.4]))
    assert info.value.residual == pytest.approx(0.6)


def test_ess_examples():
    np.testing.assert_allclose(ess_step(np.array([2.0]), np.array([1.2]), 0.25), [2.3])
    np.testing.assert_array_equal(ess_step(np.array([3.0]), np.array([0.0]), 0.25), [3.0])
    x = np.zeros(1)
    for _ in range(96):
        x = ess_step(x, np.array([0.5]), 0.25)
    assert x[0] == pytest.approx(12.0)


def test_ess_shape_mismatch():
    with pytest.raises(ElectricalModelError):
        ess_step(np.zeros(2), np.zeros(1), 0.25)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2.0, 2.0), min_size=1, max_size=30), st.floats(0.0, 100.0), st.floats(0.01, 1.0))
def test_ess_telescopes(powers, x0, dt):
    x = np.array([x0])
    for u in powers:
        x = ess_step(x, np.array([u]), dt)
    assert x[0] == pytest.approx(x0 + dt * sum(powers), abs=1e-9)


@pytest.mark.parametrize(
    "roles, a, message",
    [
        (("load", "pcc"), (1.0,), "PCC"),
        (("pcc", "pcc"), (1.0,), "PCC"),
        (("pcc", "load"), (0.0,), "positive"),
        (("pcc",), (1.0,), "one role"),
    ],
)
def test_network_validation(roles, a, message):
    with pytest.raises(ElectricalModelError, match=message):
        ElectricalNetwork(DirectedGraph(2, [(0, 1)]), a, roles)


def test_role_order_enforced():
    with pytest.raises(ElectricalModelError, match="ordered"):
        ElectricalNetwork(DirectedGraph(3, [(0, 1), (1, 2)]), (1.0, 1.0), ("pcc", "load", "ess"))


@settings(max_examples=80, deadline=None)
@given(connected_graphs(), st.data())
def test_ptdf_matches_laplacian_oracle(graph, data):
    n, m = graph.node_count, graph.edge_count
    a = np.array(data.draw(st.lists(st.floats(0.1, 10.0), min_size=m, max_size=m)))
    p = np.array(data.draw(st.lists(st.floats(-5.0, 5.0), min_size=n, max_size=n)))
    p -= p.mean()
    flows = line_flows(assemble_ptdf(network(graph, a)), p, tol=1e-9)
    ref = laplacian_flows(graph, a, p)
    assert np.max(np.abs(flows - ref)) <= 1e-10 * max(1.0, np.max(np.abs(ref)))
    # Kirchhoff: net line inflow at each node cancels its injection
    np.testing.assert_allclose(build_incidence(graph) @ flows + p, 0.0, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(connected_graphs(), st.data())
def test_ptdf_linear(graph, data):
    n = graph.node_count
    ptdf = assemble_ptdf(network(graph))
    vec = st.lists(st.floats(-1.0, 1.0), min_size=n, max_size=n)
    p1, p2 = np.array(data.draw(vec)), np.array(data.draw(vec))
    c = data.draw(st.floats(-3.0, 3.0))
    np.testing.assert_allclose(ptdf(c * p1 + p2), c * ptdf(p1) + ptdf(p2), atol=1e-10)
