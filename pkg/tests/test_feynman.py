import math

import numpy as np
import pytest
from scipy.integrate import quad

from ruellebf.feynman import (
    ConvergenceError,
    EffectiveQuadraticInteraction,
    FeynmanGraph,
    Interaction,
    PropagatorKernel,
    automorphism_order,
    chain_graph,
    contract_graph,
    cycle_graph,
    enumerate_connected_quadratic,
    gamma_sum,
    graph_weight,
    is_connected,
    is_isomorphic,
    loop_count,
    rge_evolve,
)


# ---------------------------------------------------------------- enumeration

def test_enumerate_order_one_is_bare_vertex():
    graphs = enumerate_connected_quadratic(1)
    assert len(graphs) == 1
    assert graphs[0].n_vertices == 1 and len(graphs[0].tails) == 2


@pytest.mark.parametrize("order", [2, 3])
def test_enumerate_returns_chain_and_cycle(order):
    graphs = enumerate_connected_quadratic(order)
    assert len(graphs) == 2
    chain, cycle = graphs
    assert len(chain.tails) == 2 and len(cycle.tails) == 0
    assert chain.n_vertices == cycle.n_vertices == order


def test_enumerate_rejects_order_zero():
    with pytest.raises(ValueError):
        enumerate_connected_quadratic(0)


def _involutions(elements):
    if not elements:
        yield []
        return
    head, rest = elements[0], elements[1:]
    for sub in _involutions(rest):
        yield [(head, head)] + sub
    for i, partner in enumerate(rest):
        for sub in _involutions(rest[:i] + rest[i + 1:]):
            yield [(head, partner)] + sub


@pytest.mark.parametrize("order", [2, 3, 4, 5, 6])
def test_enumeration_completeness_brute_force(order):
    """Every connected bivalent involution graph is a chain or a cycle."""
    rng = np.random.default_rng(order)
    incidence = tuple(h // 2 for h in range(2 * order))
    chain_ref = chain_graph(order, tail_labels=None)
    cycle_ref = cycle_graph(order)
    found = {"chain": 0, "cycle": 0}
    connected_graphs = []
    for pairing in _involutions(list(range(2 * order))):
        involution = list(range(2 * order))
        for a, b in pairing:
            involution[a], involution[b] = b, a
        graph = FeynmanGraph(order, incidence, tuple(involution))
        if not is_connected(graph):
            continue
        n_tails = len(graph.tails)
        assert n_tails in (0, 2), "connected bivalent graphs have 0 or 2 tails"
        found["chain" if n_tails else "cycle"] += 1
        connected_graphs.append(graph)
    assert found["chain"] > 0 and found["cycle"] > 0
    # iso spot-check against the canonical representatives
    sample = rng.choice(len(connected_graphs), size=min(20, len(connected_graphs)), replace=False)
    for idx in sample:
        graph = connected_graphs[int(idx)]
        ref = chain_ref if graph.tails else cycle_ref
        assert is_isomorphic(graph, ref)


# ------------------------------------------------------------- automorphisms

@pytest.mark.parametrize("order", [2, 3, 4, 5, 6])
def test_chain_automorphisms(order):
    assert automorphism_order(chain_graph(order, tail_labels=None)) == 2
    assert automorphism_order(chain_graph(order)) == 1  # A/B ends distinguishable


@pytest.mark.parametrize("order", [1, 2, 3, 4, 5, 6])
def test_cycle_automorphisms_dihedral(order):
    assert automorphism_order(cycle_graph(order)) == 2 * order


def test_single_vertex_two_tails():
    assert automorphism_order(chain_graph(1, tail_labels=None)) == 2


@pytest.mark.parametrize("order", [1, 2, 3, 4, 5, 6])
def test_hbar_grading_chain_and_cycle(order):
    assert loop_count(chain_graph(order)) == 0
    assert loop_count(cycle_graph(order)) == 1
    pk = PropagatorKernel(np.array([[0.5]]))
    inter = Interaction({2: np.array([[1.0]])})
    expansion = gamma_sum(pk, inter, np.array([1.0]), order)
    series = expansion.hbar_series()
    # vertices carry one power each, the loop one more
    assert (order, 0) in expansion.terms
    assert (order, 1) in expansion.terms
    assert series.order >= order + 1


# ------------------------------------------------------------------- weights

def test_cycle_one_weight_1dim():
    c, p = 1.3, 0.7
    graph = cycle_graph(1)
    inter = Interaction({2: np.array([[c]])})
    pk = PropagatorKernel(np.array([[p]]))
    assert graph_weight(graph, pk, inter, None) == pytest.approx(1j * c * 1j * p)


def test_chain_two_weight_1dim():
    c, p, v = 0.9, 0.4, 1.7
    graph = chain_graph(2, tail_labels=None)
    inter = Interaction({2: np.array([[c]])})
    pk = PropagatorKernel(np.array([[p]]))
    expected = (1j * c) ** 2 * (1j * p) * v * v
    assert graph_weight(graph, pk, inter, np.array([v])) == pytest.approx(expected)


def test_graph_weight_missing_degree_errors():
    graph = cycle_graph(1)
    pk = PropagatorKernel(np.array([[1.0]]))
    with pytest.raises(KeyError):
        graph_weight(graph, pk, Interaction({3: np.zeros((1, 1, 1))}), None)


def test_interaction_symmetry_enforced():
    bad = np.array([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(ValueError, match="not symmetric"):
        Interaction({2: bad})


def test_labeled_tails_vector_slots():
    # chain(1) with slot-specific externals picks out the single pairing
    w = np.array([[2.0]])
    graph = chain_graph(1)
    tensor = np.zeros((2, 2), dtype=complex)
    tensor[0, 1] = tensor[1, 0] = w[0, 0]
    inter = Interaction({2: tensor})
    pk = PropagatorKernel(np.zeros((2, 2)))
    ext = {"A": np.array([1.0, 0.0]), "B": np.array([0.0, 3.0])}
    value = graph_weight(graph, pk, inter, ext)
    assert value == pytest.approx(1j * 2.0 * 3.0)


# ----------------------------------------------------------------- gamma sum

def test_gamma_sum_zero_interaction():
    pk = PropagatorKernel(np.array([[1.0]]))
    inter = Interaction({2: np.zeros((1, 1))})
    assert gamma_sum(pk, inter, None, 4).hbar_series().is_zero()


def test_gamma_sum_matches_exact_gaussian_log():
    """1-dim quadratic: coefficients of -log(1 + g/q)/2, exactly."""
    q = 2.0
    pk = PropagatorKernel(np.array([[1.0 / q]]))
    inter = Interaction({2: np.array([[1.0]])})
    got = gamma_sum(pk, inter, None, 6, damped=True).vertex_coefficients()
    for n in range(1, 7):
        exact = (-1) ** n / (q ** n * 2 * n)
        assert got.coefficient(n) == pytest.approx(exact, rel=1e-12)


def _gaussian_moment(power, q):
    """E[x^power] under exp(-q x^2 / 2), zero for odd powers."""
    if power % 2:
        return 0.0
    k, out = power // 2, 1.0
    for j in range(1, 2 * k, 2):
        out *= j
    return out / q ** k


def _log_series(a, order):
    """Coefficients of log(1 + sum_{n>=1} a[n] g^n) through g^order."""
    out = [0.0] * (order + 1)
    term = [1.0] + [0.0] * order
    s = [0.0] + list(a[1:order + 1])
    for k in range(1, order + 1):
        new = [0.0] * (order + 1)
        for i, x in enumerate(term):
            if x == 0.0:
                continue
            for j, y in enumerate(s):
                if i + j <= order:
                    new[i + j] += x * y
        term = new
        for p in range(order + 1):
            out[p] += (-1) ** (k - 1) / k * term[p]
    return out


def test_gamma_sum_quartic_vertex_moment_oracle():
    """1-dim quartic I = x^4/4!: exact Gaussian moments vs Wick expansion."""
    q = 1.7
    pk = PropagatorKernel(np.array([[1.0 / q]]))
    inter = Interaction({4: np.ones((1, 1, 1, 1))})
    got = gamma_sum(pk, inter, None, 3, damped=True).vertex_coefficients()
    a = [1.0]
    for n in range(1, 4):
        moment = _gaussian_moment(4 * n, q)
        a.append((-1) ** n * moment / (math.factorial(4) ** n * math.factorial(n)))
    oracle = _log_series(a, 3)
    for n in range(1, 4):
        assert got.coefficient(n) == pytest.approx(oracle[n], rel=1e-10)


def test_gamma_sum_cubic_vertex_two_dim_moment_oracle():
    """2-dim cubic I = x^2 y / 2 (formal series; the true integral diverges)."""
    q1, q2 = 1.9, 1.3
    tensor = np.zeros((2, 2, 2))
    # T(x,x,x)/3! = x^2 y / 2 requires the symmetrization of 3 * x x y
    for perm in ((0, 0, 1), (0, 1, 0), (1, 0, 0)):
        tensor[perm] = 1.0
    pk = PropagatorKernel(np.diag([1.0 / q1, 1.0 / q2]))
    inter = Interaction({3: tensor})
    got = gamma_sum(pk, inter, None, 4, damped=True).vertex_coefficients()
    a = [1.0]
    for n in range(1, 5):
        # E[(x^2 y / 2)^n] factorizes over the diagonal Gaussian
        moment = _gaussian_moment(2 * n, q1) * _gaussian_moment(n, q2) / 2 ** n
        a.append((-1) ** n * moment / math.factorial(n))
    oracle = _log_series(a, 4)
    for n in range(1, 5):
        assert got.coefficient(n) == pytest.approx(oracle[n], rel=1e-9, abs=1e-12)


def _taylor_from_quadrature(log_ratio, radius, order, samples=32):
    """Cauchy-circle coefficients of an analytic log ratio from quadrature."""
    thetas = 2 * np.pi * np.arange(samples) / samples
    values = np.array([log_ratio(radius * np.exp(1j * th)) for th in thetas])
    coeffs = []
    for n in range(order + 1):
        c = np.mean(values * np.exp(-1j * n * thetas)) / radius ** n
        coeffs.append(c)
    return coeffs


def _complex_quad(f, lo, hi):
    re, _ = quad(lambda x: f(x).real, lo, hi, limit=200)
    im, _ = quad(lambda x: f(x).imag, lo, hi, limit=200)
    return re + 1j * im


def test_gamma_sum_quadrature_oracle_one_dim():
    """Stationary-phase cross-check, dimension 1: quadrature-derived Taylor
    coefficients of the damped Gaussian log ratio, 1e-6 per coefficient."""
    q, c = 2.0, 0.8
    pk = PropagatorKernel(np.array([[1.0 / q]]))
    inter = Interaction({2: np.array([[c]])})
    got = gamma_sum(pk, inter, None, 4, damped=True).vertex_coefficients()
    z0 = _complex_quad(lambda x: np.exp(-0.5 * q * x * x) + 0j, -np.inf, np.inf)

    def log_ratio(g):
        z = _complex_quad(lambda x: np.exp(-0.5 * (q + g * c) * x * x), -np.inf, np.inf)
        return complex(np.log(z / z0))

    oracle = _taylor_from_quadrature(log_ratio, radius=0.4 * q / c, order=4)
    for n in range(1, 5):
        assert abs(got.coefficient(n) - oracle[n]) < 1e-6


def test_gamma_sum_quadrature_oracle_two_dim():
    """Stationary-phase cross-check, dimension 2, non-diagonal vertex."""
    from scipy.integrate import nquad

    q = np.array([1.6, 2.2])
    t = np.array([[0.9, 0.5], [0.5, 1.4]])
    pk = PropagatorKernel(np.diag(1.0 / q))
    inter = Interaction({2: t})
    got = gamma_sum(pk, inter, None, 3, damped=True).vertex_coefficients()

    def z_value(g):
        def integrand_re(x, y):
            v = np.array([x, y])
            return np.exp(-0.5 * (v @ np.diag(q) @ v) - 0.5 * g * (v @ t @ v)).real

        def integrand_im(x, y):
            v = np.array([x, y])
            return np.exp(-0.5 * (v @ np.diag(q) @ v) - 0.5 * g * (v @ t @ v)).imag

        bounds = [(-np.inf, np.inf)] * 2
        re, _ = nquad(integrand_re, bounds)
        im, _ = nquad(integrand_im, bounds)
        return re + 1j * im

    z0 = z_value(0.0)
    oracle = _taylor_from_quadrature(
        lambda g: complex(np.log(z_value(g) / z0)), radius=0.35, order=3, samples=16
    )
    for n in range(1, 4):
        assert abs(got.coefficient(n) - oracle[n]) < 1e-6


# ----------------------------------------------------------------------- RGE

def _heat_window(symmetric_seed, l1, l2, rng=None):
    """Symmetric positive propagator family additive in the window."""
    q, _ = np.linalg.qr(symmetric_seed)
    mu = np.linspace(0.8, 2.0, symmetric_seed.shape[0])
    diag = (np.exp(-l1 * mu) - np.exp(-l2 * mu)) / mu
    return PropagatorKernel(q @ np.diag(diag) @ q.T, (l1, l2))


def test_rge_empty_window_is_identity():
    rng = np.random.default_rng(0)
    j = rng.normal(size=(4, 4))
    j = j + j.T
    eff = EffectiveQuadraticInteraction.from_kernel(j, 4)
    out = rge_evolve(eff, PropagatorKernel(np.zeros((4, 4)), (1.0, 1.0)))
    for a, b in zip(out.kernels, eff.kernels):
        assert np.allclose(a, b, atol=1e-14)


def test_rge_zero_interaction_stays_zero():
    eff = EffectiveQuadraticInteraction.from_kernel(np.zeros((3, 3)), 3)
    out = rge_evolve(eff, PropagatorKernel(np.eye(3)))
    assert all(np.allclose(k, 0) for k in out.kernels)


def test_rge_composition_law():
    rng = np.random.default_rng(5)
    for _ in range(10):
        seed = rng.normal(size=(4, 4))
        j = rng.normal(size=(4, 4)) * 0.1
        j = j + j.T
        eff = EffectiveQuadraticInteraction.from_kernel(j, 6)
        p01 = _heat_window(seed, 0.0, 0.7)
        p12 = _heat_window(seed, 0.7, 2.0)
        p02 = _heat_window(seed, 0.0, 2.0)
        assert np.allclose(p01.matrix + p12.matrix, p02.matrix, atol=1e-12)
        two_step = rge_evolve(rge_evolve(eff, p01), p12)
        one_step = rge_evolve(eff, p02)
        for a, b in zip(two_step.kernels, one_step.kernels):
            assert np.max(np.abs(a - b)) < 1e-10


def test_rge_nonconvergent_error_carries_norm():
    j = np.eye(2) * 5.0
    eff = EffectiveQuadraticInteraction.from_kernel(j, 3)
    with pytest.raises(ConvergenceError) as err:
        rge_evolve(eff, PropagatorKernel(np.eye(2)))
    assert err.value.norm >= 1.0


def test_rge_resummation_matches_closed_form():
    rng = np.random.default_rng(6)
    j = rng.normal(size=(3, 3)) * 0.2
    j = j + j.T
    p = rng.normal(size=(3, 3)) * 0.2
    p = p + p.T
    eff = EffectiveQuadraticInteraction.from_kernel(j, 40)
    out = rge_evolve(eff, PropagatorKernel(p))
    total = sum(out.kernels[i] for i in range(out.order))
    closed = j @ np.linalg.inv(np.eye(3) + p @ j)
    assert np.max(np.abs(total - closed)) < 1e-12
