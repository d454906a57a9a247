import warnings

import numpy as np
import pytest

from resilnet import ModelError, builtin
from resilnet.reduction import (HeterogeneityWarning, effective_coupling, effective_state,
                                gao_reduce, hill_dynamics, network_system, read_edge_list,
                                regular_adjacency)

STAR = np.array([[0, 1, 1, 1], [1, 0, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0]], float)


class TestEffectiveState:
    def test_uniform(self):
        A = np.random.default_rng(0).uniform(0, 1, (6, 6))
        assert effective_state(A, np.full(6, 0.7)) == pytest.approx(0.7)

    def test_regular_is_plain_mean(self):
        A = regular_adjacency(20, 3, seed=1)
        x = np.random.default_rng(1).uniform(0, 2, 20)
        assert effective_state(A, x) == pytest.approx(x.mean())

    def test_star(self):
        assert effective_state(STAR, [2.0, 1.0, 1.0, 1.0]) == pytest.approx(1.5)

    def test_batch(self):
        X = np.random.default_rng(2).uniform(size=(5, 4))
        got = effective_state(STAR, X)
        assert got.shape == (5,)
        assert np.allclose(got, [effective_state(STAR, x) for x in X])

    def test_errors(self):
        with pytest.raises(ModelError):
            effective_state(np.zeros((1, 1)), [1.0])
        with pytest.raises(ModelError):
            effective_state(-STAR, [1.0] * 4)
        with pytest.raises(ModelError):
            effective_state(np.ones((2, 3)), [1.0] * 3)


class TestReduce:
    @pytest.mark.parametrize("d", [2, 3, 4, 6])
    def test_regular_beta(self, d):
        with warnings.catch_warnings():
            warnings.simplefilter("error", HeterogeneityWarning)
            r = gao_reduce(regular_adjacency(30, d, seed=0), hill_dynamics())
        assert r.beta_eff == pytest.approx(d)
        assert r.heterogeneity == 0 and r.in_out_mismatch == 0

    def test_coupling_formula(self):
        A = np.random.default_rng(3).uniform(0, 1, (7, 7))
        s_in, s_out = A.sum(1), A.sum(0)
        want = np.mean(s_out * s_in) / np.mean(s_in)
        assert effective_coupling(A) == pytest.approx(want)
        with pytest.warns(HeterogeneityWarning):
            assert gao_reduce(A, hill_dynamics()).beta_eff == pytest.approx(want)

    def test_hill_shape(self):
        # 4-regular with a = 0.5 gives the self-activating gene with a = 2
        r = gao_reduce(regular_adjacency(50, 4, seed=0), hill_dynamics(a=0.5))
        gene = builtin("gene_regulation", {"a": 2.0, "h": 2.0, "k": 0.1})
        x = np.linspace(0.0, 3.0, 31)
        assert np.allclose(r.rhs(x), gene.rhs(x[:, None])[:, 0], atol=1e-14)
        eq = r.equilibria(0.0, 3.0)
        assert [s for _, s in eq] == ["stable", "unstable", "stable"]
        assert eq[2][0] == pytest.approx(1.4633249580710799, abs=1e-9)

    def test_model_wrapper(self):
        r = gao_reduce(regular_adjacency(12, 2, seed=0), hill_dynamics())
        m = r.as_model()
        X = np.linspace(0.1, 2, 5)[:, None]
        assert np.allclose(m.rhs(X)[:, 0], r.rhs(X[:, 0]))
        assert np.allclose(m.jacobian(X)[:, 0, 0], [r.derivative(x) for x in X[:, 0]])

    def test_heterogeneity_warnings(self):
        with pytest.warns(HeterogeneityWarning, match="heterogeneous"):
            r = gao_reduce(STAR, hill_dynamics())
        assert r.heterogeneity > 0.5
        D = np.array([[0, 1, 1], [0, 0, 0], [1, 0, 0]], float)
        with pytest.warns(HeterogeneityWarning, match="in- and out"):
            gao_reduce(D, hill_dynamics())

    def test_provenance(self):
        A = regular_adjacency(12, 2, seed=0)
        assert gao_reduce(A, hill_dynamics()).provenance == gao_reduce(A.copy(), hill_dynamics()).provenance
        B = A.copy()
        B[0, 1] = B[1, 0] = 2.0
        with pytest.warns(HeterogeneityWarning):
            assert gao_reduce(B, hill_dynamics()).provenance != gao_reduce(A, hill_dynamics()).provenance

    def test_zero_adjacency(self):
        with pytest.raises(ModelError):
            gao_reduce(np.zeros((1, 1)), hill_dynamics())


class TestConsistency:
    @pytest.mark.parametrize("n,d", [(12, 2), (12, 4), (50, 2), (50, 4)])
    def test_equilibrium(self, n, d):
        A = regular_adjacency(n, d, seed=0)
        dyn = hill_dynamics(a=0.5)
        r = gao_reduce(A, dyn)
        net = network_system(A, dyn)
        x_red = [x for x, s in r.equilibria(0.0, 5.0) if s == "stable"][-1]
        # start the full network off-uniform inside the upper basin
        x0 = x_red + np.random.default_rng(n + d).uniform(-0.05, 0.05, n)
        x, stable = net.equilibrium(x0)
        assert stable
        assert abs(effective_state(A, x) - x_red) < 1e-6

    def test_network_jacobian(self):
        A = regular_adjacency(12, 4, seed=2)
        net = network_system(A, hill_dynamics(a=0.5))
        x = np.random.default_rng(0).uniform(0.2, 2, 12)
        J = net.jacobian(x)
        h = 1e-6
        fd = np.column_stack([(net.rhs(x + h * e) - net.rhs(x - h * e)) / (2 * h)
                              for e in np.eye(12)])
        assert np.allclose(J, fd, atol=1e-7)

    def test_symmetry_exactness(self):
        A = regular_adjacency(50, 4, kind="circulant")
        dyn = hill_dynamics(a=0.5)
        r = gao_reduce(A, dyn)
        net = network_system(A, dyn)
        t = np.linspace(0, 20, 201)
        for c in (0.2, 0.9, 2.5):
            full = net.trajectory(np.full(50, c), t)
            red = r.trajectory(c, t)
            assert np.abs(full - red[:, None]).max() < 1e-8

    def test_heterogeneous_is_approximate(self):
        dyn = hill_dynamics(a=0.5)
        with pytest.warns(HeterogeneityWarning):
            r = gao_reduce(STAR, dyn)
        net = network_system(STAR, dyn)
        x, _ = net.equilibrium(np.full(4, 1.0))
        x_red = [v for v, s in r.equilibria(0.0, 5.0) if s == "stable"]
        gap = min(abs(effective_state(STAR, x) - v) for v in x_red)
        assert gap > 1e-6  # the score is there because the answer is not exact

    def test_circulant_needs_even_degree(self):
        with pytest.raises(ModelError):
            regular_adjacency(10, 3, kind="circulant")
        with pytest.raises(ModelError):
            regular_adjacency(10, 2, kind="lattice")


class TestEdgeList:
    def test_undirected(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("i,j,w\n0,1,1\n0,2\n0,3,1.0\n")
        assert np.array_equal(read_edge_list(p), STAR)

    def test_directed_weights(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("# comment\n0,1,2.5\n1,0,0.5\n")
        A = read_edge_list(p, n=3, directed=True)
        assert A.shape == (3, 3) and A[0, 1] == 2.5 and A[1, 0] == 0.5

    def test_errors(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("")
        with pytest.raises(ModelError):
            read_edge_list(p)
        p.write_text("0,1\nx,y\n")
        with pytest.raises(ModelError):
            read_edge_list(p)
        p.write_text("0,5\n")
        with pytest.raises(ModelError):
            read_edge_list(p, n=3)
