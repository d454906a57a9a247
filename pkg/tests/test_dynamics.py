import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from resilnet import ModelError, builtin, parse_crn
from resilnet.dynamics import (DegenerateEquilibrium, bifurcation_sweep, degree_index,
                               find_equilibria, fold_condition_solve, homogeneous_equilibrium,
                               levin_segel_semidiscretize, normal_form, pattern_condition,
                               potential_1d, turing_pattern_equilibrium)

from oracles import fold_points_closed_form


def gene(**kw):
    p = {"a": 2.0, "h": 2.0, "k": 0.1}
    p.update(kw)
    return builtin("gene_regulation", p)


class TestEquilibria:
    def test_gene_triple(self):
        eqs = find_equilibria(gene(), box=[(0, 3)])
        xs = [e.x[0] for e in eqs]
        assert np.allclose(xs, [0.13721, 0.5, 1.46332], atol=1e-3)
        assert [e.stability for e in eqs] == ["stable", "unstable", "stable"]
        assert all(np.abs(gene().rhs(e.x)).max() < 1e-10 for e in eqs)

    def test_gene_h1_closed_form(self):
        a, k = 2.0, 0.1
        eqs = find_equilibria(gene(h=1.0), box=[(0, 5)])
        want = (k + a - 1 + math.sqrt((k + a - 1) ** 2 + 4 * k)) / 2
        assert len(eqs) == 1 and abs(eqs[0].x[0] - want) < 1e-9
        assert eqs[0].stability == "stable"

    def test_linear_decay(self):
        eqs = find_equilibria(normal_form("transcritical", p=-1.0), box=[(-0.5, 0.5)])
        assert len(eqs) == 1 and abs(eqs[0].x[0]) < 1e-12
        assert eqs[0].stability == "stable"

    def test_two_dimensional(self):
        m = builtin("lotka_volterra")
        eqs = find_equilibria(m, box=[(0, 3), (0, 3)], n_starts=64)
        interior = [e for e in eqs if np.all(e.x > 0.1)]
        assert len(interior) == 1 and np.allclose(interior[0].x, [1, 1], atol=1e-9)
        assert all(np.abs(m.rhs(e.x)).max() < 1e-10 for e in eqs)

    def test_box_and_starts_required(self):
        with pytest.raises(ModelError):
            find_equilibria(gene(), box=None)
        with pytest.raises(ModelError):
            find_equilibria(gene(), box=[(0, 3)], n_starts=0)

    def test_stability_matches_eigenvalues(self):
        for e in find_equilibria(builtin("repressilator"), box=[(0, 6)] * 3, n_starts=16):
            lead = e.eigenvalues.real.max()
            assert e.stability == ("stable" if lead < 0 else "unstable")


class TestDegree:
    def test_gene_signs(self):
        eqs = find_equilibria(gene(), box=[(0, 3)])
        # 1-D: sign det(-J) = sign(-f'(x))
        m = gene()
        want = [int(np.sign(-m.jacobian(e.x)[0, 0])) for e in eqs]
        assert [e.det_sign for e in eqs] == want == [1, -1, 1]
        assert degree_index(eqs) == (1, True)

    def test_dropped_root(self):
        eqs = find_equilibria(gene(), box=[(0, 3)])
        assert degree_index(eqs[:2]) == (0, False)
        assert degree_index(eqs[:1]) == (1, True)

    def test_degenerate_refused(self):
        eqs = find_equilibria(normal_form("fold", p=0.0), box=[(-1, 1)])
        assert len(eqs) == 1 and eqs[0].degenerate
        with pytest.raises(DegenerateEquilibrium):
            degree_index(eqs)


class TestFolds:
    def test_gene_folds_against_closed_form(self):
        got = fold_condition_solve(gene(), "a", p_range=(0.5, 5.0), x_range=(1e-6, 5.0))
        want = fold_points_closed_form(2, 0.1)
        assert len(got) == 2
        assert np.allclose(got, want, atol=1e-7)
        m = gene()
        for p in got:
            # each returned value has a root x with f = df/dx = 0
            xs = np.linspace(1e-3, 5, 20001)[:, None]
            f = np.abs(m.rhs(xs, {"a": p})[:, 0])
            assert f.min() < 1e-6

    def test_residuals(self):
        m = gene()
        got = fold_condition_solve(m, "a", p_range=(0.5, 5.0), x_range=(1e-6, 5.0))
        from scipy.optimize import brentq
        for p in got:
            d = lambda x: float(m.jacobian(np.array([x]), {"a": p})[0, 0])
            xs = np.linspace(0.05, 5, 2000)
            dv = np.array([d(x) for x in xs])
            roots = [brentq(d, xs[i], xs[i + 1]) for i in np.nonzero(dv[:-1] * dv[1:] < 0)[0]]
            assert min(abs(m.rhs(np.array([r]), {"a": p})[0]) for r in roots) < 1e-9

    def test_hill_one_has_no_fold(self):
        for k in (0.0, 0.1, 0.5):
            assert fold_condition_solve(gene(h=1.0, k=k), "a", p_range=(0.0, 10.0)) == []

    def test_cusp(self):
        k_c = 1 / (3 * math.sqrt(3))
        near = fold_condition_solve(gene(k=k_c * 0.98), "a", p_range=(0.5, 5.0))
        assert len(near) == 2 and near[1] - near[0] < 0.1
        assert fold_condition_solve(gene(k=k_c * 1.05), "a", p_range=(0.5, 5.0)) == []

    def test_non_scalar(self):
        with pytest.raises(ModelError):
            fold_condition_solve(builtin("sis"), "beta")


class TestSweep:
    def test_gene(self):
        d = bifurcation_sweep(gene(), "a", (1.5, 3.0), 61, box=[(0, 3)])
        assert len(d.detected_folds) == 2
        want = fold_points_closed_form(2, 0.1)
        assert np.allclose(d.detected_folds, want, atol=2e-3)
        rows = list(d.rows())
        assert all(len(r) == 3 for r in rows)

    def test_transcritical(self):
        d = bifurcation_sweep(normal_form("transcritical"), "p", (-1, 1), 41, box=[(-2, 2)])
        assert len(d.detected_transcritical) == 1
        assert abs(d.detected_transcritical[0]) < 1e-3

    def test_fold_normal_form(self):
        d = bifurcation_sweep(normal_form("fold"), "p", (-1, 1), 40, box=[(-2, 2)])
        assert len(d.detected_folds) == 1 and abs(d.detected_folds[0]) < 1e-3
        for p, eqs in d.samples:
            if p < -1e-9:
                assert np.allclose(sorted(e.x[0] for e in eqs),
                                   [-math.sqrt(-p), math.sqrt(-p)], atol=1e-9)
            elif p > 1e-9:
                assert eqs == []

    def test_bad_args(self):
        with pytest.raises(ModelError):
            bifurcation_sweep(gene(), "zeta", (0, 1), 5, box=[(0, 3)])
        with pytest.raises(ModelError):
            bifurcation_sweep(gene(), "a", (0, 1), 1, box=[(0, 3)])


class TestNormalForms:
    def test_fold(self):
        eqs = find_equilibria(normal_form("fold", p=-0.25), box=[(-2, 2)])
        assert np.allclose([e.x[0] for e in eqs], [-0.5, 0.5], atol=1e-10)
        assert [e.stability for e in eqs] == ["stable", "unstable"]

    def test_transcritical(self):
        eqs = find_equilibria(normal_form("transcritical", p=0.3), box=[(-2, 2)])
        assert np.allclose([e.x[0] for e in eqs], [0.0, 0.3], atol=1e-10)
        assert [e.stability for e in eqs] == ["unstable", "stable"]

    @pytest.mark.parametrize("kind,params,x,want", [
        ("fold", {"p": 0.3}, 1.2, 0.3 + 1.44),
        ("transcritical", {"p": 0.3}, 1.2, 0.36 - 1.44),
        ("pitchfork_super", {"p": 0.3}, 1.2, 0.36 - 1.728),
        ("pitchfork_sub", {"p": 0.3}, 1.2, 0.36 + 1.728),
        ("cusp", {"a": 0.2, "b": 0.7}, 1.2, 0.2 + 0.84 - 1.728),
    ])
    def test_fields(self, kind, params, x, want):
        assert normal_form(kind, **params).rhs([x])[0] == pytest.approx(want, rel=1e-14)

    @pytest.mark.parametrize("p", [0.1, 0.25, 1.0])
    def test_hopf_radius(self, p):
        m = normal_form("hopf", p=p, l=-1.0)
        sol = solve_ivp(lambda t, y: m.rhs(y), (0, 200 / p), [0.05, 0.0], rtol=1e-10,
                        atol=1e-12)
        r = np.hypot(*sol.y[:, -1])
        assert abs(r - math.sqrt(p)) < 0.01 * math.sqrt(p)

    def test_unknown(self):
        with pytest.raises(ModelError):
            normal_form("saddle")
        with pytest.raises(ModelError):
            normal_form("fold", q=1)


class TestPotential:
    def test_quadratic(self):
        g = np.linspace(-2, 2, 81)
        pot = potential_1d(normal_form("transcritical", p=-1.0), grid=g)
        # x' = -x - x^2 gives V = x^2/2 + x^3/3, anchored at grid[0]
        want = g ** 2 / 2 + g ** 3 / 3
        assert np.allclose(pot.V, want - want[0], atol=1e-12)

    def test_gradient_reproduces_field(self):
        m = gene()
        g = np.linspace(0, 3, 3001)
        pot = potential_1d(m, grid=g)
        dV = np.gradient(pot.V, g, edge_order=2)
        f = m.rhs(g[:, None])[:, 0]
        assert np.max(np.abs(-dV[5:-5] - f[5:-5])) < 1e-6

    def test_stochastic_barrier_higher(self):
        m = gene()
        g = np.linspace(0.01, 2.5, 2000)
        pot = potential_1d(m, grid=g, sigma=0.5)
        x2, x3 = 0.5, 1.46332
        dV = pot.value(x2) - pot.value(x3)
        dphi = pot.value(x2, "phi") - pot.value(x3, "phi")
        assert dphi > dV > 0

    def test_errors(self):
        with pytest.raises(ModelError):
            potential_1d(gene(), grid=[0, 1], sigma=0.0)
        with pytest.raises(ModelError):
            potential_1d(gene(), grid=[1, 0])
        with pytest.raises(ModelError):
            potential_1d(builtin("sis"), grid=[0, 1])


class TestTuring:
    def test_condition_and_homogeneous(self):
        ok, msg = pattern_condition(0.5, 1, 1, 0.5, 0.5, 1.4e-4, 0.005)
        assert ok and "0.028" in msg
        assert (math.sqrt(2) - 1) ** 2 == pytest.approx(0.1716, abs=1e-4)
        assert np.allclose(homogeneous_equilibrium(0.5, 1, 1, 0.5, 0.5), (1 / 3, 2 / 3))

    def test_model_structure(self):
        m = levin_segel_semidiscretize(N=7)
        assert m.n == 14
        x = np.random.default_rng(0).uniform(0.1, 1, 14)
        vals = m.param_values()
        assert np.allclose(m.rhs(x), m.kernel.rhs(x, vals), rtol=1e-13)
        # explicit operator: interior row of u with the doubled boundary coupling
        h = 1 / 6
        Du, Dv = 1.4e-4, 0.005
        u, v = x[0::2], x[1::2]
        want_u = 0.5 * u + 0.5 * u ** 2 - u * v
        want_v = u * v - 0.5 * v ** 2
        lap = lambda y: np.r_[2 * (y[1] - y[0]), y[2:] - 2 * y[1:-1] + y[:-2],
                              2 * (y[-2] - y[-1])] / h ** 2
        f = m.rhs(x)
        assert np.allclose(f[0::2], want_u + Du * lap(u), rtol=1e-12)
        assert np.allclose(f[1::2], want_v + Dv * lap(v), rtol=1e-12)

    def test_decoupled_without_diffusion(self):
        with pytest.warns(UserWarning):
            m = levin_segel_semidiscretize(D_u=0.0, D_v=0.0, N=5)
        x = np.random.default_rng(1).uniform(0.1, 1, 10)
        J = m.jacobian(x)
        for i in range(5):
            for k in range(5):
                if i != k:
                    assert np.all(J[2 * i:2 * i + 2, 2 * k:2 * k + 2] == 0)
        e = turing_pattern_equilibrium(m, T=500)
        assert np.allclose(e.x[0::2], 1 / 3) and np.allclose(e.x[1::2], 2 / 3)

    def test_pattern_and_refinement(self):
        m = levin_segel_semidiscretize()
        e = turing_pattern_equilibrium(m, seed=0)
        assert e.residual < 1e-8 and e.stability == "stable"
        u = e.x[0::2]
        assert u.std() / u.mean() > 0.1
        e2 = turing_pattern_equilibrium(levin_segel_semidiscretize(N=201), seed=0)
        u2 = np.interp(np.linspace(0, 1, 101), np.linspace(0, 1, 201), e2.x[0::2])
        assert np.abs(u2 - u).max() < 0.02 * np.abs(u).max()

    def test_errors(self):
        with pytest.raises(ModelError):
            levin_segel_semidiscretize(N=2)
        with pytest.raises(ModelError):
            levin_segel_semidiscretize(a=0.0)
        with pytest.raises(ModelError):
            turing_pattern_equilibrium(gene())
