import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from resilnet import BUILTIN_NAMES, ModelError, builtin, jacobian_sign_pattern, parse_crn
from resilnet.model import SignDefinitenessError
from resilnet.structural import (BDCDecomposition, DetSign, InfluenceSign, VertexCapExceeded,
                                 bdc_decompose, complexes_and_linkage, cooperativity_checks,
                                 cycle_classification, deficiency, delta_values, dual_network,
                                 edf_decompose, full_stoichiometry, gray_vertices, hull_excludes_origin,
                                 network_from_stoichiometry, positivity_lint,
                                 robust_hurwitz_valueset, s2c_pattern, ssim,
                                 steady_state_influence, structural_det_sign)

from resilnet.reduction import gao_reduce, hill_dynamics

from oracles import (eigen_sweep_hurwitz, random_bdc, sample_sign_class, sampled_det,
                     sampled_influence)

FEINBERG = ("A -> 2B @ k1*A; 2B -> A @ k2*B^2; A + C -> D @ k3*A*C; D -> A + C @ k4*D; "
            "D -> B + E @ k5*D; B + E -> A + C @ k6*B*E")
CRN_EXAMPLE = "0 -> A @ a0; A -> B + C @ g_a(A); B -> 0 @ g_b(B); A + C -> 0 @ g_ac(A,C)"

# x1' = -d1 x1 - d2 x2,  x2' = d3 x1 - d4 x2
FEEDBACK = BDCDecomposition(np.array([[-1, -1, 0, 0], [0, 0, 1, -1]]),
                            np.array([[1, 0], [0, 1], [1, 0], [0, 1]]),
                            ("d1", "d2", "d3", "d4"))
SYM = {"+": 1, "-": -1, "0": 0}


def decomposable():
    out = []
    for name in BUILTIN_NAMES:
        m = builtin(name, {"N": 6}) if name == "levin_segel" else builtin(name)
        try:
            jacobian_sign_pattern(m)
        except SignDefinitenessError:
            continue
        out.append(m)
    return out


MODELS = decomposable()


class TestComplexes:
    def test_feinberg_counts(self):
        m = parse_crn(FEINBERG)
        cd = complexes_and_linkage(m)
        assert (cd.c, cd.l) == (5, 2)
        assert sorted(len(c) for c in cd.linkage_classes) == [2, 3]
        d = deficiency(m)
        assert d["delta_kernel"] == d["delta_formula"] == 0
        assert d["rank_S"] == 3 and d["formula_backed"]

    def test_reversible_pair(self):
        m = parse_crn("A -> B @ k1*A; B -> A @ k2*B")
        cd = complexes_and_linkage(m)
        assert (cd.c, cd.l, cd.weakly_reversible) == (2, 1, True)
        assert deficiency(m)["delta_kernel"] == 0

    def test_lotka_volterra_not_weakly_reversible(self):
        cd = complexes_and_linkage(builtin("lotka_volterra"))
        assert not cd.weakly_reversible
        # the empty complex from B -> 0 is kept
        assert any(not c for c in cd.complexes)
        assert cd.c == 6

    def test_one_off_non_reversible(self):
        m = parse_crn("A -> B @ k*A; B -> C @ k*B; C -> A @ k*C; A + B -> 2C @ k*A*B")
        d = deficiency(m)
        # complexes A, B, C, A+B, 2C; rank S = 2
        assert (d["c"], d["l"], d["rank_S"]) == (5, 2, 2)
        assert d["delta_kernel"] == d["delta_formula"] == 1
        assert not d["formula_backed"]

    @pytest.mark.parametrize("text", [
        FEINBERG, CRN_EXAMPLE, "A -> B @ k*A; B -> A @ k*B; B -> C @ k*B; C -> B @ k*C",
        "A + B -> C @ k*A*B; C -> A + B @ k*C",
        "2A -> B @ k*A^2; B -> 2A @ k*B; B + C -> D @ k*B*C; D -> B + C @ k*D",
        "A -> B @ k*A; B -> C @ k*B; C -> A @ k*C",
        "0 -> A @ k; A -> 0 @ k*A",
        "A -> 2A @ k*A; 2A -> A @ k*A^2",
        "A + B -> 2A @ k*A*B; 2A -> A + B @ k*A^2; A -> B @ k*A; B -> A @ k*B",
        "X -> Y @ k*X; Y -> Z @ k*Y; Z -> X @ k*Z; X + Y -> W @ k*X*Y; W -> X + Y @ k*W",
        "A -> B + C @ k*A; B + C -> A @ k*B*C; C -> 0 @ k*C; 0 -> C @ k",
    ])
    def test_kernel_formula_agree_when_weakly_reversible(self, text):
        m = parse_crn(text)
        cd = complexes_and_linkage(m)
        assert np.array_equal(cd.N @ cd.M, full_stoichiometry(m))
        assert np.all((cd.M == -1).sum(axis=0) == 1) and np.all((cd.M == 1).sum(axis=0) == 1)
        d = deficiency(m)
        assert d["delta_kernel"] >= 0
        if cd.weakly_reversible:
            assert d["delta_kernel"] == d["delta_formula"]

    @pytest.mark.parametrize("name", [n for n in BUILTIN_NAMES if n != "levin_segel"])
    def test_S_equals_NM(self, name):
        m = builtin(name)
        if m.m == 0:
            pytest.skip("no reactions")
        cd = complexes_and_linkage(m)
        assert np.array_equal(cd.N @ cd.M, full_stoichiometry(m))


class TestDecompositions:
    def test_crn_example_bdc(self):
        m = parse_crn(CRN_EXAMPLE)
        assert m.ids == ("A", "B", "C") or list(m.ids) == ["A", "B", "C"]
        b = bdc_decompose(m)
        assert b.B.tolist() == [[-1, 0, -1, -1], [1, -1, 0, 0], [1, 0, -1, -1]]
        assert b.C.tolist() == [[1, 0, 0], [0, 1, 0], [1, 0, 0], [0, 0, 1]]

    def test_crn_example_edf(self):
        m = parse_crn(CRN_EXAMPLE)
        e = edf_decompose(m)
        assert e.E.tolist() == [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 1]]
        assert e.F.tolist() == [[-1, 0, -1], [1, -1, 0], [-1, 0, -1], [1, 0, -1]]

    def test_decay(self):
        m = parse_crn("A -> 0 @ g(A)")
        b, e = bdc_decompose(m), edf_decompose(m)
        assert b.B.tolist() == [[-1]] and b.C.tolist() == [[1]]
        assert e.E.tolist() == [[1]] and e.F.tolist() == [[-1]]

    def test_chain_edf_rows_of_S(self):
        m = parse_crn("A -> B @ k1*A; B -> 0 @ k2*B")
        e = edf_decompose(m)
        assert e.F.tolist() == m.S.tolist()

    def test_iffl_shape(self):
        b = bdc_decompose(builtin("iffl"))
        assert b.B.shape == (3, 6) and b.C.shape == (6, 3)

    @pytest.mark.parametrize("m", MODELS, ids=lambda m: m.name)
    def test_bdc_invariants(self, m):
        b, e = bdc_decompose(m), edf_decompose(m)
        assert np.array_equal(b.C @ b.B, e.F @ e.E)
        assert np.all((b.C != 0).sum(axis=1) == 1)
        assert set(np.unique(b.C[b.C != 0])) <= {-1, 1}
        assert np.all((e.E != 0).sum(axis=0) == 1)
        S_rows = {tuple(r) for r in m.S}
        assert all(tuple(r) in S_rows for r in e.F)
        S_cols = {tuple(c) for c in m.S.T} | {tuple(-c) for c in m.S.T}
        assert all(tuple(c) in S_cols for c in b.B.T)

    @pytest.mark.parametrize("m", MODELS, ids=lambda m: m.name)
    def test_bdc_reproduces_jacobian(self, m):
        b = bdc_decompose(m)
        rng = np.random.default_rng(7)
        for x in rng.uniform(0.05, 2.0, (20, m.n)):
            J = b.jacobian(delta_values(m, b, x))
            assert np.allclose(J, m.jacobian_fd(x), rtol=1e-6, atol=1e-8)

    def test_terms_need_only_monotone_rates(self):
        # the Jacobian entry dA'/dB = k3 - k4 has no fixed sign, but each rate is monotone
        m = parse_crn("A -> B @ k1*A; B -> 0 @ k2*B; 0 -> A @ k3*B; A -> 0 @ k4*B")
        with pytest.raises(SignDefinitenessError):
            jacobian_sign_pattern(m)
        b = bdc_decompose(m)
        th = {"k1": 1.0, "k2": 0.5, "k3": 0.3, "k4": 0.7}
        for x in np.random.default_rng(0).uniform(0.1, 2, (10, 2)):
            J = b.jacobian(delta_values(m, b, x, th))
            assert np.allclose(J, m.with_params(**th).jacobian_fd(x), rtol=1e-6, atol=1e-8)


class TestDual:
    def test_primal_example(self):
        primal = network_from_stoichiometry(
            [[-2, 1, 0], [-1, 1, 0], [1, -1, -1], [0, -1, 1]], ["X1", "X2", "X3", "X4"])
        d = dual_network(primal)
        assert (d.n, d.m) == (3, 4)
        # 2Y1 -> Y2 ; Y1 -> Y2 ; Y2 + Y3 -> Y1 ; Y2 -> Y3
        assert d.S.tolist() == [[-2, -1, 1, 0], [1, 1, -1, -1], [0, 0, -1, 1]]
        reag = [dict(r.reagent) for r in d.reactions]
        assert reag == [{"Y1": 2}, {"Y1": 1}, {"Y2": 1, "Y3": 1}, {"Y2": 1}]

    @pytest.mark.parametrize("name", ["sir", "lotka_volterra", "iffl", "seirv"])
    def test_involution(self, name):
        m = builtin(name)
        d = dual_network(m)
        assert (d.n, d.m) == (m.m, m.n)
        assert np.array_equal(dual_network(d).S, m.S)

    def test_custom_rejected(self):
        with pytest.raises(ModelError):
            dual_network(gao_reduce(np.ones((2, 2)), hill_dynamics()).as_model())


class TestVertex:
    def test_gray_code_single_flips(self):
        V = gray_vertices(5, 0, 32)
        assert len({tuple(v) for v in V}) == 32
        assert np.all(np.abs(np.diff(V, axis=0)).sum(axis=1) == 1)
        assert np.array_equal(gray_vertices(5, 7, 19), V[7:19])

    def test_examples(self):
        assert structural_det_sign(bdc_decompose(builtin("repressilator"))) is DetSign.pos
        assert structural_det_sign(bdc_decompose(builtin("promotilator"))) is \
            DetSign.indeterminate
        decay = BDCDecomposition(np.array([[-1]]), np.array([[1]]), ("d",))
        assert structural_det_sign(decay) is DetSign.pos
        assert structural_det_sign(BDCDecomposition(-decay.B, decay.C, ("d",))) is DetSign.neg

    def test_promotilator_opposite_vertices(self):
        b = bdc_decompose(builtin("promotilator"))
        v = sampled_det(b.B, b.C, gray_vertices(b.q, 0, 1 << b.q))
        assert v.min() < 0 < v.max()

    def test_zero_structure(self):
        # both terms write to x1; x2 has no dynamics, det(-J) == 0
        z = BDCDecomposition(np.array([[-1, 1], [0, 0]]), np.array([[1, 0], [0, 1]]), ("a", "b"))
        assert structural_det_sign(z) is DetSign.zero

    def test_feedback_influence(self):
        assert steady_state_influence(FEEDBACK, 0, 0) is InfluenceSign.plus
        assert steady_state_influence(FEEDBACK, np.zeros(2), 0) is InfluenceSign.zero
        D = np.random.default_rng(0).random((10_000, 4))
        assert np.all(sampled_influence(FEEDBACK.B, FEEDBACK.C, D, 0, 0) > 0)

    def test_feedback_ssim_matches_sampling(self):
        M = ssim(FEEDBACK)
        D = np.random.default_rng(1).random((100_000, 4))
        for i in range(2):
            for j in range(2):
                want = sample_sign_class(sampled_influence(FEEDBACK.B, FEEDBACK.C, D, j, i))
                got = {"+": "pos", "-": "neg", "0": "zero", "?": "indeterminate"}[M[i, j].value]
                assert got == want

    def test_diagonal_ssim(self):
        d = BDCDecomposition(-np.eye(3, dtype=int), np.eye(3, dtype=int), ("a", "b", "c"))
        M = ssim(d)
        assert [[str(v) for v in row] for row in M] == \
            [["+", "0", "0"], ["0", "+", "0"], ["0", "0", "+"]]

    def test_influence_requires_nonsingularity(self):
        with pytest.raises(ModelError):
            steady_state_influence(bdc_decompose(builtin("promotilator")), 0, 1)
        with pytest.raises(ModelError):
            ssim(bdc_decompose(builtin("promotilator")))

    def test_cap(self):
        big = BDCDecomposition(np.tile(-np.eye(2, dtype=int), 12), np.tile(np.eye(2, dtype=int), (12, 1)),
                               tuple(f"d{h}" for h in range(24)))
        with pytest.raises(VertexCapExceeded) as err:
            structural_det_sign(big)
        assert err.value.q == 24 and "24" in str(err.value)

    def test_iffl_influence_matches_perturbation(self):
        m = builtin("iffl")
        b = bdc_decompose(m)
        assert structural_det_sign(b) is DetSign.pos
        M = ssim(b)
        # incoherent paths X1 -> X2 and X1 -| X3 -> X2: the sign depends on parameters
        assert M[1, 0] is InfluenceSign.unknown
        rng = np.random.default_rng(11)
        u = 1e-4
        seen = set()
        for _ in range(20):
            th = {p: float(rng.uniform(0.3, 3.0)) for p in m.params if p != "h"}
            th["h"] = float(rng.uniform(1.0, 3.0))
            mm = m.with_params(**th)

            def steady(shift):
                f = lambda t, x: mm.rhs(x) + shift * np.eye(3)[0]
                sol = solve_ivp(f, (0, 400), np.ones(3), rtol=1e-11, atol=1e-13, method="LSODA")
                return sol.y[:, -1]

            dx = (steady(u) - steady(-u)) / (2 * u)
            seen.add(int(np.sign(dx[1])))
            for i in (0, 2):
                want = SYM[M[i, 0].value]
                assert (abs(dx[i]) < 1e-6) if want == 0 else np.sign(dx[i]) == want
        assert seen == {-1, 1}

    def test_ssim_plus_entries_hold_numerically(self):
        m = builtin("repressilator")
        M = ssim(bdc_decompose(m))
        rng = np.random.default_rng(5)
        checked = 0
        for _ in range(60):
            th = {"A": rng.uniform(0.5, 3), "h": rng.uniform(0.5, 1.5),
                  **{f"mu{i}": rng.uniform(0.5, 2) for i in (1, 2, 3)}}
            mm = m.with_params(**th)
            x = solve_ivp(lambda t, x: mm.rhs(x), (0, 300), np.full(3, 0.5), rtol=1e-11,
                          atol=1e-13).y[:, -1]
            J = mm.jacobian(x)
            if np.linalg.eigvals(J).real.max() >= 0:
                continue
            Rm = -np.linalg.inv(J)  # dx/du for x' = f(x) + u e_j
            for i in range(3):
                for j in range(3):
                    if M[i, j] is InfluenceSign.plus:
                        assert Rm[i, j] > 0
            checked += 1
            if checked == 20:
                break
        assert checked == 20


def test_vertex_algorithm_matches_sampling():
    rng = np.random.default_rng(2024)
    for _ in range(30):
        d = random_bdc(rng)
        D = rng.random((100_000, d.q))
        want = sample_sign_class(sampled_det(d.B, d.C, D))
        got = structural_det_sign(d)
        assert got.value == want
        if got is DetSign.pos:
            for i in range(d.n):
                for j in range(d.n):
                    w = sample_sign_class(sampled_influence(d.B, d.C, D, j, i))
                    g = steady_state_influence(d, j, i, check=False).value
                    assert {"+": "pos", "-": "neg", "0": "zero", "?": "indeterminate"}[g] == w


@pytest.mark.parametrize("m", [m for m in MODELS if bdc_decompose(m).q <= 8],
                         ids=lambda m: m.name)
def test_builtin_det_sign_matches_sampling(m):
    b = bdc_decompose(m)
    D = np.random.default_rng(3).random((100_000, b.q))
    assert structural_det_sign(b).value == sample_sign_class(sampled_det(b.B, b.C, D))


@pytest.mark.parametrize("m", MODELS, ids=lambda m: m.name)
def test_multiaffinity(m):
    b = bdc_decompose(m)
    rng = np.random.default_rng(4)
    for _ in range(5):
        D = rng.uniform(0.1, 1.0, b.q)
        h = int(rng.integers(b.q))
        pts = np.repeat(D[None], 3, 0)
        pts[:, h] = [0.2, 0.5, 0.8]
        v = sampled_det(b.B, b.C, pts)
        scale = max(1.0, np.abs(v).max())
        assert abs(v[1] - 0.5 * (v[0] + v[2])) <= 1e-9 * scale


class TestHurwitz:
    def test_feedback_certified(self):
        bounds = [(0.5, 2.0)] * 4
        r = robust_hurwitz_valueset(FEEDBACK, bounds)
        assert r.status == "certified" and r.grid_dependent
        assert eigen_sweep_hurwitz(FEEDBACK.B, FEEDBACK.C, bounds) < 0

    def test_falsified(self):
        # x1' = -d1 x1 + d2 x2, x2' = d3 x1 - d4 x2: unstable when d2 d3 > d1 d4
        pos_fb = BDCDecomposition(np.array([[-1, 1, 0, 0], [0, 0, 1, -1]]), FEEDBACK.C,
                                  FEEDBACK.delta_labels)
        bounds = [(0.5, 1.0), (0.5, 2.0), (0.5, 2.0), (0.5, 1.0)]
        r = robust_hurwitz_valueset(pos_fb, bounds)
        assert r.status == "falsified"
        assert eigen_sweep_hurwitz(pos_fb.B, pos_fb.C, bounds) > 0

    def test_fixed_matrix(self):
        empty = BDCDecomposition(np.zeros((2, 0), int), np.zeros((0, 2), int), ())
        # q = 0 gives the zero matrix, which is not Hurwitz
        assert robust_hurwitz_valueset(empty, []).status == "falsified"
        stable = BDCDecomposition(np.array([[-1, 0], [0, -1]]), np.eye(2, dtype=int), ("a", "b"))
        assert robust_hurwitz_valueset(stable, [(1, 1), (2, 2)]).status == "certified"

    def test_bad_input(self):
        with pytest.raises(ModelError):
            robust_hurwitz_valueset(FEEDBACK, [(0.5, 2.0)] * 4, omega=[])
        with pytest.raises(ModelError):
            robust_hurwitz_valueset(FEEDBACK, [(0.0, 2.0)] * 4)
        with pytest.raises(ModelError):
            robust_hurwitz_valueset(FEEDBACK, [(0.5, 2.0)] * 3)

    def test_hull(self):
        assert hull_excludes_origin([1, 1 + 1j, 2 - 0.5j])
        assert not hull_excludes_origin([1, -1 + 0.1j, -1 - 0.1j])
        assert not hull_excludes_origin([0.0, 1.0])


class TestCycles:
    def test_examples(self):
        r = cycle_classification(jacobian_sign_pattern(builtin("repressilator")))
        assert r["classification"] == "strong_candidate_oscillator" and r["n_cycles"] == 1
        assert r["sustained_oscillation_possible"] and not r["multistationarity_possible"]
        p = cycle_classification(jacobian_sign_pattern(builtin("promotilator")))
        assert p["classification"] == "strong_candidate_multistationary"
        assert cycle_classification(-np.eye(3, dtype=int))["classification"] == "acyclic"

    def test_mixed(self):
        s = np.array([[-1, 1, 0], [1, -1, -1], [0, 1, -1]])
        r = cycle_classification(s)
        assert r["classification"] == "mixed"
        assert (r["n_positive"], r["n_negative"]) == (1, 1)

    def test_bad_pattern(self):
        with pytest.raises(ModelError):
            cycle_classification(np.array([[2, 0], [0, 1]]))

    def test_cooperativity(self):
        assert cooperativity_checks(jacobian_sign_pattern(builtin("promotilator")))[
            "is_metzler_offdiag"]
        assert not cooperativity_checks(jacobian_sign_pattern(builtin("repressilator")))[
            "is_metzler_offdiag"]
        P = s2c_pattern(4)
        lit = np.where(P == 2, -1, P)
        assert cooperativity_checks(lit)["is_strongly_2_cooperative"]
        broken = lit.copy()
        broken[0, 3] = 1
        assert not cooperativity_checks(broken)["is_strongly_2_cooperative"]


class TestLint:
    def test_sir(self):
        assert positivity_lint(builtin("sir"))["passes"]

    def test_reagent_independent_rate(self):
        r = positivity_lint(parse_crn("A -> B @ k*C; C -> 0 @ k2*C"))
        assert not r["passes"]
        assert len(r["failures"]) == 1 and "consumes A" in r["failures"][0]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.sets(st.integers(0, 3), min_size=1, max_size=2),
                          st.sets(st.integers(0, 3), max_size=2)), min_size=1, max_size=6))
def test_mass_action_networks_pass_lint(rx):
    names = "ABCD"
    lines = []
    for j, (left, right) in enumerate(rx):
        if left == right:
            continue
        lhs = " + ".join(names[i] for i in sorted(left))
        rhs = " + ".join(names[i] for i in sorted(right)) or "0"
        rate = f"k{j}*" + "*".join(names[i] for i in sorted(left))
        lines.append(f"{lhs} -> {rhs} @ {rate}")
    if not lines:
        return
    m = parse_crn("\n".join(lines))
    assert positivity_lint(m)["passes"]
    cd = complexes_and_linkage(m)
    assert np.array_equal(cd.N @ cd.M, full_stoichiometry(m))
    d = deficiency(m)
    if cd.weakly_reversible:
        assert d["delta_kernel"] == d["delta_formula"]
    assert np.array_equal(dual_network(dual_network(m)).S, m.S)
