import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resilnet import (BUILTIN_NAMES, CompartmentalSpec, DomainError, DSLSyntaxError,
                      ModelError,
                      build_compartmental, builtin, from_json, jacobian_sign_pattern,
                      numeric_vector_field, parse_crn, serialize, to_json)
from resilnet.model import SignDefinitenessError


def small(name):
    return builtin(name, {"N": 6}) if name == "levin_segel" else builtin(name)


def positive_states(model, rng, k):
    return rng.uniform(0.05, 2.0, size=(k, model.n))


def reordered(model, rows, cols):
    """Stoichiometry with rows/columns in the given species/label order."""
    r = [model.ids.index(s) for s in rows]
    c = [model.labels.index(s) for s in cols]
    return model.S[np.ix_(r, c)]


class TestDSL:
    def test_biomolecular_example(self):
        m = parse_crn("0 -> A @ a0; A + C -> B + D @ g_ac(A,C); D -> C @ g_d(D); "
                      "B -> 0 @ g_b(B)")
        S = reordered(m, ["A", "B", "C", "D"], ["g_ac", "g_b", "g_d"])
        assert S.tolist() == [[-1, 0, 0], [1, -1, 0], [-1, 0, 1], [1, 0, -1]]
        g0 = m.g0({"a0": 1.0})
        assert g0[m.ids.index("A")] == 1.0 and g0.sum() == 1.0

    def test_lotka_volterra(self):
        m = parse_crn("A -> 2A @ ka*A; A + B -> 2B @ kab*A*B; B -> 0 @ kb*B")
        assert m.S.tolist() == [[1, -1, 0], [0, 1, -1]]

    def test_empty(self):
        m = parse_crn("")
        assert (m.n, m.m) == (0, 0)

    def test_syntax_error_location(self):
        with pytest.raises(DSLSyntaxError) as err:
            parse_crn("A -> B @ k*A\nA + -> C @ k")
        assert "2" in str(err.value)

    def test_negative_stoichiometry_rejected(self):
        with pytest.raises(ModelError):
            parse_crn("-1 A -> B @ k*A")

    @pytest.mark.parametrize("name", [n for n in BUILTIN_NAMES if n != "levin_segel"])
    def test_serialize_round_trip(self, name):
        m = builtin(name)
        again = parse_crn(serialize(m))
        assert serialize(again) == serialize(m)
        assert np.array_equal(again.S, m.S)
        j = from_json(to_json(m))
        assert np.array_equal(j.S, m.S)
        x = np.random.default_rng(1).uniform(0.1, 2, (5, m.n))
        assert np.allclose(j.rhs(x), m.rhs(x), rtol=1e-13)


class TestBuiltins:
    def test_gene_field(self):
        m = builtin("gene_regulation", {"a": 2, "h": 2, "k": 0.1})
        x = np.linspace(0, 3, 31)[:, None]
        want = -x + 2 * x ** 2 / (1 + x ** 2) + 0.1
        assert np.allclose(m.rhs(x), want, rtol=1e-14, atol=1e-15)
        assert abs(numeric_vector_field(m, [0.5])[0]) < 1e-15

    def test_sir_demography(self):
        m = builtin("sir_demography", {"pi": 0.3, "mu": 0.05, "beta": 0.7, "gamma": 0.2})
        S, I, R = 0.6, 0.3, 0.1
        f = m.rhs([S, I, R])
        want = [0.3 - 0.7 * S * I - 0.05 * S, 0.7 * S * I - 0.2 * I - 0.05 * I,
                0.2 * I - 0.05 * R]
        assert np.allclose(f, want, rtol=1e-14)

    def test_sis_zero_rates(self):
        m = builtin("sis", {"beta": 0, "gamma": 0})
        assert np.all(m.rhs([0.4, 0.6]) == 0)

    def test_trivial_equilibria(self):
        assert np.allclose(builtin("lotka_volterra").rhs([1.0, 1.0]), 0)
        assert np.allclose(builtin("sis").rhs([1.0, 0.0]), 0)

    def test_unknown(self):
        with pytest.raises(ModelError):
            builtin("nope")
        with pytest.raises(ModelError):
            builtin("sis", {"zeta": 1.0})

    def test_aliases(self):
        assert builtin("gene").n == 1
        assert builtin("lv").name == "lotka_volterra"

    def test_missing_parameter(self):
        m = parse_crn("A -> 0 @ k*A")
        with pytest.raises(ModelError):
            m.rhs([1.0])

    def test_domain_violation(self):
        with pytest.raises(DomainError):
            numeric_vector_field(builtin("sis"), [-0.5, 0.2])


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_reaction_sum_matches_rhs(name):
    m = small(name)
    X = positive_states(m, np.random.default_rng(0), 100)
    via_rates = m.rates(X) @ m.S.T + m.g0()
    assert np.allclose(via_rates, m.rhs(X), rtol=1e-12, atol=1e-13)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_sign_pattern_matches_finite_differences(name):
    m = small(name)
    rng = np.random.default_rng(3)
    try:
        sp = jacobian_sign_pattern(m).sigma
    except SignDefinitenessError as err:
        # the refused entry must really change sign somewhere in the state space
        i, k = err.pair
        vals = [m.jacobian_fd(x)[i, k] for x in rng.uniform(0.0, 4.0, (400, m.n))]
        assert min(vals) < 0 < max(vals)
        return
    for x in positive_states(m, rng, 50):
        J = m.jacobian_fd(x)
        nz = np.abs(J) > 1e-7
        assert np.all(np.sign(J[nz]) == sp[nz])
        J_an = m.jacobian(x)
        assert np.allclose(J_an, J, rtol=1e-5, atol=1e-7)


def test_sign_pattern_examples():
    assert jacobian_sign_pattern(builtin("iffl")).sigma.tolist() == \
        [[-1, 0, 0], [1, -1, 1], [-1, 0, -1]]
    assert jacobian_sign_pattern(builtin("repressilator")).sigma.tolist() == \
        [[-1, 0, -1], [-1, -1, 0], [0, -1, -1]]
    decay = parse_crn("A -> 0 @ m1*A; B -> 0 @ m2*B")
    assert jacobian_sign_pattern(decay).sigma.tolist() == [[-1, 0], [0, -1]]


def test_non_sign_definite_reported():
    m = parse_crn("A -> B @ k1*A; B -> 0 @ k2*B; 0 -> A @ k3*B; A -> 0 @ k4*B")
    with pytest.raises(SignDefinitenessError) as err:
        jacobian_sign_pattern(m)
    assert "A" in str(err.value)


class TestCompartmental:
    def test_sis(self):
        spec = CompartmentalSpec(G=[[0.0]], F=[[-0.2]], C=[[0.5]], D=[[0.2]], a=[0.0],
                                 b=[1.0], w_names=("S",), x_names=("I",))
        m = build_compartmental(spec)
        sis = builtin("sis", {"beta": 0.5, "gamma": 0.2})
        X = np.random.default_rng(2).uniform(0, 1, (20, 2))
        assert np.allclose(m.rhs(X), sis.rhs(X), rtol=1e-14, atol=1e-15)

    def test_general_field(self):
        rng = np.random.default_rng(5)
        n2, n1 = 2, 2
        G = np.array([[-0.3, 0.1], [0.2, -0.4]])
        F = np.array([[-0.5, 0.3], [0.0, -0.2]])
        C = rng.uniform(0, 1, (n2, n1))
        D = rng.uniform(0, 0.2, (n2, n1))
        a = np.array([0.1, 0.0])
        b = np.array([0.7, 0.3])
        m = build_compartmental(CompartmentalSpec(G, F, C, D, a, b))
        for z in rng.uniform(0, 1, (20, 4)):
            w, x = z[:2], z[2:]
            want = np.r_[G @ w - (C @ x) * w + D @ x + a, F @ x + b * (w @ C @ x)]
            assert np.allclose(m.rhs(z), want, rtol=1e-12, atol=1e-14)

    def test_null(self):
        z = np.zeros
        m = build_compartmental(CompartmentalSpec(z((2, 2)), z((1, 1)), z((2, 1)),
                                                  z((2, 1)), z(2), z(1)))
        assert np.all(m.rhs([0.3, 0.4, 0.5]) == 0)

    def test_dimension_mismatch(self):
        with pytest.raises(ModelError):
            build_compartmental(CompartmentalSpec([[0.0]], [[-1.0]], [[1.0, 1.0]], [[0.0]],
                                                  [0.0], [1.0]))

    def test_metzler_required(self):
        with pytest.raises(ModelError):
            build_compartmental(CompartmentalSpec([[-1.0, -0.1], [0.0, -1.0]], [[-1.0]],
                                                  [[1.0], [1.0]], [[0.0], [0.0]],
                                                  [0.0, 0.0], [1.0]))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 2), st.integers(0, 3),
                          st.integers(0, 2)), min_size=1, max_size=6))
def test_random_mass_action_round_trip(rx):
    names = "ABCD"
    lines = []
    for j, (s1, c1, s2, c2) in enumerate(rx):
        left = f"{c1}{names[s1]}" if c1 else "0"
        right = f"{c2}{names[s2]}" if c2 else "0"
        if not c1 and c2 > 1:
            right = names[s2]
        if left == right:
            continue
        rate = f"k{j}" + (f"*{names[s1]}^{c1}" if c1 else "")
        lines.append(f"{left} -> {right} @ {rate}")
    if not lines:
        return
    m = parse_crn("\n".join(lines))
    again = parse_crn(serialize(m))
    assert np.array_equal(again.S, m.S)
    assert again.ids == m.ids
