import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ldqc.code_model import (
    ClassicalCode,
    ClassicalDecoder,
    CodeParams,
    Constant,
    QueryPlan,
    RandomizedCode,
    SignedParity,
    as_quantum_code,
    as_quantum_decoder,
    query_marginal,
    success_classical,
)
from ldqc.codes import basis_code, hadamard_code, qrac_2to1, smooth_corpus, tensor_codes
from ldqc.quantum_core import DensityOperator, all_words, replace_with_maximally_mixed
from ldqc.reductions import (
    DerandomizationError,
    GoodEdgeSet,
    MatchingFamily,
    MatchingGuaranteeError,
    PauliSearchFailure,
    ReductionError,
    assign_signs,
    build_coupling,
    build_matching,
    build_parity_decoder,
    build_randomized_code,
    corollary_ldc_eps,
    corollary_rldc_eps,
    decomposition_bound_check,
    derandomize,
    find_pauli_sequence,
    good_index_floor,
    good_query_sets,
    ldc_to_smooth,
    measurement_bias,
    pauli_bias,
    pipeline_ldqc_to_ldc,
    pipeline_ldqc_to_rldc,
    planned_stages,
    reduce_smooth_quantum,
    smooth_to_ldc,
)

F = Fraction
INV_SQRT2 = 1 / math.sqrt(2)
QRAC_EPS = INV_SQRT2 / 2


def edge_set(edges, i=0):
    return GoodEdgeSet(i, tuple(edges), {}, {r: F(1, len(edges)) for r in edges}, F(1, 2))


def coin_decoder(n, m):
    plan = QueryPlan(n, m, 1, tuple((((0,), F(1)),) for _ in range(n)))
    return ClassicalDecoder(plan, {(i, (0,)): Constant(0) for i in range(n)})


# -- good sets and matchings ---------------------------------------------------


def test_good_sets_basis_and_hadamard():
    code, dec = basis_code(2)
    good = good_query_sets(code, dec, 1, eps=F(1, 2))
    assert good.edges == ((1,),)
    assert good.conditional_success[(1,)] == pytest.approx(1)
    hcode, hdec = hadamard_code(2)
    qgood = good_query_sets(as_quantum_code(hcode), as_quantum_decoder(hdec), 0, eps=F(1, 2))
    assert set(qgood.edges) == {(0, 1), (2, 3)}
    cgood = good_query_sets(hcode, hdec, 0, eps=F(1, 2))
    assert cgood.edges == qgood.edges


def test_coin_decoder_has_no_good_sets():
    code, _ = hadamard_code(1)
    assert good_query_sets(code, coin_decoder(1, 2), 0, eps=F(1, 10)).edges == ()


def test_greedy_matching_order():
    rep = build_matching(edge_set([(1, 2), (0, 1), (2, 3)]), q=2, c=1, eps=F(1, 2), m=4)
    assert rep.sets == ((0, 1), (2, 3))
    assert rep.maximal and rep.cover == (0, 1, 2, 3)


def test_singletons_all_taken():
    rep = build_matching(edge_set([(2,), (0,), (1,)]), q=1, c=3, eps=F(1, 2), m=3)
    assert rep.sets == ((0,), (1,), (2,))


def test_matching_guarantee_error():
    with pytest.raises(MatchingGuaranteeError):
        build_matching(edge_set([(0, 1), (1, 2)]), q=2, c=1, eps=F(1, 1), m=8)
    rep = build_matching(edge_set([(0, 1), (1, 2)]), q=2, c=1, eps=F(1, 1), m=8, check=False)
    assert len(rep.sets) == 1


def test_matching_family_rejects_overlap():
    with pytest.raises(ReductionError):
        MatchingFamily(3, (((0, 1), (1, 2)),))


# -- biases ----------------------------------------------------------------------


def test_biases_on_basis_code():
    code, dec = basis_code(2)
    assert measurement_bias(code, dec, 0, (0,)) == pytest.approx(1)
    assert pauli_bias(code, 0, "ZZ", (0,)) == (pytest.approx(1), 1)
    assert pauli_bias(code, 0, "XX", (0,))[0] == pytest.approx(0)


def test_biases_on_qrac():
    code, dec = qrac_2to1()
    assert measurement_bias(code, dec, 0, (0,)) == pytest.approx(INV_SQRT2)
    assert pauli_bias(code, 1, "X", (0,))[0] == pytest.approx(0, abs=1e-12)
    assert pauli_bias(code, 1, "Z", (0,))[0] == pytest.approx(INV_SQRT2)


def test_pauli_bias_sign_follows_correlation():
    # Encode x as |-x>: the Z correlation is negative.
    code = as_quantum_code(ClassicalCode(1, 1, {(1,): (-1,), (-1,): (1,)}))
    value, sign = pauli_bias(code, 0, "Z", (0,))
    assert value == pytest.approx(1) and sign == -1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 7), st.data())
def test_pauli_bias_depends_only_on_restriction(seed, data):
    inst = smooth_corpus(8)[seed]
    code = inst.code
    r = data.draw(st.sampled_from([r for r, _ in inst.decoder.plan.sets(0)]))
    s1 = data.draw(st.text("IXYZ", min_size=code.m, max_size=code.m))
    s2 = list(data.draw(st.text("IXYZ", min_size=code.m, max_size=code.m)))
    for j in r:
        s2[j] = s1[j]
    assert pauli_bias(code, 0, s1, r)[0] == pytest.approx(pauli_bias(code, 0, "".join(s2), r)[0], abs=1e-12)


def test_decomposition_checks_on_basis_and_corpus():
    code, dec = basis_code(2)
    chk = decomposition_bound_check(code, dec, 0, (0,))
    assert chk.ok and chk.best_string == "Z" and chk.bias == pytest.approx(1)
    for inst in smooth_corpus(10):
        for i in range(inst.code.n):
            for r, _ in inst.decoder.plan.sets(i):
                chk = decomposition_bound_check(inst.code, inst.decoder, i, r)
                assert chk.ok
                assert abs(chk.reconstructed - chk.bias) <= 1e-8
                assert chk.best_term >= chk.bias / 4 ** len(r) - 1e-12


# -- Pauli search ----------------------------------------------------------------


def test_search_finds_zz_on_basis():
    code, _ = basis_code(2)
    fam = MatchingFamily(2, (((0,),), ((1,),)))
    res = find_pauli_sequence(code, fam, eps=F(1, 2), q=1)
    assert res.success and res.s_star == "ZZ" and res.exhaustive
    assert res.threshold == pytest.approx(1 / 16)
    assert res.candidates_evaluated == 16


def test_search_fails_on_qrac():
    code, _ = qrac_2to1()
    fam = MatchingFamily(1, (((0,),), ((0,),)))
    res = find_pauli_sequence(code, fam, eps=QRAC_EPS, q=1)
    assert not res.success
    for letter in "IXYZ":
        worst = min(pauli_bias(code, i, letter, (0,))[0] for i in range(2))
        assert worst == pytest.approx(0, abs=1e-12)
    assert res.best_per_index == pytest.approx([INV_SQRT2] * 2)


def test_search_fails_on_tensor_qrac():
    code, _ = tensor_codes(qrac_2to1(), qrac_2to1())
    fam = MatchingFamily(2, (((0,),), ((0,),), ((1,),), ((1,),)))
    for strategy in ("exhaustive", "sample", "greedy"):
        res = find_pauli_sequence(code, fam, eps=QRAC_EPS, q=1, strategy=strategy, budget=64)
        assert not res.success
        assert res.violating
    res = find_pauli_sequence(code, fam, eps=QRAC_EPS, q=1)
    assert res.best_per_index == pytest.approx([INV_SQRT2] * 4)


def test_search_rejects_empty_matching():
    code, _ = basis_code(1)
    with pytest.raises(ReductionError):
        find_pauli_sequence(code, MatchingFamily(1, ((),)), eps=F(1, 2))


def test_sample_strategy_is_seeded():
    code, _ = basis_code(2)
    fam = MatchingFamily(2, (((0,),), ((1,),)))
    a = find_pauli_sequence(code, fam, eps=F(1, 2), strategy="sample", budget=200, seed=3)
    b = find_pauli_sequence(code, fam, eps=F(1, 2), strategy="sample", budget=200, seed=3)
    assert a.as_dict() == b.as_dict()


# -- measured codes ----------------------------------------------------------------


def test_randomized_code_from_basis():
    code, _ = basis_code(2)
    rcode = build_randomized_code(code, "ZZ")
    for x in all_words(2):
        (p, y), = rcode.rows(x)
        assert p == pytest.approx(1) and y == x


def test_randomized_code_from_bell_state():
    bell = np.zeros((4, 4))
    for a in (0, 3):
        for b in (0, 3):
            bell[a, b] = 0.5
    rho = DensityOperator(bell)
    from ldqc.code_model import QuantumCode

    code = QuantumCode(1, 2, {(1,): rho, (-1,): rho})
    rows = dict((y, p) for p, y in build_randomized_code(code, "ZZ").rows((1,)))
    assert rows == {(1, 1): pytest.approx(0.5), (-1, -1): pytest.approx(0.5)}
    rows = dict((y, p) for p, y in build_randomized_code(code, "ZI").rows((1,)))
    assert set(y[1] for y in rows) == {1}


def test_parity_decoder_uses_signs():
    code = as_quantum_code(ClassicalCode(1, 2, {(1,): (-1, 1), (-1,): (1, 1)}))
    fam = assign_signs(code, MatchingFamily(2, (((0,),),)), "ZZ")
    assert fam.signs[(0, (0,))] == -1
    dec = build_parity_decoder(fam)
    rcode = build_randomized_code(code, "ZZ")
    assert success_classical(rcode, dec, 0) == 1
    with pytest.raises(ReductionError):
        build_parity_decoder(MatchingFamily(2, (((0,),),)))


def test_reduction_on_basis_meets_guarantee():
    code, dec = basis_code(2)
    red = reduce_smooth_quantum(code, dec, (1, 2, F(1, 2)))
    assert red.search.s_star == "ZZ" and red.guarantee_ok
    assert red.claimed.as_tuple() == (1, 4, F(1, 32))
    assert red.verification.holds
    assert all(s == pytest.approx(1) for s in red.successes)


# -- derandomization ---------------------------------------------------------------


def noisy_bit(p_right):
    table = {(b,): ((p_right, (b,)), (1 - p_right, (-b,))) for b in (1, -1)}
    plan = QueryPlan(1, 1, 1, ((((0,), F(1)),),))
    return RandomizedCode(1, 1, table), ClassicalDecoder(plan, {(0, (0,)): SignedParity(1)})


def test_derandomize_deterministic_code():
    code, dec = hadamard_code(2)
    res = derandomize(RandomizedCode.from_classical(code), dec, eps=F(1, 2))
    assert res.coupling.cells == 1 and res.good_indices == [0, 1]
    assert res.code == code


def test_derandomize_two_word_rows():
    rcode, dec = noisy_bit(F(3, 4))
    res = derandomize(rcode, dec, eps=F(1, 4))
    assert res.coupling.breakpoints == (0, F(3, 4), 1)
    assert res.counts == [1, 0]
    assert res.cell == 0 and res.good_indices == [0]
    assert res.expected_count == F(3, 4)
    assert res.code.table == {(1,): (1,), (-1,): (-1,)}


def test_derandomize_requires_twice_eps():
    rcode, dec = noisy_bit(F(3, 4))
    with pytest.raises(DerandomizationError):
        derandomize(rcode, dec, eps=F(1, 3))


def test_coupling_reproduces_rows():
    rcode, _ = noisy_bit(F(2, 5))
    coupling = build_coupling(rcode)
    for x in all_words(1):
        assert coupling.row(x) == {y: p for p, y in rcode.rows(x)}


@st.composite
def random_randomized_code(draw):
    n = draw(st.integers(1, 2))
    m = draw(st.integers(1, 2))
    words = all_words(m)
    table = {}
    for x in all_words(n):
        weights = [draw(st.integers(0, 4)) for _ in words]
        if not any(weights):
            weights[0] = 1
        total = sum(weights)
        table[x] = tuple((F(w, total), y) for w, y in zip(weights, words) if w)
    dists, fns = [], {}
    for i in range(n):
        r = (draw(st.integers(0, m - 1)),)
        dists.append(((r, F(1)),))
        fns[(i, r)] = SignedParity(draw(st.sampled_from([1, -1])))
    return RandomizedCode(n, m, table), ClassicalDecoder(QueryPlan(n, m, 1, tuple(dists)), fns)


@settings(max_examples=60, deadline=None)
@given(random_randomized_code())
def test_derandomization_averaging_identity(pair):
    rcode, dec = pair
    biases = [2 * success_classical(rcode, dec, i) - 1 for i in range(rcode.n)]
    assume(min(biases) >= 0)
    eps = min(biases) / 2
    res = derandomize(rcode, dec, eps=eps)
    coupling = res.coupling
    for i in range(rcode.n):
        avg = sum(coupling.weight(k) * res.cell_biases[k][i] for k in range(coupling.cells))
        assert avg == res.input_biases[i]
    assert res.expected_count >= eps * rcode.n
    assert len(res.good_indices) >= math.ceil(eps * rcode.n)
    assert len(res.good_indices) == max(res.counts)


# -- smooth <-> LDC ----------------------------------------------------------------


def test_smooth_to_ldc_examples():
    assert smooth_to_ldc((2, 3, F(2, 5)), F(1, 10)).as_tuple() == (2, F(1, 10), F(1, 10))
    assert smooth_to_ldc((2, 3, F(2, 5)), 0).as_tuple() == (2, 0, F(2, 5))
    p = smooth_to_ldc(CodeParams("smooth", 1, 2, F(1, 2)), F(1, 4))
    assert p.kind == "ldc" and p.eps == 0
    with pytest.raises(ReductionError):
        smooth_to_ldc((2, 3, F(2, 5)), F(1, 5))


@given(st.fractions(0, 1), st.fractions(0, 1))
def test_smooth_to_ldc_monotone(d1, d2):
    base = (2, 3, F(1, 2))
    lo, hi = sorted((d1, d2))
    if hi * 3 > F(1, 2):
        return
    assert smooth_to_ldc(base, lo).eps >= smooth_to_ldc(base, hi).eps


def test_ldc_to_smooth_without_heavy_positions():
    code, dec = hadamard_code(1)
    new_dec, params, rep = ldc_to_smooth(code, dec, (2, F(1, 2), F(1, 2)))
    assert rep.heavy == [[]] and rep.threshold == 2
    assert params.as_tuple() == (2, 4, F(1, 2))
    assert new_dec.plan == dec.plan


def test_ldc_to_smooth_drops_heavy_position():
    code = ClassicalCode(2, 4, {x: (x[0], x[0], x[1], x[1]) for x in all_words(2)})
    plan = QueryPlan(2, 4, 1, ((((0,), F(1)),), (((2,), F(1, 2)), ((3,), F(1, 2)))))
    dec = ClassicalDecoder(plan, {(0, (0,)): SignedParity(1), (1, (2,)): SignedParity(1), (1, (3,)): SignedParity(1)})
    new_dec, params, rep = ldc_to_smooth(code, dec, (1, F(1, 2), F(1, 2)))
    assert rep.heavy == [[0], []]
    assert rep.threshold == F(1, 2)
    assert new_dec.plan.sets(0) == (((), F(1)),)
    assert new_dec.output_fns[(0, ())] == Constant(0)
    assert success_classical(code, new_dec, 0) == F(1, 2)
    assert success_classical(code, new_dec, 1) == 1
    for i in range(2):
        assert max(query_marginal(new_dec.plan, i)) <= rep.threshold


def test_ldc_to_smooth_matches_maximally_mixed_replacement():
    seen_heavy = False
    for inst in smooth_corpus(12):
        code, dec = inst.code, inst.decoder
        new_dec, _, rep = ldc_to_smooth(code, dec, (dec.plan.q, F(1), F(1, 100)))
        for i in range(code.n):
            seen_heavy |= bool(rep.heavy[i])
            assert max(query_marginal(new_dec.plan, i)) <= rep.threshold
            for x in all_words(code.n):
                mixed = replace_with_maximally_mixed(code[x], rep.heavy[i])
                assert new_dec.expectation(i, code[x]) == pytest.approx(dec.expectation(i, mixed), abs=1e-10)
    assert seen_heavy


def test_ldc_to_smooth_rejects_zero_delta():
    code, dec = basis_code(2)
    with pytest.raises(ReductionError):
        ldc_to_smooth(code, dec, (1, 0, F(1, 2)))


# -- pipelines -----------------------------------------------------------------------


def test_corollary_formulas():
    assert corollary_rldc_eps(1, F(1, 2), F(1, 2), 0) == F(1, 32)
    assert corollary_rldc_eps(1, F(1, 2), F(1, 2), F(1, 128)) == 0
    assert corollary_ldc_eps(1, F(1, 2), F(1, 2), 0) == F(1, 64)
    assert good_index_floor(F(1, 2), 2, 1) == 1
    assert good_index_floor(F(1, 2), 64, 1) == 2


def test_planned_stages():
    rows = planned_stages((1, F(1, 2), F(1, 2)), target="ldc")
    assert [label for label, _, _ in rows] == ["ldqc", "smooth-quantum", "mu-randomized-smooth", "mu-smooth", "mu-ldc"]
    assert rows[-1][1].eps == F(1, 64)
    with pytest.raises(ReductionError):
        planned_stages((1, F(1, 2), F(1, 2)), target="nope")


def test_pipelines_on_basis_code():
    code, dec = basis_code(2)
    res = pipeline_ldqc_to_rldc(code, dec, (1, F(1, 2), F(1, 2)))
    assert res.reduction.search.s_star == "ZZ"
    assert res.final_params.eps == res.formula_eps == F(1, 32)
    assert res.final_verification.holds
    ldc = pipeline_ldqc_to_ldc(code, dec, (1, F(1, 2), F(1, 2)))
    assert ldc.final_params.eps == F(1, 64)
    assert len(ldc.derandomized.good_indices) >= good_index_floor(F(1, 2), 2, 1)
    assert ldc.final_verification.holds


def test_pipeline_delta_prime_bound():
    code, dec = basis_code(2)
    with pytest.raises(ReductionError):
        pipeline_ldqc_to_rldc(code, dec, (1, F(1, 2), F(1, 2)), delta_prime=F(1, 64))
    with pytest.raises(ReductionError):
        pipeline_ldqc_to_ldc(code, dec, (1, F(1, 2), F(1, 2)), delta_prime=F(1, 128))


def test_pipeline_reports_search_failure():
    code, dec = qrac_2to1()
    with pytest.raises(PauliSearchFailure) as info:
        pipeline_ldqc_to_rldc(code, dec, CodeParams("ldqc", 1, 1, F(7, 20)), verify_input=False)
    assert not info.value.result.reduction.search.success
    assert "best per index" in str(info.value)
