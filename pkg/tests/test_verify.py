"""Inequality checkers, AM analysis, and the batch runner."""

import numpy as np
import pytest

from commlab import (
    AMProtocol,
    Box,
    Cover,
    DegenerateInstanceError,
    DomainShape,
    ErrorProtocol,
    InvalidInputError,
    JointDistribution,
    Protocol,
    ProtocolTree,
    SuiteConfig,
    TranscriptSelector,
    TreeLeaf,
    TreeSplit,
    am_analyze,
    batch_experiment,
    build_profile,
    check_deterministic_monotonicity,
    check_ic,
    check_main_inequality,
    check_multiparty,
    check_transcript_bound,
    constant_function,
    error_protocol_from_cover,
    parity_tightness_protocol,
    trivial_merlin_am,
    trivial_merlin_cover,
    xor_function,
)
from commlab.core import box
from commlab.verify import run_suite_row


def diag_dist(shape):
    return JointDistribution.from_cells(shape, {(0, 0): 0.5, (1, 1): 0.5})


def alice_sends_x():
    shape = DomainShape((2, 2))
    cover = Cover(shape, (box(shape, [0], [0, 1]), box(shape, [1], [0, 1])))
    return Protocol(cover, TranscriptSelector.min_index())


def single_full_box():
    shape = DomainShape((2, 2))
    return Protocol(
        Cover(shape, (box(shape, [0, 1], [0, 1]),)), TranscriptSelector.min_index()
    )


# ---------------------------------------------------------------------------
# Main inequality


def test_main_margin_tree_partition_diagonal():
    protocol = alice_sends_x()
    profile = build_profile(diag_dist(protocol.shape), protocol)
    report = check_main_inequality(profile)
    assert report.margin == pytest.approx(1.0, abs=1e-9)
    assert report.components["log2_rho"] == 0.0


def test_main_margin_parity_tight():
    protocol = parity_tightness_protocol(1)
    profile = build_profile(JointDistribution.uniform(protocol.shape), protocol)
    report = check_main_inequality(profile, rho_mode="global")
    assert abs(report.margin) <= 1e-9
    assert profile["I(X0:X1:T)"] == pytest.approx(-1.0, abs=1e-9)


def test_main_margin_single_box_zero():
    protocol = single_full_box()
    profile = build_profile(JointDistribution.uniform(protocol.shape), protocol)
    assert check_main_inequality(profile).margin == pytest.approx(0.0, abs=1e-9)


def test_rho_modes_differ_on_mixed_cover():
    # one overlapping pair plus untouched singleton rows: the expected mode
    # weights the thin boxes, global uses the worst cell
    shape = DomainShape((2, 2))
    full = box(shape, [0, 1], [0, 1])
    cover = Cover(shape, (full, full, box(shape, [0], [0, 1])))
    protocol = Protocol(cover, TranscriptSelector.explicit([2, 2, 0, 1]))
    profile = build_profile(JointDistribution.uniform(shape), protocol)
    r_global = check_main_inequality(profile, "global")
    r_box = check_main_inequality(profile, "max-box")
    r_exp = check_main_inequality(profile, "expected")
    assert r_global.components["log2_rho"] == pytest.approx(np.log2(3), abs=1e-12)
    assert r_box.components["log2_rho"] == pytest.approx(np.log2(3), abs=1e-12)
    # half the mass sits on the thickness-3 singleton-row box
    assert r_exp.components["log2_rho"] == pytest.approx(np.log2(3), abs=1e-12)


def test_rho_mode_expected_weighting():
    protocol = parity_tightness_protocol(1)
    profile = build_profile(JointDistribution.uniform(protocol.shape), protocol)
    assert profile.expected_log_rho == pytest.approx(1.0, abs=1e-12)
    assert check_main_inequality(profile, "expected").margin == pytest.approx(
        0.0, abs=1e-9
    )


def test_main_requires_two_party():
    shape = DomainShape((2, 2, 2))
    protocol = Protocol(trivial_merlin_cover(shape), TranscriptSelector.min_index())
    profile = build_profile(JointDistribution.uniform(shape), protocol)
    with pytest.raises(InvalidInputError):
        check_main_inequality(profile)


# ---------------------------------------------------------------------------
# Transcript bound


def test_transcript_xor_singletons_tight():
    f = xor_function(1)
    protocol = Protocol(trivial_merlin_cover(f.shape), TranscriptSelector.min_index())
    profile = build_profile(JointDistribution.uniform(f.shape), protocol, target=f)
    report = check_transcript_bound(profile, "function")
    assert report.margin == pytest.approx(0.0, abs=1e-9)
    assert report.components["H(T)"] == pytest.approx(2.0, abs=1e-12)


def test_transcript_constant_function():
    shape = DomainShape((2, 2))
    f = constant_function(shape)
    protocol = single_full_box()
    profile = build_profile(JointDistribution.uniform(shape), protocol, target=f)
    assert check_transcript_bound(profile, "function").margin == pytest.approx(
        0.0, abs=1e-9
    )


def test_transcript_relation_delta_zero_matches_function():
    from commlab import approx_xor_relation

    rel = approx_xor_relation(2, 0.0)
    f = xor_function(2)
    protocol = Protocol(trivial_merlin_cover(f.shape), TranscriptSelector.min_index())
    dist = JointDistribution.uniform(f.shape)
    p_rel = build_profile(dist, protocol, target=rel, f_mode="box-color")
    p_fun = build_profile(dist, protocol, target=f, f_mode="function")
    r_rel = check_transcript_bound(p_rel, "relation")
    r_fun = check_transcript_bound(p_fun, "function")
    assert r_rel.margin == pytest.approx(r_fun.margin, abs=1e-12)
    assert r_rel.components["H(F|X0)"] == pytest.approx(
        r_fun.components["H(F|X0)"], abs=1e-12
    )


def test_transcript_mode_validation():
    protocol = single_full_box()
    profile = build_profile(JointDistribution.uniform(protocol.shape), protocol)
    with pytest.raises(InvalidInputError):
        check_transcript_bound(profile, "function")  # no F in profile


# ---------------------------------------------------------------------------
# Information cost


def test_ic_alice_sends_x():
    protocol = alice_sends_x()
    profile = build_profile(JointDistribution.uniform(protocol.shape), protocol)
    identity, bound = check_ic(profile)
    assert profile["IC"] == pytest.approx(1.0, abs=1e-12)
    assert identity.components["gap"] <= 1e-9
    assert bound.margin == pytest.approx(0.0, abs=1e-9)


def test_ic_constant_transcript():
    protocol = single_full_box()
    profile = build_profile(JointDistribution.uniform(protocol.shape), protocol)
    identity, bound = check_ic(profile)
    assert identity.components["gap"] <= 1e-9
    assert bound.margin == pytest.approx(0.0, abs=1e-9)


def test_ic_parity_selector_brute_force():
    protocol = parity_tightness_protocol(1)
    profile = build_profile(JointDistribution.uniform(protocol.shape), protocol)
    identity, bound = check_ic(profile)
    assert profile["IC"] == pytest.approx(2.0, abs=1e-12)
    assert profile["H(T)"] == pytest.approx(1.0, abs=1e-12)
    assert profile["I(X0:X1:T)"] == pytest.approx(-1.0, abs=1e-9)
    assert identity.components["gap"] <= 1e-9
    assert bound.margin == pytest.approx(0.0, abs=1e-9)  # 1 + 1 - 2


# ---------------------------------------------------------------------------
# Multiparty


def test_multiparty_three_party_singletons_tight():
    shape = DomainShape((2, 2, 2))
    protocol = Protocol(trivial_merlin_cover(shape), TranscriptSelector.min_index())
    profile = build_profile(JointDistribution.uniform(shape), protocol)
    report = check_multiparty(profile, 3, "transcript-only")
    assert profile["H(T)"] == pytest.approx(3.0, abs=1e-12)
    assert report.margin == pytest.approx(0.0, abs=1e-9)


def test_multiparty_single_box_zero():
    shape = DomainShape((2, 2, 2))
    full = Box(((1 << 2) - 1,) * 3)
    protocol = Protocol(Cover(shape, (full,)), TranscriptSelector.min_index())
    profile = build_profile(JointDistribution.uniform(shape), protocol)
    report = check_multiparty(profile, 3, "transcript-only")
    assert report.margin == pytest.approx(0.0, abs=1e-9)


def test_multiparty_two_party_matches_ic_bound():
    protocol = parity_tightness_protocol(1)
    profile = build_profile(JointDistribution.uniform(protocol.shape), protocol)
    multi = check_multiparty(profile, 2, "transcript-only")
    _, ic_bound = check_ic(profile)
    assert multi.margin == pytest.approx(ic_bound.margin, abs=1e-12)


def test_multiparty_arity_mismatch():
    protocol = alice_sends_x()
    profile = build_profile(JointDistribution.uniform(protocol.shape), protocol)
    with pytest.raises(InvalidInputError):
        check_multiparty(profile, 3)


# ---------------------------------------------------------------------------
# Tree monotonicity


def full_communication_tree(shape):
    col_split = TreeSplit(1, 0b01, 0b10, TreeLeaf(), TreeLeaf())
    return ProtocolTree(shape, TreeSplit(0, 0b01, 0b10, col_split, col_split))


def test_monotonicity_full_tree_diagonal():
    shape = DomainShape((2, 2))
    report = check_deterministic_monotonicity(
        full_communication_tree(shape), diag_dist(shape)
    )
    assert report.margin == pytest.approx(1.0, abs=1e-9)


def test_monotonicity_alice_tree_any_dist():
    shape = DomainShape((2, 2))
    tree = ProtocolTree(shape, TreeSplit(0, 0b01, 0b10, TreeLeaf(), TreeLeaf()))
    rng = np.random.default_rng(3)
    for _ in range(20):
        dist = JointDistribution.random_integer_weights(shape, rng=rng)
        report = check_deterministic_monotonicity(tree, dist)
        assert report.margin >= -1e-9
        # I(X:Y|T) = I(X:Y|X) = 0, so the margin equals I(X:Y)
        assert report.margin == pytest.approx(report.components["I(X0:X1)"], abs=1e-9)


def test_monotonicity_independent_dist_zero():
    shape = DomainShape((2, 2))
    dist = JointDistribution.uniform(shape)
    for tree in (
        full_communication_tree(shape),
        ProtocolTree(shape, TreeSplit(0, 0b01, 0b10, TreeLeaf(), TreeLeaf())),
    ):
        report = check_deterministic_monotonicity(tree, dist)
        assert report.margin == pytest.approx(0.0, abs=1e-9)


# ---------------------------------------------------------------------------
# AM analysis


def test_am_trivial_merlin_xor2():
    f = xor_function(2)
    am = trivial_merlin_am(f)
    report = am_analyze(am, f)
    assert report.overall_error == 0.0
    assert report.cost == pytest.approx(4.0, abs=1e-12)  # log2(16)
    assert report.r0 == 0
    assert report.estimated_lower_bound == pytest.approx(4.0, abs=1e-9)
    assert report.restricted.components["H(F|X0)"] == pytest.approx(2.0, abs=1e-9)
    assert report.cost >= report.estimated_lower_bound - 1e-9


def test_am_two_branches_disjoint_error_quarters():
    f = constant_function(DomainShape((4, 4)))
    protocol = Protocol(trivial_merlin_cover(f.shape), TranscriptSelector.min_index())
    base = error_protocol_from_cover(protocol, f)

    def corrupt(rows):
        g_a = base.g_a.copy()
        for x in rows:
            for y in range(4):
                b = f.shape.linear_index((x, y))  # singleton box index == cell
                g_a[x, b] = 1 - g_a[x, b]
        return ErrorProtocol(protocol, g_a, base.g_b)

    am = AMProtocol((corrupt([0]), corrupt([1])))
    report = am_analyze(am, f, correctness_mode="uniform")
    assert report.branch_errors == (0.25, 0.25)
    assert report.good_sizes == (12, 12)
    assert report.r0 == 0
    assert report.overall_error == pytest.approx(0.25, abs=1e-12)


def test_am_constant_branch_on_xor1():
    f = xor_function(1)
    shape = f.shape
    protocol = Protocol(trivial_merlin_cover(shape), TranscriptSelector.min_index())
    g = np.zeros((2, 4), dtype=np.int64)  # both parties always answer 0
    am = AMProtocol((ErrorProtocol(protocol, g, g),))
    report = am_analyze(am, f)
    assert report.good_sizes == (2,)
    assert report.overall_error == pytest.approx(0.5, abs=1e-12)


def test_am_correctness_modes_disagree():
    # two branches: one perfect, one always wrong; per-input needs 2/3 of
    # branches so every cell fails, uniform averaging reports 1/2
    f = constant_function(DomainShape((2, 2)))
    protocol = Protocol(trivial_merlin_cover(f.shape), TranscriptSelector.min_index())
    base = error_protocol_from_cover(protocol, f)
    g_bad = np.ones_like(base.g_a)
    bad = ErrorProtocol(protocol, g_bad, g_bad)
    am = AMProtocol((base, bad))
    uniform = am_analyze(am, f, correctness_mode="uniform")
    per_input = am_analyze(am, f, correctness_mode="per-input")
    assert uniform.overall_error == pytest.approx(0.5, abs=1e-12)
    assert per_input.overall_error == pytest.approx(1.0, abs=1e-12)
    # note: bad branch outputs 1 == agreement, admissibility fails for f=0


def test_am_degenerate_empty_good():
    f = constant_function(DomainShape((2, 2)))
    protocol = Protocol(trivial_merlin_cover(f.shape), TranscriptSelector.min_index())
    g_bad = np.ones((2, 4), dtype=np.int64)
    am = AMProtocol((ErrorProtocol(protocol, g_bad, g_bad),))
    with pytest.raises(DegenerateInstanceError):
        am_analyze(am, f)


def test_am_r0_beats_average():
    rng = np.random.default_rng(9)
    f = xor_function(1)
    protocol = Protocol(trivial_merlin_cover(f.shape), TranscriptSelector.min_index())
    base = error_protocol_from_cover(protocol, f)
    branches = []
    for _ in range(5):
        g_a = base.g_a.copy()
        for x in range(2):
            if rng.random() < 0.5:
                b = int(rng.integers(4))
                g_a[x, b] = int(rng.integers(2))
        branches.append(ErrorProtocol(protocol, g_a, base.g_b))
    report = am_analyze(AMProtocol(tuple(branches)), f)
    assert report.good_sizes[report.r0] >= np.mean(report.good_sizes)


# ---------------------------------------------------------------------------
# Batch runner


def test_batch_small_main_suite_clean():
    config = SuiteConfig(suite="main", seeds=tuple(range(30)))
    result = batch_experiment(config)
    assert len(result.rows) == 30
    assert result.violations == 0
    assert result.max_chain_gap <= 1e-9
    assert result.max_triple_gap <= 1e-9
    assert result.max_ic_gap <= 1e-9
    assert result.min_margin_main >= -1e-9
    assert result.min_transcript_margin_given_main_ok >= -1e-9


def test_batch_empty_seed_list():
    result = batch_experiment(SuiteConfig(suite="main", seeds=()))
    assert result.rows == [] and result.violations == 0


def test_batch_rows_sorted_and_deterministic():
    config = SuiteConfig(suite="tree", seeds=(5, 1, 3))
    r1 = batch_experiment(config)
    r2 = batch_experiment(config)
    assert [row.seed for row in r1.rows] == [1, 3, 5]
    for a, b in zip(r1.rows, r2.rows):
        assert a.margin_main == b.margin_main
        assert a.instance_id == b.instance_id


def test_run_suite_row_multiparty():
    config = SuiteConfig(suite="multiparty", seeds=(), arity=3, max_bits=2)
    row, violations, stats = run_suite_row(config, 4)
    assert violations == []
    assert row.margin_main >= -1e-9
    assert stats["with_f_margin"] == pytest.approx(row.margin_main, abs=1e-9)


def test_reproducer_written_on_violation(tmp_path):
    # force the violation path with a negative tolerance: tight instances have
    # margin 0 < 0.5, so they get flagged and dumped
    config = SuiteConfig(
        suite="tree", seeds=(0, 1), tol=-0.5, out_dir=str(tmp_path)
    )
    result = batch_experiment(config)
    assert result.violations >= 1
    assert result.reproducers
    from commlab import load_instance
    from commlab.verify import analyze_instance

    # re-running a reproducer alone reproduces the flagged margin
    for path in result.reproducers:
        seed = int(path.rsplit("-", 1)[1].split(".")[0])
        original = next(r for r in result.rows if r.seed == seed)
        bundle = load_instance(path)
        assert bundle.distribution is not None and bundle.function is not None
        row, _ = analyze_instance(bundle)
        assert abs(row.margin_main - original.margin_main) <= 1e-12