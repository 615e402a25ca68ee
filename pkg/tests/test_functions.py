"""Function/relation tables, generators, error protocols, GOOD sets."""

import numpy as np
import pytest

from commlab import (
    ColoredFunction,
    Cover,
    DomainShape,
    ErrorProtocol,
    GenerationFailureError,
    InvalidInputError,
    Protocol,
    TranscriptSelector,
    approx_xor_relation,
    constant_function,
    eq_function,
    error_protocol_from_cover,
    error_rate,
    gen_cover,
    gen_function,
    good_set,
    matvec_function,
    monochromatic_color,
    random_bounded_cover,
    random_function,
    thickness,
    trivial_merlin_cover,
    validate_cover,
    xor_function,
)
from commlab.core import box

from naive import enumerate_all_boxes


def test_xor1_table():
    f = xor_function(1)
    assert f.colors.tolist() == [[0, 1], [1, 0]]


def test_eq1_table():
    f = eq_function(1)
    assert f.colors.tolist() == [[1, 0], [0, 1]]


def test_matvec_identity_example():
    # x1=(1,0) -> 1, x2=(0,1) -> 2 (little-endian), x3=(1,1) -> 3
    f = matvec_function(3, 2)
    assert f.shape.sizes == (4, 4, 4)
    assert int(f.colors[1, 2, 3]) == 3  # columns e1,e2 times (1,1) = (1,1)
    assert int(f.colors[1, 2, 1]) == 1  # picks column 1 only
    assert int(f.colors[1, 2, 0]) == 0  # zero coefficient vector


def test_matvec_surjective_colors():
    f = matvec_function(3, 2)
    assert f.num_colors == 4
    assert sorted(np.unique(f.colors)) == [0, 1, 2, 3]


def test_random_function_deterministic_and_contiguous():
    shape = DomainShape((4, 4))
    f1 = random_function(shape, 5, seed=11)
    f2 = random_function(shape, 5, seed=11)
    assert np.array_equal(f1.colors, f2.colors)
    assert np.array_equal(
        np.unique(f1.colors), np.arange(f1.num_colors)
    )
    f3 = random_function(shape, 5, seed=12)
    assert not np.array_equal(f1.colors, f3.colors)


def test_colored_function_rejects_gaps():
    shape = DomainShape((2, 2))
    with pytest.raises(InvalidInputError):
        ColoredFunction(shape, np.array([[0, 2], [2, 0]]))


def test_approx_xor_delta_zero_singletons():
    rel = approx_xor_relation(2, 0.0)
    for x in range(4):
        for y in range(4):
            assert rel.admissible_ids((x, y)) == (x ^ y,)


def test_approx_xor_delta_one_everything():
    rel = approx_xor_relation(2, 1.0)
    for x in range(4):
        for y in range(4):
            assert rel.admissible_ids((x, y)) == (0, 1, 2, 3)


def test_approx_xor_half_ball_size():
    rel = approx_xor_relation(2, 0.5)  # radius 1 Hamming ball: 1 + C(2,1) = 3
    for x in range(4):
        for y in range(4):
            assert len(rel.admissible_ids((x, y))) == 3


def test_gen_relation_delta_out_of_range():
    from commlab import gen_relation

    with pytest.raises(InvalidInputError):
        gen_relation("approx-xor", n=2, delta=1.5)


def test_trivial_merlin_cover_properties():
    f = xor_function(1)
    cover = gen_cover("trivial-merlin", target=f)
    assert cover.num_boxes == 4
    assert validate_cover(cover).is_partition
    assert thickness(cover) == 1
    for b in cover.boxes:
        assert b.num_cells == 1
        assert monochromatic_color(b, f) is not None


def test_windmill_gen():
    cover = gen_cover("windmill")
    assert cover.num_boxes == 5
    assert validate_cover(cover).is_partition


def test_random_bounded_respects_cap():
    for seed in range(25):
        shape = DomainShape((4, 4))
        cover = random_bounded_cover(shape, rho_max=2, extra=3, seed=seed)
        assert validate_cover(cover).covers_domain
        assert thickness(cover) <= 2


def test_random_bounded_deterministic():
    shape = DomainShape((4, 8))
    c1 = random_bounded_cover(shape, rho_max=3, extra=4, seed=9)
    c2 = random_bounded_cover(shape, rho_max=3, extra=4, seed=9)
    assert [b.masks for b in c1.boxes] == [b.masks for b in c2.boxes]


def test_random_bounded_reports_failure_with_seed():
    # under rho_max=1 any extra box collides with the base partition
    shape = DomainShape((2, 2))
    with pytest.raises(GenerationFailureError) as err:
        random_bounded_cover(shape, rho_max=1, extra=1, seed=13)
    assert err.value.seed == 13


def test_monochromatic_color_function_cases():
    shape = DomainShape((2, 2))
    full = box(shape, [0, 1], [0, 1])
    assert monochromatic_color(full, constant_function(shape)) == 0
    assert monochromatic_color(full, xor_function(1)) is None


def test_monochromatic_color_relation_smallest():
    rel = approx_xor_relation(2, 0.5)
    shape = rel.shape
    singleton = box(shape, [0], [0])
    # ball of radius 1 around 00: {00, 01, 10}; smallest id is 0
    assert monochromatic_color(singleton, rel) == 0
    # whole domain has no common admissible value
    assert monochromatic_color(box(shape, range(4), range(4)), rel) is None


def test_xor_has_no_multicell_monochromatic_box():
    # exhaustive over every box with more than one cell, n <= 2
    for n in (1, 2):
        f = xor_function(n)
        size = 1 << n
        for rows, cols in enumerate_all_boxes(size, size):
            if len(rows) * len(cols) <= 1:
                continue
            b = box(f.shape, rows, cols)
            assert monochromatic_color(b, f) is None
    # n = 3: any multicell box contains a 2-cell sub-box, so 2-cell suffices
    f = xor_function(3)
    for x1 in range(8):
        for x2 in range(8):
            for y in range(8):
                if x1 < x2:
                    assert monochromatic_color(box(f.shape, [x1, x2], [y]), f) is None
                    assert monochromatic_color(box(f.shape, [y], [x1, x2]), f) is None


def test_good_set_all_cells_for_monochromatic_cover():
    f = xor_function(1)
    protocol = Protocol(trivial_merlin_cover(f.shape), TranscriptSelector.min_index())
    ep = error_protocol_from_cover(protocol, f)
    assert good_set(ep, f) == {(x, y) for x in range(2) for y in range(2)}
    assert error_rate(ep, f) == 0.0


def test_good_set_single_disagreement():
    f = xor_function(1)
    protocol = Protocol(trivial_merlin_cover(f.shape), TranscriptSelector.min_index())
    ep = error_protocol_from_cover(protocol, f)
    g_a = ep.g_a.copy()
    bad_box = 3  # singleton box of cell (1, 1)
    g_a[1, bad_box] = 1 - g_a[1, bad_box]
    ep2 = ErrorProtocol(protocol, g_a, ep.g_b)
    cells = {(x, y) for x in range(2) for y in range(2)}
    assert good_set(ep2, f) == cells - {(1, 1)}
    assert error_rate(ep2, f) == 0.25


def test_good_set_relation_delta_one():
    rel = approx_xor_relation(1, 1.0)
    protocol = Protocol(trivial_merlin_cover(rel.shape), TranscriptSelector.min_index())
    n_boxes = protocol.cover.num_boxes
    g = np.zeros((2, n_boxes), dtype=np.int64)  # constant answer everywhere
    ep = ErrorProtocol(protocol, g, g)
    assert len(good_set(ep, rel)) == rel.shape.num_cells


def test_error_protocol_requires_defined_entries():
    f = xor_function(1)
    protocol = Protocol(trivial_merlin_cover(f.shape), TranscriptSelector.min_index())
    g_a = np.full((2, 4), -1, dtype=np.int64)
    g_b = np.zeros((2, 4), dtype=np.int64)
    with pytest.raises(InvalidInputError):
        ErrorProtocol(protocol, g_a, g_b)


def test_error_protocol_from_nonmonochromatic_cover_rejected():
    f = xor_function(1)
    shape = f.shape
    full = box(shape, [0, 1], [0, 1])
    protocol = Protocol(Cover(shape, (full,)), TranscriptSelector.min_index())
    with pytest.raises(InvalidInputError):
        error_protocol_from_cover(protocol, f)


def test_gen_function_dispatcher():
    assert gen_function("xor", n=2).num_colors == 4
    assert gen_function("constant", shape=DomainShape((2, 2))).num_colors == 1
    with pytest.raises(InvalidInputError):
        gen_function("nope")
