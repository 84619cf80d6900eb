import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from liftc import ir
from liftc.errors import LiftError, NonPositiveStride, NonRectangularMatrix
from liftc.operators import builtin_registry, check_spec, kernel_grid, load_registry, load_spec_file, recursion_step

seqs = st.lists(st.integers(-10, 10), max_size=12).map(tuple)


def ref_conv(data, kernel, stride):
    k = len(kernel)
    return tuple(sum(data[j + t] * kernel[t] for t in range(k)) for j in range(0, len(data) - k + 1, stride))


def ref_matmul(a, b):
    return tuple(tuple(sum(r[k] * b[k][j] for k in range(len(b))) for j in range(len(b[0]))) for r in a)


def test_conv_length_law_exhaustive(registry):
    kernels = {1: (1,), 2: (1, -1), 3: (2, 0, 1)}
    for n in range(11):
        data = tuple(range(n))
        for k, kernel in kernels.items():
            for stride in (1, 2):
                out = registry.apply("conv1d", [data, kernel, stride])
                expected = (n - k) // stride + 1 if n >= k else 0
                assert len(out) == expected


@given(seqs, st.lists(st.integers(-2, 2), min_size=1, max_size=3).map(tuple), st.sampled_from([1, 2]))
def test_conv_matches_reference(data, kernel, stride):
    assert builtin_registry().apply("conv1d", [data, kernel, stride]) == ref_conv(data, kernel, stride)


@given(seqs)
def test_conv_identity(d):
    assert builtin_registry().apply("conv1d", [d, (1,), 1]) == d


@given(seqs, seqs)
def test_dot_symmetry(a, b):
    r = builtin_registry()
    assert r.apply("dot_product", [a, b]) == r.apply("dot_product", [b, a])
    assert r.apply("dot_product", [a, b]) == sum(x * y for x, y in zip(a, b))


@given(seqs, seqs, st.integers(-3, 3))
def test_pointwise(a, b, c):
    r = builtin_registry()
    assert r.apply("elemwise_add", [a, b]) == tuple(x + y for x, y in zip(a, b))
    assert r.apply("elemwise_mul", [a, b]) == tuple(x * y for x, y in zip(a, b))
    assert r.apply("scalar_scale", [a, c]) == tuple(c * x for x in a)


@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.randoms(use_true_random=False))
def test_matmul_reference(n, m, p, rnd):
    a = tuple(tuple(rnd.randint(-5, 5) for _ in range(m)) for _ in range(n))
    b = tuple(tuple(rnd.randint(-5, 5) for _ in range(p)) for _ in range(m))
    assert builtin_registry().apply("matmul", [a, b]) == ref_matmul(a, b)


def test_window_examples(registry):
    assert registry.apply("conv1d", [(1, 2, 3, 4), (1, 1), 1]) == (3, 5, 7)
    assert registry.apply("conv1d", [(1, 1, 1), (1, 2), 1]) == (3, 3)
    assert registry.apply("conv1d", [(5, 1, 4, 2, 3), (1, 0, -1), 2]) == (1, 1)


def test_argument_errors(registry):
    with pytest.raises(NonPositiveStride):
        registry.apply("conv1d", [(1, 2), (1,), 0])
    with pytest.raises(NonRectangularMatrix):
        registry.apply("matmul", [((1, 2), (3,)), ((1,), (2,))])


def test_kernel_grid():
    grid = kernel_grid()
    # lengths 1..3 over -2..2, minus the three all-zero kernels
    assert len(grid) == 5 + 25 + 125 - 3
    assert len(set(grid)) == len(grid)
    assert (1, 1) in grid and (1, 0, -1) in grid


def test_builtins_well_formed(registry):
    assert list(registry) == ["dot_product", "conv1d", "elemwise_add", "elemwise_mul",
                              "scalar_scale", "vecmat", "matmul"]
    for name in registry:
        check_spec(registry[name], registry)
    assert recursion_step(registry["conv1d"]) == "stride"
    assert recursion_step(registry["dot_product"]) == 1


SPEC = """
(operator prefix_sum ((a SeqInt)) SeqInt
  (body (ite (== (len a) 0) (seq SeqInt)
             (append (prefix_sum (slice a 0 (- (len a) 1)))
                     (+ (index a (- (len a) 1)) 0))))
  (decreasing a))
(operator twice ((a SeqInt)) SeqInt
  (body (scalar_scale a 2)))
"""


def test_load_spec_file(tmp_path):
    bad = load_spec_file(SPEC)
    assert [s.name for s in bad] == ["prefix_sum", "twice"]
    # a self-call on a prefix does not shrink from the front
    with pytest.raises(LiftError):
        load_registry([_write(tmp_path, SPEC)])
    ok = SPEC.split("(operator twice")[1]
    reg = load_registry([_write(tmp_path, "(operator twice" + ok)])
    assert reg.apply("twice", [(1, 2)]) == (2, 4)
    assert "conv1d" in reg


def _write(tmp_path, text):
    p = tmp_path / "ops.spec"
    p.write_text(text)
    return p


def test_exhaustive_small_conv_against_reference(registry):
    for n in range(5):
        for data in itertools.product((-1, 2), repeat=n):
            for kernel in kernel_grid(1, 2):
                assert registry.apply("conv1d", [data, kernel, 1]) == ref_conv(data, kernel, 1)
