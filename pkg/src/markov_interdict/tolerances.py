"""Numerical tolerances shared by the library and the test-suite."""

#: Relative tolerance used to decide that two path lengths are equal.
TIE_RTOL = 1e-12

#: Allowed deviation of a probability vector (or row) sum from one.
PROB_SUM_ATOL = 1e-12

#: Flow-conservation and cost-decomposition checks on evaluation results.
EVAL_ATOL = 1e-10

#: Dense factorisation is used up to this many transient states; larger
#: systems fall back to fixed-point iteration.
DENSE_SOLVE_MAX = 2000

#: Convergence tolerance and iteration cap of the fixed-point solver.
ITER_TOL = 1e-12
ITER_MAX = 1_000_000

#: Default probability floor below which cyclic path enumeration prunes.
MASS_FLOOR = 1e-12

#: Default cap on the number of subsets the exhaustive solver may visit.
EXHAUSTIVE_CAP = 1_000_000


def is_tie(a, b, rtol=TIE_RTOL):
    """True when `a` and `b` are equal up to `rtol` relative to their size."""
    return abs(a - b) <= rtol * max(1.0, abs(a), abs(b))
