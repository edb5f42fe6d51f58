"""Size caps and tolerances.

All caps are module-level constants so that callers (and tests) can read
them instead of repeating literals.
"""

# kernels
PERMANENT_MAX_N = 24
PERMANENT_NAIVE_MAX_N = 9
INTERFERENCE_MAX_N = 9
DERANGEMENT_SUM_MAX_N = 13
DERANGEMENT_BRUTEFORCE_MAX_N = 7

# symgroup
CHARACTER_TABLE_MAX_N = 10
SUBFACTORIAL_MAX_N = 10_000

# models
GRAM_MAX_N = 6
THRESHOLD_BITS = 40
FLOAT_POSITIVITY_TOL = 1e-12

# probability
BRUTEFORCE_MAX_N = 7
CONVEX_SUM_MAX_N = 9
REARRANGED_MAX_N = 9
DISTRIBUTION_MAX_CONFIGS = 10**6
IMAG_WARN_REL = 1e-9
IMAG_ERROR_REL = 1e-6

# characters
IMMANANT_MAX_N = 9

# montecarlo
NEGATIVITY_MAX_N = 12
MOMENT_MAX_N = 6
TVD_MAX_N = 5
TVD_MAX_CONFIGS = 10**5
SAMPLE_MODEL_MAX_N = 7
UNITARY_TOL = 1e-10
