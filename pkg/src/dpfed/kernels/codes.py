"""Integer codes shared by the cost kernels and their callers."""

SCAN, FILTER, PROJECT, JOIN, CROSS, DISTINCT, SORT, LIMIT, COUNT, GROUP_COUNT = range(10)

RAM, CIRCUIT = 0, 1

# unit-cost curves for secure-array accesses
CONSTANT, LOG2, LINEAR_LOG2_SQUARED = 0, 1, 2
