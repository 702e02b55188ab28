"""Independent oracles shared by the unit and acceptance tests, plus the acceptance result log."""

import numpy as np

from lrom.clustering import variance

ACCEPTANCE = []  # (criterion, passed, detail), printed in the terminal summary


def record(criterion, passed, detail):
    line = f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE.append((criterion, bool(passed), line))
    print(line)
    return bool(passed)


def reassignment_optimal(model):
    """No single point can move to another cluster (with centroids recomputed) and lower the variance."""
    P, a, k = model.points, model.assignment, model.k
    v0 = variance(model)
    for i in range(len(P)):
        for c in range(k):
            if c == a[i] or np.sum(a == a[i]) == 1:
                continue
            b = a.copy()
            b[i] = c
            cen = np.stack([P[b == j].mean(axis=0) for j in range(k)])
            if np.sum((P - cen[b]) ** 2) < v0 - 1e-12 * max(v0, 1.0):
                return False
    return True
