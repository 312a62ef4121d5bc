"""Hand-rolled oracles and small builders shared by the test modules.

The oracles deliberately avoid the library's vectorized kernels: plain
Python loops and math.sqrt, so an agreement test actually checks two
independent computations.
"""

import math

import numpy as np

from slidesim import MAGNIFICATIONS, PatchEmbedding, PatchRef

MAG_1X = MAGNIFICATIONS[0]


def make_embeddings(slide_id: str, matrix: np.ndarray, mag=MAG_1X) -> list[PatchEmbedding]:
    """Wrap the rows of a matrix as one slide's patch embeddings."""
    matrix = np.asarray(matrix, dtype=np.float32)
    return [
        PatchEmbedding(ref=PatchRef(slide_id, mag, i, 0, (0, i * 224)), vector=row)
        for i, row in enumerate(matrix)
    ]


def naive_cosine(u, v) -> float:
    dot = sum(float(a) * float(b) for a, b in zip(u, v))
    nu = math.sqrt(sum(float(a) ** 2 for a in u))
    nv = math.sqrt(sum(float(b) ** 2 for b in v))
    return dot / (nu * nv)


def naive_cosine_matrix(q: np.ndarray, r: np.ndarray) -> np.ndarray:
    out = np.empty((len(q), len(r)))
    for i in range(len(q)):
        for j in range(len(r)):
            out[i, j] = naive_cosine(q[i], r[j])
    return out


def naive_aggregate(values) -> float:
    """Mean of per-column maxima plus mean of per-row maxima, halved."""
    values = [[float(x) for x in row] for row in values]
    n_q = len(values)
    n_r = len(values[0])
    col_maxima = [max(values[i][j] for i in range(n_q)) for j in range(n_r)]
    row_maxima = [max(values[i][j] for j in range(n_r)) for i in range(n_q)]
    return 0.5 * (sum(col_maxima) / n_r + sum(row_maxima) / n_q)


def two_pass_stats(matrix: np.ndarray):
    """Componentwise mean and population standard deviation, loop style."""
    n, dim = matrix.shape
    mean = [sum(float(matrix[i, j]) for i in range(n)) / n for j in range(dim)]
    std = [
        math.sqrt(sum((float(matrix[i, j]) - mean[j]) ** 2 for i in range(n)) / n)
        for j in range(dim)
    ]
    return mean, std


def brute_force_selection(cv: np.ndarray, n_f: int) -> list[int]:
    """Top-n_f coefficients, ties to the lower index, reported ascending."""
    ranked = sorted(range(len(cv)), key=lambda j: (-cv[j], j))
    return sorted(ranked[:n_f])
