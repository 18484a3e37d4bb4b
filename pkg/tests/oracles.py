"""Independent dense oracles used across the test modules.

Everything here is built straight from definitions (tridiagonal stencil
blocks, Kronecker sums, numpy eigendecompositions) so it shares no code
with the package's matrix-free paths.
"""

import numpy as np


def dense_laplacian(domain) -> np.ndarray:
    """Full matrix of the stencil Laplacian via a Kronecker sum."""
    blocks = []
    for n, h in zip(domain.sizes, domain.spacings):
        T = (
            np.diag(2.0 * np.ones(n))
            - np.diag(np.ones(n - 1), 1)
            - np.diag(np.ones(n - 1), -1)
        ) / h**2
        blocks.append(T)
    total = np.zeros((domain.node_count, domain.node_count))
    for i in range(len(blocks)):
        ops = [np.eye(n) for n in domain.sizes]
        ops[i] = blocks[i]
        K = ops[0]
        for M in ops[1:]:
            K = np.kron(K, M)
        total += K
    return total


def dense_eigh(domain):
    """Ascending eigenvalues and orthonormal (Euclidean) eigenvectors."""
    return np.linalg.eigh(dense_laplacian(domain))


def inverse_power_smallest(A: np.ndarray, tol: float = 1e-13, max_iter: int = 10000,
                           seed: int = 0) -> float:
    """Smallest eigenvalue by inverse power iteration with dense solves."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    lam_prev = None
    lam = 0.0
    for _ in range(max_iter):
        w = np.linalg.solve(A, v)
        w /= np.linalg.norm(w)
        lam = float(w @ A @ w)
        if lam_prev is not None and abs(lam - lam_prev) <= tol * abs(lam):
            return lam
        lam_prev, v = lam, w
    return lam


def eigen_coefficients(domain, flat_values: np.ndarray):
    """(eigenvalues, coefficients, weighted-orthonormal basis) from a dense solve."""
    w, V = dense_eigh(domain)
    Vw = V / np.sqrt(domain.cell_volume)
    c = domain.cell_volume * (Vw.T @ flat_values)
    return w, c, Vw
