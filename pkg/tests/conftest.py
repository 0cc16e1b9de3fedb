import numpy as np
import pytest
import scipy.linalg as sla

from piml import KernelConfig


@pytest.fixture(scope="session")
def spectral_unit():
    """Spectral kernel for L = 1, lam = mu = 1 at 512 modes (system assembled once)."""
    cfg = KernelConfig.one_d(1.0, 1.0, 1.0, backend="spectral", n_max=512)
    cfg.system.kernel_matrix
    return cfg


def fd_green(x0, lam, mu, L, nodes=10_000):
    """Independent oracle: lam f - (lam+mu) f'' = delta_{x0} on [-L, L], f'(+-L) = 0.

    Second-order finite differences with ghost-node Neumann ends; the delta
    is split between the two nodes around x0 by hat-function weights.
    Returns (grid, values).
    """
    grid = np.linspace(-L, L, nodes)
    h = grid[1] - grid[0]
    t = lam + mu
    off = np.full(nodes - 1, -t / h**2)
    rhs = np.zeros(nodes)
    i = min(int((x0 + L) // h), nodes - 2)
    w = (x0 - grid[i]) / h
    rhs[i] += (1 - w) / h
    rhs[i + 1] += w / h
    ab = np.zeros((3, nodes))
    ab[0, 1:] = off
    ab[1] = lam + 2 * t / h**2
    ab[2, :-1] = off
    # ghost node f_{-1} = f_1, row halved to keep the matrix symmetric
    ab[1, [0, -1]] = 0.5 * lam + t / h**2
    return grid, sla.solve_banded((1, 1), ab, rhs)


def nystrom_eigenvalues(cfg, kappa, panels=40, order=10):
    """Eigenvalues of L_K under the density ``kappa`` on omega, by Gauss-Legendre Nystrom.

    ``panels * order`` nodes on [-L, L]; returned in non-increasing order.
    """
    from piml.kernels import _gauss_nodes, kernel_matrix

    L = cfg.dom.L
    nodes, w = _gauss_nodes(np.linspace(-L, L, panels + 1), 0.0, order=order)
    root = np.sqrt(kappa * w)
    k = kernel_matrix(cfg, nodes, nodes)
    return np.linalg.eigvalsh(root[:, None] * k * root[None, :])[::-1]
