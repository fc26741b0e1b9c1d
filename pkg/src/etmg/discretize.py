"""Zero-order-hold discretization via the matrix exponential."""

from __future__ import annotations

import numpy as np
import scipy.linalg


def expm(M: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Pade approximant)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("expm input contains NaN or Inf")
    return scipy.linalg.expm(M)


def zoh_discretize(A: np.ndarray, B: np.ndarray, E: np.ndarray, dt: float):
    """Exact discretization of ``dx/dt = A x + B u + E d`` with inputs held over ``dt``.

    Uses the exponential of the augmented matrix ``[[A, [B E]], [0, 0]] * dt``;
    the top-right block equals ``int_0^dt expm(A s) ds @ [B E]``.

    Returns ``(A_d, B_d, E_d)``.
    """
    if not dt > 0:
        raise ValueError(f"sample time must be positive, got {dt}")
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    E = np.asarray(E, dtype=float).reshape(A.shape[0], -1)
    n, m_b, m_e = A.shape[0], B.shape[1], E.shape[1]
    m = m_b + m_e
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A
    M[:n, n : n + m_b] = B
    M[:n, n + m_b :] = E
    Phi = expm(M * dt)
    return Phi[:n, :n], Phi[:n, n : n + m_b], Phi[:n, n + m_b :]
