"""Small dense eigenproblems via the characteristic polynomial.

Matrices up to 4x4 are shifted by their mean eigenvalue (trace / n), the
characteristic polynomial is formed with the Faddeev-LeVerrier recursion,
and its roots are found with Aberth-Ehrlich iteration followed by Newton
polishing. ``numpy.linalg.eigvals`` (Hessenberg QR) serves as the
independent cross-check in the tests.
"""

from __future__ import annotations

import numpy as np

from qdyn.errors import InputDomainError

REAL_TOL = 1e-10


def charpoly(a):
    """Monic characteristic polynomial coefficients, highest degree first."""
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    m = np.zeros_like(a)
    eye = np.eye(n)
    for k in range(1, n + 1):
        m = a @ m + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(a @ m) / k
    return coeffs


def _horner(coeffs, z):
    p = 0j
    dp = 0j
    for c in coeffs:
        dp = dp * z + p
        p = p * z + c
    return p, dp


def poly_roots(coeffs, tol=1e-15, max_iter=500):
    """All complex roots of a polynomial (highest degree first)."""
    c = np.asarray(coeffs, dtype=np.complex128)
    c = c / c[0]
    n = c.size - 1
    if n == 0:
        return np.zeros(0, dtype=np.complex128)
    if c[-1] == 0:
        # exact zero roots (e.g. a scalar matrix after the trace shift)
        return np.concatenate([poly_roots(c[:-1], tol, max_iter), [0j]])
    if n == 1:
        return np.array([-c[1]])
    # Cauchy bound for the initial circle; offset angle avoids symmetric stalls
    radius = 1.0 + np.max(np.abs(c[1:]))
    z = radius * 0.5 * np.exp(1j * (2.0 * np.pi * np.arange(n) / n + 0.4))
    for _ in range(max_iter):
        biggest = 0.0
        for k in range(n):
            p, dp = _horner(c, z[k])
            if p == 0:
                continue
            ratio = p / dp if dp != 0 else p
            repulse = np.sum(1.0 / (z[k] - np.delete(z, k)))
            step = ratio / (1.0 - ratio * repulse)
            z[k] -= step
            biggest = max(biggest, abs(step) / max(1.0, abs(z[k])))
        if biggest < tol:
            break
    for k in range(n):
        for _ in range(3):
            p, dp = _horner(c, z[k])
            if dp == 0:
                break
            z[k] -= p / dp
    return z


def eigenvalues(matrix):
    """Eigenvalues of a real square matrix of dimension 2, 3 or 4.

    Returned sorted by decreasing modulus; eigenvalues whose imaginary part
    is below ``REAL_TOL`` (relative) are snapped to the real axis and
    complex ones are returned as exact conjugate pairs.
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] not in (2, 3, 4):
        raise InputDomainError(f"need a square matrix of dimension 2-4, got {a.shape}")
    n = a.shape[0]
    shift = np.trace(a) / n
    roots = poly_roots(charpoly(a - shift * np.eye(n))) + shift
    scale = max(1.0, np.max(np.abs(roots)))
    lam = []
    used = np.zeros(n, dtype=bool)
    order = np.argsort(-np.abs(roots.imag))
    for k in order:
        if used[k]:
            continue
        used[k] = True
        z = roots[k]
        if abs(z.imag) <= REAL_TOL * scale:
            lam.append(complex(z.real, 0.0))
            continue
        # pair with the closest remaining root to the conjugate
        rest = [j for j in range(n) if not used[j]]
        j = min(rest, key=lambda j: abs(roots[j] - np.conj(z)))
        used[j] = True
        re = 0.5 * (z.real + roots[j].real)
        im = 0.5 * (abs(z.imag) + abs(roots[j].imag))
        lam.extend([complex(re, im), complex(re, -im)])
    lam = np.array(lam, dtype=np.complex128)
    return lam[np.lexsort((-lam.imag, -lam.real, -np.round(np.abs(lam), 12)))]
