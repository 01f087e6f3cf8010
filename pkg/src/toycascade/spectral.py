"""Shifted Hessian operator at a three-mode minimizer and its exact spectrum.

The operator of interest is

    A = (14/11) m I + hessian_h(b*(m, k, theta)),

a real symmetric matrix of dimension 4N+2.  When the five-site neighbourhood
k-2..k+2 of the centre lies inside the lattice, its spectrum is exactly

    m * { -28/11, 0, 2/11 (x2), 12/11, 26/11 (x2), 40/11, 60/11, 8 }

on the ten coordinates of that neighbourhood, plus m * 14/11 with
multiplicity 4N+2-10 on the remaining sites.  The negative direction is b*
itself, the null direction is i b*, and every direction orthogonal to both
satisfies the coercivity bound <A xi, xi> >= (2m/11) |xi|^2.

Centres touching the boundary (|k| = N-1) clip the neighbourhood and lose one
2/11 and one 26/11 eigenvalue; the catalogue above therefore applies to
interior centres |k| <= N-2 only, which is what ``catalogue_match`` checks.
"""

from dataclasses import dataclass

import numpy as np

from .errors import IterationFailure, NotSymmetric
from .lattice import (HessianMatrix, MinimizerId, hessian_h, interleave,
                      minimizer_state)

SHIFT_COEFF = 14.0 / 11.0

CENTER_BLOCK_COEFFS = (-28.0 / 11.0, 0.0, 2.0 / 11.0, 2.0 / 11.0, 12.0 / 11.0,
                       26.0 / 11.0, 26.0 / 11.0, 40.0 / 11.0, 60.0 / 11.0, 8.0)

JACOBI_MAX_DIM = 64


@dataclass(frozen=True)
class SpectralReport:
    shift: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, aligned with eigenvalues
    residuals: np.ndarray     # ||A v - lambda v|| per eigenpair
    classification: tuple | None = None

    @property
    def catalogue_match(self):
        if self.classification is None:
            return None
        return all(label != "unmatched" for label in self.classification)


def jacobi_eigh(matrix, tol=1e-14, max_sweeps=60):
    """Eigendecomposition of a small dense symmetric matrix by cyclic Jacobi.

    The input is symmetrized as A <- (A + A^T)/2 before sweeping.  Returns
    eigenvalues in ascending order with matching eigenvector columns; raises
    :class:`IterationFailure` if the off-diagonal mass does not vanish within
    ``max_sweeps`` sweeps.
    """
    A = np.array(matrix, dtype=float)
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    V = np.eye(n)
    scale = max(float(np.max(np.abs(A))), 1e-300)

    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * scale * n:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                A[[p, q], :] = rot.T @ A[[p, q], :]
                A[:, [p, q]] = A[:, [p, q]] @ rot
                V[:, [p, q]] = V[:, [p, q]] @ rot
    else:
        raise IterationFailure("Jacobi sweeps exhausted before convergence")

    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


def shifted_operator(half_width, m, center=0, theta=0.0):
    """(14/11) m I + hessian_h at the minimizer b*(m, center, theta)."""
    state = minimizer_state(MinimizerId(m, center, theta), half_width)
    hess = hessian_h(state)
    entries = SHIFT_COEFF * m * np.eye(hess.dim) + hess.entries
    return HessianMatrix(hess.dim, entries)


def hessprops_catalogue(half_width, m):
    """Sorted expected spectrum of the shifted operator at an interior centre."""
    dim = 4 * half_width + 2
    values = [m * c for c in CENTER_BLOCK_COEFFS] + [m * SHIFT_COEFF] * (dim - 10)
    return np.sort(np.array(values))


def classify_eigenvalues(eigenvalues, half_width, m, tol=None):
    """Greedily match sorted eigenvalues against the interior-centre catalogue."""
    tol = 1e-9 * m if tol is None else tol
    expected = hessprops_catalogue(half_width, m)
    labels = []
    names = {
        -28.0 / 11.0 * m: "negative",
        0.0: "null",
        SHIFT_COEFF * m: "bulk 14m/11",
    }
    for ev, ex in zip(np.sort(np.asarray(eigenvalues, float)), expected):
        if abs(ev - ex) <= tol:
            labels.append(names.get(ex, f"discrete {ex / m:.6g} m" if m != 0 else "discrete"))
        else:
            labels.append("unmatched")
    return tuple(labels)


def eigen_decompose(matrix, m=None, half_width=None, symmetry_tol=1e-10,
                    residual_tol=1e-10):
    """Full eigendecomposition of a (shifted) Hessian matrix with checks.

    Cyclic Jacobi is used up to dimension 64, LAPACK beyond.  Raises
    :class:`NotSymmetric` when the asymmetry exceeds ``symmetry_tol`` and
    :class:`IterationFailure` when any eigenpair residual ||Av - lambda v||
    exceeds ``residual_tol`` times the matrix scale.  When ``m`` is given the
    eigenvalues are classified against the interior-centre catalogue.
    """
    A = matrix.entries if isinstance(matrix, HessianMatrix) else np.asarray(matrix, float)
    asym = float(np.max(np.abs(A - A.T)))
    if asym > symmetry_tol:
        raise NotSymmetric(f"asymmetry {asym:.3e} exceeds {symmetry_tol:.1e}")
    A = 0.5 * (A + A.T)

    if A.shape[0] <= JACOBI_MAX_DIM:
        w, V = jacobi_eigh(A)
    else:
        w, V = np.linalg.eigh(A)

    residuals = np.linalg.norm(A @ V - V * w, axis=0)
    scale = max(float(np.max(np.abs(A))), 1e-300)
    if np.max(residuals) > residual_tol * scale:
        raise IterationFailure(f"eigenpair residual {np.max(residuals):.3e} too large")

    classification = None
    if m is not None:
        if half_width is None:
            half_width = (A.shape[0] - 2) // 4
        classification = classify_eigenvalues(w, half_width, m)
    return SpectralReport(
        shift=(SHIFT_COEFF * m if m is not None else None),
        eigenvalues=w,
        eigenvectors=V,
        residuals=residuals,
        classification=classification,
    )


@dataclass(frozen=True)
class CoercivityResult:
    ok: bool
    min_ratio: float
    witness: np.ndarray | None

    def __bool__(self):
        return self.ok


def coercivity_check(half_width, m, center=0, theta=0.0, trials=1000, seed=0,
                     tol=1e-10):
    """Check <A xi, xi> >= (2m/11)|xi|^2 - tol on random admissible xi.

    Directions are drawn isotropically and projected orthogonal to b* and
    i b* in the real inner product.  Returns a truthy result carrying the
    smallest observed Rayleigh-quotient margin and, on failure, a witness.
    """
    state = minimizer_state(MinimizerId(m, center, theta), half_width)
    A = shifted_operator(half_width, m, center, theta).entries
    u = interleave(state.amps)
    iu = interleave(1j * state.amps)
    u = u / np.linalg.norm(u)
    iu = iu / np.linalg.norm(iu)

    rng = np.random.default_rng(seed)
    bound = 2.0 * m / 11.0
    min_ratio = np.inf
    witness = None
    ok = True
    for _ in range(trials):
        xi = rng.standard_normal(len(u))
        xi -= np.dot(xi, u) * u
        xi -= np.dot(xi, iu) * iu
        norm2 = float(np.dot(xi, xi))
        if norm2 < 1e-20:
            continue
        quad = float(xi @ (A @ xi))
        min_ratio = min(min_ratio, quad / norm2)
        if quad < bound * norm2 - tol:
            ok = False
            witness = xi
            break
    return CoercivityResult(ok=ok, min_ratio=min_ratio, witness=witness)
