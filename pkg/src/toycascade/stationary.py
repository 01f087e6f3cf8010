"""Phase-locked stationary profiles from the tridiagonal intensity system.

An in-phase profile rotating rigidly at rate omega must satisfy

    -rho_j + 2 rho_{j-1} + 2 rho_{j+1} = omega     (interior nodes, zero ends)

i.e. the tridiagonal system with diagonal -1 and off-diagonals 2 applied to
the intensity vector equals omega * ones.  The matrix is nonsingular for
every size but not diagonally dominant, so the direct elimination below is
backed by a full residual check with a partially pivoted dense fallback.

Solutions may have negative entries, in which case no lattice state realizes
them (the Madelung map needs rho >= 0); ``positive`` records that
classification.  With omega = 1 the profile is strictly positive at
n = 2, 3, 4 and 8 nodes but not at n = 5.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DoesNotFit, NotPositive, SolveFailed
from .lattice import LatticeState

POSITIVITY_REL_TOL = 1e-12
RESIDUAL_REL_TOL = 1e-10


@dataclass(frozen=True)
class PhaseLockedProfile:
    n_nodes: int
    omega: float
    rho: np.ndarray
    positive: bool

    def __post_init__(self):
        r = np.array(self.rho, dtype=float)
        if r.shape != (self.n_nodes,):
            raise ValueError("rho must have length n_nodes")
        r.setflags(write=False)
        object.__setattr__(self, "rho", r)

    @property
    def mass(self):
        return float(np.sum(self.rho))


def _thomas(n, omega):
    # elimination without pivoting; caller checks the residual
    diag = np.full(n, -1.0)
    off = 2.0
    rhs = np.full(n, float(omega))
    c = np.zeros(n)
    d = np.zeros(n)
    denom = diag[0]
    if denom == 0.0:
        return None
    c[0] = off / denom
    d[0] = rhs[0] / denom
    for i in range(1, n):
        denom = diag[i] - off * c[i - 1]
        if denom == 0.0 or not np.isfinite(denom):
            return None
        c[i] = off / denom if i < n - 1 else 0.0
        d[i] = (rhs[i] - off * d[i - 1]) / denom
    x = np.zeros(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def _dense_matrix(n):
    m = -np.eye(n) + 2.0 * np.eye(n, k=1) + 2.0 * np.eye(n, k=-1)
    return m


def _residual(n, omega, rho):
    m = _dense_matrix(n)
    return float(np.linalg.norm(m @ rho - omega * np.ones(n)))


def solve_phase_locked(n_nodes, omega):
    """Solve the n-node intensity system for rotation rate ``omega``.

    The residual is required to satisfy ||A rho - omega 1|| <= 1e-10 ||omega 1||;
    if direct elimination misses that bound a pivoted dense solve is used, and
    :class:`SolveFailed` is raised if the bound still fails.
    """
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    scale = abs(omega) * np.sqrt(n_nodes)
    rho = _thomas(n_nodes, omega)
    if rho is None or not np.all(np.isfinite(rho)) or \
            _residual(n_nodes, omega, rho) > RESIDUAL_REL_TOL * max(scale, 1e-300):
        rho = np.linalg.solve(_dense_matrix(n_nodes), omega * np.ones(n_nodes))
        if _residual(n_nodes, omega, rho) > RESIDUAL_REL_TOL * max(scale, 1e-300):
            raise SolveFailed(f"tridiagonal solve residual above tolerance at n={n_nodes}")
    positive = bool(np.all(rho > POSITIVITY_REL_TOL * max(float(np.max(rho)), 0.0)))
    return PhaseLockedProfile(n_nodes, float(omega), rho, positive)


def profile_to_state(profile, half_width, center, theta):
    """Embed a strictly positive profile as an in-phase lattice state.

    Node (n-1)//2 of the profile lands on ``center``; all embedded amplitudes
    share the phase ``theta``.  Raises :class:`NotPositive` for profiles with
    non-positive entries and :class:`DoesNotFit` if the support leaves [-N, N].
    """
    if not profile.positive:
        raise NotPositive("profile has non-positive entries; no state realizes it")
    n = profile.n_nodes
    N = half_width
    lo = center - (n - 1) // 2
    hi = lo + n - 1
    if lo < -N or hi > N:
        raise DoesNotFit(f"profile sites [{lo}, {hi}] exceed [-{N}, {N}]")
    amps = np.zeros(2 * N + 1, dtype=complex)
    amps[lo + N:hi + N + 1] = np.sqrt(profile.rho) * np.exp(1j * theta)
    return LatticeState(N, amps)


def scan_positivity(max_nodes, omega=1.0):
    """Positivity classification of the omega-profile for n = 1..max_nodes."""
    if max_nodes < 1:
        raise ValueError("max_nodes must be >= 1")
    return [(n, solve_phase_locked(n, omega).positive) for n in range(1, max_nodes + 1)]
