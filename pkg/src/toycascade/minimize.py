"""Fixed-mass energy minimization and the rearrangement toolbox.

For in-phase states the energy reduces to a function of the intensities,

    h(rho) = sum_j ( 1/2 rho_j^2 - 2 rho_j rho_{j-1} ),

and minimizing H over complex states of mass m is equivalent to minimizing h
over the simplex {rho >= 0, sum rho = m}.  The closed-form symmetric
candidates with 1..4 modes have energies (1/2, -1/4, -7/22, -5/16) m^2; the
three-mode profile (3m/11, 5m/11, 3m/11) is the global minimizer.

Two independent routes certify that value: a projected gradient descent on
the mass sphere in the full complex coordinates, and a brute-force simplex
grid search over intensity profiles kept behind a cost guard.
"""

from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from .errors import BudgetExceeded, SupportTooSmall
from .lattice import (LatticeState, grad_values, hamiltonian_values, interleave,
                      deinterleave, minimizer_profile)

K_MODE_COEFFS = {
    1: Fraction(1, 2),
    2: Fraction(-1, 4),
    3: Fraction(-7, 22),
    4: Fraction(-5, 16),
}


@dataclass(frozen=True)
class RhoProfile:
    """Nonnegative intensity profile over a finite window of adjacent sites."""

    rho: np.ndarray

    def __post_init__(self):
        r = np.array(self.rho, dtype=float)
        if r.ndim != 1 or r.size == 0:
            raise ValueError("rho must be a nonempty 1-d sequence")
        if np.any(r < -1e-12 * max(1.0, float(np.max(np.abs(r))))):
            raise ValueError("rho entries must be nonnegative")
        r = np.maximum(r, 0.0)
        r.setflags(write=False)
        object.__setattr__(self, "rho", r)

    @property
    def mass(self):
        return float(np.sum(self.rho))

    def __len__(self):
        return len(self.rho)


@dataclass(frozen=True)
class MinimizeResult:
    state: LatticeState
    energy: float
    iterations: int
    converged: bool
    grad_norm: float
    seed: int
    start_index: int


def h_inphase(profile):
    """In-phase energy sum_j (1/2 rho_j^2 - 2 rho_j rho_{j-1}), zero boundary."""
    rho = profile.rho if isinstance(profile, RhoProfile) else np.asarray(profile, float)
    left = np.zeros_like(rho)
    left[1:] = rho[:-1]
    return float(np.sum(0.5 * rho ** 2 - 2.0 * rho * left))


def k_mode_energy(k, m):
    """Symmetric k-mode candidate profile and its energy, k in 1..4.

    Energies are (1/2, -1/4, -7/22, -5/16) m^2; the coefficients are exact
    rationals, exposed in ``K_MODE_COEFFS``.
    """
    if k not in K_MODE_COEFFS:
        raise ValueError(f"k must be in {sorted(K_MODE_COEFFS)}")
    if k == 1:
        rho = np.array([m], dtype=float)
    elif k == 2:
        rho = np.array([m / 2, m / 2])
    elif k == 3:
        rho = minimizer_profile(m)
    else:
        rho = np.array([m / 8, 3 * m / 8, 3 * m / 8, m / 8])
    return RhoProfile(rho), float(K_MODE_COEFFS[k]) * m * m


# ---------------------------------------------------------------------------
# rearrangements
# ---------------------------------------------------------------------------

def _is_unimodal(vals):
    v = np.asarray(vals, float)
    peak = int(np.argmax(v))
    return bool(np.all(np.diff(v[:peak + 1]) >= 0) and np.all(np.diff(v[peak:]) <= 0))


def _organ_pipe(vals):
    # centre the largest value, then alternate remaining values right/left
    s = sorted(vals, reverse=True)
    left, right = [], []
    for i, v in enumerate(s[1:]):
        (right if i % 2 == 0 else left).append(v)
    return np.array(list(reversed(left)) + [s[0]] + right)


def _monotone_tail(seq):
    """One-sided monotone rearrangement by local energy-decreasing moves.

    ``seq[0]`` is the fixed centre value; positions 1.. are permuted into
    non-increasing order by repeatedly pulling the tail maximum forward and
    redistributing its two old neighbours, the move pattern that never
    decreases the adjacent-product sum K = sum rho_j rho_{j+1}.
    """
    full = list(map(float, seq)) + [0.0, 0.0]
    n = 0
    while n + 1 < len(full):
        tail = full[n + 2:]
        if not tail or full[n + 1] >= max(tail):
            n += 1  # already the largest remaining value
            continue
        k = n + 2 + int(np.argmax(tail))
        new = list(full)
        new[n + 1] = full[k]
        for j in range(n + 3, k + 1):
            new[j] = full[j - 2]
        right_val = full[k + 1] if k + 1 < len(full) else 0.0
        if right_val >= full[k - 1]:
            new[n + 2] = right_val
            if k + 1 < len(new):
                new[k + 1] = full[k - 1]
            else:
                new.append(full[k - 1])
        else:
            new[n + 2] = full[k - 1]
        full = new
        n += 1
    while full and full[-1] == 0.0:
        full.pop()
    return full


def rearrange_nonincreasing(profile):
    """Rearrange a profile to be non-increasing away from its maximum.

    Profiles that already decay on both sides of their maximum are returned
    unchanged.  Otherwise two energy-monotone rearrangements are formed: the
    per-side monotone rearrangement built from local moves (which provably
    never increases the in-phase energy), and the centred placement that
    alternates the sorted values around the maximum.  The lower-energy of the
    two is returned; the output is always a permutation of the input values
    and ``h_inphase`` never increases.
    """
    vals = profile.rho if isinstance(profile, RhoProfile) else np.asarray(profile, float)
    n = len(vals)
    if _is_unimodal(vals):
        return RhoProfile(vals)

    peak = int(np.argmax(vals))
    right = _monotone_tail([vals[peak]] + list(vals[peak + 1:]))
    left = _monotone_tail([vals[peak]] + list(vals[peak - 1::-1]))
    induction = np.array(list(reversed(left[1:])) + [vals[peak]] + right[1:])
    centred = _organ_pipe(vals)

    best = min((induction, centred), key=h_inphase)
    out = np.zeros(max(n, len(best)))
    # keep window length unless the rearrangement genuinely needs more room
    out[:len(best)] = best
    if len(out) > n:
        out = np.trim_zeros(out, "b")
        if len(out) < n:
            out = np.concatenate([out, np.zeros(n - len(out))])
    return RhoProfile(out)


def check_5over3(profile, center=None, tol=1e-12):
    """True iff rho_c <= (5/6)(rho_{c-1} + rho_{c+1}) + tol at the centre.

    ``center`` defaults to the (first) maximum of the profile; neighbours
    outside the window read as zero.
    """
    rho = profile.rho if isinstance(profile, RhoProfile) else np.asarray(profile, float)
    c = int(np.argmax(rho)) if center is None else int(center)
    left = rho[c - 1] if c - 1 >= 0 else 0.0
    right = rho[c + 1] if c + 1 < len(rho) else 0.0
    return bool(rho[c] <= (5.0 / 6.0) * (left + right) + tol)


def five_mode_reduction(profile):
    """Move the two outermost intensities onto the central three sites.

    With the profile centred at its maximum and padded symmetrically, the
    outermost values rho_{+-n} are removed and redistributed as

        rho_{-1} += rho_{-n}/2,  rho_0 += (rho_{-n}+rho_{n})/2,  rho_1 += rho_{n}/2.

    Mass is preserved exactly; for profiles that are non-increasing about
    their maximum and satisfy the 5/6 neighbour bound the in-phase energy
    strictly decreases.  Requires support length >= 6.
    """
    rho = profile.rho if isinstance(profile, RhoProfile) else np.asarray(profile, float)
    nz = np.nonzero(rho)[0]
    if len(nz) == 0 or nz[-1] - nz[0] + 1 < 6:
        raise SupportTooSmall("five-mode reduction needs support length >= 6")
    rho = rho[nz[0]:nz[-1] + 1]
    c = int(np.argmax(rho))
    reach = max(c, len(rho) - 1 - c)
    full = np.zeros(2 * reach + 1)
    full[reach - c:reach - c + len(rho)] = rho

    out = full[1:-1].copy()
    mid = reach - 1  # index of the old centre inside the trimmed window
    out[mid - 1] += 0.5 * full[0]
    out[mid] += 0.5 * (full[0] + full[-1])
    out[mid + 1] += 0.5 * full[-1]
    return RhoProfile(out)


# ---------------------------------------------------------------------------
# sphere optimizer and brute-force oracle
# ---------------------------------------------------------------------------

def _energy_real(x):
    return float(hamiltonian_values(deinterleave(x)))


def _grad_real(x):
    return interleave(grad_values(deinterleave(x)))


def _retract(x, m):
    return np.sqrt(m) * x / np.linalg.norm(x)


def _descend(x0, m, sign, tol, max_iter):
    """Projected gradient descent of sign*H on the sphere |x|^2 = m.

    Tangent-space Armijo backtracking with normalization retraction; returns
    (x, energy, iterations, converged, grad_norm) where energy is H(x).
    """
    x = _retract(np.asarray(x0, float), m)
    f = sign * _energy_real(x)
    step = 1.0
    it = 0
    grad_norm = np.inf
    for it in range(1, max_iter + 1):
        g = sign * _grad_real(x)
        gt = g - (np.dot(g, x) / m) * x
        grad_norm = float(np.linalg.norm(gt))
        if grad_norm <= tol:
            return x, sign * f, it, True, grad_norm
        accepted = False
        alpha = step
        for _ in range(60):
            x_try = _retract(x - alpha * gt, m)
            f_try = sign * _energy_real(x_try)
            if f_try <= f - 1e-4 * alpha * grad_norm ** 2:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        x, f = x_try, f_try
        step = min(alpha * 2.0, 1e3)
    return x, sign * f, it, grad_norm <= tol, grad_norm


def _extremize(half_width, m, n_starts, seed, sign, tol, max_iter, threads):
    dim = 2 * (2 * half_width + 1)
    rng = np.random.default_rng(seed)
    starts = rng.standard_normal((n_starts, dim))

    def run(i):
        return i, _descend(starts[i], m, sign, tol, max_iter)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(run, range(n_starts)))
    else:
        runs = [run(i) for i in range(n_starts)]

    # deterministic regardless of thread scheduling: order by (value, index)
    def key(item):
        i, (_, energy, _, _, _) = item
        return (sign * energy, i)

    best_i, (x, energy, iterations, converged, grad_norm) = min(runs, key=key)
    return MinimizeResult(
        state=LatticeState(half_width, deinterleave(x)),
        energy=energy,
        iterations=iterations,
        converged=converged,
        grad_norm=grad_norm,
        seed=seed,
        start_index=best_i,
    )


def default_tolerance(m):
    # gradient is homogeneous of degree 3, so the tolerance scales like m^(3/2)
    return 1e-9 * m ** 1.5


def minimize_h_on_sphere(half_width, m, n_starts=16, seed=0, tol=None,
                         max_iter=50_000, threads=1):
    """Minimize H over the mass-m sphere from ``n_starts`` random starts.

    Each start is deterministic given (seed, start index); the best run is
    returned, with ``converged`` requiring the projected-gradient norm to
    reach ``tol`` (default 1e-9 m^(3/2)).  Non-convergence is reported in the
    result, never raised.
    """
    if half_width < 2:
        raise ValueError("half_width must be >= 2")
    if m <= 0:
        raise ValueError("m must be positive")
    tol = default_tolerance(m) if tol is None else tol
    return _extremize(half_width, m, n_starts, seed, +1, tol, max_iter, threads)


def maximize_h_on_sphere(half_width, m, n_starts=16, seed=0, tol=None,
                         max_iter=50_000, threads=1):
    """Maximize H over the mass-m sphere (same machinery, opposite sign)."""
    tol = default_tolerance(m) if tol is None else tol
    return _extremize(half_width, m, n_starts, seed, -1, tol, max_iter, threads)


def _compositions(total, parts):
    """Yield all nonnegative integer tuples of length ``parts`` summing to total."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def brute_force_min(half_width, m, grid, refine=True):
    """Grid minimum of the in-phase energy over the mass-m simplex.

    Enumerates all intensity profiles with entries in m/grid increments on
    2N+1 sites, then (optionally) polishes the best grid point with an
    equality-constrained local solve.  Guarded: intended as a test oracle,
    not a fast path.
    """
    from math import comb

    parts = 2 * half_width + 1
    if half_width > 3 or grid > 40:
        raise BudgetExceeded("brute force limited to half_width <= 3 and grid <= 40")
    n_points = comb(grid + parts - 1, parts - 1)
    if n_points > 5_000_000:
        raise BudgetExceeded(f"{n_points} grid points exceed the enumeration budget")

    best_val = np.inf
    best_rho = None
    chunk = []
    scale = m / grid

    def flush(chunk, best_val, best_rho):
        arr = np.asarray(chunk, dtype=float) * scale
        left = np.zeros_like(arr)
        left[:, 1:] = arr[:, :-1]
        vals = np.sum(0.5 * arr ** 2 - 2.0 * arr * left, axis=1)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            return float(vals[i]), arr[i]
        return best_val, best_rho

    for comp in _compositions(grid, parts):
        chunk.append(comp)
        if len(chunk) >= 200_000:
            best_val, best_rho = flush(chunk, best_val, best_rho)
            chunk = []
    if chunk:
        best_val, best_rho = flush(chunk, best_val, best_rho)

    if not refine:
        return best_val

    from scipy.optimize import minimize as scipy_minimize

    res = scipy_minimize(
        h_inphase,
        best_rho,
        jac=lambda r: r - 2.0 * (np.concatenate(([0.0], r[:-1]))
                                 + np.concatenate((r[1:], [0.0]))),
        method="SLSQP",
        bounds=[(0.0, m)] * parts,
        constraints=[{"type": "eq", "fun": lambda r: np.sum(r) - m,
                      "jac": lambda r: np.ones_like(r)}],
        options={"maxiter": 500, "ftol": 1e-14},
    )
    refined = float(res.fun) if res.success else np.inf
    return min(best_val, refined)
