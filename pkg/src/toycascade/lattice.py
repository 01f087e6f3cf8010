"""State types and exact algebra for the finite frequency-cascade lattice.

The model lives on sites j = -N..N with complex amplitudes b_j and Dirichlet
boundary values b_{-(N+1)} = b_{N+1} = 0.  Two quantities are conserved by the
flow:

    M(b) = sum_j |b_j|^2                                  (mass)
    H(b) = sum_j ( 1/2 |b_j|^4 - 2 Re( conj(b_j)^2 b_{j-1}^2 ) )   (energy)

Real coordinates interleave (alpha_j, beta_j) with b_j = alpha_j + i beta_j,
ordered (alpha_{-N}, beta_{-N}, ..., alpha_N, beta_N).

Gradient convention
-------------------
``grad_h`` returns 2 * dH/d(conj b).  With this factor the interleaved real
vector of ``grad_h`` is exactly the gradient of H in the real coordinates
above (certified against central finite differences in the test suite), and
the three-mode mass-m minimizer b* satisfies

    grad_h(b*) = -(14/11) m b*.

The unscaled Wirtinger derivative dH/d(conj b) would carry half that factor;
all routines in this package use the doubled convention consistently.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DoesNotFit

TWO_PI = 2.0 * np.pi

# amplitudes below this are treated as exactly zero when extracting a phase
PHASE_FLOOR = 1e-300


# ---------------------------------------------------------------------------
# array-level kernels (last axis = lattice sites), shared with the samplers
# ---------------------------------------------------------------------------

def mass_values(amps):
    """Mass sum |b_j|^2 of raw amplitude arrays (last axis = sites)."""
    a = np.asarray(amps)
    return np.sum(np.abs(a) ** 2, axis=-1)


def hamiltonian_values(amps):
    """Energy of raw amplitude arrays (last axis = sites), Dirichlet boundary."""
    a = np.asarray(amps, dtype=complex)
    left = np.zeros_like(a)
    left[..., 1:] = a[..., :-1]
    quartic = 0.5 * np.abs(a) ** 4
    coupling = -2.0 * np.real(np.conj(a) ** 2 * left ** 2)
    return np.sum(quartic + coupling, axis=-1)


def grad_values(amps):
    """Complex gradient 2*dH/d(conj b) of raw amplitude arrays."""
    a = np.asarray(amps, dtype=complex)
    left = np.zeros_like(a)
    left[..., 1:] = a[..., :-1]
    right = np.zeros_like(a)
    right[..., :-1] = a[..., 1:]
    return 2.0 * np.abs(a) ** 2 * a - 4.0 * np.conj(a) * (left ** 2 + right ** 2)


def interleave(amps):
    """Complex site amplitudes -> interleaved real coordinates (alpha, beta)."""
    a = np.asarray(amps, dtype=complex)
    out = np.empty(a.shape[:-1] + (2 * a.shape[-1],))
    out[..., 0::2] = a.real
    out[..., 1::2] = a.imag
    return out


def deinterleave(coords):
    """Interleaved real coordinates -> complex site amplitudes."""
    x = np.asarray(coords, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def hessian_values(amps):
    """Dense real Hessian of H at ``amps`` in interleaved coordinates.

    Second partials (boundary neighbours read as zero):

        d2H/da_j^2      =  6 a_j^2 + 2 b_j^2 - 4(a_{j-1}^2 + a_{j+1}^2)
                                             + 4(b_{j-1}^2 + b_{j+1}^2)
        d2H/db_j^2      =  6 b_j^2 + 2 a_j^2 + 4(a_{j-1}^2 + a_{j+1}^2)
                                             - 4(b_{j-1}^2 + b_{j+1}^2)
        d2H/da_j db_j   =  4 a_j b_j - 8(a_{j-1} b_{j-1} + a_{j+1} b_{j+1})
        d2H/da_j da_j'  = -8(a_j a_j' + b_j b_j')          (j' = j+1)
        d2H/da_j db_j'  =  8(a_j b_j' - b_j a_j')
        d2H/db_j da_j'  =  8(b_j a_j' - a_j b_j')
        d2H/db_j db_j'  = -8(b_j b_j' + a_j a_j')
    """
    a = np.asarray(amps, dtype=complex)
    n = a.shape[-1]
    al = a.real
    be = a.imag

    def A(j):
        return al[j] if 0 <= j < n else 0.0

    def B(j):
        return be[j] if 0 <= j < n else 0.0

    H = np.zeros((2 * n, 2 * n))
    for j in range(n):
        H[2 * j, 2 * j] = (6 * A(j) ** 2 + 2 * B(j) ** 2
                           - 4 * (A(j - 1) ** 2 + A(j + 1) ** 2)
                           + 4 * (B(j - 1) ** 2 + B(j + 1) ** 2))
        H[2 * j + 1, 2 * j + 1] = (6 * B(j) ** 2 + 2 * A(j) ** 2
                                   + 4 * (A(j - 1) ** 2 + A(j + 1) ** 2)
                                   - 4 * (B(j - 1) ** 2 + B(j + 1) ** 2))
        H[2 * j, 2 * j + 1] = H[2 * j + 1, 2 * j] = (
            4 * A(j) * B(j) - 8 * (A(j - 1) * B(j - 1) + A(j + 1) * B(j + 1)))
        if j + 1 < n:
            H[2 * j, 2 * j + 2] = H[2 * j + 2, 2 * j] = -8 * (A(j) * A(j + 1) + B(j) * B(j + 1))
            H[2 * j, 2 * j + 3] = H[2 * j + 3, 2 * j] = 8 * (A(j) * B(j + 1) - B(j) * A(j + 1))
            H[2 * j + 1, 2 * j + 2] = H[2 * j + 2, 2 * j + 1] = 8 * (B(j) * A(j + 1) - A(j) * B(j + 1))
            H[2 * j + 1, 2 * j + 3] = H[2 * j + 3, 2 * j + 1] = -8 * (B(j) * B(j + 1) + A(j) * A(j + 1))
    return H


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeState:
    """Complex amplitudes over sites j = -N..N (dense, offset-indexed).

    Immutable; the amplitude array is copied on construction and flagged
    read-only, so states are safe to share between threads.
    """

    half_width: int
    amps: np.ndarray

    def __post_init__(self):
        if self.half_width < 1:
            raise ValueError("half_width must be >= 1")
        a = np.array(self.amps, dtype=complex)
        if a.ndim != 1 or a.shape[0] != 2 * self.half_width + 1:
            raise ValueError(f"amps must have length {2 * self.half_width + 1}")
        if not np.all(np.isfinite(a.view(float))):
            raise ValueError("amps must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "amps", a)

    @property
    def n_sites(self):
        return 2 * self.half_width + 1

    def index(self, j):
        """Array index of site j in [-N, N]."""
        if abs(j) > self.half_width:
            raise IndexError(f"site {j} outside [-{self.half_width}, {self.half_width}]")
        return j + self.half_width

    def amp(self, j):
        """Amplitude at site j; sites outside [-N, N] read as zero."""
        if abs(j) > self.half_width:
            return 0.0 + 0.0j
        return complex(self.amps[j + self.half_width])

    def to_real(self):
        """Interleaved real coordinate vector (alpha_{-N}, beta_{-N}, ...)."""
        return interleave(self.amps)

    def with_amps(self, amps):
        return LatticeState(self.half_width, amps)


def zero_state(half_width):
    return LatticeState(half_width, np.zeros(2 * half_width + 1, dtype=complex))


def state_from_real(half_width, coords):
    return LatticeState(half_width, deinterleave(coords))


@dataclass(frozen=True)
class HydroState:
    """Madelung variables: site intensities rho_j = |b_j|^2 and phases theta_j."""

    half_width: int
    rho: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        n = 2 * self.half_width + 1
        r = np.array(self.rho, dtype=float)
        t = np.mod(np.array(self.theta, dtype=float), TWO_PI)
        if r.shape != (n,) or t.shape != (n,):
            raise ValueError(f"rho and theta must have length {n}")
        if np.any(r < 0):
            raise ValueError("rho entries must be nonnegative")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rho", r)
        object.__setattr__(self, "theta", t)


@dataclass(frozen=True)
class MinimizerId:
    """Names one three-mode minimizer: mass m, centre site k, global phase."""

    mass: float
    center: int
    phase: float = 0.0

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        object.__setattr__(self, "phase", float(np.mod(self.phase, TWO_PI)))


@dataclass(frozen=True)
class HessianMatrix:
    """Real symmetric second-derivative matrix in interleaved coordinates."""

    dim: int
    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.shape != (self.dim, self.dim):
            raise ValueError("entries must be a (dim, dim) matrix")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def mass(state):
    """Conserved mass M = sum |b_j|^2."""
    return float(mass_values(state.amps))


def hamiltonian(state):
    """Conserved energy H = sum ( 1/2 |b_j|^4 - 2 Re(conj(b_j)^2 b_{j-1}^2) )."""
    return float(hamiltonian_values(state.amps))


def grad_h(state):
    """Complex gradient 2*dH/d(conj b) as a lattice state.

    The interleaved real view of the result is the real-coordinate gradient
    of ``hamiltonian``; at a three-mode minimizer it equals -(14/11) m b*.
    """
    return state.with_amps(grad_values(state.amps))


def hessian_h(state):
    """Real symmetric Hessian of H at ``state`` (dimension 4N+2)."""
    return HessianMatrix(2 * state.n_sites, hessian_values(state.amps))


def to_madelung(state):
    """Polar decomposition b_j = sqrt(rho_j) e^{i theta_j}.

    Phases at (numerically) zero sites are set to 0 to keep the map total.
    """
    a = state.amps
    rho = np.abs(a) ** 2
    theta = np.where(rho > PHASE_FLOOR, np.mod(np.angle(a), TWO_PI), 0.0)
    return HydroState(state.half_width, rho, theta)


def from_madelung(hydro):
    """Inverse Madelung map; rejects negative intensities."""
    rho = np.asarray(hydro.rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho entries must be nonnegative")
    amps = np.sqrt(rho) * np.exp(1j * np.asarray(hydro.theta, dtype=float))
    return LatticeState(hydro.half_width, amps)


def phase_rotate(state, theta):
    """Multiply every amplitude by e^{i theta}; H and M are invariant."""
    return state.with_amps(np.exp(1j * theta) * state.amps)


def translate(state, shift):
    """Shift a state by ``shift`` sites, zero-filling; rejects support loss."""
    a = state.amps
    out = np.zeros_like(a)
    if shift >= 0:
        moved, kept = a[:len(a) - shift], slice(shift, None)
    else:
        moved, kept = a[-shift:], slice(0, len(a) + shift)
    dropped = mass_values(a) - mass_values(moved)
    if dropped > 1e-30 * max(mass_values(a), 1.0):
        raise DoesNotFit(f"shift by {shift} pushes support off the lattice")
    out[kept] = moved
    return state.with_amps(out)


def minimizer_profile(m):
    """Three-mode intensity profile (3m/11, 5m/11, 3m/11) about the centre."""
    return np.array([3.0 * m / 11.0, 5.0 * m / 11.0, 3.0 * m / 11.0])


def minimizer_state(mid, half_width):
    """Realize the three-mode minimizer b*(m, k, theta) on a 2N+1 lattice.

    b_{k+-1} = sqrt(3m/11) e^{i theta}, b_k = sqrt(5m/11) e^{i theta}; the
    state has mass m and energy -(7/22) m^2.  The centre must satisfy
    |k| <= N-1 so the support respects the Dirichlet boundary.
    """
    N = half_width
    k = mid.center
    if abs(k) > N - 1:
        raise DoesNotFit(f"centre {k} needs |k| <= {N - 1} for half_width {N}")
    amps = np.zeros(2 * N + 1, dtype=complex)
    root = np.sqrt(minimizer_profile(mid.mass)) * np.exp(1j * mid.phase)
    amps[N + k - 1:N + k + 2] = root
    return LatticeState(N, amps)


MINIMIZER_ENERGY_COEFF = -7.0 / 22.0  # H(b*) = -(7/22) m^2


def minimizer_energy(m):
    return MINIMIZER_ENERGY_COEFF * m * m


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def state_to_json_dict(state):
    """JSON-ready dict {"N": int, "re": [...], "im": [...]}, sites -N..N."""
    return {
        "N": state.half_width,
        "re": [float(v) for v in state.amps.real],
        "im": [float(v) for v in state.amps.imag],
    }


def state_from_json_dict(obj):
    n = int(obj["N"])
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj["im"], dtype=float)
    if re.shape != (2 * n + 1,) or im.shape != (2 * n + 1,):
        raise ValueError("re/im arrays must have length 2N+1")
    return LatticeState(n, re + 1j * im)
