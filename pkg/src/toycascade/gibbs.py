"""Gibbs sampling on mass spheres and the Gaussian fluctuation picture.

The canonical target at inverse temperature beta and mass m is the
unnormalized measure e^{-beta H} against the surface measure of the sphere
S(m) = {M(b) = m}.  At low temperature it concentrates on the circles of
three-mode minimizers B*_k(m), uniformly over the 2N-1 legal centres and the
global phase, with Gaussian fluctuations governed by the shifted Hessian
operator A = (14/11) M(b) I + hessian(b^*).

This module provides:

* a Metropolis sampler on S(m) (tangent Gaussian proposals re-normalized to
  the sphere, treated as symmetric) with optional symmetry moves -- global
  phase rotations, lattice reflections and cyclic shifts -- that leave the
  target invariant and let chains hop between the symmetric wells,
* replica exchange across a beta ladder (required in practice for
  well-uniformity statistics at large beta),
* nearest-minimizer geometry: projections, the spherical log map, and the
  quadratic forms G, G_k and their intrinsic variant,
* a direct sampler of the Gaussian-like reference measure (uniform centre,
  uniform phase, tangent Gaussian with covariance (1/beta) A^+), and
* concentration diagnostics: cap fractions, well and phase histograms,
  tangent covariances and the |H - h* - G| remainder summary.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import Antipodal, ConfigError, NonUniqueNearest, ValidityGuard
from .lattice import (LatticeState, hamiltonian_values, hessian_values,
                      interleave, mass_values, minimizer_energy,
                      minimizer_profile)
from .spectral import SHIFT_COEFF

TIE_TOL = 1e-12


# ---------------------------------------------------------------------------
# minimizer geometry
# ---------------------------------------------------------------------------

# H depends on the amplitudes only through their squares b_j^2, so flipping
# the sign of any site's amplitude is an exact symmetry.  The fixed-mass
# energy minimizers therefore form, for each centre k, FOUR circles: the
# global-phase orbits of the sign patterns below applied to the three-mode
# profile (all eight patterns reduce to four modulo a global sign, which the
# phase absorbs).  All nearest-minimizer geometry measures distance to this
# full set.
SIGN_CLASSES = ((1, 1, 1), (-1, 1, 1), (1, -1, 1), (1, 1, -1))


def legal_centers(half_width):
    return np.arange(-half_width + 1, half_width)


def minimizer_bank(half_width, m, sign_classes=True):
    """Real minimizer templates as rows, one per (centre, sign class).

    Returns (centers, classes, bank): the centre and sign-class index of each
    row, and the (rows, 2N+1) template matrix.  Rows are ordered by centre
    ascending with the all-plus class first, so first-match tie-breaking
    prefers the smallest centre and the canonical class.  With
    ``sign_classes=False`` only the canonical in-phase circles are included.
    """
    centers = legal_centers(half_width)
    n = 2 * half_width + 1
    root = np.sqrt(minimizer_profile(m))
    patterns = SIGN_CLASSES if sign_classes else SIGN_CLASSES[:1]
    rows = len(centers) * len(patterns)
    bank = np.zeros((rows, n))
    row_centers = np.empty(rows, dtype=int)
    row_classes = np.empty(rows, dtype=int)
    r = 0
    for k in centers:
        for ci, eps in enumerate(patterns):
            bank[r, half_width + k - 1:half_width + k + 2] = np.array(eps) * root
            row_centers[r] = k
            row_classes[r] = ci
            r += 1
    return row_centers, row_classes, bank


def _nearest_arrays(samples, half_width, m, sign_classes=True):
    """Vectorized nearest-minimizer data for a (count, 2N+1) batch.

    Returns (center, class_index, theta_hat, distance, unique) arrays.  The
    optimal phase against a real template T is arg <b, T> in the complex
    pairing, giving |b - e^{i theta} T|^2 = M(b) + m - 2 |<b, T>|.  Distance
    ties within 1e-12 resolve to the smallest centre (canonical class first)
    and are flagged non-unique, as is zero overlap with every template.
    """
    samples = np.atleast_2d(samples)
    row_centers, row_classes, bank = minimizer_bank(half_width, m, sign_classes)
    z = samples @ bank.T
    absz = np.abs(z)
    mb = mass_values(samples)
    d = np.sqrt(np.maximum(mb[:, None] + m - 2.0 * absz, 0.0))
    dmin = d.min(axis=1)
    tied = d <= (dmin[:, None] + TIE_TOL)
    ridx = np.argmax(tied, axis=1)
    unique = tied.sum(axis=1) == 1
    degenerate = np.all(absz <= 0.0, axis=1)
    ridx = np.where(degenerate, 0, ridx)
    unique &= ~degenerate
    theta = np.angle(z[np.arange(len(samples)), ridx])
    theta = np.where(degenerate, 0.0, np.mod(theta, 2.0 * np.pi))
    return row_centers[ridx], row_classes[ridx], theta, dmin, unique


@dataclass(frozen=True)
class NearestMinimizer:
    center: int
    phase: float
    signs: tuple
    point: LatticeState
    distance: float
    unique: bool


def nearest_minimizer(state):
    """Closest energy minimizer of mass M(b) to ``state``.

    The search covers all sign classes of the three-mode profile at every
    legal centre (see ``SIGN_CLASSES``); ties within 1e-12 in distance pick
    the smallest centre/canonical class and are flagged ``unique=False``.
    """
    m = float(mass_values(state.amps))
    if m <= 0:
        raise ValueError("nearest_minimizer needs a state of positive mass")
    centers, classes, theta, dist, unique = _nearest_arrays(
        state.amps[None, :], state.half_width, m)
    k, ci = int(centers[0]), int(classes[0])
    _, _, bank = minimizer_bank(state.half_width, m)
    row = 4 * (k + state.half_width - 1) + ci
    point = LatticeState(state.half_width, np.exp(1j * theta[0]) * bank[row])
    return NearestMinimizer(
        center=k,
        phase=float(theta[0]),
        signs=SIGN_CLASSES[ci],
        point=point,
        distance=float(dist[0]),
        unique=bool(unique[0]),
    )


def real_inner(x, y):
    """Real pairing Re sum x_j conj(y_j); u and i*u are orthogonal under it."""
    return float(np.real(np.vdot(y, x)))


def proj_perp(state, nearest, remove_null=False):
    """Remove the component of ``state`` along its nearest minimizer.

    The default removes only the radial direction u = b^*/|b^*|; with
    ``remove_null=True`` the phase direction i u (the null direction of the
    shifted operator) is removed as well, which is the variant used when
    inverting the shifted operator for covariance comparisons.
    """
    u = nearest.point.amps / np.sqrt(float(mass_values(nearest.point.amps)))
    xi = state.amps - real_inner(state.amps, u) * u
    if remove_null:
        iu = 1j * u
        xi = xi - real_inner(xi, iu) * iu
    return state.with_amps(xi)


def log_map(x, y, antipodal_tol=1e-12):
    """Spherical log map Log_x(y) for x, y on the same mass sphere.

    Returns the tangent vector at x of length equal to the geodesic distance
    d(x, y) = sqrt(m) arccos(<x, y>/m); zero when y = x, and
    :class:`Antipodal` when y = -x (direction undefined).
    """
    m = float(mass_values(x.amps))
    my = float(mass_values(y.amps))
    if abs(my - m) > 1e-9 * max(m, 1e-300):
        raise ValueError("log_map needs points on the same mass sphere")
    c = real_inner(y.amps, x.amps)
    cosang = min(1.0, max(-1.0, c / m))
    if cosang <= -1.0 + antipodal_tol:
        raise Antipodal("log map undefined for antipodal points")
    w = y.amps - (c / m) * x.amps
    norm_w = np.sqrt(max(real_inner(w, w), 0.0))
    if norm_w < 1e-15 * np.sqrt(m):
        return x.with_amps(np.zeros_like(x.amps))
    d = np.sqrt(m) * np.arccos(cosang)
    return x.with_amps((d / norm_w) * w)


def shifted_matrix_at(point_amps, mass_b):
    """(14/11) M(b) I + hessian at the given minimizer point (real coords)."""
    h = hessian_values(point_amps)
    return SHIFT_COEFF * mass_b * np.eye(h.shape[0]) + h


def g_value(state, remove_null=False):
    """Ambient Gaussian form G(b) = 1/2 <A proj_perp(b), proj_perp(b)>.

    Requires a unique nearest minimizer; raises :class:`NonUniqueNearest`
    on distance ties.
    """
    nm = nearest_minimizer(state)
    if not nm.unique:
        raise NonUniqueNearest("G is ill-defined on the equidistant set")
    return _g_from_nearest(state, nm, remove_null)


def _g_from_nearest(state, nm, remove_null=False):
    mb = float(mass_values(state.amps))
    xi = interleave(proj_perp(state, nm, remove_null=remove_null).amps)
    A = shifted_matrix_at(nm.point.amps, mb)
    return 0.5 * float(xi @ (A @ xi))


def g_k_value(state, center):
    """Per-circle form G_k(b) against the canonical in-phase circle at k."""
    m = float(mass_values(state.amps))
    half_width = state.half_width
    _, _, bank = minimizer_bank(half_width, m, sign_classes=False)
    idx = center + half_width - 1
    if not (0 <= idx < bank.shape[0]):
        raise ValueError(f"center {center} is not a legal centre")
    z = complex(np.sum(state.amps * bank[idx]))
    theta = float(np.angle(z)) if abs(z) > 0 else 0.0
    point = LatticeState(half_width, np.exp(1j * theta) * bank[idx])
    mb = float(mass_values(state.amps))
    nm = NearestMinimizer(center=center, phase=theta, signs=SIGN_CLASSES[0],
                          point=point,
                          distance=float(np.sqrt(max(mb + m - 2 * abs(z), 0.0))),
                          unique=abs(z) > 0)
    return _g_from_nearest(state, nm)


def g_intrinsic(state):
    """Intrinsic variant of G using the spherical log map as the fluctuation."""
    nm = nearest_minimizer(state)
    if not nm.unique:
        raise NonUniqueNearest("intrinsic G is ill-defined on the equidistant set")
    mb = float(mass_values(state.amps))
    xi = interleave(log_map(nm.point, state).amps)
    A = shifted_matrix_at(nm.point.amps, mb)
    return 0.5 * float(xi @ (A @ xi))


# ---------------------------------------------------------------------------
# cap coordinates
# ---------------------------------------------------------------------------

def cap_point(half_width, m, center, theta, t, direction):
    """Point b = (1-t) b^* + sqrt(2t - t^2) sqrt(m) w of the spherical cap.

    ``direction`` is orthonormalized against b^* and i b^* (real pairing) to
    produce the unit tangent w; returns (state, w_amps).  By construction the
    nearest minimizer of the result is b^*(m, center, theta) for t < 1.
    """
    from .lattice import MinimizerId, minimizer_state

    if not (0.0 <= t < 1.0):
        raise ValueError("cap parameter t must lie in [0, 1)")
    point = minimizer_state(MinimizerId(m, center, theta), half_width).amps
    u = point / np.sqrt(m)
    w = np.asarray(direction, dtype=complex).copy()
    w -= real_inner(w, u) * u
    w -= real_inner(w, 1j * u) * (1j * u)
    norm = np.sqrt(max(real_inner(w, w), 0.0))
    if norm < 1e-14:
        raise ValueError("direction is degenerate after projection")
    w /= norm
    amps = (1.0 - t) * point + np.sqrt(max(2.0 * t - t * t, 0.0)) * np.sqrt(m) * w
    return LatticeState(half_width, amps), w


def cap_quadratic_form(half_width, m, center, theta, t, w):
    """Cap-coordinate quadratic form (1/2)(1-t)^2 (2t-t^2) m <A w, w>."""
    from .lattice import MinimizerId, minimizer_state

    point = minimizer_state(MinimizerId(m, center, theta), half_width).amps
    A = shifted_matrix_at(point, m)
    wr = interleave(np.asarray(w, dtype=complex))
    return 0.5 * (1.0 - t) ** 2 * (2.0 * t - t * t) * m * float(wr @ (A @ wr))


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def sphere_uniform(half_width, m, count, seed=0, rng=None):
    """I.i.d. uniform draws on S(m) as a (count, 2N+1) complex array."""
    if m <= 0:
        raise ValueError("m must be positive")
    rng = np.random.default_rng(seed) if rng is None else rng
    n = 2 * half_width + 1
    x = rng.standard_normal((count, 2 * n))
    a = x[:, 0::2] + 1j * x[:, 1::2]
    norms = np.sqrt(mass_values(a))
    return np.sqrt(m) * a / norms[:, None]


def batch_states(samples, half_width):
    """Iterate a (count, 2N+1) array as LatticeState values."""
    for row in np.atleast_2d(samples):
        yield LatticeState(half_width, row)


def metropolis_accept_prob(beta, h_old, h_new):
    """min(1, exp(-beta (h_new - h_old))), the accept rule used by the chain."""
    return float(min(1.0, np.exp(-beta * (h_new - h_old))))


@dataclass(frozen=True)
class SamplerConfig:
    half_width: int
    m: float
    beta: float
    n_steps: int
    burn_in: int
    thin: int = 1
    proposal_sigma: float = 0.3
    seed: int = 0
    target_accept: tuple = (0.3, 0.5)
    # symmetry moves; each leaves e^{-beta H} Gamma_m invariant.  Sign flips
    # and reflections are exact symmetries (always accepted); cyclic shifts
    # pay only the boundary coupling and let chains hop between wells.
    p_rotate: float = 0.10
    p_reflect: float = 0.05
    p_shift: float = 0.10
    p_signflip: float = 0.10
    tune_interval: int = 200

    def __post_init__(self):
        if self.half_width < 2:
            raise ConfigError("half_width must be >= 2")
        if self.m <= 0:
            raise ConfigError("m must be positive")
        if self.beta < 0:
            raise ConfigError("beta must be nonnegative")
        if not (0 <= self.burn_in < self.n_steps):
            raise ConfigError("need 0 <= burn_in < n_steps")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.proposal_sigma <= 0:
            raise ConfigError("proposal_sigma must be positive")
        lo, hi = self.target_accept
        if not (0 < lo < hi < 1):
            raise ConfigError("target_accept must be an increasing pair in (0,1)")
        if min(self.p_rotate, self.p_reflect, self.p_shift, self.p_signflip) < 0 or \
                self.p_rotate + self.p_reflect + self.p_shift + self.p_signflip >= 1:
            raise ConfigError("move probabilities must be nonnegative and sum below 1")


@dataclass(frozen=True)
class ChainResult:
    half_width: int
    m: float
    beta: float
    samples_array: np.ndarray  # (n_kept, 2N+1) complex, mass m rows
    h_values: np.ndarray
    accept_rate: float
    proposal_sigma: float
    seed: int
    diagnostics: object = None

    @property
    def n_samples(self):
        return self.samples_array.shape[0]

    def state(self, i):
        return LatticeState(self.half_width, self.samples_array[i])

    def iter_states(self):
        return batch_states(self.samples_array, self.half_width)


@dataclass(frozen=True)
class ReplicaExchangeResult:
    betas: tuple
    levels: tuple  # ChainResult per beta, same order
    swap_acceptance: np.ndarray  # per adjacent pair

    def level(self, beta):
        return self.levels[self.betas.index(beta)]


def _run_ladder(cfg, betas, swap_stride, collect_all=True):
    """Core Metropolis/replica loop, vectorized across ladder levels."""
    rng = np.random.default_rng(cfg.seed)
    betas = np.asarray(betas, dtype=float)
    L = len(betas)
    n = 2 * cfg.half_width + 1
    sqm = np.sqrt(cfg.m)

    a = sphere_uniform(cfg.half_width, cfg.m, L, rng=rng)
    h = hamiltonian_values(a)
    sigma = np.full(L, cfg.proposal_sigma)

    n_kept = (cfg.n_steps - cfg.burn_in + cfg.thin - 1) // cfg.thin
    kept = np.empty((n_kept, L, n), dtype=complex)
    h_kept = np.empty((n_kept, L))
    kept_i = 0

    tan_att = np.zeros(L, dtype=int)
    tan_acc = np.zeros(L, dtype=int)
    win_att = np.zeros(L, dtype=int)
    win_acc = np.zeros(L, dtype=int)
    swap_att = np.zeros(max(L - 1, 1), dtype=int)
    swap_acc = np.zeros(max(L - 1, 1), dtype=int)

    lo, hi = cfg.target_accept
    p_rot = cfg.p_rotate
    p_ref = p_rot + cfg.p_reflect
    p_shf = p_ref + cfg.p_shift

    for step in range(cfg.n_steps):
        u_move = rng.random(L)
        phases = rng.uniform(0.0, 2.0 * np.pi, L)
        shifts = np.where(rng.random(L) < 0.5, -1, 1)
        normals = rng.standard_normal((L, 2 * n))
        u_acc = rng.random(L)

        prop = a.copy()
        rot = u_move < p_rot
        ref = (u_move >= p_rot) & (u_move < p_ref)
        shf = (u_move >= p_ref) & (u_move < p_shf)
        tan = u_move >= p_shf

        if np.any(rot):
            prop[rot] = a[rot] * np.exp(1j * phases[rot])[:, None]
        if np.any(ref):
            prop[ref] = a[ref, ::-1]
        for i in np.nonzero(shf)[0]:
            prop[i] = np.roll(a[i], shifts[i])
        if np.any(tan):
            eta = normals[:, 0::2] + 1j * normals[:, 1::2]
            ovl = np.real(np.sum(eta * np.conj(a), axis=1)) / cfg.m
            eta -= ovl[:, None] * a
            cand = a + sigma[:, None] * eta
            cand *= (sqm / np.sqrt(mass_values(cand)))[:, None]
            prop[tan] = cand[tan]

        h_prop = hamiltonian_values(prop)
        accept = u_acc <= np.exp(np.minimum(0.0, -betas * (h_prop - h)))
        a[accept] = prop[accept]
        h[accept] = h_prop[accept]

        in_burn = step < cfg.burn_in
        tan_idx = np.nonzero(tan)[0]
        if not in_burn:
            tan_att[tan_idx] += 1
            tan_acc[tan_idx] += accept[tan_idx]
        else:
            win_att[tan_idx] += 1
            win_acc[tan_idx] += accept[tan_idx]
            if cfg.tune_interval and (step + 1) % cfg.tune_interval == 0:
                with np.errstate(invalid="ignore"):
                    rate = np.where(win_att > 0, win_acc / np.maximum(win_att, 1), np.nan)
                grow = (rate > hi) & (win_att > 0)
                shrink = (rate < lo) & (win_att > 0)
                sigma[grow] *= 1.2
                sigma[shrink] /= 1.2
                win_att[:] = 0
                win_acc[:] = 0

        if L > 1 and swap_stride and (step + 1) % swap_stride == 0:
            parity = ((step + 1) // swap_stride) % 2
            for i in range(parity, L - 1, 2):
                swap_att[i] += 1
                delta = (betas[i] - betas[i + 1]) * (h[i] - h[i + 1])
                if np.log(rng.random()) < min(0.0, delta):
                    a[[i, i + 1]] = a[[i + 1, i]]
                    h[[i, i + 1]] = h[[i + 1, i]]
                    swap_acc[i] += 1

        # re-normalize to the sphere to stop floating-point mass drift
        a *= (sqm / np.sqrt(mass_values(a)))[:, None]

        if step >= cfg.burn_in and (step - cfg.burn_in) % cfg.thin == 0:
            kept[kept_i] = a
            h_kept[kept_i] = h
            kept_i += 1

    kept = kept[:kept_i]
    h_kept = h_kept[:kept_i]
    rates = np.where(tan_att > 0, tan_acc / np.maximum(tan_att, 1), 0.0)
    results = tuple(
        ChainResult(
            half_width=cfg.half_width,
            m=cfg.m,
            beta=float(betas[i]),
            samples_array=kept[:, i, :].copy(),
            h_values=h_kept[:, i].copy(),
            accept_rate=float(rates[i]),
            proposal_sigma=float(sigma[i]),
            seed=cfg.seed,
        )
        for i in range(L)
    )
    swap_rates = np.where(swap_att > 0, swap_acc / np.maximum(swap_att, 1), 0.0)
    return results, swap_rates[:max(L - 1, 0)] if L > 1 else np.zeros(0)


def mcmc_run(cfg):
    """Single Metropolis chain targeting e^{-beta H} on S(m)."""
    results, _ = _run_ladder(cfg, [cfg.beta], swap_stride=0)
    return results[0]


def replica_exchange_run(cfg, betas, swap_stride=5):
    """Parallel tempering across ``betas`` with Metropolis swap moves.

    All levels share the step budget of ``cfg``; ``cfg.beta`` is ignored in
    favour of the ladder.  Swaps between adjacent levels are attempted every
    ``swap_stride`` steps with the standard min(1, e^{(b_i - b_j)(H_i - H_j)})
    rule, alternating pair parity.
    """
    betas = tuple(float(b) for b in betas)
    if len(betas) < 2:
        raise ConfigError("replica exchange needs at least two beta levels")
    if list(betas) != sorted(betas):
        raise ConfigError("betas must be sorted ascending")
    results, swap_rates = _run_ladder(cfg, betas, swap_stride=swap_stride)
    return ReplicaExchangeResult(betas=betas, levels=results,
                                 swap_acceptance=swap_rates)


# ---------------------------------------------------------------------------
# Gaussian reference measure
# ---------------------------------------------------------------------------

# validity guard: require the fluctuation scale sqrt(11/(2 beta m)) to stay
# within ~10% of the sphere radius; the 0.105 slack admits beta m^2 = 500
GUARD_RATIO = 0.105


@dataclass(frozen=True)
class GaussianReference:
    half_width: int
    m: float
    beta: float
    samples_array: np.ndarray
    centers: np.ndarray
    phases: np.ndarray

    @property
    def n_samples(self):
        return self.samples_array.shape[0]

    def iter_states(self):
        return batch_states(self.samples_array, self.half_width)


def reference_tangent_covariance(half_width, m, beta, center=0):
    """(1/beta) x pseudo-inverse of the shifted operator on its positive part."""
    from .spectral import shifted_operator

    A = shifted_operator(half_width, m, center, 0.0).entries
    w, V = np.linalg.eigh(A)
    pos = w > 1e-8 * m
    return (V[:, pos] / (beta * w[pos])) @ V[:, pos].T


def gaussian_reference_sample(half_width, m, beta, count, seed=0, center=None):
    """Direct draws from the Gaussian-like reference around the minimizers.

    A centre k is drawn uniformly (or fixed via ``center``), a phase theta
    uniformly on [0, 2pi); the tangent fluctuation is Gaussian with covariance
    (1/beta) A^+ restricted to the positive eigenspace of the shifted operator
    at e^{i theta} b*_k, and the perturbed point is re-normalized to S(m).
    Far sites receive i.i.d. fluctuations of variance (11/14)/beta per real
    coordinate.  Guarded to the regime where fluctuations are small compared
    with the sphere radius.
    """
    from .spectral import shifted_operator

    fluct = np.sqrt(11.0 / (2.0 * beta * m))
    if not (fluct <= GUARD_RATIO * np.sqrt(m)):
        raise ValidityGuard(
            f"beta {beta} too small: fluctuation scale {fluct:.3g} exceeds "
            f"{GUARD_RATIO} sqrt(m)")

    rng = np.random.default_rng(seed)
    centers_all, bank = minimizer_bank(half_width, m)
    if center is None:
        ks = rng.choice(centers_all, size=count)
    else:
        if center not in centers_all:
            raise ValueError(f"center {center} is not a legal centre")
        ks = np.full(count, int(center))
    thetas = rng.uniform(0.0, 2.0 * np.pi, count)

    n = 2 * half_width + 1
    out = np.empty((count, n), dtype=complex)
    for k in np.unique(ks):
        mask = ks == k
        A = shifted_operator(half_width, m, int(k), 0.0).entries
        w, V = np.linalg.eigh(A)
        pos = w > 1e-8 * m
        scaled = V[:, pos] / np.sqrt(beta * w[pos])
        g = rng.standard_normal((int(mask.sum()), int(pos.sum())))
        xi = g @ scaled.T
        xi_c = xi[:, 0::2] + 1j * xi[:, 1::2]
        raw = bank[centers_all.tolist().index(k)][None, :] + xi_c
        raw = raw * np.exp(1j * thetas[mask])[:, None]
        raw *= (np.sqrt(m) / np.sqrt(mass_values(raw)))[:, None]
        out[mask] = raw
    return GaussianReference(half_width, m, beta, out, ks.astype(int), thetas)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def integrated_autocorr_time(series, max_lag=None):
    """Integrated autocorrelation time by the initial positive sequence rule."""
    x = np.asarray(series, dtype=float)
    x = x - x.mean()
    nx = len(x)
    if nx < 4 or np.allclose(x, 0.0):
        return 1.0
    max_lag = min(nx // 3, 2000) if max_lag is None else max_lag
    f = np.fft.rfft(x, n=2 * nx)
    acov = np.fft.irfft(f * np.conj(f))[:max_lag + 1]
    rho = acov / acov[0]
    tau = 1.0
    for ell in range(1, max_lag + 1):
        if rho[ell] <= 0:
            break
        tau += 2.0 * rho[ell]
    return float(max(tau, 1.0))


def chi_square_uniform(counts, ess_factor=1.0):
    """(statistic, p-value) of the uniformity chi-square on scaled counts.

    ``ess_factor`` in (0, 1] rescales counts to an effective sample size so
    that autocorrelated chains are not over-penalized.
    """
    from scipy.stats import chi2

    c = np.asarray(counts, dtype=float) * ess_factor
    expected = c.sum() / len(c)
    if expected <= 0:
        return 0.0, 1.0
    stat = float(np.sum((c - expected) ** 2 / expected))
    return stat, float(chi2.sf(stat, len(c) - 1))


def tangent_fluctuations(samples, half_width, m, frame_center=0):
    """Frame-aligned fluctuations of samples in one canonical well.

    Samples whose nearest minimizer is the canonical (all-plus) class at
    ``frame_center`` are phase-rotated into the real frame (theta-hat -> 0),
    projected orthogonal to b* and i b*, and returned as interleaved rows.
    """
    samples = np.atleast_2d(samples)
    centers, classes, theta, _, _ = _nearest_arrays(samples, half_width, m)
    sel = (centers == frame_center) & (classes == 0)
    if not np.any(sel):
        return np.zeros((0, 2 * samples.shape[1]))
    _, _, bank = minimizer_bank(half_width, m, sign_classes=False)
    b = samples[sel] * np.exp(-1j * theta[sel])[:, None]
    u = bank[frame_center + half_width - 1] / np.sqrt(m)
    # real pairing with a real template: separate real/imag components
    b = b - (b.real @ u)[:, None] * u[None, :]
    b = b - 1j * (b.imag @ u)[:, None] * u[None, :]
    return interleave(b)


def tangent_covariance(samples, half_width, m, frame_center=0):
    """Second-moment matrix of frame-aligned tangent fluctuations."""
    X = tangent_fluctuations(samples, half_width, m, frame_center)
    if X.shape[0] == 0:
        raise ValueError(f"no samples have nearest centre {frame_center}")
    return (X.T @ X) / X.shape[0]


@dataclass(frozen=True)
class ConcentrationReport:
    count: int
    cap_fraction: dict
    site_centers: np.ndarray
    site_histogram: np.ndarray
    class_histogram: np.ndarray
    phase_bin_edges: np.ndarray
    phase_histogram: np.ndarray
    tangent_covariance: np.ndarray
    g_vs_h: dict
    site_ess: float
    phase_ess: float


def concentration_report(samples, half_width, m, eps=(0.1, 0.2, 0.3, 0.5),
                         phase_bins=16, frame_center=0, g_radius_factor=0.2):
    """Concentration and fluctuation diagnostics for a sample batch.

    Distances are measured to the full minimizer set (all sign classes); the
    site histogram pools sign classes per centre and the class histogram
    pools centres per sign class.  ``g_vs_h`` summarizes |(H - h*) - G| over
    samples within ``g_radius_factor * sqrt(m)`` of the minimizer set, where
    G is evaluated at the sample's nearest minimizer (cubic-order agreement
    is expected close to the wells).
    """
    samples = np.atleast_2d(samples)
    count = samples.shape[0]
    all_centers = legal_centers(half_width)
    centers, classes, theta, dist, unique = _nearest_arrays(samples, half_width, m)

    cap = {float(e): float(np.mean(dist <= e)) for e in eps}
    site_hist = np.bincount(centers + half_width - 1, minlength=len(all_centers))
    class_hist = np.bincount(classes, minlength=len(SIGN_CLASSES))
    edges = np.linspace(0.0, 2.0 * np.pi, phase_bins + 1)
    phase_hist = np.histogram(theta, bins=edges)[0]

    cov = tangent_covariance(samples, half_width, m, frame_center)

    h_star = minimizer_energy(m)
    h_vals = hamiltonian_values(samples)
    sel = (dist <= g_radius_factor * np.sqrt(m)) & unique
    if np.any(sel):
        g_err = _g_residuals(samples[sel], centers[sel], classes[sel],
                             theta[sel], h_vals[sel], half_width, m, h_star)
        g_summary = {"mean": float(np.mean(g_err)), "max": float(np.max(g_err)),
                     "count": int(sel.sum())}
    else:
        g_summary = {"mean": np.nan, "max": np.nan, "count": 0}

    site_tau = integrated_autocorr_time(centers)
    phase_tau = max(integrated_autocorr_time(np.cos(theta)),
                    integrated_autocorr_time(np.sin(theta)))
    return ConcentrationReport(
        count=count,
        cap_fraction=cap,
        site_centers=all_centers,
        site_histogram=site_hist,
        class_histogram=class_hist,
        phase_bin_edges=edges,
        phase_histogram=phase_hist,
        tangent_covariance=cov,
        g_vs_h=g_summary,
        site_ess=float(count / site_tau),
        phase_ess=float(count / phase_tau),
    )


def _g_residuals(samples, centers, classes, theta, h_vals, half_width, m, h_star):
    """|(H - h*) - G| per sample, grouped by nearest well.

    Uses the phase invariance of G: each sample is rotated into the real
    frame of its nearest minimizer so one shifted matrix per well suffices.
    """
    _, _, bank = minimizer_bank(half_width, m)
    rows = 4 * (centers + half_width - 1) + classes
    out = np.empty(len(samples))
    for row in np.unique(rows):
        mask = rows == row
        u = bank[row] / np.sqrt(m)
        A = shifted_matrix_at(bank[row].astype(complex), m)
        b = samples[mask] * np.exp(-1j * theta[mask])[:, None]
        b = b - (b.real @ u)[:, None] * u[None, :]
        xi = interleave(b)
        g = 0.5 * np.einsum("ij,jk,ik->i", xi, A, xi)
        out[mask] = np.abs((h_vals[mask] - h_star) - g)
    return out


def phase_average_test(phi, samples, half_width, n_phases=64):
    """(mean of phi, mean of its phase average) over a sample batch.

    The second entry averages phi over ``n_phases`` equispaced global phase
    rotations of each sample; for phase-invariant targets the two means agree
    within Monte Carlo error.
    """
    samples = np.atleast_2d(samples)
    vals = np.array([phi(LatticeState(half_width, row)) for row in samples])
    phases = np.exp(1j * 2.0 * np.pi * np.arange(n_phases) / n_phases)
    avg = np.empty(len(samples))
    for i, row in enumerate(samples):
        avg[i] = np.mean([phi(LatticeState(half_width, p * row)) for p in phases])
    return float(vals.mean()), float(avg.mean())
