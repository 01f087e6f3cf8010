"""Time integration of the lattice flow and its hydrodynamic form.

The equations of motion are

    db_j/dt = i ( -|b_j|^2 b_j + 2 conj(b_j) (b_{j-1}^2 + b_{j+1}^2) )

with Dirichlet boundary, equivalently db/dt = -(i/2) grad_h(b) in the
package's gradient convention.  In Madelung variables (rho, theta):

    dtheta_j/dt = -rho_j + 2 rho_{j-1} cos(2(theta_{j-1}-theta_j))
                         + 2 rho_{j+1} cos(2(theta_{j+1}-theta_j))
    drho_j/dt   = -4 rho_j rho_{j-1} sin(2(theta_{j-1}-theta_j))
                  -4 rho_j rho_{j+1} sin(2(theta_{j+1}-theta_j))

In-phase profiles have drho/dt = 0 and rotate rigidly; for the three-mode
minimizer of mass m the measured rotation rate is 7m/11 (the value certified
by substituting the profile into the equations of motion; see the dynamics
tests, which pin this oracle).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateSite, NonConvergence
from .lattice import LatticeState, hamiltonian_values, mass_values

SCHEMES = ("rk4", "implicit_midpoint")


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "rk4"
    dt: float = 1e-3
    t_final: float = 1.0
    record_stride: int = 1
    newton_tol: float = 1e-12
    newton_max_iter: int = 50

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if not (self.dt > 0):
            raise ConfigError("dt must be positive")
        if not (self.t_final > self.dt):
            raise ConfigError("t_final must exceed dt")
        if self.record_stride < 1:
            raise ConfigError("record_stride must be >= 1")
        if not (self.newton_tol > 0):
            raise ConfigError("newton_tol must be positive")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: tuple
    h_series: np.ndarray
    m_series: np.ndarray

    def __post_init__(self):
        if not (len(self.times) == len(self.states) == len(self.h_series) == len(self.m_series)):
            raise ValueError("trajectory columns must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def final_state(self):
        return self.states[-1]

    def drift(self):
        """(max |H(t)-H(0)|, max |M(t)-M(0)|) over recorded times."""
        return (float(np.max(np.abs(self.h_series - self.h_series[0]))),
                float(np.max(np.abs(self.m_series - self.m_series[0]))))


def rhs_values(amps):
    """Raw-array right-hand side of the flow (last axis = sites)."""
    a = np.asarray(amps, dtype=complex)
    left = np.zeros_like(a)
    left[..., 1:] = a[..., :-1]
    right = np.zeros_like(a)
    right[..., :-1] = a[..., 1:]
    return 1j * (-np.abs(a) ** 2 * a + 2.0 * np.conj(a) * (left ** 2 + right ** 2))


def rhs(state):
    """Time derivative of a lattice state under the cascade flow."""
    return state.with_amps(rhs_values(state.amps))


def _rk4_step(a, dt):
    k1 = rhs_values(a)
    k2 = rhs_values(a + 0.5 * dt * k1)
    k3 = rhs_values(a + 0.5 * dt * k2)
    k4 = rhs_values(a + dt * k3)
    return a + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _implicit_midpoint_step(a, dt, tol, max_iter, step_index):
    # fixed-point iteration on the midpoint value y = a + (dt/2) f(y)
    y = a + 0.5 * dt * rhs_values(a)
    for _ in range(max_iter):
        y_next = a + 0.5 * dt * rhs_values(y)
        delta = float(np.max(np.abs(y_next - y)))
        y = y_next
        if delta <= tol:
            return 2.0 * y - a
        if not np.isfinite(delta):
            break
    raise NonConvergence(step_index)


def integrate(state, cfg):
    """Integrate ``state`` under ``cfg`` and record a trajectory.

    Recording happens every ``record_stride`` steps, always including the
    initial and final times; H and M are evaluated at recorded times only.
    """
    n_steps = int(round(cfg.t_final / cfg.dt))
    if n_steps < 1:
        raise ConfigError("t_final/dt must round to at least one step")
    a = np.array(state.amps, dtype=complex)
    N = state.half_width

    times = [0.0]
    recorded = [a.copy()]
    for step in range(1, n_steps + 1):
        if cfg.scheme == "rk4":
            a = _rk4_step(a, cfg.dt)
        else:
            a = _implicit_midpoint_step(a, cfg.dt, cfg.newton_tol,
                                        cfg.newton_max_iter, step)
        if step % cfg.record_stride == 0 or step == n_steps:
            times.append(step * cfg.dt)
            recorded.append(a.copy())

    stacked = np.array(recorded)
    return Trajectory(
        times=np.asarray(times),
        states=tuple(LatticeState(N, r) for r in recorded),
        h_series=np.asarray(hamiltonian_values(stacked), dtype=float),
        m_series=np.asarray(mass_values(stacked), dtype=float),
    )


def hydro_rhs(hydro, theta_sites=None):
    """Time derivatives (drho, dtheta) of Madelung variables.

    ``dtheta`` is only meaningful where rho > 0.  By default degenerate sites
    get NaN phase derivatives; passing an explicit iterable of sites in
    ``theta_sites`` instead raises :class:`DegenerateSite` if any requested
    site has zero intensity.  ``drho`` is always defined.
    """
    rho = np.asarray(hydro.rho, dtype=float)
    th = np.asarray(hydro.theta, dtype=float)
    rl = np.zeros_like(rho)
    rl[1:] = rho[:-1]
    rr = np.zeros_like(rho)
    rr[:-1] = rho[1:]
    tl = np.zeros_like(th)
    tl[1:] = th[:-1]
    tr = np.zeros_like(th)
    tr[:-1] = th[1:]

    drho = (-4.0 * rho * rl * np.sin(2.0 * (tl - th))
            - 4.0 * rho * rr * np.sin(2.0 * (tr - th)))
    dtheta = (-rho + 2.0 * rl * np.cos(2.0 * (tl - th))
              + 2.0 * rr * np.cos(2.0 * (tr - th)))

    degenerate = rho <= 0.0
    if theta_sites is None:
        dtheta = np.where(degenerate, np.nan, dtheta)
    else:
        N = hydro.half_width
        for j in theta_sites:
            if degenerate[j + N]:
                raise DegenerateSite(f"phase derivative requested at empty site {j}")
    return drho, dtheta


def measure_rotation_rate(traj, site, min_modulus=1e-8):
    """Least-squares slope of the unwrapped phase at ``site`` along ``traj``.

    Raises :class:`DegenerateSite` if the modulus dips below ``min_modulus``
    anywhere on the trajectory (the phase is then unreliable).
    """
    series = np.array([s.amp(site) for s in traj.states])
    if np.min(np.abs(series)) < min_modulus:
        raise DegenerateSite(f"|b_{site}| dips below {min_modulus} along the trajectory")
    phases = np.unwrap(np.angle(series))
    slope, _ = np.polyfit(traj.times, phases, 1)
    return float(slope)
