"""Batch front-end: reproducible experiments with JSON configs, CSV outputs.

    toy-cascade {simulate|stationary|minimize|hessian|sample|report}
        --config FILE [--seed INT] [--threads INT] [--out DIR]

The environment variable TOY_CASCADE_OUT overrides --out.  Every command
writes a ``manifest.json`` (command, config, seed, git description, wall
times, output files with sha256 hashes) even when it fails numerically.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 budget exceeded.  Floating-point values are printed with ``repr``
(shortest round-trip), so identical (command, config, seed) reproduce
byte-identical data files on IEEE-754 platforms.
"""

import argparse
import datetime
import hashlib
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import gibbs, minimize, spectral, stationary
from .dynamics import IntegratorConfig, integrate
from .errors import (Antipodal, BudgetExceeded, ConfigError, DegenerateSite,
                     DoesNotFit, IterationFailure, NonConvergence,
                     NonUniqueNearest, NotPositive, NotSymmetric, SolveFailed,
                     SupportTooSmall, ValidityGuard)
from .lattice import (LatticeState, MinimizerId, minimizer_state,
                      state_from_json_dict)

NUMERIC_FAILURES = (Antipodal, DegenerateSite, DoesNotFit, IterationFailure,
                    NonConvergence, NonUniqueNearest, NotPositive,
                    NotSymmetric, SolveFailed, SupportTooSmall, ValidityGuard)


def _fmt(x):
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, (float, np.floating)) else str(v)
                              for v in row) + "\n")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def _git_describe():
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _utcnow():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


class _Manifest:
    def __init__(self, command, config, seed, out_dir):
        self.data = {
            "command": command,
            "config": config,
            "seed": seed,
            "git_describe": _git_describe(),
            "started": _utcnow(),
            "finished": None,
            "outputs": [],
            "error": None,
        }
        self.out_dir = Path(out_dir)

    def add_output(self, path):
        self.data["outputs"].append(
            {"path": str(Path(path).name), "sha256": _sha256(path)})

    def finish(self, error=None):
        self.data["finished"] = _utcnow()
        self.data["error"] = error
        _write_json(self.out_dir / "manifest.json", self.data)


def _require(cfg, key, kind, default=None):
    if key not in cfg:
        if default is not None:
            return default
        raise ConfigError(f"config missing required key '{key}'")
    try:
        return kind(cfg[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key '{key}': {exc}") from exc


def _initial_state(spec, seed):
    if "re" in spec and "im" in spec:
        return state_from_json_dict(spec)
    preset = spec.get("preset")
    n = _require(spec, "N", int)
    if preset == "minimizer":
        return minimizer_state(
            MinimizerId(_require(spec, "m", float, 1.0),
                        _require(spec, "center", int, 0),
                        _require(spec, "phase", float, 0.0)), n)
    if preset == "single_mode":
        amps = np.zeros(2 * n + 1, dtype=complex)
        site = _require(spec, "site", int, 0)
        if abs(site) > n:
            raise ConfigError(f"site {site} outside lattice")
        amps[site + n] = complex(_require(spec, "re", float, 1.0),
                                 _require(spec, "im", float, 0.0))
        return LatticeState(n, amps)
    if preset == "uniform_random":
        m = _require(spec, "m", float, 1.0)
        return LatticeState(n, gibbs.sphere_uniform(n, m, 1, seed=seed)[0])
    raise ConfigError(f"unknown initial-state preset {preset!r}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg, out_dir, seed, threads, manifest):
    init = cfg.get("initial")
    integ = cfg.get("integrator")
    if not isinstance(init, dict) or not isinstance(integ, dict):
        raise ConfigError("simulate config needs 'initial' and 'integrator' objects")
    state = _initial_state(init, seed)
    try:
        icfg = IntegratorConfig(
            scheme=integ.get("scheme", "rk4"),
            dt=_require(integ, "dt", float),
            t_final=_require(integ, "t_final", float),
            record_stride=_require(integ, "record_stride", int, 1),
            newton_tol=_require(integ, "newton_tol", float, 1e-12),
            newton_max_iter=_require(integ, "newton_max_iter", int, 50),
        )
    except ConfigError:
        raise
    traj = integrate(state, icfg)

    n = state.half_width
    sites = list(range(-n, n + 1))
    header = (["t", "H", "M"] + [f"re_{j}" for j in sites] + [f"im_{j}" for j in sites])
    rows = []
    for i, t in enumerate(traj.times):
        amps = traj.states[i].amps
        rows.append([t, traj.h_series[i], traj.m_series[i]]
                    + list(amps.real) + list(amps.imag))
    path = Path(out_dir) / "trajectory.csv"
    _write_csv(path, header, rows)
    manifest.add_output(path)
    hd, md = traj.drift()
    print(f"H_drift={hd:.3e} M_drift={md:.3e}")
    return 0


def cmd_minimize(cfg, out_dir, seed, threads, manifest):
    n = _require(cfg, "N", int)
    m = _require(cfg, "m", float, 1.0)
    n_starts = _require(cfg, "n_starts", int, 16)
    result = minimize.minimize_h_on_sphere(n, m, n_starts=n_starts, seed=seed,
                                           threads=threads)
    near = gibbs.nearest_minimizer(result.state)
    out = {
        "energy": result.energy,
        "center": near.center,
        "phase": near.phase,
        "distance_to_Bstar": near.distance,
        "iterations": result.iterations,
        "converged": result.converged,
        "grad_norm": result.grad_norm,
        "seed": seed,
    }
    path = Path(out_dir) / "minimize.json"
    _write_json(path, out)
    manifest.add_output(path)
    print(f"energy={out['energy']!r} center={out['center']} "
          f"distance_to_Bstar={out['distance_to_Bstar']:.3e}")
    return 0


def cmd_hessian(cfg, out_dir, seed, threads, manifest):
    n = _require(cfg, "N", int)
    m = _require(cfg, "m", float, 1.0)
    center = _require(cfg, "center", int, 0)
    theta = _require(cfg, "theta", float, 0.0)
    op = spectral.shifted_operator(n, m, center, theta)
    report = spectral.eigen_decompose(op, m=m, half_width=n)
    out = {
        "eigenvalues": [float(v) for v in report.eigenvalues],
        "catalogue_match": bool(report.catalogue_match),
        "residual_max": float(np.max(report.residuals)),
    }
    path = Path(out_dir) / "hessian.json"
    _write_json(path, out)
    manifest.add_output(path)
    print(f"catalogue_match={out['catalogue_match']} residual_max={out['residual_max']:.3e}")
    return 0


def cmd_stationary(cfg, out_dir, seed, threads, manifest):
    max_nodes = _require(cfg, "max_nodes", int)
    omega = _require(cfg, "omega", float, 1.0)
    rows = []
    for n, _ in stationary.scan_positivity(max_nodes, omega):
        prof = stationary.solve_phase_locked(n, omega)
        rows.append([n, int(prof.positive), float(np.min(prof.rho)), prof.mass])
    path = Path(out_dir) / "stationary.csv"
    _write_csv(path, ["n", "positive", "min_rho", "mass"], rows)
    manifest.add_output(path)
    for row in rows:
        print(f"n={row[0]} positive={bool(row[1])} min_rho={row[2]:.6g} mass={row[3]:.6g}")
    return 0


def _sampler_config(cfg, seed):
    return gibbs.SamplerConfig(
        half_width=_require(cfg, "N", int),
        m=_require(cfg, "m", float, 1.0),
        beta=_require(cfg, "beta", float, 0.0),
        n_steps=_require(cfg, "n_steps", int),
        burn_in=_require(cfg, "burn_in", int),
        thin=_require(cfg, "thin", int, 1),
        proposal_sigma=_require(cfg, "proposal_sigma", float, 0.3),
        seed=seed,
        target_accept=tuple(cfg.get("target_accept", (0.3, 0.5))),
        p_rotate=_require(cfg, "p_rotate", float, 0.10),
        p_reflect=_require(cfg, "p_reflect", float, 0.05),
        p_shift=_require(cfg, "p_shift", float, 0.10),
    )


def _write_archive(out_dir, chain, cfg_dict, extra, manifest):
    n = chain.half_width
    sites = list(range(-n, n + 1))
    centers, _, theta, dist, _ = gibbs._nearest_arrays(chain.samples_array, n, chain.m)
    header = (["step", "H", "k_hat", "theta_hat", "distance"]
              + [f"re_{j}" for j in sites] + [f"im_{j}" for j in sites])
    burn = cfg_dict.get("burn_in", 0)
    thin = cfg_dict.get("thin", 1)
    rows = []
    for i in range(chain.n_samples):
        amps = chain.samples_array[i]
        rows.append([burn + i * thin, chain.h_values[i], int(centers[i]),
                     float(theta[i]), float(dist[i])]
                    + list(amps.real) + list(amps.imag))
    tag = _fmt(chain.beta).replace(".", "p").replace("-", "m")
    csv_path = Path(out_dir) / f"samples_beta_{tag}.csv"
    _write_csv(csv_path, header, rows)
    manifest.add_output(csv_path)
    sidecar = {
        "N": chain.half_width,
        "m": chain.m,
        "beta": chain.beta,
        "seed": chain.seed,
        "accept_rate": chain.accept_rate,
        "proposal_sigma_final": chain.proposal_sigma,
        "n_samples": chain.n_samples,
        "config": cfg_dict,
    }
    sidecar.update(extra)
    json_path = csv_path.with_suffix(".json")
    _write_json(json_path, sidecar)
    manifest.add_output(json_path)
    return csv_path


def cmd_sample(cfg, out_dir, seed, threads, manifest):
    scfg = _sampler_config(cfg, seed)
    betas = cfg.get("betas")
    if betas:
        result = gibbs.replica_exchange_run(
            scfg, [float(b) for b in betas],
            swap_stride=_require(cfg, "swap_stride", int, 5))
        for level in result.levels:
            _write_archive(out_dir, level, cfg,
                           {"swap_acceptance": [float(s) for s in result.swap_acceptance],
                            "betas": list(result.betas)}, manifest)
        print(f"levels={len(result.levels)} "
              f"swap_acceptance={[round(float(s), 3) for s in result.swap_acceptance]}")
    else:
        chain = gibbs.mcmc_run(scfg)
        _write_archive(out_dir, chain, cfg, {}, manifest)
        print(f"accept_rate={chain.accept_rate:.3f} n_samples={chain.n_samples}")
    return 0


def _load_archive_samples(csv_path):
    sidecar_path = Path(csv_path).with_suffix(".json")
    with open(sidecar_path) as fh:
        sidecar = json.load(fh)
    n = int(sidecar["N"])
    raw = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    n_sites = 2 * n + 1
    re = raw[:, 5:5 + n_sites]
    im = raw[:, 5 + n_sites:5 + 2 * n_sites]
    return sidecar, re + 1j * im


def cmd_report(cfg, out_dir, seed, threads, manifest):
    archives = cfg.get("archives")
    if not archives or not isinstance(archives, list):
        raise ConfigError("report config needs an 'archives' list of CSV paths")
    rows = []
    detail = {}
    for path in archives:
        sidecar, samples = _load_archive_samples(path)
        n, m, beta = int(sidecar["N"]), float(sidecar["m"]), float(sidecar["beta"])
        rep = gibbs.concentration_report(samples, n, m)
        site_p = gibbs.chi_square_uniform(
            rep.site_histogram, ess_factor=min(1.0, rep.site_ess / rep.count))[1]
        phase_p = gibbs.chi_square_uniform(
            rep.phase_histogram, ess_factor=min(1.0, rep.phase_ess / rep.count))[1]
        rows.append([beta, rep.count,
                     rep.cap_fraction[0.1], rep.cap_fraction[0.2],
                     rep.cap_fraction[0.3], rep.cap_fraction[0.5],
                     site_p, phase_p, rep.g_vs_h["mean"]])
        detail[str(beta)] = {
            "count": rep.count,
            "cap_fraction": {str(k): v for k, v in rep.cap_fraction.items()},
            "site_histogram": [int(c) for c in rep.site_histogram],
            "phase_histogram": [int(c) for c in rep.phase_histogram],
            "site_chi2_p": site_p,
            "phase_chi2_p": phase_p,
            "g_vs_h": rep.g_vs_h,
            "site_ess": rep.site_ess,
            "phase_ess": rep.phase_ess,
            "tangent_covariance": [[float(v) for v in row]
                                   for row in rep.tangent_covariance],
        }
    rows.sort(key=lambda r: r[0])
    csv_path = Path(out_dir) / "report.csv"
    _write_csv(csv_path, ["beta", "count", "cap_0.1", "cap_0.2", "cap_0.3",
                          "cap_0.5", "site_chi2_p", "phase_chi2_p", "g_vs_h_mean"],
               rows)
    manifest.add_output(csv_path)
    json_path = Path(out_dir) / "report.json"
    _write_json(json_path, detail)
    manifest.add_output(json_path)
    for row in rows:
        print(f"beta={row[0]:g} cap(0.3)={row[4]:.4f} site_p={row[6]:.4f} "
              f"phase_p={row[7]:.4f}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "stationary": cmd_stationary,
    "minimize": cmd_minimize,
    "hessian": cmd_hessian,
    "sample": cmd_sample,
    "report": cmd_report,
}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="toy-cascade", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed (default 0)")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out", default=".", help="output directory")
    args = parser.parse_args(argv)

    out_dir = Path(os.environ.get("TOY_CASCADE_OUT", args.out))
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        print(f"config parse error: {exc.msg} at line {exc.lineno} column {exc.colno}",
              file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config read error: {exc}", file=sys.stderr)
        return 2
    if not isinstance(cfg, dict):
        print("config must be a JSON object", file=sys.stderr)
        return 2

    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    manifest = _Manifest(args.command, cfg, seed, out_dir)
    try:
        code = COMMANDS[args.command](cfg, out_dir, seed, max(args.threads, 1), manifest)
        manifest.finish()
        return code
    except (ConfigError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        manifest.finish(error=f"config: {exc}")
        return 2
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        manifest.finish(error=f"budget: {exc}")
        return 4
    except NUMERIC_FAILURES as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        manifest.finish(error=f"numerical: {exc}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
