"""Command-line entry point: ``octolift run | care-check | alloc-check | metrics``."""
import argparse
import json
import logging
import sys

import numpy as np

from .config import ConfigError, default_config, read_config
from .harness import SimulationError, compute_metrics, read_log, run_experiment, write_log
from .multibody import LoadParams
from .winf_control import (AllocationDomainError, KktSingular, LoopDesign, SolveFailure,
                           attitude_allocation, pairing_constraints, schur_terms,
                           thrust_allocation)

ROUNDTRIP_TOL = 1e-9
CONSTRAINT_TOL = 1e-12
CARE_TOL = 1e-8


def care_report(config):
    """Residual, definiteness and closed-loop spectrum of both loop designs."""
    report = {}
    for name, w in (("translation", config.translation_weights),
                    ("attitude", config.attitude_weights)):
        try:
            sol = LoopDesign.from_weights(w).solution
        except SolveFailure as exc:
            report[name] = {"ok": False, "error": str(exc)}
            continue
        eig_Q = np.linalg.eigvalsh(sol.Q)
        entry = {
            "residual_fro": sol.residual_norm,
            "min_eig_Q": float(eig_Q.min()),
            "max_real_closed_loop": float(sol.closed_loop_eigs.real.max()),
            "closed_loop_eigs": [[float(z.real), float(z.imag)]
                                 for z in sorted(sol.closed_loop_eigs, key=lambda z: (z.real, z.imag))],
        }
        entry["ok"] = bool(entry["residual_fro"] <= CARE_TOL and entry["min_eig_Q"] > 0
                           and entry["max_real_closed_loop"] < 0)
        report[name] = entry
    return report


def random_feasible_triples(n, rng, tilt=0.6):
    """``(f_z, phi_r, theta_r, phi, theta)`` with positive thrust and moderate tilt."""
    f_z = rng.uniform(50.0, 3000.0, n)
    ang = rng.uniform(-tilt, tilt, (n, 4))
    return f_z, ang[:, 0], ang[:, 1], ang[:, 2], ang[:, 3]


def alloc_report(config, n=1000, seed=0):
    """Round-trip of the attitude allocation and of the thrust KKT solve.

    Force commands are generated from known ``(f_z, phi_r, theta_r)`` at a
    random current attitude and inverted again.  For the KKT part, thrusts
    satisfying the pairing constraints are mapped through ``B_bar`` at a random
    state and must be recovered exactly.
    """
    rng = np.random.default_rng(seed)
    f_z, phi_r, theta_r, phi, theta = random_feasible_triples(n, rng)
    worst_rt = 0.0
    for k in range(n):
        u = np.array([f_z[k] * np.cos(phi_r[k]) * np.sin(theta_r[k]),
                      -f_z[k] * np.sin(phi_r[k]),
                      f_z[k] * np.cos(phi[k]) * np.cos(theta[k])])
        got = attitude_allocation(u, phi[k], theta[k])
        want = (f_z[k], phi_r[k], theta_r[k])
        worst_rt = max(worst_rt, abs(got[0] - want[0]) / want[0],
                       abs(got[1] - want[1]), abs(got[2] - want[2]))

    veh, pairs = config.vehicle, config.allocation_pairs
    worst_tau = worst_con = worst_res = 0.0
    n_kkt = max(1, n // 10)
    for _ in range(n_kkt):
        q = np.concatenate([rng.uniform(-5, 5, 3), rng.uniform(-0.5, 0.5, 2), rng.uniform(-np.pi, np.pi, 1)])
        qdot = rng.normal(0.0, 0.5, 6)
        load = LoadParams(rng.uniform(0, 100), rng.uniform(0, 1.5))
        B_bar = schur_terms(q, qdot, veh, load).B_bar
        free = rng.uniform(50.0, 250.0, 8)
        tau_true = free.copy()
        for i, j in pairs:
            tau_true[j] = tau_true[i]
        f = tau_true.sum()
        u_bar = B_bar @ tau_true
        tau = thrust_allocation(u_bar, f, B_bar, pairs)
        C, d = pairing_constraints(f, pairs)
        worst_tau = max(worst_tau, np.max(np.abs(tau - tau_true)) / f)
        worst_con = max(worst_con, np.max(np.abs(C @ tau - d)))
        worst_res = max(worst_res, np.linalg.norm(u_bar - B_bar @ tau))
    report = {
        "attitude_roundtrip_max_err": float(worst_rt),
        "kkt_recovery_max_rel_err": float(worst_tau),
        "kkt_constraint_max_err": float(worst_con),
        "kkt_residual_max": float(worst_res),
        "triples": n,
        "kkt_cases": n_kkt,
    }
    report["ok"] = bool(worst_rt <= ROUNDTRIP_TOL and worst_tau <= ROUNDTRIP_TOL
                        and worst_res <= ROUNDTRIP_TOL and worst_con <= CONSTRAINT_TOL)
    return report


def _load_config(path):
    return read_config(path) if path else default_config()


def _cmd_run(args):
    config = _load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.no_noise:
        changes["measurement_noise"] = False
    if args.true_params:
        changes["true_params"] = True
    if args.no_disturbance:
        changes["disturbance_enabled"] = False
    if args.out:
        changes["output"] = args.out
    config = config.replace(**changes)
    traj, metrics = run_experiment(config)
    if config.output:
        write_log(traj, config.output)
    print(json.dumps(metrics, indent=2))
    return 0


def _cmd_care(args):
    report = care_report(_load_config(args.config))
    print(json.dumps(report, indent=2))
    return 0 if all(v["ok"] for v in report.values()) else 1


def _cmd_alloc(args):
    report = alloc_report(_load_config(args.config), n=args.n, seed=args.seed)
    print(json.dumps(report, indent=2))
    return 0 if report["ok"] else 1


def _cmd_metrics(args):
    traj = read_log(args.log)
    print(json.dumps(compute_metrics(traj, _load_config(args.config)), indent=2))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="octolift", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate the closed loop and write a CSV log")
    run.add_argument("--config", help="TOML config (default: built-in scenario)")
    run.add_argument("--seed", type=int)
    run.add_argument("--no-noise", action="store_true", help="noise-free measurements")
    run.add_argument("--true-params", action="store_true",
                     help="feed true state and load to the controller")
    run.add_argument("--no-disturbance", action="store_true")
    run.add_argument("--out", help="CSV path (overrides run.output)")
    run.set_defaults(func=_cmd_run)

    care = sub.add_parser("care-check", help="Riccati residuals and closed-loop spectra")
    care.add_argument("--config")
    care.set_defaults(func=_cmd_care)

    alloc = sub.add_parser("alloc-check", help="allocation round-trip suite")
    alloc.add_argument("--config")
    alloc.add_argument("--n", type=int, default=1000)
    alloc.add_argument("--seed", type=int, default=0)
    alloc.set_defaults(func=_cmd_alloc)

    met = sub.add_parser("metrics", help="recompute metrics from a CSV log")
    met.add_argument("--log", required=True)
    met.add_argument("--config", help="config the log was produced with")
    met.set_defaults(func=_cmd_metrics)
    return p


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SimulationError, AllocationDomainError, KktSingular) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
