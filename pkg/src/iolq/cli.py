"""Pipeline command line: collect -> learn -> evaluate, plus oracle dumps.

Every artifact is CSV with 17-significant-digit floats so identical configs
reproduce byte-identical outputs. Exit codes: 0 success, 2 rank failure,
3 closed-loop instability, 4 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .closedloop import (UnstableClosedLoop, decay_metrics,
                         simulate_output_feedback, simulate_state_feedback)
from .config import ConfigError, ExperimentConfig, build_instances, load_config
from .matops import is_hurwitz
from .plant import eval_cost
from .realization import construct_oracle, dump_matrices, verify_gain_transfer
from .vi import (EscapeSets, RankDeficient, RegressionData, RegressionSolver,
                 StepSchedule, data_vi, extract_controller, rank_check)

EXIT_OK = 0
EXIT_RANK = 2
EXIT_UNSTABLE = 3
EXIT_CONFIG = 4


def _write_matrix_csv(path, mat):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in np.atleast_2d(np.asarray(mat, dtype=float)):
            writer.writerow([f"{v:.17g}" for v in row])


def _read_matrix_csv(path):
    with open(path, newline="") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh)])


def _oracle_for(cfg, plant, fb):
    return construct_oracle(plant, fb, theta_y_seed=cfg.theta_y_seed,
                            x0=plant.x0)


def cmd_collect(cfg, out, seed=None):
    """Run the probing simulation; write trajectory and regression CSVs."""
    from .vi import collect

    plant, fb, _, probing = build_instances(cfg, seed_override=seed)
    traj, reg = collect(plant, fb, probing, t_end=cfg.horizon, dt=cfg.dt,
                        sample_dt=cfg.sample_dt)
    os.makedirs(out, exist_ok=True)
    traj.to_csv(os.path.join(out, "trajectory.csv"))
    reg.to_csv(out)
    ok, rank, needed = rank_check(reg, rcond=cfg.rank_rcond)
    print(f"collect: {reg.l} intervals, regression rank {rank}/{needed} "
          f"({'ok' if ok else 'DEFICIENT'})")
    manifest = ["trajectory.csv", "i_zz.csv", "i_zu.csv", "i_yy.csv",
                "d_zz.csv"]
    info = {"intervals": reg.l, "rank": rank, "rank_needed": needed,
            "rank_ok": ok, "n_zeta": reg.n_zeta, "m": reg.m, "p": reg.p}
    if not ok and not cfg.allow_rank_deficient:
        print("collect: rank condition failed; aborting "
              "(set allow_rank_deficient = true to continue)")
        return EXIT_RANK, info, manifest
    return EXIT_OK, info, manifest


def cmd_learn(cfg, out, attach_oracle=False):
    """Run the data-driven value iteration on stored regression files."""
    plant, fb, weights, _ = build_instances(cfg)
    reg = RegressionData.from_csv(out, fb.n_zeta, fb.m, fb.p)
    oracle_pk = None
    if attach_oracle:
        oracle = _oracle_for(cfg, plant, fb)
        report = verify_gain_transfer(oracle, plant, weights)
        oracle_pk = (report["p_zeta"], report["k_zeta"])
    try:
        solver = RegressionSolver(reg, fb.b_zeta, weights.q,
                                  rcond=cfg.rank_rcond,
                                  allow_deficient=cfg.allow_rank_deficient)
    except RankDeficient as exc:
        print(f"learn: {exc}")
        return EXIT_RANK, {"error": str(exc)}, []
    p0 = cfg.p0_scale * np.eye(fb.n_zeta)
    p_hat, k_hat, history, converged = data_vi(
        solver, weights, fb.b_zeta, p0=p0,
        schedule=StepSchedule(cfg.schedule_offset),
        escape=EscapeSets(cfg.escape_scale, cfg.escape_growth),
        delta=cfg.delta, max_iter=cfg.max_iter, oracle_pk=oracle_pk,
    )
    k_z, k_eps = extract_controller(k_hat, fb.n_z)
    _write_matrix_csv(os.path.join(out, "p_hat.csv"), p_hat)
    _write_matrix_csv(os.path.join(out, "k_hat.csv"), k_hat)
    _write_matrix_csv(os.path.join(out, "k_z.csv"), k_z)
    _write_matrix_csv(os.path.join(out, "k_eps.csv"), k_eps)
    history.to_csv(os.path.join(out, "history.csv"))
    print(f"learn: {len(history.rows)} iterations, "
          f"converged={converged}, rank {solver.rank}")
    info = {"iterations": len(history.rows), "converged": converged,
            "rank": solver.rank, "full_rank": solver.full_rank}
    manifest = ["p_hat.csv", "k_hat.csv", "k_z.csv", "k_eps.csv",
                "history.csv"]
    return EXIT_OK, info, manifest


def cmd_evaluate(cfg, out, attach_oracle=False):
    """Closed-loop run of the learned controller against the oracle optimum."""
    from .plant import random_unit_vector
    from .realization import plant_optimal_gain

    plant, fb, weights, _ = build_instances(cfg)
    k_z = _read_matrix_csv(os.path.join(out, "k_z.csv"))
    x0_eval = random_unit_vector(plant.n, cfg.eval_x0_seed)
    oracle = _oracle_for(cfg, plant, fb)
    certified = is_hurwitz(oracle.a_xi - fb.b_xi @ k_z)

    try:
        traj = simulate_output_feedback(plant, fb, k_z,
                                        t_end=cfg.eval_horizon, dt=cfg.dt,
                                        sample_dt=cfg.sample_dt, x0=x0_eval)
    except Exception as exc:
        print(f"evaluate: closed loop diverged ({exc})")
        return EXIT_UNSTABLE, {"error": str(exc)}, []
    _, k_star = plant_optimal_gain(plant, weights)
    ref = simulate_state_feedback(plant, k_star, t_end=cfg.eval_horizon,
                                  dt=cfg.dt, sample_dt=cfg.sample_dt,
                                  x0=x0_eval)
    traj.to_csv(os.path.join(out, "closedloop.csv"))
    ref.to_csv(os.path.join(out, "optimal_reference.csv"))
    x_ratio, z_ratio = decay_metrics(traj)
    cost_learned = eval_cost(traj, weights, cfg.eval_horizon)
    cost_optimal = eval_cost(ref, weights, cfg.eval_horizon)
    info = {
        "hurwitz_certificate": bool(certified),
        "x_decay_ratio": x_ratio,
        "z_decay_ratio": z_ratio,
        "cost_learned": cost_learned,
        "cost_optimal": cost_optimal,
    }
    print(f"evaluate: hurwitz={certified} x_decay={x_ratio:.3e} "
          f"z_decay={z_ratio:.3e} cost={cost_learned:.6g} "
          f"(optimal {cost_optimal:.6g})")
    manifest = ["closedloop.csv", "optimal_reference.csv"]
    if not certified or not np.isfinite(x_ratio) or x_ratio > 1.0:
        print("evaluate: stability certificate failed")
        return EXIT_UNSTABLE, info, manifest
    return EXIT_OK, info, manifest


def cmd_oracle(cfg, out):
    """Dump the model-based realization and its verification report."""
    plant, fb, weights, _ = build_instances(cfg)
    oracle = _oracle_for(cfg, plant, fb)
    os.makedirs(out, exist_ok=True)
    paths = dump_matrices(oracle, out)
    report = verify_gain_transfer(oracle, plant, weights)
    _write_matrix_csv(os.path.join(out, "p_zeta_star.csv"), report["p_zeta"])
    _write_matrix_csv(os.path.join(out, "k_zeta_star.csv"), report["k_zeta"])
    _write_matrix_csv(os.path.join(out, "k_star.csv"), report["k_star"])
    info = {
        "xi_are_residual": report["xi_are_residual"],
        "gain_transfer_rel_err": report["gain_transfer_rel_err"],
        "gamma_invariance_rel_err": report["gamma_invariance_rel_err"],
    }
    print("oracle: gain transfer rel err "
          f"{report['gain_transfer_rel_err']:.3e}, gamma invariance "
          f"{report['gamma_invariance_rel_err']:.3e}")
    manifest = [os.path.basename(p) for p in paths] + [
        "p_zeta_star.csv", "k_zeta_star.csv", "k_star.csv"]
    return EXIT_OK, info, manifest


def cmd_full(cfg, out, seed=None, attach_oracle=False):
    """collect -> learn -> evaluate with a machine-readable run report."""
    report = {"stages": {}, "manifest": []}
    for stage, runner in (
        ("collect", lambda: cmd_collect(cfg, out, seed=seed)),
        ("learn", lambda: cmd_learn(cfg, out, attach_oracle=attach_oracle)),
        ("evaluate", lambda: cmd_evaluate(cfg, out,
                                          attach_oracle=attach_oracle)),
    ):
        code, info, manifest = runner()
        report["stages"][stage] = info
        report["manifest"].extend(manifest)
        if code != EXIT_OK:
            report["failed_stage"] = stage
            _write_report(out, report)
            return code
    _write_report(out, report)
    return EXIT_OK


def _write_report(out, report):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="iolq",
        description="Data-driven output-feedback LQ control pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("collect", "learn", "evaluate", "full", "oracle"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="experiment config file")
        sp.add_argument("--out", default="out", help="artifact directory")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the probing seed")
        sp.add_argument("--attach-oracle", action="store_true",
                        help="add model-based error columns / reports")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)
    try:
        if args.command == "full":
            return cmd_full(cfg, args.out, seed=args.seed,
                            attach_oracle=args.attach_oracle)
        if args.command == "collect":
            code, _, _ = cmd_collect(cfg, args.out, seed=args.seed)
        elif args.command == "learn":
            code, _, _ = cmd_learn(cfg, args.out,
                                   attach_oracle=args.attach_oracle)
        elif args.command == "evaluate":
            code, _, _ = cmd_evaluate(cfg, args.out,
                                      attach_oracle=args.attach_oracle)
        else:
            code, _, _ = cmd_oracle(cfg, args.out)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RankDeficient as exc:
        print(f"rank failure: {exc}", file=sys.stderr)
        return EXIT_RANK
    except UnstableClosedLoop as exc:
        print(f"instability: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE


if __name__ == "__main__":
    sys.exit(main())
