# -*- coding: utf-8 -*-
"""
נקודת כניסה - Command-line entry point

    python main.py <command> [--config FILE] [--out DIR] [--threads N] [--tol REL]

Commands: coupling, phase, fig2, force, evolve, modes-evolve, check, paper-repro.
Without --config the bundled paper-params.json is used. Each command writes
<out>/<command>.json (and a CSV for series); a flagged (non-converged or
failing) result exits with status 1, a configuration problem with status 2.
"""

# Initialize logging before other imports
from logging_config import setup_logging
logger = setup_logging()

import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from config import (RunConfig, apply_env_overrides, assumption_ledger, load_run_config, paper_config,
                    resolved_config)
from coupling import build_coupling_field, gamma_focus_closed_form, gamma_single, lambda_focus_closed_form, lambda_single
from dynamics import MechanicalModel, MechState, evolve_classical
from errors import ConfigurationError, ConvergenceError, OptomechError
from geomphase import (figure2_sweep, force_ratio, geometric_phase, geometric_phase_axis_closed_form,
                       geometric_phase_axis_dipole, nonadiabatic_force, trap_force)
from modes import GaussianParaxialMode
from paper_repro import (ReproContext, coupled_mode_drive, default_mode_pair, mechanical_schedule,
                         run_checks, run_paper_repro)
from reporting import express, format_table, write_csv, write_json
from units_core import NATURAL, as_vector, thermal_angular_velocity, thermal_velocity

Outcome = Tuple[Dict[str, Any], bool]


def _configured_motion(ctx: ReproContext) -> Tuple[np.ndarray, np.ndarray]:
    """Configured velocity and spin in internal units; thermal rms per axis when unset"""
    motion = ctx.cfg.motion
    if motion.velocity is not None:
        velocity = as_vector(motion.velocity, "motion.velocity")
    else:
        velocity = np.full(3, thermal_velocity(ctx.sphere.mass, motion.temperature))
    if motion.angular_velocity is not None:
        spin = as_vector(motion.angular_velocity, "motion.angular_velocity")
    else:
        spin = np.full(3, thermal_angular_velocity(ctx.sphere.moment_of_inertia, motion.temperature))
    return NATURAL.to_internal(velocity, 'velocity'), NATURAL.to_internal(spin, 'frequency')


def cmd_coupling(ctx: ReproContext, out: Path) -> Outcome:
    """lambda and gamma of the configured mode at motion.q"""
    cfg, units = ctx.cfg, ctx.cfg.units.build()
    mode = cfg.mode.build(ctx.beam)
    q = as_vector(cfg.motion.q, "motion.q")
    lam = lambda_single(mode, ctx.sphere, q, ctx.quad)
    gam = gamma_single(mode, ctx.sphere, q, ctx.quad)

    payload: Dict[str, Any] = {
        'mode_family': cfg.mode.family,
        'q_m': q,
        'lambda_hbar_k': lam.in_hbar_k(mode.omega),
        'error_estimate': max(lam.error_estimate, gam.error_estimate),
        'converged': lam.converged and gam.converged,
        'note': lam.note,
    }
    payload.update(express('lambda', lam.value, 'momentum', units))
    payload.update(express('gamma', gam.value, 'angular_momentum', units))
    if isinstance(mode, GaussianParaxialMode):
        payload.update(express('lambda_focus_closed_form', lambda_focus_closed_form(ctx.beam, ctx.sphere).value,
                               'momentum', units))
        payload.update(express('gamma_closed_form', gamma_focus_closed_form(ctx.beam, ctx.sphere, q).value,
                               'angular_momentum', units))
    write_json(out / 'coupling.json', payload, resolved_config(cfg), units.label)
    return payload, not payload['converged']


def cmd_phase(ctx: ReproContext, out: Path) -> Outcome:
    """Geometric phase along the configured path"""
    cfg = ctx.cfg
    mode = cfg.mode.build(ctx.beam)
    path = cfg.path.build(ctx.beam)
    coupling = build_coupling_field(cfg.mode.coupling_model, mode, ctx.sphere, ctx.quad)
    result = geometric_phase(path, coupling, ctx.n_photons, tol=cfg.quadrature.target_rel_tol, threads=cfg.threads)

    payload: Dict[str, Any] = {
        'theta_rad': result.theta,
        'theta_over_pi': result.theta_over_pi,
        'q_i_m': result.path.q_i,
        'q_f_m': result.path.q_f,
        'photon_number': ctx.n_photons,
        'method': result.method,
        'coupling_model': cfg.mode.coupling_model,
        'error_estimate': result.error_estimate,
        'converged': result.converged,
    }
    if cfg.path.kind == "axis" and isinstance(mode, GaussianParaxialMode):
        qz_i, qz_f = float(path.q_i[2]), float(path.q_f[2])
        payload['theta_closed_form_rad'] = geometric_phase_axis_closed_form(
            ctx.beam, ctx.sphere, qz_i, qz_f, ctx.n_photons).theta
        payload['theta_leading_order_rad'] = geometric_phase_axis_dipole(
            ctx.beam, ctx.sphere, qz_i, qz_f, ctx.n_photons).theta
    write_json(out / 'phase.json', payload, resolved_config(cfg))
    return payload, not result.converged


def cmd_fig2(ctx: ReproContext, out: Path) -> Outcome:
    """|Theta(q_z)| sweep along the axis path of the config"""
    cfg = ctx.cfg
    path = cfg.path
    qz_i = -ctx.beam.wavelength / 2.0 if path.qz_i is None else path.qz_i
    qz_f = ctx.beam.wavelength / 2.0 if path.qz_f is None else path.qz_f
    grid = np.linspace(qz_i, qz_f, path.sweep_points)
    coupling = build_coupling_field(cfg.mode.coupling_model, cfg.mode.build(ctx.beam), ctx.sphere, ctx.quad)
    frame = figure2_sweep(ctx.beam, ctx.sphere, ctx.n_photons, grid, coupling, threads=cfg.threads)
    write_csv(out / 'fig2.csv', frame)

    converged = getattr(coupling, 'converged', True)
    payload = {
        'points': len(frame),
        'theta_endpoint_rad': float(frame['theta_rad_line'].iloc[-1]),
        'theta_endpoint_closed_form_rad': float(frame['theta_rad_closed'].iloc[-1]),
        'converged': converged,
        'csv': 'fig2.csv',
    }
    write_json(out / 'fig2.json', payload, resolved_config(cfg))
    return payload, not converged


def cmd_force(ctx: ReproContext, out: Path) -> Outcome:
    """Nonadiabatic and trap force at motion.q for the configured (or thermal) motion"""
    cfg, units = ctx.cfg, ctx.cfg.units.build()
    mode = cfg.mode.build(ctx.beam)
    q = as_vector(cfg.motion.q, "motion.q")
    velocity, spin = _configured_motion(ctx)
    coupling = build_coupling_field(cfg.mode.coupling_model, mode, ctx.sphere, ctx.quad)
    force = nonadiabatic_force(q, velocity, spin, coupling, coupling, ctx.n_photons)
    trap = trap_force(q, mode, ctx.sphere, ctx.n_photons, ctx.quad)

    payload: Dict[str, Any] = {'q_m': q, 'converged': force.converged and trap.converged,
                               'fd_error_estimate': force.error_estimate}
    payload.update(express('velocity', velocity, 'velocity', units))
    payload.update(express('nonadiabatic_force', force.value, 'force', units))
    payload.update(express('velocity_term', force.components['velocity_term'], 'force', units))
    payload.update(express('spin_term', force.components['spin_term'], 'force', units))
    payload.update(express('trap_force', trap.value, 'force', units))
    payload['force_ratio'] = force_ratio(force, trap) if trap.magnitude > 0 else None
    write_json(out / 'force.json', payload, resolved_config(cfg), units.label)
    return payload, not payload['converged']


def cmd_evolve(ctx: ReproContext, out: Path) -> Outcome:
    """Classical trajectory at fixed photon number"""
    cfg = ctx.cfg
    dyn = cfg.dynamics
    mode = cfg.mode.build(ctx.beam)
    coupling = build_coupling_field(dyn.coupling_model, mode, ctx.sphere, ctx.quad)
    model = MechanicalModel.from_sphere(coupling, ctx.sphere)
    dt, total, period = mechanical_schedule(ctx, coupling, model)

    q0 = NATURAL.to_internal(as_vector(dyn.initial_q, "dynamics.initial_q"), 'length')
    v0 = NATURAL.to_internal(as_vector(dyn.initial_velocity, "dynamics.initial_velocity"), 'velocity')
    w0 = NATURAL.to_internal(as_vector(dyn.initial_angular_velocity, "dynamics.initial_angular_velocity"),
                             'frequency')
    n = ctx.n_photons
    start = MechState(q0, model.mass * v0 - n * coupling.lam(q0),
                      J=model.moment_of_inertia * w0 - n * coupling.gam(q0))
    trajectory = evolve_classical(start, model, n, dt, total, dyn.method, dyn.sample_every)
    write_csv(out / 'trajectory.csv', trajectory.to_frame())

    payload = {
        'steps': int(round(total / dt)),
        'dt_s': NATURAL.to_si(dt, 'time'),
        'duration_s': NATURAL.to_si(total, 'time'),
        'trap_period_s': NATURAL.to_si(period, 'time'),
        'energy_drift': trajectory.energy_drift,
        'rejected_steps': trajectory.rejected_steps,
        'converged': trajectory.converged,
        'final_q_m': trajectory.q[-1],
        'csv': 'trajectory.csv',
    }
    write_json(out / 'evolve.json', payload, resolved_config(cfg))
    return payload, not trajectory.converged


def cmd_modes_evolve(ctx: ReproContext, out: Path) -> Outcome:
    """Coupled-mode amplitudes under a sinusoidal drive"""
    cfg = ctx.cfg
    amp = cfg.dynamics.amplitudes
    modes = [m.build(ctx.beam) for m in amp.modes] or default_mode_pair(ctx.beam)
    a0 = [complex(re, im) for re, im in amp.initial]
    if len(a0) != len(modes):
        raise ConfigurationError(f"dynamics.amplitudes.initial has {len(a0)} entries for {len(modes)} modes")
    run = coupled_mode_drive(
        modes, ctx.sphere, ctx.quad, direction=amp.drive_direction, rate_fraction=amp.rate_fraction,
        detuning_in_rates=amp.detuning_in_rates,
        amplitude=None if amp.drive_amplitude is None else NATURAL.to_internal(amp.drive_amplitude, 'length'),
        a0=a0, center=as_vector(cfg.motion.q, "motion.q"),
        dt=None if amp.dt is None else NATURAL.to_internal(amp.dt, 'time'),
        duration=None if amp.duration is None else NATURAL.to_internal(amp.duration, 'time'),
        frozen_table=amp.frozen_table)
    write_csv(out / 'amplitudes.csv', run.history.to_frame())

    payload = {
        'coupling_rate_rad_per_s': NATURAL.to_si(run.coupling_rate, 'frequency'),
        'drive_frequency_rad_per_s': NATURAL.to_si(run.drive_frequency, 'frequency'),
        'detuning_rad_per_s': NATURAL.to_si(run.detuning, 'frequency'),
        'drive_amplitude_m': run.amplitude_m,
        'peak_transfer': run.peak_transfer,
        'two_level_peak_transfer': run.oracle,
        'norm_drift': run.history.norm_drift,
        'converged': run.history.converged,
        'csv': 'amplitudes.csv',
    }
    write_json(out / 'modes_evolve.json', payload, resolved_config(cfg))
    return payload, not run.history.converged


def _rows_outcome(rows: List[Dict[str, Any]], cfg: RunConfig, out: Path, name: str) -> Outcome:
    print(format_table(rows, ['criterion', 'quantity', 'value', 'target', 'passed']))
    failed = [row['quantity'] for row in rows if not row['passed']]
    payload = {'rows': rows, 'failed': failed}
    write_json(out / f'{name}.json', payload, resolved_config(cfg))
    return payload, bool(failed)


def cmd_check(ctx: ReproContext, out: Path) -> Outcome:
    return _rows_outcome(run_checks(ctx), ctx.cfg, out, 'check')


def cmd_paper_repro(ctx: ReproContext, out: Path, only: Optional[List[str]] = None) -> Outcome:
    frame = run_paper_repro(ctx.cfg, only)
    print(format_table(frame.to_dict('records'), ['criterion', 'quantity', 'value', 'target', 'passed',
                                                   'runtime_s']))
    print("\nAssumptions:")
    for note in assumption_ledger(ctx.cfg):
        print(f"  - {note}")
    # timings stay out of the artifacts so reruns are byte-identical
    stable = frame.drop(columns=['runtime_s'])
    write_csv(out / 'paper_repro.csv', stable)
    failed = stable.loc[~stable['passed'], 'quantity'].tolist()
    payload = {'rows': stable.to_dict('records'), 'failed': failed}
    write_json(out / 'paper_repro.json', payload, resolved_config(ctx.cfg))
    return payload, bool(failed)


COMMANDS: Dict[str, Callable[..., Outcome]] = {
    'coupling': cmd_coupling,
    'phase': cmd_phase,
    'fig2': cmd_fig2,
    'force': cmd_force,
    'evolve': cmd_evolve,
    'modes-evolve': cmd_modes_evolve,
    'check': cmd_check,
    'paper-repro': cmd_paper_repro,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help="run configuration (JSON); default: bundled paper-params.json")
    common.add_argument('--out', help="output directory (env OPTOMECH_OUT_DIR)")
    common.add_argument('--threads', type=int, help="worker threads (env OPTOMECH_THREADS)")
    common.add_argument('--tol', type=float, help="quadrature relative tolerance (env OPTOMECH_TOL)")
    common.add_argument('--seed', type=int, help="seed recorded with the run (env OPTOMECH_SEED)")

    parser = argparse.ArgumentParser(prog='optomech', description="Dielectric sphere in quantized radiation modes")
    sub = parser.add_subparsers(dest='command', required=True)
    for name, handler in COMMANDS.items():
        command = sub.add_parser(name, parents=[common], help=(handler.__doc__ or name).strip().splitlines()[0])
        if name == 'paper-repro':
            command.add_argument('--only', help="comma-separated criteria to run")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else paper_config()
    return apply_env_overrides(cfg, threads=args.threads, tol=args.tol, out=args.out, seed=args.seed)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        ctx = ReproContext.from_config(cfg)
        out = Path(cfg.output_path)
        logger.info(f"Running '{args.command}' -> {out}")
        if args.command == 'paper-repro':
            only = [name.strip() for name in args.only.split(',')] if args.only else None
            payload, flagged = cmd_paper_repro(ctx, out, only)
        else:
            payload, flagged = COMMANDS[args.command](ctx, out)
        if flagged:
            raise ConvergenceError(f"'{args.command}' produced a flagged result; see {out}", partial=payload)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except ConvergenceError as e:
        logger.warning(str(e))
        return 1
    except OptomechError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2
    logger.info(f"'{args.command}' finished")
    return 0


if __name__ == "__main__":
    sys.exit(main())
