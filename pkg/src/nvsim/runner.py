"""Sweep orchestration: turn a :class:`RunConfig` into a :class:`ResultTable`."""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .config import RunConfig
from .eseem import echo_closed_form, echo_unitary_exact, partner_label
from .hamiltonian import LABELS, FieldConfig, solve_electron, sweep_eigensystem
from .hyperfine import all_nuclear_levels, gamma_theta
from .lindblad import CollapseMode, echo_lindblad_curve
from .noise import (
    DipolarSource,
    NoiseCovariance,
    delta_E_variance,
    dipolar_covariance,
    line_noise_covariance,
    optimal_off_angle,
)
from .output import ResultTable
from .sensitivity import eta_conventional, eta_nuclear_curve

RATE_UNIT = "mdeg/rtHz"


def worker_count() -> int:
    """Workers allowed by ``NV_SIM_THREADS`` (unset: 1, 0: one per CPU)."""
    raw = os.environ.get("NV_SIM_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        return 1
    if n <= 0:
        return os.cpu_count() or 1
    return n


def _map(fn, items):
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))  # map keeps input order


def _metadata(cfg: RunConfig, tag: str) -> dict:
    return {
        "config": cfg.to_dict(),
        "constants": dataclasses.asdict(cfg.constants),
        "model": tag,
        "version": __version__,
    }


def _outer(thetas, taus, values) -> np.ndarray:
    """Rows ``(theta, tau, *values)`` with theta as the outer loop."""
    th = np.repeat(thetas, len(taus))
    ta = np.tile(taus, len(thetas))
    cols = [th, ta] + [np.asarray(v).reshape(-1) for v in values]
    return np.column_stack(cols) if len(th) else np.empty((0, len(cols)))


def _eigensweep(cfg):
    thetas = cfg.field.theta.values()
    systems = sweep_eigensystem(cfg.constants, thetas, cfg.field.magnitude)
    cols, units = ["theta_B"], ["deg"]
    for lab in LABELS:
        cols.append(f"E_{lab}")
        units.append("MHz")
    for lab in LABELS:
        for ax in "xyz":
            cols.append(f"S{ax}_{lab}")
            units.append("1")
    cols.append("eps")
    units.append("1")
    rows = []
    for e in systems:
        row = [e.theta_B] + [e.energy(lab) for lab in LABELS]
        for lab in LABELS:
            row.extend(e.expectation(lab))
        row.append(e.hybridization_eps)
        rows.append(row)
    return cols, units, np.array(rows, dtype=float)


def _hyperfine(cfg):
    c, mag = cfg.constants, cfg.field.magnitude

    def one(th):
        levels = all_nuclear_levels(c, FieldConfig(mag, th))
        row = [th]
        for lab in LABELS:
            row.append(levels[lab].splitting_mhz)
        for lab in LABELS:
            row.append(levels[lab].theta_I)
        try:
            row.append(gamma_theta(c, mag, th))
        except ValueError:
            row.append(np.nan)
        return row

    cols = ["theta_B"] + [f"omega_{lab}" for lab in LABELS] + [f"theta_I_{lab}" for lab in LABELS]
    cols.append("gamma_theta")
    units = ["deg"] + ["MHz"] * 3 + ["deg"] * 3 + ["rad/us/deg"]
    return cols, units, np.array(_map(one, cfg.field.theta.values()), dtype=float)


def _collapse_mode(cfg) -> CollapseMode:
    n = cfg.noise
    if n.kind == "none":
        return CollapseMode("none")
    if n.kind == "line":
        return CollapseMode("line_noise", n.gamma, n.angle)
    return CollapseMode("isotropic", n.gamma)


def _echo(cfg, tag):
    c, mag, tr = cfg.constants, cfg.field.magnitude, cfg.transition
    thetas, taus = cfg.field.theta.values(), cfg.tau.values()
    if tag == "closed_form":
        def one(th):
            return np.atleast_1d(echo_closed_form(c, FieldConfig(mag, th), tr, taus))
    elif tag == "unitary_exact":
        def one(th):
            return np.atleast_1d(echo_unitary_exact(c, FieldConfig(mag, th), tr, taus))
    else:
        mode = _collapse_mode(cfg)

        def one(th):
            return echo_lindblad_curve(c, FieldConfig(mag, th), tr, taus, mode, secular=cfg.secular)

    values = np.array(_map(one, thetas)).reshape(len(thetas), len(taus))
    return ["theta_B", "tau", "P"], ["deg", "us", "1"], _outer(thetas, taus, [values])


def _sensitivity(cfg):
    c, mag, r, tr = cfg.constants, cfg.field.magnitude, cfg.readout, cfg.transition
    thetas, taus = cfg.field.theta.values(), cfg.tau.values()

    def one(th):
        f = FieldConfig(mag, th)
        with np.errstate(divide="ignore", invalid="ignore"):
            try:
                curve = eta_nuclear_curve(c, f, r, taus)
                eta, star = curve.eta, curve.eta_star
            except ValueError:  # slope undefined at the range boundary
                eta = star = np.full(len(taus), np.nan)
            block = [eta, star]
            try:
                shot = [eta_conventional(c, f, r, t, transition=tr) if t > 0 else np.inf for t in taus]
            except ZeroDivisionError:
                shot = [np.inf] * len(taus)
            block.append(np.asarray(shot, dtype=float))
            for eb in cfg.eta_Bz_parallel:
                try:
                    v = eta_conventional(c, f, eta_Bz_parallel=eb, transition=tr)
                except ZeroDivisionError:
                    v = np.inf
                block.append(np.full(len(taus), v))
        return np.column_stack(block)

    ncol = 3 + len(cfg.eta_Bz_parallel)
    blocks = _map(one, thetas)
    values = np.concatenate(blocks) if blocks else np.empty((0, ncol))
    cols = ["theta_B", "tau", "eta", "eta_star", "eta_con_shot"]
    cols += [f"eta_con_{eb:g}nT" for eb in cfg.eta_Bz_parallel]
    units = ["deg", "us"] + [RATE_UNIT] * ncol
    return cols, units, _outer(thetas, taus, list(values.T))


def noise_covariance(cfg) -> NoiseCovariance:
    n = cfg.noise
    if n.kind == "line":
        return line_noise_covariance(n.angle, n.amplitude)
    if n.kind == "isotropic":
        return NoiseCovariance.isotropic(n.amplitude**2)
    return dipolar_covariance(DipolarSource(np.array(n.u), n.DS))


def _noise_variance(cfg):
    c, mag = cfg.constants, cfg.field.magnitude
    sigma = noise_covariance(cfg)

    def one(th):
        e = solve_electron(c, FieldConfig(mag, th))
        return [th] + [delta_E_variance(e, t, sigma, c.gamma_B) for t in ("minus_zero", "plus_zero")]

    rows = np.array(_map(one, cfg.field.theta.values()), dtype=float)
    return ["theta_B", "var_minus_zero", "var_plus_zero"], ["deg", "rad^2/us^2", "rad^2/us^2"], rows


def _optimal_angle(cfg):
    c, mag = cfg.constants, cfg.field.magnitude
    sigma = noise_covariance(cfg)
    kw = {}
    if cfg.field.theta is not None:
        kw["window"] = (cfg.field.theta.start, cfg.field.theta.stop)

    def one(t):
        res = optimal_off_angle(c, mag, t, sigma, **kw)
        var90 = delta_E_variance(solve_electron(c, FieldConfig(mag, 90.0)), t, sigma, c.gamma_B)
        return [0.0 if t == "minus_zero" else 1.0, res.theta_opt, res.residual_variance, var90, float(res.flat)]

    rows = np.array(_map(one, ("minus_zero", "plus_zero")), dtype=float)
    cols = ["transition", "theta_opt", "residual_variance", "variance_at_90", "flat"]
    units = ["0=minus_zero,1=plus_zero", "deg", "rad^2/us^2", "rad^2/us^2", "bool"]
    return cols, units, rows


_ECHO_TAGS = {"echo_closed": "closed_form", "echo_exact": "unitary_exact", "echo_lindblad": "lindblad"}


def run(cfg: RunConfig) -> ResultTable:
    """Evaluate the configured model on its grid."""
    partner_label(cfg.transition)
    model = cfg.model
    if model in _ECHO_TAGS:
        tag = _ECHO_TAGS[model]
        cols, units, rows = _echo(cfg, tag)
    elif model == "eigensweep":
        tag = model
        cols, units, rows = _eigensweep(cfg)
    elif model == "hyperfine":
        tag = model
        cols, units, rows = _hyperfine(cfg)
    elif model == "sensitivity":
        tag = "nuclear_assisted"
        cols, units, rows = _sensitivity(cfg)
    elif model == "noise_variance":
        tag = model
        cols, units, rows = _noise_variance(cfg)
    elif model == "optimal_angle":
        tag = model
        cols, units, rows = _optimal_angle(cfg)
    else:
        raise ValueError(f"unknown model {model!r}")
    meta = _metadata(cfg, tag)
    meta["transition"] = cfg.transition
    return ResultTable(cols, units, rows, meta)
