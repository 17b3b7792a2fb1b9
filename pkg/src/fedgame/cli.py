"""Command-line front end.

Subcommands: ``data export``, ``fit``, ``solve``, ``sweep``, ``simulate``,
``airtime``, ``calibrate``.  Every command is deterministic given the
config file, flags and seed, and writes CSV (UTF-8, '.' decimal, LF line
endings).  Precedence: built-in defaults, then the ``--config`` file, then
explicit flags.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import replace

import numpy as np

from . import empirics, energy, game
from .empirics import fit_duration_model, fit_energy_linear, load_empirical_table
from .energy import EnergyParams, WifiParams, airtime, calibrate_energy_params, dbm_to_watts
from .game import GameConfig, price_of_anarchy, solve_social_optimum, solve_symmetric_ne, sweep
from .simulate import SimConfig, run_many, results_to_csv, summarize

_CONFIG_KEYS = {
    "game": {"n", "c", "gamma", "degree", "fit_mode", "seed", "resamples"},
    "energy": {
        "p_hw_w", "p_idle_w", "ptx_dbm", "t_round_s",
        "t_train_min_s", "t_train_max_s",
    },
    "wifi": {
        "model_size_bits", "legacy_symbol_s", "legacy_bits_per_symbol",
        "data_bits_per_symbol", "he_symbol_s", "t_empty_slot_s", "t_sifs_s",
        "t_difs_s", "t_phy_s", "t_he_su_s", "l_rts_bits", "l_cts_bits",
        "l_ack_bits", "l_sf_bits", "l_mac_bits", "cw", "max_ampdu_bits",
    },
    "sim": {"mode", "reps", "max_rounds"},
}

_GAME_DEFAULTS = {
    "n": 50, "c": 0.0, "gamma": 0.0, "degree": empirics.DEFAULT_DEGREE,
    "fit_mode": "deterministic_wls", "seed": 0,
    "resamples": empirics.DEFAULT_RESAMPLES,
}
_SIM_DEFAULTS = {"mode": "progress", "reps": 1, "max_rounds": None}


class CliError(Exception):
    """Raised for user-facing command failures; printed as one line."""


def _load_config(path: str | None) -> dict[str, dict[str, str]]:
    if path is None:
        return {}
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise CliError(f"config file not found: {path}")
    out: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in _CONFIG_KEYS:
            raise CliError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _CONFIG_KEYS[section]:
                raise CliError(f"unknown config key '{key}' in section [{section}]")
        out[section] = dict(parser[section])
    return out


def _setting(flag, config: dict, section: str, key: str, default, cast):
    """defaults < config file < explicit flag."""
    if flag is not None:
        return flag
    raw = config.get(section, {}).get(key)
    if raw is not None:
        return cast(raw)
    return default


def _energy_params(args, config) -> EnergyParams:
    base = EnergyParams()
    kwargs = {}
    for key, cast in (
        ("p_hw_w", float), ("p_idle_w", float), ("t_round_s", float),
        ("t_train_min_s", float), ("t_train_max_s", float),
    ):
        raw = config.get("energy", {}).get(key)
        if raw is not None:
            kwargs[key] = cast(raw)
    dbm = _setting(getattr(args, "ptx_dbm", None), config, "energy", "ptx_dbm", None, float)
    if dbm is not None:
        kwargs["p_tx_w"] = dbm_to_watts(dbm)
    return replace(base, **kwargs) if kwargs else base


def _wifi_params(args, config) -> WifiParams:
    base = WifiParams()
    kwargs = {}
    for key in _CONFIG_KEYS["wifi"]:
        raw = config.get("wifi", {}).get(key)
        if raw is not None:
            field_type = type(getattr(base, key))
            kwargs[key] = field_type(float(raw)) if field_type is int else float(raw)
    size_mb = getattr(args, "size_mb", None)
    if size_mb is not None:
        kwargs["model_size_bits"] = int(round(size_mb * 1e6 * 8))
    return replace(base, **kwargs) if kwargs else base


def _game_settings(args, config) -> dict:
    s = {}
    for key, cast in (
        ("n", int), ("c", float), ("gamma", float), ("degree", int),
        ("fit_mode", str), ("seed", int), ("resamples", int),
    ):
        s[key] = _setting(getattr(args, key, None), config, "game", key,
                          _GAME_DEFAULTS[key], cast)
    if args.seed is not None:  # global --seed wins over [game] seed
        s["seed"] = args.seed
    return s


def _fit_rows(args):
    data_path = getattr(args, "data", None)
    if data_path:
        try:
            with open(data_path, encoding="utf-8") as fh:
                return empirics.rows_from_csv(fh.read())
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read data file {data_path}: {exc}") from exc
    table = getattr(args, "table", None) or "averaged"
    return load_empirical_table(table)


def _duration_model(rows, s: dict):
    return fit_duration_model(
        rows, n_nodes=s["n"], degree=s["degree"], mode=s["fit_mode"],
        seed=s["seed"], resamples=s["resamples"],
    )


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{x:.10g}"


def _parse_grid(spec: str) -> list[float]:
    """Either 'start:stop:count' (inclusive) or a comma-separated list."""
    try:
        if ":" in spec:
            start, stop, count = spec.split(":")
            vals = np.linspace(float(start), float(stop), int(count))
            return [float(v) for v in vals]
        return [float(tok) for tok in spec.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise CliError(f"bad grid spec {spec!r}: {exc}") from exc


# ----------------------------------------------------------------- commands


def _cmd_data_export(args, config) -> int:
    if args.table == "all":
        rows = load_empirical_table("single_seed") + load_empirical_table("averaged")
    else:
        rows = load_empirical_table(args.table)
    _write(args.out, empirics.rows_to_csv(rows))
    return 0


def _cmd_fit(args, config) -> int:
    s = _game_settings(args, config)
    rows = _fit_rows(args)
    dm = _duration_model(rows, s)
    try:
        em = fit_energy_linear(rows)
    except empirics.FitError as exc:
        em, em_reason = None, str(exc)

    coef_lines = ["section,key,value"]
    for i, ci in enumerate(dm.coefficients):
        coef_lines.append(f"duration,c{i},{_fmt(ci)}")
    coef_lines += [
        f"duration,degree,{dm.degree}",
        f"duration,n_nodes,{dm.n_nodes}",
        f"duration,d_floor,{_fmt(dm.d_floor)}",
        f"duration,d_cap,{_fmt(dm.d_cap)}",
        f"duration,fit_mode,{dm.fit_mode}",
    ]
    if em is not None:
        coef_lines += [
            f"energy_line,slope_wh_per_round,{_fmt(em.slope)}",
            f"energy_line,intercept_wh,{_fmt(em.intercept)}",
        ]
    res_lines = ["p,k,d_mean,sigma_eff,d_fit,residual"]
    for r in rows:
        k = s["n"] * r.p
        fit = dm.eval(min(k, dm.n_nodes))
        sig = max(r.d_std, empirics.SIGMA_FLOOR)
        res_lines.append(
            f"{_fmt(r.p)},{_fmt(k)},{_fmt(r.d_mean)},{_fmt(sig)},"
            f"{_fmt(fit)},{_fmt(fit - r.d_mean)}"
        )
    prefix = args.out or "fit"
    _write(f"{prefix}.coefficients.csv", "\n".join(coef_lines) + "\n")
    _write(f"{prefix}.residuals.csv", "\n".join(res_lines) + "\n")
    print(f"duration fit: degree {dm.degree}, mode {dm.fit_mode}, "
          f"cap {dm.d_cap:g} rounds")
    if em is not None:
        print(f"energy line: {em.slope:.4f} Wh/round + {em.intercept:.4f} Wh")
    else:
        print(f"energy line: unavailable ({em_reason})")
    print(f"wrote {prefix}.coefficients.csv and {prefix}.residuals.csv")
    return 0


def _game_config(args, config) -> GameConfig:
    s = _game_settings(args, config)
    rows = _fit_rows(args)
    dm = _duration_model(rows, s)
    return GameConfig(n_nodes=s["n"], c=s["c"], gamma=s["gamma"], dm=dm)


def _cmd_solve(args, config) -> int:
    cfg = _game_config(args, config)
    ne_set = solve_symmetric_ne(cfg)
    p_opt, u_opt = solve_social_optimum(cfg)
    for res in ne_set:
        print(f"ne p={res.p_star:.6f} utility={res.utility_at_ne:.6f} "
              f"kind={res.kind} residual={res.residual:.3e}")
    if not ne_set:
        print("ne none-found")
    print(f"optimum p={p_opt:.6f} utility={u_opt:.6f}")

    flags, poa, worst = "", None, None
    if not ne_set:
        flags = "no_ne"
    else:
        worst = max(ne_set, key=lambda r: r.cost)
        try:
            poa = price_of_anarchy(cfg).poa
            print(f"poa {poa:.6f}")
        except game.NonPositiveCostError:
            flags = "poa_undefined"
            print("poa undefined (non-positive cost)")
    if args.out:
        header = "c,gamma,p_ne,p_opt,u_ne,u_opt,poa,flags"
        row = (
            f"{_fmt(cfg.c)},{_fmt(cfg.gamma)},"
            f"{_fmt(worst.p_star if worst else None)},{_fmt(p_opt)},"
            f"{_fmt(worst.utility_at_ne if worst else None)},{_fmt(u_opt)},"
            f"{_fmt(poa)},{flags}"
        )
        _write(args.out, header + "\n" + row + "\n")
    return 0


def _cmd_sweep(args, config) -> int:
    cfg = _game_config(args, config)
    c_values = _parse_grid(args.c_grid)
    gamma_values = _parse_grid(args.gamma_grid)
    rows = sweep(cfg, c_values, gamma_values, workers=args.workers)
    lines = ["c,gamma,p_ne,p_opt,u_ne,u_opt,poa,flags"]
    for r in rows:
        lines.append(
            f"{_fmt(r.c)},{_fmt(r.gamma)},{_fmt(r.p_ne_worst)},{_fmt(r.p_opt)},"
            f"{_fmt(r.u_ne)},{_fmt(r.u_opt)},{_fmt(r.poa)},{r.flags}"
        )
    _write(args.out, "\n".join(lines) + "\n")
    return 0


def _cmd_simulate(args, config) -> int:
    s = _game_settings(args, config)
    if args.profile:
        profile = np.array(_parse_grid(args.profile))
    else:
        profile = np.full(s["n"], args.p)
    rows = _fit_rows(args)
    dm = _duration_model(rows, s)
    mode = _setting(args.mode, config, "sim", "mode", _SIM_DEFAULTS["mode"], str)
    mode = {"static": "static_draw"}.get(mode, mode)
    reps = _setting(args.reps, config, "sim", "reps", _SIM_DEFAULTS["reps"], int)
    max_rounds = _setting(args.max_rounds, config, "sim", "max_rounds",
                          _SIM_DEFAULTS["max_rounds"], int)
    cfg = SimConfig(
        profile=profile, dm=dm, ep=_energy_params(args, config),
        wifi=_wifi_params(args, config), mode=mode, seed=s["seed"],
        max_rounds=max_rounds, reps=reps,
    )
    results = run_many(cfg, workers=args.workers)
    summary = summarize(results)
    _write(args.out, results_to_csv(results, summary))
    print(f"reps {summary.reps} completed {summary.completed} "
          f"mean_rounds {summary.mean_rounds:.4f} std_rounds {summary.std_rounds:.4f} "
          f"mean_energy_wh {summary.mean_energy_wh:.4f} "
          f"truncation_rate {summary.truncation_rate:.4f}", file=sys.stderr)
    if not summary.valid:
        raise CliError("all replications truncated; summary invalid")
    return 0


def _cmd_airtime(args, config) -> int:
    wifi = _wifi_params(args, config)
    ep = _energy_params(args, config)
    t_total = airtime(wifi)
    backoff = 0.5 * wifi.cw * wifi.t_empty_slot_s
    n_agg = max(1, -(-wifi.model_size_bits // wifi.max_ampdu_bits))
    print(f"aggregates {n_agg}")
    print(f"backoff_per_exchange_s {_fmt(backoff)}")
    print(f"airtime_s {_fmt(t_total)}")
    print(f"tx_power_w {_fmt(ep.p_tx_w)}")
    print(f"tx_energy_j {_fmt(ep.p_tx_w * t_total)}")
    return 0


def _cmd_calibrate(args, config) -> int:
    rows = _fit_rows(args)
    s = _game_settings(args, config)
    ep0 = _energy_params(args, config)
    wifi = _wifi_params(args, config)
    try:
        cal = calibrate_energy_params(rows, ep0, wifi, n_nodes=s["n"],
                                      adjust=args.adjust)
    except energy.CalibrationError as exc:
        raise CliError(str(exc)) from exc
    print(f"calibrated p_hw_w {_fmt(cal.params.p_hw_w)}")
    print(f"calibrated t_train_mean_s {_fmt(cal.params.t_train_mean_s)}")
    rel = cal.relative_errors
    print(f"max_rel_err {_fmt(float(rel.max()))} "
          f"within_15pct {int((rel <= 0.15).sum())}/{rel.size}")
    if args.out:
        lines = ["p,d_mean,e_mean_wh,e_pred_wh,rel_err"]
        for r, pred, err in zip(rows, cal.predicted_wh, rel):
            lines.append(f"{_fmt(r.p)},{_fmt(r.d_mean)},{_fmt(r.e_mean)},"
                         f"{_fmt(float(pred))},{_fmt(float(err))}")
        _write(args.out, "\n".join(lines) + "\n")
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--seed", type=int, help="master random seed")
    common.add_argument("--out", help="output path (default: stdout)")

    fitopts = argparse.ArgumentParser(add_help=False)
    fitopts.add_argument("--table", choices=["averaged", "single_seed"],
                         help="embedded table to fit (default averaged)")
    fitopts.add_argument("--data", help="user CSV in the data-export schema")
    fitopts.add_argument("--n", type=int, help="number of nodes")
    fitopts.add_argument("--degree", type=int, help="duration polynomial degree")
    fitopts.add_argument("--fit-mode", dest="fit_mode",
                         choices=["deterministic_wls", "stochastic_resample",
                                  "wls", "resample"],
                         help="duration fit mode")
    fitopts.add_argument("--resamples", type=int,
                         help="draws per row for stochastic_resample")

    parser = argparse.ArgumentParser(
        prog="fedgame",
        description="Participation-game analytics, energy accounting and "
                    "round simulation for federated learning populations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_data = sub.add_parser("data", help="embedded dataset operations")
    data_sub = p_data.add_subparsers(dest="data_command", required=True)
    p_export = data_sub.add_parser("export", parents=[common],
                                   help="dump the embedded dataset as CSV")
    p_export.add_argument("--table", choices=["all", "averaged", "single_seed"],
                          default="all")
    p_export.set_defaults(func=_cmd_data_export)

    p_fit = sub.add_parser("fit", parents=[common, fitopts],
                           help="fit the duration and energy models")
    p_fit.add_argument("--mode", dest="fit_mode",
                       choices=["deterministic_wls", "stochastic_resample",
                                "wls", "resample"],
                       help="alias for --fit-mode")
    p_fit.set_defaults(func=_cmd_fit)

    p_solve = sub.add_parser("solve", parents=[common, fitopts],
                             help="equilibria, optimum and PoA for one (c, gamma)")
    p_solve.add_argument("--c", type=float, help="participation cost factor")
    p_solve.add_argument("--gamma", type=float, help="incentive weight")
    p_solve.set_defaults(func=_cmd_solve)

    p_sweep = sub.add_parser("sweep", parents=[common, fitopts],
                             help="equilibrium table over a (c, gamma) grid")
    p_sweep.add_argument("--c-grid", default="0:5:11",
                         help="'start:stop:count' or comma list")
    p_sweep.add_argument("--gamma-grid", default="0,0.6",
                         help="'start:stop:count' or comma list")
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_sim = sub.add_parser("simulate", parents=[common, fitopts],
                           help="seeded Monte-Carlo round simulation")
    p_sim.add_argument("--p", type=float, default=0.5,
                       help="symmetric participation probability")
    p_sim.add_argument("--profile", help="comma list of per-node probabilities")
    p_sim.add_argument("--mode", choices=["static", "static_draw", "progress"],
                       help="convergence stand-in")
    p_sim.add_argument("--reps", type=int, help="number of replications")
    p_sim.add_argument("--max-rounds", type=int)
    p_sim.add_argument("--workers", type=int, default=1)
    p_sim.add_argument("--ptx-dbm", type=float, help="transmit power in dBm")
    p_sim.set_defaults(func=_cmd_simulate)

    p_air = sub.add_parser("airtime", parents=[common],
                           help="upload airtime and energy breakdown")
    p_air.add_argument("--size-mb", type=float, help="model update size in MB")
    p_air.add_argument("--ptx-dbm", type=float, help="transmit power in dBm")
    p_air.set_defaults(func=_cmd_airtime)

    p_cal = sub.add_parser("calibrate", parents=[common, fitopts],
                           help="calibrate training power against measured energy")
    p_cal.add_argument("--adjust", choices=["p_hw", "t_train"], default="p_hw")
    p_cal.add_argument("--ptx-dbm", type=float, help="transmit power in dBm")
    p_cal.set_defaults(func=_cmd_calibrate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "fit_mode", None) in ("wls", "resample"):
        args.fit_mode = {"wls": "deterministic_wls",
                         "resample": "stochastic_resample"}[args.fit_mode]
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
