"""Command-line entry point: ``qmetop <subcommand> --config cfg.json --out-dir out/``.

Exit codes: 0 on success (whatever the verdict), 2 for configuration or input
errors, 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable

import numpy as np

from qmetop import io, model, redfield, top
from qmetop.lindblad import InternalError, SteadyStateError
from qmetop.model import BathSpec, ConfigError, NumericError, XxzParams
from qmetop.opalg import BASIS_ORDERS, BasisError, ShapeError, qubit_chain_basis
from qmetop.sdp import SolverError, ValidationError
from qmetop.settings import DEFAULT_NUMERICS, Numerics

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

CONFIG_ERRORS = (ConfigError, io.FormatError, top.BasisOrderMismatch, BasisError, ShapeError, ValidationError, FileNotFoundError, KeyError)
NUMERIC_ERRORS = (NumericError, top.TopError, redfield.ConsistencyError, SolverError, InternalError, SteadyStateError, np.linalg.LinAlgError)


class PartialFailure(RuntimeError):
    """Some sweep points failed; outputs were still written."""


# ---------------------------------------------------------------------------
# config handling


def load_config(path: str | None) -> tuple[dict, Path]:
    if path is None:
        raise ConfigError("--config is required")
    p = Path(path)
    try:
        cfg = json.loads(p.read_text())
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: not valid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{p}: top-level JSON value must be an object")
    return cfg, p.parent


def _merge_flags(cfg: dict, args: argparse.Namespace) -> dict:
    cfg = dict(cfg)
    for key in ("basis_order", "delta", "roles"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if cfg.get("basis_order", "zmp") not in BASIS_ORDERS:
        raise ConfigError(f"basis_order must be one of {BASIS_ORDERS}, got {cfg['basis_order']!r}")
    return cfg


def _numerics(args: argparse.Namespace) -> Numerics:
    return replace(DEFAULT_NUMERICS, sdp_tol=args.tol) if args.tol is not None else DEFAULT_NUMERICS


def _float(cfg: dict, key: str, default: float | None = None) -> float:
    if key not in cfg and default is None:
        raise ConfigError(f"config needs {key!r}")
    try:
        return float(cfg.get(key, default))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key!r} must be a number") from exc


def _resolve(base: Path, ref: str) -> Path:
    if ref == "reference":
        return io.reference_gamma_path()
    p = Path(ref)
    return p if p.is_absolute() else base / p


def load_matrix_file(path: Path) -> tuple[np.ndarray, dict]:
    """JSON matrix files by suffix, plain tables otherwise."""
    if path.suffix == ".json":
        return io.read_matrix(path)
    return io.load_table(path)


def _bath(cfg: dict) -> BathSpec:
    return BathSpec(beta=_float(cfg, "beta"), mu=_float(cfg, "mu", 0.0), omega_c=_float(cfg, "omega_c", 10.0))


def _couplings(cfg: dict, params: XxzParams) -> redfield.CouplingSet:
    kind = cfg.get("coupling", "lowering")
    if kind == "lowering":
        return redfield.first_qubit_lowering(params.N, params.N_L)
    if kind == "none":
        return redfield.CouplingSet((), params.d_L, params.d_M)
    raise ConfigError(f"unknown coupling {kind!r}; use 'lowering' or 'none'")


# ---------------------------------------------------------------------------
# commands; each returns (outputs written, config used for the manifest)


def _stamp(obj: dict, dig: str) -> dict:
    return {**obj, "manifest_digest": dig}


def _write_json(path: Path, obj: Any) -> Path:
    path.write_text(json.dumps(obj, indent=1, default=io._default) + "\n")
    return path


def cmd_redfield_gamma(cfg: dict, base: Path, out: Path, args, numerics: Numerics, dig: str) -> list[Path]:
    params = XxzParams.from_dict(cfg)
    spec = _bath(cfg)
    roles = cfg.get("roles", "direct")
    if roles not in redfield.ROLES:
        raise ConfigError(f"roles must be one of {redfield.ROLES}, got {roles!r}")
    order = cfg.get("basis_order", "zmp")
    H = model.build_xxz(params)
    parts = redfield.redfield_parts(H, _couplings(cfg, params), spec, _float(cfg, "epsilon2", 1.0), numerics)
    basis = qubit_chain_basis(params.N_L, params.N_M, order)
    Gamma, H_LS = redfield.gamma_from_redfield(parts, basis, roles=roles, numerics=numerics)
    verdict = redfield.cp_check(Gamma, params.d_L, numerics)
    meta = {"roles": roles, "manifest_digest": dig, "d_L": params.d_L}
    return [
        io.write_matrix(out / "gamma.json", Gamma, "Gamma", order, **meta),
        io.write_matrix(out / "hls.json", H_LS, "H_LS", order, **meta),
        _write_json(
            out / "cp_report.json",
            _stamp({**verdict.to_dict(), "roles": roles, "reconstruction_residual": parts.reconstruction_residual}, dig),
        ),
    ]


def cmd_cp_check(cfg: dict, base: Path, out: Path, args, numerics: Numerics, dig: str) -> list[Path]:
    if "gamma" not in cfg:
        raise ConfigError("cp-check config needs a 'gamma' file")
    G, _ = load_matrix_file(_resolve(base, cfg["gamma"]))
    d_L = 2 ** int(cfg.get("N_L", 1))
    verdict = redfield.cp_check(G, d_L, numerics)
    return [_write_json(out / "cp_report.json", _stamp(verdict.to_dict(), dig))]


def _check_order(requested: str, meta: dict, label: str) -> None:
    found = meta.get("basis_order")
    if found is not None and found != requested:
        raise top.BasisOrderMismatch(f"{label} is stored in basis order {found!r} but {requested!r} was requested")


def cmd_tau_eval(cfg: dict, base: Path, out: Path, args, numerics: Numerics, dig: str) -> list[Path]:
    if "gamma" not in cfg:
        raise ConfigError("tau-eval config needs a 'gamma' file (or \"reference\")")
    order = cfg.get("basis_order", "zmp")
    G, gmeta = load_matrix_file(_resolve(base, cfg["gamma"]))
    _check_order(order, gmeta, "gamma")
    H_LS = None
    if cfg.get("hls"):
        H_LS, hmeta = load_matrix_file(_resolve(base, cfg["hls"]))
        _check_order(order, hmeta, "hls")
    params = XxzParams.from_dict(cfg)
    mods = cfg.get("modify", {})
    if mods:
        params = params.modified(mods.get("omega0"), mods.get("g"), mods.get("Delta"))
    beta = _float(cfg, "beta")
    delta = _float(cfg, "delta", numerics.verdict_delta)
    tau = top.tau_audit(G, H_LS, params, beta, order, numerics=numerics)
    result = {"tau": tau, "delta": delta, "below_delta": tau < delta, "basis_order": order, "params": params.to_dict(), "beta": beta}
    return [_write_json(out / "tau.json", _stamp(result, dig))]


def _instance(cfg: dict, numerics: Numerics) -> top.TopInstance:
    params = XxzParams.from_dict(cfg)
    return top.TopInstance.from_params(
        params, _float(cfg, "beta"), cfg.get("basis_order", "zmp"), _float(cfg, "delta", numerics.verdict_delta)
    )


def cmd_top_solve(cfg: dict, base: Path, out: Path, args, numerics: Numerics, dig: str) -> list[Path]:
    inst = _instance(cfg, numerics)
    res = top.solve_top(inst, numerics=numerics)
    meta = {"manifest_digest": dig}
    return [
        io.write_matrix(out / "gamma_L.json", res.Gamma_L_opt, "Gamma_L", inst.basis_order, **meta),
        io.write_matrix(out / "hls_L.json", res.H_LS_opt, "H_LS_L", inst.basis_order, **meta),
        _write_json(out / "top_result.json", _stamp(res.summary(), dig)),
    ]


def _sweep_spec(cfg: dict, numerics: Numerics) -> top.SweepSpec:
    try:
        N_M = cfg["N_M"]
        grid = cfg["grid"]
        axis = cfg["axis"]
    except KeyError as exc:
        raise ConfigError(f"top-sweep config needs {exc.args[0]!r}") from exc
    N_M = tuple(int(n) for n in (N_M if isinstance(N_M, list) else [N_M]))
    try:
        return top.SweepSpec(
            axis=axis,
            grid=tuple(float(v) for v in grid),
            N_L=int(cfg.get("N_L", 1)),
            N_M=N_M,
            omega0=_float(cfg, "omega0", 1.0),
            g=_float(cfg, "g", 0.1),
            Delta=_float(cfg, "Delta", 1.0),
            beta=_float(cfg, "beta", 1.0),
            basis_order=cfg.get("basis_order", "zmp"),
            delta=_float(cfg, "delta", numerics.verdict_delta),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_top_sweep(cfg: dict, base: Path, out: Path, args, numerics: Numerics, dig: str) -> list[Path]:
    spec = _sweep_spec(cfg, numerics)
    points = top.sweep(spec, jobs=args.jobs, tol=numerics.sdp_tol)
    csv_path = out / "sweep.csv"
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["axis", "value", "N_M", "tau_opt", "gap", "verdict"])
        for p in points:
            w.writerow(p.csv_row())
        fh.write(f"# manifest_digest={dig}\n")
    summary = {k: {str(kk): vv for kk, vv in v.items()} for k, v in top.monotonicity(points).items()}
    outputs = [csv_path, _write_json(out / "sweep_summary.json", _stamp(summary, dig))]
    failed = [p for p in points if p.error]
    if failed:
        errs = [{"axis": p.axis, "value": p.value, "N_M": p.N_M, "error": p.error} for p in failed]
        outputs.append(_write_json(out / "sweep_errors.json", _stamp({"errors": errs}, dig)))
        raise PartialFailure(f"{len(failed)} of {len(points)} sweep points failed", outputs)
    return outputs


COMMANDS: dict[str, Callable] = {
    "redfield-gamma": cmd_redfield_gamma,
    "cp-check": cmd_cp_check,
    "tau-eval": cmd_tau_eval,
    "top-solve": cmd_top_solve,
    "top-sweep": cmd_top_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qmetop", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out-dir", default=".", help="directory for output files (created if missing)")
        p.add_argument("--tol", type=float, default=None, help="SDP stopping tolerance")
        p.add_argument("--delta", type=float, default=None, help="verdict threshold on tau")
        p.add_argument("--basis-order", dest="basis_order", choices=BASIS_ORDERS, default=None)
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        if name == "redfield-gamma":
            p.add_argument("--roles", choices=redfield.ROLES, default=None)
    return ap


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg, base = load_config(args.config)
        cfg = _merge_flags(cfg, args)
        numerics = _numerics(args)
        manifest = io.RunManifest(args.command, cfg, numerics.as_dict())
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            try:
                outputs = COMMANDS[args.command](cfg, base, out, args, numerics, manifest.digest)
                code = EXIT_OK
            except PartialFailure as exc:
                print(f"qmetop: {exc.args[0]}", file=sys.stderr)
                outputs, code = exc.args[1], EXIT_NUMERIC
        manifest.outputs = [str(p) for p in outputs]
        manifest.wall_time = time.perf_counter() - t0
        manifest.write(out)
        print(json.dumps({"digest": manifest.digest, "outputs": manifest.outputs}))
        return code
    except CONFIG_ERRORS as exc:
        print(f"qmetop: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"qmetop: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"qmetop: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
