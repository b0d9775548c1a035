"""Command-line interface: ``qmle simulate | estimate | uncertainty | report``.

Exit codes: 0 success, 1 I/O or configuration error, 2 optimizer did not converge,
3 the supplied point is not a likelihood maximum.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import _kernels
from .estimate import EstimationResult, LogLikelihood, OptimizerConfig, mle_estimate
from .io import RecordFileError, header_config, read_json, read_records, write_json, write_records
from .linalg import fidelity, trace_distance
from .povm import Scheme, SchemeConfig
from .simulate import SimulationSpec, simulate
from .states import state_from_spec
from .uncertainty import NotAtMaximumError, analyze

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_NOT_MAXIMUM = 0, 1, 2, 3

log = logging.getLogger("qmle")


class ConfigError(Exception):
    pass


def parse_state(text: str) -> dict:
    """Turn ``coherent:1,0``, ``squeezed:0.5``, ``bell:psi2``, ``singlet``,
    ``custom:a0,a1,...`` or a JSON object into a state description."""
    text = text.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid state JSON: {exc}") from exc
    kind, _, arg = text.partition(":")
    kind = kind.lower()
    try:
        if kind == "coherent":
            parts = [float(p) for p in arg.split(",")] if arg else [0.0]
            return {"type": "coherent", "alpha_re": parts[0], "alpha_im": parts[1] if len(parts) > 1 else 0.0}
        if kind == "squeezed":
            return {"type": "squeezed", "mean_photon": float(arg)}
        if kind == "bell":
            return {"type": "bell", "variant": arg or "psi1"}
        if kind == "singlet":
            return {"type": "singlet"}
        if kind == "custom":
            return {"type": "custom", "amplitudes": [float(p) for p in arg.split(",")]}
    except ValueError as exc:
        raise ConfigError(f"cannot parse state {text!r}: {exc}") from exc
    raise ConfigError(f"unknown state {text!r}")


def _cutoffs(scheme: Scheme, cutoff) -> tuple:
    if scheme in (Scheme.SPINPAIR, Scheme.SPIN):
        return ()
    if cutoff is None:
        raise ConfigError(f"--cutoff is required for {scheme.value}")
    return tuple(cutoff)


def _scheme_config(args) -> SchemeConfig:
    scheme = Scheme(args.scheme)
    try:
        return SchemeConfig(scheme, args.eta, _cutoffs(scheme, args.cutoff))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _target_state(text, cfg: SchemeConfig):
    try:
        return state_from_spec(parse_state(text), cfg.cutoffs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# -- commands ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _scheme_config(args)
    spec_dict = parse_state(args.state)
    try:
        state = state_from_spec(spec_dict, cfg.cutoffs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if state.dim != cfg.dim:
        raise ConfigError(f"state dimension {state.dim} does not match scheme dimension {cfg.dim}")
    fixed = json.loads(args.fixed) if args.fixed else {}
    records = simulate(SimulationSpec(state, cfg, args.n, args.seed, fixed))
    write_records(args.out, records, cfg, seed=args.seed, true_state=spec_dict)
    print(f"simulated {len(records)} {cfg.scheme.value} records of {state.label or spec_dict['type']} "
          f"(eta={cfg.eta}, cutoffs={cfg.cutoffs}, seed={args.seed}) -> {args.out}")
    return EXIT_OK


def _load_records(path, args=None):
    header, records = read_records(path)
    cfg = header_config(header)
    if args is not None:
        if getattr(args, "scheme", None) and Scheme(args.scheme) is not cfg.scheme:
            raise ConfigError(f"--scheme {args.scheme} does not match file scheme {cfg.scheme.value}")
        if getattr(args, "eta", None) is not None and not np.isclose(args.eta, cfg.eta):
            raise ConfigError(f"--eta {args.eta} does not match file eta {cfg.eta}")
        if getattr(args, "cutoff", None) is not None:
            wanted = tuple(args.cutoff)
            if cfg.scheme is Scheme.HOMODYNE2 and len(wanted) == 1:
                wanted = wanted * 2
            if wanted != cfg.cutoffs:
                raise ConfigError(f"--cutoff {wanted} does not match file cutoff {cfg.cutoffs}")
    return header, records, cfg


def _result_payload(result: EstimationResult, cfg: SchemeConfig) -> dict:
    data = result.to_json()
    data["scheme"] = cfg.scheme.value
    data["eta"] = cfg.eta
    data["cutoff"] = list(cfg.cutoffs)
    data["optimizer"] = result.optimizer
    return data


def _result_config(data: dict) -> SchemeConfig:
    return SchemeConfig(Scheme(data["scheme"]), float(data["eta"]), tuple(data["cutoff"]))


def cmd_estimate(args) -> int:
    _, records, cfg = _load_records(args.input, args)
    opt = OptimizerConfig(
        kind=args.optimizer,
        max_iter=args.max_iter,
        ftol=args.ftol,
        step=args.step,
        restarts=args.restarts,
    )
    result = mle_estimate(records, cfg, opt)
    data = _result_payload(result, cfg)
    line = f"L = {result.loglik:.6f}, {result.iterations} iterations, converged={result.converged}"
    if args.target:
        target = _target_state(args.target, cfg)
        data["target"] = args.target
        data["fidelity"] = fidelity(result.rho, target.amplitudes)
        line += f", fidelity={data['fidelity']:.4f}"
    write_json(args.out, data)
    print(line)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_uncertainty(args) -> int:
    _, records, cfg = _load_records(args.input)
    data = read_json(args.result)
    if _result_config(data) != cfg:
        raise ConfigError("result file was produced for a different scheme configuration")
    params = np.asarray(data["params"], dtype=float)
    try:
        report = analyze(LogLikelihood(records, cfg), params)
    except NotAtMaximumError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_MAXIMUM
    write_json(args.out, report.to_json())
    print(f"condition number {report.condition_number:.3e}, {report.null_directions} null direction(s)")
    return EXIT_OK


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_report(args) -> int:
    data = read_json(args.result)
    cfg = _result_config(data)
    rho = np.array(data["rho_re"]) + 1j * np.array(data["rho_im"])
    errors = read_json(args.errors) if args.errors else None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "rho.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["row", "col", "re", "im"] + (["std_re", "std_im"] if errors else [])
        writer.writerow(header)
        dim = rho.shape[0]
        for m in range(dim):
            for n in range(dim):
                row = [m, n, _fmt(rho[m, n].real), _fmt(rho[m, n].imag)]
                if errors:
                    row += [_fmt(errors["std_re"][m][n]), _fmt(errors["std_im"][m][n])]
                writer.writerow(row)
    summary = {"dim": rho.shape[0], "loglik": _fmt(data["loglik"]), "converged": data["converged"]}
    if args.target:
        target = _target_state(args.target, cfg)
        summary["fidelity"] = _fmt(fidelity(rho, target.amplitudes))
        summary["trace_distance"] = _fmt(trace_distance(rho, target.density()))
    with (out_dir / "summary.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(summary))
        writer.writerow(list(summary.values()))
    print(f"wrote {out_dir / 'rho.csv'} and {out_dir / 'summary.csv'}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------------------


def _cutoff_arg(text: str):
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid cutoff {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmle", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a JSONL record file")
    p.add_argument("--scheme", required=True, choices=[s.value for s in Scheme])
    p.add_argument("--state", required=True)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--cutoff", type=_cutoff_arg)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--fixed", help='JSON object pinning settings, e.g. \'{"phi": 0}\'')
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="maximum-likelihood density matrix")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--optimizer", choices=["simplex", "gradient"], default="simplex")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--ftol", type=float, default=1e-8)
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--target")
    p.add_argument("--scheme", choices=[s.value for s in Scheme])
    p.add_argument("--eta", type=float)
    p.add_argument("--cutoff", type=_cutoff_arg)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("uncertainty", help="error bars at the estimate")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--result", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_uncertainty)

    p = sub.add_parser("report", help="CSV tables for plotting")
    p.add_argument("--result", required=True)
    p.add_argument("--errors")
    p.add_argument("--target")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    _kernels.configure_threads()
    try:
        return args.func(args)
    except (ConfigError, RecordFileError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
