"""Command-line entry point: ``kahlerflow <subcommand> [flags]``.

Subcommands ``certify``, ``expand``, ``evolve``, ``verify-sign`` and
``reproduce`` write key=value summaries and CSV snapshot tables into
``--out-dir``.  Exit status: 0 success, 1 invalid configuration, 2 solver
invariant violation, 3 a reproduction check failed.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import analysis, calabi, flow
from .profile import Mode, ProfileParams, build_profile

log = logging.getLogger("kahlerflow")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3
SUBCOMMANDS = ("certify", "expand", "evolve", "verify-sign", "reproduce")
CSV_HEADER = "r,phi,phi_r,psi,psi_r,lambda1,lambda2"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    n: int = 2
    k: int = 1
    c: float = 1.0
    delta: float = 1.0
    mode: str = Mode.PAPER_SMOOTHED.value
    r_min: float = -40.0
    r_max: float = 40.0
    grid_points: int = 4096
    t_end: float = 1e-3
    snapshots: tuple = ()
    cfl_safety: float = 0.2
    out_dir: str = "kahlerflow-out"

    def profile_params(self) -> ProfileParams:
        return ProfileParams(n=self.n, k=self.k, c=self.c, delta=self.delta)

    def solver_config(self) -> flow.SolverConfig:
        return flow.SolverConfig(r_min=self.r_min, r_max=self.r_max, m=self.grid_points,
                                 cfl_safety=self.cfl_safety, t_end=self.t_end,
                                 snapshot_times=self.snapshots)

    def validate(self):
        """Build every underlying object once so bad values fail before any work."""
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, float) and not math.isfinite(value):
                raise ConfigError(f"{f.name} must be finite")
        try:
            mode = Mode(self.mode)
            params = self.profile_params()
            if mode is Mode.KNOPF_CONSTANT and params.k != 1:
                raise ValueError("knopf-constant mode requires k = 1")
            self.solver_config().validate_for(params)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _parse_times(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(float(t) for t in text)
    return tuple(float(t) for t in str(text).replace(" ", "").split(",") if t)


_CONVERTERS = {"n": int, "k": int, "grid_points": int, "snapshots": _parse_times,
               "mode": str, "out_dir": str}


def _convert(key, raw):
    try:
        return _CONVERTERS.get(key, float)(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment, keys may use - or _."""
    known = {f.name for f in fields(RunConfig)}
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for number, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{number}: expected key=value")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigError(f"{path}:{number}: unknown key {key!r}")
        values[key] = _convert(key, raw)
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    # defaults are None so that only flags actually given override the config file
    common.add_argument("--n", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--c", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--mode", choices=[m.value for m in Mode])
    common.add_argument("--r-min", type=float)
    common.add_argument("--r-max", type=float)
    common.add_argument("--grid-points", type=int)
    common.add_argument("--t-end", type=float)
    common.add_argument("--snapshots", type=_parse_times, help="comma-separated times")
    common.add_argument("--cfl-safety", type=float)
    common.add_argument("--out-dir")
    common.add_argument("--config", help="key=value file; flags take precedence")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="kahlerflow", description="U(n)-invariant Kähler-Ricci flow laboratory")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "certify": "check positivity and extension conditions of the initial metric",
        "expand": "fit the asymptotic expansions of phi at both ends",
        "evolve": "run the flow and write snapshot tables",
        "verify-sign": "report where lambda2 < 0 and compare d/dt psi_r with the closed form",
        "reproduce": "certify, evolve and verify; nonzero exit if a check fails",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for f in fields(RunConfig):
        given = getattr(args, f.name, None)
        if given is not None:
            values[f.name] = given
    config = RunConfig(**values)
    config.validate()
    return config


# ---------------------------------------------------------------------------
# output


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (tuple, list)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def write_summary(path: Path, entries: dict):
    text = "".join(f"{key}={_fmt(value)}\n" for key, value in entries.items())
    path.write_text(text, encoding="utf-8")


def snapshot_filename(t: float) -> str:
    return f"snapshot_t{t:.10e}.csv"


def write_snapshot(directory: Path, state: flow.FlowState) -> Path:
    table = state.as_table()
    if not np.all(np.isfinite(table)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(table), axis=1))[0])
        raise flow.FlowInvariantError("non-finite value in snapshot table", bad)
    path = directory / snapshot_filename(state.t)
    lines = [CSV_HEADER] + [",".join(format(v, ".17g") for v in row) for row in table]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _config_entries(config: RunConfig) -> dict:
    return {f"config.{key}": value for key, value in asdict(config).items() if key != "out_dir"}


def _certificate_entries(cert: analysis.Certificate) -> dict:
    out = {f"certificate.{name}": cert.conditions[name] for name in analysis.CONDITIONS}
    for name in analysis.CONDITIONS[:4]:
        out[f"witness.{name}.r"], out[f"witness.{name}.value"] = cert.witnesses[name]
    return out


def _expansion_entries(verdict: calabi.ExtensionVerdict) -> dict:
    out = {"expansion.heuristic": verdict.heuristic}
    for fit in verdict.witnesses:
        prefix = f"expansion.{fit.end.value}"
        for i, coef in enumerate(fit.coefficients):
            out[f"{prefix}.c{i}"] = coef if math.isfinite(coef) else "nan"
        out[f"{prefix}.residual"] = fit.fit_residual if math.isfinite(fit.fit_residual) else "inf"
        out[f"{prefix}.valid"] = fit.valid
        out[f"{prefix}.window"] = fit.window
    return out


def _mixed_sign_entries(reports) -> dict:
    out = {}
    for i, rep in enumerate(reports):
        prefix = f"mixed_sign.{i}"
        out[f"{prefix}.t"] = rep.t
        out[f"{prefix}.negative_count"] = int(rep.negative_locus.size)
        if rep.mixed:
            out[f"{prefix}.negative_r_min"] = float(rep.negative_locus.min())
            out[f"{prefix}.negative_r_max"] = float(rep.negative_locus.max())
        out[f"{prefix}.min_lambda2.r"], out[f"{prefix}.min_lambda2.value"] = rep.min_lambda2
        out[f"{prefix}.predicted_threshold"] = rep.predicted_threshold
    return out


def _rate_entries(cmp: analysis.RateComparison) -> dict:
    return {
        "rate.window": (float(cmp.r[0]), float(cmp.r[-1])),
        "rate.max_relative_error": cmp.max_relative_error,
        "rate.mean_relative_error": cmp.mean_relative_error,
        "rate.sign_changes": tuple(float(x) for x in cmp.sign_changes) or "none",
    }


# ---------------------------------------------------------------------------
# subcommands


def _profile(config: RunConfig):
    return build_profile(config.profile_params(), mode=Mode(config.mode))


def _sign_checks(config: RunConfig, final: flow.FlowState, report) -> dict:
    """Negative locus non-empty and left of the threshold, no negativity to its right."""
    threshold = report.predicted_threshold
    bound = threshold + config.solver_config().dr
    r = final.grid
    right = (r > bound) & (r <= -config.delta)
    return {
        "check.locus_nonempty": report.mixed,
        "check.locus_left_of_threshold": report.locus_within(bound),
        "check.no_negativity_right_of_threshold": bool(np.all(final.lambda2[right] >= -1e-10)),
    }


def run(command: str, config: RunConfig) -> int:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    profile = _profile(config)
    entries = {"command": command, **_config_entries(config)}
    status = EXIT_OK

    if command in ("certify", "reproduce"):
        cert = analysis.certify_initial(profile, config.solver_config().grid())
        entries.update(_certificate_entries(cert))
        entries.update(_expansion_entries(cert.extension))
        if command == "reproduce" and not cert.all_true:
            status = EXIT_CHECK
    if command == "expand":
        entries.update(_expansion_entries(calabi.check_extension(profile)))
    if command in ("evolve", "verify-sign", "reproduce"):
        solver = config.solver_config()
        snapshots = flow.evolve(flow.init_state(profile, solver), solver)
        for snap in snapshots:
            path = write_snapshot(out, snap)
            log.info("wrote %s", path)
        entries["snapshots"] = tuple(snapshot_filename(s.t) for s in snapshots)
        if command != "evolve":
            reports = analysis.detect_mixed_sign(snapshots)
            entries.update(_mixed_sign_entries(reports))
            final = snapshots[-1]
            if final.t > 0:
                checks = _sign_checks(config, final, reports[-1])
                entries.update(checks)
                if command == "reproduce" and not all(checks.values()):
                    status = EXIT_CHECK
            if profile.mode is Mode.PAPER_SMOOTHED:
                cmp = analysis.compare_dt_psi_r(profile, solver)
                entries.update(_rate_entries(cmp))
                ok = cmp.max_relative_error <= 1e-2
                entries["check.rate_match"] = ok
                if command == "reproduce" and not ok:
                    status = EXIT_CHECK
    entries["status"] = status
    write_summary(out / f"{command}_summary.txt", entries)
    for key, value in entries.items():
        print(f"{key}={_fmt(value)}")
    return status


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
    except (ConfigError, TypeError) as exc:
        print(f"kahlerflow: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(args.command, config)
    except flow.FlowInvariantError as exc:
        print(f"kahlerflow: solver invariant violated: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
