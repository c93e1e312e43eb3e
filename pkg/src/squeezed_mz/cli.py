"""Command-line front end: ``squeezed-mz {surface,diameters,estimate,verify}``.

Settings are resolved as built-in defaults, overridden by a flat JSON config
file (``--config``, snake_case keys), overridden by explicit flags. The
resolved settings are hashed into ``manifest.json`` next to the outputs.
"""

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import tempfile
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import __version__
from .errors import DomainError, NumericError
from .experiments import (
    GridSpec,
    ScalingStudy,
    diameter_scaling,
    diameter_slopes,
    log_spaced,
    mc_campaign,
    probability_surface,
)
from .protocol import ProtocolConfig
from .verify import GROUPS, format_report, run_groups

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2
EXIT_VERIFY = 3

# keys that change how a run executes but not what it computes
_EXECUTION_KEYS = ("config", "out_dir", "threads")

DEFAULTS: Dict[str, dict] = {
    "surface": {
        "N": 4.0,
        "eta": 1.0,
        "channel": 1,
        "beta_range": [-0.5 * math.pi, 0.5 * math.pi],
        "phi_range": [-0.5 * math.pi, 0.5 * math.pi],
        "nodes": 101,
    },
    "diameters": {
        "P0": 0.9,
        "eta": 1.0,
        "N_log_range": [1.0, 4.0],
        "per_decade": 8,
    },
    "estimate": {
        "N": 20.0,
        "eta": 1.0,
        "theta_in": 0.0,
        "theta_out": 0.0,
        "phi1": 0.0,
        "phi2": 0.0,
        "channel": 1,
        "target": "beta",
        "delta": 0.01,
        "n": 10_000,
        "M": 500,
        "unsafe_offset": False,
    },
    "verify": {"group": []},
}
_COMMON_DEFAULTS = {"seed": 1, "out_dir": ".", "threads": "1"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--seed", type=int, default=S, help="master seed (u64)")
    p.add_argument("--config", default=S, help="flat JSON file with snake_case keys")
    p.add_argument("--out-dir", default=S, help="directory for output files")
    p.add_argument("--threads", default=S, help="worker threads: integer or 'auto'")


def _add_photons(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    group = p.add_mutually_exclusive_group()
    group.add_argument("--N", type=float, default=S, help="mean photon number")
    group.add_argument("--r", type=float, default=S, help="squeezing magnitude (N = sinh(r)^2)")


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = _Parser(prog="squeezed-mz", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("surface", help="no-click probability on a (beta, phi_minus) grid")
    _add_common(p)
    _add_photons(p)
    p.add_argument("--eta", type=float, default=S)
    p.add_argument("--channel", type=int, choices=(1, 2), default=S)
    p.add_argument("--beta-range", type=float, nargs=2, metavar=("LO", "HI"), default=S)
    p.add_argument("--phi-range", type=float, nargs=2, metavar=("LO", "HI"), default=S)
    p.add_argument("--nodes", type=int, default=S, help="nodes per axis")

    p = sub.add_parser("diameters", help="level-curve diameters versus N")
    _add_common(p)
    p.add_argument("--P0", type=float, default=S)
    p.add_argument("--eta", type=float, default=S)
    p.add_argument("--N-log-range", type=float, nargs=2, metavar=("LO", "HI"), default=S,
                   help="log10 range of N")
    p.add_argument("--per-decade", type=int, default=S)

    p = sub.add_parser("estimate", help="Monte Carlo maximum-likelihood campaign")
    _add_common(p)
    _add_photons(p)
    p.add_argument("--eta", type=float, default=S)
    p.add_argument("--theta-in", type=float, default=S)
    p.add_argument("--theta-out", type=float, default=S)
    p.add_argument("--phi1", type=float, default=S)
    p.add_argument("--phi2", type=float, default=S)
    p.add_argument("--channel", type=int, choices=(1, 2), default=S)
    p.add_argument("--target", choices=("beta", "phi-minus"), default=S)
    p.add_argument("--delta", type=float, default=S, help="offset of the true parameter from the peak")
    p.add_argument("--n", type=int, default=S, help="trials per experiment")
    p.add_argument("--M", type=int, default=S, help="number of experiments")
    p.add_argument("--unsafe-offset", action="store_true", default=S,
                   help="run even if the offset is under 5 predicted standard deviations")

    p = sub.add_parser("verify", help="run the internal consistency checks")
    _add_common(p)
    p.add_argument("--group", action="append", choices=sorted(GROUPS), default=S)
    return parser


def resolve_config(command: str, cli: dict, file_cfg: Optional[dict] = None) -> dict:
    """Merge defaults < config file < flags; ``N`` and ``r`` are mutually exclusive."""
    file_cfg = dict(file_cfg or {})
    if "N" in file_cfg and "r" in file_cfg:
        raise UsageError("config file sets both 'N' and 'r'")
    resolved = {**_COMMON_DEFAULTS, **DEFAULTS[command]}
    if "r" in file_cfg or "r" in cli:
        resolved.pop("N", None)
    if "N" in cli:
        file_cfg.pop("r", None)
    resolved.update(file_cfg)
    resolved.update(cli)
    unknown = set(resolved) - set(_COMMON_DEFAULTS) - set(DEFAULTS[command]) - {"r", "config"}
    if unknown:
        raise UsageError(f"unknown setting(s) for '{command}': {', '.join(sorted(unknown))}")
    if "r" in resolved:
        resolved["N"] = float(np.sinh(resolved["r"]) ** 2)
    return resolved


def config_digest(resolved: dict) -> str:
    payload = {k: v for k, v in resolved.items() if k not in _EXECUTION_KEYS}
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def format_number(x) -> str:
    """Shortest decimal string that round-trips to the same double."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else format_number(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json(path: str, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _threads(value) -> int:
    if str(value) == "auto":
        return os.cpu_count() or 1
    try:
        count = int(value)
    except ValueError:
        raise UsageError(f"--threads must be an integer or 'auto', got {value!r}") from None
    if count < 1:
        raise UsageError("--threads must be >= 1")
    return count


def _finish(command: str, cfg: dict, out_dir: str, outputs: List[str]) -> None:
    manifest = {
        "command": command,
        "config": {k: v for k, v in cfg.items() if k not in _EXECUTION_KEYS},
        "config_digest": config_digest(cfg),
        "master_seed": int(cfg["seed"]),
        "tool_version": __version__,
        "output_paths": outputs,
    }
    write_json(os.path.join(out_dir, "manifest.json"), manifest)


def cmd_surface(cfg: dict, out_dir: str) -> int:
    nodes = int(cfg["nodes"])
    grid = GridSpec(tuple(cfg["beta_range"]), tuple(cfg["phi_range"]), nodes, nodes)
    table = probability_surface(grid, float(cfg["N"]), float(cfg["eta"]), int(cfg["channel"]))
    path = os.path.join(out_dir, "surface.csv")
    write_csv(path, ("beta", "phi_minus", "P"), zip(table["beta"], table["phi_minus"], table["P"]))
    _finish("surface", cfg, out_dir, [path])
    return EXIT_OK


def cmd_diameters(cfg: dict, out_dir: str) -> int:
    lo, hi = cfg["N_log_range"]
    study = ScalingStudy(log_spaced(lo, hi, int(cfg["per_decade"])), eta=float(cfg["eta"]),
                         P0=float(cfg["P0"]))
    table = diameter_scaling(study)
    valid = sum(1 for e in table["error"] if not e)
    csv_path = os.path.join(out_dir, "diameters.csv")
    write_csv(
        csv_path,
        ("N", "beta_star", "phi_star", "error"),
        zip(table["N"], table["beta_star"], table["phi_star"], (json.dumps(e) if e else "" for e in table["error"])),
    )
    if valid < 2:
        raise DomainError(f"only {valid} valid diameter row(s); need at least 2 for a slope fit")
    slopes = diameter_slopes(table)
    slopes_path = os.path.join(out_dir, "slopes.json")
    write_json(slopes_path, {**slopes, "flagged_rows": len(table["N"]) - valid})
    _finish("diameters", cfg, out_dir, [csv_path, slopes_path])
    return EXIT_OK


def cmd_estimate(cfg: dict, out_dir: str) -> int:
    config = ProtocolConfig(
        N=float(cfg["N"]),
        theta_in=float(cfg["theta_in"]),
        theta_out=float(cfg["theta_out"]),
        phi1=float(cfg["phi1"]),
        phi2=float(cfg["phi2"]),
        eta=float(cfg["eta"]),
        anti_squeeze_channel=int(cfg["channel"]),
    )
    summary = mc_campaign(
        config,
        float(cfg["delta"]),
        int(cfg["n"]),
        int(cfg["M"]),
        int(cfg["seed"]),
        target=cfg["target"],
        enforce_offset=not cfg["unsafe_offset"],
        threads=_threads(cfg["threads"]),
    )
    if summary.warning:
        log.warning(summary.warning)
    csv_path = os.path.join(out_dir, "mc.csv")
    write_csv(
        csv_path,
        ("experiment_id", "estimate", "observed_fraction", "status"),
        ((k, e, f, s.value) for k, (e, f, s) in
         enumerate(zip(summary.estimates, summary.fractions, summary.statuses))),
    )
    summary_path = os.path.join(out_dir, "mc_summary.json")
    write_json(summary_path, summary.to_dict())
    _finish("estimate", cfg, out_dir, [csv_path, summary_path])
    return EXIT_OK


def cmd_verify(cfg: dict, out_dir: str) -> int:
    results = run_groups(cfg["group"] or None)
    print(format_report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


COMMANDS = {
    "surface": cmd_surface,
    "diameters": cmd_diameters,
    "estimate": cmd_estimate,
    "verify": cmd_verify,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = vars(parser.parse_args(argv))
        command = ns.pop("command")
        file_cfg = None
        if "config" in ns:
            with open(ns["config"]) as fh:
                file_cfg = json.load(fh)
            if not isinstance(file_cfg, dict):
                raise UsageError("config file must hold a JSON object")
        cfg = resolve_config(command, ns, file_cfg)
        out_dir = str(cfg["out_dir"])
        if command != "verify":
            os.makedirs(out_dir, exist_ok=True)
        return COMMANDS[command](cfg, out_dir)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ValueError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    sys.exit(run())
