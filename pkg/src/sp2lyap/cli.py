"""
Command-line front end.

    sp2lyap transfer --energy 3 --omega 0,0 [--oracle --step 1e-4]
    sp2lyap lyapunov --energy 3 [--steps N --reorth-every K]
    sp2lyap certify  --energy 5 [--delta D --max-m M --tol-f T]
    sp2lyap scan     --from 3 --to 4 [--grid 0.01]

Settings are resolved per key as: command-line flag, then the config file
(``--config``, else ``$LYAP_CONFIG``, else ``./lyap.conf`` if present), then
the built-in default. The config file holds flat ``key = value`` lines with
``#`` comments.
"""

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from . import __version__
from .errors import EnergyBelowSpectrum, SearchExhausted
from .liealgebra import scan_critical_energies
from .linalg import symplectic_defect
from .lyapunov import is_separable, lyapunov_spectrum
from .transfer import ModelConfig, OmegaPair, transfer_matrix, transfer_matrix_ode

DEFAULT_CONFIG = "lyap.conf"
ENV_CONFIG = "LYAP_CONFIG"

EXIT_USAGE = 2
EXIT_SEARCH = 3

SCAN_HEADER = ["energy", "f1", "f2", "rank", "verdict", "gamma1", "gamma2", "se1", "se2"]


def parse_support(text):
    """``"0:0.5, 1:0.5"`` -> ``((0.0, 0.5), (1.0, 0.5))``."""
    pairs = []
    for item in str(text).split(","):
        item = item.strip()
        if not item:
            continue
        value, _, prob = item.partition(":")
        pairs.append((float(value), float(prob)))
    return tuple(pairs)


@dataclass(frozen=True)
class RunConfig:
    support: tuple = ((0.0, 0.5), (1.0, 0.5))
    seed: int = 0
    delta: float = 0.4
    max_m: int = 2**20
    tol_f: float = 1e-12
    grid_step: float = 1e-2
    steps: int = 10**5
    reorth_every: int = 10
    format: str = "json"

    def __post_init__(self):
        for name in ("delta", "max_m", "tol_f", "grid_step", "steps", "reorth_every"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.delta < 1:
            raise ValueError("delta must be below 1")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")

    @property
    def model(self):
        return ModelConfig(support=self.support, seed=self.seed)


_CASTS = {
    "support": parse_support,
    "seed": int,
    "delta": float,
    "max_m": lambda v: int(float(v)),
    "tol_f": float,
    "grid_step": float,
    "steps": lambda v: int(float(v)),
    "reorth_every": int,
    "format": str,
}
_ALIASES = {"m_max": "max_m", "max-m": "max_m", "grid": "grid_step", "output_format": "format"}


def read_config_file(path):
    """Parse a ``key = value`` file into typed `RunConfig` overrides."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key = key.strip().lower().replace("-", "_")
            key = _ALIASES.get(key, key)
            if key not in _CASTS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _CASTS[key](value.strip())
    return values


def resolve_config(args):
    """Merge defaults, the config file and command-line flags, in that order."""
    path = args.config or os.environ.get(ENV_CONFIG)
    if path is None and os.path.exists(DEFAULT_CONFIG):
        path = DEFAULT_CONFIG
    merged = {}
    if path is not None:
        merged.update(read_config_file(path))
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            merged[f.name] = flag
    return replace(RunConfig(), **merged)


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _csv(rows, header):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json(obj):
    return json.dumps(obj, indent=2) + "\n"


def cmd_transfer(args, cfg):
    omega = OmegaPair.parse(args.omega)
    tm = transfer_matrix(args.energy, omega)
    if args.oracle:
        A = transfer_matrix_ode(args.energy, omega, args.step)
        method = "rk4"
    else:
        A = tm.A
        method = "closed_form"
    defect = symplectic_defect(A)
    entries = [float(v) for v in A.reshape(-1)]
    if cfg.format == "json":
        return _json({
            "energy": float(args.energy),
            "omega": [omega.w1, omega.w2],
            "method": method,
            "matrix": entries,
            "symplectic_defect": defect,
        })
    header = [f"a{i}{j}" for i in range(1, 5) for j in range(1, 5)] + ["symplectic_defect"]
    return _csv([entries + [defect]], header)


def _spectrum_dict(sp):
    separable, margin = is_separable(sp)
    return {
        "energy": sp.energy,
        "gammas": list(sp.gammas),
        "stderr": list(sp.stderr),
        "steps": sp.steps,
        "seed": sp.seed,
        "separable": separable,
        "margin": margin,
    }


def cmd_lyapunov(args, cfg):
    sp = lyapunov_spectrum(cfg.model, args.energy, cfg.steps, cfg.reorth_every)
    if cfg.format == "json":
        return _json(_spectrum_dict(sp))
    header = ["energy", "gamma1", "gamma2", "gamma3", "gamma4", "se1", "se2", "se3", "se4",
              "steps", "seed"]
    return _csv([[sp.energy, *sp.gammas, *sp.stderr, sp.steps, sp.seed]], header)


def cmd_certify(args, cfg):
    from .liealgebra import span_certificate

    if not args.energy > 2:
        raise _UsageError("energy must exceed 2")
    cert = span_certificate(args.energy, delta=cfg.delta, M_max=cfg.max_m, tol_f=cfg.tol_f)
    d = cert.to_dict()
    if cfg.format == "json":
        return _json(d)
    header = ["energy", "m00", "m10", "m01", "m11", "f1", "f2", "rank", "verdict"]
    p = d["powers"]
    return _csv([[d["energy"], p["00"], p["10"], p["01"], p["11"], d["f1"], d["f2"], d["rank"],
                  d["verdict"]]], header)


def cmd_scan(args, cfg):
    lo, hi = args.E_from, args.E_to
    if not 2 < lo < hi:
        raise _UsageError("need 2 < from < to")
    result = scan_critical_energies(
        lo, hi, cfg.grid_step, delta=cfg.delta, M_max=cfg.max_m, tol_f=cfg.tol_f,
        workers=args.workers,
    )
    rows = []
    for E, cert in zip(result.energies, result.certificates):
        sp = lyapunov_spectrum(cfg.model, float(E), cfg.steps, cfg.reorth_every)
        if isinstance(cert, SearchExhausted):
            f1 = f2 = float("nan")
            rank, verdict = 0, "UNRESOLVED"
        else:
            f1, f2, rank, verdict = cert.f1, cert.f2, cert.rank, cert.verdict.value
        rows.append([float(E), f1, f2, rank, verdict, sp.gammas[0], sp.gammas[1],
                     sp.stderr[0], sp.stderr[1]])
    flagged = [[c.E_left, c.E_right, c.reason] for c in result.flagged]
    if cfg.format == "json":
        return _json({
            "rows": [dict(zip(SCAN_HEADER, r)) for r in rows],
            "flagged": [dict(zip(["E_left", "E_right", "reason"], f)) for f in flagged],
        })
    return _csv(rows, SCAN_HEADER) + "\n" + _csv(flagged, ["E_left", "E_right", "reason"])


class _UsageError(Exception):
    pass


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file")
    common.add_argument("--seed", type=int, help="PRNG seed (unsigned 64-bit)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--out", metavar="PATH", help="output file (default stdout)")
    common.add_argument("--support", type=parse_support,
                        help="law of the couplings, e.g. '0:0.5,1:0.5'")

    parser = argparse.ArgumentParser(prog="sp2lyap", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transfer", parents=[common], help="one-cell transfer matrix")
    p.add_argument("--energy", type=float, required=True)
    p.add_argument("--omega", required=True, help="w1,w2 with entries in {0,1}")
    p.add_argument("--oracle", action="store_true", help="integrate the ODE with RK4 instead")
    p.add_argument("--step", type=float, default=1e-4, help="RK4 step (with --oracle)")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("lyapunov", parents=[common], help="Lyapunov spectrum")
    p.add_argument("--energy", type=float, required=True)
    p.add_argument("--steps", type=lambda v: int(float(v)))
    p.add_argument("--reorth-every", dest="reorth_every", type=int)
    p.set_defaults(func=cmd_lyapunov)

    p = sub.add_parser("certify", parents=[common], help="sp_2(R) span certificate")
    p.add_argument("--energy", type=float, required=True)
    p.add_argument("--delta", type=float)
    p.add_argument("--max-m", dest="max_m", type=lambda v: int(float(v)))
    p.add_argument("--tol-f", dest="tol_f", type=float)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("scan", parents=[common], help="critical-energy scan")
    p.add_argument("--from", dest="E_from", type=float, required=True)
    p.add_argument("--to", dest="E_to", type=float, required=True)
    p.add_argument("--grid", dest="grid_step", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--max-m", dest="max_m", type=lambda v: int(float(v)))
    p.add_argument("--tol-f", dest="tol_f", type=float)
    p.add_argument("--steps", type=lambda v: int(float(v)))
    p.add_argument("--reorth-every", dest="reorth_every", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_scan)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        text = args.func(args, cfg)
    except (EnergyBelowSpectrum, _UsageError, ValueError, OSError) as exc:
        print(f"sp2lyap {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SearchExhausted as exc:
        print(f"sp2lyap {args.command}: search exhausted: {exc}", file=sys.stderr)
        return EXIT_SEARCH
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
