"""Configuration-driven experiment runner.

Subcommands: ``constants``, ``kernels``, ``waves-check``, ``np-spectrum``,
``solve``, ``sweep``, ``witness``.  Sweep configurations are JSON documents;
results go to CSV with a fixed column order and a metadata header block that
round-trips the full configuration.  Runs are deterministic: identical
configurations produce byte-identical CSV files.

Exit codes: 0 success, 2 validation failure, 3 I/O failure, 4 empty result.
The thread count for per-loss parallel dispatch honors the
``ELASTOPLASMON_THREADS`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from .harmonics import build_quadrature, ensure_tables, shared_tables
from .lame import LameParams
from .energy import EnergyReport
from .transmission import SourceSpec, residual_check, solve_modes
from .scenarios import (
    SweepResult,
    fixed_configuration,
    scheduled_configuration,
    sweep,
    witness_core_resonant,
    witness_fixed_c,
    witness_nocore,
    witness_radial_nonresonant,
)
from .waves import (
    assemble_H,
    kernel_family,
    np_eigenvalue_map,
    np_galerkin_spectrum,
    perfect_wave,
    plasmon_constants,
    plasmon_kernel,
    verify_perfect_wave,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_EMPTY = 4

CSV_COLUMNS = "delta,n_delta,c,E_delta,I_upper,J_lower,growth_exponent,verdict"


class ValidationError(ValueError):
    pass


class EmptyResultError(RuntimeError):
    pass


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def _error(msg: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": msg, "code": code}, sort_keys=True) + "\n")
    return code


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    return validate_config(cfg)


def validate_config(cfg: dict) -> dict:
    if cfg.get("schema") != 1:
        raise ValidationError("config schema must be 1")
    for key in ("lambda", "mu", "shell_radius", "q", "delta_list", "c_mode", "source_modes"):
        if key not in cfg:
            raise ValidationError(f"config missing key {key!r}")
    LameParams(cfg["lambda"], cfg["mu"])  # raises on a non-convex pair
    if cfg["shell_radius"] <= 0 or cfg["q"] <= cfg["shell_radius"]:
        raise ValidationError("need 0 < shell_radius < q")
    core = cfg.get("core_radius")
    if core is not None and not (0 < core < cfg["shell_radius"]):
        raise ValidationError("need 0 < core_radius < shell_radius")
    deltas = cfg["delta_list"]
    if len(deltas) < 3 or any(b >= a for a, b in zip(deltas, deltas[1:])) or min(deltas) <= 0:
        raise ValidationError("delta_list must be positive and strictly decreasing, >= 3 entries")
    cmode = cfg["c_mode"]
    if not (isinstance(cmode, dict) and len(cmode) == 1 and next(iter(cmode)) in ("fixed", "schedule")):
        raise ValidationError("c_mode must be {'fixed': value} or {'schedule': family}")
    if "schedule" in cmode and cmode["schedule"] not in (1, 2, 3):
        raise ValidationError("schedule family must be 1, 2 or 3")
    n_max = cfg.get("n_max", 24)
    for mode in cfg["source_modes"]:
        n, fam, k, re, im = mode
        if n is not None and n < 2:
            raise ValidationError("source degrees below 2 are unsupported")
        if n is not None and n > n_max:
            raise ValidationError(f"source degree {n} exceeds the truncation n_max = {n_max}")
        if fam not in (1, 2, 3) or k < 1:
            raise ValidationError("source mode family/index invalid")
    cfg.setdefault("n_max", 24)
    cfg.setdefault("quadrature_exactness", 2 * cfg["n_max"] + 4)
    cfg.setdefault("output", {})
    return cfg


def _configuration(cfg: dict):
    params = LameParams(cfg["lambda"], cfg["mu"])
    cmode = cfg["c_mode"]
    if "fixed" in cmode:
        coeffs = {}
        for n, fam, k, re, im in cfg["source_modes"]:
            if n is None:
                raise ValidationError("fixed-multiplier runs need explicit source degrees")
            coeffs[(int(n), int(fam), int(k))] = complex(re, im)
        src = SourceSpec(q=cfg["q"], coefficients=coeffs)
        return fixed_configuration(
            params=params,
            shell_radius=cfg["shell_radius"],
            c=cmode["fixed"],
            source=src,
            core_radius=cfg.get("core_radius"),
        )
    fam = cmode["schedule"]
    if len(cfg["source_modes"]) != 1:
        raise ValidationError("scheduled runs re-inject exactly one source mode")
    _, fam_src, k, re, im = cfg["source_modes"][0]
    if fam_src != fam:
        raise ValidationError("scheduled source family must match the schedule family")
    return scheduled_configuration(
        params=params,
        shell_radius=cfg["shell_radius"],
        q=cfg["q"],
        family=fam,
        k=int(k),
        gamma=complex(re, im),
        core_radius=cfg.get("core_radius"),
    )


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def emit_report(result: SweepResult, cfg: dict, csv_path: str, svg_path: str | None = None) -> None:
    """Write the sweep CSV (and optional SVG); refuses an empty result."""
    if not result.rows:
        raise EmptyResultError("empty sweep result")
    lines = ["# elastoplasmon sweep schema=1"]
    lines.append("# config=" + json.dumps(cfg, sort_keys=True, separators=(",", ":")))
    lines.append(CSV_COLUMNS)
    last = len(result.rows) - 1
    for i, row in enumerate(result.rows):
        cells = [
            _fmt(row.delta),
            _fmt(row.n_delta),
            _fmt(row.c_used),
            _fmt(row.E_delta),
            _fmt(row.I_upper),
            _fmt(row.J_lower),
            _fmt(result.growth_exponent) if i == last else "",
            result.verdict if i == last else "",
        ]
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    if svg_path:
        _write_svg(result, svg_path)


def parse_report(csv_path: str) -> tuple[dict, list[EnergyReport], float, str]:
    """Round-trip reader: config, rows, growth exponent, verdict."""
    cfg = None
    rows = []
    growth = math.nan
    verdict = ""
    with open(csv_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# config="):
                cfg = json.loads(line[len("# config="):])
            elif line.startswith("#") or line == CSV_COLUMNS or not line:
                continue
            else:
                cells = line.split(",")
                rows.append(
                    EnergyReport(
                        delta=float(cells[0]),
                        n_delta=int(cells[1]) if cells[1] else None,
                        c_used=float(cells[2]),
                        E_delta=float(cells[3]),
                        I_upper=float(cells[4]) if cells[4] else None,
                        J_lower=float(cells[5]) if cells[5] else None,
                    )
                )
                if cells[7]:
                    growth = float(cells[6])
                    verdict = cells[7]
    if cfg is None:
        raise ValueError("no config header in CSV")
    return cfg, rows, growth, verdict


def _write_svg(result: SweepResult, path: str) -> None:
    xs = [math.log10(1.0 / r.delta) for r in result.rows]
    ys = [math.log10(max(r.E_delta, 1e-300)) for r in result.rows]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    dx = (x1 - x0) or 1.0
    dy = (y1 - y0) or 1.0
    W, H, pad = 480, 320, 40

    def px(x):
        return pad + (W - 2 * pad) * (x - x0) / dx

    def py(y):
        return H - pad - (H - 2 * pad) * (y - y0) / dy

    pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
    svg = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1.5"/>',
        f'<text x="{W//2}" y="{H-10}" font-size="12" text-anchor="middle">log10(1/delta)</text>',
        f'<text x="12" y="{H//2}" font-size="12" transform="rotate(-90 12 {H//2})" text-anchor="middle">log10(E)</text>',
        f'<text x="{W//2}" y="20" font-size="12" text-anchor="middle">verdict: {result.verdict}, slope {result.growth_exponent:.3f}</text>',
        "</svg>",
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(svg) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_constants(args) -> int:
    params = LameParams(args.lam, args.mu)
    z = plasmon_constants(params, args.n)
    for name, val in zip(("zeta1", "zeta2", "zeta3"), z.as_tuple()):
        print(f"{name} = {_fmt(val)}")
    return EXIT_OK


def _cmd_kernels(args) -> int:
    params = LameParams(args.lam, args.mu)
    tables = ensure_tables(None, args.n + 4)
    z = plasmon_constants(params, args.n)
    for fam, c in enumerate(z.as_tuple(), start=1):
        kers = plasmon_kernel(assemble_H(args.n, params, c, tables))
        fams = {kernel_family(K, tables) for K in kers}
        print(f"family {fam}: c = {_fmt(c)}, kernel dimension {len(kers)}, t-pattern {sorted(fams)}")
    return EXIT_OK


def _cmd_waves_check(args) -> int:
    params = LameParams(args.lam, args.mu)
    tables = ensure_tables(None, args.n + 4)
    z = plasmon_constants(params, args.n)
    worst = 0.0
    for fam, c in enumerate(z.as_tuple(), start=1):
        kers = plasmon_kernel(assemble_H(args.n, params, c, tables))
        for k, K in enumerate(kers, start=1):
            wave = perfect_wave(K, fam, args.n, args.R, params, tables)
            rep = verify_perfect_wave(wave, params, tables)
            bad = max(rep["continuity"], rep["transmission"], rep["lame_interior"], rep["lame_exterior"])
            worst = max(worst, bad)
            print(
                f"n={args.n} family={fam} k={k}: continuity {rep['continuity']:.2e} "
                f"transmission {rep['transmission']:.2e} lame {max(rep['lame_interior'], rep['lame_exterior']):.2e}"
            )
    print(f"worst residual {worst:.3e}")
    return EXIT_OK if worst < 1e-6 else EXIT_VALIDATION


def _cmd_np_spectrum(args) -> int:
    params = LameParams(args.lam, args.mu)
    quad = build_quadrature(2 * args.nmax + 4)
    spec = np_galerkin_spectrum(args.R, params, args.nmax, quad)
    lines = ["# elastoplasmon np-spectrum schema=1", "eigenvalue,degree_tag,matched_c,matched_family,target"]
    targets = []
    for n in range(2, args.nmax + 1):
        z = plasmon_constants(params, n)
        for fam, c in enumerate(z.as_tuple(), start=1):
            targets.append((np_eigenvalue_map(c), c, fam, n))
    for val, deg in spec:
        match = min(targets, key=lambda t: abs(t[0] - val))
        if abs(match[0] - val) < 5e-3:
            lines.append(f"{_fmt(val)},{deg},{_fmt(match[1])},{match[2]},{_fmt(match[0])}")
        else:
            lines.append(f"{_fmt(val)},{deg},,,")
    text = "\n".join(lines) + "\n"
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_solve(args) -> int:
    cfg = load_config(args.config)
    params = LameParams(cfg["lambda"], cfg["mu"])
    tables = shared_tables(max(12, cfg["n_max"]))
    configuration = _configuration(cfg)
    delta = args.delta if args.delta is not None else cfg["delta_list"][0]
    med, src = configuration(delta)
    sols = solve_modes(med, src, tables)
    quad = build_quadrature(cfg["quadrature_exactness"])
    rep = residual_check(sols, med, src, quad, tables)
    from .energy import dissipation_E

    E = dissipation_E(sols, med, tables)
    print(f"delta = {_fmt(delta)}  c = {_fmt(med.c)}  E_delta = {_fmt(E)}")
    for key, val in sorted(rep.items()):
        print(f"residual {key}: {val:.3e}")
    return EXIT_OK if max(rep.values()) < 1e-8 else EXIT_VALIDATION


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    tables = shared_tables(max(12, cfg["n_max"]))
    configuration = _configuration(cfg)
    workers = int(os.environ.get("ELASTOPLASMON_THREADS", "1"))
    result = sweep(configuration, cfg["delta_list"], tables, max_workers=workers)
    out = cfg.get("output", {})
    csv_path = args.csv or out.get("csv")
    if not csv_path:
        raise ValidationError("no CSV output path configured")
    emit_report(result, cfg, csv_path, args.svg or out.get("svg"))
    print(f"verdict: {result.verdict}  growth_exponent: {_fmt(result.growth_exponent)}")
    return EXIT_OK


def _cmd_witness(args) -> int:
    cfg = load_config(args.config)
    tables = shared_tables(max(12, cfg["n_max"]))
    configuration = _configuration(cfg)
    delta = args.delta if args.delta is not None else cfg["delta_list"][0]
    med, src = configuration(delta)
    printed = False
    if med.core_radius is None:
        _, J, tau = witness_nocore(med, src, delta, tables)
        print(f"J_lower = {_fmt(J)}  tau = {_fmt(tau)}")
        printed = True
    else:
        try:
            _, I, data = witness_fixed_c(med, src, tables)
            print(f"I_upper = {_fmt(I)}")
            printed = True
        except (ValueError, ArithmeticError):
            pass
        try:
            _, _, J, tau = witness_core_resonant(med, src, delta, tables)
            print(f"J_lower = {_fmt(J)}  tau = {_fmt(tau)}")
            printed = True
        except (ValueError, ArithmeticError):
            pass
        try:
            _, _, I2 = witness_radial_nonresonant(med, src, delta, tables)
            print(f"I_upper_scheduled = {_fmt(I2)}")
            printed = True
        except (ValueError, ArithmeticError):
            pass
    return EXIT_OK if printed else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="elastoplasmon", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def material(p):
        p.add_argument("--lambda", dest="lam", type=float, default=1.0)
        p.add_argument("--mu", type=float, default=1.0)

    p = sub.add_parser("constants", help="plasmon constants at one degree")
    p.add_argument("--n", type=int, required=True)
    material(p)
    p.set_defaults(func=_cmd_constants)

    p = sub.add_parser("kernels", help="kernel dimensions and t-patterns")
    p.add_argument("--n", type=int, required=True)
    material(p)
    p.set_defaults(func=_cmd_kernels)

    p = sub.add_parser("waves-check", help="verify the perfect-wave invariants")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--R", type=float, default=1.0)
    material(p)
    p.set_defaults(func=_cmd_waves_check)

    p = sub.add_parser("np-spectrum", help="Galerkin boundary-operator spectrum")
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--nmax", type=int, default=5)
    p.add_argument("--csv")
    material(p)
    p.set_defaults(func=_cmd_np_spectrum)

    p = sub.add_parser("solve", help="one exact solve with residual report")
    p.add_argument("--config", required=True)
    p.add_argument("--delta", type=float)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("sweep", help="loss sweep driven by a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--csv")
    p.add_argument("--svg")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("witness", help="variational bounds at one loss value")
    p.add_argument("--config", required=True)
    p.add_argument("--delta", type=float)
    p.set_defaults(func=_cmd_witness)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except EmptyResultError as exc:
        return _error(str(exc), EXIT_EMPTY)
    except (ValidationError, ValueError) as exc:
        return _error(str(exc), EXIT_VALIDATION)
    except OSError as exc:
        return _error(str(exc), EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())
