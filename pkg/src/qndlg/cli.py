"""
Command-line front end.

    qnd-lg sweep   --n 3,5,7,9 --out fig2a.csv
    qnd-lg sweep   --n 9 --all-toggles --out fig2b.csv
    qnd-lg triple  --n 7 --theta-grid 0.02pi:pi:100 --out fig3.csv
    qnd-lg audit
    qnd-lg oracle-check --samples 1000000
    qnd-lg plot fig2a.csv --out fig2a.svg

Settings come from built-in defaults, then an optional ``--config`` file of
``key=value`` lines, then command-line flags (highest precedence).

Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import re
import sys
import tempfile
from pathlib import Path

import numpy as np

from .errors import ParameterError, QndLgError
from .gaussian_dynamics import PhysicalParams
from .protocol import (
    MAX_OPT_SLOTS,
    SCHEMES,
    SequenceSpec,
    audit_var_diff_closed_form,
    default_theta_grid,
    disturbance_audit,
    sweep_theta,
    sweep_triple,
)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

DEFAULTS = {
    "g": 1e-7,
    "na": 1e6,
    "nl": 5e8,
    "eta": 0.5e-9,
    "n": "9",
    "theta": "0.5pi",
    "theta-grid": None,
    "back-action": True,
    "scattering": True,
    "all-toggles": False,
    "polarization-decay": False,
    "scheme": "optimized",
    "seed": 0,
    "samples": 1_000_000,
    "out": None,
}

SWEEP_HEADER = ["theta", "n", "k_value", "k_reduced", "back_action", "scattering"]
TRIPLE_HEADER = ["theta", "n", "k3", "triple", "mask_ab", "mask_bc", "mask_ac",
                 "back_action", "scattering"]


class UsageError(QndLgError):
    pass


class CsvParseError(QndLgError):
    pass


_ANGLE = re.compile(r"^\s*([-+])?\s*((?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*(pi)?"
                    r"\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_angle(text: str) -> float:
    """Parse radians such as ``1.2``, ``pi``, ``0.5pi``, ``-2*pi`` or ``pi/3``."""
    m = _ANGLE.match(str(text))
    if not m or (m.group(2) is None and m.group(3) is None):
        raise UsageError(f"cannot parse angle {text!r}")
    coef = float(m.group(2)) if m.group(2) is not None else 1.0
    value = coef * (math.pi if m.group(3) else 1.0)
    if m.group(1) == "-":
        value = -value
    if m.group(4) is not None:
        den = float(m.group(4))
        if den == 0:
            raise UsageError(f"division by zero in angle {text!r}")
        value /= den
    return value


def parse_count(text) -> int:
    """Integer count that may be written as ``1e6``."""
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"expected an integer count, got {text!r}")
    return int(value)


def parse_grid(text: str) -> np.ndarray:
    """``START:STOP:POINTS`` -> ``POINTS`` equally spaced angles including both ends."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise UsageError(f"theta grid must look like START:STOP:POINTS, got {text!r}")
    start, stop = parse_angle(parts[0]), parse_angle(parts[1])
    try:
        points = int(parts[2])
    except ValueError:
        raise UsageError(f"grid point count must be an integer, got {parts[2]!r}") from None
    if points < 1:
        raise UsageError("theta grid is empty")
    if points > 1 and not stop > start:
        raise UsageError("theta grid must be strictly increasing (STOP > START)")
    return np.linspace(start, stop, points)


def _parse_bool(key, value):
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"{key}: expected a boolean, got {value!r}")


def read_config(path) -> dict:
    """Flat ``key=value`` file; ``#`` starts a comment. Unknown keys are rejected."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags, then validate every field."""
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(read_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            cfg[key] = value

    try:
        for key in ("g", "na", "nl", "eta"):
            cfg[key] = float(cfg[key])
        cfg["seed"] = int(cfg["seed"])
        cfg["samples"] = parse_count(cfg["samples"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for key in ("back-action", "scattering", "all-toggles", "polarization-decay"):
        cfg[key] = _parse_bool(key, cfg[key])
    try:
        cfg["n"] = [int(x) for x in str(cfg["n"]).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"n: expected integers, got {cfg['n']!r}") from None
    if not cfg["n"]:
        raise UsageError("n: no slot count given")
    cfg["theta"] = parse_angle(cfg["theta"])
    cfg["theta-grid"] = (default_theta_grid() if cfg["theta-grid"] is None
                         else parse_grid(cfg["theta-grid"]))
    if cfg["scheme"] not in SCHEMES:
        raise UsageError(f"scheme must be one of {SCHEMES}")
    if cfg["samples"] < 1000:
        raise UsageError("samples must be at least 1000")
    try:
        cfg["params"] = PhysicalParams(g=cfg["g"], n_atoms=cfg["na"], n_photons=cfg["nl"],
                                       eta=cfg["eta"],
                                       polarization_decay=cfg["polarization-decay"])
    except ParameterError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _toggles(cfg):
    if cfg["all-toggles"]:
        return [(True, True), (True, False), (False, True), (False, False)]
    return [(cfg["back-action"], cfg["scattering"])]


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _mask_str(mask) -> str:
    return "".join("1" if m else "0" for m in mask)


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(cfg, text: str) -> None:
    if cfg["out"]:
        write_atomic(cfg["out"], text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def cmd_sweep(cfg) -> int:
    rows = []
    for n in cfg["n"]:
        if n < 3:
            raise UsageError(f"sweep needs n >= 3, got {n}")
        if cfg["scheme"] == "optimized" and n > MAX_OPT_SLOTS:
            raise UsageError(f"n must be at most {MAX_OPT_SLOTS} for the optimized scheme")
        for ba, sc in _toggles(cfg):
            template = SequenceSpec(n, 0.0, None, ba, sc)
            res = sweep_theta(template, cfg["params"], cfg["theta-grid"], cfg["scheme"])
            rows.extend((r.theta, r.n, r.k_value, r.k_reduced, r.back_action, r.scattering)
                        for r in res.rows)
    _emit(cfg, _csv_text(SWEEP_HEADER, rows))
    return EXIT_OK


def cmd_triple(cfg) -> int:
    rows = []
    for n in cfg["n"]:
        if not 3 <= n <= MAX_OPT_SLOTS:
            raise UsageError(f"triple needs 3 <= n <= {MAX_OPT_SLOTS}, got {n}")
        for ba, sc in _toggles(cfg):
            for res in sweep_triple(n, cfg["params"], cfg["theta-grid"], ba, sc):
                a, b, c = res.triple
                rows.append((res.theta, n, res.k3, f"{a}-{b}-{c}",
                             _mask_str(res.masks[(a, b)]), _mask_str(res.masks[(b, c)]),
                             _mask_str(res.masks[(a, c)]), ba, sc))
    _emit(cfg, _csv_text(TRIPLE_HEADER, rows))
    return EXIT_OK


def cmd_audit(cfg) -> int:
    params = cfg["params"]
    lines = [
        "two-pulse disturbance audit (no precession between pulses)",
        f"g={params.g:.6g} N_A={params.n_atoms:.6g} N_L={params.n_photons:.6g} "
        f"eta={params.eta:.6g} chi={params.chi:.9g}",
    ]
    for sc in (False, True):
        res = disturbance_audit(params, cfg["back-action"], sc)
        lines.append(f"scattering={'on ' if sc else 'off'} mean_diff={res.mean_diff:.17g} "
                     f"var_diff={res.var_diff:.17g}")
    lines.append(f"closed form var_diff (scattering on) = {audit_var_diff_closed_form(params):.17g}")
    _emit(cfg, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_oracle_check(cfg) -> int:
    from . import oracle
    from .lgi_metrics import corr_sign, k_n, pairwise_correlators
    from .protocol import run_sequence

    params, samples, seed = cfg["params"], cfg["samples"], cfg["seed"]
    rng = np.random.default_rng(seed)
    lines, ok = [], True

    worst = 0.0
    for k in range(20):
        a, c = rng.uniform(0.2, 5.0, 2)
        b = rng.uniform(-1, 1) * math.sqrt(a * c)
        est = oracle.mc_sign_corr([[a, b], [b, c]], samples, seed + k)
        worst = max(worst, abs(est.value - corr_sign(a, b, c)) / max(est.std_error, 1e-300))
    passed = worst <= 4.0
    ok &= passed
    lines.append(f"{'PASS' if passed else 'FAIL'} corr_sign vs sampling: worst deviation {worst:.2f} sigma")

    n = cfg["n"][0]
    rec = run_sequence(SequenceSpec(n, cfg["theta"]), params)
    est = oracle.mc_gaussian_kn(rec, samples, seed)
    analytic = k_n(pairwise_correlators(rec)).k_value if n >= 3 else pairwise_correlators(rec)[0, 1]
    passed = est.within(analytic, 4.0)
    ok &= passed
    lines.append(f"{'PASS' if passed else 'FAIL'} joint-record K_{n}: analytic {analytic:.6f}, "
                 f"sampled {est.value:.6f} +- {est.std_error:.6f}")

    if n >= 3:
        mr = oracle.mc_macrorealist_kn(n, cfg["theta"], oracle.default_readout_noise(params),
                                       samples, seed)
        passed = mr.value >= -3 * mr.std_error
        ok &= passed
        lines.append(f"{'PASS' if passed else 'FAIL'} macrorealist model K_{n} = "
                     f"{mr.value:.6f} +- {mr.std_error:.6f} (classical null model, must be >= 0)")
    _emit(cfg, "\n".join(lines) + "\n")
    return EXIT_OK if ok else EXIT_RUNTIME


def read_series(path) -> tuple[str, dict]:
    """Read a sweep or triple CSV into ``{(n, back_action, scattering): [(theta, y), ...]}``."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise OSError(f"cannot open {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}:1: empty file") from None
        if header == SWEEP_HEADER:
            ycol = "k_reduced"
        elif header == TRIPLE_HEADER:
            ycol = "k3"
        else:
            raise CsvParseError(f"{path}:1: unrecognized header {','.join(header)!r}")
        col = {name: i for i, name in enumerate(header)}
        series = {}
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                key = (int(row[col["n"]]), row[col["back_action"]] == "1",
                       row[col["scattering"]] == "1")
                point = (float(row[col["theta"]]), float(row[col[ycol]]))
            except ValueError as exc:
                raise CsvParseError(f"{path}:{lineno}: {exc}") from None
            if row[col["back_action"]] not in ("0", "1") or row[col["scattering"]] not in ("0", "1"):
                raise CsvParseError(f"{path}:{lineno}: toggle columns must be 0 or 1")
            series.setdefault(key, []).append(point)
    if not series:
        raise CsvParseError(f"{path}:2: no data rows")
    return ycol, series


COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


def render_svg(ycol: str, series: dict, width: int = 720, height: int = 440) -> str:
    """Static line plot, one polyline per series."""
    left, right, top, bottom = 70, 170, 20, 50
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts] + [0.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = width - left - right, height - top - bottom

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (y1 - y) / (y1 - y0) * ph

    label_toggles = len({k[1:] for k in series}) > 1
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    if y0 < 0 < y1:
        out.append(f'<line x1="{left}" y1="{py(0):.2f}" x2="{left + pw}" y2="{py(0):.2f}" '
                   'stroke="gray" stroke-dasharray="4 3"/>')
    for k in range(5):
        xv = x0 + k * (x1 - x0) / 4
        yv = y0 + k * (y1 - y0) / 4
        out.append(f'<text x="{px(xv):.2f}" y="{top + ph + 18}" font-size="11" '
                   f'text-anchor="middle">{xv / math.pi:.3g}π</text>')
        out.append(f'<text x="{left - 6}" y="{py(yv) + 4:.2f}" font-size="11" '
                   f'text-anchor="end">{yv:.3g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 10}" font-size="13" '
               'text-anchor="middle">θ</text>')
    ylabel = "K'_n" if ycol == "k_reduced" else "K_3"
    out.append(f'<text x="16" y="{top + ph / 2}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2})">{ylabel}</text>')
    for idx, (key, pts) in enumerate(sorted(series.items())):
        color = COLORS[idx % len(COLORS)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        if len(pts) == 1:
            out.append(f'<circle cx="{px(pts[0][0]):.2f}" cy="{py(pts[0][1]):.2f}" r="3" '
                       f'fill="{color}"/>')
        n, ba, sc = key
        label = f"n={n}"
        if label_toggles:
            label += f" {'BA' if ba else 'no BA'}, {'scat' if sc else 'no scat'}"
        ly = top + 14 + 18 * idx
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 36}" y="{ly}" font-size="12">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_plot(cfg, csv_path) -> int:
    ycol, series = read_series(csv_path)
    svg = render_svg(ycol, series)
    out = cfg["out"] or str(Path(csv_path).with_suffix(".svg"))
    write_atomic(out, svg)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--g", type=float)
    common.add_argument("--na", type=float, help="number of atoms")
    common.add_argument("--nl", type=float, help="photons per pulse")
    common.add_argument("--eta", type=float)
    common.add_argument("--n", help="slot count, or comma-separated list for sweep")
    common.add_argument("--theta", help="angle, e.g. 0.5pi or 1.2")
    common.add_argument("--theta-grid", metavar="START:STOP:POINTS")
    common.add_argument("--no-back-action", dest="back_action", action="store_const", const=False)
    common.add_argument("--no-scattering", dest="scattering", action="store_const", const=False)
    common.add_argument("--all-toggles", dest="all_toggles", action="store_const", const=True,
                        help="run all four back-action/scattering combinations")
    common.add_argument("--polarization-decay", dest="polarization_decay",
                        action="store_const", const=True)
    common.add_argument("--scheme", choices=SCHEMES)
    common.add_argument("--seed", type=int)
    common.add_argument("--samples")
    common.add_argument("--out", metavar="PATH")

    parser = _Parser(prog="qnd-lg", description="Leggett-Garg tests with QND-probed spin ensembles")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("sweep", parents=[common], help="K'_n versus theta (CSV)")
    sub.add_parser("triple", parents=[common], help="optimized three-slot K_3 versus theta (CSV)")
    sub.add_parser("audit", parents=[common], help="two-pulse disturbance audit")
    sub.add_parser("oracle-check", parents=[common], help="Monte-Carlo cross-checks")
    p = sub.add_parser("plot", parents=[common], help="render a CSV to SVG")
    p.add_argument("csv")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    commands = {"sweep": cmd_sweep, "triple": cmd_triple, "audit": cmd_audit,
                "oracle-check": cmd_oracle_check}
    try:
        if args.command == "plot":
            return cmd_plot(cfg, args.csv)
        return commands[args.command](cfg)
    except (UsageError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QndLgError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
