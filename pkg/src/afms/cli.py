"""Command-line front end: ``afms synth | fit | spectrum``.

Exit codes: 0 success (per-block fit failures included), 1 usage error,
2 I/O error, 3 inadmissible parameters.  Every error path prints a single
``error: <kind>: <reason>`` line on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .estimator import EstimationError, FitConfig, FitResult, fit_block, tile_blocks
from .model import PARAM_NAMES, AFMSParams, InadmissibleParameters, SignalBlock, synthesize, synthesize_bessel
from .pf import product_function
from .spectral import dft_magnitude

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_INADMISSIBLE = 3

FREQUENCY_PARAMS = ("omega_c", "omega_f", "omega_a")


class CLIError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(EXIT_USAGE, "usage", message)


# ---------------------------------------------------------------------------
# I/O helpers


def fmt(value: float) -> str:
    """Shortest round-trip decimal representation."""
    return repr(float(value))


def read_signal(path) -> np.ndarray:
    """Read one sample per line, or ``time,value`` rows (time ignored).

    Blank lines and lines starting with ``#`` are skipped, as is a single
    non-numeric header row.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CLIError(EXIT_IO, "io", f"cannot read {path}: {exc.strerror or exc}") from exc
    values = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if len(cells) > 2:
            raise CLIError(EXIT_IO, "io", f"{path}:{lineno}: expected 1 or 2 columns, got {len(cells)}")
        try:
            v = float(cells[-1])
        except ValueError:
            if not values and not any(_is_number(c) for c in cells):
                continue  # column header
            raise CLIError(EXIT_IO, "io", f"{path}:{lineno}: not a number: {cells[-1]!r}") from None
        if not math.isfinite(v):
            raise CLIError(EXIT_IO, "io", f"{path}:{lineno}: non-finite sample")
        values.append(v)
    if not values:
        raise CLIError(EXIT_IO, "io", f"{path}: no samples found")
    return np.array(values)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CLIError(EXIT_IO, "io", f"cannot write {path}: {exc.strerror or exc}") from exc


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        _write_text(out, text)


def signal_csv(samples, sample_rate_hz: float) -> str:
    lines = ["time_s,value"]
    for j, v in enumerate(samples):
        lines.append(f"{fmt(j / sample_rate_hz)},{fmt(v)}")
    return "\n".join(lines) + "\n"


def _read_json(path, what: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CLIError(EXIT_IO, "io", f"cannot read {what} {path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CLIError(EXIT_USAGE, "usage", f"{what} {path} is not valid JSON: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise CLIError(EXIT_USAGE, "usage", f"{what} {path} must hold a JSON object")
    return data


def _jsonable(value):
    """Make diagnostics JSON-safe; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    if value is None or isinstance(value, str):
        return value
    return str(value)


def params_record(params: AFMSParams, sample_rate_hz: float) -> dict:
    rec = {name: getattr(params, name) for name in PARAM_NAMES}
    for name in FREQUENCY_PARAMS:
        rec[name.replace("omega", "f") + "_hz"] = getattr(params, name) * sample_rate_hz / (2 * math.pi)
    return rec


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    data = _read_json(args.params, "params file")
    try:
        params = AFMSParams.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise CLIError(EXIT_USAGE, "usage", f"bad params file: {exc}") from exc
    if args.length < 1 or args.length % 2 == 0:
        raise CLIError(EXIT_USAGE, "usage", f"--length must be odd and positive, got {args.length}")
    if not args.rate > 0:
        raise CLIError(EXIT_USAGE, "usage", "--rate must be positive")
    if args.noise < 0:
        raise CLIError(EXIT_USAGE, "usage", "--noise must be >= 0")
    try:
        params.validate()
    except InadmissibleParameters as exc:
        raise CLIError(EXIT_INADMISSIBLE, "inadmissible", str(exc)) from exc
    block = synthesize(params, args.length, args.rate, noise_var=args.noise, seed=args.seed)
    _emit(signal_csv(block.samples, args.rate), args.out)
    if args.bessel is not None:
        if args.bessel < 1:
            raise CLIError(EXIT_USAGE, "usage", "--bessel truncation must be >= 1")
        clean = synthesize(params, args.length, args.rate)
        series = synthesize_bessel(params, args.length, truncation=args.bessel, sample_rate_hz=args.rate)
        deviation = float(np.max(np.abs(clean.samples - series.samples)))
        if args.out is not None:
            out = Path(args.out)
            _write_text(out.with_name(out.stem + ".bessel" + out.suffix), signal_csv(series.samples, args.rate))
        summary = {"bessel_truncation": args.bessel, "max_deviation": deviation}
        stream = sys.stderr if args.out is None else sys.stdout
        stream.write(json.dumps(summary, sort_keys=True) + "\n")
    return EXIT_OK


def fit_record(x: np.ndarray, block_len: int, stride: int | None, rate: float, config: FitConfig):
    """Fit every block of a record; returns ``[(start, FitResult | EstimationError)]``."""
    out = []
    for start in tile_blocks(x.size, block_len, stride):
        block = SignalBlock.centered(x[start:start + block_len], rate, start)
        try:
            out.append((start, fit_block(block, config)))
        except EstimationError as exc:
            out.append((start, exc))
    return out


def build_report(x, raw: bytes, args, config: FitConfig, fits) -> dict:
    blocks = []
    for index, (start, result) in enumerate(fits):
        rec = {"index": index, "start": start, "start_time_s": start / args.rate, "length": args.block_len}
        if isinstance(result, FitResult):
            rec["status"] = "ok"
            rec["params"] = params_record(result.params, args.rate)
            rec["nrmse"] = result.nrmse
            rec["diagnostics"] = result.diagnostics
        else:
            rec["status"] = "error"
            rec["error"] = {"stage": result.stage, "reason": result.reason}
            rec["diagnostics"] = result.diagnostics
        blocks.append(rec)
    report = {
        "tool": "afms",
        "version": __version__,
        "input": {
            "path": str(args.input),
            "sha256": hashlib.sha256(raw).hexdigest(),
            "n_samples": int(x.size),
            "sample_rate_hz": args.rate,
        },
        "block_len": args.block_len,
        "stride": args.stride if args.stride is not None else args.block_len,
        "config": config.to_dict(),
        "n_blocks": len(blocks),
        "n_ok": sum(b["status"] == "ok" for b in blocks),
        "blocks": blocks,
    }
    return _jsonable(report)


def cmd_fit(args) -> int:
    if args.block_len < 3 or args.block_len % 2 == 0:
        raise CLIError(EXIT_USAGE, "usage", f"--block-len must be odd and >= 3, got {args.block_len}")
    if args.stride is not None and args.stride < 1:
        raise CLIError(EXIT_USAGE, "usage", "--stride must be positive")
    if not args.rate > 0:
        raise CLIError(EXIT_USAGE, "usage", "--rate must be positive")
    config = FitConfig()
    if args.config is not None:
        try:
            config = FitConfig.from_dict(_read_json(args.config, "config file"))
        except (TypeError, ValueError) as exc:
            raise CLIError(EXIT_USAGE, "usage", f"bad config file: {exc}") from exc
    x = read_signal(args.input)
    raw = Path(args.input).read_bytes()
    if x.size < args.block_len:
        raise CLIError(EXIT_IO, "io", f"input has {x.size} samples, fewer than one block of {args.block_len}")
    fits = fit_record(x, args.block_len, args.stride, args.rate, config)
    report = build_report(x, raw, args, config, fits)
    _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", args.report)
    if args.plots is not None:
        plots = Path(args.plots)
        try:
            plots.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise CLIError(EXIT_IO, "io", f"cannot create {plots}: {exc.strerror or exc}") from exc
        for index, (start, result) in enumerate(fits):
            original = x[start:start + args.block_len]
            regen = result.regenerated.samples if isinstance(result, FitResult) else None
            rows = ["time_s,original,regenerated"]
            for j, v in enumerate(original):
                r = fmt(regen[j]) if regen is not None else ""
                rows.append(f"{fmt((start + j) / args.rate)},{fmt(v)},{r}")
            _write_text(plots / f"block_{index:04d}.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    if not args.rate > 0:
        raise CLIError(EXIT_USAGE, "usage", "--rate must be positive")
    x = read_signal(args.input)
    if args.pf:
        if x.size % 2 == 0:
            sys.stderr.write(f"warning: even record length {x.size}; dropping the last sample\n")
            x = x[:-1]
        seq = product_function(SignalBlock.centered(x)).values
    else:
        seq = x
    pad = args.pad if args.pad is not None else max(4096, seq.size)
    if pad < seq.size:
        raise CLIError(EXIT_USAGE, "usage", f"--pad {pad} is shorter than the sequence ({seq.size})")
    spec = dft_magnitude(seq, pad)
    rows = ["frequency_hz,frequency_rad_per_sample,magnitude"]
    for w, m in zip(spec.grid, spec.magnitude):
        rows.append(f"{fmt(w * args.rate / (2 * math.pi))},{fmt(w)},{fmt(m)}")
    _emit("\n".join(rows) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="afms", description="AFMS modelling of EEG-like signals")
    parser.add_argument("--version", action="version", version=f"afms {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth", help="synthesize an AFMS record from a JSON params file")
    p.add_argument("params", help="JSON object of AFMS parameters")
    p.add_argument("--length", type=int, default=201, help="odd number of samples")
    p.add_argument("--rate", type=float, default=500.0, help="sample rate in Hz (metadata)")
    p.add_argument("--noise", type=float, default=0.0, help="white Gaussian noise variance")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.add_argument("--bessel", type=int, default=None, metavar="M",
                   help="also write the truncated Bessel-series variant")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit AFMS parameters block by block")
    p.add_argument("input")
    p.add_argument("--block-len", type=int, default=41)
    p.add_argument("--stride", type=int, default=None, help="default: block length")
    p.add_argument("--rate", type=float, default=500.0, help="sample rate in Hz")
    p.add_argument("--config", default=None, help="JSON object of fit settings")
    p.add_argument("--report", default=None, help="output JSON report (default: stdout)")
    p.add_argument("--plots", default=None, help="directory for per-block CSVs")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("spectrum", help="DFT magnitude of a record or of its product function")
    p.add_argument("input")
    p.add_argument("--pf", action="store_true", help="transform the product function instead")
    p.add_argument("--pad", type=int, default=None, help="DFT length (default: max(4096, N))")
    p.add_argument("--rate", type=float, default=500.0, help="sample rate in Hz")
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CLIError as exc:
        sys.stderr.write(f"error: {exc.kind}: {str(exc).splitlines()[0]}\n")
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
