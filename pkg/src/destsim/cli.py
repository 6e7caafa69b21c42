"""Command-line front end.

Subcommands: ``run`` (simulate inputs under the configured schemes),
``sweep`` (cartesian knob grid, long-form CSV), ``img2trace`` /
``reconstruct`` (trace conversion), ``selftest`` (quick built-in checks).

Configuration comes from an optional JSON file plus flag overrides; the
resolved configuration is echoed to ``config_echo.json`` in the output
directory.  ``DESTSIM_OUT_DIR`` overrides the output directory.  Exit
codes: 0 ok, 1 usage error, 2 input error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .codec import SCHEMES, CodecError
from .core import (
    ApproxConfig,
    ConfigError,
    SIMILARITY_PRESETS,
    similarity_limit_for_preset,
)
from .energy import EnergyParams
from .imageio import ImageFormatError, read_image, write_image
from .pipeline import simulate_stream
from .quality import FrameMix, psnr, ssim
from .reports import (
    ENERGY_COLUMNS,
    FRAMEMIX_COLUMNS,
    QUALITY_COLUMNS,
    reduction_pct,
    write_csv,
    write_json,
)
from .trace import (
    TraceFormatError,
    TraceStream,
    cache_lines_to_image,
    cache_lines_to_tensor,
    image_to_cache_lines,
    load_trace,
    raw_to_cache_lines,
    save_trace,
    tensor_f32_to_cache_lines,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3

TOL_TOTALS = {0: "none", 8: "eighth", 16: "quarter"}


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        raise UsageExit(message)


class UsageExit(SystemExit):
    def __init__(self, message):
        print(f"error: {message}", file=sys.stderr)
        super().__init__(EXIT_USAGE)


@dataclass
class RunConfig:
    """One resolved simulation configuration; round-trips through JSON."""

    schemes: list[str] = field(default_factory=lambda: ["org", "dbi", "bde_org", "mbdc", "zacdest"])
    baseline: str = "org"
    capacity: int = 64
    similarity_preset: int | None = 90
    similarity_bits: int | None = None
    value_width: int = 8
    trunc_bits_per_value: int = 0
    tol_mode: str = "none"
    approx_allowed: bool = True
    update_policy: str = "raw-only"
    i_term_a: float = 13.75e-3
    v_dd_v: float = 1.2
    t_bit_s: float = 1.0 / 2400e6
    c_line_f: float = 15e-12
    inputs: list[str] = field(default_factory=list)
    out_dir: str = "destsim-out"
    seed: int = 0
    engine: str = "fast"
    jobs: int = 1

    def validate(self) -> None:
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise UsageError(f"unknown scheme(s) {unknown}; valid: {list(SCHEMES)}")
        if self.baseline not in self.schemes:
            raise UsageError(f"baseline {self.baseline!r} must be one of the schemes {self.schemes}")
        if self.similarity_preset is not None and self.similarity_bits is not None:
            raise UsageError("give either a similarity preset or a raw bit limit, not both")
        self.limit_bits  # resolves and validates
        self.approx_config()  # validates mask geometry
        self.energy_params()

    @property
    def limit_bits(self) -> int:
        if self.similarity_bits is not None:
            if not 0 <= self.similarity_bits <= 64:
                raise UsageError("similarity_bits must be in [0, 64]")
            return self.similarity_bits
        if self.similarity_preset is not None:
            return similarity_limit_for_preset(self.similarity_preset)
        return 0

    def approx_config(self) -> ApproxConfig:
        return ApproxConfig(
            similarity_limit_bits=self.limit_bits,
            value_width=self.value_width,
            trunc_bits_per_value=self.trunc_bits_per_value,
            tol_mode=self.tol_mode,
            approx_allowed=self.approx_allowed,
        )

    def energy_params(self) -> EnergyParams:
        return EnergyParams(self.i_term_a, self.v_dd_v, self.t_bit_s, self.c_line_f)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise UsageError(f"unknown config key(s): {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except FileNotFoundError:
            raise
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: bad JSON config: {exc}") from exc

    def config_id(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


# --- input dispatch ----------------------------------------------------------


def expand_inputs(paths: list[str]) -> list[str]:
    """Directories expand to their (sorted) files; empty dirs are an error."""
    out: list[str] = []
    for item in paths:
        p = Path(item)
        if p.is_dir():
            found = sorted(str(f) for f in p.iterdir() if f.is_file())
            if not found:
                raise FileNotFoundError(f"input directory {p} is empty")
            out.extend(found)
        else:
            out.append(str(p))
    return out


def load_input(path: str | Path, approx_allowed: bool) -> TraceStream:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    ext = path.suffix.lower()
    if ext in (".pgm", ".ppm", ".png"):
        return image_to_cache_lines(read_image(path), approx_allowed=approx_allowed)
    if ext == ".npy":
        try:
            arr = np.load(path)
        except ValueError as exc:
            raise TraceFormatError(f"{path}: not a loadable array: {exc}") from exc
        return tensor_f32_to_cache_lines(np.asarray(arr, dtype=np.float32), approx_allowed)
    if ext in (".trace", ".hex"):
        return load_trace(path)
    return raw_to_cache_lines(path, approx_allowed=False)


def _write_reconstruction(out_dir: Path, tag: str, stream: TraceStream, decoded: bytes) -> str:
    recon = stream.with_data(decoded)
    dest = out_dir / "reconstructed"
    dest.mkdir(parents=True, exist_ok=True)
    if stream.meta.kind == "image":
        suffix = ".pgm" if len(stream.meta.shape) == 2 else ".ppm"
        out = dest / f"{tag}{suffix}"
        write_image(out, cache_lines_to_image(recon))
    elif stream.meta.kind == "tensor_f32":
        out = dest / f"{tag}.npy"
        np.save(out, cache_lines_to_tensor(recon))
    else:
        out = dest / f"{tag}.bin"
        out.write_bytes(recon.payload)
    return str(out)


# --- run / sweep core -----------------------------------------------------------


def _grid_tag(point: tuple[int, int, str]) -> str:
    limit, trunc, tol = point
    return f"l{limit}_t{trunc}_{tol}"


def _run_job(args: tuple) -> dict:
    """One (input, scheme, grid point) simulation; must stay picklable."""
    cfg_dict, input_path, scheme, point = args
    cfg = RunConfig.from_dict(cfg_dict)
    limit, trunc, tol = point
    stream = load_input(input_path, cfg.approx_allowed)
    if stream.n_lines == 0:
        raise TraceFormatError(f"{input_path}: empty input stream")
    approx = ApproxConfig(
        similarity_limit_bits=limit,
        value_width=cfg.value_width,
        trunc_bits_per_value=trunc,
        tol_mode=tol,
        approx_allowed=cfg.approx_allowed,
    )
    config = approx if scheme in ("mbdc", "zacdest") else None
    sim = simulate_stream(
        stream,
        scheme,
        capacity=cfg.capacity,
        config=config,
        params=cfg.energy_params(),
        update_policy=cfg.update_policy,
        engine=cfg.engine,
    )
    stem = Path(input_path).stem
    tag = f"{stem}.{scheme}.{_grid_tag(point)}"
    recon_path = _write_reconstruction(Path(cfg.out_dir), tag, stream, sim.decoded_bytes)

    report = sim.report().to_dict()
    mix = FrameMix.from_counts(sim.outcome.frame_counts)
    quality: dict = {"psnr_db": None, "ssim": None, "float32_protection": None}
    if stream.meta.kind == "image":
        original = cache_lines_to_image(stream)
        recon = cache_lines_to_image(stream.with_data(sim.decoded_bytes))
        quality["psnr_db"] = psnr(original, recon)
        quality["ssim"] = ssim(original, recon)
    elif stream.meta.kind == "tensor_f32":
        orig = cache_lines_to_tensor(stream).view(np.uint32)
        recon = cache_lines_to_tensor(stream.with_data(sim.decoded_bytes)).view(np.uint32)
        ok = bool(np.array_equal(orig >> np.uint32(23), recon >> np.uint32(23)))
        quality["float32_protection"] = "pass" if ok else "FAIL"
    return {
        "stream": stem,
        "scheme": scheme,
        "point": point,
        "report": report,
        "mix_counts": mix.per_chip_counts,
        "quality": quality,
        "recon_path": recon_path,
    }


def _execute(cfg: RunConfig, grid: list[tuple[int, int, str]]) -> tuple[list, list, list]:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [
        (cfg.to_dict(), str(inp), scheme, point)
        for inp in cfg.inputs
        for scheme in cfg.schemes
        for point in grid
    ]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    # deterministic order regardless of completion
    results.sort(key=lambda r: (r["stream"], r["scheme"], r["point"]))

    by_key: dict[tuple, dict] = {
        (r["stream"], r["point"], r["scheme"]): r for r in results
    }
    energy_rows, quality_rows, mix_rows = [], [], []
    for r in results:
        stream, scheme, (limit, trunc, tol) = r["stream"], r["scheme"], r["point"]
        base = by_key[(stream, r["point"], cfg.baseline)]
        rep, brep = r["report"], base["report"]
        row = {
            "stream": stream, "scheme": scheme, "limit_bits": limit,
            "trunc_bits_per_value": trunc, "tol_mode": tol,
            "capacity": cfg.capacity, "baseline": cfg.baseline,
            "term_delta_pct": reduction_pct(brep["term_total"], rep["term_total"]),
            "sw_delta_pct": reduction_pct(brep["sw_total"], rep["sw_total"]),
        }
        row.update({k: rep[k] for k in rep})
        energy_rows.append(row)

        mix = FrameMix.from_counts(r["mix_counts"])
        agg = mix.aggregate()
        q = r["quality"]
        psnr_ratio = ssim_ratio = None
        if q["psnr_db"] is not None:
            bq = base["quality"]
            if bq["psnr_db"] not in (None, 0) and math.isfinite(bq["psnr_db"]):
                psnr_ratio = q["psnr_db"] / bq["psnr_db"]
            elif bq["psnr_db"] is not None and math.isinf(bq["psnr_db"]):
                psnr_ratio = 1.0 if math.isinf(q["psnr_db"]) else None
            if bq["ssim"] not in (None, 0):
                ssim_ratio = q["ssim"] / bq["ssim"]
        quality_rows.append(
            {
                "stream": stream, "scheme": scheme, "limit_bits": limit,
                "trunc_bits_per_value": trunc, "tol_mode": tol,
                "psnr_db": q["psnr_db"], "ssim": q["ssim"],
                "psnr_ratio_vs_baseline": psnr_ratio,
                "ssim_ratio_vs_baseline": ssim_ratio,
                "float32_protection": q["float32_protection"],
                "raw_frac": agg["raw"], "zero_frac": agg["zero"],
                "ohe_skip_frac": agg["ohe_skip"], "xor_encoded_frac": agg["xor_encoded"],
            }
        )
        for chip in range(8):
            cagg = mix.chip(chip)
            mix_rows.append(
                {
                    "stream": stream, "scheme": scheme, "limit_bits": limit,
                    "trunc_bits_per_value": trunc, "tol_mode": tol, "chip": chip,
                    "raw_frac": cagg["raw"], "zero_frac": cagg["zero"],
                    "ohe_skip_frac": cagg["ohe_skip"], "xor_encoded_frac": cagg["xor_encoded"],
                }
            )
        mix_rows.append(
            {
                "stream": stream, "scheme": scheme, "limit_bits": limit,
                "trunc_bits_per_value": trunc, "tol_mode": tol, "chip": "all",
                "raw_frac": agg["raw"], "zero_frac": agg["zero"],
                "ohe_skip_frac": agg["ohe_skip"], "xor_encoded_frac": agg["xor_encoded"],
            }
        )
    return energy_rows, quality_rows, mix_rows


def _emit(cfg: RunConfig, grid, rows) -> None:
    energy_rows, quality_rows, mix_rows = rows
    out = Path(cfg.out_dir)
    write_csv(out / "energy.csv", ENERGY_COLUMNS, energy_rows)
    write_json(out / "energy.json", energy_rows)
    write_csv(out / "quality.csv", QUALITY_COLUMNS, quality_rows)
    write_csv(out / "framemix.csv", FRAMEMIX_COLUMNS, mix_rows)
    echo = cfg.to_dict()
    echo["limit_bits"] = cfg.limit_bits
    echo["grid"] = [list(p) for p in grid]
    echo["config_id"] = cfg.config_id()
    (out / "config_echo.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(energy_rows)} energy rows to {out / 'energy.csv'}")
    print(f"config: limit_bits={cfg.limit_bits} trunc={cfg.trunc_bits_per_value} "
          f"tol={cfg.tol_mode} capacity={cfg.capacity}")


# --- argument plumbing ------------------------------------------------------------


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    if args.scheme:
        cfg = replace(cfg, schemes=[s.strip() for s in args.scheme.split(",") if s.strip()])
    if args.baseline:
        cfg = replace(cfg, baseline=args.baseline)
    if args.capacity is not None:
        cfg = replace(cfg, capacity=args.capacity)
    if args.limit is not None:
        if args.limit > 64:
            cfg = replace(cfg, similarity_preset=args.limit, similarity_bits=None)
        else:
            cfg = replace(cfg, similarity_preset=None, similarity_bits=args.limit)
    if args.value_width is not None:
        cfg = replace(cfg, value_width=args.value_width)
    if args.trunc_per_value is not None:
        cfg = replace(cfg, trunc_bits_per_value=args.trunc_per_value)
    if args.tol is not None:
        cfg = replace(cfg, tol_mode=_parse_tol(args.tol))
    if args.update_policy:
        cfg = replace(cfg, update_policy=args.update_policy)
    if args.engine:
        cfg = replace(cfg, engine=args.engine)
    if args.jobs is not None:
        cfg = replace(cfg, jobs=args.jobs)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    if args.inputs:
        cfg = replace(cfg, inputs=[str(p) for p in args.inputs])
    env_out = os.environ.get("DESTSIM_OUT_DIR")
    if env_out:
        cfg = replace(cfg, out_dir=env_out)
    return cfg


def _parse_tol(text: str) -> str:
    if text in ("none", "quarter", "eighth", "float32"):
        return text
    try:
        total = int(text)
    except ValueError:
        raise UsageError(f"tolerance must be none/quarter/eighth/float32 or total bits, got {text!r}")
    if total not in TOL_TOTALS:
        raise UsageError(f"tolerance total bits must be one of {sorted(TOL_TOTALS)}, got {total}")
    return TOL_TOTALS[total]


def _parse_limit_grid(text: str) -> list[int]:
    limits = []
    for item in text.split(","):
        v = int(item)
        limits.append(similarity_limit_for_preset(v) if v > 64 else v)
    return limits


def _common_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("inputs", nargs="*", type=Path, help="input files (images, .npy tensors, traces, raw)")
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--scheme", help="comma-separated scheme list")
    p.add_argument("--baseline", help="baseline scheme for percentage deltas")
    p.add_argument("--capacity", type=int, help="data table capacity (default 64)")
    p.add_argument("--limit", type=int,
                   help="similarity limit: >64 is a percentage preset (90/80/75/70), <=64 raw bits")
    p.add_argument("--value-width", type=int, choices=(8, 16, 32, 64), help="chunk width in bits")
    p.add_argument("--trunc-per-value", type=int, help="truncated LSBs per chunk")
    p.add_argument("--tol", help="tolerance: none|quarter|eighth|float32 or total bits (0/8/16)")
    p.add_argument("--update-policy", choices=("raw-only", "every-access"),
                   help="bde_org table update policy")
    p.add_argument("--engine", choices=("fast", "scalar"))
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="destsim", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate inputs under the configured schemes")
    _common_run_flags(p_run)

    p_sweep = sub.add_parser("sweep", help="sweep a knob grid, one row per point")
    _common_run_flags(p_sweep)
    p_sweep.add_argument("--limits", default="90,80,75,70",
                         help="comma list; >64 = preset percent, <=64 = raw bits")
    p_sweep.add_argument("--truncs", default="0",
                         help="comma list of total truncated bits per 64 (e.g. 0,16)")
    p_sweep.add_argument("--tols", default="0",
                         help="comma list of tolerance settings (0/8/16/float32)")

    p_img = sub.add_parser("img2trace", help="convert an image to a trace file")
    p_img.add_argument("image", type=Path)
    p_img.add_argument("out", type=Path)
    p_img.add_argument("--format", choices=("binary", "hex"), default="binary")
    p_img.add_argument("--no-approx", action="store_true",
                       help="mark the stream as never-approximate")

    p_rec = sub.add_parser("reconstruct", help="rebuild the original payload from a trace file")
    p_rec.add_argument("trace", type=Path)
    p_rec.add_argument("out", type=Path)

    p_self = sub.add_parser("selftest", help="run quick built-in consistency checks")
    p_self.add_argument("--seed", type=int, default=0)

    return parser


def cmd_run(args) -> int:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    cfg = _apply_overrides(cfg, args)
    cfg.validate()
    cfg = replace(cfg, inputs=expand_inputs(cfg.inputs))
    if not cfg.inputs:
        raise FileNotFoundError("no inputs given (positional arguments or config 'inputs')")
    grid = [(cfg.limit_bits, cfg.trunc_bits_per_value, cfg.tol_mode)]
    rows = _execute(cfg, grid)
    _emit(cfg, grid, rows)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    cfg = _apply_overrides(cfg, args)
    cfg.validate()
    cfg = replace(cfg, inputs=expand_inputs(cfg.inputs))
    if not cfg.inputs:
        raise FileNotFoundError("no inputs given (positional arguments or config 'inputs')")
    limits = _parse_limit_grid(args.limits)
    truncs = []
    for item in args.truncs.split(","):
        total = int(item)
        per_value = total * cfg.value_width // 64
        if per_value * 64 != total * cfg.value_width:
            raise UsageError(f"total truncation {total} not expressible at width {cfg.value_width}")
        truncs.append(per_value)
    tols = [_parse_tol(t) for t in args.tols.split(",")]
    grid = [(l, t, m) for l in limits for t in truncs for m in tols]
    rows = _execute(cfg, grid)
    _emit(cfg, grid, rows)
    _emit_sweep_summary(cfg, rows[0])
    return EXIT_OK


def _emit_sweep_summary(cfg: RunConfig, energy_rows: list[dict]) -> None:
    """Post-hoc monotonicity audit: termination should not rise as the
    similarity limit loosens.  Reported, never asserted."""
    by: dict[tuple, list] = {}
    for row in energy_rows:
        if row["scheme"] != "zacdest":
            continue
        key = (row["stream"], row["trunc_bits_per_value"], row["tol_mode"])
        by.setdefault(key, []).append((row["limit_bits"], row["term_total"]))
    summary = []
    for (stream, trunc, tol), pts in sorted(by.items()):
        pts.sort()
        mono = all(b[1] <= a[1] for a, b in zip(pts, pts[1:]))
        summary.append(
            {
                "stream": stream,
                "trunc_bits_per_value": trunc,
                "tol_mode": tol,
                "term_nonincreasing_as_limit_drops": mono,
                "points": [{"limit_bits": l, "term_total": t} for l, t in pts],
            }
        )
    path = Path(cfg.out_dir) / "sweep_summary.json"
    path.write_text(json.dumps(summary, indent=2) + "\n")
    flags = [s["term_nonincreasing_as_limit_drops"] for s in summary]
    if flags:
        print(f"monotonicity: {sum(flags)}/{len(flags)} stream/knob groups non-increasing")


def cmd_img2trace(args) -> int:
    stream = image_to_cache_lines(read_image(args.image), approx_allowed=not args.no_approx)
    save_trace(stream, args.out, fmt=args.format)
    print(f"{args.image} -> {args.out} ({stream.n_lines} lines, pad {stream.meta.pad_len})")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    stream = load_trace(args.trace)
    if stream.meta.kind == "image":
        write_image(args.out, cache_lines_to_image(stream))
    elif stream.meta.kind == "tensor_f32":
        np.save(args.out, cache_lines_to_tensor(stream))
    else:
        Path(args.out).write_bytes(stream.payload)
    print(f"{args.trace} -> {args.out}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from . import selftest

    return selftest.run(seed=args.seed)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageExit as exc:
        return exc.code
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "img2trace":
            return cmd_img2trace(args)
        if args.command == "reconstruct":
            return cmd_reconstruct(args)
        if args.command == "selftest":
            return cmd_selftest(args)
        raise UsageError(f"unknown command {args.command!r}")
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, TraceFormatError, ImageFormatError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CodecError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
