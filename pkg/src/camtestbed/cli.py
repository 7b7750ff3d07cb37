"""Command line entry point.

    camtestbed list
    camtestbed show <name>
    camtestbed run <scenario|file.json> [--seed N] [--out DIR]
    camtestbed analyze extract <capture.jsonl> [--between A B]
    camtestbed analyze histogram <capture.jsonl> [--size 523] [--bin 600] [--out FILE]
    camtestbed cvss score <vector>

Exit codes: 0 success, 1 a scenario check failed, 2 configuration or input error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import cvss, scenarios
from .attacker import extract_media, motion_histogram
from .capture import CaptureFile
from .errors import ConfigError, MalformedVector

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def _load_scenario(ref: str, seed):
    if ref in scenarios.BUILTINS:
        return scenarios.load_config(scenarios.builtin_config(ref), seed=seed)
    path = Path(ref)
    if not path.exists():
        raise ConfigError("scenario", f"{ref!r} is neither a built-in scenario nor a file")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}") from None
    return scenarios.load_config(obj, seed=seed)


def cmd_list(args) -> int:
    for name in scenarios.list_scenarios():
        print(name)
    return EXIT_OK


def cmd_show(args) -> int:
    try:
        cfg = scenarios.builtin_config(args.name)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(cfg, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = _load_scenario(args.scenario, args.seed)
    except ConfigError as exc:
        print(f"config error at {exc.path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = scenarios.run_scenario(cfg)
    out = Path(args.out) if args.out else Path("runs") / f"{cfg.name}-{cfg.seed}"
    report.write(out)
    print(f"scenario {cfg.name} seed={cfg.seed} -> {out}")
    for name, ok in report.checks.items():
        print(f"  [{'PASS' if ok else 'FAIL'}] {name}")
    return EXIT_OK if report.passed else EXIT_FAILED


def _read_capture(path: str):
    try:
        return CaptureFile.read(path)
    except (OSError, ValueError) as exc:
        print(f"error: cannot read capture {path}: {exc}", file=sys.stderr)
        return None


def cmd_extract(args) -> int:
    cap = _read_capture(args.capture)
    if cap is None:
        return EXIT_CONFIG
    frames = extract_media(cap, tuple(args.between) if args.between else None)
    if not frames:
        print(frames.diagnostic)
        return EXIT_OK
    print(f"{len(frames)} frames ({sum(1 for f in frames if f.kind.name == 'I')} I-frames)")
    if args.out:
        Path(args.out).write_bytes(b"".join(f.serialize() for f in frames))
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_histogram(args) -> int:
    cap = _read_capture(args.capture)
    if cap is None:
        return EXIT_CONFIG
    if args.bin <= 0:
        print("error: --bin must be positive", file=sys.stderr)
        return EXIT_CONFIG
    hist = motion_histogram(cap, size=args.size, bin=args.bin, camera=args.camera, cloud=args.cloud)
    text = hist.to_csv()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_cvss(args) -> int:
    try:
        score = cvss.base_score(cvss.parse_vector(args.vector))
    except MalformedVector as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{score.value:.1f} {score.severity}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="camtestbed", description="IP camera security testbed")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list built-in scenarios").set_defaults(func=cmd_list)

    show = sub.add_parser("show", help="print a built-in scenario as JSON")
    show.add_argument("name")
    show.set_defaults(func=cmd_show)

    run = sub.add_parser("run", help="run a scenario and write its artifacts")
    run.add_argument("scenario", help="built-in name or path to a JSON scenario")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory (default runs/<name>-<seed>)")
    run.set_defaults(func=cmd_run)

    analyze = sub.add_parser("analyze", help="offline analysis of capture files")
    asub = analyze.add_subparsers(dest="analysis", required=True)
    ex = asub.add_parser("extract", help="reassemble plaintext media frames")
    ex.add_argument("capture")
    ex.add_argument("--between", nargs=2, metavar=("NODE", "NODE"))
    ex.add_argument("--out", help="write the recovered elementary stream here")
    ex.set_defaults(func=cmd_extract)
    hist = asub.add_parser("histogram", help="bin fixed-size motion notifications")
    hist.add_argument("capture")
    hist.add_argument("--size", type=int, default=523)
    hist.add_argument("--bin", type=int, default=600, help="bin width in seconds")
    hist.add_argument("--camera", default=scenarios.CAMERA)
    hist.add_argument("--cloud", default=scenarios.CLOUD)
    hist.add_argument("--out")
    hist.set_defaults(func=cmd_histogram)

    cv = sub.add_parser("cvss", help="CVSS v3.1 base scores")
    csub = cv.add_subparsers(dest="cvss_command", required=True)
    score = csub.add_parser("score", help="score a CVSS:3.1 vector")
    score.add_argument("vector")
    score.set_defaults(func=cmd_cvss)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
