"""Command-line client for the pipeline service.

The CLI holds no pipeline logic: it parses arguments, builds a request, and
POSTs it to the service.  By default the service runs in-process (same
filesystem, no network); ``--server URL`` targets a running instance instead.

Exit codes: 0 success, 1 usage error, 2 data/format error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

import httpx

from .config import load_config_values
from .errors import FormatError, InvalidParameterError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _UsageExit(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems on stderr with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageExit()


class ServiceClient:
    """Minimal JSON-over-HTTP client; in-process ASGI unless a server URL is given."""

    def __init__(self, server: str | None = None):
        self.server = server

    def post(self, path: str, payload: dict) -> tuple[int, dict]:
        if self.server is not None:
            with httpx.Client(base_url=self.server, timeout=600.0) as client:
                response = client.post(path, json=payload)
                return response.status_code, response.json()
        return asyncio.run(self._post_local(path, payload))

    @staticmethod
    async def _post_local(path: str, payload: dict) -> tuple[int, dict]:
        from .service.app import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport,
                                     base_url="http://pelletvision.local",
                                     timeout=600.0) as client:
            response = await client.post(path, json=payload)
            return response.status_code, response.json()


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE",
                        help="flat key=value config file")
    parser.add_argument("--server", metavar="URL",
                        help="URL of a running service (default: in-process)")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress the effective-config echo on stderr")


_CONFIG_FLAGS = [
    ("--n-rays", "n_rays", int),
    ("--prob-threshold", "prob_threshold", float),
    ("--nms-iou-threshold", "nms_iou_threshold", float),
    ("--tau", "match_tau", float),
    ("--mm-per-px", "mm_per_px", float),
    ("--expand-radius", "expansion_radius_px", float),
    ("--tile-h", "tile_h", int),
    ("--tile-w", "tile_w", int),
    ("--tile-stride", "tile_stride", int),
    ("--pyramid-floor", "pyramid_floor", float),
    ("--extraction-stride", "extraction_stride", int),
    ("--test-fraction", "split_test_fraction", float),
    ("--restarts", "split_restarts", int),
    ("--bins", "histogram_bins_mm", str),
    ("--measured-classes", "measured_classes", str),
]


def _add_config_flags(parser: argparse.ArgumentParser, names: list[str]) -> None:
    for flag, dest, kind in _CONFIG_FLAGS:
        if dest in names:
            parser.add_argument(flag, dest=f"cfg_{dest}", type=kind, default=None)


def _config_payload(args: argparse.Namespace) -> dict:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(load_config_values(args.config))
    for _, dest, _ in _CONFIG_FLAGS:
        flag_value = getattr(args, f"cfg_{dest}", None)
        if flag_value is None:
            continue
        if dest == "histogram_bins_mm":
            values[dest] = [float(v) for v in str(flag_value).split(",")]
        elif dest == "measured_classes":
            values[dest] = [v.strip() for v in str(flag_value).split(",") if v.strip()]
        else:
            values[dest] = flag_value
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    for key in ("histogram_bins_mm", "measured_classes"):
        if key in values and isinstance(values[key], tuple):
            values[key] = list(values[key])
    return values


def build_parser() -> _Parser:
    parser = _Parser(prog="pelletvision",
                     description="Star-polygon pellet segmentation pipeline")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("synth", parents=[], help="generate a synthetic scene")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--height", type=int, default=1000)
    p.add_argument("--width", type=int, default=1000)
    p.add_argument("--n-objects", type=int, default=50)
    p.add_argument("--class-mix", default=None,
                   help="comma list of nice,ugly,big,joint probabilities")
    p.add_argument("--radius-min", type=float, default=9.0)
    p.add_argument("--radius-max", type=float, default=16.0)
    p.add_argument("--min-gap", type=float, default=3.0)
    _add_common(p)

    p = sub.add_parser("gen-targets", help="targets from a ground-truth label map")
    p.add_argument("--labels", required=True, metavar="PNG")
    p.add_argument("--classes", default=None, metavar="PNG")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--expand", action="store_true",
                   help="apply non-merging label expansion before target generation")
    _add_config_flags(p, ["n_rays", "expansion_radius_px"])
    _add_common(p)

    p = sub.add_parser("postprocess", help="maps -> instances via NMS")
    p.add_argument("--maps", default=None, metavar="DIR")
    p.add_argument("--tiles", default=None, metavar="MANIFEST",
                   help="tile manifest: lines of '<row> <col> <maps-dir>'")
    p.add_argument("--image-height", type=int, default=None)
    p.add_argument("--image-width", type=int, default=None)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--no-reclassify", action="store_true",
                   help="keep candidate-pixel classes instead of the mask vote")
    _add_config_flags(p, ["n_rays", "prob_threshold", "nms_iou_threshold",
                          "extraction_stride", "tile_h", "tile_w",
                          "tile_stride", "pyramid_floor"])
    _add_common(p)

    p = sub.add_parser("measure", help="size instances with bounding circles")
    p.add_argument("--instances", required=True, metavar="PNG")
    p.add_argument("--records", required=True, metavar="CSV")
    p.add_argument("--out", required=True, metavar="DIR")
    _add_config_flags(p, ["mm_per_px", "histogram_bins_mm", "measured_classes"])
    _add_common(p)

    p = sub.add_parser("evaluate", help="match instances and score pixels")
    p.add_argument("--pred", required=True, metavar="PNG")
    p.add_argument("--gt", required=True, metavar="PNG")
    p.add_argument("--pred-classes", default=None, metavar="PNG")
    p.add_argument("--gt-classes", default=None, metavar="PNG")
    p.add_argument("--out", default=None, metavar="JSON")
    _add_config_flags(p, ["match_tau"])
    _add_common(p)

    p = sub.add_parser("split", help="Wasserstein-stratified train/test split")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stats", default=None, metavar="CSV")
    p.add_argument("--classes-dir", default=None, metavar="DIR")
    p.add_argument("--out", required=True, metavar="MANIFEST")
    p.add_argument("--out-stats", default=None, metavar="CSV")
    _add_config_flags(p, ["split_test_fraction", "split_restarts"])
    _add_common(p)

    p = sub.add_parser("normalize", help="match luminance to a reference")
    p.add_argument("--input", required=True, action="append", metavar="PNG|DIR",
                   help="image file or directory (repeatable)")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--ref-mean", type=float, default=None)
    p.add_argument("--ref-std", type=float, default=None)
    p.add_argument("--ref-image", default=None, metavar="PNG")
    p.add_argument("--jobs", type=int, default=1)
    _add_common(p)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _request_for(args: argparse.Namespace) -> tuple[str, dict]:
    config = _config_payload(args)
    if args.command == "synth":
        payload = {"out_dir": args.out, "seed": args.seed,
                   "height": args.height, "width": args.width,
                   "n_objects": args.n_objects,
                   "radius_min": args.radius_min, "radius_max": args.radius_max,
                   "min_gap": args.min_gap, "config": config}
        if args.class_mix:
            payload["class_mix"] = [float(v) for v in args.class_mix.split(",")]
        return "/v1/synth", payload
    if args.command == "gen-targets":
        return "/v1/gen-targets", {
            "labels_path": args.labels, "classes_path": args.classes,
            "out_dir": args.out, "expand": args.expand, "config": config}
    if args.command == "postprocess":
        return "/v1/postprocess", {
            "maps_dir": args.maps, "tiles_manifest": args.tiles,
            "image_height": args.image_height, "image_width": args.image_width,
            "out_dir": args.out, "reclassify": not args.no_reclassify,
            "config": config}
    if args.command == "measure":
        return "/v1/measure", {
            "labels_path": args.instances, "records_path": args.records,
            "out_dir": args.out, "config": config}
    if args.command == "evaluate":
        return "/v1/evaluate", {
            "pred_path": args.pred, "gt_path": args.gt,
            "pred_classes_path": args.pred_classes,
            "gt_classes_path": args.gt_classes,
            "out_path": args.out, "config": config}
    if args.command == "split":
        return "/v1/split", {
            "out_manifest": args.out, "seed": args.seed,
            "stats_csv": args.stats, "classes_dir": args.classes_dir,
            "out_stats": args.out_stats, "config": config}
    if args.command == "normalize":
        return "/v1/normalize", {
            "inputs": args.input, "out_dir": args.out,
            "ref_mean": args.ref_mean, "ref_std": args.ref_std,
            "ref_image": args.ref_image, "jobs": args.jobs, "config": config}
    raise InvalidParameterError(f"unknown command {args.command!r}")


def cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit:
        return EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    if args.command == "serve":
        import uvicorn

        from .service.app import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return EXIT_OK

    try:
        path, payload = _request_for(args)
    except (FormatError, InvalidParameterError) as exc:
        print(f"pelletvision: error: {exc}", file=sys.stderr)
        return EXIT_DATA if isinstance(exc, FormatError) else EXIT_USAGE
    except ValueError as exc:
        print(f"pelletvision: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    client = ServiceClient(server=getattr(args, "server", None))
    try:
        status, body = client.post(path, payload)
    except httpx.HTTPError as exc:
        print(f"pelletvision: error: service unreachable: {exc}", file=sys.stderr)
        return EXIT_DATA

    if status == 200:
        if not getattr(args, "quiet", False):
            for key, value in sorted(body.get("effective_config", {}).items()):
                print(f"# config {key}={value}", file=sys.stderr)
        print(json.dumps(body, indent=2, sort_keys=True))
        return EXIT_OK
    kind = body.get("kind", "internal")
    print(f"pelletvision: {kind} error: {body.get('message', body)}",
          file=sys.stderr)
    return EXIT_USAGE if kind == "usage" else EXIT_DATA


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
