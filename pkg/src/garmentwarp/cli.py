"""Command-line interface.

Subcommands: register, warp, tryon, eval, fixtures. Exit codes are 0 on
success, 1 on bad input or configuration, 2 when registration ran but did not
converge (outputs are still written). Errors go to stderr as a single line
``error: <Kind>: <message>``; pipeline errors carry a ``[stage]`` prefix.

Parameters come from, in increasing precedence: built-in defaults, the
manifest's ``config`` entry (tryon only), the ``--config`` JSON file, and
command-line flags. The config file has the sections ``sampling``,
``registration``, ``warp`` and ``pipeline`` whose keys are the field names of
:class:`SamplingParams`, :class:`RegistrationConfig`, :class:`WarpParams` and
:class:`PipelineOptions`.
"""

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import fixtures, io
from .contours import SamplingParams
from .errors import ConfigError, GarmentWarpError
from .metrics import mask_iou, landmark_rmse, ssim, ssim_region
from .mls import WarpParams
from .pipeline import PipelineOptions, TryOnInputs, run_tryon, warp_garment
from .registration import RegistrationConfig, register

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2

SECTIONS = {
    "sampling": SamplingParams,
    "registration": RegistrationConfig,
    "warp": WarpParams,
    "pipeline": PipelineOptions,
}

# flag dest -> (section, field)
FLAG_FIELDS = {
    "angle_threshold": ("sampling", "angle_threshold"),
    "max_gap": ("sampling", "max_gap"),
    "min_points": ("sampling", "min_points"),
    "window": ("sampling", "window"),
    "lambda2": ("registration", "lambda2"),
    "gamma": ("registration", "gamma"),
    "kernel_beta": ("registration", "kernel_beta"),
    "max_iters": ("registration", "max_iters"),
    "tol": ("registration", "tol"),
    "sigma_floor": ("registration", "sigma_floor"),
    "alpha": ("warp", "alpha"),
    "grid_spacing": ("warp", "grid_spacing"),
    "all_components": ("pipeline", "all_components"),
    "feather": ("pipeline", "feather"),
    "skip_registration": ("pipeline", "skip_registration"),
}

MANIFEST_KEYS = ("garment", "garment_mask", "target_region", "person_agnostic")
OUTPUT_NAMES = ("warped.png", "warped_mask.png", "composite.png", "diagnostics.json")


@dataclasses.dataclass(frozen=True)
class Settings:
    sampling: SamplingParams
    registration: RegistrationConfig
    warp: WarpParams
    pipeline: PipelineOptions


def _check_section(name, values, source):
    if name not in SECTIONS:
        raise ConfigError(f"{source}: unknown section {name!r}")
    if not isinstance(values, dict):
        raise ConfigError(f"{source}: section {name!r} must be an object")
    known = {f.name for f in dataclasses.fields(SECTIONS[name])}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"{source}: unknown key(s) in {name!r}: {', '.join(unknown)}")


def merge_config(*layers):
    """Merge config dicts left to right (later wins) into a :class:`Settings`."""
    merged = {name: {} for name in SECTIONS}
    for source, layer in layers:
        if not isinstance(layer, dict):
            raise ConfigError(f"{source}: config must be a JSON object")
        for name, values in layer.items():
            _check_section(name, values, source)
            merged[name].update(values)
    try:
        return Settings(**{name: SECTIONS[name](**merged[name]) for name in SECTIONS})
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config_file(path):
    if path is None:
        return {}
    _require_file(path)
    try:
        return io.read_json(path)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc


def flag_layer(args):
    layer = {}
    for dest, (section, key) in FLAG_FIELDS.items():
        value = getattr(args, dest, None)
        if value is not None:
            layer.setdefault(section, {})[key] = value
    return layer


def settings_from_args(args, manifest_config=None):
    layers = []
    if manifest_config is not None:
        layers.append(("manifest config", manifest_config))
    layers.append((args.config or "--config", load_config_file(args.config)))
    layers.append(("flags", flag_layer(args)))
    return merge_config(*layers)


def _require_file(path):
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")


def _prepare_out(path):
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"output directory is not writable: {path}")


# --- subcommands -----------------------------------------------------------


def cmd_register(args):
    for p in (args.x, args.y):
        _require_file(p)
    settings = settings_from_args(args)
    X = io.read_points_csv(args.x)
    Y = io.read_points_csv(args.y)
    _prepare_out(args.out)
    transform, diag = register(X, Y, settings.registration)
    io.write_json(os.path.join(args.out, "transform.json"), transform.to_dict())
    io.write_json(os.path.join(args.out, "diagnostics.json"), diag.to_dict())
    return EXIT_OK if diag.converged else EXIT_NOT_CONVERGED


def _inputs(settings, garment, garment_mask, target, person=None):
    return TryOnInputs(
        garment=garment,
        garment_mask=garment_mask,
        target_region=target,
        person_agnostic=person,
        sampling=settings.sampling,
        reg=settings.registration,
        warp=settings.warp,
        options=settings.pipeline,
    )


def _exit_for(diag):
    reg = diag.get("registration")
    return EXIT_NOT_CONVERGED if reg is not None and not reg["converged"] else EXIT_OK


def cmd_warp(args):
    for p in (args.garment, args.garment_mask, args.target):
        _require_file(p)
    settings = settings_from_args(args)
    inputs = _inputs(
        settings, io.read_rgba_png(args.garment), io.read_mask_png(args.garment_mask), io.read_mask_png(args.target)
    )
    _prepare_out(args.out)
    warped, wmask, diag = warp_garment(inputs)
    diag.pop("timings")
    io.write_rgba_png(os.path.join(args.out, "warped.png"), warped)
    io.write_mask_png(os.path.join(args.out, "warped_mask.png"), wmask)
    io.write_json(os.path.join(args.out, "diagnostics.json"), diag)
    return _exit_for(diag)


def read_manifest(path):
    """Resolve a tryon manifest: the four image paths (relative to the
    manifest's directory) plus an optional ``config`` object or file path."""
    _require_file(path)
    try:
        m = io.read_json(path)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(m, dict):
        raise ConfigError(f"{path}: manifest must be a JSON object")
    unknown = sorted(set(m) - set(MANIFEST_KEYS) - {"config"})
    if unknown:
        raise ConfigError(f"{path}: unknown manifest key(s): {', '.join(unknown)}")
    base = os.path.dirname(os.path.abspath(path))
    files = {}
    for key in MANIFEST_KEYS:
        if key not in m:
            raise ConfigError(f"{path}: manifest is missing {key!r}")
        files[key] = os.path.join(base, m[key])
        _require_file(files[key])
    config = m.get("config")
    if isinstance(config, str):
        config = load_config_file(os.path.join(base, config))
    return files, config


def _tryon_one(manifest, out_dir, args):
    """Run one manifest; returns ``(exit_code, error_line or None)``. Runs in
    worker processes, so it reports instead of raising."""
    try:
        files, config = read_manifest(manifest)
        settings = settings_from_args(args, config)
        inputs = _inputs(
            settings,
            io.read_rgba_png(files["garment"]),
            io.read_mask_png(files["garment_mask"]),
            io.read_mask_png(files["target_region"]),
            io.read_rgba_png(files["person_agnostic"]),
        )
        _prepare_out(out_dir)
        result = run_tryon(inputs)
        io.write_rgba_png(os.path.join(out_dir, "warped.png"), result.warped_garment)
        io.write_mask_png(os.path.join(out_dir, "warped_mask.png"), result.warped_mask)
        io.write_rgba_png(os.path.join(out_dir, "composite.png"), result.composite)
        # timings vary run to run; keep them out of the file so it is reproducible
        io.write_json(os.path.join(out_dir, "diagnostics.json"), result.diagnostics)
        return _exit_for(result.diagnostics), None
    except (GarmentWarpError, OSError) as exc:
        return EXIT_INPUT, error_line(exc)


def cmd_tryon(args):
    manifests = args.manifest
    if len(manifests) == 1:
        outs = [args.out]
    else:
        stems = [os.path.splitext(os.path.basename(m))[0] for m in manifests]
        if len(set(stems)) != len(stems):
            raise ConfigError("manifest file names must be unique when several are given")
        outs = [os.path.join(args.out, s) for s in stems]
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    if args.jobs == 1 or len(manifests) == 1:
        results = [_tryon_one(m, o, args) for m, o in zip(manifests, outs)]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_tryon_one, manifests, outs, [args] * len(manifests)))
    for _, err in results:
        if err:
            print(err, file=sys.stderr)
    statuses = {status for status, _ in results}
    # bad input outranks non-convergence
    for code in (EXIT_INPUT, EXIT_NOT_CONVERGED):
        if code in statuses:
            return code
    return EXIT_OK


def cmd_eval(args):
    paths = [args.a, args.b] + [p for p in (args.mask, args.mask_a, args.mask_b, args.points_a, args.points_b) if p]
    for p in paths:
        _require_file(p)
    if (args.mask_a is None) != (args.mask_b is None):
        raise ConfigError("--mask-a and --mask-b go together")
    if (args.points_a is None) != (args.points_b is None):
        raise ConfigError("--points-a and --points-b go together")
    a = io.read_rgba_png(args.a)
    b = io.read_rgba_png(args.b)
    report = {"ssim": ssim(a, b)}
    if args.mask:
        report["ssim_region"] = ssim_region(a, b, io.read_mask_png(args.mask))
    if args.mask_a:
        report["iou"] = mask_iou(io.read_mask_png(args.mask_a), io.read_mask_png(args.mask_b))
    else:
        report["iou"] = mask_iou(a[..., 3] > 0, b[..., 3] > 0)
    if args.points_a:
        report["rmse"] = landmark_rmse(io.read_points_csv(args.points_a), io.read_points_csv(args.points_b))
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def cmd_fixtures(args):
    if args.seed < 0:
        raise ConfigError("--seed must be a non-negative integer")
    _prepare_out(args.out)
    fixtures.write_fixtures(args.out, args.seed)
    return EXIT_OK


# --- argument parsing ------------------------------------------------------


def _add_registration_flags(p):
    g = p.add_argument_group("registration")
    g.add_argument("--lambda2", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--kernel-beta", type=float)
    g.add_argument("--max-iters", type=int)
    g.add_argument("--tol", type=float)
    g.add_argument("--sigma-floor", type=float)


def _add_pipeline_flags(p):
    g = p.add_argument_group("sampling")
    g.add_argument("--angle-threshold", type=float)
    g.add_argument("--max-gap", type=float)
    g.add_argument("--min-points", type=int)
    g.add_argument("--window", type=int)
    g = p.add_argument_group("warp")
    g.add_argument("--alpha", type=float)
    g.add_argument("--grid-spacing", type=float)
    g = p.add_argument_group("pipeline")
    g.add_argument("--all-components", action="store_true", default=None)
    g.add_argument("--feather", action="store_true", default=None)
    g.add_argument("--skip-registration", action="store_true", default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="garmentwarp", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", help="register two CSV point sets")
    p.add_argument("x", help="source points CSV (header x,y)")
    p.add_argument("y", help="target points CSV (header x,y)")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    _add_registration_flags(p)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("warp", help="warp a garment onto a target region")
    p.add_argument("--garment", required=True)
    p.add_argument("--garment-mask", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    _add_registration_flags(p)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("tryon", help="warp and composite from manifest files")
    p.add_argument("--manifest", required=True, action="append", help="repeatable")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--config")
    _add_registration_flags(p)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_tryon)

    p = sub.add_parser("eval", help="compare two images (and optionally masks/points)")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--mask", help="region for the region-restricted SSIM")
    p.add_argument("--mask-a")
    p.add_argument("--mask-b")
    p.add_argument("--points-a")
    p.add_argument("--points-b")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fixtures", help="write the synthetic fixture set")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=fixtures.DEFAULT_SEED)
    p.set_defaults(func=cmd_fixtures)
    return parser


def error_line(exc):
    kind = exc.kind if isinstance(exc, GarmentWarpError) else type(exc).__name__
    msg = str(exc).replace("\n", " ")
    return f"error: {kind}: {msg}"


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GarmentWarpError, OSError) as exc:
        print(error_line(exc), file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
