"""Command-line entry point: ``genusforge <subcommand>``.

Exit status is 0 on success, 2 for usage or configuration errors and 1 for
pipeline errors (the error class name is printed on stderr).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import RunConfig, load_config
from .curvature import curvature_field
from .errors import ConfigError, GenusForgeError, TargetMismatch
from .halfedge import load_obj, save_obj, topology_summary
from .metrics import evaluate
from .optimize import OptimizeParams, default_budget, reconstruct
from .primitives import PrimitiveSpec, make_primitive
from .remesh import RemeshParams, remesh_event
from .render import backend, make_camera_rig, render
from .render.io import read_view_set, write_view_set

log = logging.getLogger("genusforge")


# ---------------------------------------------------------------------------
# config -> parameter objects
# ---------------------------------------------------------------------------


def rig_from_config(cfg: RunConfig):
    r = cfg["render"]
    fov = r["fov"] if r["fov"] > 0 else None
    return make_camera_rig(r["views"], r["radius"], r["resolution"], fov)


def remesh_params_from(cfg: RunConfig) -> RemeshParams:
    r = cfg["remesh"]
    return RemeshParams(
        epsilon=r["epsilon"],
        l_min=r["l_min"],
        l_max=r["l_max"],
        target_valence=r["target_valence"],
        mu=r["mu"],
        passes=r["passes"],
        period=(r["period_min"], r["period_max"]),
    )


def optimize_params_from(cfg: RunConfig) -> OptimizeParams:
    o = cfg["optimizer"]
    return OptimizeParams(
        lam=o["lam"],
        alpha=o["alpha"],
        beta1=o["beta1"],
        beta2=o["beta2"],
        eps=o["eps"],
        w1=o["w1"],
        w2=o["w2"],
        sigma=cfg["render"]["sigma"],
        plateau_window=o["plateau_window"],
        plateau_tol=o["plateau_tol"],
    )


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------


def make_targets(mesh_path, cfg: RunConfig, out_dir) -> dict:
    """Render a ground-truth mesh from the configured rig into a view set."""
    mesh = load_obj(mesh_path)
    cams = rig_from_config(cfg)
    sigma = cfg["render"]["sigma"]
    views = [render(mesh, c, sigma, i) for i, c in enumerate(cams)]
    meta = {"seed": cfg["budget"]["seed"], "sigma": sigma, "source_mesh": os.path.abspath(mesh_path)}
    return write_view_set(views, cams, out_dir, meta)


def _load_targets(cfg: RunConfig, out_dir):
    t = cfg["target"]
    if t["views"]:
        path = t["views"]
    elif t["mesh"]:
        path = os.path.join(out_dir, "targets")
        make_targets(t["mesh"], cfg, path)
    else:
        raise ConfigError("reconstruct needs [target] views or [target] mesh")
    views, cams, manifest = read_view_set(path)
    r = cfg["render"]
    if len(views) != r["views"]:
        raise TargetMismatch("view set has %d views, config expects %d" % (len(views), r["views"]))
    for c in cams:
        if (c.width, c.height) != (r["resolution"], r["resolution"]):
            raise TargetMismatch("view set resolution %dx%d, config expects %d" % (c.width, c.height, r["resolution"]))
    return views, cams


def _initial_mesh(cfg: RunConfig):
    i = cfg["init"]
    if i["mesh"]:
        return load_obj(i["mesh"])
    return make_primitive(PrimitiveSpec(i["genus"], i["resolution"], i["scale"]))


def _absolutise(cfg: RunConfig) -> None:
    for section, key in (("target", "mesh"), ("target", "views"), ("init", "mesh")):
        if cfg[section][key]:
            cfg[section][key] = os.path.abspath(cfg[section][key])


def run_reconstruct(cfg: RunConfig, out_dir) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    _absolutise(cfg)
    with open(os.path.join(out_dir, "config.ini"), "w") as fh:
        fh.write(cfg.dumps())
    views, cams = _load_targets(cfg, out_dir)
    init = _initial_mesh(cfg)
    genus = topology_summary(init).genus
    iters = cfg["budget"]["iterations"] or default_budget(genus if genus is not None else 0)
    log.info("reconstruct: %d views, init %r (genus %s), %d iterations", len(views), init, genus, iters)
    mesh, report = reconstruct(
        init,
        views,
        cams,
        optimize_params_from(cfg),
        remesh_params_from(cfg),
        iterations=iters,
        seed=cfg["budget"]["seed"],
        remesh=cfg["remesh"]["enabled"],
        snapshot_every=cfg["budget"]["snapshot_every"],
        out_dir=out_dir,
    )
    save_obj(mesh, os.path.join(out_dir, "final.obj"))
    summary = {
        "iterations": report.iterations,
        "stopped": report.stopped,
        "genus": topology_summary(mesh).genus,
        "num_vertices": mesh.n_vertices,
        "num_faces": mesh.n_faces,
        "final_min_det": report.final_min_det,
        "final_inverted": report.final_inverted,
        "remesh_events": report.remesh_events,
        "backend": backend.NAME,
    }
    if cfg["target"]["mesh"]:
        ev = evaluate(mesh, load_obj(cfg["target"]["mesh"]), cfg["target"]["samples"], cfg["target"]["voxel_resolution"],
                      seed=cfg["budget"]["seed"])
        with open(os.path.join(out_dir, "eval.csv"), "w") as fh:
            fh.write(ev.csv_header() + "\n" + ev.csv_row() + "\n")
        summary["eval"] = ev.as_dict()
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _common(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="INI config file")
    p.add_argument("--seed", type=int, default=d, help="random seed (overrides [budget] seed)")
    p.add_argument("--out", default=d, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="genusforge", description="Genus-preserving multi-view mesh reconstruction.")
    _common(ap, False)
    ap.add_argument("--dump-config", action="store_true", help="print the effective config and exit")
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("make-targets", help="render a ground-truth OBJ into a PNG view set")
    _common(p, True)
    p.add_argument("mesh")
    p.add_argument("--views", type=int)
    p.add_argument("--resolution", type=int)
    p.add_argument("--radius", type=float)

    p = sub.add_parser("reconstruct", help="fit a primitive to a view set")
    _common(p, True)

    p = sub.add_parser("evaluate", help="Chamfer distance and volume IoU of two OBJs")
    _common(p, True)
    p.add_argument("result")
    p.add_argument("reference")

    p = sub.add_parser("remesh", help="one adaptive remesh event on an OBJ")
    _common(p, True)
    p.add_argument("mesh")
    p.add_argument("--mode", choices=("refine", "coarsen"))

    p = sub.add_parser("inspect", help="topology summary and per-vertex curvature CSV")
    _common(p, True)
    p.add_argument("mesh")
    return ap


def _effective_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.set("budget", "seed", args.seed)
    for key in ("views", "resolution", "radius"):
        v = getattr(args, key, None)
        if v is not None:
            cfg.set("render", key, v)
    if getattr(args, "mode", None):
        cfg.set("remesh", "mode", args.mode)
    return cfg


def _dispatch(args, cfg: RunConfig) -> int:
    out = args.out
    if args.command == "make-targets":
        manifest = make_targets(args.mesh, cfg, out or "targets")
        print("wrote %d views to %s" % (manifest["count"], out or "targets"))
    elif args.command == "reconstruct":
        out = out or "run"
        os.makedirs(out, exist_ok=True)
        fh = logging.FileHandler(os.path.join(out, "run.log"), mode="w")
        fh.setFormatter(logging.Formatter("%(asctime)s %(name)s %(levelname)s %(message)s"))
        logging.getLogger("genusforge").addHandler(fh)
        try:
            summary = run_reconstruct(cfg, out)
        finally:
            logging.getLogger("genusforge").removeHandler(fh)
            fh.close()
        line = "genus=%s iterations=%d vertices=%d" % (summary["genus"], summary["iterations"], summary["num_vertices"])
        if "eval" in summary:
            line += " chamfer=%.6g iou=%.6g" % (summary["eval"]["chamfer"], summary["eval"]["iou"])
        print(line)
    elif args.command == "evaluate":
        t = cfg["target"]
        ev = evaluate(load_obj(args.result), load_obj(args.reference), t["samples"], t["voxel_resolution"],
                      seed=cfg["budget"]["seed"])
        print("# " + ev.convention)
        print(ev.csv_header())
        print(ev.csv_row())
    elif args.command == "remesh":
        mesh = load_obj(args.mesh)
        events = []
        new = remesh_event(mesh, None, remesh_params_from(cfg), cfg["remesh"]["mode"], log_to=events)
        out = out or "remesh_out"
        os.makedirs(out, exist_ok=True)
        save_obj(new, os.path.join(out, "remeshed.obj"))
        print(json.dumps(events[0], sort_keys=True))
    elif args.command == "inspect":
        mesh = load_obj(args.mesh)
        s = topology_summary(mesh)
        for k, v in s.__dict__.items():
            print("%s=%s" % (k, v))
        if out:
            os.makedirs(out, exist_ok=True)
            curvature_field(mesh).to_csv(os.path.join(out, "curvature.csv"))
    return 0


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _effective_config(args)
        if args.dump_config:
            sys.stdout.write(cfg.dumps())
            return 0
        if args.command is None:
            ap.print_usage(sys.stderr)
            return 2
        return _dispatch(args, cfg)
    except ConfigError as exc:
        print("ConfigError: %s" % exc, file=sys.stderr)
        return 2
    except GenusForgeError as exc:
        print("%s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return 1
    except OSError as exc:
        print("%s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
