"""View sets on disk: 8-bit PNG images plus a JSON manifest.

Silhouettes are stored as grayscale coverage. Normal maps are RGBA with the
usual ``n * 0.5 + 0.5`` colour encoding; alpha marks pixels covered by the
mesh so that zero normals survive the round trip.
"""
from __future__ import annotations

import json
import os

import numpy as np
from PIL import Image

from .camera import Camera
from .raster import RenderedView

MANIFEST = "manifest.json"


def _to_u8(a):
    return np.clip(np.rint(a * 255.0), 0, 255).astype(np.uint8)


def silhouette_image(view: RenderedView) -> Image.Image:
    return Image.fromarray(_to_u8(view.silhouette), mode="L")


def normal_image(view: RenderedView) -> Image.Image:
    n = view.normals
    covered = np.linalg.norm(n, axis=2) > 0.0
    rgba = np.empty(n.shape[:2] + (4,), dtype=np.uint8)
    rgba[..., :3] = _to_u8(n * 0.5 + 0.5)
    rgba[..., 3] = np.where(covered, 255, 0)
    return Image.fromarray(rgba, mode="RGBA")


def decode_silhouette(img: Image.Image) -> np.ndarray:
    return np.asarray(img.convert("L"), dtype=np.float64) / 255.0


def decode_normals(img: Image.Image) -> np.ndarray:
    a = np.asarray(img.convert("RGBA"), dtype=np.float64)
    n = a[..., :3] / 255.0 * 2.0 - 1.0
    covered = a[..., 3] > 127
    ln = np.linalg.norm(n, axis=2)
    ok = covered & (ln > 0.0)
    out = np.zeros_like(n)
    out[ok] = n[ok] / ln[ok, None]
    return out


def write_view_set(views, cameras, out_dir, meta=None) -> dict:
    """Write ``sil_XXX.png`` / ``normal_XXX.png`` per view and the manifest."""
    if len(views) != len(cameras):
        raise ValueError("one camera per view required")
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i, (v, cam) in enumerate(zip(views, cameras)):
        sil = "sil_%03d.png" % i
        nrm = "normal_%03d.png" % i
        silhouette_image(v).save(os.path.join(out_dir, sil))
        normal_image(v).save(os.path.join(out_dir, nrm))
        entries.append({"id": i, "silhouette": sil, "normals": nrm, "camera": cam.to_dict()})
    manifest = {"count": len(entries), "views": entries}
    if cameras:
        manifest["resolution"] = [cameras[0].width, cameras[0].height]
    if meta:
        manifest.update(meta)
    with open(os.path.join(out_dir, MANIFEST), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def read_view_set(path):
    """Load ``(views, cameras, manifest)`` written by :func:`write_view_set`."""
    with open(os.path.join(path, MANIFEST)) as fh:
        manifest = json.load(fh)
    views, cameras = [], []
    for e in manifest["views"]:
        cam = Camera.from_dict(e["camera"])
        with Image.open(os.path.join(path, e["silhouette"])) as im:
            sil = decode_silhouette(im)
        with Image.open(os.path.join(path, e["normals"])) as im:
            nrm = decode_normals(im)
        views.append(RenderedView(sil, nrm, camera_id=int(e["id"])))
        cameras.append(cam)
    return views, cameras, manifest
