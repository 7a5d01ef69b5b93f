"""Compare the compiled and numpy rasteriser kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--resolution R]
"""
import argparse
import timeit

import numpy as np

from genusforge.primitives import grid_torus, icosphere
from genusforge.render import backend, make_camera_rig
from genusforge.render.raster import SATURATION, contour_edges


def inputs(mesh, resolution):
    cam = make_camera_rig(5, 2.5, resolution)[1]
    sxy, z, _ = cam.project(mesh.positions)
    return (
        np.ascontiguousarray(sxy),
        np.ascontiguousarray(z),
        np.ascontiguousarray(mesh.faces, dtype=np.int64),
        contour_edges(mesh, cam),
    )


def bench(kernels, mesh, resolution, repeat):
    sxy, z, faces, edges = inputs(mesh, resolution)
    r = timeit.repeat(lambda: kernels.rasterize(sxy, z, faces, resolution, resolution), number=1, repeat=repeat)
    c = timeit.repeat(
        lambda: kernels.contour_distance(sxy, edges, resolution, resolution, SATURATION), number=1, repeat=repeat
    )
    return min(r), min(c)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--resolution", type=int, default=128)
    args = ap.parse_args()
    try:
        compiled = backend.get("cython")
    except ImportError:
        compiled = None
        print("compiled kernels not built; timing the numpy fallback only")
    meshes = {"icosphere(3)": icosphere(3), "icosphere(4)": icosphere(4), "torus 64x32": grid_torus(64, 32)}
    print("%-14s %7s %-17s %10s %10s" % ("mesh", "faces", "kernel", "numpy ms", "cython ms"))
    for name, mesh in meshes.items():
        py = bench(backend.get("python"), mesh, args.resolution, args.repeat)
        cy = bench(compiled, mesh, args.resolution, args.repeat) if compiled else (float("nan"),) * 2
        for label, a, b in (("rasterize", py[0], cy[0]), ("contour_distance", py[1], cy[1])):
            print("%-14s %7d %-17s %10.2f %10.2f   x%.1f" % (name, mesh.n_faces, label, 1e3 * a, 1e3 * b, a / b))


if __name__ == "__main__":
    main()
