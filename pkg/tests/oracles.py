"""Independent reference computations used by the tests.

Nothing here calls into the code under test except to read plain arrays,
so each helper gives a second route to the quantity being checked.
"""
from collections import defaultdict

import numpy as np


def gf2_rank(M) -> int:
    """Rank of a 0/1 matrix over GF(2) by row reduction on packed bits."""
    A = np.packbits(np.asarray(M, dtype=np.uint8) & 1, axis=1)
    n_rows, n_cols = M.shape
    rank = 0
    row = 0
    for col in range(n_cols):
        byte, bit = divmod(col, 8)
        mask = np.uint8(0x80 >> bit)
        piv = np.nonzero(A[row:, byte] & mask)[0]
        if len(piv) == 0:
            continue
        p = row + piv[0]
        if p != row:
            A[[row, p]] = A[[p, row]]
        hit = np.nonzero(A[:, byte] & mask)[0]
        hit = hit[hit != row]
        A[hit] ^= A[row]
        row += 1
        rank += 1
        if row == n_rows:
            break
    return rank


def homology_genus(faces, n_vertices):
    """Genus from the GF(2) first Betti number of the simplicial complex.

    ``b1 = E - rank(d1) - rank(d2)``; a closed connected orientable surface
    has ``b1 = 2g``.
    """
    faces = np.asarray(faces)
    edge_id = {}
    for f in faces:
        for k in range(3):
            a, b = sorted((int(f[k]), int(f[(k + 1) % 3])))
            edge_id.setdefault((a, b), len(edge_id))
    E = len(edge_id)
    d1 = np.zeros((n_vertices, E), dtype=np.uint8)
    for (a, b), e in edge_id.items():
        d1[a, e] = 1
        d1[b, e] = 1
    d2 = np.zeros((E, len(faces)), dtype=np.uint8)
    for j, f in enumerate(faces):
        for k in range(3):
            a, b = sorted((int(f[k]), int(f[(k + 1) % 3])))
            d2[edge_id[(a, b)], j] = 1
    b1 = E - gf2_rank(d1) - gf2_rank(d2)
    assert b1 % 2 == 0
    return b1 // 2


def count_vef(faces):
    """|V|, |E|, |F| counted straight from a face list."""
    faces = np.asarray(faces)
    edges = {tuple(sorted((int(f[k]), int(f[(k + 1) % 3])))) for f in faces for k in range(3)}
    return len(np.unique(faces)), len(edges), len(faces)


def interior_angles(P, faces):
    """Corner angles of each face via the law of cosines."""
    a = np.linalg.norm(P[faces[:, 1]] - P[faces[:, 2]], axis=1)
    b = np.linalg.norm(P[faces[:, 2]] - P[faces[:, 0]], axis=1)
    c = np.linalg.norm(P[faces[:, 0]] - P[faces[:, 1]], axis=1)
    A0 = np.arccos(np.clip((b * b + c * c - a * a) / (2 * b * c), -1, 1))
    A1 = np.arccos(np.clip((a * a + c * c - b * b) / (2 * a * c), -1, 1))
    return np.stack([A0, A1, np.pi - A0 - A1], axis=1)


def central_fd(f, x, key=None, h0=1e-6, min_h=1e-11):
    """Central differences of scalar ``f`` at ``x``, one coordinate at a time.

    When ``key`` is given, the step is shrunk until ``key(x +- h)`` equals
    ``key(x)``, so both samples lie on the same smooth piece of ``f``.
    Returns ``(gradient, mask of coordinates where that was achieved)``.
    """
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    ok = np.ones(x.shape, dtype=bool)
    k0 = key(x) if key is not None else None
    flat = x.reshape(-1)
    for i in range(flat.size):
        h = h0
        while True:
            xp = flat.copy()
            xm = flat.copy()
            xp[i] += h
            xm[i] -= h
            xp = xp.reshape(x.shape)
            xm = xm.reshape(x.shape)
            if key is None or (key(xp) == k0 and key(xm) == k0):
                g.reshape(-1)[i] = (f(xp) - f(xm)) / (2.0 * h)
                break
            h /= 4.0
            if h < min_h:
                ok.reshape(-1)[i] = False
                break
    return g, ok


def rel_err(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)


def min_pairwise_angle_deg(D):
    D = D / np.linalg.norm(D, axis=1)[:, None]
    c = np.clip(D @ D.T, -1, 1)
    np.fill_diagonal(c, -1)
    return np.degrees(np.arccos(c.max()))


def random_flips(faces, n_vertices, count, rng):
    """Apply ``count`` random legal edge flips to an oriented closed face list."""
    F = [list(map(int, f)) for f in faces]
    done = 0
    tries = 0
    while done < count and tries < 50 * count:
        tries += 1
        ef = {}
        for i, f in enumerate(F):
            for k in range(3):
                ef[(f[k], f[(k + 1) % 3])] = i
        val = np.bincount(np.asarray(F).ravel(), minlength=n_vertices)
        keys = sorted(ef)
        a, b = keys[rng.integers(len(keys))]
        f1, f2 = ef[(a, b)], ef.get((b, a))
        if f2 is None:
            continue
        c = [v for v in F[f1] if v not in (a, b)][0]
        d = [v for v in F[f2] if v not in (a, b)][0]
        if (c, d) in ef or (d, c) in ef or val[a] <= 4 or val[b] <= 4:
            continue
        F[f1] = [c, d, b]
        F[f2] = [d, c, a]
        done += 1
    return np.asarray(F, dtype=np.int64)


def brute_closest_distance(p, tri, n=301):
    """Distance from ``p`` to triangle ``tri`` by dense barycentric sampling (upper bound)."""
    u = np.linspace(0.0, 1.0, n)
    U, V = np.meshgrid(u, u)
    m = U + V <= 1.0
    G = tri[0] + U[m][:, None] * (tri[1] - tri[0]) + V[m][:, None] * (tri[2] - tri[0])
    return float(np.min(np.linalg.norm(G - p, axis=1)))


def valence_sq_dev(faces, n_vertices, target=6):
    val = defaultdict(set)
    for f in np.asarray(faces):
        for k in range(3):
            val[int(f[k])].add(int(f[(k + 1) % 3]))
            val[int(f[(k + 1) % 3])].add(int(f[k]))
    return int(sum((len(val[v]) - target) ** 2 for v in range(n_vertices)))


def box_mesh(lo, hi, n=1):
    """Closed outward-oriented axis-aligned box with each face split into an n x n grid."""
    from genusforge.halfedge import build_mesh

    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    verts = {}
    faces = []

    def vid(p):
        key = tuple(int(v) for v in p)
        if key not in verts:
            verts[key] = len(verts)
        return verts[key]

    for axis in range(3):
        u, v = (axis + 1) % 3, (axis + 2) % 3
        for side in (0, n):
            for i in range(n):
                for j in range(n):
                    q = []
                    for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        p = [0, 0, 0]
                        p[axis], p[u], p[v] = side, i + di, j + dj
                        q.append(vid(p))
                    if side == 0:
                        q = q[::-1]
                    faces += [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]
    P = np.array(sorted(verts, key=verts.get), dtype=float) / n
    return build_mesh(faces, lo + P * (hi - lo))
