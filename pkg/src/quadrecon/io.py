"""Readers and writers for every on-disk format quadrecon uses.

Formats are documented byte-for-byte in ``docs/formats.md``.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .candidates import CandidateSet
from .errors import MeshFormatError
from .features import WIDTH
from .mesh import PointCloud, QuadMesh

FACEINFO_MAGIC = b"QFINFO01"
CHECKPOINT_MAGIC = b"QRCKPT01"
CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------- OBJ

def write_obj(path, mesh: QuadMesh):
    with open(path, "w") as fh:
        fh.write(f"# quadrecon quad mesh: {mesh.n_vertices} vertices, {mesh.n_faces} faces\n")
        for v in mesh.vertices.tolist():
            fh.write(f"v {v[0]!r} {v[1]!r} {v[2]!r}\n")
        for f in mesh.faces.tolist():
            fh.write("f {} {} {} {}\n".format(*(i + 1 for i in f)))


def read_obj(path) -> QuadMesh:
    verts, faces = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise MeshFormatError(f"{path}:{lineno}: vertex needs 3 coordinates")
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) != 4:
                    raise MeshFormatError(
                        f"{path}:{lineno}: only quad faces are supported, got a {len(idx)}-gon")
                faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
    try:
        return QuadMesh(np.array(verts, dtype=np.float64).reshape(-1, 3),
                        np.array(faces, dtype=np.int64).reshape(-1, 4))
    except ValueError as exc:
        raise MeshFormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------- PLY (ASCII)

def write_ply(path, cloud: PointCloud):
    has_noise = cloud.noise_flag is not None
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(cloud)}\n")
        fh.write("property double x\nproperty double y\nproperty double z\n")
        if has_noise:
            fh.write("property uchar noise\n")
        fh.write("end_header\n")
        for i, p in enumerate(cloud.points.tolist()):
            line = f"{p[0]!r} {p[1]!r} {p[2]!r}"
            if has_noise:
                line += f" {int(cloud.noise_flag[i])}"
            fh.write(line + "\n")


def read_ply(path) -> PointCloud:
    with open(path) as fh:
        if fh.readline().strip() != "ply":
            raise MeshFormatError(f"{path}: not a PLY file")
        fmt = fh.readline().split()
        if fmt[:2] != ["format", "ascii"]:
            raise MeshFormatError(f"{path}: only ASCII PLY is supported")
        elements = []  # (name, count, [props])
        for line in fh:
            parts = line.split()
            if not parts or parts[0] in ("comment", "obj_info"):
                continue
            if parts[0] == "end_header":
                break
            if parts[0] == "element":
                elements.append((parts[1], int(parts[2]), []))
            elif parts[0] == "property":
                if not elements:
                    raise MeshFormatError(f"{path}: property before element")
                if parts[1] == "list":
                    elements[-1][2].append(("list", parts[-1]))
                else:
                    elements[-1][2].append((parts[1], parts[2]))
        else:
            raise MeshFormatError(f"{path}: missing end_header")
        points = noise = None
        for name, count, props in elements:
            rows = [fh.readline().split() for _ in range(count)]
            if name != "vertex":
                continue
            names = [p[1] for p in props]
            for axis in "xyz":
                if axis not in names:
                    raise MeshFormatError(f"{path}: vertex element lacks property {axis}")
            try:
                data = np.array(rows, dtype=np.float64).reshape(count, len(names))
            except ValueError as exc:
                raise MeshFormatError(f"{path}: malformed vertex rows") from exc
            points = data[:, [names.index(a) for a in "xyz"]]
            if "noise" in names:
                noise = data[:, names.index("noise")] != 0
    if points is None:
        raise MeshFormatError(f"{path}: no vertex element")
    return PointCloud(points, noise)


# ---------------------------------------------------------------- candidates / labels

def write_candidates(path, cands: CandidateSet):
    with open(path, "w") as fh:
        fh.write("# quadrecon candidates v1: center ring0 ring1 ring2 ring3 quality\n")
        for c, r, q in zip(cands.centers.tolist(), cands.rings.tolist(), cands.quality.tolist()):
            fh.write(f"{c} {r[0]} {r[1]} {r[2]} {r[3]} {q!r}\n")


def read_candidates(path) -> CandidateSet:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 6:
                raise MeshFormatError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            rows.append(parts)
    if not rows:
        return CandidateSet(np.empty(0), np.empty((0, 4)), np.empty(0))
    ints = np.array([[int(x) for x in r[:5]] for r in rows], dtype=np.int64)
    return CandidateSet(ints[:, 0], ints[:, 1:], np.array([float(r[5]) for r in rows]))


def write_labels(path, labels):
    np.savetxt(path, np.asarray(labels, dtype=np.int64), fmt="%d")


def read_labels(path) -> np.ndarray:
    return np.loadtxt(path, dtype=np.int64, ndmin=1)


def write_probs(path, probs):
    np.savetxt(path, np.asarray(probs, dtype=np.float64), fmt="%.17g")


def read_probs(path) -> np.ndarray:
    return np.loadtxt(path, dtype=np.float64, ndmin=1)


# ---------------------------------------------------------------- face-info matrix

def write_faceinfo(path, info: np.ndarray):
    info = np.asarray(info, dtype="<f8")
    if info.ndim != 2 or info.shape[1] != WIDTH:
        raise ValueError(f"face-info matrix must be N x {WIDTH}")
    with open(path, "wb") as fh:
        fh.write(FACEINFO_MAGIC)
        fh.write(struct.pack("<QI", info.shape[0], WIDTH))
        fh.write(np.ascontiguousarray(info).tobytes())


def read_faceinfo(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:8] != FACEINFO_MAGIC:
        raise MeshFormatError(f"{path}: bad face-info magic")
    n, width = struct.unpack_from("<QI", raw, 8)
    if width != WIDTH:
        raise MeshFormatError(f"{path}: width {width}, expected {WIDTH}")
    body = raw[20:]
    if len(body) != n * width * 8:
        raise MeshFormatError(f"{path}: truncated payload")
    return np.frombuffer(body, dtype="<f8").reshape(n, width).astype(np.float64)


# ---------------------------------------------------------------- key/value files

def _format_value(v):
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, (list, tuple)):
        return " ".join(str(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_kv(path, data: dict):
    with open(path, "w") as fh:
        for k, v in data.items():
            fh.write(f"{k} = {_format_value(v)}\n")


def read_kv(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment. Values stay strings."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise MeshFormatError(f"{path}:{lineno}: expected 'key = value'")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


# ---------------------------------------------------------------- sample bundles

BUNDLE_FILES = {
    "cloud": "cloud.ply",
    "reference": "reference.obj",
    "candidates": "candidates.txt",
    "labels": "labels.txt",
    "meta": "meta.txt",
}


def write_bundle(directory, cloud=None, reference=None, candidates=None, labels=None,
                 meta=None):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    if cloud is not None:
        write_ply(d / BUNDLE_FILES["cloud"], cloud)
    if reference is not None:
        write_obj(d / BUNDLE_FILES["reference"], reference)
    if candidates is not None:
        write_candidates(d / BUNDLE_FILES["candidates"], candidates)
    if labels is not None:
        write_labels(d / BUNDLE_FILES["labels"], labels)
    if meta is not None:
        write_kv(d / BUNDLE_FILES["meta"], meta)
    return d


def read_bundle(directory) -> dict:
    """Load whatever bundle files exist; missing ones map to None."""
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"bundle directory not found: {d}")
    readers = {"cloud": read_ply, "reference": read_obj, "candidates": read_candidates,
               "labels": read_labels, "meta": read_kv}
    return {key: (readers[key](d / name) if (d / name).exists() else None)
            for key, name in BUNDLE_FILES.items()}


# ---------------------------------------------------------------- checkpoints

def write_checkpoint(path, hyper: dict, blocks: dict):
    """Magic, version, JSON hyperparameters, then named little-endian f64 blocks."""
    hj = json.dumps(hyper, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(hj)))
        fh.write(hj)
        fh.write(struct.pack("<I", len(blocks)))
        for name, arr in blocks.items():
            arr = np.ascontiguousarray(arr, dtype="<f8")
            nb = name.encode()
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def read_checkpoint(path):
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"checkpoint not found: {p}")
    raw = p.read_bytes()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise MeshFormatError(f"{p}: not a quadrecon checkpoint")
    version, hlen = struct.unpack_from("<II", raw, 8)
    if version != CHECKPOINT_VERSION:
        raise MeshFormatError(f"{p}: unsupported checkpoint version {version}")
    off = 16
    hyper = json.loads(raw[off:off + hlen].decode())
    off += hlen
    (nblocks,) = struct.unpack_from("<I", raw, off)
    off += 4
    blocks = {}
    for _ in range(nblocks):
        (nlen,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off:off + nlen].decode()
        off += nlen
        (ndim,) = struct.unpack_from("<B", raw, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}Q", raw, off)
        off += 8 * ndim
        count = int(np.prod(shape)) if ndim else 1
        blocks[name] = np.frombuffer(raw, dtype="<f8", count=count, offset=off) \
            .reshape(shape).astype(np.float64)
        off += 8 * count
    return hyper, blocks
