"""Model directory persistence.

Layout::

    manifest.json                     config echo, seeds, versions, pattern checksum, array index
    deim/cluster_000/...              DEIM bases, magic indices, union pattern, RBF weights
    rb/cluster_000/basis.f64 ...      POD modes and singular values
    rb/cluster_000/pair_000_A.f64     projected matrix terms against DEIM cluster 000
    global/                           optional single-cluster baseline with the same layout

Arrays are raw little-endian bytes (``.f64`` or ``.i64``); their shapes and
SHA-256 digests live in the manifest, which is written with sorted keys and
no timestamps so that identical training runs give identical directories.
"""

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from . import __version__
from .deim import DeimModel
from .errors import ArtifactError
from .extension import SparsityPattern, union_pattern
from .pod import PodBasis
from .rbf import RbfInterpolant
from .rom import LocalDeim, LocalDeimArtifact, LocalRomStore, RomConfig, RomModel
from .sampling import GENERATOR, SampleSet

FORMAT = "lrom-model-1"
_DTYPES = {".f64": "<f8", ".i64": "<i8"}


class _Writer:
    def __init__(self, root):
        self.root = Path(root)
        self.index = {}

    def put(self, rel, arr, kind="f64"):
        arr = np.ascontiguousarray(arr, dtype=_DTYPES["." + kind])
        rel = f"{rel}.{kind}"
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        raw = arr.tobytes()
        path.write_bytes(raw)
        self.index[rel] = {"shape": list(arr.shape), "sha256": hashlib.sha256(raw).hexdigest()}


class _Reader:
    def __init__(self, root, index, verify=True):
        self.root = Path(root)
        self.index = index
        self.verify = verify

    def get(self, rel, kind="f64"):
        rel = f"{rel}.{kind}"
        meta = self.index.get(rel)
        if meta is None:
            raise ArtifactError(f"array {rel} missing from manifest")
        try:
            raw = (self.root / rel).read_bytes()
        except OSError as exc:
            raise ArtifactError(f"cannot read {rel}: {exc}") from exc
        if self.verify and hashlib.sha256(raw).hexdigest() != meta["sha256"]:
            raise ArtifactError(f"checksum mismatch for {rel}")
        arr = np.frombuffer(raw, dtype=_DTYPES["." + kind])
        try:
            return arr.reshape(meta["shape"]).copy()
        except ValueError as exc:
            raise ArtifactError(f"{rel} has {arr.size} values, manifest says {meta['shape']}") from exc


def _save_rbf(w, rel, r):
    w.put(f"{rel}_centers", r.centers)
    w.put(f"{rel}_weights", r.weights)
    w.put(f"{rel}_poly", r.poly_coeffs)
    w.put(f"{rel}_shift", r.shift)
    return {"condition": r.condition, "residual": r.residual, "kernel": r.kernel, "scale": r.scale}


def _load_rbf(rd, rel, meta):
    return RbfInterpolant(rd.get(f"{rel}_centers"), rd.get(f"{rel}_weights"), rd.get(f"{rel}_poly"),
                          meta["condition"], meta["residual"], meta["kernel"], rd.get(f"{rel}_shift"),
                          meta["scale"])


def _save_tree(w, prefix, model):
    deim, store = model.deim, model.store
    meta = {"deim": [], "rb": []}
    w.put(f"{prefix}deim/training", deim.training.points)
    w.put(f"{prefix}deim/assignment", deim.assignment, "i64")
    w.put(f"{prefix}deim/centroids", deim.centroids)
    for k, c in enumerate(deim.clusters):
        d = f"{prefix}deim/cluster_{k:03d}/"
        w.put(d + "A_basis", c.A.basis)
        w.put(d + "A_magic", c.A.magic, "i64")
        w.put(d + "A_sv", c.A.singular_values)
        w.put(d + "A_rows", c.A.pattern.rows, "i64")
        w.put(d + "A_cols", c.A.pattern.cols, "i64")
        w.put(d + "f_basis", c.f.basis)
        w.put(d + "f_magic", c.f.magic, "i64")
        w.put(d + "f_sv", c.f.singular_values)
        w.put(d + "members", c.members, "i64")
        meta["deim"].append({
            "Q_a": c.A.Q, "Q_f": c.f.Q, "pattern_checksum": f"{c.A.pattern.checksum():016x}",
            "rbf_a": _save_rbf(w, d + "rbf_a", c.rbf_a), "rbf_f": _save_rbf(w, d + "rbf_f", c.rbf_f),
        })
    w.put(f"{prefix}rb/training", store.training.points)
    w.put(f"{prefix}rb/assignment", store.assignment, "i64")
    w.put(f"{prefix}rb/centroids", store.centroids)
    for k, b in enumerate(store.bases):
        d = f"{prefix}rb/cluster_{k:03d}/"
        w.put(d + "basis", b.modes)
        w.put(d + "sv", b.singular_values)
        for l in range(deim.n_clusters):
            Ab, fb = store.blocks[(k, l)]
            w.put(d + f"pair_{l:03d}_A", Ab)
            w.put(d + f"pair_{l:03d}_f", fb)
        meta["rb"].append({"N": b.retained_count, "weight_id": b.weight_id})
    meta["pattern_checksum"] = f"{deim.pattern().checksum():016x}"
    meta["training_seeds"] = {"deim": deim.training.seed, "rb": store.training.seed}
    meta["sample_kinds"] = {"deim": deim.training.kind, "rb": store.training.kind}
    return meta


def _load_tree(rd, prefix, meta, config, runner):
    space = runner.space
    dom = config.geometry.domain
    clusters = []
    for k, cm in enumerate(meta["deim"]):
        d = f"{prefix}deim/cluster_{k:03d}/"
        pat = SparsityPattern(space.total_dofs, rd.get(d + "A_rows", "i64"), rd.get(d + "A_cols", "i64"))
        if f"{pat.checksum():016x}" != cm["pattern_checksum"]:
            raise ArtifactError(f"pattern checksum mismatch in {d}")
        pos = space.pattern.positions(pat.rows, pat.cols)
        if np.any(pos < 0):
            raise ArtifactError(f"stored pattern in {d} does not fit the configured mesh")
        A = DeimModel("matrix", rd.get(d + "A_basis"), rd.get(d + "A_magic", "i64"), rd.get(d + "A_sv"),
                      pat, space, pos)
        f = DeimModel("vector", rd.get(d + "f_basis"), rd.get(d + "f_magic", "i64"), rd.get(d + "f_sv"))
        ra = _load_rbf(rd, d + "rbf_a", cm["rbf_a"])
        rf = _load_rbf(rd, d + "rbf_f", cm["rbf_f"])
        clusters.append(LocalDeim(A, f, ra, rf, None, rd.get(d + "members", "i64")))
    cent_d = rd.get(f"{prefix}deim/centroids")
    clusters = [LocalDeim(c.A, c.f, c.rbf_a, c.rbf_f, cent_d[k], c.members) for k, c in enumerate(clusters)]
    seeds, kinds = meta["training_seeds"], meta["sample_kinds"]
    deim = LocalDeimArtifact(tuple(clusters), cent_d,
                             SampleSet(rd.get(f"{prefix}deim/training"), seeds["deim"], kinds["deim"]),
                             rd.get(f"{prefix}deim/assignment", "i64"), dom)
    if f"{deim.pattern().checksum():016x}" != meta["pattern_checksum"]:
        raise ArtifactError("union pattern checksum mismatch")
    bases, blocks = [], {}
    for k, bm in enumerate(meta["rb"]):
        d = f"{prefix}rb/cluster_{k:03d}/"
        bases.append(PodBasis(rd.get(d + "basis"), rd.get(d + "sv"), config.eps_pod, bm["weight_id"]))
        for l in range(len(clusters)):
            blocks[(k, l)] = (rd.get(d + f"pair_{l:03d}_A"), rd.get(d + f"pair_{l:03d}_f"))
    store = LocalRomStore(tuple(bases), rd.get(f"{prefix}rb/centroids"), blocks,
                          SampleSet(rd.get(f"{prefix}rb/training"), seeds["rb"], kinds["rb"]),
                          rd.get(f"{prefix}rb/assignment", "i64"), dom)
    return RomModel(config, deim, store, runner)


def save_model(model, path, global_model=None):
    """Write ``model`` (and optionally a single-cluster baseline) to directory ``path``."""
    root = Path(path)
    try:
        root.mkdir(parents=True, exist_ok=True)
        w = _Writer(root)
        manifest = {
            "format": FORMAT,
            "versions": {"lrom": __version__, "numpy": np.__version__},
            "config": model.config.to_dict(),
            "generator": GENERATOR,
            "local": _save_tree(w, "", model),
        }
        if global_model is not None:
            manifest["global"] = _save_tree(w, "global/", global_model)
            manifest["global_config"] = global_model.config.to_dict()
        manifest["pattern_checksum"] = manifest["local"]["pattern_checksum"]
        manifest["arrays"] = dict(sorted(w.index.items()))
        text = json.dumps(manifest, indent=2, sort_keys=True)
        tmp = root / "manifest.json.tmp"
        tmp.write_text(text + "\n")
        os.replace(tmp, root / "manifest.json")
    except OSError as exc:
        raise ArtifactError(f"cannot write model directory {root}: {exc}") from exc
    return root


def read_manifest(path):
    p = Path(path) / "manifest.json"
    try:
        manifest = json.loads(p.read_text())
    except (OSError, ValueError) as exc:
        raise ArtifactError(f"cannot read manifest {p}: {exc}") from exc
    if manifest.get("format") != FORMAT:
        raise ArtifactError(f"{p} is not an {FORMAT} manifest")
    return manifest


def load_model(path, verify=True, with_global=True):
    """Returns (local model, global model or None)."""
    manifest = read_manifest(path)
    rd = _Reader(path, manifest["arrays"], verify)
    config = RomConfig.from_dict(manifest["config"])
    runner = config.runner()
    local = _load_tree(rd, "", manifest["local"], config, runner)
    glob = None
    if with_global and "global" in manifest:
        gcfg = RomConfig.from_dict(manifest["global_config"])
        glob = _load_tree(rd, "global/", manifest["global"], gcfg, runner)
    return local, glob


def manifest_digest(path):
    """SHA-256 of manifest.json; equal digests mean equal arrays (the manifest lists their hashes)."""
    try:
        return hashlib.sha256((Path(path) / "manifest.json").read_bytes()).hexdigest()
    except OSError as exc:
        raise ArtifactError(str(exc)) from exc
