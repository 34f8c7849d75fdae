"""Dataset files: length-prefixed binary sequence records, a JSON sidecar
manifest per dataset directory, lossless CSV export, and the hash-based
train/test split.

Sequence file layout (all little-endian):
  magic   8 bytes  b"IDYNSEQ1"
  u32     header length
  bytes   header JSON (ids, model hash, fps, dims, subject metadata, beta)
  then one length-prefixed block per frame:
  u64     block byte length
  f64[]   pose | vel | tau_am | tau_jt | grf_force | grf_point | time
  if the header carries sub-step debug data, the frame blocks are followed by
  one block per sub-step (pose | vel | tau | point_forces | points) plus one
  trailing state block (pose | vel).
"""

import hashlib
import json
import os
import struct

import numpy as np

from .simulate import MotionSequence

MAGIC = b"IDYNSEQ1"
MANIFEST_NAME = "manifest.json"
DATASET_FORMAT_VERSION = 1


class DatasetError(ValueError):
    pass


def _write_block(f, *arrays):
    flat = np.concatenate([np.asarray(a, dtype="<f8").ravel() for a in arrays])
    payload = flat.tobytes()
    f.write(struct.pack("<Q", len(payload)))
    f.write(payload)


def _read_block(f, expected):
    (nbytes,) = struct.unpack("<Q", f.read(8))
    if nbytes != expected * 8:
        raise DatasetError(
            f"frame block has {nbytes} bytes, expected {expected * 8}")
    return np.frombuffer(f.read(nbytes), dtype="<f8")


def write_sequence(path, seq):
    header = {
        "seq_id": seq.seq_id,
        "category": seq.category,
        "model_name": seq.model_name,
        "model_hash": seq.model_hash,
        "fps": seq.fps,
        "n_frames": len(seq),
        "pose_dim": seq.poses.shape[1],
        "ndof": seq.vels.shape[1],
        "n_act": seq.tau_am.shape[1],
        "n_segments": seq.grf_force.shape[1],
        "subject_mass": seq.subject_mass,
        "subject_height": seq.subject_height,
        "source": seq.source,
        "beta": list(map(float, seq.beta)),
        "debug": bool(seq.debug),
    }
    if seq.debug:
        header["debug_dt"] = seq.debug["dt"]
        header["n_substeps"] = seq.debug["taus"].shape[0]
        header["n_contacts"] = seq.debug["point_forces"].shape[1]
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for k in range(len(seq)):
            _write_block(f, seq.poses[k], seq.vels[k], seq.tau_am[k],
                         seq.tau_jt[k], seq.grf_force[k], seq.grf_point[k],
                         [seq.times[k]])
        if seq.debug:
            d = seq.debug
            for s in range(d["taus"].shape[0]):
                _write_block(f, d["poses"][s], d["vels"][s], d["taus"][s],
                             d["point_forces"][s], d["points"][s])
            _write_block(f, d["poses"][-1], d["vels"][-1])


def read_sequence(path, with_debug=True):
    with open(path, "rb") as f:
        if f.read(8) != MAGIC:
            raise DatasetError(f"{path!r} is not a sequence file")
        (hlen,) = struct.unpack("<I", f.read(4))
        h = json.loads(f.read(hlen))
        T = h["n_frames"]
        pd, nd, na, ns = h["pose_dim"], h["ndof"], h["n_act"], h["n_segments"]
        poses = np.empty((T, pd))
        vels = np.empty((T, nd))
        tau_am = np.empty((T, na, 3))
        tau_jt = np.empty((T, nd))
        grf_f = np.empty((T, ns, 3))
        grf_p = np.empty((T, ns, 3))
        times = np.empty(T)
        per_frame = pd + nd + na * 3 + nd + ns * 3 + ns * 3 + 1
        for k in range(T):
            row = _read_block(f, per_frame)
            o = 0
            poses[k] = row[o:o + pd]; o += pd
            vels[k] = row[o:o + nd]; o += nd
            tau_am[k] = row[o:o + na * 3].reshape(na, 3); o += na * 3
            tau_jt[k] = row[o:o + nd]; o += nd
            grf_f[k] = row[o:o + ns * 3].reshape(ns, 3); o += ns * 3
            grf_p[k] = row[o:o + ns * 3].reshape(ns, 3); o += ns * 3
            times[k] = row[o]
        debug = {}
        if h.get("debug") and with_debug:
            n_sub = h["n_substeps"]
            nc = h["n_contacts"]
            debug = {
                "dt": h["debug_dt"],
                "poses": np.empty((n_sub + 1, pd)),
                "vels": np.empty((n_sub + 1, nd)),
                "taus": np.empty((n_sub, nd)),
                "point_forces": np.empty((n_sub, nc, 3)),
                "points": np.empty((n_sub, nc, 3)),
            }
            per_sub = pd + nd + nd + nc * 3 + nc * 3
            for s in range(n_sub):
                row = _read_block(f, per_sub)
                o = 0
                debug["poses"][s] = row[o:o + pd]; o += pd
                debug["vels"][s] = row[o:o + nd]; o += nd
                debug["taus"][s] = row[o:o + nd]; o += nd
                debug["point_forces"][s] = row[o:o + nc * 3].reshape(nc, 3); o += nc * 3
                debug["points"][s] = row[o:o + nc * 3].reshape(nc, 3)
            row = _read_block(f, pd + nd)
            debug["poses"][n_sub] = row[:pd]
            debug["vels"][n_sub] = row[pd:]
    return MotionSequence(
        seq_id=h["seq_id"], category=h["category"], model_name=h["model_name"],
        model_hash=h["model_hash"], fps=h["fps"],
        beta=np.asarray(h["beta"]), poses=poses, vels=vels, tau_am=tau_am,
        tau_jt=tau_jt, grf_force=grf_f, grf_point=grf_p, times=times,
        subject_mass=h["subject_mass"], subject_height=h["subject_height"],
        source=h["source"], debug=debug)


def file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sequence_filename(index, seq_id):
    return f"{index:03d}_{seq_id}.bin"


def write_dataset(out_dir, sequences, extra=None):
    """Write sequences plus the manifest; returns the manifest dict."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    total = 0.0
    for i, seq in enumerate(sequences):
        fname = sequence_filename(i, seq.seq_id)
        write_sequence(os.path.join(out_dir, fname), seq)
        entries.append({
            "file": fname,
            "seq_id": seq.seq_id,
            "category": seq.category,
            "model_name": seq.model_name,
            "model_hash": seq.model_hash,
            "n_frames": len(seq),
            "duration_s": (len(seq) - 1) / seq.fps,
            "fps": seq.fps,
            "subject_mass": seq.subject_mass,
            "subject_height": seq.subject_height,
            "source": seq.source,
            "sha256": file_hash(os.path.join(out_dir, fname)),
        })
        total += (len(seq) - 1) / seq.fps
    combined = hashlib.sha256()
    for e in entries:
        combined.update(bytes.fromhex(e["sha256"]))
    manifest = {
        "format_version": DATASET_FORMAT_VERSION,
        "n_sequences": len(entries),
        "total_duration_s": total,
        "content_hash": combined.hexdigest(),
        "sequences": entries,
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(out_dir, MANIFEST_NAME), "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")
    return manifest


def read_manifest(dataset_dir):
    path = os.path.join(dataset_dir, MANIFEST_NAME)
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError:
        raise DatasetError(f"no manifest in {dataset_dir!r}")


def read_dataset(dataset_dir, model_name=None, with_debug=False):
    """Load every sequence (optionally filtered by model name)."""
    manifest = read_manifest(dataset_dir)
    out = []
    for e in manifest["sequences"]:
        if model_name and e["model_name"] != model_name:
            continue
        out.append(read_sequence(os.path.join(dataset_dir, e["file"]),
                                 with_debug=with_debug))
    return out


def split_id(seq_id, train_fraction=0.9):
    """Stable hash-based split: True for training, False for held-out."""
    digest = hashlib.sha256(seq_id.encode()).digest()
    val = int.from_bytes(digest[:4], "little") / 2 ** 32
    return val < train_fraction


def export_csv(seq, path):
    """Lossless (repr round-trip) flat CSV of the per-frame records."""
    T = len(seq)
    na = seq.tau_am.shape[1]
    ns = seq.grf_force.shape[1]
    cols = (["time"]
            + [f"pose_{i}" for i in range(seq.poses.shape[1])]
            + [f"vel_{i}" for i in range(seq.vels.shape[1])]
            + [f"tau_am_{j}_{ax}" for j in range(na) for ax in "xyz"]
            + [f"tau_jt_{i}" for i in range(seq.tau_jt.shape[1])]
            + [f"grf_{s}_{ax}" for s in range(ns) for ax in "xyz"]
            + [f"grfp_{s}_{ax}" for s in range(ns) for ax in "xyz"])
    with open(path, "w") as f:
        f.write(",".join(cols) + "\n")
        for k in range(T):
            row = np.concatenate((
                [seq.times[k]], seq.poses[k], seq.vels[k],
                seq.tau_am[k].ravel(), seq.tau_jt[k],
                seq.grf_force[k].ravel(), seq.grf_point[k].ravel()))
            f.write(",".join(repr(v) for v in row) + "\n")


def import_csv(path, like_seq):
    """Re-read an export_csv file into arrays shaped like `like_seq`."""
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    if data.ndim == 1:
        data = data[None, :]
    T = data.shape[0]
    na = like_seq.tau_am.shape[1]
    ns = like_seq.grf_force.shape[1]
    pd_ = like_seq.poses.shape[1]
    nd = like_seq.vels.shape[1]
    o = 0
    times = data[:, o]; o += 1
    poses = data[:, o:o + pd_]; o += pd_
    vels = data[:, o:o + nd]; o += nd
    tau_am = data[:, o:o + na * 3].reshape(T, na, 3); o += na * 3
    tau_jt = data[:, o:o + nd]; o += nd
    grf_f = data[:, o:o + ns * 3].reshape(T, ns, 3); o += ns * 3
    grf_p = data[:, o:o + ns * 3].reshape(T, ns, 3)
    return dict(times=times, poses=poses, vels=vels, tau_am=tau_am,
                tau_jt=tau_jt, grf_force=grf_f, grf_point=grf_p)
