"""Dataset generation pipeline: reference synthesis, tracked rollout with a
stability gate, and dataset writing.

A rollout whose root tips past TILT_LIMIT gets its reference parameters
redrawn (deterministically salted), up to MAX_ATTEMPTS; motions that still
fall are kept and flagged in the manifest, since the recorded physics is
valid either way.  Collection is embarrassingly parallel across sequences
and the outputs are identical for any worker count.
"""

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .datafiles import write_dataset
from .model import Pose, load_model
from .references import DEFAULT_PLAN, ALL_CATEGORIES, build_reference
from .rotations import log_so3
from .simulate import ContactModel, DivergenceError, collect_sequence

TILT_LIMIT = 0.9       # rad of root roll/pitch treated as a fall
MAX_ATTEMPTS = 5


def max_root_tilt(model, seq):
    if model.joint_types[0] != "free":
        return 0.0
    scaled = model.with_shape(seq.beta) if not np.allclose(seq.beta, 1.0) else model
    worst = 0.0
    for k in range(len(seq)):
        w = log_so3(Pose.from_vector(scaled, seq.poses[k]).rotations[0])
        worst = max(worst, abs(w[0]), abs(w[1]))
    return worst


def _collect_task(args):
    (seed, category, variant, duration, contact_kwargs, beta_spread,
     debug) = args
    contact = ContactModel(**contact_kwargs)
    models = {}
    last = None
    for attempt in range(MAX_ATTEMPTS):
        ref = build_reference(seed, category, variant, duration,
                              models=models, beta_spread=beta_spread,
                              attempt=attempt)
        model = models[ref.model_name]
        try:
            seq = collect_sequence(model, contact, ref, record_debug=debug)
        except DivergenceError:
            last = None
            continue
        tilt = max_root_tilt(model, seq)
        last = (seq, tilt, attempt)
        if tilt < TILT_LIMIT:
            break
    if last is None:
        raise DivergenceError(
            f"{category}-{variant:02d} diverged in all {MAX_ATTEMPTS} attempts")
    return last


def generate_dataset(out_dir, *, seed=0, categories=None, plan=None,
                     contact=None, beta_spread=0.04, threads=1, debug=True,
                     extra_meta=None):
    """Generate, roll out, and write the synthetic library; returns manifest."""
    categories = list(categories) if categories else list(ALL_CATEGORIES)
    plan = dict(DEFAULT_PLAN, **(plan or {}))
    contact = contact or ContactModel()
    contact_kwargs = dict(stiffness=contact.stiffness, damping=contact.damping,
                          friction=contact.friction,
                          tangential_damping=contact.tangential_damping)
    tasks = []
    for cat in categories:
        count, duration = plan[cat]
        for v in range(count):
            tasks.append((seed, cat, v, duration, contact_kwargs, beta_spread,
                          debug))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_collect_task, tasks))
    else:
        results = [_collect_task(t) for t in tasks]

    sequences = [r[0] for r in results]
    stats = [{"seq_id": s.seq_id, "max_tilt": round(r[1], 4),
              "attempts": r[2] + 1, "fell": r[1] >= TILT_LIMIT}
             for s, r in zip(sequences, results)]
    model_hashes = sorted({(s.model_name, s.model_hash) for s in sequences})
    meta = {
        "seed": seed,
        "categories": categories,
        "plan": {c: list(plan[c]) for c in categories},
        "contact": contact_kwargs,
        "beta_spread": beta_spread,
        "models": [{"name": n, "hash": h} for n, h in model_hashes],
        "rollout_stats": stats,
    }
    if extra_meta:
        meta.update(extra_meta)
    return write_dataset(out_dir, sequences, extra=meta)
