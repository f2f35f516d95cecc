"""Central finite-difference check of the model's analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import compound_loss


def _signature(cache):
    """Every piecewise-linear switch a forward pass took, as one int vector."""
    parts = []
    for key, val in cache.items():
        if key == "point":
            pre, arg, _, a1, _ = val
            parts += [(pre > 0).ravel(), arg.ravel(), (a1 > 0).ravel()]
        elif key != "out":
            parts.append((val[2] > 0).ravel())
    return np.concatenate([p.astype(np.int64) for p in parts])


@dataclass
class BlockCheck:
    name: str
    rel_error: float
    n_checked: int
    n_skipped_kinks: int


def check_gradients(model, inp, labels, w, step=1e-5, per_block=8, seed=0,
                    face_loss=True, face_loss_sign=1.0, blocks=None, batch_stats=True):
    """Compare analytic and central-difference gradients entry by entry.

    Per block, the entries with the largest analytic magnitude plus random
    ones are probed. Probes whose +/- step flips any ReLU/LeakyReLU/max-pool
    switch are discarded (the loss is not differentiable there) and replaced.
    A block's error is max |analytic - numeric| over its probes divided by the
    largest magnitude seen among them.
    """
    rng = np.random.default_rng(seed)

    def probe():
        # forward only: loss value plus the switch pattern it was computed with
        probs, _, cache = model.forward(inp, train=batch_stats)
        return compound_loss(probs, labels, w, face_loss, face_loss_sign).total, _signature(cache)

    _, grads = model.loss_and_grad(inp, labels, w, face_loss, face_loss_sign,
                                   batch_stats=batch_stats)
    _, base_sig = probe()
    names = list(model.params) if blocks is None else list(blocks)
    results = []
    for name in names:
        P = model.params[name]
        G = grads[name]
        flat_order = np.argsort(-np.abs(G).ravel(), kind="stable")
        pool = list(flat_order[: per_block // 2]) + list(rng.permutation(P.size))
        seen, probes, skipped = set(), [], 0
        for flat in pool:
            if len(probes) >= per_block or skipped > 20 * per_block:
                break
            flat = int(flat)
            if flat in seen:
                continue
            seen.add(flat)
            j = np.unravel_index(flat, P.shape)
            old = P[j]
            P[j] = old + step
            lp, sp = probe()
            P[j] = old - step
            lm, sm = probe()
            P[j] = old
            if not (np.array_equal(sp, base_sig) and np.array_equal(sm, base_sig)):
                skipped += 1
                continue
            probes.append((G[j], (lp - lm) / (2 * step)))
        a = np.array(probes).reshape(-1, 2)
        scale = np.abs(a).max() if a.size else 0.0
        err = float(np.abs(a[:, 0] - a[:, 1]).max() / scale) if scale > 0 else 0.0
        results.append(BlockCheck(name, err, len(probes), skipped))
    return results
