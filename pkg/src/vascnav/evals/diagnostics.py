"""TD-error diagnostics: spatial error maps and train/valid curves.

All transitions are weighted uniformly here, never by the replay
distribution, so the diagnostics measure the value function rather than
the sampler. Every forward pass runs the smoothing layer in evaluation
mode and is deterministic.
"""

from dataclasses import dataclass

import numpy as np

from vascnav.agent.networks import clipped_min, encode, head_forward
from vascnav.data.batching import assemble_inputs
from vascnav.errors import require
from vascnav.nn.layers import softmax


def _eval_q_pi(nets, images, context, target=False):
    if target:
        feat, _ = encode(nets.t_encoder, nets.alix, images,
                         train_shift=False)
        q, _ = clipped_min(head_forward(nets.t_q1, feat, context)[0],
                           head_forward(nets.t_q2, feat, context)[0])
        return q, None
    feat, _ = encode(nets.encoder, nets.alix, images, train_shift=False)
    q, _ = clipped_min(head_forward(nets.q1, feat, context)[0],
                       head_forward(nets.q2, feat, context)[0])
    pi = softmax(head_forward(nets.policy, feat, context)[0])
    return q, pi


def transition_td(batch, nets, cfg):
    """|y - Q(o,a)| per transition, evaluation mode throughout."""
    nqb, _ = _eval_q_pi(nets, batch.next_images, batch.next_prev,
                        target=True)
    nq, npi = _eval_q_pi(nets, batch.next_images, batch.next_prev)
    v_next = (cfg.w * (npi * nqb).sum(axis=1)
              + (1.0 - cfg.w) * (npi * nq).sum(axis=1))
    y = batch.rewards + cfg.gamma * v_next * (1.0 - batch.dones)
    q, _ = _eval_q_pi(nets, batch.cur_images, batch.cur_prev)
    q_a = q[np.arange(len(batch)), batch.actions]
    return np.abs(y - q_a)


def dataset_td(nets, dataset, cfg, views=None, batch=256):
    """Uniform per-transition TD magnitudes over views (all by default)."""
    if views is None:
        views = dataset.views
    out = np.empty(len(views), dtype=np.float64)
    for lo in range(0, len(views), batch):
        chunk = views[lo:lo + batch]
        out[lo:lo + len(chunk)] = transition_td(assemble_inputs(chunk),
                                                nets, cfg)
    return out


def td_error_map(nets, dataset, cfg, batch=256):
    """Mean TD magnitude by tip cell. Returns (td_map, counts): cells no
    tip ever visited hold NaN in td_map and 0 in counts."""
    h, w = dataset.records[0].vessel.shape
    sums = np.zeros((h, w), dtype=np.float64)
    counts = np.zeros((h, w), dtype=np.int64)
    td = dataset_td(nets, dataset, cfg, batch=batch)
    for err, view in zip(td, dataset.views):
        r = min(max(int(view.tip[0]), 0), h - 1)
        c = min(max(int(view.tip[1]), 0), w - 1)
        sums[r, c] += err
        counts[r, c] += 1
    with np.errstate(invalid="ignore"):
        td_map = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return td_map, counts


def save_td_map_pgm(path, td_map):
    """Plain-text portable graymap of the error raster.

    Visited cells scale linearly to 1..255 over the observed range;
    unvisited cells are 0, so absence stays distinguishable from a low
    error."""
    mask = np.isfinite(td_map)
    img = np.zeros(td_map.shape, dtype=np.int64)
    if mask.any():
        vals = td_map[mask]
        lo, hi = float(vals.min()), float(vals.max())
        if hi > lo:
            img[mask] = 1 + np.round(254.0 * (td_map[mask] - lo)
                                     / (hi - lo)).astype(np.int64)
        else:
            img[mask] = 255
    h, w = td_map.shape
    with open(path, "w") as f:
        f.write(f"P2\n{w} {h}\n255\n")
        for row in img:
            f.write(" ".join(str(int(v)) for v in row) + "\n")


def near_junction_mask(td_map, junctions, radius=10.0):
    """Boolean raster of visited cells within radius px of any branch
    attachment point."""
    h, w = td_map.shape
    rr, cc = np.mgrid[0:h, 0:w]
    near = np.zeros((h, w), dtype=bool)
    for jr, jc in junctions:
        near |= (rr - jr) ** 2 + (cc - jc) ** 2 <= radius ** 2
    return near & np.isfinite(td_map)


def split_records(dataset, seed=0, ratio=0.8):
    """Episode-level split. Transitions within an episode correlate, so
    splitting by transition would leak; returns (train_idx, valid_idx)
    into dataset.records, both non-empty."""
    n = len(dataset.records)
    require(n >= 2, "need at least two episodes to split")
    order = np.random.default_rng(seed).permutation(n)
    cut = int(round(n * ratio))
    cut = min(max(cut, 1), n - 1)
    return sorted(order[:cut].tolist()), sorted(order[cut:].tolist())


@dataclass
class TdCurves:
    train: np.ndarray        # mean |td| per checkpoint
    valid: np.ndarray
    train_records: list      # record indices behind each split
    valid_records: list


def td_error_curves(nets_list, dataset, cfg, seed=0, batch=256):
    """Mean TD magnitude on an episode-level 4:1 split, one point per
    network snapshot."""
    train_idx, valid_idx = split_records(dataset, seed=seed)
    train_views = [v for i in train_idx for v in _record_views(dataset, i)]
    valid_views = [v for i in valid_idx for v in _record_views(dataset, i)]
    train = np.empty(len(nets_list))
    valid = np.empty(len(nets_list))
    for j, nets in enumerate(nets_list):
        train[j] = dataset_td(nets, dataset, cfg, train_views, batch).mean()
        valid[j] = dataset_td(nets, dataset, cfg, valid_views, batch).mean()
    return TdCurves(train=train, valid=valid, train_records=train_idx,
                    valid_records=valid_idx)


def _record_views(dataset, rec_idx):
    rec = dataset.records[rec_idx]
    return [v for v in dataset.views if v.record is rec]
