"""Independent NumPy reference implementations used to freeze expected values."""

import numpy as np


def naive_eval(dist, q_pid, q_cam, g_pid, g_cam, ranks, junk=-1):
    """Single-query cross-camera mAP / CMC, written directly from the definitions."""
    aps, firsts = [], []
    for i in range(dist.shape[0]):
        entries = []
        for j in range(dist.shape[1]):
            if g_pid[j] == q_pid[i] and g_cam[j] == q_cam[i] and g_pid[j] != junk:
                continue
            entries.append((dist[i, j], j, g_pid[j] == q_pid[i] and q_pid[i] != junk))
        entries.sort(key=lambda e: (e[0], e[1]))
        hits, precisions, first = 0, [], None
        for pos, (_, _, rel) in enumerate(entries, start=1):
            if rel:
                hits += 1
                precisions.append(hits / pos)
                if first is None:
                    first = pos
        if hits:
            aps.append(sum(precisions) / hits)
            firsts.append(first)
    n = len(aps)
    return {
        "map": sum(aps) / n,
        "cmc": {str(r): sum(1 for f in firsts if f <= r) / n for r in ranks},
        "num_valid_queries": n,
    }


def euclidean(a, b):
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))


def k_reciprocal(q_g, q_q, g_g, k1=20, k2=6, lambda_value=0.3):
    """Port of the published k-reciprocal re-ranking reference code, float64."""
    original = np.concatenate(
        [np.concatenate([q_q, q_g], axis=1), np.concatenate([q_g.T, g_g], axis=1)], axis=0)
    original = np.power(original, 2)
    original = np.transpose(original / np.max(original, axis=0))
    V = np.zeros_like(original)
    initial_rank = np.argsort(original, kind="stable").astype(np.int64)
    query_num = q_g.shape[0]
    all_num = original.shape[0]
    for i in range(all_num):
        forward = initial_rank[i, :k1 + 1]
        backward = initial_rank[forward, :k1 + 1]
        fi = np.where(backward == i)[0]
        k_recip = forward[fi]
        expansion = k_recip
        for cand in k_recip:
            half = int(np.around(k1 / 2.0))
            cf = initial_rank[cand, :half + 1]
            cb = initial_rank[cf, :half + 1]
            cand_recip = cf[np.where(cb == cand)[0]]
            if len(np.intersect1d(cand_recip, k_recip)) > 2.0 / 3 * len(cand_recip):
                expansion = np.append(expansion, cand_recip)
        expansion = np.unique(expansion)
        weight = np.exp(-original[i, expansion])
        V[i, expansion] = weight / np.sum(weight)
    original = original[:query_num, ]
    if k2 != 1:
        V_qe = np.zeros_like(V)
        for i in range(all_num):
            V_qe[i, :] = np.mean(V[initial_rank[i, :k2], :], axis=0)
        V = V_qe
    inv_index = [np.where(V[:, i] != 0)[0] for i in range(all_num)]
    jaccard = np.zeros_like(original)
    for i in range(query_num):
        temp_min = np.zeros(all_num)
        nz = np.where(V[i, :] != 0)[0]
        for j in nz:
            temp_min[inv_index[j]] += np.minimum(V[i, j], V[inv_index[j], j])
        jaccard[i] = 1 - temp_min / (2.0 - temp_min)
    final = jaccard * (1 - lambda_value) + original * lambda_value
    return final[:query_num, query_num:]


def ecn(q_g, q_q, g_g, t=4, mode="rank-dist"):
    """Expanded cross neighborhood over t immediate neighbors (self excluded)."""
    full = np.concatenate(
        [np.concatenate([q_q, q_g], axis=1), np.concatenate([q_g.T, g_g], axis=1)], axis=0)
    n = full.shape[0]
    order = []
    for a in range(n):
        keys = sorted(range(n), key=lambda b: (b != a, full[a, b], b))
        order.append(keys)
    if mode == "rank-dist":
        pos = np.zeros((n, n))
        for a in range(n):
            for p, b in enumerate(order[a]):
                pos[a, b] = p
        d = 0.5 * (pos + pos.T)
    else:
        d = full
    q = q_g.shape[0]
    out = np.zeros(q_g.shape)
    for p in range(q):
        for g in range(q, n):
            s = sum(d[order[p][i], g] for i in range(1, t + 1))
            s += sum(d[order[g][i], p] for i in range(1, t + 1))
            out[p, g - q] = s / (2 * t)
    return out
