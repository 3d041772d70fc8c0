"""Independent reference implementations used as test oracles.

These are deliberately written as straight-line scalar loops over plain
numpy arrays, sharing no code with the library's vectorized paths.
"""

import numpy as np


def scalar_loop_attention(q_in, kv_in, wq, bq, wk, bk, wv, bv, wo, bo, num_heads):
    """Multi-head attention evaluated with explicit loops.

    q_in: [B, Lq, D]; kv_in: [B, Lk, D]; projection weights [D, D]
    stored [out, in]; biases [D]. Returns [B, Lq, D].
    """
    batch, lq, d = q_in.shape
    lk = kv_in.shape[1]
    hd = d // num_heads
    out = np.zeros((batch, lq, d))
    for b in range(batch):
        q = np.array([[sum(wq[o][i] * q_in[b][t][i] for i in range(d)) + bq[o]
                       for o in range(d)] for t in range(lq)])
        k = np.array([[sum(wk[o][i] * kv_in[b][t][i] for i in range(d)) + bk[o]
                       for o in range(d)] for t in range(lk)])
        v = np.array([[sum(wv[o][i] * kv_in[b][t][i] for i in range(d)) + bv[o]
                       for o in range(d)] for t in range(lk)])
        merged = np.zeros((lq, d))
        for h in range(num_heads):
            lo, hi = h * hd, (h + 1) * hd
            for t in range(lq):
                scores = np.array([
                    sum(q[t][c] * k[s][c] for c in range(lo, hi)) / np.sqrt(hd)
                    for s in range(lk)
                ])
                e = np.exp(scores - scores.max())
                w = e / e.sum()
                for c in range(lo, hi):
                    merged[t][c] = sum(w[s] * v[s][c] for s in range(lk))
        for t in range(lq):
            for o in range(d):
                out[b][t][o] = sum(wo[o][i] * merged[t][i] for i in range(d)) + bo[o]
    return out


def brute_force_soft_argmax(heatmap):
    """Expectation of grid coordinates under softmax(heatmap), cell centers.

    heatmap: [h, h]; returns (x, y) in [0,1]^2.
    """
    h = heatmap.shape[0]
    e = np.exp(heatmap - heatmap.max())
    p = e / e.sum()
    x = 0.0
    y = 0.0
    for i in range(h):
        for j in range(h):
            x += p[i, j] * (j + 0.5) / h
            y += p[i, j] * (i + 0.5) / h
    return x, y


def random_rotation(rng):
    """Uniform-ish random rotation via QR of a Gaussian matrix."""
    m = rng.normal(size=(3, 3))
    q, r = np.linalg.qr(m)
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def axis_angle_from_rotations(r1, r2):
    """Rotation angle between r1 and r2 recovered from the axis-angle form."""
    rel = r1.T @ r2
    # angle from the skew-symmetric part: |axis*sin(theta)| and trace
    w = np.array([rel[2, 1] - rel[1, 2], rel[0, 2] - rel[2, 0], rel[1, 0] - rel[0, 1]])
    sin_theta = np.linalg.norm(w) / 2.0
    cos_theta = (np.trace(rel) - 1.0) / 2.0
    return np.arctan2(sin_theta, cos_theta)
