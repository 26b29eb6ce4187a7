"""Reference implementations written with plain loops, independent of src/."""
import numpy as np


def finite_difference(f, x, eps=1e-5):
    """Central-difference gradient of a scalar function of one array."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + eps
        plus = f(x)
        x[idx] = orig - eps
        minus = f(x)
        x[idx] = orig
        grad[idx] = (plus - minus) / (2 * eps)
    return grad


def relative_error(value, reference):
    """Largest elementwise |value - reference| / max(1, |reference|)."""
    value, reference = np.asarray(value, dtype=np.float64), np.asarray(reference, dtype=np.float64)
    return float(np.max(np.abs(value - reference) / np.maximum(1.0, np.abs(reference))))


def conv2d_loop(x, w, b=None, stride=1, padding=0):
    batch, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    xp = np.zeros((batch, cin, h + 2 * padding, wd + 2 * padding))
    xp[:, :, padding:padding + h, padding:padding + wd] = x
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (wd + 2 * padding - kw) // stride + 1
    out = np.zeros((batch, cout, ho, wo))
    for n in range(batch):
        for o in range(cout):
            for i in range(ho):
                for j in range(wo):
                    total = 0.0 if b is None else b[o]
                    for c in range(cin):
                        for u in range(kh):
                            for v in range(kw):
                                total += xp[n, c, i * stride + u, j * stride + v] * w[o, c, u, v]
                    out[n, o, i, j] = total
    return out


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def channel_attention_loop(F, w0, b0, w1, b1):
    """(F', M_c) with one shared perceptron on the average and max pooled vectors."""
    batch, channels, h, w = F.shape
    gates = np.zeros((batch, channels))
    for n in range(batch):
        avg = np.array([F[n, c].sum() / (h * w) for c in range(channels)])
        mx = np.array([F[n, c].max() for c in range(channels)])
        branches = []
        for pooled in (avg, mx):
            hidden = np.array([max(0.0, sum(w0[k, c] * pooled[c] for c in range(channels)) + b0[k])
                               for k in range(len(b0))])
            branches.append(np.array([sum(w1[c, k] * hidden[k] for k in range(len(b0))) + b1[c]
                                      for c in range(channels)]))
        gates[n] = sigmoid(branches[0] + branches[1])
    return F * gates[:, :, None, None], gates


def spatial_attention_loop(F, kernel, bias):
    """(F'', M_s) with a 7x7 convolution over (channel mean, channel max), zero padding 3."""
    batch, channels, h, w = F.shape
    planes = np.stack([F.mean(axis=1), F.max(axis=1)], axis=1)
    gates = np.zeros((batch, h, w))
    for n in range(batch):
        for i in range(h):
            for j in range(w):
                total = bias[0]
                for p in range(2):
                    for u in range(7):
                        for v in range(7):
                            ii, jj = i + u - 3, j + v - 3
                            if 0 <= ii < h and 0 <= jj < w:
                                total += kernel[0, p, u, v] * planes[n, p, ii, jj]
                gates[n, i, j] = sigmoid(total)
    return F * gates[:, None], gates


def lw_rmse_loop(X, Xhat, lat_deg):
    """Per-variable latitude-weighted RMSE with explicit loops over every cell."""
    batch, channels, h, w = X.shape
    cosines = [np.cos(np.deg2rad(lat)) if abs(abs(lat) - 90.0) > 1e-12 else 0.0 for lat in lat_deg]
    mean_cos = sum(cosines) / h
    weights = [c / mean_cos for c in cosines]
    out = np.zeros(channels)
    for c in range(channels):
        total = 0.0
        for n in range(batch):
            for i in range(h):
                for j in range(w):
                    total += weights[i] * (X[n, c, i, j] - Xhat[n, c, i, j]) ** 2
        out[c] = np.sqrt(total / (batch * h * w))
    return out


def stable_delayed_operator(n, d, radius, rng):
    """Random L = [A_1 ... A_d] whose companion matrix has the given spectral radius."""
    L = rng.normal(size=(n, n * d)) / np.sqrt(n * d)
    companion = np.zeros((n * d, n * d))
    companion[:n] = L
    companion[n:, : n * (d - 1)] = np.eye(n * (d - 1))
    current = np.max(np.abs(np.linalg.eigvals(companion)))
    scale = radius / current
    for block in range(d):
        L[:, block * n:(block + 1) * n] *= scale ** (block + 1)
    return L


def simulate_delayed(L, d, initial, steps):
    """z_{k+1} = Σ_b A_b z_{k-b}; ``initial`` holds d states, oldest first."""
    n = L.shape[0]
    states = [np.array(s, dtype=np.float64) for s in initial]
    for _ in range(steps):
        nxt = np.zeros(n)
        for b in range(d):
            nxt += L[:, b * n:(b + 1) * n] @ states[-1 - b]
        states.append(nxt)
    return np.array(states)


def normal_equations(z_td, z_future, ridge=0.0):
    gram = z_td @ z_td.T + ridge * np.eye(z_td.shape[0])
    return np.linalg.solve(gram, z_td @ z_future.T).T
