"""Independent oracles shared by unit and acceptance tests."""

import numpy as np

from noise_eval.nn import Arch, NetworkConfig, forward, init_network, loss_and_grad

FD_STEP = 1e-5
# absolute floor so parameters with (near) zero gradient compare on absolute error
FD_FLOOR = 1e-6


def numeric_grads(net, clean, noised, targets, step=FD_STEP):
    """Central finite differences of the loss, one parameter element at a time."""
    grads = []
    for p in net.params:
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for j in range(flat.size):
            old = flat[j]
            flat[j] = old + step
            up, _ = loss_and_grad(net, clean, noised, targets)
            flat[j] = old - step
            down, _ = loss_and_grad(net, clean, noised, targets)
            flat[j] = old
            gflat[j] = (up - down) / (2 * step)
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric, floor=FD_FLOOR):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


# finite differences only approximate the gradient where no ReLU input lies
# within reach of the step; draws closer than this to a kink are rejected
KINK_MARGIN = 1e-3


def kink_distance(net, clean, noised):
    """Smallest |ReLU input| over a forward pass of all rows."""
    _, trace = forward(net, np.concatenate([clean, *noised]))
    relu_inputs = trace.block_sum + (trace.pre[:-1] if net.config.arch is Arch.MLP else
                                      [trace.pre[0]] + trace.pre[1:-1:2])
    return min((float(np.min(np.abs(z))) for z in relu_inputs), default=np.inf)


def random_problem(gen, max_d=8, max_b=4, n_copies=None):
    """A random float64 network plus clean/noised/target batches."""
    d = int(gen.integers(1, max_d + 1))
    b = int(gen.integers(1, max_b + 1))
    arch = Arch.MLP if gen.random() < 0.5 else Arch.RESMLP
    depth = int(gen.integers(1, 5 if arch is Arch.MLP else 4))
    cfg = NetworkConfig(
        input_dim=d,
        arch=arch,
        hidden_dim=int(gen.integers(2, 17)),
        depth=depth,
        seed=int(gen.integers(0, 2**31)),
        dtype="float64",
    )
    net = init_network(cfg)
    k = int(gen.integers(1, 4)) if n_copies is None else n_copies
    clean = gen.standard_normal((b, d))
    noised = [clean + gen.standard_normal((b, d)) for _ in range(k)]
    targets = [np.abs(x - clean) for x in noised]
    return net, clean, noised, targets


def brute_force_auc(scores, labels):
    """P(anomaly scores above normal) + half P(tie), over all pairs."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    pos, neg = s[y], s[~y]
    wins = 0.0
    for a in pos:
        wins += np.sum(a > neg) + 0.5 * np.sum(a == neg)
    return wins / (pos.size * neg.size)


def r_squared(x, t):
    """Coefficient of determination of the least-squares line t ~ a + c x."""
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, t, rcond=None)
    resid = t - A @ coef
    return 1.0 - float(resid @ resid) / float(((t - t.mean()) ** 2).sum())


def gaussian_loss_floor(d, sigma_max, m, ratios, n=200_000, seed=0):
    """Lower bound on the expected per-row training loss for N(0, 1) features.

    A predictor that is also told which copy a row is, which features were
    noised and their levels can do no worse than one that only sees the row.
    Given all that, eps | x_hat is Gaussian, so its best squared error for
    |eps| is Var(|eps| | x_hat, sigma), which has a closed form.
    """
    from scipy.stats import norm

    gen = np.random.default_rng(seed)
    sizes = np.full(m, d // m)
    sizes[: d % m] += 1
    part = gen.choice(m, size=n, p=sizes / d)
    s = gen.uniform(part * sigma_max / m, (part + 1) * sigma_max / m)
    x_hat = gen.standard_normal(n) + gen.standard_normal(n) * s
    mu = s**2 * x_hat / (1 + s**2)
    sd = np.sqrt(s**2 / (1 + s**2))
    r = np.divide(mu, sd, out=np.zeros_like(mu), where=sd > 0)
    mean_abs = sd * np.sqrt(2 / np.pi) * np.exp(-(r**2) / 2) + mu * (1 - 2 * norm.cdf(-r))
    var = np.maximum(mu**2 + sd**2 - mean_abs**2, 0.0)
    kept = sum(max(1, int(np.floor(q * d + 0.5))) for q in ratios)
    return kept * float(var.mean()) / (len(ratios) + 1)
