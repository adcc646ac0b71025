"""Random problem instances shared by several test modules."""
import numpy as np

from stccal.manifold import make_metric, random_point
from stccal.ssn import SubproblemSpec


def random_spec(rng, d=None, r=None, lam=None, t=None) -> SubproblemSpec:
    d = d or int(rng.integers(2, 11))
    r = r or int(rng.integers(1, min(4, d) + 1))
    x = rng.standard_normal((d, int(rng.integers(d + 2, 3 * d + 5))))
    x -= x.mean(axis=1, keepdims=True)
    met = make_metric(x / np.sqrt(x.shape[1]))
    h = random_point(d, r, met, seed=int(rng.integers(1 << 31)))
    grad = rng.standard_normal((d, r))
    lam = float(rng.uniform(0.05, 2.0)) if lam is None else lam
    t = float(rng.uniform(0.05, 1.0)) if t is None else t
    return SubproblemSpec(h, grad, met, t, lam)
