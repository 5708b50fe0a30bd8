"""Random instance generators shared by the test modules."""
import numpy as np


def random_spd(rng, d=2, lo=0.1, hi=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    ev = np.exp(rng.uniform(np.log(lo), np.log(hi), d))
    return (Q * ev) @ Q.T


def random_instance(rng):
    Ai, Aj = random_spd(rng), random_spd(rng)
    lam = random_spd(rng, lo=0.2, hi=2.0)
    w = rng.standard_normal(2)
    return Ai, Aj, lam, w
