"""Radial expansions and smooth cutoffs shared by PaiNN and SOAP."""
import numpy as np


def cosine_cutoff(r, r_cut):
    """0.5 * (cos(pi r / r_cut) + 1) inside the cutoff, 0 outside."""
    r = np.asarray(r, dtype=np.float64)
    out = 0.5 * (np.cos(np.pi * r / r_cut) + 1.0)
    return np.where(r < r_cut, out, 0.0)


def rbf_centers(n_rbf, r_cut):
    return np.linspace(0.0, r_cut, n_rbf)


def gaussian_rbf(r, n_rbf, r_cut):
    """Gaussians with centers evenly spaced on [0, r_cut].

    The width follows from the center spacing, gamma = 1 / (2 * spacing**2).
    Returns shape ``r.shape + (n_rbf,)``.
    """
    r = np.asarray(r, dtype=np.float64)
    mu = rbf_centers(n_rbf, r_cut)
    spacing = mu[1] - mu[0] if n_rbf > 1 else r_cut
    gamma = 1.0 / (2.0 * spacing**2)
    return np.exp(-gamma * (r[..., None] - mu) ** 2)
