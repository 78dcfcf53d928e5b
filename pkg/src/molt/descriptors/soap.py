"""SOAP power spectrum with an orthonormalized Gaussian-type radial basis.

The neighbor density around a center is a sum of unnormalized Gaussians
``exp(-|x - r_j|^2 / (2 sigma^2))`` weighted by the cosine cutoff of each
neighbor distance. It is projected onto ``g_nl(r) Y_lm(x/|x|)`` over the ball
of radius ``r_cut``. The angular part of that projection is analytic (the
plane-wave-like expansion of a displaced Gaussian into modified spherical
Bessel functions); the remaining radial integral uses Gauss-Legendre nodes.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from ..nets.basis import cosine_cutoff

GTO_THRESHOLD = 1e-3


@dataclass(frozen=True)
class SoapParams:
    r_cut: float = 5.63
    n_max: int = 7
    l_max: int = 7
    sigma: float = 1.0
    species: tuple = (1, 6)

    def __post_init__(self):
        species = tuple(int(z) for z in self.species)
        if not self.r_cut > 0:
            raise ValueError(f"r_cut must be positive, got {self.r_cut}")
        if not 1 <= self.n_max <= 12:
            raise ValueError(f"n_max must be in 1..12, got {self.n_max}")
        if not 0 <= self.l_max <= 12:
            raise ValueError(f"l_max must be in 0..12, got {self.l_max}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not species or list(species) != sorted(set(species)):
            raise ValueError(f"species must be non-empty, sorted and unique, got {species}")
        object.__setattr__(self, "species", species)
        object.__setattr__(self, "r_cut", float(self.r_cut))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "n_max", int(self.n_max))
        object.__setattr__(self, "l_max", int(self.l_max))

    @property
    def n_features(self):
        return len(soap_column_labels(self))


def real_sph_harm(l_max, unit_vectors):
    """Real orthonormal spherical harmonics.

    Returns shape ``(len(unit_vectors), (l_max + 1)**2)`` with the block of
    degree ``l`` stored at ``l**2 : (l + 1)**2``, ordered ``m = -l .. l``.
    """
    u = np.atleast_2d(np.asarray(unit_vectors, dtype=np.float64))
    polar = np.arccos(np.clip(u[:, 2], -1.0, 1.0))
    azimuth = np.arctan2(u[:, 1], u[:, 0])
    out = np.empty((len(u), (l_max + 1) ** 2))
    for l in range(l_max + 1):
        base = l * l + l
        out[:, base] = special.sph_harm_y(l, 0, polar, azimuth).real
        for m in range(1, l + 1):
            y = special.sph_harm_y(l, m, polar, azimuth)
            sign = (-1.0) ** m * np.sqrt(2.0)
            out[:, base + m] = sign * y.real
            out[:, base - m] = sign * y.imag
    return out


def gto_alphas(params: SoapParams):
    """Decay exponents ``alpha[l, n]``; primitive n decays to 1e-3 at its anchor radius."""
    anchors = np.linspace(1.0, params.r_cut, params.n_max)
    ls = np.arange(params.l_max + 1)[:, None]
    return -np.log(GTO_THRESHOLD / anchors[None, :] ** ls) / anchors[None, :] ** 2


@lru_cache(maxsize=32)
def _gto_basis(r_cut, n_max, l_max):
    params = SoapParams(r_cut=r_cut, n_max=n_max, l_max=l_max, sigma=1.0, species=(1,))
    alphas = gto_alphas(params)
    betas = np.empty((l_max + 1, n_max, n_max))
    for l in range(l_max + 1):
        a = alphas[l][:, None] + alphas[l][None, :]
        s = l + 1.5
        # int_0^rc r^(2l+2) exp(-a r^2) dr
        overlap = 0.5 * special.gamma(s) * a ** (-s) * special.gammainc(s, a * r_cut**2)
        w, v = np.linalg.eigh(overlap)
        betas[l] = (v / np.sqrt(w)) @ v.T
    return alphas, betas


def radial_basis(params: SoapParams, r):
    """Orthonormal radial functions ``g[l, n, ...]`` evaluated at ``r``."""
    alphas, betas = _gto_basis(params.r_cut, params.n_max, params.l_max)
    r = np.asarray(r, dtype=np.float64)
    ls = np.arange(params.l_max + 1)
    prim = r[None, None, ...] ** ls.reshape(-1, 1, *([1] * r.ndim)) * np.exp(
        -alphas.reshape(*alphas.shape, *([1] * r.ndim)) * r[None, None, ...] ** 2
    )
    return np.einsum("lnk,lk...->ln...", betas, prim)


def _n_radial_nodes(params):
    return max(96, int(np.ceil(24.0 * params.r_cut / params.sigma)))


@lru_cache(maxsize=32)
def _radial_grid(r_cut, n_max, l_max, sigma):
    params = SoapParams(r_cut=r_cut, n_max=n_max, l_max=l_max, sigma=sigma, species=(1,))
    x, w = np.polynomial.legendre.leggauss(_n_radial_nodes(params))
    r = 0.5 * r_cut * (x + 1.0)
    w = 0.5 * r_cut * w
    g = radial_basis(params, r)  # (L, N, Q)
    return r, w * r**2, g


def _scaled_sph_bessel_i(l_max, x):
    """``i_l(x) * exp(-x)`` for ``x >= 0``, shape ``(l_max + 1,) + x.shape``."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros((l_max + 1,) + x.shape)
    pos = x > 0
    xp = x[pos]
    for l in range(l_max + 1):
        out[l][pos] = np.sqrt(np.pi / (2.0 * xp)) * special.ive(l + 0.5, xp)
    out[0][~pos] = 1.0
    return out


def _neighbor_coefficients(params, distances, unit_vectors, weights, species_index, n_species):
    """Expansion coefficients ``c[species, n, lm]`` of a weighted Gaussian density."""
    L = params.l_max + 1
    coeffs = np.zeros((n_species, params.n_max, L * L))
    r, wq, g = _radial_grid(params.r_cut, params.n_max, params.l_max, params.sigma)
    s2 = params.sigma**2
    d = np.asarray(distances, dtype=np.float64)
    if len(d) == 0:
        return coeffs
    # radial kernel for each neighbor and quadrature node
    gauss = np.exp(-((r[None, :] - d[:, None]) ** 2) / (2.0 * s2))  # (J, Q)
    bessel = _scaled_sph_bessel_i(params.l_max, d[:, None] * r[None, :] / s2)  # (L, J, Q)
    radial = np.einsum("jq,ljq,lnq,q->jln", gauss, bessel, g, wq)  # (J, L, N)
    ylm = np.zeros((len(d), L * L))
    on_center = d == 0
    if np.any(~on_center):
        ylm[~on_center] = real_sph_harm(params.l_max, unit_vectors[~on_center])
    ylm[on_center, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    ls = np.repeat(np.arange(L), 2 * np.arange(L) + 1)
    per_neighbor = 4.0 * np.pi * weights[:, None, None] * radial[:, ls, :].transpose(0, 2, 1) * ylm[:, None, :]
    np.add.at(coeffs, species_index, per_neighbor)
    return coeffs


def _check_species(mol, params):
    known = set(params.species)
    unknown = sorted({int(z) for z in mol.atomic_numbers} - known)
    if unknown:
        raise ValueError(f"species {unknown} not declared in SoapParams.species {list(params.species)}")


def soap_coefficients(mol, params: SoapParams, center_index: int):
    """Density expansion coefficients ``c[species, n, lm]`` around one atom."""
    _check_species(mol, params)
    n_atoms = len(mol)
    if not 0 <= center_index < n_atoms:
        raise IndexError(f"center index {center_index} out of range for {n_atoms} atoms")
    rel = mol.positions - mol.positions[center_index]
    dist = np.linalg.norm(rel, axis=1)
    mask = dist < params.r_cut
    mask[center_index] = True
    d = dist[mask]
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(d[:, None] > 0, rel[mask] / d[:, None], 0.0)
    weights = cosine_cutoff(d, params.r_cut)
    lookup = {z: i for i, z in enumerate(params.species)}
    sidx = np.array([lookup[int(z)] for z in mol.atomic_numbers[mask]], dtype=np.int64)
    return _neighbor_coefficients(params, d, unit, weights, sidx, len(params.species))


def _pair_blocks(params):
    S = len(params.species)
    for a in range(S):
        for b in range(a, S):
            for n in range(params.n_max):
                for k in range(n if a == b else 0, params.n_max):
                    yield a, b, n, k


def soap_column_labels(params: SoapParams) -> list:
    labels = []
    for a, b, n, k in _pair_blocks(params):
        za, zb = params.species[a], params.species[b]
        for l in range(params.l_max + 1):
            labels.append(f"soap_Z{za}_Z{zb}_n{n}_n{k}_l{l}")
    return labels


@lru_cache(maxsize=32)
def _power_index(params):
    a, b, n, k = (np.array(v, dtype=np.int64) for v in zip(*_pair_blocks(params)))
    return a, b, n, k


def power_spectrum(coeffs, params: SoapParams):
    """Flatten ``c[species, n, lm]`` into the rotation-invariant power spectrum."""
    L = params.l_max + 1
    a, b, n, k = _power_index(params)
    out = np.empty((len(a), L))
    for l in range(L):
        block = coeffs[:, :, l * l:(l + 1) * (l + 1)]
        full = np.einsum("anm,bkm->anbk", block, block)
        out[:, l] = np.pi * np.sqrt(8.0 / (2 * l + 1)) * full[a, n, b, k]
    return out.reshape(-1)


def soap_atomic(mol, params: SoapParams, center_index: int):
    return power_spectrum(soap_coefficients(mol, params, center_index), params)


def soap_molecular(mol, params: SoapParams):
    """Mean of the atomic power spectra over every atom of the molecule."""
    _check_species(mol, params)
    if len(mol) == 0:
        raise ValueError(f"molecule {mol.id!r} has no atoms")
    total = np.zeros(params.n_features)
    for i in range(len(mol)):
        total += soap_atomic(mol, params, i)
    return total / len(mol)
