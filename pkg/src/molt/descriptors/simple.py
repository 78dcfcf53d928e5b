"""Composition and carbon-backbone descriptors concatenated to SOAP for boosting."""
import numpy as np

from ..chemdata import element_symbol

CARBON = 6


def simple_descriptor_labels(species_universe):
    labels = ["n_atoms"]
    labels += [f"count_{element_symbol(z)}" for z in species_universe]
    labels += [f"has_{element_symbol(z)}" for z in species_universe]
    labels += ["cc_mean", "cc_std"]
    return labels


def carbon_neighbor_distances(mol, cc_bond_cut=1.8):
    pos = mol.positions[mol.atomic_numbers == CARBON]
    if len(pos) < 2:
        return np.empty(0)
    i, j = np.triu_indices(len(pos), k=1)
    d = np.linalg.norm(pos[i] - pos[j], axis=1)
    return d[d < cc_bond_cut]


def simple_descriptors(mol, species_universe, cc_bond_cut=1.8):
    """``[n_atoms, counts..., presence..., cc_mean, cc_std]``.

    Species outside the universe still count toward ``n_atoms``. Molecules
    without a bonded C-C pair get ``(0, 0)`` for the distance statistics.
    """
    z = mol.atomic_numbers
    counts = np.array([np.count_nonzero(z == s) for s in species_universe], dtype=np.float64)
    cc = carbon_neighbor_distances(mol, cc_bond_cut)
    stats = [cc.mean(), cc.std()] if len(cc) else [0.0, 0.0]
    return np.concatenate([[float(len(z))], counts, (counts > 0).astype(np.float64), stats])
