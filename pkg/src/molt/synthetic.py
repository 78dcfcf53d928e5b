"""Synthetic molecules with analytic labels for desk-scale experiments."""
from pathlib import Path

import numpy as np

from .chemdata import LabeledDataset, Molecule, write_labels_csv, write_xyz
from .nets.basis import cosine_cutoff

ELEMENTS = (1, 6, 7, 8)
SITE_ENERGY = {1: -0.5, 6: 0.3, 7: 0.8, 8: 1.2}
PAIR_CUT = 4.0


def _pair_strength(za, zb):
    return 0.15 * np.sqrt(za * zb) / (1.0 + 0.1 * abs(za - zb))


def random_molecule(rng, mol_id, n_atoms=(4, 8), elements=ELEMENTS, min_dist=0.95):
    """Tree-like cluster: each atom is placed 1.0-1.6 A from a random earlier atom."""
    n = int(rng.integers(n_atoms[0], n_atoms[1] + 1))
    z = [int(rng.choice(elements[1:]))]
    pos = [np.zeros(3)]
    while len(pos) < n:
        anchor = pos[int(rng.integers(len(pos)))]
        step = rng.normal(size=3)
        cand = anchor + step / np.linalg.norm(step) * rng.uniform(1.0, 1.6)
        if min(np.linalg.norm(cand - p) for p in pos) < min_dist:
            continue
        pos.append(cand)
        z.append(int(rng.choice(elements)))
    return Molecule(mol_id, z, np.array(pos))


def target_function(mol):
    """Per-atom mean of site energies plus smooth distance-dependent pair terms."""
    z = mol.atomic_numbers
    d = np.linalg.norm(mol.positions[:, None] - mol.positions[None], axis=-1)
    total = sum(SITE_ENERGY.get(int(zi), 0.0) for zi in z)
    for i in range(len(z)):
        for j in range(len(z)):
            if i != j:
                w = np.exp(-((d[i, j] - 1.3) ** 2) / 0.5) * cosine_cutoff(d[i, j], PAIR_CUT)
                total += _pair_strength(z[i], z[j]) * w
    return float(total / len(z))


def make_dataset(n, seed, prefix="mol", unit="dimensionless", **kwargs):
    rng = np.random.default_rng([int(seed), 0x5EED])
    mols = [random_molecule(rng, f"{prefix}{i:05d}", **kwargs) for i in range(n)]
    return LabeledDataset(tuple(mols), [target_function(m) for m in mols], unit)


def make_transfer_fixture(seed=0, n_pretrain=512, n_finetune=32, slope=1.7, intercept=-0.4, noise_frac=0.05):
    """Cheap labels ``f`` for pre-training; ``slope * f + intercept + noise`` for fine-tuning.

    The noise standard deviation is ``noise_frac * std(f)`` over the
    fine-tuning structures.
    """
    pre = make_dataset(n_pretrain, seed, prefix="pre")
    fine = make_dataset(n_finetune, seed + 1000, prefix="fine")
    rng = np.random.default_rng([int(seed), 0xF17E])
    f = fine.labels
    noise = rng.normal(scale=noise_frac * f.std(), size=len(f))
    return pre, fine.with_labels(slope * f + intercept + noise)


def write_dataset(ds: LabeledDataset, directory, labels_name="labels.csv"):
    """Write ``<id>.xyz`` files under ``directory/structures`` plus an id,label CSV."""
    directory = Path(directory)
    sdir = directory / "structures"
    sdir.mkdir(parents=True, exist_ok=True)
    for m in ds.molecules:
        (sdir / f"{m.id}.xyz").write_text(write_xyz(m), encoding="utf-8")
    write_labels_csv(directory / labels_name, ds.ids, ds.labels)
    return sdir, directory / labels_name
