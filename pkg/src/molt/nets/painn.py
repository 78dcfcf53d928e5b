"""Polarizable atom interaction network (PaiNN) on the autodiff engine.

Each atom carries scalar features ``s`` (N, F) and vector features ``v``
(N, 3, F). Interaction blocks pass rotation-equivariant messages along
directed edges inside the cutoff; update blocks mix vector channels and
exchange information between the scalar and vector parts. A per-atom MLP
reads the final scalars and the results are summed or averaged per molecule.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from ..autodiff import (
    Tensor,
    add,
    concat,
    dot,
    index_select,
    l2_norm,
    linear,
    make_rng,
    matmul,
    mul,
    reshape,
    scatter_add,
    split,
    swish,
)
from .base import Network, uniform_fan_in
from .basis import cosine_cutoff, gaussian_rbf

NORM_EPS = 1e-8


@dataclass(frozen=True)
class PainnConfig:
    r_cut: float = 5.0
    n_rbf: int = 20
    n_atom_basis: int = 30
    n_interactions: int = 3
    cutoff_fn: str = "cosine"
    readout: str = "mean"
    elements: tuple = (1, 6, 7, 8, 16)

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(sorted({int(z) for z in self.elements})))
        if self.r_cut <= 0 or self.n_rbf < 1 or self.n_atom_basis < 1 or self.n_interactions < 1:
            raise ValueError("r_cut, n_rbf, n_atom_basis and n_interactions must be positive")
        if self.cutoff_fn != "cosine":
            raise ValueError(f"unsupported cutoff_fn {self.cutoff_fn!r}")
        if self.readout not in ("sum", "mean"):
            raise ValueError(f"readout must be 'sum' or 'mean', got {self.readout!r}")
        if not self.elements:
            raise ValueError("elements must be non-empty")

    @property
    def readout_hidden(self):
        return max(1, self.n_atom_basis // 2)


@dataclass
class MolecularGraph:
    """Geometry-derived constants for one molecule (directed edges i <- j)."""

    species: np.ndarray
    edge_i: np.ndarray
    edge_j: np.ndarray
    rbf: np.ndarray
    fcut: np.ndarray
    direction: np.ndarray

    @property
    def n_atoms(self):
        return len(self.species)


def build_graph(mol, config: PainnConfig):
    lookup = {z: k for k, z in enumerate(config.elements)}
    try:
        species = np.array([lookup[int(z)] for z in mol.atomic_numbers], dtype=np.int64)
    except KeyError as err:
        raise ValueError(f"element Z={err.args[0]} has no embedding row (known: {list(config.elements)})") from None
    pos = mol.positions
    diff = pos[None, :, :] - pos[:, None, :]
    dist = np.linalg.norm(diff, axis=-1)
    ii, jj = np.nonzero((dist < config.r_cut) & ~np.eye(len(pos), dtype=bool))
    d = dist[ii, jj]
    return MolecularGraph(
        species=species,
        edge_i=ii.astype(np.int64),
        edge_j=jj.astype(np.int64),
        rbf=gaussian_rbf(d, config.n_rbf, config.r_cut),
        fcut=cosine_cutoff(d, config.r_cut),
        direction=diff[ii, jj] / d[:, None] if len(d) else np.zeros((0, 3)),
    )


@dataclass
class GraphBatch:
    species: np.ndarray
    edge_i: np.ndarray
    edge_j: np.ndarray
    rbf: np.ndarray
    fcut: np.ndarray
    direction: np.ndarray
    molecule_index: np.ndarray
    n_molecules: int
    atom_counts: np.ndarray = field(default=None)


def collate(graphs):
    offsets = np.cumsum([0] + [g.n_atoms for g in graphs])
    return GraphBatch(
        species=np.concatenate([g.species for g in graphs]),
        edge_i=np.concatenate([g.edge_i + o for g, o in zip(graphs, offsets)]),
        edge_j=np.concatenate([g.edge_j + o for g, o in zip(graphs, offsets)]),
        rbf=np.concatenate([g.rbf for g in graphs]),
        fcut=np.concatenate([g.fcut for g in graphs]),
        direction=np.concatenate([g.direction for g in graphs]),
        molecule_index=np.repeat(np.arange(len(graphs)), [g.n_atoms for g in graphs]),
        n_molecules=len(graphs),
        atom_counts=np.array([g.n_atoms for g in graphs], dtype=np.float64),
    )


class PaiNN(Network):
    kind = "painn"

    def __init__(self, config: PainnConfig, seed=0):
        super().__init__()
        self.config = config
        F = config.n_atom_basis
        rng = make_rng(seed, "init")
        self._add("embedding.weight", rng.standard_normal((len(config.elements), F)) / np.sqrt(F))
        for i in range(config.n_interactions):
            pre = f"interactions.{i}"
            self._add(f"{pre}.filter.weight", uniform_fan_in(rng, config.n_rbf, 3 * F))
            self._add(f"{pre}.filter.bias", np.zeros(3 * F))
            self._add(f"{pre}.context.0.weight", uniform_fan_in(rng, F, F))
            self._add(f"{pre}.context.0.bias", np.zeros(F))
            self._add(f"{pre}.context.1.weight", uniform_fan_in(rng, F, 3 * F))
            self._add(f"{pre}.context.1.bias", np.zeros(3 * F))
            pre = f"updates.{i}"
            self._add(f"{pre}.mix.weight", uniform_fan_in(rng, F, 2 * F))
            self._add(f"{pre}.context.0.weight", uniform_fan_in(rng, 2 * F, F))
            self._add(f"{pre}.context.0.bias", np.zeros(F))
            self._add(f"{pre}.context.1.weight", uniform_fan_in(rng, F, 3 * F))
            self._add(f"{pre}.context.1.bias", np.zeros(3 * F))
        H = config.readout_hidden
        self._add("readout.0.weight", uniform_fan_in(rng, F, H))
        self._add("readout.0.bias", np.zeros(H))
        self._add("readout.1.weight", uniform_fan_in(rng, H, 1))
        self._add("readout.1.bias", np.zeros(1))

    def config_dict(self):
        out = asdict(self.config)
        out["elements"] = list(self.config.elements)
        return out

    def layer_groups(self):
        """Embedding joins the first block; one group per block, readout last."""
        groups = []
        for i in range(self.config.n_interactions):
            names = [n for n in self.params
                     if n.startswith(f"interactions.{i}.") or n.startswith(f"updates.{i}.")]
            if i == 0:
                names = ["embedding.weight"] + names
            groups.append((f"block.{i}", names))
        groups.append(("readout", [n for n in self.params if n.startswith("readout.")]))
        return groups

    def prepare(self, inputs):
        return [build_graph(m, self.config) for m in inputs]

    def _dense2(self, x, prefix):
        p = self.params
        h = swish(linear(x, p[f"{prefix}.0.weight"], p[f"{prefix}.0.bias"]))
        return linear(h, p[f"{prefix}.1.weight"], p[f"{prefix}.1.bias"])

    def represent(self, batch: GraphBatch):
        """Final ``(s, v)`` node features for a collated batch."""
        F = self.config.n_atom_basis
        p = self.params
        n = len(batch.species)
        n_edges = len(batch.edge_i)
        s = index_select(p["embedding.weight"], batch.species)
        v = Tensor(np.zeros((n, 3, F)))
        direction = batch.direction.reshape(n_edges, 3, 1)
        for i in range(self.config.n_interactions):
            # message
            pre = f"interactions.{i}"
            x = self._dense2(s, f"{pre}.context")
            filt = mul(linear(batch.rbf, p[f"{pre}.filter.weight"], p[f"{pre}.filter.bias"]),
                       batch.fcut[:, None])
            xj = mul(index_select(x, batch.edge_j), filt)
            ds, dv_dir, dv_vec = split(xj, [F, F, F], axis=-1)
            dv = add(mul(reshape(dv_dir, (n_edges, 1, F)), direction),
                     mul(reshape(dv_vec, (n_edges, 1, F)), index_select(v, batch.edge_j)))
            s = add(s, scatter_add(ds, batch.edge_i, n))
            v = add(v, scatter_add(dv, batch.edge_i, n))
            # update
            pre = f"updates.{i}"
            mixed = matmul(v, p[f"{pre}.mix.weight"])
            v_v, v_u = split(mixed, [F, F], axis=-1)
            ctx = concat([s, l2_norm(v_v, axis=1, eps=NORM_EPS)], axis=-1)
            a_vv, a_sv, a_ss = split(self._dense2(ctx, f"{pre}.context"), [F, F, F], axis=-1)
            v = add(v, mul(reshape(a_vv, (n, 1, F)), v_u))
            s = add(s, add(a_ss, mul(a_sv, dot(v_u, v_v, axis=1))))
        return s, v

    def forward_batch(self, batch: GraphBatch):
        s, _ = self.represent(batch)
        atomic = reshape(self._dense2(s, "readout"), (len(batch.species),))
        total = scatter_add(atomic, batch.molecule_index, batch.n_molecules)
        if self.config.readout == "mean":
            total = mul(total, 1.0 / batch.atom_counts)
        return total

    def forward(self, prepared, indices, training=False, rng=None):
        return self.forward_batch(collate([prepared[i] for i in indices]))


def painn_forward(mol, config, params, return_state=False):
    """Scalar prediction (normalized-label units) for one molecule."""
    net = PaiNN(config)
    net.load_state_dict(params)
    batch = collate([build_graph(mol, config)])
    if return_state:
        s, v = net.represent(batch)
        return net.forward_batch(batch).data[0], s.data, v.data
    return net.forward_batch(batch).data[0]
