import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import lebedev_rule
from sklearn.base import clone

from conftest import methane, thiophene, transform, water
from molt.chemdata import Molecule
from molt.descriptors import (
    DescriptorMatrix,
    PCACompressor,
    SimpleDescriptorFeaturizer,
    SoapFeaturizer,
    SoapParams,
    pca_fit,
    pca_inverse_transform,
    pca_transform,
    real_sph_harm,
    simple_descriptors,
    soap_atomic,
    soap_coefficients,
    soap_column_labels,
    soap_molecular,
    soap_sd_union,
)
from molt.descriptors.soap import radial_basis
from molt.nets.basis import cosine_cutoff

SMALL = SoapParams(r_cut=4.0, n_max=4, l_max=4, sigma=0.8, species=(1, 6, 8, 16))


# --- SOAP ---------------------------------------------------------------

def test_soap_params_invariants():
    for bad in (dict(r_cut=0), dict(n_max=0), dict(n_max=13), dict(l_max=-1), dict(l_max=13),
                dict(sigma=0), dict(species=()), dict(species=(6, 1)), dict(species=(1, 1))):
        with pytest.raises(ValueError):
            SoapParams(**{**dict(r_cut=5.0, n_max=3, l_max=3, sigma=1.0, species=(1, 6)), **bad})


def test_default_params():
    p = SoapParams()
    assert (p.r_cut, p.n_max, p.l_max, p.sigma) == (5.63, 7, 7, 1.0)


def test_real_sph_harm_orthonormal():
    x, w = lebedev_rule(35)
    Y = real_sph_harm(6, x.T)
    gram = (Y * w[:, None]).T @ Y
    np.testing.assert_allclose(gram, np.eye(49), atol=1e-12)


def test_radial_basis_orthonormal_on_ball():
    x, w = np.polynomial.legendre.leggauss(400)
    r = 0.5 * SMALL.r_cut * (x + 1)
    w = 0.5 * SMALL.r_cut * w
    g = radial_basis(SMALL, r)
    gram = np.einsum("lnq,lkq,q->lnk", g, g, w * r**2)
    np.testing.assert_allclose(gram, np.broadcast_to(np.eye(SMALL.n_max), gram.shape), atol=1e-10)


def _quadrature_coefficients(mol, params, center):
    """Brute-force projection of the smeared density on a radial x Lebedev grid."""
    xg, wg = lebedev_rule(131)
    rq, wr = np.polynomial.legendre.leggauss(300)
    r = 0.5 * params.r_cut * (rq + 1)
    wr = 0.5 * params.r_cut * wr
    g = radial_basis(params, r)
    Y = real_sph_harm(params.l_max, xg.T)
    ls = np.repeat(np.arange(params.l_max + 1), 2 * np.arange(params.l_max + 1) + 1)
    pts = r[:, None, None] * xg.T[None, :, :]
    out = np.zeros((len(params.species), params.n_max, (params.l_max + 1) ** 2))
    rel = mol.positions - mol.positions[center]
    for s, z in enumerate(params.species):
        for j in np.flatnonzero(mol.atomic_numbers == z):
            d = np.linalg.norm(rel[j])
            if d >= params.r_cut:
                continue
            rho = cosine_cutoff(d, params.r_cut) * np.exp(-((pts - rel[j]) ** 2).sum(-1) / (2 * params.sigma**2))
            ang = np.einsum("qa,a,ak->qk", rho, wg, Y)
            out[s] += np.einsum("qk,q,nkq->nk", ang, wr * r**2, g[ls].transpose(1, 0, 2))
    return out


@pytest.mark.parametrize("center", [0, 1])
def test_soap_coefficients_match_quadrature(center):
    params = SoapParams(r_cut=4.0, n_max=5, l_max=5, sigma=0.8, species=(1, 8))
    mol = Molecule("oh", [8, 1], np.array([[0.1, 0.2, -0.1], [0.9, 0.5, 0.6]]))
    c = soap_coefficients(mol, params, center)
    ref = _quadrature_coefficients(mol, params, center)
    scale = np.abs(ref).max()
    assert np.abs(c - ref).max() / scale < 1e-6


def test_isolated_atom_rotation(rng):
    from conftest import random_rotation

    mol = Molecule("h", [1], np.array([[0.3, -0.2, 1.0]]))
    v = soap_atomic(mol, SMALL, 0)
    for _ in range(5):
        R = random_rotation(rng)
        w = soap_atomic(mol.with_positions(mol.positions @ R.T), SMALL, 0)
        assert np.abs(v - w).max() < 1e-10


def test_h2_atoms_equal():
    h2 = Molecule("h2", [1, 1], np.array([[0, 0, 0], [0, 0, 0.74]]))
    np.testing.assert_allclose(soap_atomic(h2, SMALL, 0), soap_atomic(h2, SMALL, 1), atol=1e-14)
    np.testing.assert_allclose(soap_molecular(h2, SMALL), soap_atomic(h2, SMALL, 0), atol=1e-14)


def test_single_atom_molecular_equals_atomic():
    mol = Molecule("c", [6], np.zeros((1, 3)))
    np.testing.assert_array_equal(soap_molecular(mol, SMALL), soap_atomic(mol, SMALL, 0))


@pytest.mark.parametrize("factory", [methane, water, thiophene])
def test_soap_invariance(factory, rng):
    mol = factory()
    ref = soap_molecular(mol, SMALL)
    ref_atom = soap_atomic(mol, SMALL, 0)
    for _ in range(100):
        moved, _, perm = transform(mol, rng)
        assert np.abs(soap_molecular(moved, SMALL) - ref).max() < 1e-8
        new_center = int(np.flatnonzero(perm == 0)[0])
        assert np.abs(soap_atomic(moved, SMALL, new_center) - ref_atom).max() < 1e-8


def test_soap_continuous_at_cutoff():
    eps = 1e-6
    base = np.array([[0.0, 0.0, 0.0]])
    near = Molecule("a", [6, 1], np.vstack([base, [[0, 0, SMALL.r_cut - eps]]]))
    far = Molecule("b", [6, 1], np.vstack([base, [[0, 0, SMALL.r_cut + eps]]]))
    diff = np.abs(soap_atomic(near, SMALL, 0) - soap_atomic(far, SMALL, 0)).max()
    assert diff < 1e-8


def test_soap_pair_symmetry_and_no_duplicates():
    labels = soap_column_labels(SMALL)
    assert len(labels) == len(set(labels)) == SMALL.n_features
    # columns for (Z1,n) <-> (Z2,n') swapped pairs are stored once
    keys = {tuple(l.split("_")[1:]) for l in labels}
    for l in labels:
        _, za, zb, n, k, ll = l.split("_")
        if za == zb and n != k:
            assert (za, zb, k, n, ll) not in keys
    S, N, L = len(SMALL.species), SMALL.n_max, SMALL.l_max + 1
    same = S * N * (N + 1) // 2
    cross = S * (S - 1) // 2 * N * N
    assert SMALL.n_features == (same + cross) * L


def test_power_spectrum_formula(rng):
    params = SoapParams(r_cut=4.0, n_max=3, l_max=2, sigma=0.8, species=(1, 8))
    mol = water()
    c = soap_coefficients(mol, params, 0)
    v = soap_atomic(mol, params, 0)
    labels = soap_column_labels(params)
    for idx in rng.choice(len(labels), 10, replace=False):
        _, za, zb, n, k, l = labels[idx].split("_")
        a, b = params.species.index(int(za[1:])), params.species.index(int(zb[1:]))
        n, k, l = int(n[1:]), int(k[1:]), int(l[1:])
        block = slice(l * l, (l + 1) ** 2)
        expect = np.pi * np.sqrt(8 / (2 * l + 1)) * c[a, n, block] @ c[b, k, block]
        assert v[idx] == pytest.approx(expect, rel=1e-12, abs=1e-15)


def test_soap_errors():
    with pytest.raises(ValueError, match="not declared"):
        soap_atomic(methane(), SoapParams(4.0, 2, 2, 1.0, (1,)), 0)
    with pytest.raises(IndexError):
        soap_atomic(methane(), SMALL, 5)


def test_soap_featurizer_estimator(small_molecules):
    f = SoapFeaturizer(r_cut=4.0, n_max=3, l_max=3)
    X = f.fit_transform(small_molecules)
    assert X.shape == (3, f.params_.n_features)
    assert f.get_params()["n_max"] == 3
    assert clone(f).get_params() == f.get_params()
    assert len(f.get_feature_names_out()) == X.shape[1]


# --- simple descriptors ---------------------------------------------------

def test_simple_descriptors_methane():
    np.testing.assert_array_equal(simple_descriptors(methane(), [1, 6]), [5, 4, 1, 1, 1, 0, 0])


def test_simple_descriptors_ethane():
    pos = np.array([[0, 0, 0], [1.54, 0, 0]])
    mol = Molecule("ethane", [6, 6], pos)
    sd = simple_descriptors(mol, [1, 6])
    assert sd[-2] == pytest.approx(1.54, abs=1e-14) and sd[-1] == 0.0


def test_simple_descriptors_benzene():
    bond = 1.397
    ang = np.arange(6) * np.pi / 3
    ring = np.stack([bond * np.cos(ang), bond * np.sin(ang), np.zeros(6)], axis=1)
    hyd = ring * (bond + 1.087) / bond
    mol = Molecule("benzene", [6] * 6 + [1] * 6, np.vstack([ring, hyd]))
    sd = simple_descriptors(mol, [1, 6])
    d = np.linalg.norm(ring[:, None] - ring[None], axis=-1)[np.triu_indices(6, 1)]
    neighbor = d[d < 1.8]
    assert len(neighbor) == 6
    assert sd[-2] == pytest.approx(neighbor.mean(), abs=1e-14)
    assert sd[-2] == pytest.approx(bond, abs=1e-12)
    assert sd[-1] < 1e-6
    np.testing.assert_array_equal(sd[:5], [12, 6, 6, 1, 1])


def test_simple_descriptors_invariant(rng):
    mol = thiophene()
    ref = simple_descriptors(mol, [1, 6, 16])
    for _ in range(10):
        moved, _, _ = transform(mol, rng)
        np.testing.assert_allclose(simple_descriptors(moved, [1, 6, 16]), ref, atol=1e-12)


def test_sd_featurizer_and_union(small_molecules):
    sd = SimpleDescriptorFeaturizer().fit(small_molecules)
    assert sd.species_ == [1, 6, 8, 16]
    union = soap_sd_union(r_cut=4.0, n_max=2, l_max=2)
    X = union.fit_transform(small_molecules)
    n_soap = union.transformer_list[0][1].params_.n_features
    assert X.shape == (3, n_soap + 1 + 2 * 4 + 2)
    np.testing.assert_array_equal(X[:, n_soap:], sd.transform(small_molecules))


# --- PCA -----------------------------------------------------------------

def test_pca_line():
    t = np.linspace(-1, 2, 7)[:, None]
    X = t * np.array([[1.0, 2.0, -0.5]]) + np.array([3.0, 0.0, 1.0])
    model = pca_fit(X, 0.99999)
    assert model.n_components == 1
    assert model.explained_fraction == pytest.approx(1.0, abs=1e-12)


def test_pca_full_rank_keeps_min(rng):
    X = rng.normal(size=(4, 6))
    assert pca_fit(X, 1.0).n_components == 3
    X = rng.normal(size=(10, 5))
    assert pca_fit(X, 1.0).n_components == 5


def test_pca_matches_covariance_eigendecomposition(rng):
    X = rng.normal(size=(10, 5)) @ rng.normal(size=(5, 5))
    model = pca_fit(X, 1.0)
    cov = (X - X.mean(0)).T @ (X - X.mean(0)) / (len(X) - 1)
    w, v = np.linalg.eigh(cov)
    w, v = w[::-1], v[:, ::-1].T
    np.testing.assert_allclose(model.explained_variance, w, atol=1e-8)
    for comp, ref in zip(model.components, v):
        ref = ref * np.sign(ref[np.argmax(np.abs(ref))])
        np.testing.assert_allclose(comp, ref, atol=1e-8)


def test_pca_orthonormal_and_descending(rng):
    X = rng.normal(size=(30, 8)) * np.arange(1, 9)
    model = pca_fit(X, 0.99)
    np.testing.assert_allclose(model.components @ model.components.T, np.eye(model.n_components), atol=1e-10)
    assert np.all(np.diff(model.explained_variance) <= 0) and np.all(model.explained_variance >= 0)
    assert model.explained_fraction >= 0.99 - 1e-12


def test_pca_transform_properties(rng):
    X = rng.normal(size=(25, 6)) * [5, 3, 1, 0.1, 0.01, 0.001]
    model = pca_fit(X, 0.999)
    Z = pca_transform(model, X)
    np.testing.assert_allclose(Z.var(axis=0, ddof=1), model.explained_variance, atol=1e-8)
    np.testing.assert_allclose(pca_transform(model, model.mean[None]), 0.0, atol=1e-14)
    rec = pca_inverse_transform(model, Z)
    discarded = model.total_variance - model.explained_variance.sum()
    assert ((rec - X) ** 2).sum() / (len(X) - 1) <= discarded * (1 + 1e-8) + 1e-14
    with pytest.raises(ValueError):
        pca_transform(model, X[:, :3])


def test_pca_zero_variance():
    X = np.ones((5, 3))
    model = pca_fit(X, 0.5)
    assert model.n_components == 1 and model.zero_variance
    np.testing.assert_allclose(pca_transform(model, X), 0.0)


def test_pca_errors():
    with pytest.raises(ValueError):
        pca_fit(np.ones((1, 3)), 0.9)
    with pytest.raises(ValueError):
        pca_fit(np.eye(3), 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.integers(1, 6), st.integers(0, 1000), st.floats(0.5, 1.0))
def test_pca_retention_property(m, d, seed, frac):
    X = np.random.default_rng(seed).normal(size=(m, d))
    model = pca_fit(X, frac)
    assert model.explained_fraction >= frac - 1e-9
    if model.n_components > 1:
        smaller = model.explained_variance[:-1].sum() / model.total_variance
        assert smaller < frac


def test_pca_compressor_estimator(rng):
    X = rng.normal(size=(20, 4))
    pc = PCACompressor(retained_fraction=1.0).fit(X)
    np.testing.assert_allclose(pc.inverse_transform(pc.transform(X)), X, atol=1e-12)
    assert pc.get_params() == {"retained_fraction": 1.0}


def test_descriptor_matrix_csv(tmp_path):
    dm = DescriptorMatrix([[1.0, 0.1]], ["a", "b"], "sd", ["m0"])
    dm.to_csv(tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text() == "id,a,b\nm0,1,0.10000000000000001\n"
    with pytest.raises(ValueError):
        DescriptorMatrix([[np.nan]], ["a"], "sd")
    with pytest.raises(ValueError):
        DescriptorMatrix([[1.0]], ["a", "b"], "sd")
