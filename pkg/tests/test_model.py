from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ethscale.model import (Custom, HamiltonianSpec, MixedFieldIsing, Observable, PauliString,
                            RandomFieldXXZ, SymmetrySector, SymmetryViolation, build_operator,
                            build_sector_basis, model_from_dict, pauli_string, predicted_m1,
                            reflect_states, sample_disorder_fields, sector_dimensions)
from ethscale.oracle import dense_operator, dense_sector_projector
from ethscale.spectral import compute_spectral_data

PLUS = SymmetrySector.parity(1)
MINUS = SymmetrySector.parity(-1)
SZ0 = SymmetrySector.total_sz(0)
NONE = SymmetrySector.none()


@pytest.mark.parametrize("L, sector, expected", [
    (2, PLUS, (3, 1)),
    (4, PLUS, (10, 6)),
    (4, SZ0, (6, 10)),
    (3, NONE, (8, 0)),
])
def test_sector_dimensions_examples(L, sector, expected):
    assert sector_dimensions(L, sector) == expected


@pytest.mark.parametrize("L", range(1, 15))
def test_sector_dimensions_sum_and_basis_size(L):
    for sector in (PLUS, MINUS, NONE):
        dim, comp = sector_dimensions(L, sector)
        assert dim + comp == 2 ** L
        if L <= 10:
            assert build_sector_basis(L, sector).dim == dim


def test_parity_basis_L2():
    basis = build_sector_basis(2, PLUS)
    vecs = {tuple(np.round(basis.to_dense()[:, k], 12)) for k in range(basis.dim)}
    s = round(1 / np.sqrt(2), 12)
    # |00>, |11>, (|01>+|10>)/sqrt2 in computational order 00, 01, 10, 11
    assert vecs == {(1.0, 0, 0, 0), (0, 0, 0, 1.0), (0, s, s, 0)}
    # representatives run in ascending integer order
    assert list(basis.representatives) == [0, 1, 3]


def test_sz_and_full_basis():
    basis = build_sector_basis(2, SZ0)
    assert sorted(basis.representatives) == [1, 2]
    assert build_sector_basis(3, NONE).dim == 8


def test_zz_in_parity_sector_L2():
    basis = build_sector_basis(2, PLUS)
    ZZ = build_operator([pauli_string(2, {1: "Z", 2: "Z"})], basis)
    assert np.allclose(ZZ, np.diag(np.diag(ZZ)))
    assert np.allclose(sorted(np.diag(ZZ)), [-1.0, 1.0, 1.0])
    # ascending-representative order: |00>, (|01>+|10>)/sqrt2, |11>
    assert np.allclose(np.diag(ZZ), [1, -1, 1])


def test_single_x():
    X = build_operator([pauli_string(1, {1: "X"})], build_sector_basis(1, NONE))
    assert np.array_equal(X, [[0, 1], [1, 0]])


def test_pauli_dense_matches_kron():
    rng = np.random.default_rng(3)
    for _ in range(20):
        L = int(rng.integers(1, 5))
        letters = "".join(rng.choice(list("IXYZ"), size=L))
        p = PauliString(0.7, letters)
        assert np.allclose(p.to_dense(), dense_operator([p], L))


def test_apply_matches_dense_columns():
    p = PauliString(1.0, "XYZ")
    dense = p.to_dense()
    states = np.arange(8)
    targets, amps = p.apply(states)
    for s, t, a in zip(states, targets, amps):
        assert dense[t, s] == pytest.approx(a)


@pytest.mark.parametrize("L", range(2, 11))
def test_sector_spectrum_matches_projected_full_space(L):
    cases = [(MixedFieldIsing(), PLUS), (MixedFieldIsing(), MINUS)]
    if L % 2 == 0:
        cases.append((RandomFieldXXZ(seed=5), SZ0))
    for model, sector in cases:
        H = build_operator(model.terms(L), build_sector_basis(L, sector))
        B = dense_sector_projector(L, sector)
        ref = np.linalg.eigvalsh(B.T @ dense_operator(model.terms(L), L) @ B)
        assert np.max(np.abs(np.linalg.eigvalsh(H) - ref)) < 1e-10


def test_ising_L2_trace_against_projection():
    L = 2
    terms = MixedFieldIsing().terms(L)
    H = build_operator(terms, build_sector_basis(L, PLUS))
    B = dense_sector_projector(L, PLUS)
    assert np.trace(H) == pytest.approx(np.trace(B.T @ dense_operator(terms, L) @ B).real, abs=1e-12)
    # the Pauli expansion is traceless on the full space but not on the sector
    assert abs(np.trace(H)) > 0.1


def test_symmetry_violation_raises():
    # X on site 1 alone is not reflection symmetric for L = 3
    bad = Custom((PauliString(1.0, "XII"),))
    with pytest.raises(SymmetryViolation):
        build_operator(bad.terms(3), build_sector_basis(3, PLUS))
    with pytest.raises(SymmetryViolation):
        build_operator([PauliString(1.0, "XI")], build_sector_basis(2, SZ0))


def test_custom_symmetric_model_accepted():
    good = Custom((PauliString(1.0, "XII"), PauliString(1.0, "IIX")))
    H = build_operator(good.terms(3), build_sector_basis(3, PLUS))
    assert np.allclose(H, H.T)


def test_reflection_is_involution():
    states = np.arange(2 ** 7)
    assert np.array_equal(reflect_states(reflect_states(states, 7), 7), states)
    assert reflect_states(np.array([0b1000000]), 7)[0] == 1


@pytest.mark.parametrize("L, sector, expected", [
    (4, PLUS, Fraction(1, 5)),
    (4, SZ0, Fraction(-1, 3)),
    (8, PLUS, Fraction(1, 17)),
])
def test_predicted_m1_examples(L, sector, expected):
    assert predicted_m1(Observable("two_site_ZZ_center"), sector, L) == expected


@pytest.mark.parametrize("L", [4, 6, 8])
def test_predicted_m1_matches_ed(L):
    obs = Observable("two_site_ZZ_center")
    for model, sector in ((MixedFieldIsing(), PLUS), (RandomFieldXXZ(seed=1), SZ0)):
        sd = compute_spectral_data(HamiltonianSpec(model, L), obs, sector)
        assert abs(sd.diagonal.mean() - float(predicted_m1(obs, sector, L))) < 1e-10


def test_xxz_m1_enumeration_L4():
    # ZZ on the middle pair over the six S_z = 0 states
    states = [s for s in range(16) if bin(s).count("1") == 2]
    vals = [(1 - 2 * ((s >> 2) & 1)) * (1 - 2 * ((s >> 1) & 1)) for s in states]
    assert Fraction(sum(vals), len(vals)) == Fraction(-1, 3)


def test_disorder_fields_reproducible():
    a = sample_disorder_fields(11, 0, 4)
    assert np.array_equal(a, sample_disorder_fields(11, 0, 4))
    assert not np.array_equal(a, sample_disorder_fields(11, 1, 4))
    assert not np.array_equal(a, sample_disorder_fields(12, 0, 4))


def test_disorder_fields_statistics():
    h = np.concatenate([sample_disorder_fields(7, k, 100) for k in range(1000)])
    assert h.size == 10 ** 5
    assert h.min() >= -0.75 and h.max() <= 0.75
    sigma = 1.5 / np.sqrt(12) / np.sqrt(h.size)
    assert abs(h.mean()) < 3 * sigma


def test_realization_addressable_without_predecessors():
    # realization 9 is the same whether or not 0..8 were drawn first
    direct = sample_disorder_fields(3, 9, 10)
    for k in range(9):
        sample_disorder_fields(3, k, 10)
    assert np.array_equal(direct, sample_disorder_fields(3, 9, 10))


def test_model_from_dict_roundtrip():
    spec = HamiltonianSpec(RandomFieldXXZ(seed=4, realization=2), 6)
    d = spec.to_dict()
    model = model_from_dict(d["model"], d["params"])
    assert model.params() == spec.model.params()
    assert [t.letters for t in model.terms(6)] == [t.letters for t in spec.terms()]


def test_observable_strings():
    assert Observable().string(7).letters == "IIIZIII"
    assert Observable("two_site_ZZ_center").string(6).letters == "IIZZII"
    assert Observable("custom", "XX", (1, 2)).string(3).letters == "XXI"
    with pytest.raises(ValueError):
        Observable("two_site_ZZ_center").string(5)


@settings(max_examples=40, deadline=None)
@given(L=st.integers(2, 7), seed=st.integers(0, 2 ** 16))
def test_random_symmetric_custom_model_sector_spectrum(L, seed):
    """A random reflection-symmetrised Pauli sum matches the dense projected build."""
    rng = np.random.default_rng(seed)
    terms = []
    for _ in range(3):
        letters = "".join(rng.choice(list("IXZ"), size=L))
        c = float(rng.normal())
        terms += [PauliString(c, letters), PauliString(c, letters[::-1])]
    H = build_operator(terms, build_sector_basis(L, PLUS))
    B = dense_sector_projector(L, PLUS)
    ref = np.linalg.eigvalsh(B.T @ dense_operator(terms, L) @ B)
    assert np.allclose(np.linalg.eigvalsh(H), ref, atol=1e-10)
