import json

import numpy as np
import pytest

from bwdam.bankio import load_bank, load_queries, save_bank, save_queries
from bwdam.errors import ParseError
from bwdam.geometry import GaussianMeasure, bures_w2
from bwdam.memory import MemoryBank
from bwdam.sampling import SphereConfig, sample_commuting_bank


def family_bank(seed=0, beta=1.5):
    cfg = SphereConfig.for_eigenvalue_band(
        dim=4, n=6, lambda_min=1.0, lambda_max=1.2, seed=seed
    )
    return MemoryBank.from_family(sample_commuting_bank(cfg), beta=beta)


def dense_bank(seed=1, beta=0.7):
    rng = np.random.default_rng(seed)
    patterns = []
    for _ in range(3):
        q = np.linalg.qr(rng.standard_normal((3, 3)))[0]
        eigs = rng.uniform(0.5, 2.0, size=3)
        patterns.append(
            GaussianMeasure(mean=rng.standard_normal(3), cov=(q * eigs) @ q.T)
        )
    return MemoryBank(patterns, beta=beta)


class TestBankRoundTrip:
    def test_family_bank_bytes_stable(self, tmp_path):
        bank = family_bank()
        p1 = tmp_path / "bank1.json"
        p2 = tmp_path / "bank2.json"
        save_bank(bank, p1)
        save_bank(load_bank(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_family_bank_semantics(self, tmp_path):
        bank = family_bank()
        path = tmp_path / "bank.json"
        save_bank(bank, path)
        back = load_bank(path)
        assert back.beta == bank.beta
        assert back.n == bank.n
        assert back.family is not None
        assert np.array_equal(back.family.basis, bank.family.basis)
        assert np.array_equal(back.family.spectra, bank.family.spectra)

    def test_dense_bank_round_trip(self, tmp_path):
        bank = dense_bank()
        path = tmp_path / "bank.json"
        save_bank(bank, path)
        back = load_bank(path)
        assert back.family is None
        for i in range(bank.n):
            assert bures_w2(back.pattern(i), bank.pattern(i)) <= 1e-12

    def test_schema_is_documented_shape(self, tmp_path):
        bank = family_bank()
        path = tmp_path / "bank.json"
        save_bank(bank, path)
        doc = json.loads(path.read_text())
        assert doc["schema_version"] == 1
        assert set(doc) == {"schema_version", "dim", "beta", "basis", "patterns"}
        assert set(doc["patterns"][0]) == {"mean", "spectrum"}

    def test_malformed_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ParseError):
            load_bank(path)
        path.write_text(json.dumps({"schema_version": 99}))
        with pytest.raises(ParseError):
            load_bank(path)


class TestQueryFiles:
    def test_family_queries_round_trip(self, tmp_path):
        bank = family_bank()
        fam = bank.family
        spectra = fam.spectra[:2] * 1.01
        measures = [
            fam.measure_from_coordinates(fam.means_in_basis[i] + 0.05, spectra[i])
            for i in range(2)
        ]
        path = tmp_path / "queries.json"
        save_queries(measures, path, original_indices=[0, 1], basis=fam.basis,
                     spectra=spectra)
        back, originals = load_queries(path)
        assert originals == [0, 1]
        for m, b in zip(measures, back):
            assert bures_w2(m, b) <= 1e-9

    def test_dense_queries_round_trip(self, tmp_path):
        bank = dense_bank()
        measures = [bank.pattern(0), bank.pattern(2)]
        path = tmp_path / "queries.json"
        save_queries(measures, path)
        back, originals = load_queries(path)
        assert originals == [None, None]
        for m, b in zip(measures, back):
            assert bures_w2(m, b) <= 1e-12
