import io

import numpy as np
import pytest

from dcflearn.spectral import (
    FeatureTensor,
    SpectrumTensor,
    elementwise_product,
    fft2_channels,
    hermitian_flip,
    hermitian_symmetry_error,
    ifft2_channels,
    load_tensor,
    save_tensor,
)
from helpers import brute_dft2


def rand_tensor(rng, n, c):
    return FeatureTensor(rng.standard_normal((n, n, c)))


class TestContainers:
    def test_rejects_nan(self):
        bad = np.ones((4, 4, 1))
        bad[0, 0, 0] = np.nan
        with pytest.raises(ValueError, match="NaN"):
            FeatureTensor(bad)

    def test_rejects_small_grid(self):
        with pytest.raises(ValueError):
            FeatureTensor(np.ones((1, 1, 1)))

    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="empty"):
            FeatureTensor(np.zeros((0, 0, 1)))

    def test_rejects_rectangular(self):
        with pytest.raises(ValueError):
            FeatureTensor(np.ones((4, 6, 1)))

    def test_from_array_promotes_2d(self):
        t = FeatureTensor.from_array(np.ones((4, 4)))
        assert t.data.shape == (4, 4, 1)
        assert t.n == 4 and t.c == 1

    def test_spectrum_container(self):
        s = SpectrumTensor.from_array(np.ones((4, 4), dtype=complex))
        assert s.n == 4 and s.c == 1


class TestForwardTransform:
    def test_constant_tensor_is_dc_only(self):
        c = 1.7
        spec = fft2_channels(FeatureTensor(np.full((4, 4, 1), c))).data
        assert spec[0, 0, 0] == pytest.approx(4 * c, abs=1e-13)
        off_dc = spec.copy()
        off_dc[0, 0, 0] = 0.0
        assert np.abs(off_dc).max() < 1e-13

    def test_unit_impulse_is_flat(self):
        x = np.zeros((4, 4, 1))
        x[0, 0, 0] = 1.0
        spec = fft2_channels(FeatureTensor(x)).data
        assert np.allclose(spec, 0.25, atol=1e-14)

    def test_norm_preserved_random(self):
        rng = np.random.default_rng(0)
        x = rand_tensor(rng, 8, 3)
        spec = fft2_channels(x)
        rel = abs(np.linalg.norm(spec.data) - np.linalg.norm(x.data)) / np.linalg.norm(x.data)
        assert rel < 1e-12

    def test_matches_brute_force_dft(self):
        rng = np.random.default_rng(1)
        for n in (4, 5, 8):
            x = rand_tensor(rng, n, 2)
            spec = fft2_channels(x).data
            ref = brute_dft2(x.data)
            assert np.abs(spec - ref).max() / np.abs(ref).max() < 1e-10

    def test_linearity(self):
        rng = np.random.default_rng(2)
        x, y = rand_tensor(rng, 8, 2), rand_tensor(rng, 8, 2)
        a, b = 2.3, -0.7
        lhs = fft2_channels(FeatureTensor(a * x.data + b * y.data)).data
        rhs = a * fft2_channels(x).data + b * fft2_channels(y).data
        assert np.abs(lhs - rhs).max() < 1e-12 * max(1.0, np.abs(rhs).max())

    @pytest.mark.parametrize("n", [4, 8, 16, 32])
    @pytest.mark.parametrize("c", [1, 3, 10])
    def test_parseval_many(self, n, c):
        rng = np.random.default_rng(n * 100 + c)
        for _ in range(9):
            x = rand_tensor(rng, n, c)
            spec = fft2_channels(x).data
            for k in range(c):
                in_e = np.sum(x.data[:, :, k] ** 2)
                out_e = np.sum(np.abs(spec[:, :, k]) ** 2)
                assert abs(out_e - in_e) / in_e < 1e-10


class TestInverseTransform:
    def test_round_trip_identity(self):
        rng = np.random.default_rng(3)
        x = rand_tensor(rng, 8, 2)
        back = ifft2_channels(fft2_channels(x))
        assert np.abs(back.data - x.data).max() < 1e-12 * np.abs(x.data).max()

    def test_zero_spectrum(self):
        z = SpectrumTensor(np.zeros((4, 4, 2), dtype=complex))
        assert np.all(ifft2_channels(z).data == 0.0)

    def test_hermitian_violation_raises(self):
        rng = np.random.default_rng(4)
        spec = fft2_channels(rand_tensor(rng, 8, 1)).data
        spec[1, 2, 0] += 1e-3
        with pytest.raises(ValueError, match="conjugate symmetry"):
            ifft2_channels(SpectrumTensor(spec))

    def test_symmetry_error_metric(self):
        rng = np.random.default_rng(5)
        spec = fft2_channels(rand_tensor(rng, 8, 2))
        assert hermitian_symmetry_error(spec) < 1e-14
        bad = spec.data.copy()
        bad[1, 1, 0] += 1.0
        assert hermitian_symmetry_error(SpectrumTensor(bad)) > 1e-3

    def test_hermitian_flip_involution(self):
        rng = np.random.default_rng(6)
        z = rng.standard_normal((6, 6, 2)) + 1j * rng.standard_normal((6, 6, 2))
        assert np.array_equal(hermitian_flip(hermitian_flip(z)), z)


class TestProducts:
    def test_plain_and_conjugated(self):
        rng = np.random.default_rng(7)
        a = SpectrumTensor(rng.standard_normal((4, 4, 2)) + 1j * rng.standard_normal((4, 4, 2)))
        b = SpectrumTensor(rng.standard_normal((4, 4, 2)) + 1j * rng.standard_normal((4, 4, 2)))
        plain = elementwise_product(a, b).data
        conj = elementwise_product(a, b, conjugate_a=True).data
        assert np.allclose(plain, a.data * b.data)
        assert np.allclose(conj, np.conj(a.data) * b.data)

    def test_shape_mismatch(self):
        a = SpectrumTensor(np.ones((4, 4, 1), dtype=complex))
        b = SpectrumTensor(np.ones((4, 4, 2), dtype=complex))
        with pytest.raises(ValueError, match="shape"):
            elementwise_product(a, b)


class TestSerialization:
    def test_real_round_trip(self, tmp_path):
        rng = np.random.default_rng(8)
        x = rand_tensor(rng, 6, 3)
        path = tmp_path / "t.bin"
        save_tensor(path, x)
        back = load_tensor(path)
        assert isinstance(back, FeatureTensor)
        assert np.array_equal(back.data, x.data)

    def test_complex_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        s = fft2_channels(rand_tensor(rng, 6, 2))
        path = tmp_path / "s.bin"
        save_tensor(path, s)
        back = load_tensor(path)
        assert isinstance(back, SpectrumTensor)
        assert np.array_equal(back.data, s.data)

    def test_file_object_round_trip(self):
        x = FeatureTensor(np.arange(32.0).reshape(4, 4, 2))
        buf = io.BytesIO()
        save_tensor(buf, x)
        buf.seek(0)
        assert np.array_equal(load_tensor(buf).data, x.data)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOPE" + b"\0" * 32)
        with pytest.raises(ValueError, match="magic"):
            load_tensor(path)

    def test_truncated_payload(self, tmp_path):
        x = FeatureTensor(np.ones((4, 4, 1)))
        path = tmp_path / "t.bin"
        save_tensor(path, x)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError, match="payload"):
            load_tensor(path)
