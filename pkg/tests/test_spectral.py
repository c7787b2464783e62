"""
Tests for the Haar wavelet and real FFT transforms.
"""

import numpy as np
import pytest

from dabformer.core.gradcheck import grad_check
from dabformer.core.spectral import ComplexMap, Subbands, complex_pointwise_filter, dwt2, idwt2, irfft2, rfft2
from dabformer.core.tensor import Tensor
from dabformer.services import oracles
from dabformer.utils.exceptions import ShapeError


class TestHaar:
    """Single-level orthonormal Haar transform."""

    def test_two_by_two_example(self):
        bands = dwt2(Tensor([[1.0, 2.0], [3.0, 4.0]]))
        assert [t.data.item() for t in bands] == [5.0, -2.0, -1.0, 0.0]

    def test_matches_block_loop(self, rng):
        image = rng.standard_normal((6, 8))
        for got, expected in zip(dwt2(Tensor(image)), oracles.haar_loop(image)):
            np.testing.assert_allclose(got.data, expected, atol=1e-12)

    def test_perfect_reconstruction(self, rng):
        x = Tensor(rng.standard_normal((2, 3, 8, 10)))
        np.testing.assert_allclose(idwt2(dwt2(x)).data, x.data, atol=1e-12)

    def test_energy_preserved(self, rng):
        x = Tensor(rng.standard_normal((1, 2, 8, 8)))
        assert dwt2(x).energy() == pytest.approx(float(np.sum(x.data**2)), rel=1e-12)

    def test_constant_image_has_no_detail(self):
        bands = dwt2(Tensor(np.full((4, 4), 0.3)))
        for detail in (bands.hl, bands.lh, bands.hh):
            np.testing.assert_allclose(detail.data, 0.0, atol=1e-15)
        np.testing.assert_allclose(bands.ll.data, 0.6)

    def test_odd_extent_rejected(self):
        with pytest.raises(ShapeError, match="even"):
            dwt2(Tensor(np.ones((3, 4))))

    def test_subbands_must_agree_in_shape(self):
        with pytest.raises(ShapeError):
            Subbands(Tensor(np.ones((2, 2))), Tensor(np.ones((2, 2))), Tensor(np.ones((2, 2))), Tensor(np.ones((2, 3))))

    def test_gradient_through_roundtrip_with_scaling(self, rng):
        x = Tensor(rng.standard_normal((1, 1, 4, 6)))
        weights = rng.standard_normal((1, 1, 2, 3))

        def f(t):
            s = dwt2(t)
            scaled = Subbands(s.ll * weights, s.hl * 2.0, s.lh, s.hh * weights)
            return (idwt2(scaled) ** 2).sum()

        assert grad_check(f, x).passed


class TestFFT:
    """Real-input 2D DFT and its inverse."""

    @pytest.mark.parametrize("shape", [(2, 2), (4, 6), (8, 8), (5, 7)])
    def test_matches_direct_summation(self, rng, shape):
        image = rng.standard_normal(shape)
        np.testing.assert_allclose(rfft2(Tensor(image)).to_numpy(), oracles.dft2_brute(image), atol=1e-10)

    def test_roundtrip(self, rng):
        x = Tensor(rng.standard_normal((2, 8, 6)))
        np.testing.assert_allclose(irfft2(rfft2(x), 8, 6).data, x.data, atol=1e-12)

    def test_half_spectrum_shape(self, rng):
        spectrum = rfft2(Tensor(rng.standard_normal((3, 8, 8))))
        assert spectrum.shape == (3, 8, 5)

    def test_inverse_checks_shape(self, rng):
        spectrum = rfft2(Tensor(rng.standard_normal((8, 8))))
        with pytest.raises(ShapeError):
            irfft2(spectrum, 8, 10)

    @pytest.mark.parametrize("width", [6, 5])
    def test_gradients(self, rng, width):
        x = Tensor(rng.standard_normal((2, 4, width)))
        bins = width // 2 + 1
        wr, wi = rng.standard_normal((4, bins)), rng.standard_normal((4, bins))
        assert grad_check(lambda t: (rfft2(t).real * wr + rfft2(t).imag * wi).sum(), x).passed

        spectrum = rfft2(Tensor(rng.standard_normal((2, 4, width))))
        re, im = Tensor(spectrum.real.data), Tensor(spectrum.imag.data)
        out_weights = rng.standard_normal((2, 4, width))
        report = grad_check(lambda r, i: (irfft2(ComplexMap(r, i), 4, width) * out_weights).sum(), [re, im])
        assert report.passed

    def test_unit_filter_is_identity(self, rng):
        x = Tensor(rng.standard_normal((2, 8, 8)))
        unit = ComplexMap(Tensor(np.ones((8, 5))), Tensor(np.zeros((8, 5))))
        np.testing.assert_allclose(irfft2(complex_pointwise_filter(rfft2(x), unit), 8, 8).data, x.data, atol=1e-12)

    def test_filter_must_broadcast(self, rng):
        spectrum = rfft2(Tensor(rng.standard_normal((2, 8, 8))))
        bad = ComplexMap(Tensor(np.ones((3, 5))), Tensor(np.zeros((3, 5))))
        with pytest.raises(ShapeError):
            complex_pointwise_filter(spectrum, bad)
