import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from agf import io
from agf.bipartite import split_hv_diag
from agf.errors import ConfigError, InputError
from agf.graphbio import lowpass_filter
from agf.pipeline import (
    AgfConfig,
    NoiseSpec,
    add_awgn,
    agf_block,
    default_filterbank,
    denoise,
    denoise_patch,
    mse,
    prefilter,
    psnr,
    relu,
)
from agf.pixelgraph import Patch, build_8connected_graph, compute_features, partition_into_patches, reassemble_patches


def smooth_image(shape, seed=0):
    rng = np.random.default_rng(seed)
    rr, cc = np.mgrid[: shape[0], : shape[1]]
    img = 128 + 60 * np.sin(rr / 9.0) * np.cos(cc / 13.0) + 40 * (cc > shape[1] // 2)
    return np.clip(img + rng.normal(0, 2, shape), 0, 255)


class TestNoise:
    def test_zero_sigma(self):
        img = smooth_image((16, 16))
        np.testing.assert_array_equal(add_awgn(img, NoiseSpec(0.0, 3)), img)

    def test_sample_std(self):
        img = np.zeros((512, 512))
        noise = add_awgn(img, NoiseSpec(50.0, 1)) - img
        assert abs(noise.std() - 50.0) <= 0.5

    def test_deterministic(self):
        img = smooth_image((32, 32))
        a = add_awgn(img, NoiseSpec(25.0, 42))
        b = add_awgn(img, NoiseSpec(25.0, 42))
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, add_awgn(img, NoiseSpec(25.0, 43)))

    def test_not_clipped(self):
        noisy = add_awgn(np.zeros((64, 64)), NoiseSpec(50.0, 0))
        assert noisy.min() < 0

    def test_negative_sigma(self):
        with pytest.raises(ConfigError):
            NoiseSpec(-1.0)


class TestPrefilter:
    def test_identity(self):
        p = Patch(np.random.default_rng(0).random((6, 6)))
        np.testing.assert_array_equal(prefilter(p, "identity").values, p.values)

    def test_gaussian_constant(self):
        p = Patch(np.full((6, 6), 42.0))
        np.testing.assert_allclose(prefilter(p, "gaussian3x3").values, 42.0, rtol=1e-15)

    def test_gaussian_kernel_interior(self):
        v = np.zeros((5, 5))
        v[2, 2] = 16.0
        out = prefilter(Patch(v), "gaussian3x3").values
        np.testing.assert_allclose(out[1:4, 1:4], [[1, 2, 1], [2, 4, 2], [1, 2, 1]])

    def test_gaussian_reduces_variance(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            p = Patch(rng.normal(100, 30, (12, 12)))
            assert prefilter(p, "gaussian3x3").values.var() <= p.values.var()

    def test_external(self, tmp_path):
        vals = np.arange(16, dtype=np.float32).reshape(16, 1)
        path = tmp_path / "pre_k0.agff"
        io.write_agff(path, vals)
        out = prefilter(Patch(np.zeros((4, 4))), "external", path)
        np.testing.assert_array_equal(out.values.ravel(), vals.ravel())

    def test_external_missing(self, tmp_path):
        with pytest.raises(InputError):
            prefilter(Patch(np.zeros((4, 4))), "external", tmp_path / "missing.agff")

    def test_external_wrong_size(self, tmp_path):
        path = tmp_path / "x.agff"
        io.write_agff(path, np.zeros((9, 1)))
        with pytest.raises(InputError):
            prefilter(Patch(np.zeros((4, 4))), "external", path)


class TestRelu:
    def test_all_negative(self):
        assert not relu(np.full((3, 3), -2.0)).any()

    def test_non_negative_unchanged(self):
        x = np.abs(np.random.default_rng(0).normal(size=(4, 4)))
        np.testing.assert_array_equal(relu(x), x)

    def test_mixed(self):
        np.testing.assert_array_equal(relu(np.array([-1.0, 3.0])), [0.0, 3.0])

    def test_patch_in_patch_out(self):
        p = Patch(-np.ones((2, 2)), origin=(4, 8), index=3)
        out = relu(p)
        assert isinstance(out, Patch) and out.origin == (4, 8) and out.index == 3

    @given(arrays(np.float64, (5, 5), elements=st.floats(-1e6, 1e6)))
    def test_idempotent(self, x):
        np.testing.assert_array_equal(relu(relu(x)), relu(x))


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [dict(m=1), dict(cascades=0), dict(eps=0.0), dict(alpha=1.5), dict(alpha=-0.1),
         dict(prefilter="median"), dict(provider="cnn"), dict(mode="fast"), dict(cheb_order=0),
         dict(provider="external"), dict(prefilter="external")],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            AgfConfig(**kw)

    def test_documented_defaults(self):
        cfg = AgfConfig()
        assert (cfg.m, cfg.cascades, cfg.alpha) == (24, 2, 0.0)
        assert cfg.resolved_mode() == "exact"
        assert AgfConfig(m=40).resolved_mode() == "chebyshev"


class TestBlock:
    def test_zero_patch(self):
        out = agf_block(Patch(np.zeros((8, 8))), AgfConfig(m=8))
        assert not out.values.any()

    def test_alpha_one_identity(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(0, 255, (8, 8))
        out = agf_block(Patch(x), AgfConfig(m=8, alpha=1.0, prefilter="identity"))
        np.testing.assert_allclose(out.values, x, atol=1e-8 * np.linalg.norm(x))

    def test_reduces_variance_on_noisy_constant(self):
        rng = np.random.default_rng(3)
        cfg = AgfConfig(m=24)
        for _ in range(100):
            x = 120.0 + rng.normal(0, 50, (24, 24))
            assert agf_block(Patch(x), cfg).values.var() < x.var()

    def test_reduces_variance_without_prefilter(self):
        rng = np.random.default_rng(4)
        cfg = AgfConfig(m=24, prefilter="identity")
        for _ in range(20):
            x = 120.0 + rng.normal(0, 50, (24, 24))
            assert agf_block(Patch(x), cfg).values.var() < x.var()

    def _manual(self, x, cfg, first, second):
        fb = default_filterbank()
        m = cfg.m

        def stage(v, which):
            pair = split_hv_diag(build_8connected_graph(compute_features(Patch(v)), m, cfg.eps), m)
            g, col = (pair.diag, pair.coloring_diag) if which == "diag" else (pair.hv, pair.coloring_hv)
            pre = prefilter(Patch(v), cfg.prefilter).values.ravel()
            return np.maximum(lowpass_filter(fb, g, col, pre, cfg.alpha, "exact").reshape(m, m), 0)

        return stage(stage(x, first), second)

    def test_diagonal_stage_first(self):
        rng = np.random.default_rng(5)
        x = np.clip(smooth_image((12, 12), 5) + rng.normal(0, 40, (12, 12)), 0, None)
        cfg = AgfConfig(m=12)
        out = agf_block(Patch(x), cfg).values
        np.testing.assert_allclose(out, self._manual(x, cfg, "diag", "hv"), rtol=1e-12, atol=1e-10)
        swapped = self._manual(x, cfg, "hv", "diag")
        assert np.max(np.abs(out - swapped)) > 1e-3

    def test_reuse_graph_flag(self):
        rng = np.random.default_rng(6)
        x = smooth_image((12, 12), 6) + rng.normal(0, 40, (12, 12))
        a = agf_block(Patch(x), AgfConfig(m=12)).values
        b = agf_block(Patch(x), AgfConfig(m=12, reuse_graph=True)).values
        assert not np.allclose(a, b)

    def test_chebyshev_mode_agrees(self):
        rng = np.random.default_rng(7)
        x = smooth_image((24, 24), 7) + rng.normal(0, 50, (24, 24))
        a = agf_block(Patch(x), AgfConfig(mode="exact")).values
        b = agf_block(Patch(x), AgfConfig(mode="chebyshev", cheb_order=30)).values
        np.testing.assert_allclose(a, b, atol=1e-8)


class TestDenoise:
    def test_single_cascade_composition(self):
        img = smooth_image((30, 20), 1) + np.random.default_rng(1).normal(0, 30, (30, 20))
        cfg = AgfConfig(m=8, cascades=1)
        manual = reassemble_patches([agf_block(p, cfg) for p in partition_into_patches(img, 8)], img.shape)
        np.testing.assert_array_equal(denoise(img, cfg), manual)

    def test_identity_chain(self):
        img = smooth_image((40, 40), 2)
        out = denoise(img, AgfConfig(m=8, alpha=1.0, prefilter="identity"))
        np.testing.assert_allclose(out, img, atol=1e-8 * 255)

    def test_patch_independence(self):
        img = smooth_image((40, 40), 3) + np.random.default_rng(3).normal(0, 50, (40, 40))
        cfg = AgfConfig(m=8)
        patches = partition_into_patches(img, 8)
        order = np.random.default_rng(0).permutation(len(patches))
        done = {int(k): denoise_patch(patches[k], cfg) for k in order}
        shuffled = reassemble_patches([done[k] for k in range(len(patches))], img.shape)
        np.testing.assert_array_equal(denoise(img, cfg), shuffled)

    def test_threaded_matches_serial(self):
        img = smooth_image((40, 40), 4) + np.random.default_rng(4).normal(0, 50, (40, 40))
        cfg = AgfConfig(m=8)
        assert denoise(img, cfg).tobytes() == denoise(img, cfg, workers=3).tobytes()

    def test_deterministic(self):
        img = smooth_image((48, 48), 5)
        noisy = add_awgn(img, NoiseSpec(50, 9))
        cfg = AgfConfig()
        assert denoise(noisy, cfg).tobytes() == denoise(add_awgn(img, NoiseSpec(50, 9)), cfg).tobytes()

    def test_improves_psnr(self):
        img = smooth_image((72, 72), 6)
        noisy = add_awgn(img, NoiseSpec(50, 10))
        assert psnr(img, denoise(noisy)) > psnr(img, noisy)

    def test_external_features_and_prefilter(self, tmp_path):
        img = np.round(smooth_image((16, 16), 7))
        feat, pre = tmp_path / "feat", tmp_path / "pre"
        feat.mkdir()
        pre.mkdir()
        for p in partition_into_patches(img, 8):
            io.write_agff(feat / io.agff_name("img", p.index), compute_features(p).vectors)
            io.write_agff(pre / io.agff_name("img", p.index), p.values.reshape(-1, 1))
        ext = AgfConfig(m=8, cascades=1, prefilter="external", provider="external",
                        feature_dir=str(feat), prefilter_dir=str(pre), stem="img", reuse_graph=True)
        internal = AgfConfig(m=8, cascades=1, prefilter="identity", reuse_graph=True)
        # float32 features shift weights slightly; pre-filter files hold the exact patches
        np.testing.assert_allclose(denoise(img, ext), denoise(img, internal), atol=1e-3)
        with pytest.raises(InputError):
            denoise(img, AgfConfig(m=8, provider="external", feature_dir=str(feat), stem="nope"))


class TestMetrics:
    def test_mse_identical(self):
        x = np.random.default_rng(0).random((5, 7))
        assert mse(x, x) == 0.0

    def test_mse_extreme(self):
        assert mse(np.zeros((4, 4)), np.full((4, 4), 255.0)) == 65025.0

    def test_mse_against_loops(self):
        rng = np.random.default_rng(1)
        a, b = rng.uniform(0, 255, (13, 17)), rng.uniform(0, 255, (13, 17))
        total = 0.0
        for i in range(13):
            for j in range(17):
                total += (a[i, j] - b[i, j]) ** 2
        assert mse(a, b) == pytest.approx(total / (13 * 17), rel=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            mse(np.zeros((2, 2)), np.zeros((2, 3)))
        with pytest.raises(InputError):
            psnr(np.zeros((2, 2)), np.zeros((3, 2)))

    def test_psnr_zero_db(self):
        assert psnr(np.zeros((3, 3)), np.full((3, 3), 255.0)) == pytest.approx(0.0, abs=1e-12)

    def test_psnr_identical(self):
        x = np.ones((3, 3))
        assert psnr(x, x) == math.inf

    def test_psnr_awgn(self):
        expected = 20 * math.log10(255 / 50)
        assert expected == pytest.approx(14.15, abs=0.005)
        img = np.full((512, 512), 128.0)
        assert psnr(img, add_awgn(img, NoiseSpec(50, 0))) == pytest.approx(expected, abs=0.1)
