import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from pulsevox.config import MpdConfig, MrsdConfig
from pulsevox.discriminators import (
    Discriminators,
    MultiPeriodDiscriminator,
    MultiResolutionSpectrogramDiscriminator,
    PeriodDiscriminator,
    reshape_period,
)
from pulsevox.errors import ConfigError, InvalidInput

MPD = MpdConfig(channels=(2, 4, 8, 8, 8))
MRSD = MrsdConfig(channels=(2, 2, 2, 2, 2, 1))


def conv_rows_oracle(rows: int, kernel: int, stride: int, pad: int, n_convs: int) -> int:
    for _ in range(n_convs):
        rows = (rows + 2 * pad - kernel) // stride + 1
    return rows


def stft_frames_oracle(n: int, win: int, hop: int) -> int:
    length = n + 2 * (win // 2)
    count, start = 0, 0
    while start + win <= length:
        count += 1
        start += hop
    return count


class TestReshapePeriod:
    def test_exact_division(self):
        out = reshape_period(torch.arange(12.0), 3)
        assert out.shape == (4, 3)

    def test_padding_rule(self):
        out = reshape_period(torch.arange(1.0, 11.0), 3)
        assert out.shape == (4, 3)
        assert out[3, 1] == 0.0 and out[3, 2] == 0.0

    def test_row_major_layout(self):
        out = reshape_period(torch.arange(12.0), 3)
        np.testing.assert_array_equal(out[2].numpy(), [6.0, 7.0, 8.0])

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(1, 200), p=st.integers(1, 13))
    def test_index_oracle(self, n, p):
        wave = torch.arange(1.0, n + 1.0)
        out = reshape_period(wave, p)
        rows = -(-n // p)
        assert out.shape == (rows, p)
        for r in range(rows):
            for c in range(p):
                i = r * p + c
                expected = wave[i] if i < n else 0.0
                assert out[r, c] == expected


class TestMpd:
    def test_structural_contract(self):
        torch.manual_seed(0)
        mpd = MultiPeriodDiscriminator(MPD)
        out = mpd(torch.randn(2, 4000))
        assert len(out.scores) == 5
        assert all(len(f) == 6 for f in out.features)
        assert [sub.period for sub in mpd.subs] == [2, 3, 5, 7, 11]

    def test_padding_consistency(self):
        torch.manual_seed(1)
        sub = PeriodDiscriminator(3, MPD)
        wave = torch.randn(1, 1000)
        padded = torch.nn.functional.pad(wave, (0, 2))  # to 1002 = 334 * 3
        s1, f1 = sub(wave)
        s2, f2 = sub(padded)
        assert torch.equal(s1, s2)
        assert all(torch.equal(a, b) for a, b in zip(f1, f2))

    def test_score_rows_shrink_by_stride_product(self):
        torch.manual_seed(2)
        mpd = MultiPeriodDiscriminator(MPD)
        n = 9 * 3**5 * 11  # tall enough for five stride-3 convs at every period
        out = mpd(torch.randn(1, n))
        for score, p in zip(out.scores, MPD.periods):
            rows = -(-n // p)
            expected = conv_rows_oracle(rows, MPD.kernel_size, MPD.stride, (MPD.kernel_size - 1) // 2, 5)
            assert score.shape == (1, 1, expected, p)

    def test_too_short_wave_rejected(self):
        mpd = MultiPeriodDiscriminator(MPD)
        with pytest.raises(InvalidInput):
            mpd(torch.randn(1, 7))

    def test_noncoprime_periods_rejected(self):
        with pytest.raises(ConfigError):
            MpdConfig(periods=(2, 3, 4))
        with pytest.raises(ConfigError):
            MpdConfig(periods=(1, 2))


class TestMrsd:
    def test_structural_contract(self):
        torch.manual_seed(3)
        mrsd = MultiResolutionSpectrogramDiscriminator(MRSD)
        out = mrsd(torch.randn(1, 6000))
        assert len(out.scores) == 4
        assert all(len(f) == 6 for f in out.features)

    def test_determinism(self):
        torch.manual_seed(4)
        mrsd = MultiResolutionSpectrogramDiscriminator(MRSD)
        wave = torch.zeros(1, 6000)
        a = mrsd(wave)
        b = mrsd(wave)
        assert all(torch.equal(x, y) for x, y in zip(a.scores, b.scores))

    def test_spectrogram_frames_match_placement_oracle(self):
        torch.manual_seed(5)
        mrsd = MultiResolutionSpectrogramDiscriminator(MRSD)
        n = 7013
        out = mrsd(torch.randn(1, n))
        # first conv has stride (1, 1) and same-padding, so its feature map
        # keeps the spectrogram's frame axis
        for feats, (fft, win, hop) in zip(out.features, MRSD.resolutions):
            assert feats[0].shape[2] == stft_frames_oracle(n, win, hop)

    def test_too_short_wave_rejected(self):
        mrsd = MultiResolutionSpectrogramDiscriminator(MRSD)
        with pytest.raises(InvalidInput):
            mrsd(torch.randn(1, 1000))

    def test_gradient_flows_to_waveform(self):
        torch.manual_seed(6)
        mrsd = MultiResolutionSpectrogramDiscriminator(MRSD).double()
        wave = torch.randn(1, 6000, dtype=torch.float64, requires_grad=True)
        total = sum(s.sum() for s in mrsd(wave).scores)
        total.backward()
        assert wave.grad is not None and float(wave.grad.abs().max()) > 0
        # finite-difference spot check
        idx = 713
        eps = 1e-6
        with torch.no_grad():
            plus = wave.detach().clone()
            plus[0, idx] += eps
            minus = wave.detach().clone()
            minus[0, idx] -= eps
            fd = (
                float(sum(s.sum() for s in mrsd(plus).scores))
                - float(sum(s.sum() for s in mrsd(minus).scores))
            ) / (2 * eps)
        ad = float(wave.grad[0, idx])
        assert abs(fd - ad) <= 1e-3 * max(1e-8, abs(fd), abs(ad))


class TestCombined:
    def test_nine_scores_total(self):
        torch.manual_seed(7)
        d = Discriminators(MPD, MRSD)
        out = d(torch.randn(1, 6000))
        assert len(out.scores) == 9
        assert len(out.features) == 9

    def test_sub_discriminator_independence(self):
        torch.manual_seed(8)
        d = Discriminators(MPD, MRSD)
        wave = torch.randn(1, 6000)
        before = d(wave)
        with torch.no_grad():
            for name, p in d.mpd.subs[2].named_parameters():
                if not name.endswith("original1"):
                    p.zero_()
        after = d(wave)
        for i in range(9):
            same = torch.equal(before.scores[i], after.scores[i])
            assert same == (i != 2)

    def test_mpd_gradient_flows_to_waveform(self):
        torch.manual_seed(9)
        d = MultiPeriodDiscriminator(MPD)
        wave = torch.randn(1, 2000, requires_grad=True)
        sum(s.sum() for s in d(wave).scores).backward()
        assert float(wave.grad.abs().max()) > 0

    def test_feature_alignment_between_passes(self):
        torch.manual_seed(10)
        d = Discriminators(MPD, MRSD)
        a = d(torch.randn(1, 6000))
        b = d(torch.randn(1, 6000))
        for fa, fb in zip(a.features, b.features):
            assert len(fa) == len(fb)
            assert all(x.shape == y.shape for x, y in zip(fa, fb))
