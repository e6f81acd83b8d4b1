import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from pulsevox.config import AuxLossConfig, LossWeights
from pulsevox.discriminators import DiscriminatorOutput
from pulsevox.errors import InvalidInput
from pulsevox.losses import (
    adversarial_d_loss,
    adversarial_g_loss,
    aux_spectrogram_phase_loss,
    discriminator_total_loss,
    feature_match_loss,
    generator_total_loss,
    log_magnitude_loss,
    phase_convergence,
    spectral_convergence,
    wrap_phase,
)

SR = 48000


def fd_gradient(fn, x: torch.Tensor, coords, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar fn at selected flat coords."""
    flat = x.view(-1)
    out = np.zeros(len(coords))
    with torch.no_grad():
        for j, idx in enumerate(coords):
            orig = float(flat[idx])
            flat[idx] = orig + eps
            up = float(fn())
            flat[idx] = orig - eps
            down = float(fn())
            flat[idx] = orig
            out[j] = (up - down) / (2 * eps)
    return out


def check_gradient(fn, x: torch.Tensor, n_coords: int = 24, eps: float = 1e-6, seed: int = 0):
    """Autograd vs central differences, relative error < 1e-3 on a coord sample."""
    if x.grad is not None:
        x.grad = None
    fn().backward()
    ad_full = x.grad.detach().view(-1).numpy().copy()
    rng = np.random.default_rng(seed)
    coords = rng.choice(x.numel(), size=min(n_coords, x.numel()), replace=False)
    fd = fd_gradient(fn, x, coords, eps)
    ad = ad_full[coords]
    denom = max(float(np.linalg.norm(fd)), 1e-12)
    rel = float(np.linalg.norm(fd - ad)) / denom
    assert rel < 1e-3, f"gradient relative error {rel:.2e}"


class TestSpectralConvergence:
    def test_identical_inputs(self):
        x = torch.rand(4, 5) + 0.1
        assert float(spectral_convergence(x, x)) == 0.0

    def test_double_amplitude_is_half(self):
        y = torch.rand(6, 3, dtype=torch.float64) + 0.2
        assert float(spectral_convergence(2.0 * y, y)) == pytest.approx(0.5, abs=1e-12)

    def test_closed_form_3_4(self):
        x = torch.tensor([[3.0, 4.0]])
        y = torch.zeros(1, 2)
        assert float(spectral_convergence(x, y)) == pytest.approx(1.0, abs=1e-12)

    def test_real_denominator_switch(self):
        y = torch.rand(4, 4, dtype=torch.float64) + 0.2
        assert float(spectral_convergence(2.0 * y, y, denominator="real")) == pytest.approx(1.0, abs=1e-12)

    def test_gradient(self):
        torch.manual_seed(0)
        x = (torch.rand(8, 9, dtype=torch.float64) + 0.1).requires_grad_()
        y = torch.rand(8, 9, dtype=torch.float64) + 0.1
        check_gradient(lambda: spectral_convergence(x, y), x)


class TestLogMagnitude:
    def test_identical_inputs(self):
        x = torch.rand(3, 3) + 0.1
        assert float(log_magnitude_loss(x, x)) == 0.0

    def test_factor_e_gives_one(self):
        y = torch.rand(5, 5, dtype=torch.float64) + 0.5
        assert float(log_magnitude_loss(math.e * y, y)) == pytest.approx(1.0, abs=1e-9)

    def test_closed_form_half_elements(self):
        x = torch.tensor([1.0, math.e**2], dtype=torch.float64)
        y = torch.ones(2, dtype=torch.float64)
        assert float(log_magnitude_loss(x, y)) == pytest.approx(1.0, abs=1e-12)

    def test_nonpositive_entries_clamped(self):
        x = torch.tensor([0.0, -1.0])
        y = torch.tensor([1e-5, 1e-5])
        assert float(log_magnitude_loss(x, y)) == 0.0

    def test_gradient(self):
        torch.manual_seed(1)
        x = (torch.rand(7, 6, dtype=torch.float64) + 0.3).requires_grad_()
        y = torch.rand(7, 6, dtype=torch.float64) + 0.3
        check_gradient(lambda: log_magnitude_loss(x, y), x)


class TestPhaseConvergence:
    def test_identical_phases(self):
        x = torch.rand(4, 4) * 2 - 1
        assert float(phase_convergence(x, x)) == 0.0

    def test_wrap_across_pi(self):
        x = torch.tensor([math.pi - 0.1], dtype=torch.float64)
        y = torch.tensor([-math.pi + 0.1], dtype=torch.float64)
        expected = 0.2 / (math.pi - 0.1)
        assert float(phase_convergence(x, y)) == pytest.approx(expected, abs=1e-12)

    def test_full_turn_costs_nothing(self):
        x = torch.rand(5, 5, dtype=torch.float64) * 2 - 1
        y = x + 2 * math.pi
        assert float(phase_convergence(x, y)) == pytest.approx(0.0, abs=1e-9)

    def test_wrap_maps_into_half_open_interval(self):
        d = torch.tensor([math.pi, -math.pi, 3 * math.pi, 0.0, 2 * math.pi], dtype=torch.float64)
        w = wrap_phase(d)
        assert torch.all(w > -math.pi - 1e-12) and torch.all(w <= math.pi + 1e-12)
        np.testing.assert_allclose(w.numpy(), [math.pi, math.pi, math.pi, 0.0, 0.0], atol=1e-12)

    def test_gradient(self):
        torch.manual_seed(2)
        x = ((torch.rand(6, 6, dtype=torch.float64) * 2 - 1) * 3.0).requires_grad_()
        y = (torch.rand(6, 6, dtype=torch.float64) * 2 - 1) * 3.0
        check_gradient(lambda: phase_convergence(x, y), x)


class TestAuxLoss:
    CFG = AuxLossConfig()

    def waves(self, n=2048, seed=3, scale=0.5):
        rng = np.random.default_rng(seed)
        return torch.from_numpy(scale * rng.normal(size=n))

    def test_identical_waves_give_zero(self):
        w = self.waves()
        assert float(aux_spectrogram_phase_loss(w, w.clone(), self.CFG, SR)) == pytest.approx(0.0, abs=1e-6)

    def test_doubled_wave_closed_form(self):
        real = self.waves(n=4096, seed=4, scale=0.5)
        fake = 2.0 * real
        # Every magnitude doubles and stays above the floor: each STFT
        # resolution contributes SC 0.5 + log-mag log 2 (phase exactly 0);
        # each mel resolution contributes the same pair.
        got = float(aux_spectrogram_phase_loss(fake, real, self.CFG, SR))
        expected = (0.5 + math.log(2.0)) + (0.5 + math.log(2.0))
        assert got == pytest.approx(expected, abs=1e-6)

    def test_gradient_on_short_wave(self):
        torch.manual_seed(5)
        real = self.waves(n=2048, seed=6, scale=0.4)
        fake = (real + 0.05 * torch.from_numpy(np.random.default_rng(7).normal(size=2048))).requires_grad_()
        check_gradient(
            lambda: aux_spectrogram_phase_loss(fake, real, self.CFG, SR), fake, n_coords=16
        )

    def test_phase_weight_zero_switch(self):
        cfg = AuxLossConfig(phase_weight=0.0)
        real = self.waves(n=2048, seed=8)
        fake = self.waves(n=2048, seed=9)
        with_phase = float(aux_spectrogram_phase_loss(real, fake, self.CFG, SR))
        without = float(aux_spectrogram_phase_loss(real, fake, cfg, SR))
        assert without < with_phase

    def test_positivity_when_magnitudes_differ(self):
        real = self.waves(n=2048, seed=10)
        fake = real * 1.3
        assert float(aux_spectrogram_phase_loss(fake, real, self.CFG, SR)) > 0

    def test_length_mismatch_rejected(self):
        with pytest.raises(InvalidInput):
            aux_spectrogram_phase_loss(self.waves(2048), self.waves(2049), self.CFG, SR)

    def test_short_wave_rejected(self):
        w = self.waves(600)
        with pytest.raises(InvalidInput):
            aux_spectrogram_phase_loss(w, w.clone(), self.CFG, SR)


class TestAdversarial:
    def scores(self, value, shapes=((1, 1, 7, 2), (1, 1, 13, 3), (2, 1, 4, 4))):
        return [torch.full(s, float(value)) for s in shapes]

    def test_g_loss_closed_forms(self):
        assert float(adversarial_g_loss(self.scores(1.0))) == pytest.approx(0.0)
        assert float(adversarial_g_loss(self.scores(0.0))) == pytest.approx(1.0)
        assert float(adversarial_g_loss(self.scores(0.5))) == pytest.approx(0.25)

    def test_d_loss_closed_forms(self):
        assert float(adversarial_d_loss(self.scores(1.0), self.scores(0.0))) == pytest.approx(0.0)
        assert float(adversarial_d_loss(self.scores(0.0), self.scores(1.0))) == pytest.approx(2.0)
        assert float(adversarial_d_loss(self.scores(0.5), self.scores(0.5))) == pytest.approx(0.5)

    def test_gradients(self):
        torch.manual_seed(11)
        s = torch.rand(1, 1, 9, 5, dtype=torch.float64).requires_grad_()
        check_gradient(lambda: adversarial_g_loss([s]), s)
        r = torch.rand(1, 1, 9, 5, dtype=torch.float64).requires_grad_()
        check_gradient(lambda: adversarial_d_loss([r], [r * 0.5 + 0.1]), r)

    def test_empty_rejected(self):
        with pytest.raises(InvalidInput):
            adversarial_g_loss([])


def make_output(tensors):
    return DiscriminatorOutput(scores=[t[-1] for t in tensors], features=[list(t) for t in tensors])


class TestFeatureMatch:
    def test_identical_outputs_give_zero(self):
        torch.manual_seed(12)
        feats = [[torch.rand(1, 2, 5, 3) for _ in range(4)] for _ in range(3)]
        out = make_output(feats)
        assert float(feature_match_loss(out, out)) == 0.0

    def test_constant_offset_single_layer(self):
        torch.manual_seed(13)
        real = [[torch.rand(1, 2, 6, 2, dtype=torch.float64) for _ in range(3)]]
        fake = [[t.clone() for t in real[0]]]
        fake[0][1] = fake[0][1] + 0.37
        loss = feature_match_loss(make_output(real), make_output(fake))
        assert float(loss) == pytest.approx(0.37, abs=1e-12)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(14)
        real = [[torch.from_numpy(rng.normal(size=(1, 3, 4, 2))) for _ in range(3)] for _ in range(2)]
        fake = [[torch.from_numpy(rng.normal(size=(1, 3, 4, 2))) for _ in range(3)] for _ in range(2)]
        got = float(feature_match_loss(make_output(real), make_output(fake)))
        expected = 0.0
        for rl, fl in zip(real, fake):
            for r, f in zip(rl, fl):
                diff = np.abs(r.numpy() - f.numpy())
                expected += diff.sum() / diff.size
        assert got == pytest.approx(expected, abs=1e-10)

    def test_swap_symmetry(self):
        rng = np.random.default_rng(15)
        real = [[torch.from_numpy(rng.normal(size=(1, 2, 3, 2))) for _ in range(2)]]
        fake = [[torch.from_numpy(rng.normal(size=(1, 2, 3, 2))) for _ in range(2)]]
        a = float(feature_match_loss(make_output(real), make_output(fake)))
        b = float(feature_match_loss(make_output(fake), make_output(real)))
        assert a == pytest.approx(b, abs=1e-15)

    def test_structure_mismatch_rejected(self):
        real = make_output([[torch.zeros(1, 1, 2, 2)] * 3])
        fake = make_output([[torch.zeros(1, 1, 2, 2)] * 2])
        with pytest.raises(InvalidInput):
            feature_match_loss(real, fake)

    def test_gradient(self):
        torch.manual_seed(16)
        f = torch.rand(1, 2, 5, 3, dtype=torch.float64).requires_grad_()
        real = make_output([[torch.rand(1, 2, 5, 3, dtype=torch.float64)]])
        check_gradient(lambda: feature_match_loss(real, make_output([[f]])), f)


class TestTotals:
    def test_weighted_sum_closed_form(self):
        w = LossWeights()
        total = generator_total_loss(
            torch.tensor(0.25), torch.tensor(0.1), torch.tensor(0.05), w
        )
        assert float(total) == pytest.approx(12.75, abs=1e-9)

    def test_all_zero(self):
        w = LossWeights()
        z = torch.tensor(0.0)
        assert float(generator_total_loss(z, z, z, w)) == 0.0

    def test_weight_isolation(self):
        w = LossWeights(adversarial=0.0, auxiliary=1.0, feature_match=0.0)
        total = generator_total_loss(torch.tensor(9.0), torch.tensor(0.125), torch.tensor(4.0), w)
        assert float(total) == pytest.approx(0.125)

    def test_discriminator_total_is_adversarial(self):
        r = [torch.full((1, 1, 2, 2), 0.5)]
        f = [torch.full((1, 1, 2, 2), 0.5)]
        assert float(discriminator_total_loss(r, f)) == pytest.approx(0.5)


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31))
    def test_non_negativity(self, seed):
        rng = np.random.default_rng(seed)
        x = torch.from_numpy(np.abs(rng.normal(size=(4, 5))) + 1e-6)
        y = torch.from_numpy(np.abs(rng.normal(size=(4, 5))) + 1e-6)
        assert float(spectral_convergence(x, y)) >= 0
        assert float(log_magnitude_loss(x, y)) >= 0
        assert float(phase_convergence(x - 2, y - 2)) >= 0
        scores = [torch.from_numpy(rng.normal(size=(1, 1, 3, 2)))]
        assert float(adversarial_g_loss(scores)) >= 0
        assert float(adversarial_d_loss(scores, scores)) >= 0
