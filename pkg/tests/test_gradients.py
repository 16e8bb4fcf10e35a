"""
Finite-difference checks of the analytic gradients of every training loss,
in float64 on miniature inputs. Inputs are checked with gradcheck; network
parameters with central differences over a sampled subset of entries.
"""

import dataclasses

import pytest
import torch
from torch.func import functional_call

from helpers.networks import AlexNetDiscriminator, FilterNet, GeneratorNet
from steps.step2_train_vocoder import disc_hinge_loss, feature_matching_loss, generator_adversarial_loss
from steps.step3_train_privacy import disc_filter_loss, disc_generator_loss, filter_loss, generator_loss

STEP = 1e-6
SAMPLED_ENTRIES = 12


@pytest.fixture
def cfg(tiny_train):
    # Epsilon far below any reachable distortion keeps the penalty on its smooth branch.
    return dataclasses.replace(tiny_train, epsilon=1e-4, lambda_penalty=1.0)


@pytest.fixture
def nets(tiny_unet, tiny_disc):
    torch.manual_seed(0)
    return {
        "filter": FilterNet(tiny_unet).double().eval(),
        "generator": GeneratorNet(tiny_unet).double().eval(),
        "disc_filter": AlexNetDiscriminator(2, tiny_disc).double().eval(),
        "disc_gen": AlexNetDiscriminator(3, tiny_disc).double().eval(),
    }


@pytest.fixture
def inputs():
    generator = torch.Generator().manual_seed(1)
    m = (torch.rand(2, 8, 4, generator=generator, dtype=torch.float64) * 2 - 1).requires_grad_(True)
    z = torch.randn(2, 8, 4, generator=generator, dtype=torch.float64)
    return m, z, torch.tensor([0, 1]), torch.tensor([1, 1])


class WithParameters:
    """Calls a module with an explicit parameter dict instead of its own parameters."""

    def __init__(self, module, params):
        self.module = module
        self.params = params

    def __call__(self, *args):
        return functional_call(self.module, self.params, args)


def check(function, *tensors):
    assert torch.autograd.gradcheck(function, tensors, eps=STEP, atol=1e-5, rtol=1e-3)


def sampled_entries(params, count, seed=0):
    """(name, flat index) pairs drawn across every parameter tensor."""
    generator = torch.Generator().manual_seed(seed)
    names = sorted(params)
    entries = []
    for _ in range(count):
        name = names[int(torch.randint(len(names), (1,), generator=generator))]
        index = int(torch.randint(params[name].numel(), (1,), generator=generator))
        entries.append((name, index))
    return entries


def check_parameters(loss_of, module, count=SAMPLED_ENTRIES):
    """
    Compare autograd against central differences for sampled parameter entries.

    Args:
        loss_of: Maps a {name: tensor} parameter dict to a scalar loss
        module: Module whose named parameters are perturbed
    """
    params = {name: p.detach().clone().requires_grad_(True) for name, p in module.named_parameters()}
    grads = dict(zip(params, torch.autograd.grad(loss_of(params), list(params.values()), allow_unused=True)))

    def shifted(name, index, delta):
        moved = {k: v.detach().clone() for k, v in params.items()}
        moved[name].view(-1)[index] += delta
        with torch.no_grad():
            return float(loss_of(moved))

    for name, index in sampled_entries(params, count):
        numeric = (shifted(name, index, STEP) - shifted(name, index, -STEP)) / (2 * STEP)
        analytic = 0.0 if grads[name] is None else float(grads[name].reshape(-1)[index])
        assert numeric == pytest.approx(analytic, rel=1e-3, abs=1e-5), name


class TestPrivacyLossGradients:
    """Gradients of the four privacy losses with respect to their inputs."""

    def test_filter_loss(self, nets, inputs, cfg):
        """L_F through F and the frozen D_F."""
        m, z, s, _ = inputs
        check(lambda x: filter_loss(nets["filter"], nets["disc_filter"], x, z, s, cfg).loss, m)

    def test_generator_loss_wrt_original(self, nets, inputs, cfg):
        """L_G seen from the clean spectrogram (distortion term)."""
        m, z, s, s_syn = inputs
        m_prime = torch.tanh(m.detach() * 0.5)
        check(lambda x: generator_loss(nets["generator"], nets["disc_gen"], x, m_prime, s_syn, z, cfg, s=s).loss, m)

    def test_disc_filter_loss(self, nets, inputs):
        """L_DF with respect to the filtered spectrogram."""
        m, _, s, _ = inputs
        check(lambda x: disc_filter_loss(nets["disc_filter"], x, s), m)

    def test_disc_generator_loss_real_branch(self, nets, inputs):
        """Only the real term of L_DG depends on the clean spectrogram."""
        m, _, s, _ = inputs
        m_dprime = m.detach() * 0.5
        check(lambda x: disc_generator_loss(nets["disc_gen"], x, m_dprime, s), m)

    def test_disc_parameters_receive_gradients(self, nets, inputs):
        """Every D_F parameter gets a gradient and the detached input none."""
        m, _, s, _ = inputs
        disc = nets["disc_filter"]
        disc_filter_loss(disc, m, s).backward()
        assert all(p.grad is not None for p in disc.parameters())
        assert m.grad is None


class TestPrivacyParameterGradients:
    """Gradients of the four privacy losses with respect to theta_F, theta_G, theta_DF and theta_DG."""

    def test_filter_parameters(self, nets, inputs, cfg):
        """dL_F / dtheta_F, adversarial and distortion terms together."""
        m, z, s, _ = inputs
        m = m.detach()
        check_parameters(
            lambda p: filter_loss(WithParameters(nets["filter"], p), nets["disc_filter"], m, z, s, cfg).loss,
            nets["filter"],
        )

    def test_generator_parameters(self, nets, inputs, cfg):
        """dL_G / dtheta_G, including the cross-entropy through D_G."""
        m, z, s, s_syn = inputs
        m = m.detach()
        m_prime = torch.tanh(m * 0.5)
        check_parameters(
            lambda p: generator_loss(WithParameters(nets["generator"], p), nets["disc_gen"], m, m_prime, s_syn, z, cfg, s=s).loss,
            nets["generator"],
        )

    def test_generator_parameters_fake_target(self, nets, inputs, cfg):
        """dL_G / dtheta_G when G aims at the fake class."""
        m, z, s, s_syn = inputs
        m = m.detach()
        fake_cfg = dataclasses.replace(cfg, generator_target="fake")
        check_parameters(
            lambda p: generator_loss(WithParameters(nets["generator"], p), nets["disc_gen"], m, m * 0.5, s_syn, z, fake_cfg).loss,
            nets["generator"],
        )

    def test_disc_filter_parameters(self, nets, inputs):
        """dL_DF / dtheta_DF on filtered spectrograms."""
        m, z, s, _ = inputs
        with torch.no_grad():
            m_prime = nets["filter"](m, z)
        check_parameters(lambda p: disc_filter_loss(WithParameters(nets["disc_filter"], p), m_prime, s), nets["disc_filter"])

    def test_disc_generator_parameters_both_branches(self, nets, inputs):
        """dL_DG / dtheta_DG with the fake-class term on m'' and the real term on m."""
        m, z, s, s_syn = inputs
        m = m.detach()
        with torch.no_grad():
            m_dprime = nets["generator"](torch.tanh(m * 0.5), s_syn, z)
        check_parameters(
            lambda p: disc_generator_loss(WithParameters(nets["disc_gen"], p), m, m_dprime, s),
            nets["disc_gen"],
        )

    def test_disc_generator_fake_branch_alone(self, nets, inputs):
        """The fake-class term by itself: subtracting the real term leaves a checked gradient."""
        m, z, s, s_syn = inputs
        m = m.detach()
        with torch.no_grad():
            m_dprime = nets["generator"](torch.tanh(m * 0.5), s_syn, z)

        def fake_term(p):
            disc = WithParameters(nets["disc_gen"], p)
            real_term = torch.nn.functional.cross_entropy(disc(m), s)
            return disc_generator_loss(disc, m, m_dprime, s) - real_term

        check_parameters(fake_term, nets["disc_gen"])


class TestVocoderLossGradients:
    """Gradients of the MelGAN hinge, adversarial and feature matching losses."""

    def test_hinge(self):
        """Hinge loss away from its margins."""
        real = torch.tensor([0.3, -0.4, 1.7], dtype=torch.float64, requires_grad=True)
        fake = torch.tensor([-0.2, 0.5, -1.6], dtype=torch.float64, requires_grad=True)
        check(disc_hinge_loss, real, fake)

    def test_feature_matching(self):
        """L1 feature distance away from its kink."""
        generator = torch.Generator().manual_seed(2)
        real = torch.randn(2, 3, 5, generator=generator, dtype=torch.float64)
        fake = (real + 0.5 + 0.1 * torch.rand(2, 3, 5, generator=generator, dtype=torch.float64)).requires_grad_(True)
        score = torch.zeros(2, 1, 5, dtype=torch.float64)
        check(lambda f: feature_matching_loss([[real, score]], [[f, score]]), fake)

    def test_generator_adversarial(self):
        """Adversarial loss over one scale."""
        score = torch.randn(2, 1, 7, dtype=torch.float64, requires_grad=True)
        check(lambda x: generator_adversarial_loss([[x]]), score)


if __name__ == "__main__":
    pytest.main([__file__])
