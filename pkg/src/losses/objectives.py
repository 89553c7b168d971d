"""
Training objectives.

Adversarial (non-saturating with R1), perceptual, identity, contextual, feature
matching, code dispersion and the ModRes weight regularizer. Feature-based
losses read their features from a FeatureExtractor passed by the caller;
LossSuite bundles the extractor and embedder for the training loops.
"""

import logging
from typing import Dict, Mapping, Optional, Sequence, Tuple

import torch
import torch.nn.functional as F

from ..errors import ContractViolation, require
from ..numerics.adain import channel_stats
from .extractor import TAPS, FeatureExtractor, IdentityEmbedder

logger = logging.getLogger(__name__)

CX_BANDWIDTH = 0.5
CX_EPS = 1e-5
CX_MAX_VECTORS = 1024

DEFAULT_TAPS = {"level1": 1.0, "level2": 1.0, "level3": 1.0}


# -- adversarial -------------------------------------------------------------

def r1_penalty(real_logit: torch.Tensor, real_images: torch.Tensor) -> torch.Tensor:
    """Mean over the batch of ‖∇_x D(x_real)‖²; zero when D ignores its input."""
    if not real_logit.requires_grad or not real_images.requires_grad:
        return real_logit.new_zeros(())
    grad, = torch.autograd.grad(real_logit.sum(), real_images,
                                create_graph=True, allow_unused=True)
    if grad is None:
        return real_logit.new_zeros(())
    return grad.pow(2).flatten(1).sum(dim=1).mean()


def discriminator_loss(real_logit: torch.Tensor, fake_logit: torch.Tensor,
                       real_images: Optional[torch.Tensor] = None,
                       r1_gamma: float = 1.0) -> torch.Tensor:
    loss = F.softplus(fake_logit).mean() + F.softplus(-real_logit).mean()
    if r1_gamma > 0 and real_images is not None:
        loss = loss + 0.5 * r1_gamma * r1_penalty(real_logit, real_images)
    return loss


def generator_loss(fake_logit: torch.Tensor) -> torch.Tensor:
    return F.softplus(-fake_logit).mean()


def adv_losses(real_logit: torch.Tensor, fake_logit: torch.Tensor,
               real_images: Optional[torch.Tensor] = None,
               r1_gamma: float = 1.0) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Non-saturating adversarial losses.

    Args:
        real_logit: D(x_real), shape (B,)
        fake_logit: D(G(...)), shape (B,)
        real_images: Real batch the real logits were computed from, with
            requires_grad set, for the R1 term
        r1_gamma: R1 coefficient

    Returns:
        (L_D, L_G)
    """
    return (discriminator_loss(real_logit, fake_logit, real_images, r1_gamma),
            generator_loss(fake_logit))


# -- feature losses ----------------------------------------------------------

def _check_taps(tap_weights: Mapping[str, float]):
    for tap in tap_weights:
        if tap not in TAPS:
            raise ContractViolation(f"unknown feature tap '{tap}', expected one of {TAPS}")


def perceptual(extractor: FeatureExtractor, x: torch.Tensor, y: torch.Tensor,
               tap_weights: Mapping[str, float] = DEFAULT_TAPS) -> torch.Tensor:
    """Σ_tap weight·MSE(F(x)[tap], F(y)[tap])."""
    _check_taps(tap_weights)
    require(x.shape == y.shape, f"perceptual needs equal shapes, got {tuple(x.shape)} and {tuple(y.shape)}")
    fx, fy = extractor(x), extractor(y)
    total = x.new_zeros(())
    for tap, weight in tap_weights.items():
        if weight:
            total = total + weight * F.mse_loss(fx[tap], fy[tap])
    return total


def perceptual_per_sample(extractor: FeatureExtractor, x: torch.Tensor, y: torch.Tensor,
                          tap_weights: Mapping[str, float] = DEFAULT_TAPS) -> torch.Tensor:
    """Like perceptual but one value per batch element, shape (B,)."""
    _check_taps(tap_weights)
    fx, fy = extractor(x), extractor(y)
    total = x.new_zeros(x.shape[0])
    for tap, weight in tap_weights.items():
        if weight:
            total = total + weight * (fx[tap] - fy[tap]).pow(2).flatten(1).mean(dim=1)
    return total


def identity_loss(embedder: IdentityEmbedder, x: torch.Tensor, y: torch.Tensor,
                  allow_untrained: bool = False) -> torch.Tensor:
    """1 − cosine between identity embeddings, averaged over the batch; in [0, 2]."""
    ex = embedder.embed(x, allow_untrained)
    ey = embedder.embed(y, allow_untrained)
    return (1.0 - F.cosine_similarity(ex, ey, dim=-1)).mean()


def _feature_vectors(features: torch.Tensor, max_vectors: int) -> torch.Tensor:
    """(C, H, W) -> (N, C), strided down to at most max_vectors rows."""
    vectors = features.flatten(1).t()
    if vectors.shape[0] > max_vectors:
        step = -(-vectors.shape[0] // max_vectors)
        vectors = vectors[::step]
    return vectors


def contextual_from_vectors(fx: torch.Tensor, fs: torch.Tensor,
                            bandwidth: float = CX_BANDWIDTH,
                            eps: float = CX_EPS) -> torch.Tensor:
    """
    Contextual loss between two feature sets.

    Args:
        fx: (N, C) feature vectors of the generated image
        fs: (M, C) feature vectors of the style image

    Returns:
        −log(mean_i max_j A_ij), A = softmax_j((1 − d̃_ij) / h)
    """
    require(fx.shape[0] >= 1 and fs.shape[0] >= 1, "contextual loss needs at least one feature vector")
    if not bool(fx.abs().sum() > 0) or not bool(fs.abs().sum() > 0):
        raise ContractViolation("contextual loss got all-zero features")
    center = fs.mean(dim=0, keepdim=True)
    x = F.normalize(fx - center, dim=1)
    s = F.normalize(fs - center, dim=1)
    distance = 1.0 - x @ s.t()
    relative = distance / (distance.min(dim=1, keepdim=True).values + eps)
    affinity = torch.softmax((1.0 - relative) / bandwidth, dim=1)
    return -torch.log(affinity.max(dim=1).values.mean())


def contextual(extractor: FeatureExtractor, x: torch.Tensor, s: torch.Tensor,
               bandwidth: float = CX_BANDWIDTH, eps: float = CX_EPS,
               max_vectors: int = CX_MAX_VECTORS) -> torch.Tensor:
    """Contextual loss on the level3 tap, averaged over the batch."""
    require(x.shape[0] == s.shape[0], "contextual needs equal batch sizes")
    fx = extractor(x)["level3"]
    fs = extractor(s)["level3"]
    losses = [contextual_from_vectors(_feature_vectors(fx[b], max_vectors),
                                      _feature_vectors(fs[b], max_vectors),
                                      bandwidth, eps)
              for b in range(x.shape[0])]
    return torch.stack(losses).mean()


def statistics_distance(fx: torch.Tensor, fs: torch.Tensor) -> torch.Tensor:
    """‖μ(fx) − μ(fs)‖² + ‖σ(fx) − σ(fs)‖² over channels, averaged over the batch."""
    mean_x, std_x = channel_stats(fx)
    mean_s, std_s = channel_stats(fs)
    per_sample = ((mean_x - mean_s).pow(2) + (std_x - std_s).pow(2)).flatten(1).sum(dim=1)
    return per_sample.mean()


def feature_matching(extractor: FeatureExtractor, x: torch.Tensor, s: torch.Tensor,
                     taps: Sequence[str] = TAPS) -> torch.Tensor:
    """Σ_tap statistics_distance(F(x)[tap], F(s)[tap])."""
    _check_taps({tap: 1.0 for tap in taps})
    fx, fs = extractor(x), extractor(s)
    return sum((statistics_distance(fx[tap], fs[tap]) for tap in taps), x.new_zeros(()))


# -- regularizers ------------------------------------------------------------

def code_dispersion(z_plus: torch.Tensor) -> torch.Tensor:
    """
    ‖σ(z+)‖₁: sum over columns of the population std across rows.

    Args:
        z_plus: (L, D) or (B, L, D); batched input is averaged over B

    Raises:
        ContractViolation: if L < 2
    """
    require(z_plus.dim() in (2, 3), f"code_dispersion expects (L, D) or (B, L, D), got {tuple(z_plus.shape)}")
    rows = z_plus.shape[-2]
    require(rows >= 2, f"code_dispersion needs at least two rows, got {rows}")
    mean = z_plus.mean(dim=-2, keepdim=True)
    std = (z_plus - mean).pow(2).mean(dim=-2).clamp_min(1e-20).sqrt()
    value = std.sum(dim=-1)
    return value.mean() if value.dim() else value


def modres_l2(extrinsic) -> torch.Tensor:
    """Euclidean norm of all ModRes conv kernels concatenated."""
    kernels = extrinsic.modres_kernels()
    flat = torch.cat([k.reshape(-1) for k in kernels])
    return torch.linalg.vector_norm(flat)


class LossSuite:
    """
    Extractor and embedder bundled with the fixed loss constants.

    Example:
        suite = LossSuite(FeatureExtractor(seed), embedder)
        suite.perceptual(fake, target, {"level2": 0.5, "level3": 1.0})
    """

    def __init__(self, extractor: FeatureExtractor, embedder: Optional[IdentityEmbedder] = None,
                 allow_untrained_embedder: bool = False):
        self.extractor = extractor
        self.embedder = embedder
        self.allow_untrained_embedder = allow_untrained_embedder

    def to(self, device) -> "LossSuite":
        self.extractor.to(device)
        if self.embedder is not None:
            self.embedder.to(device)
        return self

    def perceptual(self, x, y, tap_weights: Mapping[str, float] = DEFAULT_TAPS):
        return perceptual(self.extractor, x, y, tap_weights)

    def perceptual_per_sample(self, x, y, tap_weights: Mapping[str, float] = DEFAULT_TAPS):
        return perceptual_per_sample(self.extractor, x, y, tap_weights)

    def identity(self, x, y):
        if self.embedder is None:
            raise ContractViolation("identity loss requested without an embedder")
        return identity_loss(self.embedder, x, y, self.allow_untrained_embedder)

    def contextual(self, x, s):
        return contextual(self.extractor, x, s)

    def feature_matching(self, x, s):
        return feature_matching(self.extractor, x, s)

    def components(self, **terms: torch.Tensor) -> Dict[str, float]:
        """Detached float view of loss terms for metric traces."""
        return {name: float(value.detach()) for name, value in terms.items()}
