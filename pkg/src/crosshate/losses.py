"""Loss terms for the disentanglement objective.

Every term is a pure function of tensors so it can be unit-tested against an
independent oracle and differentiated by autograd. Scalar reductions:
per-sequence / per-latent sums, batch means, and plain sums over the
high-confidence set as noted on each function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch

from .config import ConfigError

PROB_FLOOR = 1e-8


class NumericsError(RuntimeError):
    """A forward pass or loss produced a non-finite value."""


@dataclass
class SoftLabel:
    """Probability vector over the target classes plus its confidence weight."""

    probs: torch.Tensor
    confidence: float

    @classmethod
    def from_probs(cls, probs: torch.Tensor) -> "SoftLabel":
        return cls(probs=probs, confidence=confidence_weight(probs))

    @property
    def argmax(self) -> int:
        # ties break to the lowest class index (torch.argmax picks the first max)
        return int(torch.argmax(self.probs).item())


@dataclass
class HighConfidenceSet:
    """Batch members whose pseudo-label confidence clears the threshold."""

    members: list  # list of (TargetLatent, SoftLabel), batch order preserved
    indices: list = field(default_factory=list)  # positions within the source batch

    def __len__(self) -> int:
        return len(self.members)

    def latents(self) -> torch.Tensor:
        """Stack member latent vectors; keeps autograd edges to the batch tensor."""
        return torch.stack([t.vector for t, _ in self.members])

    def pseudo_probs(self) -> torch.Tensor:
        return torch.stack([lbl.probs for _, lbl in self.members])

    def weights(self) -> torch.Tensor:
        return torch.tensor([lbl.confidence for _, lbl in self.members], dtype=torch.float64)


def confidence_weight(probs: torch.Tensor) -> float:
    """1 - H(p)/log(C) with natural-log entropy; 1 for one-hot, 0 for uniform."""
    if probs.numel() < 2:
        raise ConfigError(f"confidence weight needs >= 2 classes, got {probs.numel()}")
    p = probs.double().clamp(PROB_FLOOR, 1.0)
    entropy = -(p * p.log()).sum()
    weight = 1.0 - entropy.item() / math.log(probs.numel())
    return min(max(weight, 0.0), 1.0)


def select_high_confidence(batch: list, eta: float) -> HighConfidenceSet:
    """Members of `batch` (pairs of latent and SoftLabel) with confidence >= eta."""
    if not 0.0 <= eta <= 1.0:
        raise ConfigError(f"eta must be in [0, 1], got {eta}")
    members, indices = [], []
    for i, (latent, label) in enumerate(batch):
        if label.confidence >= eta:
            members.append((latent, label))
            indices.append(i)
    return HighConfidenceSet(members=members, indices=indices)


def pair_similarity(a: SoftLabel, b: SoftLabel) -> int:
    """1 iff both pseudo-labels put their argmax on the same class."""
    return int(a.argmax == b.argmax)


def _as_vector(x) -> torch.Tensor:
    return x.vector if hasattr(x, "vector") else x


def contrastive_pair(a, b, w_ij: int, beta: float) -> torch.Tensor:
    """w*d^2 + (1-w)*max(0, beta-d)^2 with d the Euclidean distance.

    Accepts raw tensors or latents carrying a .vector. The positive branch uses
    the squared distance directly so coincident points keep a well-defined
    (zero) gradient.
    """
    if beta <= 0:
        raise ConfigError(f"beta must be > 0, got {beta}")
    a, b = _as_vector(a), _as_vector(b)
    d2 = ((a - b) ** 2).sum()
    if w_ij:
        return d2
    d = torch.sqrt(torch.clamp(d2, min=1e-12))
    return torch.clamp(beta - d, min=0.0) ** 2


def contrastive_loss(s: HighConfidenceSet, beta: float) -> torch.Tensor:
    """Sum of contrastive_pair over all ordered pairs of the set, self-pairs excluded.

    Self-pairs would contribute exactly 0 (W_ii = 1 at distance 0); skipping them
    just avoids the wasted work. Empty and singleton sets give 0.
    """
    if beta <= 0:
        raise ConfigError(f"beta must be > 0, got {beta}")
    if len(s) <= 1:
        return torch.tensor(0.0)
    x = s.latents()
    classes = torch.tensor([lbl.argmax for _, lbl in s.members])
    diff = x.unsqueeze(1) - x.unsqueeze(0)
    d2 = (diff**2).sum(dim=-1)
    d = torch.sqrt(torch.clamp(d2, min=1e-12))
    same = (classes.unsqueeze(0) == classes.unsqueeze(1)).to(x.dtype)
    pair_terms = same * d2 + (1.0 - same) * torch.clamp(beta - d, min=0.0) ** 2
    off_diag = ~torch.eye(len(s), dtype=torch.bool)
    return pair_terms[off_diag].sum()


def conf_regularizer(s: HighConfidenceSet, classifier_probs: torch.Tensor) -> torch.Tensor:
    """Mean over the set of KL(uniform || f(X_w)); discourages saturated outputs."""
    if len(s) == 0:
        return torch.tensor(0.0)
    p = classifier_probs.clamp(min=PROB_FLOOR)
    n, n_classes = p.shape
    u = 1.0 / n_classes
    kl_per_member = (u * (math.log(u) - p.log())).sum(dim=1)
    return kl_per_member.mean()


def target_loss(s: HighConfidenceSet, classifier_probs: torch.Tensor) -> torch.Tensor:
    """Confidence-weighted mean KL(pseudo-label || classifier output) over the set."""
    if len(s) == 0:
        return torch.tensor(0.0)
    f = classifier_probs.clamp(min=PROB_FLOOR)
    y = s.pseudo_probs().to(f.dtype).clamp(min=PROB_FLOOR)
    w = s.weights().to(f.dtype)
    kl_per_member = (y * (y.log() - f.log())).sum(dim=1)
    return (w * kl_per_member).sum() / len(s)


def recon_loss(token_ids, predicted_probs: torch.Tensor,
               attention_mask: torch.Tensor | None = None) -> torch.Tensor:
    """Negative log-likelihood of the true tokens under the decoder's rows.

    Per-sequence sum over unmasked positions, then batch mean. Accepts a
    TokenSequence (mask taken from it unless given) or raw [s]/[s, V] single
    sequences or [B, s]/[B, s, V] batches.
    """
    if hasattr(token_ids, "token_ids"):
        if attention_mask is None:
            attention_mask = token_ids.attention_mask
        token_ids = token_ids.token_ids
    if token_ids.dim() == 1:
        token_ids = token_ids.unsqueeze(0)
        predicted_probs = predicted_probs.unsqueeze(0)
        if attention_mask is not None:
            attention_mask = attention_mask.unsqueeze(0)
    vocab = predicted_probs.shape[-1]
    if int(token_ids.max()) >= vocab:
        raise ValueError(f"token id {int(token_ids.max())} out of range for vocab {vocab}")
    picked = predicted_probs.gather(-1, token_ids.unsqueeze(-1)).squeeze(-1)
    nll = -picked.clamp(min=PROB_FLOOR).log()
    if attention_mask is not None:
        nll = nll * attention_mask.to(nll.dtype)
    return nll.sum(dim=1).mean()


def kl_causal(mu, sigma: torch.Tensor | None = None) -> torch.Tensor:
    """Closed-form KL from N(mu, diag(sigma^2)) to the standard normal prior.

    0.5 * sum_k (mu_k^2 + sigma_k^2 - ln sigma_k^2 - 1), batch-meaned for 2-D
    input. Accepts either (mu, sigma) tensors or a causal latent carrying both.
    """
    if sigma is None:
        mu, sigma = mu.mu, mu.sigma
    var = sigma**2
    per_latent = 0.5 * (mu**2 + var - var.log() - 1.0).sum(dim=-1)
    return per_latent.mean()


@dataclass
class LossBreakdown:
    """Every term of one step's objective plus the composed totals, auditable."""

    contrastive: float
    conf: float
    target: float
    recon: float
    kl_causal: float
    hate: float
    vae: float
    total: float
    alpha_t: float
    alpha_c: float
    delta_cont: float
    delta_conf: float

    def check(self, rel_tol: float = 1e-6) -> None:
        """Recompute the composed totals from the parts and compare."""
        d_target = self.target + self.delta_cont * self.contrastive + self.delta_conf * self.conf
        vae = self.recon + self.alpha_t * d_target + self.alpha_c * self.kl_causal
        total = self.hate + vae
        if not math.isclose(vae, self.vae, rel_tol=rel_tol, abs_tol=rel_tol):
            raise AssertionError(f"vae breakdown mismatch: stored {self.vae}, recomputed {vae}")
        if not math.isclose(total, self.total, rel_tol=rel_tol, abs_tol=rel_tol):
            raise AssertionError(f"total breakdown mismatch: stored {self.total}, recomputed {total}")


def compose_losses(*, contrastive: float, conf: float, target: float, recon: float,
                   kl_causal: float, hate: float, alpha_t: float, alpha_c: float,
                   delta_cont: float, delta_conf: float) -> LossBreakdown:
    """Compose the individual terms into the step objective, in float64.

    Non-finite inputs abort with the offending term named.
    """
    parts = {"contrastive": contrastive, "conf": conf, "target": target,
             "recon": recon, "kl_causal": kl_causal, "hate": hate}
    for name, value in parts.items():
        if not math.isfinite(value):
            raise NumericsError(f"non-finite loss term {name!r}: {value}")
    d_target = target + delta_cont * contrastive + delta_conf * conf
    vae = recon + alpha_t * d_target + alpha_c * kl_causal
    return LossBreakdown(
        contrastive=contrastive, conf=conf, target=target, recon=recon,
        kl_causal=kl_causal, hate=hate, vae=vae, total=hate + vae,
        alpha_t=alpha_t, alpha_c=alpha_c, delta_cont=delta_cont, delta_conf=delta_conf,
    )


def compose_total(*, contrastive: torch.Tensor, conf: torch.Tensor, target: torch.Tensor,
                  recon: torch.Tensor, kl_causal: torch.Tensor, hate: torch.Tensor,
                  alpha_t: float, alpha_c: float, delta_cont: float,
                  delta_conf: float) -> torch.Tensor:
    """Tensor-side mirror of compose_losses, for backward()."""
    d_target = target + delta_cont * contrastive + delta_conf * conf
    vae = recon + alpha_t * d_target + alpha_c * kl_causal
    return hate + vae
