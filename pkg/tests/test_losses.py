"""Oracle tests for the loss terms.

Expected values come from independent computations: hand-derived closed forms
(frozen as literals), brute-force double loops, Monte Carlo estimates, and
central finite differences. Nothing is asserted against the implementation's
own output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from crosshate.config import ConfigError
from crosshate.losses import (
    HighConfidenceSet,
    LossBreakdown,
    NumericsError,
    SoftLabel,
    compose_losses,
    compose_total,
    conf_regularizer,
    confidence_weight,
    contrastive_loss,
    contrastive_pair,
    kl_causal,
    pair_similarity,
    recon_loss,
    select_high_confidence,
    target_loss,
)


@dataclass
class FakeLatent:
    """Minimal stand-in exposing the .vector attribute the set machinery uses."""

    vector: torch.Tensor


def make_set(vectors, probs_list):
    members = [(FakeLatent(torch.as_tensor(v, dtype=torch.float64)),
                SoftLabel.from_probs(torch.as_tensor(p, dtype=torch.float64)))
               for v, p in zip(vectors, probs_list)]
    return HighConfidenceSet(members=members, indices=list(range(len(members))))


def fd_grad(fn, x: torch.Tensor, eps: float = 1e-4) -> torch.Tensor:
    """Central-difference gradient of scalar fn at x, elementwise."""
    g = torch.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for k in range(flat.numel()):
        orig = flat[k].item()
        flat[k] = orig + eps
        hi = fn(x).item()
        flat[k] = orig - eps
        lo = fn(x).item()
        flat[k] = orig
        gflat[k] = (hi - lo) / (2 * eps)
    return g


def assert_grads_close(analytic, numeric, rel=1e-3):
    denom = numeric.abs().clamp(min=1e-6)
    assert ((analytic - numeric).abs() / denom).max().item() < rel


# --- confidence weight -------------------------------------------------------

def test_confidence_weight_frozen_value():
    # H(0.9, 0.1) = 0.325083 nats, log 2 = 0.693147 -> w = 0.530989 (by hand)
    w = confidence_weight(torch.tensor([0.9, 0.1]))
    assert w == pytest.approx(0.530989, abs=1e-4)


def test_confidence_weight_endpoints():
    assert confidence_weight(torch.tensor([1.0, 0.0])) == pytest.approx(1.0, abs=1e-6)
    assert confidence_weight(torch.tensor([0.25, 0.25, 0.25, 0.25])) == pytest.approx(0.0, abs=1e-9)


def test_confidence_weight_rejects_degenerate():
    with pytest.raises(ConfigError):
        confidence_weight(torch.tensor([1.0]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=2, max_size=9))
def test_confidence_weight_in_unit_interval(raw):
    p = torch.tensor(raw, dtype=torch.float64)
    p = p / p.sum()
    w = confidence_weight(p)
    assert 0.0 <= w <= 1.0


# --- high-confidence selection ----------------------------------------------

def test_select_high_confidence_threshold():
    s = make_set([[0.0], [1.0], [2.0]],
                 [[0.99, 0.01], [0.6, 0.4], [0.01, 0.99]])
    picked = select_high_confidence(list(zip([m[0] for m in s.members],
                                             [m[1] for m in s.members])), eta=0.9)
    assert picked.indices == [0, 2]
    assert len(picked) == 2


def test_select_high_confidence_eta_zero_keeps_all():
    s = make_set([[0.0], [1.0]], [[0.5, 0.5], [0.6, 0.4]])
    picked = select_high_confidence(s.members, eta=0.0)
    assert len(picked) == 2


def test_select_high_confidence_rejects_bad_eta():
    with pytest.raises(ConfigError):
        select_high_confidence([], eta=1.5)


def test_select_high_confidence_default_threshold_membership():
    # confidences {0.2, 0.96, 0.95} at the 0.95 default keep the last two
    batch = [(FakeLatent(torch.zeros(2)), SoftLabel(probs=torch.ones(2) / 2, confidence=c))
             for c in (0.2, 0.96, 0.95)]
    picked = select_high_confidence(batch, eta=0.95)
    assert picked.indices == [1, 2]


def test_select_high_confidence_eta_one_excludes_soft_labels():
    batch = [(FakeLatent(torch.zeros(2)), SoftLabel.from_probs(torch.tensor(p)))
             for p in ([0.9, 0.1], [0.3, 0.7], [0.55, 0.45])]
    assert len(select_high_confidence(batch, eta=1.0)) == 0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(min_value=0.5, max_value=1.0), min_size=1, max_size=8),
       st.floats(min_value=0.0, max_value=1.0),
       st.floats(min_value=0.0, max_value=1.0))
def test_select_monotone_in_eta(p_heads, eta_lo, eta_hi):
    lo, hi = sorted([eta_lo, eta_hi])
    batch = [(FakeLatent(torch.zeros(2)), SoftLabel.from_probs(torch.tensor([p, 1 - p])))
             for p in p_heads]
    assert len(select_high_confidence(batch, hi)) <= len(select_high_confidence(batch, lo))


# --- pair similarity ---------------------------------------------------------

def test_pair_similarity_matches_argmax():
    a = SoftLabel.from_probs(torch.tensor([0.7, 0.2, 0.1]))
    b = SoftLabel.from_probs(torch.tensor([0.6, 0.3, 0.1]))
    c = SoftLabel.from_probs(torch.tensor([0.1, 0.8, 0.1]))
    assert pair_similarity(a, b) == 1
    assert pair_similarity(a, c) == 0


def test_pair_similarity_tie_breaks_to_lowest_index():
    tied = SoftLabel.from_probs(torch.tensor([0.5, 0.5]))
    first = SoftLabel.from_probs(torch.tensor([0.9, 0.1]))
    assert tied.argmax == 0
    assert pair_similarity(tied, first) == 1


# --- contrastive -------------------------------------------------------------

def brute_contrastive(vectors, classes, beta):
    total = 0.0
    n = len(vectors)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d = math.dist(vectors[i], vectors[j])
            if classes[i] == classes[j]:
                total += d * d
            else:
                total += max(0.0, beta - d) ** 2
    return total


def test_contrastive_pair_frozen_values():
    a = torch.tensor([0.0, 0.0], dtype=torch.float64)
    b = torch.tensor([3.0, 4.0], dtype=torch.float64)
    # same class: d^2 = 25
    assert contrastive_pair(a, b, 1, beta=2.0).item() == pytest.approx(25.0, rel=1e-9)
    # different class at distance 5 >= beta: margin satisfied, 0
    assert contrastive_pair(a, b, 0, beta=2.0).item() == pytest.approx(0.0, abs=1e-12)
    # different class at distance 1 < beta=2: (2-1)^2 = 1
    c = torch.tensor([1.0, 0.0], dtype=torch.float64)
    assert contrastive_pair(a, c, 0, beta=2.0).item() == pytest.approx(1.0, rel=1e-9)
    # different class, coincident points: max(0, 2)^2 = 4
    assert contrastive_pair(a, a.clone(), 0, beta=2.0).item() == pytest.approx(4.0, rel=1e-6)


def test_contrastive_pair_symmetric():
    a = torch.tensor([0.5, -1.0], dtype=torch.float64)
    b = torch.tensor([2.0, 0.3], dtype=torch.float64)
    for w in (0, 1):
        ab = contrastive_pair(a, b, w, beta=2.0).item()
        ba = contrastive_pair(b, a, w, beta=2.0).item()
        assert ab == pytest.approx(ba, rel=1e-12)


def test_contrastive_pair_accepts_latents():
    a = FakeLatent(torch.tensor([0.0, 0.0], dtype=torch.float64))
    b = FakeLatent(torch.tensor([3.0, 4.0], dtype=torch.float64))
    assert contrastive_pair(a, b, 1, beta=2.0).item() == pytest.approx(25.0, rel=1e-9)


def test_contrastive_margin_monotone_in_distance():
    a = torch.zeros(1, dtype=torch.float64)
    prev = math.inf
    for d in [0.0, 0.5, 1.0, 1.5, 1.9, 2.0, 3.0]:
        val = contrastive_pair(a, torch.tensor([d], dtype=torch.float64), 0, beta=2.0).item()
        assert val <= prev + 1e-12
        prev = val
    assert prev == 0.0


def test_contrastive_two_same_class_members():
    # ordered pairs double-count: 2 * d^2
    s = make_set([[0.0, 0.0], [3.0, 4.0]], [[0.9, 0.1], [0.8, 0.2]])
    assert contrastive_loss(s, beta=2.0).item() == pytest.approx(50.0, rel=1e-9)


def test_contrastive_loss_matches_brute_force():
    rng = torch.Generator().manual_seed(7)
    vectors = torch.randn(6, 3, generator=rng, dtype=torch.float64)
    classes = [0, 1, 0, 2, 1, 0]
    probs = []
    for c in classes:
        p = torch.full((3,), 0.01, dtype=torch.float64)
        p[c] = 0.98
        probs.append(p)
    s = make_set(vectors.tolist(), [p.tolist() for p in probs])
    expected = brute_contrastive(vectors.tolist(), classes, beta=2.0)
    got = contrastive_loss(s, beta=2.0).item()
    assert got == pytest.approx(expected, rel=1e-6)


def test_contrastive_loss_small_sets_are_zero():
    assert contrastive_loss(HighConfidenceSet(members=[]), beta=2.0).item() == 0.0
    s = make_set([[1.0, 2.0]], [[0.9, 0.1]])
    assert contrastive_loss(s, beta=2.0).item() == 0.0


def test_contrastive_loss_rejects_bad_beta():
    with pytest.raises(ConfigError):
        contrastive_loss(HighConfidenceSet(members=[]), beta=0.0)


def test_contrastive_margin_saturation():
    # all different classes, all pairwise distances >= beta -> exactly 0
    vectors = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]]
    probs = [[0.98, 0.01, 0.01], [0.01, 0.98, 0.01], [0.01, 0.01, 0.98]]
    s = make_set(vectors, probs)
    assert contrastive_loss(s, beta=2.0).item() == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2, max_value=6), st.integers(min_value=0, max_value=10_000))
def test_contrastive_permutation_invariant(n, seed):
    rng = torch.Generator().manual_seed(seed)
    vectors = torch.randn(n, 2, generator=rng, dtype=torch.float64)
    classes = torch.randint(0, 3, (n,), generator=rng)
    probs = []
    for c in classes.tolist():
        p = torch.full((3,), 0.01, dtype=torch.float64)
        p[c] = 0.98
        probs.append(p.tolist())
    s = make_set(vectors.tolist(), probs)
    perm = torch.randperm(n, generator=rng).tolist()
    s_perm = make_set(vectors[perm].tolist(), [probs[i] for i in perm])
    a = contrastive_loss(s, beta=2.0).item()
    b = contrastive_loss(s_perm, beta=2.0).item()
    assert a == pytest.approx(b, rel=1e-9, abs=1e-12)
    assert a >= 0.0


def test_contrastive_gradient_finite_difference():
    rng = torch.Generator().manual_seed(11)
    base = torch.randn(4, 3, generator=rng, dtype=torch.float64)
    classes = [0, 1, 0, 1]
    probs = []
    for c in classes:
        p = torch.full((2,), 0.02, dtype=torch.float64)
        p[c] = 0.98
        probs.append(p.tolist())

    def loss_of(x):
        s = make_set(x.tolist(), probs)
        return contrastive_loss(s, beta=2.0)

    x = base.clone().requires_grad_(True)
    s = HighConfidenceSet(
        members=[(FakeLatent(x[i]), SoftLabel.from_probs(torch.tensor(probs[i], dtype=torch.float64)))
                 for i in range(4)],
        indices=list(range(4)))
    contrastive_loss(s, beta=2.0).backward()
    numeric = fd_grad(loss_of, base.clone())
    assert_grads_close(x.grad, numeric)


# --- confidence regularizer and target loss ---------------------------------

def test_conf_regularizer_frozen_value():
    # KL(u || (0.75, 0.25)) = 0.5 ln(0.5/0.75) + 0.5 ln(0.5/0.25) = 0.143841 (by hand)
    s = make_set([[0.0]], [[0.9, 0.1]])
    f = torch.tensor([[0.75, 0.25]], dtype=torch.float64)
    assert conf_regularizer(s, f).item() == pytest.approx(0.143841, abs=1e-5)


def test_conf_regularizer_uniform_output_is_zero():
    s = make_set([[0.0]], [[0.9, 0.1]])
    f = torch.tensor([[0.5, 0.5]], dtype=torch.float64)
    assert conf_regularizer(s, f).item() == pytest.approx(0.0, abs=1e-12)


def test_conf_regularizer_empty_set():
    assert conf_regularizer(HighConfidenceSet(members=[]), torch.zeros(0, 2)).item() == 0.0


def test_target_loss_matches_hand_loop():
    probs_list = [[0.97, 0.03], [0.02, 0.98]]
    s = make_set([[0.0], [1.0]], probs_list)
    f = torch.tensor([[0.8, 0.2], [0.3, 0.7]], dtype=torch.float64)
    expected = 0.0
    for (_, lbl), frow in zip(s.members, f):
        y = lbl.probs
        kl = sum(yi * math.log(yi / fi) for yi, fi in zip(y.tolist(), frow.tolist()))
        expected += lbl.confidence * kl
    expected /= len(s.members)
    assert target_loss(s, f).item() == pytest.approx(expected, rel=1e-9)


def test_target_loss_zero_when_classifier_matches_pseudo_labels():
    probs_list = [[0.97, 0.03]]
    s = make_set([[0.0]], probs_list)
    f = torch.tensor(probs_list, dtype=torch.float64)
    assert target_loss(s, f).item() == pytest.approx(0.0, abs=1e-10)


def test_target_loss_gradient_finite_difference():
    probs_list = [[0.9, 0.06, 0.04], [0.05, 0.9, 0.05]]
    s = make_set([[0.0], [1.0]], probs_list)
    base = torch.tensor([[0.5, 0.3, 0.2], [0.2, 0.3, 0.5]], dtype=torch.float64)

    f = base.clone().requires_grad_(True)
    target_loss(s, f).backward()
    numeric = fd_grad(lambda x: target_loss(s, x), base.clone())
    assert_grads_close(f.grad, numeric)


# --- reconstruction ----------------------------------------------------------

def test_recon_loss_uniform_frozen_value():
    # uniform rows over V=10, 4 unmasked positions -> 4 ln 10 = 9.21034 (by hand)
    V, s_len = 10, 4
    probs = torch.full((s_len, V), 1.0 / V, dtype=torch.float64)
    ids = torch.tensor([1, 5, 9, 0])
    assert recon_loss(ids, probs).item() == pytest.approx(4 * math.log(10), rel=1e-9)
    assert recon_loss(ids, probs).item() == pytest.approx(9.21034, abs=1e-4)


def test_recon_loss_mask_drops_positions():
    V = 6
    probs = torch.full((4, V), 1.0 / V, dtype=torch.float64)
    ids = torch.tensor([0, 1, 2, 3])
    mask = torch.tensor([1, 1, 0, 0])
    assert recon_loss(ids, probs, mask).item() == pytest.approx(2 * math.log(6), rel=1e-9)


def test_recon_loss_batch_mean():
    V = 4
    p_row = torch.tensor([0.7, 0.1, 0.1, 0.1], dtype=torch.float64)
    probs = p_row.expand(2, 3, V).clone()
    ids = torch.tensor([[0, 0, 0], [1, 1, 1]])
    per_seq = [3 * -math.log(0.7), 3 * -math.log(0.1)]
    expected = sum(per_seq) / 2
    assert recon_loss(ids, probs).item() == pytest.approx(expected, rel=1e-9)


def test_recon_loss_perfect_prediction_is_zero():
    probs = torch.eye(5, dtype=torch.float64)
    ids = torch.arange(5)
    assert recon_loss(ids, probs).item() == pytest.approx(0.0, abs=1e-6)


def test_recon_loss_fully_masked_is_zero():
    probs = torch.full((3, 5), 0.2, dtype=torch.float64)
    ids = torch.tensor([0, 1, 2])
    mask = torch.zeros(3, dtype=torch.long)
    assert recon_loss(ids, probs, mask).item() == 0.0


def test_recon_loss_rejects_out_of_vocab():
    probs = torch.full((2, 3), 1 / 3, dtype=torch.float64)
    with pytest.raises(ValueError):
        recon_loss(torch.tensor([0, 3]), probs)


def test_recon_loss_gradient_finite_difference():
    rng = torch.Generator().manual_seed(3)
    raw = torch.rand(3, 5, generator=rng, dtype=torch.float64) + 0.1
    base = raw / raw.sum(dim=1, keepdim=True)
    ids = torch.tensor([2, 0, 4])

    p = base.clone().requires_grad_(True)
    recon_loss(ids, p).backward()
    numeric = fd_grad(lambda x: recon_loss(ids, x), base.clone())
    assert_grads_close(p.grad, numeric)


# --- causal KL ---------------------------------------------------------------

def test_kl_causal_standard_normal_is_zero():
    mu = torch.zeros(4, dtype=torch.float64)
    sigma = torch.ones(4, dtype=torch.float64)
    assert kl_causal(mu, sigma).item() == pytest.approx(0.0, abs=1e-12)


def test_kl_causal_frozen_value():
    # mu=1, sigma=1, one dim: 0.5*(1 + 1 - 0 - 1) = 0.5 exactly
    assert kl_causal(torch.tensor([1.0]), torch.tensor([1.0])).item() == pytest.approx(0.5, rel=1e-6)


def test_kl_causal_monte_carlo_oracle():
    # KL(N(0.7, 1.3^2) || N(0,1)) estimated by sampling log q - log p
    mu, sigma = 0.7, 1.3
    closed = kl_causal(torch.tensor([mu], dtype=torch.float64),
                       torch.tensor([sigma], dtype=torch.float64)).item()
    rng = torch.Generator().manual_seed(123)
    x = mu + sigma * torch.randn(1_000_000, generator=rng, dtype=torch.float64)
    log_q = -0.5 * ((x - mu) / sigma) ** 2 - math.log(sigma) - 0.5 * math.log(2 * math.pi)
    log_p = -0.5 * x**2 - 0.5 * math.log(2 * math.pi)
    mc = (log_q - log_p).mean().item()
    assert closed == pytest.approx(mc, rel=0.01)


def test_kl_causal_batch_mean():
    mu = torch.tensor([[0.0, 0.0], [1.0, 1.0]], dtype=torch.float64)
    sigma = torch.ones_like(mu)
    # rows: 0 and 1.0 -> mean 0.5
    assert kl_causal(mu, sigma).item() == pytest.approx(0.5, rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=-3, max_value=3), min_size=1, max_size=6),
       st.lists(st.floats(min_value=0.1, max_value=3), min_size=1, max_size=6))
def test_kl_causal_nonnegative(mus, sigmas):
    n = min(len(mus), len(sigmas))
    mu = torch.tensor(mus[:n], dtype=torch.float64)
    sigma = torch.tensor(sigmas[:n], dtype=torch.float64)
    assert kl_causal(mu, sigma).item() >= -1e-12


def test_kl_causal_gradient_finite_difference():
    base_mu = torch.tensor([0.3, -0.8, 1.2], dtype=torch.float64)
    base_sigma = torch.tensor([0.7, 1.4, 0.9], dtype=torch.float64)

    mu = base_mu.clone().requires_grad_(True)
    sigma = base_sigma.clone().requires_grad_(True)
    kl_causal(mu, sigma).backward()
    num_mu = fd_grad(lambda m: kl_causal(m, base_sigma), base_mu.clone())
    num_sigma = fd_grad(lambda s: kl_causal(base_mu, s), base_sigma.clone())
    assert_grads_close(mu.grad, num_mu)
    assert_grads_close(sigma.grad, num_sigma)


def test_nonnegative_sweep_10k_trials():
    # 1e4 random draws per term, vectorized; every term must stay >= 0
    rng = torch.Generator().manual_seed(99)
    mu = torch.randn(10_000, 4, generator=rng, dtype=torch.float64) * 2
    sigma = torch.rand(10_000, 4, generator=rng, dtype=torch.float64) * 3 + 0.05
    var = sigma**2
    per_row_kl = 0.5 * (mu**2 + var - var.log() - 1.0).sum(dim=1)
    assert (per_row_kl >= -1e-12).all()

    a = torch.randn(10_000, 3, generator=rng, dtype=torch.float64)
    b = torch.randn(10_000, 3, generator=rng, dtype=torch.float64)
    d = (a - b).norm(dim=1)
    pos = d**2
    neg = torch.clamp(2.0 - d, min=0.0) ** 2
    assert (pos >= 0).all() and (neg >= 0).all()

    raw = torch.rand(10_000, 5, generator=rng, dtype=torch.float64) + 1e-3
    p = raw / raw.sum(dim=1, keepdim=True)
    ent = -(p * p.log()).sum(dim=1)
    w = 1 - ent / math.log(5)
    assert (w >= -1e-12).all() and (w <= 1 + 1e-12).all()


# --- composition -------------------------------------------------------------

def test_compose_losses_unit_parts_default_coefficients():
    # vae = 1 + 0.05*(1 + 0.001 + 0.001) + 0.05*1 = 1.1001 (by hand)
    b = compose_losses(contrastive=1.0, conf=1.0, target=1.0, recon=1.0,
                       kl_causal=1.0, hate=0.0, alpha_t=0.05, alpha_c=0.05,
                       delta_cont=0.001, delta_conf=0.001)
    assert b.vae == pytest.approx(1.1001, rel=1e-9)


def test_compose_losses_all_zero_parts():
    b = compose_losses(contrastive=0.0, conf=0.0, target=0.0, recon=0.0,
                       kl_causal=0.0, hate=0.0, alpha_t=0.05, alpha_c=0.05,
                       delta_cont=0.001, delta_conf=0.001)
    assert b.vae == 0.0 and b.total == 0.0


def test_compose_losses_frozen_example():
    # by hand: d_target = 1.0 + 0.001*20 + 0.001*30 = 1.05
    #          vae = 1.0 + 0.05*1.05 + 0.05*1.0 = 1.1025
    #          total = 0.5 + 1.1025 = 1.6025
    b = compose_losses(contrastive=20.0, conf=30.0, target=1.0, recon=1.0,
                       kl_causal=1.0, hate=0.5, alpha_t=0.05, alpha_c=0.05,
                       delta_cont=0.001, delta_conf=0.001)
    assert b.vae == pytest.approx(1.1025, rel=1e-9)
    assert b.total == pytest.approx(1.6025, rel=1e-9)
    b.check(rel_tol=1e-6)


def test_compose_losses_rejects_nonfinite():
    with pytest.raises(NumericsError, match="recon"):
        compose_losses(contrastive=0.0, conf=0.0, target=0.0, recon=float("nan"),
                       kl_causal=0.0, hate=0.0, alpha_t=0.05, alpha_c=0.05,
                       delta_cont=0.001, delta_conf=0.001)
    with pytest.raises(NumericsError, match="hate"):
        compose_losses(contrastive=0.0, conf=0.0, target=0.0, recon=0.0,
                       kl_causal=0.0, hate=float("inf"), alpha_t=0.05, alpha_c=0.05,
                       delta_cont=0.001, delta_conf=0.001)


def test_breakdown_check_catches_tampering():
    b = compose_losses(contrastive=1.0, conf=1.0, target=1.0, recon=1.0,
                       kl_causal=1.0, hate=1.0, alpha_t=0.05, alpha_c=0.05,
                       delta_cont=0.001, delta_conf=0.001)
    b.check()
    bad = LossBreakdown(**{**b.__dict__, "total": b.total + 0.01})
    with pytest.raises(AssertionError):
        bad.check()


def test_compose_total_matches_scalar_composition():
    torch.manual_seed(0)
    vals = {k: torch.rand(()).double() for k in
            ["contrastive", "conf", "target", "recon", "kl_causal", "hate"]}
    coeffs = dict(alpha_t=0.05, alpha_c=0.05, delta_cont=0.001, delta_conf=0.001)
    tensor_total = compose_total(**vals, **coeffs).item()
    scalar = compose_losses(**{k: v.item() for k, v in vals.items()}, **coeffs)
    assert tensor_total == pytest.approx(scalar.total, rel=1e-12)


def test_compose_zero_coefficients_reduce_to_recon_plus_hate():
    b = compose_losses(contrastive=5.0, conf=7.0, target=3.0, recon=2.0,
                       kl_causal=4.0, hate=1.0, alpha_t=0.0, alpha_c=0.0,
                       delta_cont=0.0, delta_conf=0.0)
    assert b.vae == pytest.approx(2.0, rel=1e-12)
    assert b.total == pytest.approx(3.0, rel=1e-12)
