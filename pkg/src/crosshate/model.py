"""Encoder backbone, disentanglement heads, and the reconstruction decoder.

The toy backend is a small transformer trained from scratch and is what every
test runs on. The pretrained backend adapts a RoBERTa encoder and BART decoder
(shared vocabulary) behind the same interface; it is imported lazily so the
package works without the transformers dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import ConfigError, DataError, TrainConfig
from .losses import NumericsError

PAD_ID = 0
UNK_ID = 1
BOS_ID = 2
EOS_ID = 3
SPECIALS = {"<pad>": PAD_ID, "<unk>": UNK_ID, "<bos>": BOS_ID, "<eos>": EOS_ID}

LOGVAR_CLAMP = 12.0


@dataclass
class TokenSequence:
    """One tokenized input; mask marks real positions (1) vs padding (0)."""

    token_ids: torch.Tensor
    attention_mask: torch.Tensor

    def __post_init__(self):
        if self.token_ids.shape != self.attention_mask.shape:
            raise DataError(
                f"mask length {tuple(self.attention_mask.shape)} does not match "
                f"ids {tuple(self.token_ids.shape)}")

    def __len__(self) -> int:
        return self.token_ids.shape[-1]


@dataclass
class TokenBatch:
    """Padded stack of TokenSequences."""

    token_ids: torch.Tensor  # [B, s] long
    attention_mask: torch.Tensor  # [B, s] long

    @classmethod
    def collate(cls, seqs: list) -> "TokenBatch":
        if not seqs:
            raise DataError("cannot collate an empty list of sequences")
        width = max(len(s) for s in seqs)
        ids = torch.full((len(seqs), width), PAD_ID, dtype=torch.long)
        mask = torch.zeros((len(seqs), width), dtype=torch.long)
        for i, s in enumerate(seqs):
            n = len(s)
            ids[i, :n] = s.token_ids
            mask[i, :n] = s.attention_mask
        return cls(token_ids=ids, attention_mask=mask)

    def __len__(self) -> int:
        return self.token_ids.shape[0]


@dataclass
class Embedding:
    """Backbone output: pooled summary plus the full per-position matrix."""

    pooled: torch.Tensor  # [h_d] or [B, h_d]
    sequence: torch.Tensor  # [s, h_d] or [B, s, h_d]


@dataclass
class CausalLatent:
    mu: torch.Tensor
    sigma: torch.Tensor
    sample: torch.Tensor


@dataclass
class TargetLatent:
    vector: torch.Tensor


@dataclass
class RecombinedLatent:
    vector: torch.Tensor


class ToyTokenizer:
    """Whitespace tokenizer with a frequency-ranked vocabulary.

    Ids 0..3 are reserved for pad/unk/bos/eos. Ordering is deterministic:
    count-descending, then lexicographic.
    """

    def __init__(self, vocab: dict | None = None):
        self.vocab = dict(vocab) if vocab else dict(SPECIALS)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def fit(self, texts, max_vocab: int = 50_000) -> "ToyTokenizer":
        counts: dict[str, int] = {}
        for text in texts:
            for tok in text.lower().split():
                counts[tok] = counts.get(tok, 0) + 1
        self.vocab = dict(SPECIALS)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        for tok, _ in ranked[: max_vocab - len(SPECIALS)]:
            self.vocab[tok] = len(self.vocab)
        return self

    def encode(self, text: str, max_len: int) -> TokenSequence:
        if max_len < 3:
            raise ConfigError(f"max_len must be >= 3 to fit bos/eos, got {max_len}")
        body = [self.vocab.get(tok, UNK_ID) for tok in text.lower().split()]
        ids = [BOS_ID] + body[: max_len - 2] + [EOS_ID]
        t = torch.tensor(ids, dtype=torch.long)
        return TokenSequence(token_ids=t, attention_mask=torch.ones_like(t))

    def to_dict(self) -> dict:
        return dict(self.vocab)

    @classmethod
    def from_dict(cls, vocab: dict) -> "ToyTokenizer":
        return cls(vocab={k: int(v) for k, v in vocab.items()})


class ToyTextEncoder(nn.Module):
    """Token + position embeddings into a small transformer encoder stack."""

    def __init__(self, vocab_size: int, cfg: TrainConfig):
        super().__init__()
        self.max_seq_len = cfg.max_seq_len
        self.embedding = nn.Embedding(vocab_size, cfg.embed_dim, padding_idx=PAD_ID)
        nn.init.normal_(self.embedding.weight, mean=0.0, std=cfg.embed_init_std)
        with torch.no_grad():
            self.embedding.weight[PAD_ID].zero_()
            # unknown tokens carry no content, mirroring padding; otherwise
            # out-of-vocabulary words at inference inject untrained noise
            self.embedding.weight[UNK_ID].zero_()
        self.pos = nn.Embedding(cfg.max_seq_len, cfg.embed_dim)
        layer = nn.TransformerEncoderLayer(
            d_model=cfg.embed_dim, nhead=cfg.encoder_heads,
            dim_feedforward=4 * cfg.embed_dim, dropout=cfg.dropout,
            batch_first=True)
        self.encoder = nn.TransformerEncoder(layer, num_layers=cfg.encoder_layers,
                                             enable_nested_tensor=False)

    def forward(self, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        s = ids.shape[1]
        x = self.embedding(ids) + self.pos.weight[:s].unsqueeze(0)
        return self.encoder(x, src_key_padding_mask=mask == 0)


class ToySeqDecoder(nn.Module):
    """Transformer decoder conditioned on one memory position (the recombined
    latent), teacher-forced during training."""

    def __init__(self, embedding: nn.Embedding, cfg: TrainConfig):
        super().__init__()
        self.embedding = embedding  # shared with the encoder
        self.pos = nn.Embedding(cfg.max_seq_len, cfg.embed_dim)
        layer = nn.TransformerDecoderLayer(
            d_model=cfg.embed_dim, nhead=cfg.encoder_heads,
            dim_feedforward=4 * cfg.embed_dim, dropout=cfg.dropout,
            batch_first=True)
        self.decoder = nn.TransformerDecoder(layer, num_layers=cfg.decoder_layers)
        self.out = nn.Linear(cfg.embed_dim, embedding.num_embeddings)

    def forward(self, memory: torch.Tensor, ids: torch.Tensor) -> torch.Tensor:
        """Return next-token probability rows [B, s, V] under teacher forcing."""
        b, s = ids.shape
        # shift right: position t sees tokens < t
        tgt_in = torch.full_like(ids, BOS_ID)
        tgt_in[:, 1:] = ids[:, :-1]
        x = self.embedding(tgt_in) + self.pos.weight[:s].unsqueeze(0)
        causal = nn.Transformer.generate_square_subsequent_mask(s, device=ids.device)
        h = self.decoder(x, memory, tgt_mask=causal)
        return F.softmax(self.out(h), dim=-1)


def _make_head(d_in: int, d_out: int, depth: int) -> nn.Module:
    if depth < 1:
        raise ConfigError(f"head_depth must be >= 1, got {depth}")
    if depth == 1:
        return nn.Linear(d_in, d_out)
    layers: list[nn.Module] = []
    d = d_in
    for _ in range(depth - 1):
        layers += [nn.Linear(d, d_in), nn.ReLU()]
        d = d_in
    layers.append(nn.Linear(d, d_out))
    return nn.Sequential(*layers)


class DisentangledModel(nn.Module):
    """Backbone encoder plus the two latent heads, their classifiers, the
    recombiner, and the reconstruction decoder."""

    def __init__(self, cfg: TrainConfig, vocab_size: int, n_target_classes: int):
        super().__init__()
        if n_target_classes < 2:
            raise ConfigError(f"need >= 2 target classes, got {n_target_classes}")
        self.cfg = cfg
        self.n_target_classes = n_target_classes
        if cfg.backend == "toy":
            self.backbone = ToyTextEncoder(vocab_size, cfg)
            self.decoder = ToySeqDecoder(self.backbone.embedding, cfg)
            h_d = cfg.embed_dim
        else:
            self.backbone = PretrainedBackbone(cfg)
            self.decoder = self.backbone.make_decoder()
            h_d = self.backbone.hidden_size
        self.h_d = h_d
        self.drop = nn.Dropout(cfg.dropout)
        self.fc_mu = _make_head(h_d, cfg.h_causal, cfg.head_depth)
        self.fc_logvar = _make_head(h_d, cfg.h_causal, cfg.head_depth)
        self.fc_pi = _make_head(h_d, cfg.h_disc, cfg.head_depth)
        self.fc_zhat = _make_head(cfg.h_causal + cfg.h_disc, h_d, cfg.head_depth)
        self.fc_target = _make_head(cfg.h_disc, n_target_classes, cfg.head_depth)
        self.fc_hate = _make_head(
            cfg.h_causal if cfg.hate_input == "causal" else h_d, 2, cfg.head_depth)

    # --- latent-core operations ---

    def encode(self, seq: TokenSequence | TokenBatch) -> Embedding:
        single = isinstance(seq, TokenSequence) or seq.token_ids.dim() == 1
        ids = seq.token_ids
        mask = seq.attention_mask
        if single:
            ids, mask = ids.unsqueeze(0), mask.unsqueeze(0)
        if ids.shape[1] == 0:
            raise DataError("cannot encode an empty sequence")
        if ids.shape[1] > self.cfg.max_seq_len:
            raise DataError(
                f"sequence length {ids.shape[1]} exceeds max_seq_len {self.cfg.max_seq_len}")
        h = self.backbone(ids, mask)
        if self.cfg.pooling == "first":
            pooled = h[:, 0]
        else:
            m = mask.unsqueeze(-1).to(h.dtype)
            pooled = (h * m).sum(dim=1) / m.sum(dim=1).clamp(min=1.0)
        pooled = self.drop(pooled)
        if not torch.isfinite(pooled).all():
            raise NumericsError("encoder produced non-finite pooled embedding")
        if single:
            return Embedding(pooled=pooled.squeeze(0), sequence=h.squeeze(0))
        return Embedding(pooled=pooled, sequence=h)

    def reparameterize(self, emb: Embedding, noise: torch.Tensor | None = None) -> CausalLatent:
        mu = self.fc_mu(emb.pooled)
        logvar = self.fc_logvar(emb.pooled).clamp(-LOGVAR_CLAMP, LOGVAR_CLAMP)
        sigma = torch.exp(0.5 * logvar)
        if noise is None:
            noise = torch.zeros_like(mu)
        if noise.shape[-1] != mu.shape[-1]:
            raise ConfigError(
                f"noise dimension {noise.shape[-1]} != h_causal {mu.shape[-1]}")
        sample = mu + sigma * noise
        if not torch.isfinite(sample).all():
            raise NumericsError(
                f"non-finite causal latent (mu range [{mu.min():.3g}, {mu.max():.3g}])")
        return CausalLatent(mu=mu, sigma=sigma, sample=sample)

    def target_head(self, emb: Embedding) -> TargetLatent:
        v = self.fc_pi(emb.pooled)
        if not torch.isfinite(v).all():
            raise NumericsError("non-finite target latent")
        return TargetLatent(vector=v)

    def recombine(self, c: CausalLatent, t: TargetLatent) -> RecombinedLatent:
        if c.sample.shape[-1] != self.cfg.h_causal or t.vector.shape[-1] != self.cfg.h_disc:
            raise ConfigError(
                f"latent dims ({c.sample.shape[-1]}, {t.vector.shape[-1]}) do not match "
                f"configured ({self.cfg.h_causal}, {self.cfg.h_disc})")
        z_hat = self.fc_zhat(torch.cat([c.sample, t.vector], dim=-1))
        return RecombinedLatent(vector=z_hat)

    def decode(self, r: RecombinedLatent, seq: TokenSequence | TokenBatch) -> torch.Tensor:
        ids = seq.token_ids
        memory = r.vector
        if ids.dim() == 1:
            ids = ids.unsqueeze(0)
            memory = memory.unsqueeze(0)
        return self.decoder(memory.unsqueeze(1), ids)

    # --- classifier heads ---

    def target_probs(self, t: TargetLatent) -> torch.Tensor:
        return F.softmax(self.fc_target(t.vector), dim=-1)

    def hate_logits(self, c: CausalLatent) -> torch.Tensor:
        """2-class probability vector read from the causal sample only."""
        if self.cfg.hate_input != "causal":
            raise ConfigError("hate_logits reads X_c; configured hate_input is "
                              f"{self.cfg.hate_input!r}, use hate_logits_pooled")
        return F.softmax(self.fc_hate(c.sample), dim=-1)

    def hate_logits_pooled(self, emb: Embedding) -> torch.Tensor:
        """Ablation head: classify from the undisentangled pooled embedding."""
        if self.cfg.hate_input != "pooled":
            raise ConfigError("configured hate_input is not 'pooled'")
        return F.softmax(self.fc_hate(emb.pooled), dim=-1)


class PretrainedBackbone(nn.Module):
    """Adapter for a RoBERTa-family encoder; lazy transformers import."""

    def __init__(self, cfg: TrainConfig):
        super().__init__()
        try:
            from transformers import AutoModel
        except ImportError as e:
            raise ConfigError(
                "backend 'pretrained' needs the transformers extra "
                "(pip install crosshate[pretrained])") from e
        self.cfg = cfg
        self.encoder = AutoModel.from_pretrained(cfg.pretrained_encoder)
        self.hidden_size = self.encoder.config.hidden_size

    def forward(self, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        return self.encoder(input_ids=ids, attention_mask=mask).last_hidden_state

    def make_decoder(self) -> nn.Module:
        return PretrainedDecoder(self.cfg)


class PretrainedDecoder(nn.Module):
    """BART decoder conditioned on the recombined latent as a one-position
    encoder state; shares RoBERTa's vocabulary."""

    def __init__(self, cfg: TrainConfig):
        super().__init__()
        from transformers import BartForConditionalGeneration

        bart = BartForConditionalGeneration.from_pretrained(cfg.pretrained_decoder)
        self.decoder = bart.model.decoder
        self.lm_head = bart.lm_head

    def forward(self, memory: torch.Tensor, ids: torch.Tensor) -> torch.Tensor:
        tgt_in = torch.full_like(ids, BOS_ID)
        tgt_in[:, 1:] = ids[:, :-1]
        h = self.decoder(input_ids=tgt_in, encoder_hidden_states=memory).last_hidden_state
        return F.softmax(self.lm_head(h), dim=-1)


class PretrainedTokenizer:
    """Hugging Face tokenizer behind the ToyTokenizer interface."""

    def __init__(self, name: str):
        from transformers import AutoTokenizer

        self.tok = AutoTokenizer.from_pretrained(name)

    @property
    def vocab_size(self) -> int:
        return len(self.tok)

    def encode(self, text: str, max_len: int) -> TokenSequence:
        out = self.tok(text, truncation=True, max_length=max_len)
        ids = torch.tensor(out["input_ids"], dtype=torch.long)
        mask = torch.tensor(out["attention_mask"], dtype=torch.long)
        return TokenSequence(token_ids=ids, attention_mask=mask)


def build_tokenizer(cfg: TrainConfig):
    if cfg.backend == "toy":
        return ToyTokenizer()
    return PretrainedTokenizer(cfg.pretrained_encoder)
