"""Multi-task training loop, evaluation, checkpointing, the cross-platform
grid, and causal-latent export."""

from __future__ import annotations

import copy
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import torch
import yaml

from .config import ConfigError, DataError, TrainConfig
from .data import split
from .losses import (
    NumericsError,
    compose_losses,
    compose_total,
    conf_regularizer,
    contrastive_loss,
    kl_causal,
    recon_loss,
    select_high_confidence,
    target_loss,
)
from .model import (
    EOS_ID,
    UNK_ID,
    DisentangledModel,
    PretrainedTokenizer,
    TargetLatent,
    TokenBatch,
    ToyTokenizer,
)
from .weak_labels import (
    LiveLabelerClient,
    PseudoLabelState,
    ReplayLabelerClient,
    SeedLabeler,
    TargetTaxonomy,
    WeakLabelSource,
    load_lexicon,
    pseudo_labels,
    refresh_teacher,
)

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-8


def hate_loss(preds: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean negative log-likelihood of the true hate class."""
    if preds.shape[0] != labels.shape[0]:
        raise DataError(f"got {preds.shape[0]} predictions for {labels.shape[0]} labels")
    picked = preds.gather(1, labels.view(-1, 1)).squeeze(1)
    return -picked.clamp(min=PROB_FLOOR).log().mean()


def binary_macro_f1(y_true, y_pred) -> tuple:
    """Unweighted mean of per-class F1 over {non-hate, hate}; own confusion
    counts, no external metric dependency."""
    y_true = list(y_true)
    y_pred = list(y_pred)
    if len(y_true) != len(y_pred):
        raise DataError("prediction/label length mismatch")
    per_class = {}
    for cls in (0, 1):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p == cls)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != cls and p == cls)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p != cls)
        denom = 2 * tp + fp + fn
        per_class[cls] = 2 * tp / denom if denom else 0.0
    return (per_class[0] + per_class[1]) / 2, per_class


@dataclass
class EvalResult:
    macro_f1: float
    per_class_f1: dict
    n_examples: int


@dataclass
class Checkpoint:
    """Everything needed to rerun inference: parameters, tokenizer vocabulary,
    resolved config, step counter, and the validation metric history."""

    model: DisentangledModel
    tokenizer: object
    config: TrainConfig
    taxonomy: TargetTaxonomy
    step: int
    history: list = field(default_factory=list)
    optimizer_state: dict | None = None

    def save(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        payload = {
            "model": self.model.state_dict(),
            "optimizer": self.optimizer_state,
            "step": self.step,
            "n_target_classes": len(self.taxonomy),
            "target_classes": list(self.taxonomy.classes),
        }
        if isinstance(self.tokenizer, ToyTokenizer):
            payload["tokenizer_vocab"] = self.tokenizer.to_dict()
            payload["vocab_size"] = self.tokenizer.vocab_size
        torch.save(payload, os.path.join(out_dir, "params.pt"))
        with open(os.path.join(out_dir, "config.yaml"), "w") as fh:
            yaml.safe_dump({"config": self.config.to_dict(),
                            "digest": self.config.digest()}, fh)
        with open(os.path.join(out_dir, "history.json"), "w") as fh:
            json.dump(self.history, fh, indent=1)

    @classmethod
    def load(cls, out_dir: str) -> "Checkpoint":
        with open(os.path.join(out_dir, "config.yaml")) as fh:
            meta = yaml.safe_load(fh)
        config = TrainConfig(**meta["config"]).validate()
        if config.digest() != meta["digest"]:
            raise ConfigError(f"config digest mismatch in {out_dir}")
        payload = torch.load(os.path.join(out_dir, "params.pt"), weights_only=False)
        taxonomy = TargetTaxonomy(classes=tuple(payload["target_classes"]))
        if config.backend == "toy":
            tokenizer = ToyTokenizer.from_dict(payload["tokenizer_vocab"])
            vocab_size = payload["vocab_size"]
        else:
            tokenizer = PretrainedTokenizer(config.pretrained_encoder)
            vocab_size = tokenizer.vocab_size
        model = DisentangledModel(config, vocab_size, len(taxonomy))
        model.load_state_dict(payload["model"])
        model.eval()
        with open(os.path.join(out_dir, "history.json")) as fh:
            history = json.load(fh)
        return cls(model=model, tokenizer=tokenizer, config=config,
                   taxonomy=taxonomy, step=payload["step"], history=history,
                   optimizer_state=payload["optimizer"])


def _predict(model: DisentangledModel, tokenizer, cfg: TrainConfig,
             records: list, batch_size: int = 256) -> list:
    model.eval()
    preds = []
    with torch.no_grad():
        for lo in range(0, len(records), batch_size):
            chunk = records[lo:lo + batch_size]
            batch = TokenBatch.collate(
                [tokenizer.encode(r.text, cfg.max_seq_len) for r in chunk])
            emb = model.encode(batch)
            if cfg.hate_input == "causal":
                probs = model.hate_logits(model.reparameterize(emb))
            else:
                probs = model.hate_logits_pooled(emb)
            preds.extend(probs.argmax(dim=-1).tolist())
    return preds


def evaluate(ckpt: Checkpoint, records: list) -> EvalResult:
    """Macro-F1 of argmax hate predictions over a corpus."""
    if not records:
        raise DataError("cannot evaluate on an empty corpus")
    preds = _predict(ckpt.model, ckpt.tokenizer, ckpt.config, records)
    macro, per_class = binary_macro_f1([r.hate for r in records], preds)
    return EvalResult(macro_f1=macro, per_class_f1=per_class, n_examples=len(records))


class Trainer:
    """One training context: owns the model, optimizer, weak-label state, and
    the per-step loss trajectory."""

    def __init__(self, records: list, config: TrainConfig,
                 taxonomy: TargetTaxonomy | None = None,
                 lexicon: dict | None = None, labeler_client=None):
        if not records:
            raise DataError("cannot train on an empty corpus")
        config.validate()
        self.cfg = config
        self.taxonomy = taxonomy or TargetTaxonomy()
        torch.manual_seed(config.seed)
        self.train_records, self.val_records = split(
            records, config.val_fraction, config.seed)
        if config.backend == "toy":
            self.tokenizer = ToyTokenizer().fit(r.text for r in records)
        else:
            self.tokenizer = PretrainedTokenizer(config.pretrained_encoder)
        self.model = DisentangledModel(config, self.tokenizer.vocab_size,
                                       len(self.taxonomy))
        self.optimizer = torch.optim.AdamW(self.model.parameters(), lr=config.lr)
        source = WeakLabelSource(kind=config.weak_source)
        if config.weak_source == "lexicon" and lexicon is None:
            lexicon = load_lexicon(config.lexicon_path or None)
        if config.weak_source == "external-llm" and labeler_client is None:
            if config.llm_replay_path:
                labeler_client = ReplayLabelerClient(config.llm_replay_path)
            else:
                labeler_client = LiveLabelerClient()
        self.seed_labeler = SeedLabeler(
            self.taxonomy, source, lexicon=lexicon, client=labeler_client,
            noise_rate=config.label_noise_rate, noise_seed=config.label_noise_seed)
        self.state = PseudoLabelState(refresh_period=config.refresh_period,
                                      source=source)
        self._rng = np.random.default_rng(config.seed)
        self._train_seqs = [self.tokenizer.encode(r.text, config.max_seq_len)
                            for r in self.train_records]
        self._order = self._rng.permutation(len(self.train_records))
        self._cursor = 0
        self.trajectory = []  # one LossBreakdown per step
        self.history = []  # one entry per validation pass
        self.eval_fn = None  # test hook; defaults to validation macro-F1
        self._empty_s_steps = 0

    def _next_batch_indices(self) -> np.ndarray:
        n = len(self.train_records)
        take = min(self.cfg.batch_size, n)
        if self._cursor + take > n:
            self._order = self._rng.permutation(n)
            self._cursor = 0
        out = self._order[self._cursor:self._cursor + take]
        self._cursor += take
        return out

    def _validation_metric(self) -> float:
        if self.eval_fn is not None:
            return self.eval_fn(self.model)
        preds = _predict(self.model, self.tokenizer, self.cfg, self.val_records)
        macro, _ = binary_macro_f1([r.hate for r in self.val_records], preds)
        return macro

    def _step(self, step: int) -> None:
        cfg = self.cfg
        idx = self._next_batch_indices()
        records = [self.train_records[i] for i in idx]
        batch = TokenBatch.collate([self._train_seqs[i] for i in idx])
        enc_batch = batch
        if cfg.word_dropout > 0:
            # denoising exposure: corrupted words feed the encoder and the
            # teacher-forced decoder input; the clean ids stay the recon target
            ids = batch.token_ids.clone()
            hit = ((torch.rand(ids.shape) < cfg.word_dropout)
                   & (ids > EOS_ID) & (batch.attention_mask > 0))
            ids[hit] = UNK_ID
            enc_batch = TokenBatch(token_ids=ids,
                                   attention_mask=batch.attention_mask)
        self.model.train()

        emb = self.model.encode(enc_batch)
        noise = torch.randn(len(records), cfg.h_causal)
        c = self.model.reparameterize(emb, noise)
        t = self.model.target_head(emb)

        labels = pseudo_labels(self.state, batch, records, self.seed_labeler)
        pairs = [(TargetLatent(vector=t.vector[i]), labels[i])
                 for i in range(len(records))]
        s = select_high_confidence(pairs, cfg.eta)
        if len(s) > 0:
            probs_s = self.model.target_probs(TargetLatent(vector=s.latents()))
            l_target = target_loss(s, probs_s)
            l_conf = conf_regularizer(s, probs_s)
            l_cont = contrastive_loss(s, cfg.beta)
        else:
            self._empty_s_steps += 1
            log.debug("step %d: empty high-confidence set, skipping S terms", step)
            l_target = torch.tensor(0.0)
            l_conf = torch.tensor(0.0)
            l_cont = torch.tensor(0.0)

        r = self.model.recombine(c, t)
        probs_recon = self.model.decode(r, enc_batch)
        l_recon = recon_loss(batch.token_ids, probs_recon, batch.attention_mask)
        l_kl = kl_causal(c.mu, c.sigma)

        hate_labels = torch.tensor([rec.hate for rec in records])
        if cfg.hate_input == "causal":
            hate_probs = self.model.hate_logits(c)
        else:
            hate_probs = self.model.hate_logits_pooled(emb)
        l_hate = hate_loss(hate_probs, hate_labels)

        total = compose_total(
            contrastive=l_cont, conf=l_conf, target=l_target, recon=l_recon,
            kl_causal=l_kl, hate=l_hate, alpha_t=cfg.alpha_t, alpha_c=cfg.alpha_c,
            delta_cont=cfg.delta_cont, delta_conf=cfg.delta_conf)
        try:
            breakdown = compose_losses(
                contrastive=l_cont.item(), conf=l_conf.item(), target=l_target.item(),
                recon=l_recon.item(), kl_causal=l_kl.item(), hate=l_hate.item(),
                alpha_t=cfg.alpha_t, alpha_c=cfg.alpha_c,
                delta_cont=cfg.delta_cont, delta_conf=cfg.delta_conf)
        except NumericsError as e:
            last = self.trajectory[-1] if self.trajectory else None
            raise NumericsError(
                f"aborting at step {step}: {e}; last good breakdown: {last}") from e
        breakdown.check(rel_tol=1e-6)
        if abs(total.item() - breakdown.total) > 1e-6 * max(1.0, abs(breakdown.total)):
            raise NumericsError(
                f"step {step}: tensor total {total.item()} drifted from "
                f"breakdown {breakdown.total}")
        self.trajectory.append(breakdown)

        self.optimizer.zero_grad(set_to_none=True)
        total.backward()
        self.optimizer.step()
        refresh_teacher(self.state, self.model, step)

    def run(self) -> Checkpoint:
        cfg = self.cfg
        best_metric = -1.0
        best_state = None
        best_step = 0
        evals_without_improvement = 0
        step = 0
        for step in range(1, cfg.max_steps + 1):
            self._step(step)
            if step % cfg.eval_every == 0:
                metric = self._validation_metric()
                self.history.append({"step": step, "val_macro_f1": metric})
                if metric > best_metric:
                    best_metric = metric
                    best_state = copy.deepcopy(self.model.state_dict())
                    best_step = step
                    evals_without_improvement = 0
                else:
                    evals_without_improvement += 1
                if evals_without_improvement >= cfg.patience:
                    log.info("early stop at step %d (best %.4f at step %d)",
                             step, best_metric, best_step)
                    break
        if best_state is not None:
            self.model.load_state_dict(best_state)
            final_step = best_step
        else:
            final_step = step
        self.model.eval()
        if self._empty_s_steps:
            log.info("high-confidence set was empty on %d/%d steps",
                     self._empty_s_steps, len(self.trajectory))
        return Checkpoint(model=self.model, tokenizer=self.tokenizer,
                          config=cfg, taxonomy=self.taxonomy, step=final_step,
                          history=self.history,
                          optimizer_state=self.optimizer.state_dict())


def train(records: list, config: TrainConfig, **kw) -> Checkpoint:
    return Trainer(records, config, **kw).run()


# --- cross-platform grid -----------------------------------------------------

@dataclass
class EvalReport:
    """macro-F1 grid keyed (source, target); failed cells carry None."""

    grid: dict = field(default_factory=dict)  # (source, target) -> dict
    config_digest: str = ""

    def add(self, source: str, target: str, macro_f1: float | None,
            n_examples: int, failed: bool = False) -> None:
        if macro_f1 is not None and not 0.0 <= macro_f1 <= 1.0:
            raise ValueError(f"macro-F1 out of range: {macro_f1}")
        self.grid[(source, target)] = {"macro_f1": macro_f1,
                                       "n_examples": n_examples, "failed": failed}

    @property
    def has_failures(self) -> bool:
        return any(cell["failed"] for cell in self.grid.values())

    def render(self) -> str:
        """Matrix view: source rows by target columns."""
        sources = sorted({s for s, _ in self.grid})
        targets = sorted({t for _, t in self.grid})
        width = max([len("source \\ target")] + [len(x) for x in sources + targets]) + 2
        lines = ["".join(x.ljust(width) for x in ["source \\ target"] + targets)]
        for s in sources:
            row = [s]
            for t in targets:
                cell = self.grid.get((s, t))
                if cell is None:
                    row.append("-")
                elif cell["failed"]:
                    row.append("FAILED")
                else:
                    row.append(f"{cell['macro_f1']:.3f}")
            lines.append("".join(x.ljust(width) for x in row))
        return "\n".join(lines)

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(f"# config {self.config_digest}\n")
            fh.write("source\ttarget\tmacro_f1\tn_examples\n")
            for (s, t), cell in sorted(self.grid.items()):
                value = "FAILED" if cell["failed"] else f"{cell['macro_f1']:.6f}"
                fh.write(f"{s}\t{t}\t{value}\t{cell['n_examples']}\n")

    @classmethod
    def load(cls, path: str) -> "EvalReport":
        report = cls()
        with open(path) as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("# config "):
                    report.config_digest = line[len("# config "):]
                    continue
                if not line or line.startswith("source\t"):
                    continue
                s, t, value, n = line.split("\t")
                if value == "FAILED":
                    report.add(s, t, None, int(n), failed=True)
                else:
                    report.add(s, t, float(value), int(n))
        return report


def cross_platform_grid(sources: dict, targets: dict, config: TrainConfig,
                        **trainer_kw) -> EvalReport:
    """Train once per source corpus, evaluate on every target corpus.

    The in-dataset cell (target == source) scores the source's held-out split;
    cross cells score the full target corpus. Per-cell failures are recorded,
    not raised.
    """
    if not sources or not targets:
        raise DataError("grid needs at least one source and one target")
    report = EvalReport(config_digest=config.digest())
    for source_name, source_records in sources.items():
        try:
            ckpt = train(source_records, copy.deepcopy(config), **trainer_kw)
        except Exception as e:  # a broken source row must not sink the grid
            log.warning("training on %s failed: %s", source_name, e)
            for target_name, target_records in targets.items():
                report.add(source_name, target_name, None, len(target_records),
                           failed=True)
            continue
        for target_name, target_records in targets.items():
            try:
                if target_name == source_name:
                    _, held_out = split(target_records, config.val_fraction,
                                        config.seed)
                    result = evaluate(ckpt, held_out)
                else:
                    result = evaluate(ckpt, target_records)
                report.add(source_name, target_name, result.macro_f1,
                           result.n_examples)
            except Exception as e:
                log.warning("cell (%s, %s) failed: %s", source_name, target_name, e)
                report.add(source_name, target_name, None, len(target_records),
                           failed=True)
    return report


# --- latent export -----------------------------------------------------------

def export_latents(ckpt: Checkpoint, corpora: dict, n_per_platform: int,
                   path: str, head: str = "causal", seed: int = 0) -> None:
    """Write n latent rows per platform with platform/hate tags.

    Causal rows are the posterior means (zero noise); the target head dumps
    X_w instead.
    """
    if head not in ("causal", "target"):
        raise ConfigError(f"head must be causal or target, got {head!r}")
    rng = np.random.default_rng(seed)
    model, tokenizer, cfg = ckpt.model, ckpt.tokenizer, ckpt.config
    model.eval()
    with open(path, "w") as fh, torch.no_grad():
        for platform, records in corpora.items():
            if n_per_platform > len(records):
                raise DataError(
                    f"{platform}: asked for {n_per_platform} rows but corpus "
                    f"has {len(records)}")
            idx = rng.choice(len(records), size=n_per_platform, replace=False)
            chosen = [records[i] for i in idx]
            for lo in range(0, len(chosen), 256):
                chunk = chosen[lo:lo + 256]
                batch = TokenBatch.collate(
                    [tokenizer.encode(r.text, cfg.max_seq_len) for r in chunk])
                emb = model.encode(batch)
                if head == "causal":
                    vectors = model.reparameterize(emb).mu
                else:
                    vectors = model.target_head(emb).vector
                for rec, vec in zip(chunk, vectors):
                    values = ",".join(repr(v) for v in vec.tolist())
                    fh.write(f"{rec.platform}\t{rec.hate}\t{values}\n")


def load_latent_dump(path: str) -> list:
    """Rows of (platform, hate, vector) from an export_latents file."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                platform, hate, values = line.split("\t")
                vec = np.array([float(v) for v in values.split(",")])
                rows.append((platform, int(hate), vec))
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: bad latent row ({e})") from e
    return rows


def latent_distance_ratio(rows: list, platform_a: str, platform_b: str) -> dict:
    """Cross-platform vs within-platform mean pairwise distance, hate-matched.

    Returns per-class ratios and their mean; a ratio near 1 means the two
    platforms' latent clouds overlap.
    """
    out = {}
    ratios = []
    for hate in (0, 1):
        a = np.stack([v for p, h, v in rows if p == platform_a and h == hate])
        b = np.stack([v for p, h, v in rows if p == platform_b and h == hate])
        cross = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1).mean()
        within_a = _mean_pairwise(a)
        within_b = _mean_pairwise(b)
        within = (within_a + within_b) / 2
        ratio = cross / within if within > 0 else float("inf")
        out[hate] = {"cross": float(cross), "within": float(within),
                     "ratio": float(ratio)}
        ratios.append(ratio)
    out["mean_ratio"] = float(np.mean(ratios))
    return out


def _mean_pairwise(x: np.ndarray) -> float:
    if len(x) < 2:
        return 0.0
    d = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=-1)
    n = len(x)
    return float(d.sum() / (n * (n - 1)))
