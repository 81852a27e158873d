"""Corpus ingestion for the four platform schemas, canonical record IO,
stratified splitting, and the synthetic multi-platform generator.

Canonical on-disk form is one JSON object per line with fields
{id, text, hate, gold_target?, platform}; the per-platform adapters below
translate the heterogeneous source schemas into it, skip-and-count rejects,
and never abort a whole file on a bad row.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .config import DataError

log = logging.getLogger(__name__)

REAL_PLATFORMS = ("GAB", "Reddit", "X", "YouTube")
TARGET_LABELED = {"GAB", "YouTube"}

# annotator community names in hate-corpus releases -> taxonomy classes
GAB_TARGET_MAP = {
    "african": "Race", "caucasian": "Race", "asian": "Race", "hispanic": "Race",
    "arab": "Race", "indigenous": "Race", "minority": "Race",
    "islam": "Religion", "jewish": "Religion", "christian": "Religion",
    "buddhism": "Religion", "hindu": "Religion",
    "homosexual": "Sexuality", "gay": "Sexuality", "heterosexual": "Sexuality",
    "women": "Gender", "men": "Gender", "nonbinary": "Gender",
    "disability": "Ability/Disability",
    "refugee": "Immigration Status", "immigrant": "Immigration Status",
    "economic": "Class",
    "indian": "Nationality", "chinese": "Nationality", "mexican": "Nationality",
}


@dataclass
class ExampleRecord:
    id: str
    text: str
    hate: int
    platform: str
    gold_target: str | None = None

    def __post_init__(self):
        if not self.text:
            raise DataError(f"record {self.id}: empty text")
        if self.hate not in (0, 1):
            raise DataError(f"record {self.id}: hate must be 0 or 1, got {self.hate!r}")
        if self.platform not in REAL_PLATFORMS and not self.platform.startswith("synthetic-"):
            raise DataError(f"record {self.id}: unknown platform {self.platform!r}")


@dataclass
class CorpusSummary:
    n_posts: int
    n_hateful: int
    hate_pct: float
    has_targets: bool
    n_rejected: int = 0

    @classmethod
    def from_records(cls, records: list, n_rejected: int = 0) -> "CorpusSummary":
        n = len(records)
        h = sum(r.hate for r in records)
        return cls(n_posts=n, n_hateful=h, hate_pct=100.0 * h / n if n else 0.0,
                   has_targets=any(r.gold_target is not None for r in records),
                   n_rejected=n_rejected)

    def to_dict(self) -> dict:
        return {"n_posts": self.n_posts, "n_hateful": self.n_hateful,
                "hate_pct": round(self.hate_pct, 2), "has_targets": self.has_targets,
                "n_rejected": self.n_rejected}


def write_corpus(path: str, records: list) -> None:
    with open(path, "w") as fh:
        for r in records:
            row = {"id": r.id, "text": r.text, "hate": r.hate, "platform": r.platform}
            if r.gold_target is not None:
                row["gold_target"] = r.gold_target
            fh.write(json.dumps(row) + "\n")


def read_corpus(path: str) -> list:
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                records.append(ExampleRecord(
                    id=str(row["id"]), text=row["text"], hate=int(row["hate"]),
                    platform=row["platform"], gold_target=row.get("gold_target")))
            except (KeyError, ValueError, TypeError) as e:
                raise DataError(f"{path}:{lineno}: bad record ({e})") from e
    return records


# --- platform adapters -------------------------------------------------------

def _pick_column(row: dict, candidates: tuple, path: str) -> str:
    for c in candidates:
        if c in row:
            return c
    raise DataError(f"{path}: none of the columns {candidates} present "
                    f"(found {sorted(row)[:8]})")


def _load_gab(path: str) -> tuple:
    """Hate-corpus JSON: id -> {post_tokens, annotators:[{label, target}]}.

    Majority vote over binarized annotator labels (hatespeech/offensive -> 1);
    even-split ties fall to non-hate. Majority annotator community mapped into
    the taxonomy when possible, else no gold target.
    """
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise DataError(f"{path}: expected a JSON object keyed by post id")
    keys = sorted(data)
    if any("gab" in k.lower() for k in keys):
        keys = [k for k in keys if "gab" in k.lower()]
    records, rejected = [], 0
    for key in keys:
        entry = data[key]
        try:
            tokens = entry["post_tokens"]
            votes = [1 if a["label"].lower() in ("hatespeech", "hateful", "offensive") else 0
                     for a in entry["annotators"]]
        except (KeyError, TypeError, AttributeError):
            rejected += 1
            log.warning("%s: entry %s malformed, skipped", path, key)
            continue
        text = " ".join(tokens).strip()
        if not text or not votes:
            rejected += 1
            continue
        hate = 1 if sum(votes) * 2 > len(votes) else 0
        target = None
        names = [t.lower() for a in entry["annotators"] for t in a.get("target") or []]
        names = [n for n in names if n not in ("none", "other")]
        if names:
            top = max(set(names), key=names.count)
            target = GAB_TARGET_MAP.get(top)
        records.append(ExampleRecord(id=key, text=text, hate=hate,
                                     platform="GAB", gold_target=target))
    return records, rejected


def _load_reddit(path: str) -> tuple:
    """Slur-corpus CSV with four ordinal labels; the denigrating class is
    hateful, everything else is not."""
    mapping = {"deg": 1, "ndg": 0, "hom": 0, "apr": 0}
    records, rejected = [], 0
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, 2):
            try:
                text_col = _pick_column(row, ("body", "text", "comment"), path)
                label_col = _pick_column(row, ("gold_label", "label", "annotation"), path)
            except DataError:
                raise
            label = (row[label_col] or "").strip().lower()
            text = (row[text_col] or "").strip()
            if label not in mapping or not text:
                rejected += 1
                log.warning("%s:%d: unusable row (label %r), skipped", path, lineno, label)
                continue
            records.append(ExampleRecord(id=row.get("id") or f"reddit-{lineno}",
                                         text=text, hate=mapping[label],
                                         platform="Reddit"))
    return records, rejected


def _load_x(path: str) -> tuple:
    """Tweet CSV with class 0=hate, 1=offensive, 2=neither; first two are
    hateful."""
    mapping = {"0": 1, "1": 1, "2": 0, "hate": 1, "offensive": 1, "neither": 0}
    records, rejected = [], 0
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, 2):
            text_col = _pick_column(row, ("tweet", "text"), path)
            label_col = _pick_column(row, ("class", "label"), path)
            label = (row[label_col] or "").strip().lower()
            text = (row[text_col] or "").strip()
            if label not in mapping or not text:
                rejected += 1
                log.warning("%s:%d: unusable row (label %r), skipped", path, lineno, label)
                continue
            records.append(ExampleRecord(id=row.get("id") or f"x-{lineno}",
                                         text=text, hate=mapping[label], platform="X"))
    return records, rejected


def _load_youtube(path: str) -> tuple:
    """Comment CSV with a binary hatefulness column and optional target."""
    truthy = {"1", "yes", "true", "hateful", "hate"}
    falsy = {"0", "no", "false", "normal", "neutral", "not hateful"}
    records, rejected = [], 0
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, 2):
            low = {k.lower(): v for k, v in row.items() if k}
            text_col = _pick_column(low, ("text", "comment", "body"), path)
            label_col = _pick_column(low, ("hateful", "hate", "label", "is_hateful"), path)
            label = (low[label_col] or "").strip().lower()
            text = (low[text_col] or "").strip()
            if (label not in truthy and label not in falsy) or not text:
                rejected += 1
                log.warning("%s:%d: unusable row (label %r), skipped", path, lineno, label)
                continue
            target = None
            for cand in ("target", "gold_target", "sub-category", "subcategory"):
                if low.get(cand):
                    target = low[cand].strip() or None
                    break
            records.append(ExampleRecord(id=low.get("id") or f"youtube-{lineno}",
                                         text=text, hate=1 if label in truthy else 0,
                                         platform="YouTube", gold_target=target))
    return records, rejected


_ADAPTERS = {"GAB": _load_gab, "Reddit": _load_reddit, "X": _load_x,
             "YouTube": _load_youtube}


def load_corpus(path: str, platform: str) -> tuple:
    """Read one raw platform file into canonical records plus a summary."""
    if platform not in _ADAPTERS:
        raise DataError(f"unknown platform {platform!r}, expected one of {REAL_PLATFORMS}")
    try:
        records, rejected = _ADAPTERS[platform](path)
    except DataError:
        raise
    except (json.JSONDecodeError, csv.Error, UnicodeDecodeError, KeyError) as e:
        raise DataError(f"{path}: cannot parse as a {platform} file ({e})") from e
    if platform not in TARGET_LABELED:
        for r in records:
            r.gold_target = None
    return records, CorpusSummary.from_records(records, n_rejected=rejected)


# --- splitting ---------------------------------------------------------------

def split(records: list, val_fraction: float, seed: int) -> tuple:
    """Deterministic stratified train/validation split on the hate label."""
    if not 0.0 < val_fraction < 1.0:
        raise DataError(f"val_fraction must be in (0, 1), got {val_fraction}")
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[int]] = {}
    for i, r in enumerate(records):
        by_class.setdefault(r.hate, []).append(i)
    train_idx, val_idx = [], []
    for cls in sorted(by_class):
        idx = np.array(by_class[cls])
        rng.shuffle(idx)
        n_val = int(round(len(idx) * val_fraction))
        if n_val < 1 or len(idx) - n_val < 1:
            raise DataError(
                f"corpus too small to stratify: class {cls} has {len(idx)} records "
                f"at val_fraction {val_fraction}")
        val_idx.extend(idx[:n_val].tolist())
        train_idx.extend(idx[n_val:].tolist())
    return [records[i] for i in train_idx], [records[i] for i in val_idx]


# --- synthetic generator -----------------------------------------------------

DEFAULT_FILLER = ("the", "a", "and", "to", "of", "in", "on", "for", "is", "it")
DEFAULT_CAUSAL = ("hostile0", "hostile1", "hostile2", "hostile3", "hostile4", "hostile5")


@dataclass
class SyntheticSpec:
    """Recipe for a multi-platform corpus realizing the intended causal graph:
    the hate label is a deterministic count rule over shared causal tokens,
    target tokens are platform-specific and independent of the label.

    The planted spurious correlation forces the target class of a fraction of
    one platform's posts to follow the hate label, so that platform-specific
    target tokens become label-correlated there and nowhere else."""

    n_platforms: int = 2
    n_posts: int = 1000
    hate_rate: float = 0.5
    seed: int = 0
    causal_vocab: tuple = DEFAULT_CAUSAL
    filler_vocab: tuple = DEFAULT_FILLER
    # platform -> {target class -> probability tuple over filler_vocab};
    # empty dict means uniform. Shared vocabulary, community-dependent
    # frequencies: style drift without out-of-vocabulary effects.
    filler_dists: dict = field(default_factory=dict)
    # hate iff at least this many causal tokens; non-hate posts carry one
    # fewer with probability ambiguity_rate, none otherwise
    hate_min_causal: int = 2
    ambiguity_rate: float = 0.0
    # inclusive range of target tokens drawn per post
    n_target_tokens: tuple = (1, 2)
    # inclusive range of content tokens per post; fillers pad whatever the
    # target and causal draws leave, so length carries no label signal
    n_content_tokens: tuple = (9, 12)
    target_classes: tuple = ("Religion", "Race", "Gender", "Immigration Status")
    # platform -> {class -> token tuple}
    target_vocabs: dict = field(default_factory=dict)
    # platform -> probability tuple over target_classes
    target_dists: dict = field(default_factory=dict)
    spurious_rate: float = 0.0
    spurious_platform: str = ""
    spurious_pos_class: int = 0  # forced target class on hate posts
    spurious_neg_class: int = 1  # forced target class on non-hate posts

    def platforms(self) -> list:
        return [f"synthetic-{chr(ord('a') + i)}" for i in range(self.n_platforms)]

    def validate(self) -> "SyntheticSpec":
        if self.n_platforms < 1:
            raise DataError("n_platforms must be >= 1")
        if not 0.0 <= self.hate_rate <= 1.0:
            raise DataError(f"hate_rate must be in [0, 1], got {self.hate_rate}")
        if not 0.0 <= self.ambiguity_rate <= 1.0:
            raise DataError(f"ambiguity_rate must be in [0, 1], got {self.ambiguity_rate}")
        if self.hate_min_causal < 1:
            raise DataError(f"hate_min_causal must be >= 1, got {self.hate_min_causal}")
        for name in ("n_target_tokens", "n_content_tokens"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise DataError(f"{name} must satisfy 1 <= lo <= hi, "
                                f"got {getattr(self, name)}")
        if self.n_content_tokens[0] < (self.n_target_tokens[1]
                                       + self.hate_min_causal + 2):
            raise DataError("n_content_tokens too small for the target and "
                            "causal draws plus at least one filler")
        causal = set(self.causal_vocab)
        if not causal:
            raise DataError("causal_vocab must be nonempty")
        if self.spurious_rate > 0:
            if not 0.0 < self.spurious_rate <= 1.0:
                raise DataError(f"spurious_rate must be in (0, 1], got {self.spurious_rate}")
            if self.spurious_platform not in self.platforms():
                raise DataError(
                    f"spurious_platform {self.spurious_platform!r} is not one of "
                    f"{self.platforms()}")
            n_cls = len(self.target_classes)
            for name in ("spurious_pos_class", "spurious_neg_class"):
                if not 0 <= getattr(self, name) < n_cls:
                    raise DataError(f"{name} out of range for {n_cls} target classes")
            if self.spurious_pos_class == self.spurious_neg_class:
                raise DataError("spurious_pos_class and spurious_neg_class must differ")
        for platform in self.platforms():
            vocab = self.target_vocabs.get(platform)
            if not vocab:
                raise DataError(f"missing target_vocabs for {platform}")
            tokens = {t for toks in vocab.values() for t in toks}
            if causal & tokens:
                raise DataError(
                    f"causal_vocab overlaps target vocab of {platform}: "
                    f"{sorted(causal & tokens)}")
            dist = self.target_dists.get(platform)
            if dist is None or len(dist) != len(self.target_classes):
                raise DataError(f"target_dists[{platform}] must cover {self.target_classes}")
            if abs(sum(dist) - 1.0) > 1e-6 or any(p < 0 for p in dist):
                raise DataError(f"target_dists[{platform}] is not a distribution")
            for cls in self.target_classes:
                if not vocab.get(cls):
                    raise DataError(f"{platform} has no tokens for class {cls!r}")
            profiles = self.filler_dists.get(platform)
            if profiles is not None:
                if set(profiles) != set(self.target_classes):
                    raise DataError(
                        f"filler_dists[{platform}] must map every target class")
                for cls, fdist in profiles.items():
                    if len(fdist) != len(self.filler_vocab):
                        raise DataError(
                            f"filler_dists[{platform}][{cls!r}] must cover "
                            f"the filler vocab")
                    if abs(sum(fdist) - 1.0) > 1e-6 or any(p < 0 for p in fdist):
                        raise DataError(
                            f"filler_dists[{platform}][{cls!r}] is not a "
                            f"distribution")
        # platform target vocabs must be pairwise disjoint
        seen: dict[str, str] = {}
        for platform in self.platforms():
            for toks in self.target_vocabs[platform].values():
                for t in toks:
                    if t in seen and seen[t] != platform:
                        raise DataError(f"token {t!r} appears in both {seen[t]} and {platform}")
                    seen[t] = platform
        return self


def default_synthetic_spec(lexicon: dict, n_platforms: int = 2, n_posts: int = 1000,
                           hate_rate: float = 0.5, seed: int = 0,
                           spurious_rate: float = 0.0,
                           ambiguity_rate: float = 0.0,
                           hate_min_causal: int = 2) -> SyntheticSpec:
    """Partition the seed lexicon's keywords per class across platforms so the
    lexicon weak labeler works out of the box on the generated corpora."""
    spec = SyntheticSpec(n_platforms=n_platforms, n_posts=n_posts,
                         hate_rate=hate_rate, seed=seed, spurious_rate=spurious_rate,
                         ambiguity_rate=ambiguity_rate,
                         hate_min_causal=hate_min_causal)
    by_class: dict[str, list[str]] = {c: [] for c in spec.target_classes}
    for kw, cls in sorted(lexicon.items()):
        if cls in by_class:
            by_class[cls].append(kw)
    platforms = spec.platforms()
    for cls, words in by_class.items():
        chunk = len(words) // n_platforms
        if chunk < 1:
            raise DataError(f"not enough lexicon words for class {cls!r} "
                            f"across {n_platforms} platforms")
        for i, platform in enumerate(platforms):
            spec.target_vocabs.setdefault(platform, {})[cls] = tuple(
                words[i * chunk:(i + 1) * chunk])
    n_cls = len(spec.target_classes)
    for i, platform in enumerate(platforms):
        # platform-specific skew over the same class menu
        weights = np.roll(np.arange(1, n_cls + 1), i).astype(float)
        spec.target_dists[platform] = tuple(weights / weights.sum())
    n_fill = len(spec.filler_vocab)
    groups = np.arange(n_fill) % n_cls
    for i, platform in enumerate(platforms):
        # community accents: each target class mildly favors its own slice of
        # the shared filler vocab on the first platform. Every later platform
        # speaks in one heavy class-independent accent, an exaggerated version
        # of one first-platform community's, so style separates platforms
        # through frequency alone, with no new words. Mild accents keep the
        # first platform's internal style spread small next to that shift
        profiles = {}
        for j, cls in enumerate(spec.target_classes):
            weights = np.ones(n_fill)
            if i == 0:
                weights[groups == j] += 1.0
            else:
                weights[groups == spec.spurious_pos_class % n_cls] += 40.0
            profiles[cls] = tuple(weights / weights.sum())
        spec.filler_dists[platform] = profiles
    if spurious_rate > 0:
        spec.spurious_platform = platforms[0]
        if n_cls < 3:
            raise DataError("spurious planting needs at least 3 target classes")
        # worst case for an entangled classifier: on the planted platform the
        # non-planted base mass sits on a single uninformative class, so every
        # bit of target variation there is label-correlated, and the planted
        # classes never appear from the base mixture (the correlation is
        # contradiction-free)
        weights = np.zeros(n_cls)
        weights[-1] = 1.0
        spec.target_dists[platforms[0]] = tuple(weights)
    return spec.validate()


def causal_rule(spec: SyntheticSpec, tokens: list) -> int:
    """The generating label rule: hate iff enough causal tokens are present."""
    causal = set(spec.causal_vocab)
    return int(sum(1 for t in tokens if t in causal) >= spec.hate_min_causal)


def generate_synthetic(spec: SyntheticSpec) -> dict:
    """platform -> records; deterministic under spec.seed."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    corpora: dict[str, list] = {}
    for platform in spec.platforms():
        vocab = spec.target_vocabs[platform]
        dist = np.array(spec.target_dists[platform])
        profiles = {cls: np.array(fdist) for cls, fdist
                    in (spec.filler_dists.get(platform) or {}).items()}
        records = []
        for i in range(spec.n_posts):
            hate = int(rng.random() < spec.hate_rate)
            if platform == spec.spurious_platform and rng.random() < spec.spurious_rate:
                cls = spec.target_classes[spec.spurious_pos_class if hate
                                          else spec.spurious_neg_class]
            else:
                cls = spec.target_classes[int(rng.choice(len(dist), p=dist))]
            lo, hi = spec.n_target_tokens
            tokens = list(rng.choice(vocab[cls], size=rng.integers(lo, hi + 1)))
            if hate:
                n_causal = int(rng.integers(spec.hate_min_causal,
                                            spec.hate_min_causal + 2))
            elif spec.ambiguity_rate and rng.random() < spec.ambiguity_rate:
                n_causal = spec.hate_min_causal - 1
            else:
                n_causal = 0
            if n_causal:
                tokens += list(rng.choice(spec.causal_vocab, size=n_causal))
            clo, chi = spec.n_content_tokens
            n_filler = int(rng.integers(clo, chi + 1)) - len(tokens)
            tokens += list(rng.choice(spec.filler_vocab, size=n_filler,
                                      p=profiles.get(cls)))
            rng.shuffle(tokens)
            records.append(ExampleRecord(id=f"{platform}-{i:05d}",
                                         text=" ".join(tokens), hate=hate,
                                         platform=platform, gold_target=cls))
        corpora[platform] = records
    return corpora


def synthetic_lexicon(spec: SyntheticSpec) -> dict:
    """keyword -> class map covering every platform's target vocab."""
    lex = {}
    for platform in spec.platforms():
        for cls, toks in spec.target_vocabs[platform].items():
            for t in toks:
                lex[t] = cls
    return lex
