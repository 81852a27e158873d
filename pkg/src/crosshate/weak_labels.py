"""Weak target supervision: seed labelers, the external-labeler client, and
the self-training teacher schedule.

No gold target labels are consumed anywhere here unless the source is
explicitly gold-passthrough; the training loop relies on that isolation.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import os
import urllib.request
from dataclasses import dataclass, field
from importlib import resources

import torch

from .config import ConfigError, DataError
from .losses import SoftLabel

log = logging.getLogger(__name__)

DEFAULT_TARGET_CLASSES = (
    "Ability/Disability",
    "Class",
    "Gender",
    "Immigration Status",
    "Nationality",
    "Race",
    "Religion",
    "Sexuality",
    "Sexual Preferences",
)

PROMPT_TEMPLATE = (
    "The following examples show the post and the target group being talked about "
    "in the post. Examples: {examples}\n"
    "Now, given the following posts, identify the main target group of the post. "
    "The target category of the post refers to the entity being talked about in "
    "the post. The possible categories are Ability/Disability, Class, Gender, "
    "Immigration Status, Nationality, Race, Religion, Sexuality, and Sexual "
    "Preferences."
)

API_KEY_ENV = "CROSSHATE_LLM_API_KEY"
ENDPOINT_ENV = "CROSSHATE_LLM_ENDPOINT"


class TransportError(RuntimeError):
    """External labeler could not be reached or gave no usable reply."""


@dataclass(frozen=True)
class TargetTaxonomy:
    classes: tuple = DEFAULT_TARGET_CLASSES

    def __post_init__(self):
        if len(self.classes) < 2:
            raise ConfigError(f"taxonomy needs >= 2 classes, got {len(self.classes)}")
        if len(set(self.classes)) != len(self.classes):
            raise ConfigError("taxonomy class names must be unique")

    def __len__(self) -> int:
        return len(self.classes)

    def index(self, name: str) -> int:
        try:
            return self.classes.index(name)
        except ValueError:
            raise DataError(f"unknown target class {name!r}") from None

    def one_hot(self, name: str) -> SoftLabel:
        probs = torch.zeros(len(self.classes))
        probs[self.index(name)] = 1.0
        return SoftLabel(probs=probs, confidence=1.0)


@dataclass
class WeakLabelSource:
    kind: str  # lexicon | external-llm | gold-passthrough
    provenance: str = ""


def build_prompt(text: str, examples: str = "...") -> str:
    return PROMPT_TEMPLATE.format(examples=examples) + f"\nPost: {text}\nTarget:"


def load_lexicon(path: str | None = None) -> dict:
    """keyword -> class-name map; ships with a small editable seed file."""
    if path:
        with open(path) as fh:
            lexicon = json.load(fh)
    else:
        ref = resources.files("crosshate.resources").joinpath("target_lexicon.json")
        lexicon = json.loads(ref.read_text())
    if not lexicon:
        raise DataError("lexicon is empty")
    return {str(k).lower(): str(v) for k, v in lexicon.items()}


def lexicon_label(text: str, taxonomy: TargetTaxonomy, lexicon: dict) -> SoftLabel:
    """Normalized per-class keyword hit counts; uniform when nothing matches."""
    if not lexicon:
        raise DataError("lexicon is empty")
    counts = torch.zeros(len(taxonomy))
    for tok in text.lower().split():
        cls = lexicon.get(tok)
        if cls is not None:
            counts[taxonomy.index(cls)] += 1.0
    if counts.sum() == 0:
        probs = torch.full((len(taxonomy),), 1.0 / len(taxonomy))
    else:
        probs = counts / counts.sum()
    return SoftLabel.from_probs(probs)


def _unit_hash(seed: int, text: str, salt: str = "") -> float:
    h = hashlib.sha256(f"{seed}:{salt}:{text}".encode()).digest()
    return int.from_bytes(h[:8], "big") / 2**64


class SeedLabeler:
    """Callable seed weak labeler over records or raw strings.

    Optional label noise flips a deterministic, text-keyed fraction of labels
    to a confident wrong class, for robustness experiments.
    """

    def __init__(self, taxonomy: TargetTaxonomy, source: WeakLabelSource,
                 lexicon: dict | None = None, client=None,
                 noise_rate: float = 0.0, noise_seed: int = 0):
        if source.kind == "lexicon" and lexicon is None:
            raise ConfigError("lexicon source needs a lexicon")
        if source.kind == "external-llm" and client is None:
            raise ConfigError("external-llm source needs a client")
        self.taxonomy = taxonomy
        self.source = source
        self.lexicon = lexicon
        self.client = client
        self.noise_rate = noise_rate
        self.noise_seed = noise_seed

    def _clean(self, record) -> SoftLabel:
        text = record if isinstance(record, str) else record.text
        if self.source.kind == "lexicon":
            return lexicon_label(text, self.taxonomy, self.lexicon)
        if self.source.kind == "external-llm":
            return llm_label(text, self.taxonomy, self.client, lexicon=self.lexicon)
        if self.source.kind == "gold-passthrough":
            gold = getattr(record, "gold_target", None)
            if gold is None:
                raise DataError("gold-passthrough needs records with gold_target")
            return self.taxonomy.one_hot(gold)
        raise ConfigError(f"unknown weak label source {self.source.kind!r}")

    def __call__(self, record) -> SoftLabel:
        label = self._clean(record)
        if self.noise_rate > 0:
            text = record if isinstance(record, str) else record.text
            if _unit_hash(self.noise_seed, text) < self.noise_rate:
                wrong = int(_unit_hash(self.noise_seed, text, salt="cls")
                            * (len(self.taxonomy) - 1))
                if wrong >= label.argmax:
                    wrong += 1
                return self.taxonomy.one_hot(self.taxonomy.classes[wrong])
        return label


class ReplayLabelerClient:
    """Serves recorded request/response pairs; off-line stand-in for the live
    external labeler."""

    def __init__(self, replay_path: str):
        with open(replay_path) as fh:
            pairs = json.load(fh)
        self.replies = {p["request"]: p["response"] for p in pairs}

    def complete(self, prompt: str) -> str:
        if prompt not in self.replies:
            raise TransportError("no recorded reply for this request")
        return self.replies[prompt]


class LiveLabelerClient:
    """Minimal HTTP client for a hosted labeler; requires explicit credentials."""

    def __init__(self, timeout: float = 30.0):
        self.api_key = os.environ.get(API_KEY_ENV)
        self.endpoint = os.environ.get(ENDPOINT_ENV)
        if not self.api_key or not self.endpoint:
            raise ConfigError(
                f"live labeler needs {API_KEY_ENV} and {ENDPOINT_ENV} set; "
                "use the lexicon source or a replay fixture otherwise")
        self.timeout = timeout

    def complete(self, prompt: str) -> str:
        body = json.dumps({"prompt": prompt}).encode()
        req = urllib.request.Request(
            self.endpoint, data=body,
            headers={"Authorization": f"Bearer {self.api_key}",
                     "Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read())["completion"]
        except Exception as e:  # network errors come in many flavors
            raise TransportError(str(e)) from e


def parse_category(response: str, taxonomy: TargetTaxonomy) -> int | None:
    """Match a reply against the class names; None when not exactly one hits."""
    lowered = response.lower()
    hits = [i for i, name in enumerate(taxonomy.classes) if name.lower() in lowered]
    return hits[0] if len(hits) == 1 else None


def llm_label(text: str, taxonomy: TargetTaxonomy, client,
              lexicon: dict | None = None, retries: int = 2) -> SoftLabel:
    prompt = build_prompt(text)
    response = None
    for attempt in range(retries):
        try:
            response = client.complete(prompt)
            break
        except TransportError as e:
            log.warning("labeler attempt %d failed: %s", attempt + 1, e)
    if response is None:
        log.warning("external labeler unreachable, falling back to lexicon")
        if lexicon is None:
            lexicon = load_lexicon()
        return lexicon_label(text, taxonomy, lexicon)
    idx = parse_category(response, taxonomy)
    if idx is None:
        log.warning("unparseable labeler reply %r, using uniform label", response[:80])
        return SoftLabel.from_probs(torch.full((len(taxonomy),), 1.0 / len(taxonomy)))
    return taxonomy.one_hot(taxonomy.classes[idx])


# --- self-training teacher ---------------------------------------------------

def classify_target(model, t) -> SoftLabel | list:
    """Run the target classifier on a latent; detached, confidence attached."""
    probs = model.target_probs(t).detach()
    if probs.dim() == 1:
        return SoftLabel.from_probs(probs)
    return [SoftLabel.from_probs(row) for row in probs]


@dataclass
class PseudoLabelState:
    refresh_period: int
    step_of_last_refresh: int = 0
    teacher: object = None
    source: WeakLabelSource = field(default_factory=lambda: WeakLabelSource(kind="lexicon"))

    def due(self, current_step: int) -> bool:
        return current_step - self.step_of_last_refresh >= self.refresh_period


def refresh_teacher(state: PseudoLabelState, model, current_step: int) -> PseudoLabelState:
    """Snapshot the full text-to-label path when the period has elapsed.

    Between refreshes the snapshot is immutable, so pseudo-labels stay
    stationary while the student keeps moving.
    """
    if state.due(current_step):
        teacher = copy.deepcopy(model)
        teacher.eval()
        for p in teacher.parameters():
            p.requires_grad_(False)
        state.teacher = teacher
        state.step_of_last_refresh = current_step
    return state


def pseudo_labels(state: PseudoLabelState, batch, records, seed_labeler: SeedLabeler) -> list:
    """Labels for one batch: seed labeler before the first refresh, the frozen
    teacher afterwards."""
    if state.teacher is None:
        return [seed_labeler(r) for r in records]
    with torch.no_grad():
        emb = state.teacher.encode(batch)
        latent = state.teacher.target_head(emb)
        return classify_target(state.teacher, latent)
