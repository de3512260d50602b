"""
Gaelic text normalization applied before tokenization, LM training and scoring.

Rules: canonical composition, lowercase, accent mapping, punctuation removal,
and replacement of words with non-Gaelic letters by a spoken-noise token.
"""

import logging
import unicodedata
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from pkg.utils.errors import BadConfig, EmptyToken, MissingPath
from pkg.utils.io import read_table, write_table, require_path
from pkg.utils.logging import setup_secure_logging, log_file_operation

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

logger = setup_secure_logging(__name__, logging.WARNING)

GAELIC_LETTERS = "abcdefghilmnoprstu" + "àèìòù"
ACUTE_TO_GRAVE = {"á": "à", "é": "è", "í": "ì", "ó": "ò", "ú": "ù"}
APOSTROPHES = "'’"
HYPHEN = "-"


class NormalizationRules(BaseModel):
    """Letter set, accent mapping and noise token used by normalize_text."""

    model_config = ConfigDict(frozen=True)

    letter_set: FrozenSet[str] = Field(default_factory=lambda: frozenset(GAELIC_LETTERS))
    accent_map: Dict[str, str] = Field(default_factory=lambda: dict(ACUTE_TO_GRAVE))
    noise_token: str = "<spn>"
    apostrophe_chars: FrozenSet[str] = Field(default_factory=lambda: frozenset(APOSTROPHES))

    @field_validator("letter_set", "apostrophe_chars", mode="before")
    @classmethod
    def _split_string(cls, value):
        # Rules files write character sets as plain strings
        if isinstance(value, str):
            return frozenset(unicodedata.normalize("NFC", value.replace(" ", "")))
        return value

    @field_validator("accent_map", mode="before")
    @classmethod
    def _compose_map(cls, value):
        # lookups happen after lowercasing
        if isinstance(value, dict):
            return {unicodedata.normalize("NFC", k).lower(): unicodedata.normalize("NFC", v)
                    for k, v in value.items()}
        return value

    @model_validator(mode="after")
    def _check_invariants(self):
        if not self.letter_set:
            raise ValueError("letter_set must not be empty")
        for source, target in self.accent_map.items():
            if not target or any(ch not in self.letter_set for ch in target):
                raise ValueError(f"accent_map value {target!r} for {source!r} is outside letter_set")
            if self.noise_token and self.noise_token in target:
                raise ValueError("accent_map must not produce the noise token")
        if not self.noise_token:
            raise ValueError("noise_token must not be empty")
        return self

    def allowed_chars(self) -> FrozenSet[str]:
        return self.letter_set | self.apostrophe_chars | {HYPHEN}


@dataclass(frozen=True)
class NormalizedUtterance:
    """Normalized word sequence of one utterance."""

    source_id: str
    tokens: Tuple[str, ...]

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


DEFAULT_RULES = NormalizationRules()


def load_rules(path: str) -> NormalizationRules:
    """
    Load normalization rules from a TOML file.

    The keys may sit at top level or under a ``[textnorm]`` table.

    Args:
        path: Rules file path

    Returns:
        Validated NormalizationRules
    """
    require_path(path)
    log_file_operation("reading rules", path, logger)
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise BadConfig(f"rules file {path}: {e}")
    data = data.get("textnorm", data)
    try:
        return NormalizationRules(**data)
    except ValidationError as e:
        raise BadConfig(f"rules file {path}: {e.errors()[0]['msg']}")


def _strip_punctuation(word: str, rules: NormalizationRules) -> str:
    kept = []
    for ch in word:
        if ch in rules.apostrophe_chars or ch == HYPHEN:
            kept.append(ch)
        elif unicodedata.category(ch).startswith("P"):
            continue
        else:
            kept.append(ch)
    return "".join(kept)


def _normalize_word(word: str, rules: NormalizationRules) -> Optional[str]:
    if word == rules.noise_token:
        return word
    word = "".join(rules.accent_map.get(ch, ch) for ch in word)
    word = _strip_punctuation(word, rules)
    if not word:
        return None
    allowed = rules.allowed_chars()
    if any(ch not in allowed for ch in word):
        return rules.noise_token
    if not any(ch in rules.letter_set for ch in word):
        # bare apostrophes or hyphens
        return None
    return word


def normalize_text(raw: str, rules: NormalizationRules = DEFAULT_RULES,
                   source_id: str = "") -> NormalizedUtterance:
    """
    Normalize one line of text.

    Args:
        raw: Raw text
        rules: Normalization rules
        source_id: Utterance identifier carried into the result

    Returns:
        NormalizedUtterance whose tokens are lowercase words over the letter set,
        or the noise token for words with other characters
    """
    text = unicodedata.normalize("NFC", raw)
    text = unicodedata.normalize("NFC", text.lower())
    tokens = []
    for word in text.split():
        normalized = _normalize_word(word, rules)
        if normalized is not None:
            tokens.append(normalized)
    return NormalizedUtterance(source_id=source_id, tokens=tuple(tokens))


def strip_edge_apostrophes(word: str, rules: NormalizationRules = DEFAULT_RULES) -> str:
    """Remove leading and trailing apostrophes; interior ones stay."""
    if not word:
        raise EmptyToken("cannot strip apostrophes from an empty token")
    return word.strip("".join(sorted(rules.apostrophe_chars)))


def read_corpus(path: str, rules: NormalizationRules = DEFAULT_RULES) -> List[NormalizedUtterance]:
    """
    Read and normalize a corpus file (one utterance per line, optional "utt-id<TAB>").

    Args:
        path: Corpus path
        rules: Normalization rules

    Returns:
        Normalized utterances in file order
    """
    log_file_operation("reading corpus", path, logger)
    return [normalize_text(text, rules, source_id=utt_id) for utt_id, text in read_table(path)]


def write_corpus(utterances: List[NormalizedUtterance], path: str) -> None:
    """Write utterances as "utt-id<TAB>tokens" lines."""
    log_file_operation("writing corpus", path, logger)
    write_table([(u.source_id, u.text) for u in utterances], path)
