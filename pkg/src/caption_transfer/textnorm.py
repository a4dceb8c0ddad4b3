"""Tokenization and list-based normalization shared by every stage."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

# Alphanumeric runs, optionally joined by internal apostrophes or "&"
# ("don't", "black&white").
_TOKEN = re.compile(r"[^\W_]+(?:['&][^\W_]+)*")
_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "＆": "&"})

DEFAULT_CONFIG_NAME = "normalization.cfg"


class Mode(str, enum.Enum):
    KEYWORD_EXTRACTION = "keyword_extraction"
    BOW_SCORING = "bow_scoring"


@dataclass(frozen=True)
class TokenizedText:
    tokens: tuple[str, ...]
    original: str = ""

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


def tokenize(text: str) -> TokenizedText:
    lowered = text.translate(_APOSTROPHES).lower()
    tokens = []
    for tok in _TOKEN.findall(lowered):
        # lower() is not idempotent for a few code points; settle the token
        # so re-tokenizing the joined output reproduces it.
        while (again := tok.lower()) != tok:
            tok = again
        tokens.extend(_TOKEN.findall(tok))
    return TokenizedText(tuple(tokens), text)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NormalizationConfig:
    stopwords: frozenset[str]
    function_words: frozenset[str]
    variants: Mapping[str, str]
    noun_exclusions: frozenset[str]
    version: str = "unversioned"

    def __post_init__(self):
        object.__setattr__(self, "_canonicals", frozenset(self.variants.values()))
        object.__setattr__(self, "_dropped", {
            Mode.KEYWORD_EXTRACTION: self.stopwords | self.function_words,
            Mode.BOW_SCORING: self.stopwords | self.noun_exclusions,
        })
        for variant, canon in self.variants.items():
            if self.variants.get(canon, canon) != canon:
                raise ConfigError(f"variant map not idempotent: {variant}->{canon}->{self.variants[canon]}")
        for canon in self._canonicals:
            if self.canonical(canon) != canon:
                raise ConfigError(f"canonical term {canon!r} is folded to {self.canonical(canon)!r}")
            for mode in Mode:
                if canon in self.dropped(mode):
                    raise ConfigError(f"canonical term {canon!r} is dropped in {mode.value} mode")

    def dropped(self, mode: Mode) -> frozenset[str]:
        return self._dropped[Mode(mode)]

    def canonical(self, term: str) -> str:
        """Map a term to its canonical spelling.

        Plurals fold only when the singular is already known to the variant
        map, so "colors" becomes "color" while "lens" is left alone.
        """
        if term in self.variants:
            return self.variants[term]
        if term.endswith("s") and len(term) > 1:
            stem = term[:-1]
            if stem in self.variants:
                return self.variants[stem]
            if stem in self._canonicals:
                return stem
        return term


def normalize(text: TokenizedText, cfg: NormalizationConfig, mode: Mode | str) -> TokenizedText:
    drop = cfg.dropped(Mode(mode))
    out = []
    for tok in text.tokens:
        if tok in drop:
            continue
        canon = cfg.canonical(tok)
        if canon in drop:
            continue
        out.append(canon)
    return TokenizedText(tuple(out), text.original)


def prepare(text: str, cfg: NormalizationConfig, mode: Mode | str) -> TokenizedText:
    return normalize(tokenize(text), cfg, mode)


_SECTIONS = {"stopwords", "function_words", "variants", "noun_exclusions"}


def parse_config(lines: Iterable[str], version: str = "unversioned") -> NormalizationConfig:
    """Parse the sectioned plain-text format.

    ``[section]`` headers, one term per line (or ``variant=canonical`` in
    ``[variants]``), ``#`` comments. A ``version = x`` line before the first
    section sets the version tag.
    """
    lists: dict[str, set[str]] = {"stopwords": set(), "function_words": set(), "noun_exclusions": set()}
    variants: dict[str, str] = {}
    section = None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if section is None:
            key, _, value = line.partition("=")
            if key.strip() != "version":
                raise ConfigError(f"line {lineno}: entry outside any section")
            version = value.strip()
        elif section == "variants":
            variant, sep, canon = line.partition("=")
            if not sep:
                raise ConfigError(f"line {lineno}: expected variant=canonical")
            variants[variant.strip().lower()] = canon.strip().lower()
        else:
            lists[section].add(line.lower())
    return NormalizationConfig(
        stopwords=frozenset(lists["stopwords"]),
        function_words=frozenset(lists["function_words"]),
        variants=variants,
        noun_exclusions=frozenset(lists["noun_exclusions"]),
        version=version,
    )


def load_config(path=None) -> NormalizationConfig:
    """Load a config file, or the bundled default when ``path`` is None."""
    if path is None:
        text = resources.files(__package__).joinpath("data").joinpath(DEFAULT_CONFIG_NAME).read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_config(text.splitlines())


_default = None


def default_config() -> NormalizationConfig:
    global _default
    if _default is None:
        _default = load_config()
    return _default
