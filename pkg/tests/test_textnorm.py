import pytest
from hypothesis import given, settings, strategies as st

from caption_transfer.textnorm import (
    ConfigError,
    Mode,
    NormalizationConfig,
    TokenizedText,
    default_config,
    normalize,
    parse_config,
    tokenize,
)


@pytest.mark.parametrize(
    "text, expected",
    [
        ("", ()),
        ("Black&White photo!", ("black&white", "photo")),
        ("Colors, colour.", ("colors", "colour")),
        ("Don't  over-expose   the f/2.8 shot", ("don't", "over", "expose", "the", "f", "2", "8", "shot")),
        ("It’s ISO 100", ("it's", "iso", "100")),
        ("&lone ampersand& and 'quotes'", ("lone", "ampersand", "and", "quotes")),
    ],
)
def test_tokenize(text, expected):
    assert tokenize(text).tokens == expected


def test_tokenize_keeps_original():
    assert tokenize("Hi There").original == "Hi There"


@given(st.text(max_size=80))
def test_tokens_have_no_whitespace_and_are_stable(text):
    toks = tokenize(text).tokens
    assert all(t and not any(ch.isspace() for ch in t) for t in toks)
    assert tokenize(" ".join(toks)).tokens == toks
    assert tokenize(text).tokens == toks


def tt(*tokens):
    return TokenizedText(tuple(tokens))


def test_stopwords_removed_keyword_mode():
    cfg = default_config()
    assert normalize(tt("the", "color", "is", "nice"), cfg, Mode.KEYWORD_EXTRACTION).tokens == ("color", "nice")


@pytest.mark.parametrize("mode", list(Mode))
def test_colour_merges_to_color(mode):
    assert normalize(tt("colour"), default_config(), mode).tokens == ("color",)


def test_plural_fold_only_for_known_stems():
    cfg = default_config()
    out = normalize(tt("colors", "colours", "lens", "lines", "shadows"), cfg, Mode.KEYWORD_EXTRACTION)
    assert out.tokens == ("color", "color", "lens", "lines", "shadows")


def test_modes_drop_different_lists():
    cfg = default_config()
    toks = tt("really", "blue", "sky", "photo")
    assert normalize(toks, cfg, Mode.KEYWORD_EXTRACTION).tokens == ("blue", "sky", "photo")
    assert normalize(toks, cfg, Mode.BOW_SCORING).tokens == ("really", "blue")


def test_variant_map_must_be_idempotent():
    with pytest.raises(ConfigError):
        NormalizationConfig(frozenset(), frozenset(), {"a": "b", "b": "c"}, frozenset())


def test_canonical_term_may_not_be_dropped():
    with pytest.raises(ConfigError):
        NormalizationConfig(frozenset({"color"}), frozenset(), {"colour": "color"}, frozenset())


def test_parse_config_sections():
    cfg = parse_config([
        "version = 7",
        "[stopwords]",
        "the  # comment",
        "[function_words]",
        "very",
        "[variants]",
        "grey = gray",
        "[noun_exclusions]",
        "photo",
    ])
    assert cfg.version == "7"
    assert cfg.stopwords == {"the"} and cfg.function_words == {"very"}
    assert dict(cfg.variants) == {"grey": "gray"} and cfg.noun_exclusions == {"photo"}


def test_parse_config_rejects_unknown_section():
    with pytest.raises(ConfigError):
        parse_config(["[nouns]", "x"])


def test_default_config_is_versioned():
    assert default_config().version == "1"
    assert len(default_config().stopwords) == 179


vocab = st.sampled_from(
    ["the", "color", "colour", "colours", "colors", "really", "photo", "sky", "blue", "b&w", "lens", "very", "grey", "x"]
)


@settings(max_examples=200)
@given(st.lists(vocab, max_size=12), st.sampled_from(list(Mode)))
def test_normalize_idempotent_and_stopword_free(tokens, mode):
    cfg = default_config()
    once = normalize(TokenizedText(tuple(tokens)), cfg, mode)
    assert normalize(once, cfg, mode) == once
    assert not set(once.tokens) & cfg.stopwords


@given(st.text(max_size=60), st.sampled_from(list(Mode)))
def test_normalize_idempotent_on_arbitrary_text(text, mode):
    cfg = default_config()
    once = normalize(tokenize(text), cfg, mode)
    assert normalize(once, cfg, mode) == once
