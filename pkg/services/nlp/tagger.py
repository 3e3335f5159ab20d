"""Rule-based part-of-speech tagging and lemmatization."""
from __future__ import annotations

import re
from typing import Optional, Protocol, Sequence

from common.models import PosTag

from . import lexicon

_NUMERIC_RE = re.compile(r"^\d+(?:[.,]\d+)*$")
_NOUN_CONTEXT = lexicon.DETERMINERS | lexicon.PREPOSITIONS


class Tagger(Protocol):
    """Anything that turns a word sequence into (tag, lemma) pairs, one per word."""

    def tag(self, words: Sequence[str]) -> list[tuple[PosTag, str]]: ...


def noun_lemma(word: str) -> str:
    """Lowercase and reduce a plural noun to its singular form."""

    word = word.lower()
    if word in lexicon.IRREGULAR_NOUNS:
        return lexicon.IRREGULAR_NOUNS[word]
    if word in lexicon.UNCOUNTED_S or word.endswith(("ss", "us", "is")):
        return word
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith(("sses", "xes", "ches", "shes", "zzes")):
        return word[:-2]
    if word.endswith("s") and len(word) > 3:
        return word[:-1]
    return word


def verb_lemma(word: str) -> Optional[str]:
    """Return the base form when ``word`` is a known verb form, else None."""

    word = word.lower()
    if word in lexicon.IRREGULAR_VERBS:
        return lexicon.IRREGULAR_VERBS[word]
    if word in lexicon.VERBS:
        return word

    candidates: list[str] = []
    if word.endswith("ing") and len(word) > 4:
        stem = word[:-3]
        candidates += [stem, stem + "e"]
        if len(stem) > 2 and stem[-1] == stem[-2]:
            candidates.append(stem[:-1])
    elif word.endswith("ied") and len(word) > 4:
        candidates.append(word[:-3] + "y")
    elif word.endswith("ed") and len(word) > 3:
        stem = word[:-2]
        candidates += [stem, word[:-1]]
        if len(stem) > 2 and stem[-1] == stem[-2]:
            candidates.append(stem[:-1])
    elif word.endswith("ies") and len(word) > 4:
        candidates.append(word[:-3] + "y")
    elif word.endswith("es") and len(word) > 3:
        candidates += [word[:-2], word[:-1]]
    elif word.endswith("s") and len(word) > 2:
        candidates.append(word[:-1])
    return next((candidate for candidate in candidates if candidate in lexicon.VERBS), None)


def _compound_plural(word: str, previous_tag: Optional[PosTag], following: Optional[str]) -> bool:
    """A plural after a noun and before a verb heads a compound noun ("customer records are kept")."""

    if previous_tag is not PosTag.NOUN or not word.endswith("s") or word.endswith("ss") or following is None:
        return False
    return following in lexicon.MODALS or following in lexicon.IRREGULAR_VERBS


class LexiconTagger:
    """Closed-class word lists plus suffix rules; unknown words are nouns."""

    def tag(self, words: Sequence[str]) -> list[tuple[PosTag, str]]:
        tagged: list[tuple[PosTag, str]] = []
        previous: Optional[str] = None
        for index, word in enumerate(words):
            following = words[index + 1].lower() if index + 1 < len(words) else None
            tagged.append(self._tag_word(word, previous, tagged[-1][0] if tagged else None, following))
            previous = word.lower()
        return tagged

    def _tag_word(
        self, word: str, previous: Optional[str], previous_tag: Optional[PosTag], following: Optional[str]
    ) -> tuple[PosTag, str]:
        lowered = word.lower()
        if lowered in lexicon.CLOSED_CLASS or _NUMERIC_RE.match(lowered):
            return PosTag.OTHER, lowered
        if lowered in lexicon.ADJECTIVES:
            return PosTag.ADJ, lowered
        if lowered in lexicon.IRREGULAR_ADJECTIVES:
            return PosTag.ADJ, lexicon.IRREGULAR_ADJECTIVES[lowered]
        base = verb_lemma(lowered)
        noun_slot = (
            previous in _NOUN_CONTEXT
            or previous_tag is PosTag.ADJ
            or _compound_plural(lowered, previous_tag, following)
        )
        if base is not None and (not noun_slot or lowered in lexicon.IRREGULAR_VERBS):
            return PosTag.VERB, base
        return PosTag.NOUN, noun_lemma(lowered)
