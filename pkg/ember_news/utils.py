import re
import os
import sys
import hashlib
import unicodedata
from pathlib import Path

from ember_news.errors import ConfigError


def die(message: str, exit_code: int=1):
    print(message, file=sys.stderr)
    sys.exit(exit_code)


def warn(message: str):
    print(f"WARNING: {message}", file=sys.stderr)


def get_thread_count() -> int:
    """Worker-thread cap from EMBER_THREADS, defaulting to the CPU count."""
    threads = os.cpu_count() or 1
    if os.environ.get("EMBER_THREADS") is not None:
        try:
            threads = int(os.environ["EMBER_THREADS"])
        except ValueError:
            raise ConfigError(f"EMBER_THREADS must be an integer, got {os.environ['EMBER_THREADS']!r}")
    return max(1, threads)


def file_digest(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def bytes_digest(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


# Sentence boundary: terminal punctuation followed by whitespace.
_SENTENCE_END = re.compile(r'(?<=[.!?])\s+')
# Word runs, or single punctuation marks as their own tokens.
_TOKEN = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)*|[^\sa-z0-9]")
_STRIP_PUNCT = re.compile(r"^[^\w]+$")


def normalise_text(text: str) -> str:
    """Unicode → closest ASCII, lower-cased, whitespace collapsed."""
    t = unicodedata.normalize("NFKD", text).encode("ascii", "ignore").decode()
    return re.sub(r"\s+", " ", t.lower()).strip()


def split_sentences(text: str) -> list[str]:
    text = normalise_text(text)
    if not text:
        return []
    return [s for s in _SENTENCE_END.split(text) if s]


def tokenize(sentence: str, keep_punct: bool=False) -> list[str]:
    """Lower-cased whitespace/punctuation tokenization of one sentence."""
    tokens = _TOKEN.findall(normalise_text(sentence))
    if keep_punct:
        return tokens
    return [t for t in tokens if not _STRIP_PUNCT.match(t)]


def tokenize_document(text: str) -> list[list[str]]:
    """Split into sentences, then tokens; sentences left empty are dropped."""
    sentences = [tokenize(s) for s in split_sentences(text)]
    return [s for s in sentences if s]
