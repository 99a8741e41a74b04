"""Gaussian word embeddings with spherical covariances: file ingestion, a
synthetic generator, vocabulary-level nearest-word lookup and the word
retrieval experiment.

File format: UTF-8 text, header line "N d spherical", then one line per word,
`word mu_1 ... mu_d sigma` separated by single spaces. sigma is the standard
deviation of the spherical covariance sigma^2 I. Floats are written with
repr(), which round-trips doubles bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, DuplicateWord, ParseError, VarianceNonPositive
from .geometry import CommutingFamily, GaussianMeasure
from .memory import MemoryBank
from .sampling import batch_perturb_in_family, sample_sphere_uniform


@dataclass(frozen=True)
class GaussianVocabulary:
    """Words with parallel spherical Gaussian measures N(mu_i, sigma_i^2 I)."""

    words: tuple[str, ...]
    means: np.ndarray    # (n, d)
    sigmas: np.ndarray   # (n,) standard deviations

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        sigmas = np.asarray(self.sigmas, dtype=float)
        if means.ndim != 2 or sigmas.ndim != 1:
            raise DimensionError("means must be (n, d) and sigmas (n,)")
        if len(self.words) != means.shape[0] or sigmas.shape[0] != means.shape[0]:
            raise DimensionError("words, means and sigmas must have equal lengths")
        if len(set(self.words)) != len(self.words):
            raise DuplicateWord("vocabulary contains repeated words")
        if np.any(sigmas <= 0.0):
            raise VarianceNonPositive("all variances must be positive")
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sigmas", sigmas)

    @property
    def n(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def measure(self, i: int) -> GaussianMeasure:
        return GaussianMeasure(
            mean=self.means[i], cov=self.sigmas[i] ** 2 * np.eye(self.dim)
        )

    def to_family(self) -> CommutingFamily:
        """Spherical covariances commute with everything; the family basis is
        the identity and each spectrum is constant sigma_i^2."""
        spectra = np.repeat(self.sigmas[:, None] ** 2, self.dim, axis=1)
        return CommutingFamily(
            basis=np.eye(self.dim), spectra=spectra, means=self.means
        )

    def to_bank(self, beta: float) -> MemoryBank:
        return MemoryBank.from_family(self.to_family(), beta=beta)


def save_vocabulary(vocab: GaussianVocabulary, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"{vocab.n} {vocab.dim} spherical\n")
        for i, word in enumerate(vocab.words):
            mu = " ".join(repr(float(x)) for x in vocab.means[i])
            f.write(f"{word} {mu} {repr(float(vocab.sigmas[i]))}\n")


def load_vocabulary(path: str | Path) -> GaussianVocabulary:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise ParseError("empty vocabulary file", line=1)
    header = lines[0].split()
    if len(header) != 3 or header[2] != "spherical":
        raise ParseError(f"bad header {lines[0]!r}; expected 'N d spherical'", line=1)
    try:
        n, d = int(header[0]), int(header[1])
    except ValueError as exc:
        raise ParseError(f"bad header counts: {exc}", line=1) from exc

    words: list[str] = []
    seen: set[str] = set()
    means = np.empty((n, d))
    sigmas = np.empty(n)
    body = lines[1:]
    if len(body) != n:
        raise ParseError(
            f"header promises {n} words but file has {len(body)} entry lines",
            line=len(lines),
        )
    for k, line in enumerate(body):
        lineno = k + 2
        parts = line.split(" ")
        if len(parts) != d + 2:
            raise ParseError(
                f"expected word + {d} means + sigma, got {len(parts)} fields",
                line=lineno,
            )
        word = parts[0]
        if word in seen:
            raise DuplicateWord(f"duplicate word {word!r}", line=lineno)
        seen.add(word)
        try:
            values = np.array([float(x) for x in parts[1:]])
        except ValueError as exc:
            raise ParseError(f"bad number: {exc}", line=lineno) from exc
        sigma = values[-1]
        if sigma <= 0.0:
            raise VarianceNonPositive(
                f"word {word!r} has non-positive sigma {sigma}", line=lineno
            )
        words.append(word)
        means[k] = values[:-1]
        sigmas[k] = sigma
    return GaussianVocabulary(words=tuple(words), means=means, sigmas=sigmas)


def generate_synthetic_vocabulary(n: int, dim: int, seed: int) -> GaussianVocabulary:
    """Synthetic stand-in for trained embeddings: means uniform on the sphere
    of radius sqrt(dim), variances uniform in [0.05, 0.5]."""
    if n < 1:
        raise DimensionError("need n >= 1")
    rng = np.random.default_rng(seed)
    means = np.empty((n, dim))
    radius = float(np.sqrt(dim))
    for i in range(n):
        means[i] = sample_sphere_uniform(dim, radius, rng)
    variances = rng.uniform(0.05, 0.5, size=n)
    words = tuple(f"w{i:05d}" for i in range(n))
    return GaussianVocabulary(words=words, means=means, sigmas=np.sqrt(variances))


def _distances_sq_to_vocab(
    vocab: GaussianVocabulary, mean: np.ndarray, sqrt_eigs: np.ndarray
) -> np.ndarray:
    """W2^2 from one query (given by mean and sqrt-eigenvalues) to all words.

    sigma^2 I commutes with every covariance, so the trace term is
    sum_k (sqrt(omega_k) - sigma_i)^2 for any query.
    """
    t1 = float(np.sum(sqrt_eigs))
    t2 = float(np.sum(sqrt_eigs**2))
    dm = vocab.means - mean
    return (
        np.sum(dm * dm, axis=1)
        + t2
        + vocab.dim * vocab.sigmas**2
        - 2.0 * t1 * vocab.sigmas
    )


def nearest_word(vocab: GaussianVocabulary, query: GaussianMeasure) -> tuple[str, float]:
    """Closest vocabulary word to the query in W2, lowest index on ties."""
    if query.dim != vocab.dim:
        raise DimensionError(f"query dim {query.dim} != vocabulary dim {vocab.dim}")
    eigs = np.linalg.eigvalsh(query.cov)
    d2 = _distances_sq_to_vocab(vocab, query.mean, np.sqrt(np.clip(eigs, 0.0, None)))
    i = int(np.argmin(d2))
    return vocab.words[i], float(np.sqrt(max(d2[i], 0.0)))


WORD_RETRIEVAL_COLUMNS = ("word", "iteration", "w2_to_original", "retrieved_word")


def word_retrieval_experiment(
    vocab: GaussianVocabulary,
    word_ids: list[int],
    beta: float,
    iters: int,
    seed: int,
    output_path: str | Path | None = None,
) -> list[tuple]:
    """Perturb selected words to W2 distance 1/sqrt(beta N), run retrieval with
    the whole vocabulary as the pattern bank, and log the distance to the
    original plus the nearest word at every iteration."""
    for wid in word_ids:
        if not 0 <= wid < vocab.n:
            raise DimensionError(f"word id {wid} outside vocabulary")
    from .memory import family_batch_distances, family_batch_step

    bank = vocab.to_bank(beta)
    rng = np.random.default_rng(seed)
    r = 1.0 / np.sqrt(beta * vocab.n)
    ids = np.asarray(word_ids, dtype=int)

    base_means = vocab.means[ids]
    base_spectra = np.repeat(vocab.sigmas[ids][:, None] ** 2, vocab.dim, axis=1)
    q_means, q_spectra = batch_perturb_in_family(
        base_means, base_spectra, np.full(ids.size, r), 0.5, rng
    )
    base_sqrt = np.sqrt(base_spectra)

    rows = []
    m, s = q_means, np.sqrt(q_spectra)
    for k in range(iters + 1):
        dists = family_batch_distances(m, s, base_means, base_sqrt)
        for qi, wid in enumerate(ids):
            d2 = _distances_sq_to_vocab(vocab, m[qi], s[qi])
            rows.append(
                (
                    vocab.words[wid],
                    k,
                    float(dists[qi]),
                    vocab.words[int(np.argmin(d2))],
                )
            )
        if k < iters:
            m, s = family_batch_step(bank, m, s)

    if output_path is not None:
        from .experiments import write_csv

        write_csv(output_path, WORD_RETRIEVAL_COLUMNS, rows)
    return rows
