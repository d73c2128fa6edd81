"""
Embedding Service
Skip-gram with negative sampling, in a plain variant (one output matrix) and an
order-aware variant (one output matrix per signed context offset). One model is
trained per walk polarity.
"""
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit, log_expit

from ..config import SkipGramConfig
from ..core.errors import ParseError
from .prometheus import get_metrics_collector
from .walker import Walk, WalkCorpus

logger = logging.getLogger(__name__)

Sentence = Sequence[str]
MAX_NOISE_RETRIES = 100


def _as_sentences(corpus: Iterable[Union[Walk, Sentence]]) -> List[Sentence]:
    return [item.tokens if isinstance(item, Walk) else item for item in corpus]


@dataclass
class Vocab:
    """Dense token index, most frequent first (ties broken lexicographically)."""
    index: Dict[str, int] = field(default_factory=dict)
    tokens: List[str] = field(default_factory=list)
    counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    min_count: int = 1

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def encode(self, sentence: Sentence) -> np.ndarray:
        """Token ids of a sentence; tokens below min_count are dropped."""
        return np.array([self.index[t] for t in sentence if t in self.index], dtype=np.int64)


def build_vocab(corpus: Iterable[Union[Walk, Sentence]], min_count: int = 1) -> Vocab:
    counts = Counter()
    for sentence in _as_sentences(corpus):
        counts.update(sentence)
    kept = sorted(((tok, n) for tok, n in counts.items() if n >= min_count), key=lambda item: (-item[1], item[0]))
    tokens = [tok for tok, _ in kept]
    return Vocab(
        index={tok: i for i, tok in enumerate(tokens)},
        tokens=tokens,
        counts=np.array([n for _, n in kept], dtype=np.int64),
        min_count=min_count,
    )


class NoiseSampler:
    """Draws from the unigram distribution raised to `exponent`, via a precomputed CDF."""

    def __init__(self, counts: np.ndarray, exponent: float = 0.75):
        if len(counts) == 0:
            raise ValueError("noise distribution needs a non-empty vocabulary")
        weights = np.asarray(counts, dtype=np.float64) ** exponent
        self.probabilities = weights / weights.sum()
        self.cdf = np.cumsum(self.probabilities)
        self.cdf[-1] = 1.0

    def __len__(self) -> int:
        return len(self.cdf)

    def _draw(self, size: int, rng: np.random.Generator) -> np.ndarray:
        idx = np.searchsorted(self.cdf, rng.random(size), side="right")
        return np.minimum(idx, len(self.cdf) - 1).astype(np.int64)

    def draw(self, k: int, rng: np.random.Generator, exclude: Optional[int] = None) -> np.ndarray:
        if k <= 0:
            return np.zeros(0, dtype=np.int64)
        out = self._draw(k, rng)
        if exclude is None or len(self.cdf) == 1:
            return out
        for i in range(k):
            retries = 0
            while out[i] == exclude and retries < MAX_NOISE_RETRIES:
                out[i] = self._draw(1, rng)[0]
                retries += 1
        return out


def sample_noise(
    vocab: Union[Vocab, NoiseSampler],
    k: int,
    rng: np.random.Generator,
    exclude: Optional[int] = None,
    exponent: float = 0.75,
) -> List[int]:
    sampler = vocab if isinstance(vocab, NoiseSampler) else NoiseSampler(vocab.counts, exponent)
    return sampler.draw(k, rng, exclude).tolist()


@dataclass
class EmbeddingModel:
    vocab: Vocab
    input_matrix: np.ndarray
    # shape (n_output_matrices, |V|, dim)
    output_matrices: np.ndarray
    window: int
    order_aware: bool = False
    epoch_losses: List[float] = field(default_factory=list)
    pairs_trained: int = 0

    @property
    def dim(self) -> int:
        return self.input_matrix.shape[1]

    def __contains__(self, token: str) -> bool:
        return token in self.vocab

    def output_index(self, offset: Optional[int]) -> int:
        """Output matrix used for a signed context offset (always 0 in the plain model)."""
        if not self.order_aware:
            return 0
        if offset is None or offset == 0 or abs(offset) > self.window:
            raise ValueError(f"offset must be in [-{self.window}, {self.window}] without 0, got {offset}")
        return offset + self.window if offset < 0 else offset + self.window - 1

    def vector(self, token: str) -> np.ndarray:
        return self.input_matrix[self.vocab.index[token]]

    def score(self, center: str, context: str, offset: Optional[int] = None) -> float:
        """u_context . v_center under the matrix for `offset`."""
        m = self.output_index(offset)
        return float(self.output_matrices[m][self.vocab.index[context]] @ self.vector(center))

    def save(self, path: Union[str, Path]) -> Path:
        return save_vectors(path, self.vocab.tokens, self.input_matrix)


@dataclass
class SparseGrads:
    """Partials of one skip-gram step w.r.t. the rows it touches."""
    center: int
    d_input: np.ndarray
    matrix: int
    rows: np.ndarray
    d_output: np.ndarray


def init_model(vocab: Vocab, cfg: SkipGramConfig, rng: np.random.Generator) -> EmbeddingModel:
    n, dim = len(vocab), cfg.dim
    bound = 0.5 / dim
    return EmbeddingModel(
        vocab=vocab,
        input_matrix=rng.uniform(-bound, bound, size=(n, dim)),
        output_matrices=np.zeros((cfg.n_output_matrices, n, dim)),
        window=cfg.window,
        order_aware=cfg.order_aware,
    )


def sg_step_loss_grad(
    model: EmbeddingModel,
    center: int,
    context: int,
    noise: Sequence[int],
    offset: Optional[int] = None,
) -> Tuple[float, SparseGrads]:
    """
    Negative-sampling loss -log s(u_ctx.v) - sum log s(-u_n.v) for one
    (center, context) pair, with its exact gradients.
    """
    m = model.output_index(offset)
    rows = np.concatenate(([context], np.asarray(noise, dtype=np.int64))).astype(np.int64)
    v = model.input_matrix[center]
    u = model.output_matrices[m][rows]
    scores = u @ v
    labels = np.zeros(len(rows))
    labels[0] = 1.0

    loss = -float(log_expit(scores[0])) - float(np.sum(log_expit(-scores[1:])))
    g = expit(scores) - labels
    return loss, SparseGrads(
        center=center,
        d_input=g @ u,
        matrix=m,
        rows=rows,
        d_output=np.outer(g, v),
    )


def apply_grads(model: EmbeddingModel, grads: SparseGrads, learning_rate: float) -> None:
    model.input_matrix[grads.center] -= learning_rate * grads.d_input
    np.subtract.at(model.output_matrices[grads.matrix], grads.rows, learning_rate * grads.d_output)


def _train_shard(
    model: EmbeddingModel,
    sentences: List[np.ndarray],
    cfg: SkipGramConfig,
    sampler: NoiseSampler,
    rng: np.random.Generator,
) -> Tuple[List[float], int]:
    """Sequential SGD over one shard. Returns per-epoch loss sums and the pair count."""
    c = cfg.window
    alpha, min_alpha = cfg.learning_rate, cfg.min_learning_rate
    total = max(1, cfg.epochs * sum(len(s) for s in sentences))
    seen = 0
    pairs = 0
    loss_sums: List[float] = []

    for _ in range(cfg.epochs):
        epoch_loss = 0.0
        for sent in sentences:
            n = len(sent)
            for pos in range(n):
                lr = alpha - (alpha - min_alpha) * (seen / total)
                seen += 1
                center = int(sent[pos])
                for offset in range(-c, c + 1):
                    ctx_pos = pos + offset
                    if offset == 0 or ctx_pos < 0 or ctx_pos >= n:
                        continue
                    context = int(sent[ctx_pos])
                    noise = sampler.draw(cfg.noise_k, rng, exclude=context)
                    loss, grads = sg_step_loss_grad(model, center, context, noise, offset)
                    apply_grads(model, grads, lr)
                    epoch_loss += loss
                    pairs += 1
        loss_sums.append(epoch_loss)
    return loss_sums, pairs


def train(
    corpus: Iterable[Union[Walk, Sentence]],
    cfg: SkipGramConfig,
    rng: Optional[np.random.Generator] = None,
    name: str = "model",
) -> EmbeddingModel:
    """
    Train one model. With cfg.workers == 1 updates are applied in a fixed order
    and the result is bitwise reproducible; more workers train shards in
    threads against shared matrices without locking.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    sentences = _as_sentences(corpus)
    vocab = build_vocab(sentences, cfg.min_count)
    model = init_model(vocab, cfg, rng)
    if len(vocab) == 0:
        logger.warning(f"{name}: empty corpus, nothing to train")
        return model

    sampler = NoiseSampler(vocab.counts, cfg.noise_exponent)
    encoded = [vocab.encode(s) for s in sentences]
    encoded = [s for s in encoded if len(s)]

    if cfg.workers > 1 and len(encoded) > 1:
        shards = [encoded[i::cfg.workers] for i in range(cfg.workers)]
        streams = rng.spawn(len(shards))
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(lambda args: _train_shard(model, args[0], cfg, sampler, args[1]), zip(shards, streams)))
        loss_sums = [sum(r[0][e] for r in results) for e in range(cfg.epochs)]
        pairs = sum(r[1] for r in results)
    else:
        loss_sums, pairs = _train_shard(model, encoded, cfg, sampler, rng)

    per_epoch = pairs // cfg.epochs if cfg.epochs else 0
    if per_epoch:
        model.epoch_losses = [s / per_epoch for s in loss_sums]
    model.pairs_trained = pairs

    get_metrics_collector().record_training(name, pairs, model.epoch_losses[-1] if model.epoch_losses else None)
    logger.info(
        f"{name}: trained |V|={len(vocab)} dim={cfg.dim} on {pairs} pairs "
        f"({'order-aware' if cfg.order_aware else 'plain'}, {cfg.n_output_matrices} output matrices)"
    )
    return model


def train_dual(
    corpus: WalkCorpus,
    cfg: SkipGramConfig,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[EmbeddingModel, EmbeddingModel]:
    """Independent models for the positive and the negative walks."""
    if rng is not None:
        pos_rng, neg_rng = rng.spawn(2)
    else:
        pos_seq, neg_seq = np.random.SeedSequence(cfg.seed).spawn(2)
        pos_rng, neg_rng = np.random.default_rng(pos_seq), np.random.default_rng(neg_seq)
    pos_model = train(corpus.positive, cfg, pos_rng, name="pos")
    neg_model = train(corpus.negative, cfg, neg_rng, name="neg")
    return pos_model, neg_model


# --- Text vector format ---

def format_vectors(tokens: Sequence[str], matrix: np.ndarray) -> str:
    """`<count> <dim>` header, then one `token x1 ... xdim` line per row, floats round-trip exact."""
    dim = matrix.shape[1] if matrix.ndim == 2 else 0
    lines = [f"{len(tokens)} {dim}"]
    for token, row in zip(tokens, matrix):
        lines.append(" ".join([token] + [repr(float(x)) for x in row.tolist()]))
    return "\n".join(lines) + "\n"


def save_vectors(path: Union[str, Path], tokens: Sequence[str], matrix: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_vectors(tokens, matrix), encoding="utf-8")
    return path


def load_vectors(path: Union[str, Path]) -> Tuple[List[str], np.ndarray]:
    path = Path(path)
    source = str(path)
    lines = [line for line in path.read_text(encoding="utf-8").split("\n") if line.strip()]
    if not lines:
        raise ParseError("empty vector file", line=1, source=source)
    header = lines[0].split()
    try:
        count, dim = int(header[0]), int(header[1])
    except (IndexError, ValueError):
        raise ParseError("expected '<count> <dim>' header", line=1, column=1, source=source)
    if len(lines) - 1 != count:
        raise ParseError(f"header announces {count} vectors, found {len(lines) - 1}", line=1, source=source)

    tokens: List[str] = []
    matrix = np.zeros((count, dim))
    for i, line in enumerate(lines[1:]):
        parts = line.split(" ")
        if len(parts) != dim + 1:
            raise ParseError(f"expected a token and {dim} values", line=i + 2, column=1, source=source)
        tokens.append(parts[0])
        try:
            matrix[i] = [float(x) for x in parts[1:]]
        except ValueError:
            raise ParseError("non-numeric vector component", line=i + 2, source=source)
    return tokens, matrix


@dataclass
class VectorSet:
    """Token vectors read back from the text format (no output matrices)."""
    tokens: List[str]
    matrix: np.ndarray

    def __post_init__(self):
        self._row = {t: i for i, t in enumerate(self.tokens)}

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __contains__(self, token: str) -> bool:
        return token in self._row

    def vector(self, token: str) -> np.ndarray:
        return self.matrix[self._row[token]]

    @classmethod
    def load(cls, path: Union[str, Path]) -> "VectorSet":
        return cls(*load_vectors(path))
