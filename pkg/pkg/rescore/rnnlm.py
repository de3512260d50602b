"""
Small recurrent LM (embedding, one LSTM layer, softmax output) for n-best rescoring.
"""

import copy
import logging
import math
import random
import struct
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from pkg.textnorm.core import NormalizedUtterance
from pkg.utils.errors import BadConfig, EmptyCorpus, ModelFormat, TrainDiverged
from pkg.utils.io import atomic_write, require_path
from pkg.utils.logging import setup_secure_logging, log_file_operation

logger = setup_secure_logging(__name__, logging.WARNING)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
SPECIALS = (EOS, BOS, UNK)
MAGIC = b"RNNLM\0"
FORMAT_VERSION = 1
INIT_RANGE = 0.1

# (embedding, hidden) pairs by preset name
RNN_PRESETS: Dict[str, Tuple[int, int]] = {
    "512": (512, 128),
    "1024": (1024, 256),
    "2048": (2048, 512),
}


class RnnLmNet(nn.Module):
    def __init__(self, vocab_size: int, embed_dim: int, hidden_dim: int):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, embed_dim)
        self.rnn = nn.LSTM(embed_dim, hidden_dim, num_layers=1, batch_first=True)
        self.output = nn.Linear(hidden_dim, vocab_size)

    def forward(self, inputs: torch.Tensor, hidden=None):
        outputs, hidden = self.rnn(self.embedding(inputs), hidden)
        return self.output(outputs), hidden


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    heldout_perplexity: float


@dataclass
class RnnLm:
    """Unit vocabulary plus network; index 0 is ``</s>``, 1 is ``<s>``, 2 is ``<unk>``."""

    vocab: Tuple[str, ...]
    embed_dim: int
    hidden_dim: int
    net: RnnLmNet
    epochs_trained: int = 0
    history: List[EpochStats] = field(default_factory=list)

    def __post_init__(self):
        self._index = {unit: i for i, unit in enumerate(self.vocab)}

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def index(self, unit: str) -> int:
        return self._index.get(unit, self._index[UNK])

    def encode(self, tokens: Sequence[str]) -> Tuple[List[int], List[int]]:
        """Input ids (``<s>`` first) and target ids (``</s>`` last)."""
        ids = [self.index(t) for t in tokens]
        return [self._index[BOS]] + ids, ids + [self._index[EOS]]

    def next_distribution(self, history: Sequence[str]) -> np.ndarray:
        """Next-unit probabilities after ``<s> history``, computed in float64."""
        inputs, _ = self.encode(history)
        with torch.no_grad():
            logits, _ = self.net(torch.tensor([inputs]))
            return torch.softmax(logits[0, -1].double(), dim=-1).numpy()

    def sequence_cost(self, tokens: Sequence[str]) -> float:
        """Negative natural-log probability of ``tokens </s>``."""
        inputs, targets = self.encode(tokens)
        with torch.no_grad():
            logits, _ = self.net(torch.tensor([inputs]))
            logprobs = F.log_softmax(logits[0].double(), dim=-1)
            return -float(logprobs[torch.arange(len(targets)), torch.tensor(targets)].sum())


def check_dims(embed_dim: int, hidden_dim: int) -> None:
    if embed_dim < 1 or hidden_dim < 1:
        raise BadConfig(f"RNN LM dimensions must be at least 1, got ({embed_dim}, {hidden_dim})")


def resolve_dims(preset: Optional[str] = None, embed_dim: Optional[int] = None,
                 hidden_dim: Optional[int] = None) -> Tuple[int, int]:
    """Dimensions from a preset name, overridden by explicit values."""
    if preset is not None:
        if preset not in RNN_PRESETS:
            raise BadConfig(f"unknown RNN LM preset {preset!r}; choose from {', '.join(RNN_PRESETS)}")
        base_embed, base_hidden = RNN_PRESETS[preset]
        embed_dim = embed_dim or base_embed
        hidden_dim = hidden_dim or base_hidden
    if embed_dim is None or hidden_dim is None:
        raise BadConfig("RNN LM needs a preset or both embedding and hidden sizes")
    check_dims(embed_dim, hidden_dim)
    return embed_dim, hidden_dim


def _sentences(corpus: Iterable) -> List[Tuple[str, ...]]:
    result = []
    for item in corpus:
        tokens = item.tokens if isinstance(item, NormalizedUtterance) else tuple(item)
        if tokens:
            result.append(tokens)
    return result


def init_rnnlm(units: Iterable[str], embed_dim: int, hidden_dim: int, seed: int = 0,
               zero_init: bool = False) -> RnnLm:
    """
    Build an untrained model.

    Parameters are drawn from uniform(-0.1, 0.1) with a generator seeded by
    ``seed``, or set to zero when ``zero_init`` is true.
    """
    check_dims(embed_dim, hidden_dim)
    vocab = SPECIALS + tuple(sorted(set(units) - set(SPECIALS)))
    net = RnnLmNet(len(vocab), embed_dim, hidden_dim)
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for param in net.parameters():
            if zero_init:
                param.zero_()
            else:
                param.copy_(torch.rand(param.shape, generator=generator) * (2 * INIT_RANGE) - INIT_RANGE)
    return RnnLm(vocab=vocab, embed_dim=embed_dim, hidden_dim=hidden_dim, net=net)


def _sequence_nll(model: RnnLm, net: nn.Module, tokens: Sequence[str], dtype=torch.float32) -> torch.Tensor:
    inputs, targets = model.encode(tokens)
    logits, _ = net(torch.tensor([inputs]))
    return F.cross_entropy(logits[0].to(dtype), torch.tensor(targets), reduction="sum")


def evaluate_loss(model: RnnLm, corpus: Iterable) -> float:
    """Mean per-token cross-entropy (nats), counting one ``</s>`` per sentence."""
    sentences = _sentences(corpus)
    if not sentences:
        raise EmptyCorpus("nothing to evaluate")
    total, count = 0.0, 0
    model.net.eval()
    with torch.no_grad():
        for tokens in sentences:
            total += float(_sequence_nll(model, model.net, tokens))
            count += len(tokens) + 1
    return total / count


def train_rnnlm(corpus: Iterable, embed_dim: int, hidden_dim: int, epochs: int = 10,
                learning_rate: float = 0.01, seed: int = 0, bptt: int = 16,
                heldout_every: int = 10, model: Optional[RnnLm] = None) -> RnnLm:
    """
    Train with cross-entropy, Adam and truncated backpropagation through time.

    Every ``heldout_every``-th sentence is held out for the per-epoch perplexity
    (0 disables the split and reports training perplexity).  Sentence order is
    shuffled per epoch with a seeded generator, so runs are reproducible.

    Args:
        corpus: Unit sequences (or normalized utterances)
        embed_dim: Embedding size
        hidden_dim: LSTM hidden size
        epochs: Passes over the training sentences
        learning_rate: Adam step size
        seed: Initialization and shuffling seed
        bptt: Truncation length in steps
        heldout_every: Held-out sampling period
        model: Continue training this model instead of a fresh one

    Raises:
        EmptyCorpus: when the corpus has no non-empty sentence
        TrainDiverged: when the loss becomes NaN or infinite
    """
    sentences = _sentences(corpus)
    if not sentences:
        raise EmptyCorpus("RNN LM training corpus is empty")
    if epochs < 0 or bptt < 1 or not learning_rate > 0:
        raise BadConfig("epochs must be >= 0, bptt >= 1 and learning rate > 0")
    check_dims(embed_dim, hidden_dim)

    if heldout_every > 1 and len(sentences) >= heldout_every:
        heldout = sentences[heldout_every - 1::heldout_every]
        train = [s for i, s in enumerate(sentences) if (i + 1) % heldout_every != 0]
    else:
        heldout, train = sentences, sentences

    torch.manual_seed(seed)
    if model is None:
        units = {u for tokens in sentences for u in tokens}
        model = init_rnnlm(units, embed_dim, hidden_dim, seed)
    optimizer = torch.optim.Adam(model.net.parameters(), lr=learning_rate)
    shuffler = random.Random(seed)

    for epoch in range(1, epochs + 1):
        model.net.train()
        order = list(range(len(train)))
        shuffler.shuffle(order)
        for i in order:
            inputs, targets = model.encode(train[i])
            hidden = None
            for begin in range(0, len(inputs), bptt):
                chunk_in = torch.tensor([inputs[begin:begin + bptt]])
                chunk_out = torch.tensor(targets[begin:begin + bptt])
                if hidden is not None:
                    hidden = tuple(h.detach() for h in hidden)
                logits, hidden = model.net(chunk_in, hidden)
                loss = F.cross_entropy(logits[0], chunk_out)
                if not torch.isfinite(loss):
                    raise TrainDiverged(f"loss became {float(loss)} in epoch {epoch}")
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()

        train_loss = evaluate_loss(model, train)
        heldout_ppl = math.exp(min(evaluate_loss(model, heldout), 700.0))
        if not math.isfinite(train_loss):
            raise TrainDiverged(f"training loss became {train_loss} in epoch {epoch}")
        model.epochs_trained += 1
        model.history.append(EpochStats(model.epochs_trained, train_loss, heldout_ppl))
        logger.info(f"RNN LM epoch {model.epochs_trained}: train loss {train_loss:.4f}, "
                    f"held-out perplexity {heldout_ppl:.2f}")
    model.net.eval()
    return model


def gradient_check(model: RnnLm, sequences: Sequence[Sequence[str]], eps: float = 1e-4) -> float:
    """
    Compare autograd gradients of the summed sequence loss with central finite
    differences, in float64 on a copy of the network.

    Returns:
        Max over all parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-4)
    """
    net = copy.deepcopy(model.net).double()
    net.eval()

    def total_loss() -> torch.Tensor:
        return sum(_sequence_nll(model, net, tokens, torch.float64) for tokens in sequences)

    net.zero_grad()
    total_loss().backward()
    worst = 0.0
    with torch.no_grad():
        for param in net.parameters():
            analytic = param.grad.detach().clone().reshape(-1)
            flat = param.data.reshape(-1)
            for i in range(flat.numel()):
                original = float(flat[i])
                flat[i] = original + eps
                plus = float(total_loss())
                flat[i] = original - eps
                minus = float(total_loss())
                flat[i] = original
                numeric = (plus - minus) / (2 * eps)
                a = float(analytic[i])
                error = abs(a - numeric) / max(abs(a), abs(numeric), 1e-4)
                worst = max(worst, error)
    return worst


def save_rnnlm(model: RnnLm, path: str) -> None:
    """
    Versioned binary: magic, version, dims, vocab, epoch count, then every
    parameter tensor as name, shape and little-endian float32 values.
    """
    log_file_operation("writing RNN LM", path, logger)
    state = model.net.state_dict()
    with atomic_write(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IIIII", FORMAT_VERSION, model.embed_dim, model.hidden_dim,
                            model.vocab_size, model.epochs_trained))
        for unit in model.vocab:
            data = unit.encode("utf-8")
            f.write(struct.pack("<H", len(data)) + data)
        f.write(struct.pack("<I", len(state)))
        for name, tensor in state.items():
            data = name.encode("utf-8")
            f.write(struct.pack("<H", len(data)) + data)
            f.write(struct.pack("<B", tensor.dim()))
            f.write(struct.pack(f"<{tensor.dim()}I", *tensor.shape))
            f.write(tensor.detach().cpu().numpy().astype("<f4").tobytes())


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data, self.pos, self.path = data, 0, path

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise ModelFormat(f"{self.path}: truncated model file")
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_rnnlm(path: str) -> RnnLm:
    require_path(path)
    log_file_operation("reading RNN LM", path, logger)
    with open(path, "rb") as f:
        reader = _Reader(f.read(), path)
    if reader.take(len(MAGIC)) != MAGIC:
        raise ModelFormat(f"{path}: not an RNN LM file")
    version, embed_dim, hidden_dim, vocab_size, epochs = reader.unpack("<IIIII")
    if version != FORMAT_VERSION:
        raise ModelFormat(f"{path}: unsupported format version {version}")
    vocab = []
    for _ in range(vocab_size):
        (length,) = reader.unpack("<H")
        vocab.append(reader.take(length).decode("utf-8"))
    if tuple(vocab[:len(SPECIALS)]) != SPECIALS:
        raise ModelFormat(f"{path}: vocabulary must start with {' '.join(SPECIALS)}")

    net = RnnLmNet(vocab_size, embed_dim, hidden_dim)
    expected = net.state_dict()
    (count,) = reader.unpack("<I")
    state = {}
    for _ in range(count):
        (length,) = reader.unpack("<H")
        name = reader.take(length).decode("utf-8")
        (ndim,) = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}I")
        size = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(reader.take(4 * size), dtype="<f4").reshape(shape)
        if name not in expected or tuple(expected[name].shape) != tuple(shape):
            raise ModelFormat(f"{path}: unexpected tensor {name} with shape {shape}")
        state[name] = torch.from_numpy(values.astype(np.float32))
    if set(state) != set(expected):
        raise ModelFormat(f"{path}: missing tensors {sorted(set(expected) - set(state))}")
    if reader.pos != len(reader.data):
        raise ModelFormat(f"{path}: trailing bytes after parameters")
    net.load_state_dict(state)
    net.eval()
    return RnnLm(vocab=tuple(vocab), embed_dim=embed_dim, hidden_dim=hidden_dim, net=net, epochs_trained=epochs)
