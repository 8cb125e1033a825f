"""Bidirectional LSTM description encoder.

A description is tokenized, truncated/zero-padded to ``max_len`` and run
through a forward and a backward LSTM that both stop at the true length.
The two final hidden states are projected to ``M`` dimensions and summed:
``proj = P_fw h_fw + P_bw h_bw``; the encoding is ``act(proj)``.
"""

import re
from dataclasses import dataclass, field

import numpy as np

from .data import PrototypeSet
from .nn import activate, activation_grad

PAD = 0
UNK = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
DEFAULT_MAX_LEN = 30

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text):
    """Lowercase and split on anything that is not a letter or digit."""
    return _TOKEN_RE.findall(text.lower())


class Vocabulary:
    """Token/index map; index 0 is padding and index 1 the unknown token."""

    def __init__(self, tokens=()):
        self.itos = [PAD_TOKEN, UNK_TOKEN]
        self.stoi = {PAD_TOKEN: PAD, UNK_TOKEN: UNK}
        for tok in tokens:
            self.add(tok)

    def add(self, token):
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self):
        return len(self.itos)

    def __getitem__(self, token):
        return self.stoi.get(token, UNK)

    @classmethod
    def build(cls, texts):
        """Vocabulary over ``texts`` in order of first appearance."""
        vocab = cls()
        for text in texts:
            for tok in tokenize(text):
                vocab.add(tok)
        return vocab

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for tok in self.itos:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
        if lines[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise ValueError(
                f"{path}: lines 0 and 1 must be {PAD_TOKEN!r} and {UNK_TOKEN!r}"
            )
        vocab = cls()
        for lineno, tok in enumerate(lines[2:], start=2):
            if not tok or tok in vocab.stoi:
                raise ValueError(f"{path}: line {lineno}: empty or duplicate token {tok!r}")
            vocab.add(tok)
        return vocab


def tokenize_pad(text, vocab, max_len=DEFAULT_MAX_LEN):
    """Token indices of ``text`` cut/zero-padded to ``max_len``.

    Returns
    -------
    indices : ndarray of int64, shape (max_len,)
    length : int
        Number of real (non-padding) tokens kept.
    """
    if max_len <= 0:
        raise ValueError("max_len must be positive")
    toks = tokenize(text)[:max_len]
    out = np.zeros(max_len, dtype=np.int64)
    out[: len(toks)] = [vocab[t] for t in toks]
    return out, len(toks)


@dataclass
class TokenBatch:
    """``tokens`` is ``(N, max_len)`` int; ``lengths`` is ``(N,)``."""

    tokens: np.ndarray
    lengths: np.ndarray

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int64)
        self.lengths = np.asarray(self.lengths, dtype=np.int64)
        if self.tokens.ndim != 2 or self.lengths.shape != (self.tokens.shape[0],):
            raise ValueError("tokens must be (N, max_len) with one length per row")
        if np.any(self.lengths < 0) or np.any(self.lengths > self.tokens.shape[1]):
            raise ValueError("true length exceeds max_len")

    def __len__(self):
        return self.tokens.shape[0]

    def take(self, idx):
        return TokenBatch(self.tokens[idx], self.lengths[idx])

    @classmethod
    def from_texts(cls, texts, vocab, max_len=DEFAULT_MAX_LEN):
        pairs = [tokenize_pad(t, vocab, max_len) for t in texts]
        toks = np.stack([p[0] for p in pairs]) if pairs else np.zeros((0, max_len), np.int64)
        return cls(toks, np.array([p[1] for p in pairs], dtype=np.int64))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class LstmCell:
    """Standard gated LSTM cell.

    ``weight`` stacks the input, forget, output and candidate blocks (in
    that order) as a ``(4H, E + H)`` matrix acting on ``[x; h_prev]``.
    """

    weight: np.ndarray
    bias: np.ndarray

    @property
    def hidden(self):
        return self.weight.shape[0] // 4

    @classmethod
    def init(cls, rng, input_dim, hidden, forget_bias=1.0):
        bound = 1.0 / np.sqrt(input_dim + hidden)
        w = rng.uniform(-bound, bound, size=(4 * hidden, input_dim + hidden))
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = forget_bias
        return cls(w, b)

    def gate(self, name):
        """View of one gate block ('i', 'f', 'o' or 'g')."""
        k = "ifog".index(name)
        h = self.hidden
        return self.weight[k * h:(k + 1) * h], self.bias[k * h:(k + 1) * h]

    def run(self, xs, mask):
        """Unroll over ``xs`` (list of ``(E, N)``) with per-step sample mask.

        Masked samples carry their state through unchanged. Returns the
        final hidden state and the per-step cache for :meth:`backprop`.
        """
        h_dim = self.hidden
        h = np.zeros((h_dim, mask.shape[1]))
        c = np.zeros_like(h)
        steps = []
        for t, x in enumerate(xs):
            hx = np.vstack([x, h])
            z = self.weight @ hx + self.bias[:, None]
            i = _sigmoid(z[:h_dim])
            f = _sigmoid(z[h_dim:2 * h_dim])
            o = _sigmoid(z[2 * h_dim:3 * h_dim])
            g = np.tanh(z[3 * h_dim:])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            h_new = o * tc
            m = mask[t]
            steps.append((hx, i, f, o, g, c, tc, m))
            h = np.where(m, h_new, h)
            c = np.where(m, c_new, c)
        return h, steps

    def backprop(self, steps, d_h):
        """Backpropagate ``d_h`` (grad of the final hidden state) through time.

        Returns ``(d_weight, d_bias, d_xs)`` with one ``(E, N)`` input gradient
        per step.
        """
        h_dim = self.hidden
        d_w = np.zeros_like(self.weight)
        d_b = np.zeros_like(self.bias)
        d_c = np.zeros_like(d_h)
        d_xs = [None] * len(steps)
        e_dim = self.weight.shape[1] - h_dim
        for t in range(len(steps) - 1, -1, -1):
            hx, i, f, o, g, c_prev, tc, m = steps[t]
            mf = m.astype(np.float64)
            dh_n = d_h * mf
            dc_n = d_c * mf + dh_n * o * (1.0 - tc * tc)
            d_z = np.vstack([
                dc_n * g * i * (1.0 - i),
                dc_n * c_prev * f * (1.0 - f),
                dh_n * tc * o * (1.0 - o),
                dc_n * i * (1.0 - g * g),
            ])
            d_w += d_z @ hx.T
            d_b += d_z.sum(axis=1)
            d_hx = self.weight.T @ d_z
            d_xs[t] = d_hx[:e_dim]
            d_h = d_h * (1.0 - mf) + d_hx[e_dim:]
            d_c = d_c * (1.0 - mf) + dc_n * f
        return d_w, d_b, d_xs


def _reverse_tokens(batch):
    """Each row reversed within its true length; padding stays at the end."""
    tok = batch.tokens
    rev = np.zeros_like(tok)
    for r, n in enumerate(batch.lengths):
        rev[r, :n] = tok[r, :n][::-1]
    return rev


@dataclass
class BiLstmEncoder:
    """Word embeddings, two LSTM cells and the output projections."""

    embedding: np.ndarray          # (vocab, E)
    forward_cell: LstmCell
    backward_cell: LstmCell
    proj_fw: np.ndarray            # (M, H)
    proj_bw: np.ndarray            # (M, H)
    activation: str = "relu"
    max_len: int = DEFAULT_MAX_LEN
    _last_forward: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.forward_cell.hidden != self.backward_cell.hidden:
            raise ValueError("forward and backward hidden sizes differ")
        if self.proj_fw.shape != self.proj_bw.shape:
            raise ValueError("projection shapes differ")
        if self.proj_fw.shape[1] != self.forward_cell.hidden:
            raise ValueError("projection does not match LSTM hidden size")

    @classmethod
    def init(cls, rng, vocab_size, out_dim, embed_dim=512, hidden=512,
             activation="relu", max_len=DEFAULT_MAX_LEN):
        bound = 1.0 / np.sqrt(embed_dim)
        emb = rng.uniform(-bound, bound, size=(vocab_size, embed_dim))
        fw = LstmCell.init(rng, embed_dim, hidden)
        bw = LstmCell.init(rng, embed_dim, hidden)
        pb = 1.0 / np.sqrt(hidden)
        p_fw = rng.uniform(-pb, pb, size=(out_dim, hidden))
        p_bw = rng.uniform(-pb, pb, size=(out_dim, hidden))
        return cls(emb, fw, bw, p_fw, p_bw, activation, max_len)

    @property
    def out_dim(self):
        return self.proj_fw.shape[0]

    def parameters(self, prefix="text."):
        return {
            prefix + "embedding": self.embedding,
            prefix + "fw.weight": self.forward_cell.weight,
            prefix + "fw.bias": self.forward_cell.bias,
            prefix + "bw.weight": self.backward_cell.weight,
            prefix + "bw.bias": self.backward_cell.bias,
            prefix + "proj_fw": self.proj_fw,
            prefix + "proj_bw": self.proj_bw,
        }

    @staticmethod
    def penalized(prefix="text."):
        return [prefix + n for n in ("embedding", "fw.weight", "bw.weight", "proj_fw", "proj_bw")]

    def _check(self, batch):
        if batch.tokens.shape[1] != self.max_len:
            raise ValueError(
                f"sequence length {batch.tokens.shape[1]} != configured max_len {self.max_len}"
            )
        if batch.tokens.size and batch.tokens.max() >= self.embedding.shape[0]:
            raise ValueError("token index outside the vocabulary")

    def project(self, batch):
        """``P_fw h_fw + P_bw h_bw`` for every sequence, shape ``(M, N)``."""
        self._check(batch)
        steps = int(batch.lengths.max()) if len(batch) else 0
        pos = np.arange(steps)[:, None]
        mask = pos < batch.lengths[None, :]          # (steps, N)
        rev = _reverse_tokens(batch)
        xs_f = [self.embedding[batch.tokens[:, t]].T for t in range(steps)]
        xs_b = [self.embedding[rev[:, t]].T for t in range(steps)]
        h_f, st_f = self.forward_cell.run(xs_f, mask)
        h_b, st_b = self.backward_cell.run(xs_b, mask)
        proj = self.proj_fw @ h_f + self.proj_bw @ h_b
        return proj, (batch, rev, h_f, h_b, st_f, st_b)

    def encode(self, batch):
        """Encoded semantic vectors ``act(proj)``, shape ``(M, N)``."""
        proj, _ = self.project(batch)
        return activate(self.activation, proj)

    def backprop(self, cache, d_proj, prefix="text."):
        """Gradients of every encoder parameter given ``d loss / d proj``."""
        if cache is None:
            raise RuntimeError("no cached forward pass; call project() first")
        batch, rev, h_f, h_b, st_f, st_b = cache
        g_pf = d_proj @ h_f.T
        g_pb = d_proj @ h_b.T
        dw_f, db_f, dx_f = self.forward_cell.backprop(st_f, self.proj_fw.T @ d_proj)
        dw_b, db_b, dx_b = self.backward_cell.backprop(st_b, self.proj_bw.T @ d_proj)
        g_emb = np.zeros_like(self.embedding)
        for t, dx in enumerate(dx_f):
            np.add.at(g_emb, batch.tokens[:, t], dx.T)
        for t, dx in enumerate(dx_b):
            np.add.at(g_emb, rev[:, t], dx.T)
        return {
            prefix + "embedding": g_emb,
            prefix + "fw.weight": dw_f,
            prefix + "fw.bias": db_f,
            prefix + "bw.weight": dw_b,
            prefix + "bw.bias": db_b,
            prefix + "proj_fw": g_pf,
            prefix + "proj_bw": g_pb,
        }

    # standalone network interface (encoder alone, used for gradient checks)
    def forward(self, batch):
        proj, cache = self.project(batch)
        out = activate(self.activation, proj)
        self._last_forward = (proj, out, cache)
        return out, self._last_forward

    def backward(self, cache, d_out):
        proj, out, inner = cache
        return self.backprop(inner, activation_grad(self.activation, proj, out, d_out))


def bilstm_encode(encoder, sequence, true_length):
    """Encode a single padded index sequence; returns an ``(M,)`` vector."""
    seq = np.asarray(sequence, dtype=np.int64)
    if true_length > seq.shape[0]:
        raise ValueError(f"true_length {true_length} exceeds max_len {seq.shape[0]}")
    out, _ = encoder.forward(TokenBatch(seq[None, :], [true_length]))
    return out[:, 0]


def bilstm_backward(encoder, sequence, upstream_grad):
    """Gradients of the encoder parameters for the last encoded sequence.

    ``upstream_grad`` is ``d loss / d encoding``; the forward pass must have
    been run on ``sequence`` (e.g. through :func:`bilstm_encode`).
    """
    cache = encoder._last_forward
    if cache is None:
        raise RuntimeError("missing forward cache; encode the sequence first")
    seq = np.asarray(sequence, dtype=np.int64).reshape(1, -1)
    if not np.array_equal(cache[2][0].tokens, seq):
        raise RuntimeError("cached forward pass belongs to a different sequence")
    d = np.asarray(upstream_grad, dtype=np.float64).reshape(-1, 1)
    return encoder.backward(cache, d)


def average_prototypes(encoder, descriptions, vocab=None, max_len=None, pre_activation=False):
    """Per-class mean of description encodings.

    Parameters
    ----------
    descriptions : dict
        ``class_id -> list`` of texts (requires ``vocab``) or a
        :class:`TokenBatch` per class.
    pre_activation : bool
        Average the projections instead of ``act(proj)``; used when the text
        branch is fused with other modalities before the activation.
    """
    max_len = max_len or encoder.max_len
    ids = sorted(descriptions)
    cols = []
    for cid in ids:
        items = descriptions[cid]
        if not isinstance(items, TokenBatch):
            if vocab is None:
                raise ValueError("raw texts need a vocabulary")
            items = TokenBatch.from_texts(list(items), vocab, max_len)
        if len(items) == 0:
            raise ValueError(f"class {cid} has no descriptions")
        enc, _ = encoder.project(items)
        if not pre_activation:
            enc = activate(encoder.activation, enc)
        cols.append(enc.mean(axis=1))
    return PrototypeSet(np.array(ids, dtype=np.int64), {"description": np.stack(cols, axis=1)})


def read_descriptions(path):
    """Parse ``sample_index<TAB>text`` lines into ``{sample_index: [texts]}``."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            idx, sep, text = line.partition("\t")
            if not sep:
                raise ValueError(f"{path}: line {lineno}: expected 'sample_index<TAB>text'")
            try:
                key = int(idx)
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: bad sample index {idx!r}") from None
            out.setdefault(key, []).append(text)
    return out


def write_descriptions(path, descriptions):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for idx in sorted(descriptions):
            for text in descriptions[idx]:
                fh.write(f"{idx}\t{text}\n")
