import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from demzsl import nn
from demzsl.model import DemModel
from demzsl.text import (BiLstmEncoder, LstmCell, TokenBatch, Vocabulary, average_prototypes,
                         bilstm_backward, bilstm_encode, read_descriptions, tokenize,
                         tokenize_pad, write_descriptions)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_oracle(cell, xs):
    """Textbook per-sample recurrence over exactly the given inputs."""
    h_dim = cell.hidden
    w_i, b_i = cell.gate("i")
    w_f, b_f = cell.gate("f")
    w_o, b_o = cell.gate("o")
    w_g, b_g = cell.gate("g")
    h = np.zeros(h_dim)
    c = np.zeros(h_dim)
    for x in xs:
        hx = np.concatenate([x, h])
        i = sigmoid(w_i @ hx + b_i)
        f = sigmoid(w_f @ hx + b_f)
        o = sigmoid(w_o @ hx + b_o)
        g = np.tanh(w_g @ hx + b_g)
        c = f * c + i * g
        h = o * np.tanh(c)
    return h


def small_encoder(seed=0, activation="relu", max_len=6):
    return BiLstmEncoder.init(np.random.default_rng(seed), vocab_size=12, out_dim=4,
                              embed_dim=5, hidden=3, activation=activation, max_len=max_len)


def test_tokenize_and_pad():
    vocab = Vocabulary.build(["Red bird, small beak"])
    assert tokenize("Red bird, small-beak!") == ["red", "bird", "small", "beak"]
    idx, n = tokenize_pad("red bird unknownword", vocab, max_len=5)
    assert n == 3
    assert list(idx) == [vocab["red"], vocab["bird"], 1, 0, 0]
    idx, n = tokenize_pad("red " * 40, vocab, max_len=30)
    assert n == 30 and idx.shape == (30,)


def test_vocabulary_round_trip(tmp_path):
    vocab = Vocabulary.build(["a b c", "c d"])
    assert vocab.itos == ["<pad>", "<unk>", "a", "b", "c", "d"]
    vocab.save(tmp_path / "v.txt")
    assert Vocabulary.load(tmp_path / "v.txt").itos == vocab.itos
    (tmp_path / "bad.txt").write_text("a\nb\n")
    with pytest.raises(ValueError):
        Vocabulary.load(tmp_path / "bad.txt")


def test_encoder_matches_unrolled_oracle():
    enc = small_encoder()
    seq = np.array([3, 4, 5, 2, 0, 0])
    out = bilstm_encode(enc, seq, 4)
    emb = enc.embedding[seq[:4]]
    h_f = lstm_oracle(enc.forward_cell, emb)
    h_b = lstm_oracle(enc.backward_cell, emb[::-1])
    assert_allclose(out, nn.relu(enc.proj_fw @ h_f + enc.proj_bw @ h_b), rtol=1e-12)


def test_padding_does_not_change_encoding():
    enc = small_encoder()
    a = bilstm_encode(enc, [3, 4, 5, 0, 0, 0], 3)
    b = bilstm_encode(enc, [3, 4, 5, 9, 7, 1], 3)
    assert_allclose(a, b, rtol=0, atol=0)


def test_batch_equals_one_at_a_time():
    enc = small_encoder(activation="scaled_tanh")
    tokens = np.array([[1, 2, 3, 4, 5, 6], [7, 8, 0, 0, 0, 0], [9, 0, 0, 0, 0, 0]])
    lengths = np.array([6, 2, 1])
    batch_out = enc.encode(TokenBatch(tokens, lengths))
    for r in range(3):
        assert_allclose(batch_out[:, r], bilstm_encode(enc, tokens[r], lengths[r]), rtol=1e-12)


def test_wrong_length_and_vocab_errors():
    enc = small_encoder()
    with pytest.raises(ValueError):
        enc.encode(TokenBatch(np.zeros((1, 5), dtype=int), [1]))
    with pytest.raises(ValueError):
        enc.encode(TokenBatch(np.full((1, 6), 50), [2]))
    with pytest.raises(ValueError):
        bilstm_encode(enc, [1, 2, 0, 0, 0, 0], 7)


@pytest.mark.parametrize("length", [1, 5])
def test_encoder_gradients(length):
    enc = small_encoder(seed=length)
    rng = np.random.default_rng(length)
    tokens = rng.integers(1, 12, size=(3, 6))
    batch = TokenBatch(tokens, [length, max(1, length - 1), length])
    err = nn.grad_check(enc, batch, rng.standard_normal((4, 3)), "ls", lam=0.01)
    assert err < 1e-4


def test_bilstm_backward_needs_matching_forward():
    enc = small_encoder()
    seq = [2, 3, 4, 0, 0, 0]
    with pytest.raises(RuntimeError):
        bilstm_backward(enc, seq, np.ones(4))
    bilstm_encode(enc, seq, 3)
    grads = bilstm_backward(enc, seq, np.ones(4))
    assert set(grads) == set(enc.parameters())
    with pytest.raises(RuntimeError):
        bilstm_backward(enc, [5, 5, 0, 0, 0, 0], np.ones(4))


@pytest.mark.parametrize("fused", [False, True])
def test_text_model_gradients(fused):
    rng = np.random.default_rng(11)
    text = {"vocab_size": 20, "embed_dim": 8, "hidden": 8, "max_len": 5}
    dense = {"attribute": 4} if fused else {}
    model = DemModel.create(dense, 8, hidden=8, output_activation="identity",
                            text=text, seed=2)
    batch = TokenBatch(rng.integers(1, 20, size=(3, 5)), [5, 3, 1])
    inputs = {"description": batch}
    if fused:
        inputs["attribute"] = rng.standard_normal((4, 3))
    err = nn.grad_check(model, inputs, rng.standard_normal((8, 3)), "ls", lam=1e-3,
                        max_coords=400)
    assert err < 1e-4


def test_average_prototypes():
    enc = small_encoder()
    vocab = Vocabulary.build(["red bird", "blue fish swims"])
    protos = average_prototypes(enc, {4: ["red bird", "blue fish swims"], 2: ["red"]}, vocab)
    assert list(protos.class_ids) == [2, 4]
    batch = TokenBatch.from_texts(["red bird", "blue fish swims"], vocab, 6)
    assert_allclose(protos.semantic["description"][:, 1], enc.encode(batch).mean(axis=1))
    with pytest.raises(ValueError):
        average_prototypes(enc, {1: ["red"]})


def test_descriptions_round_trip(tmp_path):
    desc = {0: ["a red bird", "small"], 3: ["blue"]}
    write_descriptions(tmp_path / "d.tsv", desc)
    assert read_descriptions(tmp_path / "d.tsv") == desc
    (tmp_path / "bad.tsv").write_text("x\tword\n")
    with pytest.raises(ValueError, match="line 1"):
        read_descriptions(tmp_path / "bad.tsv")


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_padding_content_never_leaks(length, seed):
    rng = np.random.default_rng(seed)
    enc = small_encoder()
    seq = rng.integers(1, 12, size=6)
    noisy = seq.copy()
    noisy[length:] = rng.integers(0, 12, size=6 - length)
    assert np.array_equal(bilstm_encode(enc, seq, length), bilstm_encode(enc, noisy, length))
