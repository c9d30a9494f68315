"""Build a tiny local BERT checkpoint once per session for exporter tests."""

from __future__ import annotations

import pytest

VOCAB = (
    ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    + ["the", "cat", "sat", "on", "mat", "dog", "ran", "fast",
       "route", "expert", "token", "energy", "codon"]
    + list("abcdefghijklmnopqrstuvwxyz")
    + ["##" + c for c in "abcdefghijklmnopqrstuvwxyz"]
)


@pytest.fixture(scope="session")
def tiny_encoder_dir(tmp_path_factory):
    import torch
    from transformers import BertConfig, BertModel, BertTokenizerFast

    root = tmp_path_factory.mktemp("tiny-bert")
    out = root / "checkpoint"
    out.mkdir()
    (out / "vocab.txt").write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    tokenizer = BertTokenizerFast.from_pretrained(str(out), model_max_length=64)
    assert tokenizer.vocab_size == len(VOCAB)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(1234)
    model = BertModel(config)
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    return str(out)


@pytest.fixture()
def texts_jsonl(tmp_path):
    import json

    lines = []
    sentences = [
        "the cat sat on a mat",
        "a dog ran fast",
        "the expert route",
        "token energy codon",
        "the dog sat on the mat",
        "a cat ran on the route",
        "energy of the expert",
        "the codon token",
        "fast route energy",
        "the mat the cat the dog",
    ]
    for i, text in enumerate(sentences):
        lines.append(json.dumps({"id": f"doc{i:03d}", "text": text}))
    path = tmp_path / "texts.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
