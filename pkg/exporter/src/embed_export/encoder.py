"""Transformer encoder wrapper: tokenize, run, pull out token vectors.

The model always runs in evaluation mode under no_grad, so a fixed
checkpoint and fixed settings give identical vectors on every run.
Sequences longer than the encoder's maximum are truncated by the
tokenizer; the exported token count reflects the truncated sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import EncoderUnavailable

_SENTINEL_MAX = int(1e12)  # tokenizers report this when no real limit is set


@dataclass(frozen=True, eq=False)
class DocumentVectors:
    doc_id: str
    values: np.ndarray  # (n_tokens, dim) float32; empty (0, dim) when nothing survives
    tokens: tuple[str, ...] | None


class Encoder:
    def __init__(self, tokenizer, model):
        self.tokenizer = tokenizer
        self.model = model.eval()
        self.hidden_size = int(model.config.hidden_size)

    def embed_batch(
        self,
        ids: list[str],
        texts: list[str],
        *,
        keep_special_tokens: bool = False,
        pooled: bool = False,
    ) -> list[DocumentVectors]:
        limit = self.tokenizer.model_max_length
        enc = self.tokenizer(
            texts,
            return_tensors="pt",
            padding=True,
            truncation=limit < _SENTINEL_MAX,
            return_special_tokens_mask=True,
        )
        special = enc.pop("special_tokens_mask")
        with torch.no_grad():
            hidden = self.model(**enc).last_hidden_state  # (B, L, H)
        out = []
        for row, doc_id in enumerate(ids):
            keep = enc["attention_mask"][row].bool()
            if not keep_special_tokens:
                keep &= ~special[row].bool()
            vecs = hidden[row][keep].numpy().astype(np.float32)
            toks: tuple[str, ...] | None = tuple(
                self.tokenizer.convert_ids_to_tokens(enc["input_ids"][row][keep].tolist())
            )
            if pooled and vecs.shape[0] > 0:
                vecs = vecs.astype(np.float64).mean(axis=0, keepdims=True).astype(np.float32)
                toks = None
            out.append(DocumentVectors(doc_id, vecs, toks))
        return out


def load_encoder(name_or_path: str) -> Encoder:
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(name_or_path)
        model = AutoModel.from_pretrained(name_or_path)
    except (OSError, ValueError) as e:
        raise EncoderUnavailable(f"cannot load encoder {name_or_path!r}: {e}") from None
    return Encoder(tokenizer, model)
