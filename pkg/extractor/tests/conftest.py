import json
import os

import numpy as np
import pytest

os.environ.setdefault("HF_HUB_OFFLINE", "1")  # local checkpoints only

import torch
from transformers import GPTNeoConfig, GPTNeoForCausalLM
from transformers.utils import logging as hf_logging

hf_logging.disable_progress_bar()

VOCAB = 67
DIM = 16
TRAIN_TOKENS = 805  # 100 chunks of 8 with 5 left over
VAL_TOKENS = 250  # 31 chunks of 8 with 2 left over


def _write_split(path, total: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    remaining = total
    with open(path, "w", encoding="utf-8") as f:
        while remaining:
            n = min(int(rng.integers(40, 120)), remaining)
            ids = rng.integers(0, VOCAB, size=n)
            f.write(json.dumps([int(t) for t in ids]) + "\n")
            remaining -= n


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory) -> str:
    """A tiny randomly initialized causal LM saved to disk once per session."""
    torch.manual_seed(7)
    config = GPTNeoConfig(
        vocab_size=VOCAB,
        hidden_size=DIM,
        num_layers=2,
        num_heads=2,
        attention_types=[[["global", "local"], 1]],
        max_position_embeddings=64,
        intermediate_size=32,
        bos_token_id=0,
        eos_token_id=0,
    )
    model = GPTNeoForCausalLM(config).eval()
    path = tmp_path_factory.mktemp("checkpoint") / "tiny-neo"
    model.save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def corpus(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("corpus")
    _write_split(path / "train.jsonl", TRAIN_TOKENS, seed=11)
    _write_split(path / "validation.jsonl", VAL_TOKENS, seed=12)
    return str(path)
