import json

import numpy as np
import pytest

from nc_extract import load_split, pack_chunks
from nc_extract.errors import DataError, FormatError, UsageError


def write_corpus(tmp_path, split, lines):
    (tmp_path / f"{split}.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(tmp_path)


def test_packing_concatenates_then_drops_remainder():
    docs = [[1, 2, 3], [4, 5], [6, 7, 8, 9]]
    chunks = pack_chunks(docs, chunk_len=2)
    np.testing.assert_array_equal(chunks, [[1, 2], [3, 4], [5, 6], [7, 8]])  # 9 dropped


def test_packing_caps_at_max_seqs():
    chunks = pack_chunks([list(range(20))], chunk_len=3, max_seqs=2)
    np.testing.assert_array_equal(chunks, [[0, 1, 2], [3, 4, 5]])


def test_packing_validates_arguments():
    with pytest.raises(UsageError, match="chunk length"):
        pack_chunks([[1, 2, 3]], chunk_len=1)
    with pytest.raises(UsageError, match="max sequences"):
        pack_chunks([[1, 2, 3]], chunk_len=2, max_seqs=0)


def test_too_few_tokens_for_one_chunk():
    with pytest.raises(DataError, match="not enough"):
        pack_chunks([[1, 2], [3]], chunk_len=4)
    with pytest.raises(DataError, match="0 tokens"):
        pack_chunks([], chunk_len=4)


def test_load_split_keeps_document_order(tmp_path):
    corpus = write_corpus(tmp_path, "train", ["[3, 1]", "", "[]", "[2]"])
    docs = load_split(corpus, "train")
    assert [d.tolist() for d in docs] == [[3, 1], [], [2]]
    assert all(d.dtype == np.int64 for d in docs)


def test_missing_split_lists_what_exists(tmp_path):
    corpus = write_corpus(tmp_path, "train", ["[1, 2]"])
    with pytest.raises(UsageError, match=r"train"):
        load_split(corpus, "validation")


@pytest.mark.parametrize(
    "line",
    [
        "not json at all",
        '{"ids": [1, 2]}',
        "[1, -2]",
        "[1.5, 2]",
        "[true, false]",
        '["7"]',
    ],
)
def test_rejects_lines_that_are_not_token_ids(tmp_path, line):
    corpus = write_corpus(tmp_path, "train", ["[1, 2]", line])
    with pytest.raises(FormatError, match="line 2"):
        load_split(corpus, "train")


def test_round_trip_through_json(tmp_path):
    rng = np.random.default_rng(5)
    docs = [rng.integers(0, 50, size=n).tolist() for n in (4, 9, 1)]
    corpus = write_corpus(tmp_path, "validation", [json.dumps(d) for d in docs])
    loaded = load_split(corpus, "validation")
    assert [d.tolist() for d in loaded] == docs
