#!/usr/bin/env python3
"""Fill the kcs embedding cache from a pretrained transformer encoder.

Reads one or more preprocessed corpus JSONL files (the `kcs preprocess`
output), embeds every context sentence and every answer string, and writes
the vectors into the on-disk cache the `precomputed` encoder backend reads:

    <cache-dir>/<key[:2]>/<key[2:]>.vec

where `key` is the SHA-256 hex of `model_id 0x1f pooling 0x1f text` after
whitespace normalization, and the blob is the raw little-endian float64
vector. Both the key derivation and the blob layout must stay in lockstep
with `EmbeddingCache` in `crates/kcs/src/encoder.rs`.

The `--pooling` flag must match the `pooling` field of the run config's
`[encoder]` block, and `--model-id` its `model_id`; `d` in the config is
the model's hidden size.

Example:

    scripts/precompute_embeddings.py \
        --corpus runs/hotpot/train.jsonl --corpus runs/hotpot/test.jsonl \
        --model-id sentence-transformers/all-mpnet-base-v2 \
        --pooling mean --cache-dir runs/cache
"""

import argparse
import hashlib
import json
import logging
import os
import struct
import sys
import tempfile

log = logging.getLogger("precompute_embeddings")


def normalize_ws(text: str) -> str:
    """Collapse whitespace runs to single spaces (mirrors `text::normalize_ws`)."""
    return " ".join(text.split())


def cache_key(model_id: str, pooling: str, text: str) -> str:
    h = hashlib.sha256()
    h.update(model_id.encode("utf-8"))
    h.update(b"\x1f")
    h.update(pooling.encode("utf-8"))
    h.update(b"\x1f")
    h.update(normalize_ws(text).encode("utf-8"))
    return h.hexdigest()


def cache_path(cache_dir: str, key: str) -> str:
    return os.path.join(cache_dir, key[:2], key[2:] + ".vec")


def store_vector(cache_dir: str, key: str, vector) -> None:
    """Atomic write (temp file + rename), matching the Rust cache writer."""
    path = cache_path(cache_dir, key)
    shard = os.path.dirname(path)
    os.makedirs(shard, exist_ok=True)
    blob = b"".join(struct.pack("<d", float(v)) for v in vector)
    fd, tmp = tempfile.mkstemp(dir=shard)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def collect_texts(corpus_paths):
    """Unique normalized sentence and answer strings from corpus JSONL files."""
    texts = {}
    n_records = 0
    for path in corpus_paths:
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                n_records += 1
                for doc in record["documents"]:
                    for sentence in doc["sentences"]:
                        texts[normalize_ws(sentence)] = None
                texts[normalize_ws(record["answer"])] = None
    return list(texts), n_records


def embed_batch(model, tokenizer, batch, pooling, max_tokens, device):
    import torch

    enc = tokenizer(
        batch, padding=True, truncation=True, max_length=max_tokens, return_tensors="pt"
    ).to(device)
    with torch.no_grad():
        out = model(**enc).last_hidden_state  # (B, T, d)
    if pooling == "first-token":
        pooled = out[:, 0, :]
    else:  # mean over non-padding tokens
        mask = enc["attention_mask"].unsqueeze(-1).to(out.dtype)
        pooled = (out * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1.0)
    return pooled.double().cpu().numpy()


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--corpus", action="append", required=True, help="corpus JSONL (repeatable)"
    )
    parser.add_argument("--cache-dir", required=True, help="embedding cache directory")
    parser.add_argument(
        "--model-id",
        default="sentence-transformers/all-mpnet-base-v2",
        help="Hugging Face encoder name; must equal the config's encoder.model_id",
    )
    parser.add_argument(
        "--pooling",
        choices=["mean", "first-token"],
        default="mean",
        help="must equal the config's encoder.pooling",
    )
    parser.add_argument("--max-tokens", type=int, default=512)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--device", default=None, help="cuda, cpu, ... (default: auto)")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    texts, n_records = collect_texts(args.corpus)
    pending = [
        t for t in texts
        if not os.path.exists(cache_path(args.cache_dir, cache_key(args.model_id, args.pooling, t)))
    ]
    log.info(
        "%d records, %d unique texts, %d already cached, %d to embed",
        n_records, len(texts), len(texts) - len(pending), len(pending),
    )
    if not pending:
        return 0

    import torch
    from transformers import AutoModel, AutoTokenizer

    device = args.device or ("cuda" if torch.cuda.is_available() else "cpu")
    tokenizer = AutoTokenizer.from_pretrained(args.model_id)
    model = AutoModel.from_pretrained(args.model_id).to(device).eval()
    log.info("encoder %s on %s (hidden size %d)", args.model_id, device, model.config.hidden_size)

    written = 0
    for start in range(0, len(pending), args.batch_size):
        batch = pending[start : start + args.batch_size]
        vectors = embed_batch(model, tokenizer, batch, args.pooling, args.max_tokens, device)
        for text, vector in zip(batch, vectors):
            store_vector(args.cache_dir, cache_key(args.model_id, args.pooling, text), vector)
            written += 1
        if (start // args.batch_size) % 50 == 0:
            log.info("embedded %d / %d", written, len(pending))

    log.info("done: %d vectors written to %s", written, args.cache_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
