#!/usr/bin/env python3
"""Fine-tune a seq2seq question generator on a preprocessed corpus.

Builds (input, target) pairs from a `kcs preprocess` corpus JSONL: the input
is the answer plus the gold-composition sentences in composition order,

    <answer> [SEP] <Title1>: <sentence1> [SEP] <Title2>: <sentence2>

(the same format `kcs generate` feeds the finished model), and the target is
the dataset's gold question. The result directory is consumable by
`scripts/generate_questions.py`.

Example:

    scripts/train_generator.py --corpus runs/hotpot/train.jsonl \
        --model-id Salesforce/mixqg-base --out runs/qg-model --epochs 3
"""

import argparse
import json
import logging
import random
import sys

log = logging.getLogger("train_generator")


def normalize_ws(text: str) -> str:
    return " ".join(text.split())


def generator_input(record) -> str:
    """Mirror of `qgen::build_generator_input` for corpus records."""
    composition = record.get("composition")
    refs = composition["refs"] if composition else record["supporting_facts"]
    parts = [normalize_ws(record["answer"])]
    for doc_idx, sent_idx in refs:
        doc = record["documents"][doc_idx]
        parts.append(normalize_ws(f"{doc['title']}: {doc['sentences'][sent_idx]}"))
    return " [SEP] ".join(parts)


def load_pairs(path):
    pairs = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            question = normalize_ws(record["question"])
            if not question:
                continue
            pairs.append((generator_input(record), question))
    return pairs


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--corpus", required=True, help="training corpus JSONL")
    parser.add_argument("--out", required=True, help="output model directory")
    parser.add_argument("--model-id", default="Salesforce/mixqg-base")
    parser.add_argument("--epochs", type=int, default=3)
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--lr", type=float, default=3e-5)
    parser.add_argument("--max-input-tokens", type=int, default=512)
    parser.add_argument("--max-target-tokens", type=int, default=64)
    parser.add_argument("--val-fraction", type=float, default=0.02)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--device", default=None)
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    random.seed(args.seed)

    import torch
    from torch.utils.data import DataLoader
    from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

    torch.manual_seed(args.seed)
    device = args.device or ("cuda" if torch.cuda.is_available() else "cpu")

    pairs = load_pairs(args.corpus)
    random.shuffle(pairs)
    n_val = max(1, int(len(pairs) * args.val_fraction)) if len(pairs) > 1 else 0
    val, trn = pairs[:n_val], pairs[n_val:]
    log.info("%d training pairs, %d validation pairs", len(trn), len(val))

    tokenizer = AutoTokenizer.from_pretrained(args.model_id)
    model = AutoModelForSeq2SeqLM.from_pretrained(args.model_id).to(device)

    def encode(batch):
        sources, targets = zip(*batch)
        enc = tokenizer(
            list(sources),
            padding=True,
            truncation=True,
            max_length=args.max_input_tokens,
            return_tensors="pt",
        )
        labels = tokenizer(
            list(targets),
            padding=True,
            truncation=True,
            max_length=args.max_target_tokens,
            return_tensors="pt",
        ).input_ids
        labels[labels == tokenizer.pad_token_id] = -100
        enc["labels"] = labels
        return enc

    loader = DataLoader(trn, batch_size=args.batch_size, shuffle=True, collate_fn=encode)
    val_loader = DataLoader(val, batch_size=args.batch_size, collate_fn=encode) if val else None
    optimizer = torch.optim.AdamW(model.parameters(), lr=args.lr, weight_decay=0.01)

    def validation_loss():
        if val_loader is None:
            return float("nan")
        model.eval()
        total, count = 0.0, 0
        with torch.no_grad():
            for batch in val_loader:
                batch = {k: v.to(device) for k, v in batch.items()}
                total += model(**batch).loss.item() * len(batch["labels"])
                count += len(batch["labels"])
        model.train()
        return total / max(count, 1)

    model.train()
    best_val = float("inf")
    for epoch in range(args.epochs):
        running, steps = 0.0, 0
        for batch in loader:
            batch = {k: v.to(device) for k, v in batch.items()}
            loss = model(**batch).loss
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), 1.0)
            optimizer.step()
            optimizer.zero_grad()
            running += loss.item()
            steps += 1
            if steps % 200 == 0:
                log.info("epoch %d step %d: train loss %.4f", epoch, steps, running / steps)
        val_loss = validation_loss()
        log.info(
            "epoch %d done: train loss %.4f, val loss %.4f", epoch, running / max(steps, 1), val_loss
        )
        if val_loader is None or val_loss <= best_val:
            best_val = min(best_val, val_loss)
            model.save_pretrained(args.out)
            tokenizer.save_pretrained(args.out)
            log.info("checkpoint saved to %s", args.out)

    return 0


if __name__ == "__main__":
    sys.exit(main())
