#!/usr/bin/env python3
"""Line-protocol question generator for `kcs generate --backend seq2seq-finetuned`.

The kcs binary spawns this script once per run (via `--gen-cmd`), writes one
generator input per line to stdin, and expects exactly one generated
question per line on stdout, flushed per line. Inputs look like

    <answer> [SEP] <Title1>: <sentence1> [SEP] <Title2>: <sentence2>

Decode knobs arrive as environment variables set by the parent process:
`KCS_BEAM_SIZE` (default 4) and `KCS_MAX_INPUT_TOKENS` (default 512).

On a per-line model failure the script emits an empty line — the parent
counts that record as a generation failure and keeps going. A non-zero
exit or closed stdout aborts the parent's run.

Usage (as a kcs flag):

    kcs generate --backend seq2seq-finetuned \
        --gen-cmd "python3 scripts/generate_questions.py runs/qg-model" ...

The single positional argument is a Hugging Face model name or a local
directory produced by `scripts/train_generator.py`.
"""

import os
import sys


def main() -> int:
    if len(sys.argv) != 2:
        print("usage: generate_questions.py <model-name-or-dir>", file=sys.stderr)
        return 2
    model_id = sys.argv[1]
    beam_size = int(os.environ.get("KCS_BEAM_SIZE", "4"))
    max_input_tokens = int(os.environ.get("KCS_MAX_INPUT_TOKENS", "512"))

    import torch
    from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

    device = "cuda" if torch.cuda.is_available() else "cpu"
    tokenizer = AutoTokenizer.from_pretrained(model_id)
    model = AutoModelForSeq2SeqLM.from_pretrained(model_id).to(device).eval()
    print(f"generator {model_id} ready on {device} (beams={beam_size})", file=sys.stderr)

    for line in sys.stdin:
        line = line.rstrip("\n")
        try:
            enc = tokenizer(
                line, truncation=True, max_length=max_input_tokens, return_tensors="pt"
            ).to(device)
            with torch.no_grad():
                out = model.generate(
                    **enc,
                    num_beams=beam_size,
                    max_new_tokens=64,
                    early_stopping=True,
                )
            question = tokenizer.decode(out[0], skip_special_tokens=True)
            # The protocol is line-based: the reply must be one line.
            question = " ".join(question.split())
        except Exception as exc:  # noqa: BLE001 - any per-line failure is recoverable
            print(f"generation failed: {exc}", file=sys.stderr)
            question = ""
        print(question, flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
