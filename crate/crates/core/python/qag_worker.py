"""JSON-lines worker bridging qagkit to Hugging Face checkpoints.

One request object per stdin line, one response object per stdout line.
Errors are reported as {"error": message, ...} and never kill the worker.
"""

import copy
import json
import math
import os
import random
import sys

import torch
from torch.nn import functional as F
from transformers import (
    AutoModelForQuestionAnswering,
    AutoModelForSeq2SeqLM,
    AutoTokenizer,
)

CACHE_DIR = os.environ.get("QAG_CACHE_DIR") or None
HIGHLIGHT = os.environ.get("QAG_HIGHLIGHT_TOKEN", "<hl>")
MAX_INPUT = int(os.environ.get("QAG_MAX_INPUT_TOKENS", "512"))
DEVICE = "cuda" if torch.cuda.is_available() else "cpu"


class Divergence(Exception):
    def __init__(self, epoch, loss):
        super().__init__(f"loss {loss} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


def seed_everything(seed):
    random.seed(seed)
    torch.manual_seed(seed)


def batches(items, size):
    for i in range(0, len(items), size):
        yield items[i : i + size]


class Seq2Seq:
    def __init__(self, name):
        self.tokenizer = AutoTokenizer.from_pretrained(name, cache_dir=CACHE_DIR)
        self.model = AutoModelForSeq2SeqLM.from_pretrained(name, cache_dir=CACHE_DIR)
        if HIGHLIGHT not in self.tokenizer.get_vocab():
            self.tokenizer.add_special_tokens({"additional_special_tokens": [HIGHLIGHT]})
            self.model.resize_token_embeddings(len(self.tokenizer))
        self.model.to(DEVICE)
        # absolute position tables bound both sides; relative ones (t5) do not
        self.max_positions = getattr(self.model.config, "max_position_embeddings", None)

    def _new_tokens(self, wanted):
        if self.max_positions is None:
            return wanted
        return max(1, min(wanted, self.max_positions - 1))

    def _input_limit(self):
        if self.max_positions is None:
            return MAX_INPUT
        return min(MAX_INPUT, self.max_positions)

    def generate(self, requests):
        results = []
        self.model.eval()
        for i, req in enumerate(requests):
            enc = self.tokenizer(
                [req["input_text"]], truncation=True, max_length=self._input_limit(), return_tensors="pt"
            ).to(DEVICE)
            try:
                with torch.no_grad():
                    out = self.model.generate(
                        **enc,
                        num_beams=req["num_beams"],
                        num_return_sequences=req["num_return_sequences"],
                        max_new_tokens=self._new_tokens(req["max_output_tokens"]),
                        do_sample=False,
                        output_scores=True,
                        return_dict_in_generate=True,
                    )
            except Exception as exc:  # noqa: BLE001
                return {"error": str(exc), "index": i}
            if getattr(out, "sequences_scores", None) is not None:
                scores = out.sequences_scores.tolist()
            else:
                trans = self.model.compute_transition_scores(
                    out.sequences, out.scores, normalize_logits=True
                )
                scores = trans.sum(dim=1).tolist()
            texts = self.tokenizer.batch_decode(out.sequences, skip_special_tokens=True)
            outputs = [
                {"text": t.strip(), "log_likelihood": float(s)} for t, s in zip(texts, scores)
            ]
            outputs.sort(key=lambda o: -o["log_likelihood"])
            results.append({"outputs": outputs})
        return {"results": results}

    def _loss(self, batch, label_smoothing):
        enc = self.tokenizer(
            [e["input_text"] for e in batch],
            truncation=True,
            max_length=self._input_limit(),
            padding=True,
            return_tensors="pt",
        ).to(DEVICE)
        max_out = self._new_tokens(max(256 if e["task"] == "end2end" else 32 for e in batch))
        labels = self.tokenizer(
            text_target=[e["target_text"] for e in batch],
            truncation=True,
            max_length=max_out,
            padding=True,
            return_tensors="pt",
        ).input_ids.to(DEVICE)
        labels[labels == self.tokenizer.pad_token_id] = -100
        logits = self.model(**enc, labels=labels).logits
        return F.cross_entropy(
            logits.view(-1, logits.size(-1)),
            labels.view(-1),
            ignore_index=-100,
            label_smoothing=label_smoothing,
        )

    def finetune(self, train, validation, cfg):
        seed_everything(cfg["seed"])
        optimizer = torch.optim.AdamW(self.model.parameters(), lr=cfg["learning_rate"])
        log = {"train_losses": [], "validation_losses": [], "best_epoch": None}
        best = (math.inf, None)
        order = list(range(len(train)))
        for epoch in range(1, cfg["epochs"] + 1):
            self.model.train()
            random.shuffle(order)
            total, count = 0.0, 0
            for idx in batches(order, cfg["batch_size"]):
                loss = self._loss([train[i] for i in idx], cfg["label_smoothing"])
                if not torch.isfinite(loss):
                    raise Divergence(epoch, float(loss))
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                total += float(loss) * len(idx)
                count += len(idx)
            log["train_losses"].append(total / max(count, 1))
            if validation:
                self.model.eval()
                with torch.no_grad():
                    vt = sum(
                        float(self._loss(b, 0.0)) * len(b)
                        for b in batches(validation, cfg["batch_size"])
                    )
                vloss = vt / len(validation)
                log["validation_losses"].append(vloss)
                if vloss < best[0]:
                    best = (vloss, copy.deepcopy(self.model.state_dict()))
                    log["best_epoch"] = epoch
        if best[1] is not None:
            self.model.load_state_dict(best[1])
        return log

    def save(self, path):
        self.model.save_pretrained(path)
        self.tokenizer.save_pretrained(path)
        return {}


class Reader:
    """Extractive QA reader (DistilBERT-style span prediction)."""

    def __init__(self, name):
        self.name = name
        self.tokenizer = AutoTokenizer.from_pretrained(name, cache_dir=CACHE_DIR)
        self.model = None

    def _features(self, examples, max_len=384):
        enc = self.tokenizer(
            [e["question"] for e in examples],
            [e["context"] for e in examples],
            truncation="only_second",
            max_length=max_len,
            padding=True,
            return_offsets_mapping=True,
            return_tensors="pt",
        )
        return enc

    def train(self, train, validation, cfg):
        seed_everything(cfg["seed"])
        self.model = AutoModelForQuestionAnswering.from_pretrained(self.name, cache_dir=CACHE_DIR)
        self.model.to(DEVICE)
        optimizer = torch.optim.AdamW(self.model.parameters(), lr=cfg["learning_rate"])
        order = list(range(len(train)))
        for _ in range(cfg["epochs"]):
            self.model.train()
            random.shuffle(order)
            for idx in batches(order, cfg["batch_size"]):
                batch = [train[i] for i in idx]
                enc = self._features(batch)
                starts, ends = [], []
                for row, ex in enumerate(batch):
                    s_char = ex["answer_start"]
                    e_char = s_char + len(ex["answer"])
                    seq = enc.sequence_ids(row)
                    s_tok = e_tok = 0
                    for tok, (a, b) in enumerate(enc["offset_mapping"][row].tolist()):
                        if seq[tok] != 1:
                            continue
                        if a <= s_char < b:
                            s_tok = tok
                        if a < e_char <= b:
                            e_tok = tok
                    if e_tok < s_tok:
                        s_tok = e_tok = 0
                    starts.append(s_tok)
                    ends.append(e_tok)
                enc.pop("offset_mapping")
                out = self.model(
                    **enc.to(DEVICE),
                    start_positions=torch.tensor(starts, device=DEVICE),
                    end_positions=torch.tensor(ends, device=DEVICE),
                )
                optimizer.zero_grad()
                out.loss.backward()
                optimizer.step()
        return {}

    def predict(self, examples, max_answer_tokens=30):
        self.model.eval()
        answers = []
        for batch in batches(examples, 32):
            enc = self._features(batch)
            offsets = enc.pop("offset_mapping").tolist()
            with torch.no_grad():
                out = self.model(**enc.to(DEVICE))
            for row, ex in enumerate(batch):
                seq = enc.sequence_ids(row)
                ctx_toks = [t for t, s in enumerate(seq) if s == 1]
                start_logits = out.start_logits[row].tolist()
                end_logits = out.end_logits[row].tolist()
                best, span = -math.inf, None
                for s in ctx_toks:
                    for e in ctx_toks:
                        if e < s or e - s >= max_answer_tokens:
                            continue
                        score = start_logits[s] + end_logits[e]
                        if score > best:
                            best, span = score, (offsets[row][s][0], offsets[row][e][1])
                answers.append(ex["context"][span[0] : span[1]] if span else "")
        return {"answers": answers}


def main():
    seq2seq = None
    readers = {}
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
            op = msg["op"]
            if op == "exit":
                break
            if op == "load_seq2seq":
                seq2seq = Seq2Seq(msg["model"])
                resp = {}
            elif op == "generate":
                resp = seq2seq.generate(msg["requests"])
            elif op == "finetune":
                try:
                    resp = seq2seq.finetune(msg["train"], msg["validation"], msg["config"])
                except Divergence as d:
                    resp = {"error": str(d), "divergence": {"epoch": d.epoch, "loss": str(d.loss)}}
            elif op == "save":
                resp = seq2seq.save(msg["path"])
            elif op == "train_reader":
                reader = Reader(msg["model"])
                reader.train(msg["train"], msg["validation"], msg["config"])
                readers[msg["reader_id"]] = reader
                resp = {}
            elif op == "predict":
                resp = readers[msg["reader_id"]].predict(msg["examples"])
            else:
                resp = {"error": f"unknown op {op!r}"}
        except Exception as exc:  # noqa: BLE001
            resp = {"error": f"{type(exc).__name__}: {exc}"}
        sys.stdout.write(json.dumps(resp) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
