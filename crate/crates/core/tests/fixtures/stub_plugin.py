#!/usr/bin/env python3
"""Minimal plugin for protocol tests.

Modes:
  echo   answer generate with the prompt's "Headline:" line
  cue    answer with "opinion leans <class>" for every cue word found
Options:
  --lexicon FILE       JSON {class: [cue words]} for cue mode
  --trace FILE         append every received request as one JSON line
  --die-after N        exit after answering N generate requests
  --fail-first K       answer ok:false to the first K attempts of each prompt
  --jitter-ms MS       answer concurrently with random delays (out of order)
  --classify LABEL     answer classify with LABEL scoring highest
  --name NAME          name announced in the handshake
  --bad-hello          refuse the handshake
"""
import argparse
import json
import random
import re
import sys
import threading
import time

p = argparse.ArgumentParser()
p.add_argument("--mode", default="echo")
p.add_argument("--lexicon")
p.add_argument("--trace")
p.add_argument("--die-after", type=int)
p.add_argument("--fail-first", type=int, default=0)
p.add_argument("--jitter-ms", type=int, default=0)
p.add_argument("--classify")
p.add_argument("--name", default="fixture")
p.add_argument("--bad-hello", action="store_true")
args = p.parse_args()

phrases = {}
if args.lexicon:
    with open(args.lexicon, encoding="utf-8") as f:
        for cls, words in json.load(f).items():
            for w in words:
                phrases[w.lower()] = "opinion leans " + cls.lower()

out_lock = threading.Lock()
attempts = {}
answered = 0


def send(obj):
    with out_lock:
        sys.stdout.write(json.dumps(obj, ensure_ascii=False) + "\n")
        sys.stdout.flush()


def trace(obj):
    if args.trace:
        with open(args.trace, "a", encoding="utf-8") as f:
            f.write(json.dumps(obj, ensure_ascii=False) + "\n")


def generate(prompt):
    if args.mode == "cue":
        found = []
        for tok in re.findall(r"\w+", prompt.lower()):
            ph = phrases.get(tok)
            if ph and ph not in found:
                found.append(ph)
        return " ".join(found) or "opinion unclear"
    for line in prompt.splitlines():
        if line.startswith("Headline: "):
            return line[len("Headline: "):]
    return prompt


def handle(req):
    if args.jitter_ms:
        time.sleep(random.random() * args.jitter_ms / 1000.0)
    if req.get("method") == "generate":
        n = attempts.get(req["prompt"], 0)
        attempts[req["prompt"]] = n + 1
        if n < args.fail_first:
            send({"id": req["id"], "ok": False, "error": "scripted failure"})
            return False
        send({"id": req["id"], "ok": True, "text": generate(req["prompt"])})
        return True
    if req.get("method") == "classify" and args.classify:
        labels = req["labels"]
        scores = {l: (0.9 if l == args.classify else 0.1 / max(1, len(labels) - 1)) for l in labels}
        send({"id": req["id"], "ok": True, "scores": scores})
        return False
    send({"id": req.get("id"), "ok": False, "error": "unsupported method"})
    return False


for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    req = json.loads(line)
    if req.get("method") == "hello":
        if args.bad_hello:
            send({"ok": False, "error": "go away"})
        else:
            methods = ["generate"] + (["classify"] if args.classify else [])
            send({"ok": True, "name": args.name, "methods": methods})
        continue
    trace(req)
    if args.jitter_ms:
        threading.Thread(target=handle, args=(req,)).start()
        continue
    if handle(req):
        answered += 1
        if args.die_after is not None and answered >= args.die_after:
            sys.exit(3)
