#!/usr/bin/env python3
"""Candidate-provider test double. Usage: candidate_provider.py <mode>

Protocol: request {"tokens": [...], "position": N} -> {"candidates": [...]}.
No handshake line.
"""
import json
import sys


def out(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def main():
    mode = sys.argv[1] if len(sys.argv) > 1 else "fixed"
    for line in sys.stdin:
        req = json.loads(line)
        tokens, pos = req["tokens"], req["position"]
        if mode == "fixed":
            # duplicate + identity entries exercise downstream filtering
            out({"candidates": ["alpha", "beta", tokens[pos], "alpha"]})
        elif mode == "empty":
            out({"candidates": []})
        elif mode == "reverse":
            out({"candidates": [tokens[pos][::-1]]})
        elif mode == "malformed":
            sys.stdout.write("nope\n")
            sys.stdout.flush()
        else:
            sys.exit("unknown mode: " + mode)


if __name__ == "__main__":
    main()
