"""Pre-populate the cached encrypted evaluation used by the test suite.

Runs the fixture network homomorphically on 50 test images at the DESK
preset and writes tests/fixtures/desk_eval.json.  Takes hours on a small
machine; progress is printed per image.
"""

import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)),
                                os.pardir, "tests"))

import desk_eval  # noqa: E402


def progress(idx, counts, plain_cls, fhe_cls):
    print(f"[{time.strftime('%H:%M:%S')}] image {idx + 1}/{desk_eval.N_IMAGES}"
          f" agree {counts['agree']}/{counts['total']}"
          f" plain={plain_cls} fhe={fhe_cls}", flush=True)


def main():
    result = desk_eval.load_or_run(progress=progress)
    agree = result["neuron_steps_agree"]
    total = result["neuron_steps_total"]
    match = sum(p == f for p, f in zip(result["plain_classes"],
                                       result["fhe_classes"]))
    print(f"done: {agree}/{total} neuron-steps agree,"
          f" {match}/{result['images']} classifications match")


if __name__ == "__main__":
    main()
