"""Command-line workflow: client-side keygen/encrypt/decrypt and
server-side infer as local commands over files.

Every failure exits nonzero with a single machine-readable JSON object on
stderr: {"error": <code>, "detail": <text>}.  `infer` refuses to run a
configuration whose message modulus cannot hold the scanned layer maxima
unless --force is given.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import oracle, serial
from .bootstrap import gen_bootstrap_key
from .errors import ConfigurationError, FdsnnError
from .lwe import decrypt_batch, lwe_keygen
from .network import CsnnModel, classify, discretize, encrypt_image, infer
from .params import FheParams, noise_budget_check, preset, select_p
from .rgsw import rlwe_keygen


def _fail(code: str, detail: str, status: int = 1):
    json.dump({"error": code, "detail": detail}, sys.stderr)
    sys.stderr.write("\n")
    raise SystemExit(status)


def _load_params(key_path: str) -> FheParams:
    params_path = os.path.join(os.path.dirname(os.path.abspath(key_path)),
                               "params.json")
    if not os.path.exists(params_path):
        _fail("missing-params", f"no params.json next to {key_path}")
    with open(params_path) as f:
        return FheParams.from_dict(json.load(f))


def _load_image(path: str) -> np.ndarray:
    if path.endswith(".pgm"):
        return oracle.read_pgm(path)
    arr = oracle.read_idx(path)
    if arr.ndim == 3:
        arr = arr[0]
    return arr.astype(np.float64) / 255.0


def cmd_keygen(args):
    params = preset(args.preset)
    if args.p:
        params = params.with_p(args.p)
    if args.sigma is not None:
        params = dataclasses.replace(params, sigma=args.sigma,
                                     preset_name="custom")
    rng = np.random.default_rng(args.seed)
    sk = lwe_keygen(params, rng)
    zk = rlwe_keygen(params, rng)
    bsk = gen_bootstrap_key(sk, zk, params, rng)
    os.makedirs(args.out, exist_ok=True)
    paths = {"secret_key": os.path.join(args.out, "sk.bin"),
             "bootstrap_key": os.path.join(args.out, "bk.bin")}
    with open(os.path.join(args.out, "params.json"), "w") as f:
        json.dump(params.to_dict(), f, indent=2)
    serial.save_secret_key(paths["secret_key"], sk, zk, params)
    serial.save_bootstrap_key(paths["bootstrap_key"], bsk)
    paths["params"] = os.path.join(args.out, "params.json")
    serial.write_manifest(os.path.join(args.out, "manifest.json"), params, paths)
    print(json.dumps({"out": args.out, "params_digest": params.digest()}))


def cmd_encrypt(args):
    params = _load_params(args.key)
    sk, _ = serial.load_secret_key(args.key, params)
    rng = np.random.default_rng(args.seed)
    ct = encrypt_image(_load_image(args.image), args.L, sk, params, rng)
    serial.save_ciphertexts(args.out, ct, params)
    print(json.dumps({"out": args.out, "cells": ct.count}))


def cmd_infer(args):
    params = _load_params(args.bskey)
    model = CsnnModel.load(args.model)
    net = discretize(model, args.theta)
    if args.stats:
        stats = oracle.LayerStats.from_dict(json.load(open(args.stats)))
        needed = select_p(args.theta, max(stats.spiking_max))
        report = noise_budget_check(params, args.theta, max(stats.weight_l1),
                                    params.sigma)
        if params.p < needed and not args.force:
            _fail("unsafe-parameters",
                  f"message modulus p={params.p} below required {needed} "
                  f"for theta={args.theta}; rerun with --force to override", 2)
        if not report.passed and not args.force:
            _fail("unsafe-parameters",
                  "noise budget check failed for this configuration", 2)
    elif not args.force:
        _fail("missing-stats",
              "refusing to infer without --stats safety check; "
              "pass --force to override", 2)
    bsk = serial.load_bootstrap_key(args.bskey, params)
    ct = serial.load_ciphertexts(args.ct, params)
    scores, stats_out = infer(ct, net, bsk, T=args.T, workers=args.workers)
    serial.save_ciphertexts(args.out, scores, params)
    sidecar = {"bootstrap_count": stats_out.bootstrap_count,
               "wall_time_s": stats_out.wall_time,
               "timesteps": stats_out.timesteps,
               "workers": args.workers}
    with open(args.out + ".stats.json", "w") as f:
        json.dump(sidecar, f, indent=2)
    print(json.dumps(sidecar))


def cmd_decrypt(args):
    params = _load_params(args.key)
    sk, _ = serial.load_secret_key(args.key, params)
    scores_ct = serial.load_ciphertexts(args.scores, params)
    raw = decrypt_batch(scores_ct.A, scores_ct.b, sk, params)
    print(json.dumps({"class": int(np.argmax(raw)),
                      "scores": [int(v) for v in raw]}))


def cmd_eval_plain(args):
    model = CsnnModel.load(args.model)
    images, labels = oracle.load_dataset(args.dataset, args.limit, args.split)
    if args.float:
        acc = oracle.accuracy_eval(model, images, labels, T=args.T)
    else:
        net = discretize(model, args.theta)
        acc = oracle.accuracy_eval(net, images, labels, T=args.T)
    print(json.dumps({"accuracy": acc, "samples": len(labels),
                      "path": "float" if args.float else "discretized"}))


def cmd_scan_stats(args):
    model = CsnnModel.load(args.model)
    images, _ = oracle.load_dataset(args.dataset, args.limit, args.split)
    if args.theta:
        target = discretize(model, args.theta)
    else:
        target = model
    stats = oracle.scan_layer_max(target, images, T=args.T)
    doc = stats.to_dict()
    with open(args.out, "w") as f:
        json.dump(doc, f, indent=2)
    print(json.dumps(doc))


def cmd_estimate_params(args):
    stats = oracle.LayerStats.from_dict(json.load(open(args.stats)))
    params = preset(args.preset)
    try:
        p = select_p(args.theta, max(stats.spiking_max),
                     safety_margin=args.margin)
    except ConfigurationError as e:
        _fail("no-feasible-p", str(e))
    params = params.with_p(p)
    report = noise_budget_check(params, args.theta, max(stats.weight_l1),
                                params.sigma)
    print(json.dumps({"p": p, "noise_bound": params.noise_bound,
                      "budget_ok": bool(report.passed),
                      "budget_margin": report.margin}))


def cmd_bench(args):
    from .bootstrap import bootstrap_batch, make_program
    from .lwe import encrypt_batch

    params = preset(args.preset)
    rng = np.random.default_rng(0)
    sk = lwe_keygen(params, rng)
    zk = rlwe_keygen(params, rng)
    bsk = gen_bootstrap_key(sk, zk, params, rng)
    g = make_program(lambda m: 1, params.p)
    ms = rng.integers(-params.p // 2 + 1, params.p // 2 + 1, args.count)
    A, b = encrypt_batch(ms, sk, params, rng)
    bootstrap_batch(g, A[:4], b[:4], bsk)  # warm up jit
    t0 = time.monotonic()
    bootstrap_batch(g, A, b, bsk)
    dt = time.monotonic() - t0
    print(json.dumps({"preset": args.preset, "count": args.count,
                      "seconds_per_bootstrap": dt / args.count,
                      "bootstraps_per_second": args.count / dt}))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fdsnn",
        description="Encrypted spiking-network inference over LWE ciphertexts")
    sub = ap.add_subparsers(dest="command", required=True)
    default_workers = int(os.environ.get("FDSNN_WORKERS", "1"))

    k = sub.add_parser("keygen", help="generate secret + bootstrap keys")
    k.add_argument("--preset", default="DESK")
    k.add_argument("--p", type=int, default=0, help="override message modulus")
    k.add_argument("--sigma", type=float, default=None,
                   help="override the fresh-noise standard deviation")
    k.add_argument("--seed", type=int, default=None)
    k.add_argument("--out", required=True)
    k.set_defaults(fn=cmd_keygen)

    e = sub.add_parser("encrypt", help="encrypt one grayscale image")
    e.add_argument("--image", required=True)
    e.add_argument("--key", required=True)
    e.add_argument("--L", type=int, default=1, help="pixel quantization levels")
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--out", required=True)
    e.set_defaults(fn=cmd_encrypt)

    i = sub.add_parser("infer", help="run the encrypted forward pass")
    i.add_argument("--model", required=True)
    i.add_argument("--theta", type=int, required=True)
    i.add_argument("--ct", required=True)
    i.add_argument("--bskey", required=True)
    i.add_argument("--T", type=int, default=None)
    i.add_argument("--workers", type=int, default=default_workers)
    i.add_argument("--stats", default=None, help="layer-stats JSON for the safety check")
    i.add_argument("--force", action="store_true")
    i.add_argument("--out", required=True)
    i.set_defaults(fn=cmd_infer)

    d = sub.add_parser("decrypt", help="decrypt class scores")
    d.add_argument("--scores", required=True)
    d.add_argument("--key", required=True)
    d.set_defaults(fn=cmd_decrypt)

    ev = sub.add_parser("eval-plain", help="plaintext accuracy of a model")
    ev.add_argument("--model", required=True)
    ev.add_argument("--theta", type=int, default=40)
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--float", action="store_true")
    ev.add_argument("--T", type=int, default=None)
    ev.add_argument("--limit", type=int, default=None)
    ev.add_argument("--split", default="test")
    ev.set_defaults(fn=cmd_eval_plain)

    sc = sub.add_parser("scan-stats", help="scan layer maxima over a dataset")
    sc.add_argument("--model", required=True)
    sc.add_argument("--dataset", required=True)
    sc.add_argument("--theta", type=int, default=0,
                    help="scan the discretized net instead of the float model")
    sc.add_argument("--T", type=int, default=None)
    sc.add_argument("--limit", type=int, default=None)
    sc.add_argument("--split", default="test")
    sc.add_argument("--out", required=True)
    sc.set_defaults(fn=cmd_scan_stats)

    es = sub.add_parser("estimate-params", help="recommend p from scanned stats")
    es.add_argument("--theta", type=int, required=True)
    es.add_argument("--stats", required=True)
    es.add_argument("--preset", default="DESK")
    es.add_argument("--margin", action="store_true",
                    help="apply a 2x safety margin on the layer maxima")
    es.set_defaults(fn=cmd_estimate_params)

    b = sub.add_parser("bench", help="bootstrap latency benchmark")
    b.add_argument("--preset", default="DESK")
    b.add_argument("--count", type=int, default=64)
    b.set_defaults(fn=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except FdsnnError as e:
        _fail(type(e).__name__, str(e))
    except OSError as e:
        _fail("io-error", str(e))
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
