"""Command line pipeline: extract -> fit-encoder -> encode -> train/evaluate.

Exit codes: 2 unreadable input, 3 invalid config, 4 insufficient
descriptors, 5 requested lengths not covered by the encoder, 6
manifest/feature mismatch.
"""

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import io as lio
from .config import PipelineConfig, derive_seed
from .encode import LstmfEncoder
from .errors import ConfigError, InputError, InsufficientDataError, ManifestError, PipelineError
from .evaluate import run_protocol
from .extract import extract_features
from .media import load_frame_sequence
from .svm import OneVsRestLinearSVM


def _parse_lengths(text):
    try:
        return tuple(int(tok) for tok in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad --lengths value {text!r}") from exc


def _load_config(args):
    cfg = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "stabilize", None) is not None:
        cfg.stabilize = args.stabilize == "on"
    if getattr(args, "lengths", None) and args.command == "extract":
        cfg.tracker.lengths = _parse_lengths(args.lengths)
    if getattr(args, "c", None) is not None:
        cfg.svm_c = args.c
    return cfg.validate()


def _video_id(path):
    base = os.path.basename(os.path.normpath(path))
    return base[:-4] if base.lower().endswith(".y4m") else base


def _extract_one(input_path, out_path, cfg_dict):
    cfg = PipelineConfig.from_dict(cfg_dict)
    video_id = _video_id(input_path)
    seq = load_frame_sequence(input_path)
    descriptors, stats = extract_features(
        seq, cfg, stabilizer_seed=derive_seed(cfg.seed, f"ransac:{video_id}"))
    with lio.FeatureWriter(out_path, cfg.extraction_hash(), video_id,
                           cfg.descriptor.dims()) as writer:
        for ds in descriptors:
            writer.write(ds)
    return video_id, stats


def cmd_extract(args):
    cfg = _load_config(args)
    inputs = list(args.inputs)
    if len(inputs) > 1 or os.path.isdir(args.out) or not args.out.endswith(".lstmf"):
        os.makedirs(args.out, exist_ok=True)
        outs = [os.path.join(args.out, _video_id(p) + ".lstmf") for p in inputs]
    else:
        outs = [args.out]
    cfg_dict = cfg.to_dict()
    if args.jobs > 1 and len(inputs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_extract_one, inputs, outs, [cfg_dict] * len(inputs)))
    else:
        results = [_extract_one(i, o, cfg_dict) for i, o in zip(inputs, outs)]
    for video_id, stats in results:
        counts = stats["blocks_per_length"]
        emitted = stats["emitted_per_length"]
        total = sum(counts.values())
        per_l = ", ".join(f"l={l}: {n}/{emitted[l]}" for l, n in sorted(counts.items()))
        print(f"{video_id}: {total} blocks (accepted/emitted {per_l}); "
              f"rejected static={stats['rejected_static']} drift={stats['rejected_drift']}")
        if total == 0:
            print(f"warning: {video_id} produced no features "
                  "(clip shorter than the minimum block length?)", file=sys.stderr)
    return 0


def _check_same_hash(headers):
    hashes = {h["config_hash"] for h in headers}
    if len(hashes) > 1:
        raise ManifestError(f"feature files were extracted under different configs: {sorted(hashes)}")
    return hashes.pop()


def cmd_fit_encoder(args):
    cfg = _load_config(args)
    budget = cfg.encoder.sample_budget
    rng = np.random.default_rng(derive_seed(cfg.seed, "sampling"))
    reservoir = None
    headers = []
    seen = 0
    for path in sorted(args.features):
        header, columns = lio.read_features(path)
        headers.append(header)
        rsize = lio.record_size(header["dims"])
        table = np.concatenate(
            [columns["length"][:, None].astype(np.float64),
             columns["scale"][:, None].astype(np.float64),
             columns["start_frame"][:, None].astype(np.float64),
             columns["mean_x"][:, None], columns["mean_y"][:, None]]
            + [columns[t] for t in lio.DESCRIPTOR_TYPES], axis=1)
        if reservoir is None:
            reservoir = np.empty((budget, rsize), dtype=np.float64)
        for row in table:
            if seen < budget:
                reservoir[seen] = row
            else:
                j = rng.integers(0, seen + 1)
                if j < budget:
                    reservoir[j] = row
            seen += 1
    if not headers:
        raise InputError("no feature files given")
    config_hash = _check_same_hash(headers)
    needed = 10 * cfg.encoder.n_gaussians
    if seen < needed:
        raise InsufficientDataError(
            f"{seen} descriptors available, need at least {needed} for "
            f"{cfg.encoder.n_gaussians} Gaussians")
    sampled = reservoir[:min(seen, budget)]
    dims = headers[0]["dims"]
    samples_by_type = {}
    offset = 5
    for kind in lio.DESCRIPTOR_TYPES:
        samples_by_type[kind] = sampled[:, offset:offset + dims[kind]]
        offset += dims[kind]
    encoder = LstmfEncoder(n_gaussians=cfg.encoder.n_gaussians, mode=cfg.encoder.mode,
                           lengths=cfg.tracker.lengths, seed=derive_seed(cfg.seed, "gmm"))
    encoder.fit(samples_by_type)
    lio.write_json(args.out, encoder.to_dict(config_hash))
    print(f"encoder: {len(sampled)} sampled descriptors, "
          f"{cfg.encoder.n_gaussians} Gaussians per type -> {args.out}")
    return 0


def _encode_one(feature_path, out_path, encoder_dict, mode, lengths):
    encoder = LstmfEncoder.from_dict(encoder_dict)
    header, columns = lio.read_features(feature_path)
    if header["config_hash"] != encoder_dict["config_hash"]:
        raise ManifestError(
            f"{feature_path}: config hash {header['config_hash'][:12]} does not match "
            f"encoder hash {encoder_dict['config_hash'][:12]}")
    grouped = lio.descriptors_by_length(columns)
    grouped = {l: g for l, g in grouped.items() if l in lengths}
    rep = encoder.encode_video(grouped, video_id=header["video_id"], mode=mode, lengths=lengths)
    lio.write_representation(out_path, rep, header["config_hash"])
    return header["video_id"], rep.n_blocks, rep.vector.size


def cmd_encode(args):
    encoder_dict = lio.read_json(args.encoder)
    mode = args.mode or encoder_dict["mode"]
    lengths = _parse_lengths(args.lengths) if args.lengths else tuple(encoder_dict["lengths"])
    LstmfEncoder.from_dict(encoder_dict)._check_lengths(lengths)
    os.makedirs(args.out, exist_ok=True)
    outs, feats = [], sorted(args.features)
    for path in feats:
        base = os.path.splitext(os.path.basename(path))[0]
        outs.append(os.path.join(args.out, base + ".lstmfr"))
    if args.jobs > 1 and len(feats) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_encode_one, feats, outs,
                                    [encoder_dict] * len(feats),
                                    [mode] * len(feats), [lengths] * len(feats)))
    else:
        results = [_encode_one(f, o, encoder_dict, mode, lengths) for f, o in zip(feats, outs)]
    for video_id, n_blocks, dim in results:
        print(f"{video_id}: {n_blocks} blocks -> {dim}-dim {mode} representation")
    return 0


def cmd_train(args):
    entries = lio.read_manifest(args.manifest)
    train_entries = [e for e in entries if e["split"] == "train"] or entries
    X, config_hash = lio.load_manifest_representations(train_entries)
    model = OneVsRestLinearSVM(C=args.c, random_state=derive_seed(args.seed, "svm:train"))
    model.fit(X, [e["labels"] for e in train_entries])
    lio.save_model(args.out, model, config_hash)
    print(f"trained {len(model.classes_)} one-vs-rest classifiers on "
          f"{len(train_entries)} videos -> {args.out}")
    return 0


def cmd_evaluate(args):
    entries = lio.read_manifest(args.manifest)
    X, config_hash = lio.load_manifest_representations(entries)
    report = run_protocol(X, entries, protocol=args.protocol, metric=args.metric,
                          C=args.c, seed=args.seed, macc_mode=args.macc_mode)
    report["config_hash"] = config_hash
    lio.write_json(args.out, report)
    print(f"{args.metric} ({args.protocol}): {report['value']:.4f} "
          f"over {len(report['per_class'])} classes, {len(report['per_fold'])} fold(s)")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lstmf",
        description="Multi-length dense-trajectory features with Fisher vector encoding")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract trajectory-block descriptors from clips")
    p.add_argument("inputs", nargs="+", help="Y4M files or image directories")
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="output .lstmf file or directory")
    p.add_argument("--lengths", help="comma-separated block lengths, e.g. 15,30,45")
    p.add_argument("--seed", type=int)
    p.add_argument("--stabilize", choices=("on", "off"))
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("fit-encoder", help="fit per-type PCA+GMM from feature files")
    p.add_argument("features", nargs="+")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_fit_encoder)

    p = sub.add_parser("encode", help="pool feature files into video representations")
    p.add_argument("features", nargs="+")
    p.add_argument("--encoder", required=True)
    p.add_argument("--out", required=True, help="output directory for .lstmfr files")
    p.add_argument("--mode", choices=("joint", "concat"))
    p.add_argument("--lengths")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("train", help="train one-vs-all SVMs from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--c", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run a protocol and write the report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--protocol", choices=("split", "logo"), default="split")
    p.add_argument("--metric", choices=("macc", "map"), default="macc")
    p.add_argument("--macc-mode", choices=("folds", "pooled"), default="folds")
    p.add_argument("--c", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
