"""Command line front end.

One subcommand per pipeline stage. Results go to stdout as JSON (the report
renderer can emit markdown instead); diagnostics go to stderr; --output
redirects the primary artifact to a file. A --config JSON file may supply
any long option (flags given on the command line win); unknown config keys
are usage errors.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import boxes, cloud_io, corruptions, encoder, evalkit, judges, matching
from .cloud import fps, knn_group
from .errors import InvalidConfig, ParseError, PointkitError, SchemaError

_WIDTH = 78  # pinned so --help output does not depend on the terminal


def _formatter(prog: str) -> argparse.HelpFormatter:
    return argparse.HelpFormatter(prog, width=_WIDTH)


_GLOBAL_DEFAULTS = {"seed": 0, "output": None}

_DEFAULTS: dict[str, dict] = {
    "tokenize": {"n_seeds": 512, "k": 32, "start_index": 0},
    "encode": {
        "variant": "B",
        "n_seeds": 512,
        "k": 32,
        "start_index": 0,
        "mask_mode": "none",
        "mask_ratio": 0.6,
        "image_queries": 4,
        "prompt_length": 32,
        "d_llm": 4096,
        "no_text_query": False,
        "weights": None,
        "dump_weights": None,
    },
    "match": {},
    "corrupt": {
        "kind": "jitter",
        "sigma": 0.01,
        "theta": math.pi / 6.0,
        "fov": 60.0,
        "bins": 128,
        "distance": 2.0,
    },
    "iou": {},
    "reg": {"threshold": 0.25},
    "eval": {
        "judge": "stub",
        "k": 5,
        "max_workers": 1,
        "endpoint": None,
        "model": None,
        "format": "json",
    },
    "report": {"format": "markdown"},
}

_POSITIONALS = {
    "tokenize": ("cloud",),
    "encode": ("cloud",),
    "match": ("feats_a", "feats_b"),
    "corrupt": ("cloud",),
    "iou": ("box_a", "box_b"),
    "reg": ("predictions", "ground_truths"),
    "eval": ("qa",),
    "report": ("report_file",),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="master seed for every random draw (default 0)")
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="JSON file supplying long options; explicit flags win")
    common.add_argument("--output", default=argparse.SUPPRESS,
                        help="write the primary artifact here instead of stdout")

    parser = argparse.ArgumentParser(
        prog="pointkit",
        description="Point-cloud tokenization, encoding, matching, box IoU, "
        "corruption and QA evaluation tools.",
        formatter_class=_formatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("tokenize", parents=[common], formatter_class=_formatter,
                       help="farthest point sampling plus kNN grouping")
    p.add_argument("cloud", help="input cloud (.pcb binary or whitespace text)")
    p.add_argument("--n-seeds", type=int, default=argparse.SUPPRESS, help="seed count (default 512)")
    p.add_argument("--k", type=int, default=argparse.SUPPRESS, help="neighborhood size (default 32)")
    p.add_argument("--start-index", type=int, default=argparse.SUPPRESS,
                   help="first seed index (default 0)")

    p = sub.add_parser("encode", parents=[common], formatter_class=_formatter,
                       help="full forward pass; prints a summary with a digest")
    p.add_argument("cloud", help="input cloud (.pcb binary or whitespace text)")
    p.add_argument("--variant", choices=("S", "B", "L"), default=argparse.SUPPRESS,
                   help="model size (default B)")
    p.add_argument("--n-seeds", type=int, default=argparse.SUPPRESS, help="token count (default 512)")
    p.add_argument("--k", type=int, default=argparse.SUPPRESS, help="neighborhood size (default 32)")
    p.add_argument("--start-index", type=int, default=argparse.SUPPRESS,
                   help="first seed index (default 0)")
    p.add_argument("--mask-mode", choices=("none", "random", "causal"),
                   default=argparse.SUPPRESS, help="attention masking (default none)")
    p.add_argument("--mask-ratio", type=float, default=argparse.SUPPRESS,
                   help="fraction hidden by random masking (default 0.6)")
    p.add_argument("--image-queries", type=int, default=argparse.SUPPRESS,
                   help="learned image query count (default 4)")
    p.add_argument("--prompt-length", type=int, default=argparse.SUPPRESS,
                   help="prompt rows per bank (default 32)")
    p.add_argument("--d-llm", type=int, default=argparse.SUPPRESS,
                   help="projector output width (default 4096)")
    p.add_argument("--no-text-query", action="store_true", default=argparse.SUPPRESS,
                   help="drop the text query from the pooled output")
    p.add_argument("--weights", default=argparse.SUPPRESS,
                   help="load a WB01 weight bank instead of generating one")
    p.add_argument("--dump-weights", default=argparse.SUPPRESS,
                   help="also write the weight bank to this WB01 file")

    p = sub.add_parser("match", parents=[common], formatter_class=_formatter,
                       help="optimal feature-to-query assignment")
    p.add_argument("feats_a", help="view features (whitespace text or single-tensor WB01)")
    p.add_argument("feats_b", help="query features (same formats)")

    p = sub.add_parser("corrupt", parents=[common], formatter_class=_formatter,
                       help="apply a deterministic corruption to a cloud")
    p.add_argument("cloud", help="input cloud (.pcb binary or whitespace text)")
    p.add_argument("--kind", choices=corruptions.KINDS, default=argparse.SUPPRESS,
                   help="corruption to apply (default jitter)")
    p.add_argument("--sigma", type=float, default=argparse.SUPPRESS,
                   help="jitter noise scale (default 0.01)")
    p.add_argument("--theta", type=float, default=argparse.SUPPRESS,
                   help="Euler angle bound in radians (default pi/6)")
    p.add_argument("--fov", type=float, default=argparse.SUPPRESS,
                   help="single-view cone angle in degrees (default 60)")
    p.add_argument("--bins", type=int, default=argparse.SUPPRESS,
                   help="single-view polar grid resolution (default 128)")
    p.add_argument("--distance", type=float, default=argparse.SUPPRESS,
                   help="single-view camera distance (default 2)")

    p = sub.add_parser("iou", parents=[common], formatter_class=_formatter,
                       help="oriented-box IoU for paired box lines")
    p.add_argument("box_a", help="box string, or file with one box per line")
    p.add_argument("box_b", help="box string, or file with one box per line")

    p = sub.add_parser("reg", parents=[common], formatter_class=_formatter,
                       help="grounding accuracy at an IoU threshold")
    p.add_argument("predictions", help="file of predicted box strings, one per line")
    p.add_argument("ground_truths", help="file of ground-truth box strings, one per line")
    p.add_argument("--threshold", type=float, default=argparse.SUPPRESS,
                   help="IoU needed for a hit (default 0.25)")

    p = sub.add_parser("eval", parents=[common], formatter_class=_formatter,
                       help="K-round judged QA scoring over a JSONL file")
    p.add_argument("qa", help="line-delimited JSON QA records")
    p.add_argument("--judge", choices=("stub", "http"), default=argparse.SUPPRESS,
                   help="judge backend (default stub)")
    p.add_argument("--k", type=int, default=argparse.SUPPRESS, help="rounds per record (default 5)")
    p.add_argument("--max-workers", type=int, default=argparse.SUPPRESS,
                   help="concurrent scoring threads (default 1)")
    p.add_argument("--endpoint", default=argparse.SUPPRESS,
                   help="judge endpoint URL (http judge; or JUDGE_ENDPOINT)")
    p.add_argument("--model", default=argparse.SUPPRESS,
                   help="judge model name (http judge; or JUDGE_MODEL)")
    p.add_argument("--format", choices=("json", "markdown"), default=argparse.SUPPRESS,
                   help="report rendering (default json)")

    p = sub.add_parser("report", parents=[common], formatter_class=_formatter,
                       help="re-render a JSON report")
    p.add_argument("report_file", help="report JSON produced by eval")
    p.add_argument("--format", choices=("json", "markdown"), default=argparse.SUPPRESS,
                   help="output rendering (default markdown)")

    return parser


def _merge_options(parser: argparse.ArgumentParser, ns: argparse.Namespace) -> dict:
    command = ns.command
    merged = {**_GLOBAL_DEFAULTS, **_DEFAULTS[command]}
    given = {
        k: v
        for k, v in vars(ns).items()
        if k not in ("command", "config") and k not in _POSITIONALS[command]
    }
    config_path = getattr(ns, "config", None)
    if config_path is not None:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            parser.error(f"config file {config_path}: invalid JSON ({exc.msg})")
        if not isinstance(cfg, dict):
            parser.error(f"config file {config_path}: top level must be an object")
        unknown = sorted(set(cfg) - set(merged))
        if unknown:
            parser.error(f"config file {config_path}: unknown keys {unknown}")
        merged.update(cfg)
    merged.update(given)
    return merged


def _read_matrix(path: str) -> np.ndarray:
    """Feature matrix: whitespace text (rows of numbers) or a WB01 file
    holding exactly one tensor."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == b"WB01":
        bank = encoder.load_weights(path)
        if len(bank.tensors) != 1:
            raise InvalidConfig(
                f"{path}: WB01 bank holds {len(bank.tensors)} tensors; need exactly one"
            )
        (tensor,) = bank.tensors.values()
        return np.asarray(tensor, dtype=np.float64)
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = [float(tok) for tok in line.split()]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: expected whitespace-separated numbers") from None
            if rows and len(row) != len(rows[0]):
                raise ParseError(f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(row)}")
            rows.append(row)
    if not rows:
        raise ParseError(f"{path}: no rows")
    return np.asarray(rows, dtype=np.float64)


def _box_lines(arg: str) -> list[str]:
    """A literal box string (starts with a bracket) or a file of box lines."""
    if arg.lstrip().startswith("["):
        return [arg]
    with open(arg, "r", encoding="utf-8") as fh:
        lines = [line.strip() for line in fh]
    return [line for line in lines if line]


def _cmd_tokenize(files: dict, opt: dict) -> dict:
    cloud = cloud_io.read_cloud(files["cloud"])
    seeds = fps(cloud, opt["n_seeds"], opt["start_index"])
    hoods = knn_group(cloud, seeds, opt["k"])
    return {
        "n_points": len(cloud),
        "n_seeds": opt["n_seeds"],
        "k": opt["k"],
        "seed_indices": list(seeds.indices),
        "neighborhoods": [
            {"centroid_index": h.centroid_index, "member_indices": list(h.member_indices)}
            for h in hoods
        ],
    }


def _cmd_encode(files: dict, opt: dict) -> dict:
    cloud = cloud_io.read_cloud(files["cloud"])
    config = encoder.EncoderConfig(
        variant=opt["variant"],
        mask_mode=opt["mask_mode"],
        mask_ratio=opt["mask_ratio"],
        mask_seed=opt["seed"],
        num_image_queries=opt["image_queries"],
        prompt_length=opt["prompt_length"],
        d_llm=opt["d_llm"],
        include_text_query=not opt["no_text_query"],
    )
    if opt["weights"]:
        bank = encoder.load_weights(opt["weights"])
    else:
        bank = encoder.WeightBank.generate(config, opt["seed"])
    if opt["dump_weights"]:
        encoder.dump_weights(bank, opt["dump_weights"])
    bundle, seeds, _ = encoder.bundle_from_cloud(
        cloud, bank, config, opt["n_seeds"], opt["k"], opt["start_index"]
    )
    assembled = encoder.assemble(bundle)
    q = config.prompt_length
    n_s = opt["n_seeds"]
    g1 = config.n_queries
    offsets = {}
    cursor = 0
    for name, rows in (
        ("prompt_ape", q), ("e_ape", n_s), ("prompt_local", q),
        ("e_local", n_s), ("prompt_global", q), ("e_global", g1),
    ):
        offsets[name] = [cursor, cursor + rows]
        cursor += rows
    payload = {
        "variant": opt["variant"],
        "n_points": len(cloud),
        "n_seeds": n_s,
        "k": opt["k"],
        "mask_mode": opt["mask_mode"],
        "length": int(assembled.shape[0]),
        "width": int(assembled.shape[1]),
        "sections": offsets,
        "seed_indices": list(seeds.indices),
        "sha256": hashlib.sha256(np.ascontiguousarray(assembled).tobytes()).hexdigest(),
    }
    if opt["dump_weights"]:
        payload["weights_dumped"] = opt["dump_weights"]
    return payload


def _cmd_match(files: dict, opt: dict) -> dict:
    a = _read_matrix(files["feats_a"])
    b = _read_matrix(files["feats_b"])
    assignment = matching.hungarian(matching.cosine_cost(a, b))
    return {"sigma": list(assignment.sigma), "total_cost": assignment.total_cost}


def _cmd_corrupt(files: dict, opt: dict) -> dict:
    cloud = cloud_io.read_cloud(files["cloud"])
    spec = corruptions.CorruptionSpec(
        kind=opt["kind"],
        sigma=opt["sigma"],
        theta=opt["theta"],
        fov_deg=opt["fov"],
        bins=opt["bins"],
        seed=opt["seed"],
        distance=opt["distance"],
    )
    payload: dict = {"kind": opt["kind"], "n_in": len(cloud)}
    if opt["kind"] == "single_view":
        kept = corruptions.single_view_indices(cloud, spec)
        out = cloud.take(kept)
        payload["kept_indices"] = [int(i) for i in kept]
    else:
        out = corruptions.apply_corruption(cloud, spec)
    payload["n_out"] = len(out)
    if opt["output"]:
        cloud_io.write_cloud(out, opt["output"])
        payload["output"] = opt["output"]
    else:
        payload["points"] = out.points.tolist()
        if out.colors is not None:
            payload["colors"] = out.colors.tolist()
    return payload


def _cmd_iou(files: dict, opt: dict) -> list:
    lines_a = _box_lines(files["box_a"])
    lines_b = _box_lines(files["box_b"])
    if len(lines_a) != len(lines_b):
        raise InvalidConfig(f"box counts differ: {len(lines_a)} vs {len(lines_b)}")
    return [boxes.iou(boxes.parse_box(a), boxes.parse_box(b)) for a, b in zip(lines_a, lines_b)]


def _cmd_reg(files: dict, opt: dict) -> dict:
    preds = _box_lines(files["predictions"])
    gts = _box_lines(files["ground_truths"])
    if len(preds) != len(gts):
        raise InvalidConfig(f"prediction and ground-truth counts differ: {len(preds)} vs {len(gts)}")
    accuracy = boxes.reg_accuracy(list(zip(preds, gts)), opt["threshold"])
    pairs = []
    for pred, gt in zip(preds, gts):
        gt_box = boxes.parse_box(gt)
        try:
            result = boxes.ground(boxes.parse_box(pred), gt_box, opt["threshold"])
        except PointkitError as exc:
            pairs.append({"iou": None, "hit": False, "error": type(exc).__name__})
            continue
        pairs.append({"iou": result.iou, "hit": result.hit, "error": None})
    return {
        "threshold": opt["threshold"],
        "total": len(pairs),
        "hits": sum(1 for p in pairs if p["hit"]),
        "accuracy": accuracy,
        "pairs": pairs,
    }


def _cmd_eval(files: dict, opt: dict) -> tuple[bytes, int]:
    records = evalkit.ingest(files["qa"])
    if opt["judge"] == "stub":
        judge: judges.Judge = judges.StubJudge()
    else:
        judge = judges.HttpJudge(endpoint=opt["endpoint"], model=opt["model"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        scores, unscored = evalkit.run_eval(records, judge, opt["k"], opt["max_workers"])
    for w in caught:
        print(f"pointkit: warning: {w.message}", file=sys.stderr)
    report = evalkit.aggregate(scores, records, judge.name, opt["k"])
    rendered = evalkit.emit_report(report, opt["format"])
    return rendered, (1 if unscored else 0)


def _cmd_report(files: dict, opt: dict) -> bytes:
    with open(files["report_file"], "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{files['report_file']}: invalid JSON ({exc.msg})") from None
    report = _report_from_dict(files["report_file"], raw)
    return evalkit.emit_report(report, opt["format"])


def _report_from_dict(path: str, raw) -> evalkit.Report:
    required = ("total", "per_capability", "counts", "judge", "k_rounds", "answered", "total_records")
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: report must be a JSON object")
    missing = [k for k in required if k not in raw]
    if missing:
        raise SchemaError(f"{path}: missing fields {missing}")
    unknown = sorted(set(raw) - set(required))
    if unknown:
        raise SchemaError(f"{path}: unknown fields {unknown}")
    for field in ("per_capability", "counts"):
        if not isinstance(raw[field], dict) or set(raw[field]) != set(evalkit.CAPABILITIES):
            raise SchemaError(f"{path}: {field} must map exactly {list(evalkit.CAPABILITIES)}")
    return evalkit.Report(
        total=raw["total"],
        per_capability={c: raw["per_capability"][c] for c in evalkit.CAPABILITIES},
        counts={c: raw["counts"][c] for c in evalkit.CAPABILITIES},
        judge=raw["judge"],
        k_rounds=raw["k_rounds"],
        answered=raw["answered"],
        total_records=raw["total_records"],
    )


_COMMANDS = {
    "tokenize": _cmd_tokenize,
    "encode": _cmd_encode,
    "match": _cmd_match,
    "corrupt": _cmd_corrupt,
    "iou": _cmd_iou,
    "reg": _cmd_reg,
    "eval": _cmd_eval,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    command = ns.command
    opt = _merge_options(parser, ns)
    files = {name: getattr(ns, name) for name in _POSITIONALS[command]}
    exit_code = 0
    try:
        result = _COMMANDS[command](files, opt)
    except PointkitError as exc:
        print(f"pointkit: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"pointkit: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if isinstance(result, tuple):
        result, exit_code = result
    if isinstance(result, bytes):
        rendered = result
    else:
        rendered = (json.dumps(result, indent=2) + "\n").encode("utf-8")
    # corrupt with --output already wrote its artifact (the cloud); every
    # other command redirects its rendered result
    if opt.get("output") and command != "corrupt":
        Path(opt["output"]).write_bytes(rendered)
    else:
        sys.stdout.buffer.write(rendered)
        sys.stdout.buffer.flush()
    return exit_code


if __name__ == "__main__":
    raise SystemExit(main())
