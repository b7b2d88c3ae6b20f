"""Command line entry points mirroring the op names.

    sampler-adapter ttd      --model m.py --image img.npy --out stack.npy --seed 3
    sampler-adapter tta      --model m.py --image img.npy --transforms t.json --out raw.npy --seed 3
    sampler-adapter align    --raw raw.npy --out tta.npy
    sampler-adapter ensemble --model a.py --model b.py --image img.npy --out stack.npy
    sampler-adapter convert  --source masks/ --out cohort/

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from raterlens import InvariantError, ManifestError

from .dataset import DatasetError, convert_dataset
from .models import ModelError, ModelHandle
from .runners import DEFAULT_SAMPLES, align_stack, run_ensemble, run_ttd, run_tta


def _parse_config(pairs: list[str]) -> dict:
    config = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ModelError(f"config entries look like key=value, got {pair!r}")
        try:
            config[key] = json.loads(value)
        except json.JSONDecodeError:
            config[key] = value
    return config


def _handle(args, stochastic: bool = False) -> ModelHandle:
    path, _, entry = args.model.partition(":")
    return ModelHandle(
        path=Path(path),
        entry=entry or "build_model",
        config=_parse_config(args.config),
        supports_dropout=stochastic,
    )


def _load_image(path: str) -> np.ndarray:
    image = np.load(path)
    if image.ndim != 2:
        raise InvariantError(f"image {path} is not 2D: shape {image.shape}")
    return image


def _add_model_args(p, multiple: bool = False):
    if multiple:
        p.add_argument("--model", action="append", required=True,
                       help="model file, optionally path.py:entry (repeatable)")
    else:
        p.add_argument("--model", required=True, help="model file, optionally path.py:entry")
    p.add_argument("--config", action="append", default=[], metavar="KEY=VALUE",
                   help="keyword passed to the model factory (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sampler-adapter",
        description="run TTD/TTA/ensemble inference and write core-format sample stacks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ttd", help="test-time dropout sampling")
    _add_model_args(p)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("tta", help="test-time augmentation sampling (raw stack + sidecar)")
    _add_model_args(p)
    p.add_argument("--image", required=True)
    p.add_argument("--transforms", required=True, help="JSON from raterlens sample_transforms")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True,
                   help="master seed the transforms file was generated with")

    p = sub.add_parser("align", help="invert a raw TTA stack onto the original grid")
    p.add_argument("--raw", required=True)
    p.add_argument("--transforms", default=None,
                   help="defaults to the sidecar next to the raw stack")
    p.add_argument("--out", required=True)

    p = sub.add_parser("ensemble", help="one sample per model")
    _add_model_args(p, multiple=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0,
                   help="only consumed if ensemble members are stochastic")

    p = sub.add_parser("convert", help="per-rater mask directory to core cohort")
    p.add_argument("--source", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--class-names", default=None,
                   help="comma-separated; inferred from the masks if omitted")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "ttd":
            out = run_ttd(_handle(args, stochastic=True), _load_image(args.image),
                          args.out, n=args.n, seed=args.seed)
        elif args.command == "tta":
            out = run_tta(_handle(args), _load_image(args.image),
                          args.transforms, args.out, seed=args.seed)
        elif args.command == "align":
            out = align_stack(args.raw, args.out, args.transforms)
        elif args.command == "ensemble":
            handles = []
            for spec in args.model:
                path, _, entry = spec.partition(":")
                handles.append(ModelHandle(path=Path(path), entry=entry or "build_model",
                                           config=_parse_config(args.config)))
            out = run_ensemble(handles, _load_image(args.image), args.out, seed=args.seed)
        elif args.command == "convert":
            names = args.class_names.split(",") if args.class_names else None
            manifest = convert_dataset(args.source, args.out, class_names=names)
            out = Path(args.out) / "manifest.json"
            print(f"{manifest.num_images} images, {manifest.num_raters} raters, "
                  f"{manifest.num_classes} classes")
        else:  # pragma: no cover - argparse enforces the choices
            return 2
    except (ModelError, DatasetError, InvariantError, ManifestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
