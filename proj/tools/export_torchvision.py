#!/usr/bin/env python3
"""Export torchvision ImageNet classifiers as lcam backbone weight files.

Writes <cache>/<model>.lcw, where <cache> is $LCAM_MODEL_CACHE, else
$XDG_CACHE_HOME/lcam, else ~/.cache/lcam. Parameter names follow the
torchvision state_dict, which is what the lcam vgg16 and resnet50
architectures expect.

    python3 tools/export_torchvision.py vgg16
    python3 tools/export_torchvision.py resnet50 --out /data/resnet50.lcw

Pretrained weights are downloaded by torchvision on first use. --random
exports an untrained network, useful only to check the file format offline.
"""

import argparse
import hashlib
import json
import os
import struct
import sys
from pathlib import Path

MAGIC = b"LCAMARC\0"
FORMAT = 1


def default_cache() -> Path:
    if os.environ.get("LCAM_MODEL_CACHE"):
        return Path(os.environ["LCAM_MODEL_CACHE"])
    if os.environ.get("XDG_CACHE_HOME"):
        return Path(os.environ["XDG_CACHE_HOME"]) / "lcam"
    return Path.home() / ".cache" / "lcam"


def load_model(name: str, random: bool):
    import torchvision

    if name == "vgg16":
        weights = None if random else torchvision.models.VGG16_Weights.IMAGENET1K_V1
        return torchvision.models.vgg16(weights=weights)
    if name == "resnet50":
        weights = None if random else torchvision.models.ResNet50_Weights.IMAGENET1K_V1
        return torchvision.models.resnet50(weights=weights)
    raise SystemExit(f"unknown model '{name}' (vgg16, resnet50)")


def write_archive(path: Path, meta: dict, arrays, dtype: str) -> None:
    import numpy as np

    np_dtype = np.dtype("<f4") if dtype == "f32" else np.dtype("<f8")
    table, chunks, offset = [], [], 0
    for name, array in arrays:
        data = np.ascontiguousarray(array, dtype=np_dtype).tobytes()
        table.append({"name": name, "dtype": dtype, "shape": list(array.shape),
                      "offset": offset, "bytes": len(data)})
        chunks.append(data)
        offset += len(data)
    header = json.dumps({"meta": meta, "arrays": table}).encode()
    body = MAGIC + struct.pack("<IQ", FORMAT, len(header)) + header + b"".join(chunks)
    digest = hashlib.sha256(body).hexdigest().encode()
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(body + digest)
    tmp.replace(path)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("model", choices=["vgg16", "resnet50"])
    ap.add_argument("--out", type=Path, help="output file (default: model cache)")
    ap.add_argument("--dtype", choices=["f32", "f64"], default="f32")
    ap.add_argument("--random", action="store_true", help="export untrained weights")
    args = ap.parse_args(argv)

    model = load_model(args.model, args.random).eval()
    arrays = [(k, v.detach().cpu().numpy()) for k, v in model.state_dict().items()
              if not k.endswith("num_batches_tracked")]
    out = args.out or default_cache() / f"{args.model}.lcw"
    meta = {"kind": "backbone_weights", "model_id": args.model,
            "source": "torchvision" + (" (random init)" if args.random else "")}
    write_archive(out, meta, arrays, args.dtype)
    print(f"wrote {out} ({len(arrays)} arrays)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
