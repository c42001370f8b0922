"""Independent reference computations for the visual engine.

No ptkit import.  Embedding (per-cell loop over fractional pixel
coverage), the shift transform (per-pixel loop), and the corpus
threshold calibration (separable-gap midpoint) are all rebuilt here from
scratch.  Run once; outputs are frozen under tests/golden/.
"""

import json
import sys
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))
from corpus_util import VARIANT_SPECS, brand_names, load_brand, noise_seed  # noqa: E402

GOLDEN = HERE.parent / "golden"


def oracle_gray(img):
    return 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]


def oracle_resize32(gray):
    h, w = gray.shape
    out = np.zeros((32, 32))
    sy, sx = h / 32.0, w / 32.0
    for i in range(32):
        for j in range(32):
            y0, y1 = i * sy, (i + 1) * sy
            x0, x1 = j * sx, (j + 1) * sx
            acc = 0.0
            for r in range(int(y0), min(int(np.ceil(y1)), h)):
                oy = min(y1, r + 1) - max(y0, r)
                if oy <= 0:
                    continue
                for c in range(int(x0), min(int(np.ceil(x1)), w)):
                    ox = min(x1, c + 1) - max(x0, c)
                    if ox > 0:
                        acc += oy * ox * gray[r, c]
            out[i, j] = acc / (sy * sx)
    return out


def oracle_embed(img):
    small = oracle_resize32(oracle_gray(img))
    centered = small - small.mean()
    return (centered / np.linalg.norm(centered)).ravel()


def oracle_shift(img, dx, dy, fill=255.0):
    h, w = img.shape[:2]
    out = np.full_like(img, fill)
    for y in range(h):
        for x in range(w):
            sy, sx = y - dy, x - dx
            if 0 <= sy < h and 0 <= sx < w:
                out[y, x] = img[sy, sx]
    return out


def oracle_variant(img, spec, seed):
    kind = spec[0]
    if kind == "shift":
        return oracle_shift(img, spec[1], spec[2])
    if kind in ("brighten", "darken"):
        return np.clip(img * spec[1], 0.0, 255.0)
    if kind == "noise":
        rng = np.random.default_rng(seed)
        return np.clip(img + rng.normal(0.0, spec[1], img.shape), 0.0, 255.0)
    raise ValueError(kind)


def main():
    brands = brand_names()
    images = {b: load_brand(b) for b in brands}

    # golden embedding and pair distance
    first, second = brands[0], brands[1]
    emb_first = oracle_embed(images[first])
    pair_distance = float(np.linalg.norm(emb_first - oracle_embed(images[second])))

    # golden shifted fixture (mirrors the shift(-200, 50) example)
    from PIL import Image
    wide = np.asarray(
        Image.open(HERE.parent / "fixtures" / "brands" / "wide_fixture.png").convert("RGB"),
        dtype=np.float64,
    )
    shifted = oracle_shift(wide, -200, 50)

    # calibration: positives = variant vs own original, negatives = cross pairs
    positives, negatives = [], []
    originals = {b: oracle_embed(images[b]) for b in brands}
    for b in brands:
        for spec in VARIANT_SPECS:
            var = oracle_variant(images[b], spec, noise_seed(b))
            positives.append(float(np.linalg.norm(oracle_embed(var) - originals[b])))
    for i, a in enumerate(brands):
        for b in brands[i + 1:]:
            negatives.append(float(np.linalg.norm(originals[a] - originals[b])))

    max_pos, min_neg = max(positives), min(negatives)
    assert max_pos < min_neg, f"corpus not separable: {max_pos} vs {min_neg}"
    threshold = (max_pos + min_neg) / 2

    np.savez(
        GOLDEN / "visual_golden.npz",
        embedding=emb_first,
        shifted_fixture=shifted,
    )
    summary = {
        "embedding_brand": first,
        "distance_pair": [first, second],
        "pair_distance": pair_distance,
        "max_positive": max_pos,
        "min_negative": min_neg,
        "calibrated_threshold": threshold,
        "positives": len(positives),
        "negatives": len(negatives),
    }
    (GOLDEN / "visual_golden.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
