"""Image file I/O: 8-bit PNG/PGM via Pillow, raw float32 via .npy.
All frames are float arrays in [0,1]."""

import numpy as np
from PIL import Image


def load_image(path):
    p = str(path)
    if p.endswith(".npy"):
        arr = np.load(p).astype(np.float64)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        return np.clip(arr, 0.0, 1.0)
    img = Image.open(p)
    if img.mode in ("RGB", "RGBA", "P"):
        img = img.convert("RGB")
    elif img.mode != "L":
        img = img.convert("L")
    arr = np.asarray(img, dtype=np.float64) / 255.0
    return arr


def save_image(path, frame):
    p = str(path)
    arr = np.asarray(frame, dtype=np.float64)
    if p.endswith(".npy"):
        np.save(p, arr.astype(np.float32))
        return
    u8 = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    mode = "L" if u8.ndim == 2 else "RGB"
    Image.fromarray(u8, mode=mode).save(p)
