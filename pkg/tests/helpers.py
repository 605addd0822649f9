import numpy as np
from PIL import Image

# gradient-check tolerances per working dtype: (fd step, rtol)
FD_SINGLE = (1e-3, 1e-3)
FD_DOUBLE = (1e-6, 1e-5)


def make_corpus(root, spec, size=12, fmt="PNG"):
    """Write tiny random images under root/<family>/: spec = {family: count}."""
    rng = np.random.default_rng(99)
    for family, count in spec.items():
        d = root / family
        d.mkdir(parents=True)
        for i in range(count):
            arr = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
            ext = "jpg" if fmt == "JPEG" else "png"
            Image.fromarray(arr).save(d / f"{family}_{i:03d}.{ext}", format=fmt)
    return root


def make_separable_corpus(root, families, per_family, size=16):
    """Corpus a tiny model can actually learn: one color channel per family."""
    rng = np.random.default_rng(7)
    for ci, family in enumerate(families):
        d = root / family
        d.mkdir(parents=True)
        for i in range(per_family):
            arr = rng.integers(0, 60, size=(size, size, 3), dtype=np.uint8)
            arr[:, :, ci % 3] = rng.integers(180, 256, size=(size, size),
                                             dtype=np.uint8)
            Image.fromarray(arr).save(d / f"{family}_{i:03d}.png", format="PNG")
    return root


def assert_close(actual, expected, rtol, atol=None, msg=""):
    """Relative comparison with an absolute floor tied to the scale."""
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    if atol is None:
        atol = rtol * max(1.0, float(np.abs(expected).max()) if expected.size else 1.0)
    np.testing.assert_allclose(actual, expected, rtol=rtol, atol=atol, err_msg=msg)
