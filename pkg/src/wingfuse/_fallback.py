"""Pure-Python versions of the compiled loops in ``_kernels.pyx``."""

import numpy as np


def first_order_sections(x, coeffs):
    out = [float(v) for v in np.asarray(x, dtype=np.float64)]
    for b0, b1, a1 in np.asarray(coeffs, dtype=np.float64).reshape(-1, 3).tolist():
        xp = 0.0
        yp = 0.0
        for i, xi in enumerate(out):
            yp = b0 * xi + b1 * xp - a1 * yp
            xp = xi
            out[i] = yp
    return np.asarray(out, dtype=np.float64)


def falling_crossings(beam, threshold, refractory_samples):
    b = np.asarray(beam, dtype=np.float64).tolist()
    out = []
    last = -1
    for i in range(1, len(b)):
        if b[i] < threshold and b[i - 1] >= threshold:
            if last < 0 or i - last >= refractory_samples:
                out.append(i)
                last = i
    return np.asarray(out, dtype=np.int64)
