"""Brute-force reference implementations shared by the unit and acceptance tests.

Each one loops over plain Python floats and shares no code with the package.
"""
import math

import numpy as np

C1 = (0.01 * 255) ** 2
C2 = (0.03 * 255) ** 2


def gray_loop(img):
    h, w = img.shape[:2]
    out = [[0.0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            r, g, b = (float(v) for v in img[y, x])
            out[y][x] = 0.299 * r + 0.587 * g + 0.114 * b
    return out


def mse_loop(a, b):
    total, n = 0.0, 0
    for va, vb in zip(np.asarray(a, float).ravel().tolist(), np.asarray(b, float).ravel().tolist()):
        total += (va - vb) ** 2
        n += 1
    return total / n


def psnr_loop(a, b):
    m = mse_loop(a, b)
    return math.inf if m == 0 else 10 * math.log10(255.0 ** 2 / m)


def sigma_loop(img):
    vals = [v for row in gray_loop(img) for v in row]
    mean = sum(vals) / len(vals)
    return math.sqrt(sum((v - mean) ** 2 for v in vals) / len(vals))


def ssim_loop(a, b):
    """Windowed SSIM evaluated window by window with explicit sums."""
    ga, gb = gray_loop(a), gray_loop(b)
    k = [math.exp(-((i - 5) ** 2) / (2 * 1.5 ** 2)) for i in range(11)]
    weights = [[k[i] * k[j] for j in range(11)] for i in range(11)]
    norm = sum(sum(r) for r in weights)
    weights = [[w / norm for w in r] for r in weights]
    h, w = len(ga), len(ga[0])
    values = []
    for y in range(h - 10):
        for x in range(w - 10):
            mx = my = sxx = syy = sxy = 0.0
            for i in range(11):
                for j in range(11):
                    wt = weights[i][j]
                    va, vb = ga[y + i][x + j], gb[y + i][x + j]
                    mx += wt * va
                    my += wt * vb
            for i in range(11):
                for j in range(11):
                    wt = weights[i][j]
                    da, db = ga[y + i][x + j] - mx, gb[y + i][x + j] - my
                    sxx += wt * da * da
                    syy += wt * db * db
                    sxy += wt * da * db
            values.append(((2 * mx * my + C1) * (2 * sxy + C2)) / ((mx * mx + my * my + C1) * (sxx + syy + C2)))
    return sum(values) / len(values)



def d_loss_loop(real, fake):
    r = [float(v) for v in np.ravel(real)]
    f = [float(v) for v in np.ravel(fake)]
    return 0.5 * sum((v - 1) ** 2 for v in r) / len(r) + 0.5 * sum(v * v for v in f) / len(f)


def g_loss_loop(fake):
    f = [float(v) for v in np.ravel(fake)]
    return 0.5 * sum((v - 1) ** 2 for v in f) / len(f)


def l1_loop(a, b):
    pairs = list(zip(np.ravel(a).tolist(), np.ravel(b).tolist()))
    return sum(abs(x - y) for x, y in pairs) / len(pairs)


