"""Regenerates the fixture reflectance spectra in this directory.

Curves are built from a few smooth features (visible level, red edge, water
absorption bands, linear trends) on a 10 nm grid from 400 to 2500 nm.
"""
import sys

import numpy as np

WL = np.arange(400.0, 2501.0, 10.0)


def bump(center, width):
    return np.exp(-0.5 * ((WL - center) / width) ** 2)


def edge(center, width):
    return 1.0 / (1.0 + np.exp(-(WL - center) / width))


def needle():
    r = 0.05 + 0.05 * bump(550, 35) - 0.015 * bump(670, 25)
    r += 0.40 * edge(715, 16)
    r -= 0.07 * edge(1300, 80)
    r -= 0.04 * bump(970, 35) + 0.05 * bump(1190, 45)
    r -= 0.17 * bump(1450, 70) + 0.24 * bump(1940, 90)
    r -= 0.18 * edge(2150, 170)
    return r


def bark():
    r = 0.06 + 0.00005 * (WL - 400)
    r += 0.22 * edge(705, 22)
    r -= 0.03 * edge(1300, 80)
    r -= 0.02 * bump(1190, 50)
    r -= 0.10 * bump(1450, 75) + 0.15 * bump(1940, 95)
    r -= 0.10 * edge(2150, 170)
    return r


def soil():
    r = 0.25 + 0.36 * (1.0 - np.exp(-(WL - 400) / 450.0))
    r -= 0.05 * bump(1420, 60) + 0.07 * bump(1920, 70) + 0.04 * bump(2200, 40)
    return r


def spectralon():
    return 0.99 - 0.01 * (WL > 2300) * (WL - 2300) / 200.0


def write(path, columns):
    names = list(columns)
    with open(path, "w") as f:
        f.write("wavelength_nm," + ",".join(names) + "\n")
        for i, w in enumerate(WL):
            f.write("%g," % w + ",".join("%.6f" % columns[n][i] for n in names) + "\n")


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "."
    cols = {"needle": needle(), "bark": bark(), "soil": soil()}
    write(out + "/fixture_spectra.csv", cols)
    cols["spectralon"] = spectralon()
    write(out + "/fixture_spectra_spectralon.csv", cols)
