"""Continuous traversal-cost field built from isotropic Gaussian bumps.

The field is a sum of normalized bivariate densities over the unit square::

    C(p) = scale * sum_m exp(-|p - mu_m|^2 / (2 sigma_m)) / (2 pi sigma_m)

``sigma_m`` is a variance (the diagonal of the covariance matrix), not a
standard deviation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "GaussianComponent",
    "CostField",
    "GridField",
    "GridParseError",
    "sample_field",
    "rasterize",
    "save_grid",
    "load_grid",
    "load_field",
    "import_pgm",
]


class GridParseError(ValueError):
    """Raised when a grid CSV, its sidecar or a PGM file cannot be parsed."""


@dataclass(frozen=True)
class GaussianComponent:
    mu: tuple[float, float]
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        mx, my = self.mu
        if not (0.0 <= mx <= 1.0 and 0.0 <= my <= 1.0):
            raise ValueError(f"mean {self.mu} lies outside the unit square")


@dataclass(frozen=True)
class CostField:
    """Immutable sum-of-Gaussians field; safe to share between workers.

    An empty component list is allowed and gives the identically-zero field,
    which tests use as a fixture. ``scale`` multiplies every component.
    """

    components: tuple[GaussianComponent, ...]
    seed: int = 0
    scale: float = 1.0
    _mu: np.ndarray = field(init=False, repr=False, compare=False)
    _sig: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if self.scale < 0:
            raise ValueError("scale must be non-negative")
        mu = np.array([c.mu for c in comps], dtype=float).reshape(-1, 2)
        sig = np.array([c.sigma for c in comps], dtype=float)
        object.__setattr__(self, "_mu", mu)
        object.__setattr__(self, "_sig", sig)

    @classmethod
    def zero(cls) -> "CostField":
        return cls(components=())

    @classmethod
    def from_arrays(cls, mu, sigma, seed: int = 0, scale: float = 1.0) -> "CostField":
        mu = np.asarray(mu, dtype=float).reshape(-1, 2)
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (len(mu),))
        comps = tuple(GaussianComponent((float(a), float(b)), float(s)) for (a, b), s in zip(mu, sigma))
        return cls(components=comps, seed=seed, scale=scale)

    def __len__(self):
        return len(self.components)

    # -- evaluation ---------------------------------------------------------

    def _terms(self, p):
        """Per-component weighted densities and offsets for points ``p`` (..., 2)."""
        p = np.asarray(p, dtype=float)
        d = p[..., None, :] - self._mu  # (..., M, 2)
        r2 = np.einsum("...i,...i->...", d, d)
        dens = self.scale * np.exp(-r2 / (2.0 * self._sig)) / (2.0 * np.pi * self._sig)
        return d, dens

    def eval(self, p):
        """Field value at ``p``; accepts a single point or an (..., 2) array."""
        if not self.components:
            return np.zeros(np.shape(p)[:-1]) if np.ndim(p) > 1 else 0.0
        _, dens = self._terms(p)
        out = dens.sum(axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    __call__ = eval

    def eval_grid(self, xs, ys) -> np.ndarray:
        """Values on the tensor grid ``xs x ys`` (shape ``(len(xs), len(ys))``).

        Each isotropic Gaussian factors into an x and a y profile, so the whole
        grid is a single ``(nx, M) @ (M, ny)`` product instead of ``nx * ny * M``
        exponentials.
        """
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if not self.components:
            return np.zeros((len(xs), len(ys)))
        gx = np.exp(-((xs[:, None] - self._mu[:, 0]) ** 2) / (2.0 * self._sig))
        gy = np.exp(-((ys[:, None] - self._mu[:, 1]) ** 2) / (2.0 * self._sig))
        return (gx * (self.scale / (2.0 * np.pi * self._sig))) @ gy.T

    def grad(self, p):
        """Analytic gradient, shape (..., 2)."""
        p = np.asarray(p, dtype=float)
        if not self.components:
            return np.zeros(p.shape)
        d, dens = self._terms(p)
        return -np.einsum("...m,...mi->...i", dens / self._sig, d)

    def hessian(self, p):
        """Analytic Hessian, shape (..., 2, 2); symmetric by construction."""
        p = np.asarray(p, dtype=float)
        if not self.components:
            return np.zeros(p.shape + (2,))
        d, dens = self._terms(p)
        w = dens / self._sig
        outer = np.einsum("...mi,...mj,...m->...ij", d, d, w / self._sig)
        return outer - w.sum(axis=-1)[..., None, None] * np.eye(2)

    def eval_grad_hess(self, p):
        """Value, gradient and Hessian in one pass over the components."""
        p = np.asarray(p, dtype=float)
        if not self.components:
            return np.zeros(p.shape[:-1]), np.zeros(p.shape), np.zeros(p.shape + (2,))
        d, dens = self._terms(p)
        w = dens / self._sig
        val = dens.sum(axis=-1)
        g = -np.einsum("...m,...mi->...i", w, d)
        h = np.einsum("...mi,...mj,...m->...ij", d, d, w / self._sig)
        h = h - w.sum(axis=-1)[..., None, None] * np.eye(2)
        return val, g, h

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "scale": self.scale,
            "components": [{"mu": list(c.mu), "sigma": c.sigma} for c in self.components],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CostField":
        comps = tuple(GaussianComponent(tuple(c["mu"]), float(c["sigma"])) for c in data["components"])
        return cls(components=comps, seed=int(data.get("seed", 0)), scale=float(data.get("scale", 1.0)))


def sample_field(m: int, sigma: float | Sequence[float], seed: int, scale: float = 1.0) -> CostField:
    """Draw ``m`` component means uniformly from the unit square.

    ``sigma`` is either one variance shared by all components or a ``(lo, hi)``
    range from which each variance is drawn uniformly.
    """
    if int(m) != m or m < 1:
        raise ValueError(f"component count must be a positive integer, got {m}")
    rng = np.random.default_rng(seed)
    mu = rng.uniform(0.0, 1.0, size=(int(m), 2))
    if np.ndim(sigma) == 0:
        if not sigma > 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        sig = np.full(int(m), float(sigma))
    else:
        lo, hi = (float(s) for s in sigma)
        if not (0 < lo <= hi):
            raise ValueError(f"sigma range must satisfy 0 < lo <= hi, got {sigma}")
        sig = rng.uniform(lo, hi, size=int(m))
    return CostField.from_arrays(mu, sig, seed=seed, scale=scale)


@dataclass
class GridField:
    """Field sampled at the cell centers of an ``nx`` by ``ny`` grid on [0,1]^2.

    ``values[i, j]`` is the cost at ``((i + 0.5) / nx, (j + 0.5) / ny)``.
    """

    values: np.ndarray
    seed: int = 0
    extent: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        x0, x1, y0, y1 = self.extent
        return x0 + (i + 0.5) * (x1 - x0) / self.nx, y0 + (j + 0.5) * (y1 - y0) / self.ny


def rasterize(cf: CostField, nx: int, ny: int) -> GridField:
    if nx < 2 or ny < 2:
        raise ValueError("grid must be at least 2x2")
    xs = (np.arange(nx) + 0.5) / nx
    ys = (np.arange(ny) + 0.5) / ny
    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)
    # chunk over rows to keep the (nx, ny, M) temporary small
    vals = np.empty((nx, ny))
    step = max(1, 200_000 // max(1, ny * max(1, len(cf))))
    for i in range(0, nx, step):
        vals[i : i + step] = cf.eval(pts[i : i + step])
    return GridField(values=vals, seed=cf.seed)


def _sidecar(path: Path) -> Path:
    return path.with_suffix(path.suffix + ".json") if path.suffix != ".json" else path


def save_grid(grid: GridField, path, field: CostField | None = None) -> None:
    """Write row-major values as CSV (one grid row per line) plus a JSON sidecar.

    When the analytic ``field`` is given its components are stored in the
    sidecar too, so planners can recover the exact twice-differentiable field.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        for row in grid.values:
            w.writerow([repr(float(v)) for v in row])
    meta = {"nx": grid.nx, "ny": grid.ny, "extent": list(grid.extent), "seed": grid.seed}
    if field is not None:
        meta["field"] = field.to_dict()
    _sidecar(path).write_text(json.dumps(meta, indent=2))


def load_grid(path) -> GridField:
    path = Path(path)
    side = _sidecar(path)
    if not side.exists():
        raise GridParseError(f"missing sidecar file {side}")
    try:
        meta = json.loads(side.read_text())
        nx, ny = int(meta["nx"]), int(meta["ny"])
        extent = tuple(float(v) for v in meta.get("extent", (0, 1, 0, 1)))
        seed = int(meta.get("seed", 0))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise GridParseError(f"malformed sidecar {side}: {exc}") from exc

    vals = np.empty((nx, ny))
    n_rows = 0
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if n_rows >= nx:
                raise GridParseError(f"{path}:{lineno}: more than nx={nx} rows")
            if len(row) != ny:
                raise GridParseError(f"{path}:{lineno}: expected {ny} values, got {len(row)}")
            try:
                vals[n_rows] = [float(v) for v in row]
            except ValueError as exc:
                raise GridParseError(f"{path}:{lineno}: {exc}") from exc
            n_rows += 1
    if n_rows != nx:
        raise GridParseError(f"{path}:{n_rows + 1}: file truncated, expected {nx} rows, got {n_rows}")
    return GridField(values=vals, seed=seed, extent=extent)


def load_field(path) -> CostField:
    """The analytic field stored in a grid sidecar (or in a bare field JSON)."""
    path = Path(path)
    side = _sidecar(path)
    if not side.exists():
        raise GridParseError(f"missing sidecar file {side}")
    try:
        meta = json.loads(side.read_text())
        return CostField.from_dict(meta["field"] if "field" in meta else meta)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise GridParseError(f"{side}: no analytic field record ({exc})") from exc


def import_pgm(path) -> GridField:
    """Read a binary (P5) or ASCII (P2) grayscale PGM; pixel/maxval becomes cost.

    Image row 0 is the top of the workspace, so rows are flipped onto ``y``.
    """
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    # header: magic, width, height, maxval, with '#' comments
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise GridParseError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise GridParseError(f"{path}: bad PGM header: {exc}") from exc
    if magic == b"P5":
        pos += 1
        dtype = ">u2" if maxval > 255 else "u1"
        count = width * height
        pix = np.frombuffer(data, dtype=dtype, count=count, offset=pos) if len(data) - pos >= count * np.dtype(dtype).itemsize else None
        if pix is None:
            raise GridParseError(f"{path}: pixel data truncated")
    elif magic == b"P2":
        try:
            pix = np.array([int(t) for t in data[pos:].split()], dtype=float)
        except ValueError as exc:
            raise GridParseError(f"{path}: bad pixel value: {exc}") from exc
        if pix.size != width * height:
            raise GridParseError(f"{path}: expected {width * height} pixels, got {pix.size}")
    else:
        raise GridParseError(f"{path}: unsupported PGM magic {magic!r}")
    img = np.asarray(pix, dtype=float).reshape(height, width) / maxval
    return GridField(values=img[::-1].T.copy())
