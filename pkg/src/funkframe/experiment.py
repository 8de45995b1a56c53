"""Configuration, file formats and the forward/reconstruct/experiment pipelines."""

from __future__ import annotations

import configparser
import csv
import dataclasses
import json
import logging
import os
import re
import time
import zlib
from dataclasses import dataclass

import numpy as np

from .frame import (
    DEFAULT_L_MAX,
    DEFAULT_THRESHOLD,
    RESIDUAL_WARN,
    build_frame_table,
    check_norm_bound,
    dual_frame,
    encode_table,
    load_table,
    reconstruct_audited,
)
from .funk_radon import DEFAULT_M_CIRCLE
from .harmonics import NodeFunction, analysis, even_projection, odd_part_norm, synthesis, synthesis_values
from .phantom import (
    NoiseSpec,
    add_noise,
    default_phantom,
    forward_data,
    load_phantom,
    relative_error,
    sample,
)
from .sobolev import FilterSpec
from .sphere import (
    FormatError,
    InvalidInputError,
    QuadratureGrid,
    load_design,
    product_grid,
)

log = logging.getLogger(__name__)

FILTERS = ("none", "tikhonov", "exact")


@dataclass
class ExperimentConfig:
    N: int = 25
    l_max: int = DEFAULT_L_MAX
    n_theta: int | None = None
    n_lambda: int | None = None
    design: str | None = None
    m_circle: int = DEFAULT_M_CIRCLE
    phantom: str | None = None
    noise_level: float = 0.0
    seed: int = 0
    filter: str = "none"
    alpha: float = 0.0
    alphas: tuple = ()
    pinv_threshold: float = DEFAULT_THRESHOLD
    output_dir: str = "out"

    def validate(self):
        if self.N < 1:
            raise InvalidInputError("N must be >= 1")
        if self.l_max < 0:
            raise InvalidInputError("l_max must be >= 0")
        if self.m_circle < 4:
            raise InvalidInputError("m_circle must be >= 4")
        if self.noise_level < 0:
            raise InvalidInputError("noise_level must be >= 0")
        if self.filter not in FILTERS:
            raise InvalidInputError(f"filter must be one of {FILTERS}")
        if self.alpha < 0 or any(a < 0 for a in self.alphas):
            raise InvalidInputError("alpha values must be >= 0")
        if not 0 < self.pinv_threshold < 1:
            raise InvalidInputError("pinv_threshold must lie in (0, 1)")
        for n in (self.n_theta, self.n_lambda):
            if n is not None and n < 1:
                raise InvalidInputError("grid sizes must be >= 1")
        return self

    def resolved(self):
        """Copy with grid defaults filled in (exact to degree ``2 * l_max``)."""
        cfg = dataclasses.replace(self)
        if cfg.design is None:
            if cfg.n_theta is None:
                cfg.n_theta = cfg.l_max + 1
            if cfg.n_lambda is None:
                cfg.n_lambda = 2 * cfg.l_max + 2
        return cfg.validate()

    def as_dict(self):
        d = dataclasses.asdict(self)
        d["alphas"] = list(self.alphas)
        return d

    def make_grid(self):
        if self.design:
            return load_design(self.design)
        cfg = self.resolved()
        return product_grid(cfg.n_theta, cfg.n_lambda)

    def make_phantom(self):
        return load_phantom(self.phantom) if self.phantom else default_phantom()

    def filter_spec(self):
        if self.filter == "none":
            return None
        if self.filter == "exact":
            return FilterSpec("exact_inverse")
        return FilterSpec("tikhonov", self.alpha)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name, value):
    if name not in _FIELDS:
        raise InvalidInputError(f"unknown config key {name!r}")
    if value is None:
        return None
    if name == "alphas":
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split() if v]
        return tuple(float(v) for v in value)
    if name in ("N", "l_max", "n_theta", "n_lambda", "m_circle", "seed"):
        return int(value)
    if name in ("noise_level", "alpha", "pinv_threshold"):
        return float(value)
    value = str(value)
    if name in ("design", "phantom") and value.lower() in ("", "none", "default"):
        return None
    return value


def load_config(path=None, overrides=None):
    """Read a flat ``key = value`` file and apply `overrides` (a dict)."""
    values = {}
    if path:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_string("[config]\n" + fh.read())
        except (OSError, configparser.Error) as exc:
            raise InvalidInputError(f"cannot read config {path}: {exc}") from exc
        values.update(parser["config"])
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    try:
        kwargs = {k: _coerce(k, v) for k, v in values.items()}
    except ValueError as exc:
        raise InvalidInputError(f"bad config value: {exc}") from exc
    return ExperimentConfig(**kwargs).validate()


# ---------------------------------------------------------------------------
# node-sample CSV

CSV_HEADER = ["lambda", "theta", "weight", "value_re", "value_im"]


def write_node_csv(f, path, meta=None):
    with open(path, "w", newline="") as fh:
        fh.write(f"# grid {f.grid.describe()} exact_degree {f.grid.exact_degree}\n")
        for k, v in (meta or {}).items():
            fh.write(f"# {k} {v}\n")
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for lam, th, wt, v in zip(f.grid.lam, f.grid.theta, f.grid.weights, f.samples):
            w.writerow([repr(float(lam)), repr(float(th)), repr(float(wt)),
                        repr(float(v.real)), repr(float(v.imag))])


def read_node_csv(path):
    """Read samples written by :func:`write_node_csv`; rebuilds the grid."""
    meta = {}
    rows = []
    try:
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    body = []
    for line in lines:
        if line.startswith("#"):
            parts = line[1:].split()
            if parts:
                meta[parts[0]] = parts[1:]
        elif line.strip():
            body.append(line)
    reader = csv.reader(body)
    header = next(reader, None)
    if header != CSV_HEADER:
        raise FormatError(f"{path}: expected header {','.join(CSV_HEADER)}")
    try:
        rows = np.array([[float(t) for t in r] for r in reader])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if rows.ndim != 2 or rows.shape[0] == 0 or rows.shape[1] != 5:
        raise FormatError(f"{path}: no data rows")
    lam, theta, weight = rows[:, 0], rows[:, 1], rows[:, 2]
    grid = None
    spec = meta.get("grid")
    if spec and spec[0] == "product":
        n_theta, n_lambda = int(spec[1]), int(spec[2])
        cand = product_grid(n_theta, n_lambda)
        if cand.size == len(rows) and np.allclose(cand.lam, lam, atol=1e-14) and np.allclose(
            cand.theta, theta, atol=1e-14
        ):
            grid = cand
    if grid is None:
        degree = int(spec[spec.index("exact_degree") + 1]) if spec and "exact_degree" in spec else 0
        grid = QuadratureGrid(lam=lam.copy(), theta=theta.copy(), weights=weight.copy(),
                              exact_degree=degree, kind="design")
    elif not np.allclose(grid.weights, weight, rtol=1e-12):
        raise FormatError(f"{path}: weights do not match the declared grid")
    return NodeFunction(grid, rows[:, 3] + 1j * rows[:, 4])


# ---------------------------------------------------------------------------
# pipelines


def table_hash(dual):
    return f"{zlib.crc32(encode_table(dual)[:-4]):08x}"


def build_dual(cfg, table_path=None):
    """Load a dual table from disk or assemble it from `cfg`."""
    if table_path:
        dual = load_table(table_path)
        if dual.l_max != cfg.l_max or dual.N != cfg.N:
            log.info("using table N=%d l_max=%d from %s", dual.N, dual.l_max, table_path)
        return dual
    return dual_frame(build_frame_table(cfg.N, cfg.l_max), cfg.pinv_threshold)


def check_compatible(dual, grid):
    if grid.exact_degree < 2 * dual.l_max:
        raise InvalidInputError(
            f"grid exact to degree {grid.exact_degree} cannot resolve table l_max={dual.l_max}"
        )


def residual_summary(dual):
    res = dual.basis.residuals()
    return {
        "max": float(res.max()),
        "mean": float(res.mean()),
        "count_above_warn": int(np.sum(res > RESIDUAL_WARN)),
        "warn_level": RESIDUAL_WARN,
    }


def run_reconstruction(data, dual, filter=None, truth=None):
    """Reconstruct from node data; returns ``(NodeFunction, info dict)``.

    The norm bound ``||R^+ g|| <= 2 ||L g||`` is checked on every call.
    """
    check_compatible(dual, data.grid)
    g = analysis(data, dual.l_max)
    # R only sees the even part; node noise always has an odd component
    odd = odd_part_norm(g)
    rec = reconstruct_audited(even_projection(g), dual, filter)
    check_norm_bound(rec.norm_ratio)
    f_rec = synthesis(rec.coeffs, data.grid)
    info = {
        "filter": "none" if filter is None else filter.label(),
        "norm_ratio": rec.norm_ratio,
        "data_odd_part_norm": odd,
    }
    if truth is not None:
        info["relative_error"] = float(relative_error(truth, f_rec))
    return f_rec, info


def _sweep_specs(cfg):
    if cfg.alphas:
        return [FilterSpec("tikhonov", a) for a in cfg.alphas]
    return [cfg.filter_spec()]


def run_experiment(cfg, dual=None):
    """forward -> noise -> reconstruct for every requested filter.

    Returns ``(report, timings)``; the report holds no wall-clock values so that
    a fixed configuration reproduces it byte for byte.
    """
    cfg = cfg.resolved()
    timings = {}
    t0 = time.perf_counter()
    grid = cfg.make_grid()
    phantom = cfg.make_phantom()
    truth = sample(phantom, grid)
    data = forward_data(phantom, grid, cfg.m_circle)
    timings["forward"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if dual is None:
        dual = build_dual(cfg)
    check_compatible(dual, grid)
    timings["table"] = time.perf_counter() - t0

    noisy = add_noise(data, NoiseSpec(cfg.noise_level, cfg.seed))
    t0 = time.perf_counter()
    g = analysis(noisy, dual.l_max)
    odd = odd_part_norm(g)
    g = even_projection(g)
    runs = []
    recs = []
    for spec in _sweep_specs(cfg):
        rec = reconstruct_audited(g, dual, spec)
        check_norm_bound(rec.norm_ratio)
        recs.append(rec.coeffs.values)
        runs.append({
            "filter": "none" if spec is None else spec.kind,
            "alpha": None if spec is None or spec.kind != "tikhonov" else spec.alpha,
            "norm_ratio": rec.norm_ratio,
        })
    samples = synthesis_values(np.array(recs), dual.l_max, grid)
    for run, s in zip(runs, samples):
        run["relative_error"] = float(relative_error(truth, NodeFunction(grid, s)))
    timings["reconstruct"] = time.perf_counter() - t0

    errors = [r["relative_error"] for r in runs]
    best = int(np.argmin(errors))
    report = {
        "config": cfg.as_dict(),
        "grid": grid.describe(),
        "table": {
            "N": dual.N,
            "l_max": dual.l_max,
            "members": len(dual.index_set),
            "pinv_threshold": dual.pinv_threshold,
            "rank": dual.rank,
            "crc32": table_hash(dual),
        },
        "truncation_residuals": residual_summary(dual),
        "data_evenness_defect": data.evenness_defect(),
        "noisy_data_odd_part_norm": odd,
        "runs": runs,
        "best": {"index": best, "alpha": runs[best]["alpha"], "relative_error": errors[best]},
    }
    return report, timings


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# image export


def export_pgm(f, path, width=360, height=180, l_max=None):
    """Write ``f`` as a 16-bit binary PGM on an equirectangular raster.

    `f` is a :class:`NodeFunction` (expanded up to `l_max` first) or
    :class:`HarmonicCoeffs`. Pixel ``(row, col)`` shows the real part at
    ``theta = (row + 1/2) pi / height``, ``lam = (col + 1/2) 2 pi / width``,
    evaluated by harmonic synthesis. Min and max go to ``path + '.txt'``.
    """
    if width < 1 or height < 1:
        raise InvalidInputError("raster dimensions must be positive")
    if isinstance(f, NodeFunction):
        if l_max is None:
            l_max = max(0, f.grid.exact_degree // 2)
        coeffs = analysis(f, l_max)
    else:
        coeffs = f
    theta = (np.arange(height) + 0.5) * np.pi / height
    lam = (np.arange(width) + 0.5) * 2.0 * np.pi / width
    raster = QuadratureGrid(
        lam=np.tile(lam, height),
        theta=np.repeat(theta, width),
        weights=np.full(width * height, 4.0 * np.pi / (width * height)),
        exact_degree=0,
        kind="raster",
    )
    values = synthesis(coeffs, raster).samples.real.reshape(height, width)
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo
    # synthesis roundoff must not turn a constant into full-range noise
    if span > 1e-12 * max(abs(lo), abs(hi), 1.0):
        scaled = np.rint((values - lo) / span * 65535.0)
    else:
        scaled = np.zeros_like(values)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n65535\n".encode("ascii"))
        fh.write(scaled.astype(">u2").tobytes())
    with open(str(path) + ".txt", "w") as fh:
        fh.write(f"min {lo!r}\nmax {hi!r}\n")
    return lo, hi


def read_pgm(path):
    """Return ``(pixels, maxval)`` of a binary PGM."""
    with open(path, "rb") as fh:
        buf = fh.read()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", buf)
    if m is None:
        raise FormatError("not a binary PGM")
    width, height, maxval = (int(v) for v in m.groups())
    data = np.frombuffer(buf[m.end():], dtype=">u2" if maxval > 255 else "u1")
    return data.reshape(height, width), maxval


__all__ = [
    "ExperimentConfig",
    "build_dual",
    "export_pgm",
    "load_config",
    "read_node_csv",
    "run_experiment",
    "run_reconstruction",
    "write_node_csv",
]
