"""Command-line entry point.

Every command is a deterministic function of its configuration. Settings come
from an optional flat ``key=value`` file (``--config``) overridden by flags.
Output is CSV or JSON; CSV files start with a comment line carrying the
schema version and the full configuration.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from .bands import band_curve
from .kernels import KernelError
from .simulate import (
    GENERATOR_KINDS,
    BandConfig,
    GeneratorConfig,
    coverage_mc,
    generate,
    stats_at,
    time_to_width,
)
from .oracles import ORACLE_KINDS
from .stats import ValueCounts

SCHEMA_VERSION = 1
COMMANDS = ("band", "simulate", "sweep", "compare-oracles", "coverage")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str = "band"
    generator: str = "iid-beta"
    oracle: str = "bernoulli"
    alpha: float = 0.05
    horizon: int = 10_000
    grid: str = "1000"
    seeds: str = "1"
    seed: int = 0
    out: str = "-"
    format: str = "csv"
    checkpoints: str = "100,1000,10000"
    domain: str = "auto"
    eta: int = 2
    a: float = 6.0
    b: float = 3.0
    mu: float = 0.0
    sigma: float = 1.0
    eps: float = 0.0625
    q: float = 1.0
    gamma_scale: float = 1.0
    w_max: float = 10.0
    weight_law: str = "exp"
    tau: float = 1.0
    prior: float = 1.0
    t_ref: int = 10_000
    sweep_eps: str = "0.0625,0.03125,0.015625,0.0078125,0.00390625,0.001953125"
    sweep_steps: int = 40
    compare: str = "ddrm,empbern"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {COMMANDS}")
        if self.generator not in GENERATOR_KINDS:
            raise ConfigError(f"unknown generator {self.generator!r}")
        if self.oracle not in ORACLE_KINDS:
            raise ConfigError(f"unknown oracle {self.oracle!r}")
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1 (empty streams have no band)")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.domain not in ("auto", "unit", "real"):
            raise ConfigError("domain must be auto, unit or real")
        for name in ("tau", "prior"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("grid", "seeds", "checkpoints", "sweep_eps", "compare"):
            getattr(self, f"{name}_values")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            name = key.replace("-", "_")
            if name not in known:
                raise ConfigError(f"unknown configuration key {key!r}")
            typ = known[name].type
            try:
                if typ == "int":
                    value = float(raw)
                    if value != int(value):
                        raise ValueError
                    kwargs[name] = int(value)
                elif typ == "float":
                    kwargs[name] = float(raw)
                else:
                    kwargs[name] = str(raw)
            except (TypeError, ValueError):
                raise ConfigError(f"invalid value {raw!r} for {key}") from None
        try:
            return cls(**kwargs)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    # parsed views ---------------------------------------------------------

    @property
    def grid_values(self) -> np.ndarray:
        """``N`` (uniform on the support), ``lo:hi:N``, or a comma list."""
        text = self.grid.strip()
        try:
            if ":" in text:
                lo, hi, n = text.split(":")
                lo, hi, n = float(lo), float(hi), int(n)
                if n < 1 or not lo <= hi:
                    raise ValueError
                return np.linspace(lo, hi, n)
            if "," in text:
                vals = np.array([float(s) for s in text.split(",") if s.strip()])
                if vals.size == 0 or np.any(np.diff(vals) < 0):
                    raise ValueError
                return vals
            n = int(text)
            if n < 1:
                raise ValueError
        except ValueError:
            raise ConfigError(f"invalid grid {self.grid!r}") from None
        lo, hi = self._default_range()
        return np.linspace(lo, hi, n)

    def _default_range(self):
        kind = self.generator
        if kind == "iid-lognormal":
            return math.exp(self.mu - 4 * self.sigma), math.exp(self.mu + 4 * self.sigma)
        if kind == "iid-gaussian":
            return self.mu - 4 * self.sigma, self.mu + 4 * self.sigma
        if kind == "iid-uniform-eps":
            return 0.0, self.eps
        return 0.0, 1.0

    @property
    def seeds_values(self) -> list[int]:
        """``N`` seeds starting at ``seed``, or an explicit comma list."""
        try:
            if "," in self.seeds:
                out = [int(s) for s in self.seeds.split(",") if s.strip()]
            else:
                out = list(range(self.seed, self.seed + int(self.seeds)))
        except ValueError:
            raise ConfigError(f"invalid seeds {self.seeds!r}") from None
        if not out or min(out) < 0:
            raise ConfigError("need at least one nonnegative seed")
        return out

    @property
    def checkpoints_values(self) -> list[int]:
        try:
            pts = sorted({int(float(s)) for s in self.checkpoints.split(",") if s.strip()})
        except ValueError:
            raise ConfigError(f"invalid checkpoints {self.checkpoints!r}") from None
        if any(t < 1 for t in pts):
            raise ConfigError("checkpoints must be positive")
        return [t for t in pts if t <= self.horizon] or [self.horizon]

    @property
    def sweep_eps_values(self) -> list[float]:
        try:
            vals = [float(s) for s in self.sweep_eps.split(",") if s.strip()]
        except ValueError:
            raise ConfigError(f"invalid sweep_eps {self.sweep_eps!r}") from None
        if not vals or any(not 0 < e <= 1 for e in vals):
            raise ConfigError("sweep_eps values must lie in (0, 1]")
        return vals

    @property
    def compare_values(self) -> list[str]:
        kinds = [s.strip() for s in self.compare.split(",") if s.strip()]
        bad = [k for k in kinds if k not in ORACLE_KINDS]
        if bad or not kinds:
            raise ConfigError(f"invalid oracle list {self.compare!r}")
        return kinds

    def generator_config(self, seed: int | None = None, **overrides) -> GeneratorConfig:
        base = dict(
            kind=self.generator,
            seed=self.seed if seed is None else seed,
            horizon=self.horizon,
            a=self.a,
            b=self.b,
            mu=self.mu,
            sigma=self.sigma,
            eps=self.eps,
            q=self.q,
            gamma_scale=self.gamma_scale,
            w_max=self.w_max,
            weight_law=self.weight_law,
        )
        base.update(overrides)
        try:
            return GeneratorConfig(**base)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def band_config(self, oracle: str | None = None) -> BandConfig:
        kind = oracle or self.oracle
        opts = {}
        if kind == "bernoulli":
            opts["prior"] = self.prior
        elif kind in ("subgaussian", "empbern"):
            opts["tau"] = self.tau
        domain = self.domain
        if domain == "auto":
            domain = self.generator_config().domain
        return BandConfig(kind, self.alpha, domain, self.eta, oracle_options=opts)

    def echo(self) -> str:
        return " ".join(f"{k}={v}" for k, v in asdict(self).items())


# ---------------------------------------------------------------------------
# commands; each returns (columns, rows, summary)


def _check_weighting(cfg: RunConfig, oracle_kind: str):
    weighted_oracle = ORACLE_KINDS[oracle_kind].weighted
    gen = cfg.generator_config()
    if gen.weighted and not weighted_oracle:
        raise ConfigError(f"generator {gen.kind} is importance weighted; use ddrm or empbern")


def cmd_band(cfg: RunConfig):
    _check_weighting(cfg, cfg.oracle)
    grid = cfg.grid_values
    bc = cfg.band_config()
    oracle = bc.build_oracle()
    stream = generate(cfg.generator_config())
    cols = ["t", "v", "lower", "upper", "empirical_cdf", "truth", "depth_used"]
    rows = []
    for t in cfg.checkpoints_values:
        st = stats_at(stream, t, oracle.weighted)
        band = band_curve(grid, bc.alpha, st, oracle, bc.domain, bc.schedule)
        truth = stream.truth(grid, t)
        for i in range(grid.size):
            rows.append(
                [t, grid[i], band.lower[i], band.upper[i], band.empirical[i], truth[i], int(band.depth_used[i])]
            )
    return cols, rows, {}


def cmd_simulate(cfg: RunConfig):
    stream = generate(cfg.generator_config())
    cols = ["t", "w", "x"]
    rows = [[i + 1, w, x] for i, (w, x) in enumerate(zip(stream.w.tolist(), stream.x.tolist()))]
    return cols, rows, {"smoothness_xi": stream.smoothness.xi}


def cmd_sweep(cfg: RunConfig):
    """Time multiplier needed to reach the reference width as smoothness drops."""
    if cfg.generator != "iid-uniform-eps":
        raise ConfigError("sweep needs generator=iid-uniform-eps")
    eps_values = cfg.sweep_eps_values
    ref_eps = cfg.eps
    n = cfg.grid_values.size
    unit = (np.arange(n) + 0.5) / n
    bc = cfg.band_config()
    oracle = bc.build_oracle()
    if cfg.t_ref > cfg.horizon:
        raise ConfigError("horizon must be at least t_ref")
    # common random numbers: the same uniforms are scaled to every eps
    u = generate(cfg.generator_config(eps=1.0)).x
    times = sorted({int(round(cfg.t_ref * 2.0 ** (j / 8.0))) for j in range(-24, cfg.sweep_steps + 1)})
    times = [t for t in times if t <= cfg.horizon]
    ref_vc = ValueCounts()
    ref_vc.extend(ref_eps * u[: cfg.t_ref])
    ref_width = band_curve(ref_eps * unit, bc.alpha, ref_vc, oracle, bc.domain, bc.schedule).max_width
    cols = ["eps", "first_t", "multiplier", "width", "converged"]
    rows = []
    for eps in eps_values:
        t, width = time_to_width(eps * u, eps * unit, ref_width, times, bc, oracle)
        if t is None:
            rows.append([eps, "", "", width, 0])
        else:
            rows.append([eps, t, t / cfg.t_ref, width, 1])
    return cols, rows, {"reference_width": ref_width, "reference_eps": ref_eps, "t_ref": cfg.t_ref}


def cmd_compare_oracles(cfg: RunConfig):
    gen = cfg.generator_config()
    if not gen.weighted:
        raise ConfigError("compare-oracles needs an importance-weighted generator (iid-iw or iw-polya)")
    grid = cfg.grid_values
    cols = ["oracle", "seed", "t", "max_width", "seconds"]
    rows = []
    for seed in cfg.seeds_values:
        stream = generate(cfg.generator_config(seed=seed))
        ws = stats_at(stream, cfg.horizon, True)
        for kind in cfg.compare_values:
            bc = cfg.band_config(kind)
            oracle = bc.build_oracle()
            if not oracle.weighted:
                raise ConfigError(f"oracle {kind} does not accept importance weights")
            start = time.perf_counter()
            band = band_curve(grid, bc.alpha, ws, oracle, bc.domain, bc.schedule)
            rows.append([kind, seed, cfg.horizon, band.max_width, round(time.perf_counter() - start, 3)])
    return cols, rows, {}


def cmd_coverage(cfg: RunConfig):
    _check_weighting(cfg, cfg.oracle)
    bc = cfg.band_config()
    seeds = cfg.seeds_values
    report = coverage_mc(
        bc, cfg.generator_config(), len(seeds), cfg.grid_values, cfg.checkpoints_values, seeds=np.array(seeds)
    )
    cols = ["seed", "worst_margin", "failed"]
    rows = [[int(s), float(m), int(m > 0)] for s, m in zip(report.seeds, report.worst_margin)]
    summary = {
        "n_seeds": report.n_seeds,
        "failures": report.failures,
        "fraction": report.fraction,
        "ci_low": report.ci_low,
        "ci_high": report.ci_high,
        "threshold": report.threshold(min(cfg.alpha, 0.5)),
    }
    return cols, rows, summary


HANDLERS = {
    "band": cmd_band,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "compare-oracles": cmd_compare_oracles,
    "coverage": cmd_coverage,
}


# ---------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _json_value(x):
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def render(cfg: RunConfig, cols, rows, summary) -> str:
    if cfg.format == "json":
        doc = {
            "schema": SCHEMA_VERSION,
            "config": asdict(cfg),
            "summary": {k: _json_value(v) for k, v in summary.items()},
            "columns": cols,
            "rows": [[_json_value(x) for x in row] for row in rows],
        }
        return json.dumps(doc, indent=1) + "\n"
    lines = [f"# avastcdf schema={SCHEMA_VERSION} {cfg.echo()}"]
    if summary:
        lines.append("# summary " + " ".join(f"{k}={_fmt(v)}" for k, v in summary.items()))
    lines.append(",".join(cols))
    lines.extend(",".join(_fmt(x) for x in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_atomic(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".avastcdf-", dir=directory)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_config_file(path: str) -> dict:
    out = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="avastcdf",
        description="Time- and value-uniform confidence bands for streaming CDFs.",
    )
    p.add_argument("--config", help="flat key=value configuration file")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        p.add_argument(flag, dest=f.name, default=None, help=f"default: {f.default}")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        mapping = read_config_file(args.config) if args.config else {}
        mapping.update({k: v for k, v in vars(args).items() if k != "config" and v is not None})
        cfg = RunConfig.from_mapping(mapping)
        with np.errstate(over="ignore", under="ignore"):
            cols, rows, summary = HANDLERS[cfg.command](cfg)
        text = render(cfg, cols, rows, summary)
        try:
            write_atomic(cfg.out, text)
        except OSError as exc:
            raise ConfigError(f"cannot write output: {exc}") from None
    except ConfigError as exc:
        print(f"avastcdf: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KernelError, ArithmeticError) as exc:
        print(f"avastcdf: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main() -> None:
    sys.exit(run())
