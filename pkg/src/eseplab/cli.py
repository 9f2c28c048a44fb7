"""Command-line entry point: ``eseplab simulate|analytic|sweep|verify``.

Each run reads an optional JSON config; ``--seed``, ``--out``, ``--threads``
and ``--replications`` override the file. Outputs go to ``--out`` and are
fully determined by the config and seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from . import analytics as an
from . import blocking as bl
from . import branching as br
from . import limits as lm
from . import verify as vf
from .core import (ESEP, ESEP_B, HAWKES, HESEP, MODELS, NGESEP, SIS, EmpiricalSummary, ModelParams,
                   RngStreamSpec, reconstruct_state)
from .errors import ConfigInvalid, DomainViolation, EseplabError
from .laws import KernelSpec

_BASE = {"baseline": 10.0, "jump": 2.0, "expire_rate": 3.0}

ANALYTIC_QUANTITIES = ("negbin_pmf", "transient_mgf", "queue_pgf", "counting_pgf", "joint_pgf", "counting_pmf",
                       "progeny_pmf", "generations_pmf", "esepb_pmf", "blocking", "gesep2_mgf")
SWEEPS = ("sis", "batch", "pasta", "renewal", "diffusion")

EPILOG = """\
outputs (CSV, '.' decimal, header row first):
  simulate  paths/path_<i>.csv   time,kind,batch        (first `write_paths` replications)
            summary.json          samples, histogram, mean, variance, seed_range of the end state
  analytic  analytic.csv          argument,value,in_domain
  sweep     sweep.csv             scale,metric,value,samples,seed   (+ sweep.json with the full config)
  verify    verify.csv            claim_id,statistic,observed,threshold,passed,seed,rerun
            verify.json           the same records; exit status 1 if any claim fails

config keys: model, params, kernel, scale, horizon, replications, seed, out, threads, write_paths,
  quantity, t, grid, K, n_max, sweep, n_list, N_list, t_list, gamma_list, batch, burn, suite, suite_scale
"""


@dataclass
class RunConfig:
    model: str = ESEP
    params: dict = field(default_factory=lambda: dict(_BASE))
    kernel: dict | None = None
    scale: int = 1
    horizon: float = 50.0
    replications: int = 100
    seed: int = 1
    out: str = "eseplab-out"
    threads: int | None = None
    write_paths: int = 1
    quantity: str = "negbin_pmf"
    t: float = 1.0
    grid: list = field(default_factory=list)
    K: int | None = None
    n_max: int = 10
    sweep: str = "sis"
    n_list: list = field(default_factory=lambda: [1, 2, 4, 8])
    N_list: list = field(default_factory=lambda: [50, 100, 500, 1000, 10_000])
    t_list: list = field(default_factory=lambda: [100.0, 1000.0, 10_000.0])
    gamma_list: list = field(default_factory=lambda: [0.0, 0.5, 1.0])
    batch: str = "deterministic"
    burn: float | None = None
    suite: str = "default"
    suite_scale: float = 1.0

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RunConfig:
        if not isinstance(d, dict):
            raise ConfigInvalid("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {unknown}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ConfigInvalid(f"model must be one of {MODELS}")
        if not isinstance(self.replications, int) or self.replications < 1:
            raise ConfigInvalid("replications must be a positive integer")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigInvalid("seed must be an unsigned 64-bit integer")
        if not (isinstance(self.horizon, (int, float)) and self.horizon > 0):
            raise ConfigInvalid("horizon must be positive")
        if self.threads is not None and self.threads < 1:
            raise ConfigInvalid("threads must be positive")
        if self.write_paths < 0:
            raise ConfigInvalid("write_paths must be non-negative")
        if self.quantity not in ANALYTIC_QUANTITIES:
            raise ConfigInvalid(f"quantity must be one of {ANALYTIC_QUANTITIES}")
        if self.sweep not in SWEEPS:
            raise ConfigInvalid(f"sweep must be one of {SWEEPS}")
        if self.suite not in vf.SUITES:
            raise ConfigInvalid(f"suite must be one of {tuple(vf.SUITES)}")
        try:
            self.model_params()
            self.kernel_spec()
        except (EseplabError, TypeError, KeyError, ValueError) as exc:
            raise ConfigInvalid(f"bad params or kernel: {exc}") from exc

    def model_params(self) -> ModelParams:
        return ModelParams.from_dict(self.params)

    def kernel_spec(self) -> KernelSpec | None:
        return None if self.kernel is None else KernelSpec.from_dict(self.kernel)

    def rng(self) -> RngStreamSpec:
        return RngStreamSpec(self.seed)


def load_config(path: str | None, overrides: dict[str, Any]) -> RunConfig:
    data: dict[str, Any] = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigInvalid("config must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(data)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    target = out / name
    target.write_text(text, encoding="utf-8")
    return target


# ---------------------------------------------------------------------------
# simulate


def _simulate_one(cfg: RunConfig, p: ModelParams, rng: RngStreamSpec):
    from . import simulators as sm

    if cfg.model == ESEP:
        return sm.simulate_esep(p, cfg.horizon, rng)
    if cfg.model == ESEP_B:
        return sm.simulate_esep_b(p, cfg.horizon, rng)
    if cfg.model == SIS:
        return sm.simulate_sis(p, cfg.horizon, rng)
    if cfg.model == HAWKES:
        return sm.simulate_hawkes(p, cfg.kernel_spec(), cfg.horizon, rng)
    if cfg.model == NGESEP:
        return sm.simulate_ngesep(p, cfg.scale, cfg.horizon, rng)
    return sm.simulate_hesep(p, cfg.horizon, rng)


def cmd_simulate(cfg: RunConfig) -> int:
    """Simulate ``replications`` paths; summarise the end-state count (intensity for Hawkes)."""
    p = cfg.model_params()
    out = Path(cfg.out)
    base = cfg.rng()
    ends = []
    for i in range(cfg.replications):
        path = _simulate_one(cfg, p, base.child(i))
        q, _, lam = reconstruct_state(path, cfg.horizon)
        ends.append(lam if cfg.model == HAWKES else q)
        if i < cfg.write_paths:
            _write(out / "paths", f"path_{i}.csv", path.to_csv())
    summary = EmpiricalSummary.from_values(np.array(ends), discrete=cfg.model != HAWKES, seed=cfg.seed,
                                           first_stream=0, last_stream=cfg.replications - 1)
    _write(out, "summary.json", json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
    return 0


# ---------------------------------------------------------------------------
# analytic


def _transform_row(fn, arg) -> tuple:
    try:
        res = fn(arg)
    except DomainViolation:
        return arg, math.nan, False
    return arg, res.value, res.in_domain


def _fmt_arg(arg) -> str | int | float:
    if isinstance(arg, (list, tuple)):
        return "|".join(repr(float(a)) for a in arg)
    if isinstance(arg, str):
        return arg
    if isinstance(arg, (int, np.integer)):
        return int(arg)
    return float(arg)


def analytic_rows(cfg: RunConfig) -> list[tuple]:
    """(argument, value, in_domain) rows for the configured quantity."""
    p = cfg.model_params()
    q, t = cfg.quantity, cfg.t

    def pmf_rows(probs, offset=0):
        return [(offset + k, float(v), True) for k, v in enumerate(probs)]

    if q == "negbin_pmf":
        return pmf_rows(an.esep_steady_negbin(p, cfg.K).probs)
    if q == "esepb_pmf":
        return pmf_rows(bl.esepb_steady(p).pmf.probs)
    if q == "blocking":
        s = bl.esepb_steady(p)
        return [("mean", s.mean, True), ("variance", s.variance, True), ("block_fraction", s.block_fraction, True),
                ("at_capacity", s.at_capacity, True), ("pasta_ratio", s.block_fraction / s.at_capacity, True)]
    if q == "counting_pmf":
        return pmf_rows(an.counting_pmf_series(p, t, cfg.n_max))
    if q in ("progeny_pmf", "generations_pmf"):
        model = ESEP if cfg.model != HAWKES else HAWKES
        if q == "progeny_pmf":
            law = br.progeny_law(p, model, cfg.K)
        else:
            law = br.generations_law_esep(p, cfg.K) if model == ESEP else br.generations_law_hawkes(p, cfg.K or 200)
        return pmf_rows(law.probs, law.offset)
    fns = {
        "transient_mgf": lambda a: an.esep_transient_mgf(p, a, t, strict=False),
        "queue_pgf": lambda a: an.esep_qt_pgf(p, a, t, strict=False),
        "counting_pgf": lambda a: an.esep_counting_pgf(p, a, t),
        "joint_pgf": lambda a: an.joint_qd_pgf(p, a[0], a[1], t),
        "gesep2_mgf": lambda a: an.gesep2_steady_mgf(p, a, strict=False),
    }
    if not cfg.grid:
        raise ConfigInvalid(f"quantity {q!r} needs a non-empty grid")
    return [_transform_row(fns[q], a) for a in cfg.grid]


def cmd_analytic(cfg: RunConfig) -> int:
    rows = [(_fmt_arg(a), v, "true" if ok else "false") for a, v, ok in analytic_rows(cfg)]
    _write(Path(cfg.out), "analytic.csv", _csv(("argument", "value", "in_domain"), rows))
    return 0


def parse_analytic_csv(text: str) -> list[tuple[str, float, bool]]:
    rd = csv.reader(io.StringIO(text))
    if next(rd) != ["argument", "value", "in_domain"]:
        raise ConfigInvalid("unexpected analytic CSV header")
    return [(a, float(v), d == "true") for a, v, d in rd]


# ---------------------------------------------------------------------------
# sweep


def run_sweep(cfg: RunConfig) -> lm.SweepReport:
    p, rng, reps, thr = cfg.model_params(), cfg.rng(), cfg.replications, cfg.threads
    if cfg.sweep == "sis":
        return lm.sis_convergence_sweep(p, cfg.N_list, reps, rng, thr, cfg.burn)
    if cfg.sweep == "batch":
        return lm.batch_scaling_sweep(p, cfg.n_list, reps, rng, cfg.batch, thr)
    if cfg.sweep == "pasta":
        return bl.pasta_ratio_sweep(p, cfg.n_list)
    if cfg.sweep == "renewal":
        return lm.renewal_check(p, cfg.t_list, rng)
    return lm.diffusion_fit_check(p, cfg.n_list, cfg.gamma_list, reps, rng, threads=thr)


def cmd_sweep(cfg: RunConfig) -> int:
    rep = run_sweep(cfg)
    out = Path(cfg.out)
    _write(out, "sweep.csv", rep.to_csv())
    side = {"run_config": asdict(cfg) | {"threads": None}, "report": json.loads(rep.to_json())}
    _write(out, "sweep.json", json.dumps(side, indent=2, sort_keys=True) + "\n")
    return 0


# ---------------------------------------------------------------------------
# verify


def cmd_verify(cfg: RunConfig) -> int:
    if cfg.suite == "default":
        suite = vf.default_suite(cfg.seed, cfg.suite_scale)
    else:
        suite = vf.SUITES[cfg.suite](cfg.seed)
    reports = vf.run_suite(suite, threads=cfg.threads)
    cols = ("claim_id", "statistic", "observed", "threshold", "passed", "seed", "rerun")
    rows = [(r.claim_id, r.statistic, r.observed, r.threshold, str(r.passed).lower(), r.seed, str(r.rerun).lower())
            for r in reports]
    out = Path(cfg.out)
    _write(out, "verify.csv", _csv(cols, rows))
    recs = [{k: v for k, v in r.to_dict().items() if k != "runtime"} for r in reports]
    _write(out, "verify.json", json.dumps(recs, indent=2, sort_keys=True) + "\n")
    for r in reports:
        print(r.line(), file=sys.stderr)
    return 0 if all(r.passed for r in reports) else 1


COMMANDS = {"simulate": cmd_simulate, "analytic": cmd_analytic, "sweep": cmd_sweep, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eseplab", description="Simulate and check ephemerally self-exciting processes.",
                                 epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__doc__.splitlines()[0] if fn.__doc__ else name, epilog=EPILOG,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", help="JSON RunConfig file")
        sp.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int, help="worker threads (default: ESEPLAB_THREADS or CPU count)")
        sp.add_argument("--replications", type=int, help="replications per estimate")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "out": args.out, "threads": args.threads, "replications": args.replications}
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except EseplabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
