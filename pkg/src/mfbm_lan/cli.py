"""Command-line front end.

Exit codes: 0 success, 1 invalid configuration, 2 parameter or regime error,
3 numerical failure (a diagnostic JSON is written), 4 acceptance failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import MfbmError, NumericalError
from .spectral import Regime

COMMANDS = (
    "constants",
    "spectral",
    "simulate",
    "score",
    "trace",
    "trace-sweep",
    "opf-sweep",
    "mc",
    "degeneracy",
    "lan-check",
    "accept",
)

EXIT_CONFIG = 1
EXIT_PARAM = 2
EXIT_NUMERICAL = 3
EXIT_ACCEPT = 4


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    sigma: float | None = None
    H: float | None = None
    n: int | None = None
    alpha: float | None = None
    n_list: list[int] | None = None
    R: int | None = None
    seed: int | None = None
    output_dir: str | None = None
    format: str = "json"
    workers: int = 1
    h: list[float] | None = None
    lam: list[float] | None = None
    k: list[int] | None = None
    input: str | None = None
    criteria: list[int] | None = None
    dat: bool = False

    _REQUIRED = {
        "constants": ("sigma", "H"),
        "spectral": ("H",),
        "simulate": ("sigma", "H", "n", "alpha", "seed"),
        "score": ("input",),
        "trace": ("sigma", "H", "n", "alpha"),
        "trace-sweep": ("sigma", "H", "n_list", "alpha"),
        "opf-sweep": ("sigma", "H", "n_list", "alpha"),
        "mc": ("sigma", "H", "n", "alpha", "R", "seed"),
        "degeneracy": ("sigma", "H", "n", "alpha", "R", "seed"),
        "lan-check": ("sigma", "H", "n", "alpha", "seed", "h"),
        "accept": (),
    }

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        missing = [f for f in self._REQUIRED[self.command] if getattr(self, f) is None]
        if missing:
            raise ConfigError(f"{self.command}: missing required field(s) {', '.join(missing)}")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"format must be json or csv, got {self.format!r}")
        if self.h is not None:
            if len(self.h) == 1:
                self.h = [self.h[0], self.h[0]]
            if len(self.h) != 2:
                raise ConfigError("--h takes one or two values")
        if self.n_list is not None and list(self.n_list) != sorted(self.n_list):
            raise ConfigError("n_list must be ascending")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def public(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if not f.name.startswith("_")}


_CONFIG_FIELDS = {f.name for f in fields(RunConfig) if not f.name.startswith("_")}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mfbm-lan", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    S = argparse.SUPPRESS
    for name in COMMANDS:
        sp = sub.add_parser(name, argument_default=S)
        sp.add_argument("--config", help="JSON file with RunConfig fields; flags take precedence")
        sp.add_argument("--sigma", type=float)
        sp.add_argument("--H", type=float)
        sp.add_argument("--n", type=int)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--n-list", dest="n_list", type=int, nargs="+")
        sp.add_argument("--R", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--output-dir", dest="output_dir")
        sp.add_argument("--format", choices=("json", "csv"))
        sp.add_argument("--workers", type=int)
        if name == "lan-check":
            sp.add_argument("--h", type=float, nargs="+")
        if name == "spectral":
            sp.add_argument("--lam", type=float, nargs="+")
            sp.add_argument("--k", type=int, nargs="+")
        if name == "score":
            sp.add_argument("--input", help="increments CSV written by `simulate`")
        if name == "accept":
            sp.add_argument("--criteria", type=int, nargs="+")
        if name == "mc":
            sp.add_argument("--dat", action="store_true", help="write gnuplot scatter/ellipse files")
    return p


def parse_config(argv) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    merged: dict = {}
    cfg_path = ns.pop("config", None)
    if cfg_path:
        try:
            data = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {cfg_path}: {exc}") from exc
        unknown = set(data) - _CONFIG_FIELDS
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        merged.update(data)
    merged.update(ns)
    cfg = RunConfig(**merged)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Regime):
        return obj.value
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def _envelope(cfg: RunConfig, result) -> dict:
    return {"version": __version__, "config": cfg.public(), "result": _jsonable(result)}


def _config_comment(cfg: RunConfig) -> str:
    return json.dumps({"version": __version__, "config": cfg.public()}, sort_keys=True)


def _csv_text(cfg: RunConfig, header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {_config_comment(cfg)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


class Output:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.dir = Path(cfg.output_dir) if cfg.output_dir else None
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def emit(self, text: str, filename: str | None = None) -> None:
        if self.dir and filename:
            (self.dir / filename).write_text(text)
        sys.stdout.write(text if text.endswith("\n") else text + "\n")

    def write(self, filename: str, text: str) -> Path:
        target = self.dir / filename
        target.write_text(text)
        return target

    def json(self, result, filename: str) -> None:
        self.emit(json.dumps(_envelope(self.cfg, result), indent=2, sort_keys=True), filename)


def _theta(cfg: RunConfig):
    from .toeplitz import Theta

    return Theta.of(cfg.sigma, cfg.H)


def _scheme(cfg: RunConfig):
    from .toeplitz import SamplingScheme

    return SamplingScheme(cfg.n, cfg.alpha)


def _announce_seed(cfg: RunConfig) -> None:
    if cfg.seed is not None:
        print(f"seed={cfg.seed}", file=sys.stderr)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_constants(cfg: RunConfig, out: Output) -> int:
    from .constants import j_constants, limit_information

    theta = _theta(cfg)
    info = limit_information(theta)
    result = {
        "theta": {"sigma": theta.sigma, "H": theta.H},
        "regime": info.regime.value,
        "matrix": info.matrix,
        "normalization": info.normalization.value,
        "projection_required": info.projection_required,
    }
    if info.regime is Regime.SUPERCRITICAL:
        result.update(asdict(j_constants(theta)))
    out.json(result, "constants.json")
    return 0


def cmd_spectral(cfg: RunConfig, out: Output) -> int:
    from .spectral import autocov, autocov_dH, density, density_dH, fh_constants, log_deriv

    H = cfg.H
    c = fh_constants(H)
    result: dict = {"H": H, "c_H": c.c_H, "C_H": c.C_H, "truncation_terms": c.truncation_terms}
    if cfg.lam:
        lam = np.array(cfg.lam)
        result["lambda"] = lam
        result["density"] = density(H, lam)
        result["density_dH"] = density_dH(H, lam)
        result["log_deriv"] = log_deriv(H, lam)
    if cfg.k:
        k = np.array(cfg.k, dtype=float)
        result["k"] = cfg.k
        result["autocov"] = autocov(H, k)
        result["autocov_dH"] = autocov_dH(H, k)
    out.json(result, "spectral.json")
    return 0


def cmd_simulate(cfg: RunConfig, out: Output) -> int:
    from .simulate import mfbm_increments

    _announce_seed(cfg)
    path = mfbm_increments(_theta(cfg), _scheme(cfg), cfg.seed)
    text = _csv_text(cfg, ["x"], ([v] for v in path.x))
    sidecar = {
        "sigma": cfg.sigma,
        "H": cfg.H,
        "n": cfg.n,
        "alpha": cfg.alpha,
        "seed": cfg.seed,
        "version": __version__,
        "config": cfg.public(),
    }
    if out.dir:
        out.write("increments.csv", text)
        out.write("increments.json", json.dumps(sidecar, indent=2, sort_keys=True))
    else:
        sys.stdout.write(text)
    return 0


def read_increments(path: str | Path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")]
        x = np.array([float(v) for v in lines[1:]])
        meta = json.loads(path.with_suffix(".json").read_text())
    except (OSError, ValueError, IndexError) as exc:
        raise ConfigError(f"cannot read increments from {path}: {exc}") from exc
    return x, meta


def cmd_score(cfg: RunConfig, out: Output) -> int:
    from .scores import scores
    from .toeplitz import build_model

    x, meta = read_increments(cfg.input)
    for key in ("sigma", "H", "alpha"):
        if getattr(cfg, key) is None:
            setattr(cfg, key, meta[key])
    cfg.n = len(x)
    model = build_model(_theta(cfg), _scheme(cfg))
    ev = scores(model, x)
    result = {
        "S_sigma": ev.S_sigma,
        "S_H": ev.S_H,
        "R_H": ev.R_H,
        "R_H_perp": ev.R_H_perp,
        "Xi": ev.Xi,
        "U": ev.U,
        "native": ev.native,
        "normalizers": asdict(ev.normalizers),
        "a_n": model.traces.a_n,
    }
    out.json(result, "score.json")
    return 0


TRACE_CSV = ["n", "alpha", "H", "sigma", "trC2", "trCD", "trD2", "a_n", "trDperp2",
             "opC", "frobC", "opDperp", "frobDperp"]


def cmd_trace(cfg: RunConfig, out: Output) -> int:
    from .toeplitz import build_model

    tr = build_model(_theta(cfg), _scheme(cfg)).traces
    row = [cfg.n, cfg.alpha, cfg.H, cfg.sigma, tr.trC2, tr.trCD, tr.trD2, tr.a_n,
           tr.trDperp2, tr.opC, tr.frobC, tr.opDperp, tr.frobDperp]
    if cfg.format == "csv":
        out.emit(_csv_text(cfg, TRACE_CSV, [row]), "trace.csv")
    else:
        out.json(asdict(tr), "trace.json")
    return 0


def _table_out(cfg: RunConfig, out: Output, table, stem: str) -> None:
    if out.dir:
        out.write(f"{stem}.csv", table.to_csv(_config_comment(cfg)))
    summary = {"columns": table.columns, "rows": table.rows, "constants": table.constants}
    if cfg.format == "csv":
        sys.stdout.write(table.to_csv(_config_comment(cfg)))
        if out.dir:
            out.write(f"{stem}.json", json.dumps(_envelope(cfg, summary), indent=2, sort_keys=True))
    else:
        out.json(summary, f"{stem}.json")


def cmd_trace_sweep(cfg: RunConfig, out: Output) -> int:
    from .experiments import trace_convergence

    _table_out(cfg, out, trace_convergence(_theta(cfg), cfg.n_list, cfg.alpha), "trace_sweep")
    return 0


def cmd_opf_sweep(cfg: RunConfig, out: Output) -> int:
    from .experiments import opf_decay

    _table_out(cfg, out, opf_decay(_theta(cfg), cfg.n_list, cfg.alpha), "opf_sweep")
    return 0


def cmd_mc(cfg: RunConfig, out: Output) -> int:
    from .experiments import mc_clt, write_ellipse_dat, write_scatter_dat

    _announce_seed(cfg)
    rep = mc_clt(_theta(cfg), _scheme(cfg), cfg.R, cfg.seed, workers=cfg.workers)
    if out.dir:
        s = rep.samples
        rows = zip(range(cfg.R), s.S_sigma, s.S_H, s.R_H, s.R_H_perp, s.native[:, 0], s.native[:, 1])
        out.write("mc_samples.csv", _csv_text(
            cfg, ["replication", "S_sigma", "S_H", "R_H", "R_H_perp", "native_1", "native_2"], rows))
        if cfg.dat:
            comment = _config_comment(cfg)
            write_scatter_dat(out.dir / "mc_scatter.dat", s.native, comment)
            write_ellipse_dat(out.dir / "mc_target_ellipse.dat", rep.target, comment=comment)
            write_ellipse_dat(out.dir / "mc_exact_ellipse.dat", rep.exact_cov, comment=comment)
    out.json(rep.summary(), "mc.json")
    return 0


def cmd_degeneracy(cfg: RunConfig, out: Output) -> int:
    from .experiments import degeneracy_report

    _announce_seed(cfg)
    rep = degeneracy_report(_theta(cfg), _scheme(cfg), cfg.R, cfg.seed, workers=cfg.workers)
    out.json(asdict(rep), "degeneracy.json")
    return 0


def cmd_lan_check(cfg: RunConfig, out: Output) -> int:
    from .constants import limit_information
    from .scores import lan_check
    from .simulate import mfbm_increments
    from .toeplitz import build_model

    _announce_seed(cfg)
    theta, scheme = _theta(cfg), _scheme(cfg)
    model = build_model(theta, scheme)
    x = mfbm_increments(theta, scheme, cfg.seed).x
    chk = lan_check(model, cfg.h, x, limit_information(theta))
    result = asdict(chk)
    result["theta_h"] = {"sigma": chk.theta_h.sigma, "H": chk.theta_h.H}
    out.json(result, "lan_check.json")
    return 0


def cmd_accept(cfg: RunConfig, out: Output) -> int:
    from .acceptance import CRITERIA, ModelCache

    numbers = cfg.criteria or sorted(CRITERIA)
    bad = [k for k in numbers if k not in CRITERIA]
    if bad:
        raise ConfigError(f"unknown criteria {bad}")
    cache = ModelCache()
    results = []
    for k in numbers:
        res = CRITERIA[k](cache)
        results.append(res)
        for line in res.lines():
            print(line, flush=True)
    table = _csv_text(
        cfg, ["criterion", "passed", "check", "value", "target", "check_passed", "elapsed_s"],
        [(r.number, r.passed, c.name, c.value, c.target, c.passed, r.elapsed)
         for r in results for c in r.checks],
    )
    if out.dir:
        out.write("acceptance.csv", table)
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return 0 if all(r.passed for r in results) else EXIT_ACCEPT


HANDLERS = {
    "constants": cmd_constants,
    "spectral": cmd_spectral,
    "simulate": cmd_simulate,
    "score": cmd_score,
    "trace": cmd_trace,
    "trace-sweep": cmd_trace_sweep,
    "opf-sweep": cmd_opf_sweep,
    "mc": cmd_mc,
    "degeneracy": cmd_degeneracy,
    "lan-check": cmd_lan_check,
    "accept": cmd_accept,
}


def run(cfg: RunConfig) -> int:
    out = Output(cfg)
    try:
        return HANDLERS[cfg.command](cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        diag = {
            "version": __version__,
            "config": cfg.public(),
            "error": type(exc).__name__,
            "message": str(exc),
            "achieved": getattr(exc, "achieved", None),
        }
        text = json.dumps(diag, indent=2, sort_keys=True)
        if out.dir:
            (out.dir / "diagnostic.json").write_text(text)
        print(text, file=sys.stderr)
        return EXIT_NUMERICAL
    except (MfbmError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARAM


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except (ConfigError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
