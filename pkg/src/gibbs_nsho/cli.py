"""Command-line driver: ``gibbs-nsho <command> [--config FILE] [flags]``.

Parameters come from three layers, later ones winning: built-in defaults,
a flat ``key = value`` config file, and command-line flags.  Results are
written as a JSON envelope or as CSV (with a ``.meta.json`` envelope next
to the CSV file when ``--output`` is given).
"""

from __future__ import annotations

import argparse
import cmath
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from . import __version__, acceptance, diagmodel, discretize, dyson, linalg, mehler, regions, spectra
from .errors import ConfigInvalid, GibbsError

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_MODULE = 0, 1, 2, 3
THREADS_ENV = "GIBBS_NSHO_THREADS"


def _float_list(text) -> list[float]:
    """``"a,b,c"`` or the geometric ladder ``"start:stop:count"``."""
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text).strip()
    if ":" in text:
        start, stop, count = text.split(":")
        return np.geomspace(float(start), float(stop), int(count)).tolist()
    return [float(v) for v in text.split(",") if v.strip()]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Param:
    kind: Callable[[Any], Any]
    default: Any
    help: str
    choices: Optional[tuple] = None


PARAMS: dict[str, Param] = {
    "theta": Param(float, 0.4, "rotation angle, |theta| < pi/2"),
    "omega": Param(float, 0.0, "direction of complex time"),
    "t": Param(float, 0.5, "time (positive)"),
    "alpha": Param(float, 1.0, "potential exponent, or sector lower angle for regions"),
    "beta": Param(float, 0.0, "sector upper angle for regions, shift for resolvent rays"),
    "a": Param(float, 1.0, "potential amplitude"),
    "b": Param(float, 0.0, "potential offset, or counterexample coupling for diag"),
    "q": Param(float, 2.0, "Schatten index (>= 1, 'inf' allowed)"),
    "N": Param(int, 100, "Fock truncation size"),
    "L": Param(float, 14.0, "grid half-width"),
    "m": Param(int, 1000, "grid interior points"),
    "K": Param(int, 6, "highest Dyson term"),
    "count": Param(int, 10, "number of eigenvalues"),
    "potential": Param(str, "abs", "potential kind", ("none", "abs", "phased")),
    "method": Param(str, "fock", "discretisation", ("fock", "grid")),
    "region": Param(str, "semimodule", "region to sample", ("sector", "semimodule", "numrange", "rq")),
    "quantity": Param(str, "HsNormSq", "asymptotic quantity", tuple(q.value for q in mehler.Quantity)),
    "t-grid": Param(_float_list, "0.001:0.1:9", "times, 'a,b,c' or geometric 'start:stop:count'"),
    "rho-ladder": Param(_float_list, "5:200:12", "ray radii, same syntax as --t-grid"),
    "re-min": Param(float, -2.0, "grid real minimum"),
    "re-max": Param(float, 10.0, "grid real maximum"),
    "im-min": Param(float, -6.0, "grid imaginary minimum"),
    "im-max": Param(float, 6.0, "grid imaginary maximum"),
    "nx": Param(int, 41, "grid columns"),
    "ny": Param(int, 41, "grid rows"),
    "x0": Param(float, -math.inf, "window start for mehler-norm"),
    "x1": Param(float, math.inf, "window end for mehler-norm"),
    "panels": Param(int, 10, "Dyson storage panels"),
    "order": Param(int, 8, "Dyson Gauss-Legendre order"),
    "y": Param(float, 1000.0, "imaginary shift for the diagonal resolvent"),
    "r": Param(float, 0.0, "real shift for the diagonal resolvent"),
    "classify-pcq": Param(_bool, False, "classify A_alpha as a PC_q perturbation"),
    "suite": Param(str, "smoke", "suite name"),
    "seed": Param(int, 0, "seed for sampled sweeps"),
    "format": Param(str, "json", "output format", ("json", "csv")),
    "output": Param(str, "-", "output path, '-' for stdout"),
}

COMMON = ("seed", "format", "output")
COMMANDS: dict[str, tuple[str, ...]] = {
    "regions": ("region", "theta", "alpha", "beta", "q", "re-min", "re-max", "im-min", "im-max", "nx", "ny"),
    "mehler-norm": ("theta", "omega", "t", "x0", "x1"),
    "mehler-asymp": ("theta", "omega", "quantity", "t-grid"),
    "diag": ("alpha", "q", "t", "b", "r", "y", "classify-pcq", "t-grid"),
    "dyson": ("theta", "N", "potential", "alpha", "a", "b", "K", "t", "q", "panels", "order"),
    "spectrum": ("theta", "N", "potential", "alpha", "a", "b", "count", "method", "L", "m"),
    "pseudospec": ("theta", "N", "potential", "alpha", "a", "b", "re-min", "re-max", "im-min", "im-max", "nx", "ny"),
    "resolvent-ray": ("theta", "N", "potential", "alpha", "a", "b", "beta", "rho-ladder"),
    "reproduce": ("suite",),
}
COMMAND_DEFAULTS = {
    "pseudospec": {"nx": 21, "ny": 21, "re-min": 0.0, "re-max": 40.0, "im-min": -5.0, "im-max": 20.0},
    "regions": {"re-min": -1.0, "re-max": 3.0, "im-min": -2.0, "im-max": 2.0},
}


def read_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment; ``_`` and ``-`` are interchangeable."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigInvalid([f"{path}:{lineno}: expected 'key = value'"])
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("_", "-")] = value
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gibbs-nsho", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, keys in COMMANDS.items():
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", default=None, help="flat key = value config file")
        for key in keys + COMMON:
            param = PARAMS[key]
            if param.kind is _bool:
                cmd.add_argument(f"--{key}", dest=key, action="store_const", const=True,
                                 default=argparse.SUPPRESS, help=param.help)
            else:
                cmd.add_argument(f"--{key}", dest=key, default=argparse.SUPPRESS, help=param.help)
    return parser


def _convert(key: str, raw) -> Any:
    param = PARAMS[key]
    if param.kind is float and isinstance(raw, str) and raw.strip().lower() in ("inf", "+inf"):
        return math.inf
    value = param.kind(raw)
    if param.choices and value not in param.choices:
        raise ValueError(f"must be one of {', '.join(param.choices)}")
    return value


def _check_ranges(command: str, cfg: dict, problems: list[str]) -> None:
    def need(cond, message):
        if not cond:
            problems.append(message)

    if "theta" in cfg:
        need(abs(cfg["theta"]) < math.pi / 2, "theta: |theta| must be below pi/2")
    if "q" in cfg:
        need(cfg["q"] >= 1, "q: Schatten index must be at least 1")
    if "t" in cfg:
        need(cfg["t"] > 0, "t: must be positive")
    for key in ("N", "nx", "ny", "m", "panels", "order"):
        if key in cfg:
            need(cfg[key] >= (2 if key in ("nx", "ny", "order") else 1), f"{key}: too small")
    if "count" in cfg:
        need(cfg["count"] >= 0, "count: must be non-negative")
    if "K" in cfg:
        need(cfg["K"] >= 0, "K: must be non-negative")
    if "t-grid" in cfg:
        need(len(cfg["t-grid"]) >= 2 and all(v > 0 for v in cfg["t-grid"]), "t-grid: needs two or more positive times")
    if "rho-ladder" in cfg:
        ladder = cfg["rho-ladder"]
        need(len(ladder) >= 1 and all(v > 0 for v in ladder) and all(np.diff(ladder) > 0),
             "rho-ladder: must be positive and increasing")
    if command in ("dyson", "spectrum", "pseudospec", "resolvent-ray") and cfg.get("potential") != "none":
        need(cfg["a"] > 0, "a: potential amplitude must be positive")
        need(0 <= cfg["alpha"] < 2, "alpha: potential exponent must lie in [0, 2)")
    if command == "diag":
        need(cfg["alpha"] < 1 or not cfg["classify-pcq"], "alpha: must be below 1 for classify-pcq")
        need(cfg["r"] < 1, "r: must lie left of the spectral bound 1")
    if "x0" in cfg:
        need(cfg["x0"] <= cfg["x1"], "x0: window requires x0 <= x1")
    if command == "reproduce":
        need(cfg["suite"] in acceptance.SUITES, f"suite: unknown suite {cfg['suite']!r}")


def resolve_config(command: str, flags: dict, file_values: Optional[dict] = None) -> dict:
    """Merge defaults, file values and flags, then validate; raises :class:`ConfigInvalid`."""
    keys = COMMANDS[command] + COMMON
    raw = {key: PARAMS[key].default for key in keys}
    raw.update(COMMAND_DEFAULTS.get(command, {}))
    problems = []
    for key, value in (file_values or {}).items():
        if key not in keys:
            problems.append(f"{key}: not a parameter of {command}")
        else:
            raw[key] = value
    raw.update(flags)
    cfg = {}
    for key in keys:
        try:
            cfg[key] = _convert(key, raw[key])
        except (TypeError, ValueError) as exc:
            problems.append(f"{key}: {exc}")
    if not problems:
        _check_ranges(command, cfg, problems)
    if problems:
        raise ConfigInvalid(problems)
    return cfg


# --- commands --------------------------------------------------------------

@dataclass
class Result:
    payload: dict
    columns: Optional[list] = None
    rows: Optional[list] = None
    oracle_deltas: Optional[dict] = None


def _potential(cfg) -> Optional[discretize.PotentialSpec]:
    kind = cfg["potential"]
    if kind == "none":
        return None
    pk = discretize.PotentialKind.POWER_ABS if kind == "abs" else discretize.PotentialKind.PHASED_POWER
    return discretize.PotentialSpec(pk, a=cfg["a"], b=cfg["b"], alpha=cfg["alpha"])


def _fock(cfg, n=None):
    return discretize.oscillator_matrix(cfg["theta"], n or cfg["N"], _potential(cfg))


def cmd_regions(cfg) -> Result:
    theta = cfg["theta"]
    kind = cfg["region"]
    if kind == "sector":
        sector = regions.Sector(cfg["alpha"], cfg["beta"])
        predicate = lambda z: regions.in_sector(z, sector)  # noqa: E731
    elif kind == "semimodule":
        predicate = lambda z: regions.in_semimodule(regions.SemiModuleQuery(theta, z))  # noqa: E731
    elif kind == "numrange":
        predicate = lambda z: regions.in_numrange(z, theta)  # noqa: E731
    else:
        predicate = lambda z: regions.in_Rq(z, cfg["q"], theta, cfg["beta"])  # noqa: E731

    def safe(z):
        try:
            return predicate(z)
        except GibbsError:
            return regions.RegionVerdict(False, -math.inf, ("pole",))

    re, im, inside, margin = regions.sample_grid(safe, (cfg["re-min"], cfg["re-max"]),
                                                 (cfg["im-min"], cfg["im-max"]), cfg["nx"], cfg["ny"])
    rows = [[float(x), float(y), int(bool(v)), float(mg)] for x, y, v, mg in zip(re, im, inside, margin)]
    payload = {"region": kind, "inside_fraction": float(np.mean(inside)), "nodes": len(rows)}
    return Result(payload, ["re[1]", "im[1]", "inside[bool]", "margin[1]"], rows)


def cmd_mehler_norm(cfg) -> Result:
    theta, omega, t = cfg["theta"], cfg["omega"], cfg["t"]
    tau = cmath.rect(t, omega)
    value = mehler.hs_norm_sq(theta, tau)
    row = [theta, omega, t, value]
    columns = ["theta[rad]", "omega[rad]", "t[time]", "hs_norm_sq[1]"]
    payload = {"hs_norm_sq": value}
    if math.isfinite(cfg["x0"]) or math.isfinite(cfg["x1"]):
        windowed = mehler.windowed_hs_norm_sq(theta, omega, t, cfg["x0"], cfg["x1"])
        row.append(windowed)
        columns.append("windowed_hs_norm_sq[1]")
        payload["windowed_hs_norm_sq"] = windowed
    deltas = None
    if theta == 0 and omega == 0:
        deltas = {"closed_form": abs(value - 1 / (2 * math.sinh(2 * t)))}
    return Result(payload, columns, [row], deltas)


def cmd_mehler_asymp(cfg) -> Result:
    theta, omega = cfg["theta"], cfg["omega"]
    law = mehler.asymp_law(theta, omega, cfg["quantity"])
    rows = []
    for t in cfg["t-grid"]:
        value = mehler.evaluate_quantity(theta, cmath.rect(t, omega), cfg["quantity"])
        rows.append([t, value, law.coefficient * t**law.exponent])
    ts = np.array([r[0] for r in rows])
    vals = np.abs([r[1] for r in rows])
    slope = float(np.polyfit(np.log(ts), np.log(vals), 1)[0]) if len(rows) > 1 else None
    payload = {"exponent": law.exponent, "coefficient": law.coefficient, "regime": law.regime.value,
               "fitted_slope": slope}
    return Result(payload, ["t[time]", "value[1]", "leading_term[1]"], rows,
                  {"max_rel_to_leading_term": float(max(abs(r[1] / r[2] - 1) for r in rows))})


def cmd_diag(cfg) -> Result:
    alpha, q = cfg["alpha"], cfg["q"]
    payload: dict[str, Any] = {}
    if cfg["classify-pcq"]:
        payload["classify_pcq"] = diagmodel.classify_pcq(alpha, q)
        return Result(payload, ["alpha[1]", "q[1]", "classify_pcq[bool]"],
                      [[alpha, q, payload["classify_pcq"]]])
    rows = [[t, diagmodel.perturbation_schatten_norm(alpha, q, t)] for t in cfg["t-grid"]]
    payload["norm_at_t"] = diagmodel.perturbation_schatten_norm(alpha, q, cfg["t"])
    payload["counterexample_class"] = diagmodel.counterexample_classify(cfg["b"]).value
    norm, argmax = diagmodel.resolvent_argmax("CubicCounterexample", cfg["r"], cfg["y"])
    payload["cubic_resolvent_norm"] = norm
    payload["cubic_resolvent_argmax"] = argmax
    if alpha < 1:
        payload["classify_pcq"] = diagmodel.classify_pcq(alpha, q)
    return Result(payload, ["t[time]", "schatten_norm[1]"], rows)


def cmd_dyson(cfg) -> Result:
    gen = discretize.fock_matrix(discretize.FockSpec(cfg["theta"], cfg["N"]))
    pot_spec = _potential(cfg)
    if pot_spec is None:
        pert = np.zeros((cfg["N"], cfg["N"]), dtype=complex)
    else:
        pert = discretize.potential_fock_matrix(pot_spec, cfg["N"]).entries
    provider = dyson.SemigroupProvider(gen)
    t, q = cfg["t"], cfg["q"]
    probe = dyson.pcq_report(provider, pert, q, np.geomspace(t / 100, t, 8)) if np.any(pert) else None
    gamma = max(probe.gamma_fit, 0.0) if probe else 0.0
    mesh = dyson.GradedMesh.from_gamma(gamma, panels=cfg["panels"], order=cfg["order"])
    series = dyson.sum_series(provider, pert, cfg["K"], t, q, mesh)
    exact = linalg.matrix_exp(-t * (gen.entries + pert)).entries
    err = linalg.schatten_norm(series.total - exact, q)
    payload = series.summary()
    payload["mesh_exponent"] = mesh.exponent
    rows = [[k, n, e] for k, (n, e) in enumerate(zip(series.term_norms_q, series.quad_errors))]
    return Result(payload, ["k[1]", "term_norm_q[1]", "quad_error[1]"], rows,
                  {"series_vs_matrix_exp": err, "allowed": series.tail_bound + 10 * series.quadrature_budget})


def cmd_spectrum(cfg) -> Result:
    theta = cfg["theta"]
    if cfg["method"] == "fock":
        a, b = _fock(cfg), _fock(cfg, 2 * cfg["N"])
    else:
        pot = _potential(cfg)
        a = discretize.grid_matrix(theta, pot, discretize.GridSpec(cfg["L"], cfg["m"]))
        b = discretize.grid_matrix(theta, pot, discretize.GridSpec(cfg["L"], 2 * cfg["m"] + 1))
    report = spectra.spectral_report(a, b, theta, cfg["count"])
    payload = report.to_dict()
    payload["meta"]["method"] = cfg["method"]
    rows = [[n + 1, z.real, z.imag, al, bp, bm] for n, (z, al, bp, bm) in
            enumerate(zip(report.eigenvalues, report.alpha_seq, report.beta_plus_seq, report.beta_minus_seq))]
    return Result(payload, ["n[1]", "re_lambda[1]", "im_lambda[1]", "alpha_n[1]", "beta_plus_n[1]",
                            "beta_minus_n[1]"], rows)


def cmd_pseudospec(cfg) -> Result:
    grid = spectra.pseudospectrum(_fock(cfg), (cfg["re-min"], cfg["re-max"], cfg["im-min"], cfg["im-max"]),
                                  (cfg["nx"], cfg["ny"]))
    rows = [list(r) for r in grid.rows()]
    payload = {"rectangle": list(grid.rectangle), "resolution": list(grid.resolution),
               "min_sigma": float(grid.values.min()), "N": cfg["N"]}
    return Result(payload, ["re[1]", "im[1]", "sigma_min[1]"], rows)


def cmd_resolvent_ray(cfg) -> Result:
    plus, minus = spectra.resolvent_ray(_fock(cfg), _fock(cfg, 2 * cfg["N"]), cfg["theta"], cfg["beta"],
                                        cfg["rho-ladder"])
    rows = [[rho, np_, nm, max(dp, dm), int(tp and tm)] for rho, np_, nm, dp, dm, tp, tm in
            zip(plus.rho_values, plus.norms, minus.norms, plus.deltas, minus.deltas, plus.trusted, minus.trusted)]
    payload = {"beta": cfg["beta"], "N": cfg["N"],
               "strictly_decreasing": {"plus": plus.strictly_decreasing, "minus": minus.strictly_decreasing},
               "decrease_fraction": {"plus": plus.decrease_fraction, "minus": minus.decrease_fraction}}
    return Result(payload, ["rho[1]", "norm_plus[1]", "norm_minus[1]", "delta[rel]", "trusted[bool]"], rows,
                  {"max_delta_plus": plus.max_delta, "max_delta_minus": minus.max_delta})


DISPATCH = {
    "regions": cmd_regions, "mehler-norm": cmd_mehler_norm, "mehler-asymp": cmd_mehler_asymp,
    "diag": cmd_diag, "dyson": cmd_dyson, "spectrum": cmd_spectrum, "pseudospec": cmd_pseudospec,
    "resolvent-ray": cmd_resolvent_ray,
}


# --- output ------------------------------------------------------------------

def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def envelope(command: str, cfg: dict, result: Result, wall: float) -> dict:
    payload = dict(result.payload)
    if result.rows is not None:
        payload["columns"] = result.columns
        payload["rows"] = result.rows
    return {"command": command, "config": _jsonable(cfg), "version": __version__,
            "wall_time_s": wall, "payload": _jsonable(payload),
            "oracle_deltas": _jsonable(result.oracle_deltas or {})}


def _emit(text: str, path: str, stdout) -> None:
    if path == "-":
        stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def run(command: str, cfg: dict, stdout=None) -> dict:
    """Dispatch a validated config and write its output; returns the envelope."""
    stdout = stdout or sys.stdout
    start = time.perf_counter()
    result = DISPATCH[command](cfg)
    env = envelope(command, cfg, result, time.perf_counter() - start)
    if cfg["format"] == "csv" and result.rows is not None:
        _emit(_csv_text(result.columns, result.rows), cfg["output"], stdout)
        if cfg["output"] != "-":
            meta = {k: v for k, v in env.items()}
            meta["payload"] = {k: v for k, v in env["payload"].items() if k != "rows"}
            with open(cfg["output"] + ".meta.json", "w", encoding="utf-8") as fh:
                json.dump(meta, fh, indent=2, sort_keys=True)
    else:
        _emit(json.dumps(env, indent=2, sort_keys=True) + "\n", cfg["output"], stdout)
    return env


def _error_record(kind: str, message: str, command: Optional[str], violations=None) -> str:
    record = {"error": kind, "message": message, "command": command}
    if violations:
        record["violations"] = violations
    return json.dumps(record, sort_keys=True)


def _reproduce(cfg, stdout) -> int:
    results = acceptance.run_suite(cfg["suite"], echo=lambda line: print(line, file=stdout, flush=True))
    failed = [r.ident for r in results if not r.passed]
    summary = {"suite": cfg["suite"], "passed": len(results) - len(failed), "failed": failed}
    print(json.dumps(summary, sort_keys=True), file=stdout)
    return EXIT_FAILED if failed else EXIT_OK


def _thread_limit():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(value))


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    try:
        file_values = read_config_file(config_path) if config_path else None
        cfg = resolve_config(command, args, file_values)
    except ConfigInvalid as exc:
        print(_error_record("ConfigInvalid", str(exc), command, exc.violations), file=stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(_error_record("ConfigInvalid", str(exc), command, [str(exc)]), file=stderr)
        return EXIT_CONFIG
    limiter = _thread_limit()
    try:
        if command == "reproduce":
            return _reproduce(cfg, stdout)
        run(command, cfg, stdout)
        return EXIT_OK
    except (GibbsError, ValueError, ArithmeticError) as exc:
        print(_error_record(type(exc).__name__, f"{command}: {exc}", command), file=stderr)
        return EXIT_MODULE
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
