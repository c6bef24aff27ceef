"""Command-line orchestration: JSON config in, CSV + metadata out.

Every run writes its artifacts under <out>/<hash>/ where the hash is
derived from the canonical config document, and pairs each CSV with a
JSON sidecar sufficient to re-run it.  Exit codes: 0 ok, 2 config
error, 3 resource limit, 4 numerical degradation.
"""

import argparse
import csv
import hashlib
import json
import os
import sys
import time

import numpy as np
import jsonschema

from . import __version__
from .analysis import (extrapolate_convergence, fourier_spectrum,
                       plateau_correlation, rms_deviation,
                       steady_state_average)
from .cdw import (CdwEnsembleSpec, cdw_imbalance_trace, correlation_profile,
                  ee_trace)
from .errors import (ConfigurationError, NumericalDegradationError,
                     ResourceLimitError)
from .exact import DEFAULT_BUDGET_MIB, DEFAULT_DT, FullConfiguration, \
    exact_imbalance_trace
from .approx import apply_approximations, gamma_sigma_r
from .model import ModelSpec, ShellSpec, SPIN_DN, SPIN_UP
from .reconstruct import (canonical_parent, parent_entropy,
                          single_spin_density)

_MODEL_SCHEMA = {
    "type": "object",
    "required": ["L"],
    "additionalProperties": False,
    "properties": {
        "L": {"type": "integer", "minimum": 2},
        "J": {"type": "number", "exclusiveMinimum": 0},
        "U": {"type": "number"},
        "potential": {"enum": ["stark", "aubry_andre"]},
        "delta_dn": {"type": "number"},
        "delta_up": {"type": "number"},
        "delta_aa": {"type": "number"},
        "beta": {"type": "number"},
        "phi": {"type": "number"},
        "alpha": {"type": "number"},
        "boundary": {"enum": ["open", "periodic"]},
    },
}

_SHELLS_SCHEMA = {
    "type": "object",
    "required": ["ell"],
    "additionalProperties": False,
    "properties": {
        "ell": {"type": "integer", "minimum": 0},
        "k_same": {"type": "integer", "minimum": 0},
        "k_opp": {"type": "integer", "minimum": 0},
        "kappa_same": {"type": "integer", "minimum": 0},
        "kappa_opp": {"type": "integer", "minimum": 0},
    },
}

_GRID_SCHEMA = {
    "type": "object",
    "required": ["t_max", "n_samples"],
    "additionalProperties": False,
    "properties": {
        "t_max": {"type": "number", "exclusiveMinimum": 0},
        "n_samples": {"type": "integer", "minimum": 2},
    },
}

_TRACE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "spin": {"enum": ["up", "dn"]},
        "lam_up": {"type": "number", "minimum": 0, "maximum": 1},
        "weighting": {"enum": ["exact", "stirling"]},
        "n_phases": {"type": "integer", "minimum": 1},
        "translation_invariant": {"type": "boolean"},
        "j_ensemble": {
            "type": "array",
            "items": {"type": "array", "minItems": 2, "maxItems": 2,
                      "items": {"type": "number"}},
        },
    },
}

_SCHEMAS = {
    "trace": {
        "type": "object",
        "required": ["model", "shells", "grid"],
        "properties": {
            "model": _MODEL_SCHEMA, "shells": _SHELLS_SCHEMA,
            "grid": _GRID_SCHEMA, "dt": {"type": "number",
                                         "exclusiveMinimum": 0},
            "trace": _TRACE_SCHEMA,
        },
    },
    "spectrum": {
        "type": "object",
        "required": ["model", "shells", "grid"],
        "properties": {
            "model": _MODEL_SCHEMA, "shells": _SHELLS_SCHEMA,
            "grid": _GRID_SCHEMA, "dt": {"type": "number"},
            "trace": _TRACE_SCHEMA,
            "window": {"enum": [None, "hann"]},
        },
    },
    "sweep": {
        "type": "object",
        "required": ["model", "shells", "grid", "sweep"],
        "properties": {
            "model": _MODEL_SCHEMA, "shells": _SHELLS_SCHEMA,
            "grid": _GRID_SCHEMA, "dt": {"type": "number"},
            "trace": _TRACE_SCHEMA,
            "sweep": {
                "type": "object",
                "required": ["parameter", "values", "steady_window"],
                "properties": {
                    "parameter": {"enum": ["ell", "k_same", "k_opp", "U",
                                           "delta_dn", "delta_up",
                                           "delta_aa"]},
                    "values": {"type": "array", "minItems": 1,
                               "items": {"type": "number"}},
                    "steady_window": {"type": "array", "minItems": 2,
                                      "maxItems": 2,
                                      "items": {"type": "number"}},
                    "n_points": {"type": "integer", "minimum": 1},
                },
            },
        },
    },
    "ee": {
        "type": "object",
        "required": ["model", "grid", "ee"],
        "properties": {
            "model": _MODEL_SCHEMA, "grid": _GRID_SCHEMA,
            "dt": {"type": "number"},
            "ee": {
                "type": "object",
                "required": ["ell", "center", "q_same", "q_opp"],
                "properties": {
                    "ell": {"type": "integer", "minimum": 0},
                    "center": {"type": "integer", "minimum": 1},
                    "q_same": {"type": "integer", "minimum": 0},
                    "q_opp": {"type": "integer", "minimum": 0},
                    "spin": {"enum": ["up", "dn"]},
                    "cut": {"type": ["integer", "null"]},
                    "n_phases": {"type": "integer", "minimum": 1},
                },
            },
        },
    },
    "corr": {
        "type": "object",
        "required": ["model", "corr"],
        "properties": {
            "model": _MODEL_SCHEMA, "dt": {"type": "number"},
            "corr": {
                "type": "object",
                "required": ["ell", "center", "q_same", "q_opp",
                             "sample_window", "n_samples"],
                "properties": {
                    "ell": {"type": "integer", "minimum": 0},
                    "center": {"type": "integer", "minimum": 1},
                    "q_same": {"type": "integer", "minimum": 0},
                    "q_opp": {"type": "integer", "minimum": 0},
                    "spin": {"enum": ["up", "dn"]},
                    "n_phases": {"type": "integer", "minimum": 1},
                    "sample_window": {"type": "array", "minItems": 2,
                                      "maxItems": 2,
                                      "items": {"type": "number"}},
                    "n_samples": {"type": "integer", "minimum": 1},
                    "plateau_range": {"type": "array", "minItems": 2,
                                      "maxItems": 2,
                                      "items": {"type": "number"}},
                },
            },
        },
    },
    "benchmark": {
        "type": "object",
        "required": ["model", "shells", "grid"],
        "properties": {
            "model": _MODEL_SCHEMA, "shells": _SHELLS_SCHEMA,
            "grid": _GRID_SCHEMA, "dt": {"type": "number"},
            "trace": _TRACE_SCHEMA,
        },
    },
    "reconstruct": {
        "type": "object",
        "required": ["model", "shells", "reconstruct"],
        "properties": {
            "model": _MODEL_SCHEMA, "shells": _SHELLS_SCHEMA,
            "dt": {"type": "number"},
            "reconstruct": {
                "type": "object",
                "required": ["up_positions", "dn_positions", "t"],
                "properties": {
                    "up_positions": {"type": "array",
                                     "items": {"type": "integer"}},
                    "dn_positions": {"type": "array",
                                     "items": {"type": "integer"}},
                    "t": {"type": "number", "minimum": 0},
                },
            },
        },
    },
}


def _validate(command, doc):
    validator = jsonschema.Draft202012Validator(_SCHEMAS[command])
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        lines = []
        for e in errors:
            pointer = "/" + "/".join(str(p) for p in e.absolute_path)
            lines.append(f"{pointer}: {e.message}")
        raise ConfigurationError("config schema violations:\n"
                                 + "\n".join(lines))


def _model_of(doc):
    return ModelSpec(**doc["model"])


def _shells_of(doc):
    s = doc["shells"]
    if "kappa_same" in s or "kappa_opp" in s:
        return ShellSpec(s["ell"], s.get("kappa_same", 0),
                         s.get("kappa_opp", 0))
    return ShellSpec.from_k(s["ell"], s.get("k_same", 0), s.get("k_opp", 0))


def _grid_of(doc):
    g = doc["grid"]
    return np.linspace(0.0, g["t_max"], g["n_samples"])


def _ensemble_of(doc, spec, shells):
    tr = doc.get("trace", {})
    return CdwEnsembleSpec(
        spec=spec, shells=shells,
        lam_up=tr.get("lam_up", 0.5),
        weighting=tr.get("weighting", "exact"),
        n_phases=tr.get("n_phases", 12),
        translation_invariant=tr.get("translation_invariant", False),
        j_ensemble=tuple(tuple(p) for p in tr.get("j_ensemble", ())),
    ), tr.get("spin", SPIN_DN)


def _fmt(x):
    return format(float(x), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _write_meta(path, command, doc, extra):
    meta = {"command": command, "version": __version__,
            "config": doc, "generated_by": "fermishell"}
    meta.update(extra)
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _run_dir(out, doc):
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    h = hashlib.sha256(blob.encode()).hexdigest()[:12]
    d = os.path.join(out, h)
    os.makedirs(d, exist_ok=True)
    return d, h


def _cmd_trace(doc, args, outdir):
    spec = _model_of(doc)
    shells = _shells_of(doc)
    ens, spin = _ensemble_of(doc, spec, shells)
    dt = doc.get("dt", DEFAULT_DT)
    trace = cdw_imbalance_trace(ens, spin, _grid_of(doc), dt=dt,
                                workers=args.workers,
                                budget_mib=args.budget_mib)
    path = os.path.join(outdir, "trace.csv")
    _write_csv(path, ["t_over_tau", "value"],
               zip(trace.times, trace.values))
    return trace, {"dt": dt, "trace": trace.metadata}


def _cmd_spectrum(doc, args, outdir):
    trace, meta = _cmd_trace(doc, args, outdir)
    spec = fourier_spectrum(trace, window=doc.get("window"))
    _write_csv(os.path.join(outdir, "spectrum.csv"),
               ["nu_J_over_h", "magnitude"],
               zip(spec.nu, spec.magnitude))
    return trace, meta


def _cmd_sweep(doc, args, outdir):
    sw = doc["sweep"]
    param = sw["parameter"]
    window = tuple(sw["steady_window"])
    n_points = sw.get("n_points", 10)
    dt = doc.get("dt", DEFAULT_DT)
    grid = _grid_of(doc)
    rows = []
    for value in sw["values"]:
        sub = json.loads(json.dumps(doc))
        if param in ("ell", "k_same", "k_opp"):
            sub["shells"][param] = int(value)
        else:
            sub["model"][param] = value
        spec = _model_of(sub)
        shells = _shells_of(sub)
        ens, spin = _ensemble_of(sub, spec, shells)
        trace = cdw_imbalance_trace(ens, spin, grid, dt=dt,
                                    workers=args.workers,
                                    budget_mib=args.budget_mib)
        rows.append((value, steady_state_average(trace, window, n_points)))
    _write_csv(os.path.join(outdir, "sweep.csv"),
               [param, "steady_state"], rows)
    extra = {"dt": dt}
    if param in ("k_same", "k_opp") and len(rows) >= 2:
        ks = [r[0] for r in rows if r[0] > 0]
        vs = [r[1] for r in rows if r[0] > 0]
        a, b = extrapolate_convergence(ks, vs)
        extra["extrapolated_limit"] = a
        extra["slope"] = b
    return rows, extra


def _cmd_ee(doc, args, outdir):
    spec = _model_of(doc)
    e = doc["ee"]
    dt = doc.get("dt", DEFAULT_DT)
    trace = ee_trace(spec, e["ell"], e["center"], e["q_same"], e["q_opp"],
                     e.get("spin", SPIN_DN), _grid_of(doc), dt=dt,
                     n_phases=e.get("n_phases", 12), cut=e.get("cut"),
                     workers=args.workers, budget_mib=args.budget_mib)
    _write_csv(os.path.join(outdir, "ee.csv"),
               ["t_over_tau", "entropy_nats"],
               zip(trace.times, trace.values))
    return trace, {"dt": dt, "ee": trace.metadata}


def _cmd_corr(doc, args, outdir):
    spec = _model_of(doc)
    c = doc["corr"]
    dt = doc.get("dt", DEFAULT_DT)
    t1, t2 = c["sample_window"]
    samples = np.linspace(t1, t2, c["n_samples"])
    sites, vals = correlation_profile(
        spec, c["ell"], c["center"], c["q_same"], c["q_opp"],
        c.get("spin", SPIN_DN), samples, dt=dt,
        n_phases=c.get("n_phases", 12), workers=args.workers,
        budget_mib=args.budget_mib)
    _write_csv(os.path.join(outdir, "corr.csv"),
               ["site", "abs_corr"], zip(sites, vals))
    extra = {"dt": dt}
    if "plateau_range" in c:
        offs = np.abs(sites - c["center"])
        extra["plateau"] = plateau_correlation(
            offs, vals, tuple(c["plateau_range"]))
    return vals, extra


def _cmd_benchmark(doc, args, outdir):
    """Approximate ensemble trace against the brute-force full ensemble
    on a small lattice; reports the RMS deviation."""
    from itertools import combinations as _comb
    spec = _model_of(doc)
    shells = _shells_of(doc)
    ens, spin = _ensemble_of(doc, spec, shells)
    dt = doc.get("dt", DEFAULT_DT)
    grid = _grid_of(doc)
    approx = cdw_imbalance_trace(ens, spin, grid, dt=dt,
                                 workers=args.workers,
                                 budget_mib=args.budget_mib)
    evens = list(range(2, spec.L + 1, 2))
    n_up = round(ens.lam_up * spec.L / 2)
    acc = np.zeros(len(grid))
    count = 0
    for up in _comb(evens, n_up):
        dn = tuple(sorted(set(evens) - set(up)))
        cfg = FullConfiguration(spec, up, dn)
        _, vals = exact_imbalance_trace(cfg, spin, grid, dt=dt,
                                        budget_mib=args.budget_mib)
        acc += vals
        count += 1
    acc /= count
    rms, _ = rms_deviation(approx, (approx.times, acc))
    _write_csv(os.path.join(outdir, "benchmark.csv"),
               ["t_over_tau", "approx", "exact"],
               zip(approx.times, approx.values, acc))
    return rms, {"dt": dt, "rms": rms, "ensemble_size": count}


def _cmd_reconstruct(doc, args, outdir):
    spec = _model_of(doc)
    shells = _shells_of(doc)
    r = doc["reconstruct"]
    dt = doc.get("dt", DEFAULT_DT)
    cfg = FullConfiguration(spec, tuple(r["up_positions"]),
                            tuple(r["dn_positions"]))
    densities = {}
    for spin in (SPIN_UP, SPIN_DN):
        gammas = []
        for idx in range(len(cfg.positions(spin))):
            problem = apply_approximations(cfg, idx, spin, shells)
            gammas.append(gamma_sigma_r(problem, spec, r["t"], dt=dt,
                                        budget_mib=args.budget_mib))
        densities[spin] = single_spin_density(gammas)
    parent = canonical_parent(densities[SPIN_UP], densities[SPIN_DN])
    entropy = parent_entropy(parent)
    with open(os.path.join(outdir, "parent.json"), "w") as fh:
        fh.write(parent.to_json())
    _write_csv(os.path.join(outdir, "reconstruct.csv"),
               ["component", "weight"],
               list(enumerate(parent.weights)))
    return parent, {"dt": dt, "entropy_nats": entropy,
                    "components": parent.r}


_COMMANDS = {
    "trace": _cmd_trace,
    "spectrum": _cmd_spectrum,
    "sweep": _cmd_sweep,
    "ee": _cmd_ee,
    "corr": _cmd_corr,
    "benchmark": _cmd_benchmark,
    "reconstruct": _cmd_reconstruct,
}


def build_parser():
    p = argparse.ArgumentParser(
        prog="fermishell",
        description="Shell-truncated dynamics of localized Fermi-Hubbard "
                    "chains")
    sub = p.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True,
                        help="JSON configuration file")
        sp.add_argument("--out", default="runs",
                        help="output directory root")
        sp.add_argument("--workers", type=int,
                        default=os.cpu_count() or 1)
        sp.add_argument("--budget-mib", type=float,
                        default=DEFAULT_BUDGET_MIB)
        sp.add_argument("--seed", type=int, default=None,
                        help="seed for randomized phase averaging")
    return p


def run(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        _validate(args.command, doc)
        outdir, run_hash = _run_dir(args.out, doc)
        t0 = time.time()
        _, extra = _COMMANDS[args.command](doc, args, outdir)
        extra.update({"hash": run_hash, "workers": args.workers,
                      "seed": args.seed,
                      "elapsed_s": round(time.time() - t0, 3)})
        _write_meta(os.path.join(outdir, f"{args.command}.meta.json"),
                    args.command, doc, extra)
        print(outdir)
        return 0
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ResourceLimitError as exc:
        print(f"resource error: {exc} (dimension={exc.dimension})",
              file=sys.stderr)
        return 3
    except NumericalDegradationError as exc:
        print(f"numerical degradation: {exc}", file=sys.stderr)
        return 4


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
