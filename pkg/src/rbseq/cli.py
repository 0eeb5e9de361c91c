"""Command-line front end.

Every run writes ``provenance.json`` into its output directory: the parsed
configuration, its hash, the seeds, library versions and a SHA-256 per
artifact. ``rbseq replay provenance.json`` re-runs the configuration and
checks the artifacts bit for bit.

Exit codes: 0 ok, 2 configuration or model error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, errors
from .direct import solve_renewal, tail_proxy, write_autocov_csv
from .dist import from_descriptor
from .estimators import (
    alpha_mixing_bound,
    estimate_autocov,
    estimate_waiting_time,
    write_report_csv,
)
from .inverse import (
    CovarianceSpec,
    figure_spec,
    invert_autocovariance,
    invert_spec,
    phi_from_descriptor,
    read_covariance_csv,
)
from .likelihood import entropy_summary, log_likelihood
from .sampler import generate, load, load_text

FULL_LENGTHS = (10**6, 10**8)
DESK_FACTOR = 100
FIGURE_INVERSION_HORIZON = 20_000


# ---------------------------------------------------------------------------
# helpers

def _load_json_arg(value, what):
    if value is None:
        raise errors.ConfigError(f"--{what} is required")
    try:
        if value.lstrip().startswith("{"):
            return json.loads(value)
        with open(value) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise errors.ConfigError(f"cannot read {what} {value!r}: {exc}") from exc


def _model(args):
    desc = _load_json_arg(args.model, "model")
    if not isinstance(desc, dict) or "family" not in desc:
        raise errors.ConfigError("model descriptor must be a JSON object with a 'family' key")
    try:
        return from_descriptor(desc)
    except (KeyError, TypeError) as exc:
        raise errors.ConfigError(f"incomplete model descriptor: {exc}") from exc


def _require(args, *names):
    for n in names:
        if getattr(args, n) is None:
            raise errors.ConfigError(f"--{n.replace('_', '-')} is required for {args.command}")


def _check_length(n, name="length"):
    if n < 1:
        raise errors.ConfigError(f"--{name} must be >= 1")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _clean(x):
    # JSON has no inf/nan
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _pmap(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def _read_sequence(path):
    with open(path, "rb") as fh:
        head = fh.read(5)
    return load(path) if head == b"RBSQ1" else load_text(path)


def _sequences(args, model):
    """The input file, or ``--replicas`` freshly generated sequences."""
    if args.input:
        return [_read_sequence(args.input)]
    _require(args, "length", "seed")
    _check_length(args.length)
    if args.replicas == 1:
        return [generate(model, args.length, args.seed)]
    return _pmap(lambda k: generate(model, args.length, args.seed, stream=k),
                 range(args.replicas), args.threads)


# ---------------------------------------------------------------------------
# subcommands; each returns (summary dict, list of artifact file names)

def cmd_generate(args, out):
    model = _model(args)
    _require(args, "length", "seed")
    _check_length(args.length)
    n = args.replicas
    streams = [None] if n == 1 else list(range(n))
    seqs = _pmap(lambda k: generate(model, args.length, args.seed, stream=k), streams, args.threads)
    files = []
    for k, seq in zip(streams, seqs):
        name = "sequence.rbsq" if k is None else f"sequence_{k:04d}.rbsq"
        seq.save(os.path.join(out, name))
        files.append(name)
        if args.text:
            tname = name.replace(".rbsq", ".txt")
            seq.save_text(os.path.join(out, tname))
            files.append(tname)
    summary = {"model_id": model.model_id, "length": args.length,
               "renewal_counts": [s.renewal_count for s in seqs]}
    return summary, files


def cmd_autocov(args, out):
    model = _model(args)
    _require(args, "horizon")
    cov = solve_renewal(model, args.horizon)
    write_autocov_csv(os.path.join(out, "autocov.csv"), cov, tail_proxy(model, args.horizon))
    summary = {"model_id": model.model_id, "mu": model.mean, "c0": cov.c0,
               "renewal_limit_gap": abs(float(cov.rho[-1])), "aperiodic": model.aperiodic}
    return summary, ["autocov.csv"]


def cmd_invert(args, out):
    horizon = args.horizon or FIGURE_INVERSION_HORIZON
    if args.cov:
        res = invert_autocovariance(read_covariance_csv(args.cov), clip_tol=args.clip_tol)
    else:
        spec = _load_json_arg(args.spec or args.model, "spec")
        try:
            spec = CovarianceSpec(float(spec["xi"]), float(spec["m"]),
                                  phi_from_descriptor(spec["phi"]))
        except (KeyError, TypeError) as exc:
            raise errors.ConfigError(f"spec needs xi, m and phi: {exc}") from exc
        res = invert_spec(spec, horizon, clip_tol=args.clip_tol)
    w = res.distribution
    header = [
        f"horizon={res.horizon}",
        f"clipped_mass={res.clipped_mass!r}",
        f"missing_mass={res.missing_mass!r}",
        f"mean={w.mean!r}",
        f"mean_deficit={res.mean_deficit!r}",
    ]
    w.to_csv(os.path.join(out, "density.csv"), header_lines=header)
    summary = {"mean": w.mean, "horizon": res.horizon, "clipped_mass": res.clipped_mass,
               "missing_mass": res.missing_mass, "mean_deficit": res.mean_deficit,
               "kaluza": res.kaluza, "t_max": w.t_max, "model_id": w.model_id}
    return summary, ["density.csv"]


def cmd_entropy(args, out):
    model = _model(args)
    t = args.length or 1000
    e = entropy_summary(model, t)
    summary = {"H_p": e.H_p, "rate": e.entropy_rate, "H_pi_t": e.H_pi_t, "t": t,
               "max_entropy_bound": e.bound}
    _write_json(os.path.join(out, "entropy.json"), summary)
    return summary, ["entropy.json"]


def cmd_loglik(args, out):
    model = _model(args)
    seqs = _sequences(args, model)
    e = entropy_summary(model, 1)
    rows = []
    for seq in seqs:
        ll = log_likelihood(model, seq)
        rows.append({"value": ll.value, "aep_statistic": ll.aep_statistic, "length": ll.length})
    summary = {"H_p": e.H_p, "rate": e.entropy_rate, "results": rows}
    _write_json(os.path.join(out, "loglik.json"), summary)
    return summary, ["loglik.json"]


def cmd_estimate(args, out):
    model = _model(args)
    seqs = _sequences(args, model)
    cov = solve_renewal(model, max(args.tau_max, 1))
    files = []

    def one(seq):
        reps = [estimate_waiting_time(seq, model, s) for s in range(1, args.s_max + 1)
                if seq.length > s + 1]
        reps += [estimate_autocov(seq, model, tau, cov=cov) for tau in range(0, args.tau_max + 1)
                 if seq.length > tau + 1]
        return reps

    results = _pmap(one, seqs, args.threads)
    for k, reps in enumerate(results):
        name = "estimates.csv" if len(results) == 1 else f"estimates_{k:04d}.csv"
        write_report_csv(os.path.join(out, name), reps)
        files.append(name)
    return {"replicas": len(results), "mu": model.mean}, files


def cmd_mixing(args, out):
    model = _model(args)
    _require(args, "horizon")
    b = alpha_mixing_bound(model, args.horizon)
    with open(os.path.join(out, "mixing.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "alpha_bound"])
        for t, v in enumerate(b.bounds, start=1):
            wr.writerow([t, repr(float(v))])
    summary = {"partial_sum": b.partial_sum, "solver_horizon": b.solver_horizon,
               "last_decade": b.last_decade}
    return summary, ["mixing.csv"]


FIGURE_MODELS = (
    ("polynomial", (2.0, 4.0)),
    ("stretched", (0.5, 1.0)),
)


def figure_lengths(desk_scale):
    return tuple(t // DESK_FACTOR for t in FULL_LENGTHS) if desk_scale else FULL_LENGTHS


def cmd_figures(args, out):
    """Data behind the six figures: two autocovariance comparisons, two
    waiting-time estimation studies and two autocovariance estimation studies."""
    horizon = args.horizon or 10_000
    lengths = figure_lengths(args.desk_scale)
    seed = 0 if args.seed is None else args.seed
    files = []
    summary = {"lengths": list(lengths), "seed": seed, "models": {}}
    for fig, (kind, exps) in enumerate(FIGURE_MODELS, start=1):
        models = {}
        name = f"fig{fig}_autocov_{kind}.csv"
        with open(os.path.join(out, name), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["exponent", "t", "c_t", "rho_t", "tail_proxy_t"])
            for e in exps:
                res = invert_spec(figure_spec(kind, e), FIGURE_INVERSION_HORIZON)
                w = models[e] = res.distribution
                cov = solve_renewal(w, horizon)
                px = tail_proxy(w, horizon).values
                for t in range(horizon + 1):
                    wr.writerow([e, t, repr(float(cov.c[t])), repr(float(cov.rho[t])),
                                 repr(float(px[t]))])
                summary["models"][f"{kind}:{e}"] = {"mu": w.mean, "t_max": w.t_max,
                                                    "model_id": w.model_id}
        files.append(name)

        # sequences are shared by the two estimation figures of this family
        jobs = [(e, k, t) for e in exps for k, t in enumerate(lengths)]
        seqs = _pmap(lambda j: generate(models[j[0]], j[2], seed, stream=j[1]), jobs, args.threads)
        for target, fig_no in (("p", fig + 2), ("rho", fig + 4)):
            name = f"fig{fig_no}_{'waiting' if target == 'p' else 'rho'}_{kind}.csv"
            with open(os.path.join(out, name), "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(["exponent", "target", "index", "estimate", "truth", "v",
                             "half_width", "t"])
                for (e, _, t), seq in zip(jobs, seqs):
                    w = models[e]
                    if target == "p":
                        reps = [estimate_waiting_time(seq, w, s) for s in range(1, args.s_max + 1)]
                    else:
                        cov = solve_renewal(w, args.tau_max)
                        reps = [estimate_autocov(seq, w, tau, cov=cov)
                                for tau in range(0, args.tau_max + 1)]
                    for r in reps:
                        wr.writerow([e, r.target, r.index, repr(r.estimate), repr(r.true_value),
                                     repr(r.variance_v), repr(r.half_width), r.sample_length])
            files.append(name)
    files.sort()
    return summary, files


COMMANDS = {
    "generate": cmd_generate,
    "autocov": cmd_autocov,
    "invert": cmd_invert,
    "entropy": cmd_entropy,
    "loglik": cmd_loglik,
    "estimate": cmd_estimate,
    "mixing": cmd_mixing,
    "figures": cmd_figures,
}

# options that never change the artifacts
_NON_SEMANTIC = {"out", "threads", "provenance"}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="model descriptor JSON file (or inline JSON)")
    common.add_argument("--seed", type=int, help="64-bit RNG seed")
    common.add_argument("--length", type=int, help="sequence length t")
    common.add_argument("--replicas", type=int, default=1)
    common.add_argument("--horizon", type=int)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--desk-scale", action="store_true",
                        help="shrink sequence lengths 100x")
    common.add_argument("--threads", type=int, default=1)

    p = argparse.ArgumentParser(prog="rbseq", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"rbseq {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sp = {name: sub.add_parser(name, parents=[common], help=fn.__doc__)
          for name, fn in COMMANDS.items()}
    sp["generate"].add_argument("--text", action="store_true", help="also write 0/1 text")
    sp["invert"].add_argument("--spec", help="covariance spec JSON {xi, m, phi}")
    sp["invert"].add_argument("--cov", help="CSV of t, c_t")
    sp["invert"].add_argument("--clip-tol", type=float, default=1e-10)
    for name in ("loglik", "estimate"):
        sp[name].add_argument("--input", help="sequence file (.rbsq or 0/1 text)")
    for name in ("estimate", "figures"):
        sp[name].add_argument("--s-max", type=int, default=20 if name == "estimate" else 200)
        sp[name].add_argument("--tau-max", type=int, default=10 if name == "estimate" else 100)
    rp = sub.add_parser("replay", help="re-run a provenance file and compare outputs")
    rp.add_argument("provenance")
    rp.add_argument("--out", help="directory for the re-run (default: a temporary one)")
    return p


def _config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NON_SEMANTIC}


def _resolve_model(cfg):
    # embed the model descriptor so the provenance file is self-contained
    for key in ("model", "spec"):
        v = cfg.get(key)
        if isinstance(v, str) and not v.lstrip().startswith("{"):
            cfg[key] = json.dumps(_load_json_arg(v, key), sort_keys=True)
    return cfg


def run(args):
    """Execute one parsed command. Returns the provenance record."""
    out = args.out
    os.makedirs(out, exist_ok=True)
    cfg = _resolve_model(_config(args))
    for k in ("model", "spec"):
        if cfg.get(k) is not None:
            setattr(args, k, cfg[k])
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise errors.ConfigError("--seed must be a 64-bit unsigned integer")
    if args.replicas < 1:
        raise errors.ConfigError("--replicas must be >= 1")
    summary, files = COMMANDS[args.command](args, out)
    chash = hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()
    prov = {
        "tool": "rbseq",
        "version": __version__,
        "numpy": np.__version__,
        "command": args.command,
        "config": cfg,
        "config_hash": chash,
        "seeds": [] if args.seed is None else [args.seed],
        "outputs": {f: _sha256(os.path.join(out, f)) for f in files},
        "summary": {k: _clean(v) for k, v in summary.items()},
    }
    _write_json(os.path.join(out, "provenance.json"), prov)
    return prov


def replay(path, out=None):
    with open(path) as fh:
        prov = json.load(fh)
    cfg = dict(prov["config"])
    out = out or tempfile.mkdtemp(prefix="rbseq-replay-")
    args = argparse.Namespace(**cfg, out=out, threads=1)
    new = run(args)
    diff = sorted(f for f, h in prov["outputs"].items() if new["outputs"].get(f) != h)
    if diff:
        raise errors.NumericalError(f"replay mismatch in {', '.join(diff)}")
    return new


def _fail(exc, code):
    info = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    pos = getattr(exc, "position", None)
    if pos is not None:
        info["position"] = pos
    print(json.dumps(info), file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            prov = replay(args.provenance, args.out)
        else:
            prov = run(args)
    except errors.ModelError as exc:
        return _fail(exc, 2)
    except errors.NumericalError as exc:
        return _fail(exc, 3)
    except (OSError, ValueError, KeyError) as exc:
        return _fail(exc, 2)
    print(json.dumps({"command": prov["command"], "summary": prov["summary"]},
                     default=_jsonable, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
