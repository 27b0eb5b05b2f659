"""Command-line entry point ``diffstc``.

Verbs::

    sim                 run a BER sweep from a JSON config, write CSV
    search-u            exhaustive DUSTM u search (JSON)
    search-ring         DAPSK ring-ratio search (CSV trace)
    search-rotation     QAM rotation search for MDC codes (CSV trace)
    search-8qam         two-ring 8-QAM angle search for MDC codes (CSV trace)
    analyze-code        codebook rank / coding gain report (JSON)
    validate            structural self-checks (pass/fail table)
    emit-constellation  constellation points and labels (JSON)

Config values can be overridden with dotted ``key=value`` arguments
(values are parsed as JSON when possible).  Exit status: 0 success,
1 failed validation, 2 config or unsupported combination, 3 capacity
guard, 4 I/O.
"""

import argparse
import csv
import hashlib
import io
import json
import sys

import numpy as np

from . import design_analysis, dustm, simkit, stcodes
from .alphabets import Kind, build, from_spec
from .errors import CapacityError, ConfigError, DiffStcError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CAPACITY, EXIT_IO = 0, 1, 2, 3, 4


def _value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg, overrides):
    """Set dotted ``key=value`` overrides on a nested dict (in place)."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, val = item.split("=", 1)
        parts = key.strip().split(".")
        d = cfg
        for p in parts[:-1]:
            d = d.setdefault(p, {})
            if not isinstance(d, dict):
                raise ConfigError(f"cannot override inside non-object key {key!r}")
        d[parts[-1]] = _value(val)
    return cfg


def load_config(path, overrides=(), seed=None):
    cfg = {}
    if path:
        try:
            with open(path) as fh:
                cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError(f"{path}: top level must be an object")
    apply_overrides(cfg, overrides)
    if seed is not None:
        cfg["seed"] = seed
    return cfg


def _hash(obj):
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha1(b"blob %d\0" % len(blob) + blob).hexdigest()[:16]


class _Output:
    """Text sink for one command: stdout or a file (appended with ``--append``)."""

    def __init__(self, path, append):
        self.path, self.append = path, append

    def write(self, text):
        if not self.path or self.path == "-":
            sys.stdout.write(text)
            return
        try:
            with open(self.path, "a" if self.append else "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {self.path}: {exc.strerror or exc}") from exc


def _trace_csv(resolved, trace, columns, best):
    buf = io.StringIO()
    buf.write(f"# config_hash {_hash(resolved)}\n# config {json.dumps(resolved, sort_keys=True)}\n")
    buf.write(f"# best {json.dumps(best, sort_keys=True)}\n")
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    w.writerows(trace)
    return buf.getvalue()


def cmd_sim(args):
    cfg = simkit.SimConfig.from_dict(load_config(args.config, args.overrides, args.seed))
    if args.workers:
        cfg.workers = args.workers
    rows = simkit.run_ber(cfg)
    if args.out and args.out != "-":
        simkit.write_csv(rows, args.out, append=args.append, meta=simkit.config_header(cfg))
    else:
        buf = io.StringIO()
        for line in simkit.config_header(cfg):
            buf.write(f"# {line}\n")
        w = csv.DictWriter(buf, fieldnames=simkit.CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(r.as_record() for r in rows)
        sys.stdout.write(buf.getvalue())
    for r in rows:
        if r.flagged:
            print(f"warning: BER does not decrease over the grid ({cfg.scheme})", file=sys.stderr)
    return EXIT_OK


def cmd_search_u(args):
    cfg = {"M": 2, "L": 16, "coprime_only": True}
    cfg.update(load_config(args.config, args.overrides))
    res = dustm.search_u(int(cfg["M"]), int(cfg["L"]), bool(cfg["coprime_only"]))
    res["config"], res["config_hash"] = cfg, _hash(cfg)
    _Output(args.out, args.append).write(json.dumps(res) + "\n")
    return EXIT_OK


def _search(args, objective, defaults, columns):
    cfg = dict(defaults)
    cfg.update(load_config(args.config, args.overrides, args.seed))
    grid = cfg.pop("grid")
    if args.grid:
        key = next(iter(grid))
        grid = dict(grid, theta1=args.grid, theta2=args.grid) if objective == "MDC_8QAM" else {key: args.grid}
    budget = cfg.pop("budget", None)
    res = design_analysis.grid_search(objective, grid, budget, **cfg)
    resolved = dict(cfg, grid=grid, budget=budget, objective=objective)
    best = {"params": res.params, "value": res.value, "complete": res.complete}
    _Output(args.out, args.append).write(_trace_csv(resolved, res.trace, columns, best))
    if not res.complete:
        print("warning: evaluation budget exhausted, result is partial", file=sys.stderr)
    return EXIT_OK


def cmd_search_ring(args):
    return _search(args, "RING_RATIO", {"grid": {"a": "1.4:3.0:0.1"}, "q_p": 8, "q_a": 2, "ebn0_db": 18.0,
                                        "bits": 200_000, "seed": 1}, ["a", "value", "bit_errors", "bits"])


def cmd_search_rotation(args):
    return _search(args, "QAM_ROTATION", {"grid": {"theta": "0:45:0.01"}, "q": 16}, ["theta", "value"])


def cmd_search_8qam(args):
    return _search(args, "MDC_8QAM", {"grid": {"theta1": "0:89.99:0.05", "theta2": "0:89.99:0.05",
                                               "r": [1.37]}}, ["r", "theta1", "theta2", "value"])


def _codebook_from(cfg):
    if "u" in cfg:
        return dustm.make_cyclic(cfg["u"], int(cfg["L"])).codebook()
    code = stcodes.make_code(str(cfg.get("code", "ALAMOUTI")).upper())
    const = cfg.get("constellation", "psk4")
    alph = [from_spec(c) for c in const] if isinstance(const, list) else from_spec(const)
    Vs, _ = stcodes.codebook(code, alph)
    return Vs


def cmd_analyze_code(args):
    cfg = {"code": "ALAMOUTI", "constellation": "psk4", "N": 1}
    cfg.update(load_config(args.config, args.overrides))
    rep = design_analysis.distance_spectrum(_codebook_from(cfg), N=int(cfg["N"]))
    out = json.loads(rep.to_json())
    out["config"], out["config_hash"] = cfg, _hash(cfg)
    _Output(args.out, args.append).write(json.dumps(out) + "\n")
    return EXIT_OK


def validation_checks():
    """Structural self-checks as ``(name, passed)`` pairs."""
    checks = []
    for kind in ("ALAMOUTI", "TH4"):
        code = stcodes.make_code(kind)
        for k, ok in stcodes.validate_ostbc(code).items():
            checks.append((f"ostbc {kind} {k}", bool(ok)))
        cert = design_analysis.ostbc_distance_certificate(code, from_spec("psk4"))
        checks.append((f"ostbc {kind} distance certificate", cert < 1e-12))
    for kind in ("MDC4", "MDC8"):
        for k, ok in stcodes.validate_mdc(stcodes.make_code(kind)).items():
            checks.append((f"mdc {kind} {k}", bool(ok)))
    for kind in ("ALAMOUTI", "TH4", "MDC4", "MDC8"):
        code = stcodes.make_code(kind)
        x = np.exp(1j * np.arange(1, code.K + 1)) * np.arange(1, code.K + 1)
        d = np.abs(stcodes.assemble(code, x) - stcodes.assemble_ab(code, x)).max()
        checks.append((f"dispersion forms agree {kind}", d < 1e-12))
    for kind in ("MDC4", "MDC8"):
        code = stcodes.make_code(kind)
        x = np.exp(0.3j * np.arange(code.K)) * (1 + np.arange(code.K) / 3)
        _, direct, closed = stcodes.gram(code, x)
        checks.append((f"gram closed form {kind}", np.abs(direct - closed).max() < 1e-12))
    for (M, eta) in sorted(dustm.TABLE_U):
        u, L = dustm.table_u(M, eta)
        code = dustm.make_cyclic(u, L)
        closed = np.allclose(code.power(L), np.eye(M), atol=1e-12) and np.allclose(
            code.power(3) @ code.power(L - 1), code.power(2), atol=1e-12)
        checks.append((f"dustm group closure M={M} L={L}", bool(closed)))
    for spec in ("psk2", "psk4", "psk8", "psk16", "qam16", "qam16r", "qam64", "qam8", "qam32", "omdc4",
                 "omdc8", "mdc8", "dapsk8x2a2.1"):
        c = from_spec(spec)
        ok = abs(c.energy() - 1.0) < 1e-12 and len(set(c.labels)) == c.size
        checks.append((f"constellation {spec} unit energy, distinct labels", ok))
    return checks


def cmd_validate(args):
    checks = validation_checks()
    width = max(len(n) for n, _ in checks)
    lines = [f"{n:<{width}}  {'PASS' if ok else 'FAIL'}" for n, ok in checks]
    failed = sum(not ok for _, ok in checks)
    lines.append(f"{len(checks) - failed}/{len(checks)} checks passed")
    _Output(args.out, args.append).write("\n".join(lines) + "\n")
    return EXIT_OK if not failed else EXIT_FAIL


def cmd_emit_constellation(args):
    cfg = load_config(args.config, args.overrides)
    spec = cfg.get("spec", "qam16")
    if isinstance(spec, dict) and "kind" in spec:
        c = build(Kind(str(spec["kind"]).upper()), **{k: v for k, v in spec.items() if k != "kind"})
    else:
        c = from_spec(spec)
    _Output(args.out, args.append).write(c.to_json() + "\n")
    return EXIT_OK


COMMANDS = {
    "sim": cmd_sim, "search-u": cmd_search_u, "search-ring": cmd_search_ring,
    "search-rotation": cmd_search_rotation, "search-8qam": cmd_search_8qam,
    "analyze-code": cmd_analyze_code, "validate": cmd_validate, "emit-constellation": cmd_emit_constellation,
}


def build_parser():
    p = argparse.ArgumentParser(prog="diffstc", description="Differential space-time coding experiments.")
    p.add_argument("verb", choices=sorted(COMMANDS))
    p.add_argument("overrides", nargs="*", help="dotted key=value config overrides")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--workers", type=int, help="simulation worker threads")
    p.add_argument("--append", action="store_true", help="append to --out instead of overwriting")
    p.add_argument("--grid", help="search grid start:stop:step (or comma list)")
    return p


def run_command(argv=None):
    """Parse `argv` and execute; returns the process exit status."""
    try:
        args = build_parser().parse_intermixed_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return COMMANDS[args.verb](args)
    except CapacityError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except DiffStcError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TypeError, ValueError, KeyError) as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None):
    sys.exit(run_command(argv))


if __name__ == "__main__":
    main()
