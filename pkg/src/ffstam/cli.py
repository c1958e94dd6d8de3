"""Command-line entry point.

Every subcommand writes its outputs plus a ``manifest.json`` into ``--out``
(default ``ffstam-out/<command>``). Module errors exit with status 2 and print
``error: <category>: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from .errors import FFStamError
from .realroot import DEFAULT_DIGITS, DIGITS_ENV, PrecisionContext, RootConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("ffstam")
MANIFEST_NAME = "manifest.json"


def tool_version() -> str:
    try:
        return metadata.version("ffstam")
    except metadata.PackageNotFoundError:
        return "unknown"


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    precision: dict
    outputs: list = field(default_factory=list)
    argv: list = field(default_factory=list)
    version: str = field(default_factory=tool_version)
    python: str = field(default_factory=platform.python_version)
    numpy: str = field(default_factory=lambda: np.__version__)
    started: float = field(default_factory=time.time)
    wall_clock_s: float = 0.0
    notes: dict = field(default_factory=dict)

    def write(self, out: Path) -> Path:
        path = out / MANIFEST_NAME
        path.write_text(json.dumps(asdict(self), indent=2, default=str) + "\n")
        return path


def _write_csv(path: Path, header, rows, meta: dict | None = None) -> Path:
    with open(path, "w", newline="") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}={value}\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def _read_roots(path: str) -> np.ndarray:
    text = Path(path).read_text().strip()
    if text.startswith("["):
        vals = json.loads(text)
    else:
        vals = [float(v) for v in text.replace(",", " ").split()]
    return np.asarray(vals, dtype=float)


def _load_toml(path: str) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _precision(args) -> PrecisionContext:
    if getattr(args, "digits", None):
        return PrecisionContext(args.digits)
    return PrecisionContext.from_env(DEFAULT_DIGITS)


# -- subcommands ---------------------------------------------------------------


def cmd_hermite(args, out: Path, man: RunManifest) -> None:
    from .reference import hermite_roots

    ctx = _precision(args)
    h = hermite_roots(args.n, ctx)
    rows = [[i + 1, ctx.mp.nstr(v, ctx.digits) if not ctx.is_float else repr(float(v))]
            for i, v in enumerate(h.roots)]
    man.outputs.append(str(_write_csv(out / "hermite.csv", ["index", "root"], rows)))
    man.config = {"n": args.n}
    for _, v in rows:
        print(v)


def cmd_deficit(args, out: Path, man: RunManifest) -> None:
    from .fisher import stam_deficit
    from .reference import hermite_roots

    ctx = _precision(args) if args.digits or os.environ.get(DIGITS_ENV) else PrecisionContext(15)
    h = hermite_roots(args.n).array() if args.n else None
    alpha = _read_roots(args.alpha) if args.alpha else h
    beta = _read_roots(args.beta) if args.beta else h
    if alpha is None or beta is None:
        raise SystemExit("deficit needs --alpha/--beta files or --n for the Hermite pair")
    rep = stam_deficit(RootConfig.from_values(alpha), RootConfig.from_values(beta), args.p, ctx)
    data = asdict(rep)
    (out / "deficit.json").write_text(json.dumps(data, indent=2) + "\n")
    man.outputs.append(str(out / "deficit.json"))
    man.config = {"n": len(alpha), "p": args.p, "alpha": list(map(float, alpha)),
                  "beta": list(map(float, beta))}
    print(json.dumps(data, indent=2))


def _parse_schedule(text: str | None) -> dict[int, int]:
    if not text:
        return {}
    sched = {}
    for item in text.split(","):
        n, d = item.split(":")
        sched[int(n)] = int(d)
    return sched


def cmd_spectrum(args, out: Path, man: RunManifest) -> None:
    from .spectrum import CSV_HEADER, digits_for, spectrum_audit

    schedule = _parse_schedule(args.schedule)
    audits = spectrum_audit(args.n_list, schedule)
    path = _write_csv(out / "spectrum.csv", CSV_HEADER, [a.csv_row() for a in audits])
    man.outputs.append(str(path))
    man.config = {"n_list": args.n_list,
                  "schedule": {n: schedule.get(n, digits_for(n)) for n in args.n_list}}
    man.precision = {"digits": man.config["schedule"]}
    for a in audits:
        print(f"n={a.n} digits={a.digits} sigma_1={float(a.sigma[0]):.9f} "
              f"max_rel_err={a.max_rel_err_first10:.3e} symmetry={a.symmetry_defect:.3e}")


def cmd_clt(args, out: Path, man: RunManifest) -> None:
    from .clt import CSV_HEADER, DEFAULT_CTX, clt_trajectory, seeded_start

    ctx = PrecisionContext(args.digits) if args.digits else DEFAULT_CTX
    mode = int(args.dir.lstrip("e"))
    traj = clt_trajectory(seeded_start(args.n, mode, args.eps), args.steps, ctx)
    rows = [[k, f"{d:.6e}"] for k, _, d in traj.steps]
    meta = {"n": args.n, "direction": args.dir, "eps": args.eps}
    man.outputs.append(str(_write_csv(out / "clt.csv", CSV_HEADER, rows, meta)))
    man.config = {"n": args.n, "dir": args.dir, "eps": args.eps, "steps": args.steps}
    man.precision = {"digits": ctx.digits}
    man.notes = {"fitted_rate": traj.fitted_rate, "fit_window": traj.fit_window}
    print(f"fitted_rate={traj.fitted_rate:.6f} window={traj.fit_window}")


def _search_config(data: dict):
    from .search import SearchConfig

    return SearchConfig.from_mapping(data.get("search", data))


def cmd_search(args, out: Path, man: RunManifest) -> None:
    from .search import closed_loop_run

    cfg = _search_config(_load_toml(args.config))
    buf = closed_loop_run(cfg)
    path = out / "elites.jsonl"
    buf.to_jsonl(path)
    man.outputs.append(str(path))
    man.config, man.seed = cfg.to_dict(), cfg.seed
    best = buf.best
    man.notes = {"round_best": buf.round_best, "discarded": buf.discarded,
                 "best_objective": best.objective_value if best else None}
    if best is None:
        print("no feasible samples")
    else:
        print(f"best {cfg.objective}={best.objective_value:.6e} g_p={best.g_p:.6e} "
              f"rho_p={best.rho_p:.6e} D={best.diagnostics.D:.3e} d_PQ={best.diagnostics.d_PQ:.3e}")


def cmd_sweep(args, out: Path, man: RunManifest) -> None:
    from .search import SWEEP_HEADER, sweep

    data = _load_toml(args.config)
    grid_cfg = data.get("grid", {})
    grid = [(n, p) for n in grid_cfg.get("n", [6]) for p in grid_cfg.get("p", [2.0])]
    template = dict(data.get("search", {}))
    template.setdefault("n", grid[0][0])
    template.setdefault("p", grid[0][1])
    cfg = _search_config({"search": template})
    workers = int(args.workers or data.get("workers", 1))
    rep = sweep(grid, cfg, workers=workers)
    man.outputs.append(str(_write_csv(out / "sweep.csv", SWEEP_HEADER,
                                      [c.csv_row() for c in rep.cells])))
    cells_dir = out / "elites"
    cells_dir.mkdir(exist_ok=True)
    for c in rep.cells:
        if c.buffer is not None:
            path = cells_dir / f"n{c.n}_p{c.p:g}.jsonl"
            c.buffer.to_jsonl(path)
            man.outputs.append(str(path))
    man.config = {"grid": [list(g) for g in grid], "search": cfg.to_dict(), "workers": workers}
    man.seed = cfg.seed
    for c in rep.cells:
        print(f"n={c.n} p={c.p:g} g_p={c.g_p:.4e} sign={c.sign:+d} {c.status}")


def cmd_aht(args, out: Path, man: RunManifest) -> None:
    from . import aht
    from .reference import Family, default_library, family_reference
    from .search import EliteBuffer

    buf = EliteBuffer.from_jsonl(args.elites)
    if not buf.entries:
        raise aht.EmptyElites(f"no elite records in {args.elites}")
    n, p = buf.n, buf.p
    library = default_library(n)
    if args.families:
        wanted = set(args.families)
        library = [ref for ref in library if ref.family.value in wanted or ref.label in wanted]
    screened = [ref for ref in library if ref.family is not Family.HERMITE]
    results = [aht.screen_family(buf, ref, args.top) for ref in screened]
    man.outputs.append(str(_write_csv(out / "screen.csv", aht.SCREEN_HEADER,
                                      [r.csv_row() for r in results])))
    summary = aht.summarize_elites(buf, library or [family_reference(Family.HERMITE, n)],
                                   top=args.top)
    man.outputs.append(str(_write_csv(out / "summary.csv", aht.SUMMARY_HEADER,
                                      [summary.csv_row(n, p)])))
    sym_rows = [[flag, t, frac] for (flag, t), frac in sorted(summary.sym_fractions.items())]
    man.outputs.append(str(_write_csv(out / "symmetry.csv", ["flag", "t", "fraction"], sym_rows)))
    for which in ("alpha", "beta"):
        rows = aht.order_statistic_bands(buf, which)
        man.outputs.append(str(_write_csv(out / f"bands_{which}.csv", aht.band_header(), rows)))
    gaps = []
    for i, e in enumerate(buf.entries[: args.top]):
        for which in ("alpha", "beta"):
            x = getattr(e, which)
            if x.size >= 3:
                gaps.append([i, which, aht.gap_statistic(x)])
    man.outputs.append(str(_write_csv(out / "gap_statistic.csv", ["entry", "which", "gap_stat"], gaps)))
    man.config = {"elites": str(args.elites), "families": [r.label for r in library],
                  "top": args.top, "n": n, "p": p}
    man.notes = {"caveat": aht.CAVEAT}
    print(f"best_family={summary.best_family} consistency={summary.consistency:.3f} "
          f"median_d_joint={summary.median_d_joint:.3f}")
    for r in results:
        print(f"{r.family}: E={r.e_value:.4g} wins={r.wins}/{r.m_eff} {r.favoured.value}")
    print(aht.CAVEAT)


def cmd_report(args, out: Path, man: RunManifest) -> None:
    root = Path(args.run)
    manifests = sorted(root.rglob(MANIFEST_NAME))
    runs = []
    for path in manifests:
        if path.parent == out:
            continue
        data = json.loads(path.read_text())
        runs.append({"dir": str(path.parent), "command": data.get("command"),
                     "wall_clock_s": data.get("wall_clock_s"), "notes": data.get("notes", {}),
                     "outputs": data.get("outputs", [])})
    (out / "report.json").write_text(json.dumps(runs, indent=2, default=str) + "\n")
    man.outputs.append(str(out / "report.json"))
    man.config = {"run": str(root)}
    for r in runs:
        print(f"{r['command']:>15}  {r['wall_clock_s']:.2f}s  {r['dir']}")
        for note, value in r["notes"].items():
            print(f"{'':>17}{note}: {value}")


COMMANDS = {
    "hermite": cmd_hermite,
    "deficit": cmd_deficit,
    "spectrum-audit": cmd_spectrum,
    "clt": cmd_clt,
    "search": cmd_search,
    "sweep": cmd_sweep,
    "aht": cmd_aht,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ffstam", description=__doc__.splitlines()[0])
    ap.add_argument("--out", help="output directory (default ffstam-out/<command>)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hermite", help="normalised Hermite roots")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--digits", type=int, help=f"working precision (env {DIGITS_ENV})")

    p = sub.add_parser("deficit", help="p-Stam deficit of a pair")
    p.add_argument("--n", type=int, help="use h^(n) for any missing root file")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--alpha")
    p.add_argument("--beta")
    p.add_argument("--digits", type=int)

    p = sub.add_parser("spectrum-audit", help="singular values of the coupling matrix")
    p.add_argument("--n-list", type=int, nargs="+", required=True)
    p.add_argument("--schedule", help="per-degree digits, e.g. 10:60,20:80")

    p = sub.add_parser("clt", help="finite free CLT trajectory near Hermite")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dir", default="e2", help="perturbation mode e1, e2, ...")
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--digits", type=int)

    p = sub.add_parser("search", help="closed-loop extremal search")
    p.add_argument("--config", required=True, help="TOML file with a [search] table")

    p = sub.add_parser("sweep", help="closed-loop search over an (n, p) grid")
    p.add_argument("--config", required=True, help="TOML file with [grid] and [search] tables")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("aht", help="family screen of an elite population")
    p.add_argument("--elites", required=True, help="elite JSONL file")
    p.add_argument("--families", nargs="*", help="family names or labels to keep")
    p.add_argument("--top", type=int, default=512)

    p = sub.add_parser("report", help="consolidate manifests under a directory")
    p.add_argument("--run", required=True)
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out or Path("ffstam-out") / args.command)
    out.mkdir(parents=True, exist_ok=True)
    man = RunManifest(command=args.command, config={}, seed=None, argv=argv,
                      precision={"digits": getattr(args, "digits", None)
                                 or int(os.environ.get(DIGITS_ENV, DEFAULT_DIGITS))})
    t0 = time.perf_counter()
    try:
        COMMANDS[args.command](args, out, man)
    except FFStamError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        man.notes["error"] = exc.category
        man.wall_clock_s = time.perf_counter() - t0
        man.write(out)
        return 2
    except (OSError, ValueError, KeyError, tomllib.TOMLDecodeError) as exc:
        print(f"error: invalid_input: {exc}", file=sys.stderr)
        return 2
    man.wall_clock_s = time.perf_counter() - t0
    man.write(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
