"""Command-line experiment driver.

Every subcommand resolves a configuration, creates a fresh timestamped run
directory, writes its CSV/JSON outputs there and finishes with
``manifest.json`` listing every file with its SHA-256 checksum.  Exit codes:
0 success, 1 invalid input or configuration, 2 numerical failure, 3 I/O.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .capacity import capacity_report, spectral_efficiency
from .config import EXECUTION_KEYS, ExperimentConfig, load_config
from .ensemble import resolve_threads, spectra_ensemble
from .errors import RandzsError, ValidationError
from .link import LinkParams, ShiftCovariance, lambda_bar_ensemble, write_covariance_matrix
from .lyapunov import (analytic_lambda, lyapunov_grid, thouless_dos, thouless_eta_profile,
                       write_lyapunov_grid)
from .operators import write_spectrum
from .scattering import analytic_lnb_variance, variance_growth, variance_ratio
from .signal import make_grid, sample_signal, write_signal
from .stats import (analytic_dos_bright, analytic_dos_scba, dos_1d, eta_profile, ipr_samples,
                    ipr_vs_lambda, linear_fit, mid_band_ipr, spacing_stats)

__all__ = ["main", "RunDirectory", "build_parser"]


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return _jsonable(v.item())
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


class RunDirectory:
    """Append-only output directory with a checksummed manifest."""

    def __init__(self, path: Path, command: str, cfg: ExperimentConfig, threads: int):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=False)
        self.command = command
        self.cfg = cfg
        self.threads = threads
        self.files = []
        self.started = time.time()
        self.base_meta = {"command": command, "tool_version": __version__,
                          "config_hash": cfg.hash(), "seed": cfg.get("experiment", "seed")}
        self._write_text("config.ini", cfg.to_text(EXECUTION_KEYS))

    def _target(self, name):
        p = self.path / name
        if p.exists():
            raise FileExistsError(f"refusing to overwrite {p}")
        return p

    def _write_text(self, name, text):
        p = self._target(name)
        p.write_text(text)
        self.files.append(p)
        return p

    def write_csv(self, name, columns, data, meta=None):
        """CSV with ``#`` metadata lines and a header row."""
        lines = [f"# {k}={json.dumps(_jsonable(v))}" for k, v in {**self.base_meta, **(meta or {})}.items()]
        lines.append(",".join(columns))
        arr = np.column_stack([np.asarray(c, dtype=float) for c in data]) if data else np.empty((0, 0))
        for row in arr:
            lines.append(",".join(format(float(v), ".17g") for v in row))
        return self._write_text(name, "\n".join(lines) + "\n")

    def write_json(self, name, obj):
        payload = {"meta": self.base_meta, **_jsonable(obj)}
        return self._write_text(name, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def adopt(self, paths):
        """Register files written by library writers."""
        self.files.extend(Path(p) for p in paths)

    def new_path(self, name):
        return self._target(name)

    def finish(self):
        entries = []
        for p in self.files:
            data = p.read_bytes()
            entries.append({"path": p.name, "sha256": hashlib.sha256(data).hexdigest(),
                            "bytes": len(data)})
        manifest = {"tool": "randzs", "tool_version": __version__, "command": self.command,
                    "config_hash": self.cfg.hash(), "config": self.cfg.canonical(),
                    "threads": self.threads, "backend": kernels.BACKEND,
                    "started_utc": _dt.datetime.fromtimestamp(self.started, _dt.timezone.utc).isoformat(),
                    "wall_clock_s": time.time() - self.started, "files": entries}
        (self.path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return manifest


# ------------------------------------------------------------------ commands

def _first_D(cfg, section="signal"):
    return float(cfg.get(section, "D")[0])


def _hist_stderr(counts, total, widths):
    return np.sqrt(counts) / (max(total, 1) * widths)


def cmd_gen(cfg, run, threads):
    grid = make_grid(cfg.get("signal", "length"), cfg.get("signal", "step"))
    sig = sample_signal(grid, _first_D(cfg), cfg.get("signal", "polarization"),
                        cfg.get("experiment", "seed"), member=cfg.get("signal", "member"))
    p = run.new_path("signal.txt")
    write_signal(p, sig)
    run.adopt([p])
    return {"n_points": grid.n_points, "power": sig.power()}


def _dark_ensemble(cfg, threads, vectors=False, scheme=None, D=None, reducer=None):
    s = cfg.section("signal")
    return spectra_ensemble(s["length"], s["step"], D if D is not None else _first_D(cfg),
                            s["runs"], cfg.get("experiment", "seed"), "dark",
                            scheme or cfg.get("spectral", "scheme"), s["polarization"],
                            vectors=vectors, reducer=reducer, threads=threads)


def cmd_dos_dark(cfg, run, threads):
    spectra = _dark_ensemble(cfg, threads)
    sp = cfg.section("spectral")
    est = dos_1d(spectra, sp["bins"], sp["edge_fraction"])
    run.write_csv("dos_dark.csv", ["bin_center", "density", "stderr"],
                  [est.bin_centers, est.density, est.stderr], est.meta)
    run.adopt(write_spectrum(run.new_path("spectrum_0000.csv"), spectra[0]))
    summary = {"flatness_max_over_min": est.flatness(), "mean_density": float(est.density.mean()),
               "free_density": 1 / math.pi, "n_realizations": est.n_realizations, **est.meta}
    run.write_json("dos_dark.json", summary)
    return {"flatness": summary["flatness_max_over_min"]}


def cmd_spacing(cfg, run, threads):
    spectra = _dark_ensemble(cfg, threads)
    sp = cfg.section("spectral")
    h = spacing_stats(spectra, sp["edge_fraction"], sp["spacing_bins"])
    c = 0.5 * (h.bin_edges[1:] + h.bin_edges[:-1])
    w = np.diff(h.bin_edges)
    run.write_csv("spacing.csv", ["bin_center", "density", "stderr"],
                  [c, h.density, _hist_stderr(h.counts, h.n_spacings, w)])
    s, ld = h.log_columns()
    run.write_csv("spacing_log.csv", ["spacing", "ln_density"], [s, ld])
    grid_s = np.linspace(0, h.bin_edges[-1], 101)
    run.write_csv("spacing_poisson.csv", ["spacing", "density"], [grid_s, np.exp(-grid_s)])
    out = {k: v for k, v in vars(h).items() if k not in ("bin_edges", "counts", "density")}
    run.write_json("spacing.json", out)
    return {"p_value": h.p_value, "log_r2": h.log_r2}


def cmd_ipr(cfg, run, threads):
    sp = cfg.section("spectral")
    Ds = cfg.get("signal", "D")
    mids = []
    for D in Ds:
        pairs = _dark_ensemble(cfg, threads, vectors=True, scheme=sp["ipr_scheme"], D=D,
                               reducer=ipr_samples)
        curve = ipr_vs_lambda(pairs, sp["ipr_window"], sp["edge_fraction"])
        run.write_csv(f"ipr_D{D:g}.csv", ["lambda", "ipr", "stderr", "edge"],
                      [curve.centers, curve.mean_ipr, curve.stderr, curve.edge.astype(float)],
                      {"D": D, "window": curve.window, "scheme": sp["ipr_scheme"]})
        mids.append(mid_band_ipr(pairs))
    mids = np.array(mids)
    run.write_csv("ipr_vs_D.csv", ["D", "ipr", "stderr"], [np.array(Ds), mids[:, 0], mids[:, 1]])
    result = {"D": list(Ds), "mid_band_ipr": mids[:, 0], "stderr": mids[:, 1]}
    if len(Ds) >= 3:
        fit = linear_fit(Ds, mids[:, 0])
        result["fit"] = vars(fit)
    run.write_json("ipr.json", result)
    return {"mid_band_ipr": mids[:, 0].tolist()}


def cmd_dos_bright(cfg, run, threads):
    s = cfg.section("signal")
    sp = cfg.section("spectral")
    D = _first_D(cfg)
    spectra = spectra_ensemble(s["length"], s["step"], D, s["runs"], cfg.get("experiment", "seed"),
                               "bright", sp["scheme"], s["polarization"], threads=threads)
    est = eta_profile(spectra, sp["eta_bins"], sp["eta_min"], sp["eta_max"])
    c = est.bin_centers
    run.write_csv("dos_bright.csv", ["bin_center", "density", "stderr"],
                  [c, est.density, est.stderr], {k: v for k, v in est.meta.items()
                                                 if k not in ("positive", "negative")})
    eta = np.linspace(0, max(4 * D, float(est.bin_edges[-1])), 401)
    run.write_csv("dos_bright_analytic.csv", ["eta", "density"], [eta, analytic_dos_bright(eta, D)],
                  {"D": D, "curve": "exact"})
    run.write_csv("dos_bright_scba.csv", ["eta", "density"], [eta, analytic_dos_scba(eta, D)],
                  {"D": D, "curve": "uniform band"})
    tail = eta[eta >= 2 * D]
    anchor = float(analytic_dos_bright(2 * D, D))
    run.write_csv("dos_bright_tail.csv", ["eta", "density"],
                  [tail, anchor * np.exp(-4 * (tail - 2 * D) / D)], {"D": D, "slope": -4 / D})
    ref = analytic_dos_bright(c, D)
    sel = (c >= 0.15) & (c <= 1.5) & (ref > 0)
    rms = float(np.sqrt(np.mean(((est.density[sel] - ref[sel]) / ref[sel]) ** 2))) if sel.any() else None
    run.write_json("dos_bright.json", {"rms_relative_0.15_1.5": rms, **est.meta})
    return {"rms": rms}


def _lgrid(cfg, threads):
    ly = cfg.section("lyapunov")
    xi = np.linspace(ly["xi_min"], ly["xi_max"], ly["xi_points"])
    eta = np.linspace(ly["eta_min"], ly["eta_max"], ly["eta_points"])
    return lyapunov_grid(xi, eta, _first_D(cfg), ly["x_max"], cfg.get("experiment", "seed"),
                         ly["step"], ly["batches"], ly["renorm"],
                         polarization=cfg.get("signal", "polarization"), threads=threads)


def cmd_lyap(cfg, run, threads):
    g = _lgrid(cfg, threads)
    p = run.new_path("lyapunov.csv")
    write_lyapunov_grid(p, g)
    run.adopt([p])
    run.write_csv("lyapunov_analytic.csv", ["eta", "lambda"], [g.eta, analytic_lambda(g.eta, g.D)],
                  {"D": g.D})
    return {"points": int(g.lam.size)}


def cmd_thouless(cfg, run, threads):
    g = _lgrid(cfg, threads)
    p = run.new_path("lyapunov.csv")
    write_lyapunov_grid(p, g)
    run.adopt([p])
    dos = thouless_dos(g)
    xc, ec = dos.bin_centers
    X, E = np.meshgrid(xc, ec, indexing="ij")
    run.write_csv("thouless.csv", ["xi", "eta", "density", "stderr"],
                  [X.ravel(), E.ravel(), dos.density.ravel(), dos.stderr.ravel()], {"D": g.D})
    eta, prof, se = thouless_eta_profile(dos)
    run.write_csv("thouless_eta.csv", ["bin_center", "density", "stderr"], [eta, prof, se], {"D": g.D})
    run.write_csv("thouless_analytic.csv", ["eta", "density"], [eta, analytic_dos_bright(eta, g.D)],
                  {"D": g.D})
    ref = analytic_dos_bright(eta, g.D)
    sel = (eta >= 0.3 - 1e-9) & (eta <= 1.5 + 1e-9)
    rms = float(np.sqrt(np.mean(((prof[sel] - ref[sel]) / ref[sel]) ** 2))) if sel.any() else None
    run.write_json("thouless.json", {"rms_relative_0.3_1.5": rms, "clipped": dos.meta["clipped"],
                                     "noise_to_curvature": dos.meta["noise_to_curvature"]})
    return {"rms": rms}


def cmd_bz_stats(cfg, run, threads):
    sc = cfg.section("scattering")
    D = _first_D(cfg)
    z = complex(sc["xi"], sc["eta"])
    b = variance_growth(D, z, sc["T"], sc["runs"], cfg.get("signal", "polarization"), sc["tau"],
                        cfg.get("experiment", "seed"), keep_samples=sc["dump_samples"],
                        threads=threads)
    T = b.T
    run.write_csv("bz_variance.csv", ["T", "variance", "stderr", "T_ln_T_over_2tau"],
                  [T, b.variances(), [s.robust_variance_stderr for s in b.per_T],
                   T * np.log(T / (2 * sc["tau"]))], {"tau": sc["tau"], "estimator": "IQR"})
    out = b.to_dict()
    if len(T) >= 2:
        out["ratio_measured"] = float(b.variances()[1] / b.variances()[0])
        out["ratio_predicted"] = variance_ratio(T[0], T[1], sc["tau"])
    out["analytic_variance"] = [analytic_lnb_variance(sc["eta"], D, t, sc["tau"]) for t in T]
    run.write_json("bz_stats.json", out)
    for t, x in b.samples.items():
        run.write_csv(f"bz_samples_T{t:g}.csv", ["re", "im"], [x.real, np.mod(x.imag, 2 * math.pi)])
    return {"fit_constant": b.fit_constant}


def _noise_cov(cfg, threads, run=None):
    nz = cfg.section("noise")
    seed = cfg.get("experiment", "seed")
    runs = nz["runs"] or None
    per_D = []
    for D in nz["D"]:
        covs = lambda_bar_ensemble(nz["length"], nz["step"], D, nz["realizations"], nz["sigma2"],
                                   seed, nz["method"], runs, threads=threads)
        lb = np.array([c.lambda_bar for c in covs])
        per_D.append({"D": D, "lambda_bar": float(lb.mean()),
                      "stderr": float(lb.std(ddof=1) / math.sqrt(lb.size)) if lb.size > 1 else None,
                      "per_realization": lb, "n_modes": [int(c.eigenvalues.size) for c in covs],
                      "summary": covs[0].summary()})
        if run is not None:
            logs = np.concatenate([np.log(c.C_eigenvalues) for c in covs])
            counts, edges = np.histogram(logs, bins=30)
            w = np.diff(edges)
            run.write_csv(f"noise_cov_hist_D{D:g}.csv", ["bin_center", "density", "stderr"],
                          [0.5 * (edges[1:] + edges[:-1]), counts / (logs.size * w),
                           _hist_stderr(counts, logs.size, w)], {"D": D, "variable": "ln eigenvalue"})
            if nz["full_matrix"]:
                p = run.new_path(f"noise_cov_matrix_D{D:g}.csv")
                write_covariance_matrix(p, covs[0])
                run.adopt([p])
    Ds = np.array([p["D"] for p in per_D])
    y = np.array([p["lambda_bar"] for p in per_D]) / nz["sigma2"]
    slope = float(np.sum(Ds * y) / np.sum(Ds ** 2))
    return per_D, slope, covs[0]


def cmd_noise_cov(cfg, run, threads):
    per_D, slope, _ = _noise_cov(cfg, threads, run)
    s2 = cfg.get("noise", "sigma2")
    run.write_csv("noise_cov_lambda_bar.csv", ["D", "lambda_bar_over_sigma2", "stderr"],
                  [[p["D"] for p in per_D], [p["lambda_bar"] / s2 for p in per_D],
                   [(p["stderr"] or math.nan) / s2 for p in per_D]])
    run.write_json("noise_cov.json", {"per_D": per_D, "slope_through_origin": slope,
                                      "sigma2": s2, "method": cfg.get("noise", "method")})
    return {"slope": slope}


def _link(cfg):
    return LinkParams(**cfg.section("link"))


def cmd_capacity(cfg, run, threads):
    cp = cfg.section("capacity")
    if cp["mode"].lower() != "fitted":
        raise ValidationError("the capacity command uses fitted mode; use report for measured")
    rep = spectral_efficiency(_link(cfg), "fitted", None, cp["D"], cp["c0"])
    p = run.new_path("capacity.json")
    p.write_text(rep.to_json())
    run.adopt([p])
    return {"R_bits_per_s_per_Hz": rep.R_bits_per_s_per_Hz}


def cmd_report(cfg, run, threads, args):
    cp = cfg.section("capacity")
    link = _link(cfg)
    cov = None
    if args.cov:
        data = json.loads(Path(args.cov).read_text())
        try:
            cov = ShiftCovariance.from_summary(data["per_D"][0]["summary"])
        except (KeyError, IndexError, TypeError) as exc:
            raise ValidationError(f"{args.cov}: not a noise-cov output") from exc
    elif not args.no_compute:
        _, _, cov = _noise_cov(cfg, threads)
    bz = json.loads(Path(args.bz).read_text()) if args.bz else None
    if bz is not None:
        bz.pop("meta", None)
    fitted = capacity_report(link, "fitted", None, cp["D"], cp["c0"], bz)
    out = {"fitted": json.loads(fitted.to_json())}
    if cov is None:
        capacity_report(link, "measured", None, None, cp["c0"])  # raises with the missing list
    measured = capacity_report(link, "measured", cov, None, cp["c0"], bz)
    out["measured"] = json.loads(measured.to_json())
    if fitted.R_bits_per_s_per_Hz is not None and measured.R_bits_per_s_per_Hz is not None:
        out["fitted_minus_measured_bits"] = fitted.R_bits_per_s_per_Hz - measured.R_bits_per_s_per_Hz
    run.write_json("report.json", out)
    return {"R_fitted": fitted.R_bits_per_s_per_Hz, "R_measured": measured.R_bits_per_s_per_Hz}


# -------------------------------------------------------------------- parser

COMMANDS = {
    "gen": (cmd_gen, "draw one signal realization"),
    "dos-dark": (cmd_dos_dark, "dark density of states"),
    "spacing": (cmd_spacing, "dark level-spacing statistics"),
    "ipr": (cmd_ipr, "inverse participation ratio against eigenvalue and D"),
    "dos-bright": (cmd_dos_bright, "bright eta profile with analytic overlays"),
    "lyap": (cmd_lyap, "Lyapunov exponent grid"),
    "thouless": (cmd_thouless, "density of states from the Lyapunov grid"),
    "bz-stats": (cmd_bz_stats, "ln b statistics against pulse duration"),
    "noise-cov": (cmd_noise_cov, "eigenvalue-shift covariance against D"),
    "capacity": (cmd_capacity, "spectral efficiency of a link"),
    "report": (cmd_report, "full capacity report with provenance"),
}

# flag dest -> (section, key), per command
_SIGNAL_FLAGS = {"D": ("signal", "D"), "size": ("signal", "length"), "step": ("signal", "step"),
                 "runs": ("signal", "runs"), "polarization": ("signal", "polarization")}
FLAG_MAP = {
    "gen": {**_SIGNAL_FLAGS, "member": ("signal", "member")},
    "dos-dark": {**_SIGNAL_FLAGS, "bins": ("spectral", "bins"), "scheme": ("spectral", "scheme")},
    "spacing": {**_SIGNAL_FLAGS, "scheme": ("spectral", "scheme")},
    "ipr": {**_SIGNAL_FLAGS, "scheme": ("spectral", "ipr_scheme")},
    "dos-bright": {**_SIGNAL_FLAGS, "bins": ("spectral", "eta_bins"), "scheme": ("spectral", "scheme")},
    "lyap": {"D": ("signal", "D"), "step": ("lyapunov", "step"), "x_max": ("lyapunov", "x_max"),
             "batches": ("lyapunov", "batches")},
    "bz-stats": {"D": ("signal", "D"), "runs": ("scattering", "runs"), "T": ("scattering", "T"),
                 "eta": ("scattering", "eta"), "xi": ("scattering", "xi"),
                 "tau": ("scattering", "tau"), "polarization": ("signal", "polarization")},
    "noise-cov": {"D": ("noise", "D"), "size": ("noise", "length"), "step": ("noise", "step"),
                  "realizations": ("noise", "realizations"), "sigma2": ("noise", "sigma2"),
                  "method": ("noise", "method"), "runs": ("noise", "runs")},
    "capacity": {"B": ("link", "B"), "D": ("capacity", "D"), "c0": ("capacity", "c0")},
    "report": {"B": ("link", "B"), "D": ("capacity", "D"), "c0": ("capacity", "c0")},
}
FLAG_MAP["thouless"] = FLAG_MAP["lyap"]

_FLAG_HELP = {"D": "noise strength(s)", "size": "system length L", "step": "grid step dx",
              "runs": "ensemble size", "polarization": "unpolarized or polarized",
              "member": "ensemble member index", "bins": "histogram bins", "scheme": "cd or mal",
              "x_max": "path length per batch", "batches": "independent noise paths",
              "T": "pulse half-durations", "eta": "Im z", "xi": "Re z", "tau": "grid step tau",
              "realizations": "signal realizations per D", "sigma2": "normalized noise strength",
              "method": "exact or montecarlo", "B": "bandwidth in Hz", "c0": "entropy constant"}
_MULTI = {"D", "T"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration file")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one configuration value (repeatable)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    common.add_argument("--out", help="parent directory for run directories")
    common.add_argument("--run-dir", help="explicit run directory (must not exist)")
    common.add_argument("--quiet", action="store_true", help="no summary on stdout")
    p = _Parser(prog="randzs", description="Random Zakharov-Shabat spectra experiments.")
    p.add_argument("--version", action="version", version=f"randzs {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        for dest in FLAG_MAP.get(name, {}):
            flag = "--" + dest.replace("_", "-")
            if dest in _MULTI:
                sp.add_argument(flag, dest=dest, nargs="+", help=_FLAG_HELP[dest])
            else:
                sp.add_argument(flag, dest=dest, help=_FLAG_HELP[dest])
        if name == "bz-stats":
            sp.add_argument("--dump-samples", action="store_true", help="write per-T sample CSVs")
        if name == "noise-cov":
            sp.add_argument("--full-matrix", action="store_true", help="write the covariance matrix")
        if name == "report":
            sp.add_argument("--cov", help="noise_cov.json from an earlier run")
            sp.add_argument("--bz", help="bz_stats.json from an earlier run (supplementary)")
            sp.add_argument("--no-compute", action="store_true",
                            help="fail instead of computing missing inputs")
    return p


def resolve(args) -> ExperimentConfig:
    overrides = list(args.set)
    for dest, (section, key) in FLAG_MAP.get(args.command, {}).items():
        v = getattr(args, dest, None)
        if v is not None:
            overrides.append(f"{section}.{key}={','.join(v) if isinstance(v, list) else v}")
    if args.seed is not None:
        overrides.append(f"experiment.seed={args.seed}")
    if getattr(args, "dump_samples", False):
        overrides.append("scattering.dump_samples=true")
    if getattr(args, "full_matrix", False):
        overrides.append("noise.full_matrix=true")
    if args.out is not None:
        overrides.append(f"experiment.output={args.out}")
    if args.threads is not None:
        overrides.append(f"experiment.threads={args.threads}")
    return load_config(args.config, overrides)


def _run_path(args, cfg):
    if args.run_dir:
        return Path(args.run_dir)
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    return Path(cfg.get("experiment", "output")) / f"{stamp}-{args.command}"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        threads = resolve_threads(cfg.get("experiment", "threads") or None)
        run = RunDirectory(_run_path(args, cfg), args.command, cfg, threads)
        fn = COMMANDS[args.command][0]
        summary = fn(cfg, run, threads, args) if args.command == "report" else fn(cfg, run, threads)
        run.finish()
    except RandzsError as exc:
        print(f"randzs {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"randzs {args.command}: I/O error: {exc}", file=sys.stderr)
        return 3
    if not args.quiet:
        print(json.dumps({"run_dir": str(run.path), **_jsonable(summary)}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
