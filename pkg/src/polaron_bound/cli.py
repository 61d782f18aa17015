"""Command-line front end: ``polaron-bound <command> [options]``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import gaussian_weights as gw
from .artifact import (ArtifactVersionError, ProvenanceError, file_sha256, load_solution,
                       summary_of, write_solution)
from .bogoliubov import ClampingError, TruncationError, build_model, fock_matrices, fock_oracle, random_compressions, trace_correction
from .checks import SUITES, bogoliubov_suite, hessian_suite, pekar_suite, weights_suite
from .config import ConfigError, RunConfig, load_config
from .dispersion_bound import MomentumRangeError, assemble_bound, scaled_envelope
from .pekar_scf import ConstantConventionError, SCFError, ScfSettings, solve_pekar
from .radial_core import GridError, ResolutionError, build_grid
from .sector_operators import DeflationError, direct_trace, hessian_blocks

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3
NUMERICAL_ERRORS = (SCFError, ClampingError, TruncationError, ResolutionError, DeflationError,
                    ConstantConventionError, gw.IntegrationError, np.linalg.LinAlgError)


class UsageError(Exception):
    pass


def _fmt_k(k: float) -> str:
    return "inf" if math.isinf(k) else f"{k:g}"


class Outputs:
    """Collects emitted files for the manifest."""

    def __init__(self, root: Path, source: str | None):
        self.root = root
        self.source = source
        self.files: list[str] = []
        root.mkdir(parents=True, exist_ok=True)

    def text(self, name: str, content: str) -> Path:
        path = self.root / name
        path.write_text(content)
        self.files.append(name)
        return path

    def json(self, name: str, obj) -> Path:
        if isinstance(obj, dict) and self.source is not None:
            obj = {"source_checksum": self.source, **obj}
        return self.text(name, json.dumps(_jsonable(obj), sort_keys=True, indent=1) + "\n")

    def csv(self, name: str, header: list[str], rows) -> Path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.source is not None:
            buf.write(f"# source_checksum={self.source}\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
        return self.text(name, buf.getvalue())

    def manifest(self, command: str) -> Path:
        entries = [{"file": f, "sha256": file_sha256(self.root / f)} for f in sorted(set(self.files))]
        path = self.root / f"manifest_{command}.json"
        path.write_text(json.dumps({"command": command, "source_checksum": self.source, "files": entries},
                                   sort_keys=True, indent=1) + "\n")
        return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# -- commands ------------------------------------------------------------------

def _solve(cfg: RunConfig):
    grid = build_grid(cfg.n, cfg.r_max, cfg.scheme)
    return solve_pekar(grid, ScfSettings(mixing=cfg.mixing, tol=cfg.tol, max_iter=cfg.max_iter))


def cmd_solve(cfg: RunConfig, artifact: Path) -> int:
    sol = _solve(cfg)
    try:
        artifact.parent.mkdir(parents=True, exist_ok=True)
        digest = write_solution(sol, artifact)
    except OSError as exc:
        raise UsageError(f"cannot write artifact {artifact}: {exc}") from exc
    print(json.dumps({"artifact": str(artifact), "checksum": digest, **summary_of(sol)}, sort_keys=True))
    return EXIT_OK


def _need_artifact(path: Path | None) -> Path:
    if path is None:
        raise UsageError("--artifact is required")
    return path


def cmd_verify(cfg: RunConfig, artifact: Path, suite: str, out: Path | None) -> int:
    sol, digest = load_solution(artifact)
    chosen = SUITES if suite == "all" else (suite,)
    checks, oracle_rows = [], []
    model = None
    if "pekar" in chosen:
        checks += pekar_suite(sol)
    if "hessian" in chosen or "bogoliubov" in chosen:
        found, model = hessian_suite(sol, cfg.L_max)
        if "hessian" in chosen:
            checks += found
    if "bogoliubov" in chosen and model is not None:
        found, oracle_rows = bogoliubov_suite(model, sol, cfg.seed)
        checks += found
    if "weights" in chosen:
        wmodel = build_model(hessian_blocks(sol, cfg.weights_L_max, workers=cfg.workers))
        checks += weights_suite(sol, wmodel)
    report = {"source_checksum": digest, "suite": suite, "passed": all(c.passed for c in checks),
              "checks": [c.as_dict() for c in checks]}
    if oracle_rows:
        report["fock_oracle"] = oracle_rows
    text = json.dumps(_jsonable(report), sort_keys=True, indent=1)
    print(text)
    if out is not None:
        o = Outputs(out, digest)
        o.text(f"verify_{suite}.json", text + "\n")
        o.manifest("verify")
    return EXIT_OK if report["passed"] else EXIT_CHECK


def _traces_at(sol, cfg: RunConfig, K: float):
    model = build_model(hessian_blocks(sol, cfg.L_max, K, workers=cfg.workers))
    return model, trace_correction(model, direct_trace(sol, K))


def cmd_traces(cfg: RunConfig, artifact: Path, out: Path) -> int:
    sol, digest = load_solution(artifact)
    o = Outputs(out, digest)
    rows, summaries = [], []
    for K in cfg.k_ladder:
        model, rep = _traces_at(sol, cfg, K)
        for i, L in enumerate(sorted(model.blocks)):
            rows.append((_fmt_k(K), L, float(rep.sector_one_minus_h[i]), float(rep.sector_one_minus_sqrt_h[i]),
                         float(rep.sector_trace_t[i])))
        summaries.append(rep.summary())
    o.csv("traces.csv", ["K", "L", "tr_one_minus_H", "tr_one_minus_sqrtH", "tr_T"], rows)
    o.json("traces_summary.json", {"L_max": cfg.L_max, "cutoffs": summaries})
    o.manifest("traces")
    return EXIT_OK


def cmd_bound(cfg: RunConfig, artifact: Path, out: Path) -> int:
    sol, digest = load_solution(artifact)
    o = Outputs(out, digest)
    _, rep = _traces_at(sol, cfg, cfg.k_cutoff)
    meta = {"tables": [], "envelopes": []}
    for a in cfg.alphas:
        P = [p * a for p in cfg.p_list]
        table = assemble_bound(sol, rep, a, P, provenance=digest, trace_provenance=digest, c=cfg.c)
        o.text(f"bound_alpha{a:g}.csv", f"# source_checksum={digest}\n" + table.to_csv())
        env = scaled_envelope(table)
        meta["tables"].append(table.metadata())
        meta["envelopes"].append({"alpha": a, "slope": env.slope, "expected_slope": env.expected_slope,
                                  "max_deviation": env.max_deviation})
    meta["trace_summary"] = rep.summary()
    o.json("bound_metadata.json", meta)
    o.manifest("bound")
    return EXIT_OK


def cmd_weights(cfg: RunConfig, artifact: Path, out: Path) -> int:
    sol, digest = load_solution(artifact)
    o = Outputs(out, digest)
    model = build_model(hessian_blocks(sol, cfg.weights_L_max, cfg.k_cutoff, workers=cfg.workers))
    s = gw.default_s_grid(sol)
    comp = gw.displacement_components(sol, model, s)
    header = ["s", "cos_gamma", "w2", "w0", "w1", "w_tilde2", "n"]
    for a in cfg.alphas:
        for p in cfg.p_list:
            prof = gw.displacement_norms(sol, model, a, p * a, components=comp, delta=cfg.delta, eta=cfg.eta)
            o.csv(f"weights_alpha{a:g}_P{p:g}.csv", header, prof.csv_rows())
    grid = gw.integration_grid(sol)
    icomp = gw.displacement_components(sol, model, grid.s)
    comparison = gw.gaussian_comparison(sol, icomp, grid, cfg.alphas, "H", 0, cfg.delta, cfg.eta)
    norm = gw.leading_norm(sol, icomp, grid, cfg.alphas)
    v = gw.minus_three_halves(sol, cfg.alphas, grid)
    o.json("weights_reports.json", {"gaussian_comparison": comparison.as_dict(), "leading_norm": norm.as_dict(),
                                    "minus_three_halves": v.as_dict()})
    o.manifest("weights")
    return EXIT_OK


def cmd_oracle(cfg: RunConfig, artifact: Path | None, out: Path | None) -> int:
    rows = []
    one = fock_oracle(*fock_matrices(np.array([[0.25]])))
    rows.append({"case": "one_mode_h0.25", "oracle": one.energy, "closed_form": one.closed_form,
                 "truncation": one.change_last_step, "dimension": one.dimension})
    digest = None
    if artifact is not None:
        sol, digest = load_solution(artifact)
        model = build_model(hessian_blocks(sol, max(cfg.L_max, 3), workers=cfg.workers))
        for i, c in enumerate(random_compressions(model, 5, np.random.default_rng(cfg.seed))):
            res = fock_oracle(*fock_matrices(c["h"]), n_occ_max=30 if c["modes"] == 3 else 40)
            rows.append({"case": f"compression_{i}", "L": c["L"], "modes": c["modes"], "oracle": res.energy,
                         "closed_form": res.closed_form, "truncation": res.change_last_step,
                         "dimension": res.dimension})
    passed = all(abs(r["oracle"] - r["closed_form"]) <= max(10 * r["truncation"], 1e-8) for r in rows)
    report = {"rows": rows, "passed": passed}
    print(json.dumps(_jsonable(report), sort_keys=True, indent=1))
    if out is not None:
        o = Outputs(out, digest)
        o.json("oracle.json", report)
        o.manifest("oracle")
    return EXIT_OK if passed else EXIT_CHECK


# -- argument handling -------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value configuration file")
    common.add_argument("--artifact", type=Path, help="solved-field artifact (JSON)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--workers", type=int)
    common.add_argument("--alpha", help="comma-separated coupling ladder")
    common.add_argument("--k-cutoff", help="momentum cutoff (inf for none)")
    common.add_argument("--l-max", type=int)
    common.add_argument("--p-list", help="comma-separated momenta in units of alpha")
    common.add_argument("--n", type=int, help="radial grid size")
    common.add_argument("--r-max", type=float, help="radial box size")
    common.add_argument("--tol", type=float, help="solver tolerance")
    p = _Parser(prog="polaron-bound", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="solve for the classical field and write an artifact")
    v = sub.add_parser("verify", parents=[common], help="run invariant suites on an artifact")
    v.add_argument("--suite", choices=SUITES + ("all",), default="pekar")
    sub.add_parser("traces", parents=[common], help="sector traces over the cutoff ladder")
    sub.add_parser("bound", parents=[common], help="upper-bound tables over the coupling ladder")
    sub.add_parser("weights", parents=[common], help="displacement norms and Gaussian integrals")
    sub.add_parser("oracle", parents=[common], help="truncated-Fock comparison")
    return p


def config_from_args(args) -> RunConfig:
    overrides = {"workers": args.workers, "alphas": args.alpha, "k_cutoff": args.k_cutoff, "L_max": args.l_max,
                 "p_list": args.p_list, "n": args.n, "r_max": args.r_max, "tol": args.tol}
    if args.out is not None:
        overrides["out"] = str(args.out)
    return load_config(args.config, overrides)


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = config_from_args(args)
        out = Path(cfg.out)
        if args.command == "solve":
            return cmd_solve(cfg, args.artifact or out / "solution.json")
        if args.command == "verify":
            return cmd_verify(cfg, _need_artifact(args.artifact), args.suite, args.out)
        if args.command == "traces":
            return cmd_traces(cfg, _need_artifact(args.artifact), out)
        if args.command == "bound":
            return cmd_bound(cfg, _need_artifact(args.artifact), out)
        if args.command == "weights":
            return cmd_weights(cfg, _need_artifact(args.artifact), out)
        if args.command == "oracle":
            return cmd_oracle(cfg, args.artifact, args.out)
        raise UsageError(f"unknown command {args.command}")
    except (UsageError, ConfigError, GridError, MomentumRangeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ProvenanceError, ArtifactVersionError) as exc:
        print(f"provenance error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except NUMERICAL_ERRORS as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
