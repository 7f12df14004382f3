"""Command-line batch runner: ``corrqpt {analytic,tomography,scan}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from corrqpt import __version__
from corrqpt.errors import CorrQPTError, DimensionError
from corrqpt.linalg import frobenius, hermitian_eig
from corrqpt.prng import derive_seed
from corrqpt.report import ExperimentConfig, Report, write_report
from corrqpt.scenarios import (
    ScanRow,
    canonical_cnot_bell,
    format_scan_table,
    haar_unitary,
    make_instance,
    ncp_scan,
    random_instance,
    vanishing_memory_instance,
)
from corrqpt.states import evolve_reduce, parse_state, parse_unitary, reduced_evolution
from corrqpt.supermap import (
    assemble_b,
    build_mmap,
    contract_unnormalized,
    cp_check,
    initial_state_of,
    kraus_of,
    memory_invariants,
    memory_of,
    mmap_invariants,
)
from corrqpt.tomography import (
    preparation_basis,
    pure_state_basis,
    reconstruct_mmap,
    simulate_tomography,
)

log = logging.getLogger("corrqpt")

OUTPUT_DIR_ENV = "CORRQPT_OUTPUT_DIR"


def _load_scenario(cfg: ExperimentConfig):
    sc = cfg.scenario
    if isinstance(sc, dict):
        u, dS, dE = parse_unitary(Path(sc["unitary"]).read_text(encoding="utf-8"))
        state = parse_state(Path(sc["state"]).read_text(encoding="utf-8"))
        if (state.dS, state.dE) != (dS, dE) or (dS, dE) != (cfg.dS, cfg.dE):
            raise DimensionError(
                f"files describe ({state.dS}, {state.dE}) and ({dS}, {dE}); config says ({cfg.dS}, {cfg.dE})"
            )
        return make_instance("files", u, state, cfg.seed)
    if sc == "random":
        return random_instance(cfg.dS, cfg.dE, cfg.w, cfg.seed, label=f"random-w{cfg.w:g}")
    if (cfg.dS, cfg.dE) != (2, 2):
        raise DimensionError(f"scenario {sc!r} is defined for dS = dE = 2 only")
    if sc == "canonical_cnot_bell":
        return canonical_cnot_bell()
    return vanishing_memory_instance(cfg.seed)


def _decomposition_metrics(report: Report, m, norm_chi: float) -> None:
    _, k = memory_of(m)
    b = assemble_b(m)
    report.metrics.update(
        norm_chi=norm_chi,
        norm_K=frobenius(k.tensor),
        norm_Baff=frobenius(b.affine),
        min_eig_M=float(hermitian_eig(m.tensor).eigenvalues[0]),
        min_eig_B=cp_check(b.choi(), "dynamical")[0],
    )


def _construction_checks(report: Report, inst, m) -> None:
    u, state = inst.u, inst.state
    inv = mmap_invariants(m)
    report.add_check("mmap_hermiticity", inv["hermiticity"], 1e-12)
    report.add_check("mmap_total_trace", inv["total_trace"], 1e-10)
    report.add_check("mmap_output_trace", inv["output_trace"], 1e-10)
    report.add_check("mmap_positivity", inv["min_eigenvalue"], -1e-10, inv["min_eigenvalue"] >= -1e-10)
    report.add_check(
        "initial_state", float(np.max(np.abs(initial_state_of(m).mat - state.rho_S))), 1e-10
    )
    _, k = memory_of(m)
    kinv = memory_invariants(k)
    report.add_check("memory_initial_contraction", kinv["initial_contraction"], 1e-10)
    report.add_check("memory_output_contraction", kinv["output_contraction"], 1e-10)
    b = assemble_b(m)
    baff = reduced_evolution(u.mat, state.chi, state.dS, state.dE)
    report.add_check("affine_equals_reduced_correlations", float(np.max(np.abs(b.affine - baff))), 1e-10)
    direct = evolve_reduce(u, state).mat
    report.add_check("b_reproduces_dynamics", float(np.max(np.abs(b.apply(state.rho_S) - direct))), 1e-10)
    kraus = kraus_of(m)
    report.add_check("kraus_reconstruction", float(np.max(np.abs(kraus.tensor() - m.tensor))), 1e-9)


def _run_analytic(report: Report, cfg: ExperimentConfig, inst) -> None:
    m = build_mmap(inst.u, inst.state)
    _construction_checks(report, inst, m)
    _decomposition_metrics(report, m, inst.metrics["norm_chi"])
    rho = inst.state.rho_S
    report.metrics["p_list"] = [float(np.trace(p @ rho).real) for p in pure_state_basis(cfg.dS).projectors]


def _run_tomography(report: Report, cfg: ExperimentConfig, inst, verbose: bool) -> None:
    m = build_mmap(inst.u, inst.state)
    _construction_checks(report, inst, m)
    basis = preparation_basis(cfg.dS)
    record = simulate_tomography(inst.u, inst.state, basis, cfg.noise_sigma, cfg.seed)
    if record.flagged:
        log.info("falling back to a rotated basis: %d degenerate rows", len(record.flagged))
        rot = haar_unitary(cfg.dS, derive_seed(cfg.seed, 0xFA11)).mat
        basis = preparation_basis(cfg.dS, rotation=rot)
        record = simulate_tomography(inst.u, inst.state, basis, cfg.noise_sigma, cfg.seed)
    report.add_check(
        "preparation_count", float(record.n_preparations), float(cfg.dS**4),
        record.n_preparations == cfg.dS**4,
    )
    m_rec = reconstruct_mmap(record, basis)
    err = frobenius(m_rec.tensor - m.tensor)
    report.metrics["reconstruction_error"] = err
    if cfg.noise_sigma == 0:
        report.add_check("reconstruction", err, 1e-9)
    _decomposition_metrics(report, m_rec, inst.metrics["norm_chi"])
    d2 = cfg.dS**2
    report.metrics["p_list"] = [float(record.probabilities[i * d2]) for i in range(d2)]
    if verbose:
        diags = []
        for j, prep in enumerate(basis.preparations):
            mm, nn = divmod(j, d2)
            y = record.unnormalized[j]
            diags.append({
                "m": mm,
                "n": nn,
                "p": float(record.probabilities[j]),
                "output_error": frobenius(y - contract_unnormalized(m, prep)),
            })
        report.diagnostics = diags


def _run_scan(report: Report, cfg: ExperimentConfig) -> None:
    extra = []
    if cfg.inject_canonical:
        if (cfg.dS, cfg.dE) != (2, 2):
            raise DimensionError("the canonical instance can only be injected into a (2, 2) scan")
        extra.append(canonical_cnot_bell())
    rows = ncp_scan(cfg.n_instances, cfg.dS, cfg.dE, cfg.seed, extra=extra)
    report.scan = [
        {
            "label": r.label,
            "seed": r.seed,
            "norm_chi": r.norm_chi,
            "norm_K": r.norm_K,
            "min_eig_B": r.min_eig_B,
            "flags": sorted(r.flags),
        }
        for r in rows
    ]
    report.metrics.update(
        norm_chi=max(r.norm_chi for r in rows),
        norm_K=max(r.norm_K for r in rows),
        min_eig_B=min(r.min_eig_B for r in rows),
    )
    product = [r for r in rows if "product" in r.flags]
    worst = min((r.min_eig_B for r in product), default=0.0)
    report.add_check("product_rows_cp", worst, -1e-10, worst >= -1e-10)


def run_experiment(cfg: ExperimentConfig, verbose: bool = False) -> Report:
    """Run one pipeline; library errors become entries in ``report.errors``."""
    start = time.perf_counter()
    report = Report(config=cfg.to_dict(), tool_version=__version__)
    stage = "scenario"
    try:
        if cfg.mode == "scan":
            stage = "scan"
            _run_scan(report, cfg)
        else:
            inst = _load_scenario(cfg)
            stage = cfg.mode
            if cfg.mode == "analytic":
                _run_analytic(report, cfg, inst)
            else:
                _run_tomography(report, cfg, inst, verbose)
    except (CorrQPTError, OSError, ValueError) as exc:
        log.error("%s stage failed: %s", stage, exc)
        report.add_error(stage, exc)
    report.ok = not report.errors and report.checks_passed
    report.wall_time = time.perf_counter() - start
    return report


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment configuration")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out", type=Path, help="report path (JSON)")
    common.add_argument("--verbose", "-v", action="store_true")
    common.add_argument("--dS", type=int)
    common.add_argument("--dE", type=int)
    common.add_argument("--scenario", choices=["canonical_cnot_bell", "vanishing_memory", "random"])
    common.add_argument("--w", type=float, help="correlation weight of the random scenario")
    common.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    common.add_argument("--n-instances", type=int, dest="n_instances")
    common.add_argument("--inject-canonical", action="store_true", default=None, dest="inject_canonical")

    parser = argparse.ArgumentParser(prog="corrqpt", description=__doc__)
    parser.add_argument("--version", action="version", version=f"corrqpt {__version__}")
    sub = parser.add_subparsers(dest="mode", required=True)
    sub.add_parser("analytic", parents=[common], help="build the M-map and decompose it")
    sub.add_parser("tomography", parents=[common], help="simulate tomography and reconstruct")
    sub.add_parser("scan", parents=[common], help="scan random instances for NCP dynamics")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    doc = {}
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
    doc["mode"] = args.mode
    for key in ("seed", "dS", "dE", "scenario", "w", "noise_sigma", "n_instances", "inject_canonical"):
        val = getattr(args, key)
        if val is not None:
            doc[key] = val
    doc.setdefault("dS", 2)
    doc.setdefault("dE", 2)
    doc.setdefault("seed", 0)
    if args.mode != "scan":
        doc.setdefault("scenario", "canonical_cnot_bell" if (doc["dS"], doc["dE"]) == (2, 2) else "random")
    else:
        doc.setdefault("n_instances", 100)
    return ExperimentConfig.from_dict(doc)


def _output_path(cfg: ExperimentConfig, out: Path | None) -> Path:
    """``--out``, then the config's ``output_path``, then ``$CORRQPT_OUTPUT_DIR``, then the cwd."""
    if out is not None:
        return out
    if cfg.output_path:
        return Path(cfg.output_path)
    return Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / f"{cfg.mode}-report.json"


def _scan_rows(report: Report) -> list[ScanRow]:
    return [
        ScanRow(r["label"], r["seed"], r["norm_chi"], r["norm_K"], r["min_eig_B"], frozenset(r["flags"]))
        for r in report.scan
    ]


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _config_from_args(args)
    except (OSError, json.JSONDecodeError, CorrQPTError, TypeError) as exc:
        print(f"corrqpt: bad configuration: {exc}", file=sys.stderr)
        return 2

    report = run_experiment(cfg, verbose=args.verbose)
    out = _output_path(cfg, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_report(report, out)
    if cfg.mode == "scan" and report.scan is not None:
        rows = _scan_rows(report)
        out.with_suffix(".csv").write_text(format_scan_table(rows), encoding="utf-8")

    mt = report.metrics
    status = "ok" if report.ok else "FAILED"
    print(f"{cfg.mode}: {status}  norm_K={mt['norm_K']}  min_eig_B={mt['min_eig_B']}  -> {out}")
    for e in report.errors:
        print(f"  error [{e['stage']}] {e['type']}: {e['message']}", file=sys.stderr)
    for name, c in mt["trace_checks"].items():
        if not c["passed"]:
            print(f"  check {name} failed: {c['value']:.3e} vs {c['tolerance']:.1e}", file=sys.stderr)
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
