"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 input/validation error,
3 external-service error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bound
from .baselines import baseline_herding, baseline_kcenter, baseline_random
from .clustering import cluster_stats, kmeans
from .curation import CoresetManifest, CurationConfig, select_coreset
from .dataset import load_dataset, target_size
from .errors import CurateError, ServiceError
from .fusion import fuse
from .kernels import default_threads
from .matrixio import FEATURE_MAGIC, SEMANTIC_MAGIC, read_matrix, write_matrix
from .semantic import SemanticProviderConfig, embed_dataset
from .structural import StructuralConfig, structural_matrix, write_struct_jsonl

log = logging.getLogger("gcurate")

EXIT_USAGE, EXIT_INPUT, EXIT_SERVICE = 1, 2, 3

DEFAULTS = {
    "seed": 42,
    "threads": None,
    "rw_steps": 8,
    "no_basic": False,
    "provider": "hash",
    "dim": 64,
    "batch_size": 64,
    "timeout": 30.0,
    "max_in_flight": 4,
    "ratio": 0.1,
    "clusters": None,
    "tau": 0.5,
    "w": 0.5,
    "sigma_mode": "data",
    "min_quota": False,
    "max_iter": 300,
    "tol": 1e-6,
    "trials": 10000,
    "m": 2000,
    "k": 5,
    "d": 16,
    "m_target": 100,
    "separation": 3.0,
    "random_allocations": 2,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file of option values; flags override it")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="worker threads (outputs do not depend on it)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="gcurate", description="Cluster-aware coreset selection for graph datasets.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("featurize", parents=[common], argument_default=argparse.SUPPRESS,
                        help="structural descriptor matrix")
    sp.add_argument("--input", required=True, help="dataset JSON Lines")
    sp.add_argument("--output", required=True, help="GSFM1 matrix file")
    sp.add_argument("--rw-steps", type=int)
    sp.add_argument("--no-basic", action="store_true", help="omit node/edge counts and average degree")
    sp.add_argument("--jsonl", help="also write {id, struct} JSON Lines here")

    sp = sub.add_parser("embed", parents=[common], argument_default=argparse.SUPPRESS,
                        help="semantic embedding matrix")
    sp.add_argument("--input", required=True, help="dataset JSON Lines")
    sp.add_argument("--output", required=True, help="GSEM1 matrix file")
    sp.add_argument("--provider", choices=["hash", "precomputed", "remote"])
    sp.add_argument("--path", help="precomputed embeddings (JSON Lines or GSEM1)")
    sp.add_argument("--endpoint", help="remote embedding service URL")
    sp.add_argument("--dim", type=int)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--timeout", type=float)
    sp.add_argument("--max-in-flight", type=int)
    sp.add_argument("--background", help="domain line prepended to serialized graphs")

    def matrix_inputs(sp):
        sp.add_argument("--struct", help="structural GSFM1 file")
        sp.add_argument("--semantic", help="semantic GSEM1 file")
        sp.add_argument("--fused", help="already fused GSFM1 file (used as is)")

    sp = sub.add_parser("select", parents=[common], argument_default=argparse.SUPPRESS,
                        help="cluster-aware coreset selection")
    matrix_inputs(sp)
    sp.add_argument("--output", required=True, help="manifest JSON")
    sp.add_argument("--ids-output", help="newline-delimited selected ids")
    sp.add_argument("--fused-output", help="cache the fused matrix as GSFM1")
    sp.add_argument("--clustering-dump", help="write centroids, assignments and statistics as JSON")
    sp.add_argument("--ratio", type=float, help="retention ratio p_target in (0, 1]")
    sp.add_argument("--clusters", type=int, help="K (default clamp(round(sqrt(M)), 2, 64))")
    sp.add_argument("--tau", type=float)
    sp.add_argument("--w", type=float)
    sp.add_argument("--sigma-mode", help="'data', 'infinite', or a fixed bandwidth value")
    sp.add_argument("--min-quota", action="store_true", help="at least one graph per nonempty cluster")
    sp.add_argument("--max-iter", type=int)
    sp.add_argument("--tol", type=float)

    sp = sub.add_parser("baseline", parents=[common], argument_default=argparse.SUPPRESS,
                        help="random / k-center / herding selection")
    sp.add_argument("--method", required=True, choices=["random", "kcenter", "herding"])
    sp.add_argument("--input", help="dataset JSON Lines (enough for --method random)")
    matrix_inputs(sp)
    sp.add_argument("--ratio", type=float)
    sp.add_argument("--output", required=True, help="newline-delimited selected ids")

    sp = sub.add_parser("verify-bound", parents=[common], argument_default=argparse.SUPPRESS,
                        help="simulate the loss-gap bound on a synthetic problem")
    sp.add_argument("--trials", type=int)
    sp.add_argument("--m", type=int, help="number of samples")
    sp.add_argument("--k", type=int, help="number of clusters")
    sp.add_argument("--d", type=int, help="gradient dimension")
    sp.add_argument("--m-target", type=int)
    sp.add_argument("--separation", type=float)
    sp.add_argument("--random-allocations", type=int)
    sp.add_argument("--output", required=True, help="report JSON")
    sp.add_argument("--csv", help="also write a CSV table here")

    sp = sub.add_parser("stats", parents=[common], argument_default=argparse.SUPPRESS,
                        help="summarize and validate a manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--input", required=True, help="dataset JSON Lines")
    return p


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Merge built-in defaults < config file < command-line flags."""
    values = dict(DEFAULTS)
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        try:
            cfg = json.loads(Path(cfg_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CurateError(f"cannot read config {cfg_path}: {exc}") from None
        if not isinstance(cfg, dict):
            raise CurateError("config file must hold a JSON object")
        section = cfg.get(args.command, {})
        flat = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
        for key, val in {**flat, **section}.items():
            values[key.replace("-", "_")] = val
    values.update(vars(args))
    if values["threads"] is None:
        values["threads"] = default_threads()
    return argparse.Namespace(**values)


def _read_fused(a) -> tuple[list[str], np.ndarray, object]:
    fused_path = getattr(a, "fused", None)
    if fused_path:
        ids, mat, _ = read_matrix(fused_path)
        return ids, mat, None
    if not (getattr(a, "struct", None) and getattr(a, "semantic", None)):
        raise UsageError("give --fused, or both --struct and --semantic")
    sids, smat, _ = read_matrix(a.struct, FEATURE_MAGIC)
    tids, tmat, _ = read_matrix(a.semantic, SEMANTIC_MAGIC)
    if sids != tids:
        raise CurateError("structural and semantic files list different ids or orders")
    fm = fuse(smat, tmat)
    return sids, fm.rows, fm


def _write_ids(path, ids) -> None:
    Path(path).write_text("".join(f"{i}\n" for i in ids), encoding="utf-8")


def cmd_featurize(a) -> int:
    ds = load_dataset(a.input)
    cfg = StructuralConfig(rw_steps=a.rw_steps, include_basic=not a.no_basic)
    mat = structural_matrix(ds, cfg, threads=a.threads)
    write_matrix(a.output, ds.ids, mat, FEATURE_MAGIC)
    if getattr(a, "jsonl", None):
        write_struct_jsonl(ds.ids, mat, a.jsonl)
    log.info("wrote %d x %d structural matrix to %s", *mat.shape, a.output)
    return 0


def cmd_embed(a) -> int:
    ds = load_dataset(a.input)
    cfg = SemanticProviderConfig(
        mode=a.provider, path=getattr(a, "path", None), endpoint=getattr(a, "endpoint", None),
        dim=a.dim, batch_size=a.batch_size, timeout=a.timeout, max_in_flight=a.max_in_flight,
        background=getattr(a, "background", None),
    )
    sem = embed_dataset(ds, cfg)
    write_matrix(a.output, ds.ids, sem.rows, SEMANTIC_MAGIC)
    log.info("wrote %d x %d embeddings (%s) to %s", len(sem), sem.dim, sem.provider_tag, a.output)
    return 0


def _parse_sigma(text) -> tuple[str, float | None]:
    if isinstance(text, (int, float)):
        return "fixed", float(text)
    if text in ("data", "data-driven"):
        return "data", None
    if text in ("inf", "infinite"):
        return "infinite", None
    try:
        return "fixed", float(text)
    except ValueError:
        raise UsageError(f"--sigma-mode must be 'data', 'infinite' or a number, got {text!r}") from None


def cmd_select(a) -> int:
    ids, h, fm = _read_fused(a)
    mode, sval = _parse_sigma(a.sigma_mode)
    cfg = CurationConfig(p_target=a.ratio, w=a.w, tau=a.tau, k=a.clusters, seed=a.seed,
                         min_quota=bool(a.min_quota), sigma_mode=mode, sigma_value=sval,
                         max_iter=a.max_iter, tol=a.tol)
    manifest = select_coreset(ids, h, cfg, threads=a.threads)
    manifest.write(a.output)
    if getattr(a, "ids_output", None):
        _write_ids(a.ids_output, manifest.selected_ids)
    if getattr(a, "fused_output", None):
        write_matrix(a.fused_output, ids, h, FEATURE_MAGIC)
    if getattr(a, "clustering_dump", None):
        clus = kmeans(h, manifest.config["k"], cfg.seed, cfg.max_iter, cfg.tol, threads=a.threads)
        st = cluster_stats(h, clus)
        dump = {
            "centroids": clus.centroids.tolist(),
            "assignments": clus.assignments.tolist(),
            "objective": clus.objective,
            "iterations": clus.iterations,
            "stats": {"pi": st.pi.tolist(), "d_intra": st.d_intra.tolist(),
                      "d_inter": st.d_inter.tolist(), "sigma": st.sigma.tolist()},
        }
        if fm is not None:
            dump["column_stats"] = {"struct": fm.struct_stats.to_dict(), "semantic": fm.semantic_stats.to_dict()}
        Path(a.clustering_dump).write_text(json.dumps(dump, sort_keys=True) + "\n", encoding="utf-8")
    log.info("selected %d of %d graphs, checksum %s", manifest.m_target, len(ids), manifest.checksum)
    return 0


def cmd_baseline(a) -> int:
    if a.method == "random":
        if getattr(a, "input", None):
            ids = load_dataset(a.input).ids
        else:
            ids, _, _ = _read_fused(a)
        m_target = target_size(len(ids), a.ratio)
        picked = baseline_random(len(ids), m_target, a.seed)
    else:
        ids, h, _ = _read_fused(a)
        m_target = target_size(len(ids), a.ratio)
        fn = baseline_kcenter if a.method == "kcenter" else baseline_herding
        picked = fn(h, m_target)
    _write_ids(a.output, [ids[i] for i in picked])
    return 0


def cmd_verify_bound(a) -> int:
    if a.trials < 2:
        raise UsageError("--trials must be at least 2")
    problem = bound.synth_problem(a.m, a.k, a.d, a.separation, seed=a.seed)
    allocs = bound.default_allocations(problem, a.m_target, a.seed, a.random_allocations)
    report = bound.verify(problem, allocs, trials=a.trials, seed=a.seed)
    Path(a.output).write_text(bound.report_json(report), encoding="utf-8")
    if getattr(a, "csv", None):
        Path(a.csv).write_text(bound.report_csv(report), encoding="utf-8")
    for r in report["allocations"]:
        print(f"q={np.round(r['q'], 3).tolist()} bound={r['bound']:.6g} "
              f"gap={r['gap_mean']:.6g}±{r['gap_ci99']:.2g} {'PASS' if r['pass'] else 'FAIL'}")
    print(f"optimal allocation check: {'PASS' if report['remark']['pass'] else 'FAIL'}")
    return 0 if report["pass"] else EXIT_INPUT


def cmd_stats(a) -> int:
    manifest = CoresetManifest.read(a.manifest)
    ds = load_dataset(a.input)
    if manifest.checksum and manifest.checksum != manifest.compute_checksum():
        raise CurateError("manifest checksum does not match its contents")
    if not manifest.clusters:
        raise CurateError("manifest has an empty cluster list")
    missing = [i for i in manifest.selected_ids if i not in ds.index]
    if missing:
        raise CurateError(f"integrity error: manifest id {missing[0]} not in dataset")
    if len(set(manifest.selected_ids)) != len(manifest.selected_ids):
        raise CurateError("manifest lists duplicate ids")
    quota_sum = sum(int(c.get("quota", 0)) for c in manifest.clusters)
    print(f"{'cluster':>7} {'size':>6} {'pi':>8} {'omega':>9} {'share':>7} {'quota':>6}")
    for c in manifest.clusters:
        omega = c.get("omega")
        print(f"{c['index']:>7} {c['size']:>6} {c['pi']:>8.4f} "
              f"{(f'{omega:.4f}' if omega is not None else '-inf'):>9} {c['proportion']:>7.4f} {c['quota']:>6}")
    ok = quota_sum == manifest.m_target == len(manifest.selected_ids)
    print(f"budget: M={len(ds)} M_target={manifest.m_target} selected={len(manifest.selected_ids)} "
          f"quota_sum={quota_sum} {'OK' if ok else 'MISMATCH'}")
    if not ok:
        raise CurateError("budget check failed")
    return 0


COMMANDS = {
    "featurize": cmd_featurize,
    "embed": cmd_embed,
    "select": cmd_select,
    "baseline": cmd_baseline,
    "verify-bound": cmd_verify_bound,
    "stats": cmd_stats,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        a = resolve(args)
        return COMMANDS[a.command](a)
    except (UsageError, ValueError) as exc:
        print(f"gcurate {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CurateError, OSError) as exc:
        print(f"gcurate {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ServiceError as exc:
        print(f"gcurate {args.command}: service error: {exc}", file=sys.stderr)
        return EXIT_SERVICE


if __name__ == "__main__":
    sys.exit(main())
