"""Batch front-end: parse experiment manifests, orchestrate seeded runs,
and emit machine-readable reports.

Manifests are JSON: a suite name, a master seed, and a list of entries.
Each entry has a unique ``id`` and a ``kind``:

* ``clt`` -- a walk experiment: ``regime`` (CLT_I | CLT_II | MIXED), ``n``,
  ``p``, ``trials``, ``law``, optional ``c``, ``fast_path``, ``checks``
  (subset of ["exact", "limit", "ks"]), ``rel_tol``.
* ``moments`` -- a monomial-moment sweep: ``law``, ``kappa`` (list of
  ``[[row, col], exponent]``), ``p_grid``, ``trials``.
* ``selftest`` -- the exact-identity suites, optional ``cases``.

Laws are ``{"q": q, "atoms": [{"weight": w, "radius": [row-major]}]}`` or
``{"family": name, "params": {...}}`` with families ``point_mass``,
``two_point``, ``uniform_interval``.

Every output file embeds the tool version, the master seed, and a SHA-256
hash of the manifest.  Outputs are byte-identical for a fixed (manifest,
seed, version) whatever the worker count: random streams attach to fixed
work units, results merge in trial order, and wall times stay out of the
serialized reports.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from math import factorial
from pathlib import Path

import numpy as np

from . import __version__
from .clt_experiments import (
    WalkConfig,
    moment_decay_experiment,
    trial_stream,
    verify_clt,
)
from .combinatorics import kron_multinomial_expand
from .errors import RadwalkError
from .gaussian_moments import MatrixNormalSpec, moment_tensor, sum_moment, wick_moment
from .kron_algebra import PermMat, hadamard, kron, reorder_perm
from .radial_measures import RadialLaw, kappa_all_rows_even, kappa_weight

ENV_WORKERS = "RADWALK_WORKERS"
ENV_SKEW_KRON = "RADWALK_SELFTEST_SKEW_KRON"
DEFAULT_SELFTEST_SEED = 20240811

CSV_COLUMNS = ("id", "regime", "n", "p", "q", "predicted_var", "empirical_var",
               "stderr", "rel_frob_err", "ks_stat", "verdict")


class ManifestError(Exception):
    """Configuration error; the message names the offending field."""


def _fmt(x) -> str:
    """Round-trip-exact decimal text for a 64-bit real."""
    if x is None:
        return ""
    return f"{float(x):.17g}"


def _entry_tag(entry_id: str) -> int:
    return int.from_bytes(hashlib.sha256(entry_id.encode()).digest()[:8], "big")


def _require(mapping, key, path):
    if key not in mapping:
        raise ManifestError(f"{path}.{key}: missing")
    return mapping[key]


def _as_int(value, path, minimum=None):
    if not isinstance(value, int) or isinstance(value, bool):
        raise ManifestError(f"{path}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ManifestError(f"{path}: must be >= {minimum}, got {value}")
    return value


def _parse_law(cfg, path):
    if not isinstance(cfg, dict):
        raise ManifestError(f"{path}: expected an object")
    try:
        return RadialLaw.from_config(cfg)
    except (RadwalkError, ValueError, KeyError, TypeError) as exc:
        raise ManifestError(f"{path}.{exc}" if str(exc).startswith("atoms[") else f"{path}: {exc}") from exc


def _parse_kappa(spec, path):
    try:
        pairs = [((int(ij[0]), int(ij[1])), int(e)) for ij, e in spec]
    except (TypeError, ValueError, IndexError) as exc:
        raise ManifestError(f"{path}: expected a list of [[row, col], exponent] items ({exc})") from exc
    if not pairs or kappa_weight(pairs) == 0:
        raise ManifestError(f"{path}: multi-index has zero weight")
    return pairs


def load_manifest(path):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ManifestError(f"manifest: cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError("manifest: top level must be an object")
    doc.setdefault("suite", "suite")
    doc.setdefault("seed", 0)
    _as_int(doc["seed"], "seed", minimum=0)
    entries = doc.get("entries", [])
    if not isinstance(entries, list):
        raise ManifestError("entries: expected a list")
    seen = set()
    for i, entry in enumerate(entries):
        path_i = f"entries[{i}]"
        if not isinstance(entry, dict):
            raise ManifestError(f"{path_i}: expected an object")
        eid = _require(entry, "id", path_i)
        if not isinstance(eid, str) or not eid:
            raise ManifestError(f"{path_i}.id: expected a nonempty string")
        if eid in seen:
            raise ManifestError(f"{path_i}.id: duplicate id {eid!r}")
        seen.add(eid)
        kind = entry.setdefault("kind", "clt")
        if kind not in ("clt", "moments", "selftest"):
            raise ManifestError(f"{path_i}.kind: unknown kind {kind!r}")
    return doc, hashlib.sha256(raw).hexdigest()


def _build_walk_config(entry, path, master_seed):
    law = _parse_law(_require(entry, "law", path), f"{path}.law")
    regime = _require(entry, "regime", path)
    n = _as_int(_require(entry, "n", path), f"{path}.n", minimum=1)
    p = _as_int(_require(entry, "p", path), f"{path}.p", minimum=1)
    trials = _as_int(_require(entry, "trials", path), f"{path}.trials", minimum=100)
    c = entry.get("c")
    fast_path = entry.get("fast_path", law.q == 1)
    checks = tuple(entry.get("checks", ["exact", "limit", "ks"]))
    for chk in checks:
        if chk not in ("exact", "limit", "ks"):
            raise ManifestError(f"{path}.checks: unknown check {chk!r}")
    rel_tol = float(entry.get("rel_tol", 0.05))
    try:
        cfg = WalkConfig(nu=law, n=n, p=p, trials=trials, regime=regime, c=c,
                         seed=master_seed, fast_path=bool(fast_path))
    except RadwalkError as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    return cfg, checks, rel_tol


def _meta(master_seed, config_hash):
    return {"tool": "radwalk", "version": __version__,
            "master_seed": master_seed, "config_sha256": config_hash}


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _summary_scalar(matrix: np.ndarray, q: int) -> float:
    m = np.asarray(matrix)
    return float(m[0, 0]) if q == 1 else float(np.linalg.norm(m))


def _run_moments_entry(entry, path, master_seed):
    law = _parse_law(_require(entry, "law", path), f"{path}.law")
    kappa = _parse_kappa(_require(entry, "kappa", path), f"{path}.kappa")
    p_grid = _require(entry, "p_grid", path)
    if not isinstance(p_grid, list) or not p_grid:
        raise ManifestError(f"{path}.p_grid: expected a nonempty list")
    trials = _as_int(_require(entry, "trials", path), f"{path}.trials", minimum=1000)
    even = kappa_all_rows_even(kappa)
    if even and len(p_grid) < 3:
        raise ManifestError(f"{path}.p_grid: decay slope needs at least 3 points")
    rng = trial_stream(master_seed, _entry_tag(entry["id"]), 0)
    report = moment_decay_experiment(law, kappa, p_grid, trials, rng)
    verdict = _moments_verdict(report)
    return report, verdict


def _moments_verdict(report) -> str:
    if report.branch == "parity":
        return "PASS" if report.max_abs_z < 4.0 else "FAIL"
    target = -report.weight / 2.0
    return "PASS" if abs(report.slope - target) <= 0.5 else "FAIL"


def cmd_clt(manifest_path, out_dir, seed_override=None, workers=None,
            validate_decomposition=False) -> int:
    """Run every manifest entry, write one JSON report per entry plus the
    suite CSV, and return 0 only if all verdicts PASS."""
    doc, config_hash = load_manifest(manifest_path)
    master_seed = int(seed_override) if seed_override is not None else int(doc["seed"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    all_pass = True
    for i, entry in enumerate(doc.get("entries", [])):
        path_i = f"entries[{i}]"
        eid = entry["id"]
        kind = entry["kind"]
        if kind == "clt":
            cfg, checks, rel_tol = _build_walk_config(entry, path_i, master_seed)
            report = verify_clt(cfg, workers=workers, validate_decomposition=validate_decomposition,
                                stream_tag=_entry_tag(eid), checks=checks, rel_tol=rel_tol)
            _write_json(out / f"{eid}.json", {"meta": _meta(master_seed, config_hash),
                                              "entry_id": eid, "report": report.to_dict()})
            q = cfg.nu.q
            rows.append((
                eid, cfg.regime, str(cfg.n), str(cfg.p), str(q),
                _fmt(_summary_scalar(report.predicted_limit, q)),
                _fmt(_summary_scalar(report.empirical_cov, q)),
                _fmt(_summary_scalar(report.stderr, q)),
                _fmt(report.rel_frob_err_limit),
                _fmt(report.ks_stat) if report.ks_stat is not None else "",
                report.overall,
            ))
            all_pass &= report.overall == "PASS"
        elif kind == "moments":
            report, verdict = _run_moments_entry(entry, path_i, master_seed)
            _write_json(out / f"{eid}.json", {"meta": _meta(master_seed, config_hash),
                                              "entry_id": eid, "verdict": verdict,
                                              "report": report.to_dict()})
            all_pass &= verdict == "PASS"
        else:  # selftest
            cases = entry.get("cases", 50)
            results = run_selftest_suites(seed=master_seed, cases=int(cases))
            ok = all(passed for _, passed, _ in results)
            _write_json(out / f"{eid}.json", {"meta": _meta(master_seed, config_hash),
                                              "entry_id": eid,
                                              "verdict": "PASS" if ok else "FAIL",
                                              "suites": [{"suite": s, "passed": p, "detail": d}
                                                         for s, p, d in results]})
            all_pass &= ok
    header = f"# tool=radwalk version={__version__} master_seed={master_seed} config_sha256={config_hash}\n"
    lines = [header, ",".join(CSV_COLUMNS) + "\n"]
    lines += [",".join(row) + "\n" for row in rows]
    (out / "summary.csv").write_text("".join(lines))
    return 0 if all_pass else 1


def _selftest_kron(a, b):
    """Kronecker product routed through the corrupted-build canary hook."""
    out = np.kron(np.atleast_2d(np.asarray(a, dtype=np.float64)),
                  np.atleast_2d(np.asarray(b, dtype=np.float64)))
    if os.environ.get(ENV_SKEW_KRON):
        out = out + 1e-6
    return out


def _selftest_kron_chain(mats):
    out = mats[0]
    for m in mats[1:]:
        out = _selftest_kron(out, m)
    return out


def run_selftest_suites(seed: int = DEFAULT_SELFTEST_SEED, cases: int = 200):
    """Exact-identity suites; returns a list of (name, passed, detail)."""
    rng = np.random.default_rng(seed)
    results = []

    # factor reordering: permuted product equals P (product) Q exactly
    worst = 0.0
    ok = True
    for _ in range(cases):
        k = int(rng.integers(2, 5))
        shapes = [(int(rng.integers(1, 4)), int(rng.integers(1, 4))) for _ in range(k)]
        mats = [rng.integers(-4, 5, size=sh).astype(float) for sh in shapes]
        sigma = rng.permutation(k)
        p, q = reorder_perm(shapes, sigma)
        observed = _selftest_kron_chain([mats[i] for i in sigma])
        expected = p.apply_left(q.apply_right(_kron_chain(mats)))
        if not np.array_equal(observed, expected):
            ok = False
            worst = max(worst, float(np.abs(observed - expected).max()))
    results.append(("kron-reorder", ok, f"{cases} cases, exact" if ok else f"max abs dev {worst:.3e}"))

    # multinomial expansion equals the Kronecker power of the sum
    worst = 0.0
    for _ in range(max(1, cases // 2)):
        n = int(rng.integers(1, 4))
        k = int(rng.integers(1, 5))
        shape = (int(rng.integers(1, 3)), int(rng.integers(1, 3)))
        xs = [rng.standard_normal(shape) for _ in range(n)]
        expansion = kron_multinomial_expand(xs, k)
        power = _selftest_kron_chain([sum(xs)] * k)
        scale = max(1.0, float(np.abs(power).max()))
        worst = max(worst, float(np.abs(expansion - power).max()) / scale)
    results.append(("kron-multinomial", worst <= 1e-12, f"max rel dev {worst:.3e}"))

    # permutation conjugation distributes over the entrywise product, exactly
    ok = True
    for _ in range(max(1, cases // 2)):
        rows, cols = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        a = rng.standard_normal((rows, cols))
        b = rng.standard_normal((rows, cols))
        p = PermMat(rng.permutation(rows))
        q = PermMat(rng.permutation(cols))
        lhs = p.apply_left(q.apply_right(hadamard(a, b)))
        rhs = hadamard(p.apply_left(q.apply_right(a)), p.apply_left(q.apply_right(b)))
        ok &= np.array_equal(lhs, rhs)
    results.append(("hadamard-conjugation", ok, "exact" if ok else "violated"))

    # univariate Gaussian moments match the double-factorial closed form
    ok = True
    for sigma2 in (1.0, 2.0, 0.25, 4.0):
        spec = MatrixNormalSpec(1, np.zeros((1, 1)), np.array([[sigma2]]))
        for k in (2, 4, 6, 8):
            u = k // 2
            expected = sigma2**u * factorial(k) / (2**u * factorial(u))
            got = wick_moment(spec, (((0, 0),) * k))
            ok &= got == expected
    results.append(("wick-univariate", ok, "k in {2,4,6,8}, exact" if ok else "mismatch"))

    # moments of a sum of independents match the summed-covariance law
    worst = 0.0
    for _ in range(20):
        q = int(rng.integers(1, 3))
        k = int(rng.integers(2, 5))
        covs = []
        for _ in range(2):
            m = rng.standard_normal((q * q, q * q))
            covs.append(m @ m.T)
        s1 = MatrixNormalSpec(q, np.zeros((q, q)), covs[0])
        s2 = MatrixNormalSpec(q, np.zeros((q, q)), covs[1])
        lhs = sum_moment(s1, s2, k).as_matrix()
        rhs = moment_tensor(MatrixNormalSpec(q, np.zeros((q, q)), covs[0] + covs[1]), k).as_matrix()
        scale = max(1.0, float(np.abs(rhs).max()))
        worst = max(worst, float(np.abs(lhs - rhs).max()) / scale)
    results.append(("gaussian-sum-moment", worst <= 1e-10, f"max rel dev {worst:.3e}"))
    return results


def _kron_chain(mats):
    out = np.atleast_2d(np.asarray(mats[0], dtype=np.float64))
    for m in mats[1:]:
        out = kron(out, m)
    return out


def cmd_selftest(seed: int = DEFAULT_SELFTEST_SEED) -> int:
    results = run_selftest_suites(seed=seed)
    for name, passed, detail in results:
        print(f"{name}: {'PASS' if passed else 'FAIL'} ({detail})")
    return 0 if all(passed for _, passed, _ in results) else 1


def _parse_kappa_text(text: str):
    """Sparse multi-index grammar: "row,col:exp" terms joined by ";"."""
    pairs = []
    for term in text.split(";"):
        term = term.strip()
        if not term:
            continue
        try:
            idx, e = term.split(":")
            i, j = idx.split(",")
            pairs.append(((int(i), int(j)), int(e)))
        except ValueError as exc:
            raise ManifestError(f"kappa: cannot parse term {term!r} ({exc})") from exc
    if not pairs or kappa_weight(pairs) == 0:
        raise ManifestError("kappa: multi-index has zero weight")
    return pairs


def cmd_moments(law_path, kappa_text, p_grid_text, trials, out_dir, seed=0) -> int:
    try:
        raw = Path(law_path).read_bytes()
        law = RadialLaw.from_config(json.loads(raw))
    except (OSError, json.JSONDecodeError, ValueError, KeyError) as exc:
        print(f"config error: law: {exc}", file=sys.stderr)
        return 2
    try:
        kappa = _parse_kappa_text(kappa_text)
        p_grid = [int(x) for x in p_grid_text.split(",") if x.strip()]
        if not p_grid:
            raise ManifestError("p_grid: empty grid")
        even = kappa_all_rows_even(kappa)
        if even and len(p_grid) < 3:
            raise ManifestError("p_grid: decay slope needs at least 3 points")
    except ManifestError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    config_hash = hashlib.sha256(raw + f"|{kappa_text}|{p_grid_text}|{trials}".encode()).hexdigest()
    rng = trial_stream(seed, _entry_tag(f"moments:{kappa_text}"), 0)
    report = moment_decay_experiment(law, kappa, p_grid, int(trials), rng)
    verdict = _moments_verdict(report)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"# tool=radwalk version={__version__} master_seed={seed} config_sha256={config_hash}\n",
             "p,estimate,stderr\n"]
    for p, est, se in zip(report.p_grid, report.estimates, report.stderrs):
        lines.append(f"{p},{_fmt(est)},{_fmt(se)}\n")
    if report.branch == "decay":
        lines.append(f"slope,{_fmt(report.slope)},{_fmt(report.slope_stderr)}\n")
    (out / "moments.csv").write_text("".join(lines))

    if report.branch == "parity":
        print(f"parity: {verdict} (max |z| = {report.max_abs_z:.3f})")
    else:
        print(f"decay: {verdict} (slope {report.slope:.3f} vs {-report.weight / 2.0:.1f})")
    return 0 if verdict == "PASS" else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="radwalk",
                                     description="Radial-walk limit-theorem verification suite")
    sub = parser.add_subparsers(dest="command", required=True)

    p_clt = sub.add_parser("clt", help="run the walk experiments of a manifest")
    p_clt.add_argument("--manifest", required=True)
    p_clt.add_argument("--seed", type=int, default=None, help="override the manifest master seed")
    p_clt.add_argument("--workers", type=int, default=None)
    p_clt.add_argument("--out", default="out")
    p_clt.add_argument("--validate-decomposition", action="store_true",
                       help="accumulate the cross terms directly and check the decomposition identity")

    p_self = sub.add_parser("selftest", help="run the exact-identity suites")
    p_self.add_argument("--seed", type=int, default=DEFAULT_SELFTEST_SEED)

    p_mom = sub.add_parser("moments", help="moment parity / decay experiment")
    p_mom.add_argument("--law", required=True, help="path to a law config JSON file")
    p_mom.add_argument("--kappa", required=True, help='sparse multi-index, e.g. "0,0:2;1,0:2"')
    p_mom.add_argument("--p-grid", required=True, help="comma-separated dimensions")
    p_mom.add_argument("--trials", type=int, default=20000)
    p_mom.add_argument("--seed", type=int, default=0)
    p_mom.add_argument("--out", default="out")

    args = parser.parse_args(argv)
    if args.command == "selftest":
        return cmd_selftest(seed=args.seed)
    if args.command == "moments":
        return cmd_moments(args.law, args.kappa, args.p_grid, args.trials, args.out, seed=args.seed)

    workers = args.workers
    if os.environ.get(ENV_WORKERS):
        workers = int(os.environ[ENV_WORKERS])
    if workers is None:
        workers = os.cpu_count() or 1
    try:
        return cmd_clt(args.manifest, args.out, seed_override=args.seed, workers=workers,
                       validate_decomposition=args.validate_decomposition)
    except ManifestError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
