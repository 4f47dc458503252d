"""Command-line front end: JSON documents in, JSON documents out.

Exit codes: 0 success, 1 validation failure, 2 numerical failure, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict

import numpy as np

from . import canonical, explorer, hurwitz, moduli, parker
from .hurwitz import GramTensor, HurwitzSystem, InputError, NumericalError, PreconditionError

SYSTEM_TAG = "hurwitz-system"
GRAM_TAG = "gram-tensor"
REPORT_TAG = "report"

EXIT_OK, EXIT_FAIL, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class DocumentError(Exception):
    """Malformed or unreadable document."""


# ---- documents --------------------------------------------------------------------

def _reject_constant(name):
    raise DocumentError(f"non-finite value {name} in document")


def _read_json(path: str) -> dict:
    try:
        if path == "-":
            text = sys.stdin.read()
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        return json.loads(text, parse_constant=_reject_constant)
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DocumentError(f"invalid JSON in {path}: {exc}") from exc


def _nested(values, shape, what):
    try:
        arr = np.array(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"{what}: ragged or non-numeric array ({exc})") from exc
    if arr.shape != tuple(shape):
        raise DocumentError(f"{what}: shape {arr.shape} does not match declared {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise DocumentError(f"{what}: non-finite entries")
    return arr


def system_document(H: HurwitzSystem, meta: dict | None = None) -> dict:
    doc = {"type_tag": SYSTEM_TAG, "m": H.m, "n": H.n, "p": H.p, "matrices": H.matrices.tolist()}
    if meta:
        doc["meta"] = meta
    return doc


def system_from_document(doc: dict) -> HurwitzSystem:
    if not isinstance(doc, dict) or doc.get("type_tag") != SYSTEM_TAG:
        raise DocumentError(f"expected type_tag {SYSTEM_TAG!r}, got {doc.get('type_tag') if isinstance(doc, dict) else doc!r}")
    try:
        shape = (int(doc["m"]), int(doc["n"]), int(doc["p"]))
        mats = doc["matrices"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DocumentError(f"missing or invalid field: {exc}") from exc
    return HurwitzSystem(_nested(mats, shape, "matrices"))


def gram_document(G: GramTensor, meta: dict | None = None) -> dict:
    doc = {"type_tag": GRAM_TAG, "m": G.m, "n": G.n, "entries": G.entries.tolist()}
    if meta:
        doc["meta"] = meta
    return doc


def gram_from_document(doc: dict) -> GramTensor:
    if not isinstance(doc, dict) or doc.get("type_tag") != GRAM_TAG:
        raise DocumentError(f"expected type_tag {GRAM_TAG!r}")
    try:
        m, n = int(doc["m"]), int(doc["n"])
        entries = doc["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DocumentError(f"missing or invalid field: {exc}") from exc
    return GramTensor(m, n, _nested(entries, (m * n, m * n), "entries"))


def load(path: str) -> dict:
    """Read and validate a system document; returns the parsed dict."""
    doc = _read_json(path)
    system_from_document(doc)
    return doc


def save(doc: dict, path: str) -> None:
    text = json.dumps(doc, allow_nan=False)
    try:
        if path == "-":
            sys.stdout.write(text + "\n")
        else:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
    except OSError as exc:
        raise DocumentError(f"cannot write {path}: {exc}") from exc


def report(kind: str, payload: dict, tolerances: dict) -> dict:
    return {"type_tag": REPORT_TAG, "kind": kind, "payload": payload, "tolerances": tolerances}


# ---- helpers ----------------------------------------------------------------------

def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _tols(args) -> dict:
    return {"tol": args.tol, "rank_tol": args.rank_tol}


def _emit(args, doc: dict, summary: str | None = None):
    if args.out:
        save(doc, args.out)
    if args.out and not args.json:
        if summary:
            print(summary)
        return
    if doc["type_tag"] != REPORT_TAG or args.json or summary is None:
        save(doc, "-")
    else:
        print(summary)


def _system_arg(args) -> HurwitzSystem:
    return system_from_document(_read_json(args.input))


def _normalized_chart(H, tol):
    Hn, N = parker.normalize_system(H, tol)
    return canonical.canonical_chart(Hn, tol), N


# ---- subcommands ------------------------------------------------------------------

def cmd_verify(args):
    H = _system_arg(args)
    rep = hurwitz.verify_hurwitz(H, args.tol)
    _emit(args, report("verify", rep.to_dict(), _tols(args)),
          f"verify: {'pass' if rep.passed else 'FAIL'} (max residual {rep.max_abs:.3e}, tol {args.tol:g})")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_gram(args):
    G = hurwitz.gram_from_system(_system_arg(args), args.tol)
    _emit(args, gram_document(G))
    return EXIT_OK


def cmd_from_gram(args):
    G = gram_from_document(_read_json(args.input))
    G = GramTensor(G.m, G.n, G.entries, args.tol)
    H = hurwitz.system_from_gram(G, args.rank_tol)
    _emit(args, system_document(H, {"source": "from-gram"}))
    return EXIT_OK


def cmd_parker(args):
    H = _system_arg(args)
    P = parker.parker_of_system(H, args.tol)
    N = parker.normalize_parker(P, args.tol)
    payload = {"C": P.C.tolist(), "A": P.A.tolist(), "B": P.B.tolist(),
               "normal_form": {"D": N.D.tolist(), "T": N.T.tolist(), "R": N.R.tolist(), "S": N.S4.tolist()},
               "pattern_violation": parker.pattern_violation(N.C)}
    _emit(args, report("parker", payload, _tols(args)),
          "parker:\n" + np.array2string(P.C, precision=6, suppress_small=True))
    return EXIT_OK


def cmd_normalize(args):
    H = _system_arg(args)
    Hn, N = parker.normalize_system(H, args.tol)
    _emit(args, system_document(Hn, {"D": N.D.tolist(), "T": N.T.tolist()}))
    return EXIT_OK


def cmd_canonicalize(args):
    chart, _ = _normalized_chart(_system_arg(args), args.tol)
    _emit(args, system_document(chart.system, {"degenerate": chart.degenerate, "missing": list(chart.missing),
                                               "extension_slots": list(chart.extension_slots)}))
    return EXIT_OK


def cmd_invariants(args):
    chart, _ = _normalized_chart(_system_arg(args), args.tol)
    inv = canonical.extract_invariants(chart.system, args.tol)
    d = inv.to_dict()
    _emit(args, report("invariants", d, _tols(args)),
          "invariants: " + ", ".join(f"{k}={d[k]:.10g}" for k in canonical.TUPLE_ORDER))
    return EXIT_OK


def cmd_classify(args):
    H = _system_arg(args)
    cls = canonical.classify(H, tol=args.membership_tol, verify_tol=args.tol, rank_tol=args.rank_tol)
    tols = dict(_tols(args), membership_tol=args.membership_tol)
    _emit(args, report("classify", cls.to_dict(), tols), f"classify: {cls.tag} ({cls.notes})")
    return EXIT_OK


def cmd_rank(args):
    H = _system_arg(args)
    s = hurwitz.singular_values(H)
    r = hurwitz.range_dimension(H, args.rank_tol)
    gap = float(s[r - 1] - (s[r] if r < len(s) else 0.0)) if r else 0.0
    _emit(args, report("rank", {"range_dimension": r, "singular_values": s.tolist(), "gap": gap}, _tols(args)),
          f"rank: range dimension {r}")
    return EXIT_OK


def _construct_system(args):
    kind = args.family
    if kind == "grand":
        P = moduli.GrandPoint(args.alpha, args.mu, args.a1421, args.a1422, args.a1122,
                              branch=args.branch, beta_sign=args.beta_sign)
        return P, moduli.grand_construct(P, args.tol)
    if kind == "anomalous":
        signs = tuple(int(x) for x in _floats(args.signs)) if args.signs else None
        P = moduli.AnomalousPoint(args.phi, args.psi, args.theta, args.eta, signs=signs)
        P = moduli.resolve_signs(P, args.tol)
        return P, moduli.anomalous_construct(P, args.tol)
    if kind == "t347":
        P = moduli.T347Point(args.nu, args.mu_sign, args.gamma_sign)
        return P, moduli.t347_construct(P, args.tol)
    if kind == "t248":
        P = moduli.T248Point(args.mu, args.nu)
        return P, moduli.t248_construct(P, args.tol)
    if kind == "quaternion":
        return None, moduli.quaternion_construct()
    P = moduli.ExtensionPoint(args.alpha, args.gamma, args.mu, args.nu, args.phi_e, args.psi_e, args.zeta, args.xi)
    return P, moduli.extension_construct(P, args.tol)


def _point_meta(kind, P) -> dict:
    meta = {"component": kind}
    if P is not None:
        meta["parameters"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(P).items()}
    return meta


def cmd_construct(args):
    P, H = _construct_system(args)
    _emit(args, system_document(H, _point_meta(args.family, P)))
    return EXIT_OK


def cmd_solve_extension(args):
    params = {k: getattr(args, k) for k in ("alpha", "eps", "nu", "gamma") if getattr(args, k) is not None}
    P = moduli.extension_solve(args.family, **params)
    H = moduli.extension_construct(P, args.tol)
    _emit(args, system_document(H, _point_meta("extension", P)))
    return EXIT_OK


def cmd_sample(args):
    pairs = explorer.sample(args.component, args.count, args.seed)
    items = [{"parameters": _point_meta(args.component, P)["parameters"], "system": system_document(H)}
             for P, H in pairs]
    _emit(args, report("sample", {"component": args.component, "seed": args.seed, "items": items}, _tols(args)),
          f"sample: {len(items)} {args.component} systems (seed {args.seed})")
    return EXIT_OK


_POINT_BUILDERS = {
    "Grand": lambda v: moduli.GrandPoint(*v),
    "Anomalous": lambda v: moduli.resolve_signs(moduli.AnomalousPoint(*v)),
    "T347": lambda v: moduli.T347Point(v[0], int(v[1]) if len(v) > 1 else 1, int(v[2]) if len(v) > 2 else 1),
    "T248": lambda v: moduli.T248Point(*v),
    "Extension": lambda v: moduli.ExtensionPoint(*v) if len(v) == 8 else v,
}


def cmd_jacobian_rank(args):
    comp = explorer._component(args.component)
    point = _POINT_BUILDERS[comp](_floats(args.params))
    r = explorer.jacobian_rank(comp, point, args.step, args.jac_rank_tol)
    payload = {"component": comp, "rank": r, "step": args.step}
    _emit(args, report("jacobian", payload, dict(_tols(args), jacobian_rank_tol=args.jac_rank_tol)),
          f"jacobian-rank: {comp} -> {r}")
    return EXIT_OK


def cmd_probe(args):
    m, n, p = (int(x) for x in args.type.split(","))
    cfg = explorer.ProbeConfig(m, n, p, restarts=args.restarts, max_iters=args.max_iters, seed=args.seed,
                               penalty_tol=args.penalty_tol, polish_iters=args.polish_iters)
    res = explorer.existence_probe(cfg)
    payload = dict(res.to_dict(), type=[m, n, p], seed=args.seed, restarts=args.restarts)
    _emit(args, report("probe", payload, dict(_tols(args), penalty_tol=args.penalty_tol)),
          f"probe [{m},{n},{p}]: best residual {res.best_residual:.3e} -> {'feasible' if res.feasible else 'infeasible'}")
    return EXIT_OK if res.feasible else EXIT_FAIL


def cmd_twist(args):
    H = _system_arg(args)
    T = canonical.rigidity_twist(H, args.scale)
    _emit(args, system_document(T, {"source": "rigidity-twist"}))
    return EXIT_OK


def cmd_rigid_check(args):
    H = _system_arg(args)
    ok = canonical.check_rigid_range(H, 4, args.tol)
    _emit(args, report("rigid", {"rigid": ok}, _tols(args)), f"rigid-check: {ok}")
    return EXIT_OK if ok else EXIT_FAIL


# ---- parser -----------------------------------------------------------------------

def _default_seed() -> int:
    env = os.environ.get("OMUL_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=hurwitz.DEFAULT_TOL)
    common.add_argument("--rank-tol", type=float, default=hurwitz.DEFAULT_RANK_TOL)
    common.add_argument("--seed", type=int, default=_default_seed())
    common.add_argument("--out", default=None, help="write the JSON document here")
    common.add_argument("--json", action="store_true", help="print the JSON document on stdout")

    ap = argparse.ArgumentParser(prog="omul", description="Orthogonal multiplications of type [3,4,p].")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, takes_input=True, **kw):
        p = sub.add_parser(name, parents=[common], **kw)
        if takes_input:
            p.add_argument("input", nargs="?", default="-", help="input document (default: stdin)")
        p.set_defaults(fn=fn)
        return p

    add("verify", cmd_verify)
    add("gram", cmd_gram)
    add("from-gram", cmd_from_gram)
    add("parker", cmd_parker)
    add("normalize", cmd_normalize)
    add("canonicalize", cmd_canonicalize)
    add("invariants", cmd_invariants)
    p = add("classify", cmd_classify)
    p.add_argument("--membership-tol", type=float, default=canonical.MEMBERSHIP_TOL)
    add("rank", cmd_rank)

    p = add("construct", cmd_construct, takes_input=False)
    csub = p.add_subparsers(dest="family", required=True)
    g = csub.add_parser("grand", parents=[common])
    for k in ("alpha", "mu"):
        g.add_argument(f"--{k}", type=float, required=True)
    for k in ("a1421", "a1422", "a1122"):
        g.add_argument(f"--{k}", type=float, default=0.0)
    g.add_argument("--branch", choices=(moduli.STANDARD, moduli.MIRROR), default=moduli.STANDARD)
    g.add_argument("--beta-sign", type=int, choices=(1, -1), default=1)
    a = csub.add_parser("anomalous", parents=[common])
    for k in ("phi", "psi", "theta", "eta"):
        a.add_argument(f"--{k}", type=float, required=True)
    a.add_argument("--signs", default=None, help="four comma-separated +-1")
    t = csub.add_parser("t347", parents=[common])
    t.add_argument("--nu", type=float, required=True)
    t.add_argument("--mu-sign", type=int, choices=(1, -1), default=1)
    t.add_argument("--gamma-sign", type=int, choices=(1, -1), default=1)
    t = csub.add_parser("t248", parents=[common])
    t.add_argument("--mu", type=float, required=True)
    t.add_argument("--nu", type=float, required=True)
    csub.add_parser("quaternion", parents=[common])
    e = csub.add_parser("extend", parents=[common])
    for k in ("alpha", "gamma", "mu", "nu"):
        e.add_argument(f"--{k}", type=float, required=True)
    for k in ("phi-e", "psi-e", "zeta", "xi"):
        e.add_argument(f"--{k}", type=float, default=math.pi / 2)

    p = add("solve-extension", cmd_solve_extension, takes_input=False)
    p.add_argument("--family", choices=("N1", "N2", "N3"), required=True)
    for k in ("alpha", "eps", "nu", "gamma"):
        p.add_argument(f"--{k}", type=float, default=None)

    p = add("sample", cmd_sample, takes_input=False)
    p.add_argument("--component", choices=explorer.COMPONENTS, required=True)
    p.add_argument("--count", type=int, default=10)

    p = add("jacobian-rank", cmd_jacobian_rank, takes_input=False)
    p.add_argument("--component", choices=explorer.COMPONENTS, required=True)
    p.add_argument("--params", required=True, help="comma-separated point coordinates")
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--jac-rank-tol", type=float, default=1e-6)

    p = add("probe", cmd_probe, takes_input=False)
    p.add_argument("--type", required=True, help="m,n,p")
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--polish-iters", type=int, default=100)
    p.add_argument("--penalty-tol", type=float, default=1e-6)

    p = add("twist", cmd_twist)
    p.add_argument("--scale", type=float, default=None)
    add("rigid-check", cmd_rigid_check)
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_FAIL if exc.code else EXIT_OK
    try:
        return args.fn(args)
    except DocumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InputError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (NumericalError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
