"""Command-line front end: ``modet <list|verify|calibrate|expand|eval> [name] [--flag value]...``.

Complex inputs are two real tokens (re im); torus points are (u, v) with
z = 2 pi i (u + v tau).  Exit codes: 0 all checks pass, 1 some check
failed, 2 usage or domain error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import genus2
from .classical import Normalization, discriminant_series, eisenstein_series, modular_eval
from .config import TruncationPolicy, default_conventions, load_conventions, precision_mode, save_conventions
from .elliptic import TWO_PI_I, deformed_eisenstein, p_deformed, prime_form, theta_char, twist_from_angles
from .identities import (
    AS_PRINTED,
    FIT_CONSTANT,
    REGISTRY,
    UnknownIdentity,
    calibrate_convention,
    check_identity,
    list_identities,
)
from .report import calibration_entry, emit_report, make_document, result_entry
from .series import eta_series

GENUS_TWO = {
    "block_det": "det[[S_kappa_n, -xi H D], [Hbar^t, I - T]] = det S2_n det(I - T) (torus self-sewing)",
    "prop3": "eta^{3 kappa^2} against the self-sewn Szego determinant, with the sewing-determinant theta ratio "
             "substituted (fit-constant for kappa != 0)",
    "eta6": "eta^6 against genus-two theta and sewing determinants for two sewn tori; eps = 0 factorisation "
            "asserted, z-scan reported",
    "z2_factorization": "two sewn tori at eps = 0: fermion Z2 = boson phases * theta2(diag) / (eta eta)",
}
FIT_BY_DEFAULT = {"gen_garvan_1", "gen_garvan_2", "higher_power"}
EVAL_FUNCTIONS = ("eta", "delta", "eisenstein", "deformed-eisenstein", "theta", "prime-form", "p1", "pk",
                  "szego", "szego-moment", "z2")
EXPAND_FUNCTIONS = ("eisenstein", "eta", "delta")


class UsageError(ValueError):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modet", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=("list", "verify", "calibrate", "expand", "eval"))
    p.add_argument("name", nargs="*", help="identity or function name(s)")
    p.add_argument("--config", help="JSON file supplying any flag (command line wins)")
    p.add_argument("--tau", nargs=2, type=float, metavar=("RE", "IM"))
    p.add_argument("--tau2", nargs=2, type=float, metavar=("RE", "IM"))
    p.add_argument("--eps", nargs=2, type=float, metavar=("RE", "IM"))
    p.add_argument("--rho", nargs=2, type=float, metavar=("RE", "IM"))
    p.add_argument("--w-uv", nargs=2, type=float, metavar=("U", "V"))
    p.add_argument("--z-uv", nargs=2, type=float, metavar=("U", "V"))
    p.add_argument("--x-uv", nargs=2, type=float, metavar=("U", "V"))
    p.add_argument("--y-uv", nargs=2, type=float, metavar=("U", "V"))
    p.add_argument("--kappa", type=float)
    p.add_argument("--B", type=int)
    p.add_argument("--xi", choices=("i", "-i"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--alpha2", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--char", nargs=2, type=float, metavar=("A", "B"), help="theta characteristics")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--m-weights", nargs="+", type=int)
    p.add_argument("--n-weights", nargs="+", type=int)
    p.add_argument("--order", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--quad", type=int, help="starting quadrature node count")
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=(AS_PRINTED, FIT_CONSTANT))
    p.add_argument("--norm", choices=[n.value for n in Normalization])
    p.add_argument("--reading", choices=("printed", "restated"))
    p.add_argument("--repair", choices=("yes", "no"))
    p.add_argument("--form", choices=("fermion", "boson", "product"))
    p.add_argument("--conventions", help="conventions JSON file (default: calibrated)")
    p.add_argument("--save", help="calibrate: write the winning conventions here")
    p.add_argument("--output", "-o", help="write the JSON report here instead of stdout")
    p.add_argument("--csv", help="also write a CSV summary row per result")
    return p


def parse_args(argv) -> argparse.Namespace:
    parser = _parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        data = json.loads(Path(known.config).read_text())
        valid = {a.dest for a in parser._actions}
        bad = sorted(set(data) - valid)
        if bad:
            raise UsageError(f"unknown config keys: {', '.join(bad)}")
        data.pop("command", None)
        data.pop("name", None)
        parser.set_defaults(**data)
    return parser.parse_args(argv)


def _cplx(pair, default: complex) -> complex:
    return default if pair is None else complex(pair[0], pair[1])


def _policy(args) -> TruncationPolicy:
    kw = {}
    if args.M is not None:
        kw["M"] = args.M
    if args.quad is not None:
        kw["n_quad"] = args.quad
    if args.order is not None:
        kw["order"] = args.order
    return TruncationPolicy(**kw)


def _conventions(args):
    return load_conventions(args.conventions) if args.conventions else default_conventions()


def _point(uv, tau: complex) -> complex:
    return TWO_PI_I * (uv[0] + uv[1] * tau)


def _selfsew(args) -> genus2.SelfSewing:
    tau = _cplx(args.tau, 2j)
    w = _point(args.w_uv or (0.3, 0.4), tau)
    kw = {k: getattr(args, k) for k in ("alpha", "beta", "alpha2", "beta2") if getattr(args, k) is not None}
    kw = {("alpha1" if k == "alpha" else "beta1" if k == "beta" else k): v for k, v in kw.items()}
    return genus2.SelfSewing(tau, w, _cplx(args.rho, 1e-3), 0.25 if args.kappa is None else args.kappa,
                             1 if args.B is None else args.B, -1j if args.xi == "-i" else 1j, **kw)


def _twotori(args) -> genus2.TwoTorusSewing:
    tau = _cplx(args.tau, 2j)
    kw = {k: getattr(args, k) for k in ("alpha", "beta", "alpha2", "beta2") if getattr(args, k) is not None}
    kw = {("alpha1" if k == "alpha" else "beta1" if k == "beta" else k): v for k, v in kw.items()}
    return genus2.TwoTorusSewing(tau, _cplx(args.tau2, tau), _cplx(args.eps, 0.01),
                                 xi=-1j if args.xi == "-i" else 1j, **kw)


def _identity_params(name: str, args) -> dict:
    spec = REGISTRY[name]
    out = {}
    for key in spec.defaults:
        if key == "tau" and args.tau is not None:
            out["tau"] = list(args.tau)
        elif key == "repair" and args.repair is not None:
            out["repair"] = args.repair == "yes"
        elif key in ("m_weights", "n_weights", "alpha", "beta", "n", "seed", "order", "norm", "reading"):
            v = getattr(args, key)
            if v is not None:
                out[key] = v
    return out


def _verify_one(name: str, args, policy, conv):
    if name in REGISTRY:
        mode = args.mode or (FIT_CONSTANT if name in FIT_BY_DEFAULT else AS_PRINTED)
        return check_identity(name, _identity_params(name, args), mode, policy, conv, args.tol)
    seed = 0 if args.seed is None else args.seed
    if name == "block_det":
        kw = {} if args.tol is None else {"tol": args.tol}
        return genus2.check_block_det(args.n or 1, _selfsew(args), policy, seed, conventions=conv, **kw)
    if name == "prop3":
        return genus2.check_prop3(_selfsew(args), args.n or 1, policy, args.mode, seed, conventions=conv,
                                  tol=args.tol)
    if name == "eta6":
        return genus2.check_eta6(_twotori(args), policy=policy, conventions=conv)
    if name == "z2_factorization":
        kw = {} if args.tol is None else {"tol": args.tol}
        return genus2.check_factorization(_twotori(args), policy, conv, **kw)
    known = ", ".join(list(REGISTRY) + list(GENUS_TWO))
    raise UnknownIdentity(f"unknown identity {name!r}; registered: {known}")


def _eval(name: str, args, policy, conv) -> dict:
    tau = _cplx(args.tau, 1j)
    alpha = 0.3 if args.alpha is None else args.alpha
    beta = 0.7 if args.beta is None else args.beta
    z = _point(args.z_uv or (0.3, 0.2), tau)
    if name in ("eta", "delta", "eisenstein"):
        v, tail = modular_eval(name, tau, args.norm or "standard", policy, args.n)
        return {"function": name, "tau": tau, "n": args.n, "value": v, "tail": tail}
    if name == "deformed-eisenstein":
        n = args.n or 2
        tw = twist_from_angles(alpha, beta, conv)
        return {"function": name, "tau": tau, "n": n, "alpha": alpha, "beta": beta,
                "value": deformed_eisenstein(n, tw, tau)}
    if name == "theta":
        a, b = args.char or (0.5, 0.5)
        return {"function": name, "tau": tau, "z": z, "char": [a, b], "value": theta_char(a, b, z, tau, conv.theta)}
    if name == "prime-form":
        return {"function": name, "tau": tau, "z": z, "value": prime_form(z, tau, conv.theta)}
    if name in ("p1", "pk"):
        k = 1 if name == "p1" else (args.k or 2)
        tw = twist_from_angles(alpha, beta, conv)
        return {"function": name, "tau": tau, "z": z, "k": k, "alpha": alpha, "beta": beta,
                "value": p_deformed(k, tw, z, tau)}
    if name == "szego":
        cfg = _selfsew(args)
        x = _point(args.x_uv or (0.1, 0.3), cfg.tau)
        y = _point(args.y_uv or (0.6, 0.7), cfg.tau)
        v, est = genus2.szego_full(x, y, cfg, policy, conv)
        return {"function": name, "x": x, "y": y, "value": v, "estimate": est}
    if name == "szego-moment":
        cfg = _selfsew(args)
        k, l = args.k or 0, args.l or 0
        return {"function": name, "k": k, "l": l, "value": genus2.szego_moment(k, l, cfg, policy, conv)}
    if name == "z2":
        cfg = _twotori(args)
        form = args.form or "fermion"
        omega = genus2.default_omega(cfg) if form == "boson" else None
        v, est = genus2.z2_partition(cfg, form, omega, policy, conv)
        return {"function": name, "form": form, "omega": omega, "value": v, "estimate": est}
    raise UsageError(f"unknown function {name!r}; available: {', '.join(EVAL_FUNCTIONS)}")


def _expand(name: str, args) -> dict:
    order = args.order or 20
    if name == "eisenstein":
        s = eisenstein_series(args.n or 4, order, args.norm or "standard")
    elif name == "eta":
        s = eta_series(order)
    elif name == "delta":
        s = discriminant_series(order)
    else:
        raise UsageError(f"unknown series {name!r}; available: {', '.join(EXPAND_FUNCTIONS)}")
    return {"function": name, "n": args.n, "order": order, **s.to_json()}


def _echo(args) -> dict:
    d = {k: v for k, v in vars(args).items()}
    d["precision"] = precision_mode()
    d["conventions_used"] = _conventions(args).to_dict()
    d["policy"] = _policy(args).to_dict()
    return d


def _write(doc: dict, args, out) -> None:
    data = emit_report(doc, "json")
    if args.output:
        Path(args.output).write_bytes(data)
    else:
        out.write(data.decode())
    if args.csv:
        Path(args.csv).write_bytes(emit_report(doc, "csv"))


def run(argv=None, out=None, err=None) -> tuple:
    """Execute one command; returns (exit code, report document or None)."""
    out = out or sys.stdout
    err = err or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), None
    except (UsageError, OSError, json.JSONDecodeError) as exc:
        err.write(f"modet: {exc}\n")
        return 2, None

    if args.command == "list":
        for ident, kind, formula in list_identities():
            out.write(f"{ident:20s} {kind:8s} {formula}\n")
        for ident, formula in GENUS_TWO.items():
            out.write(f"{ident:20s} {'numeric':8s} {formula}\n")
        return 0, None

    try:
        config = _echo(args)
        policy = _policy(args)
        conv = _conventions(args)
        names = [n.replace("-", "_") if n.replace("-", "_") in GENUS_TWO else n for n in args.name]
        if args.command == "verify":
            if not names:
                raise UsageError("verify needs an identity name")
            reports = [result_entry(_verify_one(n, args, policy, conv)) for n in names]
            doc = make_document(config, reports)
        elif args.command == "calibrate":
            ids = names or [i for i, s in REGISTRY.items() if s.axes]
            cal = calibrate_convention(ids, policy=policy)
            if args.save:
                save_conventions(cal.conventions, args.save)
            doc = make_document(config, [], 0 if cal.passed else 1, calibration=calibration_entry(cal))
        elif args.command == "expand":
            if not names:
                raise UsageError(f"expand needs a series name: {', '.join(EXPAND_FUNCTIONS)}")
            doc = make_document(config, [], 0, values=[_expand(n, args) for n in names])
        else:
            if not names:
                raise UsageError(f"eval needs a function name: {', '.join(EVAL_FUNCTIONS)}")
            doc = make_document(config, [], 0, values=[_eval(n, args, policy, conv) for n in names])
    except UnknownIdentity as exc:
        err.write(f"modet: {exc.args[0]}\n")
        doc = make_document(_safe_echo(args), [], 2)
        _write(doc, args, out)
        return 2, doc
    except (UsageError, ValueError, ArithmeticError, OSError, RuntimeError) as exc:
        err.write(f"modet: {exc}\n")
        doc = make_document(_safe_echo(args), [], 2)
        _write(doc, args, out)
        return 2, doc
    _write(doc, args, out)
    return doc["exit"], doc


def _safe_echo(args) -> dict:
    return {k: v for k, v in vars(args).items()}


def main(argv=None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
