"""Command-line front end. JSON on stdout; ``--pretty`` switches to tables."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import scenarios
from .calibration import audit
from .errors import (
    AdvcalError,
    ConfigurationError,
    DomainError,
    InvariantViolation,
    PreconditionError,
)
from .finite_instance import (
    adversarial_bayes_risk,
    brute_force_bayes_risk,
    load_instance,
    optimal_attack,
    parse_instance,
    standard_bayes_risk,
)
from .grid_world import Axis
from .losses import KINDS, MarginLoss, make_loss
from .training import TrainConfig, train

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2, 3


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_json_safe(v) for v in items]
    return obj


def _emit(data) -> None:
    print(json.dumps(_json_safe(data), sort_keys=True, indent=2))


def _table(rows: list, headers: list) -> str:
    cells = [[str(h) for h in headers]] + [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    if x is None:
        return "?"
    return str(x)


def _loss_from_args(args) -> MarginLoss:
    return make_loss(args.loss, tau=args.tau, lam=args.lam)


# -- commands ---------------------------------------------------------------

def cmd_audit_loss(args) -> int:
    rep = audit(_loss_from_args(args))
    if args.pretty:
        d = rep.to_dict()
        rows = [[k, d[k]] for k in ("loss_name", "standard_calibrated", "adversarially_calibrated",
                                     "zero_in_argmin_symmetrized", "zero_one_like", "verdict_rule")]
        print(_table(rows, ["field", "value"]))
    else:
        _emit(rep.to_dict())
    return EXIT_OK


def cmd_list_losses(args) -> int:
    reports = [audit(make_loss(k)) for k in KINDS]
    if args.pretty:
        rows = [[r.loss_name, r.loss["tau"], r.loss["lambda"], r.standard_calibrated,
                 r.adversarially_calibrated, r.zero_one_like, r.verdict_rule] for r in reports]
        print(_table(rows, ["loss", "tau", "lambda", "standard", "adversarial", "0/1-like", "rule"]))
    else:
        _emit([
            {
                "name": r.loss_name,
                "loss": r.loss,
                "standard_calibrated": r.standard_calibrated,
                "adversarially_calibrated": r.adversarially_calibrated,
                "zero_one_like": r.zero_one_like,
                "verdict_rule": r.verdict_rule,
            }
            for r in reports
        ])
    return EXIT_OK


def cmd_bayes_risk(args) -> int:
    inst = load_instance(args.instance)
    rep = adversarial_bayes_risk(inst)
    d = rep.to_dict()
    if args.pretty:
        print(_table([[d["method"], d["value"], sorted(rep.witness)]], ["method", "risk", "cover"]))
    else:
        _emit(d)
    return EXIT_OK


def cmd_attack(args) -> int:
    inst = load_instance(args.instance)
    plan = optimal_attack(inst)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    doc = {**plan.to_dict(), "dual_value": standard_bayes_risk(plan)}
    out.write_text(json.dumps(_json_safe(doc), sort_keys=True, indent=2) + "\n")
    csv_path = out.with_suffix(".csv")
    csv_path.write_text(plan.to_csv())
    _emit({"json": str(out), "csv": str(csv_path), "dual_value": doc["dual_value"], "moves": len(plan.moves)})
    return EXIT_OK


def cmd_duality(args) -> int:
    inst = load_instance(args.instance)
    primal = adversarial_bayes_risk(inst)
    oracle = brute_force_bayes_risk(inst)
    plan = optimal_attack(inst)
    violations = plan.violations(inst)
    dual = standard_bayes_risk(plan)
    vals = (primal.value, oracle.value, dual)
    holds = max(vals) - min(vals) <= args.tol and not violations
    d = {
        "mincut": primal.value,
        "brute_force": oracle.value,
        "dual_attack": dual,
        "cover": sorted(primal.witness),
        "attack_violations": violations,
        "holds": holds,
        "tol": args.tol,
    }
    if args.pretty:
        print(_table([[d["mincut"], d["brute_force"], d["dual_attack"], holds]],
                     ["mincut", "brute_force", "dual_attack", "holds"]))
    else:
        _emit(d)
    return EXIT_OK if holds else EXIT_MISMATCH


_CONFIG_FIELDS = {"loss", "instance", "scenario", "params", "axes", "step", "schedule", "iterations",
                  "init", "init_param", "clamp", "log_every", "tie_break"}


def config_from_dict(d: dict, base_dir: Path | None = None) -> TrainConfig:
    """Decode a training config document; field names mirror TrainConfig."""
    if not isinstance(d, dict):
        raise ConfigurationError("config: expected a JSON object")
    extra = set(d) - _CONFIG_FIELDS
    if extra:
        raise ConfigurationError(f"config: unknown fields {sorted(extra)}")
    if "loss" not in d:
        raise ConfigurationError("config: missing field 'loss'")
    loss = d["loss"]
    loss = make_loss(loss) if isinstance(loss, str) else MarginLoss.from_dict(loss)

    if "instance" in d:
        src = d["instance"]
        if isinstance(src, str):
            path = Path(src)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            inst = load_instance(path)
        else:
            inst = parse_instance(src)
    elif "scenario" in d:
        inst = scenarios.build(d["scenario"], d.get("params"))
    else:
        raise ConfigurationError("config: need 'instance' (path or object) or 'scenario'")

    axes = d.get("axes")
    if axes is not None:
        try:
            axes = tuple(Axis(tuple(float(e) for e in edges)) for edges in axes)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"config.axes: {exc}") from exc
    kw = {k: d[k] for k in ("step", "schedule", "iterations", "init", "init_param", "clamp",
                            "log_every", "tie_break") if k in d}
    return TrainConfig(loss=loss, instance=inst, axes=axes, **kw)


def cmd_train(args) -> int:
    path = Path(args.config)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    cfg = config_from_dict(doc, path.parent)
    if args.seed is not None:
        if cfg.init != "random":
            raise ConfigurationError("--seed only applies to init='random'")
        cfg.init_param = args.seed
    res = train(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trajectory.csv").write_text(res.trajectory.to_csv())
    (out / "classifier.json").write_text(res.classifier.to_json() + "\n")
    _emit({**res.final, "trajectory": str(out / "trajectory.csv"), "classifier": str(out / "classifier.json")})
    return EXIT_OK


def _parse_params(items) -> dict:
    params = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ConfigurationError(f"--params expects key=value, got {item!r}")
        if key == "metric":
            params[key] = val
            continue
        try:
            params[key] = float(val)
        except ValueError:
            raise ConfigurationError(f"--params {key}: expected a number, got {val!r}") from None
    return params


def cmd_scenario(args) -> int:
    losses = args.losses.split(",") if args.losses else None
    rep = scenarios.run(args.name, _parse_params(args.params), losses, train_runs=not args.no_train)
    if args.pretty:
        rows = [[c.quantity, c.expected, c.got, c.tol, c.source, "ok" if c.passed else "FAIL"] for c in rep.checks]
        print(_table(rows, ["quantity", "expected", "got", "tol", "source", "status"]))
    else:
        _emit(rep.to_dict())
    return EXIT_OK if rep.passed else EXIT_MISMATCH


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="advcal", description="Adversarial calibration and consistency lab.")
    p.add_argument("--pretty", action="store_true", help="human-readable tables instead of JSON")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--pretty", action="store_true", default=argparse.SUPPRESS)
        sp.set_defaults(func=fn)
        return sp

    sp = add("audit-loss", cmd_audit_loss, "calibration report for one loss")
    sp.add_argument("--loss", required=True, choices=KINDS)
    sp.add_argument("--tau", type=float, default=None)
    sp.add_argument("--lambda", dest="lam", type=float, default=None)

    add("list-losses", cmd_list_losses, "the loss zoo with calibration verdicts")

    sp = add("bayes-risk", cmd_bayes_risk, "adversarial Bayes risk via min cut")
    sp.add_argument("--instance", required=True)

    sp = add("attack", cmd_attack, "optimal attack as JSON plus CSV")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--out", required=True, help="JSON path; the CSV goes next to it")

    sp = add("duality", cmd_duality, "compare min cut, brute force and the attack's dual value")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--tol", type=float, default=1e-9)

    sp = add("train", cmd_train, "subgradient training from a JSON config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--seed", type=int, default=None, help="seed for init='random'")

    sp = add("scenario", cmd_scenario, "run a named scenario and diff against expectations")
    sp.add_argument("--name", required=True, choices=sorted(scenarios.SCENARIOS))
    sp.add_argument("--params", nargs="*", default=[], metavar="KEY=VALUE")
    sp.add_argument("--losses", default=None, help="comma-separated loss names")
    sp.add_argument("--no-train", action="store_true", help="skip the training runs")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(json.dumps({"error": "invariant_violation", "message": str(exc),
                          "values": _json_safe(exc.values)}), file=sys.stderr)
        return EXIT_INVARIANT
    except (ConfigurationError, DomainError, PreconditionError, OSError) as exc:
        print(f"advcal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AdvcalError as exc:
        # divergence, resource limits: the run itself failed
        print(f"advcal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
