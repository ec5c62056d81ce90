"""Command-line harness exposing every workflow with seeded determinism.

Exit codes: 0 success, 1 rejected input (one-line diagnostic on stderr),
2 internal numerical failure. All randomness derives from a single seed
through named sub-seeds, so adding consumers never shifts existing
streams, and rerunning any subcommand with the same seed reproduces its
output byte for byte.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import filters, mnn
from . import perturbation_lab as plab
from . import spectral_core as score
from . import spectrum_partition as spart
from . import wireless_experiment as wx
from .errors import InputValidationError, NumericalError
from .fileio import fmt, load_matrix, load_vector, strict_keys
from .seeding import subseed


class _UsageError(Exception):
    def __init__(self, parser, message):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(self, message)


def _emit(text: str, output: str) -> None:
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _pyify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, (np.integer, np.bool_)):
        return int(obj) if isinstance(obj, np.integer) else bool(obj)
    if isinstance(obj, dict):
        return {str(k): _pyify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_pyify(v) for v in obj]
    return obj


def _json_doc(config: dict, results: dict) -> str:
    doc = {"version": __version__, "config": _pyify(config)}
    doc.update(_pyify(results))
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _csv_doc(config: dict, header, rows) -> str:
    lines = [
        f"# fdtlab {__version__}",
        "# config " + json.dumps(_pyify(config), sort_keys=True),
        ",".join(header),
    ]
    lines.extend(",".join(cells) for cells in rows)
    return "\n".join(lines) + "\n"


def _load_json(path: str, context: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise InputValidationError(f"no such file: {path}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputValidationError(f"invalid JSON in {context} file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputValidationError(f"{context} file {path} must hold a JSON object")
    return doc


def _eigenvalues_from_args(args) -> np.ndarray:
    if getattr(args, "eigenvalues", None):
        return load_vector(args.eigenvalues)
    if getattr(args, "matrix", None):
        return score.sym_eig(score.symmetric_operator(load_matrix(args.matrix))).eigenvalues
    raise InputValidationError("provide --eigenvalues or --matrix")


def _perturbation_from_args(args, n: int) -> score.SymmetricOperator:
    if getattr(args, "perturbation", None):
        return score.symmetric_operator(load_matrix(args.perturbation))
    if getattr(args, "epsilon", None) is None:
        raise InputValidationError("provide --perturbation FILE or --epsilon")
    seed = subseed(args.seed, "perturbation")
    if args.pert_kind == "lognormal":
        return plab.lognormal_perturbation(n, args.mu, args.sigma, args.epsilon, seed)
    return plab.random_symmetric_perturbation(n, args.epsilon, seed)


def _response_from_spec(doc: dict):
    strict_keys(doc, {"kind", "scale", "center", "width"}, "response spec")
    return plab.make_response(
        doc.get("kind", "saturating"), scale=doc.get("scale", 0.9),
        center=doc.get("center", 0.0), width=doc.get("width", 1.0),
    )


# ---------------------------------------------------------------- subcommands


def cmd_eig(args):
    op = score.symmetric_operator(load_matrix(args.matrix))
    eig = score.sym_eig(op)
    config = {"subcommand": "eig", "matrix": args.matrix, "seed": args.seed,
              "format": args.format}
    if args.format == "csv":
        rows = [[fmt(v)] for v in eig.eigenvalues]
        _emit(_csv_doc(config, ["eigenvalue"], rows), args.output)
    else:
        _emit(_json_doc(config, {
            "eigenvalues": eig.eigenvalues,
            "eigenvectors": eig.eigenvectors,
        }), args.output)
    return 0


def cmd_partition(args):
    lam = _eigenvalues_from_args(args)
    part = spart.partition_spectrum(lam, args.alpha)
    clusters = sorted(
        [[i] for i in part.singletons] + [list(g) for g in part.groups],
        key=lambda c: c[0],
    )
    config = {"subcommand": "partition", "eigenvalues": args.eigenvalues,
              "matrix": args.matrix, "alpha": args.alpha, "seed": args.seed}
    _emit(_json_doc(config, {
        "alpha": part.alpha, "D": part.d_count, "N": part.n_count,
        "clusters": clusters,
    }), args.output)
    return 0


def cmd_filter_response(args):
    lam = _eigenvalues_from_args(args)
    doc = _load_json(args.filter, "filter")
    config = {"subcommand": "filter-response", "filter": args.filter,
              "eigenvalues": args.eigenvalues, "matrix": args.matrix, "seed": args.seed}
    if doc.get("kind", "poly") == "poly":
        strict_keys(doc, {"kind", "coeffs"}, "filter spec")
        if "coeffs" not in doc:
            raise InputValidationError("polynomial filter spec needs a 'coeffs' field")
        responses = filters.frequency_response(filters.PolyFilter(doc["coeffs"]), lam)
    elif doc["kind"] == "fdt":
        strict_keys(doc, {"kind", "alpha", "response"}, "filter spec")
        part = spart.partition_spectrum(np.sort(lam), doc.get("alpha", 0.5))
        spec = filters.build_fdt_spec(
            _response_from_spec(doc.get("response", {})), part, np.sort(lam)
        )
        responses = spec.response_vector()
        lam = np.sort(lam)
    else:
        raise InputValidationError(f"unknown filter kind {doc.get('kind')!r}")
    rows = [[fmt(x), fmt(r)] for x, r in zip(lam, np.atleast_1d(responses))]
    _emit(_csv_doc(config, ["lambda", "response"], rows), args.output)
    return 0


def cmd_nn_forward(args):
    params = mnn.params_from_json(Path(args.params).read_text())
    eig = score.sym_eig(score.symmetric_operator(load_matrix(args.matrix)))
    x = load_matrix(args.input) if params.features[0] > 1 else load_vector(args.input)
    out = mnn.forward(params, eig, x)
    config = {"subcommand": "nn-forward", "params": args.params, "matrix": args.matrix,
              "input": args.input, "seed": args.seed, "format": args.format}
    if args.format == "json":
        _emit(_json_doc(config, {"output": out}), args.output)
    else:
        rows = [[fmt(v) for v in row] for row in out]
        header = [f"feature_{p}" for p in range(out.shape[1])]
        _emit(_csv_doc(config, header, rows), args.output)
    return 0


def cmd_weyl_check(args):
    op = score.symmetric_operator(load_matrix(args.matrix))
    pert = _perturbation_from_args(args, op.n)
    report = plab.weyl_check(op, pert)
    config = {"subcommand": "weyl-check", "matrix": args.matrix,
              "perturbation": args.perturbation, "epsilon": args.epsilon,
              "pert_kind": args.pert_kind, "seed": args.seed}
    _emit(_json_doc(config, {
        "max_shift": report.max_shift, "norm_a": report.norm_a, "holds": report.holds,
    }), args.output)
    return 0


def _parse_cluster(text: str) -> list[int]:
    try:
        if ":" in text:
            lo, hi = text.split(":")
            return list(range(int(lo), int(hi) + 1))
        return [int(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise InputValidationError(
            f"cluster must be 'lo:hi' (inclusive) or comma-separated indices, got {text!r}"
        ) from exc


def cmd_dk_check(args):
    op = score.symmetric_operator(load_matrix(args.matrix))
    pert = _perturbation_from_args(args, op.n)
    report = plab.davis_kahan_check(op, pert, _parse_cluster(args.cluster))
    config = {"subcommand": "dk-check", "matrix": args.matrix, "cluster": args.cluster,
              "perturbation": args.perturbation, "epsilon": args.epsilon,
              "pert_kind": args.pert_kind, "seed": args.seed}
    _emit(_json_doc(config, {
        "projector_diff": report.projector_diff, "bound": report.bound,
        "gap": report.gap, "norm_a": report.norm_a, "holds": report.holds,
    }), args.output)
    return 0


def cmd_weyl_law(args):
    if args.kind == "cycle":
        lam = score.sym_eig(score.build_cycle_laplacian(args.size)).eigenvalues
    elif args.kind == "torus":
        ny = args.size_y or args.size
        lam = score.sym_eig(score.build_torus_laplacian(args.size, ny)).eigenvalues
    else:
        lam = _eigenvalues_from_args(args)
    slope = spart.weyl_law_fit(lam, args.k_lo, args.k_hi)
    config = {"subcommand": "weyl-law", "kind": args.kind, "size": args.size,
              "size_y": args.size_y, "eigenvalues": args.eigenvalues,
              "matrix": args.matrix, "k_lo": args.k_lo, "k_hi": args.k_hi,
              "seed": args.seed}
    _emit(_json_doc(config, {"slope": slope}), args.output)
    return 0


_STABILITY_ROW = ("epsilon", "alpha", "D", "N", "B", "empirical", "bound", "holds")


def _stability_rows(reports):
    rows = []
    for r in reports:
        rows.append([
            fmt(r.epsilon), fmt(r.alpha), str(r.d_count), str(r.n_count),
            fmt(r.b_lipschitz), fmt(r.empirical_diff), fmt(r.theoretical_bound),
            str(int(r.holds)),
        ])
    return rows


def _emit_stability(reports, config, args):
    summary = plab.summarize_trials(reports)
    _emit(_csv_doc(config, _STABILITY_ROW, _stability_rows(reports)), args.output)
    _emit(_json_doc(config, {
        "trials": summary.trials, "violations": summary.violations,
        "max_ratio": summary.max_ratio,
    }), args.summary)
    return 0


def cmd_filter_stability(args):
    doc = _load_json(args.config, "filter-stability config")
    strict_keys(
        doc, {"trials", "seed", "alpha", "epsilon", "dimension", "kind", "response"},
        "filter-stability config",
    )
    response = _response_from_spec(doc["response"]) if "response" in doc else None
    resolved = {
        "trials": int(doc.get("trials", 200)),
        "seed": doc.get("seed", subseed(args.seed, "filter-stability")),
        "alpha": doc.get("alpha", 0.5),
        "epsilon": doc.get("epsilon", doc.get("alpha", 0.5) / 2.0),
        "dimension": int(doc.get("dimension", 16)),
        "kind": doc.get("kind", "random_symmetric"),
    }
    if "response" in doc:
        resolved["response"] = doc["response"]
    reports = plab.run_filter_stability_suite(
        trials=resolved["trials"], seed=resolved["seed"], alpha=resolved["alpha"],
        epsilon=resolved["epsilon"], dimension=resolved["dimension"],
        kind=resolved["kind"], response=response,
    )
    config = {"subcommand": "filter-stability", **resolved}
    return _emit_stability(reports, config, args)


def cmd_nn_stability(args):
    doc = _load_json(args.config, "nn-stability config")
    strict_keys(
        doc,
        {"trials", "seed", "alpha", "epsilon", "dimension", "kind",
         "layers", "width", "taps", "activation"},
        "nn-stability config",
    )
    resolved = {
        "trials": int(doc.get("trials", 100)),
        "seed": doc.get("seed", subseed(args.seed, "nn-stability")),
        "alpha": doc.get("alpha", 0.5),
        "epsilon": doc.get("epsilon", doc.get("alpha", 0.5) / 2.0),
        "dimension": int(doc.get("dimension", 16)),
        "layers": int(doc.get("layers", 2)),
        "width": int(doc.get("width", 2)),
        "taps": int(doc.get("taps", 4)),
        "activation": doc.get("activation", "relu"),
        "kind": doc.get("kind", "random_symmetric"),
    }
    reports = plab.run_nn_stability_suite(
        trials=resolved["trials"], seed=resolved["seed"], alpha=resolved["alpha"],
        epsilon=resolved["epsilon"], dimension=resolved["dimension"],
        num_layers=resolved["layers"], width=resolved["width"],
        taps=resolved["taps"], activation=resolved["activation"],
        kind=resolved["kind"],
    )
    config = {"subcommand": "nn-stability", **resolved}
    return _emit_stability(reports, config, args)


_WIRELESS_KEYS = {
    "n", "half_width", "seed", "p0", "p_max", "noise_power", "pathloss_exponent",
    "layers", "widths", "taps", "activation", "output_mode",
    "iterations", "step_size", "fading_draws", "budget_weight", "score_gain", "response_cap",
    "fdt_alpha", "project_fdt", "eval_draws",
    "epsilon", "lognormal_mu", "lognormal_sigma",
    "perturbation_draws", "eval_fading_draws", "eval_seed",
}


def _wireless_setup(doc: dict, master_seed: int):
    strict_keys(doc, _WIRELESS_KEYS, "wireless config")
    resolved = {
        "n": int(doc.get("n", 15)),
        "half_width": doc.get("half_width", 50.0),
        "seed": doc.get("seed", subseed(master_seed, "wireless")),
        "p0": doc.get("p0", 1.0),
        "p_max": doc.get("p_max"),
        "noise_power": doc.get("noise_power", 1.0),
        "pathloss_exponent": doc.get("pathloss_exponent", 2.2),
        "layers": [int(x) for x in doc.get("layers", [1, 2, 3])],
        "widths": [int(x) for x in doc.get("widths", [4])],
        "taps": int(doc.get("taps", 4)),
        "activation": doc.get("activation", "tanh"),
        "output_mode": doc.get("output_mode", "binary"),
        "iterations": int(doc.get("iterations", 500)),
        "step_size": doc.get("step_size", 0.05),
        "fading_draws": int(doc.get("fading_draws", 20)),
        "budget_weight": doc.get("budget_weight", 0.1),
        "score_gain": doc.get("score_gain", 8.0),
        "response_cap": doc.get("response_cap", 2.5),
        "fdt_alpha": doc.get("fdt_alpha", 0.001),
        "project_fdt": bool(doc.get("project_fdt", True)),
        "eval_draws": int(doc.get("eval_draws", 50)),
        "epsilon": doc.get("epsilon", 2.0),
        "lognormal_mu": doc.get("lognormal_mu", 0.0),
        "lognormal_sigma": doc.get("lognormal_sigma", 1.0),
        "perturbation_draws": int(doc.get("perturbation_draws", 11)),
        "eval_fading_draws": int(doc.get("eval_fading_draws", 50)),
    }
    resolved["eval_seed"] = doc.get("eval_seed", subseed(resolved["seed"], "eval"))
    resolved["p_max"] = (
        resolved["n"] * resolved["p0"] / 2.0 if resolved["p_max"] is None
        else float(resolved["p_max"])
    )
    scenario = wx.generate_scenario(
        n=resolved["n"], half_width=resolved["half_width"],
        seed=subseed(resolved["seed"], "scenario"), p0=resolved["p0"],
        p_max=resolved["p_max"], noise_power=resolved["noise_power"],
        pathloss_exponent=resolved["pathloss_exponent"],
    )
    train_cfg = wx.TrainingConfig(
        iterations=resolved["iterations"], step_size=resolved["step_size"],
        fading_draws=resolved["fading_draws"], budget_weight=resolved["budget_weight"],
        score_gain=resolved["score_gain"], response_cap=resolved["response_cap"],
        fdt_alpha=resolved["fdt_alpha"], project_fdt=resolved["project_fdt"],
        seed=subseed(resolved["seed"], "train"), eval_draws=resolved["eval_draws"],
    )
    eval_cfg = wx.EvaluationConfig(
        epsilon=resolved["epsilon"], lognormal_mu=resolved["lognormal_mu"],
        lognormal_sigma=resolved["lognormal_sigma"],
        perturbation_draws=resolved["perturbation_draws"],
        fading_draws=resolved["eval_fading_draws"], seed=resolved["eval_seed"],
    )
    shape = {key: resolved[key] for key in
             ("layers", "widths", "taps", "activation", "output_mode")}
    return scenario, train_cfg, eval_cfg, shape, resolved


def _policy_doc(policy: wx.AllocationPolicy) -> dict:
    return {
        "params": json.loads(mnn.params_to_json(policy.params)),
        "input_signal": policy.input_signal.tolist(),
        "p0": policy.p0,
        "lam_scale": policy.lam_scale,
        "score_gain": policy.score_gain,
        "output_mode": policy.output_mode,
    }


def _policy_from_doc(doc: dict) -> wx.AllocationPolicy:
    strict_keys(doc, {"params", "input_signal", "p0", "lam_scale", "score_gain", "output_mode"}, "policy")
    return wx.AllocationPolicy(
        params=mnn.params_from_json(json.dumps(doc["params"])),
        input_signal=np.asarray(doc["input_signal"], dtype=float),
        p0=float(doc["p0"]),
        lam_scale=float(doc.get("lam_scale", 1.0)),
        score_gain=float(doc.get("score_gain", 8.0)),
        output_mode=doc.get("output_mode", "binary"),
    )


def cmd_wireless(args):
    doc = _load_json(args.config, "wireless config")
    scenario, train_cfg, eval_cfg, shape, resolved = _wireless_setup(doc, args.seed)
    config = {"subcommand": f"wireless {args.mode}", **resolved}

    if args.mode == "train":
        policies, histories = {}, {}
        for layers in shape["layers"]:
            for width in shape["widths"]:
                features = (1,) + (width,) * (layers - 1) + (1,)
                policy, history = wx.train_policy(
                    scenario, train_cfg, features, taps=shape["taps"],
                    activation=shape["activation"], output_mode=shape["output_mode"],
                    label=f"{layers}/{width}",
                )
                key = f"{layers}x{width}"
                policies[key] = _policy_doc(policy)
                histories[key] = {
                    "objectives": history.objectives,
                    "initial_objective": history.initial_objective,
                    "final_objective": history.final_objective,
                }
        _emit(_json_doc(config, {"policies": policies, "histories": histories}),
              args.output)
        return 0

    bundle = _load_json(args.policies, "policies bundle")
    if "policies" not in bundle:
        raise InputValidationError("policies bundle is missing the 'policies' field")
    policies = {}
    for key, pdoc in bundle["policies"].items():
        layers, width = (int(x) for x in key.split("x"))
        policies[(layers, width)] = _policy_from_doc(pdoc)
    entries = wx.evaluate_perturbed(scenario, policies, train_cfg, eval_cfg)
    rows = [
        [str(e.layers), str(e.width), fmt(e.baseline_rate), fmt(e.perturbed_rate),
         fmt(e.gap)]
        for e in entries
    ]
    _emit(_csv_doc(config, ["layers", "features", "baseline_rate", "perturbed_rate", "gap"],
                   rows), args.output)
    _emit(_json_doc(config, {"entries": [
        {"layers": e.layers, "width": e.width, "baseline_rate": e.baseline_rate,
         "perturbed_rate": e.perturbed_rate, "gap": e.gap, "gap_abs": e.gap_abs,
         "gaps": e.gaps,
         "budget_total": e.budget_total, "budget_ok": e.budget_ok}
        for e in entries
    ]}), args.report)
    return 0


# -------------------------------------------------------------------- parser


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="master seed for all randomness")
    p.add_argument("--output", default="-", help="output path ('-' for stdout)")


def build_parser() -> _Parser:
    parser = _Parser(prog="fdtlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"fdtlab {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("eig", help="eigendecomposition of a symmetric matrix file")
    p.add_argument("--matrix", required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    _add_common(p)
    p.set_defaults(func=cmd_eig)

    p = sub.add_parser("partition", help="threshold partition of a spectrum")
    p.add_argument("--eigenvalues")
    p.add_argument("--matrix")
    p.add_argument("--alpha", type=float, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("filter-response", help="tabulate a filter response over a spectrum")
    p.add_argument("--filter", required=True, help="JSON: {coeffs:[...]} or {kind:'fdt',...}")
    p.add_argument("--eigenvalues")
    p.add_argument("--matrix")
    _add_common(p)
    p.set_defaults(func=cmd_filter_response)

    p = sub.add_parser("nn-forward", help="forward pass of a network from files")
    p.add_argument("--params", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    _add_common(p)
    p.set_defaults(func=cmd_nn_forward)

    for name, func, extra in (
        ("weyl-check", cmd_weyl_check, False),
        ("dk-check", cmd_dk_check, True),
    ):
        p = sub.add_parser(name, help=f"verify the {name.replace('-', ' ')} inequality")
        p.add_argument("--matrix", required=True)
        p.add_argument("--perturbation", help="explicit perturbation matrix file")
        p.add_argument("--epsilon", type=float, help="generate a perturbation of this norm")
        p.add_argument("--pert-kind", choices=("random_symmetric", "lognormal"),
                       default="random_symmetric")
        p.add_argument("--mu", type=float, default=0.0)
        p.add_argument("--sigma", type=float, default=1.0)
        if extra:
            p.add_argument("--cluster", required=True,
                           help="eigenvalue indices, 'lo:hi' inclusive or comma list")
        _add_common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("weyl-law", help="log-log eigenvalue growth slope")
    p.add_argument("--kind", choices=("cycle", "torus", "file"), default="file")
    p.add_argument("--size", type=int, default=200)
    p.add_argument("--size-y", type=int, default=None)
    p.add_argument("--eigenvalues")
    p.add_argument("--matrix")
    p.add_argument("--k-lo", type=int, required=True)
    p.add_argument("--k-hi", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_weyl_law)

    for name, func in (("filter-stability", cmd_filter_stability),
                       ("nn-stability", cmd_nn_stability)):
        p = sub.add_parser(name, help=f"randomized {name} trials vs the closed-form bound")
        p.add_argument("--config", required=True)
        p.add_argument("--summary", default="-", help="summary JSON path ('-' for stdout)")
        _add_common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("wireless", help="power-allocation experiment")
    p.add_argument("mode", choices=("train", "eval"))
    p.add_argument("--config", required=True)
    p.add_argument("--policies", help="trained policies bundle (eval mode)")
    p.add_argument("--report", default="-", help="report JSON path (eval mode)")
    _add_common(p)
    p.set_defaults(func=cmd_wireless)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "subcommand", None) == "wireless" and args.mode == "eval":
            if not args.policies:
                raise InputValidationError("wireless eval requires --policies")
        return args.func(args)
    except _UsageError as exc:
        exc.parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InputValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
