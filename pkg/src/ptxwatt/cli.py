"""Command-line pipeline: analyze -> fit -> predict -> explore -> metrics.

All reports are UTF-8 text with deterministic formatting: JSON with sorted
keys, CSV floats in shortest round-trip form. Exit codes: 0 success, 1 usage
error, 2 input/parse error, 3 model/fit error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import calibration as cal
from .cfg import build_cfg, estimate_trip_counts
from .errors import PtxWattError
from .explorer import (
    LaunchConfig,
    adaptive_power_cap,
    evaluate_configs,
    generate_valid_configs,
    pareto_front,
    predict_energy,
)
from .features import extract_features
from .launch import InputResources, RESOURCE_RULES, compute_input_resources
from .metrics import (
    MetricReport,
    crr,
    delta_energy_pct,
    delta_throughput_pct,
    greenup_speedup_powerup,
    joules_per_token,
    load_trace,
    spearman_rho,
)
from .ptx import parse_ptx

_USAGE_EXIT = 1


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; this tool reserves 2 for input errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(_USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _json_text(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _load_annotations(path: str | None) -> dict[str, float]:
    if path is None:
        return {}
    return {str(k): float(v) for k, v in json.loads(Path(path).read_text()).items()}


def _analysis_from_args(args) -> tuple:
    module = parse_ptx(Path(args.ptx).read_text(), kernel_name=args.kernel)
    cfg = build_cfg(module)
    cfg = estimate_trip_counts(
        cfg, module, default_trip=args.default_trip,
        annotations=_load_annotations(args.trip_annotations),
    )
    return module, cfg


def _resources_from_args(args, arch) -> InputResources:
    return compute_input_resources(
        seq_len=args.seq_len,
        batch=args.batch,
        heads=args.heads,
        head_dim=args.head_dim,
        bytes_per_elem=args.bytes_per_elem,
        arch=arch,
        rule=args.resource_rule,
    )


def _profile_from_args(args) -> tuple[cal.ArchitectureSpec, cal.CalibrationProfile]:
    if args.profile is None:
        print("note: no --profile given; using built-in synthetic profile", file=sys.stderr)
        return cal.default_architecture(), cal.default_calibration()
    return cal.load_profile(args.profile)


def _add_ptx_args(parser) -> None:
    parser.add_argument("ptx", help="PTX source file")
    parser.add_argument("--kernel", help="kernel name (default: first .entry)")
    parser.add_argument("--default-trip", type=float, default=32.0,
                        help="trip estimate for undetected loops (default 32)")
    parser.add_argument("--trip-annotations",
                        help="JSON file mapping loop-header label to trip count")


def _add_workload_args(parser) -> None:
    parser.add_argument("--resource-rule", choices=RESOURCE_RULES, default="mha")
    parser.add_argument("--seq-len", type=int, default=128)
    parser.add_argument("--batch", type=int, default=1)
    parser.add_argument("--heads", type=int, default=16)
    parser.add_argument("--head-dim", type=int, default=256)
    parser.add_argument("--bytes-per-elem", type=int, default=4)


def _prediction_dict(pred) -> dict:
    return {
        "config": {
            "block_x": pred.config.block_x,
            "block_y": pred.config.block_y,
            "p_cap": pred.config.p_cap,
        },
        "time": {
            "mwp": pred.time.mwp,
            "cwp": pred.time.cwp,
            "bw_eff": pred.time.bw_eff,
            "t_mem": pred.time.t_mem,
            "t_comp": pred.time.t_comp,
            "t_sync": pred.time.t_sync,
            "t_exec": pred.time.t_exec,
        },
        "power": {
            "p_units": pred.power.p_units,
            "p_shape": pred.power.p_shape,
            "p_mem": pred.power.p_mem,
            "p_sm": pred.power.p_sm,
            "p_dyn": pred.power.p_dyn,
            "f_adj": pred.power.f_adj,
            "ci": pred.power.ci,
            "active_sms": pred.power.active_sms,
            "cap_limited": pred.power.cap_limited,
        },
        "e_pred": pred.e_pred,
    }


def _cmd_analyze(args) -> int:
    arch = (cal.load_architecture(args.arch) if args.arch
            else cal.default_architecture())
    module, cfg = _analysis_from_args(args)
    resources = InputResources(shared_mem_bytes=args.shared_mem_bytes)
    config = LaunchConfig(args.block_x, args.block_y, arch.p_tdp)
    features = extract_features(module, cfg, config, resources, arch)
    report = {"kernel_name": module.kernel_name, **features.as_report_dict()}
    _emit(_json_text(report), args.output)
    return 0


def _cmd_fit(args) -> int:
    arch = (cal.load_architecture(args.arch) if args.arch
            else cal.default_architecture())
    profile = cal.default_calibration()

    beta_u = dict(profile.beta_u)
    if args.unit_saturation:
        measured = cal.load_measurements(args.unit_saturation, "unit_saturation")
        beta_u = {u: 0.0 for u in cal.UNIT_CLASSES}
        for row in measured.rows:
            beta_u[str(row["unit"])] = cal.unit_power_coefficient(
                float(row["p_saturated"]), float(row["p_idle"]), float(row["max_ops_per_s"])
            )
    l_coal, l_uncoal = profile.l_mem_coal, profile.l_mem_uncoal
    if args.latency:
        l_coal, l_uncoal = cal.latency_pair(cal.load_measurements(args.latency, "latency_sweep"))
    alpha, beta, delta = (profile.sm_power_alpha, profile.sm_power_beta, profile.sm_power_delta)
    if args.sm_sweep:
        sweep = cal.load_measurements(args.sm_sweep, "sm_sweep")
        alpha, beta, delta = cal.fit_sm_power_law(
            [(float(r["n"]), float(r["p_watts"])) for r in sweep.rows]
        )
    ratio = profile.transient_ratio_r
    if args.transient:
        pair = cal.load_measurements(args.transient, "transient_pair").rows[0]
        ratio = cal.transient_ratio(float(pair["p_short"]), float(pair["p_sustained"]))

    fitted = cal.CalibrationProfile(
        beta_u=beta_u,
        l_mem_coal=l_coal,
        l_mem_uncoal=l_uncoal,
        sm_power_alpha=alpha,
        sm_power_beta=beta,
        sm_power_delta=delta,
        transient_ratio_r=ratio,
        kappa=profile.kappa,
        lambda_=profile.lambda_,
        p_base_shape=args.p_base_shape,
        p_mem_base=args.p_mem_base,
        time_weights=(1.0, 1.0, 1.0),
        t_base=0.0,
        e_overhead=0.0,
    )
    if args.shape_sweep:
        sweep = cal.load_measurements(args.shape_sweep, "shape_sweep")
        kappa, lam = cal.fit_shape_coefficients(sweep, fitted)
        fitted = replace(fitted, kappa=kappa, lambda_=lam)

    cal.save_profile(args.output, arch, fitted)
    print(f"profile written to {args.output}", file=sys.stderr)
    return 0


def _cmd_predict(args) -> int:
    arch, profile = _profile_from_args(args)
    module, cfg = _analysis_from_args(args)
    resources = _resources_from_args(args, arch)
    p_cap = args.p_cap if args.p_cap is not None else arch.p_tdp
    config = LaunchConfig(args.block_x, args.block_y, p_cap)
    features = extract_features(module, cfg, config, resources, arch)
    pred = predict_energy(features, arch, profile, config, resources)
    report = {"kernel_name": module.kernel_name, **_prediction_dict(pred)}
    _emit(_json_text(report), args.output)
    return 0


def _explore_csv(predictions, front_keys) -> str:
    lines = ["block_x,block_y,p_cap_w,t_exec_s,p_dyn_w,e_pred_j,on_front,cap_limited"]
    for p in predictions:
        on_front = (p.config.block_x, p.config.block_y, p.config.p_cap) in front_keys
        lines.append(
            f"{p.config.block_x},{p.config.block_y},{p.config.p_cap!r},"
            f"{p.time.t_exec!r},{p.power.p_dyn!r},{p.e_pred!r},"
            f"{'true' if on_front else 'false'},"
            f"{'true' if p.power.cap_limited else 'false'}"
        )
    return "\n".join(lines) + "\n"


def _cmd_explore(args) -> int:
    arch, profile = _profile_from_args(args)
    module, cfg = _analysis_from_args(args)
    resources = _resources_from_args(args, arch)
    configs = generate_valid_configs(arch, resources, args.dims, args.caps)
    if not configs:
        _emit(_explore_csv([], set()), args.output)
        print("no feasible configuration", file=sys.stderr)
        return 0
    predictions = evaluate_configs(
        module, cfg, arch, profile, resources, configs, jobs=args.jobs
    )
    t_peak = min(p.time.t_exec for p in predictions)
    eligible = [p for p in predictions if p.time.t_exec <= t_peak / args.rho]
    front = pareto_front(eligible)
    front_keys = {(p.config.block_x, p.config.block_y, p.config.p_cap) for p in front}

    if args.format == "json":
        rows = [_prediction_dict(p) | {"on_front": (p.config.block_x, p.config.block_y, p.config.p_cap) in front_keys}
                for p in predictions]
        _emit(_json_text(rows), args.output)
    else:
        _emit(_explore_csv(predictions, front_keys), args.output)

    summary = {
        "kernel_name": module.kernel_name,
        "n_configs": len(predictions),
        "front_size": len(front),
        "t_min": t_peak,
        "t_peak": t_peak,
        "rho": args.rho,
    }
    if args.summary:
        _emit(_json_text(summary), args.summary)
    else:
        print(_json_text(summary), file=sys.stderr, end="")
    return 0


def _cmd_metrics(args) -> int:
    report = MetricReport()
    values = report.as_dict()
    if args.trace:
        trace = load_trace(args.trace, dt_nominal=args.dt_nominal)
        values["j_per_token"] = joules_per_token(trace, args.batch, args.seq_len, args.n_runs)
    if args.e_base is not None and args.e_opt is not None:
        values["delta_e_pct"] = delta_energy_pct(args.e_base, args.e_opt)
    if args.thr_base is not None and args.thr_opt is not None:
        values["delta_thr_pct"] = delta_throughput_pct(args.thr_opt, args.thr_base)
    if args.total_configs is not None and args.recommended is not None:
        values["crr"] = crr(args.total_configs, args.recommended)
    quad = (args.base_energy, args.base_time, args.cand_energy, args.cand_time)
    if all(v is not None for v in quad):
        greenup, speedup, powerup, divergence = greenup_speedup_powerup(*quad)
        values.update(
            greenup=greenup, speedup=speedup, powerup=powerup, divergence_pct=divergence
        )
    if args.ranks:
        xs, ys = [], []
        with open(args.ranks, newline="") as handle:
            for row in csv.DictReader(handle):
                xs.append(float(row["x"]))
                ys.append(float(row["y"]))
        values["spearman_rho"] = spearman_rho(xs, ys)
    _emit(_json_text(values), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ptxwatt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="extract kernel features from PTX")
    _add_ptx_args(p)
    p.add_argument("--arch", help="architecture (or combined profile) JSON file")
    p.add_argument("--block-x", type=int, default=32)
    p.add_argument("--block-y", type=int, default=1)
    p.add_argument("--shared-mem-bytes", type=int, default=0,
                   help="dynamic shared memory per block")
    p.add_argument("-o", "--output", help="report path (default stdout)")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("fit", help="fit calibration coefficients from measurement CSVs")
    p.add_argument("--arch", help="architecture JSON file (default: built-in synthetic)")
    p.add_argument("--unit-saturation", help="unit,p_idle,p_saturated,max_ops_per_s CSV")
    p.add_argument("--latency", help="stride,cycles CSV")
    p.add_argument("--sm-sweep", help="n,p_watts CSV")
    p.add_argument("--transient", help="p_short,p_sustained CSV")
    p.add_argument("--shape-sweep", help="block_x,block_y,ci,eta,p_watts CSV")
    p.add_argument("--p-base-shape", type=float, default=10.0,
                   help="base watts for the shape term (default 10)")
    p.add_argument("--p-mem-base", type=float, default=20.0,
                   help="base watts for the DRAM term (default 20)")
    p.add_argument("-o", "--output", required=True, help="profile JSON to write")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("predict", help="predict time/power/energy for one config")
    _add_ptx_args(p)
    p.add_argument("--profile", help="combined profile JSON")
    _add_workload_args(p)
    p.add_argument("--block-x", type=int, required=True)
    p.add_argument("--block-y", type=int, required=True)
    p.add_argument("--p-cap", type=float, help="power cap in watts (default: TDP)")
    p.add_argument("-o", "--output", help="report path (default stdout)")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("explore", help="evaluate the config space and mark the Pareto front")
    _add_ptx_args(p)
    p.add_argument("--profile", help="combined profile JSON")
    _add_workload_args(p)
    p.add_argument("--dims", type=_int_list,
                   default=[1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024],
                   help="comma-separated block dimension candidates")
    p.add_argument("--caps", type=_float_list, default=[],
                   help="comma-separated power-cap candidates (default: TDP only)")
    p.add_argument("--rho", type=float, default=0.95,
                   help="performance floor as a fraction of peak throughput")
    p.add_argument("--jobs", type=int, default=1, help="parallel evaluation threads")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("-o", "--output", help="report path (default stdout)")
    p.add_argument("--summary", help="summary JSON path (default stderr)")
    p.set_defaults(func=_cmd_explore)

    p = sub.add_parser("metrics", help="compute evaluation metrics")
    p.add_argument("--trace", help="power trace CSV with header t_s,p_w")
    p.add_argument("--dt-nominal", type=float, help="sampling interval override")
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--seq-len", type=int, default=1)
    p.add_argument("--n-runs", type=int, default=1)
    p.add_argument("--e-base", type=float)
    p.add_argument("--e-opt", type=float)
    p.add_argument("--thr-base", type=float)
    p.add_argument("--thr-opt", type=float)
    p.add_argument("--total-configs", type=int)
    p.add_argument("--recommended", type=int)
    p.add_argument("--base-energy", type=float)
    p.add_argument("--base-time", type=float)
    p.add_argument("--cand-energy", type=float)
    p.add_argument("--cand-time", type=float)
    p.add_argument("--ranks", help="CSV with header x,y for rank correlation")
    p.add_argument("-o", "--output", help="report path (default stdout)")
    p.set_defaults(func=_cmd_metrics)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PtxWattError as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        record = {"error": "FileNotFound", "message": str(exc)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
