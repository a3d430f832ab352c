"""Command-line interface: single computations and scenario sweeps."""
from __future__ import annotations

import argparse
import json
import sys

from .basis import DEFAULT_N_BASIS, DEFAULT_ORDER, feature_cube, spec_for_states
from .bsm import bsm_put_quote
from .dp import RiskParams, run_model_based
from .experiments import (
    DEFAULT_MARKET,
    DEFAULT_NOISE,
    DEFAULT_RISK_AVERSION,
    DEFAULT_SEEDS,
    DEFAULT_STRIKE,
    Scenario,
    ScenarioConfig,
    emit_report,
    run_scenario,
)
from .fqi import build_offline_dataset, load_dataset, perturb_actions, run_fqi, save_dataset
from .market import MarketParams, StateKind, compute_states, save_paths, simulate_gbm


def _add_market_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--s0", type=float, default=DEFAULT_MARKET.s0)
    parser.add_argument("--mu", type=float, default=DEFAULT_MARKET.mu)
    parser.add_argument("--sigma", type=float, default=DEFAULT_MARKET.sigma)
    parser.add_argument("--rate", type=float, default=DEFAULT_MARKET.r)
    parser.add_argument("--maturity", type=float, default=DEFAULT_MARKET.maturity)
    parser.add_argument("--steps", type=int, default=DEFAULT_MARKET.n_steps)
    parser.add_argument("--paths", type=int, default=DEFAULT_MARKET.n_paths)
    parser.add_argument("--seed", type=int, default=0)


def _market_from_args(args) -> MarketParams:
    return MarketParams(s0=args.s0, mu=args.mu, sigma=args.sigma, r=args.rate,
                        maturity=args.maturity, n_steps=args.steps,
                        n_paths=args.paths, seed=args.seed)


def _add_solver_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--strike", type=float, default=DEFAULT_STRIKE)
    parser.add_argument("--state", default="drift-adjusted",
                        help="price | log-price | log-return | drift-adjusted")
    parser.add_argument("--risk-aversion", type=float, default=DEFAULT_RISK_AVERSION)
    parser.add_argument("--full-hedge", action="store_true",
                        help="include the drift term in the hedge instead of "
                             "the pure risk form")
    parser.add_argument("--n-splines", type=int, default=DEFAULT_N_BASIS)
    parser.add_argument("--spline-order", type=int, default=DEFAULT_ORDER)
    parser.add_argument("--ridge", type=float, default=None,
                        help="absolute ridge weight (default: scaled automatically)")


def _prepared_run(args):
    market = _market_from_args(args)
    paths = simulate_gbm(market)
    kind = StateKind.parse(args.state)
    states = compute_states(paths, kind)
    spec = spec_for_states(states.values, n_basis=args.n_splines,
                           order=args.spline_order)
    cube = feature_cube(spec, states.values)
    risk = RiskParams.from_rate(args.risk_aversion, market.r, market.dt,
                                pure_risk=not args.full_hedge)
    return market, paths, kind, states, spec, cube, risk


def _cmd_simulate(args) -> int:
    paths = simulate_gbm(_market_from_args(args))
    save_paths(paths, args.out)
    print(f"wrote {paths.n_paths} paths x {paths.n_steps} steps to {args.out}")
    return 0


def _cmd_price_bs(args) -> int:
    quote = bsm_put_quote(args.s0, args.strike, args.rate, args.sigma, args.maturity)
    payload = {"price": quote.price, "delta": quote.delta,
               "d1": quote.d1, "d2": quote.d2}
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    else:
        print(",".join(payload))
        print(",".join(f"{v:.10g}" for v in payload.values()))
    return 0


def _cmd_price_dp(args) -> int:
    _, paths, kind, _, spec, cube, risk = _prepared_run(args)
    solution = run_model_based(paths, kind, strike=args.strike, risk=risk,
                               basis_spec=spec, features=cube,
                               regularizer=args.ridge)
    print(json.dumps({"price": solution.price_t0, "hedge": solution.hedge_t0},
                     indent=2))
    if args.dump_coefficients:
        with open(args.dump_coefficients, "w") as handle:
            handle.write("t,kind," + ",".join(f"c{i}" for i in range(spec.n_basis)) + "\n")
            for t in range(solution.phi.shape[0]):
                handle.write(f"{t},hedge," + ",".join(repr(float(v)) for v in solution.phi[t]) + "\n")
                handle.write(f"{t},value," + ",".join(repr(float(v)) for v in solution.omega[t]) + "\n")
    return 0


def _cmd_price_fqi(args) -> int:
    if args.dataset_in:
        dataset = load_dataset(args.dataset_in)
        states_matrix = dataset.states
        spec = spec_for_states(states_matrix, n_basis=args.n_splines,
                               order=args.spline_order)
        solution = run_fqi(dataset, spec, regularizer=args.ridge)
    else:
        _, paths, kind, states, spec, cube, risk = _prepared_run(args)
        dp = run_model_based(paths, kind, strike=args.strike, risk=risk,
                             basis_spec=spec, features=cube,
                             regularizer=args.ridge)
        noisy = perturb_actions(dp.hedges, args.noise, seed=args.seed + 104_729)
        noisy[:, -1] = 0.0
        dataset = build_offline_dataset(paths, states, noisy,
                                        strike=args.strike, risk=risk)
        solution = run_fqi(dataset, spec, features=cube, regularizer=args.ridge)
        if args.dataset_out:
            save_dataset(dataset, args.dataset_out)
    print(json.dumps({"price": solution.price_t0,
                      "greedy_fallbacks": solution.greedy_fallbacks}, indent=2))
    return 0


def _cmd_experiment(args) -> int:
    if args.config:
        with open(args.config) as handle:
            config = ScenarioConfig.from_json_dict(json.load(handle))
        if config.scenario is not Scenario.parse(args.name):
            config = ScenarioConfig.from_json_dict(
                {**config.to_json_dict(), "scenario": args.name})
    else:
        config = ScenarioConfig(scenario=Scenario.parse(args.name),
                                seeds=tuple(range(args.n_seeds)))
    table = run_scenario(config)
    emit_report(table, args.out, args.format)
    n_err = len(table.errors)
    print(f"wrote {len(table.rows)} rows to {args.out} ({n_err} cell errors)")
    if args.strict and n_err:
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qlbs",
        description="Price and hedge European puts with regression-based "
                    "Q-learning, benchmarked against Black-Scholes-Merton.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate paths and write them as CSV")
    _add_market_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("price-bs", help="closed-form put price and delta")
    p.add_argument("--s0", type=float, default=DEFAULT_MARKET.s0)
    p.add_argument("--strike", type=float, default=DEFAULT_STRIKE)
    p.add_argument("--rate", type=float, default=DEFAULT_MARKET.r)
    p.add_argument("--sigma", type=float, default=DEFAULT_MARKET.sigma)
    p.add_argument("--maturity", type=float, default=DEFAULT_MARKET.maturity)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=_cmd_price_bs)

    p = sub.add_parser("price-qlbs-dp", help="model-based price and hedge")
    _add_market_args(p)
    _add_solver_args(p)
    p.add_argument("--dump-coefficients", default=None,
                   help="optional CSV of the per-step coefficient vectors")
    p.set_defaults(func=_cmd_price_dp)

    p = sub.add_parser("price-qlbs-fqi", help="model-free price from noisy actions")
    _add_market_args(p)
    _add_solver_args(p)
    p.add_argument("--noise", type=float, default=DEFAULT_NOISE)
    p.add_argument("--dataset-out", default=None,
                   help="write the offline dataset as CSV")
    p.add_argument("--dataset-in", default=None,
                   help="price an existing offline dataset instead of simulating")
    p.set_defaults(func=_cmd_price_fqi)

    p = sub.add_parser("experiment", help="run a scenario sweep")
    p.add_argument("name", help="vol-sweep | noise-grid | hedge-frequency | "
                                "moneyness | transaction-costs | "
                                "basis-sensitivity | single")
    p.add_argument("--config", default=None, help="JSON ScenarioConfig file")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--n-seeds", type=int, default=len(DEFAULT_SEEDS))
    p.add_argument("--strict", action="store_true",
                   help="exit nonzero if any cell failed")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
