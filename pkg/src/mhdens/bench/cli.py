"""Command-line entry point for the benchmark experiments.

Subcommands: convergence | stability | channel | compare. Flags can be
preloaded from a plain key=value config file (same names as the flags,
without the leading dashes), with explicit flags taking precedence.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import RunSpec, run_channel, run_compare, run_convergence, run_stability

_FLOAT_LIST = ("eps", "dts")


def _parse_floats(text):
    return tuple(float(x) for x in str(text).split(",") if x.strip())


# config-file keys mirror the flags; a few flags use different dest names
_KEY_ALIASES = {"T": "t_end", "mesh": "mesh_file", "out": "out_dir"}


def load_config(path) -> dict:
    """Read a key=value config file; '#' comments and blank lines allowed."""
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {body!r}")
            key, val = (part.strip() for part in body.split("=", 1))
            key = key.replace("-", "_")
            values[_KEY_ALIASES.get(key, key)] = val
    return values


def _add_common(p):
    p.add_argument("--config", help="key=value file preloading any of the flags")
    p.add_argument("--scheme", choices=("cn", "bdf2", "primitive"), default=None)
    p.add_argument("--n", type=int, default=None, help="unit-square subdivisions")
    p.add_argument("--mesh", dest="mesh_file", default=None, help="ASCII mesh file")
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--T", dest="t_end", type=float, default=None)
    p.add_argument("--eps", type=_parse_floats, default=None,
                   help="comma-separated perturbation list")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--alpha-m", dest="alpha_m", type=float, default=None)
    p.add_argument("--s", type=float, default=None, help="coupling number")
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--out", dest="out_dir", default=None, help="output directory")
    p.add_argument("--extrapolation", choices=("tilde", "bdf"), default=None)
    p.add_argument("--levels", type=int, default=None, help="refinement levels")
    p.add_argument("--dts", type=_parse_floats, default=None,
                   help="comma-separated timestep list")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mhdens",
        description="Ensemble MHD benchmark harness (GPAV CN/BDF2 schemes)")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, doc in (("convergence", "manufactured-solution rate tables"),
                      ("stability", "zero-forcing modified-energy decay"),
                      ("channel", "flow past a cylinder on the fixture mesh"),
                      ("compare", "plain vs stabilized scheme accuracy")):
        _add_common(sub.add_parser(name, help=doc))
    return parser


_DEFAULTS = dict(scheme="cn", eps=(), alpha=0.0, alpha_m=0.0, s=1.0,
                 levels=3, dts=(), extrapolation="tilde")


def make_spec(args) -> RunSpec:
    merged = {}
    if args.config:
        raw = load_config(args.config)
        for key, val in raw.items():
            if key in ("experiment",):
                continue
            if key in _FLOAT_LIST:
                merged[key] = _parse_floats(val)
            elif key in ("n", "levels"):
                merged[key] = int(val)
            elif key in ("dt", "t_end", "alpha", "alpha_m", "s", "nu", "gamma"):
                merged[key] = float(val)
            else:
                merged[key] = val
    for key in ("scheme", "n", "mesh_file", "dt", "t_end", "eps", "alpha", "alpha_m",
                "s", "nu", "gamma", "out_dir", "extrapolation", "levels", "dts"):
        val = getattr(args, key)
        if val is not None:
            merged[key] = val
    for key, val in _DEFAULTS.items():
        merged.setdefault(key, val)
    return RunSpec(experiment=args.experiment, **merged)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = make_spec(args)

    if spec.experiment == "convergence":
        report = run_convergence(spec)
        print("h,dt,member,err_u_inf0,rate,err_gradu_20,rate,err_B_inf0,rate,err_gradB_20,rate")
        for member in report.members():
            chain = [r for r in report.rows if r.member == member]
            for row, rates in zip(chain, report.rates(member)):
                cells = [f"{row.h:.6g}", f"{row.dt:.6g}", str(member + 1)]
                for name in ("err_u_inf0", "err_gradu_20", "err_B_inf0", "err_gradB_20"):
                    cells.append(f"{getattr(row, name):.6g}")
                    cells.append("" if rates[name] is None else f"{rates[name]:.3f}")
                print(",".join(cells))
    elif spec.experiment == "stability":
        results = run_stability(spec)
        for dt, (times, energy, modified) in sorted(results.items(), reverse=True):
            print(f"dt={dt:g}: modified energy {modified[0]:.6e} -> {modified[-1]:.6e} "
                  f"(monotone nonincreasing over {len(times) - 1} steps)")
    elif spec.experiment == "channel":
        summary = run_channel(spec)
        print(f"steps={summary['steps']} members={summary['members']} "
              f"xi_min={summary['xi_min']:.6f} "
              f"max_divergence_residual={summary['max_div_residual']:.3e} "
              f"max_energy={summary['max_energy']:.6f}")
    elif spec.experiment == "compare":
        table = run_compare(spec)
        print("h,dt,component,sav_cn,sav_bdf2,stab_cn,stab_bdf2")
        for (h, dt), entry in table.items():
            for comp in ("u", "B"):
                cells = [f"{h:.6g}", f"{dt:.6g}", comp]
                for name in ("sav_cn", "sav_bdf2", "stab_cn", "stab_bdf2"):
                    cells.append(f"{entry[name][comp]:.6g}")
                print(",".join(cells))
    return 0


if __name__ == "__main__":
    sys.exit(main())
