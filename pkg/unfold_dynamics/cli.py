import argparse
import os
import sys

from .colors import Colors
from .errors import ConfigurationError, NumericalError
from .logger import setup_logging
from .manager import DEFAULT_OUT, UnfoldManager
from .output import write_error_json
try:
    import argcomplete  # optional dependency for shell autocompletion
except Exception:
    argcomplete = None

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_SCHEMA = 2
EXIT_NUMERICAL = 3


def print_error(msg: str):
    print(f"{Colors.FAIL}✗ {msg}{Colors.ENDC}", file=sys.stderr)


def complex_arg(text: str) -> complex:
    """Complex values from the command line: '0.01', '0.01+0.02j' or '0.01,0.02'."""
    try:
        if ',' in text:
            re, im = (float(v) for v in text.split(','))
            return complex(re, im)
        return complex(text.replace(' ', ''))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}")


def run_options() -> argparse.ArgumentParser:
    """Flags accepted before or after the command name."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--budget', type=int, default=argparse.SUPPRESS, help='Orbit step budget')
    common.add_argument('--petal', type=int, default=argparse.SUPPRESS, help='Petal index (default: 0)')
    common.add_argument('--grid', type=int, default=argparse.SUPPRESS, help='Sample grid size')
    return common


def build_parser() -> argparse.ArgumentParser:
    examples = (
        "Examples:\n"
        "  unfold split problems/example.json\n"
        "  unfold directions problems/example.json\n"
        "  unfold portrait problems/example.json --node C_0 --mu 0.3\n"
        "  unfold fatou problems/flow_y2.json --petal 0 --grid 32\n"
        "  unfold horn problems/example.json --ray 0.01,0.5,0.3 --levels 8\n"
        "  unfold flatness problems/one_level.json --ray 0.2,0.7,0 --count 7\n"
        "  unfold conjugacy problems/perturbed.json --ray 0.01,0.5,0\n"
        "  unfold selftest --full\n"
        "\nTo enable shell autocompletion (bash):\n"
        "  # install argcomplete in your environment: pip install argcomplete\n"
        "  # then run: eval \"$(register-python-argcomplete unfold)\"\n"
    )
    common = run_options()
    parser = argparse.ArgumentParser(description='Unfoldings of tangent-to-identity diffeomorphisms', parents=[common],
                                     epilog=examples, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument('-v', '--verbose', action='store_true')
    parser.add_argument('--no-color', action='store_true')
    parser.add_argument('--log-file', help='Log file (overrides $UNFOLD_LOG_FILE)')
    parser.add_argument('--out', default=DEFAULT_OUT, help=f'Output directory (default: {DEFAULT_OUT})')
    parser.add_argument('--tol', type=float, help='Dynamical tolerance for this run')
    parser.add_argument('--seed', type=int, help='Random seed for sampled checks')
    subparsers = parser.add_subparsers(dest='command')

    p = subparsers.add_parser('split', help='Print and write the dynamical splitting', parents=[common])
    p.add_argument('problem')

    p = subparsers.add_parser('directions', help='Singular directions and a multi-direction', parents=[common])
    p.add_argument('problem')
    p.add_argument('--lam', type=float, default=0.0, help='arg(lambda) for the multi-direction')

    p = subparsers.add_parser('portrait', help='Phase portrait of a compact-like set', parents=[common])
    p.add_argument('problem')
    p.add_argument('--node', help='Compact-like set label (default: the first)')
    p.add_argument('--mu', type=float, default=0.0, help='arg(mu)')

    p = subparsers.add_parser('stability-sweep', help='Stability against homoclinic search over mu', parents=[common])
    p.add_argument('problem')
    p.add_argument('--node')

    for name, text in (('fatou', 'Fatou coordinates on a petal'), ('lavaurs', 'Lavaurs field on a petal')):
        p = subparsers.add_parser(name, help=text, parents=[common])
        p.add_argument('problem')
        p.add_argument('--x', type=complex_arg, default=0j)

    p = subparsers.add_parser('horn', help='Horn map coefficients along a ray', parents=[common])
    p.add_argument('problem')
    p.add_argument('--ray', help="'r0,q,angle' (default: x = 0 only)")
    p.add_argument('--count', type=int, default=5)
    p.add_argument('--levels', type=int)

    p = subparsers.add_parser('flatness', help='Exponential flatness of gate differences', parents=[common])
    p.add_argument('problem')
    p.add_argument('--ray', required=True, help="'r0,q,angle'")
    p.add_argument('--count', type=int, default=7)

    p = subparsers.add_parser('conjugacy', help='Horn-map equivariance under the conjugator', parents=[common])
    p.add_argument('problem')
    p.add_argument('--ray', help="'r0,q,angle'")
    p.add_argument('--count', type=int, default=5)
    p.add_argument('--levels', type=int)

    p = subparsers.add_parser('selftest', help='Run the acceptance checks', parents=[common])
    p.add_argument('--full', action='store_true', help='Run at the documented sample sizes')

    settings_parser = subparsers.add_parser('settings', help='Inspect or change user settings', parents=[common])
    settings_sub = settings_parser.add_subparsers(dest='settings_command')
    settings_sub.add_parser('list')
    s = settings_sub.add_parser('set')
    s.add_argument('key')
    s.add_argument('value')
    s = settings_sub.add_parser('reset')
    s.add_argument('key')

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    # Enable argcomplete if available
    if argcomplete is not None:
        try:
            argcomplete.autocomplete(parser)
        except Exception:
            pass

    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.log_file)
    budget, grid = getattr(args, 'budget', None), getattr(args, 'grid', None)
    petal = getattr(args, 'petal', 0)
    overrides = {'dynamical_tol': args.tol, 'seed': args.seed, 'grid': grid, 'orbit_budget': budget}
    manager = UnfoldManager(verbose=args.verbose, no_color=args.no_color, out_dir=args.out, overrides=overrides)

    if not args.command:
        parser.print_help()
        return EXIT_OK

    try:
        if args.command == 'split':
            manager.split(args.problem)
        elif args.command == 'directions':
            manager.directions(args.problem, args.lam)
        elif args.command == 'portrait':
            manager.portrait(args.problem, args.node, args.mu, grid)
        elif args.command == 'stability-sweep':
            manager.stability_sweep(args.problem, args.node, grid)
        elif args.command == 'fatou':
            manager.fatou(args.problem, petal, args.x, grid)
        elif args.command == 'lavaurs':
            manager.lavaurs(args.problem, petal, args.x, grid)
        elif args.command == 'horn':
            manager.horn(args.problem, args.ray, args.levels, args.count)
        elif args.command == 'flatness':
            manager.flatness(args.problem, args.ray, args.count)
        elif args.command == 'conjugacy':
            manager.conjugacy(args.problem, args.ray, args.count, args.levels)
        elif args.command == 'selftest':
            if not manager.selftest(budget=budget, full=args.full):
                return EXIT_SELFTEST
        elif args.command == 'settings':
            if args.settings_command == 'set':
                manager.set_setting(args.key, args.value)
            elif args.settings_command == 'reset':
                manager.reset_setting(args.key)
            else:
                manager.list_settings()
    except KeyboardInterrupt:
        print("\n\nOperation interrupted by user")
        return 130
    except ConfigurationError as e:
        print_error(str(e))
        return EXIT_SCHEMA
    except NumericalError as e:
        path = write_error_json(os.path.join(args.out, 'error.json'), e)
        print_error(f"{e} (details in {path})")
        if args.verbose:
            import traceback
            traceback.print_exc()
        return EXIT_NUMERICAL
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
