"""Command-line driver: ``qastab <command> [options]``.

Commands: gates, verify, correlator, chi, fidelity, fit.  Every CSV is
written with a ``<name>.manifest.json`` next to it holding the command,
its parameters and the seed; re-running with those parameters reproduces
the CSV byte for byte.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .circuit import R_MATRIX, build_iqft, build_qft
from .correlate import (DegenerateFitError, chi_sum, correlator_gue,
                        fit_scaling)
from .numkernel import HermitianPerturbation
from .perturb import (DEFAULT_STATES, STOCHASTIC_FROM_N, FidelityRunConfig,
                      PerturbationMode, fidelity_ensemble, load_matrix)
from .verify import run_checks

log = logging.getLogger('qastab')

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

BUILDERS = {'qft': build_qft, 'iqft': build_iqft}
MAX_OPERATOR_N = 12
MAX_EXACT_FIDELITY_N = 9

FIDELITY_HEADER = ['algo', 'n', 'T', 'delta', 'mode', 'realizations', 'abs_mean_F', 'std_err']


class UsageError(Exception):
    pass


def fmt(x: float) -> str:
    return f'{x:.17g}'


def parse_int_range(text: str) -> list[int]:
    """``'8'``, ``'4..10'`` (inclusive) or a comma list of either."""
    out = []
    try:
        for part in text.split(','):
            if '..' in part:
                a, b = part.split('..')
                out += list(range(int(a), int(b) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f'bad integer range {text!r}') from None
    if not out:
        raise argparse.ArgumentTypeError(f'empty range {text!r}')
    return out


def parse_float_range(text: str) -> list[float]:
    """``'0.04'``, ``'a:b:step'`` (inclusive of ``b``) or a comma list."""
    out = []
    try:
        for part in text.split(','):
            if ':' in part:
                a, b, step = (float(x) for x in part.split(':'))
                if step <= 0 or b < a:
                    raise ValueError
                count = int(round((b - a) / step)) + 1
                out += [round(a + i * step, 12) for i in range(count)]
            else:
                out.append(float(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f'bad real range {text!r}') from None
    return out


def parse_basis(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(',')]
    except ValueError:
        raise argparse.ArgumentTypeError(f'bad basis {text!r}') from None


def parse_trace(text: str):
    """``exact``, ``auto`` or ``stochastic[:M]``."""
    if text in ('exact', 'auto'):
        return text
    if text == 'stochastic':
        return DEFAULT_STATES
    if text.startswith('stochastic:'):
        try:
            m = int(text.split(':', 1)[1])
        except ValueError:
            m = 0
        if m >= 1:
            return m
    raise argparse.ArgumentTypeError(f'bad trace mode {text!r}')


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f'cannot create output directory {out}: {exc}') from exc
    return out


def _manifest(args, params: dict) -> dict:
    return {
        'command': args.command,
        'argv': args.argv,
        'parameters': params,
        'master_seed': args.seed,
        'tool_version': __version__,
        'timestamp': datetime.now(timezone.utc).isoformat(timespec='seconds'),
    }


def write_csv(path: Path, header, rows, args, params) -> None:
    with open(path, 'w', newline='', encoding='utf-8') as fh:
        w = csv.writer(fh, lineterminator='\n')
        w.writerow(header)
        w.writerows(rows)
    manifest = path.with_name(path.stem + '.manifest.json')
    manifest.write_text(json.dumps(_manifest(args, params), indent=2) + '\n')
    log.info('wrote %s', path)


def _guard_n(ns, limit=MAX_OPERATOR_N):
    for n in ns:
        if n < 2:
            raise UsageError(f'n must be >= 2, got {n}')
        if n > limit:
            raise UsageError(f'n={n} exceeds the cost guard ({limit}); '
                             f'N x N operators at n={n} are not tractable here')


# -- commands ---------------------------------------------------------------

def cmd_gates(args) -> int:
    _guard_n([args.n], limit=64)
    c = BUILDERS[args.algo](args.n)
    sys.stdout.write(c.listing())
    print(f'# {c.label} n={c.n} T={len(c)}', file=sys.stderr)
    if args.out_given:
        path = _out_dir(args) / f'gates_{args.algo}_n{args.n}.txt'
        path.write_text(c.listing())
    return EXIT_OK


def cmd_verify(args) -> int:
    if not 2 <= args.n_max <= 8:
        raise UsageError(f'--n-max must be in 2..8, got {args.n_max}')
    r_matrix = R_MATRIX
    if args.corrupt_r:
        # negative control: R in the swapped pair basis no longer commutes with B
        r_matrix = R_MATRIX[[0, 2, 1, 3]][:, [0, 2, 1, 3]]
    checks = run_checks(args.n_max, r_matrix)
    for c in checks:
        print(c)
    failed = [c for c in checks if not c.passed]
    print(f'{len(checks) - len(failed)}/{len(checks)} checks passed')
    return EXIT_FAIL if failed else EXIT_OK


CORRELATOR_PLOT = '''\
"""Log-scale heatmap of the GUE-averaged correlator C(t, t')."""
import csv
import sys

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import LogNorm

path = sys.argv[1] if len(sys.argv) > 1 else {csv!r}
rows = list(csv.DictReader(open(path)))
T = max(int(r['t']) for r in rows)
C = np.zeros((T, T))
for r in rows:
    C[int(r['t']) - 1, int(r['tprime']) - 1] = float(r['c'])
floor = np.exp(-14)
plt.imshow(np.clip(C, floor, 1), origin='lower', cmap='jet_r',
           norm=LogNorm(vmin=floor, vmax=1), extent=(0.5, T + 0.5, 0.5, T + 0.5))
plt.colorbar(label="<C(t,t')>")
plt.xlabel("t'")
plt.ylabel('t')
plt.title({title!r})
plt.savefig({png!r}, dpi=150)
'''


def cmd_correlator(args) -> int:
    _guard_n([args.n])
    c = BUILDERS[args.algo](args.n)
    m = correlator_gue(c, threads=args.threads)
    out = _out_dir(args)
    stem = f'correlator_{args.algo}_n{args.n}'
    rows = ([t, tp, fmt(v)] for t, tp, v in m.rows())
    write_csv(out / f'{stem}.csv', ['t', 'tprime', 'c'], rows, args,
              {'algo': args.algo, 'n': args.n})
    (out / f'plot_{stem}.py').write_text(CORRELATOR_PLOT.format(
        csv=f'{stem}.csv', png=f'{stem}.png', title=f'{c.label}, n={c.n}, T={len(c)}'))
    print(f'{c.label} n={c.n} T={len(c)} chi={fmt(chi_sum(m).chi)}')
    return EXIT_OK


def chi_rows(algo, ns, threads=1):
    for n in ns:
        s = chi_sum(correlator_gue(BUILDERS[algo](n), threads=threads))
        yield [algo, n, s.T, fmt(s.chi)]


def cmd_chi(args) -> int:
    _guard_n(args.n)
    rows = []
    for algo in args.algo:
        for row in chi_rows(algo, args.n, args.threads):
            print(','.join(str(x) for x in row))
            rows.append(row)
    stem = f"chi_{'_'.join(args.algo)}"
    write_csv(_out_dir(args) / f'{stem}.csv', ['algo', 'n', 'T', 'chi'], rows, args,
              {'algo': args.algo, 'n': args.n})
    return EXIT_OK


FIDELITY_PLOT = '''\
"""Fidelity |<F>| against {xname} with the exp(-chi delta^2) model."""
import csv
import math
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else {csv!r}
rows = list(csv.DictReader(open(path)))
CHI = {chi!r}  # (algo, n) -> chi from the GUE-averaged correlator
MARKERS = {{'qft': '+', 'iqft': 'x'}}
x_key = {xkey!r}
for algo in sorted({{r['algo'] for r in rows}}):
    sel = [r for r in rows if r['algo'] == algo]
    x = [float(r[x_key]) for r in sel]
    plt.errorbar(x, [float(r['abs_mean_F']) for r in sel],
                 yerr=[float(r['std_err']) for r in sel], fmt=MARKERS.get(algo, 'o'),
                 label=algo.upper())
    model = [math.exp(-CHI[(algo, int(r['n']))] * float(r['delta']) ** 2) for r in sel]
    plt.plot(x, model, '-', label=f'exp(-chi delta^2), {{algo.upper()}}')
    if sel[0]['mode'] == 'noise':
        base = [math.exp(-float(r['delta']) ** 2 * int(r['T']) / 2) for r in sel]
        plt.plot(x, base, ':', label=f'noise baseline, {{algo.upper()}}')
plt.xlabel(x_key)
plt.ylabel('|<F>|')
plt.legend()
plt.savefig({png!r}, dpi=150)
'''


def _fidelity_mode(text: str, dim_check) -> tuple[PerturbationMode, str]:
    if text in ('static', 'noise'):
        return PerturbationMode(text), text
    if text.startswith('fixed:'):
        path = text.split(':', 1)[1]
        try:
            v = load_matrix(path)
        except OSError as exc:
            raise OSError(f'cannot read perturbation {path}: {exc}') from exc
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        dim_check(v)
        return PerturbationMode.fixed(v), 'fixed'
    raise UsageError(f'bad mode {text!r}; use static, noise or fixed:<path>')


def cmd_fidelity(args) -> int:
    _guard_n(args.n)
    if len(args.n) > 1 and len(args.delta) > 1:
        raise UsageError('sweep either n or delta, not both')
    if any(d < 0 for d in args.delta):
        raise UsageError('delta must be non-negative')
    if args.realizations < 1:
        raise UsageError('--realizations must be >= 1')

    def dim_check(v: HermitianPerturbation):
        if len(args.n) != 1 or v.dim != 2 ** args.n[0]:
            raise UsageError(f'fixed perturbation has dimension {v.dim}; '
                             'it needs a single n with 2**n equal to it')

    mode, mode_name = _fidelity_mode(args.mode, dim_check)
    states_for = {}
    for n in args.n:
        if args.trace == 'exact':
            if n > MAX_EXACT_FIDELITY_N and not args.allow_large:
                raise UsageError(f'exact trace at n={n} is refused above n='
                                 f'{MAX_EXACT_FIDELITY_N}; use --trace stochastic:M '
                                 'or --allow-large')
            states_for[n] = None
        elif args.trace == 'auto':
            states_for[n] = DEFAULT_STATES if n >= STOCHASTIC_FROM_N else None
        else:
            states_for[n] = args.trace

    rows, chi = [], {}
    for algo in args.algo:
        for n in args.n:
            c = BUILDERS[algo](n)
            chi[(algo, n)] = chi_sum(correlator_gue(c, threads=args.threads)).chi
            for delta in args.delta:
                cfg = FidelityRunConfig(delta, args.realizations, states_for[n],
                                        args.seed, args.threads)
                ens = fidelity_ensemble(c, mode, cfg)
                row = [algo, n, len(c), fmt(delta), mode_name, args.realizations,
                       fmt(ens.abs_mean), fmt(ens.std_error)]
                print(','.join(str(x) for x in row))
                rows.append(row)

    out = _out_dir(args)
    stem = f"fidelity_{'_'.join(args.algo)}_{mode_name}"
    params = {'algo': args.algo, 'n': args.n, 'delta': args.delta, 'mode': args.mode,
              'realizations': args.realizations,
              'trace': {n: ('exact' if s is None else f'stochastic:{s}')
                        for n, s in states_for.items()}}
    write_csv(out / f'{stem}.csv', FIDELITY_HEADER, rows, args, params)
    xkey = 'n' if len(args.n) > 1 else 'delta'
    (out / f'plot_{stem}.py').write_text(FIDELITY_PLOT.format(
        csv=f'{stem}.csv', png=f'{stem}.png', chi=chi, xkey=xkey,
        xname='qubit count' if xkey == 'n' else 'perturbation strength'))
    return EXIT_OK


def read_chi_csv(path: str | Path) -> list[tuple[str, int, float]]:
    """Rows of a ``chi`` CSV; malformed input raises ``UsageError`` with the line."""
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as exc:
        raise OSError(f'cannot read {path}: {exc}') from exc
    lines = text.splitlines()
    if not lines or lines[0].strip() != 'algo,n,T,chi':
        raise UsageError(f'{path}:1: expected header algo,n,T,chi')
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(',')
        try:
            if len(parts) != 4:
                raise ValueError
            out.append((parts[0], int(parts[1]), float(parts[3])))
        except ValueError:
            raise UsageError(f'{path}:{lineno}: malformed row {line!r}') from None
    return out


def cmd_fit(args) -> int:
    data = read_chi_csv(args.chi_csv)
    algos = sorted({a for a, _, _ in data})
    rows = []
    for algo in algos:
        pts = [(n, chi) for a, n, chi in data if a == algo]
        try:
            fit = fit_scaling(pts, args.basis)
        except DegenerateFitError as exc:
            raise UsageError(f'{algo}: {exc}') from exc
        terms = ' '.join(f'{c:+.6g} n^{e}' for e, c in zip(fit.basis, fit.coefficients))
        print(f'{algo}: chi(n) = {terms}  (residual rms {fit.residual_rms:.3g})')
        rows += [[algo, e, fmt(c), fmt(fit.residual_rms)]
                 for e, c in zip(fit.basis, fit.coefficients)]
    out = _out_dir(args)
    stem = f'fit_{Path(args.chi_csv).stem}'
    write_csv(out / f'{stem}.csv', ['algo', 'exponent', 'coefficient', 'residual_rms'],
              rows, args, {'chi_csv': str(args.chi_csv), 'basis': args.basis})
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=argparse.SUPPRESS,
                        help='master seed, unsigned 64-bit (default 0)')
    common.add_argument('--out', default=argparse.SUPPRESS,
                        help='output directory (default: current directory)')
    common.add_argument('--threads', type=int, default=argparse.SUPPRESS,
                        help='worker threads; affects speed only (default 1)')
    common.add_argument('-v', '--verbose', action='store_true', default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(
        prog='qastab', parents=[common],
        description='Stability of QFT and IQFT gate sequences under static and noisy '
                    'perturbations.',
        epilog='Ranges: integers as "a..b" (inclusive) or "a,b,c"; reals as a '
               'single value, "a:b:step" (inclusive) or a comma list.')
    p.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = p.add_subparsers(dest='command', required=True, metavar='command')
    algo = {'choices': sorted(BUILDERS)}

    s = sub.add_parser('gates', parents=[common], help='list the gate sequence')
    s.add_argument('--algo', required=True, **algo)
    s.add_argument('-n', type=int, required=True)
    s.set_defaults(func=cmd_gates)

    s = sub.add_parser('verify', parents=[common], help='run the invariant suite')
    s.add_argument('--n-max', type=int, default=6)
    s.add_argument('--corrupt-r', action='store_true', help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser('correlator', parents=[common],
                       help="GUE-averaged correlator C(t,t') as CSV + plot script")
    s.add_argument('--algo', required=True, **algo)
    s.add_argument('-n', type=int, required=True)
    s.set_defaults(func=cmd_correlator)

    s = sub.add_parser('chi', parents=[common], help='correlation sum per qubit count')
    s.add_argument('--algo', nargs='+', required=True, **algo)
    s.add_argument('-n', type=parse_int_range, required=True, help='e.g. 4..10')
    s.set_defaults(func=cmd_chi)

    s = sub.add_parser('fidelity', parents=[common],
                       help='ensemble-averaged fidelity as CSV + plot script')
    s.add_argument('--algo', nargs='+', required=True, **algo)
    s.add_argument('-n', type=parse_int_range, required=True)
    s.add_argument('--delta', type=parse_float_range, required=True,
                   help='e.g. 0.04 or 0:0.3:0.01')
    s.add_argument('--mode', default='static', help='static, noise or fixed:<path>')
    s.add_argument('--realizations', type=int, default=50)
    s.add_argument('--trace', type=parse_trace, default='auto',
                   help=f'exact, stochastic[:M] or auto (random states from '
                        f'n={STOCHASTIC_FROM_N}, M={DEFAULT_STATES})')
    s.add_argument('--allow-large', action='store_true',
                   help=f'permit exact trace above n={MAX_EXACT_FIDELITY_N}')
    s.set_defaults(func=cmd_fidelity)

    s = sub.add_parser('fit', parents=[common], help='polynomial fit of chi(n)')
    s.add_argument('chi_csv')
    s.add_argument('--basis', type=parse_basis, default=[3, 2, 1], help='e.g. 3,2,1')
    s.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    args.argv = argv
    args.out_given = hasattr(args, 'out')
    for name, default in (('seed', 0), ('out', '.'), ('threads', 1), ('verbose', False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(levelname)s %(message)s')
    if not 0 <= args.seed < 2 ** 64:
        parser.error('--seed must be an unsigned 64-bit integer')
    if args.threads < 1:
        parser.error('--threads must be >= 1')
    try:
        return args.func(args)
    except UsageError as exc:
        print(f'qastab {args.command}: error: {exc}', file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f'qastab {args.command}: I/O error: {exc}', file=sys.stderr)
        return EXIT_IO


if __name__ == '__main__':
    sys.exit(main())
