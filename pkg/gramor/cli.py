#!/usr/bin/env python3
"""
Interface en ligne de commande de gramor

    gramor generate-benchmark --k 20 --mode stochastic
    gramor reduce runs/heat_k20_stochastic.json --method both --r 25
    gramor bounds runs/heat_k20_stochastic.json --sweep 1:25
    gramor simulate runs/heat_k20_stochastic.json --method OS --r 25 --samples 10000
    gramor stability-check runs/heat_k20_stochastic.json
    gramor reproduce --target table1 --samples 1000 --seed 7
"""

import argparse
import json
import os
import sys
from contextlib import contextmanager

import numpy as np

from gramor import __version__
from gramor.benchmark.heat import MODES, HeatBenchmarkSpec, generate_heat_system
from gramor.config import get_settings
from gramor.console import print_banner, print_error, print_step, print_success, print_warning
from gramor.core.bounds import (
    bilinear_general_bound,
    bilinear_weighted_bound,
    bound_sweep,
    general_bound,
    weighted_bound,
)
from gramor.core.reduction import (
    balanced_truncation_reduce,
    galerkin_reduce,
    hankel_singular_values,
    observability_gramian,
    reachability_gramian,
    rom_stochastic_triple,
    spectral_factorize,
)
from gramor.core.stability import spectral_abscissa, sufficient_ms_stability
from gramor.core.system_model import (
    SIGNAL_REGISTRY,
    BilinearControlSystem,
    InputSignal,
    scaled_stochastic,
)
from gramor.exceptions import ArgumentError, GramorError, StageFailure
from gramor.simulation.simulate import (
    SimulationConfig,
    bilinear_simulate_paired,
    euler_maruyama_paired,
)
from gramor.storage import GramianCache, RunManifest, SystemStore, system_hash, write_csv
from gramor.storage.system_store import read_csv

BOUND_COLUMNS = ['r', 'method', 'trP', 'trPhat', 'trP2Vt', 'inputIndependentFactor', 'bound']
CURVE_COLUMNS = ['t', 'meanError', 'stderr']
TARGETS = ('table1', 'fig3', 'fig1', 'fig2', 'table2', 'fig-orders')


class CommandRun:
    """Manifeste et étapes nommées d'une commande"""

    def __init__(self, args):
        self.args = args
        self.out = args.out
        self.store = SystemStore(self.out)
        config = {k: v for k, v in vars(args).items() if k not in ('func', 'argv')}
        self.manifest = RunManifest(args.command, config, getattr(args, 'argv', []))

    @contextmanager
    def stage(self, name):
        print_step(name)
        try:
            with self.manifest.stage(name):
                yield
        except GramorError as e:
            if not hasattr(e, 'stage'):
                e.stage = name
            raise
        except Exception as e:
            raise StageFailure(name, e) from e

    def path(self, name):
        return os.path.join(self.out, name)

    def output(self, path):
        self.manifest.record_output(path)
        return path

    def finish(self):
        path = self.manifest.write(self.out)
        print_success(f"Manifeste: {path}")
        return 0


# ============================================
# Aides communes
# ============================================

def _load_system(run, path):
    sys = run.store.load_system(os.path.abspath(path))
    run.manifest.record_input(path)
    return sys


def _signal(args, horizon, channels):
    if getattr(args, 'signal_table', None):
        try:
            rows = read_csv(args.signal_table)
        except OSError as e:
            raise ArgumentError(f"table d'entrée illisible: {e}") from e
        if not rows:
            raise ArgumentError(f"table d'entrée vide: {args.signal_table}")
        value_columns = [c for c in rows[0] if c != 't']
        times = [float(row['t']) for row in rows]
        values = [[float(row[c]) for c in value_columns] for row in rows]
        signal = InputSignal.from_table(times, values, horizon=horizon)
        if signal.channels != channels:
            raise ArgumentError(f"la table a {signal.channels} canaux, le système en attend {channels}")
        return signal
    return InputSignal.from_registry(args.signal, horizon, channels)


def _gramians(run, sys, need_q=False):
    """P (et Q) du système, ou de sa version γ-normalisée, via le cache"""
    view = scaled_stochastic(sys) if isinstance(sys, BilinearControlSystem) else sys
    key = system_hash(sys)
    cache = GramianCache(run.out)
    entries = {} if run.args.no_cache else cache.load(key)
    P, Q = entries.get('P'), entries.get('Q')
    if P is None:
        with run.stage("Gramien d'atteignabilité"):
            P, solution = reachability_gramian(view)
            print_success(f"P : {solution.method}, résidu {solution.residualNorm:.3e}")
    if need_q and Q is None:
        with run.stage("Gramien d'observabilité"):
            Q = observability_gramian(view)
    cache.save(key, P=P, Q=Q)
    return P, Q, key


def _methods(method):
    return ['OS', 'BT'] if method == 'both' else [method]


def _reduce(sys, method, r, P, Q, spectrum, parent_hash):
    if method == 'OS':
        return galerkin_reduce(sys, spectrum, r, parent_hash)
    return balanced_truncation_reduce(sys, P, Q, r, parent_hash)


def _sim_config(args, bilinear):
    settings = get_settings()
    horizon = args.horizon if args.horizon is not None else (10.0 if bilinear else 1.0)
    return SimulationConfig(
        stepSize=args.step,
        horizon=horizon,
        samples=args.samples,
        seed=settings.seed if args.seed is None else args.seed,
    )


def _parse_sweep(text):
    try:
        low, high = (int(part) for part in text.split(':'))
    except ValueError as e:
        raise ArgumentError(f"plage de balayage invalide {text!r}, attendu rmin:rmax") from e
    if low < 1 or high < low:
        raise ArgumentError(f"plage de balayage invalide {text!r}")
    return list(range(low, high + 1))


def _check_order(r, n):
    if r is None or not 1 <= r <= n:
        raise ArgumentError(f"ordre r={r!r} hors de [1, {n}]")


# ============================================
# Commandes
# ============================================

def cmd_generate_benchmark(args):
    run = CommandRun(args)
    with run.stage(f"Génération du benchmark chaleur k={args.k} ({args.mode})"):
        spec = HeatBenchmarkSpec(args.k, args.robin, args.mode, args.gamma, args.tie_inputs,
                                 args.reflect_robin, args.noise_weight, args.input_order)
        sys = generate_heat_system(spec)
        name = args.name or f"heat_k{args.k}_{args.mode}.json"
        path, _ = run.store.save_system(sys, run.path(name))
        run.output(path)
    return run.finish()


def cmd_reduce(args):
    run = CommandRun(args)
    sys = _load_system(run, args.system)
    methods = _methods(args.method)
    _check_order(args.r, sys.n)
    P, Q, key = _gramians(run, sys, need_q='BT' in methods)
    spectrum = spectral_factorize(P)

    columns = ['k', 'eigenvalue']
    rows = [{'k': i + 1, 'eigenvalue': float(lam)} for i, lam in enumerate(spectrum.eigenvalues)]
    if Q is not None:
        hankel = hankel_singular_values(P, Q)
        columns.append('hankel')
        for row, value in zip(rows, hankel):
            row['hankel'] = float(value)
    run.output(write_csv(run.path('spectrum.csv'), rows, columns))

    for method in methods:
        with run.stage(f"Réduction {method} r={args.r}"):
            rom = _reduce(sys, method, args.r, P, Q, spectrum, key)
            path, _ = run.store.save_rom(rom, run.path(f"rom_{method}_r{args.r}.json"))
            run.output(path)
    return run.finish()


def _bound_report(sys, rom, u, weighted, P, spectrum):
    bilinear = isinstance(sys, BilinearControlSystem)
    if bilinear:
        if weighted:
            return bilinear_weighted_bound(sys, rom, u, spectrum)
        return bilinear_general_bound(sys, rom, u, P)
    if weighted:
        return weighted_bound(sys, rom, u, spectrum)
    return general_bound(sys, rom, u, P)


def cmd_bounds(args):
    run = CommandRun(args)
    sys = _load_system(run, args.system)
    methods = _methods(args.method)
    if args.weighted and 'BT' in methods:
        raise ArgumentError("la borne pondérée ne concerne que la méthode OS")
    P, Q, key = _gramians(run, sys, need_q='BT' in methods)
    bilinear = isinstance(sys, BilinearControlSystem)
    u = _signal(args, args.horizon if args.horizon is not None else (10.0 if bilinear else 1.0), sys.m)

    rows = []
    if args.sweep:
        r_values = _parse_sweep(args.sweep)
        _check_order(max(r_values), sys.n)
        for method in methods:
            with run.stage(f"Balayage des bornes {method}"):
                rows.extend(report.as_row() for report in bound_sweep(sys, r_values, method, u, P, Q))
    else:
        _check_order(args.r, sys.n)
        spectrum = spectral_factorize(P)
        for method in methods:
            with run.stage(f"Borne {method} r={args.r}"):
                rom = _reduce(sys, method, args.r, P, Q, spectrum, key)
                report = _bound_report(sys, rom, u, args.weighted, P, spectrum)
                rows.append(report.as_row())
                print_success(f"{method} r={args.r} : ℰ = {report.inputIndependentFactor:.12e}, "
                              f"borne = {report.bound:.6e}")
    run.output(write_csv(run.path('bounds.csv'), rows, BOUND_COLUMNS))
    return run.finish()


def cmd_simulate(args):
    run = CommandRun(args)
    sys = _load_system(run, args.system)
    bilinear = isinstance(sys, BilinearControlSystem)
    cfg = _sim_config(args, bilinear)

    if args.rom:
        rom = run.store.load_rom(os.path.abspath(args.rom), parent=sys)
        run.manifest.record_input(args.rom)
    else:
        _check_order(args.r, sys.n)
        P, Q, key = _gramians(run, sys, need_q=args.method == 'BT')
        rom = _reduce(sys, args.method, args.r, P, Q, spectral_factorize(P), key)

    u = _signal(args, cfg.horizon, sys.m)
    with run.stage(f"Simulation {rom.method} r={rom.r}"):
        if bilinear:
            curve = bilinear_simulate_paired(sys, rom, u, cfg)
        else:
            curve = euler_maruyama_paired(sys, rom, u, cfg)
    name = f"simulate_{rom.method}_r{rom.r}.csv"
    run.output(write_csv(run.path(name), curve.rows(), CURVE_COLUMNS))
    print_success(f"erreur max {curve.supValue:.6e}")
    return run.finish()


def cmd_stability(args):
    run = CommandRun(args)
    sys = _load_system(run, args.system)
    if args.rom:
        rom = run.store.load_rom(os.path.abspath(args.rom), parent=sys)
        run.manifest.record_input(args.rom)
        A, N, _ = rom_stochastic_triple(rom)
    else:
        view = scaled_stochastic(sys) if isinstance(sys, BilinearControlSystem) else sys
        A, N = view.A, list(view.N)

    with run.stage("Stabilité en moyenne quadratique"):
        payload = spectral_abscissa(A, N).to_dict()
        if args.witness:
            witness = sufficient_ms_stability(A, N, np.eye(A.shape[0]))
            payload['witness'] = {'status': witness.status, 'minEigenvalue': witness.minEigenvalue,
                                  'reason': witness.reason}

    path = run.path('stability.json')
    os.makedirs(run.out, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(payload, fh, indent=2)
    run.output(path)
    print(json.dumps(payload))
    return run.finish()


# ============================================
# Reproduction des expériences
# ============================================

def _benchmark(run, k, mode, tie=False):
    with run.stage(f"Benchmark chaleur k={k} ({mode})"):
        return generate_heat_system(HeatBenchmarkSpec(k, mode=mode, tieInputs=tie))


def _reproduce_fig1(run, args):
    sys = _benchmark(run, args.k, 'stochastic')
    P, Q, _ = _gramians(run, sys, need_q=True)
    eig = spectral_factorize(P).eigenvalues
    hankel = hankel_singular_values(P, Q)
    rows = [{'k': i + 1, 'eigP': float(a), 'hankel': float(b)} for i, (a, b) in enumerate(zip(eig, hankel))]
    run.output(write_csv(run.path('fig1.csv'), rows, ['k', 'eigP', 'hankel']))


def _reproduce_fig3(run, args):
    sys = _benchmark(run, args.k, 'stochastic')
    P, Q, _ = _gramians(run, sys, need_q=True)
    r_values = list(range(1, min(args.r, sys.n) + 1))
    columns = {}
    for method in ('OS', 'BT'):
        with run.stage(f"Balayage ℰ(r) {method}"):
            reports = bound_sweep(sys, r_values, method, None, P, Q)
            columns[method] = [rep.inputIndependentFactor for rep in reports]
            run.output(write_csv(run.path(f'fig3_{method}.csv'), [rep.as_row() for rep in reports],
                                 BOUND_COLUMNS))
    rows = [{'r': r, 'OS': columns['OS'][i], 'BT': columns['BT'][i]} for i, r in enumerate(r_values)]
    run.output(write_csv(run.path('fig3.csv'), rows, ['r', 'OS', 'BT']))


def _stochastic_pair(run, args):
    sys = _benchmark(run, args.k, 'stochastic')
    P, Q, key = _gramians(run, sys, need_q=True)
    spectrum = spectral_factorize(P)
    r = min(args.r, sys.n)
    roms = {m: _reduce(sys, m, r, P, Q, spectrum, key) for m in ('OS', 'BT')}
    return sys, P, roms


def _reproduce_table1(run, args, curves=False):
    sys, P, roms = _stochastic_pair(run, args)
    cfg = _sim_config(args, bilinear=False)
    u = InputSignal.from_registry('paper-default', cfg.horizon)
    rows, traces = [], {}
    for method, rom in roms.items():
        with run.stage(f"Borne {method}"):
            report = general_bound(sys, rom, u, P)
        with run.stage(f"Monte Carlo {method}"):
            curve = euler_maruyama_paired(sys, rom, u, cfg)
        bound = report.bound if args.full_bound else report.inputIndependentFactor
        rows.append({'method': method, 'errorBound': bound, 'maxMeanError': curve.supValue,
                     'stderr': curve.supStderr})
        traces[method] = (curve, bound)

    if curves:
        grid = traces['OS'][0].timeGrid
        out = []
        for i, t in enumerate(grid):
            row = {'t': float(t)}
            for method, (curve, bound) in traces.items():
                row[method] = float(curve.meanError[i])
                row[f'{method}_stderr'] = float(curve.stderr[i])
                row[f'{method}_bound'] = float(bound)
            out.append(row)
        columns = ['t'] + [f'{m}{s}' for m in traces for s in ('', '_stderr', '_bound')]
        run.output(write_csv(run.path('fig2.csv'), out, columns))
    else:
        run.output(write_csv(run.path('table1.csv'), rows, ['method', 'errorBound', 'maxMeanError', 'stderr']))


def _bilinear_setup(run, args):
    sys = _benchmark(run, args.k, 'bilinear', tie=True)
    P, Q, key = _gramians(run, sys, need_q=True)
    return sys, P, Q, key, spectral_factorize(P)


def _reproduce_table2(run, args):
    sys, P, Q, key, spectrum = _bilinear_setup(run, args)
    cfg = _sim_config(args, bilinear=True)
    u = InputSignal.from_registry('paper-default', cfg.horizon)
    r = min(args.r, sys.n)
    rows = []
    for method in ('OS', 'BT'):
        rom = _reduce(sys, method, r, P, Q, spectrum, key)
        with run.stage(f"Borne bilinéaire {method}"):
            report = bilinear_general_bound(sys, rom, u, P)
        with run.stage(f"Simulation bilinéaire {method}"):
            curve = bilinear_simulate_paired(sys, rom, u, cfg)
        bound = report.bound if args.full_bound else report.inputIndependentFactor
        rows.append({'method': method, 'errorBound': bound, 'maxError': curve.supValue,
                     'publishedValuesVerifiable': 'false'})
    print_warning("les valeurs de référence bilinéaires dupliquent le cas stochastique : non vérifiables")
    run.output(write_csv(run.path('table2.csv'), rows,
                         ['method', 'errorBound', 'maxError', 'publishedValuesVerifiable']))


def _reproduce_fig_orders(run, args):
    sys, P, Q, key, spectrum = _bilinear_setup(run, args)
    cfg = _sim_config(args, bilinear=True)
    u = InputSignal.from_registry('paper-default', cfg.horizon)
    orders = [r for r in args.orders if 1 <= r <= sys.n]
    if not orders:
        raise ArgumentError(f"aucun ordre de {args.orders} dans [1, {sys.n}]")
    curves = {}
    for r in orders:
        with run.stage(f"Simulation bilinéaire OS r={r}"):
            curves[r] = bilinear_simulate_paired(sys, galerkin_reduce(sys, spectrum, r, key), u, cfg)
    grid = curves[orders[0]].timeGrid
    rows = [{'t': float(t), **{f'r{r}': float(curves[r].meanError[i]) for r in orders}}
            for i, t in enumerate(grid)]
    run.output(write_csv(run.path('fig_orders.csv'), rows, ['t'] + [f'r{r}' for r in orders]))


def _rerun_from_manifest(args):
    manifest = RunManifest.load(args.manifest)
    config = dict(manifest['config'])
    config['manifest'] = None
    config['argv'] = manifest.get('argv', [])
    if args.out_given:
        config['out'] = args.out
    replay = argparse.Namespace(**config)
    replay.func = COMMANDS[config['command']]
    _apply_threads(replay)
    print_step(f"Réexécution du manifeste {args.manifest} ({config['command']})")
    return replay.func(replay)


def cmd_reproduce(args):
    if args.manifest:
        return _rerun_from_manifest(args)
    if args.target not in TARGETS:
        raise ArgumentError(f"cible inconnue {args.target!r}, choix: {', '.join(TARGETS)}")
    run = CommandRun(args)
    print_banner(f"Reproduction : {args.target}")
    if args.target == 'table1':
        _reproduce_table1(run, args)
    elif args.target == 'fig2':
        _reproduce_table1(run, args, curves=True)
    elif args.target == 'fig3':
        _reproduce_fig3(run, args)
    elif args.target == 'fig1':
        _reproduce_fig1(run, args)
    elif args.target == 'table2':
        _reproduce_table2(run, args)
    else:
        _reproduce_fig_orders(run, args)
    return run.finish()


COMMANDS = {
    'generate-benchmark': cmd_generate_benchmark,
    'reduce': cmd_reduce,
    'bounds': cmd_bounds,
    'simulate': cmd_simulate,
    'stability-check': cmd_stability,
    'reproduce': cmd_reproduce,
}


# ============================================
# Analyse des arguments
# ============================================

def _add_signal_options(parser):
    parser.add_argument('--signal', default='paper-default', choices=sorted(SIGNAL_REGISTRY),
                        help="signal d'entrée du registre")
    parser.add_argument('--signal-table', help="CSV (t, u1, ...) d'un signal linéaire par morceaux")
    parser.add_argument('--horizon', type=float, default=None, help="horizon T (1 stochastique, 10 bilinéaire)")


def _add_simulation_options(parser, samples=100_000):
    parser.add_argument('--step', type=float, default=1.0 / 256.0, help="pas h d'Euler–Maruyama")
    parser.add_argument('--samples', type=int, default=samples, help="nombre de trajectoires")


def build_parser():
    settings = get_settings()
    parser = argparse.ArgumentParser(prog='gramor', description=__doc__.splitlines()[1])
    parser.add_argument('--version', action='version', version=f'gramor {__version__}')
    parser.add_argument('--out', default=None, help=f"répertoire des artefacts (défaut {settings.output_dir})")
    parser.add_argument('--seed', type=int, default=None, help="graine des flux aléatoires")
    parser.add_argument('--threads', type=int, default=None, help="threads (GRAMOR_THREADS sinon)")
    parser.add_argument('--no-cache', action='store_true', help="ne pas réutiliser les gramiens en cache")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('generate-benchmark', help="écrire le système de l'équation de la chaleur")
    p.add_argument('--k', type=int, required=True, help="points intérieurs par axe (n = k²)")
    p.add_argument('--mode', choices=MODES, default='stochastic')
    p.add_argument('--robin', type=float, default=0.8, help="coefficient de Robin sur Γ₁")
    p.add_argument('--gamma', type=float, default=1.0, help="γ du système bilinéaire")
    p.add_argument('--tie-inputs', action='store_true', help="u₁ = u₂ = u (mode bilinéaire)")
    p.add_argument('--reflect-robin', action='store_true', help="replier le nœud fantôme de Robin dans A")
    p.add_argument('--noise-weight', type=float, default=2.0, help="poids de c/Δ sur la diagonale de N")
    p.add_argument('--input-order', type=int, choices=(1, 2), default=1, help="B = 1/Δ^ordre sur Γ₂")
    p.add_argument('--name', default=None, help="nom du fichier produit")

    p = sub.add_parser('reduce', help="ROM OS et/ou BT et spectre du gramien")
    p.add_argument('system')
    p.add_argument('--method', choices=('OS', 'BT', 'both'), default='OS')
    p.add_argument('--r', type=int, required=True)

    p = sub.add_parser('bounds', help="bornes d'erreur a priori")
    p.add_argument('system')
    p.add_argument('--method', choices=('OS', 'BT', 'both'), default='OS')
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument('--r', type=int)
    group.add_argument('--sweep', help="plage rmin:rmax")
    p.add_argument('--weighted', action='store_true', help="forme pondérée par Λ₂ (OS)")
    _add_signal_options(p)

    p = sub.add_parser('simulate', help="erreur moyenne simulée entre système et ROM")
    p.add_argument('system')
    p.add_argument('--rom', help="fichier ROM produit par reduce")
    p.add_argument('--method', choices=('OS', 'BT'), default='OS')
    p.add_argument('--r', type=int, default=None)
    _add_signal_options(p)
    _add_simulation_options(p)

    p = sub.add_parser('stability-check', help="abscisse spectrale de K et verdict")
    p.add_argument('system')
    p.add_argument('--rom', help="contrôler le ROM plutôt que le système")
    p.add_argument('--witness', action='store_true', help="chercher aussi un témoin X ≻ 0")

    p = sub.add_parser('reproduce', help="reproduire tableaux et figures du benchmark")
    p.add_argument('--target', default='table1', help=f"une de {', '.join(TARGETS)}")
    p.add_argument('--manifest', help="réexécuter une commande depuis son manifeste")
    p.add_argument('--k', type=int, default=20)
    p.add_argument('--r', type=int, default=25)
    p.add_argument('--orders', type=int, nargs='+', default=[5, 10, 15, 20, 25])
    p.add_argument('--full-bound', action='store_true', help="borne complète ℰ(r)·‖u‖ au lieu de ℰ(r)")
    p.add_argument('--horizon', type=float, default=None)
    _add_simulation_options(p)

    return parser


def _apply_threads(args):
    if args.threads is not None:
        if args.threads < 1:
            raise ArgumentError(f"--threads doit être ≥ 1, reçu {args.threads}")
        os.environ['GRAMOR_THREADS'] = str(args.threads)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = list(sys.argv[1:] if argv is None else argv)
    args.out_given = args.out is not None
    if args.out is None:
        args.out = get_settings().output_dir
    args.func = COMMANDS[args.command]

    try:
        _apply_threads(args)
        return args.func(args)
    except ArgumentError as e:
        print_error(str(e))
        parser.print_usage(sys.stderr)
        return e.exit_code
    except GramorError as e:
        stage = getattr(e, 'stage', None)
        print_error(f"échec à l'étape « {stage} » : {e}" if stage else str(e))
        return e.exit_code
    except KeyboardInterrupt:
        print_warning("interrompu")
        return 130


if __name__ == '__main__':
    sys.exit(main())
