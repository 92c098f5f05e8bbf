#!/usr/bin/python
# -*- coding:utf-8 -*-
import argparse
import logging
import math
import os
import sys

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Add services to path
sys.path.append(os.path.dirname(os.path.realpath(__file__)))

from config.settings import settings
from services.cache_service import cache_service
from services.circuit_service import build_sat_verifier, decompose_circuit, simulate_basis, verifier_report
from services.clock_service import ClockSchedule, clock_table_csv, legal_states, verify_conditions
from services.cnf_service import (brute_force_sat, evaluate, parse_dimacs, random_kcnf, serialize_dimacs,
                                  validate_kcnf)
from services.errors import GuardError, LhError, StageError, ValidationError
from services.hamiltonian_service import LocalHamiltonian, random_local_hamiltonian
from services.qpf_service import BACKENDS, approximate_qpf, qpf_solver
from services.reduction_service import (decide_lh_via_qpf, exact_qpf_solver, lh_to_qpf, sat_to_3lh,
                                        sat_to_klh_trivial, width_sweep)
from services.report_service import ReportService, RunReport, load_json
from services.spectrum_service import (Decision, PartitionFunction, Thresholds, decide_lh, dense_eigenvalues,
                                       ground_energy, log_partition_function)

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_IO_OR_GUARD = 2


def read_formula(path):
    """
    Load a DIMACS file

    Raises:
        OSError: If the file cannot be read
        ValidationError: If the text is not valid DIMACS
    """
    with open(path) as f:
        return parse_dimacs(f.read())


def read_hamiltonian(path):
    """
    Load a Hamiltonian from its JSON, or from a report that embeds one

    Raises:
        OSError: If the file cannot be read
        ValidationError: If no Hamiltonian is found
    """
    try:
        data = load_json(path)
    except ValueError as e:
        raise ValidationError(f"{path} is not valid JSON: {e}")
    if isinstance(data, dict) and 'outputs' in data:
        outputs = data['outputs']
        data = outputs.get('hamiltonian') or outputs.get('instance', {}).get('hamiltonian')
    if not isinstance(data, dict) or 'terms' not in data:
        raise ValidationError(f"{path} holds no Hamiltonian")
    return LocalHamiltonian.from_dict(data)


class ReductionWorkbench:
    """Runs one CLI command against the services and packages the result as a RunReport"""

    def __init__(self, seed=None):
        """
        Initialize the workbench

        Args:
            seed (int, optional): Seed for randomized commands, LH_SEED when omitted
        """
        self.logger = logging.getLogger(__name__)
        self.seed = settings.seed if seed is None else seed
        cache_stats = cache_service.get_cache_stats()
        self.logger.debug(f"Cache initialized - enabled by default: {cache_stats['default_enabled']}")

    def _report(self, command, parameters, outputs, exit_code=EXIT_OK, seeded=False):
        return RunReport(command, parameters, outputs, self.seed if seeded else None, exit_code=exit_code)

    # --- cnf ---------------------------------------------------------------------------------

    def cnf_validate(self, path, k):
        formula = read_formula(path)
        report = validate_kcnf(formula, k)
        outputs = report.to_dict()
        outputs.update({'n': formula.num_vars, 'm': formula.num_clauses, 'k_max': formula.max_width})
        if report.valid:
            self.logger.info(f"{path}: valid {k}CNF with n={formula.num_vars} m={formula.num_clauses}")
        else:
            self.logger.error(f"{path}: offending clauses {report.offending_clauses}")
        return self._report('cnf validate', {'path': path, 'k': k}, outputs,
                            EXIT_OK if report.valid else EXIT_REJECTED)

    def cnf_solve(self, path):
        formula = read_formula(path)
        model = brute_force_sat(formula)
        outputs = {'n': formula.num_vars, 'm': formula.num_clauses, 'satisfiable': model is not None,
                   'model': model}
        return self._report('cnf solve', {'path': path}, outputs)

    def cnf_random(self, n, m, k):
        formula = random_kcnf(n, m, k, self.seed)
        outputs = {'n': n, 'm': m, 'k': k, 'dimacs': serialize_dimacs(formula)}
        return self._report('cnf random', {'n': n, 'm': m, 'k': k}, outputs, seeded=True)

    # --- verifier ----------------------------------------------------------------------------

    def verifier(self, path, check_inputs=False, emit_circuit=False):
        formula = read_formula(path)
        circuit = build_sat_verifier(formula)
        outputs = {'report': verifier_report(formula, circuit)}
        if check_inputs:
            mismatches = []
            for x in range(1 << formula.num_vars):
                bits = format(x, f'0{formula.num_vars}b')
                out = simulate_basis(circuit, bits)[circuit.out_index]
                if out != evaluate(formula, bits):
                    mismatches.append(bits)
            outputs['inputs_checked'] = 1 << formula.num_vars
            outputs['mismatches'] = mismatches
            if mismatches:
                self.logger.error(f"Verifier disagrees with Φ on {len(mismatches)} inputs")
        if emit_circuit:
            outputs['circuit'] = decompose_circuit(circuit).to_dict()
        failed = bool(outputs.get('mismatches'))
        return self._report('verifier', {'path': path, 'check_inputs': check_inputs}, outputs,
                            EXIT_REJECTED if failed else EXIT_OK)

    # --- clock -------------------------------------------------------------------------------

    @staticmethod
    def _schedule(variant, T=None, a=None, d=None):
        if variant == 'unary':
            if T is None:
                raise ValidationError("the unary clock needs --T")
            return ClockSchedule.unary(T)
        if a is None or d is None:
            raise ValidationError(f"the {variant} clock needs --a and --d")
        if variant == 'johnson':
            return ClockSchedule.johnson(a, d)
        return ClockSchedule.dual(a, d)

    def clock_table(self, variant, T=None, a=None, d=None, csv=False):
        schedule = self._schedule(variant, T, a, d)
        parameters = {'variant': variant, 'T': T, 'a': a, 'd': d}
        outputs = {'T': schedule.T, 'width': schedule.width, 'locality': schedule.locality_limit}
        if csv:
            outputs['csv'] = clock_table_csv(schedule)
        else:
            outputs['states'] = legal_states(schedule)
        return self._report('clock table', parameters, outputs)

    def clock_verify(self, variant, T=None, a=None, d=None):
        schedule = self._schedule(variant, T, a, d)
        report = verify_conditions(schedule)
        return self._report('clock verify', {'variant': variant, 'T': T, 'a': a, 'd': d}, report.to_dict(),
                            EXIT_OK if report.passed else EXIT_REJECTED)

    # --- hamiltonians and reductions ----------------------------------------------------------

    def _instance(self, path, reduction, d=2, epsilon=None, coeffs='default'):
        formula = read_formula(path)
        if reduction == 'trivial':
            return formula, sat_to_klh_trivial(formula)
        return formula, sat_to_3lh(formula, epsilon, coeffs, d)

    def ham_build(self, path, reduction, d=2, epsilon=None, coeffs='default'):
        _, instance = self._instance(path, reduction, d, epsilon, coeffs)
        outputs = instance.to_dict(include_hamiltonian=False)
        outputs['hamiltonian'] = instance.H.to_dict()
        return self._report('ham build', {'path': path, 'reduction': reduction, 'd': d, 'epsilon': epsilon,
                                          'coefficients': coeffs}, outputs)

    def ham_random(self, n, terms, k, max_coefficient):
        H = random_local_hamiltonian(n, terms, k, self.seed, max_coefficient)
        outputs = {'width': H.width, 'locality': H.max_support, 'norm_bound': H.norm_bound,
                   'hamiltonian': H.to_dict()}
        return self._report('ham random', {'n': n, 'terms': terms, 'k': k, 'max_coefficient': max_coefficient},
                            outputs, seeded=True)

    def ham_info(self, path):
        H = read_hamiltonian(path)
        labels = sorted({t.label.rstrip('0123456789') for t in H.terms})
        outputs = {'width': H.width, 'locality': H.max_support, 'num_terms': len(H.terms),
                   'norm_bound': H.norm_bound, 'offset': H.offset, 'term_families': labels,
                   'fingerprint': H.fingerprint()}
        return self._report('ham info', {'path': path}, outputs)

    def spectrum(self, path, method='auto', e_yes=None, e_no=None):
        H = read_hamiltonian(path)
        report = ground_energy(H, method, self.seed)
        outputs = report.to_dict()
        exit_code = EXIT_OK
        if e_yes is not None and e_no is not None:
            decision = decide_lh(H, Thresholds(e_yes, e_no), method)
            outputs['decision'] = decision.value
            exit_code = EXIT_REJECTED if decision is Decision.INDETERMINATE else EXIT_OK
        return self._report('spectrum', {'path': path, 'method': method, 'E_yes': e_yes, 'E_no': e_no},
                            outputs, exit_code, seeded=report.method == 'lanczos')

    def reduce(self, path, reduction, d=2, epsilon=None, coeffs='default', emit_ham=False):
        formula, instance = self._instance(path, reduction, d, epsilon, coeffs)
        outputs = {'instance': instance.to_dict(include_hamiltonian=emit_ham)}
        if instance.width <= settings.dense_guard:
            decision = decide_lh(instance.H, instance.thresholds)
            outputs['decision'] = decision.value
            outputs['lambda'] = float(dense_eigenvalues(instance.H)[0])
            outputs['satisfiable'] = brute_force_sat(formula) is not None
            exit_code = EXIT_REJECTED if decision is Decision.INDETERMINATE else EXIT_OK
        else:
            exit_code = EXIT_OK
        return self._report(f'reduce {reduction}', {'path': path, 'd': d, 'epsilon': epsilon,
                                                    'coefficients': coeffs}, outputs, exit_code)

    def reduce_qpf(self, path, via='trivial', backend='exact', c=1, beta=None, delta=None):
        _, instance = self._instance(path, via)
        qpf = lh_to_qpf(instance, beta, delta)
        solver = exact_qpf_solver if backend == 'exact' else qpf_solver(backend, c, self.seed)
        decision = decide_lh_via_qpf(qpf, solver)
        outputs = {'qpf_instance': qpf.to_dict(), 'decision': decision.value}
        if instance.width <= settings.dense_guard:
            outputs['direct_decision'] = decide_lh(instance.H, instance.thresholds).value
        exit_code = EXIT_REJECTED if decision is Decision.INDETERMINATE else EXIT_OK
        return self._report('reduce qpf', {'path': path, 'via': via, 'backend': backend, 'c': c,
                                           'beta': beta, 'delta': delta}, outputs, exit_code,
                            seeded=backend != 'exact')

    def sweep(self, ns, clauses_per_var, k, d):
        rows = width_sweep(ns, clauses_per_var, k, d, self.seed)
        return self._report('reduce sweep', {'ns': list(ns), 'clauses_per_var': clauses_per_var, 'k': k, 'd': d},
                            {'rows': rows}, seeded=True)

    # --- qpf ---------------------------------------------------------------------------------

    def qpf(self, path, beta, c=1, backend='oracle', confidence=None, compare_exact=False, adversarial=False):
        H = read_hamiltonian(path)
        estimate = approximate_qpf(H, beta, c, backend, self.seed, confidence, adversarial)
        outputs = estimate.to_dict()
        if compare_exact:
            if H.width > settings.dense_guard:
                self.logger.warning(f"Skipping exact comparison: width {H.width} above {settings.dense_guard}")
            else:
                log_z = log_partition_function(H, beta)
                rel = math.expm1(estimate.log_z - log_z)
                tolerance = 1.0 / H.width ** c
                outputs['exact'] = {'log_z': log_z, 'z': PartitionFunction(log_z).z,
                                    'relative_error': rel, 'tolerance': tolerance,
                                    'within_tolerance': abs(rel) <= tolerance}
                self.logger.info(f"QPF relative error {rel:.3e} (tolerance {tolerance:.3e})")
        return self._report('qpf', {'path': path, 'beta': beta, 'c': c, 'backend': backend,
                                    'confidence': confidence, 'compare_exact': compare_exact,
                                    'adversarial': adversarial}, outputs, seeded=True)

    # --- pipeline ----------------------------------------------------------------------------

    def pipeline(self, path, d=2, epsilon=None, emit_ham=False, coeffs='default'):
        _, instance = self._instance(path, '3lh', d, epsilon, coeffs)
        provenance = instance.provenance
        outputs = {
            'widths': provenance['widths'],
            'gate_counts': provenance['gate_counts'],
            'gate_count_bound': provenance['verifier'].get('gate_count_bound'),
            'locality': instance.H.max_support,
            'k': instance.k,
            'thresholds': instance.thresholds.to_dict(),
            'schedule': provenance['schedule'],
            'coefficients': provenance['coefficients'],
            'stages': provenance['stages'],
        }
        if emit_ham:
            outputs['hamiltonian'] = instance.H.to_dict()
        return self._report('pipeline', {'path': path, 'd': d, 'epsilon': instance.thresholds.E_yes,
                                         'emit_ham': emit_ham, 'coefficients': coeffs}, outputs)


def _add_clock_args(parser):
    parser.add_argument('--variant', choices=['unary', 'johnson', 'dual'], default='dual')
    parser.add_argument('--T', type=int, help='unary clock length')
    parser.add_argument('--a', type=int, help='Johnson/dual clock size')
    parser.add_argument('--d', type=int, help='Johnson/dual locality parameter')


def build_parser():
    parser = argparse.ArgumentParser(description='SAT, local Hamiltonian and partition-function reductions')
    parser.add_argument('--config', help='KEY=value file overriding the environment')
    parser.add_argument('--out', help='write the report here instead of stdout')
    parser.add_argument('--seed', type=int, help='seed for randomized commands (default: LH_SEED)')
    parser.add_argument('--timing', action='store_true', help='record wall-clock timing in the report')
    sub = parser.add_subparsers(dest='command', required=True)

    cnf = sub.add_parser('cnf', help='DIMACS validation, brute-force SAT and random formulas')
    cnf_sub = cnf.add_subparsers(dest='action', required=True)
    p = cnf_sub.add_parser('validate')
    p.add_argument('path')
    p.add_argument('--k', type=int, default=3)
    p = cnf_sub.add_parser('solve')
    p.add_argument('path')
    p = cnf_sub.add_parser('random')
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--m', type=int, required=True)
    p.add_argument('--k', type=int, default=3)

    p = sub.add_parser('verifier', help='SAT verifier circuit layout and gate counts')
    p.add_argument('path')
    p.add_argument('--check-inputs', action='store_true', help='run the circuit on every assignment')
    p.add_argument('--emit-circuit', action='store_true')

    clock = sub.add_parser('clock', help='clock tables and condition checks')
    clock_sub = clock.add_subparsers(dest='action', required=True)
    p = clock_sub.add_parser('table')
    _add_clock_args(p)
    p.add_argument('--csv', action='store_true')
    p = clock_sub.add_parser('verify')
    _add_clock_args(p)

    ham = sub.add_parser('ham', help='build, generate or inspect Hamiltonians')
    ham_sub = ham.add_subparsers(dest='action', required=True)
    p = ham_sub.add_parser('build')
    p.add_argument('path')
    p.add_argument('--reduction', choices=['trivial', '3lh'], default='3lh')
    p.add_argument('--d', type=int, default=2)
    p.add_argument('--epsilon', type=float)
    p.add_argument('--coefficients', choices=['default', 'calibrated'], default='default')
    p = ham_sub.add_parser('random')
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--terms', type=int, required=True)
    p.add_argument('--k', type=int, default=3)
    p.add_argument('--max-coefficient', type=float, default=1.0)
    p = ham_sub.add_parser('info')
    p.add_argument('path')

    p = sub.add_parser('spectrum', help='ground energy and LH decision')
    p.add_argument('path')
    p.add_argument('--method', choices=['auto', 'dense', 'lanczos'], default='auto')
    p.add_argument('--e-yes', type=float)
    p.add_argument('--e-no', type=float)

    reduce = sub.add_parser('reduce', help='kSAT->kLH, SAT->3LH, LH->QPF and width sweeps')
    reduce_sub = reduce.add_subparsers(dest='action', required=True)
    p = reduce_sub.add_parser('trivial')
    p.add_argument('path')
    p.add_argument('--emit-ham', action='store_true')
    p = reduce_sub.add_parser('3lh')
    p.add_argument('path')
    p.add_argument('--d', type=int, default=2)
    p.add_argument('--epsilon', type=float)
    p.add_argument('--coefficients', choices=['default', 'calibrated'], default='default')
    p.add_argument('--emit-ham', action='store_true')
    p = reduce_sub.add_parser('qpf')
    p.add_argument('path')
    p.add_argument('--via', choices=['trivial', '3lh'], default='trivial')
    p.add_argument('--backend', choices=BACKENDS, default='exact')
    p.add_argument('--c', type=int, default=1)
    p.add_argument('--beta', type=float)
    p.add_argument('--delta', type=float)
    p = reduce_sub.add_parser('sweep')
    p.add_argument('--ns', type=int, nargs='+', required=True)
    p.add_argument('--clauses-per-var', type=float, default=1.0)
    p.add_argument('--k', type=int, default=3)
    p.add_argument('--d', type=int, default=2)

    p = sub.add_parser('qpf', help='approximate the partition function')
    p.add_argument('path', help='Hamiltonian JSON or a report embedding one')
    p.add_argument('--beta', type=float, required=True)
    p.add_argument('--c', type=int, default=1)
    p.add_argument('--backend', choices=BACKENDS, default='oracle')
    p.add_argument('--confidence', type=float)
    p.add_argument('--compare-exact', action='store_true')
    p.add_argument('--adversarial', action='store_true')

    p = sub.add_parser('pipeline', help='full SAT->LH pipeline report')
    p.add_argument('path')
    p.add_argument('--d', type=int, default=2)
    p.add_argument('--epsilon', type=float)
    p.add_argument('--emit-ham', action='store_true')
    p.add_argument('--coefficients', choices=['default', 'calibrated'], default='default')
    return parser


def dispatch(workbench, args):
    """Route parsed arguments to the matching workbench method"""
    command = args.command
    if command == 'cnf':
        if args.action == 'validate':
            return workbench.cnf_validate(args.path, args.k)
        if args.action == 'solve':
            return workbench.cnf_solve(args.path)
        return workbench.cnf_random(args.n, args.m, args.k)
    if command == 'verifier':
        return workbench.verifier(args.path, args.check_inputs, args.emit_circuit)
    if command == 'clock':
        if args.action == 'table':
            return workbench.clock_table(args.variant, args.T, args.a, args.d, args.csv)
        return workbench.clock_verify(args.variant, args.T, args.a, args.d)
    if command == 'ham':
        if args.action == 'build':
            return workbench.ham_build(args.path, args.reduction, args.d, args.epsilon, args.coefficients)
        if args.action == 'random':
            return workbench.ham_random(args.n, args.terms, args.k, args.max_coefficient)
        return workbench.ham_info(args.path)
    if command == 'spectrum':
        return workbench.spectrum(args.path, args.method, args.e_yes, args.e_no)
    if command == 'reduce':
        if args.action == 'trivial':
            return workbench.reduce(args.path, 'trivial', emit_ham=args.emit_ham)
        if args.action == '3lh':
            return workbench.reduce(args.path, '3lh', args.d, args.epsilon, args.coefficients, args.emit_ham)
        if args.action == 'qpf':
            return workbench.reduce_qpf(args.path, args.via, args.backend, args.c, args.beta, args.delta)
        return workbench.sweep(args.ns, args.clauses_per_var, args.k, args.d)
    if command == 'qpf':
        return workbench.qpf(args.path, args.beta, args.c, args.backend, args.confidence, args.compare_exact,
                             args.adversarial)
    return workbench.pipeline(args.path, args.d, args.epsilon, args.emit_ham, args.coefficients)


def _error_report(args, error, exit_code):
    outputs = {'error': str(error), 'error_type': type(error).__name__}
    if isinstance(error, StageError):
        outputs['stage'] = error.stage
    if isinstance(error, GuardError):
        outputs['guard'] = {'what': error.what, 'value': error.value, 'limit': error.limit}
    return RunReport(args.command, {}, outputs, exit_code=exit_code)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    log_level = os.getenv('LOG_LEVEL', 'INFO').upper()
    logging.basicConfig(level=getattr(logging, log_level, logging.INFO), stream=sys.stderr,
                        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    logger = logging.getLogger(__name__)

    reports = ReportService(record_timing=args.timing)
    reports.start()
    try:
        if args.config:
            settings.load_file(args.config)
        workbench = ReductionWorkbench(args.seed)
        report = dispatch(workbench, args)
    except GuardError as e:
        logger.error(f"Guard exceeded: {e}")
        report = _error_report(args, e, EXIT_IO_OR_GUARD)
    except OSError as e:
        logger.error(f"I/O error: {e}")
        report = _error_report(args, e, EXIT_IO_OR_GUARD)
    except StageError as e:
        logger.error(f"Stage '{e.stage}' failed: {e.cause}")
        code = EXIT_IO_OR_GUARD if isinstance(e.cause, GuardError) else EXIT_REJECTED
        report = _error_report(args, e, code)
    except LhError as e:
        logger.error(f"Rejected: {e}")
        report = _error_report(args, e, EXIT_REJECTED)
    except ArithmeticError as e:
        logger.error(f"Numerical failure: {e}")
        report = _error_report(args, e, EXIT_REJECTED)

    reports.finish(report)
    try:
        reports.write(report, args.out)
    except OSError as e:
        logger.error(f"Could not write report: {e}")
        return EXIT_IO_OR_GUARD
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
