import os
import logging
import psutil

from typing import Dict, Any
from barropt_logging.logger_config import logger

from levy.levy_model import LevyModel
from levy.reward import RewardFunction
from levy.scale_functions import ScaleFunctions
from solve.barrier_set import BarrierSet, ValueFunction
from solve.one_barrier import SearchOptions, find_bstar
from solve.multibarrier import solve, sweep
from verify.hjb import HjbGridSpec, check_hjb
from verify.monte_carlo import SimConfig, simulate_value
from utils.config_utils import load_config, build_options, section
from utils.output import make_header, write_json, write_csv


logger = logging.getLogger('process.BarrierProcessor')


class BarrierProcessor:

    def __init__(self, config_path: str, threads: int = None):
        self.config_path = config_path
        self.config = load_config(config_path)
        global_config = self.config['global']
        self.output_dir = global_config.get('output_dir', 'output')
        self.overwrite = bool(global_config.get('overwrite', False))
        self.search = build_options(SearchOptions, section(self.config, 'search'))
        self.hjb = build_options(HjbGridSpec, section(self.config, 'hjb'))
        self.sim = build_options(SimConfig, section(self.config, 'simulation'),
                                 threads=threads or global_config.get('threads'))
        self.steps = [step['name'] for step in self.config.get('processing_steps', []) if step.get('enabled', True)]
        self.base_dir = os.path.dirname(os.path.abspath(config_path))

    def _path(self, relative):
        return relative if os.path.isabs(relative) else os.path.join(self.base_dir, relative)

    def _output(self, case_name, suffix):
        return os.path.join(self._path(self.output_dir), f"{case_name}_{suffix}")

    def _exists(self, path):
        if not self.overwrite and os.path.exists(path):
            logger.info(f"   {path} exists; skipped")
            return True
        return False

    def run_all(self):
        summary = {}
        for case_name, case_config in self.config.get('cases', {}).items():
            summary[case_name] = self.run_case(case_name, case_config)
        return summary

    def run_case(self, case_name: str, case_config: Dict[str, Any]):
        logger.info('=' * 80)
        logger.info(f"Case {case_name}")
        model = LevyModel.from_file(self._path(case_config['model']))
        reward = RewardFunction.from_file(self._path(case_config['reward']))
        sf = ScaleFunctions(model)
        header = make_header('batch', {'case': case_name, 'model': model.to_dict(), 'reward': reward.to_dict(),
                                       'search': self.search.__dict__, 'hjb': self.hjb.__dict__,
                                       'simulation': self.sim.__dict__})
        result = {}
        bset = None

        if 'solve' in self.steps:
            logger.info('-' * 80)
            logger.info(f"   solve")
            if model.is_brownian:
                solution = solve(sf, reward, self.search)
                bset = solution.barriers
                result['solve'] = solution.to_dict()
                path = self._output(case_name, 'trace.csv')
                if not self._exists(path):
                    write_csv(path, solution.trace, header)
            else:
                one = find_bstar(sf, reward, self.search)
                bset = BarrierSet((one.bstar,))
                result['solve'] = one.to_dict()
            path = self._output(case_name, 'solve.json')
            if not self._exists(path):
                write_json(path, header, result['solve'])

        if bset is None and case_config.get('barriers'):
            bset = BarrierSet.parse(case_config['barriers'])

        if 'verify' in self.steps and bset is not None:
            logger.info('-' * 80)
            logger.info(f"   verify {list(bset.levels)}")
            report = check_hjb(model, ValueFunction(sf, reward, bset), self.hjb)
            result['verify'] = report.to_dict()
            path = self._output(case_name, 'verify.json')
            if not self._exists(path):
                write_json(path, header, result['verify'])
                write_csv(self._output(case_name, 'verify.csv'), report.to_frame(), header)

        if 'simulate' in self.steps and bset is not None:
            logger.info('-' * 80)
            logger.info(f"   simulate")
            value = ValueFunction(sf, reward, bset)
            rows = []
            for x0 in case_config.get('x0', []):
                estimate = simulate_value(model, reward, bset, self.sim.replace(x0=float(x0)))
                row = estimate.to_dict()
                row.update(x0=float(x0), analytic=float(value(float(x0))))
                rows.append(row)
                logger.info(f"      x0={x0}: simulated {estimate.mean:.6g} +/- {estimate.stderr:.2g}, "
                            f"analytic {row['analytic']:.6g}")
            result['simulate'] = rows
            path = self._output(case_name, 'simulate.json')
            if not self._exists(path):
                write_json(path, header, rows)

        if 'sweep' in self.steps and bset is not None and 'sweep' in case_config:
            if not model.is_brownian:
                logger.info(f"   sweep skipped for a jump model")
            else:
                logger.info('-' * 80)
                logger.info(f"   sweep")
                base = bset.truncated(0)
                surface, curve = sweep(sf, reward, base, case_config['sweep']['v'], case_config['sweep']['z'],
                                       self.search)
                path = self._output(case_name, 'sweep_surface.csv')
                if not self._exists(path):
                    write_csv(path, surface, header)
                    write_csv(self._output(case_name, 'sweep_curve.csv'), curve, header)
                result['sweep'] = {'rows': len(surface), 'curve_points': len(curve)}

        return result


if __name__ == "__main__":

    # Get the current process ID
    process = psutil.Process(os.getpid())

    # Create a batch processor
    barrier_processor = BarrierProcessor('config.yaml')
    summary = barrier_processor.run_all()

    # Show result summary
    logger.info('=' * 80)
    logger.info(f"Result Summary")
    for case_name, result in summary.items():
        logger.info(f"   {case_name}")
        for step, content in result.items():
            if step == 'solve':
                logger.info(f"      barriers: {content.get('barriers', [content.get('bstar')])}")
            elif step == 'verify':
                logger.info(f"      HJB verdict: {content['verdict']}")

    # Get memory usage in bytes, convert to MB
    memory_usage = process.memory_info().rss / 1024 / 1024
    logger.info(f"Memory usage: {memory_usage:.2f} MB")
