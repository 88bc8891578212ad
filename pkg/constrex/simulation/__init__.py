"""
Simulazioni Monte Carlo ed esperimenti condizionati a X
"""

from .conditional import ConditionalDraws, conditional_error_draws
from .runner import CSV_COLUMNS, EstimatorStats, McReport, ScenarioRunner, reports_summary, reports_to_frame, run_scenario
from .scenario import (
    BetaPrior,
    QRule,
    QRuleKind,
    ScenarioConfig,
    generate_iteration,
    parse_scenario,
    population_covariance,
    stream,
)

__all__ = [
    'BetaPrior',
    'CSV_COLUMNS',
    'ConditionalDraws',
    'EstimatorStats',
    'McReport',
    'QRule',
    'QRuleKind',
    'ScenarioConfig',
    'ScenarioRunner',
    'conditional_error_draws',
    'generate_iteration',
    'parse_scenario',
    'population_covariance',
    'reports_summary',
    'reports_to_frame',
    'run_scenario',
    'stream',
]
