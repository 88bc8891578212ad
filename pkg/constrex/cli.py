"""
Interfaccia a riga di comando di constrex
"""

import copy
import functools
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import click
import numpy as np
from dotenv import load_dotenv

from constrex import __version__, load_config, setup_logging
from constrex.estimators import create_estimator, estimator_config, ustat_moment_vector
from constrex.exceptions import ConstrexError, InputError
from constrex.models.constraints import validate_constraints
from constrex.models.domain import AspectRatios, ConstraintSet, Dataset, EstimatorKind
from constrex.services import (
    FileService,
    InferenceService,
    TheoryService,
    cls_contrast_variance,
    contrast_inference,
    jackknife_contrast_variance,
    parse_theory_params,
)
from constrex.simulation import parse_scenario, reports_summary, reports_to_frame, run_scenario

logger = logging.getLogger(__name__)

LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR']
INFERENCE_KINDS = ['ols', 'cls', 'oracle', 'projected_oracle']


def handle_errors(func):
    """Converte le eccezioni in codici d'uscita: 2 per input non valido, 3 per errori numerici"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ConstrexError as e:
            logger.debug(f"Comando fallito: {e!r}")
            click.echo(f"Errore ({type(e).__name__}): {e}", err=True)
            raise SystemExit(e.exit_code)
        except np.linalg.LinAlgError as e:
            click.echo(f"Errore numerico: {e}", err=True)
            raise SystemExit(3)

    return wrapper


def _load_problem(files: FileService, x_path: str, y_path: str, a_path: Optional[str],
                  c_path: Optional[str], rank_tol: float):
    if (a_path is None) != (c_path is None):
        raise InputError("I file dei vincoli --a e --c vanno forniti insieme")
    data = Dataset(files.read_matrix(x_path), files.read_vector(y_path))
    if a_path is None:
        return data, ConstraintSet.empty(data.p)
    cs = validate_constraints(files.read_matrix(a_path), files.read_vector(c_path), rank_tol)
    return data, cs


def _rank_tol(config: Dict[str, Any]) -> float:
    return float(config.get('numerics', {}).get('rank_tol', 1e-10))


@click.group()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
              help='File di configurazione YAML')
@click.option('--log-level', type=click.Choice(LOG_LEVELS, case_sensitive=False), default=None,
              help='Livello di logging (sovrascrive CONSTREX_LOG)')
@click.version_option(__version__, prog_name='constrex')
@click.pass_context
def cli(ctx, config_path, log_level):
    """Regressione lineare con vincoli affini nel regime proporzionale"""
    load_dotenv()
    config = load_config(config_path)
    setup_logging(config.get('logging', {}), log_level)
    ctx.obj = {'config': config, 'files': FileService(config.get('io', {}))}


@cli.command()
@click.option('--x', 'x_path', required=True, type=click.Path(), help='Disegno X (CSV n × p)')
@click.option('--y', 'y_path', required=True, type=click.Path(), help='Risposta y (CSV)')
@click.option('--a', 'a_path', type=click.Path(), default=None, help='Matrice dei vincoli A (CSV q × p)')
@click.option('--c', 'c_path', type=click.Path(), default=None, help='Vettore dei vincoli c (CSV)')
@click.option('--kind', type=click.Choice([k.value for k in EstimatorKind]), default='cls', show_default=True)
@click.option('--sigma', 'sigma_path', type=click.Path(), default=None, help='Σ di popolazione (CSV p × p)')
@click.option('--out', 'out_path', required=True, type=click.Path(), help='CSV di output per β̂')
@click.option('--fallback-identity-gram', is_flag=True, help='Usa Σ̂_{n,inv} = I se Σ̂ₙ è singolare')
@click.option('--cls-method', type=click.Choice(['lagrangian', 'null_space', 'kkt']), default=None)
@click.option('--cheb-order', type=int, default=None, help='Ordine J del polinomio di Chebyshev')
@click.option('--spectral-bounds', type=float, nargs=2, default=None, help='Intervallo spettrale (a, b)')
@click.option('--link', type=click.Choice(['identity', 'logistic']), default=None)
@click.pass_context
@handle_errors
def estimate(ctx, x_path, y_path, a_path, c_path, kind, sigma_path, out_path, fallback_identity_gram,
             cls_method, cheb_order, spectral_bounds, link):
    """Stima β e scrive il vettore in CSV con un file JSON di diagnostica"""
    config, files = ctx.obj['config'], ctx.obj['files']
    kind = EstimatorKind(kind)
    data, cs = _load_problem(files, x_path, y_path, a_path, c_path, _rank_tol(config))

    sigma = files.read_matrix(sigma_path) if sigma_path else None
    if kind.needs_sigma and sigma is None:
        raise InputError(f"Lo stimatore {kind.value} richiede --sigma")

    settings = estimator_config(config)
    overrides = {
        'fallback_identity_gram': fallback_identity_gram or None,
        'cls_method': cls_method,
        'cheb_order': cheb_order,
        'spectral_bounds': list(spectral_bounds) if spectral_bounds else None,
        'link': link,
    }
    settings.update({key: value for key, value in overrides.items() if value is not None})

    result = create_estimator(kind, settings).fit(data, cs, sigma)
    files.write_vector(result.beta_hat, out_path)
    files.write_json(result.to_dict(), Path(out_path).with_suffix('.json'))
    logger.info(f"Stima {kind.value} scritta in {out_path}")


@cli.command()
@click.option('--x', 'x_path', required=True, type=click.Path())
@click.option('--y', 'y_path', required=True, type=click.Path())
@click.option('--a', 'a_path', type=click.Path(), default=None)
@click.option('--c', 'c_path', type=click.Path(), default=None)
@click.option('--kind', type=click.Choice(INFERENCE_KINDS), default='cls', show_default=True)
@click.option('--sigma', 'sigma_path', type=click.Path(), default=None, help='Σ di popolazione (CSV p × p)')
@click.option('--sigma-sq', type=float, default=None, help='σ² nota; se assente viene stimata')
@click.option('--variance', type=click.Choice(['asymptotic', 'jackknife']), default='asymptotic', show_default=True)
@click.option('--jackknife-method', type=click.Choice(['sherman_morrison', 'refit']), default=None)
@click.option('--fallback-identity-gram', is_flag=True, help='Usa Σ̂_{n,inv} = I se Σ̂ₙ è singolare')
@click.option('--contrast', 'contrast_path', type=click.Path(), default=None, help='Contrasto v (CSV)')
@click.option('--level', type=float, default=None, help='Livello dei test (default 0.05)')
@click.option('--threads', type=int, default=None)
@click.option('--out', 'out_path', required=True, type=click.Path(), help='CSV della tabella di inferenza')
@click.pass_context
@handle_errors
def infer(ctx, x_path, y_path, a_path, c_path, kind, sigma_path, sigma_sq, variance, jackknife_method,
          fallback_identity_gram, contrast_path, level, threads, out_path):
    """Intervalli di confidenza e test per coordinata con correzione di Holm"""
    config = copy.deepcopy(ctx.obj['config'])
    files = ctx.obj['files']
    if jackknife_method:
        config.setdefault('inference', {})['jackknife_method'] = jackknife_method
    if fallback_identity_gram:
        config.setdefault('numerics', {})['fallback_identity_gram'] = True
    if threads:
        config.setdefault('simulation', {})['threads'] = threads

    data, cs = _load_problem(files, x_path, y_path, a_path, c_path, _rank_tol(config))
    sigma = files.read_matrix(sigma_path) if sigma_path else None

    service = InferenceService(config)
    report = service.infer(data, cs, kind=kind, sigma_matrix=sigma, sigma_sq=sigma_sq,
                           variance=variance, level=level)
    files.write_frame(report.to_frame(), out_path)

    sidecar = {
        'kind': report.estimate.kind.value,
        'variance_kind': report.variance.kind.value,
        'approximate': report.variance.approximate,
        'sigma_sq': report.sigma_sq,
        'level': report.level,
        'rejected': [row.index for row in report.table if row.rejected],
    }
    if contrast_path:
        if report.estimate.kind not in (EstimatorKind.OLS, EstimatorKind.CLS):
            raise InputError("L'inferenza su contrasti è disponibile solo per OLS e CLS")
        v = files.read_vector(contrast_path)
        used = cs if report.estimate.kind is EstimatorKind.CLS else ConstraintSet.empty(data.p)
        ratios = AspectRatios.from_dims(data.n, data.p, used.q)
        if variance == 'jackknife':
            contrast_var = jackknife_contrast_variance(data, used, ratios, v, service.jackknife_method)
        else:
            if sigma is None:
                raise InputError("Il contrasto con varianza asintotica richiede --sigma")
            contrast_var = cls_contrast_variance(v, report.sigma_sq, sigma, used, ratios)
        result = contrast_inference(v, report.estimate.beta_hat, contrast_var, data.n, report.level)
        sidecar['contrast'] = {
            'estimate': result.estimate,
            'std_error': result.std_error,
            'ci_low': result.ci_low,
            'ci_high': result.ci_high,
            'p_value': result.p_value,
        }
    files.write_json(sidecar, Path(out_path).with_suffix('.json'))


@cli.command()
@click.option('--params', 'params_path', required=True, type=click.Path(), help='Parametri JSON')
@click.option('--out', 'out_path', type=click.Path(), default=None, help='File JSON (default: stdout)')
@click.pass_context
@handle_errors
def theory(ctx, params_path, out_path):
    """Rischio asintotico e guadagno atteso dalle formule chiuse"""
    config, files = ctx.obj['config'], ctx.obj['files']
    params = parse_theory_params(files.read_json(params_path))
    report = TheoryService(config, files).report(params, base_dir=Path(params_path).parent)
    if out_path:
        files.write_json(report, out_path)
    else:
        click.echo(json.dumps(report, indent=2))


@cli.command()
@click.option('--scenario', 'scenario_path', required=True, type=click.Path(), help='Scenario JSON')
@click.option('--out', 'out_path', required=True, type=click.Path(), help='CSV dei risultati')
@click.option('--threads', type=int, default=None, help='Thread per le iterazioni')
@click.option('--iterations', type=int, default=None, help='Sovrascrive il numero di iterazioni')
@click.option('--seed', type=int, default=None, help='Sovrascrive il seme')
@click.option('--summary', 'summary_path', type=click.Path(), default=None, help='Riepilogo JSON aggiuntivo')
@click.option('--progress/--no-progress', default=None, help='Barra di avanzamento')
@click.pass_context
@handle_errors
def simulate(ctx, scenario_path, out_path, threads, iterations, seed, summary_path, progress):
    """Esegue uno scenario Monte Carlo e scrive il CSV dei risultati"""
    config, files = ctx.obj['config'], ctx.obj['files']
    raw = files.read_json(scenario_path)
    if iterations is not None:
        raw['iterations'] = iterations
    if seed is not None:
        raw['seed'] = seed
    cfg = parse_scenario(raw)

    simulation_config = config.get('simulation', {})
    workers = threads if threads is not None else int(simulation_config.get('threads', 1))
    if workers < 1:
        raise InputError(f"Numero di thread non valido: {workers}")
    show_progress = bool(simulation_config.get('progress', False)) if progress is None else progress

    reports = run_scenario(cfg, config, workers=workers, progress=show_progress)
    files.write_frame(reports_to_frame(reports), out_path)
    if summary_path:
        files.write_json(reports_summary(cfg, reports), summary_path)


@cli.command()
@click.option('--x', 'x_path', required=True, type=click.Path())
@click.option('--y', 'y_path', required=True, type=click.Path())
@click.option('--ell', type=int, required=True, help='Ordine ℓ ≥ 0')
@click.option('--k', type=int, default=0, show_default=True, help='Coordinata (indice da 0)')
@click.option('--all', 'all_coords', is_flag=True, help='Stampa tutte le coordinate come CSV')
@click.option('--threads', type=int, default=1, show_default=True)
@click.pass_context
@handle_errors
def ustat(ctx, x_path, y_path, ell, k, all_coords, threads):
    """U-statistica β̂_k^{(ℓ)} per enumerazione delle tuple di indici distinti"""
    config, files = ctx.obj['config'], ctx.obj['files']
    if ell < 0:
        raise InputError(f"Ordine ℓ negativo: {ell}")
    data = Dataset(files.read_matrix(x_path), files.read_vector(y_path))
    max_terms = float(config.get('highdim', {}).get('ustat_max_terms', 1e8))
    values = ustat_moment_vector(data, ell, max_terms=max_terms, workers=threads)
    if all_coords:
        for value in values:
            click.echo(f"{value:.17g}")
        return
    if not (0 <= k < data.p):
        raise InputError(f"Coordinata {k} fuori da [0, {data.p})")
    click.echo(f"{values[k]:.17g}")


def main():
    """Punto d'ingresso della console"""
    cli(prog_name='constrex')


if __name__ == '__main__':
    main()
