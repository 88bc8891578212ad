"""
constrex - Regressione lineare con vincoli affini nel regime proporzionale
"""

import os
import sys
import logging
from typing import Any, Dict, Optional

import yaml

__version__ = "1.0.0"

LOG_ENV_VAR = 'CONSTREX_LOG'


def load_config(config_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Carica la configurazione dal file YAML

    Args:
        config_path: Percorso del file di configurazione

    Returns:
        Dizionario con la configurazione, completato con i default mancanti
    """

    if config_path is None:
        config_path = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'config.yaml')

    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            config = yaml.safe_load(f) or {}

        # Sostituisce variabili d'ambiente
        config = substitute_env_vars(config)

        logging.getLogger(__name__).info(f"Configurazione caricata da: {config_path}")
        return merge_config(get_default_config(), config)

    except FileNotFoundError:
        logging.getLogger(__name__).warning(
            f"File di configurazione non trovato: {config_path}. Uso configurazione di default."
        )
        return get_default_config()
    except yaml.YAMLError as e:
        logging.getLogger(__name__).error(
            f"Errore nel caricamento configurazione: {e}. Uso configurazione di default."
        )
        return get_default_config()


def substitute_env_vars(config: Any) -> Any:
    """Sostituisce variabili d'ambiente nella configurazione (sintassi ${VAR:default})"""

    def replace_env_vars(obj):
        if isinstance(obj, dict):
            return {k: replace_env_vars(v) for k, v in obj.items()}
        elif isinstance(obj, list):
            return [replace_env_vars(item) for item in obj]
        elif isinstance(obj, str) and obj.startswith('${') and obj.endswith('}'):
            env_var = obj[2:-1]
            default_value = None

            if ':' in env_var:
                env_var, default_value = env_var.split(':', 1)

            return os.getenv(env_var, default_value)
        else:
            return obj

    return replace_env_vars(config)


def merge_config(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Unisce ricorsivamente due configurazioni, con priorità a override"""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = value
    return merged


def get_default_config() -> Dict[str, Any]:
    """Restituisce configurazione di default"""

    return {
        'numerics': {
            'rank_tol': 1e-10,
            'condition_cap': 1e12,
            'feasibility_tol': 1e-8,
            'fallback_identity_gram': False,
        },
        'highdim': {
            'cheb_order': 3,
            'spectral_bounds': [0.2, 5.0],
            'ustat_max_terms': 1e8,
            'quadrature_nodes': 64,
            'root_t_max': 1e6,
        },
        'inference': {
            'level': 0.05,
            'jackknife_method': 'sherman_morrison',
            'sigma_mode': 'known',
        },
        'simulation': {
            'holdout': 100,
            'threads': 1,
            'progress': False,
        },
        'logging': {
            'level': os.getenv(LOG_ENV_VAR, 'WARNING'),
            'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            'file': None,
        },
    }


def setup_logging(logging_config: Dict[str, Any], level_override: Optional[str] = None):
    """Configura il sistema di logging (priorità: level_override, CONSTREX_LOG, file di configurazione)"""

    level_name = level_override or os.getenv(LOG_ENV_VAR) or logging_config.get('level') or 'WARNING'
    level = getattr(logging, str(level_name).upper(), logging.WARNING)
    format_str = logging_config.get('format', '%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    log_file = logging_config.get('file')

    # stdout resta riservato agli output della CLI
    handlers = [logging.StreamHandler()]

    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir and not os.path.exists(log_dir):
            os.makedirs(log_dir, exist_ok=True)
        try:
            handlers.append(logging.FileHandler(log_file, encoding='utf-8'))
        except OSError as e:
            print(f"Impossibile creare file di log {log_file}: {e}", file=sys.stderr)

    logging.basicConfig(
        level=level,
        format=format_str,
        handlers=handlers,
        force=True  # Sovrascrive configurazione esistente
    )

    logging.getLogger(__name__).debug(f"Sistema di logging configurato - livello {logging.getLevelName(level)}")
