"""
Test per configurazione, logging ed eccezioni
"""

import logging

import pytest

from constrex import LOG_ENV_VAR, get_default_config, load_config, merge_config, setup_logging, substitute_env_vars
from constrex.exceptions import (
    ConfigInvalid,
    ConstrexError,
    InputError,
    NoRoot,
    NumericalError,
    QNotLessThanP,
    SingularGram,
)


class TestLoadConfig:
    """Test per il caricamento della configurazione"""

    def test_missing_file_returns_defaults(self, tmp_path):
        """Test file mancante: si usano i default"""
        config = load_config(str(tmp_path / 'assente.yaml'))
        assert config == get_default_config()

    def test_partial_file_is_merged(self, tmp_path):
        """Test merge con i default"""
        path = tmp_path / 'config.yaml'
        path.write_text("inference:\n  level: 0.1\n", encoding='utf-8')
        config = load_config(str(path))
        assert config['inference']['level'] == 0.1
        assert config['inference']['jackknife_method'] == 'sherman_morrison'
        assert config['numerics']['condition_cap'] == 1e12

    def test_invalid_yaml_returns_defaults(self, tmp_path):
        """Test YAML non valido"""
        path = tmp_path / 'config.yaml'
        path.write_text("numerics: [1, 2\n", encoding='utf-8')
        assert load_config(str(path)) == get_default_config()

    def test_env_substitution(self, monkeypatch):
        """Test sintassi ${VAR:default}"""
        monkeypatch.setenv('CONSTREX_TEST_THREADS', '4')
        monkeypatch.delenv('CONSTREX_TEST_MISSING', raising=False)
        config = substitute_env_vars({
            'a': '${CONSTREX_TEST_THREADS:1}',
            'b': ['${CONSTREX_TEST_MISSING:7}'],
            'c': 'testo',
        })
        assert config == {'a': '4', 'b': ['7'], 'c': 'testo'}

    def test_merge_is_recursive(self):
        """Test merge ricorsivo"""
        merged = merge_config({'x': {'a': 1, 'b': 2}}, {'x': {'b': 3}})
        assert merged == {'x': {'a': 1, 'b': 3}}

    def test_repository_config_loads(self):
        """Test config.yaml del repository"""
        config = load_config()
        assert config['highdim']['quadrature_nodes'] == 64
        assert int(config['simulation']['threads']) >= 1


class TestLogging:
    """Test per setup_logging"""

    def test_env_variable_overrides_config(self, monkeypatch):
        """Test priorità di CONSTREX_LOG"""
        monkeypatch.setenv(LOG_ENV_VAR, 'DEBUG')
        setup_logging({'level': 'ERROR'})
        assert logging.getLogger().level == logging.DEBUG

    def test_explicit_override_wins(self, monkeypatch):
        """Test priorità dell'override esplicito"""
        monkeypatch.setenv(LOG_ENV_VAR, 'DEBUG')
        setup_logging({'level': 'INFO'}, level_override='ERROR')
        assert logging.getLogger().level == logging.ERROR

    def test_file_handler(self, tmp_path, monkeypatch):
        """Test scrittura su file"""
        monkeypatch.delenv(LOG_ENV_VAR, raising=False)
        log_file = tmp_path / 'logs' / 'constrex.log'
        setup_logging({'level': 'INFO', 'file': str(log_file)})
        logging.getLogger('constrex.test').info("messaggio di prova")
        for handler in logging.getLogger().handlers:
            handler.flush()
        assert 'messaggio di prova' in log_file.read_text(encoding='utf-8')


class TestExceptions:
    """Test per la gerarchia delle eccezioni"""

    def test_exit_codes(self):
        """Test codici d'uscita"""
        assert QNotLessThanP("x").exit_code == 2
        assert ConfigInvalid("x").exit_code == 2
        assert SingularGram("x").exit_code == 3
        assert NoRoot("x").exit_code == 3

    def test_hierarchy(self):
        """Test compatibilità con le eccezioni standard"""
        assert issubclass(InputError, ValueError)
        assert issubclass(NumericalError, ArithmeticError)
        with pytest.raises(ConstrexError):
            raise SingularGram("singolare")
