"""
Test per il FileService
"""

import json

import numpy as np
import pandas as pd
import pytest

from constrex.exceptions import DimensionMismatch, ParseError
from constrex.services import FileService


class TestFileService:
    """Test per il FileService"""

    @pytest.fixture
    def file_service(self, app_config):
        """Fixture per FileService"""
        return FileService(app_config.get('io', {}))

    def test_file_service_initialization(self, file_service):
        """Test inizializzazione FileService"""
        assert file_service.float_format == '%.17g'
        assert file_service.na_rep == 'nan'

    def test_read_matrix(self, file_service, tmp_path):
        """Test lettura matrice senza intestazione"""
        path = tmp_path / 'x.csv'
        path.write_text('1,2\n3,4\n5,6\n')
        np.testing.assert_array_equal(file_service.read_matrix(path), [[1, 2], [3, 4], [5, 6]])

    def test_read_matrix_with_header(self, file_service, tmp_path):
        """Test riga di intestazione ignorata"""
        path = tmp_path / 'x.csv'
        path.write_text('x1,x2\n1,2\n3,4\n')
        assert file_service.read_matrix(path).shape == (2, 2)

    def test_non_numeric_values(self, file_service, tmp_path):
        """Test valori non numerici"""
        path = tmp_path / 'x.csv'
        path.write_text('1,2\n3,abc\n')
        with pytest.raises(ParseError):
            file_service.read_matrix(path)

    def test_missing_and_empty_files(self, file_service, tmp_path):
        """Test file mancante o vuoto"""
        with pytest.raises(ParseError):
            file_service.read_matrix(tmp_path / 'manca.csv')
        empty = tmp_path / 'vuoto.csv'
        empty.write_text('')
        with pytest.raises(ParseError):
            file_service.read_matrix(empty)

    def test_read_vector(self, file_service, tmp_path):
        """Test vettore in colonna e in riga"""
        column = tmp_path / 'col.csv'
        column.write_text('1\n2\n3\n')
        row = tmp_path / 'row.csv'
        row.write_text('1,2,3\n')
        np.testing.assert_array_equal(file_service.read_vector(column), [1, 2, 3])
        np.testing.assert_array_equal(file_service.read_vector(row), [1, 2, 3])

    def test_read_vector_rejects_matrix(self, file_service, tmp_path):
        """Test matrice al posto di un vettore"""
        path = tmp_path / 'm.csv'
        path.write_text('1,2\n3,4\n')
        with pytest.raises(DimensionMismatch):
            file_service.read_vector(path)

    def test_write_vector_full_precision(self, file_service, tmp_path):
        """Test 17 cifre significative"""
        path = tmp_path / 'out' / 'beta.csv'
        vector = np.array([1.0 / 3.0, np.pi, -2.0])
        file_service.write_vector(vector, path)
        np.testing.assert_array_equal(file_service.read_vector(path), vector)
        assert path.read_text().splitlines()[2] == '-2'

    def test_vector_round_trip_is_bit_exact(self, file_service, tmp_path):
        """Test 1000 normali standard scritte e rilette senza perdita"""
        path = tmp_path / 'normali.csv'
        vector = np.random.default_rng(31).standard_normal(1000)
        file_service.write_vector(vector, path)
        np.testing.assert_array_equal(file_service.read_vector(path), vector)

    def test_matrix_is_read_bit_exact(self, file_service, tmp_path):
        """Test matrice con 17 cifre significative"""
        path = tmp_path / 'x.csv'
        matrix = np.random.default_rng(32).standard_normal((50, 4))
        np.savetxt(path, matrix, delimiter=',', fmt='%.17g')
        np.testing.assert_array_equal(file_service.read_matrix(path), matrix)

    def test_write_frame_nan(self, file_service, tmp_path):
        """Test NaN scritto come nan"""
        path = tmp_path / 'frame.csv'
        file_service.write_frame(pd.DataFrame({'a': [1.5, np.nan]}), path)
        assert path.read_text() == 'a\n1.5\nnan\n'

    def test_json_round_trip_with_numpy_values(self, file_service, tmp_path):
        """Test serializzazione di tipi numpy"""
        path = tmp_path / 'report.json'
        file_service.write_json({'w': np.array([1.0, 2.0]), 'n': np.int64(3), 'ok': np.bool_(True)}, path)
        assert file_service.read_json(path) == {'w': [1.0, 2.0], 'n': 3, 'ok': True}

    def test_invalid_json(self, file_service, tmp_path):
        """Test JSON non valido"""
        path = tmp_path / 'rotto.json'
        path.write_text('{non json')
        with pytest.raises(ParseError):
            file_service.read_json(path)
        with pytest.raises(ParseError):
            file_service.read_json(tmp_path / 'manca.json')
