"""
Servizio per la lettura e la scrittura dei file CSV e JSON
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd

from constrex.exceptions import DimensionMismatch, ParseError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class FileService:
    """Servizio per leggere matrici e vettori da CSV e scrivere risultati riproducibili"""

    def __init__(self, config: Dict[str, Any]):
        """
        Inizializza il servizio file

        Args:
            config: Sezione io della configurazione
        """
        self.config = config
        self.float_format = config.get('float_format', '%.17g')
        self.na_rep = config.get('na_rep', 'nan')
        logger.debug(f"FileService inizializzato - formato {self.float_format}")

    def _read_frame(self, path: PathLike) -> pd.DataFrame:
        path = Path(path)
        if not path.is_file():
            raise ParseError(f"File non trovato: {path}")
        try:
            frame = pd.read_csv(path, header=None, float_precision='round_trip')
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise ParseError(f"CSV non leggibile {path}: {e}") from e

        numeric = frame.apply(pd.to_numeric, errors='coerce')
        # Prima riga non numerica: intestazione
        if numeric.iloc[0].isna().all() and len(frame) > 1:
            numeric = numeric.iloc[1:]
        if numeric.isna().any().any():
            raise ParseError(f"Valori non numerici in {path}")
        return numeric.astype(float)

    def read_matrix(self, path: PathLike) -> np.ndarray:
        """
        Legge una matrice da CSV (senza intestazione o con una riga di intestazione)

        Args:
            path: Percorso del file

        Returns:
            Array bidimensionale di float

        Raises:
            ParseError: se il file manca o contiene valori non numerici
        """
        matrix = self._read_frame(path).to_numpy()
        logger.debug(f"Letta matrice {matrix.shape} da {path}")
        return matrix

    def read_vector(self, path: PathLike) -> np.ndarray:
        """Legge un vettore da un CSV a singola colonna (o singola riga)"""
        matrix = self._read_frame(path).to_numpy()
        if matrix.ndim == 2 and 1 not in matrix.shape:
            raise DimensionMismatch(f"Atteso un vettore in {path}, trovata matrice {matrix.shape}")
        return matrix.ravel()

    def write_vector(self, vector: np.ndarray, path: PathLike):
        """Scrive un vettore come CSV a singola colonna con 17 cifre significative"""
        frame = pd.DataFrame(np.asarray(vector, dtype=float).reshape(-1, 1))
        self.write_frame(frame, path, header=False)

    def write_frame(self, frame: pd.DataFrame, path: PathLike, header: bool = True):
        self._ensure_parent(path)
        frame.to_csv(path, index=False, header=header, float_format=self.float_format,
                     na_rep=self.na_rep, lineterminator='\n')
        logger.info(f"Scritto {path} ({len(frame)} righe)")

    def read_json(self, path: PathLike) -> Dict[str, Any]:
        """
        Legge un file JSON

        Raises:
            ParseError: se il file manca o non è JSON valido
        """
        path = Path(path)
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except FileNotFoundError as e:
            raise ParseError(f"File non trovato: {path}") from e
        except json.JSONDecodeError as e:
            raise ParseError(f"JSON non valido in {path}: {e}") from e

    def write_json(self, data: Dict[str, Any], path: PathLike):
        self._ensure_parent(path)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, default=_json_default)
            f.write('\n')
        logger.info(f"Scritto {path}")

    @staticmethod
    def _ensure_parent(path: PathLike):
        parent = os.path.dirname(os.fspath(path))
        if parent:
            os.makedirs(parent, exist_ok=True)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    if hasattr(value, 'value'):
        return value.value
    raise TypeError(f"Oggetto non serializzabile: {type(value).__name__}")
