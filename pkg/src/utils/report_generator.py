"""
Report generation for soups, coupling reports and suite results.
Writes JSON documents, CSV tables and SVG pictures.
"""

from pathlib import Path
from typing import Union

import pandas as pd
from pydantic import BaseModel

from .config import Config
from .exceptions import ExportError
from .schema import dump_document


class ReportGenerator:
    """Write experiment outputs under one directory."""

    def __init__(self, output_dir: Union[str, Path] = None):
        """
        Initialize report generator.

        Args:
            output_dir: Directory for relative file names (default Config.OUTPUT_DIRECTORY)
        """
        self.output_dir = Path(output_dir) if output_dir is not None else Config.OUTPUT_DIRECTORY

    def resolve(self, name: Union[str, Path]) -> Path:
        path = Path(name)
        return path if path.is_absolute() else self.output_dir / path

    def _write(self, name: Union[str, Path], text: str) -> str:
        path = self.resolve(name)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            # newline='' keeps the bytes identical across platforms
            with open(path, 'w', encoding='utf-8', newline='') as f:
                f.write(text)
        except OSError as e:
            raise ExportError(str(path), e.strerror or str(e))
        return str(path)

    def write_document(self, name: Union[str, Path], document: BaseModel) -> str:
        """
        Write a schema document as JSON.

        Returns:
            Path to the written file
        """
        return self._write(name, dump_document(document))

    def write_table(self, name: Union[str, Path], table: pd.DataFrame) -> str:
        """Write a table as CSV with 17 significant digits."""
        return self._write(name, table.to_csv(index=False, float_format='%.17g', lineterminator='\n'))

    def write_svg(self, name: Union[str, Path], svg: str) -> str:
        return self._write(name, svg)

    def read_text(self, name: Union[str, Path]) -> str:
        path = self.resolve(name)
        try:
            return path.read_text(encoding='utf-8')
        except OSError as e:
            raise ExportError(str(path), e.strerror or str(e))
