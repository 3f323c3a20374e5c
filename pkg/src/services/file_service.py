# File Service - Reads and writes chain specs, distance profiles, tables and reports.
import io
import json
import math
import os
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import pandas as pd

from resources.resource_config import VALID_CHAIN_EXTENSIONS
from src.model.distance_profile import DistanceKind, DistanceProfile
from src.model.errors import ChainFormatError, DimensionMismatch, OutOfRange
from src.model.markov_chain import ChainSpec
from src.services.log_service import get_logger

# Initialize logger for this module
logger = get_logger(__name__)

PathLike = Union[str, Path]

FLOAT_FORMAT = '%.17g'
KIND_PREFIX = '# kind='
# Rates below this are written in log form so they survive the round trip.
LOG_RATE_FLOOR = math.log(1e-300)


def _to_builtin(value: Any) -> Any:
    # json.dumps fallback for numpy scalars/arrays, paths and dataclasses.
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    if is_dataclass(value):
        return asdict(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


class FileService:
    # A service class dedicated to all file-related operations.

    # ------------------------------------------------------------ chain specs

    @staticmethod
    def chain_to_dict(chain: ChainSpec) -> dict:
        rates = []
        for i, j, log_rate in zip(chain.sources, chain.targets, chain.log_rates):
            rate = math.exp(log_rate)
            exact = log_rate >= LOG_RATE_FLOOR and math.log(rate) == log_rate
            rates.append([int(i), int(j), rate if exact else {'log': float(log_rate)}])
        return {'states': list(chain.state_labels), 'rates': rates}

    @staticmethod
    def _parse_rate(value: Any, where: str) -> float:
        # Returns the natural log of the rate.
        if isinstance(value, dict):
            if set(value) != {'log'} or isinstance(value['log'], bool) or not isinstance(value['log'], (int, float)):
                raise ChainFormatError(where, 'log-form rate must be {"log": <number>}')
            if not math.isfinite(value['log']):
                raise ChainFormatError(where, 'log rate must be finite')
            return float(value['log'])
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ChainFormatError(where, f"rate must be a number, got {type(value).__name__}")
        if not (value > 0 and math.isfinite(value)):
            raise ChainFormatError(where, f"rate must be positive and finite, got {value}")
        return math.log(value)

    @staticmethod
    def chain_from_dict(payload: Any, source: str = '<memory>') -> ChainSpec:
        """
        Validate a decoded chain document and build the ChainSpec.

        Args:
            payload: Decoded JSON, ``{"states": [...], "rates": [[i, j, rate], ...]}``.
            source: Name used in error locations.

        Returns:
            The chain. Endpoints may be indices or state labels.
        """
        if not isinstance(payload, dict):
            raise ChainFormatError(source, 'top level must be an object')
        for key in ('states', 'rates'):
            if key not in payload:
                raise ChainFormatError(f"{source}:{key}", 'missing field')
        states = payload['states']
        if not isinstance(states, list) or not all(isinstance(s, (str, int)) for s in states):
            raise ChainFormatError(f"{source}:states", 'must be a list of labels')
        labels = [str(s) for s in states]
        if len(set(labels)) != len(labels):
            raise ChainFormatError(f"{source}:states", 'labels must be unique')
        index = {label: i for i, label in enumerate(labels)}

        rates = payload['rates']
        if not isinstance(rates, list):
            raise ChainFormatError(f"{source}:rates", 'must be a list of [i, j, rate] triples')
        edges = []
        for k, entry in enumerate(rates):
            where = f"{source}:rates[{k}]"
            if not isinstance(entry, list) or len(entry) != 3:
                raise ChainFormatError(where, 'must be a [i, j, rate] triple')
            ends = []
            for position, end in enumerate(entry[:2]):
                if isinstance(end, bool):
                    raise ChainFormatError(f"{where}[{position}]", 'state must be an index or label')
                if isinstance(end, int) and 0 <= end < len(labels):
                    ends.append(end)
                elif isinstance(end, str) and end in index:
                    ends.append(index[end])
                else:
                    raise ChainFormatError(f"{where}[{position}]", f"unknown state {end!r}")
            edges.append((ends[0], ends[1], FileService._parse_rate(entry[2], f"{where}[2]")))
        try:
            return ChainSpec.from_log_edges(labels, edges)
        except (OutOfRange, DimensionMismatch) as e:
            raise ChainFormatError(source, str(e)) from e

    @staticmethod
    def load_chain(path: PathLike) -> ChainSpec:
        # Reads a chain-spec JSON file; malformed input raises ChainFormatError.
        path = str(path)
        try:
            with open(path, 'r', encoding='utf-8') as f:
                text = f.read()
        except OSError as e:
            raise ChainFormatError(path, f"cannot read file: {e.strerror or e}") from e
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as e:
            raise ChainFormatError(f"{path}:{e.lineno}:{e.colno}", e.msg) from e
        chain = FileService.chain_from_dict(payload, path)
        logger.info(f"Loaded {chain!r} from {path}")
        return chain

    @staticmethod
    def save_chain(chain: ChainSpec, path: PathLike) -> Optional[str]:
        return FileService.save_text(FileService.to_json(FileService.chain_to_dict(chain)), path)

    @staticmethod
    def is_valid_chain_file(file_path: PathLike) -> bool:
        # Validates that a path exists and carries a chain-spec extension.
        if not os.path.exists(file_path):
            logger.warning(f"Validation failed: File does not exist at path: {file_path}")
            return False
        _, ext = os.path.splitext(str(file_path))
        is_valid = ext.lower() in VALID_CHAIN_EXTENSIONS
        if not is_valid:
            logger.warning(f"Validation failed: File with extension '{ext}' is not a chain spec.")
        return is_valid

    # ---------------------------------------------------------------- profiles

    @staticmethod
    def profile_to_csv(profile: DistanceProfile) -> str:
        body = profile.to_frame().to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
        return f"{KIND_PREFIX}{profile.kind.value}\n{body}"

    @staticmethod
    def profile_from_csv(text: str, source: str = '<memory>') -> DistanceProfile:
        first = text.split('\n', 1)[0].strip()
        if not first.startswith(KIND_PREFIX):
            raise ChainFormatError(f"{source}:1:1", f"expected '{KIND_PREFIX}<kind>' header line")
        kind = DistanceKind.parse(first[len(KIND_PREFIX):])
        frame = pd.read_csv(io.StringIO(text), comment='#', float_precision='round_trip')
        if list(frame.columns) != ['time', 'value']:
            raise ChainFormatError(f"{source}:2", f"expected columns time,value, got {','.join(frame.columns)}")
        return DistanceProfile.from_frame(kind, frame)

    @staticmethod
    def save_profile_csv(profile: DistanceProfile, path: PathLike) -> Optional[str]:
        return FileService.save_text(FileService.profile_to_csv(profile), path)

    @staticmethod
    def load_profile_csv(path: PathLike) -> DistanceProfile:
        with open(path, 'r', encoding='utf-8') as f:
            return FileService.profile_from_csv(f.read(), str(path))

    @staticmethod
    def save_profile_json(profile: DistanceProfile, path: PathLike) -> Optional[str]:
        return FileService.save_text(FileService.to_json(profile.to_dict()), path)

    @staticmethod
    def load_profile_json(path: PathLike) -> DistanceProfile:
        with open(path, 'r', encoding='utf-8') as f:
            return DistanceProfile.from_dict(json.load(f))

    # ------------------------------------------------------ tables and reports

    @staticmethod
    def table_to_csv(frame: pd.DataFrame) -> str:
        return frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')

    @staticmethod
    def write_table(frame: pd.DataFrame, path: PathLike) -> Optional[str]:
        return FileService.save_text(FileService.table_to_csv(frame), path)

    @staticmethod
    def to_json(payload: Any) -> str:
        """Stable JSON text: dataclass field order, two-space indent, trailing newline."""
        if is_dataclass(payload):
            payload = payload.to_dict() if hasattr(payload, 'to_dict') else asdict(payload)
        return json.dumps(payload, indent=2, default=_to_builtin) + '\n'

    @staticmethod
    def save_json(payload: Any, path: PathLike) -> Optional[str]:
        return FileService.save_text(FileService.to_json(payload), path)

    @staticmethod
    def save_text(text_content: str, file_path: PathLike) -> Optional[str]:
        # Writes text to a file, creating parent directories; None on failure.
        try:
            Path(file_path).parent.mkdir(parents=True, exist_ok=True)
            with open(file_path, 'w', encoding='utf-8', newline='') as f:
                f.write(text_content)
            logger.info(f"Content successfully saved to: {file_path}")
            return str(file_path)
        except OSError as e:
            logger.error(f"An OSError occurred while saving file to {file_path}: {e}", exc_info=True)
            return None
