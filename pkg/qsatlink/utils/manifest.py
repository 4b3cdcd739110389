"""
Манифест запуска: разрешённые параметры, зерно, версия и контрольные суммы файлов
"""

import json
import hashlib
import logging
from pathlib import Path
from typing import Dict, Any, List

from ..core.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'
MANIFEST_FORMAT = 1


def file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(out_dir: Path, kind: str, config: Dict[str, Any],
                   artifacts: Dict[str, str], version: str) -> Path:
    """
    Записывает manifest.json в каталог результатов

    Args:
        out_dir: Каталог результатов
        kind: Тип запуска ('run' или 'reproduce')
        config: Параметры, определяющие содержимое файлов
        artifacts: Имя файла → описание содержимого
        version: Версия пакета
    """
    out_dir = Path(out_dir)
    entries = [
        {'file': name, 'description': description, 'sha256': file_digest(out_dir / name)}
        for name, description in sorted(artifacts.items())
    ]
    manifest = {
        'format': MANIFEST_FORMAT,
        'tool': 'qsatlink',
        'version': version,
        'kind': kind,
        'config': config,
        'artifacts': entries,
    }
    path = out_dir / MANIFEST_NAME
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(manifest, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write('\n')
    logger.info(f"Манифест записан: {path} ({len(entries)} файлов)")
    return path


def read_manifest(path: Path) -> Dict[str, Any]:
    """
    Читает и проверяет манифест

    Raises:
        ConfigurationError: если файл не читается или неполон
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            manifest = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Не удалось прочитать манифест {path}: {e}") from e

    missing = [key for key in ('format', 'kind', 'config', 'artifacts') if key not in manifest]
    if missing:
        raise ConfigurationError(f"В манифесте {path} нет полей: {', '.join(missing)}")
    if manifest['format'] != MANIFEST_FORMAT:
        raise ConfigurationError(f"Неподдерживаемый формат манифеста: {manifest['format']}")
    if manifest['kind'] not in ('run', 'reproduce'):
        raise ConfigurationError(f"Неизвестный тип запуска в манифесте: {manifest['kind']}")
    return manifest


def verify_artifacts(manifest: Dict[str, Any], directory: Path) -> List[str]:
    """Имена файлов, отсутствующих в каталоге или отличающихся от манифеста"""
    directory = Path(directory)
    mismatched = []
    for entry in manifest['artifacts']:
        path = directory / entry['file']
        if not path.exists() or file_digest(path) != entry['sha256']:
            mismatched.append(entry['file'])
    return mismatched
