"""Content-addressed result cache and atomic file writes.

Keys are sha256 digests of canonical JSON holding the tool version, the
potential spec and every solver parameter, so that stale entries are never
reused silently.  Spectral results go to ``<key>.npz``, point records to
``<key>.json``.  Every write is temp file + rename.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .oscillatory import SpectralResult

log = logging.getLogger(__name__)

ENV_VAR = "OSCILLOSPEC_CACHE"


def _canonical(obj):
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        # repr round-trips doubles exactly
        return repr(float(obj))
    return obj


def cache_key(kind: str, **fields) -> str:
    blob = json.dumps({"kind": kind, "version": __version__, "fields": _canonical(fields)},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def atomic_write_bytes(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode())


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def clean_floats(obj):
    """NaN and inf become None so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: clean_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean_floats(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not math.isfinite(float(obj)):
        return None
    return obj


def resolve_cache_dir(cli_value=None):
    """OSCILLOSPEC_CACHE wins over --cache-dir; None disables caching."""
    env = os.environ.get(ENV_VAR)
    if env:
        return Path(env)
    return Path(cli_value) if cli_value else None


class ResultCache:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0

    def _path(self, key, ext):
        return self.root / key[:2] / f"{key}.{ext}"

    # -- spectral results ------------------------------------------------
    def get_spectral(self, key: str):
        p = self._path(key, "npz")
        if not p.exists():
            self.misses += 1
            return None
        try:
            with np.load(p, allow_pickle=False) as z:
                if str(z["version"]) != __version__:
                    self.misses += 1
                    return None
                meta = json.loads(str(z["meta"]))
                res = SpectralResult(z["eigenvalues"].copy(), z["eigenvectors"].copy(), z["modes"].copy(),
                                     float(z["L"]), meta)
        except (OSError, ValueError, KeyError) as exc:
            log.warning("ignoring unreadable cache entry %s (%s)", p.name, exc)
            self.misses += 1
            return None
        self.hits += 1
        return res

    def put_spectral(self, key: str, res: SpectralResult):
        buf = io.BytesIO()
        np.savez(buf, eigenvalues=res.eigenvalues, eigenvectors=res.eigenvectors, modes=res.modes,
                 L=np.float64(res.L), meta=np.str_(json.dumps(clean_floats(res.meta), default=_json_default)),
                 version=np.str_(__version__))
        atomic_write_bytes(self._path(key, "npz"), buf.getvalue())

    # -- JSON records ----------------------------------------------------
    def get_json(self, key: str):
        p = self._path(key, "json")
        if not p.exists():
            self.misses += 1
            return None
        try:
            blob = json.loads(p.read_text())
        except (OSError, ValueError):
            self.misses += 1
            return None
        if blob.get("version") != __version__:
            self.misses += 1
            return None
        self.hits += 1
        return blob["payload"]

    def put_json(self, key: str, payload):
        text = json.dumps({"version": __version__, "payload": payload}, default=_json_default)
        atomic_write_text(self._path(key, "json"), text)


def cached_spectral(cache: ResultCache | None, kind: str, compute, **fields) -> SpectralResult:
    if cache is None:
        return compute()
    key = cache_key(kind, **fields)
    hit = cache.get_spectral(key)
    if hit is not None:
        return hit
    res = compute()
    cache.put_spectral(key, res)
    return res
