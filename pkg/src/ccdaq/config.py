"""Key-value config text files.

Format: one ``key = value`` per line, ``#`` comments, blank lines ignored.
Lists are comma-separated.  Keys may be dotted (``clk.phi1.max = 12.0``).
"""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError


def parse_config_text(text, origin="<string>"):
    """Parse config text into an ordered ``{key: raw-string}`` dict."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{origin}:{lineno}: empty key")
        out[key] = value.strip()
    return out


class ConfigMap:
    """Typed accessors over a parsed key-value map."""

    def __init__(self, values, origin="<config>"):
        self.values = dict(values)
        self.origin = origin

    @classmethod
    def load(cls, path):
        path = Path(path)
        return cls(parse_config_text(path.read_text(), str(path)), str(path))

    @classmethod
    def from_text(cls, text, origin="<string>"):
        return cls(parse_config_text(text, origin), origin)

    def _raw(self, key, default):
        if key in self.values:
            return self.values[key]
        if default is _REQUIRED:
            raise ConfigError(f"{self.origin}: missing required key {key!r}")
        return default

    def get_str(self, key, default=None):
        v = self._raw(key, default)
        return v

    def require_str(self, key):
        return self._raw(key, _REQUIRED)

    def get_int(self, key, default=None):
        v = self._raw(key, default)
        if v is None or isinstance(v, int):
            return v
        try:
            return int(v)
        except ValueError:
            raise ConfigError(f"{self.origin}: {key} = {v!r} is not an integer") from None

    def get_float(self, key, default=None):
        v = self._raw(key, default)
        if v is None or isinstance(v, (int, float)):
            return v
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"{self.origin}: {key} = {v!r} is not a number") from None

    def get_bool(self, key, default=None):
        v = self._raw(key, default)
        if v is None or isinstance(v, bool):
            return v
        low = v.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{self.origin}: {key} = {v!r} is not a boolean")

    def get_float_list(self, key, default=None):
        v = self._raw(key, default)
        if v is None or isinstance(v, (list, tuple)):
            return v
        try:
            return tuple(float(p) for p in v.split(",") if p.strip())
        except ValueError:
            raise ConfigError(f"{self.origin}: {key} = {v!r} is not a number list") from None

    def get_str_list(self, key, default=None):
        v = self._raw(key, default)
        if v is None or isinstance(v, (list, tuple)):
            return v
        return tuple(p.strip() for p in v.split(",") if p.strip())

    def subkeys(self, prefix):
        """All keys under ``prefix.``, with the prefix stripped."""
        plen = len(prefix) + 1
        return {k[plen:]: v for k, v in self.values.items() if k.startswith(prefix + ".")}


class _Required:
    pass


_REQUIRED = _Required()


def format_config(values):
    """Render a key-value dict back to config text."""
    lines = []
    for k, v in values.items():
        if isinstance(v, (list, tuple)):
            v = ", ".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"
