"""External device plug-ins.

Devices (shutter, filter turret, comparison lamp, ...) run as separate
processes speaking a three-verb line protocol on stdin/stdout:

    DESCRIBE            ->  OK kind=<kind> keys=<k1,k2,...>
    SET <key> <value>   ->  OK
    GET <key>           ->  OK <value>

Any failure is ``ERR <code> <message>``.  Plug-ins are registered in the
server config as ``device.<name> = <command line>``.
"""

from __future__ import annotations

import shlex
import subprocess
import threading

from ..errors import CcdaqError


class DeviceError(CcdaqError):
    code = "device"


class DeviceClient:
    """One spawned plug-in process."""

    def __init__(self, name, argv):
        if isinstance(argv, str):
            argv = shlex.split(argv)
        self.name = name
        self._lock = threading.Lock()
        self._proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1)

    def _request(self, line):
        with self._lock:
            if self._proc.poll() is not None:
                raise DeviceError(f"{self.name}: plug-in process exited")
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
            reply = self._proc.stdout.readline().rstrip("\n")
        if reply.startswith("OK"):
            return reply[2:].strip()
        if reply.startswith("ERR"):
            raise DeviceError(f"{self.name}: {reply[3:].strip()}")
        raise DeviceError(f"{self.name}: bad reply {reply!r}")

    def describe(self) -> dict:
        out = {}
        for pair in self._request("DESCRIBE").split():
            k, _, v = pair.partition("=")
            out[k] = v
        return out

    def set(self, key, value):
        self._request(f"SET {key} {value}")

    def get(self, key) -> str:
        return self._request(f"GET {key}")

    def close(self):
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            self._proc.terminate()
            self._proc.wait(timeout=2)


def load_devices(cfg) -> dict:
    """Spawn every ``device.<name>`` entry from a server ConfigMap."""
    return {name: DeviceClient(name, argv)
            for name, argv in cfg.subkeys("device").items()}
