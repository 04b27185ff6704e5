"""Reference device plug-in: an in-memory mechanism per kind.

Run as ``python3 -m ccdaq.server.device_stub --kind shutter``.  Speaks
the DESCRIBE / SET / GET line protocol on stdin/stdout.
"""

import argparse
import sys

KINDS = {
    "shutter": {"position": ("closed", "open")},
    "filter": {"position": tuple(str(i) for i in range(8))},
    "lamp": {"power": ("off", "on")},
}


def serve(kind, registers):
    state = {k: allowed[0] for k, allowed in registers.items()}
    for raw in sys.stdin:
        parts = raw.strip().split()
        if not parts:
            continue
        verb = parts[0].upper()
        if verb == "DESCRIBE":
            print(f"OK kind={kind} keys={','.join(registers)}")
        elif verb == "SET" and len(parts) == 3:
            key, value = parts[1], parts[2]
            if key not in registers:
                print(f"ERR unknown-key {key}")
            elif value not in registers[key]:
                print(f"ERR bad-value {key} accepts {','.join(registers[key])}")
            else:
                state[key] = value
                print("OK")
        elif verb == "GET" and len(parts) == 2:
            key = parts[1]
            if key not in registers:
                print(f"ERR unknown-key {key}")
            else:
                print(f"OK {state[key]}")
        else:
            print(f"ERR parse {raw.strip()!r}")
        sys.stdout.flush()


def main(argv=None):
    ap = argparse.ArgumentParser(description="stub instrument device")
    ap.add_argument("--kind", choices=sorted(KINDS), required=True)
    args = ap.parse_args(argv)
    serve(args.kind, KINDS[args.kind])


if __name__ == "__main__":
    main()
