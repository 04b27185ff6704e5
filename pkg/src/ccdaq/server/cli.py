"""``ccdserve`` entry point.

Runs the control server with either an in-process simulated controller
(the default) or a controller reachable over UDP.  ``--controller-only``
instead runs just the controller emulator on a UDP port, for
two-process setups.
"""

from __future__ import annotations

import argparse
import logging
import signal
import threading

from ..config import ConfigMap
from ..controller import ControllerConfig, ControllerSim
from ..detector import SceneModel, load_detector_preset, load_scene
from ..transport import LossyChannel, Transport, UdpEndpoint
from .core import CcdServer, ServerConfig
from .gateway import UiGateway

log = logging.getLogger("ccdaq.serve")


def _addr(text):
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


def build_parser():
    ap = argparse.ArgumentParser(
        prog="ccdserve", description="CCD control server")
    ap.add_argument("--config", help="server config file")
    ap.add_argument("--detector", default="ccd42-40",
                    help="detector preset name or .cfg path")
    ap.add_argument("--scene", help="scene config file (default: flat sky)")
    ap.add_argument("--sky", type=float, default=100.0,
                    help="flat sky level when no scene file is given")
    ap.add_argument("--channel-dir")
    ap.add_argument("--data-dir")
    ap.add_argument("--ui-port", type=int)
    ap.add_argument("--static-dir", help="directory of console assets")
    ap.add_argument("--controller", metavar="HOST:PORT",
                    help="UDP address of an external controller "
                         "(default: in-process simulation)")
    ap.add_argument("--controller-only", metavar="HOST:PORT",
                    help="run only the controller emulator, listening here")
    ap.add_argument("--realtime", action="store_true",
                    help="simulated integrations take wall-clock time")
    ap.add_argument("--log-level", default="INFO")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
        datefmt="%Y-%m-%dT%H:%M:%S")

    cfg = ConfigMap.load(args.config) if args.config else ConfigMap({}, "<defaults>")
    geom = load_detector_preset(args.detector)
    if args.scene:
        scene = load_scene(args.scene)
    elif cfg.get_str("scene"):
        scene = load_scene(cfg.get_str("scene"))
    else:
        scene = SceneModel(sky_level=args.sky)
    ctrl_config = ControllerConfig.from_config(cfg)
    if args.realtime:
        ctrl_config = ControllerConfig(
            **{**ctrl_config.__dict__, "realtime": True})

    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *a: stop.set())
    signal.signal(signal.SIGTERM, lambda *a: stop.set())

    if args.controller_only:
        endpoint = UdpEndpoint(bind=_addr(args.controller_only))
        log.info("controller listening on %s:%d", *endpoint.local_addr)
        controller = ControllerSim(geom, scene, Transport(endpoint),
                                   config=ctrl_config)
        t = threading.Thread(target=controller.serve_forever, daemon=True)
        t.start()
        stop.wait()
        controller.stop()
        return 0

    server_cfg = ServerConfig.from_config(cfg)
    if args.channel_dir:
        server_cfg.channel_dir = args.channel_dir
    if args.data_dir:
        server_cfg.data_dir = args.data_dir
    if args.ui_port is not None:
        server_cfg.ui_port = args.ui_port

    controller = None
    if args.controller:
        transport = Transport(UdpEndpoint(peer=_addr(args.controller)))
    else:
        srv_end, ctrl_end = LossyChannel.pair()
        controller = ControllerSim(geom, scene, Transport(ctrl_end),
                                   config=ctrl_config)
        threading.Thread(target=controller.serve_forever, daemon=True).start()
        transport = Transport(srv_end)
    transport.connect()

    server = CcdServer(geom, transport, server_cfg, devices_cfg=cfg)
    log.info("channels in %s, data in %s", server_cfg.channel_dir,
             server_cfg.data_dir)
    gateway = None
    if server_cfg.ui_port:
        gateway = UiGateway(server, host=server_cfg.ui_host,
                            port=server_cfg.ui_port,
                            static_dir=args.static_dir)
        log.info("ui gateway on port %d", gateway.port)

    stop.wait()
    if gateway is not None:
        gateway.close()
    server.close()
    if controller is not None:
        controller.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
