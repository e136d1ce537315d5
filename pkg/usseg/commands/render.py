import logging

from usseg.commands.common import parse_gate
from usseg.crud.volume_store import read_volume
from usseg.errors import ArgumentError
from usseg.models.volume import VolumeKind
from usseg.services import render_service, volume_service

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("render", help="write C-scan / B-scan images of a volume")
    parser.add_argument("--in", dest="input", required=True)
    parser.add_argument("--cscan", metavar="OUT.pgm")
    parser.add_argument("--bscan", nargs=2, metavar=("FRAME", "OUT.pgm"))
    parser.add_argument("--gate", help="time gate lo:hi for the C-scan")
    parser.add_argument("--vmax", type=float, help="amplitude mapped to white (default: image maximum)")
    parser.add_argument("--html", metavar="OUT.html", help="interactive plotly view (3D scatter for masks)")
    parser.set_defaults(handler=run)


def run(args) -> int:
    if not (args.cscan or args.bscan or args.html):
        raise ArgumentError("nothing to render; pass --cscan, --bscan or --html")
    vol = read_volume(args.input)
    if vol.kind == VolumeKind.RF:
        vol = volume_service.envelope(vol)
    gate = parse_gate(args.gate)

    if args.cscan:
        render_service.write_pgm(render_service.cscan_field(vol, gate), args.cscan, args.vmax)
    if args.bscan:
        try:
            frame = int(args.bscan[0])
        except ValueError:
            raise ArgumentError(f"B-scan frame must be an integer, got {args.bscan[0]!r}")
        render_service.write_pgm(volume_service.bscan(vol, frame), args.bscan[1], args.vmax)
    if args.html:
        if vol.kind == VolumeKind.MASK:
            fig = render_service.mask_figure(vol)
        else:
            fig = render_service.cscan_figure(vol, gate)
        render_service.write_html(fig, args.html)
    return 0
