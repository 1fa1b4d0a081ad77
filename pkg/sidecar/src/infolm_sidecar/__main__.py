import argparse

import uvicorn

from .model import SidecarConfig
from .service import create_app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="infolm-sidecar",
        description="Serve masked-LM token distributions over HTTP.",
    )
    parser.add_argument("--model", required=True,
                        help="model identifier or local directory")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--top-k", type=int, default=256)
    parser.add_argument("--max-batch", type=int, default=32)
    parser.add_argument("--max-seq-len", type=int, default=128)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8091)
    args = parser.parse_args(argv)

    config = SidecarConfig(
        model=args.model,
        device=args.device,
        top_k=args.top_k,
        max_batch=args.max_batch,
        max_seq_len=args.max_seq_len,
        host=args.host,
        port=args.port,
    )
    uvicorn.run(create_app(config), host=config.host, port=config.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
