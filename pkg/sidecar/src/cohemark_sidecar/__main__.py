"""Run the sidecar with uvicorn."""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .config import SidecarConfig


def main() -> None:
    parser = argparse.ArgumentParser(description="cohemark model sidecar")
    parser.add_argument("--embed-model", default=SidecarConfig.embed_model)
    parser.add_argument("--generation-model", default=SidecarConfig.generation_model)
    parser.add_argument("--host", default=SidecarConfig.host)
    parser.add_argument("--port", type=int, default=SidecarConfig.port)
    parser.add_argument("--max-batch-size", type=int, default=SidecarConfig.max_batch_size)
    parser.add_argument("--device", default=SidecarConfig.device)
    args = parser.parse_args()
    config = SidecarConfig(
        embed_model=args.embed_model,
        generation_model=args.generation_model,
        host=args.host,
        port=args.port,
        max_batch_size=args.max_batch_size,
        device=args.device,
    )
    uvicorn.run(create_app(config), host=config.host, port=config.port)


if __name__ == "__main__":
    main()
