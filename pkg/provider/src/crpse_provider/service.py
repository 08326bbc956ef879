"""HTTP surface of the sidecar.

One POST endpoint answers the protocol:

    POST /v1/nlp        {"v": 1, "op": "extract"|"embed"|"health", "text": str}
    POST /v1/nlp/batch  newline-delimited request objects -> newline-delimited
                        responses in the same order

All handling is stateless; identical embed requests produce identical
response bytes.
"""

from __future__ import annotations

import argparse
import json
import os
from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from crpse_provider.models import load_encoder, load_extractor

PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class ProviderConfig:
    encoder: str = "hashed"
    extractor: str = "rule"
    dim: int = 256

    @classmethod
    def from_env(cls) -> "ProviderConfig":
        return cls(
            encoder=os.environ.get("CRPSE_PROVIDER_ENCODER", "hashed"),
            extractor=os.environ.get("CRPSE_PROVIDER_EXTRACTOR", "rule"),
            dim=int(os.environ.get("CRPSE_PROVIDER_DIM", "256")),
        )


def create_app(config: ProviderConfig | None = None) -> FastAPI:
    """Build the service; model load failures raise before the app starts."""
    config = config or ProviderConfig.from_env()
    encoder = load_encoder(config.encoder, config.dim)
    extractor = load_extractor(config.extractor)

    app = FastAPI(title="crpse-provider", docs_url=None, redoc_url=None)

    def handle(message: dict) -> tuple[dict, int]:
        if not isinstance(message, dict):
            return {"v": PROTOCOL_VERSION, "error": "request is not an object"}, 400
        if message.get("v") != PROTOCOL_VERSION:
            return {
                "v": PROTOCOL_VERSION,
                "error": f"unsupported protocol version: {message.get('v')!r}",
            }, 400
        op = message.get("op")
        if op == "health":
            return {
                "v": PROTOCOL_VERSION,
                "status": "ok",
                "dim": encoder.dim,
                "models": {"extractor": extractor.name, "encoder": encoder.name},
            }, 200
        text = message.get("text")
        if not isinstance(text, str):
            return {"v": PROTOCOL_VERSION, "error": f"op {op!r} needs a text field"}, 400
        if op == "extract":
            return {
                "v": PROTOCOL_VERSION,
                "entities": [
                    {"surface": m.surface, "start": m.start, "end": m.end}
                    for m in extractor.extract(text)
                ],
            }, 200
        if op == "embed":
            return {"v": PROTOCOL_VERSION, "vector": encoder.embed(text)}, 200
        return {"v": PROTOCOL_VERSION, "error": f"unknown op: {op!r}"}, 400

    @app.post("/v1/nlp")
    async def nlp(request: Request) -> JSONResponse:
        try:
            message = await request.json()
        except Exception:
            return JSONResponse(
                {"v": PROTOCOL_VERSION, "error": "body is not valid JSON"}, status_code=400
            )
        payload, status = handle(message)
        return JSONResponse(payload, status_code=status)

    @app.post("/v1/nlp/batch")
    async def nlp_batch(request: Request) -> PlainTextResponse:
        body = (await request.body()).decode("utf-8")
        lines_out: list[str] = []
        for line in body.splitlines():
            if not line.strip():
                continue
            try:
                message = json.loads(line)
            except json.JSONDecodeError:
                payload = {"v": PROTOCOL_VERSION, "error": "line is not valid JSON"}
            else:
                payload, _ = handle(message)
            lines_out.append(json.dumps(payload, ensure_ascii=False, separators=(",", ":")))
        return PlainTextResponse(
            "\n".join(lines_out) + ("\n" if lines_out else ""),
            media_type="application/x-ndjson",
        )

    return app


def serve_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="crpse-provider",
        description="Serve the NLP sidecar.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--host", default="127.0.0.1", help="bind address")
    parser.add_argument("--port", type=int, default=8765, help="bind port")
    parser.add_argument("--encoder", default="hashed", help='encoder spec: "hashed" or "sentence-transformers:<name>"')
    parser.add_argument("--extractor", default="rule", help='extractor spec: "rule"')
    parser.add_argument("--dim", type=int, default=256, help="hashed encoder dimension")
    args = parser.parse_args(argv)

    import uvicorn

    try:
        app = create_app(ProviderConfig(encoder=args.encoder, extractor=args.extractor, dim=args.dim))
    except Exception as exc:
        parser.exit(1, f"error: model load failed: {exc}\n")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(serve_main())
