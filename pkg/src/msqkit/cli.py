"""Command-line front end.

The CLI is a thin client of the service API: by default it talks to an
in-process instance of the FastAPI app over an ASGI transport, or to a
running server given --server / MSQ_SERVER.  Exit codes: 0 success, 2 for
"none found" outcomes, 1 for errors, 64 for usage problems.
"""

from __future__ import annotations

import argparse
import asyncio
import base64
import json
import os
import sys
from functools import lru_cache

import httpx

from . import presets

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NONE_FOUND = 2
EXIT_USAGE = 64

_TIMEOUT = 600.0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@lru_cache(maxsize=1)
def _local_app():
    from .service import create_app

    return create_app()


def _post(server: str | None, path: str, payload: dict) -> tuple[int, dict]:
    if server:
        with httpx.Client(base_url=server, timeout=_TIMEOUT) as client:
            resp = client.post(path, json=payload)
    else:

        async def go():
            transport = httpx.ASGITransport(app=_local_app())
            async with httpx.AsyncClient(
                transport=transport, base_url="http://msqkit.internal", timeout=_TIMEOUT
            ) as client:
                return await client.post(path, json=payload)

        resp = asyncio.run(go())
    return resp.status_code, resp.json()


class CommandError(Exception):
    def __init__(self, message, code=EXIT_ERROR):
        super().__init__(message)
        self.code = code


def _call(server, path, payload) -> dict:
    status, body = _post(server, path, payload)
    if status != 200:
        detail = body.get("detail", body)
        raise CommandError(f"service error ({status}): {json.dumps(detail)}")
    return body


def _write_output(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _print_seed(seed: int):
    print(f"# seed: {seed}", file=sys.stderr)


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise CommandError(f"expected a comma-separated integer list: {exc}", EXIT_USAGE)


def _default_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    return int(os.environ.get("MSQ_SEED", "0"))


def _load_set_b64(path: str) -> str:
    try:
        with open(path, "rb") as fh:
            return base64.b64encode(fh.read()).decode()
    except OSError as exc:
        raise CommandError(f"cannot read marked-set file: {exc}")


def _genset_payload(args, seed: int) -> dict:
    if getattr(args, "fig_qftshots", False):
        payload = {
            "q": presets.QFT_SHOTS_Q,
            "family": presets.qft_shots_family().to_json(),
            "noise": {
                "kind": "target-density",
                "density": presets.QFT_SHOTS_DENSITY,
                "seed": seed,
            },
        }
    elif getattr(args, "fig_autocorr", False):
        payload = {
            "q": presets.AUTOCORR_Q,
            "family": presets.autocorr_family().to_json(),
            "noise": {
                "kind": "bernoulli-density",
                "density": presets.AUTOCORR_DENSITY,
                "seed": seed,
            },
        }
    else:
        if args.q is None:
            raise CommandError("--q is required without a figure preset", EXIT_USAGE)
        payload = {"q": args.q}
        if args.starts:
            starts = _parse_int_list(args.starts)
            payload["family"] = {
                "n": args.n or len(starts),
                "k": args.k or 1,
                "starts": starts,
            }
        if args.indices:
            payload["indices"] = _parse_int_list(args.indices)
        if args.noise_density:
            payload["noise"] = {
                "kind": args.noise_kind,
                "density": args.noise_density,
                "seed": seed,
            }
    return payload


def _fetch_set_b64(args, server, seed: int) -> str:
    """Marked set for commands accepting --set FILE or a figure preset."""
    if getattr(args, "set", None):
        return _load_set_b64(args.set)
    if getattr(args, "fig_qftshots", False) or getattr(args, "fig_autocorr", False):
        body = _call(server, "/genset", _genset_payload(args, seed))
        return body["data_b64"]
    raise CommandError("provide --set FILE or a figure preset", EXIT_USAGE)


def _read_grid(path: str) -> list[list[int]]:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise CommandError(f"cannot read grid file: {exc}")
    try:
        obj = json.loads(text)
        n = int(obj["order"])
        flat = [int(x) for x in obj["entries"]]
        return [flat[i * n : (i + 1) * n] for i in range(n)]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
        pass
    grid = [
        [int(tok) for tok in line.split()]
        for line in text.strip().splitlines()
        if line.strip()
    ]
    if not grid:
        raise CommandError("grid file is empty")
    return grid


# ---------------------------------------------------------------------------
# subcommand handlers

def _cmd_construct(args, server) -> int:
    starts = _parse_int_list(args.starts)
    body = _call(server, "/construct", {"n": args.n, "k": args.k, "starts": starts})
    if args.format == "text":
        _write_output(body["text"], args.out)
    else:
        _write_output(
            json.dumps(
                {
                    "order": body["order"],
                    "entries": body["entries"],
                    "magic_sum": body["magic_sum"],
                },
                sort_keys=True,
            ),
            args.out,
        )
    return EXIT_OK


def _cmd_validate(args, server) -> int:
    grid = _read_grid(args.file)
    body = _call(server, "/validate", {"entries": grid})
    _write_output(json.dumps(body, sort_keys=True), args.out)
    return EXIT_OK if body["is_magic"] else EXIT_NONE_FOUND


def _cmd_genset(args, server) -> int:
    seed = _default_seed(args)
    payload = _genset_payload(args, seed)
    if payload.get("noise"):
        _print_seed(seed)
    body = _call(server, "/genset", payload)
    raw = base64.b64decode(body["data_b64"])
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(raw)
        print(f"wrote {len(raw)} bytes, {body['ones']} marked of {body['b']}")
    else:
        sys.stdout.buffer.write(raw)
    return EXIT_OK


def _cmd_spectrum(args, server) -> int:
    seed = _default_seed(args)
    set_b64 = _fetch_set_b64(args, server, seed)
    body = _call(server, "/spectrum", {"set_b64": set_b64})
    if args.shots:
        _print_seed(seed)
        sampled = _call(
            server, "/sample", {"set_b64": set_b64, "shots": args.shots, "seed": seed}
        )
        probs = body["probabilities"]
        counts = sampled["counts"]
        lines = ["k,probability,count"]
        lines += [
            f"{k},{p!r},{counts.get(str(k), 0)}" for k, p in enumerate(probs)
        ]
        _write_output("\n".join(lines) + "\n", args.out)
    else:
        _write_output(body["csv"], args.out)
    return EXIT_OK


def _cmd_sample(args, server) -> int:
    seed = _default_seed(args)
    _print_seed(seed)
    set_b64 = _fetch_set_b64(args, server, seed)
    body = _call(
        server, "/sample", {"set_b64": set_b64, "shots": args.shots, "seed": seed}
    )
    _write_output(body["csv"], args.out)
    return EXIT_OK


def _cmd_detect(args, server) -> int:
    seed = _default_seed(args)
    if args.shots:
        _print_seed(seed)
    set_b64 = _fetch_set_b64(args, server, seed)
    payload = {
        "set_b64": set_b64,
        "n": args.n if args.n else (presets.QFT_SHOTS_N if args.fig_qftshots else None),
        "shots": args.shots,
        "m": args.m,
        "k_max": args.k_max,
        "seed": seed,
    }
    if payload["n"] is None:
        raise CommandError("--n is required without a figure preset", EXIT_USAGE)
    if args.reps:
        payload["representatives"] = _parse_int_list(args.reps)
    elif args.fig_qftshots and not args.no_reps:
        payload["representatives"] = list(presets.qft_shots_family().starts)
    body = _call(server, "/detect", payload)
    _write_output(json.dumps(body, sort_keys=True), args.out)
    return EXIT_OK if body["outcome"] == "solution" else EXIT_NONE_FOUND


def _cmd_autocorr(args, server) -> int:
    seed = _default_seed(args)
    set_b64 = _fetch_set_b64(args, server, seed)
    s_to = args.to if args.to is not None else (
        2 * presets.AUTOCORR_SPACING + 10 if args.fig_autocorr else 64
    )
    body = _call(
        server,
        "/autocorr",
        {"set_b64": set_b64, "s_from": args.frm, "s_to": s_to},
    )
    _write_output(body["csv"], args.out)
    return EXIT_OK


def _cmd_recover(args, server) -> int:
    seed = _default_seed(args)
    if args.shots:
        _print_seed(seed)
    set_b64 = _fetch_set_b64(args, server, seed)
    n = args.n if args.n else (presets.AUTOCORR_N if args.fig_autocorr else None)
    k = args.k if args.k else (presets.AUTOCORR_K if args.fig_autocorr else None)
    if n is None or k is None:
        raise CommandError("--n and --k are required without a figure preset", EXIT_USAGE)
    spacing_only = args.spacing_only or (args.fig_autocorr and n == 6)
    payload = {
        "set_b64": set_b64,
        "k": k,
        "n": n,
        "shots": args.shots,
        "s_max": args.s_max,
        "seed": seed,
        "spacing_only": spacing_only,
    }
    body = _call(server, "/recover", payload)
    _write_output(json.dumps(body, sort_keys=True), args.out)
    return EXIT_OK if body["outcome"] == "solution" else EXIT_NONE_FOUND


def _cmd_bound(args, server) -> int:
    body = _call(server, "/bound", {"z": args.z, "horizon": args.horizon})
    _write_output(json.dumps(body, sort_keys=True), args.out)
    return EXIT_OK


def _cmd_certify(args, server) -> int:
    set_b64 = _load_set_b64(args.set)
    body = _call(server, "/certify", {"set_b64": set_b64, "n": args.n})
    _write_output(json.dumps(body, sort_keys=True), args.out)
    return EXIT_OK


def _cmd_protocol_demo(args, server) -> int:
    seed = _default_seed(args)
    _print_seed(seed)
    bits = args.bits
    if bits is None:
        import numpy as np

        rng = np.random.Generator(np.random.Philox(key=seed))
        bits = "".join(str(int(b)) for b in rng.integers(0, 2, size=args.random_bits))
    payload = {
        "n": args.n,
        "q": args.q,
        "k": args.k,
        "noise": {
            "kind": args.noise_kind,
            "density": args.noise_density,
            "seed": seed,
        },
        "message_bits": bits,
        "seed": seed,
        "exact_mode": args.exact,
        "shots_per_round": args.shots_per_round,
        "max_rounds": args.max_rounds,
        "withhold_representatives": args.withhold_reps,
        "use_socket": args.socket,
        "include_transcript": args.transcript_out is not None,
        "s_max": args.s_max,
    }
    if args.starts:
        payload["starts"] = _parse_int_list(args.starts)
    body = _call(server, "/protocol-demo", payload)
    if args.transcript_out and body.get("transcript_jsonl"):
        with open(args.transcript_out, "w") as fh:
            fh.write(body["transcript_jsonl"])
    body.pop("transcript_jsonl", None)
    _write_output(json.dumps(body, sort_keys=True), args.out)
    return EXIT_OK if body["ok"] and body["bits_match"] else EXIT_NONE_FOUND


def _cmd_serve(args, _server) -> int:
    import uvicorn

    uvicorn.run("msqkit.service:app", host=args.host, port=args.port)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _add_common(p: argparse.ArgumentParser, seed=True, out=True):
    if seed:
        p.add_argument("--seed", type=int, default=None, help="RNG seed (default: MSQ_SEED or 0)")
    if out:
        p.add_argument("--out", help="output file (default: stdout)")


def build_parser() -> _Parser:
    parser = _Parser(prog="msq", description=__doc__)
    parser.add_argument(
        "--server",
        default=os.environ.get("MSQ_SERVER"),
        help="base URL of a running service (default: in-process)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="build an order-n magic square from progressions")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--starts", required=True, help="comma-separated progression starts")
    p.add_argument("--format", choices=("json", "text"), default="json")
    _add_common(p, seed=False)
    p.set_defaults(func=_cmd_construct)

    p = sub.add_parser("validate", help="check a grid file for the magic property")
    p.add_argument("file", help="JSON square or whitespace grid")
    _add_common(p, seed=False)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("genset", help="generate a marked-set file (MSQSET01)")
    p.add_argument("--q", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--starts", help="comma-separated progression starts")
    p.add_argument("--indices", help="comma-separated extra marked indices")
    p.add_argument("--noise-kind", default="bernoulli-density")
    p.add_argument("--noise-density", type=float, default=0.0)
    p.add_argument("--fig-qftshots", action="store_true")
    p.add_argument("--fig-autocorr", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_genset)

    p = sub.add_parser("spectrum", help="exact Fourier spectrum (CSV k,probability)")
    p.add_argument("--set", help="marked-set file")
    p.add_argument("--fig-qftshots", action="store_true")
    p.add_argument("--fig-autocorr", action="store_true")
    p.add_argument("--shots", type=int, default=0, help="also sample counts")
    _add_common(p)
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("sample", help="sampled measurement counts (CSV k,count)")
    p.add_argument("--set", help="marked-set file")
    p.add_argument("--fig-qftshots", action="store_true")
    p.add_argument("--fig-autocorr", action="store_true")
    p.add_argument("--shots", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("detect", help="Algorithm 1: QFT detection and reconstruction")
    p.add_argument("--set", help="marked-set file")
    p.add_argument("--fig-qftshots", action="store_true")
    p.add_argument("--n", type=int)
    p.add_argument("--shots", type=int, default=0)
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--k-max", type=int, default=64)
    p.add_argument("--reps", help="comma-separated representatives")
    p.add_argument("--no-reps", action="store_true", help="ignore preset representatives")
    _add_common(p)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("autocorr", help="autocorrelation scan (CSV s,value)")
    p.add_argument("--set", help="marked-set file")
    p.add_argument("--fig-autocorr", action="store_true")
    p.add_argument("--from", dest="frm", type=int, default=0)
    p.add_argument("--to", dest="to", type=int)
    _add_common(p)
    p.set_defaults(func=_cmd_autocorr)

    p = sub.add_parser("recover", help="Algorithm 2: shifted-oracle spacing recovery")
    p.add_argument("--set", help="marked-set file")
    p.add_argument("--fig-autocorr", action="store_true")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--shots", type=int, default=0)
    p.add_argument("--s-max", type=int)
    p.add_argument("--spacing-only", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_recover)

    p = sub.add_parser("bound", help="finite bound for a mixed-power 3x3 system")
    p.add_argument("--z", type=int, required=True)
    p.add_argument("--horizon", type=int, default=10**6)
    _add_common(p, seed=False)
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("certify", help="absence certificate for squares of squares")
    p.add_argument("--set", required=True, help="marked-set file")
    p.add_argument("--n", type=int, required=True)
    _add_common(p, seed=False)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("protocol-demo", help="two-party reconstruction protocol")
    p.add_argument("--n", type=int, default=13)
    p.add_argument("--q", type=int, default=10)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--starts", help="comma-separated secret starts")
    p.add_argument("--noise-kind", default="bernoulli-density")
    p.add_argument("--noise-density", type=float, default=0.002)
    p.add_argument("--bits", help="explicit message bits, e.g. 0110")
    p.add_argument("--random-bits", type=int, default=64)
    p.add_argument("--exact", action="store_true", help="exact-spectrum mode")
    p.add_argument("--shots-per-round", type=int, default=40)
    p.add_argument("--max-rounds", type=int, default=8)
    p.add_argument("--withhold-reps", action="store_true")
    p.add_argument("--socket", action="store_true", help="use the local socket backend")
    p.add_argument("--s-max", type=int)
    p.add_argument("--transcript-out", help="write the JSONL transcript here")
    _add_common(p)
    p.set_defaults(func=_cmd_protocol_demo)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, args.server)
    except CommandError as exc:
        print(f"msq: {exc}", file=sys.stderr)
        return exc.code
    except httpx.HTTPError as exc:
        print(f"msq: transport error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
