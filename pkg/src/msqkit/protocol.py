"""Two-party protocol: Party B holds a noisy oracle for a secret magic
square; Party A runs the QFT detection loop over a framed channel,
reconstructs the square, and decodes B's classical message.

Wire format: 1 tag byte, 4-byte big-endian payload length, payload.
STATE / ORACLE_REPLY payloads are little-endian float64 (re, im) pairs,
one pair per amplitude; all classical payloads are JSON objects.
"""

from __future__ import annotations

import base64
import json
import socket
import threading
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .detect import (
    anchor_start,
    period_candidates,
    recover_spacing_from_source,
)
from .errors import (
    ChannelError,
    InstructionError,
    MsqError,
    ProtocolFailure,
    RecoveryFailure,
    ValidationError,
)
from .markedset import MarkedSet
from .qsim import shifted_indicator, uniform_state
from .squares import MagicSquare, ProgressionFamily, construct_order_n, pattern3x3_to_square, Pattern3x3

__all__ = [
    "TAGS",
    "PartyBSecret",
    "ProtocolParams",
    "ProtocolResult",
    "Transcript",
    "encode_bit",
    "decode_bit",
    "encode_frame",
    "make_memory_channel",
    "make_socket_channel",
    "run_protocol",
]

TAGS = {
    1: "REPRESENTATIVES",
    2: "STATE",
    3: "ORACLE_REPLY",
    4: "INSTRUCTION",
    5: "ACK",
}
TAG_IDS = {name: tag for tag, name in TAGS.items()}

_STATE_NORM_TOL = 1e-9


# ---------------------------------------------------------------------------
# transports

class _Stream:
    """One direction of an in-memory duplex byte channel."""

    def __init__(self):
        self._chunks: deque[bytes] = deque()
        self._cond = threading.Condition()
        self._closed = False

    def write(self, data: bytes):
        with self._cond:
            if self._closed:
                raise ChannelError("stream is closed")
            self._chunks.append(bytes(data))
            self._cond.notify_all()

    def read(self, n: int) -> bytes:
        """Up to n bytes; b'' on EOF."""
        with self._cond:
            while not self._chunks and not self._closed:
                self._cond.wait()
            if not self._chunks:
                return b""
            chunk = self._chunks.popleft()
            if len(chunk) > n:
                head, rest = chunk[:n], chunk[n:]
                self._chunks.appendleft(rest)
                return head
            return chunk

    def close(self):
        with self._cond:
            self._closed = True
            self._cond.notify_all()


class MemoryEndpoint:
    def __init__(self, out_stream: _Stream, in_stream: _Stream):
        self._out = out_stream
        self._in = in_stream

    def send_bytes(self, data: bytes):
        self._out.write(data)

    def recv_exact(self, n: int, allow_eof: bool = False) -> bytes | None:
        buf = b""
        while len(buf) < n:
            chunk = self._in.read(n - len(buf))
            if not chunk:
                if not buf and allow_eof:
                    return None
                raise ChannelError(f"stream ended mid-read ({len(buf)}/{n} bytes)")
            buf += chunk
        return buf

    def close(self):
        self._out.close()
        self._in.close()


class SocketEndpoint:
    def __init__(self, sock: socket.socket):
        self._sock = sock

    def send_bytes(self, data: bytes):
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise ChannelError(f"socket send failed: {exc}") from exc

    def recv_exact(self, n: int, allow_eof: bool = False) -> bytes | None:
        buf = b""
        while len(buf) < n:
            try:
                chunk = self._sock.recv(n - len(buf))
            except OSError as exc:
                raise ChannelError(f"socket recv failed: {exc}") from exc
            if not chunk:
                if not buf and allow_eof:
                    return None
                raise ChannelError(f"socket closed mid-read ({len(buf)}/{n} bytes)")
            buf += chunk
        return buf

    def close(self):
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def make_memory_channel() -> tuple[MemoryEndpoint, MemoryEndpoint]:
    a_to_b, b_to_a = _Stream(), _Stream()
    return (
        MemoryEndpoint(out_stream=a_to_b, in_stream=b_to_a),
        MemoryEndpoint(out_stream=b_to_a, in_stream=a_to_b),
    )


def make_socket_channel(host: str = "127.0.0.1", port: int = 0):
    """Local stream-socket backend; returns (endpoint_a, endpoint_b)."""
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.bind((host, port))
    listener.listen(1)
    client = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    client.connect(listener.getsockname())
    server, _ = listener.accept()
    listener.close()
    return SocketEndpoint(client), SocketEndpoint(server)


# ---------------------------------------------------------------------------
# framing

def encode_frame(tag: int, payload: bytes) -> bytes:
    if tag not in TAGS:
        raise ChannelError(f"unknown tag {tag}")
    return bytes([tag]) + len(payload).to_bytes(4, "big") + payload


def read_frame(endpoint, allow_eof: bool = False) -> tuple[int, bytes] | None:
    header = endpoint.recv_exact(5, allow_eof=allow_eof)
    if header is None:
        return None
    tag = header[0]
    if tag not in TAGS:
        raise ChannelError(f"unknown tag byte {tag}")
    length = int.from_bytes(header[1:5], "big")
    payload = endpoint.recv_exact(length) if length else b""
    return tag, payload


def _amps_to_payload(amps: np.ndarray) -> bytes:
    flat = np.empty(2 * amps.size, dtype="<f8")
    flat[0::2] = amps.real
    flat[1::2] = amps.imag
    return flat.tobytes()


def _payload_to_amps(payload: bytes, expected_dim: int | None = None) -> np.ndarray:
    if len(payload) % 16:
        raise ChannelError("amplitude payload is not a whole number of pairs")
    flat = np.frombuffer(payload, dtype="<f8")
    amps = flat[0::2] + 1j * flat[1::2]
    if expected_dim is not None and amps.size != expected_dim:
        raise ChannelError(
            f"expected {expected_dim} amplitude pairs, got {amps.size}"
        )
    norm = float(np.sum(np.abs(amps) ** 2))
    if abs(norm - 1.0) > _STATE_NORM_TOL:
        raise ChannelError(f"transmitted state norm^2 = {norm} violates 1e-9")
    return amps


def _json_payload(obj: dict) -> bytes:
    return json.dumps(obj, sort_keys=True).encode()


def _parse_json(payload: bytes) -> dict:
    try:
        obj = json.loads(payload.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ChannelError(f"malformed JSON payload: {exc}") from exc
    if not isinstance(obj, dict):
        raise ChannelError("JSON payload must be an object")
    return obj


# ---------------------------------------------------------------------------
# transcript

@dataclass
class Transcript:
    frames: list[dict] = field(default_factory=list)

    def record(self, direction: str, tag: int, payload: bytes):
        self.frames.append(
            {
                "seq": len(self.frames),
                "dir": direction,
                "tag": TAGS[tag],
                "length": len(payload),
                "payload_b64": base64.b64encode(payload).decode(),
            }
        )

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(f, sort_keys=True) for f in self.frames) + "\n"


class _LoggedEndpoint:
    """Endpoint wrapper that records every frame from Party A's viewpoint."""

    def __init__(self, endpoint, transcript: Transcript):
        self._ep = endpoint
        self.transcript = transcript

    def send(self, tag: int, payload: bytes):
        self.transcript.record("A->B", tag, payload)
        self._ep.send_bytes(encode_frame(tag, payload))

    def recv(self) -> tuple[int, bytes]:
        frame = read_frame(self._ep)
        tag, payload = frame
        self.transcript.record("B->A", tag, payload)
        return tag, payload

    def close(self):
        self._ep.close()


# ---------------------------------------------------------------------------
# message-bit transforms

_TRANSFORM_IDS = (0, 1, 2)  # identity, add k, add spacing D


def encode_bit(
    square: MagicSquare, cell: tuple[int, int], transform_id: int, k: int = 0, spacing: int = 0
) -> int:
    """Parity of the transformed entry at `cell`."""
    r, c = cell
    if not (0 <= r < square.order and 0 <= c < square.order):
        raise InstructionError(f"cell {cell} outside an order-{square.order} square")
    if transform_id not in _TRANSFORM_IDS:
        raise InstructionError(f"unknown transform id {transform_id}")
    value = square.entries[r][c]
    if transform_id == 1:
        value += k
    elif transform_id == 2:
        value += spacing
    return value % 2


def decode_bit(
    square: MagicSquare, cell: tuple[int, int], transform_id: int, k: int = 0, spacing: int = 0
) -> int:
    """Inverse of encode_bit on a shared square (same computation)."""
    return encode_bit(square, cell, transform_id, k=k, spacing=spacing)


# ---------------------------------------------------------------------------
# parties

@dataclass(frozen=True)
class PartyBSecret:
    family: ProgressionFamily
    marked: MarkedSet  # noisy oracle
    representatives: tuple[int, ...] | None
    message_bits: tuple[int, ...]

    def __post_init__(self):
        if self.representatives is not None:
            if len(self.representatives) != self.family.n:
                raise ValidationError("need one representative per progression")
            owners = set()
            for rep in self.representatives:
                owner = None
                for j, start in enumerate(self.family.starts):
                    offset = rep - start
                    if offset % self.family.k == 0 and 0 <= offset // self.family.k < self.family.n:
                        owner = j
                        break
                if owner is None or owner in owners:
                    raise ValidationError(
                        "representatives must each belong to a distinct progression"
                    )
                owners.add(owner)
        if any(bit not in (0, 1) for bit in self.message_bits):
            raise ValidationError("message bits must be 0/1")

    @property
    def spacing(self) -> int:
        return self.family.starts[1] - self.family.starts[0]


@dataclass
class ProtocolParams:
    max_rounds: int = 8
    shots_per_round: int = 40
    exact_mode: bool = False
    m: int = 10
    k_max: int = 64
    seed: int = 0
    shift_shots: int = 0  # 0 -> exact overlap per tested shift
    s_max: int | None = None
    query_budget: int = 200_000
    candidates_per_round: int = 6


@dataclass
class ProtocolResult:
    ok: bool
    square: MagicSquare | None
    family: ProgressionFamily | None
    decoded_bits: tuple[int, ...]
    rounds_used: int
    queries_used: int
    transcript: Transcript


def _reconstruct_square(fam: ProgressionFamily) -> MagicSquare | None:
    if fam.n == 3:
        step = fam.starts[1] - fam.starts[0]
        if fam.starts[2] - fam.starts[1] != step:
            return None
        try:
            return pattern3x3_to_square(Pattern3x3(l=fam.starts[0], k=fam.k, K=step))
        except MsqError:
            return None
    try:
        return construct_order_n(fam)
    except MsqError:
        return None


class _PartyB:
    """Reactive oracle holder: serves frames until the channel closes."""

    def __init__(self, secret: PartyBSecret, params: ProtocolParams):
        self.secret = secret
        self.params = params
        self.pending_shift: int | None = None
        self.square = _reconstruct_square(secret.family)
        if self.square is None:
            raise ValidationError("secret family does not produce a magic square")

    def _send(self, ep, tag, payload: bytes):
        ep.send_bytes(encode_frame(tag, payload))

    def serve(self, ep):
        secret = self.secret
        header = {
            "type": "session",
            "n": secret.family.n,
            "q": secret.marked.q,
            "ones": secret.marked.popcount,
            "representatives": (
                list(secret.representatives) if secret.representatives else None
            ),
        }
        self._send(ep, TAG_IDS["REPRESENTATIVES"], _json_payload(header))
        while True:
            frame = read_frame(ep, allow_eof=True)
            if frame is None:
                return
            tag, payload = frame
            name = TAGS[tag]
            if name == "STATE":
                self._handle_state(ep, payload)
            elif name == "ACK":
                if not self._handle_ack(ep, _parse_json(payload)):
                    return
            else:
                raise ChannelError(f"unexpected frame {name} at Party B")

    def _handle_state(self, ep, payload: bytes):
        marked = self.secret.marked
        amps = _payload_to_amps(payload, expected_dim=marked.domain_size)
        signs = 1.0 - 2.0 * marked.bit_array().astype(np.float64)
        if self.pending_shift is not None:
            shifted = shifted_indicator(marked, self.pending_shift)
            signs = signs * (1.0 - 2.0 * shifted.bit_array().astype(np.float64))
            self.pending_shift = None
        self._send(ep, TAG_IDS["ORACLE_REPLY"], _amps_to_payload(amps * signs))

    def _handle_ack(self, ep, msg: dict) -> bool:
        kind = msg.get("type")
        if kind == "shift":
            self.pending_shift = int(msg["s"])
            reply = {
                "type": "shift-set",
                "s": self.pending_shift,
                "shifted_ones": shifted_indicator(
                    self.secret.marked, self.pending_shift
                ).popcount,
            }
            self._send(ep, TAG_IDS["ACK"], _json_payload(reply))
            return True
        if kind == "query":
            x = int(msg["x"])
            bit = int(self.secret.marked.membership(x)) if 1 <= x <= self.secret.marked.domain_size else 0
            self._send(ep, TAG_IDS["ACK"], _json_payload({"type": "bit", "x": x, "value": bit}))
            return True
        if kind == "candidate":
            try:
                fam = ProgressionFamily.from_json(msg["family"])
                accepted = fam == self.secret.family
            except MsqError:
                accepted = False
            self._send(
                ep, TAG_IDS["ACK"], _json_payload({"type": "verdict", "ok": accepted})
            )
            if accepted:
                self._send_instructions(ep)
            return True
        if kind == "abort":
            return False
        raise ChannelError(f"unknown ACK type {kind!r}")

    def _send_instructions(self, ep):
        secret = self.secret
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(entropy=self.params.seed, spawn_key=(7,)))
        )
        n = secret.family.n
        total = len(secret.message_bits)
        if total == 0:
            msg = {"type": "instruction", "index": 0, "total": 0, "cell": [0, 0], "transform": 0}
            self._send(ep, TAG_IDS["INSTRUCTION"], _json_payload(msg))
            return
        for index, bit in enumerate(secret.message_bits):
            for _ in range(1000):
                r = int(rng.integers(0, n))
                c = int(rng.integers(0, n))
                tid = int(rng.integers(0, 3))
                value = encode_bit(
                    self.square, (r, c), tid, k=secret.family.k, spacing=secret.spacing
                )
                if value == bit:
                    break
            else:  # pragma: no cover - needs a parity-degenerate square
                raise InstructionError("could not encode bit with the agreed transforms")
            msg = {
                "type": "instruction",
                "index": index,
                "total": total,
                "cell": [r, c],
                "transform": tid,
            }
            self._send(ep, TAG_IDS["INSTRUCTION"], _json_payload(msg))


class _PartyA:
    """Driving reconstructor."""

    def __init__(self, ep: _LoggedEndpoint, params: ProtocolParams):
        self.ep = ep
        self.params = params
        self.queries_used = 0
        self._last_shifted_ones = 0

    def _expect(self, name: str) -> bytes:
        tag, payload = self.ep.recv()
        if TAGS[tag] != name:
            raise ChannelError(f"expected {name}, got {TAGS[tag]}")
        return payload

    def _oracle_round(self, q: int, shift: int | None = None) -> np.ndarray:
        """One STATE -> ORACLE_REPLY exchange; returns the replied state."""
        if shift is not None:
            self.ep.send(
                TAG_IDS["ACK"], _json_payload({"type": "shift", "s": shift})
            )
            ack = _parse_json(self._expect("ACK"))
            if ack.get("type") != "shift-set":
                raise ChannelError("oracle holder did not confirm the shift")
            self._last_shifted_ones = int(ack["shifted_ones"])
        state = uniform_state(q)
        self.ep.send(TAG_IDS["STATE"], _amps_to_payload(state.amplitudes))
        return _payload_to_amps(self._expect("ORACLE_REPLY"), expected_dim=1 << q)

    def _query(self, x: int) -> int:
        self.queries_used += 1
        if self.queries_used > self.params.query_budget:
            raise ProtocolFailure(
                "classical query budget exhausted", transcript=self.ep.transcript
            )
        self.ep.send(TAG_IDS["ACK"], _json_payload({"type": "query", "x": x}))
        return int(_parse_json(self._expect("ACK"))["value"])

    def _submit_candidate(self, fam: ProgressionFamily) -> bool:
        self.ep.send(
            TAG_IDS["ACK"],
            _json_payload({"type": "candidate", "family": fam.to_json()}),
        )
        verdict = _parse_json(self._expect("ACK"))
        return bool(verdict.get("ok"))

    def _families_for_k(self, k: int, n: int, header: dict, q: int):
        reps = header.get("representatives")
        if reps is not None:
            try:
                yield ProgressionFamily(n=n, starts=tuple(sorted(reps)), k=k)
            except MsqError:
                return
            return
        # Algorithm-2 path: recover the start spacing from the shifted-oracle
        # overlap signal, then anchor the first start with classical queries.
        b = 1 << q
        ones = int(header["ones"])
        s_max = self.params.s_max if self.params.s_max is not None else b // 2
        rng_seed = self.params.seed
        shots = self.params.shift_shots
        cache: dict[int, float] = {}

        def source(shift: int) -> float:
            shift = abs(shift)
            if shift in cache:
                return cache[shift]
            amps = self._oracle_round(q, shift=shift)
            exact = float(np.sum(amps).real) / np.sqrt(b)
            if shots > 0:
                sub = np.random.SeedSequence(entropy=rng_seed, spawn_key=(shift,))
                gen = np.random.Generator(np.random.Philox(sub))
                flips = int(gen.binomial(shots, (1.0 - exact) / 2.0))
                z = (shots - 2 * flips) / shots
            else:
                z = exact
            d_est = b * (1.0 - z) / 2.0
            value = (ones + self._last_shifted_ones - d_est) / 2.0
            cache[shift] = value
            return value

        try:
            spacing = recover_spacing_from_source(source, k, n, b, s_max)
        except (RecoveryFailure, MsqError):
            return
        membership_cache: dict[int, int] = {}

        def membership(x: int) -> int:
            if x not in membership_cache:
                membership_cache[x] = self._query(x)
            return membership_cache[x]

        anchor = anchor_start(membership, spacing, k, n, b)
        if anchor is None:
            return
        try:
            yield ProgressionFamily(
                n=n, starts=tuple(anchor + j * spacing for j in range(n)), k=k
            )
        except MsqError:
            return

    def run(self) -> ProtocolResult:
        params = self.params
        header = _parse_json(self._expect("REPRESENTATIVES"))
        n = int(header["n"])
        q = int(header["q"])
        big_q = 1 << q
        counts = np.zeros(big_q, dtype=np.float64)
        tried: set[tuple[int, tuple[int, ...]]] = set()
        solution: tuple[ProgressionFamily, MagicSquare] | None = None
        rounds = 0
        for round_index in range(params.max_rounds):
            rounds += 1
            amps = self._oracle_round(q)
            spectrum = np.abs(np.fft.ifft(amps) * np.sqrt(big_q)) ** 2
            if params.exact_mode:
                weights = spectrum
            else:
                sub = np.random.SeedSequence(
                    entropy=params.seed, spawn_key=(1000 + round_index,)
                )
                gen = np.random.Generator(np.random.Philox(sub))
                counts += gen.multinomial(
                    params.shots_per_round, spectrum / spectrum.sum()
                )
                weights = counts
            cands = period_candidates(weights, big_q, params.m, params.k_max)
            for cand in cands[: params.candidates_per_round]:
                for fam in self._families_for_k(cand.denominator, n, header, q):
                    key = (fam.k, fam.starts)
                    if key in tried:
                        continue
                    tried.add(key)
                    square = _reconstruct_square(fam)
                    if square is None:
                        continue
                    if self._submit_candidate(fam):
                        solution = (fam, square)
                        break
                if solution:
                    break
            if solution:
                break
        if not solution:
            raise ProtocolFailure(
                f"no verified reconstruction within {params.max_rounds} rounds",
                transcript=self.ep.transcript,
            )
        fam, square = solution
        spacing = fam.starts[1] - fam.starts[0]
        bits: list[int] = []
        expected: int | None = None
        while expected is None or len(bits) < expected:
            msg = _parse_json(self._expect("INSTRUCTION"))
            expected = int(msg["total"])
            if expected == 0:
                break
            cell = (int(msg["cell"][0]), int(msg["cell"][1]))
            bits.append(
                decode_bit(square, cell, int(msg["transform"]), k=fam.k, spacing=spacing)
            )
        return ProtocolResult(
            ok=True,
            square=square,
            family=fam,
            decoded_bits=tuple(bits),
            rounds_used=rounds,
            queries_used=self.queries_used,
            transcript=self.ep.transcript,
        )


def run_protocol(
    secret: PartyBSecret,
    channel: tuple | None = None,
    params: ProtocolParams | None = None,
) -> ProtocolResult:
    """Run the whole protocol over the given channel (in-memory by default)."""
    params = params or ProtocolParams()
    endpoints = channel if channel is not None else make_memory_channel()
    ep_a_raw, ep_b = endpoints
    transcript = Transcript()
    ep_a = _LoggedEndpoint(ep_a_raw, transcript)
    party_b = _PartyB(secret, params)
    errors: list[BaseException] = []

    def serve():
        try:
            party_b.serve(ep_b)
        except ChannelError:
            pass  # channel torn down by A
        except BaseException as exc:  # pragma: no cover
            errors.append(exc)

    thread = threading.Thread(target=serve, daemon=True)
    thread.start()
    try:
        result = _PartyA(ep_a, params).run()
    finally:
        ep_a.close()
        thread.join(timeout=30)
    if errors:  # pragma: no cover
        raise errors[0]
    return result
