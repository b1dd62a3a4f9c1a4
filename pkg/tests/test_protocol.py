import base64
import json

import numpy as np
import pytest

from msqkit.errors import ChannelError, InstructionError, ProtocolFailure, ValidationError
from msqkit.markedset import MarkedSet, NoiseSpec, apply_noise, from_progressions
from msqkit.protocol import (
    TAG_IDS,
    TAGS,
    PartyBSecret,
    ProtocolParams,
    _payload_to_amps,
    decode_bit,
    encode_bit,
    encode_frame,
    make_memory_channel,
    make_socket_channel,
    read_frame,
    run_protocol,
)
from msqkit.squares import ProgressionFamily, construct_order_n


@pytest.fixture()
def small_secret():
    fam = ProgressionFamily(n=4, starts=(1, 5, 9, 13), k=1)
    return PartyBSecret(
        family=fam,
        marked=from_progressions(fam, 5),
        representatives=fam.starts,
        message_bits=(1, 0, 1, 1, 0, 0, 1, 0),
    )


def exact_params(**kw):
    return ProtocolParams(exact_mode=True, seed=1, **kw)


class TestBitTransforms:
    @pytest.fixture()
    def square(self):
        fam = ProgressionFamily(n=4, starts=(1, 5, 9, 13), k=1)
        return construct_order_n(fam)

    def test_identity_parity(self, square):
        cell = next(
            (i, j)
            for i in range(4)
            for j in range(4)
            if square.entries[i][j] == 14
        )
        assert encode_bit(square, cell, 0) == 0

    def test_add_k_parity(self, square):
        cell = next(
            (i, j)
            for i in range(4)
            for j in range(4)
            if square.entries[i][j] == 14
        )
        assert encode_bit(square, cell, 1, k=5) == 1

    def test_decode_inverts_encode(self, square):
        for i in range(4):
            for j in range(4):
                for tid in (0, 1, 2):
                    bit = encode_bit(square, (i, j), tid, k=3, spacing=11)
                    assert decode_bit(square, (i, j), tid, k=3, spacing=11) == bit

    def test_cell_out_of_range(self, square):
        with pytest.raises(InstructionError):
            encode_bit(square, (4, 0), 0)

    def test_unknown_transform(self, square):
        with pytest.raises(InstructionError):
            encode_bit(square, (0, 0), 3)


class TestFraming:
    def test_round_trip_over_memory_channel(self):
        a, b = make_memory_channel()
        payload = json.dumps({"type": "query", "x": 7}).encode()
        a.send_bytes(encode_frame(TAG_IDS["ACK"], payload))
        tag, got = read_frame(b)
        assert TAGS[tag] == "ACK"
        assert got == payload

    def test_unknown_tag_rejected(self):
        a, b = make_memory_channel()
        a.send_bytes(bytes([99]) + (0).to_bytes(4, "big"))
        with pytest.raises(ChannelError):
            read_frame(b)

    def test_truncated_frame(self):
        a, b = make_memory_channel()
        a.send_bytes(bytes([TAG_IDS["ACK"]]) + (10).to_bytes(4, "big") + b"abc")
        a.close()
        with pytest.raises(ChannelError):
            read_frame(b)

    def test_encode_rejects_unknown_tag(self):
        with pytest.raises(ChannelError):
            encode_frame(42, b"")

    def test_state_norm_enforced(self):
        amps = np.full(8, 0.5, dtype=complex)  # norm^2 = 2
        flat = np.empty(16)
        flat[0::2] = amps.real
        flat[1::2] = amps.imag
        with pytest.raises(ChannelError):
            _payload_to_amps(flat.astype("<f8").tobytes(), expected_dim=8)

    def test_bad_pair_alignment(self):
        with pytest.raises(ChannelError):
            _payload_to_amps(b"\x00" * 15)


class TestSecretValidation:
    def test_representatives_must_cover_distinct_progressions(self):
        fam = ProgressionFamily(n=3, starts=(1, 21, 41), k=2)
        with pytest.raises(ValidationError):
            PartyBSecret(
                family=fam,
                marked=from_progressions(fam, 7),
                representatives=(1, 3, 41),  # 1 and 3 share a progression
                message_bits=(),
            )

    def test_bits_are_binary(self):
        fam = ProgressionFamily(n=3, starts=(1, 21, 41), k=2)
        with pytest.raises(ValidationError):
            PartyBSecret(
                family=fam,
                marked=from_progressions(fam, 7),
                representatives=fam.starts,
                message_bits=(2,),
            )


class TestRunProtocol:
    def test_zero_noise_single_round(self, small_secret):
        result = run_protocol(small_secret, params=exact_params())
        assert result.ok
        assert result.rounds_used == 1
        assert result.family == small_secret.family
        assert result.decoded_bits == small_secret.message_bits

    def test_transcript_determinism(self, small_secret):
        first = run_protocol(small_secret, params=exact_params())
        second = run_protocol(small_secret, params=exact_params())
        assert first.transcript.to_jsonl() == second.transcript.to_jsonl()

    def test_transmitted_states_are_normalized(self, small_secret):
        result = run_protocol(small_secret, params=exact_params())
        seen = 0
        for frame in result.transcript.frames:
            if frame["tag"] not in ("STATE", "ORACLE_REPLY"):
                continue
            raw = base64.b64decode(frame["payload_b64"])
            flat = np.frombuffer(raw, dtype="<f8")
            amps = flat[0::2] + 1j * flat[1::2]
            assert len(amps) == 32  # exactly 2^q amplitude pairs
            assert abs(float(np.sum(np.abs(amps) ** 2)) - 1.0) <= 1e-9
            seen += 1
        assert seen >= 2

    def test_socket_backend(self, small_secret):
        result = run_protocol(
            small_secret, channel=make_socket_channel(), params=exact_params()
        )
        assert result.ok
        assert result.decoded_bits == small_secret.message_bits

    def test_n13_with_low_noise(self):
        fam = ProgressionFamily(n=13, starts=tuple(68 * i for i in range(1, 14)), k=5)
        marked = apply_noise(
            from_progressions(fam, 10),
            NoiseSpec(kind="bernoulli-density", density=0.002, seed=4),
        )
        rng = np.random.Generator(np.random.Philox(key=4))
        bits = tuple(int(b) for b in rng.integers(0, 2, size=64))
        secret = PartyBSecret(
            family=fam, marked=marked, representatives=fam.starts, message_bits=bits
        )
        result = run_protocol(secret, params=ProtocolParams(seed=4, shots_per_round=40))
        assert result.ok
        assert result.family == fam
        assert result.decoded_bits == bits

    def test_withheld_representatives_fall_back_to_shifted_oracle(self):
        fam = ProgressionFamily(n=4, starts=(5, 45, 85, 125), k=3)
        secret = PartyBSecret(
            family=fam,
            marked=from_progressions(fam, 8),
            representatives=None,
            message_bits=(1, 1, 0, 1),
        )
        result = run_protocol(secret, params=exact_params(s_max=120))
        assert result.ok
        assert result.family == fam
        assert result.decoded_bits == secret.message_bits
        assert result.queries_used > 0  # anchoring used classical queries

    def test_round_budget_exhaustion(self):
        fam = ProgressionFamily(n=4, starts=(1, 5, 9, 13), k=1)
        secret = PartyBSecret(
            family=fam,
            marked=MarkedSet(q=5, mask=0),  # oracle reveals nothing
            representatives=fam.starts,
            message_bits=(0, 1),
        )
        with pytest.raises(ProtocolFailure) as err:
            run_protocol(secret, params=ProtocolParams(exact_mode=True, max_rounds=2))
        assert err.value.transcript is not None
        assert len(err.value.transcript.frames) > 0

    def test_empty_message(self, small_secret):
        secret = PartyBSecret(
            family=small_secret.family,
            marked=small_secret.marked,
            representatives=small_secret.representatives,
            message_bits=(),
        )
        result = run_protocol(secret, params=exact_params())
        assert result.ok
        assert result.decoded_bits == ()
