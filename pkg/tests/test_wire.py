import io

import numpy as np
import pytest

from codedtrain.coding import rlnc, systematic_mds, vandermonde_rs
from codedtrain.runtime.wire import (
    BlockRequest,
    BlockResponse,
    Cancel,
    EncodeComplete,
    IterationStart,
    Operand,
    PartialProduct,
    ProtocolError,
    Register,
    Role,
    SetGenerator,
    Shutdown,
    decode_frame_body,
    encode_message,
    read_message,
)

SPECIALS = np.array([0.0, -0.0, np.inf, -np.inf, np.nan, 1e308, 5e-324])


def _rt(msg):
    blob = encode_message(msg)
    assert blob[4] == msg.TYPE
    assert int.from_bytes(blob[:4], "little") == len(blob) - 5
    back = decode_frame_body(blob[4], blob[5:])
    assert encode_message(back) == blob  # bit-exact round trip
    return back


def _vector(rng, max_len=24):
    n = int(rng.integers(0, max_len))
    v = rng.standard_normal(n) * 10.0 ** rng.integers(-4, 4)
    # sprinkle special values
    for i in range(n):
        if rng.random() < 0.08:
            v[i] = SPECIALS[rng.integers(len(SPECIALS))]
    return v


def _random_message(rng):
    kind = rng.integers(1, 10)
    if kind == 1:
        return Register(int(rng.integers(0, 2**32)))
    if kind == 2:
        k = int(rng.integers(1, 5))
        n = k + int(rng.integers(0, 4))
        gens = [systematic_mds(k, n), vandermonde_rs(k, n), rlnc(k, n, int(rng.integers(1000)))]
        ops_choices = [(Operand.X,), (Operand.XT,), (Operand.X, Operand.XT), ()]
        return SetGenerator(
            gens[rng.integers(3)],
            Role(int(rng.integers(1, 3))),
            ops_choices[rng.integers(4)],
        )
    if kind == 3:
        return BlockRequest(Operand(int(rng.integers(2))), int(rng.integers(0, 2**64, dtype=np.uint64)))
    if kind == 4:
        rows, cols = int(rng.integers(0, 6)), int(rng.integers(1, 5))
        return BlockResponse(
            Operand(int(rng.integers(2))),
            int(rng.integers(0, 1000)),
            rng.standard_normal((rows, cols)),
        )
    if kind == 5:
        return EncodeComplete(
            int(rng.integers(0, 2**32)),
            int(rng.integers(0, 2**64, dtype=np.uint64)),
            int(rng.integers(0, 2**64, dtype=np.uint64)),
            int(rng.integers(0, 2**64, dtype=np.uint64)),
        )
    if kind == 6:
        return IterationStart(int(rng.integers(0, 2**32)), Operand(int(rng.integers(2))), _vector(rng))
    if kind == 7:
        return PartialProduct(
            int(rng.integers(0, 2**32)),
            int(rng.integers(0, 2**32)),
            Operand(int(rng.integers(2))),
            _vector(rng),
        )
    if kind == 8:
        return Cancel(int(rng.integers(0, 2**32)))
    return Shutdown()


class TestRoundTrips:
    def test_register(self):
        assert _rt(Register(7)).worker_id == 7

    def test_set_generator(self):
        g = rlnc(3, 5, 99)
        back = _rt(SetGenerator(g, Role.REDUNDANT, (Operand.X, Operand.XT)))
        assert back.role is Role.REDUNDANT
        assert back.operands == (Operand.X, Operand.XT)
        assert back.generator.coeffs.tobytes() == g.coeffs.tobytes()
        assert back.generator.seed == 99

    def test_block_request(self):
        back = _rt(BlockRequest(Operand.XT, 12))
        assert back.operand is Operand.XT and back.block_id == 12

    def test_block_response(self):
        m = np.array([[1.0, -2.0], [3.5, 0.0]])
        back = _rt(BlockResponse(Operand.X, 1, m))
        assert back.matrix.tobytes() == m.tobytes()

    def test_encode_complete(self):
        back = _rt(EncodeComplete(3, 8, 9, 123456789))
        assert (back.downloads_x, back.downloads_xt, back.encode_nanos) == (8, 9, 123456789)

    def test_iteration_start(self):
        back = _rt(IterationStart(42, Operand.X, np.array([1.0, 2.0])))
        assert back.iteration == 42
        assert np.array_equal(back.vector, [1.0, 2.0])

    def test_partial_product(self):
        back = _rt(PartialProduct(4, 17, Operand.XT, np.array([-1.0])))
        assert (back.worker_id, back.iteration, back.operand) == (4, 17, Operand.XT)

    def test_cancel_and_shutdown(self):
        assert _rt(Cancel(9)).iteration == 9
        _rt(Shutdown())

    def test_fuzz_all_variants(self):
        rng = np.random.default_rng(2024)
        for _ in range(10_000):
            _rt(_random_message(rng))


class TestFraming:
    def _reader(self, blob):
        stream = io.BytesIO(blob)
        return lambda n: stream.read(n)

    def test_stream_of_messages(self):
        msgs = [Register(1), Cancel(2), Shutdown()]
        blob = b"".join(encode_message(m) for m in msgs)
        read = self._reader(blob)
        out = [read_message(read) for _ in range(3)]
        assert isinstance(out[0], Register) and isinstance(out[2], Shutdown)
        assert read_message(read) is None  # clean EOF

    def test_truncated_header(self):
        read = self._reader(encode_message(Register(1))[:2])
        with pytest.raises(ProtocolError):
            read_message(read)

    def test_truncated_body(self):
        read = self._reader(encode_message(Register(1))[:-2])
        with pytest.raises(ProtocolError):
            read_message(read)

    def test_unknown_type(self):
        with pytest.raises(ProtocolError):
            decode_frame_body(99, b"")

    def test_malformed_payload(self):
        with pytest.raises(ProtocolError):
            decode_frame_body(Register.TYPE, b"\x01")  # too short for u32

    def test_vector_overrun_rejected(self):
        good = encode_message(IterationStart(1, Operand.X, np.array([1.0])))
        # claim a longer vector than the payload carries
        bad = bytearray(good)
        bad[10] = 9
        with pytest.raises(ProtocolError):
            decode_frame_body(bad[4], bytes(bad[5:]))
