import math
import threading

import numpy as np
import pytest

from dualink.combiner import (
    BoundedFrameQueue,
    CombinerStats,
    DesyncError,
    FrameMismatchError,
    combine_equal_gain,
    combine_mrc,
    combine_selection,
    combiner_loop,
)
from dualink.fec import ConvCode, conv_encode
from dualink.phy_types import LlrVector

CODE = ConvCode()


def vec(values, index=0, digest=7):
    return LlrVector(llrs=np.asarray(values, dtype=float),
                     frame_index=index, payload_digest=digest)


class TestCombineMrc:
    def test_sum(self):
        out = combine_mrc(vec([1.0, -2.0]), vec([3.0, 1.0]))
        assert np.allclose(out.llrs, [4.0, -1.0])

    def test_zero_branch_is_identity(self):
        a = vec([0.5, -1.5, 2.0])
        out = combine_mrc(a, vec([0.0, 0.0, 0.0]))
        assert np.array_equal(out.llrs, a.llrs)

    def test_commutative(self):
        rng = np.random.default_rng(0)
        a, b = vec(rng.normal(size=32)), vec(rng.normal(size=32))
        assert np.allclose(combine_mrc(a, b).llrs, combine_mrc(b, a).llrs)

    def test_associative(self):
        rng = np.random.default_rng(1)
        a, b, c = (vec(rng.normal(size=16)) for _ in range(3))
        left = combine_mrc(combine_mrc(a, b), c)
        right = combine_mrc(a, combine_mrc(b, c))
        assert np.allclose(left.llrs, right.llrs)

    def test_digest_mismatch_raises(self):
        with pytest.raises(FrameMismatchError):
            combine_mrc(vec([1.0], digest=1), vec([1.0], digest=2))

    def test_frame_index_mismatch_raises(self):
        with pytest.raises(FrameMismatchError):
            combine_mrc(vec([1.0], index=0), vec([1.0], index=1))

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            combine_mrc(vec([1.0, 2.0]), vec([1.0]))

    def test_equal_snr_branches_match_3db_single_link(self):
        """Monte-Carlo oracle on uncoded hard decisions: two equal-SNR
        branches combined equal one branch at Eb/N0 + 3.01 dB within 5%."""
        rng = np.random.default_rng(2)
        n = 400_000
        snr_db = 1.0
        for offset, expect_scale in ((0.0, 2.0),):
            snr = 10 ** (snr_db / 10)
            x = 1.0 - 2.0 * rng.integers(0, 2, n)
            noise = lambda: np.sqrt(1 / (2 * snr)) * (
                rng.standard_normal(n) + 1j * rng.standard_normal(n))
            llr_a = 4 * np.real(x + noise()) * snr
            llr_b = 4 * np.real(x + noise()) * snr
            combined_ber = np.mean(np.sign(llr_a + llr_b) != x)
            # single branch at doubled SNR (= +3.01 dB)
            expected = 0.5 * math.erfc(math.sqrt(expect_scale * snr))
            assert combined_ber == pytest.approx(expected, rel=0.05)


class TestAlternateCombiners:
    def test_selection_picks_stronger_branch(self):
        weak, strong = vec([0.1, -0.1]), vec([5.0, -3.0])
        out = combine_selection(weak, strong)
        assert np.array_equal(out.llrs, strong.llrs)

    def test_equal_gain_normalizes_scales(self):
        a, b = vec([2.0, -2.0]), vec([200.0, -200.0])
        out = combine_equal_gain(a, b)
        assert np.allclose(out.llrs, [2.0, -2.0])

    def test_zero_identity_preserves_decisions(self):
        a = vec([1.0, -3.0, 0.5])
        zero = vec([0.0, 0.0, 0.0])
        for combine in (combine_mrc, combine_selection, combine_equal_gain):
            out = combine(a, zero)
            assert np.array_equal(np.sign(out.llrs), np.sign(a.llrs))


def frames_for(bits_blocks, digests=None):
    out = []
    for i, bits in enumerate(bits_blocks):
        coded = conv_encode(np.asarray(bits, dtype=np.uint8), CODE)
        llr = 10.0 * (1.0 - 2.0 * coded.astype(float))
        digest = digests[i] if digests else i + 1
        out.append(LlrVector(llrs=llr, frame_index=i, payload_digest=digest))
    return out


class TestBoundedQueue:
    def test_fifo_order(self):
        q = BoundedFrameQueue(depth=4)
        for i in range(3):
            q.push(i)
        assert [q.pop() for _ in range(3)] == [0, 1, 2]

    def test_drop_oldest_on_overflow(self):
        q = BoundedFrameQueue(depth=2)
        for i in range(5):
            q.push(i)
        assert q.drops == 3
        assert q.pop() == 3
        assert q.pop() == 4

    def test_pop_after_close_drains_then_none(self):
        q = BoundedFrameQueue(depth=2)
        q.push("x")
        q.close()
        assert q.pop() == "x"
        assert q.pop() is None


class TestCombinerLoop:
    def test_matched_producers(self):
        rng = np.random.default_rng(3)
        blocks = [rng.integers(0, 2, 30) for _ in range(100)]
        qp, qw = BoundedFrameQueue(200), BoundedFrameQueue(200)
        for f in frames_for(blocks):
            qp.push(f)
        for f in frames_for(blocks):
            qw.push(f)
        qp.close()
        qw.close()
        stats = CombinerStats()
        results = list(combiner_loop(qp, qw, CODE, stats=stats))
        assert len(results) == 100
        assert stats.frames == 100
        assert qp.drops == qw.drops == 0
        for res, bits in zip(results, blocks):
            assert np.array_equal(res.bits_combined, np.asarray(bits, dtype=np.uint8))
            assert np.array_equal(res.bits_plc, res.bits_wireless)

    def test_three_lanes_per_frame(self):
        blocks = [np.zeros(20, dtype=np.uint8)]
        qp, qw = BoundedFrameQueue(4), BoundedFrameQueue(4)
        qp.push(frames_for(blocks)[0])
        qw.push(frames_for(blocks)[0])
        qp.close()
        qw.close()
        (res,) = combiner_loop(qp, qw, CODE)
        assert res.bits_plc.size == res.bits_wireless.size == res.bits_combined.size == 20

    def test_stalled_producer_drops_and_skips(self):
        rng = np.random.default_rng(4)
        blocks = [rng.integers(0, 2, 10) for _ in range(12)]
        qp, qw = BoundedFrameQueue(4), BoundedFrameQueue(16)
        for f in frames_for(blocks):  # overflows: frames 0..7 dropped
            qp.push(f)
        assert qp.drops == 8
        for f in frames_for(blocks):
            qw.push(f)
        qp.close()
        qw.close()
        stats = CombinerStats()
        results = list(combiner_loop(qp, qw, CODE, stats=stats))
        # the stale wireless frames are skipped; survivors get combined
        assert [r.frame_index for r in results] == [8, 9, 10, 11]
        assert stats.skipped["wireless"] == 8

    def test_desync_detected(self):
        blocks = [np.zeros(10, dtype=np.uint8)] * 2
        fa, fb = frames_for(blocks, digests=[1, 1])
        far = LlrVector(llrs=fb.llrs, frame_index=100, payload_digest=1)
        qp, qw = BoundedFrameQueue(4), BoundedFrameQueue(4)
        qp.push(fa)
        qw.push(far)
        qp.close()
        qw.close()
        with pytest.raises(DesyncError):
            list(combiner_loop(qp, qw, CODE))

    def test_threaded_matches_sequential(self):
        """Producer interleaving does not change the result stream."""
        rng = np.random.default_rng(5)
        blocks = [rng.integers(0, 2, 30) for _ in range(50)]
        frames_p, frames_w = frames_for(blocks), frames_for(blocks)

        qp, qw = BoundedFrameQueue(64), BoundedFrameQueue(64)
        for fp, fw in zip(frames_p, frames_w):
            qp.push(fp)
            qw.push(fw)
        qp.close()
        qw.close()
        sequential = list(combiner_loop(qp, qw, CODE))

        qp2, qw2 = BoundedFrameQueue(64), BoundedFrameQueue(64)
        results = []

        def produce(queue, frames):
            for f in frames:
                queue.push(f)
            queue.close()

        def consume():
            results.extend(combiner_loop(qp2, qw2, CODE))

        threads = [
            threading.Thread(target=produce, args=(qp2, frames_p)),
            threading.Thread(target=produce, args=(qw2, frames_w)),
            threading.Thread(target=consume),
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(results) == len(sequential)
        for a, b in zip(results, sequential):
            assert a.frame_index == b.frame_index
            assert np.array_equal(a.bits_combined, b.bits_combined)
