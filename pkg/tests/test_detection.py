"""Decoy construction, wire encodings, and detection-round tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqsig.adversary import (
    Channel,
    InterceptMeasureResendZ,
    NoAttack,
    PauliXTamper,
    TapPoint,
    UnitaryTamperThenUndo,
)
from sqsig.detection import (
    DecoyRecord,
    DetectionMode,
    PermutationRecord,
    Verdict,
    alice_final_check,
    bob_z_check,
    build_decoys,
    decode_loc,
    decode_permutation,
    encode_loc,
    encode_permutation,
    extract_decoys,
    interleave,
    loc_announcement_bits,
    permutation_announcement_bits,
    run_detection_round,
)
from sqsig.keys import keygen_init
from sqsig.parties import classical_party, quantum_party
from sqsig.protocol import key_budget
from sqsig.quantum import Basis
from sqsig.roles import alice_sign


def run_round(mode, strategy, seed, n=2, d_z=2, d_x=2, message=None,
              threshold=0.0):
    """One signing plus detection round under the given mode and attack."""
    rng = np.random.default_rng(seed)
    message = message if message is not None else tuple(
        int(b) for b in rng.integers(0, 2, size=n)
    )
    store = keygen_init(key_budget(n, d_z, d_x, mode), rng)
    alice = quantum_party("alice")
    trent = classical_party("trent")
    signed = alice_sign(message, store, alice, rng, d_z=d_z, d_x=d_x)
    channel = Channel(strategy)
    result = run_detection_round(
        mode, channel, signed.transmission, threshold, alice, trent, store, rng
    )
    return result, signed, alice, trent


class TestBuildDecoys:
    def test_message_leads_z_decoys(self):
        rng = np.random.default_rng(2)
        alice = quantum_party("alice")
        _, records = build_decoys(3, 2, (1, 0, 1), rng, alice)
        z_bits = [r.bit for r in records if r.basis is Basis.Z]
        assert z_bits[:3] == [1, 0, 1]
        embedded = [r for r in records if r.embeds_message_bit is not None]
        assert sorted(r.embeds_message_bit for r in embedded) == [0, 1, 2]

    def test_empty_decoy_set(self):
        refs, records = build_decoys(
            0, 0, None, np.random.default_rng(0), quantum_party("alice")
        )
        assert refs == [] and records == []

    def test_deterministic_draws(self):
        alice = quantum_party("alice")
        _, a = build_decoys(4, 4, None, np.random.default_rng(5), alice)
        _, b = build_decoys(4, 4, None, np.random.default_rng(5), alice)
        assert [(r.basis, r.bit) for r in a] == [(r.basis, r.bit) for r in b]

    def test_basis_counts(self):
        _, records = build_decoys(
            5, 3, None, np.random.default_rng(1), quantum_party("alice")
        )
        assert sum(r.basis is Basis.Z for r in records) == 5
        assert sum(r.basis is Basis.X for r in records) == 3

    def test_embedding_overflow_rejected(self):
        with pytest.raises(ValueError):
            build_decoys(2, 2, (1, 0, 1), np.random.default_rng(0),
                         quantum_party("alice"))

    def test_x_decoy_cannot_embed(self):
        with pytest.raises(ValueError):
            DecoyRecord(position=0, basis=Basis.X, bit=0, embeds_message_bit=0)


class TestInterleave:
    def test_no_decoys_identity(self):
        alice = quantum_party("alice")
        carriers = [alice.prepare(Basis.Z, 0) for _ in range(2)]
        seq, decoy_pos, carrier_pos = interleave(
            carriers, [], np.random.default_rng(0)
        )
        assert seq == carriers
        assert decoy_pos == () and carrier_pos == (0, 1)

    def test_no_carriers(self):
        alice = quantum_party("alice")
        decoys = [alice.prepare(Basis.Z, 1) for _ in range(3)]
        seq, decoy_pos, carrier_pos = interleave(
            [], decoys, np.random.default_rng(0)
        )
        assert seq == decoys and carrier_pos == ()

    def test_partition_roundtrip(self):
        rng = np.random.default_rng(3)
        alice = quantum_party("alice")
        for _ in range(20):
            carriers = [alice.prepare(Basis.Z, 0) for _ in range(4)]
            decoys = [alice.prepare(Basis.X, 0) for _ in range(3)]
            seq, decoy_pos, carrier_pos = interleave(carriers, decoys, rng)
            got_decoys, got_carriers = extract_decoys(seq, decoy_pos)
            assert got_decoys == decoys
            assert got_carriers == carriers

    def test_relative_orders_preserved(self):
        rng = np.random.default_rng(4)
        alice = quantum_party("alice")
        carriers = [alice.prepare(Basis.Z, 0) for _ in range(3)]
        decoys = [alice.prepare(Basis.Z, 1) for _ in range(3)]
        seq, decoy_pos, carrier_pos = interleave(carriers, decoys, rng)
        assert [seq[p] for p in carrier_pos] == carriers
        assert [seq[p] for p in decoy_pos] == decoys


class TestWireEncodings:
    def test_loc_roundtrip(self):
        records = [
            DecoyRecord(position=0, basis=Basis.Z, bit=1),
            DecoyRecord(position=3, basis=Basis.X, bit=0),
            DecoyRecord(position=7, basis=Basis.Z, bit=0),
        ]
        decoded = decode_loc(encode_loc(records))
        assert [(r.position, r.basis, r.bit) for r in decoded] == [
            (0, Basis.Z, 1), (3, Basis.X, 0), (7, Basis.Z, 0),
        ]

    def test_loc_bits_per_record(self):
        records = [DecoyRecord(position=5, basis=Basis.X, bit=1)]
        bits = encode_loc(records)
        assert len(bits) == 18
        assert bits[:16] == (0,) * 13 + (1, 0, 1)  # 5 big-endian
        assert bits[16] == 1  # X basis flag

    def test_values_withheld_option(self):
        records = [DecoyRecord(position=2, basis=Basis.X, bit=1)]
        bits = encode_loc(records, include_values=False)
        assert bits[17] == 0

    def test_loc_bad_length_rejected(self):
        with pytest.raises(ValueError):
            decode_loc((0, 1, 0))

    def test_permutation_roundtrip(self):
        perm = PermutationRecord(mapping=(2, 0, 1))
        assert decode_permutation(encode_permutation(perm)).mapping == (2, 0, 1)

    def test_permutation_entry_out_of_range_rejected(self):
        bits = encode_permutation(PermutationRecord(mapping=(0, 1)))
        # Rewrite the second entry to the value 7 (out of range for d=2).
        tampered = bits[:16] + (0,) * 13 + (1, 1, 1)
        with pytest.raises(ValueError):
            decode_permutation(tampered)

    def test_budget_helpers(self):
        assert loc_announcement_bits(3, 2) == 18 * 5
        assert permutation_announcement_bits(5) == 16 * 5

    @given(st.permutations(list(range(6))))
    @settings(max_examples=40, deadline=None)
    def test_permutation_roundtrip_property(self, mapping):
        perm = PermutationRecord(mapping=tuple(mapping))
        assert decode_permutation(encode_permutation(perm)).mapping == tuple(mapping)


class TestPermutationRecord:
    def test_non_bijection_rejected(self):
        with pytest.raises(ValueError):
            PermutationRecord(mapping=(0, 0, 2))

    def test_inverse_composes_to_identity(self):
        perm = PermutationRecord(mapping=(3, 1, 0, 2))
        inv = perm.inverse()
        assert tuple(perm.mapping[j] for j in inv) == (0, 1, 2, 3)

    def test_singleton_identity(self):
        assert PermutationRecord(mapping=(0,)).inverse() == (0,)


class TestChecks:
    def _transmission(self, seed, d_z=3, d_x=3):
        rng = np.random.default_rng(seed)
        alice = quantum_party("alice")
        store = keygen_init(4, rng)
        signed = alice_sign((1, 0), store, alice, rng, d_z=d_z, d_x=d_x)
        return signed.transmission, alice, rng

    def test_honest_receiver_check_clean(self):
        transmission, _, rng = self._transmission(10)
        trent = classical_party("trent")
        errors, checked, _ = bob_z_check(
            trent, transmission.sequence, transmission.loc_z.entries, rng
        )
        assert (errors, checked) == (0, 3)

    def test_bit_flip_on_every_qubit_all_errors(self):
        transmission, _, rng = self._transmission(11)
        PauliXTamper().tap_qubits(
            TapPoint.FORWARD_ALICE_TO_TRENT, transmission.sequence, rng
        )
        trent = classical_party("trent")
        errors, checked, _ = bob_z_check(
            trent, transmission.sequence, transmission.loc_z.entries, rng
        )
        assert errors == checked == 3

    def test_z_measurement_attack_invisible_to_z_check(self):
        transmission, _, rng = self._transmission(12)
        InterceptMeasureResendZ().tap_qubits(
            TapPoint.FORWARD_ALICE_TO_TRENT, transmission.sequence, rng
        )
        trent = classical_party("trent")
        errors, _, _ = bob_z_check(
            trent, transmission.sequence, transmission.loc_z.entries, rng
        )
        assert errors == 0

    def test_compare_disabled_counts_nothing(self):
        transmission, _, rng = self._transmission(13)
        trent = classical_party("trent")
        _, checked, measured = bob_z_check(
            trent, transmission.sequence, transmission.loc_z.entries, rng,
            compare=False,
        )
        assert checked == 0
        assert len(measured) == 3


class TestRunDetectionRound:
    @pytest.mark.parametrize("mode", list(DetectionMode))
    def test_honest_round_continues_with_zero_errors(self, mode):
        result, _, _, _ = run_round(mode, NoAttack(), seed=20)
        rep = result.report
        assert rep.verdict is Verdict.CONTINUE
        assert rep.bob_z_errors == rep.alice_z_errors == rep.alice_x_errors == 0

    def test_improved_aborts_on_bit_flip_with_full_rate(self):
        result, _, _, _ = run_round(DetectionMode.IMPROVED, PauliXTamper(), seed=21)
        rep = result.report
        assert rep.verdict is Verdict.ABORT
        assert rep.bob_z_errors == rep.bob_z_checked == 2

    def test_measure_then_return_misses_flip_then_unflip(self):
        result, _, _, _ = run_round(
            DetectionMode.MEASURE_THEN_RETURN, PauliXTamper(), seed=22
        )
        assert result.report.verdict is Verdict.CONTINUE

    @pytest.mark.parametrize("u", ["X", "Z", "H"])
    def test_direct_reflection_misses_tamper_then_undo(self, u):
        result, _, _, _ = run_round(
            DetectionMode.DIRECT_REFLECTION, UnitaryTamperThenUndo(u), seed=23
        )
        rep = result.report
        assert rep.verdict is Verdict.CONTINUE
        assert rep.alice_z_errors == rep.alice_x_errors == 0

    def test_intercept_x_error_rate_half(self):
        # Z-measured |+>/|-> decoys fail Alice's X check half the time.
        errors = checked = 0
        for seed in range(300):
            result, _, _, _ = run_round(
                DetectionMode.IMPROVED, InterceptMeasureResendZ(), seed=seed,
                n=1, d_z=1, d_x=2,
            )
            rep = result.report
            errors += rep.alice_x_errors
            checked += rep.alice_x_checked
            assert rep.bob_z_errors == 0
        rate = errors / checked
        assert abs(rate - 0.5) < 3 * np.sqrt(0.25 / checked)

    def test_recovered_message_in_measuring_modes(self):
        for mode in (DetectionMode.IMPROVED, DetectionMode.IMPROVED_INLINE_OTP,
                     DetectionMode.MEASURE_THEN_RETURN):
            result, signed, _, _ = run_round(
                mode, NoAttack(), seed=24, n=3, d_z=3, d_x=3, message=(1, 1, 0)
            )
            assert result.recovered_m == (1, 1, 0)

    def test_carriers_survive_detection(self):
        result, signed, _, _ = run_round(DetectionMode.IMPROVED, NoAttack(),
                                         seed=25, n=4, d_z=4, d_x=4)
        assert len(result.carriers) == 4

    def test_threshold_tolerates_errors(self):
        # With threshold 1.0 even a full bit-flip round continues.
        result, _, _, _ = run_round(DetectionMode.IMPROVED, PauliXTamper(),
                                    seed=26, threshold=1.0)
        assert result.report.verdict is Verdict.CONTINUE

    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_honest_completeness_property(self, seed):
        for mode in (DetectionMode.IMPROVED, DetectionMode.DIRECT_REFLECTION):
            result, _, _, _ = run_round(mode, NoAttack(), seed=seed, n=1,
                                        d_z=1, d_x=1)
            assert result.report.verdict is Verdict.CONTINUE


class TestInlineAnnouncements:
    def _channel_round(self, seed):
        rng = np.random.default_rng(seed)
        n, d_z, d_x = 2, 2, 2
        mode = DetectionMode.IMPROVED_INLINE_OTP
        store = keygen_init(key_budget(n, d_z, d_x, mode), rng)
        alice = quantum_party("alice")
        trent = classical_party("trent")
        message = (1, 0)
        signed = alice_sign(message, store, alice, rng, d_z=d_z, d_x=d_x)
        transcript: list = []
        channel = Channel(NoAttack(), transcript=transcript)
        result = run_detection_round(
            mode, channel, signed.transmission, 0.0, alice, trent, store, rng
        )
        return result, signed, store, transcript

    def test_announcements_are_ciphertext(self):
        result, signed, store, transcript = self._channel_round(30)
        wire = {ev["name"]: ev["bits"] for ev in transcript
                if ev["event"] == "classical"}
        plain_loc = "".join(
            str(b) for b in encode_loc(signed.transmission.records)
        )
        assert wire["loc_ciphertext"] != plain_loc
        seg = store.find("loc_announce")
        assert seg is not None and seg.stop - seg.start == len(plain_loc)

    def test_permutation_announcement_encrypted_and_consumed(self):
        result, _, store, transcript = self._channel_round(31)
        assert result.report.verdict is Verdict.CONTINUE
        seg = store.find("perm_announce")
        assert seg is not None
        ranges = sorted((s.start, s.stop) for s in store.segments)
        for (a_start, a_stop), (b_start, b_stop) in zip(ranges, ranges[1:]):
            assert a_stop <= b_start  # pairwise disjoint

    def test_ciphertext_bit_flip_never_silently_valid(self):
        # Flipping wire bits either breaks the decode or changes the
        # mapping; it can never decode back to the original permutation.
        perm = PermutationRecord(mapping=(1, 2, 0))
        bits = encode_permutation(perm)
        for i in range(len(bits)):
            tampered = tuple(
                b ^ (j == i) for j, b in enumerate(bits)
            )
            try:
                decoded = decode_permutation(tampered)
            except ValueError:
                continue
            assert decoded.mapping != perm.mapping


class TestAliceFinalCheck:
    def test_shuffled_return_restores_and_passes(self):
        rng = np.random.default_rng(40)
        alice = quantum_party("alice")
        trent = classical_party("trent")
        store = keygen_init(2, rng)
        signed = alice_sign((1,), store, alice, rng, d_z=2, d_x=2)
        tx = signed.transmission
        # Trent measures the announced Z decoys, then shuffles all decoys.
        bob_z_check(trent, tx.sequence, tx.loc_z.entries, rng)
        decoys, _ = extract_decoys(tx.sequence, tx.decoy_positions)
        perm = PermutationRecord(mapping=(2, 0, 3, 1))
        returned = trent.reorder(decoys, list(perm.mapping))
        z_err, z_chk, x_err, x_chk = alice_final_check(
            alice, returned, perm, tx.loc_z.entries, tx.loc_x.entries, rng
        )
        assert (z_err, z_chk, x_err, x_chk) == (0, 2, 0, 2)

    def test_count_mismatch_rejected(self):
        rng = np.random.default_rng(41)
        alice = quantum_party("alice")
        with pytest.raises(ValueError):
            alice_final_check(alice, [], PermutationRecord(mapping=(0,)),
                              [], [], rng)
