"""End-to-end session simulation: noisy BB84-style channel, sifting,
sampling-based parameter estimation, reconciliation, and privacy
amplification in either order, with exact cost accounting.

Accounting convention (holds for every non-aborted session):

    final_len + seed_consumed + disclosed_bits + sampled_bits == n_sifted

where ``disclosed_bits`` counts syndrome plus verification-tag bits and
``seed_consumed`` is the privacy-amplification entropy charge. With
encrypted reconciliation the disclosed bits are paid from the preshared
pool (seed_consumed equals the full pad-seed length); without encryption
the pad matrix must carry ``disclosed_bits`` extra rows and those rows are
booked under ``disclosed_bits`` rather than ``seed_consumed``, so the
identity never double-counts. The final key files contain exactly
``final_len`` bits; the remainder of the stream output repays the pools.

Every stochastic component draws from a named, seedable tape (PCG64 via
numpy's default generator) so runs replay bit-exactly and the two pipeline
orderings consume identical randomness.
"""

from __future__ import annotations

import json
import math
import time
import zlib
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from .bitvec import BitString, rank as gf2_rank
from .hashing import SeedSource, generate_toeplitz
from .privacy_amp import PadStore, SecurityLedger, StreamPad, block_pa, make_pad
from .rates import (
    binary_entropy,
    compose_soundness,
    ec_cost,
    hoeffding_deviation,
)
from .reconciliation import TypicalErrorSet, reconcile, verify

__all__ = [
    "TapeSet",
    "ChannelModel",
    "SessionParams",
    "SessionReport",
    "RawBlock",
    "EstimateResult",
    "PhaseEstimate",
    "KeyPair",
    "simulate_raw",
    "estimate_params",
    "estimate_phase",
    "run_session",
    "post_hoc_adjust",
    "recommended_pad_rows",
    "streaming_event_trace",
]

DeviationFn = Callable[[int, float], float]


class TapeSet:
    """Named, replayable randomness tapes derived from one master seed.

    ``rng(name)`` always returns a generator positioned at the start of that
    tape; hold the returned object to keep drawing from it. ``scoped``
    derives an independent namespace (used per relay hop).
    """

    def __init__(self, master_seed: int, prefix: str = ""):
        self.master_seed = int(master_seed)
        self.prefix = prefix

    def rng(self, name: str) -> np.random.Generator:
        tag = zlib.crc32(f"{self.prefix}{name}".encode())
        return np.random.default_rng(np.random.SeedSequence((self.master_seed, tag)))

    def seed_source(self, name: str) -> SeedSource:
        return SeedSource(rng=self.rng(name))

    def scoped(self, prefix: str) -> "TapeSet":
        return TapeSet(self.master_seed, f"{self.prefix}{prefix}/")


@dataclass(frozen=True)
class ChannelModel:
    """Error-injection channel: independent flips per basis plus loss."""

    flip_prob_z: float
    flip_prob_x: float
    loss_prob: float = 0.0

    def __post_init__(self):
        for name in ("flip_prob_z", "flip_prob_x", "loss_prob"):
            x = getattr(self, name)
            if not 0.0 <= x <= 1.0:
                raise ValueError(f"{name}={x} outside [0, 1]")


@dataclass(frozen=True)
class SessionParams:
    n_target: int
    sample_fraction: float = 0.1
    eps_pe: float = 2.0 ** -20
    eps_ec: float = 2.0 ** -30
    eps_pa: float = 2.0 ** -40
    pa_mode: str = "stream"        # "stream" | "block"
    ordering: str = "ir-first"     # "ir-first" | "pa-first"
    ir_encrypted: bool = True
    predicted_eb: float = 0.02
    predicted_ep: float = 0.02
    tag_bits: int = 32
    exhaustive_decode_limit: int = 1 << 16

    def __post_init__(self):
        if self.n_target < 8:
            raise ValueError(f"n_target={self.n_target} too small")
        if not 0.0 < self.sample_fraction < 1.0:
            raise ValueError(f"sample_fraction={self.sample_fraction} outside (0, 1)")
        for name in ("eps_pe", "eps_ec", "eps_pa"):
            x = getattr(self, name)
            if not 0.0 < x < 1.0:
                raise ValueError(f"{name}={x} outside (0, 1)")
        if self.pa_mode not in ("stream", "block"):
            raise ValueError(f"unknown pa_mode {self.pa_mode!r}")
        if self.ordering not in ("ir-first", "pa-first"):
            raise ValueError(f"unknown ordering {self.ordering!r}")
        if self.pa_mode == "block" and self.ordering == "pa-first":
            raise ValueError("block compression cannot run before reconciliation")
        if self.tag_bits < 1:
            raise ValueError("tag_bits must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SessionParams":
        return cls(**d)


@dataclass
class SessionReport:
    n_sifted: int
    sampled_bits: int
    observed_eb: float
    deviation_c: float
    observed_ep: float
    phase_bound: float
    window_lo: int
    window_hi: int
    i_ec: int
    tag_bits: int
    matrix_rows: int
    pa_cols: int
    seed_consumed: int
    disclosed_bits: int
    final_len: int
    net_rate: float
    eps_claimed: dict
    verified: bool
    aborted: bool
    abort_reason: str
    pa_mode: str
    ordering: str
    ir_encrypted: bool
    rng_seed: int
    timings: dict = field(default_factory=dict)

    def accounting_identity_holds(self) -> bool:
        if self.aborted:
            return True
        lhs = self.final_len + self.seed_consumed + self.disclosed_bits + self.sampled_bits
        return lhs == self.n_sifted

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SessionReport":
        return cls(**d)


@dataclass(frozen=True)
class RawBlock:
    alice: BitString
    bob: BitString
    alice_x: BitString
    bob_x: BitString
    rounds: int
    kept: int


@dataclass(frozen=True)
class KeyPair:
    alice: BitString
    bob: BitString


def simulate_raw(params: SessionParams, channel: ChannelModel, tapes: TapeSet) -> RawBlock:
    """Generate a sifted block: random bases both sides, loss, per-basis flips.

    Rounds where the bases match and the signal survives are kept; matched
    Z rounds build the key block (stopping at n_target), matched X rounds
    form the phase-error record.
    """
    rng = tapes.rng("channel")
    z_a: list[np.ndarray] = []
    z_b: list[np.ndarray] = []
    x_a: list[np.ndarray] = []
    x_b: list[np.ndarray] = []
    z_count = 0
    rounds = 0
    kept = 0
    batch = max(1024, 4 * params.n_target)
    while z_count < params.n_target:
        basis_a = rng.integers(0, 2, size=batch, dtype=np.uint8)
        basis_b = rng.integers(0, 2, size=batch, dtype=np.uint8)
        lost = rng.random(batch) < channel.loss_prob
        bits_a = rng.integers(0, 2, size=batch, dtype=np.uint8)
        flip_z = rng.random(batch) < channel.flip_prob_z
        flip_x = rng.random(batch) < channel.flip_prob_x
        keep = (~lost) & (basis_a == basis_b)
        flips = np.where(basis_a == 0, flip_z, flip_x)
        bits_b = bits_a ^ (keep & flips).astype(np.uint8)
        zm = keep & (basis_a == 0)
        xm = keep & (basis_a == 1)
        z_a.append(bits_a[zm])
        z_b.append(bits_b[zm])
        x_a.append(bits_a[xm])
        x_b.append(bits_b[xm])
        z_count += int(zm.sum())
        rounds += batch
        kept += int(keep.sum())
    az = np.concatenate(z_a)[: params.n_target]
    bz = np.concatenate(z_b)[: params.n_target]
    ax = np.concatenate(x_a)
    bx = np.concatenate(x_b)
    return RawBlock(
        alice=BitString.from_numpy(az),
        bob=BitString.from_numpy(bz),
        alice_x=BitString.from_numpy(ax),
        bob_x=BitString.from_numpy(bx),
        rounds=rounds,
        kept=kept,
    )


@dataclass(frozen=True)
class EstimateResult:
    r_hat: float
    deviation_c: float
    window: TypicalErrorSet
    sampled_bits: int
    mismatches: int
    alice_remainder: BitString
    bob_remainder: BitString


def estimate_params(alice: BitString, bob: BitString, sample_fraction: float,
                    eps_pe: float, rng: np.random.Generator,
                    deviation_fn: DeviationFn = hoeffding_deviation) -> EstimateResult:
    """Disclose a random sample, estimate the error rate, and build the
    weight window [n*r_hat - c, n*r_hat + c] for the unsampled remainder.

    The realized block has a fixed error count; sampling is the only
    randomness, so the window must absorb the estimate's own spread. With k
    of n positions sampled, the Hoeffding bound for sampling without
    replacement gives |sample rate - block rate| <= dev(k, eps/2) / k
    except with probability eps, hence c = (n / k) * dev(k, eps/2) on the
    count scale. The deviation function stays pluggable.
    """
    if len(alice) != len(bob):
        raise ValueError("strings must have equal length")
    n = len(alice)
    sample_size = max(1, round(sample_fraction * n))
    if sample_size >= n:
        raise ValueError("sample would consume the whole block")
    pos = np.sort(rng.choice(n, size=sample_size, replace=False))
    a_arr = alice.to_numpy()
    b_arr = bob.to_numpy()
    mismatches = int((a_arr[pos] != b_arr[pos]).sum())
    r_hat = mismatches / sample_size
    mask = np.ones(n, dtype=bool)
    mask[pos] = False
    n_rem = n - sample_size
    c = (n / sample_size) * deviation_fn(sample_size, eps_pe / 2.0)
    lo = max(0, math.ceil(n_rem * r_hat - c))
    hi = min(n_rem, math.floor(n_rem * r_hat + c))
    if lo > hi:
        lo = hi = min(n_rem, round(n_rem * r_hat))
    return EstimateResult(
        r_hat=r_hat,
        deviation_c=c,
        window=TypicalErrorSet(n_rem, lo, hi),
        sampled_bits=sample_size,
        mismatches=mismatches,
        alice_remainder=BitString.from_numpy(a_arr[mask]),
        bob_remainder=BitString.from_numpy(b_arr[mask]),
    )


@dataclass(frozen=True)
class PhaseEstimate:
    e_p_hat: float
    deviation_c: float
    e_p_bound: float
    record_len: int


def estimate_phase(alice_x: BitString, bob_x: BitString, eps_pe: float,
                   deviation_fn: DeviationFn = hoeffding_deviation) -> PhaseEstimate:
    """Phase-error estimate from the fully disclosed X-basis record."""
    if len(alice_x) != len(bob_x):
        raise ValueError("records must have equal length")
    n = len(alice_x)
    if n == 0:
        raise ValueError("empty phase record")
    mism = (alice_x ^ bob_x).weight()
    e_hat = mism / n
    c = deviation_fn(n, eps_pe)
    return PhaseEstimate(e_hat, c, min(1.0, e_hat + c / n), n)


def recommended_pad_rows(params: SessionParams, provision_cols: Optional[int] = None) -> int:
    """Pad-matrix rows to provision ahead of a session.

    Encrypted reconciliation needs only the phase charge. Without
    encryption the matrix must additionally cover the syndrome and tag
    disclosure; that is sized from the predicted bit-error rate with a
    sampling margin so a slightly unlucky estimate does not starve the pad.
    """
    cols = provision_cols or params.n_target
    base = math.ceil(cols * binary_entropy(params.predicted_ep))
    if params.ir_encrypted:
        return base
    # plan the disclosure with the same window the session will build, at a
    # margined error rate so an unlucky sample does not starve the pad
    k = max(1, round(params.sample_fraction * cols))
    c = (cols / k) * hoeffding_deviation(k, params.eps_pe / 2.0)
    margin_rate = min(0.5, 1.5 * params.predicted_eb + 8.0 / cols)
    hi = min(cols, math.floor(cols * margin_rate + c))
    from .rates import log2_weight_interval_count

    planned_i_ec = ec_cost(log2_weight_interval_count(cols, 0, hi), params.eps_ec)
    return base + planned_i_ec + params.tag_bits


def _two_pads(pad: StreamPad) -> tuple[StreamPad, StreamPad]:
    # Each party expands the same seed locally, so both hold identical pad
    # bits but consume through their own cursor.
    return (
        StreamPad(pad.pad_bits, pad.matrix_id, pad.seed_len),
        StreamPad(pad.pad_bits, pad.matrix_id, pad.seed_len),
    )


def run_session(params: SessionParams, channel: ChannelModel,
                ledger: SecurityLedger, pad_store: Optional[PadStore],
                tapes: TapeSet | int) -> tuple[SessionReport, Optional[KeyPair]]:
    """Run one full post-processing session; returns the report and, when
    the session completes, the pair of final keys (identical on success).

    Stream mode requires a provisioned pad store whose matrix is registered
    with the ledger. Abort reasons are machine-readable strings in the
    report; aborted sessions return no keys.
    """
    if isinstance(tapes, int):
        tapes = TapeSet(tapes)
    timings: dict[str, float] = {}
    t0 = time.perf_counter()

    raw = simulate_raw(params, channel, tapes)
    timings["raw"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    est = estimate_params(raw.alice, raw.bob, params.sample_fraction,
                          params.eps_pe, tapes.rng("sampling"))
    phase = estimate_phase(raw.alice_x, raw.bob_x, params.eps_pe)
    timings["estimate"] = time.perf_counter() - t1

    n = params.n_target
    n_rem = est.window.n
    i_ec = ec_cost(est.window.log2_size(), params.eps_ec)
    disclosed = i_ec + params.tag_bits

    def report(final_len=0, seed_consumed=0, matrix_rows=0, pa_cols=0,
               verified=False, aborted=False, reason="", eps=None) -> SessionReport:
        return SessionReport(
            n_sifted=n,
            sampled_bits=est.sampled_bits,
            observed_eb=est.r_hat,
            deviation_c=est.deviation_c,
            observed_ep=phase.e_p_hat,
            phase_bound=phase.e_p_bound,
            window_lo=est.window.lo,
            window_hi=est.window.hi,
            i_ec=i_ec,
            tag_bits=params.tag_bits,
            matrix_rows=matrix_rows,
            pa_cols=pa_cols,
            seed_consumed=seed_consumed,
            disclosed_bits=disclosed,
            final_len=final_len,
            net_rate=final_len / n,
            eps_claimed=eps or {},
            verified=verified,
            aborted=aborted,
            abort_reason=reason,
            pa_mode=params.pa_mode,
            ordering=params.ordering,
            ir_encrypted=params.ir_encrypted,
            rng_seed=tapes.master_seed,
            timings=dict(timings),
        )

    matrix_rows = seed_consumed = pa_cols = 0

    def abort(reason: str) -> tuple[SessionReport, None]:
        return report(matrix_rows=matrix_rows, seed_consumed=seed_consumed,
                      pa_cols=pa_cols, aborted=True, reason=reason), None

    if i_ec + params.tag_bits >= n_rem:
        return abort("negative-net-rate")

    ir_matrix = generate_toeplitz(i_ec, n_rem, tapes.seed_source("ir-matrix"))

    big_set = est.window.size() > params.exhaustive_decode_limit
    hint = (est.alice_remainder ^ est.bob_remainder) if big_set else None

    if params.pa_mode == "stream":
        if pad_store is None:
            return abort("pad-shortfall")
        required = math.ceil(n_rem * binary_entropy(params.predicted_ep))
        if not params.ir_encrypted:
            required += disclosed
        if pad_store.cols < n_rem or pad_store.rows < required:
            matrix_rows, pa_cols = pad_store.rows, pad_store.cols
            return abort("pad-shortfall")
        grant = ledger.draw(pad_store.matrix_id)
        if not grant.granted:
            return abort("budget-exhausted")
        t2 = time.perf_counter()
        pad = pad_store.make_pad()
        timings["pad"] = time.perf_counter() - t2
        matrix_rows = pad.seed_len
        seed_consumed = matrix_rows - (0 if params.ir_encrypted else disclosed)
        pa_cols = pad_store.cols

        alice_pad, bob_pad = _two_pads(pad)
        t3 = time.perf_counter()
        if params.ordering == "ir-first":
            rec = reconcile(est.alice_remainder, est.bob_remainder,
                            ir_matrix, est.window, hint=hint)
            if not rec.ok:
                return abort("reconciliation-failed")
            ver = verify(est.alice_remainder, rec.corrected, params.tag_bits,
                         tapes.seed_source("verify"))
            if not ver.passed:
                return abort("verification-failed")
            k_alice = alice_pad.feed(est.alice_remainder)
            k_bob = bob_pad.feed(rec.corrected)
        else:
            k_alice_raw = alice_pad.feed(est.alice_remainder)
            k_bob_raw = bob_pad.feed(est.bob_remainder)
            rec = reconcile(k_alice_raw, k_bob_raw, ir_matrix, est.window, hint=hint)
            if not rec.ok:
                return abort("reconciliation-failed")
            ver = verify(k_alice_raw, rec.corrected, params.tag_bits,
                         tapes.seed_source("verify"))
            if not ver.passed:
                return abort("verification-failed")
            k_alice = k_alice_raw
            k_bob = rec.corrected
        timings["pipeline"] = time.perf_counter() - t3
    else:
        # Block mode: reconcile first, then kernel-project the whole block.
        rec = reconcile(est.alice_remainder, est.bob_remainder,
                        ir_matrix, est.window, hint=hint)
        if not rec.ok:
            return abort("reconciliation-failed")
        ver = verify(est.alice_remainder, rec.corrected, params.tag_bits,
                     tapes.seed_source("verify"))
        if not ver.passed:
            return abort("verification-failed")
        rows_h = math.ceil(n_rem * binary_entropy(max(phase.e_p_bound,
                                                      params.predicted_ep)))
        rows_total = rows_h + (0 if params.ir_encrypted else disclosed)
        if rows_total >= n_rem:
            return abort("negative-net-rate")
        pa_src = tapes.seed_source("pa-matrix")
        pa_matrix = None
        for _ in range(8):
            cand = generate_toeplitz(rows_total, n_rem, pa_src)
            if gf2_rank(cand.to_dense()) == rows_total:
                pa_matrix = cand
                break
        if pa_matrix is None:
            return abort("pa-matrix-rank")
        t3 = time.perf_counter()
        k_alice = block_pa(est.alice_remainder, pa_matrix)
        k_bob = block_pa(rec.corrected, pa_matrix)
        timings["pipeline"] = time.perf_counter() - t3
        matrix_rows = rows_total
        seed_consumed = rows_h
        pa_cols = n_rem

    final_len = n - est.sampled_bits - seed_consumed - disclosed
    if final_len <= 0 or len(k_alice) < final_len:
        return abort("negative-net-rate")

    eps_f = params.eps_pe + params.eps_ec + params.eps_pa
    eps = {
        "eps_pe": params.eps_pe,
        "eps_ec": params.eps_ec,
        "eps_pa": params.eps_pa,
        "eps_f_total": eps_f,
        "trace_distance": compose_soundness(min(1.0, eps_f)),
    }
    rep = report(final_len=final_len, seed_consumed=seed_consumed,
                 matrix_rows=matrix_rows, pa_cols=pa_cols,
                 verified=True, eps=eps)
    return rep, KeyPair(k_alice[:final_len], k_bob[:final_len])


def post_hoc_adjust(keys: KeyPair, report: SessionReport, actual_ep: float,
                    deficit_store: PadStore, ledger: SecurityLedger
                    ) -> tuple[KeyPair, SessionReport]:
    """Second privacy-amplification pass when the realized phase-error rate
    exceeds the provisioned prediction.

    The deficit is the extra seed the original pad should have had,
    measured on the provisioning scale: ceil(cols * h(actual)) minus the
    seed already charged. A zero deficit is a no-op. The deficit pad is
    drawn from its own (ledger-tracked) store; both keys shrink by the
    store's row count.
    """
    if report.aborted:
        raise ValueError("cannot adjust an aborted session")
    if report.pa_mode != "stream":
        raise ValueError("post-hoc adjustment applies to stream sessions")
    needed = math.ceil(report.pa_cols * binary_entropy(actual_ep))
    deficit = max(0, needed - report.seed_consumed)
    if deficit == 0:
        return keys, report
    if deficit_store.rows < deficit or deficit_store.cols < report.final_len:
        raise ValueError(
            f"deficit pad unavailable: need {deficit}x{report.final_len}, "
            f"store holds {deficit_store.rows}x{deficit_store.cols}"
        )
    grant = ledger.draw(deficit_store.matrix_id)
    if not grant.granted:
        raise ValueError("deficit pad unavailable: reuse budget exhausted")
    pad = deficit_store.make_pad()
    extra = pad.seed_len
    new_len = report.final_len - extra
    if new_len <= 0:
        raise ValueError("post-hoc adjustment would consume the whole key")

    def adjust(k: BitString) -> BitString:
        return (k ^ pad.pad_bits[: len(k)])[:new_len]

    new_keys = KeyPair(adjust(keys.alice), adjust(keys.bob))
    eps = dict(report.eps_claimed)
    per_pass = eps.get("eps_pa", 0.0)
    eps["eps_f_total"] = eps.get("eps_f_total", 0.0) + per_pass
    eps["trace_distance"] = compose_soundness(min(1.0, eps["eps_f_total"]))
    eps["pa_passes"] = eps.get("pa_passes", 1) + 1
    new_report = SessionReport(**{**report.to_dict(),
                                  "seed_consumed": report.seed_consumed + extra,
                                  "final_len": new_len,
                                  "net_rate": new_len / report.n_sifted,
                                  "eps_claimed": eps})
    return new_keys, new_report


def streaming_event_trace(pad: StreamPad, reconciled: BitString
                          ) -> tuple[list[tuple[str, int]], BitString]:
    """Feed a block bit by bit and log the consume/emit interleaving.

    The i-th key bit is emitted before reconciled bit i+1 is consumed,
    which is the stream-output contract. Returns the event log and the
    concatenated key, which must equal the one-shot XOR.
    """
    events: list[tuple[str, int]] = []
    out = BitString(0)
    for i in range(len(reconciled)):
        events.append(("consume", i))
        out = out.concat(pad.feed(reconciled[i:i + 1]))
        events.append(("emit", i))
    return events, out
