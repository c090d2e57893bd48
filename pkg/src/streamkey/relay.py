"""Trusted-relay chain with delayed, endpoint-only privacy amplification.

Each hop runs reconciliation so neighbouring nodes share an identical hop
key; every relay then announces the XOR of its two hop keys. The
announcements telescope, so Alice's first-hop key equals Bob's last-hop key
XOR all announcements, giving the endpoints a shared reconciled string that
every relay on the path also knows. Privacy amplification happens only at
the endpoints with a pad the relays never see, so a relay's best guess at
the final key matches it on about half the bits.
"""

from __future__ import annotations

from dataclasses import dataclass

from .bitvec import BitString
from .privacy_amp import PadStore, SecurityLedger
from .rates import ec_cost
from .reconciliation import reconcile, verify
from .session import (
    ChannelModel,
    SessionParams,
    TapeSet,
    estimate_params,
    simulate_raw,
)

__all__ = [
    "HopSpec",
    "RelayChain",
    "ChainRun",
    "EndToEndResult",
    "run_chain",
    "end_to_end_pa",
    "relay_adversary_report",
    "chain_from_dict",
    "chain_to_dict",
]


@dataclass(frozen=True)
class HopSpec:
    """Per-hop link parameters (reconciliation only, no per-hop PA)."""

    n_target: int
    flip_prob: float = 0.02
    loss_prob: float = 0.0
    sample_fraction: float = 0.1
    eps_pe: float = 2.0 ** -20
    eps_ec: float = 2.0 ** -30
    tag_bits: int = 32


@dataclass(frozen=True)
class RelayChain:
    """A linear chain Alice, R_1 .. R_t, Bob with one hop spec per link."""

    nodes: tuple[str, ...]
    hops: tuple[HopSpec, ...]
    compromised: frozenset[str] = frozenset()

    def __post_init__(self):
        if len(self.nodes) < 3:
            raise ValueError("a relay chain needs at least one intermediate node")
        if len(self.hops) != len(self.nodes) - 1:
            raise ValueError(
                f"{len(self.nodes)} nodes need {len(self.nodes) - 1} hop specs, "
                f"got {len(self.hops)}"
            )

    @property
    def relays(self) -> tuple[str, ...]:
        return self.nodes[1:-1]


@dataclass(frozen=True)
class ChainRun:
    chain: RelayChain
    hop_keys: tuple[BitString, ...]
    announcements: tuple[BitString, ...]
    alice_shared: BitString
    bob_shared: BitString
    hop_outcomes: tuple[str, ...]

    @property
    def shared_len(self) -> int:
        return len(self.alice_shared)


def _run_hop(spec: HopSpec, tapes: TapeSet) -> tuple[BitString, str]:
    """Reconcile one hop; returns the shared hop key (post-sampling) and status."""
    params = SessionParams(
        n_target=spec.n_target,
        sample_fraction=spec.sample_fraction,
        eps_pe=spec.eps_pe,
        eps_ec=spec.eps_ec,
        predicted_eb=spec.flip_prob,
        predicted_ep=spec.flip_prob,
        tag_bits=spec.tag_bits,
    )
    channel = ChannelModel(spec.flip_prob, spec.flip_prob, spec.loss_prob)
    raw = simulate_raw(params, channel, tapes)
    est = estimate_params(raw.alice, raw.bob, spec.sample_fraction,
                          spec.eps_pe, tapes.rng("sampling"))
    i_ec = ec_cost(est.window.log2_size(), spec.eps_ec)
    if i_ec >= est.window.n:
        return BitString(0), "hop-negative-rate"
    from .hashing import generate_toeplitz

    ir_matrix = generate_toeplitz(i_ec, est.window.n, tapes.seed_source("ir-matrix"))
    hint = est.alice_remainder ^ est.bob_remainder
    rec = reconcile(est.alice_remainder, est.bob_remainder, ir_matrix,
                    est.window, hint=hint)
    if not rec.ok:
        return BitString(0), "hop-reconciliation-failed"
    ver = verify(est.alice_remainder, rec.corrected, spec.tag_bits,
                 tapes.seed_source("verify"))
    if not ver.passed:
        return BitString(0), "hop-verification-failed"
    return est.alice_remainder, "ok"


def run_chain(chain: RelayChain, tapes: TapeSet | int) -> ChainRun:
    """Run every hop, truncate to the shortest hop key, and swap keys by
    XOR announcements. Any hop failure aborts the chain."""
    if isinstance(tapes, int):
        tapes = TapeSet(tapes)
    hop_keys = []
    outcomes = []
    for i, spec in enumerate(chain.hops):
        key, status = _run_hop(spec, tapes.scoped(f"hop-{i}"))
        outcomes.append(status)
        if status != "ok":
            raise RuntimeError(f"hop {i} failed: {status}")
        hop_keys.append(key)
    min_len = min(len(k) for k in hop_keys)
    hop_keys = [k[:min_len] for k in hop_keys]
    announcements = tuple(
        hop_keys[j - 1] ^ hop_keys[j] for j in range(1, len(hop_keys))
    )
    alice_shared = hop_keys[0]
    bob_shared = hop_keys[-1]
    for a in announcements:
        bob_shared = bob_shared ^ a
    return ChainRun(
        chain=chain,
        hop_keys=tuple(hop_keys),
        announcements=announcements,
        alice_shared=alice_shared,
        bob_shared=bob_shared,
        hop_outcomes=tuple(outcomes),
    )


@dataclass(frozen=True)
class EndToEndResult:
    alice_final: BitString
    bob_final: BitString
    relay_match: dict
    pad_len_used: int


def end_to_end_pa(run: ChainRun, pad_store: PadStore, ledger: SecurityLedger
                  ) -> EndToEndResult:
    """Endpoint-only stream privacy amplification over the swapped key.

    Relays hold the reconciled string and all announcements but not the
    endpoints' pad; the per-relay match statistic is the fraction of final
    key bits a relay's best guess (the reconciled string itself) gets
    right. A compromised endpoint hands the pad over and trivially matches
    everything.
    """
    n = run.shared_len
    if pad_store.cols < n:
        raise ValueError(f"pad shortfall: need {n} columns, store has {pad_store.cols}")
    grant = ledger.draw(pad_store.matrix_id)
    if not grant.granted:
        raise ValueError("pad reuse budget exhausted")
    pad = pad_store.make_pad()
    pad_bits = pad.pad_bits[:n]
    alice_final = run.alice_shared ^ pad_bits
    bob_final = run.bob_shared ^ pad_bits
    relay_match = {}
    for name in run.chain.relays:
        if name in run.chain.compromised:
            guess = alice_final  # pad handed over, complete leak
        else:
            guess = run.alice_shared
        agree = n - (guess ^ alice_final).weight()
        relay_match[name] = agree / n
    return EndToEndResult(alice_final, bob_final, relay_match, n)


def relay_adversary_report(run: ChainRun, e2e: EndToEndResult,
                           sessions_observed: int = 1) -> list[dict]:
    """Per-relay knowledge summary for one or more sessions on one matrix.

    Every relay knows the full reconciled string (delayed swapping announces
    it) and none of the pad. ``sessions_observed`` counts the
    (reconciled, final) pairs exposed under the same reused matrix, which is
    the raw material any later cryptanalysis would start from; no analysis
    of it is attempted here.
    """
    rows = []
    for name in run.chain.relays:
        compromised = name in run.chain.compromised
        rows.append({
            "relay": name,
            "compromised": compromised,
            "reconciled_bits_known": run.shared_len,
            "pad_bits_known": run.shared_len if compromised else 0,
            "final_key_match": e2e.relay_match[name],
            "matrix_reuse_exposures": sessions_observed,
        })
    return rows


def chain_to_dict(chain: RelayChain) -> dict:
    return {
        "nodes": list(chain.nodes),
        "hops": [
            {
                "n_target": h.n_target,
                "flip_prob": h.flip_prob,
                "loss_prob": h.loss_prob,
                "sample_fraction": h.sample_fraction,
                "eps_pe": h.eps_pe,
                "eps_ec": h.eps_ec,
                "tag_bits": h.tag_bits,
            }
            for h in chain.hops
        ],
        "compromised": sorted(chain.compromised),
    }


def chain_from_dict(d: dict) -> RelayChain:
    return RelayChain(
        nodes=tuple(d["nodes"]),
        hops=tuple(HopSpec(**h) for h in d["hops"]),
        compromised=frozenset(d.get("compromised", [])),
    )
