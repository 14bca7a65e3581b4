"""
Slotted two-hop simulator: source -> one chosen relay -> destination

Each slot has two mini-slots. In the first, the source sends its head packet
to the relay the policy picks; in the second, every relay holding a packet
tries to forward its head packet to the destination. Channel outcomes come
from an RngPlan and are indexed by (relay, slot), so every policy run under
the same plan faces the same channels.
"""

import logging
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Sequence

import numpy as np

from ..core.errors import DomainError
from ..core.model import FailureMode, SystemConfig
from ..core.rng import RngPlan, Stream
from ..policies.base_policy import BasePolicy, PolicyContext

logger = logging.getLogger(__name__)

METRICS = ("avg_cost", "avg_delay", "throughput", "delivered", "drops_suppressed")


@dataclass(frozen=True)
class PacketRecord:
    head_slot: int
    delivered_slot: Optional[int] = None
    relay_used: Optional[int] = None

    @property
    def delay(self) -> Optional[int]:
        if self.delivered_slot is None:
            return None
        return self.delivered_slot - self.head_slot + 1


@dataclass(eq=False)
class SimReport:
    """Metrics of one run; cost in cost-units/slot, delay in slots, throughput in packets/slot"""

    avg_cost: float
    avg_delay: float
    throughput: float
    delivered: int
    per_relay_mean_queue: np.ndarray
    drops_suppressed: int
    in_flight: int = 0
    packets_entered: int = 0
    dropped_at_source: int = 0
    final_queues: Optional[np.ndarray] = None
    time_series: Optional[np.ndarray] = None
    selections: Optional[np.ndarray] = None
    queue_trace: Optional[np.ndarray] = None
    packets: Optional[List[PacketRecord]] = None

    def metric(self, name: str) -> float:
        return float(getattr(self, name))


@dataclass
class BatchResult:
    seeds: List[int]
    reports: List[SimReport]
    mean: Dict[str, float] = field(default_factory=dict)
    stderr: Dict[str, float] = field(default_factory=dict)


def run(
    config: SystemConfig,
    policy: BasePolicy,
    rng: Optional[RngPlan] = None,
    record_series: bool = False,
    record_trace: bool = False,
    record_packets: bool = False,
) -> SimReport:
    """Simulates config.T slots from empty relay queues"""
    rng = rng or RngPlan(config.seed)
    params = config.relays
    M, T = config.M, config.T
    K = np.array([p.K for p in params])
    C = np.array([p.C for p in params], dtype=float)
    retry = config.on_fail == FailureMode.RETRY

    policy.prepare(params)
    queues = np.zeros(M, dtype=np.int64)
    buffers: List[Deque[int]] = [deque() for _ in range(M)]
    ctx = PolicyContext(slot=0, queues=queues, params=params, rng_stream=rng.policy_ties())

    cost_sum = 0.0
    queue_sums = np.zeros(M)
    delay_sum = 0
    delivered = 0
    entered = 0
    suppressed = 0
    dropped = 0
    head_slot = 0

    series = np.empty(T) if record_series else None
    selections = np.empty(T, dtype=np.int64) if record_trace else None
    queue_trace = np.empty((T + 1, M), dtype=np.int64) if record_trace else None
    packets: Optional[List[PacketRecord]] = [] if record_packets else None

    a_chunks = rng.channel_draws(Stream.CHANNEL_A, [p.f for p in params], T)
    w_chunks = rng.channel_draws(Stream.CHANNEL_W, [p.l for p in params], T)
    for (start, a_draws), (_, w_draws) in zip(a_chunks, w_chunks):
        for j in range(len(a_draws)):
            n = start + j
            cost = float(C @ queues)
            if n >= config.measure_from:
                cost_sum += cost
            queue_sums += queues
            if record_series:
                series[n] = cost
            if record_trace:
                queue_trace[n] = queues

            # mini-slot 1: source -> chosen relay
            ctx.slot = n
            chosen = policy.select(ctx)
            w_row = w_draws[j]
            if record_trace:
                selections[n] = chosen
            if a_draws[j, chosen]:
                # a full buffer only takes the packet if its head leaves this slot
                if queues[chosen] < K[chosen] or w_row[chosen]:
                    buffers[chosen].append(head_slot)
                    entered += 1
                    head_slot = n + 1
                else:
                    suppressed += 1
                    if not retry:
                        dropped += 1
                        head_slot = n + 1
            elif not retry:
                dropped += 1
                head_slot = n + 1

            # mini-slot 2: relays -> destination
            for r in np.flatnonzero(w_row):
                if buffers[r]:
                    first = buffers[r].popleft()
                    delivered += 1
                    delay_sum += n - first + 1
                    if record_packets:
                        packets.append(PacketRecord(first, n, int(r)))
            for r in range(M):
                queues[r] = len(buffers[r])

    if record_trace:
        queue_trace[T] = queues

    measured = T - config.measure_from
    in_flight = int(queues.sum())
    report = SimReport(
        avg_cost=cost_sum / measured,
        avg_delay=delay_sum / delivered if delivered else math.nan,
        throughput=delivered / T,
        delivered=delivered,
        per_relay_mean_queue=queue_sums / T,
        drops_suppressed=suppressed,
        in_flight=in_flight,
        packets_entered=entered,
        dropped_at_source=dropped,
        final_queues=queues.copy(),
        time_series=series,
        selections=selections,
        queue_trace=queue_trace,
        packets=packets,
    )
    logger.debug(
        "%s seed=%d: cost=%.4f delay=%.3f throughput=%.4f",
        policy.name, rng.master_seed, report.avg_cost, report.avg_delay, report.throughput,
    )
    return report


def aggregate(reports: Sequence[SimReport]) -> Dict[str, Dict[str, float]]:
    """Mean and standard error of each metric across runs"""
    mean, stderr = {}, {}
    k = len(reports)
    for name in METRICS:
        values = np.array([r.metric(name) for r in reports], dtype=float)
        mean[name] = float(values.mean())
        stderr[name] = float(values.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
    return {"mean": mean, "stderr": stderr}


def run_batch(
    config: SystemConfig,
    policy: BasePolicy,
    seeds: Sequence[int],
    threads: int = 1,
) -> BatchResult:
    """One independent run per seed; reports keep the order of seeds"""
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise DomainError("run_batch needs at least one seed")

    def one(seed: int) -> SimReport:
        return run(config.with_seed(seed), policy, RngPlan(seed))

    if threads > 1 and len(seeds) > 1:
        policy.prepare(config.relays)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(one, seeds))
    else:
        reports = [one(s) for s in seeds]

    stats = aggregate(reports)
    return BatchResult(seeds=seeds, reports=reports, mean=stats["mean"], stderr=stats["stderr"])
