"""
离散事件队列
"""
import heapq
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

# 消息类型
KIND_UPDATE = "update"
KIND_BROADCAST = "broadcast"
KIND_U2U = "u2u"
ENVELOPE_KINDS = (KIND_UPDATE, KIND_BROADCAST, KIND_U2U)


@dataclass(frozen=True)
class Delivery:
    """信道上的一次投递，wire 为信封线格式"""

    time: int
    sender: str
    receiver: str
    kind: str
    round: int
    wire: bytes
    adversarial: bool = False

    def tampered(self, wire: bytes, **changes) -> "Delivery":
        return replace(self, wire=wire, adversarial=True, **changes)


@dataclass
class EventQueue:
    """按 (时间, 序号) 出队，序号保证同一时刻先入先出"""

    _heap: List[Tuple[int, int, Delivery]] = field(default_factory=list)
    _seq: int = 0

    def push(self, delivery: Delivery) -> None:
        heapq.heappush(self._heap, (delivery.time, self._seq, delivery))
        self._seq += 1

    def pop_due(self, now: int) -> Optional[Delivery]:
        if self._heap and self._heap[0][0] <= now:
            return heapq.heappop(self._heap)[2]
        return None

    def pop(self) -> Delivery:
        return heapq.heappop(self._heap)[2]

    def __len__(self) -> int:
        return len(self._heap)
