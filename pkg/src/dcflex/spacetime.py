"""Space-time network over data centers and scheduling slots.

Every (data center, slot) pair becomes one virtual node with a single
1-based integer id, so the whole horizon can be addressed along one axis.
Virtual links connect distinct DCs within a slot (spatial) and adjacent
slots within a DC (temporal). Links are undirected but carry a fixed
canonical orientation; the sign of a flow value encodes direction.
"""

from dataclasses import dataclass

SPATIAL = "spatial"
TEMPORAL = "temporal"


@dataclass(frozen=True)
class VirtualLink:
    """One undirected link with a canonical orientation (tail -> head).

    Spatial links point from the lower DC index to the higher one within a
    slot; temporal links point from slot t to slot t+1 within a DC.
    """

    kind: str
    tail: int
    head: int

    def __post_init__(self):
        if self.kind not in (SPATIAL, TEMPORAL):
            raise ValueError(f"unknown link kind {self.kind!r}")


@dataclass(frozen=True)
class SpaceTimeIndex:
    """Bijection between (dc, slot) pairs and 1-based virtual node ids."""

    n_dc: int
    n_slots: int

    def __post_init__(self):
        if self.n_dc < 1:
            raise ValueError(f"n_dc must be >= 1, got {self.n_dc}")
        if self.n_slots < 1:
            raise ValueError(f"n_slots must be >= 1, got {self.n_slots}")

    @property
    def n_nodes(self) -> int:
        """Total virtual node count (one per DC and slot)."""
        return self.n_dc * self.n_slots

    def node_index(self, dc: int, slot: int) -> int:
        """Map (dc, slot), both 1-based, to the 1-based virtual node id."""
        if not 1 <= dc <= self.n_dc:
            raise ValueError(f"dc {dc} out of range [1, {self.n_dc}]")
        if not 1 <= slot <= self.n_slots:
            raise ValueError(f"slot {slot} out of range [1, {self.n_slots}]")
        return (dc - 1) * self.n_slots + slot

    def node_inverse(self, node: int) -> tuple[int, int]:
        """Map a 1-based virtual node id back to its (dc, slot) pair."""
        if not 1 <= node <= self.n_nodes:
            raise ValueError(f"node {node} out of range [1, {self.n_nodes}]")
        dc, slot = divmod(node - 1, self.n_slots)
        return dc + 1, slot + 1

    def link_counts(self) -> tuple[int, int]:
        """(spatial, temporal) link counts: C(N,2)*T and N*(T-1)."""
        n, t = self.n_dc, self.n_slots
        return n * (n - 1) // 2 * t, n * (t - 1)

    def links(self) -> list[VirtualLink]:
        """Enumerate all virtual links in canonical order.

        Spatial links come first, slot-major then DC-pair-major; temporal
        links follow, DC-major then slot-major. The ordering is
        deterministic so positions in derived flow vectors are stable.
        """
        out: list[VirtualLink] = []
        for slot in range(1, self.n_slots + 1):
            for a in range(1, self.n_dc + 1):
                for b in range(a + 1, self.n_dc + 1):
                    out.append(
                        VirtualLink(
                            SPATIAL,
                            self.node_index(a, slot),
                            self.node_index(b, slot),
                        )
                    )
        for dc in range(1, self.n_dc + 1):
            for slot in range(1, self.n_slots):
                out.append(
                    VirtualLink(
                        TEMPORAL,
                        self.node_index(dc, slot),
                        self.node_index(dc, slot + 1),
                    )
                )
        return out
