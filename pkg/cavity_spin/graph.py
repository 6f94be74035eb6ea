"""
Spin-glass problem instances

This module holds the abstract optimisation problem (`SpinGraph`), spin
configurations, the random benchmark ensemble, and the two ways of making
every spin site see the same loss: dangling-site extension and pump
compensation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, NamedTuple, Sequence, Tuple

import jsonschema
import numpy as np

from cavity_spin.common.logging_config import get_logger
from cavity_spin.errors import (
    GraphFormatError,
    InvalidInstanceError,
    InvalidParameterError,
)

logger = get_logger(__name__)


class Coupling(str, Enum):
    """Sign of an edge: ferromagnetic favours equal phases."""

    FM = "FM"
    AFM = "AFM"

    @property
    def sign(self) -> int:
        return 1 if self is Coupling.FM else -1


class Edge(NamedTuple):
    site_a: int
    site_b: int
    coupling: Coupling


GRAPH_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "required": ["n_sites", "edges"],
    "additionalProperties": False,
    "properties": {
        "n_sites": {"type": "integer", "minimum": 1},
        "edges": {
            "type": "array",
            "items": {
                "type": "array",
                "minItems": 3,
                "maxItems": 3,
                "prefixItems": [
                    {"type": "integer", "minimum": 0},
                    {"type": "integer", "minimum": 0},
                    {"enum": ["FM", "AFM"]},
                ],
            },
        },
        "extra_flags": {"type": "array", "items": {"type": "boolean"}},
    },
}


@dataclass(frozen=True)
class SpinGraph:
    """Sites, signed edges and the flags marking dangling extra sites."""

    n_sites: int
    edges: Tuple[Edge, ...] = ()
    extra_flags: Tuple[bool, ...] = field(default=())

    def __post_init__(self) -> None:
        edges = tuple(
            Edge(int(a), int(b), Coupling(c)) for a, b, c in self.edges
        )
        object.__setattr__(self, "edges", edges)
        if not self.extra_flags:
            object.__setattr__(self, "extra_flags", (False,) * self.n_sites)
        else:
            object.__setattr__(
                self, "extra_flags", tuple(bool(f) for f in self.extra_flags)
            )
        self._validate()

    def _validate(self) -> None:
        if self.n_sites < 1:
            raise InvalidInstanceError(f"n_sites must be positive, got {self.n_sites}")
        if len(self.extra_flags) != self.n_sites:
            raise InvalidInstanceError(
                f"extra_flags has {len(self.extra_flags)} entries for {self.n_sites} sites"
            )

        seen = set()
        for a, b, _ in self.edges:
            if not (0 <= a < self.n_sites and 0 <= b < self.n_sites):
                raise InvalidInstanceError(f"Edge ({a}, {b}) out of range")
            if a == b:
                raise InvalidInstanceError(f"Self-loop on site {a}")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise InvalidInstanceError(f"Duplicate edge {key}")
            seen.add(key)

        degrees = self.degrees()
        for site, is_extra in enumerate(self.extra_flags):
            if is_extra and degrees[site] != 1:
                raise InvalidInstanceError(
                    f"Extra site {site} has degree {degrees[site]}, expected 1"
                )

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def has_extra_sites(self) -> bool:
        return any(self.extra_flags)

    @property
    def original_sites(self) -> List[int]:
        return [i for i, extra in enumerate(self.extra_flags) if not extra]

    @property
    def n_original(self) -> int:
        return self.n_sites - sum(self.extra_flags)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_sites, dtype=np.int64)
        for a, b, _ in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def is_extra_edge(self, edge: Edge) -> bool:
        return self.extra_flags[edge.site_a] or self.extra_flags[edge.site_b]

    def original_edges(self) -> List[Edge]:
        return [e for e in self.edges if not self.is_extra_edge(e)]

    def coupling_matrix(self, include_extra: bool = True) -> np.ndarray:
        """Symmetric signed adjacency: +1 for FM, -1 for AFM."""
        matrix = np.zeros((self.n_sites, self.n_sites))
        for edge in self.edges:
            if not include_extra and self.is_extra_edge(edge):
                continue
            matrix[edge.site_a, edge.site_b] = edge.coupling.sign
            matrix[edge.site_b, edge.site_a] = edge.coupling.sign
        return matrix

    def original_subgraph(self) -> SpinGraph:
        """The problem with extra sites removed (original indices come first)."""
        n = self.n_original
        if self.original_sites != list(range(n)):
            raise InvalidInstanceError("Extra sites must follow the original sites")
        return SpinGraph(n, tuple(self.original_edges()))

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "n_sites": self.n_sites,
            "edges": [[a, b, c.value] for a, b, c in self.edges],
        }
        if self.has_extra_sites:
            data["extra_flags"] = list(self.extra_flags)
        return data

    @classmethod
    def from_dict(cls, data: Any) -> SpinGraph:
        try:
            jsonschema.validate(data, GRAPH_SCHEMA)
        except jsonschema.ValidationError as e:
            raise GraphFormatError(f"Graph does not match schema: {e.message}") from e
        return cls(
            n_sites=data["n_sites"],
            edges=tuple(Edge(a, b, Coupling(c)) for a, b, c in data["edges"]),
            extra_flags=tuple(data.get("extra_flags", ())),
        )

    @classmethod
    def load(cls, path: Path) -> SpinGraph:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise GraphFormatError(f"Invalid JSON in {path}: {e}") from e
        return cls.from_dict(data)

    def save(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")


@dataclass(frozen=True)
class SpinConfig:
    """One phase per site; Ising configurations use only 0 and pi."""

    phases: np.ndarray

    def __post_init__(self) -> None:
        phases = np.array(self.phases, dtype=float)
        if phases.ndim != 1:
            raise InvalidInstanceError("phases must be one-dimensional")
        phases.flags.writeable = False
        object.__setattr__(self, "phases", phases)

    def __len__(self) -> int:
        return len(self.phases)

    @classmethod
    def from_signs(cls, signs: Iterable[int]) -> SpinConfig:
        return cls(np.array([0.0 if s > 0 else np.pi for s in signs]))

    def signs(self) -> Tuple[int, ...]:
        """Ising spins relative to site 0 (site 0 is always +1)."""
        if len(self.phases) == 0:
            return ()
        rel = np.cos(self.phases - self.phases[0])
        return tuple(1 if c > 0 else -1 for c in rel)

    def max_binary_deviation(self) -> float:
        """Largest distance of any pairwise phase difference from {0, pi}."""
        if len(self.phases) < 2:
            return 0.0
        diff = self.phases[:, None] - self.phases[None, :]
        r = np.mod(diff, np.pi)
        return float(np.max(np.minimum(r, np.pi - r)))

    def is_binary(self, tol: float = 1e-3) -> bool:
        return self.max_binary_deviation() <= tol

    def rotated(self, angle: float) -> SpinConfig:
        """Every phase shifted by ``angle``, wrapped into [0, 2pi)."""
        return SpinConfig(np.mod(self.phases + angle, 2.0 * np.pi))


def generate_random_graph(
    n_sites: int, connectivity: float, fm_fraction: float, seed: int
) -> SpinGraph:
    """
    Sample a random signed graph.

    Pairs (i, j), i < j, are visited row-major; one uniform draw per pair
    decides the edge, then one draw per accepted edge decides its sign.
    """
    if n_sites < 2:
        raise InvalidInstanceError(f"Random graphs need at least 2 sites, got {n_sites}")
    for name, value in (("connectivity", connectivity), ("fm_fraction", fm_fraction)):
        if not 0.0 <= value <= 1.0:
            raise InvalidParameterError(f"{name} must lie in [0, 1], got {value}")

    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(n_sites) for j in range(i + 1, n_sites)]
    present = rng.random(len(pairs)) < connectivity
    chosen = [pair for pair, keep in zip(pairs, present) if keep]
    ferro = rng.random(len(chosen)) < fm_fraction

    edges = tuple(
        Edge(a, b, Coupling.FM if fm else Coupling.AFM)
        for (a, b), fm in zip(chosen, ferro)
    )
    return SpinGraph(n_sites, edges)


def extend_with_dangling(graph: SpinGraph) -> SpinGraph:
    """
    Raise every site to the maximum degree by attaching degree-1 extra sites.

    Attachment edges are ferromagnetic; extra sites are appended after the
    original indices, in the order of the site they hang from.
    """
    if graph.has_extra_sites:
        raise InvalidInstanceError("Graph already carries extra sites")

    degrees = graph.degrees()
    target = int(degrees.max()) if graph.n_sites else 0
    edges = list(graph.edges)
    n_sites = graph.n_sites
    for site in range(graph.n_sites):
        for _ in range(target - int(degrees[site])):
            edges.append(Edge(site, n_sites, Coupling.FM))
            n_sites += 1

    added = n_sites - graph.n_sites
    logger.debug("Extended graph to degree %d with %d extra sites", target, added)
    return SpinGraph(
        n_sites,
        tuple(edges),
        (False,) * graph.n_sites + (True,) * added,
    )


def compensated_pump_xy(base_p: float, degree: int, j: float, gamma: float) -> float:
    """Pump that cancels the 8 n J^2 / gamma loss through a site's neighbours."""
    if gamma <= 0:
        raise InvalidParameterError(f"gamma must be positive, got {gamma}")
    return base_p + 8.0 * degree * j**2 / gamma


def compensated_pump_ising(
    base_p: float,
    degree: int,
    j: float,
    gamma: float,
    chi_abs: float,
    gamma_nl_prime: float,
) -> float:
    """Ising counterpart of `compensated_pump_xy`, with the connecting-site loss."""
    effective_decay = gamma + 2.0 * gamma_nl_prime * chi_abs**2
    if effective_decay <= 0:
        raise InvalidParameterError(
            f"Effective connecting-site decay must be positive, got {effective_decay}"
        )
    return base_p + 8.0 * degree * j**2 / effective_decay


def spin_energy(
    graph: SpinGraph, config: SpinConfig, include_extra: bool = True
) -> float:
    """-sum over edges of sign * cos(theta_a - theta_b)."""
    if len(config) != graph.n_sites:
        raise InvalidInstanceError(
            f"Config has {len(config)} phases for {graph.n_sites} sites"
        )
    phases = config.phases
    energy = 0.0
    for edge in graph.edges:
        if not include_extra and graph.is_extra_edge(edge):
            continue
        energy -= edge.coupling.sign * np.cos(phases[edge.site_a] - phases[edge.site_b])
    return float(energy)


def ising_energy(graph: SpinGraph, signs: Sequence[int], include_extra: bool = True) -> int:
    """Exact integer energy of a sign assignment."""
    if len(signs) != graph.n_sites:
        raise InvalidInstanceError(
            f"Config has {len(signs)} spins for {graph.n_sites} sites"
        )
    total = 0
    for edge in graph.edges:
        if not include_extra and graph.is_extra_edge(edge):
            continue
        total -= edge.coupling.sign * signs[edge.site_a] * signs[edge.site_b]
    return total


def frustrated_triangle() -> SpinGraph:
    """Two ferromagnetic bonds and one antiferromagnetic bond on three sites."""
    return SpinGraph(
        3,
        (
            Edge(0, 1, Coupling.FM),
            Edge(0, 2, Coupling.FM),
            Edge(1, 2, Coupling.AFM),
        ),
    )


def pair_graph(coupling: Coupling = Coupling.FM) -> SpinGraph:
    """Two sites joined by one edge: the plaquette of the cavity scheme."""
    return SpinGraph(2, (Edge(0, 1, coupling),))
