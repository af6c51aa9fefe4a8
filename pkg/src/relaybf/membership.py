"""Active-relay bookkeeping for networks whose membership changes at runtime.

A death is broadcast as the dying relay's index (ceil(log2(Rmax)) bits); the
survivors drop that coordinate and renormalize, keeping the adaptation state
otherwise intact.  A birth is broadcast as the full Rmax-bit activity bitmap;
under a sum-power constraint every node re-initializes the adaptation, while
under a per-relay constraint the incumbents keep their weights and the
newcomer starts at weight 1.  Every broadcast carries one leading kind bit
(0 = death, 1 = birth) ahead of the payload.

`RelayAgent` is the relay-side mirror: driven only by feedback bits and
membership broadcasts, it reproduces the destination's weight trajectory
bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adaptation import (BeamVector, ConstraintKind, Scheme,
                         build_perturbation_set, candidate_pair, init_weights,
                         normalize, perturb_vector)


class ProtocolError(RuntimeError):
    """A membership transition that the protocol does not allow."""


@dataclass(frozen=True)
class DeathMessage:
    index: int


@dataclass(frozen=True)
class BirthMessage:
    active: tuple  # length-Rmax tuple of bools, the post-birth activity map


@dataclass
class RelayRegistry:
    """Which of the Rmax provisioned relay slots are currently active."""

    max_relays: int
    active: np.ndarray

    def __post_init__(self):
        self.active = np.asarray(self.active, dtype=bool)
        if self.max_relays < 1:
            raise ValueError("max_relays must be >= 1")
        if self.active.shape != (self.max_relays,):
            raise ValueError("active mask must have length max_relays")

    @classmethod
    def full(cls, max_relays):
        return cls(max_relays, np.ones(max_relays, dtype=bool))

    @classmethod
    def from_indices(cls, max_relays, indices):
        mask = np.zeros(max_relays, dtype=bool)
        mask[list(indices)] = True
        return cls(max_relays, mask)

    @property
    def num_active(self) -> int:
        return int(np.count_nonzero(self.active))

    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    def position_of(self, index) -> int:
        """Rank of a relay among the active set (its weight-vector slot)."""
        if not self.active[index]:
            raise ProtocolError("relay %d is not active" % index)
        return int(np.count_nonzero(self.active[:index]))

    def copy(self):
        return RelayRegistry(self.max_relays, self.active.copy())


def index_bits(max_relays) -> int:
    """Payload width of a death broadcast."""
    return int(math.ceil(math.log2(max_relays))) if max_relays > 1 else 0


def apply_death(reg: RelayRegistry, index) -> tuple[RelayRegistry, DeathMessage]:
    """Deactivate one relay; at least one relay must survive."""
    if index < 0 or index >= reg.max_relays or not reg.active[index]:
        raise ProtocolError("death of a relay that is not active")
    if reg.num_active < 2:
        raise ProtocolError("the last active relay cannot leave")
    out = reg.copy()
    out.active[index] = False
    return out, DeathMessage(int(index))


def apply_birth(reg: RelayRegistry, index) -> tuple[RelayRegistry, BirthMessage]:
    """Activate one provisioned relay slot."""
    if index < 0 or index >= reg.max_relays or reg.active[index]:
        raise ProtocolError("birth of a relay that is already active")
    out = reg.copy()
    out.active[index] = True
    return out, BirthMessage(tuple(bool(b) for b in out.active))


def encode_message(msg, max_relays) -> str:
    """Wire format: one kind bit then the big-endian payload."""
    if isinstance(msg, DeathMessage):
        nbits = index_bits(max_relays)
        if msg.index < 0 or msg.index >= max_relays:
            raise ValueError("death index out of range")
        payload = format(msg.index, "0%db" % nbits) if nbits else ""
        return "0" + payload
    if isinstance(msg, BirthMessage):
        if len(msg.active) != max_relays:
            raise ValueError("bitmap length must equal max_relays")
        return "1" + "".join("1" if b else "0" for b in msg.active)
    raise ValueError("unknown message type")


def decode_message(bits: str, max_relays):
    """Inverse of `encode_message`; malformed widths raise ValueError."""
    if not bits or any(c not in "01" for c in bits):
        raise ValueError("message must be a non-empty string of 0/1")
    kind, payload = bits[0], bits[1:]
    if kind == "0":
        nbits = index_bits(max_relays)
        if len(payload) != nbits:
            raise ValueError("death payload must be %d bits" % nbits)
        index = int(payload, 2) if nbits else 0
        if index >= max_relays:
            raise ValueError("death index out of range")
        return DeathMessage(index)
    if len(payload) != max_relays:
        raise ValueError("birth payload must be %d bits" % max_relays)
    return BirthMessage(tuple(c == "1" for c in payload))


def exclude_coordinate(bv: BeamVector, position) -> BeamVector:
    """Drop one weight coordinate and restore feasibility.

    Sum-power vectors are renormalized over the survivors; if the departed
    relay carried essentially all the weight, the uniform vector is the
    fallback.  Per-relay vectors stay feasible entrywise and pass through the
    same projection for bit-exact agreement between all nodes.
    """
    if bv.num_relays < 2:
        raise ProtocolError("cannot drop the only coordinate")
    w = np.delete(bv.w, position)
    fallback = init_weights(w.size, bv.constraint)
    return normalize(w, bv.constraint, fallback)


def insert_coordinate(bv: BeamVector, position, value=1.0 + 0j) -> BeamVector:
    """Insert a newcomer's weight (per-relay joins keep incumbent weights)."""
    w = np.insert(bv.w, position, value)
    return BeamVector(w, bv.constraint)


class RelayAgent:
    """Relay-side replica of the shared adaptation trajectory.

    An agent knows only what is broadcast: the one feedback bit per frame and
    the membership messages.  From those it reconstructs the full active-set
    weight vector with exactly the arithmetic the destination uses, so the
    trajectories agree bitwise.
    """

    def __init__(self, relay_index, registry: RelayRegistry, scheme: Scheme,
                 constraint: ConstraintKind, beta):
        self.relay_index = int(relay_index)
        self.registry = registry.copy()
        self.scheme = scheme
        self.constraint = constraint
        self.beta = float(beta)
        self._reset()

    def _reset(self):
        self.weights = init_weights(self.registry.num_active, self.constraint)
        self.pset = build_perturbation_set(self.registry.num_active, self.scheme)
        self.frame_index = 0

    @property
    def is_active(self) -> bool:
        return bool(self.registry.active[self.relay_index])

    @property
    def weight_vector(self) -> np.ndarray:
        return self.weights.w.copy()

    @property
    def own_weight(self) -> complex:
        return complex(self.weights.w[self.registry.position_of(self.relay_index)])

    def advance(self, feedback_bit) -> None:
        """Apply one frame's feedback bit to the local mirror."""
        if self.scheme is Scheme.TR:
            cand = perturb_vector(self.weights, self.frame_index, self.beta, self.pset)
            if feedback_bit:
                self.weights = cand
        else:
            plus, minus = candidate_pair(self.weights, self.frame_index,
                                         self.beta, self.pset)
            self.weights = minus if feedback_bit else plus
        self.frame_index += 1

    def apply_message(self, msg) -> None:
        """Apply a membership broadcast to registry and weight mirror."""
        if isinstance(msg, DeathMessage):
            position = self.registry.position_of(msg.index)
            self.registry, _ = apply_death(self.registry, msg.index)
            self.weights = exclude_coordinate(self.weights, position)
            self.pset = build_perturbation_set(self.registry.num_active, self.scheme)
            return
        if isinstance(msg, BirthMessage):
            newcomer = np.flatnonzero(np.asarray(msg.active, dtype=bool)
                                      & ~self.registry.active)
            if newcomer.size != 1:
                raise ProtocolError("birth bitmap must add exactly one relay")
            self.registry, _ = apply_birth(self.registry, int(newcomer[0]))
            if self.constraint is ConstraintKind.SUM_POWER:
                self._reset()
            else:
                position = self.registry.position_of(int(newcomer[0]))
                self.weights = insert_coordinate(self.weights, position)
                self.pset = build_perturbation_set(self.registry.num_active,
                                                   self.scheme)
            return
        raise ProtocolError("unknown membership message")
