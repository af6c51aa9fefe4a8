"""Tests for membership bookkeeping, broadcasts, and the relay-side mirror."""

import numpy as np
import pytest

from relaybf.adaptation import (
    BeamVector,
    ConstraintKind,
    Scheme,
    build_perturbation_set,
    candidate_pair,
    init_pm_state,
    init_tr_state,
    pm_step,
    tr_perturb,
    tr_step,
)
from relaybf.channel import complex_normal
from relaybf.membership import (
    BirthMessage,
    DeathMessage,
    ProtocolError,
    RelayAgent,
    RelayRegistry,
    apply_birth,
    apply_death,
    decode_message,
    encode_message,
    exclude_coordinate,
    index_bits,
    insert_coordinate,
)
from relaybf.network import CompoundParams, objective_power


def test_index_bits_values():
    assert [index_bits(r) for r in (1, 2, 3, 4, 5, 8, 9)] == [0, 1, 2, 2, 3, 3, 4]


def test_encode_frozen_strings():
    assert encode_message(DeathMessage(3), 5) == "0011"
    assert encode_message(BirthMessage((True, False, True, True, False)), 5) == "110110"
    assert encode_message(DeathMessage(0), 1) == "0"


def test_encode_decode_round_trip():
    for rmax in (1, 2, 5, 8):
        for idx in range(rmax):
            msg = DeathMessage(idx)
            assert decode_message(encode_message(msg, rmax), rmax) == msg
        msg = BirthMessage(tuple(i % 2 == 0 for i in range(rmax)))
        assert decode_message(encode_message(msg, rmax), rmax) == msg


def test_decode_rejects_malformed_input():
    with pytest.raises(ValueError):
        decode_message("", 5)
    with pytest.raises(ValueError):
        decode_message("01x", 5)
    with pytest.raises(ValueError):
        decode_message("001", 5)  # death payload must be 3 bits
    with pytest.raises(ValueError):
        decode_message("0111", 5)  # index 7 out of range
    with pytest.raises(ValueError):
        decode_message("1101", 5)  # birth payload must be 5 bits
    with pytest.raises(ValueError):
        encode_message(DeathMessage(5), 5)
    with pytest.raises(ValueError):
        encode_message(BirthMessage((True,)), 2)


def test_registry_operations():
    reg = RelayRegistry.full(4)
    assert reg.num_active == 4
    assert list(reg.active_indices()) == [0, 1, 2, 3]

    reg = RelayRegistry.from_indices(5, [0, 2, 4])
    assert reg.num_active == 3
    assert reg.position_of(0) == 0
    assert reg.position_of(2) == 1
    assert reg.position_of(4) == 2
    with pytest.raises(ProtocolError):
        reg.position_of(1)

    clone = reg.copy()
    clone.active[0] = False
    assert reg.active[0]


def test_death_and_birth_transitions():
    reg = RelayRegistry.full(3)
    reg2, msg = apply_death(reg, 1)
    assert msg == DeathMessage(1)
    assert list(reg2.active_indices()) == [0, 2]
    assert reg.num_active == 3  # original untouched

    reg3, bmsg = apply_birth(reg2, 1)
    assert bmsg == BirthMessage((True, True, True))
    assert reg3.num_active == 3

    with pytest.raises(ProtocolError):
        apply_death(reg2, 1)  # already inactive
    with pytest.raises(ProtocolError):
        apply_birth(reg, 0)  # already active
    solo = RelayRegistry.from_indices(3, [2])
    with pytest.raises(ProtocolError):
        apply_death(solo, 2)


def test_exclude_coordinate_sum_power():
    bv = BeamVector(np.array([0.6, 0.8j, 0.0]), ConstraintKind.SUM_POWER)
    out = exclude_coordinate(bv, 0)
    np.testing.assert_allclose(out.w, [1.0j, 0.0], atol=1e-15)

    # Departing relay carried all the weight: fall back to uniform.
    bv = BeamVector(np.array([1.0, 0.0, 0.0]), ConstraintKind.SUM_POWER)
    out = exclude_coordinate(bv, 0)
    np.testing.assert_allclose(out.w, np.full(2, 1 / np.sqrt(2)), atol=1e-15)

    with pytest.raises(ProtocolError):
        exclude_coordinate(BeamVector(np.array([1.0 + 0j]),
                                      ConstraintKind.SUM_POWER), 0)


def test_exclude_coordinate_per_relay_keeps_phases():
    phases = np.exp(1j * np.array([0.3, 1.1, -2.0]))
    bv = BeamVector(phases, ConstraintKind.PER_RELAY)
    out = exclude_coordinate(bv, 1)
    np.testing.assert_allclose(out.w, phases[[0, 2]], atol=1e-12)


def test_insert_coordinate():
    bv = BeamVector(np.exp(1j * np.array([0.5, -0.5])), ConstraintKind.PER_RELAY)
    out = insert_coordinate(bv, 1)
    assert out.num_relays == 3
    assert out.w[1] == 1.0 + 0j
    np.testing.assert_allclose(out.w[[0, 2]], bv.w, atol=1e-15)


def _destination_pm(hbar_full, registry, constraint, beta, frames, events):
    """Reference PM trajectory at the destination, with membership changes.

    `events` maps frame number -> ("death", index) or ("birth", index).
    Returns the per-frame feedback bits, the broadcast messages, and the
    weight vector after every frame.
    """
    reg = registry.copy()
    state = init_pm_state(reg.num_active, constraint)
    pset = build_perturbation_set(reg.num_active, Scheme.PM)
    bits, messages, weights = [], {}, []
    for k in range(frames):
        if k in events:
            kind, idx = events[k]
            if kind == "death":
                pos = reg.position_of(idx)
                reg, msg = apply_death(reg, idx)
                state = type(state)(exclude_coordinate(state.w_data, pos),
                                    state.frame_index)
            else:
                reg, msg = apply_birth(reg, idx)
                if constraint is ConstraintKind.SUM_POWER:
                    state = init_pm_state(reg.num_active, constraint)
                else:
                    pos = reg.position_of(idx)
                    state = type(state)(insert_coordinate(state.w_data, pos),
                                        state.frame_index)
            pset = build_perturbation_set(reg.num_active, Scheme.PM)
            messages[k] = msg
        cp = CompoundParams(hbar_full[reg.active], np.zeros(reg.num_active))
        plus, minus = candidate_pair(state.w_data, state.frame_index, beta, pset)
        state, bit = pm_step(state, plus, minus,
                             objective_power(plus, cp),
                             objective_power(minus, cp))
        bits.append(bit)
        weights.append(state.w_data.w.copy())
    return bits, messages, weights


@pytest.mark.parametrize("constraint", [ConstraintKind.SUM_POWER,
                                        ConstraintKind.PER_RELAY])
def test_agent_mirrors_pm_through_death_and_birth(constraint):
    rng = np.random.default_rng(21)
    rmax = 4
    hbar_full = complex_normal(rng, (rmax,))
    registry = RelayRegistry.full(rmax)
    events = {6: ("death", 1), 14: ("birth", 1)}
    bits, messages, weights = _destination_pm(
        hbar_full, registry, constraint, 0.2, 24, events)

    agent = RelayAgent(2, registry, Scheme.PM, constraint, 0.2)
    for k in range(24):
        if k in messages:
            wire = encode_message(messages[k], rmax)
            agent.apply_message(decode_message(wire, rmax))
        agent.advance(bits[k])
        assert np.array_equal(agent.weight_vector, weights[k])
    assert agent.is_active


def test_agent_mirrors_tr():
    rng = np.random.default_rng(5)
    hbar = complex_normal(rng, (3,))
    cp = CompoundParams(hbar, np.zeros(3))
    state = init_tr_state(3, ConstraintKind.SUM_POWER)
    pset = build_perturbation_set(3, Scheme.TR)
    agent = RelayAgent(0, RelayRegistry.full(3), Scheme.TR,
                       ConstraintKind.SUM_POWER, 0.15)
    for _ in range(40):
        cand = tr_perturb(state, 0.15, pset)
        state, bit = tr_step(state, cand, objective_power(cand, cp))
        agent.advance(bit)
        assert np.array_equal(agent.weight_vector, state.w_data.w)


def test_agent_own_weight_and_activity():
    reg = RelayRegistry.full(3)
    agent = RelayAgent(1, reg, Scheme.PM, ConstraintKind.PER_RELAY, 0.1)
    assert agent.own_weight == 1.0 + 0j
    agent.apply_message(DeathMessage(1))
    assert not agent.is_active
    with pytest.raises(ProtocolError):
        agent.own_weight
