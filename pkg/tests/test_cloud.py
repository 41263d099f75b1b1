import math
from decimal import Decimal

import pytest
from hypothesis import given, settings, strategies as st

from cedces.cloud import (
    BillingScheme,
    MEGABITS_PER_GB,
    comm_time,
    default_testbed,
    exec_time,
    lease_cost,
    lease_cost_micro,
    load_system,
    save_system,
    system_from_dict,
    system_to_dict,
    transfer_cost,
)

SYS = default_testbed()
MA1, MA2, AWS1, AWS2, GCP1, GCP2 = range(6)


def vm(provider, tier):
    return SYS.providers[provider].vm_types[tier]


B2MS = vm(MA1, 0)
M1_SMALL = vm(AWS1, 0)
N1_HIGHCPU_2 = vm(GCP1, 0)
PER_MIN = BillingScheme.per_minute()
PER_HOUR = BillingScheme.per_hour()
HYBRID = BillingScheme.hybrid()

# (duration, vm, billing, exact price)
LEASE_EXAMPLES = [
    (61, B2MS, PER_MIN, Decimal("0.0030")),
    (3600, M1_SMALL, PER_HOUR, Decimal("0.06")),
    (3601, M1_SMALL, PER_HOUR, Decimal("0.12")),
    (300, N1_HIGHCPU_2, HYBRID, Decimal("0.014")),
    (720, N1_HIGHCPU_2, HYBRID, Decimal("0.0164")),
    (0, B2MS, PER_MIN, Decimal("0")),
    (60, B2MS, PER_MIN, Decimal("0.0015")),
    (600, N1_HIGHCPU_2, HYBRID, Decimal("0.014")),
    (601, N1_HIGHCPU_2, HYBRID, Decimal("0.0152")),
]


@pytest.mark.parametrize("d,v,billing,price", LEASE_EXAMPLES)
def test_lease_cost_examples(d, v, billing, price):
    assert lease_cost(d, v, billing) == price
    assert lease_cost_micro(d, v, billing) == int(price * 10**6)


def test_lease_cost_negative_duration():
    with pytest.raises(ValueError):
        lease_cost(-1, B2MS, PER_MIN)


def test_table1_rates_encoded():
    expected = {
        MA1: ["0.0015", "0.003", "0.006", "0.012"],
        AWS1: ["0.06", "0.12", "0.24", "0.45"],
        GCP1: ["0.0012", "0.0023", "0.0047", "0.0093"],
    }
    for k, rates in expected.items():
        assert [str(t.rate) for t in SYS.providers[k].vm_types] == rates
    assert [str(t.initial_block_price) for t in SYS.providers[GCP1].vm_types] == ["0.014", "0.025", "0.05", "0.1"]


def test_default_testbed_shape():
    assert SYS.m == 6 and SYS.n_types == 24
    assert SYS.providers[MA1].billing.period == 60
    assert SYS.providers[AWS1].billing.period == 3600
    assert SYS.providers[GCP1].billing.minimum_block == 600
    assert {t.boot_time for t in SYS.vm_types} == {97.0}
    assert SYS.providers[MA1].internal_bandwidth == 20.0
    assert SYS.external_bandwidth[MA1][AWS1] == 100.0


def test_exec_time_examples(two_type):
    a = two_type.vm_types[0]
    assert exec_time(50, a) == 50.0
    assert exec_time(100, vm(MA1, 1)) == 25.0
    assert exec_time(0, a) == 0.0


def test_comm_time_examples():
    sys = default_testbed(internal_bandwidth=100, external_bandwidth=20)
    assert comm_time(3.0, sys, MA1, MA1, same_instance=True) == 0.0
    hundred_mb = 100 / MEGABITS_PER_GB
    assert comm_time(hundred_mb, sys, MA1, MA1) == 1.0
    assert comm_time(hundred_mb, sys, MA1, AWS1) == 5.0
    # the rounded 0.0125 GB from the prose is ~102.4 Mb
    assert comm_time(0.0125, sys, MA1, MA1) == pytest.approx(1.024)
    with pytest.raises(LookupError):
        comm_time(1.0, sys, 0, 9)


# --- transfer pricing ----------------------------------------------------


def test_transfer_examples():
    assert transfer_cost(123.0, MA1, MA1, SYS) == 0
    assert transfer_cost(10, MA1, MA2, SYS) == Decimal("0.80")
    assert transfer_cost(50, AWS1, GCP1, SYS) == 0
    assert transfer_cost(2048, GCP1, MA1, SYS) == Decimal("368.64")


def test_across_center_rates():
    assert transfer_cost(1, MA2, MA1, SYS) == Decimal("0.08")
    assert transfer_cost(1, AWS1, AWS2, SYS) == Decimal("0.02")
    assert transfer_cost(1, GCP2, GCP1, SYS) == Decimal("0.05")


TB = 1024
EPS = 1e-6
# (sender, edge GB, rate just below/at the edge, rate just above)
BRACKET_EDGES = [
    (MA1, 100, "0", "0.11"),
    (MA1, 10 * TB, "0.11", "0.075"),
    (MA1, 50 * TB, "0.075", "0.07"),
    (MA1, 150 * TB, "0.07", "0.06"),
    (MA1, 500 * TB, "0.06", "0.06"),
    (AWS1, 100, "0", "0.09"),
    (AWS1, 10 * TB, "0.09", "0.085"),
    (AWS1, 50 * TB, "0.085", "0.07"),
    (AWS1, 150 * TB, "0.07", "0.05"),
    (GCP1, 1 * TB, "0.19", "0.18"),
    (GCP1, 10 * TB, "0.18", "0.15"),
]


@pytest.mark.parametrize("sender,edge,below,above", BRACKET_EDGES)
def test_bracket_edges_both_sides(sender, edge, below, above):
    other = AWS1 if sender != AWS1 else MA1
    assert transfer_cost(edge, sender, other, SYS) == Decimal(below) * edge
    v = edge + EPS
    assert transfer_cost(v, sender, other, SYS) == Decimal(above) * Decimal(repr(v))


def test_marginal_mode():
    sys = default_testbed(transfer_mode="marginal")
    assert transfer_cost(200, MA1, AWS1, sys) == Decimal("11.00")
    assert transfer_cost(2 * TB, GCP1, AWS1, sys) == Decimal("0.19") * TB + Decimal("0.18") * TB
    # across centers stays flat
    assert transfer_cost(10, MA1, MA2, sys) == Decimal("0.80")


# --- properties ----------------------------------------------------------

durations = st.floats(0, 20000, allow_nan=False)


@settings(max_examples=300)
@given(durations, durations, st.sampled_from([(B2MS, PER_MIN), (M1_SMALL, PER_HOUR), (N1_HIGHCPU_2, HYBRID)]))
def test_lease_cost_monotone(a, b, case):
    v, billing = case
    lo, hi = sorted((a, b))
    assert lease_cost(lo, v, billing) <= lease_cost(hi, v, billing)


@settings(max_examples=300)
@given(durations, st.sampled_from([(vm(MA1, t), PER_MIN) for t in range(4)] + [(vm(AWS1, t), PER_HOUR) for t in range(4)]))
def test_lease_cost_quantized(d, case):
    v, billing = case
    tau = billing.period
    assert lease_cost(d, v, billing) == lease_cost(tau * math.ceil(d / tau), v, billing)


@settings(max_examples=100)
@given(st.floats(0, 600), st.integers(0, 3))
def test_hybrid_minimum_block(d, tier):
    v = vm(GCP1, tier)
    assert lease_cost(d, v, HYBRID) == v.initial_block_price


@settings(max_examples=200)
@given(st.floats(0, 600 * TB), st.floats(0, 600 * TB), st.sampled_from([MA1, AWS1, GCP1]))
def test_transfer_monotone_within_bracket(a, b, sender):
    other = AWS1 if sender != AWS1 else MA1
    edges = [0] + [e for s, e, _, _ in BRACKET_EDGES if s == sender] + [math.inf]
    lo, hi = sorted((a, b))
    same_bracket = any(e0 < lo and hi <= e1 for e0, e1 in zip(edges, edges[1:]))
    if same_bracket:
        assert transfer_cost(lo, sender, other, SYS) <= transfer_cost(hi, sender, other, SYS)
    assert transfer_cost(0, sender, other, SYS) == 0


@settings(max_examples=100)
@given(st.floats(0, 100), st.floats(0.1, 10), st.sampled_from([(MA1, MA1), (MA1, GCP2)]))
def test_comm_time_linear(v, lam, pair):
    a = comm_time(v * lam, SYS, *pair)
    assert a == pytest.approx(lam * comm_time(v, SYS, *pair), rel=1e-12, abs=1e-12)


def test_system_json_roundtrip(tmp_path):
    p = tmp_path / "sys.json"
    save_system(SYS, p)
    back = load_system(p)
    assert system_to_dict(back) == system_to_dict(SYS)
    assert back.vm_types == SYS.vm_types
    assert system_from_dict(system_to_dict(SYS)).providers == SYS.providers
