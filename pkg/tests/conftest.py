from __future__ import annotations

from decimal import Decimal

import pytest

from cedces.cloud import (
    TRANSFER_TABLE,
    BillingScheme,
    CloudProvider,
    MultiCloudSystem,
    VmTypeSpec,
)

ACCEPTANCE_LINES: list[str] = []


def make_system(spec, boot=97.0, internal=100.0, external=20.0, transfer_mode="flat"):
    """Small hand-built systems for fixtures.

    ``spec`` is a list of ``(brand, billing, [(name, capacity, rate, initial), ...])``.
    """
    providers = []
    for k, (brand, billing, types) in enumerate(spec):
        vms = tuple(
            VmTypeSpec(k, p, name, float(cap), boot, Decimal(rate), Decimal(initial))
            for p, (name, cap, rate, initial) in enumerate(types)
        )
        providers.append(CloudProvider(
            id=k,
            name=f"{brand.lower()}-{k}",
            brand=brand,
            billing=billing,
            vm_types=vms,
            internal_bandwidth=internal,
            transfer=TRANSFER_TABLE[brand],
            center=f"{brand.lower()}-{k}",
        ))
    m = len(providers)
    ext = tuple(tuple(0.0 if i == j else float(external) for j in range(m)) for i in range(m))
    return MultiCloudSystem(tuple(providers), ext, transfer_mode=transfer_mode)


@pytest.fixture
def single_ma():
    """One MA provider with a single capacity-1 B2MS type."""
    return make_system([("MA", BillingScheme.per_minute(), [("B2MS", 1, "0.0015", "0")])])


@pytest.fixture
def two_type():
    """Toy system with types A (cap 1, cheap) and B (cap 2, pricier) on two clouds."""
    return make_system([
        ("MA", BillingScheme.per_minute(), [("A", 1, "0.0015", "0")]),
        ("AWS", BillingScheme.per_minute(), [("B", 2, "0.003", "0")]),
    ])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
