"""Multi-cloud catalog: VM types, networks, billing and data-transfer pricing.

Money is kept exact.  Catalog prices are :class:`~decimal.Decimal`; the hot
paths work in integer micro-dollars for leases.  Data volumes are GB
(1 GB = 2**30 bytes = 8192 Mb) and bandwidths are Mbps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Sequence

MEGABITS_PER_GB = 8192
MICRO = 10**6
GB_PER_TB = 1024

PER_MINUTE = "per-minute"
PER_HOUR = "per-hour"
HYBRID = "hybrid-ten-minute"

def _dec(x) -> Decimal:
    return x if isinstance(x, Decimal) else Decimal(str(x))


def _to_micro(x: Decimal) -> int:
    v = x * MICRO
    if v != v.to_integral_value():
        raise ValueError(f"price {x} is finer than one micro-dollar")
    return int(v)


def ceil_periods(x: float) -> int:
    return math.ceil(x)


@dataclass(frozen=True)
class BillingScheme:
    kind: str
    period: int
    minimum_block: int = 0

    def __post_init__(self):
        if self.kind not in (PER_MINUTE, PER_HOUR, HYBRID):
            raise ValueError(f"unknown billing kind {self.kind!r}")
        if self.period <= 0:
            raise ValueError("billing period must be positive")
        if self.minimum_block < 0 or self.minimum_block % self.period:
            raise ValueError("minimum block must be a non-negative multiple of the period")

    @classmethod
    def per_minute(cls) -> "BillingScheme":
        return cls(PER_MINUTE, 60, 0)

    @classmethod
    def per_hour(cls) -> "BillingScheme":
        return cls(PER_HOUR, 3600, 0)

    @classmethod
    def hybrid(cls) -> "BillingScheme":
        return cls(HYBRID, 60, 600)

    @property
    def is_hybrid(self) -> bool:
        return self.kind == HYBRID

    def periods(self, duration: float) -> int:
        """Billing periods charged at the per-period rate for a lease of ``duration`` s."""
        if duration < 0:
            raise ValueError(f"negative lease duration {duration}")
        if self.is_hybrid:
            return max(0, ceil_periods((duration - self.minimum_block) / self.period))
        return ceil_periods(duration / self.period)


@dataclass(frozen=True)
class VmTypeSpec:
    provider: int
    index: int
    name: str
    capacity: float
    boot_time: float
    rate: Decimal
    initial_block_price: Decimal = Decimal(0)

    def __post_init__(self):
        object.__setattr__(self, "rate", _dec(self.rate))
        object.__setattr__(self, "initial_block_price", _dec(self.initial_block_price))
        if self.capacity <= 0:
            raise ValueError(f"{self.name}: capacity must be positive")
        if self.boot_time < 0:
            raise ValueError(f"{self.name}: boot time must be non-negative")
        if self.rate < 0 or self.initial_block_price < 0:
            raise ValueError(f"{self.name}: prices must be non-negative")

    @property
    def rate_micro(self) -> int:
        return _to_micro(self.rate)

    @property
    def initial_block_micro(self) -> int:
        return _to_micro(self.initial_block_price)


@dataclass(frozen=True)
class TransferPricing:
    """Outbound data-transfer schedule of one provider.

    ``brackets`` is a sequence of ``(upper_gb, rate_per_gb)`` with strictly
    increasing inclusive upper bounds; the last bound may be ``None`` for
    "and above".  Volumes past a finite last bound use the last rate.
    """

    across_center: Decimal
    brackets: tuple[tuple[float | None, Decimal], ...]

    def __post_init__(self):
        object.__setattr__(self, "across_center", _dec(self.across_center))
        object.__setattr__(
            self, "brackets", tuple((ub, _dec(r)) for ub, r in self.brackets)
        )
        if self.across_center < 0:
            raise ValueError("negative across-center rate")
        if not self.brackets:
            raise ValueError("empty bracket list")
        prev = -math.inf
        for i, (ub, r) in enumerate(self.brackets):
            if r < 0:
                raise ValueError("negative bracket rate")
            if ub is None:
                if i != len(self.brackets) - 1:
                    raise ValueError("open bracket must be last")
                continue
            if ub <= prev:
                raise ValueError("bracket bounds must be strictly increasing")
            prev = ub

    def bracket_rate(self, volume_gb: float) -> Decimal:
        for ub, r in self.brackets:
            if ub is None or volume_gb <= ub:
                return r
        return self.brackets[-1][1]

    def marginal_cost(self, volume_gb: float) -> Decimal:
        vol = _dec(volume_gb)
        cost = Decimal(0)
        lower = Decimal(0)
        for ub, r in self.brackets:
            upper = vol if ub is None else min(vol, _dec(ub))
            if upper > lower:
                cost += (upper - lower) * r
            if ub is None or vol <= _dec(ub):
                return cost
            lower = _dec(ub)
        return cost + (vol - lower) * self.brackets[-1][1]


@dataclass(frozen=True)
class CloudProvider:
    id: int
    name: str
    brand: str
    billing: BillingScheme
    vm_types: tuple[VmTypeSpec, ...]
    internal_bandwidth: float
    transfer: TransferPricing
    center: str = ""

    def __post_init__(self):
        if not self.vm_types:
            raise ValueError(f"provider {self.name} offers no VM types")
        if self.internal_bandwidth <= 0:
            raise ValueError(f"provider {self.name}: bandwidth must be positive")


@dataclass(frozen=True)
class MultiCloudSystem:
    providers: tuple[CloudProvider, ...]
    external_bandwidth: tuple[tuple[float, ...], ...]
    transfer_mode: str = "flat"
    vm_types: tuple[VmTypeSpec, ...] = field(init=False, repr=False)

    def __post_init__(self):
        m = len(self.providers)
        if m == 0:
            raise ValueError("system has no providers")
        for k, p in enumerate(self.providers):
            if p.id != k:
                raise ValueError("provider ids must be 0..m-1 in order")
            for t in p.vm_types:
                if t.provider != k:
                    raise ValueError(f"VM type {t.name} tagged with the wrong provider")
        if len(self.external_bandwidth) != m or any(len(r) != m for r in self.external_bandwidth):
            raise ValueError("external bandwidth must be an m x m matrix")
        for k in range(m):
            for j in range(m):
                if k != j and self.external_bandwidth[k][j] <= 0:
                    raise ValueError("bandwidths must be positive")
        if self.transfer_mode not in ("flat", "marginal"):
            raise ValueError(f"unknown transfer mode {self.transfer_mode!r}")
        object.__setattr__(
            self, "vm_types", tuple(t for p in self.providers for t in p.vm_types)
        )

    @property
    def m(self) -> int:
        return len(self.providers)

    @property
    def n_types(self) -> int:
        """Total number of VM types across all providers."""
        return len(self.vm_types)

    def billing_of(self, vm: VmTypeSpec) -> BillingScheme:
        return self.providers[vm.provider].billing


# --------------------------------------------------------------------------
# pricing and timing


def exec_time(weight: float, vm: VmTypeSpec) -> float:
    return weight / vm.capacity


def comm_time(
    volume_gb: float,
    sys: MultiCloudSystem,
    src: int,
    dst: int,
    same_instance: bool = False,
) -> float:
    """Seconds to move ``volume_gb`` between tasks placed on providers ``src`` and ``dst``."""
    if volume_gb < 0:
        raise ValueError("negative volume")
    if not (0 <= src < sys.m and 0 <= dst < sys.m):
        raise LookupError(f"unknown provider pair ({src}, {dst})")
    if same_instance:
        return 0.0
    if src == dst:
        bw = sys.providers[src].internal_bandwidth
    else:
        bw = sys.external_bandwidth[src][dst]
    return volume_gb * MEGABITS_PER_GB / bw


def lease_cost_micro(duration: float, vm: VmTypeSpec, billing: BillingScheme) -> int:
    n = billing.periods(duration)
    if billing.is_hybrid:
        return vm.initial_block_micro + n * vm.rate_micro
    return n * vm.rate_micro


def lease_cost(duration: float, vm: VmTypeSpec, billing: BillingScheme) -> Decimal:
    """Price of holding one instance of ``vm`` for ``duration`` seconds."""
    n = billing.periods(duration)
    if billing.is_hybrid:
        return vm.initial_block_price + n * vm.rate
    return n * vm.rate


def transfer_rate(volume_gb: float, src: int, dst: int, sys: MultiCloudSystem) -> Decimal:
    """Per-GB price the sender's schedule applies to one transfer (flat-bracket rule)."""
    if src == dst:
        return Decimal(0)
    sender, receiver = sys.providers[src], sys.providers[dst]
    if sender.brand == receiver.brand:
        return sender.transfer.across_center
    return sender.transfer.bracket_rate(volume_gb)


def transfer_cost(volume_gb: float, src: int, dst: int, sys: MultiCloudSystem) -> Decimal:
    if volume_gb < 0:
        raise ValueError("negative volume")
    if src == dst:
        return Decimal(0)
    sender, receiver = sys.providers[src], sys.providers[dst]
    if sender.brand != receiver.brand and sys.transfer_mode == "marginal":
        return sender.transfer.marginal_cost(volume_gb)
    return transfer_rate(volume_gb, src, dst, sys) * _dec(volume_gb)


# --------------------------------------------------------------------------
# default testbed

TB = GB_PER_TB

PRICE_TABLE = {
    "MA": [("B2MS", "0.0015", "0"), ("B4MS", "0.003", "0"), ("B8MS", "0.006", "0"), ("B16MS", "0.012", "0")],
    "AWS": [("m1.small", "0.06", "0"), ("m1.medium", "0.12", "0"), ("m1.large", "0.24", "0"), ("m1.xlarge", "0.45", "0")],
    "GCP": [
        ("n1-highcpu-2", "0.0012", "0.014"),
        ("n1-highcpu-4", "0.0023", "0.025"),
        ("n1-highcpu-8", "0.0047", "0.05"),
        ("n1-highcpu-16", "0.0093", "0.1"),
    ],
}

TRANSFER_TABLE = {
    "MA": TransferPricing(
        "0.08",
        ((100, "0"), (10 * TB, "0.11"), (50 * TB, "0.075"), (150 * TB, "0.07"), (500 * TB, "0.06")),
    ),
    "AWS": TransferPricing(
        "0.02",
        ((100, "0"), (10 * TB, "0.09"), (50 * TB, "0.085"), (150 * TB, "0.07"), (None, "0.05")),
    ),
    "GCP": TransferPricing(
        "0.05",
        ((1 * TB, "0.19"), (10 * TB, "0.18"), (None, "0.15")),
    ),
}

BILLING_BY_BRAND = {
    "MA": BillingScheme.per_minute,
    "AWS": BillingScheme.per_hour,
    "GCP": BillingScheme.hybrid,
}

DEFAULT_CAPACITIES = (2.0, 4.0, 8.0, 16.0)


def default_testbed(
    internal_bandwidth: float = 20.0,
    external_bandwidth: float = 100.0,
    boot_time: float = 97.0,
    capacities: Sequence[float] = DEFAULT_CAPACITIES,
    capacity_multipliers: Sequence[float] | None = None,
    transfer_mode: str = "flat",
) -> MultiCloudSystem:
    """Six providers, two centers each of MA, AWS and GCP, four VM tiers apiece."""
    brands = ["MA", "MA", "AWS", "AWS", "GCP", "GCP"]
    if capacity_multipliers is None:
        capacity_multipliers = [1.0] * len(brands)
    providers = []
    for k, brand in enumerate(brands):
        center = f"{brand.lower()}-{1 + brands[:k].count(brand)}"
        types = tuple(
            VmTypeSpec(
                provider=k,
                index=p,
                name=f"{center}/{name}",
                capacity=capacities[p] * capacity_multipliers[k],
                boot_time=boot_time,
                rate=Decimal(rate),
                initial_block_price=Decimal(initial),
            )
            for p, (name, rate, initial) in enumerate(PRICE_TABLE[brand])
        )
        providers.append(
            CloudProvider(
                id=k,
                name=center,
                brand=brand,
                billing=BILLING_BY_BRAND[brand](),
                vm_types=types,
                internal_bandwidth=internal_bandwidth,
                transfer=TRANSFER_TABLE[brand],
                center=center,
            )
        )
    m = len(providers)
    ext = tuple(
        tuple(0.0 if i == j else float(external_bandwidth) for j in range(m)) for i in range(m)
    )
    return MultiCloudSystem(tuple(providers), ext, transfer_mode=transfer_mode)


# --------------------------------------------------------------------------
# configuration files


def system_to_dict(sys: MultiCloudSystem) -> dict:
    return {
        "transfer_mode": sys.transfer_mode,
        "external_bandwidth": [list(r) for r in sys.external_bandwidth],
        "providers": [
            {
                "name": p.name,
                "brand": p.brand,
                "center": p.center,
                "billing": {"kind": p.billing.kind, "period": p.billing.period, "minimum_block": p.billing.minimum_block},
                "internal_bandwidth": p.internal_bandwidth,
                "transfer": {
                    "across_center": str(p.transfer.across_center),
                    "brackets": [[ub, str(r)] for ub, r in p.transfer.brackets],
                },
                "vm_types": [
                    {
                        "name": t.name,
                        "capacity": t.capacity,
                        "boot_time": t.boot_time,
                        "rate": str(t.rate),
                        "initial_block_price": str(t.initial_block_price),
                    }
                    for t in p.vm_types
                ],
            }
            for p in sys.providers
        ],
    }


def system_from_dict(data: dict) -> MultiCloudSystem:
    providers = []
    for k, pd in enumerate(data["providers"]):
        b = pd["billing"]
        billing = BillingScheme(b["kind"], int(b["period"]), int(b.get("minimum_block", 0)))
        types = tuple(
            VmTypeSpec(
                provider=k,
                index=p,
                name=td["name"],
                capacity=float(td["capacity"]),
                boot_time=float(td.get("boot_time", 0.0)),
                rate=_dec(td["rate"]),
                initial_block_price=_dec(td.get("initial_block_price", "0")),
            )
            for p, td in enumerate(pd["vm_types"])
        )
        tr = pd["transfer"]
        providers.append(
            CloudProvider(
                id=k,
                name=pd["name"],
                brand=pd.get("brand", pd["name"]),
                billing=billing,
                vm_types=types,
                internal_bandwidth=float(pd["internal_bandwidth"]),
                transfer=TransferPricing(
                    _dec(tr["across_center"]),
                    tuple((None if ub is None else float(ub), _dec(r)) for ub, r in tr["brackets"]),
                ),
                center=pd.get("center", pd["name"]),
            )
        )
    ext = data["external_bandwidth"]
    if isinstance(ext, (int, float)):
        m = len(providers)
        ext = [[0.0 if i == j else float(ext) for j in range(m)] for i in range(m)]
    return MultiCloudSystem(
        tuple(providers),
        tuple(tuple(float(v) for v in row) for row in ext),
        transfer_mode=data.get("transfer_mode", "flat"),
    )


def load_system(path: str | Path) -> MultiCloudSystem:
    return system_from_dict(json.loads(Path(path).read_text()))


def save_system(sys: MultiCloudSystem, path: str | Path) -> None:
    Path(path).write_text(json.dumps(system_to_dict(sys), indent=2) + "\n")
