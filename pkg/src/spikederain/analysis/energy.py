"""Inference energy from operation counts.

Non-spike-driven layers pay 12.5 pJ per FLOP with 1 MAC = 2 FLOPs.
Spike-driven layers pay 77 fJ per synaptic operation, where
SOPs = measured input firing rate x MACs. Every neuron threshold
comparison costs 3.7 pJ. Counted MACs already cover all timesteps, so no
extra time factor is applied. All arithmetic is exact (``Fraction``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction


from .. import opcount
from ..tensor import as_tensor, no_grad

PJ_PER_FLOP = Fraction(25, 2)
FLOPS_PER_MAC = 2
PJ_PER_SOP = Fraction(77, 1000)
PJ_PER_SIGN = Fraction(37, 10)


@dataclass
class EnergyRow:
    layer_name: str
    kind: str  # "mac", "sop" or "sign"
    mac_count: int
    firing_rate: Fraction
    ops: Fraction  # FLOPs, SOPs or sign ops
    energy_pj: Fraction


@dataclass
class EnergyReport:
    rows: list[EnergyRow] = field(default_factory=list)

    @property
    def total_pj(self) -> Fraction:
        return sum((r.energy_pj for r in self.rows), Fraction(0))

    @property
    def total_uj(self) -> float:
        return float(self.total_pj / 10**6)

    def by_kind(self, kind: str) -> Fraction:
        return sum((r.energy_pj for r in self.rows if r.kind == kind), Fraction(0))

    def to_dict(self) -> dict:
        return {
            "total_uj": self.total_uj,
            "mac_uj": float(self.by_kind("mac") / 10**6),
            "sop_uj": float(self.by_kind("sop") / 10**6),
            "sign_uj": float(self.by_kind("sign") / 10**6),
            "layers": [
                {
                    "layer_name": r.layer_name,
                    "kind": r.kind,
                    "mac_count": r.mac_count,
                    "firing_rate": float(r.firing_rate),
                    "ops": float(r.ops),
                    "energy_uj": float(r.energy_pj / 10**6),
                }
                for r in self.rows
            ],
        }

    def to_text(self) -> str:
        w = max([len(r.layer_name) for r in self.rows] + [5])
        lines = [f"{'layer':<{w}}  {'kind':<4}  {'MACs':>12}  {'rate':>7}  {'uJ':>12}"]
        for r in self.rows:
            lines.append(
                f"{r.layer_name:<{w}}  {r.kind:<4}  {r.mac_count:>12d}  {float(r.firing_rate):>7.4f}  {float(r.energy_pj / 10**6):>12.6f}"
            )
        lines.append(f"{'total':<{w}}  {'':<4}  {'':>12}  {'':>7}  {self.total_uj:>12.6f}")
        return "\n".join(lines)


def layer_energy(macs: int, spike_driven: bool, firing_rate: Fraction = Fraction(1)) -> tuple[Fraction, Fraction]:
    """(ops, pJ) for one layer."""
    if spike_driven:
        sops = Fraction(firing_rate) * macs
        return sops, sops * PJ_PER_SOP
    flops = Fraction(macs * FLOPS_PER_MAC)
    return flops, flops * PJ_PER_FLOP


def energy_from_counter(counter: opcount.OpCounter) -> EnergyReport:
    report = EnergyReport()
    for rec in counter.layers:
        ops, pj = layer_energy(rec.mac_count, rec.spike_driven, rec.firing_rate)
        report.rows.append(EnergyRow(rec.layer_name, "sop" if rec.spike_driven else "mac", rec.mac_count, rec.firing_rate, ops, pj))
    for rec in counter.neurons:
        report.rows.append(EnergyRow(rec.layer_name, "sign", 0, rec.firing_rate, Fraction(rec.sign_ops), rec.sign_ops * PJ_PER_SIGN))
    return report


def energy_profile(net, sample) -> EnergyReport:
    """One eval-mode forward of ``net`` on ``sample`` with counting enabled."""
    was_training = getattr(net, "training", False)
    if hasattr(net, "eval"):
        net.eval()
    try:
        with opcount.counting() as counter, no_grad():
            net(as_tensor(sample))
    finally:
        if hasattr(net, "train"):
            net.train(was_training)
    if not counter.layers and not counter.neurons:
        warnings.warn("energy profile is empty: no layer reported any operations", RuntimeWarning, stacklevel=2)
    return energy_from_counter(counter)
