"""Carbon accounting for compute runs.

Grid intensity defaults to the 2025 German average of 328 gCO2e/kWh and
data-center overhead to a PUE of 1.2.
"""

from __future__ import annotations

CARBON_INTENSITY_KG_PER_KWH = 0.328
PUE = 1.2


def carbon_report(
    time_hours: float,
    power_kw: float,
    intensity: float = CARBON_INTENSITY_KG_PER_KWH,
    pue: float = PUE,
) -> dict[str, float]:
    """Energy and emissions of a run of ``time_hours`` at ``power_kw``."""
    for name, v in (
        ("time_hours", time_hours),
        ("power_kw", power_kw),
        ("intensity", intensity),
        ("pue", pue),
    ):
        if v < 0:
            raise ValueError(f"{name} must be non-negative, got {v}")
    energy = time_hours * power_kw
    co2e = energy * intensity
    return {"energy_kwh": energy, "co2e_kg": co2e, "co2e_pue_kg": co2e * pue}


def carbon_from_energy(
    energy_kwh: float,
    intensity: float = CARBON_INTENSITY_KG_PER_KWH,
    pue: float = PUE,
) -> dict[str, float]:
    """Emissions for a metered energy reading (no power/time split known)."""
    if energy_kwh < 0 or intensity < 0 or pue < 0:
        raise ValueError("inputs must be non-negative")
    co2e = energy_kwh * intensity
    return {"energy_kwh": energy_kwh, "co2e_kg": co2e, "co2e_pue_kg": co2e * pue}
