"""Conversion between simulation units (hbar = 1, Omega_max = 1) and physical rates and times.

Rates are taken as angular rates in s^-1 written in Hz (no factor of 2 pi),
so one simulation time unit is ``1 / omega_max_hz`` seconds.
"""

from __future__ import annotations

from dataclasses import dataclass

GHZ = 1e9
THZ = 1e12
MHZ = 1e6
NS = 1e-9


@dataclass(frozen=True)
class PhysicalUnits:
    omega_max_hz: float
    gamma2_hz: float = 0.0

    def __post_init__(self):
        if self.omega_max_hz <= 0:
            raise ValueError("omega_max_hz must be positive")
        if self.gamma2_hz < 0:
            raise ValueError("gamma2_hz must be non-negative")

    def rate_to_sim(self, hz: float) -> float:
        return hz / self.omega_max_hz

    def rate_from_sim(self, value: float) -> float:
        return value * self.omega_max_hz

    def time_to_sim(self, seconds: float) -> float:
        return seconds * self.omega_max_hz

    def time_from_sim(self, value: float) -> float:
        return value / self.omega_max_hz

    @property
    def gamma2_sim(self) -> float:
        return self.rate_to_sim(self.gamma2_hz)

    def summary(self, t_tot_s: float, omega_s_hz: float | None = None) -> dict:
        """Simulation-unit equivalents plus the two timing rules and the naive failure estimate."""
        out = {
            "omega_max_hz": self.omega_max_hz,
            "gamma2_hz": self.gamma2_hz,
            "t_tot_s": t_tot_s,
            "t_max_sim": self.time_to_sim(t_tot_s),
            "gamma2_sim": self.gamma2_sim,
            "gamma2_t_tot": self.gamma2_hz * t_tot_s,
            "min_t_tot_s": 10.0 / self.omega_max_hz,
            "t_tot_ok": self.time_to_sim(t_tot_s) >= 10.0,
        }
        if omega_s_hz is not None:
            out["omega_s_hz"] = omega_s_hz
            out["omega_s_sim"] = self.rate_to_sim(omega_s_hz)
            out["omega_s_ok"] = omega_s_hz >= 10.0 * self.omega_max_hz
        return out


# phosphorus-donor silicon estimate: 100 GHz controlled tunnelling, 1 THz bus, 100 MHz dephasing, ~2 ns
DONOR_SILICON = {"omega_max_hz": 100 * GHZ, "omega_s_hz": 1 * THZ, "gamma2_hz": 100 * MHZ, "t_tot_s": 2 * NS}
