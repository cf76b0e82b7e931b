"""Charge and link observables, region aggregates, shot estimators.

The growing quantity in string-breaking dynamics is the excitation count
n(j) = <matter bit>, not the signed staggered charge (whose total is
conserved at zero because pair creation is neutral); both are provided.
Static-charge sites are excluded from every named charge region, so the
reported numbers count dynamically created charges only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .configspace import SectorBasis
from .lattice import LatticeGeometry, X, Y
from .strings import StringPath


def _bit_weight(psi: np.ndarray, states: np.ndarray, qubit: int) -> float:
    bits = (states >> np.uint64(qubit)) & np.uint64(1)
    return float(np.sum((np.abs(psi) ** 2)[bits == 1]))


def charge_density(psi: np.ndarray, sector: SectorBasis, geom: LatticeGeometry) -> np.ndarray:
    """Excitation density n(j) in [0, 1] per site, in matter-index order."""
    return np.array([
        _bit_weight(psi, sector.states, geom.matter_index(j)) for j in geom.sites()
    ])


def signed_charge_density(psi: np.ndarray, sector: SectorBasis, geom: LatticeGeometry) -> np.ndarray:
    """rho(j) = (-1)^(jx+jy) n(j); its lattice sum is conserved."""
    n = charge_density(psi, sector, geom)
    signs = np.array([1.0 if geom.parity(j) == 0 else -1.0 for j in geom.sites()])
    return signs * n


def link_sz(psi: np.ndarray, sector: SectorBasis, geom: LatticeGeometry) -> np.ndarray:
    """<S^z> per link in link-qubit order; values in [-1/2, +1/2]."""
    out = []
    for j, mu in geom.links():
        w = _bit_weight(psi, sector.states, geom.link_index(j, mu))
        out.append(0.5 - w)
    return np.array(out)


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------

def on_string_sites(geom: LatticeGeometry, path: StringPath) -> list[tuple[int, int]]:
    """Sites touched by the initial string, static charges excluded."""
    sites: set = set()
    for q in path.links:
        a, b, _ = geom.link_endpoints(q)
        sites.add(a)
        sites.add(b)
    sites -= {geom.static_even, geom.static_odd}
    return sorted(sites)


def off_string_sites(geom: LatticeGeometry, path: StringPath) -> list[tuple[int, int]]:
    """Complement of the on-string region, static charges excluded."""
    on = set(on_string_sites(geom, path))
    on |= {geom.static_even, geom.static_odd}
    return sorted(j for j in geom.sites() if j not in on)


def dynamic_sites(geom: LatticeGeometry) -> list[tuple[int, int]]:
    return sorted(j for j in geom.sites() if j not in (geom.static_even, geom.static_odd))


def region_charge(
    psi: np.ndarray, sector: SectorBasis, geom: LatticeGeometry, region
) -> float:
    """Total excitation number in a site region (iterable of coords)."""
    density = charge_density(psi, sector, geom)
    return float(sum(density[geom.matter_index(tuple(j))] for j in region))


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------

@dataclass
class SnapshotGrid:
    """Spatial distribution of n(j) and <S^z> at one time point."""

    lx: int
    ly: int
    t: float
    step: int
    site_density: np.ndarray  # shape (ly, lx)
    link_values: dict = field(default_factory=dict)  # "jx,jy,mu" -> <S^z>

    @classmethod
    def capture(cls, psi, sector, geom: LatticeGeometry, t: float, step: int) -> "SnapshotGrid":
        n = charge_density(psi, sector, geom).reshape(geom.ly, geom.lx)
        sz = link_sz(psi, sector, geom)
        links = {f"{j[0]},{j[1]},{mu}": float(v) for (j, mu), v in zip(geom.links(), sz)}
        return cls(lx=geom.lx, ly=geom.ly, t=t, step=step, site_density=n, link_values=links)

    def to_csv(self) -> str:
        lines = ["kind,jx,jy,mu,value"]
        for jy in range(self.ly):
            for jx in range(self.lx):
                lines.append(f"site,{jx},{jy},,{self.site_density[jy, jx]!r}")
        for key, v in self.link_values.items():
            jx, jy, mu = key.split(",")
            lines.append(f"link,{jx},{jy},{mu},{v!r}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "t": self.t,
                "step": self.step,
                "lx": self.lx,
                "ly": self.ly,
                "site_density": self.site_density.tolist(),
                "link_sz": self.link_values,
            },
            indent=2,
        )


# ---------------------------------------------------------------------------
# Shot estimators
# ---------------------------------------------------------------------------

def string_indicator(path: StringPath | list[int]):
    """Per-shot indicator: all path links measured spin down (bit 1)."""
    links = path.links if isinstance(path, StringPath) else tuple(path)
    mask = 0
    for q in links:
        mask |= 1 << q
    umask = np.uint64(mask)

    def fn(bits: np.ndarray) -> np.ndarray:
        return ((bits & umask) == umask).astype(np.float64)

    return fn


def bit_value(qubit: int):
    """Per-shot value of one measured bit."""

    def fn(bits: np.ndarray) -> np.ndarray:
        return ((bits >> np.uint64(qubit)) & np.uint64(1)).astype(np.float64)

    return fn


def estimate_from_shots(table, spec) -> tuple[float, float]:
    """Sample mean and standard error of a per-shot observable.

    ``spec`` maps an array of packed bitstrings to per-shot values.
    Indicator-valued observables get the binomial standard error
    sqrt(p(1-p)/N); anything else the sample standard error.
    """
    if table.total == 0:
        raise ValueError("empty shot table")
    values = spec(table.configs)
    n = table.total
    mean = float(np.sum(values * table.counts) / n)
    is_indicator = np.all((values == 0.0) | (values == 1.0))
    if is_indicator:
        stderr = float(np.sqrt(mean * (1.0 - mean) / n))
    else:
        var = float(np.sum(table.counts * (values - mean) ** 2) / max(n - 1, 1))
        stderr = float(np.sqrt(var / n))
    return mean, stderr


def deviation(value_a: float, sigma_a: float, value_b: float, sigma_b: float) -> tuple[float, float]:
    """|a - b| with independent-error propagation sqrt(sa^2 + sb^2)."""
    return abs(value_a - value_b), float(np.hypot(sigma_a, sigma_b))
