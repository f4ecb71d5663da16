"""Trap geometry, voltages, ion species, buffer gas and config I/O.

Coordinates: the chip surface is the y = 0 plane; x is the transverse
in-plane axis (perpendicular to the rails), y the height above the chip,
z the axial direction. Electrode polygons are vertex lists in (x, z),
meters. The optional top plate is a conductor at height y = top_plate.height_m
with a detection slit of half-width slit_halfwidth_m running along z.

Config files are JSON (UTF-8) with top-level keys ``layout``, ``voltages``,
``drive``, ``ion``, ``buffer_gas`` in lab units (mm, V, MHz, u, torr);
everything is converted to SI on load. See README for the schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from shapely.geometry import Polygon as ShapelyPolygon

from . import constants as cst
from .errors import ConfigError

SCHEMA_VERSION = 1

ROLES = ("rf", "dc", "ground")

#: name of the dc entry that addresses the top plate
TOP_PLATE_KEY = "V_top"


@dataclass(frozen=True, eq=False)
class Electrode:
    name: str
    polygon: np.ndarray  # (n, 2) vertices (x, z) in meters, CCW
    role: str

    def __post_init__(self):
        poly = np.array(self.polygon, dtype=float)
        if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 3:
            raise ConfigError(f"electrode {self.name!r}: polygon must be (n>=3, 2)")
        if not np.all(np.isfinite(poly)):
            raise ConfigError(f"electrode {self.name!r}: non-finite vertex")
        # normalize to CCW orientation (shoelace)
        area2 = np.sum(poly[:, 0] * np.roll(poly[:, 1], -1)
                       - np.roll(poly[:, 0], -1) * poly[:, 1])
        if area2 < 0:
            poly = poly[::-1].copy()
        poly.setflags(write=False)
        object.__setattr__(self, "polygon", poly)
        if self.role not in ROLES:
            raise ConfigError(f"electrode {self.name!r}: unknown role {self.role!r}")

    def __eq__(self, other):
        return (isinstance(other, Electrode) and self.name == other.name
                and self.role == other.role
                and np.array_equal(self.polygon, other.polygon))

    def shapely(self) -> ShapelyPolygon:
        return ShapelyPolygon(self.polygon)


@dataclass(frozen=True)
class TopPlate:
    height_m: float
    slit_halfwidth_m: float = 0.5e-3

    def __post_init__(self):
        if not self.height_m > 0:
            raise ConfigError("top_plate.height_m must be > 0")
        if self.slit_halfwidth_m < 0:
            raise ConfigError("top_plate.slit_halfwidth_m must be >= 0")


@dataclass(frozen=True)
class ElectrodeLayout:
    electrodes: tuple[Electrode, ...]
    top_plate: TopPlate | None
    bounding_box: tuple[tuple[float, float], tuple[float, float]]  # ((xmin,zmin),(xmax,zmax))
    gapless: bool = False  # True for the analytic view where milled gaps collapsed

    def __post_init__(self):
        validate_layout(self)

    @property
    def rf_electrodes(self) -> tuple[Electrode, ...]:
        return tuple(e for e in self.electrodes if e.role == "rf")

    @property
    def dc_names(self) -> tuple[str, ...]:
        seen: list[str] = []
        for e in self.electrodes:
            if e.role == "dc" and e.name not in seen:
                seen.append(e.name)
        return tuple(seen)

    @property
    def node_names(self) -> tuple[str, ...]:
        """Basis node names: dc nodes, the rf node, then the plate."""
        names = list(self.dc_names) + ["rf"]
        if self.top_plate is not None:
            names.append(TOP_PLATE_KEY)
        return tuple(names)

    def polygons_for(self, node: str) -> tuple[np.ndarray, ...]:
        role = "rf" if node == "rf" else "dc"
        key = (lambda e: e.role == "rf") if node == "rf" else (
            lambda e: e.role == "dc" and e.name == node)
        polys = tuple(e.polygon for e in self.electrodes if key(e))
        if not polys:
            raise ConfigError(f"no {role} electrode named {node!r} in layout")
        return polys

    def scale(self) -> float:
        """Smallest electrode width, used to size BEM panels."""
        widths = []
        for e in self.electrodes:
            if e.role == "ground":
                continue
            xs = e.polygon[:, 0]
            zs = e.polygon[:, 1]
            widths.append(min(xs.max() - xs.min(), zs.max() - zs.min()))
        return float(min(widths))


def validate_layout(layout: ElectrodeLayout) -> None:
    (xmin, zmin), (xmax, zmax) = layout.bounding_box
    if not (xmax > xmin and zmax > zmin):
        raise ConfigError("bounding_box must have positive extent")

    polys = [(e, e.shapely()) for e in layout.electrodes]
    for e, sp in polys:
        if not sp.is_valid or not sp.is_simple:
            raise ConfigError(f"electrode {e.name!r}: polygon is self-intersecting")
        ex = e.polygon
        if (ex[:, 0].min() < xmin - 1e-12 or ex[:, 0].max() > xmax + 1e-12
                or ex[:, 1].min() < zmin - 1e-12 or ex[:, 1].max() > zmax + 1e-12):
            raise ConfigError(f"electrode {e.name!r}: polygon outside bounding_box")
    for i in range(len(polys)):
        for j in range(i + 1, len(polys)):
            ei, si = polys[i]
            ej, sj = polys[j]
            inter = si.intersection(sj)
            if inter.area > 1e-18:
                raise ConfigError(
                    f"electrodes {ei.name!r} and {ej.name!r} overlap")

    rf = [e for e in layout.electrodes if e.role == "rf"]
    if not rf:
        raise ConfigError("layout has no rf electrode")
    if len({e.name for e in rf}) != 1:
        raise ConfigError("all rf electrodes must share one name (one electrical node)")
    names = {}
    for e in layout.electrodes:
        names.setdefault(e.name, e.role)
        if names[e.name] != e.role:
            raise ConfigError(f"electrode name {e.name!r} used with two roles")
    if layout.top_plate is not None and TOP_PLATE_KEY in names:
        raise ConfigError(f"{TOP_PLATE_KEY!r} is reserved for the top plate")


@dataclass(frozen=True)
class VoltageSet:
    v_rf_amplitude: float          # V (zero-to-peak amplitude, not pk-pk)
    omega_rf: float                # rad/s
    dc: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.v_rf_amplitude < 0:
            raise ConfigError("v_rf_amplitude must be >= 0")
        if not self.omega_rf > 0:
            raise ConfigError("omega_rf must be > 0")

    def validated(self, layout: ElectrodeLayout) -> "VoltageSet":
        allowed = set(layout.dc_names)
        if layout.top_plate is not None:
            allowed.add(TOP_PLATE_KEY)
        for k in self.dc:
            if k not in allowed:
                raise ConfigError(f"dc voltage {k!r} names no dc electrode in layout")
        return self

    def with_dc(self, **updates: float) -> "VoltageSet":
        dc = dict(self.dc)
        dc.update(updates)
        return VoltageSet(self.v_rf_amplitude, self.omega_rf, dc)

    def with_rf(self, v_rf_amplitude: float) -> "VoltageSet":
        return VoltageSet(v_rf_amplitude, self.omega_rf, dict(self.dc))

    @property
    def rf_period(self) -> float:
        return 2.0 * np.pi / self.omega_rf


@dataclass(frozen=True)
class IonSpecies:
    mass: float    # kg
    charge: float  # C

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigError("ion mass must be > 0")
        if self.charge == 0:
            raise ConfigError("ion charge must be nonzero")


@dataclass(frozen=True)
class BufferGas:
    pressure: float        # Pa
    temperature: float     # K
    gas_mass: float        # kg
    polarizability: float  # m^3, volume polarizability

    def __post_init__(self):
        if self.pressure < 0:
            raise ConfigError("buffer gas pressure must be >= 0")
        if not self.temperature > 0:
            raise ConfigError("buffer gas temperature must be > 0")
        if not self.gas_mass > 0:
            raise ConfigError("buffer gas mass must be > 0")
        if self.polarizability < 0:
            raise ConfigError("buffer gas polarizability must be >= 0")

    @property
    def number_density(self) -> float:
        return self.pressure / (cst.BOLTZMANN * self.temperature)


# ---------------------------------------------------------------------------
# canonical five-wire layout
# ---------------------------------------------------------------------------

# Default dimensions (meters). The published trap is "~1 mm scale" but its
# exact electrode dimensions are not public; these ratios put the rf null
# about 1.3 mm above the surface.
CENTER_WIDTH = 1.0e-3     # center ground-referenced dc strip (V1)
RAIL_WIDTH = 2.0e-3       # rf rails and segmented dc rails
SEGMENT_LENGTH = 1.5e-3   # dc rail segment length along z
STRIP_LENGTH = 20.0e-3    # all strips run z in [-10, 10] mm
GAP = 0.2e-3              # milled gap, grounded in the BEM view
PLATE_HEIGHT = 6.3e-3
PLATE_SLIT_HALFWIDTH = 0.5e-3
MARGIN = 3.0e-3           # grounded chip margin beyond the outer rails
Z_MARGIN = 2.0e-3


def _rect(x1, x2, z1, z2) -> np.ndarray:
    return np.array([[x1, z1], [x2, z1], [x2, z2], [x1, z2]], dtype=float)


def canonical_layout(gapless: bool = False) -> ElectrodeLayout:
    """Five-wire trap: grounded center strip (V1), two rf rails (one node),
    two segmented dc rails, top plate at 6.3 mm.

    The dc rails are segmented along z: long outer segments V2, inner
    1.5 mm segments V3 (both rails), and a middle 1.5 mm segment that is V4
    on the left rail and V5 on the right rail, so V5 produces a transverse
    x field at the ion.

    With ``gapless=True`` the milled gaps are collapsed to their midlines
    (adjacent electrodes share an edge); this is the geometry the analytic
    gapless-plane solver assumes. Default is the physical gapped layout
    with the gaps meshed as grounded strips.
    """
    zl = STRIP_LENGTH / 2
    # in the gapless view each milled gap collapses to its midline, i.e.
    # every electrode edge that faces a gap moves out by half a gap
    h = GAP / 2 if gapless else 0.0

    # x extents (right half; left is mirrored)
    c2 = CENTER_WIDTH / 2 + h                 # center strip outer edge
    rf1 = c2 if gapless else CENTER_WIDTH / 2 + GAP
    rf2 = rf1 + RAIL_WIDTH + 2 * h
    dc1 = rf2 if gapless else rf2 + GAP
    dc2 = dc1 + RAIL_WIDTH + h                # outer edge abuts the ground margin

    # z extents of the dc rail segments (positive half; mirrored to z<0)
    s_mid = SEGMENT_LENGTH / 2 + h            # middle segment |z| < s_mid
    s3a = s_mid if gapless else SEGMENT_LENGTH / 2 + GAP
    s3b = s3a + SEGMENT_LENGTH + 2 * h
    s2a = s3b if gapless else s3b + GAP

    els: list[Electrode] = []
    els.append(Electrode("V1", _rect(-c2, c2, -zl, zl), "dc"))
    for sgn in (+1, -1):
        a, b = sorted((sgn * rf1, sgn * rf2))
        els.append(Electrode("rf", _rect(a, b, -zl, zl), "rf"))
    for sgn, mid_name in ((+1, "V5"), (-1, "V4")):
        a, b = sorted((sgn * dc1, sgn * dc2))
        els.append(Electrode(mid_name, _rect(a, b, -s_mid, s_mid), "dc"))
        for zsgn in (+1, -1):
            z3 = sorted((zsgn * s3a, zsgn * s3b))
            els.append(Electrode("V3", _rect(a, b, z3[0], z3[1]), "dc"))
            z2 = sorted((zsgn * s2a, zsgn * zl))
            els.append(Electrode("V2", _rect(a, b, z2[0], z2[1]), "dc"))

    if not gapless:
        # milled gaps, grounded
        for sgn in (+1, -1):
            a, b = sorted((sgn * c2, sgn * rf1))
            els.append(Electrode("gnd", _rect(a, b, -zl, zl), "ground"))
            a, b = sorted((sgn * rf2, sgn * dc1))
            els.append(Electrode("gnd", _rect(a, b, -zl, zl), "ground"))
            for zsgn in (+1, -1):
                x1, x2 = sorted((sgn * dc1, sgn * dc2))
                za, zb = sorted((zsgn * s_mid, zsgn * s3a))
                els.append(Electrode("gnd", _rect(x1, x2, za, zb), "ground"))
                za, zb = sorted((zsgn * s3b, zsgn * s2a))
                els.append(Electrode("gnd", _rect(x1, x2, za, zb), "ground"))

    xbb = dc2 + MARGIN
    zbb = zl + Z_MARGIN
    if not gapless:
        # grounded chip margins out to the bounding box
        els.append(Electrode("gnd", _rect(dc2, xbb, -zl, zl), "ground"))
        els.append(Electrode("gnd", _rect(-xbb, -dc2, -zl, zl), "ground"))
        els.append(Electrode("gnd", _rect(-xbb, xbb, zl, zbb), "ground"))
        els.append(Electrode("gnd", _rect(-xbb, xbb, -zbb, -zl), "ground"))

    return ElectrodeLayout(
        electrodes=tuple(els),
        top_plate=TopPlate(PLATE_HEIGHT, PLATE_SLIT_HALFWIDTH),
        bounding_box=((-xbb, -zbb), (xbb, zbb)),
        gapless=gapless,
    )


def default_voltages() -> VoltageSet:
    """Published drive and rail settings; V_top = 0 unless scanned."""
    return VoltageSet(
        v_rf_amplitude=1000.0,
        omega_rf=cst.mhz_to_rad_s(7.6),
        dc={"V1": 0.0, "V2": 110.0, "V3": -50.0, "V4": 0.0, "V5": 0.0,
            TOP_PLATE_KEY: 0.0},
    )


def default_ion() -> IonSpecies:
    return IonSpecies(mass=cst.u_to_kg(cst.SR88_MASS_U),
                      charge=cst.ELEMENTARY_CHARGE)


def default_buffer_gas() -> BufferGas:
    return BufferGas(pressure=cst.torr_to_pa(1e-5), temperature=300.0,
                     gas_mass=cst.u_to_kg(cst.HE_MASS_U),
                     polarizability=cst.HE_POLARIZABILITY_A3 * cst.ANGSTROM3)


# ---------------------------------------------------------------------------
# config file I/O
# ---------------------------------------------------------------------------

def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing {where}.{key}")
    return d[key]


def _layout_from_dict(spec) -> ElectrodeLayout:
    if spec == "canonical":
        return canonical_layout()
    if not isinstance(spec, dict):
        raise ConfigError("layout must be \"canonical\" or an object")
    els = []
    for i, e in enumerate(_require(spec, "electrodes", "layout")):
        name = _require(e, "name", f"layout.electrodes[{i}]")
        role = _require(e, "role", f"layout.electrodes[{i}]")
        poly = np.asarray(_require(e, "polygon_mm", f"layout.electrodes[{i}]"),
                          dtype=float) * cst.MM
        els.append(Electrode(name, poly, role))
    tp = spec.get("top_plate")
    plate = None
    if tp is not None:
        plate = TopPlate(_require(tp, "height_mm", "layout.top_plate") * cst.MM,
                         tp.get("slit_halfwidth_mm", 0.5) * cst.MM)
    bb = _require(spec, "bounding_box_mm", "layout")
    bbox = ((bb[0][0] * cst.MM, bb[0][1] * cst.MM),
            (bb[1][0] * cst.MM, bb[1][1] * cst.MM))
    return ElectrodeLayout(tuple(els), plate, bbox)


def _layout_to_dict(layout: ElectrodeLayout):
    if layout == canonical_layout():
        return "canonical"
    d = {
        "electrodes": [
            {"name": e.name, "role": e.role,
             "polygon_mm": (e.polygon / cst.MM).tolist()}
            for e in layout.electrodes
        ],
        "bounding_box_mm": [[layout.bounding_box[0][0] / cst.MM,
                             layout.bounding_box[0][1] / cst.MM],
                            [layout.bounding_box[1][0] / cst.MM,
                             layout.bounding_box[1][1] / cst.MM]],
    }
    if layout.top_plate is not None:
        d["top_plate"] = {
            "height_mm": layout.top_plate.height_m / cst.MM,
            "slit_halfwidth_mm": layout.top_plate.slit_halfwidth_m / cst.MM,
        }
    return d


def config_from_dict(cfg: dict) -> tuple[ElectrodeLayout, VoltageSet, IonSpecies, BufferGas]:
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object")
    layout = _layout_from_dict(cfg.get("layout", "canonical"))

    drive = cfg.get("drive", {})
    volts_d = cfg.get("voltages", {})
    volts = VoltageSet(
        v_rf_amplitude=float(drive.get("rf_amplitude_V", 1000.0)),
        omega_rf=cst.mhz_to_rad_s(float(drive.get("frequency_MHz", 7.6))),
        dc={str(k): float(v) for k, v in volts_d.get("dc", {}).items()},
    ).validated(layout)

    ion_d = cfg.get("ion", {})
    ion = IonSpecies(
        mass=cst.u_to_kg(float(ion_d.get("mass_u", cst.SR88_MASS_U))),
        charge=float(ion_d.get("charge_e", 1.0)) * cst.ELEMENTARY_CHARGE,
    )

    gas_d = cfg.get("buffer_gas", {})
    gas = BufferGas(
        pressure=cst.torr_to_pa(float(gas_d.get("pressure_torr", 1e-5))),
        temperature=float(gas_d.get("temperature_K", 300.0)),
        gas_mass=cst.u_to_kg(float(gas_d.get("mass_u", cst.HE_MASS_U))),
        polarizability=float(gas_d.get("polarizability_A3",
                                       cst.HE_POLARIZABILITY_A3)) * cst.ANGSTROM3,
    )
    return layout, volts, ion, gas


def load_config(path) -> tuple[ElectrodeLayout, VoltageSet, IonSpecies, BufferGas]:
    """Load and validate a JSON config; returns SI-unit model objects."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(cfg)


def serialize_config(layout: ElectrodeLayout, volts: VoltageSet,
                     ion: IonSpecies, gas: BufferGas) -> dict:
    """Inverse of config_from_dict up to float roundoff-free unit factors."""
    return {
        "layout": _layout_to_dict(layout),
        "voltages": {"dc": dict(volts.dc)},
        "drive": {"rf_amplitude_V": volts.v_rf_amplitude,
                  "frequency_MHz": volts.omega_rf / (2.0 * np.pi * 1e6)},
        "ion": {"mass_u": ion.mass / cst.ATOMIC_MASS,
                "charge_e": ion.charge / cst.ELEMENTARY_CHARGE},
        "buffer_gas": {"pressure_torr": gas.pressure / cst.TORR,
                       "temperature_K": gas.temperature,
                       "mass_u": gas.gas_mass / cst.ATOMIC_MASS,
                       "polarizability_A3": gas.polarizability / cst.ANGSTROM3},
    }


def default_config() -> tuple[ElectrodeLayout, VoltageSet, IonSpecies, BufferGas]:
    return (canonical_layout(), default_voltages().validated(canonical_layout()),
            default_ion(), default_buffer_gas())
