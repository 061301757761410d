"""Network geometry: hexagonal macro grid with 7-site wrap-around, factory
box placement, user drops, wrapped distances and wall-crossing queries."""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

SQRT3 = math.sqrt(3.0)


class FactoryPlacement(Enum):
    CELL_EDGE = "cell_edge"
    CENTER = "center"
    NEAR_BS = "near_bs"


@dataclass(frozen=True)
class Site:
    x: float
    y: float
    height_m: float
    sector_azimuths_deg: tuple[float, ...]

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class FactoryBox:
    """Axis-aligned factory floor with a tri-sector ceiling-mounted site."""

    origin_x: float
    origin_y: float
    width_m: float = 100.0
    depth_m: float = 100.0
    height_m: float = 10.0
    bs_height_m: float = 10.0
    bs_sector_azimuths_deg: tuple[float, ...] = (0.0, 120.0, 240.0)
    bs_downtilt_deg: float = 10.0
    placement: FactoryPlacement = FactoryPlacement.CENTER

    @property
    def center(self) -> np.ndarray:
        """Floor centroid; the factory BS sits here."""
        return np.array(
            [self.origin_x + self.width_m / 2.0, self.origin_y + self.depth_m / 2.0]
        )

    @property
    def rect(self) -> tuple[float, float, float, float]:
        """(x0, y0, x1, y1)."""
        return (
            self.origin_x,
            self.origin_y,
            self.origin_x + self.width_m,
            self.origin_y + self.depth_m,
        )

    def contains_2d(self, x, y, strict: bool = False):
        """Whether (x, y) lies in the floor rectangle (closed by default)."""
        x0, y0, x1, y1 = self.rect
        if strict:
            return (x > x0) & (x < x1) & (y > y0) & (y < y1)
        return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)

    def contains_3d(self, x, y, h) -> bool:
        return bool(self.contains_2d(x, y)) and h <= self.height_m

    def distance_to_wall(self, x, y):
        """Euclidean distance from outdoor points to the floor rectangle."""
        x0, y0, x1, y1 = self.rect
        dx = np.maximum(np.maximum(x0 - np.asarray(x), 0.0), np.asarray(x) - x1)
        dy = np.maximum(np.maximum(y0 - np.asarray(y), 0.0), np.asarray(y) - y1)
        return np.hypot(dx, dy)


@dataclass(frozen=True)
class NetworkLayout:
    sites: tuple[Site, ...]
    isd_m: float
    wrap_vectors: np.ndarray  # (7, 2), identity first
    factory: FactoryBox
    bounds: tuple[float, float, float, float]  # (xmin, ymin, xmax, ymax)

    def as_dict(self) -> dict:
        """JSON-friendly dump for debugging."""
        return {
            "isd_m": self.isd_m,
            "sites": [
                {
                    "x": s.x,
                    "y": s.y,
                    "height_m": s.height_m,
                    "sector_azimuths_deg": list(s.sector_azimuths_deg),
                }
                for s in self.sites
            ],
            "wrap_vectors": self.wrap_vectors.tolist(),
            "factory": {
                "origin_x": self.factory.origin_x,
                "origin_y": self.factory.origin_y,
                "width_m": self.factory.width_m,
                "depth_m": self.factory.depth_m,
                "height_m": self.factory.height_m,
                "bs_height_m": self.factory.bs_height_m,
                "bs_sector_azimuths_deg": list(self.factory.bs_sector_azimuths_deg),
                "bs_downtilt_deg": self.factory.bs_downtilt_deg,
                "placement": self.factory.placement.value,
                "center": self.factory.center.tolist(),
            },
            "bounds": list(self.bounds),
        }


@dataclass(frozen=True)
class UserDrop:
    urllc_xy: np.ndarray  # (n, 2), strictly inside the factory
    urllc_height_m: float
    embb_xy: np.ndarray  # (m, 2), outdoors
    embb_height_m: float


def hex_site_positions(isd_m: float) -> np.ndarray:
    """Center site plus the 6-site ring at the inter-site distance."""
    pts = [(0.0, 0.0)]
    for k in range(6):
        a = math.radians(60.0 * k)
        pts.append((isd_m * math.cos(a), isd_m * math.sin(a)))
    return np.array(pts)


def cluster_wrap_vectors(isd_m: float) -> np.ndarray:
    """Identity plus the 6 translations of the 7-site cluster super-lattice.

    The cluster tiles the plane on the lattice spanned by t1 = a1 + 2*a2 and
    t2 = -2*a1 + 3*a2 (|t| = isd * sqrt(7)).
    """
    a1 = np.array([isd_m, 0.0])
    a2 = np.array([isd_m / 2.0, isd_m * SQRT3 / 2.0])
    t1 = a1 + 2.0 * a2
    t2 = -2.0 * a1 + 3.0 * a2
    t3 = t1 - t2
    return np.array([(0.0, 0.0), t1, -t1, t2, -t2, t3, -t3])


def _placement_center(
    placement: FactoryPlacement, isd_m: float, near_bs_offset_m: float
) -> np.ndarray:
    if placement is FactoryPlacement.NEAR_BS:
        # offset from the center site along its first sector boresight (az 0)
        return np.array([near_bs_offset_m, 0.0])
    if placement is FactoryPlacement.CELL_EDGE:
        # Voronoi border between the center site and its +x ring neighbor
        return np.array([isd_m / 2.0, 0.0])
    if placement is FactoryPlacement.CENTER:
        # equidistant from three mutually adjacent sites: the deep-cell point
        # at the maximal possible min-distance isd/sqrt(3)
        return np.array([isd_m / 2.0, isd_m / (2.0 * SQRT3)])
    raise ValueError(f"unknown placement {placement!r}")


def build_layout(
    isd_m: float = 500.0,
    placement: FactoryPlacement | str = FactoryPlacement.CENTER,
    near_bs_offset_m: float = 30.0,
    macro_bs_height_m: float = 25.0,
    macro_sector_azimuths_deg: tuple[float, ...] = (0.0, 120.0, 240.0),
    factory_width_m: float = 100.0,
    factory_depth_m: float = 100.0,
    factory_height_m: float = 10.0,
    factory_bs_height_m: float = 10.0,
    factory_sector_azimuths_deg: tuple[float, ...] = (0.0, 120.0, 240.0),
    factory_downtilt_deg: float = 10.0,
    bounds_m: float = 1500.0,
) -> NetworkLayout:
    """Seven tri-sectored macro sites with wrap-around plus one factory.

    Deterministic: identical inputs give a bit-identical layout.
    """
    if isd_m <= 0:
        raise ValueError("inter-site distance must be positive")
    if isinstance(placement, str):
        placement = FactoryPlacement(placement)
    site_cell_area = isd_m**2 * SQRT3 / 2.0
    if factory_width_m * factory_depth_m > site_cell_area:
        raise ValueError("factory footprint exceeds the per-site cell area")

    sites = tuple(
        Site(float(x), float(y), macro_bs_height_m, tuple(macro_sector_azimuths_deg))
        for x, y in hex_site_positions(isd_m)
    )
    center = _placement_center(placement, isd_m, near_bs_offset_m)
    factory = FactoryBox(
        origin_x=float(center[0] - factory_width_m / 2.0),
        origin_y=float(center[1] - factory_depth_m / 2.0),
        width_m=factory_width_m,
        depth_m=factory_depth_m,
        height_m=factory_height_m,
        bs_height_m=factory_bs_height_m,
        bs_sector_azimuths_deg=tuple(factory_sector_azimuths_deg),
        bs_downtilt_deg=factory_downtilt_deg,
        placement=placement,
    )
    # the macro BSs live above the factory roof, so the 3D interior check is
    # what matters (a NEAR_BS offset smaller than the half-width puts a site
    # inside the 2D footprint, under the roof-mounted antennas)
    for s in sites:
        if factory.contains_3d(s.x, s.y, s.height_m):
            raise ValueError("factory interior would contain a macro site")
    half = bounds_m / 2.0
    return NetworkLayout(
        sites=sites,
        isd_m=isd_m,
        wrap_vectors=cluster_wrap_vectors(isd_m),
        factory=factory,
        bounds=(-half, -half, half, half),
    )


def wrapped_displacement(layout: NetworkLayout, from_xy, to_xy) -> np.ndarray:
    """Shortest displacement from -> to over all wrap translations.

    Accepts a single 'from' point and one or many 'to' points; returns the
    per-point displacement(s) whose norm is the wrapped distance.
    """
    f = np.asarray(from_xy, dtype=float)
    t = np.atleast_2d(np.asarray(to_xy, dtype=float))
    # candidate displacements: (n, 7, 2)
    cand = t[:, None, :] + layout.wrap_vectors[None, :, :] - f[None, None, :]
    d2 = np.sum(cand**2, axis=2)
    best = np.argmin(d2, axis=1)
    disp = cand[np.arange(len(t)), best]
    if np.asarray(to_xy).ndim == 1:
        return disp[0]
    return disp


def wrapped_distance_2d(layout: NetworkLayout, a_xy, b_xy):
    disp = wrapped_displacement(layout, a_xy, b_xy)
    return float(np.hypot(*disp)) if disp.ndim == 1 else np.hypot(disp[:, 0], disp[:, 1])


def wrapped_distance_3d(layout: NetworkLayout, a_xyz, b_xyz) -> float:
    """Wrap translations apply to the horizontal plane only."""
    a = np.asarray(a_xyz, dtype=float)
    b = np.asarray(b_xyz, dtype=float)
    d2d = wrapped_distance_2d(layout, a[:2], b[:2])
    return float(math.hypot(d2d, b[2] - a[2]))


def sample_factory_points(
    layout: NetworkLayout, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform points strictly inside the factory floor rectangle."""
    f = layout.factory
    xy = rng.uniform(size=(n, 2))
    return np.column_stack(
        (f.origin_x + xy[:, 0] * f.width_m, f.origin_y + xy[:, 1] * f.depth_m)
    )


def sample_outdoor_points(
    layout: NetworkLayout, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform points in the layout bounds, resampled out of the factory."""
    xmin, ymin, xmax, ymax = layout.bounds
    pts = np.column_stack(
        (rng.uniform(xmin, xmax, size=n), rng.uniform(ymin, ymax, size=n))
    )
    f = layout.factory
    while True:
        inside = f.contains_2d(pts[:, 0], pts[:, 1], strict=True)
        k = int(np.sum(inside))
        if k == 0:
            return pts
        pts[inside] = np.column_stack(
            (rng.uniform(xmin, xmax, size=k), rng.uniform(ymin, ymax, size=k))
        )


def drop_users(
    layout: NetworkLayout,
    n_urllc: int,
    n_embb: int,
    rng: np.random.Generator,
    ue_height_m: float = 1.5,
) -> UserDrop:
    """URLLC users uniform inside the factory, eMBB users uniform outdoors."""
    if n_urllc < 0 or n_embb < 0:
        raise ValueError("user counts must be non-negative")
    return UserDrop(
        urllc_xy=sample_factory_points(layout, n_urllc, rng),
        urllc_height_m=ue_height_m,
        embb_xy=sample_outdoor_points(layout, n_embb, rng),
        embb_height_m=ue_height_m,
    )


def wall_entry(
    rect: tuple[float, float, float, float],
    roof_height_m: float,
    out_xy,
    out_h,
    in_xy,
    in_h,
):
    """Entry geometry of rays from outdoor points into the factory box.

    Vectorized over either endpoint. For each ray, finds the first crossed
    box face along the segment: one of the four vertical walls (plan-view
    slab test) or the roof when the outdoor endpoint is above it. Returns
    (incident_angle_deg, d_in_m) where d_in is the remaining plan-view
    distance from the entry point to the indoor endpoint.
    """
    x0, y0, x1, y1 = rect
    o = np.atleast_2d(np.asarray(out_xy, dtype=float))
    i = np.atleast_2d(np.asarray(in_xy, dtype=float))
    n = max(len(o), len(i))
    o = np.broadcast_to(o, (n, 2)).astype(float)
    i = np.broadcast_to(i, (n, 2)).astype(float)
    oh = np.broadcast_to(np.asarray(out_h, dtype=float), (n,)).astype(float)
    ih = np.broadcast_to(np.asarray(in_h, dtype=float), (n,)).astype(float)

    d = i - o
    len2d = np.hypot(d[:, 0], d[:, 1])
    dh = ih - oh
    len3d = np.hypot(len2d, dh)

    # plan-view slab test against the four walls
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = np.sort(
            np.stack([(x0 - o[:, 0]) / d[:, 0], (x1 - o[:, 0]) / d[:, 0]]), axis=0
        )
        ty = np.sort(
            np.stack([(y0 - o[:, 1]) / d[:, 1], (y1 - o[:, 1]) / d[:, 1]]), axis=0
        )
    # degenerate axes (ray parallel to a slab): never the entering axis
    inside_x = (o[:, 0] >= x0) & (o[:, 0] <= x1)
    inside_y = (o[:, 1] >= y0) & (o[:, 1] <= y1)
    tx_lo = np.where(np.isnan(tx[0]), np.where(inside_x, -np.inf, np.inf), tx[0])
    ty_lo = np.where(np.isnan(ty[0]), np.where(inside_y, -np.inf, np.inf), ty[0])
    t_wall = np.maximum(tx_lo, ty_lo)
    wall_axis_x = tx_lo >= ty_lo  # entering wall is an x-normal wall

    # roof crossing exists only when the outdoor endpoint is above the roof
    above = oh > roof_height_m
    with np.errstate(divide="ignore", invalid="ignore"):
        t_roof_raw = (oh - roof_height_m) / (oh - ih)
    t_roof = np.where(above, t_roof_raw, -np.inf)
    # a point already inside the footprint can only enter through the roof
    o_inside = inside_x & inside_y
    t_wall = np.where(o_inside, -np.inf, t_wall)

    t_entry = np.maximum(t_wall, t_roof)
    t_entry = np.clip(t_entry, 0.0, 1.0)
    via_roof = t_roof >= t_wall

    d_in = (1.0 - t_entry) * len2d

    with np.errstate(divide="ignore", invalid="ignore"):
        cos_wall = np.where(
            wall_axis_x, np.abs(d[:, 0]) / len2d, np.abs(d[:, 1]) / len2d
        )
        cos_roof = np.abs(dh) / len3d
    cos_inc = np.where(via_roof, cos_roof, cos_wall)
    cos_inc = np.clip(np.nan_to_num(cos_inc, nan=1.0), 0.0, 1.0)
    angle = np.degrees(np.arccos(cos_inc))
    # the incident angle lives in [0, 90)
    angle = np.minimum(angle, np.nextafter(90.0, 0.0))
    return angle, d_in


def wall_crossing(
    layout: NetworkLayout,
    outdoor_xy,
    indoor_xy,
    outdoor_h: float | None = None,
    indoor_h: float | None = None,
) -> tuple[float, float]:
    """Incident angle and indoor travel distance for one outdoor/indoor ray.

    Exactly one endpoint must be inside the factory (closed footprint, at or
    below the roof). Heights are required when the outdoor endpoint sits
    above the factory footprint, where entry happens through the roof.
    """
    f = layout.factory
    o = np.asarray(outdoor_xy, dtype=float)
    i = np.asarray(indoor_xy, dtype=float)
    ih = 1.5 if indoor_h is None else float(indoor_h)

    if not (bool(f.contains_2d(i[0], i[1])) and ih <= f.height_m):
        raise ValueError("indoor endpoint is not inside the factory")
    if bool(f.contains_2d(o[0], o[1])):
        # inside the footprint the point is outdoor only when above the roof
        if outdoor_h is None:
            raise ValueError(
                "outdoor endpoint above the factory footprint requires heights"
            )
        if outdoor_h <= f.height_m:
            raise ValueError("both endpoints are inside the factory")
    # without heights the query is plan-view only: no roof path
    oh = ih if outdoor_h is None else float(outdoor_h)
    angle, d_in = wall_entry(f.rect, f.height_m, o, oh, i, ih)
    return float(angle[0]), float(d_in[0])
