"""Synthetic single-slice analog of a prostate training phantom.

Geometry is expressed in fractions so one spec can be rendered at any size:
centres are fractions of (width, height) and every radius / semi-axis is a
fraction of ``min(width, height)``. Shapes are composited in draw order
(background, prostate, lesions, urethra) with 4x4 supersampled coverage.

Default proportions: the prostate ellipse has semi-axes in the ratio
5 : 4.5 and spans 40% of the short image side along its major axis, so one
centimetre maps to 0.08 of the short side. Lesions have diameters in
0.5-1.0 cm and the urethra a 0.7 cm diameter.
"""

from dataclasses import dataclass, field, asdict
import math

import numpy as np

from .errors import ParameterError

SUPERSAMPLE = 4

BACKGROUND_LEVEL = 0.15
PROSTATE_LEVEL = 0.6
LESION_LEVEL = 0.35
URETHRA_LEVEL = 0.1

# 5 cm prostate major axis -> 0.4 of the short side.
CM = 0.4 / 5.0
LESION_RADIUS_RANGE_CM = (0.25, 0.5)
URETHRA_RADIUS_CM = 0.35
NUM_LESIONS = 3


@dataclass(frozen=True)
class Ellipse:
    cx: float
    cy: float
    ax: float
    ay: float
    intensity: float


@dataclass(frozen=True)
class Disc:
    cx: float
    cy: float
    r: float
    intensity: float


@dataclass
class PhantomSpec:
    width: int
    height: int
    background_level: float = BACKGROUND_LEVEL
    prostate: Ellipse | None = None
    lesions: list = field(default_factory=list)
    urethra: Disc | None = None
    rng_seed: int = 0

    def shapes(self):
        out = []
        if self.prostate is not None:
            out.append(self.prostate)
        out.extend(self.lesions)
        if self.urethra is not None:
            out.append(self.urethra)
        return out

    def validate(self):
        """Raise ParameterError unless every invariant holds."""
        if self.width < 1 or self.height < 1:
            raise ParameterError(f"invalid canvas {self.width}x{self.height}")
        if not 0.0 <= self.background_level <= 1.0:
            raise ParameterError("background_level outside [0, 1]")
        short = min(self.width, self.height)
        for shape in self.shapes():
            if not 0.0 <= shape.intensity <= 1.0:
                raise ParameterError(f"intensity outside [0, 1]: {shape}")
            if isinstance(shape, Ellipse):
                rx, ry = shape.ax * short, shape.ay * short
                if rx <= 0 or ry <= 0:
                    raise ParameterError(f"non-positive semi-axis: {shape}")
            else:
                rx = ry = shape.r * short
                if rx <= 0:
                    raise ParameterError(f"non-positive radius: {shape}")
            x, y = shape.cx * self.width, shape.cy * self.height
            if x - rx < 0 or x + rx > self.width or y - ry < 0 or y + ry > self.height:
                raise ParameterError(f"shape extends past the image bounds: {shape}")
        return self

    # Flat key-value serialisation -------------------------------------------

    def to_dict(self):
        d = {
            "width": self.width,
            "height": self.height,
            "background_level": self.background_level,
            "rng_seed": self.rng_seed,
            "num_lesions": len(self.lesions),
        }
        if self.prostate is not None:
            for k, v in asdict(self.prostate).items():
                d[f"prostate.{k}"] = v
        for n, les in enumerate(self.lesions):
            for k, v in asdict(les).items():
                d[f"lesion{n}.{k}"] = v
        if self.urethra is not None:
            for k, v in asdict(self.urethra).items():
                d[f"urethra.{k}"] = v
        return d

    @classmethod
    def from_dict(cls, d):
        def grab(prefix, keys):
            return {k: float(d[f"{prefix}.{k}"]) for k in keys}

        try:
            prostate = None
            if "prostate.cx" in d:
                prostate = Ellipse(**grab("prostate", ("cx", "cy", "ax", "ay", "intensity")))
            lesions = [
                Disc(**grab(f"lesion{n}", ("cx", "cy", "r", "intensity")))
                for n in range(int(d.get("num_lesions", 0)))
            ]
            urethra = None
            if "urethra.cx" in d:
                urethra = Disc(**grab("urethra", ("cx", "cy", "r", "intensity")))
            spec = cls(
                width=int(d["width"]),
                height=int(d["height"]),
                background_level=float(d.get("background_level", BACKGROUND_LEVEL)),
                prostate=prostate,
                lesions=lesions,
                urethra=urethra,
                rng_seed=int(d.get("rng_seed", 0)),
            )
        except (KeyError, ValueError) as exc:
            raise ParameterError(f"bad phantom spec entry: {exc}") from exc
        return spec.validate()


def default_prostate_spec(width, height, seed=0):
    """Default phantom: prostate, three hypointense lesions, central urethra.

    Lesion centres and radii are drawn from ``numpy.random.default_rng(seed)``
    by rejection so each lesion sits inside the prostate with a margin, clear
    of the urethra and of the other lesions.
    """
    if width < 32 or height < 32:
        raise ParameterError(f"canvas must be at least 32x32, got {width}x{height}")
    short = min(width, height)
    ax = 2.5 * CM
    ay = 2.25 * CM
    prostate = Ellipse(0.5, 0.5, ax, ay, PROSTATE_LEVEL)
    urethra = Disc(0.5, 0.5, URETHRA_RADIUS_CM * CM, URETHRA_LEVEL)

    rng = np.random.default_rng(seed)
    outline = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)
    px = 0.5 * width + ax * short * np.cos(outline)
    py = 0.5 * height + ay * short * np.sin(outline)
    margin = 1.0  # pixels of prostate kept around each lesion

    lesions = []
    while len(lesions) < NUM_LESIONS:
        r = rng.uniform(*LESION_RADIUS_RANGE_CM) * CM
        cx = rng.uniform(0.5 - ax, 0.5 + ax)
        cy = rng.uniform(0.5 - ay, 0.5 + ay)
        x, y, rp = cx * width, cy * height, r * short
        if ((x - 0.5 * width) / (ax * short)) ** 2 + ((y - 0.5 * height) / (ay * short)) ** 2 >= 1:
            continue
        if np.min(np.hypot(px - x, py - y)) < rp + margin:
            continue
        if math.hypot(x - 0.5 * width, y - 0.5 * height) < rp + urethra.r * short + margin:
            continue
        if any(
            math.hypot(x - o.cx * width, y - o.cy * height) < rp + o.r * short + margin
            for o in lesions
        ):
            continue
        lesions.append(Disc(cx, cy, r, LESION_LEVEL))

    spec = PhantomSpec(
        width=width,
        height=height,
        background_level=BACKGROUND_LEVEL,
        prostate=prostate,
        lesions=lesions,
        urethra=urethra,
        rng_seed=seed,
    )
    return spec.validate()


def _coverage(shape, width, height):
    # Fraction of the SUPERSAMPLE**2 sub-pixel samples inside `shape`.
    # Pixel (i, j) spans [j, j+1) x [i, i+1) in continuous coordinates.
    short = min(width, height)
    offs = (np.arange(SUPERSAMPLE) + 0.5) / SUPERSAMPLE
    xs = (np.arange(width)[:, None] + offs[None, :]).ravel()
    ys = (np.arange(height)[:, None] + offs[None, :]).ravel()
    cx, cy = shape.cx * width, shape.cy * height
    if isinstance(shape, Ellipse):
        rx, ry = shape.ax * short, shape.ay * short
    else:
        rx = ry = shape.r * short
    inside = ((xs[None, :] - cx) / rx) ** 2 + ((ys[:, None] - cy) / ry) ** 2 <= 1.0
    inside = inside.reshape(height, SUPERSAMPLE, width, SUPERSAMPLE)
    return inside.mean(axis=(1, 3))


def generate_phantom(spec):
    """Render `spec` to a float64 image of shape ``(height, width)``."""
    spec.validate()
    img = np.full((spec.height, spec.width), float(spec.background_level))
    for shape in spec.shapes():
        cov = _coverage(shape, spec.width, spec.height)
        img = img * (1.0 - cov) + shape.intensity * cov
    return img
