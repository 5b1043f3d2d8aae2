"""Builtin scenario catalog and the JSON interchange format for custom data.

A scenario packages everything the pipeline needs to start: a chart with named
coordinates, metric entry expressions, a density expression, and the dilation
constant.  The builtin families all have rational entry coefficients so the
exact backend can consume them unchanged:

  einstein-sphere      products of round 2-spheres and Hopf-coordinate
                       3-spheres with Ric = 2*mu*g on each block
  einstein-n3..n12     aliases for einstein-sphere at mu = 1
  gaussian-soliton     flat R^n with phi = lambda*|x|^2/2
  flat-phi-poly        flat R^3 with a generic quadratic density, lambda = 1/3
  sphere-soliton       the round unit S^2 or S^3 shrinker with normalized
                       constant density
  perturbed-torus      seeded small trigonometric perturbation of the flat
                       3-torus (amplitudes are integer multiples of 1/1000)

Rational-mode default base points avoid analytic-function evaluation away from
rational-safe centers: tori sit at the origin, sphere blocks at rational
interior heights with angle coordinates 0.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .geometry import Chart, metric_measure

_Z_POINTS = [
    Fraction(1, 3),
    Fraction(-1, 4),
    Fraction(2, 5),
    Fraction(-1, 5),
    Fraction(3, 7),
    Fraction(-2, 7),
]
_M_POINTS = [Fraction(2, 5), Fraction(1, 3), Fraction(3, 7), Fraction(4, 9)]

_PARTITIONS = {
    2: [2],
    3: [3],
    4: [2, 2],
    5: [2, 3],
    6: [2, 2, 2],
    7: [2, 2, 3],
    8: [2, 2, 2, 2],
    9: [2, 2, 2, 3],
    10: [2, 2, 2, 2, 2],
    11: [2, 2, 2, 2, 3],
    12: [2, 2, 2, 2, 2, 2],
}


@dataclass
class Scenario:
    name: str
    chart: Chart
    metric: dict
    phi: str
    lam: Fraction
    family: str
    params: dict = field(default_factory=dict)
    notes: str = ""

    @property
    def dim(self):
        return self.chart.dim


def _fs(q):
    q = Fraction(q)
    if q.denominator == 1:
        return "%d" % q.numerator
    return "(%d/%d)" % (q.numerator, q.denominator)


def sphere_product_blocks(n):
    """Coordinate names and metric entries for the block decomposition of n."""
    if n not in _PARTITIONS:
        raise ValueError("no sphere-product chart for dimension %d" % n)
    return _PARTITIONS[n]


def einstein_sphere(n, mu=Fraction(1), lam=Fraction(0)):
    """Product of round spheres with Ric = 2*mu*g, constant density zero."""
    mu = Fraction(mu)
    if mu <= 0:
        raise ValueError("einstein-sphere needs mu > 0")
    blocks = sphere_product_blocks(n)
    coords = []
    entries = {}
    idx = 0
    for b, dim_b in enumerate(blocks, start=1):
        if dim_b == 2:
            r2 = 1 / (2 * mu)
            z, t = "z%d" % b, "t%d" % b
            coords.extend([z, t])
            entries[(idx, idx)] = "%s/(1 - %s^2)" % (_fs(r2), z)
            entries[(idx + 1, idx + 1)] = "%s*(1 - %s^2)" % (_fs(r2), z)
            idx += 2
        else:
            rho2 = 1 / mu
            m, s, t = "m%d" % b, "s%d" % b, "t%d" % b
            coords.extend([m, s, t])
            entries[(idx, idx)] = "%s/(4*%s*(1 - %s))" % (_fs(rho2), m, m)
            entries[(idx + 1, idx + 1)] = "%s*(1 - %s)" % (_fs(rho2), m)
            entries[(idx + 2, idx + 2)] = "%s*%s" % (_fs(rho2), m)
            idx += 3
    chart = Chart(tuple(coords), "product")
    return Scenario(
        name="einstein-sphere-n%d" % n,
        chart=chart,
        metric=entries,
        phi="0",
        lam=Fraction(lam),
        family="einstein",
        params={"mu": _fs(mu), "n": n, "blocks": blocks},
        notes="einstein constant 2*mu = %s" % _fs(2 * mu),
    )


def gaussian_soliton(n=3, lam=Fraction(1, 2)):
    lam = Fraction(lam)
    if lam <= 0:
        raise ValueError("gaussian-soliton needs lambda > 0")
    coords = tuple("x%d" % (i + 1) for i in range(n))
    entries = {(i, i): "1" for i in range(n)}
    phi = "%s*(%s)" % (_fs(lam / 2), " + ".join("%s^2" % c for c in coords))
    return Scenario(
        name="gaussian-soliton-n%d" % n,
        chart=Chart(coords, "gaussian"),
        metric=entries,
        phi=phi,
        lam=lam,
        family="soliton",
        params={"n": n},
    )


def flat_phi_poly():
    coords = ("x1", "x2", "x3")
    entries = {(i, i): "1" for i in range(3)}
    phi = (
        "1/2 + x1/3 - x2/4 + x3/5 + x1^2/6 + x1*x2/7 - x2^2/8"
        " + x2*x3/9 + x3^2/10 - x1*x3/11"
    )
    return Scenario(
        name="flat-phi-poly",
        chart=Chart(coords, "flat"),
        metric=entries,
        phi=phi,
        lam=Fraction(1, 3),
        family="flat",
        params={},
        notes="generic quadratic density; closed-form expansion is exact",
    )


def sphere_soliton(n):
    """Round unit S^n shrinker: lambda = n - 1, constant normalized density."""
    if n == 2:
        sc = einstein_sphere(2, Fraction(1, 2), lam=Fraction(1))
        phi0 = Fraction(6931, 10000)  # log 2
    elif n == 3:
        sc = einstein_sphere(3, Fraction(1), lam=Fraction(2))
        phi0 = Fraction(633, 500)  # log(2 sqrt(pi))
    else:
        raise ValueError("sphere-soliton is built for n in {2, 3}")
    return Scenario(
        name="sphere-soliton-n%d" % n,
        chart=sc.chart,
        metric=sc.metric,
        phi=_fs(phi0),
        lam=sc.lam,
        family="sphere-soliton",
        params={"n": n, "phi0": _fs(phi0), "tau": _fs(Fraction(1, 2 * (n - 1)))},
        notes="normalizing constant is a rational approximation",
    )


def perturbed_torus(seed=0, lam=Fraction(0), amplitude=Fraction(1, 10)):
    """Flat 3-torus plus a seeded trigonometric perturbation.

    Amplitudes are integer multiples of 1/1000 capped by `amplitude`, so the
    scenario is exactly reproducible and rational-backend safe; frequencies are
    integers in [-2, 2] with no phase offsets.
    """
    amplitude = Fraction(amplitude)
    cap = int(1000 * amplitude)
    if cap < 1:
        raise ValueError("amplitude below 1/1000")
    rng = random.Random(seed)
    coords = ("x1", "x2", "x3")

    def trig_term():
        while True:
            k = [rng.randrange(-2, 3) for _ in range(3)]
            if any(k):
                break
        a = Fraction(rng.randrange(-cap, cap + 1) or 1, 1000)
        fn = rng.choice(["sin", "cos"])
        arg = " + ".join(
            "%d*%s" % (ki, c) for ki, c in zip(k, coords) if ki
        ).replace("+ -", "- ")
        return "%s*%s(%s)" % (_fs(a), fn, arg)

    entries = {}
    for i in range(3):
        for j in range(i, 3):
            lead = "1 + " if i == j else ""
            entries[(i, j)] = lead + " + ".join(trig_term() for _ in range(2))
    phi = " + ".join(trig_term() for _ in range(3))
    return Scenario(
        name="perturbed-torus-s%d" % seed,
        chart=Chart(coords, "torus"),
        metric=entries,
        phi=phi,
        lam=Fraction(lam),
        family="torus",
        params={"seed": seed, "amplitude": _fs(amplitude)},
    )


_CATALOG = (
    "einstein-sphere",
    "gaussian-soliton",
    "flat-phi-poly",
    "sphere-soliton",
    "perturbed-torus",
) + tuple("einstein-n%d" % n for n in range(3, 13))


def catalog():
    return list(_CATALOG)


def make(name, **params):
    """Instantiate a catalog scenario by name; aliases fix their parameters."""
    if name.startswith("einstein-n"):
        n = int(name[len("einstein-n") :])
        return einstein_sphere(n, Fraction(1), lam=params.get("lam", Fraction(0)))
    if name == "einstein-sphere":
        return einstein_sphere(
            params.get("n", 3), params.get("mu", Fraction(1)), params.get("lam", Fraction(0))
        )
    if name == "gaussian-soliton":
        return gaussian_soliton(params.get("n", 3), params.get("lam", Fraction(1, 2)))
    if name == "flat-phi-poly":
        return flat_phi_poly()
    if name == "sphere-soliton":
        return sphere_soliton(params.get("n", 3))
    if name == "perturbed-torus":
        return perturbed_torus(
            params.get("seed", 0),
            params.get("lam", Fraction(0)),
            params.get("amplitude", Fraction(1, 10)),
        )
    raise ValueError("unknown scenario %r (catalog: %s)" % (name, ", ".join(_CATALOG)))


def builtin_scenarios():
    """Default-parameter instances of every catalog family, alias-deduplicated."""
    out = []
    seen = set()
    for name in _CATALOG:
        sc = make(name)
        if sc.name not in seen:
            seen.add(sc.name)
            out.append(sc)
    return out


def default_base(scenario):
    """Rational interior base point, one Fraction per coordinate."""
    out = []
    zi = mi = 0
    for c in scenario.chart.coords:
        if c[0] == "z":
            out.append(_Z_POINTS[zi % len(_Z_POINTS)])
            zi += 1
        elif c[0] == "m":
            out.append(_M_POINTS[mi % len(_M_POINTS)])
            mi += 1
        elif c[0] == "x" and scenario.chart.kind in ("gaussian", "flat"):
            out.append([Fraction(1, 2), Fraction(-1, 3), Fraction(1, 4), Fraction(2, 5)][len(out) % 4])
        else:
            out.append(Fraction(0))
    return tuple(out)


def build(scenario, spec, base=None, require_spd=True):
    """Realize a scenario as a MetricMeasure over the given jet spec."""
    if base is None:
        base = default_base(scenario)
        if spec.mode == "float":
            base = tuple(float(b) for b in base)
    return metric_measure(
        scenario.chart, scenario.metric, scenario.phi, scenario.lam, spec, base, require_spd
    )


# -- JSON interchange -------------------------------------------------------


def scenario_to_dict(sc):
    return {
        "name": sc.name,
        "kind": sc.chart.kind,
        "coords": list(sc.chart.coords),
        "metric": {"%d,%d" % key: expr for key, expr in sorted(sc.metric.items())},
        "phi": sc.phi,
        "lambda": _fs(sc.lam),
        "family": sc.family,
        "params": sc.params,
        "notes": sc.notes,
    }


def scenario_from_dict(d):
    try:
        coords = tuple(d["coords"])
        metric = {}
        for key, expr in d["metric"].items():
            i, j = key.split(",")
            metric[(int(i), int(j))] = expr
        lam = d.get("lambda", "0")
        if isinstance(lam, str):
            lam = Fraction(lam.strip("()"))
        else:
            lam = Fraction(lam)
        return Scenario(
            name=d["name"],
            chart=Chart(coords, d.get("kind", "custom")),
            metric=metric,
            phi=d["phi"],
            lam=lam,
            family=d.get("family", "custom"),
            params=d.get("params", {}),
            notes=d.get("notes", ""),
        )
    except (KeyError, ValueError, AttributeError) as e:
        raise ValueError("malformed scenario document: %s" % e)


def scenario_to_json(sc):
    return json.dumps(scenario_to_dict(sc), indent=2, sort_keys=True) + "\n"


def scenario_from_json(text):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError("scenario file is not valid JSON: %s" % e)
    return scenario_from_dict(d)
