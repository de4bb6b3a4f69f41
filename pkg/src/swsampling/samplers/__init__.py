"""Direction samplers and the :func:`sample` dispatcher."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, SizeError
from ..sphere import DirectionSet, Kind, Randomization, SamplerSpec, make_rng
from .lds import (
    CubePointSet,
    cube_dim_for,
    halton,
    load_sobol_table,
    map_to_sphere,
    randomize_rotation,
    randomize_shift,
    sobol,
)
from .montecarlo import haar_orthogonal, sample_orthonormal, sample_uniform
from .pointsets import (
    OptimizerTrace,
    fibonacci_sphere,
    riesz_energy,
    riesz_minimize,
    roots_of_unity,
    ssw_minimize,
    ssw_objective,
)

__all__ = [
    "CubePointSet",
    "OptimizerTrace",
    "fibonacci_sphere",
    "haar_orthogonal",
    "halton",
    "load_sobol_table",
    "map_to_sphere",
    "randomize_rotation",
    "randomize_shift",
    "riesz_energy",
    "riesz_minimize",
    "roots_of_unity",
    "sample",
    "sample_orthonormal",
    "sample_uniform",
    "sobol",
    "ssw_minimize",
    "ssw_objective",
]

_KNOWN_PARAMS = {
    Kind.UNIFORM: set(),
    Kind.ORTHONORMAL: set(),
    Kind.HALTON: {"start_index"},
    Kind.SOBOL: {"include_zero", "order", "table"},
    Kind.FIBONACCI: {"literal"},
    Kind.RIESZ: {"s", "T", "step", "backtrack", "optimize"},
    Kind.SSW: {"L", "T", "lr"},
}


def sample(
    spec: SamplerSpec | str,
    m: int,
    d: int,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
    trace: list | None = None,
) -> DirectionSet:
    """Generate ``m`` directions on ``S^{d-1}`` following ``spec``.

    Randomness comes from ``rng`` if given, otherwise from ``make_rng(seed)``.
    Optimizer traces (Riesz, SSW) are appended to ``trace`` when a list is
    passed. For ``riesz`` on the circle (``d = 2``) the minimizer is known in
    closed form, the ``m``-th roots of unity, and is returned without
    optimization unless ``optimize=True``.
    """
    if isinstance(spec, str):
        spec = SamplerSpec.parse(spec)
    spec.check_dim(d)
    if m < 1:
        raise SizeError(f"need at least one direction, got M={m}")
    unknown = set(spec.hyperparams) - _KNOWN_PARAMS[spec.kind]
    if unknown:
        raise ConfigError(f"unknown parameters for {spec.kind.value}: {sorted(unknown)}")
    rng = rng if rng is not None else make_rng(seed)
    hp = spec.hyperparams
    degenerate = 0

    if spec.kind is Kind.UNIFORM:
        pts = sample_uniform(m, d, rng).directions
    elif spec.kind is Kind.ORTHONORMAL:
        pts = sample_orthonormal(m, d, rng).directions
    elif spec.kind in (Kind.HALTON, Kind.SOBOL):
        k = cube_dim_for(spec.mapping, d)
        if spec.kind is Kind.HALTON:
            cube = halton(m, k, start_index=int(hp.get("start_index", 1)))
        else:
            table = load_sobol_table(hp["table"]) if "table" in hp else None
            cube = sobol(m, k, bool(hp.get("include_zero", False)), hp.get("order", "natural"), table)
        if spec.randomization is Randomization.SHIFT:
            cube = randomize_shift(cube, rng)
        mapped = map_to_sphere(cube, spec.mapping)
        pts, degenerate = mapped.directions, mapped.degenerate
    elif spec.kind is Kind.FIBONACCI:
        pts = fibonacci_sphere(m, literal=bool(hp.get("literal", False))).directions
    elif spec.kind is Kind.RIESZ:
        if d == 2 and not hp.get("optimize", False):
            pts = roots_of_unity(m)
        else:
            dirs, tr = riesz_minimize(
                m,
                d,
                s=float(hp.get("s", 0.1)),
                T=int(hp.get("T", 10)),
                step=float(hp.get("step", 1.0)),
                rng=rng,
                backtrack=bool(hp.get("backtrack", False)),
            )
            pts = dirs.directions
            if trace is not None:
                trace.append(tr)
    elif spec.kind is Kind.SSW:
        dirs, tr = ssw_minimize(
            m, d, L=int(hp.get("L", 500)), T=int(hp.get("T", 250)), lr=float(hp.get("lr", 150.0)), rng=rng
        )
        pts = dirs.directions
        if trace is not None:
            trace.append(tr)
    else:  # pragma: no cover
        raise ConfigError(f"unsupported kind {spec.kind}")

    out = DirectionSet(pts, spec, seed, degenerate)
    if spec.randomization is Randomization.ROTATION:
        out = randomize_rotation(out, rng)
    return out
